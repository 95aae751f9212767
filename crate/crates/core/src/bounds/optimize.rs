//! One-dimensional minimization over `theta` and quantile inversion.

use crate::error::{Error, Result};
use crate::network::ThetaDomain;

const GRID_LOG_POINTS: usize = 100;
const GRID_EDGE_POINTS: usize = 100;
const GOLDEN_ITERS: usize = 80;
/// Largest delay probed by [`delay_quantile`].
pub const QUANTILE_CAP: u64 = 1_000_000;

fn log_spaced(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
}

fn finite_or_inf<F: Fn(f64) -> Result<f64>>(f: &F, x: f64) -> f64 {
    match f(x) {
        Ok(v) if !v.is_nan() => v,
        _ => f64::INFINITY,
    }
}

/// Minimizes a log-objective over the domain: log-spaced grid, a second grid
/// crowding the upper endpoint, then golden-section refinement.
///
/// Points where the objective errors are treated as `+inf`.
pub fn optimize_log_theta<F>(objective: F, domain: ThetaDomain) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let hi = domain.upper();
    let lo = (hi * 1e-6).max(domain.lo.max(f64::MIN_POSITIVE));
    let mut grid: Vec<f64> = log_spaced(lo, hi, GRID_LOG_POINTS)
        .chain(log_spaced(1e-9, 0.5, GRID_EDGE_POINTS).map(|s| hi * (1.0 - s)))
        .filter(|&x| x > domain.lo && x <= hi)
        .collect();
    grid.push(hi);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let values: Vec<f64> = grid.iter().map(|&x| finite_or_inf(&objective, x)).collect();
    let (best, &best_v) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    if best_v.is_infinite() {
        return Err(Error::InfeasibleObjective);
    }

    let mut a = if best == 0 { lo * 0.5 } else { grid[best - 1] };
    let mut b = if best + 1 == grid.len() {
        grid[best]
    } else {
        grid[best + 1]
    };
    let (mut bx, mut bv) = (grid[best], best_v);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = finite_or_inf(&objective, c);
    let mut fd = finite_or_inf(&objective, d);
    for _ in 0..GOLDEN_ITERS {
        if (b - a) <= 1e-12 * b {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = finite_or_inf(&objective, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = finite_or_inf(&objective, d);
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v < bv {
                bx = x;
                bv = v;
            }
        }
    }
    Ok((bx, bv))
}

/// Linear-domain wrapper around [`optimize_log_theta`].
pub fn optimize_theta<F>(objective: F, domain: ThetaDomain) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let (t, v) = optimize_log_theta(
        |x| {
            let y = objective(x);
            Ok(if y > 0.0 {
                y.ln()
            } else if y == 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            })
        },
        domain,
    )?;
    Ok((t, v.exp()))
}

/// Least `T` with `log_bound(T) <= ln epsilon`; `log_bound` must be nonincreasing.
pub fn delay_quantile<F>(log_bound: F, epsilon: f64) -> Result<u64>
where
    F: Fn(u64) -> Result<f64>,
{
    let target = epsilon.ln();
    let ok = |t: u64| -> Result<bool> { Ok(epsilon >= 1.0 || log_bound(t)? <= target) };
    if ok(0)? {
        return Ok(0);
    }
    let mut lo = 0u64;
    let mut hi = 1u64;
    while !ok(hi)? {
        lo = hi;
        if hi >= QUANTILE_CAP {
            return Err(Error::EpsilonUnreachable {
                epsilon,
                cap: QUANTILE_CAP,
            });
        }
        hi = (hi * 2).min(QUANTILE_CAP);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
