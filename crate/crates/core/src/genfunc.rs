//! Bounding generating functions of the form `c * prod_j 1/(1 - a_j z)`.
//!
//! Coefficients come from the forward convolution recurrence, which is exact
//! for repeated poles and only ever adds positive terms. Poles are rescaled by
//! the largest rate so the running coefficients stay in a safe range; the
//! scale is restored in the log domain.

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-10;
/// Linear-domain values below this are reported as 0.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Tails at least this fraction of `G(r)` are computed from `G(r) - partial sum`.
const IDENTITY_GUARD: f64 = 1e-6;
const MAX_DIRECT_TERMS: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RationalGf {
    pub log_prefactor: f64,
    pub pole_rates: Vec<f64>,
}

impl RationalGf {
    /// Poles with rate 0 contribute a factor 1 and are dropped.
    pub fn new(log_prefactor: f64, pole_rates: Vec<f64>) -> Self {
        debug_assert!(
            pole_rates.iter().all(|a| a.is_finite() && *a >= 0.0),
            "pole rates must be finite and nonnegative: {pole_rates:?}"
        );
        RationalGf {
            log_prefactor,
            pole_rates: pole_rates.into_iter().filter(|a| *a > 0.0).collect(),
        }
    }

    pub fn constant(log_prefactor: f64) -> Self {
        RationalGf {
            log_prefactor,
            pole_rates: Vec::new(),
        }
    }

    pub fn single_pole(log_prefactor: f64, rate: f64) -> Self {
        Self::new(log_prefactor, vec![rate])
    }

    /// Multiplies by the constant `exp(log_factor)`.
    pub fn scaled(mut self, log_factor: f64) -> Self {
        self.log_prefactor += log_factor;
        self
    }

    pub fn prefactor(&self) -> f64 {
        self.log_prefactor.exp()
    }

    fn max_rate(&self) -> f64 {
        self.pole_rates.iter().copied().fold(0.0, f64::max)
    }

    pub fn radius(&self) -> f64 {
        let a = self.max_rate();
        if a == 0.0 {
            f64::INFINITY
        } else {
            1.0 / a
        }
    }

    /// Natural log of the k-th coefficient; `-inf` when it is exactly zero.
    pub fn log_coeff(&self, k: u64) -> f64 {
        if self.pole_rates.is_empty() {
            return if k == 0 {
                self.log_prefactor
            } else {
                f64::NEG_INFINITY
            };
        }
        let a_max = self.max_rate();
        let mut walk = ScaledWalk::new(&self.pole_rates, a_max);
        for _ in 0..k {
            walk.step();
        }
        self.log_prefactor + k as f64 * a_max.ln() + walk.value().ln()
    }

    pub fn coeff(&self, k: u64) -> f64 {
        floor(self.log_coeff(k).exp())
    }

    /// The first `len` coefficients, in the linear domain.
    pub fn coeffs(&self, len: usize) -> Vec<f64> {
        if self.pole_rates.is_empty() {
            let mut v = vec![0.0; len];
            if let Some(first) = v.first_mut() {
                *first = self.prefactor();
            }
            return v;
        }
        let a_max = self.max_rate();
        let la = a_max.ln();
        let mut walk = ScaledWalk::new(&self.pole_rates, a_max);
        let mut out = Vec::with_capacity(len);
        for k in 0..len {
            if k > 0 {
                walk.step();
            }
            out.push(floor(
                (self.log_prefactor + k as f64 * la + walk.value().ln()).exp(),
            ));
        }
        out
    }

    fn check_inside(&self, z: f64) -> Result<()> {
        for (j, &a) in self.pole_rates.iter().enumerate() {
            if a * z >= 1.0 {
                return Err(Error::Divergence {
                    pole: j,
                    rate: a,
                    z,
                });
            }
        }
        Ok(())
    }

    pub fn log_eval(&self, z: f64) -> Result<f64> {
        assert!(z >= 0.0, "z must be nonnegative");
        self.check_inside(z)?;
        Ok(self.log_prefactor
            - self
                .pole_rates
                .iter()
                .map(|a| (-a * z).ln_1p())
                .sum::<f64>())
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        self.log_eval(z).map(f64::exp)
    }

    /// `ln sum_{u>=0} r^u [z^{T+u}] F`.
    pub fn log_tail_sum(&self, r: f64, t: u64, rel_tol: f64) -> Result<f64> {
        assert!(r >= 0.0, "r must be nonnegative");
        if r == 0.0 {
            return Ok(self.log_coeff(t));
        }
        self.check_inside(r)?;
        if self.pole_rates.is_empty() {
            return Ok(if t == 0 {
                self.log_prefactor
            } else {
                f64::NEG_INFINITY
            });
        }
        let a_max = self.max_rate();
        let q = r * a_max;
        let n = self.pole_rates.len() as f64;

        // Scaled series: h_k = [z^k] prod 1/(1 - b_j z), b_j = a_j / a_max <= 1.
        // Target: ln c + T ln a_max + ln sum_u q^u h_{T+u}.
        let mut walk = ScaledWalk::new(&self.pole_rates, a_max);
        let mut partial = 0.0;
        let mut qk = 1.0;
        for _ in 0..t {
            partial += qk * walk.value();
            qk *= q;
            walk.step();
        }
        let g_total: f64 = walk.b.iter().map(|b| 1.0 / (1.0 - q * b)).product::<f64>();
        let head = self.log_prefactor + t as f64 * a_max.ln();

        let tail = g_total - partial;
        if tail >= IDENTITY_GUARD * g_total {
            return Ok(head + tail.max(0.0).ln() - t as f64 * q.ln());
        }

        let mut sum = 0.0;
        let mut qu = 1.0;
        let mut k = t;
        for _ in 0..MAX_DIRECT_TERMS {
            let term = qu * walk.value();
            sum += term;
            // h_{k+1}/h_k <= 1 + (n-1)/(k+1), so later terms shrink at least geometrically
            let ratio = q * (1.0 + (n - 1.0) / (k as f64 + 1.0));
            if ratio < 1.0 && term * ratio / (1.0 - ratio) <= rel_tol * sum {
                break;
            }
            walk.step();
            k += 1;
            qu *= q;
        }
        Ok(head + sum.ln())
    }

    pub fn tail_sum(&self, r: f64, t: u64, rel_tol: f64) -> Result<f64> {
        self.log_tail_sum(r, t, rel_tol).map(|x| floor(x.exp()))
    }
}

fn floor(x: f64) -> f64 {
    if x < UNDERFLOW_FLOOR {
        0.0
    } else {
        x
    }
}

/// Running coefficient state of `prod_j 1/(1 - b_j z)`.
///
/// `s[i]` is the current coefficient of the product over the first `i+1` factors.
struct ScaledWalk {
    b: Vec<f64>,
    s: Vec<f64>,
}

impl ScaledWalk {
    fn new(rates: &[f64], a_max: f64) -> Self {
        let b: Vec<f64> = rates.iter().map(|a| a / a_max).collect();
        let n = b.len();
        ScaledWalk { b, s: vec![1.0; n] }
    }

    fn value(&self) -> f64 {
        *self.s.last().unwrap_or(&1.0)
    }

    fn step(&mut self) {
        let mut below = 0.0;
        for (s, b) in self.s.iter_mut().zip(&self.b) {
            *s = below + b * *s;
            below = *s;
        }
    }
}

pub fn gf_product(factors: &[RationalGf]) -> RationalGf {
    RationalGf {
        log_prefactor: factors.iter().map(|f| f.log_prefactor).sum(),
        pole_rates: factors
            .iter()
            .flat_map(|f| f.pole_rates.iter().copied())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn product_examples() {
        let p = gf_product(&[
            RationalGf::single_pole(0.0, 0.5),
            RationalGf::single_pole(0.0, 0.25),
        ]);
        assert_eq!(p.pole_rates, vec![0.5, 0.25]);
        let e = gf_product(&[]);
        assert_eq!(e, RationalGf::constant(0.0));
        let f = RationalGf::single_pole(0.3, 0.5);
        let g = gf_product(&[f.clone(), RationalGf::constant(1.7)]);
        assert!(close(g.log_prefactor, 2.0, 1e-15));
        assert_eq!(g.pole_rates, f.pole_rates);
    }

    #[test]
    fn coeff_examples() {
        let g = RationalGf::new(0.0, vec![0.5, 0.25]);
        assert!(close(g.coeff(2), 0.4375, 1e-15));
        let c = RationalGf::new(1.3, vec![0.5, 0.25, 0.9]);
        assert!(close(c.coeff(0), 1.3f64.exp(), 1e-15));
        let s = RationalGf::single_pole(0.2, 0.7);
        assert!(close(s.coeff(9), 0.2f64.exp() * 0.7f64.powi(9), 1e-14));
        assert_eq!(RationalGf::constant(0.0).coeff(3), 0.0);
    }

    #[test]
    fn coeffs_match_single_coeff() {
        let g = RationalGf::new(-0.4, vec![0.9, 0.3, 0.9]);
        let v = g.coeffs(12);
        for (k, x) in v.iter().enumerate() {
            assert!(close(*x, g.coeff(k as u64), 1e-13));
        }
    }

    #[test]
    fn eval_examples() {
        let g = RationalGf::new(0.5, vec![0.5, 0.25]);
        let c = 0.5f64.exp();
        assert!(close(g.eval(0.0).unwrap(), c, 1e-15));
        assert!(close(g.eval(1.0).unwrap(), 8.0 * c / 3.0, 1e-15));
        assert!(close(
            RationalGf::single_pole(0.0, 0.5).eval(1.0).unwrap(),
            2.0,
            1e-15
        ));
        let partial: f64 = g.coeffs(200).iter().sum();
        assert!(close(partial, 8.0 * c / 3.0, 1e-13));
    }

    #[test]
    fn eval_divergence_names_pole() {
        let g = RationalGf::new(0.0, vec![0.25, 0.5]);
        match g.eval(2.0) {
            Err(Error::Divergence { pole, rate, .. }) => {
                assert_eq!(pole, 1);
                assert_eq!(rate, 0.5);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn radius_examples() {
        assert_eq!(RationalGf::single_pole(0.0, 0.5).radius(), 2.0);
        assert_eq!(RationalGf::new(0.0, vec![0.5, 0.25]).radius(), 2.0);
        assert_eq!(RationalGf::constant(0.0).radius(), f64::INFINITY);
    }

    #[test]
    fn tail_sum_examples() {
        let (a, r, t) = (0.6, 0.9, 7u64);
        let s = RationalGf::single_pole(0.4, a);
        let expected = 0.4f64.exp() * a.powi(t as i32) / (1.0 - r * a);
        assert!(close(s.tail_sum(r, t, 1e-12).unwrap(), expected, 1e-12));

        let g = RationalGf::new(0.0, vec![0.5, 0.25]);
        assert_eq!(g.tail_sum(0.0, 4, 1e-12).unwrap(), g.coeff(4));

        let (r, t) = (0.8f64, 3u64);
        let partial: f64 = g
            .coeffs(t as usize)
            .iter()
            .enumerate()
            .map(|(k, c)| c * r.powi(k as i32))
            .sum();
        let oracle = r.powi(-(t as i32)) * (g.eval(r).unwrap() - partial);
        assert!(close(g.tail_sum(r, t, 1e-12).unwrap(), oracle, 1e-10));
    }

    #[test]
    fn tail_sum_small_tail_uses_direct_route() {
        // tail far below 1e-6 * G(r): checked against brute summation
        let g = RationalGf::new(0.0, vec![0.3, 0.2, 0.3]);
        let (r, t) = (1.5f64, 60u64);
        let c = g.coeffs(400);
        let brute: f64 = (0..300).map(|u| r.powi(u as i32) * c[t as usize + u]).sum();
        let got = g.tail_sum(r, t, 1e-12).unwrap();
        assert!(close(got, brute, 1e-10), "{got} vs {brute}");
    }

    #[test]
    fn tail_sum_near_radius_terminates() {
        let g = RationalGf::new(0.0, vec![0.9, 0.8]);
        let r = (1.0 - 1e-9) / 0.9;
        let v = g.tail_sum(r, 50, DEFAULT_REL_TOL).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(g.tail_sum(1.2, 3, 1e-10).is_err());
    }

    #[test]
    fn repeated_pole_binomial() {
        let a: f64 = 0.7;
        let g = RationalGf::new(0.0, vec![a; 4]);
        // C(k+3, 3)
        let k = 10u64;
        let binom = (11.0 * 12.0 * 13.0) / 6.0;
        assert!(close(g.coeff(k), binom * a.powi(k as i32), 1e-13));
    }

    #[test]
    fn large_rates_stay_in_log_domain() {
        let g = RationalGf::new(0.0, vec![1e-200, 1e-250]);
        let lc = g.log_coeff(5);
        assert!(close(lc, 5.0 * (1e-200f64).ln(), 1e-12));
        assert_eq!(g.coeff(5), 0.0);
    }
}
