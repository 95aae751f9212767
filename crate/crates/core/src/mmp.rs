//! Markov-modulated processes and their `(sigma(theta), rho(theta))` characterization.
//!
//! A process emits, at every slot, an amount drawn from a distribution selected by
//! the state of a finite ergodic Markov chain. Its MGF envelope is obtained from the
//! Perron pair of the exponential transition matrix `psi(theta)`, built on the
//! time-reversed chain with each column weighted by the destination-state MGF.
//!
//! All exponent arithmetic stays in the log domain: `psi` is handled as
//! `exp(shift) * scaled` so that large `theta` never overflows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::ServiceModel;

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
const PERRON_MAX_ITER: usize = 100_000;
const PERRON_STEP_TOL: f64 = 1e-13;
const PERRON_RESIDUAL_TOL: f64 = 1e-11;

/// Per-state emission distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EmissionDist {
    Constant {
        value: f64,
    },
    #[serde(rename = "bernoulli_scaled")]
    ScaledBernoulli {
        value: f64,
        prob: f64,
    },
    Poisson {
        mean: f64,
    },
}

impl EmissionDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            EmissionDist::Constant { value } => value.is_finite() && value >= 0.0,
            EmissionDist::ScaledBernoulli { value, prob } => {
                value.is_finite() && value >= 0.0 && (0.0..=1.0).contains(&prob)
            }
            EmissionDist::Poisson { mean } => mean.is_finite() && mean > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidEmission(format!("{self:?}")))
        }
    }

    /// `E[exp(theta Y)]`.
    pub fn mgf(&self, theta: f64) -> f64 {
        self.log_mgf(theta).exp()
    }

    /// `ln E[exp(theta Y)]`, evaluated without forming large exponentials.
    pub fn log_mgf(&self, theta: f64) -> f64 {
        match *self {
            EmissionDist::Constant { value } => theta * value,
            EmissionDist::ScaledBernoulli { value, prob } => {
                if prob == 0.0 || value == 0.0 || theta == 0.0 {
                    return 0.0;
                }
                if prob == 1.0 {
                    return theta * value;
                }
                let x = theta * value;
                if x > 0.0 {
                    x + (prob + (1.0 - prob) * (-x).exp()).ln()
                } else {
                    (prob * x.exp_m1()).ln_1p()
                }
            }
            EmissionDist::Poisson { mean } => mean * theta.exp_m1(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            EmissionDist::Constant { value } => value,
            EmissionDist::ScaledBernoulli { value, prob } => value * prob,
            EmissionDist::Poisson { mean } => mean,
        }
    }

    /// Minimum and supremum of the support.
    pub fn support_bounds(&self) -> (f64, f64) {
        match *self {
            EmissionDist::Constant { value } => (value, value),
            EmissionDist::ScaledBernoulli { value, prob } => {
                let lo = if prob < 1.0 { 0.0 } else { value };
                let hi = if prob > 0.0 { value } else { 0.0 };
                (lo, hi)
            }
            EmissionDist::Poisson { .. } => (0.0, f64::INFINITY),
        }
    }
}

/// Free-function form of [`EmissionDist::mgf`].
pub fn mgf_emission(dist: &EmissionDist, theta: f64) -> f64 {
    dist.mgf(theta)
}

/// Free-function form of [`EmissionDist::support_bounds`].
pub fn support_bounds(dist: &EmissionDist) -> (f64, f64) {
    dist.support_bounds()
}

/// A stationary Markov-modulated process.
#[derive(Debug, Clone, PartialEq)]
pub struct Mmp {
    transition: Matrix,
    emissions: Vec<EmissionDist>,
    stationary: Vec<f64>,
    reversed: Matrix,
}

impl Mmp {
    pub fn new(transition: Matrix, emissions: Vec<EmissionDist>) -> Result<Self> {
        let n = transition.dim();
        if n == 0 {
            return Err(Error::InvalidTransition("empty state space".into()));
        }
        if emissions.len() != n {
            return Err(Error::InvalidTransition(format!(
                "{} emission distributions for {n} states",
                emissions.len()
            )));
        }
        for e in &emissions {
            e.validate()?;
        }
        check_stochastic(&transition)?;
        let stationary = stationary_distribution(&transition)?;
        let reversed = reversed_transition(&transition, &stationary);
        Ok(Mmp {
            transition,
            emissions,
            stationary,
            reversed,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], emissions: Vec<EmissionDist>) -> Result<Self> {
        let m = Matrix::from_rows(rows)
            .ok_or_else(|| Error::InvalidTransition("matrix is not square".into()))?;
        Self::new(m, emissions)
    }

    /// Single-state process with i.i.d. emissions.
    pub fn iid(dist: EmissionDist) -> Result<Self> {
        Self::new(Matrix::identity(1), vec![dist])
    }

    /// Markov-modulated on-off process: `p_on` = P(Off -> On), `p_off` = P(On -> Off).
    /// State 0 is Off (no emission), state 1 is On.
    pub fn on_off(p_on: f64, p_off: f64, on: EmissionDist) -> Result<Self> {
        Self::from_rows(
            &[vec![1.0 - p_on, p_on], vec![p_off, 1.0 - p_off]],
            vec![EmissionDist::Constant { value: 0.0 }, on],
        )
    }

    pub fn n_states(&self) -> usize {
        self.transition.dim()
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn reversed(&self) -> &Matrix {
        &self.reversed
    }

    pub fn emissions(&self) -> &[EmissionDist] {
        &self.emissions
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn mean_rate(&self) -> f64 {
        self.stationary
            .iter()
            .zip(&self.emissions)
            .map(|(p, e)| p * e.mean())
            .sum()
    }

    /// Largest possible per-slot emission over all states.
    pub fn max_emission(&self) -> f64 {
        self.emissions
            .iter()
            .map(|e| e.support_bounds().1)
            .fold(0.0, f64::max)
    }

    /// Smallest possible per-slot emission over all states.
    pub fn min_emission(&self) -> f64 {
        self.emissions
            .iter()
            .map(|e| e.support_bounds().0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_single_state(&self) -> bool {
        self.n_states() == 1
    }
}

fn check_stochastic(p: &Matrix) -> Result<()> {
    for i in 0..p.dim() {
        let row = p.row(i);
        if let Some(j) = row.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidTransition(format!(
                "entry ({i}, {j}) = {} is not a probability",
                row[j]
            )));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidTransition(format!(
                "row {i} sums to {s}, expected 1"
            )));
        }
    }
    let unreachable = strongly_connected_miss(p);
    if !unreachable.is_empty() {
        return Err(Error::Reducible { unreachable });
    }
    Ok(())
}

/// States that are not in the same communicating class as state 0.
fn strongly_connected_miss(p: &Matrix) -> Vec<usize> {
    let n = p.dim();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { p[(i, j)] } else { p[(j, i)] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    (0..n).filter(|&i| !(fwd[i] && bwd[i])).collect()
}

/// Stationary distribution of an irreducible stochastic matrix.
///
/// Uses the Grassmann-Taksar-Heyman elimination, which involves no subtractions
/// and therefore keeps every component strictly positive.
pub fn stationary_distribution(p: &Matrix) -> Result<Vec<f64>> {
    let n = p.dim();
    let unreachable = strongly_connected_miss(p);
    if !unreachable.is_empty() {
        return Err(Error::Reducible { unreachable });
    }
    let mut a = p.clone();
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                a[(i, j)] += aik * a[(k, j)];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[(i, k)]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);

    let residual = p
        .vec_mul(&pi)
        .iter()
        .zip(&pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if residual > STATIONARY_TOL || pi.iter().any(|&x| x <= 0.0) {
        return Err(Error::Stationary { residual });
    }
    Ok(pi)
}

/// Transition matrix of the time-reversed chain: `P^r[i][j] = pi_j / pi_i * P[j][i]`.
pub fn reversed_transition(p: &Matrix, pi: &[f64]) -> Matrix {
    let n = p.dim();
    let mut r = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = pi[j] / pi[i] * p[(j, i)];
        }
    }
    r
}

/// `psi(theta)[i][j] = P^r[i][j] * phi_j(theta)`.
pub fn exp_transition_matrix(mmp: &Mmp, theta: f64) -> Matrix {
    let (scaled, shift) = scaled_exp_transition(mmp, theta);
    let n = scaled.dim();
    let mut psi = scaled;
    let f = shift.exp();
    for i in 0..n {
        for j in 0..n {
            psi[(i, j)] *= f;
        }
    }
    psi
}

/// `psi(theta) = exp(shift) * scaled`, with the largest column weight of `scaled` equal to 1.
fn scaled_exp_transition(mmp: &Mmp, theta: f64) -> (Matrix, f64) {
    let logs: Vec<f64> = mmp.emissions.iter().map(|e| e.log_mgf(theta)).collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut m = mmp.reversed.clone();
    let n = m.dim();
    for j in 0..n {
        let w = (logs[j] - shift).exp();
        for i in 0..n {
            m[(i, j)] *= w;
        }
    }
    (m, shift)
}

/// Dominant eigen-pair of a nonnegative primitive matrix.
#[derive(Debug, Clone)]
pub struct PerronPair {
    pub lambda: f64,
    /// Right eigenvector, normalized so that `<nu, pi> = 1`.
    pub nu: Vec<f64>,
    pub iterations: usize,
    /// `||psi nu - lambda nu||_inf / lambda`
    pub residual: f64,
}

/// Power iteration with `<nu, pi> = 1` normalization at every step.
pub fn perron(psi: &Matrix, pi: &[f64]) -> Result<PerronPair> {
    let n = psi.dim();
    assert_eq!(pi.len(), n, "pi has wrong length");
    if n == 1 {
        return Ok(PerronPair {
            lambda: psi[(0, 0)],
            nu: vec![1.0 / pi[0]],
            iterations: 0,
            residual: 0.0,
        });
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let residual_of = |v: &[f64], lambda: f64| {
        psi.mul_vec(v)
            .iter()
            .zip(v)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0, f64::max)
            / lambda
    };

    // Periodic inputs do not converge under plain iteration; after `switch`
    // steps the iteration moves to psi + c I, which has the same eigenvector.
    let switch = 2_000;
    let diag_shift = (0..n)
        .flat_map(|i| psi.row(i).iter().copied())
        .fold(0.0, f64::max);

    let mut v = vec![1.0; n];
    let mut lambda = f64::NAN;
    let mut last_residual = f64::INFINITY;
    for it in 1..=PERRON_MAX_ITER {
        let shift = if it > switch { diag_shift } else { 0.0 };
        let mut w = psi.mul_vec(&v);
        if shift > 0.0 {
            w.iter_mut().zip(&v).for_each(|(a, b)| *a += shift * b);
        }
        let est = dot(&w, pi);
        if !(est.is_finite() && est > 0.0) {
            return Err(Error::PerronNonConvergence {
                iterations: it,
                residual: f64::NAN,
            });
        }
        w.iter_mut().for_each(|x| *x /= est);
        let step = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = w.iter().copied().fold(0.0, f64::max);
        let new_lambda = est - shift;
        let converged_lambda = (new_lambda - lambda).abs() <= PERRON_STEP_TOL * new_lambda;
        v = w;
        lambda = new_lambda;
        if converged_lambda && step <= PERRON_STEP_TOL * scale {
            last_residual = residual_of(&v, lambda);
            if last_residual <= PERRON_RESIDUAL_TOL {
                return Ok(PerronPair {
                    lambda,
                    nu: v,
                    iterations: it,
                    residual: last_residual,
                });
            }
        }
    }
    if last_residual.is_infinite() {
        last_residual = residual_of(&v, lambda);
    }
    Err(Error::PerronNonConvergence {
        iterations: PERRON_MAX_ITER,
        residual: last_residual,
    })
}

/// `(sigma(theta), rho(theta))` characterization of one process at one `theta`.
///
/// For a service process the eigen-pair is that of `psi(-theta)`; `theta` itself
/// is always stored positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralChar {
    pub theta: f64,
    pub log_lambda: f64,
    pub nu: Vec<f64>,
    pub sigma: f64,
    pub rho: f64,
}

impl SpectralChar {
    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }

    pub fn min_nu(&self) -> f64 {
        self.nu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn deterministic(theta: f64, rho: f64) -> Self {
        SpectralChar {
            theta,
            log_lambda: theta * rho,
            nu: vec![1.0],
            sigma: 0.0,
            rho,
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidTheta(theta))
    }
}

/// Perron pair of `psi(signed_theta)` returned as `(ln lambda, nu)`.
fn log_perron(mmp: &Mmp, signed_theta: f64) -> Result<(f64, Vec<f64>)> {
    let (scaled, shift) = scaled_exp_transition(mmp, signed_theta);
    let pair = perron(&scaled, &mmp.stationary)?;
    Ok((shift + pair.lambda.ln(), pair.nu))
}

/// `rho = ln(lambda)/theta`, `sigma = -ln(min nu)/theta`.
pub fn characterize_arrival(mmp: &Mmp, theta: f64) -> Result<SpectralChar> {
    check_theta(theta)?;
    let (log_lambda, nu) = log_perron(mmp, theta)?;
    let min_nu = nu.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SpectralChar {
        theta,
        log_lambda,
        sigma: (-min_nu.ln() / theta).max(0.0),
        rho: log_lambda / theta,
        nu,
    })
}

/// `rho = -ln(lambda(-theta))/theta`, `sigma = -ln(min nu(-theta))/theta`.
pub fn characterize_service(model: &ServiceModel, theta: f64) -> Result<SpectralChar> {
    check_theta(theta)?;
    match model {
        ServiceModel::ConstantRate { rate } => Ok(SpectralChar::deterministic(theta, *rate)),
        ServiceModel::Markov { mmp } => {
            let (log_lambda, nu) = log_perron(mmp, -theta)?;
            let min_nu = nu.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(SpectralChar {
                theta,
                log_lambda,
                sigma: (-min_nu.ln() / theta).max(0.0),
                rho: -log_lambda / theta,
                nu,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    fn mmoo() -> Mmp {
        Mmp::on_off(0.7, 0.1, EmissionDist::Poisson { mean: 2.0 }).unwrap()
    }

    #[test]
    fn mgf_examples() {
        assert_eq!(
            mgf_emission(&EmissionDist::Constant { value: 0.0 }, 0.7),
            1.0
        );
        assert_eq!(mgf_emission(&EmissionDist::Poisson { mean: 2.0 }, 0.0), 1.0);
        let mu: f64 = 1.3;
        let th: f64 = 0.4;
        let expected = (mu * (th.exp() - 1.0)).exp();
        assert!(close(
            mgf_emission(&EmissionDist::Poisson { mean: mu }, th),
            expected,
            1e-14
        ));
        // 0.5 + 0.5 e^{-0.5}, 30-digit reference
        let b = EmissionDist::ScaledBernoulli {
            value: 5.0,
            prob: 0.5,
        };
        assert!(close(
            mgf_emission(&b, -0.1),
            0.803265329856316711801899767496,
            1e-15
        ));
        assert!(close(b.mgf(0.3), 0.5 + 0.5 * 1.5f64.exp(), 1e-14));
    }

    #[test]
    fn support_examples() {
        assert_eq!(
            support_bounds(&EmissionDist::Constant { value: 4.0 }),
            (4.0, 4.0)
        );
        assert_eq!(
            support_bounds(&EmissionDist::Poisson { mean: 1.0 }),
            (0.0, f64::INFINITY)
        );
        assert_eq!(
            support_bounds(&EmissionDist::ScaledBernoulli {
                value: 6.0,
                prob: 1.0
            }),
            (6.0, 6.0)
        );
        assert_eq!(
            support_bounds(&EmissionDist::ScaledBernoulli {
                value: 6.0,
                prob: 0.3
            }),
            (0.0, 6.0)
        );
    }

    #[test]
    fn invalid_emissions() {
        assert!(EmissionDist::Poisson { mean: 0.0 }.validate().is_err());
        assert!(EmissionDist::ScaledBernoulli {
            value: 1.0,
            prob: 1.5
        }
        .validate()
        .is_err());
        assert!(EmissionDist::Constant { value: -1.0 }.validate().is_err());
    }

    #[test]
    fn stationary_examples() {
        let p = Matrix::from_rows(&[vec![0.3, 0.7], vec![0.1, 0.9]]).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        assert!(close(pi[0], 0.125, 1e-14) && close(pi[1], 0.875, 1e-14));

        assert_eq!(
            stationary_distribution(&Matrix::identity(1)).unwrap(),
            vec![1.0]
        );

        let ds = Matrix::from_rows(&[
            vec![0.2, 0.5, 0.3],
            vec![0.5, 0.1, 0.4],
            vec![0.3, 0.4, 0.3],
        ])
        .unwrap();
        for x in stationary_distribution(&ds).unwrap() {
            assert!(close(x, 1.0 / 3.0, 1e-13));
        }
    }

    #[test]
    fn reducible_chain_names_states() {
        let p = Matrix::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.5, 0.5],
        ])
        .unwrap();
        match stationary_distribution(&p) {
            Err(Error::Reducible { unreachable }) => assert_eq!(unreachable, vec![2]),
            other => panic!("expected reducible error, got {other:?}"),
        }
        assert!(matches!(
            Mmp::new(p, vec![EmissionDist::Constant { value: 0.0 }; 3]),
            Err(Error::Reducible { .. })
        ));
    }

    #[test]
    fn non_stochastic_rejected() {
        let r = Mmp::from_rows(
            &[vec![0.5, 0.6], vec![0.5, 0.5]],
            vec![EmissionDist::Constant { value: 0.0 }; 2],
        );
        assert!(matches!(r, Err(Error::InvalidTransition(_))));
    }

    #[test]
    fn reversal_examples() {
        let m = mmoo();
        assert!(m.reversed().max_abs_diff(m.transition()) < 1e-15);

        let sym = Matrix::from_rows(&[vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        let r = reversed_transition(&sym, &[0.5, 0.5]);
        assert!(r.max_abs_diff(&sym.transpose()) < 1e-15);

        // 0 -> 1 -> 2 -> 0 reversed is 0 -> 2 -> 1 -> 0
        let cyc = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let pi = stationary_distribution(&cyc).unwrap();
        let r = reversed_transition(&cyc, &pi);
        let expected = Matrix::from_rows(&[
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(r.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn exp_transition_examples() {
        let (p, q, mu, th) = (0.7, 0.1, 2.0, 0.5f64);
        let m = mmoo();
        let psi = exp_transition_matrix(&m, th);
        let phi = (mu * (th.exp() - 1.0)).exp();
        let expected =
            Matrix::from_rows(&[vec![1.0 - p, p * phi], vec![q, (1.0 - q) * phi]]).unwrap();
        assert!(psi.max_abs_diff(&expected) < 1e-13);

        let psi0 = exp_transition_matrix(&m, 0.0);
        assert!(psi0.max_abs_diff(m.reversed()) < 1e-15);

        let c = Mmp::iid(EmissionDist::Constant { value: 3.0 }).unwrap();
        assert!(close(
            exp_transition_matrix(&c, 0.2)[(0, 0)],
            0.6f64.exp(),
            1e-15
        ));
    }

    #[test]
    fn perron_examples() {
        let one = Matrix::from_rows(&[vec![2.5]]).unwrap();
        let pair = perron(&one, &[1.0]).unwrap();
        assert_eq!((pair.lambda, pair.nu), (2.5, vec![1.0]));

        let m = mmoo();
        let pair = perron(m.reversed(), m.stationary()).unwrap();
        assert!(close(pair.lambda, 1.0, 1e-13));
        for x in &pair.nu {
            assert!(close(*x, 1.0, 1e-12));
        }
    }

    #[test]
    fn perron_matches_quadratic_root() {
        let (p, q, mu, th) = (0.35, 0.2, 1.5, 0.8f64);
        let m = Mmp::on_off(p, q, EmissionDist::Poisson { mean: mu }).unwrap();
        let psi = exp_transition_matrix(&m, th);
        let pair = perron(&psi, m.stationary()).unwrap();
        let (a, b, c, d) = (psi[(0, 0)], psi[(0, 1)], psi[(1, 0)], psi[(1, 1)]);
        let tr = a + d;
        let det = a * d - b * c;
        let lambda = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
        assert!(close(pair.lambda, lambda, 1e-10));
        // eigenvector (b, lambda - a) rescaled to <nu, pi> = 1
        let (v0, v1) = (b, lambda - a);
        let s = v0 * m.stationary()[0] + v1 * m.stationary()[1];
        assert!(close(pair.nu[0], v0 / s, 1e-10));
        assert!(close(pair.nu[1], v1 / s, 1e-10));
    }

    #[test]
    fn periodic_psi_still_converges() {
        // two-cycle: psi(0) has eigenvalues +1 and -1
        let m = Mmp::from_rows(
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![
                EmissionDist::Constant { value: 0.0 },
                EmissionDist::Constant { value: 1.0 },
            ],
        )
        .unwrap();
        let th = 0.3f64;
        let c = characterize_arrival(&m, th).unwrap();
        // lambda^2 = e^{theta}
        assert!(close(c.lambda(), (0.5 * th).exp(), 1e-11));
    }

    #[test]
    fn characterize_iid_arrivals() {
        let (mu, th) = (2.0, 0.7f64);
        let c = characterize_arrival(&Mmp::iid(EmissionDist::Poisson { mean: mu }).unwrap(), th)
            .unwrap();
        assert!(close(c.rho, mu * (th.exp() - 1.0) / th, 1e-14));
        assert_eq!(c.sigma, 0.0);

        let c = characterize_arrival(
            &Mmp::iid(EmissionDist::Constant { value: 3.0 }).unwrap(),
            th,
        )
        .unwrap();
        assert!(close(c.rho, 3.0, 1e-14));
        assert_eq!(c.sigma, 0.0);
    }

    #[test]
    fn characterize_service_examples() {
        let c = characterize_service(&ServiceModel::ConstantRate { rate: 5.0 }, 0.4).unwrap();
        assert_eq!((c.sigma, c.rho), (0.0, 5.0));

        let b = ServiceModel::Markov {
            mmp: Mmp::iid(EmissionDist::ScaledBernoulli {
                value: 5.0,
                prob: 0.5,
            })
            .unwrap(),
        };
        let c = characterize_service(&b, 0.1).unwrap();
        assert!(close(c.rho, 2.19070196379838628544234766377, 1e-13));
        assert_eq!(c.sigma, 0.0);

        // theta -> 0 limit of an on-off service is its mean rate
        let onoff = Mmp::on_off(
            0.3,
            0.2,
            EmissionDist::ScaledBernoulli {
                value: 4.0,
                prob: 0.9,
            },
        )
        .unwrap();
        let mean = onoff.mean_rate();
        let c = characterize_service(&ServiceModel::Markov { mmp: onoff }, 1e-6).unwrap();
        assert!((c.rho - mean).abs() < 1e-4, "{} vs {}", c.rho, mean);
    }

    #[test]
    fn theta_must_be_positive() {
        let m = mmoo();
        assert!(matches!(
            characterize_arrival(&m, 0.0),
            Err(Error::InvalidTheta(_))
        ));
        assert!(characterize_arrival(&m, -1.0).is_err());
    }

    #[test]
    fn large_theta_stays_finite() {
        let m = mmoo();
        let c = characterize_arrival(&m, 40.0).unwrap();
        assert!(c.rho.is_finite() && c.sigma.is_finite());
        let s = ServiceModel::Markov {
            mmp: Mmp::iid(EmissionDist::Constant { value: 3.0 }).unwrap(),
        };
        let c = characterize_service(&s, 5000.0).unwrap();
        assert!(close(c.rho, 3.0, 1e-12));
    }

    #[test]
    fn mmoo_characterization_invariants() {
        let m = mmoo();
        let c = characterize_arrival(&m, 0.5).unwrap();
        let norm: f64 = c.nu.iter().zip(m.stationary()).map(|(a, b)| a * b).sum();
        assert!((norm - 1.0).abs() < 1e-10);
        assert!(c.nu.iter().all(|&x| x > 0.0));
        assert!(c.sigma >= 0.0);
        assert!(c.rho >= m.mean_rate());
        let psi = exp_transition_matrix(&m, 0.5);
        let res = psi
            .mul_vec(&c.nu)
            .iter()
            .zip(&c.nu)
            .map(|(a, b)| (a - c.lambda() * b).abs())
            .fold(0.0, f64::max);
        assert!(res <= 1e-11 * c.lambda());
    }
}
