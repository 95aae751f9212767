//! Bounds with the maximal inequality applied at a single server `h` and the
//! union bound at all others.

use super::pmoo::{log_delay_coeff, pmoo_service_bgf, reduced_service_bgf};
use super::{check_theta_in, log_add, log_one_minus_exp_neg, xi_constant, Analyzer};
use crate::error::{Error, Result};
use crate::network::{check_martingale_site, remove_server};

/// Which prefactor the backlog bound uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BacklogForm {
    /// `xi e^{theta(sigma_{S>h} + sigma_{A not at h})} e^{-theta b} prod_{j != h} 1/(1 - e^{-theta rho_j})`
    #[default]
    ProofFinal,
    /// `xi e^{-theta sigma_A1} e^{-theta sum_{Fl(h)\H} sigma_A} F_{S^(-h)}(theta, e^{theta rho_A1}) e^{-theta b}`
    Statement,
}

/// Two-term delay bound; `log_p2` is `-inf` at `T = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartDelay {
    pub theta1: f64,
    pub theta2: f64,
    pub log_p1: f64,
    pub log_p2: f64,
}

impl MartDelay {
    pub fn log_total(&self) -> f64 {
        log_add(self.log_p1, self.log_p2)
    }

    pub fn total(&self) -> f64 {
        self.log_total().exp()
    }
}

fn check_site(an: &Analyzer, h: usize) -> Result<()> {
    an.network().check_server(h)?;
    check_martingale_site(an.network(), h).into_result()
}

/// `rho_j = rho_Sj - sum_{i in Fl(j)} rho_Ai`, flow 1 included.
fn residual_rate(an: &Analyzer, j: usize, theta: f64) -> Result<f64> {
    let mut rho = an.service(j, theta)?.rho;
    for i in an.network().flow_indices_at(j) {
        rho -= an.arrival(i, theta)?.rho;
    }
    Ok(rho)
}

pub fn log_mart_backlog(
    an: &Analyzer,
    h: usize,
    theta: f64,
    b: f64,
    form: BacklogForm,
) -> Result<f64> {
    check_site(an, h)?;
    check_theta_in(theta, an.martingale_domain(h))?;
    let net = an.network();
    let xi = xi_constant(an, h, theta)?.log_value;
    match form {
        BacklogForm::ProofFinal => {
            let mut log = xi - theta * b;
            for j in h + 1..=net.n_servers() {
                log += theta * an.service(j, theta)?.sigma;
            }
            for (pos, f) in net.flows().iter().enumerate() {
                if !f.crosses(h) {
                    log += theta * an.arrival(pos, theta)?.sigma;
                }
            }
            for j in (1..=net.n_servers()).filter(|&j| j != h) {
                let rho = residual_rate(an, j, theta)?;
                if rho <= 0.0 {
                    return Err(Error::Divergence {
                        pole: j,
                        rate: (-theta * rho).exp(),
                        z: 1.0,
                    });
                }
                log -= log_one_minus_exp_neg(theta * rho);
            }
            Ok(log)
        }
        BacklogForm::Statement => {
            let reduced = remove_server(net, h)?;
            let f = reduced_service_bgf(an, theta, &reduced)?;
            let a1 = an.arrival(0, theta)?;
            let mut log = xi - theta * a1.sigma - theta * b;
            for (pos, fl) in net.flows().iter().enumerate() {
                if fl.crosses(h) && !(fl.first == h && fl.last == h) {
                    log -= theta * an.arrival(pos, theta)?.sigma;
                }
            }
            Ok(log + f.log_eval((theta * a1.rho).exp())?)
        }
    }
}

/// `P1(theta1) + P2(theta2)` for a delay of at least `t`.
///
/// In `P1` the sum over `Fl(h) \ H` always contains flow 1, even when flow 1
/// crosses only server `h`.
pub fn log_mart_delay(
    an: &Analyzer,
    h: usize,
    theta1: f64,
    theta2: f64,
    t: u64,
) -> Result<MartDelay> {
    check_site(an, h)?;
    check_theta_in(theta1, an.martingale_domain(h))?;
    let net = an.network();

    let log_p1 = {
        let th = theta1;
        let xi = xi_constant(an, h, th)?.log_value;
        let reduced = remove_server(net, h)?;
        let f = reduced_service_bgf(an, th, &reduced)?;
        let a1 = an.arrival(0, th)?;
        let mut log = xi + log_delay_coeff(&f, th, a1.sigma, a1.rho, t)?;
        for (pos, fl) in net.flows().iter().enumerate() {
            let h_only = fl.first == h && fl.last == h;
            if fl.crosses(h) && (!h_only || pos == 0) {
                log -= th * an.arrival(pos, th)?.sigma;
            }
        }
        log
    };

    let log_p2 = if t == 0 {
        f64::NEG_INFINITY
    } else {
        let th = theta2;
        check_theta_in(th, an.theta2_domain(h))?;
        let xi = xi_constant(an, h, th)?.log_value;
        let s = an.service(h, th)?;
        let mut rho = s.rho;
        let mut sigma = s.sigma;
        for pos in net.flow_indices_at(h) {
            let a = an.arrival(pos, th)?;
            rho -= a.rho;
            if pos != 0 {
                sigma += a.sigma;
            }
        }
        let f = pmoo_service_bgf(an, th)?;
        xi - th * rho - th * sigma + f.log_coeff(t - 1)
    };

    Ok(MartDelay {
        theta1,
        theta2,
        log_p1,
        log_p2,
    })
}
