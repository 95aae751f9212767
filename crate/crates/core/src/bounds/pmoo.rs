//! End-to-end service bgf and the union-bound (PMOO) backlog and delay bounds.

use super::Analyzer;
use crate::error::Result;
use crate::genfunc::{RationalGf, DEFAULT_REL_TOL};
use crate::network::ReducedNetwork;

/// Pole rate `e^{-theta rho}`, clamped so it never overflows.
fn pole(theta: f64, rho: f64) -> f64 {
    (-theta * rho).min(700.0).exp()
}

/// Service bgf for the servers in `servers` (original 1-based ids), subtracting
/// each cross flow in `cross` (positions in `flows()`) at the servers it crosses.
pub(crate) fn service_bgf_subset(
    an: &Analyzer,
    theta: f64,
    servers: &[usize],
    cross: &[usize],
) -> Result<RationalGf> {
    let flows = an.network().flows();
    let mut log_c = 0.0;
    for &i in cross {
        log_c += theta * an.arrival(i, theta)?.sigma;
    }
    let mut rates = Vec::with_capacity(servers.len());
    for &j in servers {
        let s = an.service(j, theta)?;
        log_c += theta * s.sigma;
        let mut rho = s.rho;
        for &i in cross {
            if flows[i].crosses(j) {
                rho -= an.arrival(i, theta)?.rho;
            }
        }
        rates.push(pole(theta, rho));
    }
    Ok(RationalGf::new(log_c, rates))
}

/// `e^{theta(sum_{i>=2} sigma_Ai + sum_j sigma_Sj)} prod_j 1/(1 - e^{-theta rho'_j} z)`.
pub fn pmoo_service_bgf(an: &Analyzer, theta: f64) -> Result<RationalGf> {
    let servers: Vec<usize> = (1..=an.network().n_servers()).collect();
    let cross: Vec<usize> = (1..an.network().flows().len()).collect();
    service_bgf_subset(an, theta, &servers, &cross)
}

/// Service bgf of the network with one server removed; characterizations are
/// those of the original processes.
pub fn reduced_service_bgf(
    an: &Analyzer,
    theta: f64,
    reduced: &ReducedNetwork,
) -> Result<RationalGf> {
    let cross: Vec<usize> = reduced
        .flow_origin
        .iter()
        .copied()
        .filter(|&p| p != 0)
        .collect();
    service_bgf_subset(an, theta, &reduced.server_origin, &cross)
}

/// `ln[e^{-theta b} e^{theta sigma_A1} F_S(theta, e^{theta rho_A1})]`.
pub fn log_pmoo_backlog(an: &Analyzer, theta: f64, b: f64) -> Result<f64> {
    let a1 = an.arrival(0, theta)?;
    let f = pmoo_service_bgf(an, theta)?;
    Ok(-theta * b + theta * a1.sigma + f.log_eval((theta * a1.rho).exp())?)
}

/// `ln [z^T] F_d`, computed as `e^{theta(sigma_A1 + rho_A1)} sum_u r^u [z^{T+u}] F_S`
/// with `r = e^{theta rho_A1}`.
pub fn log_pmoo_delay(an: &Analyzer, theta: f64, t: u64) -> Result<f64> {
    let a1 = an.arrival(0, theta)?;
    let f = pmoo_service_bgf(an, theta)?;
    log_delay_coeff(&f, theta, a1.sigma, a1.rho, t)
}

pub(crate) fn log_delay_coeff(
    f: &RationalGf,
    theta: f64,
    sigma_a: f64,
    rho_a: f64,
    t: u64,
) -> Result<f64> {
    let r = (theta * rho_a).exp();
    Ok(theta * (sigma_a + rho_a) + f.log_tail_sum(r, t, DEFAULT_REL_TOL)?)
}
