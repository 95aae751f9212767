//! Prefactor of the maximal inequality at one server.

use super::Analyzer;
use crate::error::{Error, Result};
use crate::mmp::Mmp;
use crate::network::ServiceModel;

/// Largest joint state space that is enumerated.
pub const XI_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct XiConstant {
    pub theta: f64,
    pub log_value: f64,
    pub server: usize,
    pub flows: Vec<usize>,
    /// No joint state can receive more arrivals than service; the value is then 1.
    pub always_served: bool,
}

impl XiConstant {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// `(inf{nu_x : x in P})^{-1}` over the joint states of the arrivals crossing
/// server `h` and of its service process.
pub fn xi_constant(an: &Analyzer, h: usize, theta: f64) -> Result<XiConstant> {
    let net = an.network();
    net.check_server(h)?;
    let at = net.flow_indices_at(h);

    // per-process state tables: (ln nu_x, bound on emissions in x)
    let mut arrivals: Vec<Vec<(f64, f64)>> = Vec::with_capacity(at.len());
    for &i in &at {
        let c = an.arrival(i, theta)?;
        arrivals.push(state_table(&net.flows()[i].arrival, &c.nu, true));
    }
    let sc = an.service(h, theta)?;
    let service: Vec<(f64, f64)> = match net.server(h) {
        ServiceModel::ConstantRate { rate } => vec![(0.0, *rate)],
        ServiceModel::Markov { mmp } => state_table(mmp, &sc.nu, false),
    };

    let mut states: usize = service.len();
    for a in &arrivals {
        states = states.saturating_mul(a.len());
    }
    if states > XI_STATE_CAP {
        return Err(Error::StateSpaceCap {
            states,
            cap: XI_STATE_CAP,
        });
    }

    let mut min_log_nu = f64::INFINITY;
    let mut digits = vec![0usize; arrivals.len()];
    loop {
        let mut log_nu = 0.0;
        let mut max_in = 0.0;
        for (a, &d) in arrivals.iter().zip(&digits) {
            log_nu += a[d].0;
            max_in += a[d].1;
        }
        for &(ln_s, min_s) in &service {
            if max_in > min_s {
                min_log_nu = min_log_nu.min(log_nu + ln_s);
            }
        }
        // mixed-radix increment
        let mut k = 0;
        while k < digits.len() {
            digits[k] += 1;
            if digits[k] < arrivals[k].len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
        if k == digits.len() {
            break;
        }
    }

    let always_served = min_log_nu.is_infinite();
    Ok(XiConstant {
        theta,
        log_value: if always_served { 0.0 } else { -min_log_nu },
        server: h,
        flows: at.iter().map(|&i| net.flows()[i].id).collect(),
        always_served,
    })
}

fn state_table(mmp: &Mmp, nu: &[f64], arrival: bool) -> Vec<(f64, f64)> {
    mmp.emissions()
        .iter()
        .zip(nu)
        .map(|(e, v)| {
            let (lo, hi) = e.support_bounds();
            (v.ln(), if arrival { hi } else { lo })
        })
        .collect()
}
