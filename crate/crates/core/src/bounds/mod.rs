//! Analytic violation-probability bounds for flow 1.
//!
//! All bound functions return natural logs of the raw (uncapped) bound so that
//! very small or very large values survive the optimizer.

mod martingale;
mod optimize;
mod pmoo;
mod xi;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::Serialize;

pub use martingale::{log_mart_backlog, log_mart_delay, BacklogForm, MartDelay};
pub use optimize::{delay_quantile, optimize_log_theta, optimize_theta, QUANTILE_CAP};
pub use pmoo::{log_pmoo_backlog, log_pmoo_delay, pmoo_service_bgf, reduced_service_bgf};
pub use xi::{xi_constant, XiConstant, XI_STATE_CAP};

use crate::error::{Error, Result};
use crate::mmp::{characterize_arrival, characterize_service, SpectralChar};
use crate::network::{
    check_martingale_site, martingale_domain, pmoo_domain, theta2_domain, theta_stars,
    TandemNetwork, ThetaDomain, ThetaStar,
};

const CACHE_LIMIT: usize = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Process {
    Arrival(usize),
    Service(usize),
}

/// A validated network together with its stability thresholds and a
/// per-`(process, theta)` cache of spectral characterizations.
pub struct Analyzer {
    net: TandemNetwork,
    stars: Vec<ThetaStar>,
    cache: RwLock<HashMap<(Process, u64), Arc<SpectralChar>>>,
}

impl Analyzer {
    /// Fails with an instability error if any server is overloaded on average.
    pub fn new(net: TandemNetwork) -> Result<Self> {
        let stars = theta_stars(&net)?;
        Ok(Analyzer {
            net,
            stars,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn network(&self) -> &TandemNetwork {
        &self.net
    }

    pub fn theta_stars(&self) -> &[ThetaStar] {
        &self.stars
    }

    fn lookup(&self, p: Process, theta: f64) -> Result<Arc<SpectralChar>> {
        let key = (p, theta.to_bits());
        if let Some(c) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(c.clone());
        }
        let c = Arc::new(match p {
            Process::Arrival(pos) => characterize_arrival(&self.net.flows()[pos].arrival, theta)?,
            Process::Service(j) => characterize_service(self.net.server(j), theta)?,
        });
        let mut w = self.cache.write().expect("cache lock");
        if w.len() >= CACHE_LIMIT {
            w.clear();
        }
        w.insert(key, c.clone());
        Ok(c)
    }

    /// Characterization of the flow at position `pos` of `network().flows()`.
    pub fn arrival(&self, pos: usize, theta: f64) -> Result<Arc<SpectralChar>> {
        self.lookup(Process::Arrival(pos), theta)
    }

    /// Characterization of server `j` (1-based).
    pub fn service(&self, j: usize, theta: f64) -> Result<Arc<SpectralChar>> {
        self.lookup(Process::Service(j), theta)
    }

    pub fn pmoo_domain(&self) -> ThetaDomain {
        pmoo_domain(&self.stars)
    }

    pub fn martingale_domain(&self, h: usize) -> ThetaDomain {
        martingale_domain(&self.stars, h)
    }

    pub fn theta2_domain(&self, h: usize) -> ThetaDomain {
        theta2_domain(&self.stars, h)
    }

    /// Sites where the martingale analysis applies.
    pub fn admissible_sites(&self) -> Vec<usize> {
        (1..=self.net.n_servers())
            .filter(|&h| check_martingale_site(&self.net, h).is_ok())
            .collect()
    }

    fn check_site(&self, h: usize) -> Result<()> {
        self.net.check_server(h)?;
        check_martingale_site(&self.net, h).into_result()
    }

    /// Optimized bound at one value of the metric.
    pub fn point(&self, method: Method, metric: Metric, value: u64) -> Result<BoundPoint> {
        let (log_raw, theta, theta2) = match (method, metric) {
            (Method::Pmoo, Metric::Backlog) => {
                let (t, v) = optimize_log_theta(
                    |th| log_pmoo_backlog(self, th, value as f64),
                    self.pmoo_domain(),
                )?;
                (v, t, None)
            }
            (Method::Pmoo, Metric::Delay) => {
                let (t, v) =
                    optimize_log_theta(|th| log_pmoo_delay(self, th, value), self.pmoo_domain())?;
                (v, t, None)
            }
            (Method::Martingale { h }, Metric::Backlog) => {
                self.check_site(h)?;
                let (t, v) = optimize_log_theta(
                    |th| log_mart_backlog(self, h, th, value as f64, BacklogForm::ProofFinal),
                    self.martingale_domain(h),
                )?;
                (v, t, None)
            }
            (Method::Martingale { h }, Metric::Delay) => {
                self.check_site(h)?;
                let d = self.optimized_mart_delay(h, value)?;
                (d.log_total(), d.theta1, Some(d.theta2))
            }
        };
        Ok(BoundPoint::new(value, log_raw, theta, theta2))
    }

    /// Martingale delay bound with `theta1` and `theta2` optimized separately.
    pub fn optimized_mart_delay(&self, h: usize, t: u64) -> Result<MartDelay> {
        self.check_site(h)?;
        let (theta1, log_p1) = optimize_log_theta(
            |th| Ok(log_mart_delay(self, h, th, th, t)?.log_p1),
            self.martingale_domain(h),
        )?;
        let (theta2, log_p2) = if t == 0 {
            (f64::NAN, f64::NEG_INFINITY)
        } else {
            optimize_log_theta(
                |th| Ok(log_mart_delay(self, h, th, th, t)?.log_p2),
                self.theta2_domain(h),
            )?
        };
        Ok(MartDelay {
            theta1,
            theta2,
            log_p1,
            log_p2,
        })
    }

    pub fn curve(&self, method: Method, metric: Metric, values: &[u64]) -> Result<BoundCurve> {
        let entries = values
            .par_iter()
            .map(|&v| self.point(method, metric, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundCurve {
            metric,
            method,
            entries,
        })
    }

    /// Least delay `T` whose optimized bound is at most `epsilon`.
    pub fn delay_quantile(&self, method: Method, epsilon: f64) -> Result<u64> {
        if let Method::Martingale { h } = method {
            self.check_site(h)?;
        }
        delay_quantile(
            |t| Ok(self.point(method, Metric::Delay, t)?.log_raw),
            epsilon,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Delay,
    Backlog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pmoo,
    Martingale { h: usize },
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Pmoo => "pmoo",
            Method::Martingale { .. } => "martingale",
        }
    }

    pub fn site(&self) -> Option<usize> {
        match self {
            Method::Pmoo => None,
            Method::Martingale { h } => Some(*h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundPoint {
    pub value: u64,
    /// `min(raw, 1)`
    pub probability: f64,
    pub log_raw: f64,
    pub theta: f64,
    /// Set for the martingale delay bound only.
    pub theta2: Option<f64>,
}

impl BoundPoint {
    pub fn new(value: u64, log_raw: f64, theta: f64, theta2: Option<f64>) -> Self {
        BoundPoint {
            value,
            probability: log_raw.exp().min(1.0),
            log_raw,
            theta,
            theta2,
        }
    }

    pub fn raw(&self) -> f64 {
        self.log_raw.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub metric: Metric,
    pub method: Method,
    pub entries: Vec<BoundPoint>,
}

impl BoundCurve {
    /// Pointwise minimum of curves over the same values.
    pub fn envelope(curves: &[BoundCurve]) -> Option<Vec<BoundPoint>> {
        let first = curves.first()?;
        Some(
            (0..first.entries.len())
                .map(|k| {
                    curves
                        .iter()
                        .map(|c| &c.entries[k])
                        .min_by(|a, b| a.log_raw.total_cmp(&b.log_raw))
                        .expect("nonempty")
                        .clone()
                })
                .collect(),
        )
    }
}

pub(crate) fn check_theta_in(theta: f64, domain: ThetaDomain) -> Result<()> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidTheta(theta));
    }
    if !domain.contains(theta) {
        return Err(Error::ThetaDomain {
            theta,
            hi: domain.hi,
        });
    }
    Ok(())
}

/// `ln(1 - e^{-x})` for `x > 0`.
pub(crate) fn log_one_minus_exp_neg(x: f64) -> f64 {
    if x > std::f64::consts::LN_2 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

/// `ln(e^a + e^b)`.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
