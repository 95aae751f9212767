//! Experiment drivers behind the command-line front end, and their CSV writers.
//!
//! Every driver returns rows in a deterministic order regardless of how many
//! threads evaluated them.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::bounds::{Analyzer, BoundPoint, Method, Metric};
use crate::counterexample::{self, CounterexampleConfig};
use crate::error::{Error, Result};
use crate::network::{
    check_martingale_site, parse_network_value, SiteReport, TandemNetwork, ThetaStar,
};
use crate::sim::{empirical_tail, simulate, SimConfig};

/// Martingale site: a fixed server, or every admissible one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    At(usize),
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Pmoo,
    Martingale(Site),
}

/// Inclusive integer range `a..b`.
pub fn parse_int_range(s: &str) -> Result<Vec<u64>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("range `{s}` is not of the form A..B")))?;
    let parse = |x: &str| {
        x.trim()
            .parse::<u64>()
            .map_err(|e| Error::Config(format!("range `{s}`: {e}")))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if a > b {
        return Err(Error::Config(format!("range `{s}` is empty")));
    }
    Ok((a..=b).collect())
}

/// Range `lo:hi:step`, both ends included up to rounding.
pub fn parse_float_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("range `{s}` is not of the form lo:hi:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || hi < lo {
        return Err(bad());
    }
    if lo == hi {
        return Ok(vec![lo]);
    }
    if step <= 0.0 {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}

/// Accepts a JSON pointer (`/servers/1/service/rate`) or the dotted form used
/// in error messages (`servers[1].service.rate`).
pub fn to_json_pointer(path: &str) -> String {
    if path.starts_with('/') {
        return path.to_string();
    }
    let mut out = String::new();
    for seg in path.split('.') {
        let mut rest = seg;
        if let Some(open) = rest.find('[') {
            out.push('/');
            out.push_str(&rest[..open]);
            rest = &rest[open..];
            while let Some(stripped) = rest.strip_prefix('[') {
                let close = stripped.find(']').unwrap_or(stripped.len());
                out.push('/');
                out.push_str(&stripped[..close]);
                rest = stripped.get(close + 1..).unwrap_or("");
            }
        } else {
            out.push('/');
            out.push_str(rest);
        }
    }
    out
}

/// Copy of `net` with the numeric field at `path` replaced by `value`.
pub fn with_param(net: &TandemNetwork, path: &str, value: f64) -> Result<TandemNetwork> {
    let pointer = to_json_pointer(path);
    let mut doc = net.to_json();
    let slot = doc
        .pointer_mut(&pointer)
        .ok_or_else(|| Error::Config(format!("parameter `{path}` not found in network")))?;
    if !slot.is_number() {
        return Err(Error::Config(format!("parameter `{path}` is not numeric")));
    }
    *slot = serde_json::Number::from_f64(value)
        .map(Value::Number)
        .ok_or_else(|| Error::Config(format!("parameter value {value} is not finite")))?;
    parse_network_value(doc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateReport {
    pub n_servers: usize,
    pub theta_stars: Vec<ThetaStar>,
    pub sites: Vec<SiteReport>,
}

impl ValidateReport {
    pub fn admissible(&self) -> Vec<usize> {
        self.sites
            .iter()
            .filter(|s| s.is_ok())
            .map(|s| s.server)
            .collect()
    }
}

impl fmt::Display for ValidateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "servers: {}", self.n_servers)?;
        for (j, s) in self.theta_stars.iter().enumerate() {
            let desc = match s {
                ThetaStar::Finite(t) => format!("{t:.9}"),
                ThetaStar::Infinite => "inf (peak arrivals below minimum service)".into(),
                ThetaStar::Capped(t) => format!(">= {t} (search cap)"),
            };
            writeln!(f, "theta*_{}: {desc}", j + 1)?;
        }
        for s in &self.sites {
            writeln!(f, "martingale at h={}: {s}", s.server)?;
        }
        write!(f, "admissible: {:?}", self.admissible())
    }
}

/// Stability and per-site assumption status.
pub fn run_validate(net: &TandemNetwork) -> Result<ValidateReport> {
    let an = Analyzer::new(net.clone())?;
    Ok(ValidateReport {
        n_servers: net.n_servers(),
        theta_stars: an.theta_stars().to_vec(),
        sites: (1..=net.n_servers())
            .map(|h| check_martingale_site(net, h))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeRow {
    pub value: u64,
    pub probability: f64,
    pub theta: f64,
    pub theta2: Option<f64>,
    pub method: String,
    pub site: Option<usize>,
}

impl AnalyzeRow {
    fn new(p: &BoundPoint, method: &str, site: Option<usize>) -> Self {
        AnalyzeRow {
            value: p.value,
            probability: p.probability,
            theta: p.theta,
            theta2: p.theta2,
            method: method.into(),
            site,
        }
    }
}

/// Optimized bound curve. With [`Site::Auto`] every admissible site is
/// reported, followed by the pointwise minimum tagged `martingale_best`.
pub fn run_analyze(
    an: &Analyzer,
    method: MethodChoice,
    metric: Metric,
    values: &[u64],
) -> Result<Vec<AnalyzeRow>> {
    let sites = match method {
        MethodChoice::Pmoo => {
            let c = an.curve(Method::Pmoo, metric, values)?;
            return Ok(c
                .entries
                .iter()
                .map(|p| AnalyzeRow::new(p, "pmoo", None))
                .collect());
        }
        MethodChoice::Martingale(Site::At(h)) => {
            an.network().check_server(h)?;
            check_martingale_site(an.network(), h).into_result()?;
            vec![h]
        }
        MethodChoice::Martingale(Site::Auto) => {
            let s = an.admissible_sites();
            if s.is_empty() {
                return Err(Error::Config(
                    "no server admits the martingale analysis".into(),
                ));
            }
            s
        }
    };
    let curves = sites
        .iter()
        .map(|&h| an.curve(Method::Martingale { h }, metric, values))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<AnalyzeRow> = curves
        .iter()
        .zip(&sites)
        .flat_map(|(c, &h)| {
            c.entries
                .iter()
                .map(move |p| AnalyzeRow::new(p, "martingale", Some(h)))
        })
        .collect();
    if method == MethodChoice::Martingale(Site::Auto) {
        for k in 0..values.len() {
            let (h, p) = curves
                .iter()
                .zip(&sites)
                .map(|(c, &h)| (h, &c.entries[k]))
                .min_by(|a, b| a.1.log_raw.total_cmp(&b.1.log_raw))
                .expect("nonempty");
            rows.push(AnalyzeRow::new(p, "martingale_best", Some(h)));
        }
    }
    Ok(rows)
}

/// Delay quantile at `epsilon` per method; used for a summary next to a curve.
pub fn quantiles(an: &Analyzer, method: MethodChoice, epsilon: f64) -> Vec<(Method, Result<u64>)> {
    let methods: Vec<Method> = match method {
        MethodChoice::Pmoo => vec![Method::Pmoo],
        MethodChoice::Martingale(Site::At(h)) => vec![Method::Martingale { h }],
        MethodChoice::Martingale(Site::Auto) => an
            .admissible_sites()
            .into_iter()
            .map(|h| Method::Martingale { h })
            .collect(),
    };
    methods
        .into_par_iter()
        .map(|m| (m, an.delay_quantile(m, epsilon)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
    pub epsilon: f64,
    /// Adds a simulated quantile per point when set.
    pub simulation: Option<SimConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub method: String,
    pub site: Option<usize>,
    /// NaN when the point failed; `reason` then says why.
    pub delay: f64,
    pub reason: String,
}

impl SweepRow {
    fn new(param: f64, method: &str, site: Option<usize>, r: Result<u64>) -> Self {
        let (delay, reason) = match r {
            Ok(d) => (d as f64, String::new()),
            Err(e) => (f64::NAN, e.to_string()),
        };
        SweepRow {
            param,
            method: method.into(),
            site,
            delay,
            reason,
        }
    }
}

fn sweep_point(base: &TandemNetwork, spec: &SweepSpec, x: f64) -> Result<Vec<SweepRow>> {
    let net = with_param(base, &spec.param, x)?;
    let mut rows = Vec::new();
    match Analyzer::new(net.clone()) {
        Ok(an) => {
            let methods: Vec<Method> = std::iter::once(Method::Pmoo)
                .chain(
                    an.admissible_sites()
                        .into_iter()
                        .map(|h| Method::Martingale { h }),
                )
                .collect();
            let results: Vec<(Method, Result<u64>)> = methods
                .into_par_iter()
                .map(|m| (m, an.delay_quantile(m, spec.epsilon)))
                .collect();
            for (m, r) in results {
                rows.push(SweepRow::new(x, m.label(), m.site(), r));
            }
        }
        Err(e) => {
            let reason = e.to_string();
            for m in ["pmoo", "martingale"] {
                rows.push(SweepRow::new(
                    x,
                    m,
                    None,
                    Err(Error::Config(reason.clone())),
                ));
            }
        }
    }
    if let Some(cfg) = &spec.simulation {
        let r = simulate(&net, cfg)
            .and_then(|res| empirical_tail(&res, Metric::Delay))
            .map(|t| t.quantile(spec.epsilon));
        rows.push(SweepRow::new(x, "simulation", None, r));
    }
    Ok(rows)
}

/// Delay quantiles at `epsilon` across a parameter sweep.
///
/// An unresolvable or non-numeric parameter is an error; a point that fails
/// to analyze (instability, unreachable epsilon) becomes a NaN row.
pub fn run_sweep(base: &TandemNetwork, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.values.is_empty() {
        return Err(Error::Config("empty sweep range".into()));
    }
    if !(spec.epsilon > 0.0 && spec.epsilon < 1.0) {
        return Err(Error::Config(format!(
            "epsilon must lie in (0, 1), got {}",
            spec.epsilon
        )));
    }
    // surface path errors before fanning out
    with_param(base, &spec.param, spec.values[0]).map(|_| ())?;
    let per_point = spec
        .values
        .par_iter()
        .map(|&x| sweep_point(base, spec, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateRow {
    pub value: u64,
    pub probability: f64,
    pub stderr: f64,
    pub method: String,
    pub seed: u64,
    pub steps: u64,
}

/// Empirical tail of flow 1, up to and including the first zero frequency.
pub fn run_simulate(
    net: &TandemNetwork,
    cfg: &SimConfig,
    metric: Metric,
) -> Result<Vec<SimulateRow>> {
    let res = simulate(net, cfg)?;
    let tail = empirical_tail(&res, metric)?;
    let method = format!("simulation_{}", cfg.policy.label());
    let last = tail.probability.len();
    Ok((0..=last as u64)
        .map(|v| {
            let (p, s) = tail.at(v);
            SimulateRow {
                value: v,
                probability: p,
                stderr: s,
                method: method.clone(),
                seed: cfg.seed,
                steps: cfg.steps,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleCsvRow {
    pub x: f64,
    pub horizon: u64,
    pub empirical: f64,
    pub stderr: f64,
    pub claimed_bound: f64,
    pub sound_bound: f64,
}

pub fn run_counterexample(cfg: &CounterexampleConfig) -> Result<Vec<CounterexampleCsvRow>> {
    let r = counterexample::run_counterexample(cfg)?;
    Ok(r.rows
        .into_iter()
        .map(|row| CounterexampleCsvRow {
            x: row.x,
            horizon: row.horizon,
            empirical: row.empirical,
            stderr: row.stderr,
            claimed_bound: row.claimed_bound,
            sound_bound: row.sound_bound,
        })
        .collect())
}

/// Writes rows with a header line. `comment` becomes a leading `# ...` line.
pub fn write_csv<W: Write, R: Serialize>(out: W, rows: &[R], comment: Option<&str>) -> Result<()> {
    let mut out = out;
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}
