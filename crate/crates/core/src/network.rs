//! Tandem topology, JSON schema, stability thresholds and the server-removal transform.
//!
//! Servers are numbered `1..=n`; flow 1 is the flow of interest and crosses every server.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::mmp::{characterize_arrival, characterize_service, EmissionDist, Mmp};

/// Upper end of the `theta*` search when no finite threshold is found.
pub const THETA_CAP: f64 = 1e4;
const THETA_START: f64 = 1e-3;
const BISECT_REL_WIDTH: f64 = 1e-9;
/// Open upper endpoints are approached to `(1 - OPEN_MARGIN) * endpoint`.
pub const OPEN_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ServiceModel {
    ConstantRate { rate: f64 },
    Markov { mmp: Mmp },
}

impl ServiceModel {
    pub fn mean_rate(&self) -> f64 {
        match self {
            ServiceModel::ConstantRate { rate } => *rate,
            ServiceModel::Markov { mmp } => mmp.mean_rate(),
        }
    }

    /// Smallest amount of service any slot can offer.
    pub fn min_emission(&self) -> f64 {
        match self {
            ServiceModel::ConstantRate { rate } => *rate,
            ServiceModel::Markov { mmp } => mmp.min_emission(),
        }
    }

    pub fn is_constant_rate(&self) -> bool {
        matches!(self, ServiceModel::ConstantRate { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub id: usize,
    pub first: usize,
    pub last: usize,
    pub arrival: Mmp,
}

impl FlowSpec {
    pub fn crosses(&self, j: usize) -> bool {
        self.first <= j && j <= self.last
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TandemNetwork {
    servers: Vec<ServiceModel>,
    flows: Vec<FlowSpec>,
}

impl TandemNetwork {
    /// Validates paths and puts flow 1 first.
    pub fn new(servers: Vec<ServiceModel>, mut flows: Vec<FlowSpec>) -> Result<Self> {
        let n = servers.len();
        if n == 0 {
            return Err(Error::Config("network has no servers".into()));
        }
        for s in &servers {
            if let ServiceModel::ConstantRate { rate } = s {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::Config(format!(
                        "constant rate {rate} must be positive"
                    )));
                }
            }
        }
        let mut ids: Vec<usize> = flows.iter().map(|f| f.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate flow ids in {ids:?}")));
        }
        for f in &flows {
            if f.id == 0 {
                return Err(Error::Config("flow ids start at 1".into()));
            }
            if f.first < 1 || f.first > f.last || f.last > n {
                return Err(Error::NonContiguousPath {
                    flow: f.id,
                    first: f.first,
                    last: f.last,
                    n,
                });
            }
        }
        let pos = flows
            .iter()
            .position(|f| f.id == 1)
            .ok_or(Error::MissingFlowOfInterest { n })?;
        if flows[pos].first != 1 || flows[pos].last != n {
            return Err(Error::MissingFlowOfInterest { n });
        }
        flows.swap(0, pos);
        flows[1..].sort_by_key(|f| f.id);
        Ok(TandemNetwork { servers, flows })
    }

    pub fn n_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn servers(&self) -> &[ServiceModel] {
        &self.servers
    }

    /// `j` is 1-based.
    pub fn server(&self, j: usize) -> &ServiceModel {
        &self.servers[j - 1]
    }

    pub fn flows(&self) -> &[FlowSpec] {
        &self.flows
    }

    pub fn flow_of_interest(&self) -> &FlowSpec {
        &self.flows[0]
    }

    pub fn check_server(&self, j: usize) -> Result<()> {
        if j >= 1 && j <= self.n_servers() {
            Ok(())
        } else {
            Err(Error::ServerIndex {
                index: j,
                n: self.n_servers(),
            })
        }
    }

    /// Positions in `flows()` of the flows crossing server `j`.
    pub fn flow_indices_at(&self, j: usize) -> Vec<usize> {
        (0..self.flows.len())
            .filter(|&i| self.flows[i].crosses(j))
            .collect()
    }

    /// Serializes back to the JSON document format.
    pub fn to_json(&self) -> Value {
        let servers: Vec<ServerDoc> = self
            .servers
            .iter()
            .enumerate()
            .map(|(k, s)| ServerDoc {
                id: k + 1,
                service: match s {
                    ServiceModel::ConstantRate { rate } => ServiceDoc::ConstantRate { rate: *rate },
                    ServiceModel::Markov { mmp } => ServiceDoc::Mmp(MmpDoc::from(mmp)),
                },
            })
            .collect();
        let flows: Vec<FlowDoc> = self
            .flows
            .iter()
            .map(|f| FlowDoc {
                id: f.id,
                first: f.first,
                last: f.last,
                arrival: MmpDoc::from(&f.arrival),
            })
            .collect();
        serde_json::to_value(NetworkDoc { servers, flows }).expect("network serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    servers: Vec<ServerDoc>,
    flows: Vec<FlowDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServerDoc {
    id: usize,
    service: ServiceDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ServiceDoc {
    ConstantRate { rate: f64 },
    Mmp(MmpDoc),
}

#[derive(Debug, Serialize, Deserialize)]
struct MmpDoc {
    transition: Vec<Vec<f64>>,
    emissions: Vec<EmissionDist>,
}

impl From<&Mmp> for MmpDoc {
    fn from(m: &Mmp) -> Self {
        MmpDoc {
            transition: m.transition().rows(),
            emissions: m.emissions().to_vec(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowDoc {
    id: usize,
    first: usize,
    last: usize,
    arrival: MmpDoc,
}

fn build_mmp(doc: MmpDoc, path: &str) -> Result<Mmp> {
    Mmp::from_rows(&doc.transition, doc.emissions).map_err(|e| match e {
        Error::InvalidTransition(m) => Error::InvalidTransition(format!("{path}.transition: {m}")),
        Error::InvalidEmission(m) => Error::InvalidEmission(format!("{path}.emissions: {m}")),
        other => other,
    })
}

pub fn parse_network(text: &str) -> Result<TandemNetwork> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: NetworkDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    from_doc(doc)
}

pub fn parse_network_value(value: Value) -> Result<TandemNetwork> {
    let doc: NetworkDoc = serde_path_to_error::deserialize(value).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    from_doc(doc)
}

fn from_doc(doc: NetworkDoc) -> Result<TandemNetwork> {
    let mut servers = Vec::with_capacity(doc.servers.len());
    for (k, s) in doc.servers.into_iter().enumerate() {
        if s.id != k + 1 {
            return Err(Error::Schema {
                path: format!("servers[{k}].id"),
                message: format!("expected id {}, got {}", k + 1, s.id),
            });
        }
        servers.push(match s.service {
            ServiceDoc::ConstantRate { rate } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(Error::Schema {
                        path: format!("servers[{k}].service.rate"),
                        message: format!("rate must be positive, got {rate}"),
                    });
                }
                ServiceModel::ConstantRate { rate }
            }
            ServiceDoc::Mmp(m) => ServiceModel::Markov {
                mmp: build_mmp(m, &format!("servers[{k}].service"))?,
            },
        });
    }
    let mut flows = Vec::with_capacity(doc.flows.len());
    for (k, f) in doc.flows.into_iter().enumerate() {
        flows.push(FlowSpec {
            id: f.id,
            first: f.first,
            last: f.last,
            arrival: build_mmp(f.arrival, &format!("flows[{k}].arrival"))?,
        });
    }
    TandemNetwork::new(servers, flows)
}

/// Ids of the flows crossing server `j`.
pub fn flows_at(net: &TandemNetwork, j: usize) -> Vec<usize> {
    net.flows
        .iter()
        .filter(|f| f.crosses(j))
        .map(|f| f.id)
        .collect()
}

/// Ids of the flows whose path is exactly `{h}`.
pub fn h_only_flows(net: &TandemNetwork, h: usize) -> Vec<usize> {
    net.flows
        .iter()
        .filter(|f| f.first == h && f.last == h)
        .map(|f| f.id)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaStar {
    Finite(f64),
    /// Arrivals are bounded below the minimum service: every `theta` is stable.
    Infinite,
    /// No sign change found up to the cap and no certificate for an infinite threshold.
    Capped(f64),
}

impl ThetaStar {
    /// Numeric upper end usable by the optimizer.
    pub fn value(&self) -> f64 {
        match *self {
            ThetaStar::Finite(t) => t,
            ThetaStar::Infinite => f64::INFINITY,
            ThetaStar::Capped(t) => t,
        }
    }

    pub fn searchable(&self) -> f64 {
        self.value().min(THETA_CAP)
    }
}

/// `g_j(theta) = rho_{S_j}(theta) - sum_{i in Fl(j)} rho_{A_i}(theta)`.
pub fn stability_margin(net: &TandemNetwork, j: usize, theta: f64) -> Result<f64> {
    let s = characterize_service(net.server(j), theta)?.rho;
    let mut a = 0.0;
    for i in net.flow_indices_at(j) {
        a += characterize_arrival(&net.flows[i].arrival, theta)?.rho;
    }
    Ok(s - a)
}

pub fn theta_star(net: &TandemNetwork, j: usize) -> Result<ThetaStar> {
    net.check_server(j)?;
    let at = net.flow_indices_at(j);
    let service_mean = net.server(j).mean_rate();
    let arrival_mean: f64 = at.iter().map(|&i| net.flows[i].arrival.mean_rate()).sum();
    if service_mean <= arrival_mean {
        return Err(Error::Instability {
            server: j,
            service_mean,
            arrival_mean,
        });
    }
    let max_arrivals: f64 = at
        .iter()
        .map(|&i| net.flows[i].arrival.max_emission())
        .sum();
    if max_arrivals < net.server(j).min_emission() {
        return Ok(ThetaStar::Infinite);
    }

    let g = |t: f64| stability_margin(net, j, t);
    let mut lo = THETA_START;
    while g(lo)? <= 0.0 {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(Error::Instability {
                server: j,
                service_mean,
                arrival_mean,
            });
        }
    }
    let mut hi = lo;
    loop {
        hi *= 2.0;
        if hi >= THETA_CAP {
            if g(THETA_CAP)? > 0.0 {
                return Ok(ThetaStar::Capped(THETA_CAP));
            }
            hi = THETA_CAP;
            break;
        }
        if g(hi)? <= 0.0 {
            break;
        }
        lo = hi;
    }
    while hi - lo > BISECT_REL_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThetaStar::Finite(lo))
}

/// Admissible range of `theta`, lower end 0 (excluded in practice).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaDomain {
    pub lo: f64,
    pub hi: f64,
    pub hi_inclusive: bool,
}

impl ThetaDomain {
    pub fn open(hi: f64) -> Self {
        ThetaDomain {
            lo: 0.0,
            hi,
            hi_inclusive: false,
        }
    }

    pub fn closed(hi: f64) -> Self {
        ThetaDomain {
            lo: 0.0,
            hi,
            hi_inclusive: true,
        }
    }

    /// Largest `theta` actually evaluated.
    pub fn upper(&self) -> f64 {
        if self.hi_inclusive {
            self.hi
        } else {
            self.hi * (1.0 - OPEN_MARGIN)
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta > self.lo && theta <= self.upper()
    }
}

fn threshold_domain(stars: &[ThetaStar], inclusive: bool) -> ThetaDomain {
    let mut hi = f64::INFINITY;
    let mut finite = false;
    for s in stars {
        match *s {
            ThetaStar::Finite(t) => {
                finite = true;
                hi = hi.min(t);
            }
            ThetaStar::Capped(t) => hi = hi.min(t),
            ThetaStar::Infinite => {}
        }
    }
    if hi.is_infinite() {
        return ThetaDomain::closed(THETA_CAP);
    }
    ThetaDomain {
        lo: 0.0,
        hi,
        hi_inclusive: inclusive || !finite,
    }
}

/// All per-server thresholds, in server order.
pub fn theta_stars(net: &TandemNetwork) -> Result<Vec<ThetaStar>> {
    (1..=net.n_servers()).map(|j| theta_star(net, j)).collect()
}

/// `(0, min_j theta*_j)`.
pub fn pmoo_domain(stars: &[ThetaStar]) -> ThetaDomain {
    threshold_domain(stars, false)
}

/// `[0, theta*_h] ∩ [0, min_{j != h} theta*_j)` for the backlog and `theta1`.
pub fn martingale_domain(stars: &[ThetaStar], h: usize) -> ThetaDomain {
    let th = stars[h - 1];
    let others: Vec<ThetaStar> = stars
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != h - 1)
        .map(|(_, s)| *s)
        .collect();
    let at_h = threshold_domain(&[th], true);
    let rest = threshold_domain(&others, false);
    if others.is_empty() || at_h.hi < rest.hi {
        at_h
    } else if rest.hi < at_h.hi {
        rest
    } else {
        ThetaDomain {
            hi_inclusive: at_h.hi_inclusive && rest.hi_inclusive,
            ..rest
        }
    }
}

/// `(0, theta*_h]` for `theta2`.
pub fn theta2_domain(stars: &[ThetaStar], h: usize) -> ThetaDomain {
    threshold_domain(&[stars[h - 1]], true)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A server upstream of the site is not constant-rate.
    NonConstantUpstream { server: usize },
    /// A flow entering at or before the site leaves before it.
    EarlyDeparture {
        flow: usize,
        first: usize,
        last: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonConstantUpstream { server } => {
                write!(f, "H6: upstream server {server} is not constant-rate")
            }
            Violation::EarlyDeparture { flow, first, last } => write!(
                f,
                "H7: flow {flow} has f={first} <= h but leaves at l={last} < h"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteReport {
    pub server: usize,
    pub violations: Vec<Violation>,
}

impl SiteReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Assumption(self))
        }
    }
}

impl fmt::Display for SiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

pub fn check_martingale_site(net: &TandemNetwork, h: usize) -> SiteReport {
    let mut violations = Vec::new();
    for j in 1..h.min(net.n_servers() + 1) {
        if !net.server(j).is_constant_rate() {
            violations.push(Violation::NonConstantUpstream { server: j });
        }
    }
    for f in &net.flows {
        if f.first <= h && f.last < h {
            violations.push(Violation::EarlyDeparture {
                flow: f.id,
                first: f.first,
                last: f.last,
            });
        }
    }
    SiteReport {
        server: h,
        violations,
    }
}

/// Tandem without one server, keeping the correspondence with the original.
///
/// When the original has a single server the result has no servers and flow 1
/// keeps an empty path (`first = 1`, `last = 0`).
#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    pub servers: Vec<ServiceModel>,
    pub flows: Vec<FlowSpec>,
    /// Original (1-based) index of each remaining server.
    pub server_origin: Vec<usize>,
    /// Original position in `flows()` of each remaining flow.
    pub flow_origin: Vec<usize>,
}

impl ReducedNetwork {
    pub fn n_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn flow_ids(&self) -> Vec<usize> {
        self.flows.iter().map(|f| f.id).collect()
    }
}

pub fn remove_server(net: &TandemNetwork, h: usize) -> Result<ReducedNetwork> {
    net.check_server(h)?;
    let mut servers = Vec::new();
    let mut server_origin = Vec::new();
    for (k, s) in net.servers.iter().enumerate() {
        if k + 1 != h {
            servers.push(s.clone());
            server_origin.push(k + 1);
        }
    }
    let mut flows = Vec::new();
    let mut flow_origin = Vec::new();
    for (pos, f) in net.flows.iter().enumerate() {
        if f.first == h && f.last == h && f.id != 1 {
            continue;
        }
        let first = if f.first > h { f.first - 1 } else { f.first };
        let last = if f.last >= h { f.last - 1 } else { f.last };
        flows.push(FlowSpec {
            id: f.id,
            first,
            last,
            arrival: f.arrival.clone(),
        });
        flow_origin.push(pos);
    }
    Ok(ReducedNetwork {
        servers,
        flows,
        server_origin,
        flow_origin,
    })
}
