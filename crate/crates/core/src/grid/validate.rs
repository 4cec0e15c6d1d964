//! Structural checks on a case. Findings are data: an empty report means the
//! case can be handed to the subproblem builders.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::{CoordCase, DistributionSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Radiality,
    Connectivity,
    Root,
    Limit,
    Reference,
    Interface,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has(&self, kind: FindingKind) -> bool {
        self.findings.iter().any(|f| f.kind == kind)
    }

    fn push(&mut self, kind: FindingKind, message: String) {
        self.findings.push(Finding { kind, message });
    }
}

pub fn validate(case: &CoordCase) -> ValidationReport {
    let mut r = ValidationReport::default();
    if !(case.base_mva > 0.0) {
        r.push(FindingKind::Limit, format!("base_mva = {} is not positive", case.base_mva));
    }
    check_transmission(case, &mut r);
    for d in &case.distribution_systems {
        check_distribution(d, &mut r);
    }
    check_interfaces(case, &mut r);
    r
}

fn check_transmission(case: &CoordCase, r: &mut ValidationReport) {
    let t = &case.transmission;
    if t.buses.is_empty() {
        r.push(FindingKind::Reference, "transmission system has no buses".into());
        return;
    }
    for b in &t.buses {
        if !(b.active_load >= 0.0) {
            r.push(FindingKind::Limit, format!("transmission bus {} has negative load {}", b.id, b.active_load));
        }
        if !(b.load_bid_price >= 0.0) {
            r.push(FindingKind::Limit, format!("transmission bus {} has negative load bid price", b.id));
        }
    }
    for l in &t.lines {
        if !(l.reactance > 0.0) {
            r.push(FindingKind::Limit, format!("line {} has non-positive reactance {}", l.id, l.reactance));
        }
        if !(l.flow_limit > 0.0) {
            r.push(FindingKind::Limit, format!("line {} has non-positive flow limit {}", l.id, l.flow_limit));
        }
        if l.from_bus == l.to_bus {
            r.push(FindingKind::Limit, format!("line {} starts and ends at bus {}", l.id, l.from_bus));
        }
    }
    for g in &t.generators {
        if !(0.0 <= g.p_min && g.p_min <= g.p_max) {
            r.push(FindingKind::Limit, format!("generator {} has limits [{}, {}]", g.id, g.p_min, g.p_max));
        }
    }
    let ids: Vec<&str> = t.buses.iter().map(|b| b.id.as_str()).collect();
    let edges: Vec<(&str, &str)> = t.lines.iter().map(|l| (l.from_bus.as_str(), l.to_bus.as_str())).collect();
    if reachable(&ids, &edges, ids[0]).len() != ids.len() {
        r.push(FindingKind::Connectivity, "transmission graph is not connected".into());
    }
}

fn check_distribution(d: &DistributionSystem, r: &mut ValidationReport) {
    let roots: Vec<&str> = d.buses.iter().filter(|b| b.is_root).map(|b| b.id.as_str()).collect();
    if roots.len() != 1 {
        r.push(FindingKind::Root, format!("distribution system {} has {} root buses", d.id, roots.len()));
    }
    if d.branches.len() + 1 != d.buses.len() {
        r.push(
            FindingKind::Radiality,
            format!("distribution system {} has {} branches for {} buses", d.id, d.branches.len(), d.buses.len()),
        );
    }
    let ids: Vec<&str> = d.buses.iter().map(|b| b.id.as_str()).collect();
    let edges: Vec<(&str, &str)> = d.branches.iter().map(|b| (b.sending_bus.as_str(), b.receiving_bus.as_str())).collect();
    let start = roots.first().copied().or(ids.first().copied());
    if let Some(start) = start {
        if reachable(&ids, &edges, start).len() != ids.len() {
            r.push(FindingKind::Connectivity, format!("distribution system {} is not connected", d.id));
        }
    }
    for b in &d.buses {
        if !(0.0 < b.v_sq_min && b.v_sq_min <= b.v_sq_max) {
            r.push(FindingKind::Limit, format!("bus {} of {} has voltage limits [{}, {}]", b.id, d.id, b.v_sq_min, b.v_sq_max));
        }
        if !(b.active_load >= 0.0 && b.reactive_load >= 0.0) {
            r.push(FindingKind::Limit, format!("bus {} of {} has a negative load", b.id, d.id));
        }
    }
    for br in &d.branches {
        if !(br.resistance >= 0.0 && br.reactance >= 0.0) {
            r.push(FindingKind::Limit, format!("branch {} of {} has negative impedance", br.id, d.id));
        }
        if !(br.apparent_limit > 0.0) {
            r.push(FindingKind::Limit, format!("branch {} of {} has non-positive apparent limit", br.id, d.id));
        }
    }
    for g in &d.generators {
        if !(g.p_min <= g.p_max && g.q_min <= g.q_max) {
            r.push(FindingKind::Limit, format!("generator {} of {} has inverted limits", g.id, d.id));
        }
    }
}

fn check_interfaces(case: &CoordCase, r: &mut ValidationReport) {
    let mut per_bus: HashMap<&str, usize> = HashMap::new();
    for d in &case.distribution_systems {
        let n = case.interfaces.iter().filter(|l| l.distribution_system == d.id).count();
        if n != 1 {
            r.push(FindingKind::Interface, format!("distribution system {} appears in {n} interface links", d.id));
        }
    }
    for l in &case.interfaces {
        *per_bus.entry(l.transmission_bus.as_str()).or_default() += 1;
        if !(l.exchange_limit >= 0.0) {
            r.push(FindingKind::Limit, format!("interface of {} has negative exchange limit", l.distribution_system));
        }
    }
    let mut buses: Vec<(&str, usize)> = per_bus.into_iter().filter(|&(_, n)| n > 1).collect();
    buses.sort();
    for (bus, n) in buses {
        r.push(FindingKind::Interface, format!("transmission bus {bus} hosts {n} distribution systems"));
    }
}

fn reachable<'a>(ids: &[&'a str], edges: &[(&'a str, &'a str)], start: &'a str) -> HashSet<&'a str> {
    let mut adj: HashMap<&str, Vec<&str>> = ids.iter().map(|&i| (i, Vec::new())).collect();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Reorients every branch so that its sending bus is the child, i.e. the bus
/// farther from the root. Systems that are not trees are left untouched.
pub(crate) fn orient_branches(d: &mut DistributionSystem) {
    let Some(root) = d.root() else { return };
    if d.branches.len() + 1 != d.buses.len() {
        return;
    }
    let root_id = d.buses[root].id.clone();
    let mut depth: HashMap<String, usize> = HashMap::from([(root_id.clone(), 0)]);
    let mut queue = VecDeque::from([root_id]);
    while let Some(u) = queue.pop_front() {
        let du = depth[&u];
        for br in &d.branches {
            let other = if br.sending_bus == u {
                &br.receiving_bus
            } else if br.receiving_bus == u {
                &br.sending_bus
            } else {
                continue;
            };
            if !depth.contains_key(other) {
                depth.insert(other.clone(), du + 1);
                queue.push_back(other.clone());
            }
        }
    }
    if depth.len() != d.buses.len() {
        return;
    }
    for br in &mut d.branches {
        if depth[&br.sending_bus] < depth[&br.receiving_bus] {
            std::mem::swap(&mut br.sending_bus, &mut br.receiving_bus);
        }
    }
}
