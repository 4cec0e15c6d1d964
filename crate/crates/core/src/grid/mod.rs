//! Data model of a transmission system coupled to radial distribution systems.
//!
//! Quantities are stored in the units of the case file (MW, MVAr, MVA) unless
//! [`CoordCase::per_unit`] is set, in which case they are divided by
//! `base_mva`. Impedances and squared voltages are always per unit.

mod io;
mod random;
mod replicate;
mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_case, load_case_file, render};
pub use random::{random_case, RandomCaseSpec};
pub use replicate::{highest_load_hosts, replicate_dsos};
pub use validate::{validate, Finding, FindingKind, ValidationReport};

pub type Id = String;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionBus {
    pub id: Id,
    pub active_load: f64,
    pub load_bid_price: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hosts_dso: Option<Id>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionLine {
    pub id: Id,
    pub from_bus: Id,
    pub to_bus: Id,
    pub reactance: f64,
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionGenerator {
    pub id: Id,
    pub bus: Id,
    pub p_min: f64,
    pub p_max: f64,
    pub offer_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionBranch {
    pub id: Id,
    pub sending_bus: Id,
    pub receiving_bus: Id,
    pub resistance: f64,
    pub reactance: f64,
    #[serde(default)]
    pub conductance: f64,
    #[serde(default)]
    pub susceptance: f64,
    pub apparent_limit: f64,
}

impl DistributionBranch {
    pub fn is_lossless(&self) -> bool {
        self.resistance == 0.0 && self.reactance == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionBus {
    pub id: Id,
    pub active_load: f64,
    #[serde(default)]
    pub reactive_load: f64,
    pub v_sq_min: f64,
    pub v_sq_max: f64,
    #[serde(default)]
    pub is_root: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionGenerator {
    pub id: Id,
    pub bus: Id,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(default)]
    pub q_min: f64,
    #[serde(default)]
    pub q_max: f64,
    pub incremental_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSystem {
    pub id: Id,
    pub tariff: f64,
    /// Price at which the DSO bids to buy; defaults to its cheapest generator cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bid_price: Option<f64>,
    /// Price at which the DSO offers to sell; defaults to its most expensive generator cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offer_price: Option<f64>,
    pub buses: Vec<DistributionBus>,
    pub branches: Vec<DistributionBranch>,
    #[serde(default)]
    pub generators: Vec<DistributionGenerator>,
}

impl DistributionSystem {
    pub fn effective_bid_price(&self) -> f64 {
        self.bid_price.unwrap_or_else(|| self.generators.iter().map(|g| g.incremental_cost).reduce(f64::min).unwrap_or(0.0))
    }

    pub fn effective_offer_price(&self) -> f64 {
        self.offer_price.unwrap_or_else(|| self.generators.iter().map(|g| g.incremental_cost).fold(0.0, f64::max))
    }

    pub fn root(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.is_root)
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn total_active_load(&self) -> f64 {
        self.buses.iter().map(|b| b.active_load).sum()
    }

    /// Dense view with branch endpoints resolved to bus indices.
    pub fn topology(&self) -> Result<Topology, GridError> {
        let root = self.root().ok_or_else(|| GridError::NotRadial(self.id.clone()))?;
        let mut sending = Vec::with_capacity(self.branches.len());
        let mut receiving = Vec::with_capacity(self.branches.len());
        let mut out_branch = vec![None; self.buses.len()];
        for (l, br) in self.branches.iter().enumerate() {
            let s = self.bus_index(&br.sending_bus).ok_or_else(|| GridError::Reference(format!("branch {} -> bus {}", br.id, br.sending_bus)))?;
            let r = self.bus_index(&br.receiving_bus).ok_or_else(|| GridError::Reference(format!("branch {} -> bus {}", br.id, br.receiving_bus)))?;
            if out_branch[s].is_some() || s == root {
                return Err(GridError::NotRadial(self.id.clone()));
            }
            out_branch[s] = Some(l);
            sending.push(s);
            receiving.push(r);
        }
        if self.branches.len() + 1 != self.buses.len() {
            return Err(GridError::NotRadial(self.id.clone()));
        }
        let mut gen_bus = Vec::with_capacity(self.generators.len());
        for g in &self.generators {
            gen_bus.push(self.bus_index(&g.bus).ok_or_else(|| GridError::Reference(format!("generator {} -> bus {}", g.id, g.bus)))?);
        }
        Ok(Topology { root, sending, receiving, out_branch, gen_bus })
    }
}

/// Index form of a radial distribution system oriented child to parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub root: usize,
    pub sending: Vec<usize>,
    pub receiving: Vec<usize>,
    /// The unique branch leaving each non-root bus.
    pub out_branch: Vec<Option<usize>>,
    pub gen_bus: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceLink {
    pub transmission_bus: Id,
    pub distribution_system: Id,
    pub exchange_limit: f64,
}

impl InterfaceLink {
    /// A link with a zero limit carries no exchange and couples nothing.
    pub fn is_active(&self) -> bool {
        self.exchange_limit > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionSystem {
    pub buses: Vec<TransmissionBus>,
    #[serde(default)]
    pub lines: Vec<TransmissionLine>,
    #[serde(default)]
    pub generators: Vec<TransmissionGenerator>,
}

impl TransmissionSystem {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordCase {
    pub base_mva: f64,
    #[serde(default)]
    pub per_unit: bool,
    pub transmission: TransmissionSystem,
    #[serde(default)]
    pub distribution_systems: Vec<DistributionSystem>,
    #[serde(default)]
    pub interfaces: Vec<InterfaceLink>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("distribution system {0} is not a radial tree with a unique root")]
    NotRadial(String),
    #[error("distribution system {0} has no interface link")]
    MissingInterface(String),
    #[error("transmission bus {0} already hosts a distribution system")]
    BusAlreadyHosts(String),
    #[error("unknown distribution system {0}")]
    UnknownDso(String),
    #[error("unknown transmission bus {0}")]
    UnknownBus(String),
    #[error("base_mva must be positive, got {0}")]
    BadBase(f64),
    #[error("template distribution system {0} carries no load to scale")]
    EmptyTemplate(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CoordCase {
    pub fn dso(&self, id: &str) -> Option<&DistributionSystem> {
        self.distribution_systems.iter().find(|d| d.id == id)
    }

    pub fn link_for(&self, dso: &str) -> Option<&InterfaceLink> {
        self.interfaces.iter().find(|l| l.distribution_system == dso)
    }

    /// Transmission bus index hosting each distribution system, in DSO order.
    pub fn host_indices(&self) -> Result<Vec<usize>, GridError> {
        self.distribution_systems
            .iter()
            .map(|d| {
                let link = self.link_for(&d.id).ok_or_else(|| GridError::MissingInterface(d.id.clone()))?;
                self.transmission.bus_index(&link.transmission_bus).ok_or_else(|| GridError::UnknownBus(link.transmission_bus.clone()))
            })
            .collect()
    }

    /// Sum of all active loads, transmission and distribution.
    pub fn total_active_load(&self) -> f64 {
        self.transmission.buses.iter().map(|b| b.active_load).sum::<f64>()
            + self.distribution_systems.iter().map(|d| d.total_active_load()).sum::<f64>()
    }

    /// Factor converting stored power quantities to MW.
    pub fn power_unit(&self) -> f64 {
        if self.per_unit {
            self.base_mva
        } else {
            1.0
        }
    }

    fn scale_powers(&mut self, k: f64) {
        let t = &mut self.transmission;
        for b in &mut t.buses {
            b.active_load *= k;
        }
        for l in &mut t.lines {
            l.flow_limit *= k;
        }
        for g in &mut t.generators {
            g.p_min *= k;
            g.p_max *= k;
        }
        for d in &mut self.distribution_systems {
            for b in &mut d.buses {
                b.active_load *= k;
                b.reactive_load *= k;
            }
            for br in &mut d.branches {
                br.apparent_limit *= k;
            }
            for g in &mut d.generators {
                g.p_min *= k;
                g.p_max *= k;
                g.q_min *= k;
                g.q_max *= k;
            }
        }
        for l in &mut self.interfaces {
            l.exchange_limit *= k;
        }
    }
}

/// Divides every MW/MVAr/MVA quantity by `base_mva`. Idempotent.
pub fn to_per_unit(case: &CoordCase) -> Result<CoordCase, GridError> {
    if !(case.base_mva > 0.0) {
        return Err(GridError::BadBase(case.base_mva));
    }
    let mut out = case.clone();
    if !out.per_unit {
        out.scale_powers(1.0 / case.base_mva);
        out.per_unit = true;
    }
    Ok(out)
}

/// Inverse of [`to_per_unit`]. Idempotent.
pub fn from_per_unit(case: &CoordCase) -> Result<CoordCase, GridError> {
    if !(case.base_mva > 0.0) {
        return Err(GridError::BadBase(case.base_mva));
    }
    let mut out = case.clone();
    if out.per_unit {
        out.scale_powers(case.base_mva);
        out.per_unit = false;
    }
    Ok(out)
}

/// The bundled two-bus, two-feeder example case.
pub const ILLUSTRATIVE_CASE: &str = include_str!("../../../../cases/illustrative.case");

/// The bundled 14-bus synthetic transmission case with one template feeder.
pub const SYNTHETIC_CASE: &str = include_str!("../../../../cases/synthetic14.case");

pub fn illustrative_case() -> CoordCase {
    load_case(ILLUSTRATIVE_CASE).expect("bundled illustrative case parses")
}

pub fn synthetic_case() -> CoordCase {
    load_case(SYNTHETIC_CASE).expect("bundled synthetic case parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_unit_round_trip() {
        let case = illustrative_case();
        let pu = to_per_unit(&case).unwrap();
        assert!((pu.transmission.buses[1].active_load - 2.0).abs() < 1e-15);
        assert_eq!(to_per_unit(&pu).unwrap(), pu);
        let back = from_per_unit(&pu).unwrap();
        assert!((back.transmission.buses[1].active_load - 200.0).abs() < 1e-12);
        let mut bad = case.clone();
        bad.base_mva = 0.0;
        assert_eq!(to_per_unit(&bad), Err(GridError::BadBase(0.0)));
    }

    #[test]
    fn default_transfer_prices_follow_generator_costs() {
        let mut case = synthetic_case();
        let d = &mut case.distribution_systems[0];
        d.bid_price = None;
        d.offer_price = None;
        let costs: Vec<f64> = d.generators.iter().map(|g| g.incremental_cost).collect();
        assert_eq!(d.effective_bid_price(), costs.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(d.effective_offer_price(), costs.iter().copied().fold(0.0, f64::max));
    }
}
