//! Run settings, dotted-key overrides, output formats and the replication
//! study behind the savings table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use web_time::Instant;

use crate::baseline::{savings, uncoordinated_cost, BaselineError, ReferenceSolution, SavingsReport, SystemCosts};
use crate::coordinator::{run, ConvergenceTrace, CoordError, SlrConfig, TerminalStatus};
use crate::dso::DsoSolution;
use crate::grid::{highest_load_hosts, replicate_dsos, CoordCase, GridError, InterfaceLink, RandomCaseSpec};
use crate::milp::BnBConfig;
use crate::tso::TsoSolution;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("malformed override {0:?}: expected key=value")]
    Assignment(String),
    #[error("unknown setting {0}")]
    UnknownKey(String),
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error("scale study asks for {requested} hosts but only {available} buses qualify")]
    TooManyHosts { requested: usize, available: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Coord(#[from] CoordError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    /// Numbers of replicated distribution systems, one table row each.
    pub n_list: Vec<usize>,
    /// Distribution system to replicate; the first one in the case if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self { n_list: vec![1, 2, 4, 8], template: None }
    }
}

/// Every tunable of a run. `--set` addresses fields by dotted name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub slr: SlrConfig,
    pub bnb: BnBConfig,
    pub scale: ScaleConfig,
    /// Seed of the generated case used when the case path is `@random`.
    pub seed: u64,
    pub random: RandomCaseSpec,
}

impl Settings {
    /// Applies one `dotted.key=value` assignment. Values are read as TOML
    /// literals, falling back to a bare string.
    pub fn apply(&mut self, assignment: &str) -> Result<(), ReportError> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| ReportError::Assignment(assignment.to_string()))?;
        let raw = raw.trim();
        let key = match key.trim() {
            k if k.contains('.') => k.to_string(),
            k => self.section_of(k).map(|s| format!("{s}.{k}")).unwrap_or_else(|| k.to_string()),
        };
        let key = key.as_str();
        if key.is_empty() {
            return Err(ReportError::Assignment(assignment.to_string()));
        }
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let mut root = toml::Value::try_from(&*self).map_err(|e| ReportError::Settings(e.to_string()))?;
        let mut parts: Vec<&str> = key.split('.').collect();
        let leaf = parts.pop().expect("split yields one part");
        let mut node = &mut root;
        for p in parts {
            node = node.get_mut(p).filter(|v| v.is_table()).ok_or_else(|| ReportError::UnknownKey(key.to_string()))?;
        }
        let table = node.as_table_mut().ok_or_else(|| ReportError::UnknownKey(key.to_string()))?;
        let value = match (table.get(leaf), value) {
            (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        table.insert(leaf.to_string(), value);
        *self = root.try_into().map_err(|e: toml::de::Error| {
            if e.message().contains("unknown field") {
                ReportError::UnknownKey(key.to_string())
            } else {
                ReportError::Settings(format!("{key}: {}", e.message()))
            }
        })?;
        Ok(())
    }

    /// Section holding a bare coordinator or branch-and-bound field name.
    fn section_of(&self, field: &str) -> Option<&'static str> {
        let root = toml::Value::try_from(self).ok()?;
        ["slr", "bnb"].into_iter().find(|s| root.get(s).and_then(|t| t.get(field)).is_some())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }
}

/// Short digest naming the output directory of a run.
pub fn config_hash(command: &str, case_text: &str, settings: &Settings) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(case_text.as_bytes());
    h.update([0]);
    h.update(settings.to_toml().as_bytes());
    hex::encode(h.finalize())[..12].to_string()
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Header of the wall-clock column, excluded from determinism checks.
pub const ELAPSED_COLUMN: &str = "elapsed_s";

/// One line per record. Floats print in shortest round-trip form, so the
/// update rules can be replayed exactly from the file.
pub fn trace_csv(trace: &ConvergenceTrace) -> String {
    let mut cols = vec!["iter".to_string(), "surrogate_dual".into(), "direction_norm".into(), "gap".into()];
    cols.extend(trace.coupled_buses.iter().map(|b| format!("lambda_{b}")));
    cols.extend(trace.coupled_buses.iter().map(|b| format!("h_{b}")));
    cols.extend(trace.dso_ids.iter().map(|d| format!("psi_buy_{d}")));
    cols.extend(trace.dso_ids.iter().map(|d| format!("psi_sell_{d}")));
    cols.push(ELAPSED_COLUMN.into());
    cols.extend(["stepsize".into(), "penalty".into(), "surrogate_unmet".into()]);
    cols.extend(trace.dso_ids.iter().map(|d| format!("rbuy_{d}")));
    cols.extend(trace.dso_ids.iter().map(|d| format!("rsell_{d}")));
    let mut out = cols.join(",");
    out.push('\n');
    for r in &trace.records {
        let mut row = vec![r.k.to_string(), r.surrogate_dual.to_string(), r.direction_norm.to_string(), r.gap.map(|g| g.to_string()).unwrap_or_default()];
        for v in [&r.lambda, &r.violations, &r.psi_buy, &r.psi_sell] {
            row.extend(v.iter().map(|x| x.to_string()));
        }
        row.push(r.elapsed.to_string());
        row.extend([r.stepsize.to_string(), r.penalty.to_string(), u8::from(r.surrogate_unmet).to_string()]);
        row.extend(r.coupling_buy.iter().map(|x| x.to_string()));
        row.extend(r.coupling_sell.iter().map(|x| x.to_string()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// The CSV with every value of the wall-clock column blanked.
pub fn mask_elapsed(csv: &str) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let idx = header.split(',').position(|c| c == ELAPSED_COLUMN);
    let mut out = String::from(header);
    out.push('\n');
    for line in lines {
        let cells: Vec<&str> = line.split(',').enumerate().map(|(i, c)| if Some(i) == idx { "" } else { c }).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub const SAVINGS_HEADER: &str = "# of DSOs,TSO cost savings %,DSO cost savings %,CPU time";

pub fn savings_csv(rows: &[SavingsReport]) -> String {
    let mut out = format!("{SAVINGS_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.n_dsos, r.tso_savings_pct, r.dso_savings_pct, r.cpu_seconds);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PriceEntry {
    bus: String,
    dso: String,
    lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SolutionDump<'a> {
    method: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    status: Option<TerminalStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iteration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    welfare: Option<f64>,
    lmp: Vec<PriceEntry>,
    transmission: &'a TsoSolution,
    distribution: &'a [DsoSolution],
}

fn prices(case: &CoordCase, lambdas: &[f64]) -> Vec<PriceEntry> {
    let hosts = case.host_indices().unwrap_or_default();
    case.distribution_systems
        .iter()
        .zip(lambdas)
        .zip(hosts)
        .map(|((d, &lambda), b)| PriceEntry { bus: case.transmission.buses[b].id.clone(), dso: d.id.clone(), lambda })
        .collect()
}

/// TOML dump of the monolithic optimum.
pub fn reference_solution_text(case: &CoordCase, r: &ReferenceSolution) -> String {
    let dump = SolutionDump {
        method: "monolithic",
        status: None,
        iteration: None,
        welfare: Some(r.welfare),
        lmp: prices(case, &r.lmps),
        transmission: &r.tso,
        distribution: &r.dsos,
    };
    toml::to_string(&dump).expect("solution serializes")
}

/// TOML dump of the final primal estimate of a coordination trace.
pub fn trace_solution_text(case: &CoordCase, method: &str, t: &ConvergenceTrace) -> String {
    let e = &t.final_estimate;
    let dump = SolutionDump {
        method,
        status: Some(t.terminal_status),
        iteration: Some(e.iteration),
        welfare: e.welfare,
        lmp: prices(case, &e.lambda),
        transmission: &e.tso,
        distribution: &e.dsos,
    };
    toml::to_string(&dump).expect("solution serializes")
}

/// `case` without `template`, plus the removed feeder and its link.
fn detach(case: &CoordCase, template: &str) -> Result<(CoordCase, crate::grid::DistributionSystem, InterfaceLink), ReportError> {
    let tpl = case.dso(template).ok_or_else(|| GridError::UnknownDso(template.to_string()))?.clone();
    let link = case.link_for(template).ok_or_else(|| GridError::MissingInterface(template.to_string()))?.clone();
    let mut base = case.clone();
    base.distribution_systems.retain(|d| d.id != template);
    base.interfaces.retain(|l| l.distribution_system != template);
    for b in &mut base.transmission.buses {
        if b.hosts_dso.as_deref() == Some(template) {
            b.hosts_dso = None;
        }
    }
    Ok((base, tpl, link))
}

/// `case` with the template feeder copied onto its `n` busiest transmission
/// buses. The template itself is removed, so the study system carries the
/// load of `case` less the template's.
pub fn scale_case(case: &CoordCase, template: &str, n: usize) -> Result<(CoordCase, Vec<String>), ReportError> {
    let (base, tpl, link) = detach(case, template)?;
    let hosts = highest_load_hosts(&base, n).ok_or_else(|| ReportError::TooManyHosts {
        requested: n,
        available: base.transmission.buses.iter().filter(|b| b.hosts_dso.is_none() && b.active_load > 0.0).count(),
    })?;
    // The staged template points at no bus so that any bus may host a copy.
    let mut staged = base;
    staged.distribution_systems.push(tpl);
    staged.interfaces.push(InterfaceLink { transmission_bus: String::new(), ..link });
    let mut out = replicate_dsos(&staged, template, &hosts)?;
    out.distribution_systems.retain(|d| d.id != template);
    out.interfaces.retain(|l| l.distribution_system != template);
    Ok((out, hosts))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRow {
    pub savings: SavingsReport,
    pub hosts: Vec<String>,
    pub terminal_status: TerminalStatus,
    pub iterations: usize,
    pub coordinated_welfare: Option<f64>,
    pub uncoordinated_welfare: f64,
    /// Load of the case without the template, before replication (MW).
    pub load_before: f64,
    pub load_after: f64,
}

/// One study row: coordination and isolated operation on the replicated case.
pub fn scale_row(case: &CoordCase, template: &str, n: usize, slr: &SlrConfig, bnb: &BnBConfig) -> Result<ScaleRow, ReportError> {
    let (study, hosts) = scale_case(case, template, n)?;
    let (base, _, _) = detach(case, template)?;
    let unc = uncoordinated_cost(&study, bnb)?;
    let start = Instant::now();
    let trace = run(&study, slr, bnb)?;
    let cpu = start.elapsed().as_secs_f64();
    let e = &trace.final_estimate;
    let welfare = e.welfare.unwrap_or(f64::NEG_INFINITY);
    let coord = SystemCosts::coordinated(&study, &e.tso, &e.dsos, &e.lambda, welfare);
    Ok(ScaleRow {
        savings: savings(n, &coord, &unc.costs, cpu),
        hosts,
        terminal_status: trace.terminal_status,
        iterations: trace.records.last().map_or(0, |r| r.k),
        coordinated_welfare: e.welfare,
        uncoordinated_welfare: unc.costs.welfare,
        load_before: base.total_active_load() * case.power_unit(),
        load_after: study.total_active_load() * case.power_unit(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::synthetic_case;

    #[test]
    fn dotted_overrides() {
        let mut s = Settings::default();
        s.apply("slr.s0=0.5").unwrap();
        s.apply("slr.c_max = 100").unwrap();
        s.apply("bnb.solver.max_iters=50").unwrap();
        s.apply("slr.pricing=literal").unwrap();
        s.apply("scale.n_list=[]").unwrap();
        s.apply("scale.template=F14").unwrap();
        s.apply("slr.lambda0=[16, 16]").unwrap();
        assert_eq!(s.slr.s0, 0.5);
        assert_eq!(s.slr.c_max, 100.0);
        assert_eq!(s.bnb.solver.max_iters, 50);
        assert_eq!(s.slr.pricing, crate::tso::PricingMode::Literal);
        assert!(s.scale.n_list.is_empty());
        assert_eq!(s.scale.template.as_deref(), Some("F14"));
        assert_eq!(s.slr.lambda0, vec![16.0, 16.0]);
        assert_eq!(s.apply("slr.nope=1"), Err(ReportError::UnknownKey("slr.nope".into())));
        assert_eq!(s.apply("nope.s0=1"), Err(ReportError::UnknownKey("nope.s0".into())));
        assert!(matches!(s.apply("slr.max_iters=-3"), Err(ReportError::Settings(_))));
        assert!(matches!(s.apply("slr.s0"), Err(ReportError::Assignment(_))));
    }

    #[test]
    fn hash_changes_with_settings() {
        let a = Settings::default();
        let mut b = Settings::default();
        b.apply("slr.max_iters=3").unwrap();
        assert_ne!(config_hash("coordinate", "x", &a), config_hash("coordinate", "x", &b));
        assert_eq!(config_hash("coordinate", "x", &a), config_hash("coordinate", "x", &a.clone()));
        assert_ne!(config_hash("coordinate", "x", &a), config_hash("baseline", "x", &a));
    }

    #[test]
    fn masking_blanks_only_the_clock() {
        let csv = "iter,elapsed_s,x\n0,0.25,1\n1,0.5,2\n";
        assert_eq!(mask_elapsed(csv), "iter,elapsed_s,x\n0,,1\n1,,2\n");
    }

    #[test]
    fn scale_case_moves_load_into_copies() {
        let case = synthetic_case();
        let tpl = case.distribution_systems[0].id.clone();
        let (study, hosts) = scale_case(&case, &tpl, 3).unwrap();
        assert_eq!(hosts.len(), 3);
        assert_eq!(study.distribution_systems.len(), 3);
        let t_load: f64 = case.transmission.buses.iter().map(|b| b.active_load).sum();
        assert!((study.total_active_load() - t_load).abs() / case.base_mva < 1e-9);
        assert!(matches!(scale_case(&case, &tpl, 99), Err(ReportError::TooManyHosts { requested: 99, .. })));
    }
}
