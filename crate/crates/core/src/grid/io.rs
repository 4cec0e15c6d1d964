//! TOML case documents.

use std::collections::HashSet;
use std::path::Path;

use super::validate::orient_branches;
use super::{CoordCase, GridError};

/// Parses a case document, resolves references and orients feeder branches
/// child to parent.
pub fn load_case(text: &str) -> Result<CoordCase, GridError> {
    let mut case: CoordCase = toml::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
    check_unique_ids(&case)?;
    resolve_references(&mut case)?;
    for dso in &mut case.distribution_systems {
        orient_branches(dso);
    }
    Ok(case)
}

pub fn load_case_file(path: impl AsRef<Path>) -> Result<CoordCase, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GridError::Io(format!("{}: {e}", path.display())))?;
    load_case(&text)
}

/// Canonical document for `case`; `load_case(&render(case))` reproduces it.
pub fn render(case: &CoordCase) -> String {
    toml::to_string(case).expect("case serializes")
}

fn check_unique<'a>(what: &str, ids: impl Iterator<Item = &'a String>) -> Result<(), GridError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(GridError::Parse(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(())
}

fn check_unique_ids(case: &CoordCase) -> Result<(), GridError> {
    let t = &case.transmission;
    check_unique("transmission bus", t.buses.iter().map(|b| &b.id))?;
    check_unique("transmission line", t.lines.iter().map(|l| &l.id))?;
    check_unique(
        "generator",
        t.generators.iter().map(|g| &g.id).chain(case.distribution_systems.iter().flat_map(|d| d.generators.iter().map(|g| &g.id))),
    )?;
    check_unique("distribution system", case.distribution_systems.iter().map(|d| &d.id))?;
    for d in &case.distribution_systems {
        check_unique("distribution bus", d.buses.iter().map(|b| &b.id))?;
        check_unique("distribution branch", d.branches.iter().map(|b| &b.id))?;
    }
    Ok(())
}

fn resolve_references(case: &mut CoordCase) -> Result<(), GridError> {
    let t = &case.transmission;
    if t.buses.is_empty() {
        return Err(GridError::Reference("transmission bus list is empty".into()));
    }
    let bus_ids: HashSet<&str> = t.buses.iter().map(|b| b.id.as_str()).collect();
    for l in &t.lines {
        for end in [&l.from_bus, &l.to_bus] {
            if !bus_ids.contains(end.as_str()) {
                return Err(GridError::Reference(format!("line {} refers to unknown bus {end}", l.id)));
            }
        }
    }
    for g in &t.generators {
        if !bus_ids.contains(g.bus.as_str()) {
            return Err(GridError::Reference(format!("generator {} refers to unknown bus {}", g.id, g.bus)));
        }
    }
    for d in &case.distribution_systems {
        if d.buses.is_empty() {
            return Err(GridError::Reference(format!("distribution system {} has no buses", d.id)));
        }
        let ids: HashSet<&str> = d.buses.iter().map(|b| b.id.as_str()).collect();
        for br in &d.branches {
            for end in [&br.sending_bus, &br.receiving_bus] {
                if !ids.contains(end.as_str()) {
                    return Err(GridError::Reference(format!("branch {} of {} refers to unknown bus {end}", br.id, d.id)));
                }
            }
        }
        for g in &d.generators {
            if !ids.contains(g.bus.as_str()) {
                return Err(GridError::Reference(format!("generator {} of {} refers to unknown bus {}", g.id, d.id, g.bus)));
            }
        }
    }
    let dso_ids: HashSet<&str> = case.distribution_systems.iter().map(|d| d.id.as_str()).collect();
    for link in &case.interfaces {
        if !bus_ids.contains(link.transmission_bus.as_str()) {
            return Err(GridError::Reference(format!("interface refers to unknown transmission bus {}", link.transmission_bus)));
        }
        if !dso_ids.contains(link.distribution_system.as_str()) {
            return Err(GridError::Reference(format!("interface refers to unknown distribution system {}", link.distribution_system)));
        }
    }
    // hosts_dso mirrors the interface list; an explicit value must agree with it.
    let links = case.interfaces.clone();
    for bus in &mut case.transmission.buses {
        let hosted: Vec<&str> = links.iter().filter(|l| l.transmission_bus == bus.id).map(|l| l.distribution_system.as_str()).collect();
        match (&bus.hosts_dso, hosted.as_slice()) {
            (Some(h), [one]) if h == one => {}
            (Some(h), _) => {
                return Err(GridError::Reference(format!("bus {} declares hosts_dso = {h} without a matching interface", bus.id)));
            }
            (None, [one]) => bus.hosts_dso = Some(one.to_string()),
            // Several links on one bus are reported by `validate`.
            (None, _) => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{illustrative_case, ILLUSTRATIVE_CASE};

    #[test]
    fn illustrative_case_shape() {
        let case = load_case(ILLUSTRATIVE_CASE).unwrap();
        assert_eq!(case.transmission.buses.len(), 2);
        assert_eq!(case.distribution_systems.len(), 2);
        assert_eq!(case.transmission.buses[0].hosts_dso.as_deref(), Some("DSO-1"));
    }

    #[test]
    fn render_round_trips() {
        let case = illustrative_case();
        assert_eq!(load_case(&render(&case)).unwrap(), case);
    }

    #[test]
    fn rejects_unknown_fields_and_duplicates() {
        let text = ILLUSTRATIVE_CASE.replacen("base_mva", "colour = 1\nbase_mva", 1);
        assert!(matches!(load_case(&text), Err(GridError::Parse(_))));
        let mut case = illustrative_case();
        let dup = case.transmission.generators[0].clone();
        case.transmission.generators.push(dup);
        assert!(matches!(load_case(&render(&case)), Err(GridError::Parse(_))));
    }

    #[test]
    fn empty_bus_list_is_a_reference_error() {
        let mut case = illustrative_case();
        case.transmission.buses.clear();
        case.transmission.lines.clear();
        case.transmission.generators.clear();
        case.interfaces.clear();
        assert!(matches!(load_case(&render(&case)), Err(GridError::Reference(_))));
    }
}
