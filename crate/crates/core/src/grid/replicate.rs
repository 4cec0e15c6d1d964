//! Replication of a template distribution system onto transmission buses.

use super::{CoordCase, GridError, InterfaceLink};

/// Attaches a copy of `template` to every bus in `host_buses`.
///
/// Each host's direct transmission load is removed and the copies' loads are
/// scaled by one common factor so that total system load is unchanged.
pub fn replicate_dsos(case: &CoordCase, template: &str, host_buses: &[String]) -> Result<CoordCase, GridError> {
    let tpl = case.dso(template).ok_or_else(|| GridError::UnknownDso(template.to_string()))?.clone();
    let tpl_link = case.link_for(template).ok_or_else(|| GridError::MissingInterface(template.to_string()))?.clone();
    if host_buses.is_empty() {
        return Ok(case.clone());
    }
    let mut out = case.clone();
    let mut removed = 0.0;
    for host in host_buses {
        let idx = out.transmission.bus_index(host).ok_or_else(|| GridError::UnknownBus(host.clone()))?;
        let bus = &mut out.transmission.buses[idx];
        if bus.hosts_dso.is_some() || out.interfaces.iter().any(|l| &l.transmission_bus == host) {
            return Err(GridError::BusAlreadyHosts(host.clone()));
        }
        removed += bus.active_load;
        bus.active_load = 0.0;
    }
    let tpl_load = tpl.total_active_load();
    if !(tpl_load > 0.0) {
        return Err(GridError::EmptyTemplate(template.to_string()));
    }
    let factor = removed / (host_buses.len() as f64 * tpl_load);
    for host in host_buses {
        let mut copy = tpl.clone();
        copy.id = format!("{template}@{host}");
        for b in &mut copy.buses {
            b.active_load *= factor;
            b.reactive_load *= factor;
        }
        for g in &mut copy.generators {
            g.id = format!("{}@{host}", g.id);
        }
        out.interfaces.push(InterfaceLink {
            transmission_bus: host.clone(),
            distribution_system: copy.id.clone(),
            exchange_limit: tpl_link.exchange_limit,
        });
        let idx = out.transmission.bus_index(host).expect("checked above");
        out.transmission.buses[idx].hosts_dso = Some(copy.id.clone());
        out.distribution_systems.push(copy);
    }
    Ok(out)
}

/// The `n` transmission buses with the largest direct load that host no
/// distribution system yet, ties broken by bus order.
pub fn highest_load_hosts(case: &CoordCase, n: usize) -> Option<Vec<String>> {
    let mut free: Vec<(usize, f64)> = case
        .transmission
        .buses
        .iter()
        .enumerate()
        .filter(|(_, b)| b.hosts_dso.is_none() && b.active_load > 0.0)
        .map(|(i, b)| (i, b.active_load))
        .collect();
    if free.len() < n {
        return None;
    }
    free.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Some(free[..n].iter().map(|&(i, _)| case.transmission.buses[i].id.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{illustrative_case, synthetic_case, validate};

    #[test]
    fn zero_hosts_is_identity() {
        let case = synthetic_case();
        let tpl = case.distribution_systems[0].id.clone();
        assert_eq!(replicate_dsos(&case, &tpl, &[]).unwrap(), case);
    }

    #[test]
    fn replication_conserves_load() {
        let case = synthetic_case();
        let tpl = case.distribution_systems[0].id.clone();
        let hosts = highest_load_hosts(&case, 4).unwrap();
        let out = replicate_dsos(&case, &tpl, &hosts).unwrap();
        assert_eq!(out.distribution_systems.len(), 5);
        assert!((out.total_active_load() - case.total_active_load()).abs() < 1e-9);
        assert!(validate(&out).is_clean(), "{:?}", validate(&out).findings);
    }

    #[test]
    fn rejects_occupied_host() {
        let case = illustrative_case();
        let host = case.interfaces[0].transmission_bus.clone();
        assert_eq!(replicate_dsos(&case, "DSO-1", &[host.clone()]), Err(GridError::BusAlreadyHosts(host)));
        assert!(matches!(replicate_dsos(&case, "nope", &[]), Err(GridError::UnknownDso(_))));
    }
}
