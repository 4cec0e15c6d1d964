//! WebAssembly bindings behind `www/index.html`: validate a case, solve it
//! monolithically, or coordinate it and return the convergence trace.

use tdcoord::baseline::solve_monolithic;
use tdcoord::coordinator::{run, SlrConfig};
use tdcoord::grid::{load_case, validate};
use tdcoord::milp::BnBConfig;
use tdcoord::report::{reference_solution_text, trace_csv};
use wasm_bindgen::prelude::*;

const ILLUSTRATIVE: &str = include_str!("../../../cases/illustrative.case");
const SYNTHETIC: &str = include_str!("../../../cases/synthetic14.case");

/// Bundled case text by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "illustrative" => Some(ILLUSTRATIVE),
        "synthetic14" => Some(SYNTHETIC),
        _ => None,
    }
}

/// One finding per line, or `clean`.
pub fn validate_text(case_text: &str) -> Result<String, String> {
    let case = load_case(case_text).map_err(|e| e.to_string())?;
    let report = validate(&case);
    if report.is_clean() {
        return Ok("clean".into());
    }
    Ok(report.findings.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("\n"))
}

/// Monolithic optimum as a TOML solution document.
pub fn solve_text(case_text: &str) -> Result<String, String> {
    let case = load_case(case_text).map_err(|e| e.to_string())?;
    let cfg = SlrConfig::default();
    let r = solve_monolithic(&case, cfg.pricing, &BnBConfig::default()).map_err(|e| e.to_string())?;
    Ok(reference_solution_text(&case, &r))
}

/// Convergence trace CSV of a coordination run capped at `max_iters`.
pub fn coordinate_text(case_text: &str, max_iters: usize) -> Result<String, String> {
    let case = load_case(case_text).map_err(|e| e.to_string())?;
    let cfg = SlrConfig { max_iters, ..SlrConfig::default() };
    let trace = run(&case, &cfg, &BnBConfig::default()).map_err(|e| e.to_string())?;
    Ok(trace_csv(&trace))
}

#[wasm_bindgen(js_name = bundledCase)]
pub fn bundled_case(name: &str) -> Result<String, JsValue> {
    bundled(name).map(str::to_string).ok_or_else(|| JsValue::from_str(&format!("no bundled case {name}")))
}

#[wasm_bindgen(js_name = validateCase)]
pub fn validate_case(case_text: &str) -> Result<String, JsValue> {
    validate_text(case_text).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = solveCase)]
pub fn solve_case(case_text: &str) -> Result<String, JsValue> {
    solve_text(case_text).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = coordinateCase)]
pub fn coordinate_case(case_text: &str, max_iters: usize) -> Result<String, JsValue> {
    coordinate_text(case_text, max_iters).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_cases_are_clean() {
        for name in ["illustrative", "synthetic14"] {
            assert_eq!(validate_text(bundled(name).unwrap()).unwrap(), "clean");
        }
        assert!(bundled("nope").is_none());
        assert!(validate_text("not = = toml").is_err());
    }

    #[test]
    fn solve_and_coordinate_the_illustrative_case() {
        let text = bundled("illustrative").unwrap();
        assert!(solve_text(text).unwrap().contains("lambda = 16"));
        let csv = coordinate_text(text, 3).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("iter,surrogate_dual,direction_norm,gap,lambda_1"));
    }
}
