use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tdcoord::grid::{illustrative_case, render, CoordCase};
use tdcoord::report::{mask_elapsed, SAVINGS_HEADER};

fn cases_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

/// Runs the binary and returns its exit code and the run directory it printed.
fn tdcoord(args: &[&str], out: &Path) -> (i32, Option<PathBuf>) {
    let output = Command::new(env!("CARGO_BIN_EXE_tdcoord")).args(args).arg("--out").arg(out).output().expect("binary runs");
    let stdout = String::from_utf8_lossy(&output.stdout);
    let dir = stdout.lines().map(PathBuf::from).find(|p| p.starts_with(out) && p.is_dir());
    (output.status.code().expect("exit code"), dir)
}

fn write_case(dir: &Path, name: &str, case: &CoordCase) -> String {
    let path = dir.join(name);
    fs::write(&path, render(case)).unwrap();
    path.to_string_lossy().into_owned()
}

fn illustrative() -> String {
    cases_dir().join("illustrative.case").to_string_lossy().into_owned()
}

fn synthetic() -> String {
    cases_dir().join("synthetic14.case").to_string_lossy().into_owned()
}

#[test]
fn validate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, dir) = tdcoord(&["validate", "--case", &illustrative()], tmp.path());
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(dir.unwrap().join("validation.txt")).unwrap(), "clean\n");

    let mut cyclic = illustrative_case();
    let ds = &mut cyclic.distribution_systems[0];
    let mut extra = ds.branches[0].clone();
    extra.id = "loop".into();
    std::mem::swap(&mut extra.sending_bus, &mut extra.receiving_bus);
    ds.branches.push(extra);
    let path = write_case(tmp.path(), "cyclic.case", &cyclic);
    let (code, dir) = tdcoord(&["validate", "--case", &path], tmp.path());
    assert_eq!(code, 1);
    let findings = fs::read_to_string(dir.unwrap().join("validation.txt")).unwrap();
    assert!(findings.contains("Radiality"), "{findings}");

    let (code, _) = tdcoord(&["validate", "--case", "/no/such/file.case"], tmp.path());
    assert_eq!(code, 2);
    let garbage = tmp.path().join("garbage.case");
    fs::write(&garbage, "this is = = not toml").unwrap();
    let (code, _) = tdcoord(&["validate", "--case", garbage.to_str().unwrap()], tmp.path());
    assert_eq!(code, 2);
}

#[test]
fn unknown_setting_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _) = tdcoord(&["solve", "--case", &illustrative(), "--set", "slr.bogus=1"], tmp.path());
    assert_eq!(code, 2);
}

#[test]
fn zero_iterations_give_header_and_initialization_row() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, dir) = tdcoord(&["coordinate", "--case", &illustrative(), "--set", "slr.max_iters=0"], tmp.path());
    // Stopping at the iteration limit is non-convergence.
    assert_eq!(code, 1);
    let dir = dir.unwrap();
    let csv = fs::read_to_string(dir.join("trace.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("iter,surrogate_dual,direction_norm,gap,lambda_1,lambda_2,h_1,h_2,psi_buy_DSO-1,psi_buy_DSO-2,psi_sell_DSO-1,psi_sell_DSO-2,elapsed_s"));
    assert!(lines[1].starts_with("0,"));
    let meta = fs::read_to_string(dir.join("meta.toml")).unwrap();
    assert!(meta.contains("max_iters = 0") && meta.contains("terminal_status = \"MaxIters\""), "{meta}");
}

#[test]
fn decoupled_case_has_a_single_row() {
    let tmp = tempfile::tempdir().unwrap();
    let mut case = illustrative_case();
    case.interfaces.iter_mut().for_each(|l| l.exchange_limit = 0.0);
    case.transmission.generators.iter_mut().for_each(|g| g.p_max = 400.0);
    let path = write_case(tmp.path(), "decoupled.case", &case);
    let (code, dir) = tdcoord(&["coordinate", "--case", &path], tmp.path());
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.unwrap().join("trace.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].split(',').nth(2), Some("0"));
}

#[test]
fn illustrative_prices_converge_and_reruns_match() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, dir) = tdcoord(&["coordinate", "--case", &illustrative()], tmp.path());
    assert_eq!(code, 0);
    let dir = dir.unwrap();
    let first = fs::read_to_string(dir.join("trace.csv")).unwrap();
    let header: Vec<&str> = first.lines().next().unwrap().split(',').collect();
    let last: Vec<&str> = first.lines().last().unwrap().split(',').collect();
    for name in ["lambda_1", "lambda_2"] {
        let i = header.iter().position(|h| *h == name).unwrap();
        let lam: f64 = last[i].parse().unwrap();
        assert!((lam - 16.0).abs() <= 0.16, "{name} = {lam}");
    }
    let solution = fs::read_to_string(dir.join("solution.out")).unwrap();
    assert!(solution.contains("[[lmp]]"));

    let (code, again) = tdcoord(&["coordinate", "--case", &illustrative()], tmp.path());
    assert_eq!(code, 0);
    assert_eq!(again.as_deref(), Some(dir.as_path()));
    let second = fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert_eq!(mask_elapsed(&first), mask_elapsed(&second));
}

#[test]
fn solve_reports_the_monolithic_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, dir) = tdcoord(&["solve", "--case", &illustrative()], tmp.path());
    assert_eq!(code, 0);
    let text = fs::read_to_string(dir.unwrap().join("solution.out")).unwrap();
    let sol: toml::Table = toml::from_str(&text).unwrap();
    let gen: Vec<f64> = sol["transmission"]["gen_p"].as_array().unwrap().iter().map(|v| v.as_float().unwrap()).collect();
    assert!((gen[0] - 65.0).abs() < 1e-4 && (gen[1] - 15.0).abs() < 1e-4, "{gen:?}");
}

#[test]
fn scale_study_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, dir) = tdcoord(&["scale-study", "--case", &synthetic(), "--set", "scale.n_list=[]"], tmp.path());
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(dir.unwrap().join("savings.csv")).unwrap(), format!("{SAVINGS_HEADER}\n"));

    let (code, _) = tdcoord(&["scale-study", "--case", &synthetic(), "--set", "scale.n_list=[1, 99]"], tmp.path());
    assert_eq!(code, 1);

    let (code, dir) = tdcoord(&["scale-study", "--case", &synthetic(), "--set", "scale.n_list=[1]"], tmp.path());
    assert_eq!(code, 0);
    let dir = dir.unwrap();
    let table = fs::read_to_string(dir.join("savings.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let cells: Vec<f64> = rows[0].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells[0], 1.0);
    let meta: toml::Table = toml::from_str(&fs::read_to_string(dir.join("meta.toml")).unwrap()).unwrap();
    let row = &meta["result"]["rows"]["1"];
    let coordinated = row["coordinated_welfare"].as_float().unwrap();
    let isolated = row["uncoordinated_welfare"].as_float().unwrap();
    assert!(coordinated >= isolated - 1e-6, "{coordinated} < {isolated}");
    assert_eq!(row["hosts"].as_array().unwrap().len(), 1);
}

#[test]
fn random_case_is_saved_with_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, dir) = tdcoord(&["validate", "--case", "@random", "--set", "seed=7"], tmp.path());
    assert_eq!(code, 0);
    let dir = dir.unwrap();
    let text = fs::read_to_string(dir.join("case.toml")).unwrap();
    assert!(tdcoord::grid::load_case(&text).is_ok());
    assert!(fs::read_to_string(dir.join("meta.toml")).unwrap().contains("seed = 7"));
}
