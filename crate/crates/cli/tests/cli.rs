use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crn_core::audit;
use crn_core::io;
use crn_core::parser;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn crn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crn"))
        .args(args)
        .env("CRN_NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_reports_structure() {
    let o = crn(&["check", path_str(&data("four_species.crn"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("rank = 2"));
    assert!(s.contains("gamma_1 = (2, 0, 2, 1)"));
    assert!(s.contains("gamma_2 = (0, 2, 4, 1)"));
    assert!(s.contains("X1 = 1.0000000000000000e0"));
    assert!(s.contains("X4 = 1.0000000000000000e0"));
    assert!(!s.contains('\x1b'));
}

#[test]
fn check_single_reaction_has_n_minus_one_laws() {
    let o = crn(&["check", path_str(&data("valid/isomerization.crn"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("conservation basis (dimension 1)"));
}

#[test]
fn check_rejects_rank_deficient_network() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("dependent.crn");
    fs::write(&file, "fwd: A <=> B ; kf=1, kr=1\ndouble: 2 A <=> 2 B ; kf=1, kr=1\n").unwrap();
    let o = crn(&["check", path_str(&file)]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("rank 1") && e.contains("double"), "{e}");
}

#[test]
fn check_reports_parse_position() {
    let o = crn(&["check", path_str(&data("malformed/05_unknown_species.crn"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("05_unknown_species.crn:2:7:"), "{}", stderr(&o));
}

#[test]
fn simulate_passes_audit_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let again = dir.path().join("b.csv");
    let net = data("four_species.crn");
    for target in [&out, &again] {
        let o = crn(&[
            "simulate", "--network", path_str(&net), "--dt", "1", "--t-end", "50", "--out", path_str(target),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stderr(&o).contains("audit passed"));
    }
    let a = fs::read(&out).unwrap();
    assert_eq!(a, fs::read(&again).unwrap());
    let table = io::read_csv(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(table.records.len(), 51);
    assert_eq!(
        table.layout.header(),
        ["t", "c_X1", "c_X2", "c_X3", "c_X4", "R_R1", "R_R2", "F", "cons_1", "cons_2"]
    );
    assert!(!table.truncated);
}

#[test]
fn audit_recomputed_from_csv_matches_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let json = dir.path().join("run.json");
    let net = data("valid/coupled_as_written.crn");
    for (path, format) in [(&csv, "csv"), (&json, "json")] {
        let o = crn(&[
            "simulate", "--network", path_str(&net), "--dt", "0.25", "--t-end", "5", "--format", format, "--out",
            path_str(path), "--quiet",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (network, _) = parser::load(&fs::read_to_string(&net).unwrap(), None).unwrap();
    let eq = network.solve_equilibrium().unwrap();
    let table = io::read_csv(&fs::read_to_string(&csv).unwrap()).unwrap();
    let recomputed = audit::audit_trajectory(&network, &eq, &network.conservation_basis(), &table.records);

    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["audit"]["trajectory"], serde_json::to_value(&recomputed).unwrap());
    assert_eq!(doc["records"].as_array().unwrap().len(), 21);
    assert_eq!(doc["steps"].as_array().unwrap().len(), 20);
}

#[test]
fn explicit_euler_on_stiff_pair_fails_audit() {
    let o = crn(&[
        "simulate", "--network", path_str(&data("valid/stiff_pair.crn")), "--scheme", "explicit-euler", "--dt", "2",
        "--t-end", "10",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("positivity violated at row 1 species X1"), "{}", stderr(&o));
    let table = io::read_csv(&stdout(&o)).unwrap();
    assert!(table.records[1].c[0] < 0.0);
    assert!(table.layout.reaction_ids.is_empty());
}

#[test]
fn trajectory_scheme_on_stiff_pair_passes() {
    let o = crn(&[
        "simulate", "--network", path_str(&data("valid/stiff_pair.crn")), "--dt", "2", "--t-end", "10",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn zero_horizon_gives_one_row() {
    let o = crn(&["simulate", "--network", path_str(&data("four_species.crn")), "--dt", "0.5", "--t-end", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(io::read_csv(&stdout(&o)).unwrap().records.len(), 1);
}

#[test]
fn solver_failure_truncates_output() {
    let o = crn(&[
        "simulate", "--network", path_str(&data("valid/coupled_as_written.crn")), "--dt", "1", "--t-end", "3",
        "--max-newton", "1", "--tol", "1e-300",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.ends_with("# truncated\n"));
    let table = io::read_csv(&out).unwrap();
    assert!(table.truncated);
    assert_eq!(table.records.len(), 1);
}

#[test]
fn equilibrium_override_is_verified() {
    let net = data("four_species.crn");
    let ok = crn(&["simulate", "--network", path_str(&net), "--dt", "1", "--t-end", "1", "--c-inf", "1,1,1,1"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = crn(&["simulate", "--network", path_str(&net), "--dt", "1", "--t-end", "1", "--c-inf", "1,2,1,1"]);
    assert_eq!(bad.status.code(), Some(2));
    let short = crn(&["simulate", "--network", path_str(&net), "--dt", "1", "--t-end", "1", "--c-inf", "1,1"]);
    assert_eq!(short.status.code(), Some(2));
}

#[test]
fn invalid_configuration() {
    let net = data("four_species.crn");
    let o = crn(&["simulate", "--network", path_str(&net), "--dt", "0", "--t-end", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = crn(&["simulate", "--network", path_str(&data("valid/no_init.crn")), "--dt", "1", "--t-end", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = crn(&["simulate", "--network", "/nonexistent.crn", "--dt", "1", "--t-end", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = crn(&["simulate", "--dt", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_same_scheme_twice_gives_identical_rows() {
    let o = crn(&[
        "compare", "--network", path_str(&data("valid/coupled_as_written.crn")), "--schemes",
        "trajectory,trajectory", "--dt", "0.1", "--t-end", "1", "--csv", "--no-timing",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
}

#[test]
fn compare_flags_positivity_and_order() {
    let o = crn(&[
        "compare", "--network", path_str(&data("valid/stiff_pair.crn")), "--schemes", "trajectory,explicit-euler",
        "--dt", "2", "--t-end", "4", "--csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    let rows: Vec<Vec<&str>> = s.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][0], "trajectory");
    assert_eq!(rows[0][6], "yes");
    assert_eq!(rows[1][0], "explicit-euler");
    assert_eq!(rows[1][6], "no");

    let o = crn(&[
        "compare", "--network", path_str(&data("valid/coupled_as_written.crn")), "--schemes",
        "trajectory,implicit-euler", "--dt", "0.1", "--t-end", "1", "--halvings", "3", "--csv", "--no-timing",
    ]);
    let s = stdout(&o);
    let last_traj: Vec<&str> = s.lines().nth(4).unwrap().split(',').collect();
    let order: f64 = last_traj[7].parse().unwrap();
    assert!((0.9..1.1).contains(&order), "{order}");
}

#[test]
fn compare_needs_two_schemes() {
    let o = crn(&[
        "compare", "--network", path_str(&data("four_species.crn")), "--schemes", "trajectory", "--dt", "1",
        "--t-end", "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
