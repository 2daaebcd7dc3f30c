use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const FIXTURE: &str = r#"
[lattice]
cutoff = 1.0
grid_n = 9
spacing = 8.0
bz_size = 4

[nuclear]
Z = 1
sigma = 0.02

[solver]
tol = 1e-10
anderson_depth = 6

[run]
L_list = [1, 2]
"#;

const BINDING_SITE: &str = "[[sites]]\ncenter = [0.5, 0.5, 0.5]\namplitude = 0.6\nwidth = 0.15\n";

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermi-sea")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn minimal_config_emits_stamped_json() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", "[lattice]\ncutoff = 25.0\ngrid_n = 5\n[nuclear]\nZ = 1\nform = \"uniform\"\n");
    let out = ws.out("o");
    let r = run(&["scf-periodic", "--config", s(&cfg), "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v = json(out.join("scf_periodic.json"));
    assert_eq!(v["tool"], "fermi-sea");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
    assert!(v["result"]["I0_per"].as_f64().unwrap().is_finite());
    assert!(v["result"]["gap"]["open"].is_boolean());
}

#[test]
fn negative_cutoff_is_rejected_by_key() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", &FIXTURE.replace("cutoff = 1.0", "cutoff = -1.0"));
    let r = run(&["scf-periodic", "--config", s(&cfg), "--out", s(&ws.out("o"))]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("lattice.cutoff"));
}

#[test]
fn unknown_key_is_reported_with_its_name() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", &format!("{FIXTURE}\n[extra]\nfoo = 1\n"));
    let r = run(&["scf-periodic", "--config", s(&cfg), "--out", s(&ws.out("o"))]);
    assert!(!r.status.success());
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("extra") && err.contains("line"), "{err}");
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", FIXTURE);
    let strip = |p: PathBuf| {
        let text = std::fs::read_to_string(p).unwrap();
        text.lines()
            .filter(|l| !l.contains("\"generated_at\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = ws.out(name);
        let r = run(&["scf-periodic", "--config", s(&cfg), "--out", s(&out), "--deterministic"]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        outputs.push(strip(out.join("scf_periodic.json")));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(outputs[0].contains("\"deterministic\": true"));
}

#[test]
fn config_hash_tracks_content() {
    let ws = Workspace::new();
    let a = ws.file("a.toml", FIXTURE);
    // Same content with different layout and comments.
    let b = ws.file("b.toml", &format!("# comment\n{}", FIXTURE.replace("Z = 1", "Z    =   1")));
    let c = ws.file("c.toml", &FIXTURE.replace("tol = 1e-10", "tol = 1e-9"));
    let hash = |cfg: &Path, out: &str| {
        let out = ws.out(out);
        assert!(run(&["scf-periodic", "--config", s(cfg), "--out", s(&out)]).status.success());
        json(out.join("scf_periodic.json"))["config_sha256"].clone()
    };
    let (ha, hb, hc) = (hash(&a, "a"), hash(&b, "b"), hash(&c, "c"));
    assert_eq!(ha, hb);
    assert_ne!(ha, hc);
}

#[test]
fn supercell_bound_electron_report() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", FIXTURE);
    let defect = ws.file("d.toml", BINDING_SITE);
    let out = ws.out("o");
    let r = run(&[
        "supercell", "--config", s(&cfg), "--out", s(&out), "--L", "2", "--defect", s(&defect), "--mode", "mu", "--ef",
        "0.095",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v = json(out.join("supercell.json"))["result"].clone();
    assert_eq!(v["occupations"]["total_electrons"], 9.0);
    let d = &v["defect_report"]["decomposition"];
    assert!((d["bound_electrons"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(d["gap_levels"].as_array().unwrap().len(), 1);
    let e = &v["defect_report"]["energy"];
    assert!((e["charge"].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn charge_mode_requires_q() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", FIXTURE);
    let r = run(&["supercell", "--config", s(&cfg), "--out", s(&ws.out("o")), "--L", "1", "--mode", "charge"]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("--q"));
}

#[test]
fn metallic_problem_refuses_fermi_level_runs() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", "[lattice]\ncutoff = 25.0\ngrid_n = 5\n[nuclear]\nZ = 1\nform = \"uniform\"\n");
    let r = run(&["supercell", "--config", s(&cfg), "--out", s(&ws.out("o")), "--L", "1", "--mode", "mu"]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("metallic"));
}

#[test]
fn e_of_q_csv_carries_units_and_hash() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", FIXTURE);
    let out = ws.out("o");
    let r = run(&["e-of-q", "--config", s(&cfg), "--out", s(&out), "--L", "1", "--q-grid", "-0.5:0.5:0.5"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(out.join("e_of_q.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# fermi-sea") && lines[0].contains("config_sha256="));
    assert_eq!(lines[1], "q,energy_hartree,multiplier_hartree,multiplier_in_gap");
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("0.0,0.0,"));
}

#[test]
fn density_conv_and_sweep_tables() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", FIXTURE);
    let out = ws.out("o");
    let r = run(&["density-conv", "--config", s(&cfg), "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = json(out.join("density_conv.json"))["result"].clone();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[1]["energy_error"].as_f64() < rows[0]["energy_error"].as_f64());

    // ν = 0 at a Fermi level: ΔI_L vanishes identically.
    let r = run(&["sweep-l", "--config", s(&cfg), "--out", s(&out), "--ef", "0.08"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v = json(out.join("sweep_l.json"))["result"].clone();
    for row in v["rows"].as_array().unwrap() {
        assert_eq!(row["delta"], 0.0);
    }
    assert_eq!(v["rhs"]["sea_cross"], 0.0);
    let csv = std::fs::read_to_string(out.join("sweep_l.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("L,"));
}

#[test]
fn bands_along_a_path() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", FIXTURE);
    let out = ws.out("o");
    let r = run(&["bands", "--config", s(&cfg), "--out", s(&out), "--path", "G,X", "--points", "2", "--bands", "3"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(out.join("bands.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "xi1,xi2,xi3,n,lambda_hartree");
    assert_eq!(text.lines().count(), 2 + 3 * 3);
    let r = run(&["bands", "--config", s(&cfg), "--out", s(&out), "--path", "G,K"]);
    assert!(!r.status.success());
}

#[test]
fn validate_passes() {
    let ws = Workspace::new();
    let cfg = ws.file("c.toml", FIXTURE);
    let out = ws.out("o");
    let r = run(&["validate", "--config", s(&cfg), "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stdout));
    assert_eq!(json(out.join("validate.json"))["result"]["pass"], true);
}
