use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sigen_cli::Table;

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, cmd: &str, config: Option<&Path>, out: &str) -> Output {
        let mut c = Command::new(env!("CARGO_BIN_EXE_sigen"));
        c.arg(cmd).arg("--output").arg(self.out(out));
        if let Some(cfg) = config {
            c.arg("--config").arg(cfg);
        }
        c.output().unwrap()
    }
}

fn report(dir: &Path) -> toml::Table {
    std::fs::read_to_string(dir.join("report.toml")).unwrap().parse().unwrap()
}

fn tables(dir: &Path) -> Vec<String> {
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().to_string_lossy().into_owned();
            name.ends_with(".table").then_some(name)
        })
        .collect();
    names.sort();
    names
}

#[test]
fn factorize_writes_potentials() {
    let s = Sandbox::new();
    let cfg = s.config("f.toml", "family = \"morse\"\n");
    let o = s.run("factorize", Some(&cfg), "f");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(s.out("f").join("potentials.table")).unwrap();
    let t = Table::parse(&text).unwrap();
    assert_eq!(t.columns, ["x", "W", "V_plus", "V_minus", "f", "g"]);
    assert_eq!(t.rows.len(), 2001);
    assert_eq!(report(&s.out("f"))["exit_code"].as_integer(), Some(0));
}

#[test]
fn catalog_needs_no_config() {
    let s = Sandbox::new();
    let o = s.run("catalog", None, "c");
    assert_eq!(o.status.code(), Some(0));
    let r = report(&s.out("c"));
    assert_eq!(r["catalog"].as_array().unwrap().len(), 5);
}

#[test]
fn extend_two_stages_writes_all_nodes() {
    let s = Sandbox::new();
    let cfg = s.config("e.toml", "family = \"harmonic_oscillator\"\nstages = 2\n");
    s.run("extend", Some(&cfg), "e");
    let names = tables(&s.out("e"));
    for leaf in ["L1_L1", "L1_L2", "L2_L1", "L2_L2"] {
        assert!(names.iter().any(|n| n.contains(leaf)), "{leaf} missing from {names:?}");
    }
    assert_eq!(names.len(), 7);
}

#[test]
fn invalid_configs_exit_one() {
    let s = Sandbox::new();
    let small = s.config("n.toml", "family = \"harmonic_oscillator\"\n[grid]\nn = 2\n");
    let o = s.run("factorize", Some(&small), "n");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.n"));

    let alpha = s.config("a.toml", "family = \"harmonic_oscillator\"\nalpha = 0.0\n");
    let o = s.run("extend", Some(&alpha), "a");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu != lambda"));

    let syntax = s.config("s.toml", "family = \"harmonic_oscillator\"\nlambda = = 2\n");
    let o = s.run("factorize", Some(&syntax), "s");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = s.run("verify", None, "none");
    assert_eq!(o.status.code(), Some(1));

    let mismatch = s.config("m.toml", "command = \"scan\"\nfamily = \"harmonic_oscillator\"\n");
    assert_eq!(s.run("verify", Some(&mismatch), "m").status.code(), Some(1));
}

#[test]
fn leaking_grid_is_a_solver_failure() {
    let s = Sandbox::new();
    let cfg = s.config("l.toml", "family = \"harmonic_oscillator\"\n[grid]\na = -2.0\nb = 2.0\n");
    assert_eq!(s.run("spectrum", Some(&cfg), "l").status.code(), Some(3));
}

#[test]
fn exit_two_iff_a_check_exceeds_its_tolerance() {
    let s = Sandbox::new();
    for (i, tol) in [1e-30, 1e-12, 1e-9, 1e-6, 1e-3].into_iter().enumerate() {
        let cfg = s.config(
            &format!("t{i}.toml"),
            &format!("family = \"harmonic_oscillator\"\n[tolerances]\nresidual = {tol:e}\nspectral = {tol:e}\n"),
        );
        let out = format!("t{i}");
        let code = s.run("verify", Some(&cfg), &out).status.code();
        let r = report(&s.out(&out));
        let failing = r["checks"]
            .as_array()
            .unwrap()
            .iter()
            .any(|c| c["value"].as_float().unwrap() > c["tolerance"].as_float().unwrap());
        assert_eq!(code, Some(if failing { 2 } else { 0 }), "tolerance {tol:e}");
    }
}

#[test]
fn runs_are_byte_identical() {
    let s = Sandbox::new();
    let cfg = s.config("d.toml", "family = \"poschl_teller\"\nstages = 1\n");
    for out in ["a", "b"] {
        s.run("extend", Some(&cfg), out);
    }
    let (a, b) = (s.out("a"), s.out("b"));
    for name in tables(&a) {
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn defaults_round_trip_through_a_run() {
    let s = Sandbox::new();
    let o = Command::new(env!("CARGO_BIN_EXE_sigen"))
        .args(["defaults", "--family", "coulomb"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let parsed = sigen_cli::parse_config(&text).unwrap();
    assert_eq!(parsed.to_toml(), text);
    let cfg = s.config("c.toml", &text);
    assert_eq!(s.run("factorize", Some(&cfg), "c").status.code(), Some(0));
}
