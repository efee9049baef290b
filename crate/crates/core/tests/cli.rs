use std::path::Path;
use std::process::{Command, Output};

use recmerit::pipeline::RunManifest;

fn recmerit(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_recmerit"));
    cmd.args(args).env_remove("RUST_LOG");
    for (k, _) in std::env::vars() {
        if k.starts_with("RECMERIT_") {
            cmd.env_remove(k);
        }
    }
    cmd.envs(envs.iter().copied());
    cmd.output().unwrap()
}

fn manifest(out: &Path, command: &str) -> RunManifest {
    serde_json::from_slice(&std::fs::read(out.join(format!("manifests/{command}.json"))).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fixture_run_all_succeeds_and_records_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = recmerit(
        &[
            "run-all",
            "--fixture",
            "--output",
            s(&out),
            "--bids",
            "accepted",
            "--scenario",
            "fixture.hand",
        ],
        &[("RECMERIT_WINDOW", "5")],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out, "run-all");
    assert_eq!(m.config.market.bids, recmerit::market::BidsMode::Accepted);
    assert_eq!(m.config.analysis.window, 5);
    assert_eq!(m.config.run.scenarios, vec!["fixture.hand".to_string()]);
    assert!(out.join("impact/fixture.hand/NORD.csv").exists());
    assert!(!out.join("impact/sc45.2027").exists());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(
        recmerit(&["derive", "--config", s(&missing)], &[]).status.code(),
        Some(2)
    );

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[paths]\nregistry = \"r.csv\"\nunknown_key = 1\n").unwrap();
    assert_eq!(recmerit(&["derive", "--config", s(&cfg)], &[]).status.code(), Some(2));

    // a registry path that does not exist is caught before any work
    std::fs::write(&cfg, "[paths]\nregistry = \"missing.csv\"\noutput = \"out\"\n").unwrap();
    let o = recmerit(&["derive", "--config", s(&cfg)], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());

    // even window
    let o = recmerit(
        &[
            "run-all",
            "--fixture",
            "--output",
            s(&dir.path().join("w")),
            "--window",
            "4",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));

    let o = recmerit(
        &["clear", "--fixture", "--output", s(&dir.path().join("e"))],
        &[("RECMERIT_YEAR", "soon")],
    );
    assert_eq!(o.status.code(), Some(2));

    let o = recmerit(
        &[
            "clear",
            "--fixture",
            "--scenario",
            "sc99.2030",
            "--output",
            s(&dir.path().join("x")),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zone_without_ledger_hours_exits_3_with_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = recmerit(
        &[
            "run-all",
            "--fixture",
            "--output",
            s(&out),
            "--scenario",
            "fixture.hand",
            "--zone",
            "NORD",
            "--zone",
            "SUD",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SUD"));
    assert!(out.join("impact/fixture.hand/NORD.csv").exists());
    let m = manifest(&out, "run-all");
    assert_eq!(m.issues.len(), 1);
    assert_eq!(m.exit_code(), 3);
}

#[test]
fn clear_rejects_short_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = [
        "run-all",
        "--fixture",
        "--output",
        s(&out),
        "--scenario",
        "fixture.hand",
    ];
    assert_eq!(recmerit(&args, &[]).status.code(), Some(0));
    let series = out.join("series/fixture.hand/CSUD.csv");
    let text = std::fs::read_to_string(&series).unwrap();
    let short: String = text.lines().take(100).map(|l| format!("{l}\n")).collect();
    std::fs::write(&series, short).unwrap();
    let o = recmerit(
        &["clear", "--fixture", "--output", s(&out), "--scenario", "fixture.hand"],
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    let m = manifest(&out, "clear");
    assert!(
        m.issues.iter().any(|i| i.contains("CSUD") && i.contains("8760")),
        "{:?}",
        m.issues
    );
    assert!(m.outputs.contains_key("impact/fixture.hand/NORD.csv"));
}
