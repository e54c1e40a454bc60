//! End-to-end CLI tests through the built binary: subcommand behavior, exit
//! codes and file outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_fsmodel")
}

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fsmodel-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(exe()).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

#[test]
fn quotient_reports_one_nondegenerate_class() {
    let dir = tmpdir("quotient");
    let json = dir.join("out.json");
    let out = run(&[
        "quotient",
        &fixture("comb.cdl"),
        "--relation",
        "fs",
        "--depth",
        "8,8",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let nondeg = value["report"]["nondegenerate"].as_array().unwrap();
    assert_eq!(nondeg.len(), 1, "exactly the collapsed base bar");
    assert_eq!(nondeg[0]["diameter"], "1");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn compare_prints_incomparable() {
    let out = run(&[
        "compare",
        &fixture("comb.cdl"),
        "--left",
        "fs",
        "--right",
        "phi:2",
        "--depth",
        "4,4",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "incomparable");

    let out = run(&[
        "compare",
        &fixture("comb.cdl"),
        "--left",
        "identity",
        "--right",
        "fs",
        "--depth",
        "4,4",
    ]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "left-finer");
}

#[test]
fn check_comp_vs_fs_on_cantor() {
    // The componentwise relation performs no merges and its quotient is not
    // finitely Suslinian at scale; the fs relation collapses the fibers and
    // passes.
    let comp = run(&[
        "check",
        &fixture("cantor.cdl"),
        "--fs",
        "--relation",
        "comp",
        "--depth",
        "0,0,6",
        "--atom-delta",
        "1",
    ]);
    assert_eq!(code(&comp), 1, "comp quotient violates the check");
    let comp_json: serde_json::Value =
        serde_json::from_slice(&comp.stdout).expect("json on stdout");
    assert_eq!(comp_json["checks"][0]["classes"], 128, "no merges");

    let fs = run(&[
        "check",
        &fixture("cantor.cdl"),
        "--fs",
        "--relation",
        "fs",
        "--depth",
        "0,0,6",
        "--atom-delta",
        "1",
    ]);
    assert_eq!(code(&fs), 0, "{}", String::from_utf8_lossy(&fs.stderr));
    let fs_json: serde_json::Value = serde_json::from_slice(&fs.stdout).unwrap();
    assert_eq!(fs_json["checks"][0]["classes"], 64, "one class per fiber");
    assert_eq!(fs_json["collapse"]["pass"], true);
}

#[test]
fn parse_roundtrips_and_rejects() {
    let out = run(&["parse", &fixture("comb.cdl")]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("compactum comb {"));
    assert!(text.contains("limit point (t, 0)"));

    let dir = tmpdir("parse");
    let bad = dir.join("bad.cdl");
    std::fs::write(&bad, "compactum x {}").unwrap();
    let out = run(&["parse", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("declares no continuum or family"));

    let out = run(&["parse", &fixture("missing-file.cdl")]);
    assert_eq!(code(&out), 2);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unshielded_exit_codes_and_pgm() {
    let out = run(&[
        "unshielded",
        &fixture("square.cdl"),
        "--atom-delta",
        "1/4",
        "--raster-delta",
        "1/16",
    ]);
    assert_eq!(code(&out), 0);

    let dir = tmpdir("pgm");
    let pgm = dir.join("filled.pgm");
    let out = run(&[
        "unshielded",
        &fixture("filled.cdl"),
        "--atom-delta",
        "1/4",
        "--raster-delta",
        "1/16",
        "--pgm",
        pgm.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1, "filled box is shielded");
    let text = std::fs::read_to_string(&pgm).unwrap();
    assert!(text.starts_with("P2\n"));
    assert!(text.lines().nth(2) == Some("2"), "maxval 2");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn theta_exit_codes() {
    let out = run(&["theta", &fixture("comb.cdl"), "--depth", "3,3", "--atom-delta", "1/8"]);
    assert_eq!(code(&out), 1, "obstruction found");
    let out = run(&["theta", &fixture("square.cdl"), "--atom-delta", "1/4"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn hull_counts_enclosed_cells() {
    let out = run(&[
        "hull",
        &fixture("square.cdl"),
        "--pieces",
        "top,bottom,left,right",
        "--atom-delta",
        "1/4",
        "--raster-delta",
        "1/16",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(value["enclosed_cells"].as_u64().unwrap() > 0, "the hole fills");

    let out = run(&[
        "hull",
        &fixture("segment.cdl"),
        "--pieces",
        "S",
        "--atom-delta",
        "1/4",
        "--raster-delta",
        "1/16",
    ]);
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["enclosed_cells"], 0, "a segment encloses nothing");
}

#[test]
fn limits_lists_declared_and_scanned() {
    let out = run(&[
        "limits",
        &fixture("comb.cdl"),
        "--depth",
        "6,3",
        "--atom-delta",
        "1/8",
        "--eps",
        "1/2",
        "--count",
        "4",
    ]);
    assert_eq!(code(&out), 0);
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let declared = value["declared"].as_array().unwrap();
    assert!(declared.iter().any(|l| l["label"] == "lim Hn" && l["nondegenerate"] == true));
    assert!(!value["scan"].as_array().unwrap().is_empty());
}

#[test]
fn dynamics_via_cli() {
    let out = run(&[
        "dynamics",
        &fixture("cantor.cdl"),
        "--map",
        &fixture("shift.mdl"),
        "--relation",
        "fs",
        "--depth",
        "0,0,4",
        "--atom-delta",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["equivariant"], true);
    assert_eq!(value["semiconjugate"], true);
    assert_eq!(value["induced"]["classes"].as_object().unwrap().len(), 16);

    // Word depth 1 cannot shift down.
    let out = run(&[
        "dynamics",
        &fixture("cantor.cdl"),
        "--map",
        &fixture("shift.mdl"),
        "--depth",
        "0,0,1",
        "--atom-delta",
        "1",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn render_writes_svg() {
    let dir = tmpdir("render");
    let svg = dir.join("comb.svg");
    let out = run(&[
        "render",
        &fixture("comb.cdl"),
        "--relation",
        "fs",
        "--depth",
        "3,3",
        "--atom-delta",
        "1/8",
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("id=\"class-"));
    assert!(text.contains("id=\"quotient-panel\""));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn partition_export_import_roundtrip() {
    let dir = tmpdir("roundtrip");
    let json = dir.join("fs.json");
    let out = run(&[
        "quotient",
        &fixture("comb.cdl"),
        "--relation",
        "fs",
        "--depth",
        "3,3",
        "--atom-delta",
        "1/8",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    // Feed the exported report back in as a relation.
    let out = run(&[
        "compare",
        &fixture("comb.cdl"),
        "--left",
        "fs",
        "--right",
        json.to_str().unwrap(),
        "--depth",
        "3,3",
        "--atom-delta",
        "1/8",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "equal");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(code(&run(&["quotient", &fixture("comb.cdl"), "--relation", "bogus"])), 2);
    assert_eq!(code(&run(&["quotient", &fixture("comb.cdl"), "--depth", "x,y"])), 2);
    assert_eq!(
        code(&run(&["quotient", &fixture("comb.cdl"), "--atom-delta", "0"])),
        2
    );
    assert_eq!(code(&run(&["check", &fixture("comb.cdl"), "--count", "2"])), 2);
    assert_eq!(code(&run(&["nonsense"])), 2);
    // Depth 0 needs --allow-empty.
    assert_eq!(
        code(&run(&["quotient", &fixture("comb.cdl"), "--depth", "0,2"])),
        2
    );
    let out = run(&[
        "quotient",
        &fixture("comb.cdl"),
        "--depth",
        "0,2",
        "--allow-empty",
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn outputs_do_not_leave_temp_droppings() {
    let dir = tmpdir("atomic");
    let json = dir.join("out.json");
    let out = run(&[
        "quotient",
        &fixture("segment.cdl"),
        "--relation",
        "identity",
        "--atom-delta",
        "1/4",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let leftovers: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| Path::new(&e.file_name()).extension().map(|x| x == "tmp").unwrap_or(false))
        .collect();
    assert!(leftovers.is_empty(), "atomic writes leave no temp files");
    std::fs::remove_dir_all(&dir).ok();
}
