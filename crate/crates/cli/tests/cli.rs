use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const INPUT: &str = "models/Input.pim.model.json";
const PROCESS: &str = "process/wsn-iot.proc.json";

fn fixture_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/wsn-iot");
    for entry in walkdir::WalkDir::new(&src) {
        let entry = entry.unwrap();
        let dst = dir.path().join(entry.path().strip_prefix(&src).unwrap());
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dst).unwrap();
        } else {
            fs::copy(entry.path(), &dst).unwrap();
        }
    }
    dir
}

fn tracelink(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracelink"))
        .args(args)
        .env("TRACELINK_WORKSPACE", ws)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(ws: &Path, args: &[&str]) -> String {
    let o = tracelink(ws, args);
    assert!(o.status.success(), "{args:?} failed:\n{}", stderr(&o));
    stdout(&o)
}

fn enacted() -> tempfile::TempDir {
    let dir = fixture_copy();
    ok(dir.path(), &["discover"]);
    ok(dir.path(), &["enact", PROCESS, "--bind", &format!("pim={INPUT}")]);
    dir
}

#[test]
fn discover_empty_and_missing_directories() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["discover"]);
    assert!(out.starts_with("discovered 0 resources"), "{out}");
    assert!(dir.path().join("megamodel.json").is_file());
    let o = tracelink(dir.path(), &["discover", "does/not/exist"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
    assert!(o.stdout.is_empty());
}

#[test]
fn discover_counts_the_bundled_workspace() {
    let dir = fixture_copy();
    let out = ok(dir.path(), &["discover"]);
    assert!(
        out.starts_with(
            "discovered 12 resources (2 Metamodel, 1 Model, 4 TransformationM2M, 4 TransformationM2C, 1 ProcessModel)"
        ),
        "{out}"
    );
    let table = ok(dir.path(), &["mgm", "show"]);
    assert!(table.contains("metamodels/PIMM.mm.json"));
    let json = ok(dir.path(), &["mgm", "show", "--format", "json"]);
    assert_eq!(json, fs::read_to_string(dir.path().join("megamodel.json")).unwrap());
    assert!(ok(dir.path(), &["mgm", "dot"]).starts_with("digraph megamodel {"));
}

#[test]
fn enact_requires_a_megamodel_and_bindings() {
    let dir = fixture_copy();
    let o = tracelink(dir.path(), &["enact", PROCESS]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("tracelink discover"), "{}", stderr(&o));
    ok(dir.path(), &["discover"]);
    let o = tracelink(dir.path(), &["enact", PROCESS]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains(".pim`"), "{}", stderr(&o));
}

#[test]
fn enact_writes_artifacts_and_traces() {
    let dir = enacted();
    let traces = fs::read_dir(dir.path().join("traces")).unwrap().count();
    assert_eq!(traces, 8);
    for f in [
        "GenContiki/Sink.c",
        "GenRIOT/main.c",
        "GenArduino/Controllers.ino",
        "GenGateway/collector.py",
    ] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    assert!(!dir.path().join(".tracelink.lock").exists());
}

#[test]
fn enact_refuses_a_locked_workspace() {
    let dir = fixture_copy();
    ok(dir.path(), &["discover"]);
    fs::write(dir.path().join(".tracelink.lock"), "").unwrap();
    let o = tracelink(dir.path(), &["enact", PROCESS, "--bind", &format!("pim={INPUT}")]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("lock"));
}

#[test]
fn impact_and_origin_reports() {
    let dir = enacted();
    let impact = ok(dir.path(), &["impact", INPUT, "indirect[0].indirectdevice[0]"]);
    assert_eq!(
        impact,
        "models/Input.pim.model.json:indirect[0].indirectdevice[0]\n\
         => out/MapContiki/psm.model.json:platforms[0]\n\
         ==> out/GenContiki/Sink.c:1:181\n"
    );
    let origin = ok(dir.path(), &["origin", "out/GenContiki/Sink.c", "1:181"]);
    assert_eq!(
        origin,
        "out/GenContiki/Sink.c:1:181\n\
         => out/MapContiki/psm.model.json:platforms[0]\n\
         ==> models/Input.pim.model.json:indirect[0].indirectdevice[0]\n"
    );
    assert_eq!(ok(dir.path(), &["origin", "out/GenContiki/Sink.c", "@180"]), origin);
    let reports = dir.path().join("out/reports");
    assert_eq!(fs::read_dir(&reports).unwrap().count(), 4);
    let json = ok(
        dir.path(),
        &["impact", INPUT, "indirect[0].indirectdevice[0]", "--format", "json"],
    );
    assert!(json.contains("\"layers\""));
}

#[test]
fn anchor_typo_suggests_the_nearest_node() {
    let dir = enacted();
    let o = tracelink(dir.path(), &["impact", INPUT, "indirect[0].indirectdevce[0]"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("did you mean `models/Input.pim.model.json:indirect[0].indirectdevice[0]`"),
        "{}",
        stderr(&o)
    );
    let o = tracelink(dir.path(), &["origin", "out/GenContiki/Sink.h", "1:1"]);
    assert!(
        stderr(&o).contains("did you mean `out/GenContiki/Sink.c`"),
        "{}",
        stderr(&o)
    );
    let o = tracelink(dir.path(), &["origin", "out/GenContiki/Sink.c", "1:1"]);
    assert!(stderr(&o).contains("not inside any traced code span"), "{}", stderr(&o));
}

#[test]
fn gtm_dot_whole_and_sliced() {
    let dir = enacted();
    let whole = ok(dir.path(), &["gtm", "dot"]);
    let slice = ok(
        dir.path(),
        &[
            "gtm",
            "dot",
            "--around",
            "out/MapContiki/psm.model.json:platforms[0]",
            "--radius",
            "1",
        ],
    );
    assert!(whole.starts_with("digraph gtm {"));
    assert_eq!(slice.matches(" -> ").count(), 2);
    assert!(whole.matches(" -> ").count() > slice.matches(" -> ").count());
}

#[test]
fn trace_show_lists_links() {
    let dir = enacted();
    let text = ok(dir.path(), &["trace", "show", "traces/MapContiki.trace.json"]);
    assert!(
        text.starts_with("TraceModel:traces/MapContiki.trace.json of TransformationM2M:transformations/MapContiki.m2m")
    );
    assert!(text.contains("[rule=Device2Platform]"));
    let json = ok(
        dir.path(),
        &["trace", "show", "traces/MapContiki.trace.json", "--format", "json"],
    );
    assert_eq!(
        json,
        fs::read_to_string(dir.path().join("traces/MapContiki.trace.json")).unwrap()
    );
}

#[test]
fn standalone_augment_and_run() {
    let dir = fixture_copy();
    let ws = dir.path();
    ok(ws, &["augment-m2m", "transformations/MapContiki.m2m"]);
    let aug = fs::read_to_string(ws.join("transformations/MapContiki.aug.m2m")).unwrap();
    assert!(aug.contains("trace (rule = 'Device2Platform')"), "{aug}");
    ok(ws, &["augment-m2c", "templates/GenContiki.m2c"]);
    assert!(fs::read_to_string(ws.join("templates/GenContiki.aug.m2c"))
        .unwrap()
        .contains("{{fw.platforms[[i/]]}}"));

    ok(
        ws,
        &[
            "run-m2m",
            "transformations/MapContiki.m2m",
            "--in",
            &format!("pim={INPUT}"),
            "--out",
            "psm/contiki.model.json",
        ],
    );
    assert!(ws.join("psm/contiki.model.json").is_file());
    assert!(ws.join("traces/MapContiki.trace.json").is_file());
    ok(
        ws,
        &[
            "run-m2c",
            "templates/GenContiki.m2c",
            "--in",
            "psm/contiki.model.json",
            "--out",
            "gen",
        ],
    );
    assert!(ws.join("gen/Sink.c").is_file());
    assert!(ws.join("gen/Sink.c.annotated").is_file());
    assert!(ws.join("traces/Sink.c.trace.json").is_file());
    let clean = fs::read_to_string(ws.join("gen/Sink.c")).unwrap();
    assert!(!clean.contains("{{"));
}

#[test]
fn commands_are_deterministic() {
    let a = enacted();
    let b = enacted();
    for args in [
        vec!["mgm", "show"],
        vec!["gtm", "dot"],
        vec!["impact", INPUT, "gateways[0]"],
        vec!["trace", "show", "traces/GenRIOT.trace.json"],
    ] {
        assert_eq!(ok(a.path(), &args), ok(b.path(), &args), "{args:?}");
    }
}
