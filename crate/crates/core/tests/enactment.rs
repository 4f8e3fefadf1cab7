mod common;

use std::collections::BTreeMap;

use tracelink_core::megamodel::{Origin, RelationKind, ResourceKind};
use tracelink_core::model::parse_model;
use tracelink_core::process::{enact, EnactError, EnactOptions};
use tracelink_core::trace::load_trace;
use tracelink_core::workspace::Workspace;

use common::*;

#[test]
fn bundled_process_registers_every_artifact() {
    let dir = fixture_copy();
    let (ws, before, r) = enact_fixture(dir.path(), &EnactOptions::default());
    let stages: Vec<Vec<&str>> = r
        .plan
        .stages
        .iter()
        .map(|s| s.iter().map(String::as_str).collect())
        .collect();
    assert_eq!(
        stages,
        [
            ["MapArduino", "MapContiki", "MapDataCollector", "MapRIOT"],
            ["GenArduino", "GenContiki", "GenGateway", "GenRIOT"]
        ]
    );
    let mgm = &r.megamodel;
    assert_eq!(mgm.count(ResourceKind::Model), before.count(ResourceKind::Model) + 4);
    assert_eq!(mgm.count(ResourceKind::GeneratedFile), 4);
    assert_eq!(mgm.count(ResourceKind::TraceModel), 8);
    for e in mgm.resources().filter(|e| e.origin == Origin::Generated) {
        assert!(
            e.produced_by.as_deref().is_some_and(|p| p.starts_with("exec:")),
            "{e:?}"
        );
        assert!(ws.path(&e.uri).is_file(), "{} missing", e.uri);
    }
    for t in mgm.of_kind(ResourceKind::TraceModel) {
        assert_eq!(
            mgm.relations_from(&t.id)
                .filter(|r| r.kind == RelationKind::TraceFor)
                .count(),
            1
        );
    }
    assert_eq!(ws.load_megamodel().unwrap(), r.megamodel);
    assert!(ws.path("out/enactment.json").is_file());
}

#[test]
fn psm_outputs_conform_and_traces_point_into_them() {
    let dir = fixture_copy();
    let (ws, _, r) = enact_fixture(dir.path(), &EnactOptions::default());
    let reg = wsn_registry();
    let psm = ws.read("out/MapContiki/psm.model.json").unwrap();
    let m = parse_model(&psm, reg.get("PSMM").unwrap(), "out/MapContiki/psm.model.json").unwrap();
    assert_eq!(m.root.attr("name").unwrap().to_string(), "greenhouse-wsn");
    let t = load_trace(&ws.read("traces/MapContiki.trace.json").unwrap()).unwrap();
    let rules: Vec<&str> = t.links.iter().filter_map(|l| l.producer()).collect();
    assert!(rules.contains(&"Device2Platform"), "{rules:?}");
    assert!(t.links.iter().all(|l| l.sources[0].model == INPUT));
    assert_eq!(r.actions.len(), 8);
}

#[test]
fn second_enactment_replaces_outputs_and_bumps_the_stamp() {
    let dir = fixture_copy();
    let (ws, _, first) = enact_fixture(dir.path(), &EnactOptions::default());
    let again = enact(&ws, PROCESS, &first.megamodel, &bindings(), &EnactOptions::default()).unwrap();
    assert_eq!(again.stamp, first.stamp + 1);
    assert_eq!(again.megamodel.count(ResourceKind::TraceModel), 8);
    assert_eq!(again.megamodel.count(ResourceKind::GeneratedFile), 4);
}

#[test]
fn without_augmentation_no_traces_are_written() {
    let dir = fixture_copy();
    let opts = EnactOptions {
        augment: false,
        ..EnactOptions::default()
    };
    let (ws, _, r) = enact_fixture(dir.path(), &opts);
    assert_eq!(r.megamodel.count(ResourceKind::TraceModel), 0);
    assert_eq!(r.megamodel.count(ResourceKind::GeneratedFile), 4);
    assert!(!ws.path("traces").exists());
    assert!(ws.path("out/GenContiki/Sink.c").is_file());
}

#[test]
fn unbound_input_pin_is_reported() {
    let dir = fixture_copy();
    let ws = Workspace::open(dir.path()).unwrap();
    let mgm = ws.discover().unwrap();
    let err = enact(&ws, PROCESS, &mgm, &BTreeMap::new(), &EnactOptions::default()).unwrap_err();
    assert!(
        matches!(err, EnactError::MissingBinding(ref pin) if pin.ends_with(".pim")),
        "{err}"
    );
}

const IDENTITY: &str = r#"{
  "name": "identity",
  "nodes": [
    {"id": "start", "kind": "Initial"},
    {"id": "Copy", "kind": "Action", "transformation": "TransformationM2M:transformations/Copy.m2m",
     "inputs": [{"name": "pim", "metamodel": "PIMM"}], "outputs": [{"name": "copy", "metamodel": "PIMM"}]},
    {"id": "end", "kind": "Final"}
  ],
  "controlEdges": [{"from": "start", "to": "Copy"}, {"from": "Copy", "to": "end"}],
  "objectEdges": []
}
"#;

const COPY: &str = "module Copy;
create copy : PIMM from pim : PIMM;

rule System2System {
  from s : PIMM!System
  to t : PIMM!System (name <- s.name, gateways <- s.gateways)
}

rule Gateway2Gateway {
  from g : PIMM!Gateway
  to h : PIMM!Gateway (name <- g.name, address <- g.address, port <- g.port, protocol <- g.protocol)
}
";

#[test]
fn single_action_identity_process() {
    let dir = fixture_copy();
    let ws = Workspace::open(dir.path()).unwrap();
    ws.write("transformations/Copy.m2m", COPY).unwrap();
    ws.write("process/identity.proc.json", IDENTITY).unwrap();
    let mgm = ws.discover().unwrap();
    let r = enact(
        &ws,
        "process/identity.proc.json",
        &mgm,
        &bindings(),
        &EnactOptions::default(),
    )
    .unwrap();
    assert_eq!(r.plan.stages, [vec!["Copy".to_string()]]);
    let copy = ws.read("out/Copy/copy.model.json").unwrap();
    assert!(copy.contains("\"edge-gw\""));
    let t = load_trace(&ws.read("traces/Copy.trace.json").unwrap()).unwrap();
    let pairs: Vec<(String, String)> = t
        .links
        .iter()
        .map(|l| (l.sources[0].path.to_string(), l.targets[0].to_string()))
        .collect();
    assert_eq!(
        pairs,
        [
            (
                "gateways[0]".to_string(),
                "out/Copy/copy.model.json:gateways[0]".to_string()
            ),
            ("root".to_string(), "out/Copy/copy.model.json:root".to_string()),
        ]
    );
}
