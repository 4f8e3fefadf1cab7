//! Seeded generators for property tests.

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use tracelink_core::model::{parse_model, ElementPath, MetamodelRegistry, Model};
use tracelink_core::trace::{CodeSpan, LocalTraceModel, ModelRef, TraceLink, TraceNode};

const OSES: [&str; 4] = ["contiki", "riot", "zephyr", "tinyos"];
const SENSORS: [&str; 4] = ["soil-moisture", "temperature", "co2", "humidity"];

/// A PIM with `networks` networks, each on its own OS. Every network
/// references the first gateway when there is one.
pub fn pim(rng: &mut StdRng, networks: usize, gateways: usize) -> Value {
    let mut oses = OSES.to_vec();
    oses.shuffle(rng);
    let indirect: Vec<Value> = (0..networks)
        .map(|n| {
            let os = oses[n % oses.len()];
            let devices: Vec<Value> = (0..rng.gen_range(0..5))
                .map(|d| {
                    let mut attrs = json!({"name": format!("n{n}-d{d}"), "os": os, "period": rng.gen_range(1..200)});
                    if rng.gen_bool(0.7) {
                        attrs["sensor"] = json!(SENSORS[rng.gen_range(0..SENSORS.len())]);
                    }
                    attrs["role"] = json!(if d == 0 { "sink" } else { "sensor" });
                    json!({"class": "IndirectDevice", "attrs": attrs})
                })
                .collect();
            let mut net = json!({
                "class": "IndirectNetwork",
                "attrs": {"name": format!("net-{n}"), "os": os, "channel": rng.gen_range(11..27)},
                "collections": {"indirectdevice": devices}
            });
            if gateways > 0 {
                net["refs"] = json!({"gateway": "gateways[0]"});
            }
            net
        })
        .collect();
    let direct: Vec<Value> = (0..rng.gen_range(0..4))
        .map(|d| {
            json!({"class": "DirectDevice", "attrs": {
                "name": format!("ctrl-{d}"), "board": "uno", "sensor": SENSORS[d % SENSORS.len()],
                "period": rng.gen_range(1..100)
            }})
        })
        .collect();
    let gws: Vec<Value> = (0..gateways)
        .map(|g| {
            json!({"class": "Gateway", "attrs": {
                "name": format!("gw-{g}"), "address": format!("10.0.0.{}", g + 1),
                "port": rng.gen_range(1000..9000), "protocol": "mqtt"
            }})
        })
        .collect();
    json!({"metamodel": "PIMM", "root": {
        "class": "System",
        "attrs": {"name": format!("sys-{}", rng.gen_range(0..1000))},
        "collections": {"indirect": indirect, "direct": direct, "gateways": gws}
    }})
}

/// The first feature of `pool` and a random subset of the others.
fn some<'a>(rng: &mut StdRng, pool: &[&'a str]) -> Vec<&'a str> {
    let rest = pool[1..].iter().copied().filter(|_| rng.gen_bool(0.6));
    std::iter::once(pool[0]).chain(rest).collect()
}

fn bindings(var: &str, attrs: &[&str], extra: &[String]) -> String {
    let mut parts: Vec<String> = attrs.iter().map(|a| format!("{a} <- {var}.{a}")).collect();
    parts.extend(extra.iter().cloned());
    format!(" ({})", parts.join(", "))
}

/// A random PIM to PSM transformation with a model it applies to.
pub fn m2m_pair(rng: &mut StdRng, reg: &MetamodelRegistry, case: usize) -> (String, Model) {
    let header = format!("module Gen{case};\ncreate psm : PSMM from pim : PIMM;\n");
    let (body, model) = match rng.gen_range(0..3) {
        0 => {
            let gateways = rng.gen_range(0..3);
            let networks = rng.gen_range(0..3);
            let model = pim(rng, networks, gateways);
            let name = ["s.name", "concat(s.name, '-ctl')", "'fixed'"][rng.gen_range(0..3)];
            let mut root = vec![format!("name <- {name}")];
            let mut rules = String::new();
            if rng.gen_bool(0.5) {
                root.push("os <- 'arduino'".into());
            }
            if rng.gen_bool(0.8) {
                root.push("platforms <- s.direct".into());
                let attrs = some(rng, &["name", "board", "sensor", "period"]);
                rules += &format!(
                    "rule Device2Platform {{\n  from d : PIMM!DirectDevice\n  to p : PSMM!Platform{}\n}}\n",
                    bindings("d", &attrs, &["role <- 'controller'".to_string()])
                );
            }
            if gateways > 0 && rng.gen_bool(0.7) {
                root.push("uplinks <- s.gateways".into());
                let attrs = some(rng, &["name", "address", "port", "protocol"]);
                rules += &format!(
                    "rule Gateway2Uplink {{\n  from g : PIMM!Gateway\n  to u : PSMM!Uplink{}\n}}\n",
                    bindings("g", &attrs, &[])
                );
            }
            let root = format!(
                "rule System2Firmware {{\n  from s : PIMM!System\n  to f : PSMM!Firmware ({})\n}}\n",
                root.join(", ")
            );
            (root + &rules, model)
        }
        1 => {
            let networks = rng.gen_range(1..4);
            let gateways = rng.gen_range(0..2);
            let model = pim(rng, networks, gateways);
            let os = model["root"]["collections"]["indirect"][rng.gen_range(0..networks)]["attrs"]["os"]
                .as_str()
                .unwrap()
                .to_string();
            let mut extra = Vec::new();
            let mut rules = String::new();
            if rng.gen_bool(0.8) {
                extra.push("platforms <- n.indirectdevice".to_string());
                let attrs = some(rng, &["name", "role", "sensor", "period"]);
                rules += &format!(
                    "rule Device2Platform {{\n  from d : PIMM!IndirectDevice (d.os = '{os}')\n  to p : PSMM!Platform{}\n}}\n",
                    bindings("d", &attrs, &[])
                );
            }
            if gateways > 0 {
                extra.push("uplinks <- n.gateway".to_string());
                let attrs = some(rng, &["name", "address", "port", "protocol"]);
                rules += &format!(
                    "rule Gateway2Uplink {{\n  from g : PIMM!Gateway\n  to u : PSMM!Uplink{}\n}}\n",
                    bindings("g", &attrs, &[])
                );
            }
            let attrs = some(rng, &["name", "os", "channel"]);
            let root = format!(
                "rule Network2Firmware {{\n  from n : PIMM!IndirectNetwork (n.os = '{os}')\n  to f : PSMM!Firmware{}\n}}\n",
                bindings("n", &attrs, &extra)
            );
            (root + &rules, model)
        }
        _ => {
            let (networks, gateways) = (rng.gen_range(0..4), rng.gen_range(0..3));
            let model = pim(rng, networks, gateways);
            let host = some(rng, &["name", "address"]);
            let host: Vec<String> = host
                .iter()
                .map(|a| format!("{} <- g.{a}", if *a == "address" { "board" } else { a }))
                .collect();
            let source = some(rng, &["name", "os", "channel"]);
            let body = format!(
                "rule System2Collector {{\n  from s : PIMM!System\n  to f : PSMM!Firmware (name <- concat(s.name, '-collector'), os <- 'linux', platforms <- s.gateways, sources <- s.indirect)\n}}\n\
                 rule Gateway2Host {{\n  from g : PIMM!Gateway\n  to p : PSMM!Platform{}\n}}\n\
                 rule Network2Source {{\n  from n : PIMM!IndirectNetwork\n  to s : PSMM!Source{}\n}}\n",
                bindings("g", &[], &host),
                bindings("n", &source, &[])
            );
            (body, model)
        }
    };
    let uri = format!("gen{case}.pim.model.json");
    let model = parse_model(&model.to_string(), reg.get("PIMM").unwrap(), &uri).unwrap();
    (header + &body, model)
}

const NAMES: [&str; 4] = ["filters", "sections", "elements", "ports"];

fn random_path(rng: &mut StdRng) -> ElementPath {
    let mut p = ElementPath::root();
    for _ in 0..rng.gen_range(1..5) {
        p = p.child(NAMES[rng.gen_range(0..NAMES.len())], rng.gen_range(0..3));
    }
    p
}

/// Up to 20 distinct non-root paths of depth 1 to 4.
pub fn path_set(rng: &mut StdRng) -> BTreeSet<ElementPath> {
    (0..rng.gen_range(0..20)).map(|_| random_path(rng)).collect()
}

/// A chain of 2 to 4 transformations over at most 50 elements. Stage `k`
/// maps elements of model `Mk` to `Mk+1`; the last stage may target spans
/// of a generated file instead. Links occasionally skip a stage or carry
/// several sources.
pub fn trace_chain(rng: &mut StdRng) -> Vec<LocalTraceModel> {
    let stages = rng.gen_range(2..=4);
    let per_layer = 50 / (stages + 1);
    let code = rng.gen_bool(0.5);
    let layers: Vec<Vec<TraceNode>> = (0..=stages)
        .map(|k| {
            let n = rng.gen_range(1..=per_layer);
            (0..n)
                .map(|i| {
                    if k == stages && code {
                        let text = "x".repeat(40 * n);
                        TraceNode::Code(CodeSpan::in_text("gen.c", &text, i * 40, i * 40 + rng.gen_range(1..40)))
                    } else {
                        TraceNode::model(format!("M{k}"), ElementPath::root().child("e", i))
                    }
                })
                .collect()
        })
        .collect();
    (0..stages)
        .map(|k| {
            let mut links = Vec::new();
            for target in &layers[k + 1] {
                if rng.gen_bool(0.15) {
                    continue;
                }
                let from = if k > 0 && rng.gen_bool(0.1) { k - 1 } else { k };
                let sources: Vec<ModelRef> = (0..rng.gen_range(1..=2))
                    .map(|_| layers[from].choose(rng).unwrap().as_model().unwrap().clone())
                    .collect();
                let mut link = TraceLink::new(sources[0].clone(), target.clone()).tagged("rule", format!("R{k}"));
                link.sources = sources;
                links.push(link);
            }
            LocalTraceModel::new(format!("trace:{k}"), format!("T{k}"), 1, links)
        })
        .collect()
}
