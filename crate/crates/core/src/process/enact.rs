use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use super::{parse_process, schedule, ExecutionPlan, Node, PinRef, ProcessError, ProcessModel};
use crate::m2c::{augment_template, extract_trace, parse_template, render, render_augmented};
use crate::m2m::{augment_m2m, execute_augmented_m2m, execute_m2m, parse_m2m, M2mError};
use crate::megamodel::{resource_id, Megamodel, Origin, Relation, ResourceEntry, ResourceKind};
use crate::model::{parse_metamodel, MetamodelRegistry, Model};
use crate::trace::{save_trace, LocalTraceModel};
use crate::workspace::{Workspace, WorkspaceError};

/// Name of the enactment summary inside the output directory.
pub const ENACTMENT_SUMMARY: &str = "enactment.json";

#[derive(Debug, Clone)]
pub struct EnactOptions {
    /// Run augmented transformations and collect trace models.
    pub augment: bool,
    /// Run the actions of a stage on separate threads.
    pub parallel: bool,
    /// Execution order within a stage; actions not listed run last, by id.
    /// Results are applied in id order whatever the execution order.
    pub action_order: Option<Vec<String>>,
}

impl Default for EnactOptions {
    fn default() -> Self {
        EnactOptions {
            augment: true,
            parallel: false,
            action_order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionRecord {
    pub action: String,
    pub transformation: String,
    pub execution: String,
    /// Input pin name to model uri.
    pub inputs: BTreeMap<String, String>,
    /// Registered output artifacts.
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    /// The augmented transformation that was run, written for inspection.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augmented: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EnactmentResult {
    pub megamodel: Megamodel,
    pub plan: ExecutionPlan,
    pub stamp: u64,
    /// Records in stage order, by id within a stage.
    pub actions: Vec<ActionRecord>,
    pub log: Vec<String>,
}

impl EnactmentResult {
    pub fn artifacts(&self) -> impl Iterator<Item = &str> {
        self.actions.iter().flat_map(|a| a.outputs.iter().map(String::as_str))
    }

    pub fn traces(&self) -> impl Iterator<Item = &str> {
        self.actions.iter().filter_map(|a| a.trace.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnactError {
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error("input pin `{0}` is neither fed by an object edge nor bound")]
    MissingBinding(String),
    #[error("action `{action}`: {message}")]
    Transformation { action: String, message: String },
    #[error("action `{action}` produced a non-conforming model: {message}")]
    Conformance { action: String, message: String },
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
}

impl From<crate::megamodel::MegamodelError> for EnactError {
    fn from(e: crate::megamodel::MegamodelError) -> Self {
        EnactError::Workspace(e.into())
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    process: &'a str,
    stamp: u64,
    stages: &'a [Vec<String>],
    actions: &'a [ActionRecord],
}

/// What one action produced, applied to the workspace by the coordinator.
struct Outcome {
    record: ActionRecord,
    files: Vec<(String, String)>,
    entries: Vec<(ResourceEntry, Vec<Relation>)>,
    relations: Vec<Relation>,
    models: Vec<(PinRef, String, Model)>,
    log: String,
}

struct Context<'a> {
    ws: &'a Workspace,
    p: &'a ProcessModel,
    process_id: String,
    mgm: &'a Megamodel,
    metamodels: &'a MetamodelRegistry,
    metamodel_ids: &'a BTreeMap<String, String>,
    stamp: u64,
    augment: bool,
}

/// Runs every action of the process at `process_uri` in schedule order.
///
/// Generated resources of earlier enactments are dropped from the megamodel
/// first. Each action writes its outputs under `<out>/<action>/` and, when
/// augmenting, one trace model to `<traces>/<action>.trace.json`. The updated
/// megamodel is saved and a summary is written to `<out>/enactment.json`.
pub fn enact(
    ws: &Workspace,
    process_uri: &str,
    mgm: &Megamodel,
    bindings: &BTreeMap<String, String>,
    opts: &EnactOptions,
) -> Result<EnactmentResult, EnactError> {
    let p = parse_process(&ws.read(process_uri)?)?;
    let plan = schedule(&p)?;
    let stamp = next_stamp(mgm);
    let mut mgm = mgm.without_generated();
    let process_id = resource_id(ResourceKind::ProcessModel, process_uri);
    if mgm.get(&process_id).is_none() {
        mgm.insert(
            ResourceEntry::new(ResourceKind::ProcessModel, process_uri, Origin::UserProvided),
            vec![],
        )?;
    }
    let metamodels = ws.metamodels(&mgm)?;
    let mut metamodel_ids = BTreeMap::new();
    for r in mgm.of_kind(ResourceKind::Metamodel) {
        if let Ok(mm) = parse_metamodel(&ws.read(&r.uri)?) {
            metamodel_ids.insert(mm.name, r.id.clone());
        }
    }

    // Externally fed pins, resolved before anything runs.
    let mut produced: BTreeMap<PinRef, (String, Model)> = BTreeMap::new();
    let mut loaded: BTreeMap<String, Model> = BTreeMap::new();
    for a in p.actions() {
        for pin in &a.inputs {
            let at = PinRef {
                node: a.id.clone(),
                pin: pin.name.clone(),
            };
            if p.feeder(&at).is_some() {
                continue;
            }
            let uri = bindings
                .get(&at.to_string())
                .or_else(|| bindings.get(&pin.name))
                .ok_or_else(|| EnactError::MissingBinding(at.to_string()))?;
            if !loaded.contains_key(uri) {
                let m = ws.load_model(uri, &metamodels)?;
                if mgm.by_uri(ResourceKind::Model, uri).is_none() {
                    let e = ResourceEntry::new(ResourceKind::Model, uri.clone(), Origin::UserProvided);
                    let rel = metamodel_ids
                        .get(&m.metamodel)
                        .map(|mm| Relation::conforms_to(&e.id, mm))
                        .into_iter()
                        .collect();
                    mgm.insert(e, rel)?;
                }
                loaded.insert(uri.clone(), m);
            }
            let m = &loaded[uri];
            if m.metamodel != pin.metamodel {
                return Err(EnactError::Transformation {
                    action: a.id.clone(),
                    message: format!(
                        "pin `{}` expects a {} model, `{uri}` is a {} model",
                        pin.name, pin.metamodel, m.metamodel
                    ),
                });
            }
            produced.insert(at, (uri.clone(), m.clone()));
        }
    }

    for a in p.actions() {
        ws.clear_dir(&format!("{}/{}", ws.config.output_dir, a.id))?;
    }

    let mut log = Vec::new();
    let mut records = Vec::new();
    for (i, stage) in plan.stages.iter().enumerate() {
        log.push(format!("stage {}: {}", i + 1, stage.join(", ")));
        let mut order = stage.clone();
        if let Some(pref) = &opts.action_order {
            order.sort_by_key(|id| pref.iter().position(|x| x == id).unwrap_or(usize::MAX));
        }
        let outcomes: Vec<Result<Outcome, EnactError>> = {
            let cx = Context {
                ws,
                p: &p,
                process_id: process_id.clone(),
                mgm: &mgm,
                metamodels: &metamodels,
                metamodel_ids: &metamodel_ids,
                stamp,
                augment: opts.augment,
            };
            let run = |id: &String| run_action(&cx, p.node(id).expect("scheduled action"), &produced);
            if opts.parallel {
                std::thread::scope(|s| {
                    let handles: Vec<_> = order.iter().map(|id| s.spawn(|| run(id))).collect();
                    handles.into_iter().map(|h| h.join().expect("action thread")).collect()
                })
            } else {
                order.iter().map(run).collect()
            }
        };
        let mut outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
        outcomes.sort_by(|a, b| a.record.action.cmp(&b.record.action));
        for o in outcomes {
            for (uri, text) in &o.files {
                ws.write(uri, text)?;
            }
            for (entry, rels) in o.entries {
                mgm.insert(entry, rels)?;
            }
            mgm.relate(o.relations)?;
            for (pin, uri, model) in o.models {
                produced.insert(pin, (uri, model));
            }
            log.push(o.log);
            records.push(o.record);
        }
    }

    mgm.validate()?;
    let summary = Summary {
        process: process_uri,
        stamp,
        stages: &plan.stages,
        actions: &records,
    };
    ws.write(
        &format!("{}/{ENACTMENT_SUMMARY}", ws.config.output_dir),
        &crate::json::to_canonical_string(&summary),
    )?;
    ws.save_megamodel(&mgm)?;
    Ok(EnactmentResult {
        megamodel: mgm,
        plan,
        stamp,
        actions: records,
        log,
    })
}

/// One more than the largest stamp among generated resources.
fn next_stamp(mgm: &Megamodel) -> u64 {
    mgm.resources()
        .filter_map(|r| r.produced_by.as_deref())
        .filter_map(|e| e.rsplit(':').next()?.parse::<u64>().ok())
        .max()
        .unwrap_or(0)
        + 1
}

fn file_stem(uri: &str) -> &str {
    let name = uri.rsplit('/').next().unwrap_or(uri);
    Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or(name)
}

fn run_action(
    cx: &Context<'_>,
    node: &Node,
    produced: &BTreeMap<PinRef, (String, Model)>,
) -> Result<Outcome, EnactError> {
    let action = node.id.clone();
    let fail = |message: String| EnactError::Transformation {
        action: action.clone(),
        message,
    };
    let t_id = node.transformation.clone().expect("validated action");
    let t_entry = cx
        .mgm
        .get(&t_id)
        .filter(|e| e.kind.is_transformation())
        .ok_or_else(|| fail(format!("transformation `{t_id}` is not registered")))?;
    let mut inputs: BTreeMap<String, (String, Model)> = BTreeMap::new();
    for pin in &node.inputs {
        let at = PinRef {
            node: node.id.clone(),
            pin: pin.name.clone(),
        };
        let key = cx.p.feeder(&at).unwrap_or(&at);
        let (uri, m) = produced
            .get(key)
            .ok_or_else(|| fail(format!("input pin `{}` has no model", pin.name)))?;
        inputs.insert(pin.name.clone(), (uri.clone(), m.clone()));
    }

    let execution = format!("exec:{action}:{}", cx.stamp);
    let out_dir = format!("{}/{action}", cx.ws.config.output_dir);
    let trace_uri = format!("{}/{action}.trace.json", cx.ws.config.trace_dir);
    let text = cx.ws.read(&t_entry.uri)?;
    let mut files = Vec::new();
    let mut entries = Vec::new();
    let mut models = Vec::new();
    let mut outputs = Vec::new();
    let mut augmented = None;
    let links;

    match t_entry.kind {
        ResourceKind::TransformationM2M => {
            let t = parse_m2m(&text, cx.metamodels).map_err(|e| fail(e.to_string()))?;
            let mut alias_inputs = BTreeMap::new();
            for decl in &t.inputs {
                let (_, m) = inputs
                    .get(&decl.alias)
                    .ok_or_else(|| fail(format!("no input pin named `{}`", decl.alias)))?;
                alias_inputs.insert(decl.alias.clone(), m.clone());
            }
            let [out_pin] = node.outputs.as_slice() else {
                return Err(fail("a model-to-model action needs exactly one output pin".into()));
            };
            if out_pin.metamodel != t.output.metamodel {
                return Err(fail(format!(
                    "output pin `{}` expects {}, the transformation creates {}",
                    out_pin.name, out_pin.metamodel, t.output.metamodel
                )));
            }
            let out_uri = format!("{out_dir}/{}.model.json", out_pin.name);
            let wrap = |e: M2mError| match e {
                M2mError::Conformance { .. } => EnactError::Conformance {
                    action: action.clone(),
                    message: e.to_string(),
                },
                e => fail(e.to_string()),
            };
            let (model, l) = if cx.augment {
                let aug = if t.is_augmented() { t.clone() } else { augment_m2m(&t) };
                let aug_uri = format!("{out_dir}/{}.aug.m2m", file_stem(&t_entry.uri));
                files.push((aug_uri.clone(), aug.to_string()));
                augmented = Some(aug_uri);
                let (m, l) = execute_augmented_m2m(&aug, &alias_inputs, cx.metamodels, &out_uri).map_err(wrap)?;
                (m, Some(l))
            } else {
                (
                    execute_m2m(&t, &alias_inputs, cx.metamodels, &out_uri).map_err(wrap)?,
                    None,
                )
            };
            files.push((out_uri.clone(), model.to_json()));
            let e = ResourceEntry::generated(ResourceKind::Model, out_uri.clone(), execution.clone());
            let mut rels = vec![Relation::output(&t_id, &e.id)];
            if let Some(mm) = cx.metamodel_ids.get(&model.metamodel) {
                rels.push(Relation::conforms_to(&e.id, mm));
            }
            entries.push((e, rels));
            models.push((
                PinRef {
                    node: action.clone(),
                    pin: out_pin.name.clone(),
                },
                out_uri.clone(),
                model,
            ));
            outputs.push(out_uri);
            links = l;
        }
        ResourceKind::TransformationM2C => {
            let t = parse_template(&text, cx.metamodels).map_err(|e| fail(e.to_string()))?;
            let [(in_uri, model)] = inputs.values().collect::<Vec<_>>()[..] else {
                return Err(fail("a model-to-code action needs exactly one input pin".into()));
            };
            let file_uri = format!("{out_dir}/{}", t.file);
            let l = if cx.augment {
                let mut aug = if t.is_augmented() {
                    t.clone()
                } else {
                    augment_template(&t, cx.metamodels)
                };
                if aug.markers.is_default() {
                    aug.markers = cx.ws.config.markers();
                }
                let aug_uri = format!("{out_dir}/{}.aug.m2c", file_stem(&t_entry.uri));
                files.push((aug_uri.clone(), aug.to_string()));
                augmented = Some(aug_uri);
                let annotated = render_augmented(&aug, model, cx.metamodels).map_err(|e| fail(e.to_string()))?;
                let x = extract_trace(&annotated, in_uri, &file_uri).map_err(|e| fail(e.to_string()))?;
                files.push((format!("{file_uri}.annotated"), annotated.text));
                files.push((file_uri.clone(), x.clean));
                Some(x.links)
            } else {
                files.push((
                    file_uri.clone(),
                    render(&t, model, cx.metamodels).map_err(|e| fail(e.to_string()))?,
                ));
                None
            };
            let e = ResourceEntry::generated(ResourceKind::GeneratedFile, file_uri.clone(), execution.clone());
            let rels = vec![Relation::output(&t_id, &e.id)];
            entries.push((e, rels));
            outputs.push(file_uri);
            links = l;
        }
        _ => unreachable!("filtered to transformations"),
    }

    let mut summary = format!("{action}: {} -> {}", t_entry.uri, outputs.join(", "));
    let trace = match links {
        Some(links) => {
            summary.push_str(&format!(" ({} trace links)", links.len()));
            let tm = LocalTraceModel::new(
                resource_id(ResourceKind::TraceModel, &trace_uri),
                &t_id,
                cx.stamp,
                links,
            );
            files.push((trace_uri.clone(), save_trace(&tm)));
            let e = ResourceEntry::generated(ResourceKind::TraceModel, trace_uri.clone(), execution.clone());
            let rels = vec![Relation::trace_for(&e.id, &t_id)];
            entries.push((e, rels));
            Some(trace_uri)
        }
        None => None,
    };
    let mut relations: Vec<Relation> = inputs
        .values()
        .map(|(uri, _)| Relation::input(&resource_id(ResourceKind::Model, uri), &t_id))
        .collect();
    relations.push(Relation::weave(&cx.process_id, &t_id, &action));

    Ok(Outcome {
        record: ActionRecord {
            action: action.clone(),
            transformation: t_id.clone(),
            execution,
            inputs: inputs.into_iter().map(|(pin, (uri, _))| (pin, uri)).collect(),
            outputs,
            trace,
            augmented,
        },
        files,
        entries,
        relations,
        models,
        log: summary,
    })
}
