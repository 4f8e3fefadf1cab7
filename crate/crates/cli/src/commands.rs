use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use tracelink_core::gtm::{build_gtm, change_impact, origin_at, GlobalTraceMap, GtmError, Report};
use tracelink_core::m2c::{augment_template, extract_trace, parse_template, render, render_augmented, Template};
use tracelink_core::m2m::{augment_m2m, execute_augmented_m2m, execute_m2m, parse_m2m};
use tracelink_core::megamodel::{resource_id, Megamodel, ResourceKind};
use tracelink_core::model::{ElementPath, MetamodelRegistry};
use tracelink_core::process::{enact, EnactOptions};
use tracelink_core::trace::{load_trace, offset_of, save_trace, LocalTraceModel, TraceNode};
use tracelink_core::workspace::{Workspace, WorkspaceError};

use crate::{Cli, Command, Format, GtmCommand, MgmCommand, TraceCommand};

const REPORTS_DIR: &str = "reports";

macro_rules! out {
    ($($arg:tt)*) => {
        std::io::Write::write_fmt(&mut std::io::stdout().lock(), format_args!($($arg)*))?
    };
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        out!($($arg)*);
        out!("\n");
    }};
}

pub fn run(cli: Cli) -> Result<()> {
    let open =
        |root: &Path| Workspace::open(root).with_context(|| format!("cannot open workspace `{}`", root.display()));
    match cli.command {
        Command::Discover { dir } => discover(&open(dir.as_deref().unwrap_or(&cli.workspace))?),
        Command::Mgm { action } => {
            let ws = open(&cli.workspace)?;
            let mgm = ws.load_megamodel()?;
            match action {
                MgmCommand::Show { format } => match format.format {
                    Format::Text => out!("{}", mgm.table()),
                    Format::Json => out!("{}", mgm.save()),
                },
                MgmCommand::Dot => out!("{}", mgm.to_dot()),
            }
            Ok(())
        }
        Command::AugmentM2m { file, out } => augment_m2m_cmd(&open(&cli.workspace)?, &file, out.as_deref()),
        Command::AugmentM2c { file, out } => augment_m2c_cmd(&open(&cli.workspace)?, &file, out.as_deref()),
        Command::RunM2m {
            file,
            inputs,
            out,
            no_augment,
        } => run_m2m(&open(&cli.workspace)?, &file, &inputs, &out, !no_augment),
        Command::RunM2c {
            file,
            input,
            out,
            no_augment,
        } => run_m2c(&open(&cli.workspace)?, &file, &input, &out, !no_augment),
        Command::Enact {
            process,
            bindings,
            no_augment,
            parallel,
        } => {
            let opts = EnactOptions {
                augment: !no_augment,
                parallel,
                action_order: None,
            };
            enact_cmd(&open(&cli.workspace)?, &process, &bindings, &opts)
        }
        Command::Impact { model, path, format } => impact(&open(&cli.workspace)?, &model, &path, format.format),
        Command::Origin { file, location, format } => origin(&open(&cli.workspace)?, &file, &location, format.format),
        Command::Gtm {
            action: GtmCommand::Dot { around, radius },
        } => gtm_dot(&open(&cli.workspace)?, around.as_deref(), radius),
        Command::Trace {
            action: TraceCommand::Show { file, format },
        } => trace_show(&open(&cli.workspace)?, &file, format.format),
    }
}

/// Workspace uri of a path argument. Relative paths name workspace files
/// first and files under the current directory second.
fn uri_arg(ws: &Workspace, p: &Path) -> String {
    let slashed = || p.to_string_lossy().replace('\\', "/");
    if p.is_absolute() {
        return ws.uri_of(p).unwrap_or_else(slashed);
    }
    if !ws.path(&slashed()).exists() && p.exists() {
        if let Some(uri) = ws.uri_of(p) {
            return uri;
        }
    }
    slashed().trim_start_matches("./").to_string()
}

/// The stored megamodel, or a fresh discovery when none was saved yet.
fn megamodel_or_discover(ws: &Workspace) -> Result<Megamodel> {
    match ws.load_megamodel() {
        Err(WorkspaceError::NoMegamodel) => Ok(ws.discover()?),
        other => Ok(other?),
    }
}

fn registry(ws: &Workspace) -> Result<MetamodelRegistry> {
    Ok(ws.metamodels(&megamodel_or_discover(ws)?)?)
}

fn discover(ws: &Workspace) -> Result<()> {
    let mgm = ws.discover()?;
    ws.save_megamodel(&mgm)?;
    let counts: Vec<String> = ResourceKind::ALL
        .iter()
        .map(|&k| (k, mgm.count(k)))
        .filter(|(_, n)| *n > 0)
        .map(|(k, n)| format!("{n} {k}"))
        .collect();
    let counts = if counts.is_empty() {
        String::new()
    } else {
        format!(" ({})", counts.join(", "))
    };
    outln!(
        "discovered {} resources{counts}, {} relations",
        mgm.len(),
        mgm.relations().count()
    );
    outln!("wrote {}", ws.path(tracelink_core::megamodel::MEGAMODEL_FILE).display());
    Ok(())
}

/// `dir/name.m2m` to `dir/name.aug.m2m`.
fn augmented_uri(uri: &str, ext: &str) -> String {
    let stem = uri.strip_suffix(ext).unwrap_or(uri);
    format!("{stem}.aug{ext}")
}

fn augment_m2m_cmd(ws: &Workspace, file: &Path, out: Option<&Path>) -> Result<()> {
    let uri = uri_arg(ws, file);
    let reg = registry(ws)?;
    let t = parse_m2m(&ws.read(&uri)?, &reg).with_context(|| format!("in `{uri}`"))?;
    let out = out.map_or_else(|| augmented_uri(&uri, ".m2m"), |o| uri_arg(ws, o));
    ws.write(&out, &augment_m2m(&t).to_string())?;
    outln!("wrote {out}");
    Ok(())
}

fn load_template(ws: &Workspace, uri: &str, reg: &MetamodelRegistry) -> Result<Template> {
    let mut t = parse_template(&ws.read(uri)?, reg).with_context(|| format!("in `{uri}`"))?;
    if t.markers.is_default() {
        t.markers = ws.config.markers();
    }
    Ok(t)
}

fn augment_m2c_cmd(ws: &Workspace, file: &Path, out: Option<&Path>) -> Result<()> {
    let uri = uri_arg(ws, file);
    let reg = registry(ws)?;
    let t = load_template(ws, &uri, &reg)?;
    let out = out.map_or_else(|| augmented_uri(&uri, ".m2c"), |o| uri_arg(ws, o));
    ws.write(&out, &augment_template(&t, &reg).to_string())?;
    outln!("wrote {out}");
    Ok(())
}

fn file_stem(uri: &str) -> &str {
    let name = uri.rsplit('/').next().unwrap_or(uri);
    name.split('.').next().unwrap_or(name)
}

fn write_trace(
    ws: &Workspace,
    name: &str,
    kind: ResourceKind,
    t_uri: &str,
    links: Vec<tracelink_core::trace::TraceLink>,
) -> Result<()> {
    let uri = format!("{}/{name}.trace.json", ws.config.trace_dir);
    let tm = LocalTraceModel::new(
        resource_id(ResourceKind::TraceModel, &uri),
        resource_id(kind, t_uri),
        1,
        links,
    );
    ws.write(&uri, &save_trace(&tm))?;
    outln!("wrote {uri} ({} links)", tm.links.len());
    Ok(())
}

fn run_m2m(ws: &Workspace, file: &Path, inputs: &[String], out: &Path, augment: bool) -> Result<()> {
    let uri = uri_arg(ws, file);
    let reg = registry(ws)?;
    let t = parse_m2m(&ws.read(&uri)?, &reg).with_context(|| format!("in `{uri}`"))?;
    let mut models = BTreeMap::new();
    for arg in inputs {
        let (alias, model) = arg
            .split_once('=')
            .ok_or_else(|| anyhow!("`--in {arg}`: expected `alias=model`"))?;
        let model_uri = uri_arg(ws, Path::new(model));
        models.insert(alias.to_string(), ws.load_model(&model_uri, &reg)?);
    }
    let out_uri = uri_arg(ws, out);
    if augment {
        let aug = if t.is_augmented() { t } else { augment_m2m(&t) };
        let (m, links) = execute_augmented_m2m(&aug, &models, &reg, &out_uri)?;
        ws.write(&out_uri, &m.to_json())?;
        outln!("wrote {out_uri}");
        write_trace(ws, file_stem(&uri), ResourceKind::TransformationM2M, &uri, links)
    } else {
        let m = execute_m2m(&t.strip(), &models, &reg, &out_uri)?;
        ws.write(&out_uri, &m.to_json())?;
        outln!("wrote {out_uri}");
        Ok(())
    }
}

fn run_m2c(ws: &Workspace, file: &Path, input: &Path, out: &Path, augment: bool) -> Result<()> {
    let uri = uri_arg(ws, file);
    let reg = registry(ws)?;
    let t = load_template(ws, &uri, &reg)?;
    let model_uri = uri_arg(ws, input);
    let model = ws.load_model(&model_uri, &reg)?;
    let dir = uri_arg(ws, out);
    let file_uri = format!("{}/{}", dir.trim_end_matches('/'), t.file);
    if !augment {
        ws.write(&file_uri, &render(&t.strip(), &model, &reg)?)?;
        outln!("wrote {file_uri}");
        return Ok(());
    }
    let aug = if t.is_augmented() {
        t.clone()
    } else {
        augment_template(&t, &reg)
    };
    let annotated = render_augmented(&aug, &model, &reg)?;
    let x = extract_trace(&annotated, &model_uri, &file_uri)?;
    ws.write(&file_uri, &x.clean)?;
    ws.write(&format!("{file_uri}.annotated"), &annotated.text)?;
    outln!("wrote {file_uri}");
    outln!("wrote {file_uri}.annotated");
    write_trace(ws, &t.file, ResourceKind::TransformationM2C, &uri, x.links)
}

fn enact_cmd(ws: &Workspace, process: &Path, args: &[String], opts: &EnactOptions) -> Result<()> {
    let _lock = ws.lock()?;
    let mgm = ws.load_megamodel().context("run `tracelink discover` first")?;
    let mut bindings = BTreeMap::new();
    for arg in args {
        let (pin, model) = arg
            .split_once('=')
            .ok_or_else(|| anyhow!("`--bind {arg}`: expected `pin=model`"))?;
        bindings.insert(pin.to_string(), uri_arg(ws, Path::new(model)));
    }
    let r = enact(ws, &uri_arg(ws, process), &mgm, &bindings, opts)?;
    for line in &r.log {
        outln!("{line}");
    }
    outln!(
        "enacted {} actions in {} stages: {} artifacts, {} trace models (stamp {})",
        r.actions.len(),
        r.plan.stages.len(),
        r.artifacts().count(),
        r.traces().count(),
        r.stamp
    );
    Ok(())
}

fn gtm(ws: &Workspace) -> Result<GlobalTraceMap> {
    let mgm = ws.load_megamodel()?;
    let g = build_gtm(ws, &mgm)?;
    for w in &g.warnings {
        eprintln!("warning: {w}");
    }
    Ok(g)
}

/// The candidate closest to `target` by edit distance.
fn nearest(target: &str, candidates: impl IntoIterator<Item = String>) -> Option<String> {
    candidates
        .into_iter()
        .map(|c| (strsim::levenshtein(target, &c), c))
        .min()
        .map(|(_, c)| c)
}

fn not_found(what: &str, nearest: Option<String>) -> anyhow::Error {
    match nearest {
        Some(n) => anyhow!("`{what}` is not a node of the trace map\nhelp: did you mean `{n}`?"),
        None => anyhow!("`{what}` is not a node of the trace map; the map is empty"),
    }
}

fn emit_report(ws: &Workspace, r: &Report, format: Format) -> Result<()> {
    let kind = match r.kind {
        tracelink_core::gtm::ReportKind::Impact => "impact",
        tracelink_core::gtm::ReportKind::Origin => "origin",
    };
    let slug: String = r
        .anchor
        .to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    let base = format!("{}/{REPORTS_DIR}/{kind}-{slug}", ws.config.output_dir);
    ws.write(&format!("{base}.txt"), &r.render())?;
    ws.write(&format!("{base}.json"), &r.to_json())?;
    match format {
        Format::Text => out!("{}", r.render()),
        Format::Json => out!("{}", r.to_json()),
    }
    Ok(())
}

fn impact(ws: &Workspace, model: &str, path: &str, format: Format) -> Result<()> {
    let g = gtm(ws)?;
    let model = uri_arg(ws, Path::new(model));
    let path: ElementPath = path.parse().with_context(|| format!("bad element path `{path}`"))?;
    let anchor = TraceNode::model(&model, path);
    match change_impact(&g, &anchor) {
        Err(GtmError::AnchorNotFound(a)) => {
            let models = g
                .nodes()
                .iter()
                .filter(|n| n.as_model().is_some())
                .map(|n| n.to_string());
            Err(not_found(&a, nearest(&a, models)))
        }
        r => emit_report(ws, &r?, format),
    }
}

/// Byte offset of `@byte` or 1-based `line:col` in `text`.
fn parse_location(text: &str, loc: &str) -> Result<usize> {
    if let Some(b) = loc.strip_prefix('@') {
        let b: usize = b.parse().with_context(|| format!("bad byte offset `{loc}`"))?;
        if b > text.len() {
            bail!("byte offset {b} is past the end of the file ({} bytes)", text.len());
        }
        return Ok(b);
    }
    let (l, c) = loc
        .split_once(':')
        .ok_or_else(|| anyhow!("bad location `{loc}`: expected `line:col` or `@byte`"))?;
    let (l, c): (usize, usize) = (
        l.parse().with_context(|| format!("bad line in `{loc}`"))?,
        c.parse().with_context(|| format!("bad column in `{loc}`"))?,
    );
    offset_of(text, l, c).ok_or_else(|| anyhow!("{l}:{c} is outside the file"))
}

fn origin(ws: &Workspace, file: &str, location: &str, format: Format) -> Result<()> {
    let g = gtm(ws)?;
    let file = uri_arg(ws, Path::new(file));
    let files: std::collections::BTreeSet<String> = g
        .nodes()
        .iter()
        .filter_map(TraceNode::as_code)
        .map(|s| s.file.clone())
        .collect();
    if !files.contains(&file) {
        return Err(not_found(&file, nearest(&file, files)));
    }
    let offset = parse_location(&ws.read(&file)?, location)?;
    emit_report(ws, &origin_at(&g, &file, offset)?, format)
}

fn gtm_dot(ws: &Workspace, around: Option<&str>, radius: usize) -> Result<()> {
    let g = gtm(ws)?;
    let dot = match around {
        None => g.export_dot(None),
        Some(label) => {
            let anchor = g
                .nodes()
                .iter()
                .find(|n| n.to_string() == label)
                .ok_or_else(|| not_found(label, nearest(label, g.nodes().iter().map(|n| n.to_string()))))?;
            g.export_dot(Some((anchor, radius)))
        }
    };
    out!("{dot}");
    Ok(())
}

fn trace_show(ws: &Workspace, file: &Path, format: Format) -> Result<()> {
    let uri = uri_arg(ws, file);
    let t = load_trace(&ws.read(&uri)?).with_context(|| format!("in `{uri}`"))?;
    if format == Format::Json {
        out!("{}", save_trace(&t));
        return Ok(());
    }
    outln!(
        "{} of {} (stamp {}, {} links)",
        t.id,
        t.transformation,
        t.execution_stamp,
        t.links.len()
    );
    for l in &t.links {
        let sources: Vec<String> = l.sources.iter().map(|s| s.to_string()).collect();
        let targets: Vec<String> = l.targets.iter().map(|s| s.to_string()).collect();
        let tags: Vec<String> = l.tags.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let tags = if tags.is_empty() {
            String::new()
        } else {
            format!("  [{}]", tags.join(", "))
        };
        outln!("  {} => {}{tags}", sources.join(", "), targets.join(", "));
    }
    Ok(())
}
