#![allow(dead_code)]

pub mod gen;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use tracelink_core::m2c::{parse_template, Template};
use tracelink_core::m2m::{execute_m2m, parse_m2m};
use tracelink_core::megamodel::Megamodel;
use tracelink_core::model::{parse_metamodel, parse_model, MetamodelRegistry, Model};
use tracelink_core::process::{enact, EnactOptions, EnactmentResult};
use tracelink_core::workspace::Workspace;

pub const PROCESS: &str = "process/wsn-iot.proc.json";
pub const INPUT: &str = "models/Input.pim.model.json";

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/wsn-iot")
}

/// Copies the bundled workspace into a fresh temporary directory.
pub fn fixture_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = fixture_dir();
    for entry in walkdir::WalkDir::new(&src) {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(&src).unwrap();
        let dst = dir.path().join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dst).unwrap();
        } else {
            fs::copy(entry.path(), &dst).unwrap();
        }
    }
    dir
}

pub fn bindings() -> BTreeMap<String, String> {
    BTreeMap::from([("pim".to_string(), INPUT.to_string())])
}

/// Discovers and enacts the bundled process in `root`.
pub fn enact_fixture(root: &Path, opts: &EnactOptions) -> (Workspace, Megamodel, EnactmentResult) {
    let ws = Workspace::open(root).unwrap();
    let mgm = ws.discover().unwrap();
    ws.save_megamodel(&mgm).unwrap();
    let r = enact(&ws, PROCESS, &mgm, &bindings(), opts).unwrap();
    (ws, mgm, r)
}

/// Every file under `root` with its contents, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e
                .path()
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            (rel, fs::read(e.path()).unwrap())
        })
        .collect()
}

pub fn listings_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/listings")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Metamodels of the bundled workspace.
pub fn wsn_registry() -> MetamodelRegistry {
    ["PIMM", "PSMM"]
        .iter()
        .map(|n| parse_metamodel(&read(&fixture_dir().join(format!("metamodels/{n}.mm.json")))).unwrap())
        .collect()
}

pub fn wsn_input(reg: &MetamodelRegistry) -> Model {
    parse_model(&read(&fixture_dir().join(INPUT)), reg.get("PIMM").unwrap(), INPUT).unwrap()
}

/// Sorted (file name, text) pairs of the files of `dir` with `ext`.
pub fn files_with_ext(dir: &Path, ext: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(ext))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), read(&p)))
        .collect();
    out.sort();
    out
}

pub fn wsn_transformations() -> Vec<(String, String)> {
    files_with_ext(&fixture_dir().join("transformations"), ".m2m")
}

pub fn wsn_templates() -> Vec<(String, String)> {
    files_with_ext(&fixture_dir().join("templates"), ".m2c")
}

pub fn listings_registry() -> MetamodelRegistry {
    [parse_metamodel(&read(&listings_dir().join("MM.mm.json"))).unwrap()]
        .into_iter()
        .collect()
}

pub fn listings_models(reg: &MetamodelRegistry) -> Vec<Model> {
    files_with_ext(&listings_dir(), ".model.json")
        .into_iter()
        .map(|(name, text)| parse_model(&text, reg.get("MM").unwrap(), &name).unwrap())
        .collect()
}

pub fn listings_templates() -> Vec<(String, String)> {
    files_with_ext(&listings_dir(), ".m2c")
}

/// Every (template, model) pair of the fixtures, with its registry.
pub fn template_cases() -> Vec<(String, Template, Model, MetamodelRegistry)> {
    let mut out = Vec::new();
    let reg = wsn_registry();
    for (name, text) in wsn_templates() {
        let t = parse_template(&text, &reg).unwrap();
        let psm = generated_psm(&name, &reg);
        out.push((name, t, psm, reg.clone()));
    }
    let reg = listings_registry();
    for (name, text) in listings_templates() {
        let t = parse_template(&text, &reg).unwrap();
        for m in listings_models(&reg) {
            out.push((format!("{name} over {}", m.uri), t.clone(), m, reg.clone()));
        }
    }
    out
}

/// The PSM a bundled template runs over, produced by its paired mapping.
pub fn generated_psm(template: &str, reg: &MetamodelRegistry) -> Model {
    let mapping = match template {
        "GenGateway.m2c" => "MapDataCollector.m2m".to_string(),
        other => other.replace("Gen", "Map").replace(".m2c", ".m2m"),
    };
    let text = read(&fixture_dir().join("transformations").join(&mapping));
    let t = parse_m2m(&text, reg).unwrap();
    let inputs = BTreeMap::from([("pim".to_string(), wsn_input(reg))]);
    execute_m2m(&t, &inputs, reg, "psm.model.json").unwrap()
}
