//! Fixture loading shared by the benchmarks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use tracelink_core::model::{parse_metamodel, parse_model, MetamodelRegistry, Model};

pub const INPUT: &str = "models/Input.pim.model.json";
pub const PROCESS: &str = "process/wsn-iot.proc.json";

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/wsn-iot")
}

pub fn read(rel: &str) -> String {
    let path = fixture_dir().join(rel);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn registry() -> MetamodelRegistry {
    ["PIMM", "PSMM"]
        .iter()
        .map(|n| parse_metamodel(&read(&format!("metamodels/{n}.mm.json"))).unwrap())
        .collect()
}

pub fn input(reg: &MetamodelRegistry) -> BTreeMap<String, Model> {
    let m = parse_model(&read(INPUT), reg.get("PIMM").unwrap(), INPUT).unwrap();
    BTreeMap::from([("pim".to_string(), m)])
}

/// Copies the bundled workspace into a fresh temporary directory.
pub fn workspace_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = fixture_dir();
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
