use std::collections::BTreeMap;
use std::path::Path;

use walkdir::WalkDir;

use super::{Megamodel, MegamodelError, Origin, Relation, ResourceEntry, ResourceKind};
use crate::model::{parse_metamodel, peek_metamodel_name};

pub const MEGAMODEL_FILE: &str = "megamodel.json";

/// Resource kind implied by a file name, if the file is a workspace resource.
/// Augmented transformations written next to their originals are not.
pub fn kind_of_file(name: &str) -> Option<ResourceKind> {
    if name.ends_with(".aug.m2m") || name.ends_with(".aug.m2c") {
        return None;
    }
    let kinds = [
        (".mm.json", ResourceKind::Metamodel),
        (".model.json", ResourceKind::Model),
        (".proc.json", ResourceKind::ProcessModel),
        (".m2m", ResourceKind::TransformationM2M),
        (".m2c", ResourceKind::TransformationM2C),
    ];
    kinds
        .into_iter()
        .find(|(suffix, _)| name.len() > suffix.len() && name.ends_with(suffix))
        .map(|(_, k)| k)
}

/// Registers every resource file under `root`. Hidden directories and the
/// `skip` directories directly under the root (generated outputs and traces)
/// are not visited.
pub fn discover(root: &Path, skip: &[&str]) -> Result<Megamodel, MegamodelError> {
    let mut found: Vec<(String, ResourceKind)> = Vec::new();
    let walker = WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
        if e.depth() == 0 || !e.file_type().is_dir() {
            return true;
        }
        let name = e.file_name().to_string_lossy();
        !(name.starts_with('.') || (e.depth() == 1 && skip.contains(&name.as_ref())))
    });
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).display().to_string();
            let message = e.io_error().map_or_else(|| e.to_string(), |io| io.to_string());
            MegamodelError::Io { path, message }
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let Some(kind) = kind_of_file(&entry.file_name().to_string_lossy()) else {
            continue;
        };
        let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
        let uri = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        found.push((uri, kind));
    }
    found.sort();

    let read = |uri: &str| std::fs::read_to_string(root.join(uri)).map_err(|e| MegamodelError::io(uri, &e));
    let invalid = |uri: &str, e: &dyn std::fmt::Display| MegamodelError::InvalidResource {
        uri: uri.to_string(),
        message: e.to_string(),
    };

    // metamodel name -> resource id
    let mut metamodels: BTreeMap<String, String> = BTreeMap::new();
    for (uri, kind) in &found {
        if *kind == ResourceKind::Metamodel {
            let mm = parse_metamodel(&read(uri)?).map_err(|e| invalid(uri, &e))?;
            let id = super::resource_id(*kind, uri);
            if metamodels.insert(mm.name.clone(), id).is_some() {
                return Err(MegamodelError::AmbiguousMetamodel(mm.name));
            }
        }
    }

    let mut mgm = Megamodel::new();
    // Metamodels first so conformance relations have both endpoints.
    let ordered = found
        .iter()
        .filter(|(_, k)| *k == ResourceKind::Metamodel)
        .chain(found.iter().filter(|(_, k)| *k != ResourceKind::Metamodel));
    for (uri, kind) in ordered {
        let entry = ResourceEntry::new(*kind, uri.clone(), Origin::Discovered);
        let mut relations = Vec::new();
        if *kind == ResourceKind::Model {
            let name = peek_metamodel_name(&read(uri)?).map_err(|e| invalid(uri, &e))?;
            if let Some(mm) = metamodels.get(&name) {
                relations.push(Relation::conforms_to(&entry.id, mm));
            }
        }
        mgm.insert(entry, relations)?;
    }
    Ok(mgm)
}
