//! A workspace directory: its layout configuration, file access by
//! workspace-relative uri, the stored megamodel, and the enactment lock.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::m2c::Markers;
use crate::megamodel::{self, Megamodel, MegamodelError, ResourceKind, MEGAMODEL_FILE};
use crate::model::{parse_metamodel, parse_model, peek_metamodel_name, MetamodelRegistry, Model, ModelError};

/// Optional configuration file at the workspace root.
pub const CONFIG_FILE: &str = "tracelink.json";
pub const LOCK_FILE: &str = ".tracelink.lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct WorkspaceConfig {
    pub output_dir: String,
    pub trace_dir: String,
    /// Opening and closing marker delimiters for templates that do not
    /// declare their own.
    pub marker_delims: (String, String),
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        let m = Markers::default();
        WorkspaceConfig {
            output_dir: "out".into(),
            trace_dir: "traces".into(),
            marker_delims: (m.open, m.close),
        }
    }
}

impl WorkspaceConfig {
    pub fn validate(&self) -> Result<(), WorkspaceError> {
        let bad = |m: &str| Err(WorkspaceError::Config(m.to_string()));
        for dir in [&self.output_dir, &self.trace_dir] {
            if dir.is_empty() || dir.contains(['/', '\\']) || dir.starts_with('.') {
                return bad("output and trace directories must be plain directory names");
            }
        }
        if self.output_dir == self.trace_dir {
            return bad("output and trace directories must differ");
        }
        let (open, close) = &self.marker_delims;
        if open.is_empty() || close.is_empty() {
            return bad("marker delimiters must be nonempty");
        }
        if open == close {
            return bad("marker delimiters must differ");
        }
        Ok(())
    }

    pub fn markers(&self) -> Markers {
        Markers {
            open: self.marker_delims.0.clone(),
            close: self.marker_delims.1.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkspaceError {
    #[error("i/o error on `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("invalid workspace configuration: {0}")]
    Config(String),
    #[error("no megamodel in the workspace; run `tracelink discover` first")]
    NoMegamodel,
    #[error("another enactment holds the workspace lock `{0}`")]
    Locked(String),
    #[error("`{uri}`: {error}")]
    Model { uri: String, error: ModelError },
    #[error("metamodel `{0}` is not registered")]
    UnknownMetamodel(String),
    #[error(transparent)]
    Megamodel(#[from] MegamodelError),
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub config: WorkspaceConfig,
}

impl Workspace {
    /// Opens `root`, reading `tracelink.json` when present.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, WorkspaceError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(WorkspaceError::Io {
                path: root.display().to_string(),
                message: "not a directory".into(),
            });
        }
        let ws = Workspace {
            root,
            config: WorkspaceConfig::default(),
        };
        let config = match ws.read_opt(CONFIG_FILE)? {
            Some(text) => {
                serde_json::from_str(&text).map_err(|e| WorkspaceError::Config(format!("{CONFIG_FILE}: {e}")))?
            }
            None => WorkspaceConfig::default(),
        };
        config.validate()?;
        Ok(Workspace { config, ..ws })
    }

    pub fn with_config(root: impl Into<PathBuf>, config: WorkspaceConfig) -> Result<Self, WorkspaceError> {
        config.validate()?;
        Ok(Workspace {
            root: root.into(),
            config,
        })
    }

    pub fn path(&self, uri: &str) -> PathBuf {
        self.root.join(uri)
    }

    /// Workspace-relative uri of `path`, with `/` separators.
    pub fn uri_of(&self, path: &Path) -> Option<String> {
        let abs = if path.is_absolute() {
            path.to_path_buf()
        } else {
            std::env::current_dir().ok()?.join(path)
        };
        let root = self.root.canonicalize().ok()?;
        let abs = abs.canonicalize().unwrap_or(abs);
        let rel = abs.strip_prefix(&root).ok()?;
        Some(
            rel.components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/"),
        )
    }

    pub fn read(&self, uri: &str) -> Result<String, WorkspaceError> {
        fs::read_to_string(self.path(uri)).map_err(|e| io_error(uri, &e))
    }

    fn read_opt(&self, uri: &str) -> Result<Option<String>, WorkspaceError> {
        match fs::read_to_string(self.path(uri)) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_error(uri, &e)),
        }
    }

    /// Writes `text` to `uri`, creating parent directories.
    pub fn write(&self, uri: &str, text: &str) -> Result<(), WorkspaceError> {
        let path = self.path(uri);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_error(uri, &e))?;
        }
        fs::write(&path, text).map_err(|e| io_error(uri, &e))
    }

    /// Removes a directory tree under the workspace if it exists.
    pub fn clear_dir(&self, uri: &str) -> Result<(), WorkspaceError> {
        match fs::remove_dir_all(self.path(uri)) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(()),
            Err(e) => Err(io_error(uri, &e)),
        }
    }

    pub fn discover(&self) -> Result<Megamodel, WorkspaceError> {
        let skip = [self.config.output_dir.as_str(), self.config.trace_dir.as_str()];
        Ok(megamodel::discover(&self.root, &skip)?)
    }

    pub fn load_megamodel(&self) -> Result<Megamodel, WorkspaceError> {
        let text = self.read_opt(MEGAMODEL_FILE)?.ok_or(WorkspaceError::NoMegamodel)?;
        Ok(Megamodel::load(&text)?)
    }

    pub fn save_megamodel(&self, mgm: &Megamodel) -> Result<(), WorkspaceError> {
        self.write(MEGAMODEL_FILE, &mgm.save())
    }

    /// Parses every metamodel registered in `mgm`.
    pub fn metamodels(&self, mgm: &Megamodel) -> Result<MetamodelRegistry, WorkspaceError> {
        let mut reg = MetamodelRegistry::new();
        for r in mgm.of_kind(ResourceKind::Metamodel) {
            let mm = parse_metamodel(&self.read(&r.uri)?).map_err(|error| WorkspaceError::Model {
                uri: r.uri.clone(),
                error,
            })?;
            reg.insert(mm);
        }
        Ok(reg)
    }

    /// Reads and parses the model at `uri` against its declared metamodel.
    pub fn load_model(&self, uri: &str, metamodels: &MetamodelRegistry) -> Result<Model, WorkspaceError> {
        let text = self.read(uri)?;
        let model_err = |error| WorkspaceError::Model {
            uri: uri.to_string(),
            error,
        };
        let name = peek_metamodel_name(&text).map_err(model_err)?;
        let mm = metamodels
            .get(&name)
            .ok_or_else(|| WorkspaceError::UnknownMetamodel(name.clone()))?;
        parse_model(&text, mm, uri).map_err(model_err)
    }

    /// Takes the enactment lock. It is released when the guard drops.
    pub fn lock(&self) -> Result<WorkspaceLock, WorkspaceError> {
        let path = self.path(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(WorkspaceLock { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(WorkspaceError::Locked(path.display().to_string())),
            Err(e) => Err(io_error(LOCK_FILE, &e)),
        }
    }
}

fn io_error(path: &str, e: &std::io::Error) -> WorkspaceError {
    WorkspaceError::Io {
        path: path.to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug)]
pub struct WorkspaceLock {
    path: PathBuf,
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
