//! Model resolution: bundled ids, network files and a model directory.

use std::collections::BTreeMap;
use std::path::Path;

use mdss_core::NetworkDoc;
use mdss_models::catalog::{LoadedModel, ModelInfo, ModelKind, ModelRequest};
use mdss_models::{bundled_models, ModelSession};
use serde::Serialize;

use crate::error::{ApiError, ApiResult};

/// Bundled models plus networks loaded from disk, keyed by name.
#[derive(Clone, Debug, Default)]
pub struct ModelLibrary {
    extra: BTreeMap<String, NetworkDoc>,
}

pub fn read_network(path: &Path) -> ApiResult<NetworkDoc> {
    let text = std::fs::read_to_string(path).map_err(|e| ApiError::io(path, e))?;
    Ok(NetworkDoc::parse(&text)?)
}

impl ModelLibrary {
    /// Every `*.json` network in `dir`, named by file stem.
    pub fn from_dir(dir: &Path) -> ApiResult<Self> {
        let mut extra = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| ApiError::io(dir, e))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths.into_iter().filter(|p| p.extension().is_some_and(|x| x == "json")) {
            let name = p.file_stem().expect("json file has a stem").to_string_lossy().into_owned();
            extra.insert(name, read_network(&p)?);
        }
        Ok(ModelLibrary { extra })
    }

    pub fn insert(&mut self, name: &str, doc: NetworkDoc) {
        self.extra.insert(name.to_string(), doc);
    }

    pub fn models(&self) -> Vec<ModelInfo> {
        let mut out = bundled_models();
        for (name, doc) in &self.extra {
            let decision = doc.nodes.iter().any(|n| n.kind != mdss_core::NodeKind::Chance);
            out.push(ModelInfo {
                id: name.clone(),
                kind: if decision { ModelKind::Decision } else { ModelKind::Network },
                description: format!("network `{}` from the model directory", doc.name),
                configurable: false,
            });
        }
        out
    }

    /// Resolves `req.model` as a bundled id, a library entry or a file path.
    pub fn load(&self, req: &ModelRequest) -> ApiResult<LoadedModel> {
        if let Some(doc) = self.extra.get(&req.model) {
            let mut m = LoadedModel::from_doc(doc.clone())?;
            m.id = req.model.clone();
            m.request = Some(req.clone());
            return Ok(m);
        }
        if bundled_models().iter().any(|m| m.id == req.model) {
            return Ok(LoadedModel::load(req)?);
        }
        let path = Path::new(&req.model);
        if path.extension().is_some_and(|x| x == "json") {
            let mut m = LoadedModel::from_doc(read_network(path)?)?;
            m.request = Some(req.clone());
            return Ok(m);
        }
        Ok(LoadedModel::load(req)?)
    }

    pub fn session(&self, req: &ModelRequest) -> ApiResult<ModelSession> {
        Ok(ModelSession::new(self.load(req)?))
    }
}

/// Node names of a session, for error messages and session views.
pub fn node_names(session: &ModelSession) -> Vec<String> {
    session.network().nodes.iter().map(|n| n.name.clone()).collect()
}

/// Machine format: pretty JSON with a trailing newline.
pub fn machine<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}
