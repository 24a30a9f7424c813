use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NodeId, SessionError, SessionTree};
use crate::engine::{BackendInfo, SimAction, SimState, StageLatency};
use crate::layout::ScreenLayout;
use crate::raster::Image;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const STORE_DIR_ENV: &str = "UISIM_STORE_DIR";
const DEFAULT_STORE_DIR: &str = "./uisim-store";
const MANIFEST: &str = "manifest.json";
const BLOBS: &str = "blobs";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    session_id: String,
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
    root_id: NodeId,
    next_node_id: NodeId,
    backend_config: BackendInfo,
    nodes: Vec<NodeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    node_id: NodeId,
    parent: Option<NodeId>,
    layout: ScreenLayout,
    /// SHA-256 of the PNG blob.
    image_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action_taken: Option<SimAction>,
    backend_info: BackendInfo,
    latency_ms: StageLatency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub node_count: usize,
}

impl SessionSummary {
    pub fn of(tree: &SessionTree) -> Self {
        SessionSummary {
            session_id: tree.session_id().to_string(),
            created_at: tree.created_at(),
            updated_at: tree.updated_at(),
            node_count: tree.len(),
        }
    }
}

/// One directory per session holding `manifest.json` and `blobs/<sha256>.png`.
#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

fn io_err(context: &str, path: &Path, e: std::io::Error) -> SessionError {
    SessionError::StoreIo(format!("{context} {}: {e}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes via a sibling temp file and rename so readers never see partial files.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SessionError> {
    let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4().simple()));
    let mut f = fs::File::create(&tmp).map_err(|e| io_err("creating", &tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err("writing", &tmp, e))?;
    f.sync_all().map_err(|e| io_err("syncing", &tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err("renaming into", path, e))
}

impl SessionStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        SessionStore { root: root.into() }
    }

    /// Root from `UISIM_STORE_DIR`, falling back to `./uisim-store`.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(STORE_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_STORE_DIR), PathBuf::from))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Session ids are UUIDs; anything else cannot name a stored session.
    fn session_dir(&self, id: &str) -> Option<PathBuf> {
        uuid::Uuid::parse_str(id).ok()?;
        Some(self.root.join(id))
    }

    pub fn blob_dir(&self, id: &str) -> Option<PathBuf> {
        self.session_dir(id).map(|d| d.join(BLOBS))
    }

    pub fn save(&self, tree: &SessionTree) -> Result<(), SessionError> {
        let dir = self
            .session_dir(tree.session_id())
            .ok_or_else(|| SessionError::StoreIo(format!("unsafe session id {:?}", tree.session_id())))?;
        let blobs = dir.join(BLOBS);
        fs::create_dir_all(&blobs).map_err(|e| io_err("creating", &blobs, e))?;

        let mut encoded: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        let mut by_image: BTreeMap<*const Image, String> = BTreeMap::new();
        let mut nodes = Vec::with_capacity(tree.len());
        for (id, state) in tree.nodes() {
            let key = Arc::as_ptr(&state.image);
            let hash = match by_image.get(&key) {
                Some(h) => h.clone(),
                None => {
                    let png = state.image.encode_png();
                    let h = sha256_hex(&png);
                    encoded.entry(h.clone()).or_insert(png);
                    by_image.insert(key, h.clone());
                    h
                }
            };
            nodes.push(NodeRecord {
                node_id: id,
                parent: tree.parent_of(id)?,
                layout: state.layout.clone(),
                image_sha256: hash,
                action_taken: state.action_taken.clone(),
                backend_info: state.backend_info.clone(),
                latency_ms: state.latency_ms,
            });
        }
        for (hash, png) in &encoded {
            let path = blobs.join(format!("{hash}.png"));
            if !path.exists() {
                write_atomic(&path, png)?;
            }
        }
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            session_id: tree.session_id().to_string(),
            created_at: tree.created_at(),
            updated_at: tree.updated_at(),
            root_id: tree.root_id(),
            next_node_id: tree.next_id(),
            backend_config: tree.backend_config().clone(),
            nodes,
        };
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        write_atomic(&dir.join(MANIFEST), &json)
    }

    pub fn load(&self, id: &str) -> Result<SessionTree, SessionError> {
        let not_found = || SessionError::SessionNotFound(id.to_string());
        let dir = self.session_dir(id).ok_or_else(not_found)?;
        let manifest_path = dir.join(MANIFEST);
        let bytes = match fs::read(&manifest_path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(not_found()),
            Err(e) => return Err(io_err("reading", &manifest_path, e)),
        };
        let corrupt = |message: String| SessionError::CorruptSession {
            session: id.to_string(),
            message,
        };
        let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| corrupt(format!("manifest: {e}")))?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(corrupt(format!("unsupported schema_version {}", manifest.schema_version)));
        }
        if manifest.session_id != id {
            return Err(corrupt(format!("manifest names session {}", manifest.session_id)));
        }
        let mut images: BTreeMap<String, Arc<Image>> = BTreeMap::new();
        let mut nodes = BTreeMap::new();
        let mut parent = BTreeMap::new();
        for rec in manifest.nodes {
            let image = match images.get(&rec.image_sha256) {
                Some(img) => img.clone(),
                None => {
                    let path = dir.join(BLOBS).join(format!("{}.png", rec.image_sha256));
                    let png = fs::read(&path).map_err(|e| corrupt(format!("blob {}: {e}", rec.image_sha256)))?;
                    if sha256_hex(&png) != rec.image_sha256 {
                        return Err(corrupt(format!("blob {} fails its hash check", rec.image_sha256)));
                    }
                    let img = Arc::new(
                        Image::decode(&png).map_err(|e| corrupt(format!("blob {}: {e}", rec.image_sha256)))?,
                    );
                    images.insert(rec.image_sha256.clone(), img.clone());
                    img
                }
            };
            if nodes.contains_key(&rec.node_id) {
                return Err(corrupt(format!("duplicate node {}", rec.node_id)));
            }
            parent.insert(rec.node_id, rec.parent);
            nodes.insert(
                rec.node_id,
                SimState {
                    layout: rec.layout,
                    image,
                    action_taken: rec.action_taken,
                    backend_info: rec.backend_info,
                    latency_ms: rec.latency_ms,
                },
            );
        }
        SessionTree::from_parts(
            manifest.session_id,
            nodes,
            parent,
            manifest.root_id,
            manifest.created_at,
            manifest.updated_at,
            manifest.backend_config,
            manifest.next_node_id,
        )
        .map_err(corrupt)
    }

    /// Ids of every session directory holding a manifest, sorted.
    pub fn list_ids(&self) -> Result<Vec<String>, SessionError> {
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err("listing", &self.root, e)),
        };
        let mut ids: Vec<String> = entries
            .filter_map(Result::ok)
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|name| uuid::Uuid::parse_str(name).is_ok() && self.root.join(name).join(MANIFEST).is_file())
            .collect();
        ids.sort();
        Ok(ids)
    }
}
