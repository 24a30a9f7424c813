use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use super::{
    branch_step, rollout, RolloutOutcome, RolloutRequest, SessionError, SessionStore, SessionSummary, SessionTree,
    SharedTree,
};
use crate::engine::{SimAction, TransitionEngine};
use crate::layout::ScreenLayout;

use super::NodeId;

struct Slot {
    /// Serializes writers; readers use `committed` and never wait on it.
    write: tokio::sync::Mutex<()>,
    committed: RwLock<SharedTree>,
}

impl Slot {
    fn new(tree: SessionTree) -> Arc<Self> {
        Arc::new(Slot {
            write: tokio::sync::Mutex::new(()),
            committed: RwLock::new(Arc::new(tree)),
        })
    }

    fn snapshot(&self) -> SharedTree {
        self.committed.read().expect("session lock poisoned").clone()
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub node_id: NodeId,
    pub tree: SharedTree,
}

/// Owns live sessions. Writes to one session are serialized; reads see the
/// last committed tree. With a store, every commit is persisted before it
/// becomes visible, and unknown ids are looked up on disk.
pub struct SessionManager {
    engine: Arc<TransitionEngine>,
    store: Option<SessionStore>,
    max_sessions: Option<usize>,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
}

impl SessionManager {
    pub fn new(engine: Arc<TransitionEngine>, store: Option<SessionStore>) -> Self {
        SessionManager {
            engine,
            store,
            max_sessions: None,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_max_sessions(mut self, limit: usize) -> Self {
        self.max_sessions = Some(limit);
        self
    }

    pub fn engine(&self) -> &Arc<TransitionEngine> {
        &self.engine
    }

    pub fn store(&self) -> Option<&SessionStore> {
        self.store.as_ref()
    }

    async fn persist(&self, tree: &SharedTree) -> Result<(), SessionError> {
        let Some(store) = self.store.clone() else {
            return Ok(());
        };
        let tree = tree.clone();
        tokio::task::spawn_blocking(move || store.save(&tree))
            .await
            .map_err(|e| SessionError::StoreIo(format!("store task failed: {e}")))?
    }

    pub async fn create(
        &self,
        image_bytes: &[u8],
        initial_layout: Option<ScreenLayout>,
    ) -> Result<SharedTree, SessionError> {
        if let Some(limit) = self.max_sessions {
            if self.sessions.lock().expect("session map poisoned").len() >= limit {
                return Err(SessionError::TooManySessions { limit });
            }
        }
        let tree = super::create_session(image_bytes, initial_layout, self.engine.backend_info())?;
        let shared = Arc::new(tree.clone());
        self.persist(&shared).await?;
        let id = tree.session_id().to_string();
        self.sessions.lock().expect("session map poisoned").insert(id, Slot::new(tree));
        Ok(shared)
    }

    async fn slot(&self, id: &str) -> Result<Arc<Slot>, SessionError> {
        if let Some(slot) = self.sessions.lock().expect("session map poisoned").get(id) {
            return Ok(slot.clone());
        }
        let Some(store) = self.store.clone() else {
            return Err(SessionError::SessionNotFound(id.to_string()));
        };
        let owned = id.to_string();
        let tree = tokio::task::spawn_blocking(move || store.load(&owned))
            .await
            .map_err(|e| SessionError::StoreIo(format!("store task failed: {e}")))??;
        let mut map = self.sessions.lock().expect("session map poisoned");
        // another request may have loaded it meanwhile
        Ok(map.entry(id.to_string()).or_insert_with(|| Slot::new(tree)).clone())
    }

    pub async fn get(&self, id: &str) -> Result<SharedTree, SessionError> {
        Ok(self.slot(id).await?.snapshot())
    }

    /// Live and stored sessions, sorted by id.
    pub async fn list(&self) -> Result<Vec<SessionSummary>, SessionError> {
        let mut ids: Vec<String> = self.sessions.lock().expect("session map poisoned").keys().cloned().collect();
        if let Some(store) = &self.store {
            ids.extend(store.list_ids()?);
        }
        ids.sort();
        ids.dedup();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let tree = self.get(&id).await?;
            out.push(SessionSummary::of(&tree));
        }
        Ok(out)
    }

    pub async fn step(&self, id: &str, from: NodeId, action: &SimAction) -> Result<StepOutcome, SessionError> {
        let slot = self.slot(id).await?;
        let _guard = slot.write.lock().await;
        let mut tree = (*slot.snapshot()).clone();
        let node_id = branch_step(&mut tree, &self.engine, from, action).await?;
        let tree = self.commit(&slot, tree).await?;
        Ok(StepOutcome { node_id, tree })
    }

    /// Nodes created before a failure are committed.
    pub async fn rollout(&self, id: &str, request: &RolloutRequest) -> Result<(RolloutOutcome, SharedTree), SessionError> {
        let slot = self.slot(id).await?;
        let _guard = slot.write.lock().await;
        let mut tree = (*slot.snapshot()).clone();
        let outcome = rollout(&mut tree, &self.engine, request).await?;
        let tree = if outcome.created.is_empty() {
            slot.snapshot()
        } else {
            self.commit(&slot, tree).await?
        };
        Ok((outcome, tree))
    }

    async fn commit(&self, slot: &Slot, tree: SessionTree) -> Result<SharedTree, SessionError> {
        let shared = Arc::new(tree);
        self.persist(&shared).await?;
        *slot.committed.write().expect("session lock poisoned") = shared.clone();
        Ok(shared)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{AppGraph, BuiltinRenderer, RuleBasedPredictor};
    use crate::raster::{self, Theme};

    fn manager(store: Option<SessionStore>) -> (SessionManager, Vec<u8>) {
        let graph = Arc::new(AppGraph::demo());
        let predictor = RuleBasedPredictor::new(graph.clone(), Theme::light());
        let renderer = BuiltinRenderer::new(Theme::light(), 108, 240).unwrap();
        let engine = Arc::new(TransitionEngine::new(Arc::new(predictor), Arc::new(renderer)));
        let png = raster::render(graph.screen("home").unwrap(), &Theme::light(), 108, 240)
            .unwrap()
            .encode_png();
        (SessionManager::new(engine, store), png)
    }

    #[tokio::test]
    async fn concurrent_steps_are_serialized() {
        let (m, png) = manager(None);
        let m = Arc::new(m);
        let t = m.create(&png, None).await.unwrap();
        let id = t.session_id().to_string();
        let mut tasks = Vec::new();
        for _ in 0..8 {
            let (m, id) = (m.clone(), id.clone());
            tasks.push(tokio::spawn(async move { m.step(&id, 0, &SimAction::new("open email app")).await }));
        }
        let mut ids: Vec<NodeId> = Vec::new();
        for t in tasks {
            ids.push(t.await.unwrap().unwrap().node_id);
        }
        ids.sort();
        assert_eq!(ids, (1..=8).collect::<Vec<_>>());
        let tree = m.get(&id).await.unwrap();
        assert_eq!(tree.len(), 9);
        tree.check_invariants().unwrap();
    }

    #[tokio::test]
    async fn restart_reloads_from_store() {
        let dir = tempfile::tempdir().unwrap();
        let (m, png) = manager(Some(SessionStore::new(dir.path())));
        let t = m.create(&png, None).await.unwrap();
        let id = t.session_id().to_string();
        let out = m.step(&id, 0, &SimAction::new("open email app")).await.unwrap();
        let (m2, _) = manager(Some(SessionStore::new(dir.path())));
        assert_eq!(*m2.get(&id).await.unwrap(), *out.tree);
        assert_eq!(m2.list().await.unwrap().len(), 1);
        assert!(matches!(
            m2.get("nope").await,
            Err(SessionError::SessionNotFound(_))
        ));
    }

    #[tokio::test]
    async fn session_limit() {
        let (m, png) = manager(None);
        let m = m.with_max_sessions(1);
        m.create(&png, None).await.unwrap();
        assert_eq!(m.create(&png, None).await.unwrap_err(), SessionError::TooManySessions { limit: 1 });
    }
}
