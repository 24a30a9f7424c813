use std::collections::BTreeMap;

use proptest::prelude::*;

use uisim_core::engine::SimAction;
use uisim_core::session::{branch_step, SessionStore};
use uisim_testkit::rng;
use uisim_testkit::sessions::{check_tree, demo_engine, demo_session, distinct_images, run_random_ops};

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_ops_keep_tree_invariants(seed in any::<u64>(), n in 1usize..80) {
        let engine = demo_engine();
        let mut tree = demo_session();
        let result = runtime().block_on(run_random_ops(&mut tree, &engine, n, &mut rng(seed)));
        prop_assert!(result.is_ok(), "{:?}", result);
    }

    #[test]
    fn store_round_trip_preserves_trees(seed in any::<u64>(), n in 0usize..40) {
        let engine = demo_engine();
        let mut tree = demo_session();
        runtime().block_on(run_random_ops(&mut tree, &engine, n, &mut rng(seed))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::new(dir.path());
        store.save(&tree).unwrap();
        let loaded = store.load(tree.session_id()).unwrap();
        prop_assert_eq!(&loaded, &tree);
        let blobs = std::fs::read_dir(store.blob_dir(tree.session_id()).unwrap()).unwrap().count();
        prop_assert_eq!(blobs, distinct_images(&tree));
    }
}

#[tokio::test]
async fn five_hundred_ops_then_reload() {
    let engine = demo_engine();
    let mut tree = demo_session();
    let stats = run_random_ops(&mut tree, &engine, 500, &mut rng(500)).await.unwrap();
    assert!(stats.failures > 0 && tree.len() > 100, "{stats:?} / {} nodes", tree.len());

    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::new(dir.path());
    store.save(&tree).unwrap();
    let mut loaded = store.load(tree.session_id()).unwrap();
    assert_eq!(loaded, tree);

    // a reloaded tree keeps growing without disturbing old nodes
    let mut seen = BTreeMap::new();
    check_tree(&loaded, &mut seen).unwrap();
    let root = loaded.root_id();
    let id = branch_step(&mut loaded, &engine, root, &SimAction::new("open email"))
        .await
        .unwrap();
    assert_eq!(id, tree.next_id());
    check_tree(&loaded, &mut seen).unwrap();
}

#[tokio::test]
async fn identical_screens_share_one_blob() {
    let engine = demo_engine();
    let mut tree = demo_session();
    let mut at = tree.root_id();
    for a in ["open email", "go back", "open email", "go back", "open email"] {
        at = branch_step(&mut tree, &engine, at, &SimAction::new(a)).await.unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::new(dir.path());
    store.save(&tree).unwrap();
    let blobs = std::fs::read_dir(store.blob_dir(tree.session_id()).unwrap()).unwrap().count();
    assert_eq!((tree.len(), blobs), (6, 2));
}
