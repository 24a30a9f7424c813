mod common;

use std::collections::BTreeSet;

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use common::*;
use uisim_core::layout::parse_layout;
use uisim_remote::stub::{PredictMode, StubConfig, StubServer, StubStats};
use uisim_service::config::ServiceConfig;

async fn post_png(c: &Client, url: &str, png: Vec<u8>) -> reqwest::Response {
    c.post(format!("{url}/v1/sessions"))
        .header("content-type", "image/png")
        .body(png)
        .send()
        .await
        .unwrap()
}

async fn json_of(r: reqwest::Response) -> Value {
    r.json().await.unwrap()
}

async fn step(c: &Client, url: &str, sid: &str, from: u64, action: Value) -> reqwest::Response {
    c.post(format!("{url}/v1/sessions/{sid}/nodes/{from}/step"))
        .json(&json!({ "action": action }))
        .send()
        .await
        .unwrap()
}

async fn assert_problem(r: reqwest::Response, status: u16, code: &str) -> Value {
    assert_eq!(r.status().as_u16(), status);
    assert_eq!(r.headers()["content-type"], "application/problem+json");
    let body = json_of(r).await;
    assert_eq!(body["code"], code, "{body}");
    body
}

#[tokio::test]
async fn healthz_reports_backend_reachability() {
    let store = tempfile::tempdir().unwrap();
    let stub = start_stub().await;
    let svc = Service::start(&stub_config(&stub, store.path())).await;
    let c = Client::new();
    let r = c.get(format!("{}/healthz", svc.url)).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let body = json_of(r).await;
    assert_eq!(body["status"], "ok");
    assert_eq!(body["predictor"]["reachable"], true);
    assert_eq!(body["renderer"]["backend"]["name"], "remote-renderer");
    drop(stub);
    tokio::time::sleep(std::time::Duration::from_millis(50)).await;
    let r = c.get(format!("{}/healthz", svc.url)).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(json_of(r).await["status"], "degraded");
    svc.stop().await;
}

#[tokio::test]
async fn full_loop_matches_in_process_oracles() {
    let store = tempfile::tempdir().unwrap();
    let stub = start_stub().await;
    let svc = Service::start(&stub_config(&stub, store.path())).await;
    let (c, url) = (Client::new(), svc.url.clone());

    let r = post_png(&c, &url, screen_png("home")).await;
    assert_eq!(r.status(), StatusCode::CREATED);
    let sid = r.headers()["location"].to_str().unwrap().rsplit('/').next().unwrap().to_string();
    let created = json_of(r).await;
    assert_eq!(created["session_id"], sid.as_str());
    assert_eq!(created["node_count"], 1);

    let tree = json_of(c.get(format!("{url}/v1/sessions/{sid}")).send().await.unwrap()).await;
    assert_eq!(tree["nodes"].as_array().unwrap().len(), 1);
    assert_eq!(tree["nodes"][0]["parent_id"], Value::Null);

    let r = step(&c, &url, &sid, 0, json!("open email app")).await;
    assert_eq!(r.status(), StatusCode::CREATED);
    let s = json_of(r).await;
    assert_eq!(s["node"]["node_id"], 1);
    assert_eq!(s["node"]["parent_id"], 0);
    assert_eq!(s["node"]["screen_id"], "inbox");
    assert_eq!(s["node"]["action"]["text"], "open email app");

    let r = c.get(format!("{url}/v1/sessions/{sid}/nodes/1/image")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.headers()["content-type"], "image/png");
    let etag = r.headers()["etag"].to_str().unwrap().to_string();
    let png = r.bytes().await.unwrap().to_vec();
    assert_eq!(png, screen_png("inbox"));
    assert_eq!(etag, format!("\"{}\"", hex::encode(Sha256::digest(&png))));
    let r = c
        .get(format!("{url}/v1/sessions/{sid}/nodes/1/image"))
        .header("if-none-match", &etag)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::NOT_MODIFIED);

    let r = c.get(format!("{url}/v1/sessions/{sid}/nodes/1/layout")).send().await.unwrap();
    assert!(r.headers()["content-type"].to_str().unwrap().starts_with("text/plain"));
    let layout = parse_layout(&r.text().await.unwrap()).unwrap();
    assert!(layout.structurally_eq(&graph_screen("inbox")));

    let r = c
        .post(format!("{url}/v1/sessions/{sid}/rollout"))
        .json(&json!({ "start_node": 1, "actions": ["compose", "send", {"text": "search"}] }))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let ro = json_of(r).await;
    let created: Vec<&Value> = ro["created"].as_array().unwrap().iter().collect();
    let screens: Vec<&str> = created.iter().map(|n| n["screen_id"].as_str().unwrap()).collect();
    assert_eq!(screens, ["compose", "inbox", "search"]);
    assert_eq!(created[1]["parent_id"], created[0]["node_id"]);
    for n in &created {
        let id = n["node_id"].as_u64().unwrap();
        let png = c
            .get(format!("{url}/v1/sessions/{sid}/nodes/{id}/image"))
            .send()
            .await
            .unwrap()
            .bytes()
            .await
            .unwrap();
        assert_eq!(png.to_vec(), screen_png(n["screen_id"].as_str().unwrap()));
    }

    let r = c
        .post(format!("{url}/v1/sessions/{sid}/rollout"))
        .json(&json!({ "start_node": 1, "actions": ["fly to the moon", "compose"], "stop_on_error": false }))
        .send()
        .await
        .unwrap();
    let ro = json_of(r).await;
    assert_eq!(ro["created"].as_array().unwrap().len(), 1);
    assert_eq!(ro["failures"][0]["action_index"], 0);
    assert_eq!(ro["failures"][0]["problem"]["code"], "no_transition");

    let tree = json_of(c.get(format!("{url}/v1/sessions/{sid}")).send().await.unwrap()).await;
    assert_eq!(tree["node_count"], 6);
    assert_eq!(tree["edge_count"], 5);
    let node = json_of(c.get(format!("{url}/v1/sessions/{sid}/nodes/1")).send().await.unwrap()).await;
    assert_eq!(node["children"], json!([2, 5]));

    let list = json_of(c.get(format!("{url}/v1/sessions")).send().await.unwrap()).await;
    assert_eq!(list["sessions"][0]["session_id"], sid.as_str());
    svc.stop().await;
}

#[tokio::test]
async fn errors_are_problem_documents() {
    let store = tempfile::tempdir().unwrap();
    let stub = start_stub().await;
    let svc = Service::start(&stub_config(&stub, store.path())).await;
    let (c, url) = (Client::new(), svc.url.clone());

    assert_problem(post_png(&c, &url, b"not an image".to_vec()).await, 400, "invalid_image").await;
    let r = c.get(format!("{url}/v1/sessions/nope")).send().await.unwrap();
    assert_problem(r, 404, "session_not_found").await;

    let sid = json_of(post_png(&c, &url, screen_png("home")).await).await["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    assert_problem(step(&c, &url, &sid, 99, json!("open email app")).await, 404, "node_not_found").await;
    let p = assert_problem(step(&c, &url, &sid, 0, json!("fly to the moon")).await, 422, "no_transition").await;
    assert_eq!(p["stage"], "layout");
    assert_eq!(p["detail"]["from_node"], 0);
    let r = c
        .post(format!("{url}/v1/sessions/{sid}/nodes/0/step"))
        .header("content-type", "application/json")
        .body("{\"act\":1}")
        .send()
        .await
        .unwrap();
    assert_problem(r, 400, "invalid_request").await;
    let r = step(&c, &url, &sid, 0, json!({"text": "tap", "kind": "TAP"})).await;
    assert_problem(r, 400, "invalid_request").await;
    let r = c
        .post(format!("{url}/v1/sessions/{sid}/rollout"))
        .json(&json!({ "start_node": 0, "actions": [] }))
        .send()
        .await
        .unwrap();
    assert_problem(r, 400, "invalid_request").await;
    let r = c.get(format!("{url}/v1/sessions/{sid}/nodes/7/layout")).send().await.unwrap();
    assert_problem(r, 404, "node_not_found").await;
    let r = c.get(format!("{url}/v2/whatever")).send().await.unwrap();
    assert_problem(r, 404, "not_found").await;

    let tree = json_of(c.get(format!("{url}/v1/sessions/{sid}")).send().await.unwrap()).await;
    assert_eq!(tree["node_count"], 1);
    svc.stop().await;
}

#[tokio::test]
async fn json_create_carries_initial_layout() {
    let store = tempfile::tempdir().unwrap();
    let stub = start_stub().await;
    let svc = Service::start(&stub_config(&stub, store.path())).await;
    let (c, url) = (Client::new(), svc.url.clone());
    let body = json!({
        "image_png_base64": uisim_remote::encode_base64(&screen_png("home")),
        "layout_dsl": graph_screen("home").to_dsl(),
    });
    let r = c.post(format!("{url}/v1/sessions")).json(&body).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let sid = json_of(r).await["session_id"].as_str().unwrap().to_string();
    let dsl = c
        .get(format!("{url}/v1/sessions/{sid}/nodes/0/layout"))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert!(parse_layout(&dsl).unwrap().structurally_eq(&graph_screen("home")));

    let bad = json!({ "image_png_base64": uisim_remote::encode_base64(&screen_png("home")), "layout_dsl": "BUTTON b (0.2,0.3,0.1,0.4)" });
    let r = c.post(format!("{url}/v1/sessions")).json(&bad).send().await.unwrap();
    assert_problem(r, 400, "invalid_layout").await;
    let r = c
        .post(format!("{url}/v1/sessions"))
        .json(&json!({ "image_png_base64": "%%%" }))
        .send()
        .await
        .unwrap();
    assert_problem(r, 400, "invalid_image").await;
    svc.stop().await;
}

#[tokio::test]
async fn malformed_prediction_is_502_without_render() {
    let store = tempfile::tempdir().unwrap();
    let stub = StubServer::start(StubConfig {
        predict: PredictMode::Canned("BUTTON broken (0,0".into()),
        ..StubConfig::demo()
    })
    .await
    .unwrap();
    let svc = Service::start(&stub_config(&stub, store.path())).await;
    let (c, url) = (Client::new(), svc.url.clone());
    let sid = json_of(post_png(&c, &url, screen_png("home")).await).await["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    let p = assert_problem(step(&c, &url, &sid, 0, json!("open email app")).await, 502, "invalid_prediction").await;
    assert_eq!(p["detail"]["raw"], "BUTTON broken (0,0");
    assert_eq!(p["stage"], "layout");
    assert_eq!(StubStats::get(&stub.stats().render), 0);
    svc.stop().await;
}

#[tokio::test]
async fn unavailable_backend_is_503() {
    let store = tempfile::tempdir().unwrap();
    let stub = StubServer::start(StubConfig {
        predict: PredictMode::Status(500),
        ..StubConfig::demo()
    })
    .await
    .unwrap();
    let mut config = stub_config(&stub, store.path());
    config.predict_timeout_secs = 5.0;
    let svc = Service::start(&config).await;
    let (c, url) = (Client::new(), svc.url.clone());
    let sid = json_of(post_png(&c, &url, screen_png("home")).await).await["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    let p = assert_problem(step(&c, &url, &sid, 0, json!("open email app")).await, 503, "backend_unavailable").await;
    assert_eq!(p["detail"]["backend"], "remote-predictor");
    svc.stop().await;
}

#[tokio::test]
async fn restart_preserves_all_sessions() {
    let store = tempfile::tempdir().unwrap();
    let stub = start_stub().await;
    let config = stub_config(&stub, store.path());
    let c = Client::new();

    let svc = Service::start(&config).await;
    let mut before = Vec::new();
    for (start, actions) in [("home", vec!["open email app", "compose"]), ("home", vec!["open settings"])] {
        let sid = json_of(post_png(&c, &svc.url, screen_png(start)).await).await["session_id"]
            .as_str()
            .unwrap()
            .to_string();
        let mut at = 0;
        for a in actions {
            at = json_of(step(&c, &svc.url, &sid, at, json!(a)).await).await["node"]["node_id"]
                .as_u64()
                .unwrap();
        }
        let view = json_of(c.get(format!("{}/v1/sessions/{sid}", svc.url)).send().await.unwrap()).await;
        before.push((sid, view));
    }
    let images_before = c
        .get(format!("{}/v1/sessions/{}/nodes/2/image", svc.url, before[0].0))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    svc.stop().await;

    let svc = Service::start(&config).await;
    let list = json_of(c.get(format!("{}/v1/sessions", svc.url)).send().await.unwrap()).await;
    let ids: BTreeSet<&str> = list["sessions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["session_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, before.iter().map(|(s, _)| s.as_str()).collect());
    for (sid, view) in &before {
        let after = json_of(c.get(format!("{}/v1/sessions/{sid}", svc.url)).send().await.unwrap()).await;
        assert_eq!(&after, view);
    }
    let images_after = c
        .get(format!("{}/v1/sessions/{}/nodes/2/image", svc.url, before[0].0))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(images_before, images_after);
    let s = json_of(step(&c, &svc.url, &before[0].0, 0, json!("open browser")).await).await;
    assert_eq!(s["node"]["node_id"], 3);
    svc.stop().await;
}

#[tokio::test]
async fn session_limit_is_429() {
    let store = tempfile::tempdir().unwrap();
    let stub = start_stub().await;
    let config = ServiceConfig {
        max_sessions: 1,
        ..stub_config(&stub, store.path())
    };
    let svc = Service::start(&config).await;
    let c = Client::new();
    assert_eq!(post_png(&c, &svc.url, screen_png("home")).await.status(), StatusCode::CREATED);
    assert_problem(post_png(&c, &svc.url, screen_png("home")).await, 429, "too_many_sessions").await;
    svc.stop().await;
}

#[tokio::test]
async fn concurrent_steps_get_distinct_ids() {
    let store = tempfile::tempdir().unwrap();
    let stub = start_stub().await;
    let svc = Service::start(&stub_config(&stub, store.path())).await;
    let c = Client::new();
    let sid = json_of(post_png(&c, &svc.url, screen_png("home")).await).await["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    let actions = ["open email app", "open settings", "open browser", "email", "settings", "browser"];
    let handles: Vec<_> = actions
        .iter()
        .map(|a| {
            let (c, url, sid) = (c.clone(), svc.url.clone(), sid.clone());
            let a = a.to_string();
            tokio::spawn(async move { json_of(step(&c, &url, &sid, 0, json!(a)).await).await })
        })
        .collect();
    let mut ids = BTreeSet::new();
    for h in handles {
        ids.insert(h.await.unwrap()["node"]["node_id"].as_u64().unwrap());
    }
    assert_eq!(ids, (1..=6).collect());
    let tree = json_of(c.get(format!("{}/v1/sessions/{sid}", svc.url)).send().await.unwrap()).await;
    assert_eq!(tree["node_count"], 7);
    assert_eq!(tree["nodes"][0]["children"], json!([1, 2, 3, 4, 5, 6]));
    svc.stop().await;
}

#[tokio::test]
async fn cors_preflight_for_configured_origin() {
    let store = tempfile::tempdir().unwrap();
    let stub = start_stub().await;
    let config = ServiceConfig {
        cors_origins: vec!["http://console.local".into()],
        ..stub_config(&stub, store.path())
    };
    let svc = Service::start(&config).await;
    let c = Client::new();
    let r = c
        .request(reqwest::Method::OPTIONS, format!("{}/v1/sessions", svc.url))
        .header("origin", "http://console.local")
        .header("access-control-request-method", "POST")
        .send()
        .await
        .unwrap();
    assert_eq!(r.headers()["access-control-allow-origin"], "http://console.local");
    let r = c
        .get(format!("{}/v1/sessions", svc.url))
        .header("origin", "http://elsewhere.local")
        .send()
        .await
        .unwrap();
    assert!(r.headers().get("access-control-allow-origin").is_none());
    svc.stop().await;
}
