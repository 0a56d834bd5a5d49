#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use clawdlab::engine::ObserverConfig;
use clawdlab::{Engine, EngineConfig, Platform, VirtualClock};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub const T0: u64 = 1_700_000_000_000;
pub const OBSERVER_TOKEN: &str = "observer-secret-token";

pub struct TestServer {
    pub router: Router,
    pub platform: Arc<Platform>,
    pub clock: VirtualClock,
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
    pub raw: Vec<u8>,
}

impl Reply {
    pub fn code(&self) -> &str {
        self.body["code"].as_str().unwrap_or("-")
    }
}

pub fn observer_config() -> EngineConfig {
    EngineConfig {
        observers: vec![ObserverConfig {
            id: "observer-1".into(),
            token: OBSERVER_TOKEN.into(),
        }],
        ..EngineConfig::default()
    }
}

impl TestServer {
    pub fn new() -> Self {
        Self::with_engine(|b| b)
    }

    pub fn with_engine(f: impl FnOnce(clawdlab::EngineBuilder) -> clawdlab::EngineBuilder) -> Self {
        let clock = VirtualClock::new(T0);
        let builder = Engine::builder()
            .config(observer_config())
            .clock(Arc::new(clock.clone()))
            .seed(11);
        let engine = f(builder).build().unwrap();
        let platform = Arc::new(Platform::new(engine));
        Self {
            router: clawdlab_server::router(Arc::clone(&platform)),
            platform,
            clock,
        }
    }

    pub async fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(serde_json::to_vec(&b).unwrap())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let raw = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        let body = serde_json::from_slice(&raw).unwrap_or(Value::Null);
        Reply { status, body, raw }
    }

    pub async fn get(&self, path: &str, token: &str) -> Reply {
        self.call(Method::GET, path, Some(token), None).await
    }

    pub async fn post(&self, path: &str, token: &str, body: Value) -> Reply {
        self.call(Method::POST, path, Some(token), Some(body)).await
    }

    /// Registers and heartbeats; returns (agent_id, token).
    pub async fn agent(&self, name: &str) -> (String, String) {
        let r = self
            .call(
                Method::POST,
                "/agents",
                None,
                Some(serde_json::json!({"display_name": name, "soul_document": "# soul"})),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
        let id = r.body["agent"]["agent_id"].as_str().unwrap().to_owned();
        let token = r.body["auth_token"].as_str().unwrap().to_owned();
        let hb = self.post(&format!("/agents/{id}/heartbeat"), &token, Value::Null).await;
        assert_eq!(hb.status, StatusCode::OK, "{:?}", hb.body);
        (id, token)
    }

    /// Runs every queued job to completion on the calling thread.
    pub fn drain_jobs(&self) {
        for r in self.platform.run_queued_jobs() {
            let _ = r;
        }
    }

    /// Polls a job until it leaves queued/running.
    pub async fn settled_job(&self, job_id: &str, token: &str) -> Value {
        for _ in 0..200 {
            let r = self.get(&format!("/providers/jobs/{job_id}"), token).await;
            let status = r.body["status"].as_str().unwrap_or("").to_owned();
            if status == "succeeded" || status == "failed" {
                return r.body;
            }
            self.drain_jobs();
            tokio::time::sleep(std::time::Duration::from_millis(5)).await;
        }
        panic!("job {job_id} never settled");
    }
}
