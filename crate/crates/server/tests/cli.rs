use std::process::Command;
use std::sync::Arc;

use clawdlab::providers::BackendConfig;
use clawdlab::Platform;
use clawdlab_server::{ServerConfig, StoreConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clawdlab"))
}

#[test]
fn missing_config_exits_nonzero_with_a_message() {
    let out = bin()
        .args(["serve", "--config", "/definitely/not/here.toml"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("not/here.toml"), "{stderr}");
}

#[test]
fn malformed_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "listen_address = [").unwrap();
    let out = bin().args(["serve", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn defaults_apply_when_keys_are_absent() {
    let c = ServerConfig::parse("").unwrap();
    assert_eq!(c.engine.heartbeat_ttl_seconds, 300);
    assert_eq!(c.engine.min_accepted_sources, 2);
    assert_eq!(c.engine.claim_threshold, 3);
    assert_eq!(c.store, StoreConfig::InMemory);
    assert_eq!(c.providers.literature, BackendConfig::Stub { fixture: None });

    let c = ServerConfig::parse(
        r#"
        listen_address = "0.0.0.0:9000"
        heartbeat_ttl_seconds = 120
        claim_threshold = 5

        [store]
        kind = "file_backed"
        path = "/tmp/lab"

        [providers.literature]
        backend = "http"
        base_url = "http://search.internal"
        credential = { env = "LIT_KEY" }

        [[observers]]
        id = "observer-1"
        token = "t"
        "#,
    )
    .unwrap();
    assert_eq!(c.engine.heartbeat_ttl_seconds, 120);
    assert_eq!(c.engine.claim_threshold, 5);
    assert_eq!(c.engine.observers.len(), 1);
    assert!(matches!(c.store, StoreConfig::FileBacked { .. }));
    assert!(matches!(c.providers.literature, BackendConfig::Http { .. }));
    assert!(ServerConfig::parse("heartbeat_ttl_seconds = 0").is_err());
}

#[test]
fn file_backed_state_survives_restart_and_cli_tools_agree() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let config_path = dir.path().join("server.toml");
    std::fs::write(
        &config_path,
        format!(
            "[store]\nkind = \"file_backed\"\npath = {:?}\n",
            store.to_str().unwrap()
        ),
    )
    .unwrap();
    let config = ServerConfig::load(&config_path).unwrap();

    let (hash, token) = {
        let platform = Platform::new(config.build_engine().unwrap());
        let mut e = platform.lock();
        let reg = e.register_agent("pi", "").unwrap();
        e.heartbeat(&reg.agent.agent_id).unwrap();
        let lab = e
            .create_lab(&reg.agent.agent_id, clawdlab::governance::NewLab::pi_led("lab"))
            .unwrap()
            .lab_id;
        e.create_state(&lab, "s", "h", vec![], &reg.agent.agent_id).unwrap();
        (e.state_hash(), reg.auth_token)
    };

    let platform = Arc::new(Platform::new(config.build_engine().unwrap()));
    assert_eq!(platform.lock().state_hash(), hash);
    assert!(platform.lock().authenticate(&token).is_ok());

    let out = bin().arg("replay").arg(store.join("events.jsonl")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), format!("events=2 state_hash={hash}"));

    let snap_path = dir.path().join("snap.json");
    let out = bin()
        .args(["snapshot", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&snap_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snap: clawdlab::docstore::Snapshot =
        serde_json::from_str(&std::fs::read_to_string(&snap_path).unwrap()).unwrap();
    assert_eq!(snap.events.len(), 2);
    assert_eq!(snap.registry.agents.len(), 1);
}
