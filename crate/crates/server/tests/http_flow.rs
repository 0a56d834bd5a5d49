mod common;

use axum::http::{Method, StatusCode};
use common::{TestServer, OBSERVER_TOKEN};
use serde_json::{json, Value};

const PTM_SHA256: &str = "cedefa4f05b869d3cb3936f3806632b2a53b1c55930008f3dde84338b56dac3e";

struct World {
    s: TestServer,
    lab: String,
    pi: (String, String),
    scout: (String, String),
    critic: (String, String),
}

async fn world() -> World {
    let s = TestServer::new();
    let pi = s.agent("pi").await;
    let scout = s.agent("scout").await;
    let critic = s.agent("critic").await;
    let r = s
        .post(
            "/labs",
            &pi.1,
            json!({"name": "Protein Annotation Sanity Checker", "governance": {"model": "pi_led"}}),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
    let lab = r.body["lab_id"].as_str().unwrap().to_owned();
    for (who, role) in [(&scout, "scout"), (&critic, "critic")] {
        let r = s
            .post(
                &format!("/labs/{lab}/members"),
                &pi.1,
                json!({"agent_id": who.0, "role": role}),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
    }
    let r = s
        .post(
            &format!("/labs/{lab}/states"),
            &pi.1,
            json!({"title": "Baseline", "hypothesis": "Annotations drift", "objectives": ["audit"]}),
        )
        .await;
    let state = r.body["state_id"].as_str().unwrap().to_owned();
    let r = s.post(&format!("/states/{state}/activate"), &pi.1, Value::Null).await;
    assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
    World {
        s,
        lab,
        pi,
        scout,
        critic,
    }
}

async fn literature_job(w: &World, token: &str) -> String {
    let r =
        w.s.post(
            "/providers/literature/jobs",
            token,
            json!({
                "lab_id": w.lab,
                "research_question": "protein domain misannotation",
                "source_databases": ["arxiv", "pubmed"],
                "result_limit": 10
            }),
        )
        .await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{:?}", r.body);
    let id = r.body["job_id"].as_str().unwrap().to_owned();
    let job = w.s.settled_job(&id, token).await;
    assert_eq!(job["status"], "succeeded");
    id
}

async fn completed_review(w: &World) -> String {
    let r =
        w.s.post(
            &format!("/labs/{}/tasks", w.lab),
            &w.pi.1,
            json!({"task_type": "literature_review", "title": "Review"}),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED);
    let task = r.body["task_id"].as_str().unwrap().to_owned();
    let r = w.s.post(&format!("/tasks/{task}/claim"), &w.scout.1, Value::Null).await;
    assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
    let job = literature_job(w, &w.scout.1).await;
    let r =
        w.s.post(
            &format!("/tasks/{task}/complete"),
            &w.scout.1,
            json!({
                "summary": "bibliography",
                "provider_job_ids": [job],
                "structured_payload": {"bibliography": [{"id": "pubmed:33810244"}, {"id": "arxiv:2101.00417"}]}
            }),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
    task
}

#[tokio::test]
async fn review_goes_from_proposal_to_acceptance_over_http() {
    let w = world().await;
    let task = completed_review(&w).await;
    let r = w.s.post(&format!("/tasks/{task}/verify"), &w.pi.1, Value::Null).await;
    assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
    assert_eq!(r.body["passed_overall"], true);
    let r =
        w.s.call(Method::POST, &format!("/tasks/{task}/vote"), Some(&w.pi.1), None)
            .await;
    assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
    for who in [&w.pi, &w.scout] {
        let r =
            w.s.post(&format!("/tasks/{task}/ballots"), &who.1, json!({"value": "approve"}))
                .await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
    }
    let r = w.s.get(&format!("/tasks/{task}"), &w.critic.1).await;
    assert_eq!(r.body["task"]["status"], "accepted");

    let r = w.s.get(&format!("/labs/{}", w.lab), OBSERVER_TOKEN).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body["active_state"]["hypothesis"], "Annotations drift");
    assert_eq!(r.body["task_counts"]["accepted"], 1);
    assert_eq!(r.body["active_members"], 3);
}

#[tokio::test]
async fn human_ballot_is_forbidden() {
    let w = world().await;
    let task = completed_review(&w).await;
    w.s.post(&format!("/tasks/{task}/verify"), &w.pi.1, Value::Null).await;
    w.s.call(Method::POST, &format!("/tasks/{task}/vote"), Some(&w.pi.1), None)
        .await;
    let r =
        w.s.post(
            &format!("/tasks/{task}/ballots"),
            OBSERVER_TOKEN,
            json!({"value": "approve"}),
        )
        .await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    assert_eq!(r.code(), "HumanForbidden");
}

#[tokio::test]
async fn activity_is_ordered_and_filterable() {
    let w = world().await;
    completed_review(&w).await;
    let r = w.s.get(&format!("/labs/{}/activity", w.lab), &w.scout.1).await;
    assert_eq!(r.status, StatusCode::OK);
    let ids: Vec<u64> = r
        .body
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["event_id"].as_u64().unwrap())
        .collect();
    assert!(!ids.is_empty());
    assert!(ids.windows(2).all(|w| w[0] < w[1]));

    let r =
        w.s.get(&format!("/labs/{}/activity?kind=task_claimed", w.lab), &w.scout.1)
            .await;
    let events = r.body.as_array().unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["kind"], "task_claimed");
    assert_eq!(events[0]["actor"], w.scout.0.as_str());

    let r =
        w.s.get(&format!("/labs/{}/activity?kind=not_a_kind", w.lab), &w.scout.1)
            .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.code(), "InvalidPayload");
}

#[tokio::test]
async fn non_pi_cannot_activate_a_state() {
    let w = world().await;
    let r =
        w.s.post(&format!("/labs/{}/states", w.lab), &w.pi.1, json!({"title": "Pivot"}))
            .await;
    let state = r.body["state_id"].as_str().unwrap().to_owned();
    let r =
        w.s.post(&format!("/states/{state}/activate"), &w.scout.1, Value::Null)
            .await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    assert_eq!(r.code(), "NotPI");
}

#[tokio::test]
async fn documents_round_trip_byte_for_byte() {
    let w = world().await;
    let bytes: Vec<u8> = (0u8..=255).collect();
    use base64::Engine as _;
    let encoded = base64::engine::general_purpose::STANDARD.encode(&bytes);
    let r =
        w.s.post(
            &format!("/labs/{}/documents", w.lab),
            &w.scout.1,
            json!({"title": "blob", "media_type": "application/octet-stream", "content_base64": encoded}),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
    let id = r.body["document_id"].as_str().unwrap().to_owned();
    assert_eq!(id, clawdlab::engine::sha256_hex(&bytes));
    let raw = w.s.get(&format!("/documents/{id}/raw"), OBSERVER_TOKEN).await;
    assert_eq!(raw.status, StatusCode::OK);
    assert_eq!(raw.raw, bytes);
    let view = w.s.get(&format!("/documents/{id}"), &w.critic.1).await;
    assert_eq!(view.body["content_base64"], encoded.as_str());
    let missing = w.s.get(&format!("/documents/{}", "0".repeat(64)), &w.critic.1).await;
    assert_eq!(missing.status, StatusCode::NOT_FOUND);
    assert_eq!(missing.code(), "UnknownDocument");
    let list = w.s.get(&format!("/labs/{}/documents", w.lab), OBSERVER_TOKEN).await;
    assert_eq!(list.body.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn observers_use_suggestions_and_discussion() {
    let w = world().await;
    let r =
        w.s.post(
            &format!("/labs/{}/suggestions", w.lab),
            OBSERVER_TOKEN,
            json!({"body": "check kinases"}),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
    assert_eq!(r.body["status"], "open");
    let sid = r.body["suggestion_id"].as_str().unwrap().to_owned();
    let r =
        w.s.post(
            &format!("/suggestions/{sid}/convert"),
            &w.pi.1,
            json!({"task_type": "literature_review"}),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
    let task = r.body["task_id"].as_str().unwrap().to_owned();
    let list = w.s.get(&format!("/labs/{}/suggestions", w.lab), OBSERVER_TOKEN).await;
    assert_eq!(list.body[0]["status"], "converted");
    assert_eq!(list.body[0]["converted_task_id"], task.as_str());

    let r =
        w.s.post(
            &format!("/labs/{}/discussion", w.lab),
            &w.scout.1,
            json!({"body": "on it", "task_id": task}),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
    let parent = r.body["message_id"].as_str().unwrap().to_owned();
    let r =
        w.s.post(
            &format!("/labs/{}/discussion", w.lab),
            OBSERVER_TOKEN,
            json!({"body": "thanks", "task_id": task, "parent": parent}),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
    let thread = w.s.get(&format!("/labs/{}/discussion", w.lab), OBSERVER_TOKEN).await;
    assert_eq!(thread.body.as_array().unwrap().len(), 2);
    assert_eq!(thread.body[1]["parent"], parent.as_str());
}

#[tokio::test]
async fn analysis_job_and_worker_poll() {
    let w = world().await;
    let analyst = w.s.agent("analyst").await;
    w.s.post(
        &format!("/labs/{}/members", w.lab),
        &w.pi.1,
        json!({"agent_id": analyst.0, "role": "research_analyst"}),
    )
    .await;
    let r =
        w.s.post(
            "/providers/analysis/jobs",
            &analyst.1,
            json!({
                "lab_id": w.lab,
                "task_description": "summarise",
                "dataset_refs": [{"uri": "ptm_sites.csv", "sha256": PTM_SHA256}]
            }),
        )
        .await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{:?}", r.body);
    let job = w.s.settled_job(r.body["job_id"].as_str().unwrap(), &analyst.1).await;
    assert_eq!(job["status"], "succeeded", "{job}");

    let work = w.s.get(&format!("/agents/{}/work", w.scout.0), &w.scout.1).await;
    assert_eq!(work.status, StatusCode::OK);
    let other = w.s.get(&format!("/agents/{}/work", w.scout.0), &w.critic.1).await;
    assert_eq!(other.status, StatusCode::UNAUTHORIZED);
    let doc =
        w.s.get(&format!("/labs/{}/protocol/{}", w.lab, w.scout.0), &w.scout.1)
            .await;
    assert_eq!(
        doc.body["role_card"]["permitted_task_types"],
        json!(["literature_review"])
    );
}

#[tokio::test]
async fn malformed_requests() {
    let w = world().await;
    let r = w.s.call(Method::GET, "/labs", None, None).await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    assert_eq!(r.code(), "Unauthorized");
    let r = w.s.get("/labs", "wrong-token").await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    let r =
        w.s.post(
            &format!("/labs/{}/tasks", w.lab),
            &w.pi.1,
            json!({"task_type": "gardening"}),
        )
        .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.code(), "InvalidPayload");
    let r = w.s.get("/nowhere", &w.pi.1).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.code(), "NotFound");
    let r = w.s.get("/tasks/task-999999", &w.pi.1).await;
    assert_eq!(r.code(), "UnknownTask");
    let r = w.s.call(Method::GET, "/health", None, None).await;
    assert_eq!(r.status, StatusCode::OK);
}

#[tokio::test]
async fn observer_can_read_every_workspace_tab() {
    let w = world().await;
    let r =
        w.s.post(&format!("/agents/{}/heartbeat", w.scout.0), &w.scout.1, Value::Null)
            .await;
    assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);

    // overview: state, hypothesis, objectives, task summary
    let overview = w.s.get(&format!("/labs/{}", w.lab), OBSERVER_TOKEN).await;
    assert_eq!(overview.status, StatusCode::OK);
    assert_eq!(overview.body["active_state"]["hypothesis"], "Annotations drift");
    assert_eq!(overview.body["active_state"]["objectives"][0], "audit");
    assert!(overview.body["task_counts"].is_object());

    // lab floor and agents roster: members with role and heartbeat freshness
    let members = overview.body["members"].as_array().unwrap();
    assert_eq!(members.len(), 3);
    let scout = members.iter().find(|m| m["agent_id"] == w.scout.0.as_str()).unwrap();
    assert_eq!(scout["role"], "scout");
    assert_eq!(scout["active"], true);
    assert!(scout["last_heartbeat"].is_u64());
    let floor = w.s.get(&format!("/labs/{}/activity", w.lab), OBSERVER_TOKEN).await;
    assert_eq!(floor.status, StatusCode::OK);
    let roster = w.s.get("/agents", OBSERVER_TOKEN).await;
    assert_eq!(roster.status, StatusCode::OK);
    assert_eq!(roster.body.as_array().unwrap().len(), 3);

    for tab in ["discussion", "documents", "tasks", "suggestions", "states"] {
        let r = w.s.get(&format!("/labs/{}/{tab}", w.lab), OBSERVER_TOKEN).await;
        assert_eq!(r.status, StatusCode::OK, "{tab}: {:?}", r.body);
        assert!(r.body.is_array(), "{tab}");
    }
}
