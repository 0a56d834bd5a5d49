//! Every route against every kind of caller, compared with the table in
//! `tests/fixtures/authz_matrix.txt`. Each cell runs against a freshly
//! built world so cells cannot influence one another.
//!
//! Regenerate with `UPDATE_SNAPSHOTS=1` and review the diff by hand.

mod common;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use axum::http::Method;
use clawdlab::commons::DiscussionScope;
use clawdlab::domain::{RoleArchetype, TaskType};
use clawdlab::governance::NewLab;
use clawdlab::providers::LiteratureQuery;
use clawdlab::tasklife::TaskResult;
use clawdlab::{Actor, AgentId};
use common::{TestServer, OBSERVER_TOKEN};
use serde_json::{json, Value};

const PRINCIPALS: [&str; 6] = ["anon", "human", "outsider", "scout", "critic", "pi"];

struct World {
    s: TestServer,
    ids: BTreeMap<&'static str, String>,
    tokens: BTreeMap<&'static str, String>,
}

fn world() -> World {
    let s = TestServer::new();
    let mut ids = BTreeMap::new();
    let mut tokens = BTreeMap::new();
    {
        let mut e = s.platform.lock();
        let mut agent = |e: &mut clawdlab::Engine, name: &'static str| -> AgentId {
            let reg = e.register_agent(name, "").unwrap();
            e.heartbeat(&reg.agent.agent_id).unwrap();
            tokens.insert(name, reg.auth_token);
            reg.agent.agent_id
        };
        let pi = agent(&mut e, "pi");
        let scout = agent(&mut e, "scout");
        let critic = agent(&mut e, "critic");
        let outsider = agent(&mut e, "outsider");
        let newcomer = agent(&mut e, "newcomer");

        let human = Actor::human("observer-1");
        let post = e.create_post(&human, "idea", "body").unwrap().post_id;
        for a in [&scout, &critic, &outsider] {
            e.upvote_post(&post, &Actor::agent(a)).unwrap();
        }
        let lab = e.create_lab(&pi, NewLab::pi_led("lab")).unwrap().lab_id;
        e.add_member(&lab, &scout, RoleArchetype::Scout, &pi).unwrap();
        e.add_member(&lab, &critic, RoleArchetype::Critic, &pi).unwrap();
        let s1 = e.create_state(&lab, "s1", "h", vec![], &pi).unwrap().state_id;
        e.activate_state(&s1, &pi).unwrap();
        let s2 = e.create_state(&lab, "s2", "h", vec![], &pi).unwrap().state_id;

        let job = e
            .submit_literature_job(
                &scout,
                &lab,
                LiteratureQuery {
                    research_question: "protein domain misannotation".into(),
                    source_databases: ["arxiv".to_string(), "pubmed".to_string()].into(),
                    result_limit: 5,
                },
            )
            .unwrap()
            .job_id;
        e.execute_job(&job).unwrap();
        let mut result = TaskResult {
            summary: "bib".into(),
            provider_job_ids: vec![job.clone()],
            ..TaskResult::default()
        };
        result.structured_payload.insert(
            "bibliography".into(),
            json!([{"id": "pubmed:33810244"}, {"id": "arxiv:2101.00417"}]),
        );
        let review = |e: &mut clawdlab::Engine, claim: bool, complete: bool| {
            let t = e
                .propose_task(&lab, TaskType::LiteratureReview, "review", "", &pi)
                .unwrap()
                .task_id;
            if claim {
                e.claim_task(&t, &scout).unwrap();
            }
            if complete {
                e.complete_task(&t, &scout, result.clone()).unwrap();
            }
            t
        };
        let t_prop = review(&mut e, false, false);
        let t_ip = review(&mut e, true, false);
        let t_done = review(&mut e, true, true);
        let t_verified = review(&mut e, true, true);
        e.verify_task(&t_verified, &pi).unwrap();
        let t_vote = review(&mut e, true, true);
        e.verify_task(&t_vote, &pi).unwrap();
        e.initiate_vote(&t_vote, &pi, None).unwrap();
        let t_crit = review(&mut e, true, true);
        let critique = e
            .file_critique(&t_crit, &critic, vec!["thin".into()], None)
            .unwrap()
            .critique_id;
        let suggestion = e.post_suggestion(&lab, &human, "idea").unwrap().suggestion_id;
        let doc = e
            .upload_document(&lab, &scout, "notes", b"# notes\n", "text/markdown")
            .unwrap()
            .document_id;
        e.post_message(&lab, &Actor::agent(&scout), DiscussionScope::Lab, "hi", None)
            .unwrap();

        for (k, v) in [
            ("pi_id", pi.0),
            ("scout_id", scout.0),
            ("newcomer_id", newcomer.0),
            ("post", post.0),
            ("lab", lab.0),
            ("s1", s1.0),
            ("s2", s2.0),
            ("job", job.0),
            ("t_prop", t_prop.0),
            ("t_ip", t_ip.0),
            ("t_done", t_done.0),
            ("t_verified", t_verified.0),
            ("t_vote", t_vote.0),
            ("critique", critique.0),
            ("suggestion", suggestion.0),
            ("doc", doc.0),
        ] {
            ids.insert(k, v);
        }
    }
    tokens.insert("human", OBSERVER_TOKEN.into());
    World { s, ids, tokens }
}

fn fill(template: &str, ids: &BTreeMap<&'static str, String>) -> String {
    let mut out = template.to_owned();
    for (k, v) in ids {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

/// (method, path template, body template). Placeholders in braces refer to
/// ids created by `world()`.
fn requests() -> Vec<(Method, &'static str, Option<Value>)> {
    use Method as M;
    vec![
        (M::GET, "/health", None),
        (M::POST, "/agents", Some(json!({"display_name": "late"}))),
        (M::GET, "/agents", None),
        (M::GET, "/agents/{scout_id}", None),
        (M::POST, "/agents/{scout_id}/heartbeat", None),
        (M::GET, "/agents/{scout_id}/work", None),
        (M::GET, "/labs/{lab}/protocol/{scout_id}", None),
        (M::POST, "/forum/posts", Some(json!({"title": "t", "body": "b"}))),
        (M::GET, "/forum/posts", None),
        (M::GET, "/forum/posts/{post}", None),
        (M::POST, "/forum/posts/{post}/upvote", None),
        (M::POST, "/forum/posts/{post}/comments", Some(json!({"body": "c"}))),
        (M::POST, "/forum/posts/{post}/claim", None),
        (
            M::POST,
            "/labs",
            Some(json!({"name": "x", "governance": {"model": "pi_led"}})),
        ),
        (M::GET, "/labs", None),
        (M::GET, "/labs/{lab}", None),
        (
            M::POST,
            "/labs/{lab}/members",
            Some(json!({"agent_id": "{newcomer_id}", "role": "scout"})),
        ),
        (M::POST, "/labs/{lab}/states", Some(json!({"title": "s3"}))),
        (M::GET, "/labs/{lab}/states", None),
        (M::POST, "/states/{s2}/activate", None),
        (M::POST, "/states/{s1}/conclude", Some(json!({"conclusion": "proven"}))),
        (
            M::POST,
            "/labs/{lab}/tasks",
            Some(json!({"task_type": "literature_review", "title": "t"})),
        ),
        (M::GET, "/labs/{lab}/tasks", None),
        (M::GET, "/tasks/{t_prop}", None),
        (M::POST, "/tasks/{t_prop}/claim", None),
        (
            M::POST,
            "/tasks/{t_ip}/complete",
            Some(json!({"summary": "s", "provider_job_ids": ["{job}"],
                "structured_payload": {"bibliography": [{"id": "a"}, {"id": "b"}]}})),
        ),
        (M::POST, "/tasks/{t_done}/critiques", Some(json!({"issues": ["weak"]}))),
        (
            M::POST,
            "/critiques/{critique}/resolve",
            Some(json!({"disposition": "dismissed"})),
        ),
        (M::POST, "/tasks/{t_done}/verify", None),
        (M::POST, "/tasks/{t_verified}/vote", None),
        (M::POST, "/tasks/{t_vote}/ballots", Some(json!({"value": "approve"}))),
        (
            M::POST,
            "/tasks/{t_prop}/supersede",
            Some(json!({"successor": "{t_done}"})),
        ),
        (
            M::POST,
            "/providers/literature/jobs",
            Some(json!({"lab_id": "{lab}", "research_question": "protein",
                "source_databases": ["arxiv"], "result_limit": 3})),
        ),
        (
            M::POST,
            "/providers/analysis/jobs",
            Some(json!({"lab_id": "{lab}", "task_description": "d",
                "dataset_refs": [{"uri": "ptm_sites.csv",
                "sha256": "cedefa4f05b869d3cb3936f3806632b2a53b1c55930008f3dde84338b56dac3e"}]})),
        ),
        (M::GET, "/providers/jobs/{job}", None),
        (M::POST, "/labs/{lab}/suggestions", Some(json!({"body": "idea"}))),
        (M::GET, "/labs/{lab}/suggestions", None),
        (
            M::POST,
            "/suggestions/{suggestion}/convert",
            Some(json!({"task_type": "literature_review"})),
        ),
        (M::POST, "/suggestions/{suggestion}/decline", None),
        (M::POST, "/labs/{lab}/discussion", Some(json!({"body": "hello"}))),
        (M::GET, "/labs/{lab}/discussion", None),
        (M::GET, "/labs/{lab}/activity", None),
        (
            M::POST,
            "/labs/{lab}/documents",
            Some(json!({"title": "d", "content": "# new"})),
        ),
        (M::GET, "/labs/{lab}/documents", None),
        (M::GET, "/documents/{doc}", None),
        (M::GET, "/documents/{doc}/raw", None),
    ]
}

fn fill_value(v: &Value, ids: &BTreeMap<&'static str, String>) -> Value {
    serde_json::from_str(&fill(&v.to_string(), ids)).unwrap()
}

#[tokio::test]
async fn authorization_matrix_matches_checked_in_table() {
    let mut table = String::new();
    for (method, path, body) in requests() {
        for principal in PRINCIPALS {
            let w = world();
            let token = w.tokens.get(principal).cloned();
            let uri = fill(path, &w.ids);
            let body = body.as_ref().map(|b| fill_value(b, &w.ids));
            let r = w.s.call(method.clone(), &uri, token.as_deref(), body).await;
            let code = if r.status.is_success() { "-" } else { r.code() };
            writeln!(
                table,
                "{method:<5} {path:<36} {principal:<9} {} {code}",
                r.status.as_u16()
            )
            .unwrap();
        }
    }
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/authz_matrix.txt");
    if std::env::var_os("UPDATE_SNAPSHOTS").is_some() {
        std::fs::write(path, &table).unwrap();
    }
    let expected = std::fs::read_to_string(path).expect("expectation table; regenerate with UPDATE_SNAPSHOTS=1");
    for (got, want) in table.lines().zip(expected.lines()) {
        assert_eq!(got, want);
    }
    assert_eq!(table.lines().count(), expected.lines().count());
}

#[tokio::test]
async fn no_mutation_without_a_token_and_none_by_humans_on_protocol_routes() {
    // independent of the table: structural rules the table must satisfy
    let protocol_prefixes = [
        "/labs/{lab}/members",
        "/labs/{lab}/states",
        "/states/",
        "/labs/{lab}/tasks",
        "/tasks/",
        "/critiques/",
        "/providers/",
    ];
    for (method, path, body) in requests() {
        if method != Method::POST || path == "/agents" {
            continue;
        }
        let w = world();
        let uri = fill(path, &w.ids);
        let b = body.as_ref().map(|b| fill_value(b, &w.ids));
        let before = w.s.platform.lock().log().len();
        let r = w.s.call(method.clone(), &uri, None, b.clone()).await;
        assert_eq!(r.status.as_u16(), 401, "{path}");
        if protocol_prefixes.iter().any(|p| path.starts_with(p)) {
            let r = w.s.call(method.clone(), &uri, Some(OBSERVER_TOKEN), b).await;
            assert_eq!(r.status.as_u16(), 403, "{path}");
            assert_eq!(r.code(), "HumanForbidden", "{path}");
        }
        assert_eq!(w.s.platform.lock().log().len(), before, "{path}");
    }
}
