use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use ctra_core::llm::*;
use proptest::prelude::*;
use serde_json::Value;

fn cfg(role: Role) -> RoleModelConfig {
    RoleModelConfig::default_for(role)
}

#[test]
fn defaults_per_role() {
    for (role, c) in default_role_configs() {
        assert_eq!(c.temperature, 0.7);
        assert_eq!(c.max_tokens, 4000);
        assert_eq!(c.role, role);
    }
    assert_eq!(cfg(Role::QuestionCreation).model_name, cfg(Role::Chart).model_name);
    assert!(cfg(Role::Report).model_name.contains("405B"));
}

#[test]
fn replay_returns_recorded_text_and_misses_unknown_prompts() {
    let response = "SELECT workflow_id, COUNT(*) AS job_count FROM jobs GROUP BY workflow_id\n  \u{e9}";
    let replay = ReplayBackend::new(vec![ReplayEntry {
        role: Role::QueryBuilder,
        prompt_sha256: prompt_sha256("p1"),
        response: response.into(),
    }]);
    assert_eq!(replay.complete(&cfg(Role::QueryBuilder), "p1").unwrap(), response);
    assert!(matches!(
        replay.complete(&cfg(Role::QueryBuilder), "p2"),
        Err(LlmError::ReplayMiss {
            role: Role::QueryBuilder,
            ..
        })
    ));
    // the role is part of the key
    assert!(replay.complete(&cfg(Role::Reflect), "p1").is_err());
}

#[test]
fn duplicate_prompts_replay_in_order() {
    let entry = |r: &str| ReplayEntry {
        role: Role::QueryBuilder,
        prompt_sha256: prompt_sha256("same"),
        response: r.into(),
    };
    let replay = ReplayBackend::new(vec![entry("first"), entry("second")]);
    let c = cfg(Role::QueryBuilder);
    assert_eq!(replay.complete(&c, "same").unwrap(), "first");
    assert_eq!(replay.complete(&c, "same").unwrap(), "second");
    assert_eq!(replay.complete(&c, "same").unwrap(), "second");
}

#[test]
fn recording_then_replay_round_trips_through_a_file() {
    let scripted = ScriptedBackend::new()
        .with(Role::QuestionCreation, r#"["a?", "b?"]"#)
        .with(Role::QueryBuilder, "SELECT 1")
        .with(Role::QueryBuilder, "SELECT 2");
    let rec = RecordingBackend::new(scripted);
    let prompts = [
        (Role::QuestionCreation, "q"),
        (Role::QueryBuilder, "x"),
        (Role::QueryBuilder, "y"),
    ];
    let live: Vec<String> = prompts
        .iter()
        .map(|(r, p)| rec.complete(&cfg(*r), p).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("replay.jsonl");
    rec.write(&path).unwrap();
    let replay = ReplayBackend::from_path(&path).unwrap();
    let again: Vec<String> = prompts
        .iter()
        .map(|(r, p)| replay.complete(&cfg(*r), p).unwrap())
        .collect();
    assert_eq!(live, again);
    assert_eq!(live[2], "SELECT 2");
}

#[test]
fn gateway_renders_and_keeps_transcript() {
    let gw = Gateway::with_defaults(Box::new(
        ScriptedBackend::new().with(Role::QuestionCreation, r#"["x (Suitable for bar chart)"]"#),
    ));
    let mut ctx = PromptContext::new("Table: jobs", "out");
    ctx.num_questions = 1;
    let raw = gw.ask(Role::QuestionCreation, &ctx).unwrap();
    assert_eq!(extract_json_array(&raw).unwrap().len(), 1);
    let t = gw.transcript();
    assert_eq!(t.len(), 1);
    assert!(t[0]
        .rendered_prompt
        .contains("Generate exactly 1 human-language questions"));
}

type Seen = Arc<Mutex<Vec<(String, String)>>>;

/// Minimal HTTP/1.1 server answering each connection with the next canned
/// response and capturing request bodies.
fn stub_server(responses: Vec<String>) -> (String, Seen) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let seen2 = seen.clone();
    thread::spawn(move || {
        for (stream, resp) in listener.incoming().zip(responses) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            seen2.lock().unwrap().push((head, String::from_utf8(body).unwrap()));
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn http_response(status: &str, extra: &str, body: &str) -> String {
    format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\n{extra}Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
}

#[test]
fn http_backend_speaks_chat_completions() {
    let body = r#"{"choices":[{"message":{"role":"assistant","content":"SELECT 1"}}]}"#;
    let (endpoint, seen) = stub_server(vec![http_response("200 OK", "", body)]);
    let backend = HttpBackend::new(Some("sk-test".into())).unwrap();
    let mut c = cfg(Role::QueryBuilder);
    c.endpoint = endpoint;
    assert_eq!(backend.complete(&c, "hello").unwrap(), "SELECT 1");
    let seen = seen.lock().unwrap();
    let (head, body) = &seen[0];
    assert!(head.starts_with("POST /v1/chat/completions"));
    assert!(head.to_ascii_lowercase().contains("authorization: bearer sk-test"));
    let req: Value = serde_json::from_str(body).unwrap();
    assert_eq!(req["model"], "deepseek-ai/DeepSeek-R1");
    assert_eq!(req["temperature"], 0.7);
    assert_eq!(req["max_tokens"], 4000);
    assert_eq!(req["messages"].as_array().unwrap().len(), 1);
    assert_eq!(req["messages"][0]["role"], "user");
    assert_eq!(req["messages"][0]["content"], "hello");
    assert!(!format!("{backend:?}").contains("sk-test"));
}

#[test]
fn http_429_is_retried_once_then_surfaced_with_retry_after() {
    let busy = http_response("429 Too Many Requests", "Retry-After: 0\r\n", "{}");
    let (endpoint, seen) = stub_server(vec![busy.clone(), busy]);
    let backend = HttpBackend::new(None)
        .unwrap()
        .with_backoff(Duration::from_millis(1), Duration::from_millis(50));
    let mut c = cfg(Role::Report);
    c.endpoint = endpoint;
    match backend.complete(&c, "x") {
        Err(LlmError::Transport {
            status, retry_after, ..
        }) => {
            assert_eq!(status, Some(429));
            assert_eq!(retry_after, Some(Duration::from_secs(0)));
        }
        other => panic!("expected transport error, got {other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn http_transient_failure_recovers_on_retry() {
    let ok = r#"{"choices":[{"message":{"content":"fine"}}]}"#;
    let (endpoint, _) = stub_server(vec![
        http_response("503 Service Unavailable", "", "{}"),
        http_response("200 OK", "", ok),
    ]);
    let backend = HttpBackend::new(None)
        .unwrap()
        .with_backoff(Duration::from_millis(1), Duration::from_millis(5));
    let mut c = cfg(Role::Reflect);
    c.endpoint = endpoint;
    assert_eq!(backend.complete(&c, "x").unwrap(), "fine");
}

#[test]
fn http_timeout_is_reported() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let _held: Vec<_> = listener.incoming().take(1).collect();
        thread::sleep(Duration::from_secs(2));
    });
    let backend = HttpBackend::new(None).unwrap();
    let mut c = cfg(Role::Reflect);
    c.endpoint = format!("http://{addr}/v1");
    c.timeout = Duration::from_millis(200);
    assert!(matches!(backend.complete(&c, "x"), Err(LlmError::Timeout(_))));
}

#[test]
fn code_check_example_response_parses() {
    let raw = r#"{
    "is_valid": false,
    "errors": ["Invalid column 'invalid_col'", "Missing GROUP BY for non-aggregated column"],
    "suggestions": ["Use valid column 'workflow_id'", "Add GROUP BY workflow_id"]
}"#;
    let r = extract_json_object(raw).unwrap();
    assert!(!r.is_valid);
    assert_eq!(r.errors.len(), 2);
    assert_eq!(r.suggestions.len(), 2);
}

#[test]
fn transcript_style_fixtures() {
    let questions = "Here are the questions:\n\n```json\n[\n  \"What is the daily average creation-to-start time? (Suitable for line chart)\",\n  \"How do job counts compare across lab_id values? (Suitable for bar chart)\"\n]\n```";
    assert_eq!(extract_json_array(questions).unwrap().len(), 2);
    let sql = "Here is the query:\n```sql\nSELECT workflow_id, COUNT(*) AS job_count\nFROM jobs\nGROUP BY workflow_id\nORDER BY job_count DESC;\n```";
    assert_eq!(
        extract_sql(sql).unwrap(),
        "SELECT workflow_id, COUNT(*) AS job_count\nFROM jobs\nGROUP BY workflow_id\nORDER BY job_count DESC"
    );
}

proptest! {
    #[test]
    fn extract_sql_is_idempotent(prefix in "[ -~\n]{0,40}", body in "[ -~\n]{0,60}", fenced in any::<bool>()) {
        let raw = if fenced {
            format!("{prefix}\n```sql\nSELECT {body}\n```")
        } else {
            format!("{prefix}\nSELECT {body}")
        };
        if let Ok(once) = extract_sql(&raw) {
            prop_assert_eq!(extract_sql(&once).unwrap(), once);
        }
    }

    #[test]
    fn render_is_injective_in_used_fields(a in "[a-z ]{1,20}", b in "[a-z ]{1,20}", n in 1usize..20, m in 1usize..20) {
        let mut c1 = PromptContext::new("schema", "out");
        c1.question = Some(a.clone());
        c1.num_questions = n;
        let mut c2 = c1.clone();
        c2.question = Some(b.clone());
        c2.num_questions = m;
        let sql_same = render_prompt(Role::QueryBuilder, &c1).unwrap() == render_prompt(Role::QueryBuilder, &c2).unwrap();
        prop_assert_eq!(sql_same, a == b);
        let q_same = render_prompt(Role::QuestionCreation, &c1).unwrap() == render_prompt(Role::QuestionCreation, &c2).unwrap();
        prop_assert_eq!(q_same, n == m);
    }
}
