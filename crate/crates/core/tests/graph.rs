use std::path::Path;

use ctra_core::datastore::{generate_synthetic, GenerationProfile, InMemoryBackend, JobRecord};
use ctra_core::graph::*;
use ctra_core::llm::{Gateway, Role, ScriptedBackend};
use proptest::prelude::*;
use serde_json::json;

const GOOD: &str = "SELECT state, COUNT(*) AS job_count FROM jobs GROUP BY state ORDER BY job_count DESC";
const BAD_COLUMN: &str = "SELECT status, COUNT(*) AS job_count FROM jobs GROUP BY status";
const VALID_CHECK: &str = r#"{"is_valid": true, "errors": [], "suggestions": []}"#;

fn backend() -> InMemoryBackend {
    let profile = GenerationProfile::default().with_record_count(60);
    InMemoryBackend::new(generate_synthetic(7, &profile).unwrap())
}

fn config(dir: &Path, n: usize) -> PipelineConfig {
    PipelineConfig {
        num_questions: n,
        output_dir: dir.to_path_buf(),
        ..PipelineConfig::default()
    }
}

fn questions(n: usize) -> String {
    let qs: Vec<String> = (1..=n)
        .map(|i| format!("How many jobs are in each state, view {i}? (Suitable for bar chart)"))
        .collect();
    serde_json::to_string(&qs).unwrap()
}

#[test]
fn broken_twice_then_fixed_takes_three_attempts() {
    let dir = tempfile::tempdir().unwrap();
    let script = ScriptedBackend::new()
        .with(Role::QuestionCreation, questions(1))
        .with(Role::QueryBuilder, BAD_COLUMN)
        .with(Role::QueryBuilder, BAD_COLUMN)
        .with(Role::QueryBuilder, format!("```sql\n{GOOD};\n```"))
        .with(Role::Reflect, "Use the state column instead of status.")
        .with(Role::CodeCheck, VALID_CHECK);
    let gw = Gateway::with_defaults(Box::new(script));
    let out = run_with_backend(&config(dir.path(), 1), &gw, &backend()).unwrap();
    let o = &out.outcomes[0];
    assert_eq!(o.status, OutcomeStatus::Succeeded);
    assert_eq!(o.attempts, 3);
    assert_eq!(o.reflection_notes.len(), 2);
    assert_eq!(o.final_sql.as_deref(), Some(GOOD));
    assert!(o.error_trail[0].contains(r#"column "status" does not exist"#));
    assert!(!o.result.as_ref().unwrap().rows.is_empty());
    assert_eq!(out.chart_files, vec![dir.path().join("plot_query_1.svg")]);
    assert!(dir.path().join("report.txt").exists());
    // the retry prompt carries the reflection guidance
    let builder_prompts: Vec<String> = gw
        .transcript()
        .into_iter()
        .filter(|e| e.role == Role::QueryBuilder)
        .map(|e| e.rendered_prompt)
        .collect();
    assert_eq!(builder_prompts.len(), 3);
    assert!(!builder_prompts[0].contains("Guidance:"));
    assert!(builder_prompts[1].contains("Use the state column instead of status."));
}

#[test]
fn always_failing_question_gives_up_after_four_attempts() {
    let dir = tempfile::tempdir().unwrap();
    let script = ScriptedBackend::new()
        .with(Role::QuestionCreation, questions(1))
        .with(Role::QueryBuilder, BAD_COLUMN)
        .with(Role::Reflect, "Use state.");
    let gw = Gateway::with_defaults(Box::new(script));
    let out = run_with_backend(&config(dir.path(), 1), &gw, &backend()).unwrap();
    let o = &out.outcomes[0];
    assert_eq!(o.status, OutcomeStatus::Failed);
    assert_eq!(o.attempts, 4);
    assert!(o.final_sql.is_none() && o.result.is_none());
    assert!(out.chart_files.is_empty());
    let text = std::fs::read_to_string(&out.report_file).unwrap();
    assert!(
        text.to_lowercase().contains("no plot was generated due to errors"),
        "{text}"
    );
}

#[test]
fn missing_group_by_is_repaired() {
    let dir = tempfile::tempdir().unwrap();
    let script = ScriptedBackend::new()
        .with(Role::QuestionCreation, questions(1))
        .with(Role::QueryBuilder, "SELECT state, COUNT(*) FROM jobs")
        .with(Role::QueryBuilder, "SELECT state, COUNT(*) FROM jobs GROUP BY state")
        .with(Role::CodeCheck, VALID_CHECK);
    // no reflect answers: guidance falls back to the lint suggestion
    let gw = Gateway::with_defaults(Box::new(script));
    let out = run_with_backend(&config(dir.path(), 1), &gw, &backend()).unwrap();
    let o = &out.outcomes[0];
    assert_eq!(o.attempts, 2);
    assert_eq!(o.reflection_notes, vec!["Add GROUP BY state".to_string()]);
    assert!(o.final_sql.as_deref().unwrap().contains("GROUP BY state"));
}

#[test]
fn code_check_cannot_overturn_lint() {
    let dir = tempfile::tempdir().unwrap();
    let script = ScriptedBackend::new()
        .with(Role::QuestionCreation, questions(1))
        .with(Role::QueryBuilder, GOOD)
        .with(
            Role::CodeCheck,
            r#"{"is_valid": false, "errors": ["Missing index"], "suggestions": ["Index state"]}"#,
        );
    let gw = Gateway::with_defaults(Box::new(script));
    let out = run_with_backend(&config(dir.path(), 1), &gw, &backend()).unwrap();
    let o = &out.outcomes[0];
    assert_eq!(o.status, OutcomeStatus::Succeeded);
    assert_eq!(o.attempts, 1);
    assert_eq!(o.code_check_notes, vec!["Missing index", "Index state"]);
}

#[test]
fn question_creation_failures_abort() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Gateway::with_defaults(Box::new(ScriptedBackend::new().with(Role::QuestionCreation, "[]")));
    assert!(matches!(
        run_with_backend(&config(dir.path(), 5), &gw, &backend()),
        Err(PipelineError::NoQuestions)
    ));
    let gw = Gateway::with_defaults(Box::new(
        ScriptedBackend::new().with(Role::QuestionCreation, "I cannot help"),
    ));
    assert!(matches!(
        run_with_backend(&config(dir.path(), 5), &gw, &backend()),
        Err(PipelineError::QuestionCreation(_))
    ));
}

#[test]
fn question_hints_are_parsed() {
    let mut state = AgentState::default();
    let gw = Gateway::with_defaults(Box::new(ScriptedBackend::new().with(
        Role::QuestionCreation,
        r#"["What is the daily average execution time? (Suitable for line chart)", "Counts per lab?"]"#,
    )));
    node_question_creation(&mut state, &gw, &PipelineConfig::default()).unwrap();
    assert_eq!(state.questions.len(), 2);
    assert_eq!(state.questions[0].chart_hint, ctra_core::insights::ChartHint::Line);
    assert_eq!(state.questions[1].chart_hint, ctra_core::insights::ChartHint::None);
    assert_eq!(state.questions[1].index, 1);
}

#[test]
fn routing_and_navigation() {
    let mut state = AgentState::new("", (0..5).map(|i| Question::new(i, format!("q{i}"))).collect());
    assert_eq!(
        route_after_validation(&mut state, ValidationRoute::Error, 3),
        RetryRoute::Retry
    );
    assert_eq!(state.retry_count, 1);
    state.retry_count = 3;
    assert_eq!(
        route_after_validation(&mut state, ValidationRoute::Error, 3),
        RetryRoute::GiveUp
    );
    assert_eq!(state.outcomes.len(), 1);
    assert_eq!(node_question_navigator(&mut state), NavigatorRoute::NextQuestion);
    assert_eq!((state.cursor, state.retry_count), (1, 0));
    assert_eq!(
        route_after_validation(&mut state, ValidationRoute::Ok, 3),
        RetryRoute::Proceed
    );
    state.cursor = 4;
    state.outcomes.extend(std::iter::repeat_n(state.outcomes[0].clone(), 3));
    assert_eq!(node_question_navigator(&mut state), NavigatorRoute::Summarize);
}

#[test]
fn execution_errors_route_to_error() {
    let record = |id: &str, duration: serde_json::Value| {
        let obj = json!({
            "id": id, "name": id, "lab_id": "lab-1", "workflow_id": "wf-1", "state": "COMPLETED",
            "created_timestamp": "2024-01-01T00:00:00Z", "outputs": {"duration": duration},
        });
        JobRecord::from_json_object(obj.as_object().unwrap(), 0).unwrap()
    };
    let backend = InMemoryBackend::new(vec![record("a", json!("12.5")), record("b", json!("n/a"))]);
    let mut state = AgentState::new("", vec![Question::new(0, "Average duration per workflow?")]);
    state.current_sql = Some(
        "SELECT workflow_id, AVG(COALESCE(outputs->>'duration', '0')::FLOAT) FROM jobs GROUP BY workflow_id".into(),
    );
    let gw = Gateway::with_defaults(Box::new(ScriptedBackend::new()));
    let cfg = PipelineConfig {
        code_check: false,
        ..PipelineConfig::default()
    };
    assert_eq!(
        node_query_validator(&mut state, &backend, &gw, &cfg),
        ValidationRoute::Error
    );
    assert_eq!(
        state.current_errors,
        vec![r#"invalid input syntax for type double precision: "n/a""#]
    );
}

#[test]
fn replayed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        let script = ScriptedBackend::new()
            .with(Role::QuestionCreation, questions(2))
            .with(Role::QueryBuilder, GOOD)
            .with(Role::CodeCheck, VALID_CHECK);
        let gw = Gateway::with_defaults(Box::new(script));
        let out = run_with_backend(&config(dir.path(), 2), &gw, &backend()).unwrap();
        let mut files = vec![std::fs::read(&out.report_file).unwrap()];
        files.extend(out.chart_files.iter().map(|p| std::fs::read(p).unwrap()));
        files
    };
    let a = run();
    let b = run();
    assert_eq!(a.len(), 3);
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn runs_terminate_within_bound(n in 1usize..5, retries in 1usize..4, answers in proptest::collection::vec(any::<bool>(), 1..12)) {
        let dir = tempfile::tempdir().unwrap();
        let mut script = ScriptedBackend::new().with(Role::QuestionCreation, questions(n)).with(Role::CodeCheck, VALID_CHECK);
        for ok in &answers {
            script = script.with(Role::QueryBuilder, if *ok { GOOD } else { BAD_COLUMN });
        }
        let gw = Gateway::with_defaults(Box::new(script));
        let cfg = PipelineConfig { max_retries: retries, ..config(dir.path(), n) };
        let out = run_with_backend(&cfg, &gw, &backend()).unwrap();
        prop_assert_eq!(out.outcomes.len(), n);
        prop_assert!(out.node_executions <= n * (2 + 3 * retries) + 3);
        for (i, o) in out.outcomes.iter().enumerate() {
            prop_assert_eq!(o.question.index, i);
            prop_assert!(o.attempts >= 1 && o.attempts <= 1 + retries);
            prop_assert_eq!(o.status == OutcomeStatus::Succeeded, o.result.is_some());
            prop_assert_eq!(o.result.is_some(), o.final_sql.is_some());
        }
    }
}

#[test]
fn cte_answer_reaches_the_lint() {
    let dir = tempfile::tempdir().unwrap();
    let script = ScriptedBackend::new()
        .with(Role::QuestionCreation, questions(1))
        .with(
            Role::QueryBuilder,
            "WITH t AS (SELECT state FROM jobs) SELECT state, COUNT(*) FROM t GROUP BY state",
        )
        .with(Role::QueryBuilder, GOOD)
        .with(Role::Reflect, "Drop the WITH clause.")
        .with(Role::CodeCheck, VALID_CHECK);
    let gw = Gateway::with_defaults(Box::new(script));
    let out = run_with_backend(&config(dir.path(), 1), &gw, &backend()).unwrap();
    let o = &out.outcomes[0];
    assert_eq!(o.attempts, 2);
    assert!(o.error_trail[0].contains("WITH clauses"), "{:?}", o.error_trail);
}
