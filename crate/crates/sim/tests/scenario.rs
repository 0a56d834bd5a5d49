use clawdlab_sim::{run_scenario, simulate, Scenario, SimError, SybilKind, SybilPopulation};

#[test]
fn same_seed_same_report() {
    let s = Scenario::protein();
    let a = run_scenario(&s, 7).unwrap();
    let b = run_scenario(&s, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn different_seeds_change_timing_not_outcome() {
    let s = Scenario::protein();
    let a = run_scenario(&s, 1).unwrap();
    let b = run_scenario(&s, 2).unwrap();
    assert!(a.passed() && b.passed());
    assert_ne!(a.final_state_hash, b.final_state_hash);
    assert_eq!(a.accepted_tasks.len(), b.accepted_tasks.len());
}

#[test]
fn shipped_scenario_passes_for_a_spread_of_seeds() {
    let s = Scenario::protein();
    for seed in 0..20 {
        let r = run_scenario(&s, seed).unwrap();
        let failed: Vec<_> = r.assertions.iter().filter(|a| !a.passed).collect();
        assert!(failed.is_empty(), "seed {seed}: {failed:?}");
        assert!(r.settled, "seed {seed} hit the horizon");
        let (lo, hi) = r.poll_interval_seconds.unwrap();
        assert!(lo >= 45 && hi <= 90, "seed {seed}: {lo}..{hi}");
    }
}

#[test]
fn every_logged_event_is_counted_as_a_mutation() {
    let r = run_scenario(&Scenario::protein(), 3).unwrap();
    assert_eq!(r.actions.mutations, r.events);
    assert!(r.actions.steps >= r.actions.mutations - r.event_counts.get("job_finished").copied().unwrap_or(0));
}

#[test]
fn evidence_free_analysis_is_never_accepted() {
    let run = simulate(&Scenario::protein(), 4, None).unwrap();
    let e = &run.engine;
    let analysis: Vec<_> = e
        .state()
        .tasks
        .values()
        .filter(|t| t.task_type == clawdlab::TaskType::Analysis)
        .collect();
    assert_eq!(analysis.len(), 1);
    let t = analysis[0];
    assert_eq!(t.status, clawdlab::TaskStatus::Completed);
    let v = e.verification(&t.task_id).expect("verified");
    assert!(!v.passed_overall);
}

#[test]
fn tiny_step_budget_is_reported() {
    let mut s = Scenario::protein();
    s.step_budget = 10;
    match run_scenario(&s, 1) {
        Err(SimError::StepBudgetExceeded { budget, .. }) => assert_eq!(budget, 10),
        other => panic!("expected budget error, got {other:?}"),
    }
}

#[test]
fn short_horizon_leaves_the_run_unsettled() {
    let mut s = Scenario::protein();
    s.horizon_seconds = 60;
    let r = run_scenario(&s, 1).unwrap();
    assert!(!r.settled);
    assert!(!r.passed());
}

#[test]
fn worker_sybils_add_tasks_and_fail_the_exact_count() {
    let s = Scenario::protein();
    let run = simulate(
        &s,
        1,
        Some(SybilPopulation {
            kind: SybilKind::Worker,
            count: 2,
        }),
    )
    .unwrap();
    assert_eq!(run.report.completed_literature, 7);
    let count = run
        .report
        .assertions
        .iter()
        .find(|a| a.assertion.starts_with("task_count"))
        .unwrap();
    assert!(!count.passed, "{count:?}");
}

#[test]
fn voter_sybils_land_nothing() {
    let s = Scenario::protein();
    let run = simulate(
        &s,
        1,
        Some(SybilPopulation {
            kind: SybilKind::Voter,
            count: 5,
        }),
    )
    .unwrap();
    assert!(run.report.flood.attempts > 0);
    assert_eq!(run.report.flood.landed, 0);
    assert!(run.report.passed());
}

#[test]
fn unknown_fields_are_rejected() {
    let text = include_str!("../scenarios/protein_annotation.toml").replace(
        "name = \"protein-annotation\"",
        "name = \"protein-annotation\"\nstep_budjet = 5",
    );
    assert!(matches!(Scenario::parse(&text), Err(SimError::ScenarioParse(_))));
}

#[test]
fn scenario_without_a_pi_is_rejected() {
    let text = include_str!("../scenarios/protein_annotation.toml")
        .replace("role = \"principal_investigator\"", "role = \"scout\"");
    let err = Scenario::parse(&text).unwrap_err();
    assert!(err.to_string().contains("principal"), "{err}");
}

#[test]
fn critique_target_must_exist() {
    let text = include_str!("../scenarios/protein_annotation.toml").replace(
        "target = \"Survey: post-translational modification site annotation\"",
        "target = \"Survey: nothing\"",
    );
    assert!(Scenario::parse(&text).is_err());
}
