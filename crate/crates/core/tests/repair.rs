mod common;

use common::{error_line, repair_rules, scripted};
use proptest::prelude::*;
use scigen_core::gateway::{MockFallback, MockModel, MockRule, MockScript};
use scigen_core::repair::{
    classify, repair_loop, CheckerSpec, ExecutionRecord, Outcome, RepairOptions, RepairTask, RepairTrace, StubSandbox,
    FAILURE_LEAD, INCORRECT_LEAD,
};

const BASE: &str = "Plot task-alpha: read /temperature/data and save plot.png.";

fn run(model: &MockModel, opts: &RepairOptions, checker: &CheckerSpec) -> RepairTrace {
    let task = RepairTask { prompt: BASE, data_file: None, checker };
    repair_loop(task, opts, model, &StubSandbox)
}

fn opts(max: u32) -> RepairOptions {
    RepairOptions { max_iterations: max, model: "mock".into(), ..RepairOptions::default() }
}

fn check_invariants(trace: &RepairTrace) {
    assert_eq!(trace.iterations_used as usize, trace.attempts.len());
    if let Some(last) = trace.attempts.last() {
        if trace.aborted.is_none() {
            assert_eq!(last.outcome, trace.terminal_outcome);
        }
    }
    let n = trace.attempts.len();
    for (i, a) in trace.attempts.iter().enumerate() {
        assert_eq!(a.iteration as usize, i + 1);
        assert!(a.prompt.starts_with(BASE));
        if i + 1 < n {
            assert_eq!(a.outcome, Outcome::Failed);
        }
    }
}

#[test]
fn fix_lands_at_scripted_iteration() {
    let checker = CheckerSpec::artifacts(&["plot.png"]);
    for k in 1..=6 {
        let model = MockModel::new(scripted(repair_rules("task-alpha", Some(k))));
        let trace = run(&model, &opts(6), &checker);
        check_invariants(&trace);
        assert_eq!(trace.iterations_used, k, "k={k}");
        assert_eq!(trace.terminal_outcome, Outcome::Correct, "k={k}");
        assert_eq!(model.chat_calls() as u32, k);
        assert_eq!(trace.attempts[0].prompt, BASE);
        for j in 2..=k as usize {
            let prompt = &trace.attempts[j - 1].prompt;
            assert!(prompt.contains(&error_line("task-alpha", j as u32 - 1)), "k={k} j={j}");
            assert!(prompt.contains(FAILURE_LEAD));
            // latest error only
            if j >= 3 {
                assert!(!prompt.contains(&error_line("task-alpha", j as u32 - 2)));
            }
        }
    }
}

#[test]
fn never_fixing_model_uses_six_attempts() {
    let model = MockModel::new(scripted(repair_rules("task-alpha", None)));
    let trace = run(&model, &opts(6), &CheckerSpec::artifacts(&["plot.png"]));
    check_invariants(&trace);
    assert_eq!(trace.attempts.len(), 6);
    assert!(trace.attempts.iter().all(|a| a.outcome == Outcome::Failed));
    assert_eq!(trace.terminal_outcome, Outcome::Failed);
    assert!(trace.aborted.is_none());
}

#[test]
fn raising_the_bound_keeps_earlier_attempts() {
    let checker = CheckerSpec::artifacts(&["plot.png"]);
    for k in [2, 4, 7] {
        let model = MockModel::new(scripted(repair_rules("task-alpha", Some(k))));
        let traces: Vec<RepairTrace> = (1..=6).map(|m| run(&model, &opts(m), &checker)).collect();
        for (m, t) in traces.iter().enumerate() {
            let longest = &traces[5];
            for (a, b) in t.attempts.iter().zip(&longest.attempts) {
                assert_eq!((&a.prompt, &a.script, a.outcome), (&b.prompt, &b.script, b.outcome), "m={}", m + 1);
                assert_eq!((a.record.exit_code, &a.record.stderr), (b.record.exit_code, &b.record.stderr));
            }
            assert_eq!(t.iterations_used, (m as u32 + 1).min(k));
        }
    }
}

#[test]
fn error_history_mode_keeps_all_errors() {
    let model = MockModel::new(scripted(repair_rules("task-alpha", Some(4))));
    let o = RepairOptions { error_history: true, ..opts(6) };
    let trace = run(&model, &o, &CheckerSpec::artifacts(&["plot.png"]));
    // each error rule still fires, so the fix arrives on schedule
    assert_eq!(trace.iterations_used, 4);
    let last = &trace.attempts[3].prompt;
    for j in 1..=3 {
        assert!(last.contains(&error_line("task-alpha", j)));
    }
}

#[test]
fn runnable_stops_the_loop_unless_asked() {
    let no_plot = "```python\n#!stub stdout nothing to see\n```";
    let with_plot = "```python\n#!stub write plot.png\n```";
    let model = MockModel::new(MockScript {
        rules: vec![
            MockRule::Contains { contains: INCORRECT_LEAD.into(), reply: with_plot.into() },
            MockRule::Contains { contains: "task-alpha".into(), reply: no_plot.into() },
        ],
        fallback: MockFallback::Error,
        ..MockScript::default()
    });
    let checker = CheckerSpec::artifacts(&["plot.png"]);
    let trace = run(&model, &opts(6), &checker);
    assert_eq!((trace.iterations_used, trace.terminal_outcome), (1, Outcome::Runnable));

    let o = RepairOptions { repair_incorrect: true, ..opts(6) };
    let trace = run(&model, &o, &checker);
    assert_eq!((trace.iterations_used, trace.terminal_outcome), (2, Outcome::Correct));
    assert!(trace.attempts[1].prompt.contains("plot.png"));
}

#[test]
fn gateway_failure_aborts() {
    let model = MockModel::new(MockScript { fallback: MockFallback::Error, ..MockScript::default() });
    let trace = run(&model, &opts(6), &CheckerSpec::artifacts(&["plot.png"]));
    assert!(trace.attempts.is_empty());
    assert_eq!(trace.terminal_outcome, Outcome::Failed);
    assert!(trace.aborted.as_deref().unwrap().starts_with("gateway error"));
    assert_eq!(trace.outcome_at(1), Outcome::Failed);
}

#[test]
fn reply_without_code_counts_as_failed_attempt() {
    let model = MockModel::new(MockScript { fallback: MockFallback::Reply("```\n```".into()), ..MockScript::default() });
    let trace = run(&model, &opts(3), &CheckerSpec::artifacts(&["plot.png"]));
    assert_eq!(trace.attempts.len(), 3);
    assert!(trace.attempts.iter().all(|a| a.outcome == Outcome::Failed && a.script.source.is_empty()));
    assert!(trace.attempts[1].prompt.contains("No script could be extracted"));
}

#[test]
fn timeouts_are_failures() {
    let model = MockModel::new(MockScript {
        fallback: MockFallback::Reply("```python\n#!stub timeout\n```".into()),
        ..MockScript::default()
    });
    let trace = run(&model, &opts(2), &CheckerSpec::artifacts(&["plot.png"]));
    assert_eq!(trace.attempts.len(), 2);
    assert!(trace.attempts[0].record.timed_out);
    assert!(trace.attempts[1].prompt.contains("process exceeded the time limit"));
}

#[test]
fn data_file_is_copied_into_each_workdir() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("granule.h5");
    std::fs::write(&data, b"data").unwrap();
    let model = MockModel::new(MockScript {
        fallback: MockFallback::Reply("```python\n#!stub write plot.png\n```".into()),
        ..MockScript::default()
    });
    let checker = CheckerSpec {
        expected_artifacts: vec!["plot.png".into()],
        checker_command: Some("test -f granule.h5 && test -f plot.png".into()),
        timeout_s: 10,
    };
    let work_root = dir.path().join("runs");
    let o = RepairOptions { work_root: Some(work_root.clone()), ..opts(6) };
    let trace = repair_loop(RepairTask { prompt: BASE, data_file: Some(&data), checker: &checker }, &o, &model, &StubSandbox);
    assert_eq!(trace.terminal_outcome, Outcome::Correct);
    assert_eq!(trace.attempts[0].record.artifacts, ["plot.png"]);
    // attempt directories are cleaned up
    assert_eq!(std::fs::read_dir(&work_root).unwrap().count(), 0);
}

#[derive(Debug, Clone)]
enum Check {
    None,
    Exit(i32),
    Crash,
}

fn expected(exit: i32, timed_out: bool, artifact: bool, check: &Check) -> Outcome {
    if timed_out || exit != 0 {
        return Outcome::Failed;
    }
    if !artifact {
        return Outcome::Runnable;
    }
    match check {
        Check::None | Check::Exit(0) => Outcome::Correct,
        Check::Exit(_) | Check::Crash => Outcome::Runnable,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]
    #[test]
    fn classify_decision_table(
        exit in prop::sample::select(vec![0, 0, 1, 2, -1, -9, 137]),
        timed_out in any::<bool>(),
        artifact in any::<bool>(),
        check in prop_oneof![Just(Check::None), (0i32..3).prop_map(Check::Exit), Just(Check::Crash)],
    ) {
        let dir = tempfile::tempdir().unwrap();
        if artifact {
            std::fs::write(dir.path().join("plot.png"), b"png").unwrap();
        }
        let record = ExecutionRecord {
            exit_code: exit,
            timed_out,
            stdout: String::new(),
            stderr: String::new(),
            duration_ms: 1,
            artifacts: vec![],
            error: None,
        };
        let checker = CheckerSpec {
            expected_artifacts: vec!["plot.png".into()],
            checker_command: match &check {
                Check::None => None,
                Check::Exit(n) => Some(format!("exit {n}")),
                Check::Crash => Some("/no/such/checker --strict".into()),
            },
            timeout_s: 10,
        };
        let got = classify(&record, &checker, dir.path());
        prop_assert_eq!(got, expected(exit, timed_out, artifact, &check));
        // same inputs, same answer
        prop_assert_eq!(classify(&record, &checker, dir.path()), got);
    }
}
