//! Recording a run and playing it back.

use num_bigint::BigInt;
use promptvm::backends::{BackendError, Cassette, Recorder, ReplayBackend};
use promptvm::vm::{RunOutcome, TraceEvent, VmError};
use promptvm::{compile_program, init_memory, u15_2, Machine, PromptProgram, RuleBackend};

fn trace_lines(trace: &[TraceEvent]) -> Vec<String> {
    trace
        .iter()
        .map(|event| serde_json::to_string(event).unwrap())
        .collect()
}

fn machine_for<B: promptvm::CompletionBackend>(program: &PromptProgram, backend: B) -> Machine<B> {
    Machine::new(init_memory(program, "1101", BigInt::from(0)), backend)
}

#[test]
fn replayed_trace_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let program = compile_program(&u15_2()).unwrap();

    let recorder = Recorder::create(RuleBackend, &path).unwrap();
    let mut live = machine_for(&program, recorder);
    let recorded = live.run(400, true);
    assert!(matches!(recorded.outcome, RunOutcome::NotHalted));
    let (live_memory, recorder) = live.into_parts();
    recorder.into_inner().unwrap();

    let cassette = Cassette::load(&path).unwrap();
    assert_eq!(cassette.records().len(), 400);
    assert!(cassette.distinct() <= 29);

    let mut replay = machine_for(&program, ReplayBackend::new(cassette));
    let replayed = replay.run(400, true);
    assert!(matches!(replayed.outcome, RunOutcome::NotHalted));
    assert_eq!(trace_lines(&recorded.trace), trace_lines(&replayed.trace));
    assert_eq!(replay.memory(), &live_memory);
}

#[test]
fn perturbed_program_misses_the_cassette() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let program = compile_program(&u15_2()).unwrap();

    let mut live = machine_for(&program, Recorder::create(RuleBackend, &path).unwrap());
    live.run(50, false);
    live.into_parts().1.into_inner().unwrap();

    let mut perturbed = program.clone();
    let a = perturbed.instructions.get_mut("A").unwrap();
    *a = a.replacen("result", "result ", 1);

    let mut replay = machine_for(&perturbed, ReplayBackend::load(&path).unwrap());
    let report = replay.run(50, false);
    assert_eq!(report.cycles, 0);
    assert!(matches!(
        report.outcome,
        RunOutcome::Failed(VmError::Backend(BackendError::CassetteMiss { .. }))
    ));
}

#[test]
fn replay_past_the_recording_misses() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let program = compile_program(&u15_2()).unwrap();

    let mut live = machine_for(&program, Recorder::create(RuleBackend, &path).unwrap());
    live.run(3, false);
    live.into_parts().1.into_inner().unwrap();

    let mut replay = machine_for(&program, ReplayBackend::load(&path).unwrap());
    let report = replay.run(1000, false);
    assert!(matches!(
        report.outcome,
        RunOutcome::Failed(VmError::Backend(BackendError::CassetteMiss { .. }))
    ));
    assert!(report.cycles >= 3);
}

#[test]
fn identical_inputs_give_identical_traces() {
    let program = compile_program(&u15_2()).unwrap();
    let first = machine_for(&program, RuleBackend).run(300, true);
    let second = machine_for(&program, RuleBackend).run(300, true);
    assert_eq!(trace_lines(&first.trace), trace_lines(&second.trace));
}
