//! Checks that a backend executes a compiled program correctly: per
//! transition, and cycle by cycle against the direct interpreter.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use serde::Serialize;

use crate::backends::CompletionBackend;
use crate::memparse::{
    apply_assignments, apply_updates, substitute, substitute_nested, MemError, Memory, Value,
    DEFAULT_MAX_PASSES,
};
use crate::promptc::{
    expected_completion, init_memory, result_template, CompileError, PromptProgram, HALT, HEAD, OP,
};
use crate::tm::{tm_step, Configuration, StepOutcome, TmError, TuringMachine};
use crate::vm::{
    cell_index, decode_state, head_position, tape_cells, Decoded, Machine, Step, VmError,
};

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Memory(#[from] MemError),
    #[error(transparent)]
    Vm(#[from] VmError),
    #[error(transparent)]
    Tm(#[from] TmError),
    #[error("program has no instruction for state `{0}`")]
    MissingInstruction(String),
}

/// One pre-processed prompt and the completion it must produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationCase {
    pub state: String,
    pub symbol: char,
    /// The state's instruction does not look at the head cell, so this case
    /// stands for both symbols.
    pub merged: bool,
    pub prompt: String,
    pub expected: String,
}

/// One case per (state, symbol) pair, with a single case for each state
/// whose instruction is unconditional. Prompts are built as the VM would:
/// a fresh memory, the head cell staged with the symbol, `@` splices applied.
pub fn enumerate_cases(
    tm: &TuringMachine,
    program: &PromptProgram,
) -> Result<Vec<VerificationCase>, VerifyError> {
    let mut cases = Vec::new();
    for state in tm.states() {
        let instruction = program
            .instruction(state)
            .ok_or_else(|| VerifyError::MissingInstruction(state.clone()))?;
        let merged = result_template(tm, state)?.conditional_value.is_none();
        let symbols: &[char] = if merged { &['0'] } else { &['0', '1'] };
        for &symbol in symbols {
            let mut memory = staged_memory(program, symbol);
            let prompt = substitute_nested(instruction, '@', &mut memory, DEFAULT_MAX_PASSES)?;
            cases.push(VerificationCase {
                state: state.clone(),
                symbol,
                merged,
                prompt,
                expected: expected_completion(tm, state, symbol)?,
            });
        }
    }
    Ok(cases)
}

/// Fresh memory with the head at 0 reading `symbol`.
fn staged_memory(program: &PromptProgram, symbol: char) -> Memory {
    let mut memory = init_memory(program, "", BigInt::from(0));
    memory.set("0", symbol.to_string());
    memory
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Byte equality after dropping one leading line break.
    Exact,
    /// Equal effect on `op`, the head and the tape after post-processing.
    Semantic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Semantic => "semantic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseResult {
    pub state: String,
    pub symbol: char,
    pub mode: Mode,
    pub pass: bool,
    pub expected: String,
    pub actual: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub passed: usize,
    pub failed: usize,
    pub cases: Vec<CaseResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.passed += other.passed;
        self.failed += other.failed;
        self.cases.extend(other.cases);
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| !c.pass)
    }
}

/// Sends every case prompt to `backend` and grades the completion. Backend
/// errors fail the case; they do not abort the run.
pub fn verify_transitions<B: CompletionBackend>(
    tm: &TuringMachine,
    program: &PromptProgram,
    cases: &[VerificationCase],
    backend: &mut B,
    mode: Mode,
) -> VerificationReport {
    let mut report = VerificationReport::default();
    for case in cases {
        let (actual, verdict) = match backend.complete(&case.prompt) {
            Ok(completion) => {
                let verdict = match mode {
                    Mode::Exact => check_exact(case, &completion),
                    Mode::Semantic => check_semantic(tm, program, case, &completion),
                };
                (Some(completion), verdict)
            }
            Err(e) => (None, Err(format!("backend error: {e}"))),
        };
        let pass = verdict.is_ok();
        if pass {
            report.passed += 1;
        } else {
            report.failed += 1;
        }
        report.cases.push(CaseResult {
            state: case.state.clone(),
            symbol: case.symbol,
            mode,
            pass,
            expected: case.expected.clone(),
            actual,
            detail: verdict.err(),
        });
    }
    report
}

fn check_exact(case: &VerificationCase, completion: &str) -> Result<(), String> {
    let body = completion.strip_prefix('\n').unwrap_or(completion);
    if body == case.expected {
        Ok(())
    } else {
        Err("completion differs from the expected text".into())
    }
}

fn check_semantic(
    tm: &TuringMachine,
    program: &PromptProgram,
    case: &VerificationCase,
    completion: &str,
) -> Result<(), String> {
    let mut memory = staged_memory(program, case.symbol);
    let tape_before = tape_cells(&memory);
    let spliced = substitute(completion, '%', &mut memory);
    let suffix = apply_assignments(&spliced, &mut memory);
    apply_updates(&suffix, &mut memory);

    let (want_op, want_head, want_tape) = match tm.transition(&case.state, case.symbol) {
        None => (HALT, BigInt::from(0), tape_before),
        Some(t) => {
            let next = program
                .instruction(&t.next)
                .ok_or_else(|| format!("program has no instruction for `{}`", t.next))?;
            let mut tape = tape_before;
            if t.write.to_string() == program.blank {
                tape.remove(&BigInt::from(0));
            } else {
                tape.insert(BigInt::from(0), t.write.to_string());
            }
            (next, BigInt::from(t.shift.offset()), tape)
        }
    };
    if memory.text(OP) != Some(want_op) {
        return Err(format!(
            "next instruction is {}",
            describe(&decode_state(&memory, program))
        ));
    }
    if memory.get(HEAD) != Some(&Value::Integer(want_head.clone())) {
        return Err(format!(
            "head is {}, expected {want_head}",
            render_opt(memory.get(HEAD))
        ));
    }
    let tape = tape_cells(&memory);
    if tape != want_tape {
        return Err(format!("tape is {tape:?}, expected {want_tape:?}"));
    }
    Ok(())
}

fn render_opt(value: Option<&Value>) -> String {
    value.map_or_else(|| "unbound".to_owned(), Value::to_string)
}

fn describe(decoded: &Decoded) -> String {
    match decoded {
        Decoded::State(q) => q.clone(),
        Decoded::Halted => HALT.to_owned(),
        Decoded::Unknown => "unknown".to_owned(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    State,
    Head,
    Tape,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivergenceReport {
    pub cycle: u64,
    pub field: Field,
    pub vm_value: String,
    pub oracle_value: String,
}

impl fmt::Display for DivergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cycle {}: {:?} differs (vm {}, oracle {})",
            self.cycle, self.field, self.vm_value, self.oracle_value
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum Lockstep {
    Equivalent { cycles: u64, halted: bool },
    Divergent(DivergenceReport),
}

impl Lockstep {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Lockstep::Equivalent { .. })
    }
}

/// Runs the prompt computer and the direct interpreter side by side and
/// compares state, head and tape after every cycle. The tape check covers
/// every cell either side touched during the cycle; the full tapes are
/// compared at the start and at the end.
pub fn lockstep_run<B: CompletionBackend>(
    program: &PromptProgram,
    tm: &TuringMachine,
    tape0: &str,
    head0: BigInt,
    max_cycles: u64,
    backend: B,
) -> Result<Lockstep, VerifyError> {
    let mut vm = Machine::new(init_memory(program, tape0, head0.clone()), backend);
    let mut oracle = Configuration::initial(tm, tape0, head0);

    if let Some(d) = compare_state(vm.memory(), program, &oracle, false, 0)
        .or_else(|| compare_head(vm.memory(), &oracle, 0))
        .or_else(|| compare_full_tape(vm.memory(), &oracle, 0))
    {
        return Ok(Lockstep::Divergent(d));
    }

    let mut cycle = 0;
    loop {
        if cycle == max_cycles {
            return Ok(finish(&vm, &oracle, cycle, false));
        }
        let event = match vm.step()? {
            Step::Ran(event) => event,
            Step::Halted => {
                return Ok(Lockstep::Divergent(DivergenceReport {
                    cycle,
                    field: Field::State,
                    vm_value: HALT.to_owned(),
                    oracle_value: oracle.state.clone(),
                }))
            }
        };
        cycle += 1;
        let read_at = oracle.head.clone();
        let halted = tm_step(&mut oracle, tm)? == StepOutcome::Halted;

        if let Some(d) = compare_state(vm.memory(), program, &oracle, halted, cycle)
            .or_else(|| compare_head(vm.memory(), &oracle, cycle))
        {
            return Ok(Lockstep::Divergent(d));
        }
        let mut touched: BTreeSet<BigInt> = event
            .bindings_changed
            .iter()
            .map(|c| c.label.as_str())
            .chain(event.updates_applied.iter().map(|u| u.label.as_str()))
            .filter_map(cell_index)
            .collect();
        touched.insert(read_at);
        for index in touched {
            if let Some(d) = compare_cell(vm.memory(), &oracle, &index, cycle) {
                return Ok(Lockstep::Divergent(d));
            }
        }
        if halted {
            return Ok(finish(&vm, &oracle, cycle, true));
        }
    }
}

fn finish<B: CompletionBackend>(
    vm: &Machine<B>,
    oracle: &Configuration,
    cycles: u64,
    halted: bool,
) -> Lockstep {
    match compare_full_tape(vm.memory(), oracle, cycles) {
        Some(d) => Lockstep::Divergent(d),
        None => Lockstep::Equivalent { cycles, halted },
    }
}

fn compare_state(
    memory: &Memory,
    program: &PromptProgram,
    oracle: &Configuration,
    oracle_halted: bool,
    cycle: u64,
) -> Option<DivergenceReport> {
    let (ok, oracle_value) = if oracle_halted {
        (memory.text(OP) == Some(HALT), HALT.to_owned())
    } else {
        // Compared by text, so states with identical instructions still match.
        let want = program.instruction(&oracle.state);
        (
            want.is_some() && memory.text(OP) == want,
            oracle.state.clone(),
        )
    };
    (!ok).then(|| DivergenceReport {
        cycle,
        field: Field::State,
        vm_value: describe(&decode_state(memory, program)),
        oracle_value,
    })
}

fn compare_head(memory: &Memory, oracle: &Configuration, cycle: u64) -> Option<DivergenceReport> {
    (head_position(memory) != Some(&oracle.head)).then(|| DivergenceReport {
        cycle,
        field: Field::Head,
        vm_value: render_opt(memory.get(HEAD)),
        oracle_value: oracle.head.to_string(),
    })
}

fn vm_cell(memory: &Memory, index: &BigInt) -> Option<String> {
    memory
        .get(&index.to_string())
        .map(Value::to_string)
        .filter(|v| v != memory.blank())
}

fn compare_cell(
    memory: &Memory,
    oracle: &Configuration,
    index: &BigInt,
    cycle: u64,
) -> Option<DivergenceReport> {
    let vm = vm_cell(memory, index);
    let want = oracle.tape.cells().get(index).map(char::to_string);
    (vm != want).then(|| DivergenceReport {
        cycle,
        field: Field::Tape,
        vm_value: format!("[{index}]={}", vm.as_deref().unwrap_or(memory.blank())),
        oracle_value: format!("[{index}]={}", oracle.tape.read(index)),
    })
}

fn compare_full_tape(
    memory: &Memory,
    oracle: &Configuration,
    cycle: u64,
) -> Option<DivergenceReport> {
    let vm = tape_cells(memory);
    let indices: BTreeSet<&BigInt> = vm.keys().chain(oracle.tape.cells().keys()).collect();
    for index in indices {
        if let Some(d) = compare_cell(memory, oracle, index, cycle) {
            return Some(d);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{rule_complete, BackendError, FnBackend, RuleBackend};
    use crate::promptc::compile_program;
    use crate::tm::{u15_2, Move};

    #[test]
    fn u15_2_has_29_cases() {
        let tm = u15_2();
        let program = compile_program(&tm).unwrap();
        let cases = enumerate_cases(&tm, &program).unwrap();
        assert_eq!(cases.len(), 29);
        let merged: Vec<&str> = cases
            .iter()
            .filter(|c| c.merged)
            .map(|c| c.state.as_str())
            .collect();
        assert_eq!(merged, ["F"]);
        let a1 = cases
            .iter()
            .find(|c| c.state == "A" && c.symbol == '1')
            .unwrap();
        assert!(a1
            .prompt
            .ends_with("if 1==1 then result = \" op=\"%[A]\" %[i]=\"1\" i+=1 \"\n$result\n"));
        assert!(a1.prompt.starts_with(&program.boot));
    }

    fn small(all_dependent: bool) -> TuringMachine {
        let b = TuringMachine::builder()
            .states(["P", "Q"])
            .symbols(['0', '1'])
            .blank('0')
            .start("P")
            .rule("P", '0', '1', Move::Right, "Q")
            .rule("P", '1', '0', Move::Left, "Q")
            .rule("Q", '0', '1', Move::Left, "P");
        let b = if all_dependent {
            b.rule("Q", '1', '1', Move::Right, "P")
        } else {
            b.rule("Q", '1', '1', Move::Left, "P")
        };
        b.build().unwrap()
    }

    #[test]
    fn case_counts_follow_conditionals() {
        let tm = small(true);
        let program = compile_program(&tm).unwrap();
        assert_eq!(enumerate_cases(&tm, &program).unwrap().len(), 4);
        let one = TuringMachine::builder()
            .states(["S"])
            .symbols(['0', '1'])
            .blank('0')
            .start("S")
            .rule("S", '0', '1', Move::Right, "S")
            .rule("S", '1', '1', Move::Right, "S")
            .build()
            .unwrap();
        let program = compile_program(&one).unwrap();
        assert_eq!(enumerate_cases(&one, &program).unwrap().len(), 1);
    }

    #[test]
    fn rule_backend_passes_both_modes() {
        let tm = u15_2();
        let program = compile_program(&tm).unwrap();
        let cases = enumerate_cases(&tm, &program).unwrap();
        for mode in [Mode::Exact, Mode::Semantic] {
            let report = verify_transitions(&tm, &program, &cases, &mut RuleBackend, mode);
            assert_eq!((report.passed, report.failed), (29, 0), "{mode}");
        }
    }

    #[test]
    fn wrong_branch_fails_one_case() {
        let tm = u15_2();
        let program = compile_program(&tm).unwrap();
        let cases = enumerate_cases(&tm, &program).unwrap();
        let a1 = cases
            .iter()
            .find(|c| c.state == "A" && c.symbol == '1')
            .unwrap()
            .prompt
            .clone();
        let mut backend = FnBackend(move |p: &str| {
            if p == a1 {
                Ok("\n\" op=\"%[B]\" %[i]=\"0\" i+=1 \"".to_owned())
            } else {
                rule_complete(p)
            }
        });
        for mode in [Mode::Exact, Mode::Semantic] {
            let report = verify_transitions(&tm, &program, &cases, &mut backend, mode);
            assert_eq!(report.failed, 1);
            let bad = report.failures().next().unwrap();
            assert_eq!((bad.state.as_str(), bad.symbol), ("A", '1'));
        }
    }

    #[test]
    fn leading_whitespace_only_fails_exact() {
        let tm = u15_2();
        let program = compile_program(&tm).unwrap();
        let cases = enumerate_cases(&tm, &program).unwrap();
        let mut backend = FnBackend(|p: &str| Ok(format!("  {}", rule_complete(p)?)));
        let exact = verify_transitions(&tm, &program, &cases, &mut backend, Mode::Exact);
        assert_eq!(exact.passed, 0);
        let semantic = verify_transitions(&tm, &program, &cases, &mut backend, Mode::Semantic);
        assert_eq!(semantic.failed, 0);
    }

    #[test]
    fn backend_errors_are_case_failures() {
        let tm = u15_2();
        let program = compile_program(&tm).unwrap();
        let cases = enumerate_cases(&tm, &program).unwrap();
        let mut backend = FnBackend(|_: &str| Err(BackendError::Transport("offline".into())));
        let report = verify_transitions(&tm, &program, &cases, &mut backend, Mode::Exact);
        assert_eq!(report.failed, 29);
        assert!(report.cases[0]
            .detail
            .as_deref()
            .unwrap()
            .contains("offline"));
    }

    #[test]
    fn lockstep_equivalent_on_blank_tape() {
        let tm = u15_2();
        let program = compile_program(&tm).unwrap();
        let result = lockstep_run(&program, &tm, "", BigInt::from(0), 500, RuleBackend).unwrap();
        assert!(result.is_equivalent(), "{result:?}");
    }

    #[test]
    fn lockstep_detects_tampered_instruction() {
        let tm = small(true);
        let mut program = compile_program(&tm).unwrap();
        // Q now moves right on 0 instead of left.
        let q = program.instructions.get_mut("Q").unwrap();
        *q = q.replacen("i-=1", "i+=1", 1);
        let result = lockstep_run(&program, &tm, "", BigInt::from(0), 50, RuleBackend).unwrap();
        match result {
            Lockstep::Divergent(d) => {
                assert_eq!(d.cycle, 2);
                assert_eq!(d.field, Field::Head);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
