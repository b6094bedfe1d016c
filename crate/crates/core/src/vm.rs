//! The fetch-execute cycle of the prompt computer.
//!
//! Each cycle fetches the instruction text in `op`, splices `@[...]`
//! references, hands the prompt to the backend, splices `%[...]` references
//! in the completion, then applies its assignments and the updates that
//! follow them. The literal instruction `halt` stops the machine before any
//! backend call.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use serde::Serialize;

use crate::backends::{BackendError, CompletionBackend};
use crate::memparse::{
    apply_assignments_logged, apply_updates, substitute, substitute_nested, AppliedUpdate,
    BindingChange, MemError, Memory, Value, DEFAULT_MAX_PASSES,
};
use crate::promptc::{PromptProgram, HALT, HEAD, OP};

pub const DEFAULT_MAX_CYCLES: u64 = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum VmError {
    #[error("`op` is not bound to instruction text")]
    NoInstruction,
    #[error(transparent)]
    Memory(#[from] MemError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// What one cycle did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub op_before: String,
    pub prompt: String,
    pub completion: String,
    pub bindings_changed: Vec<BindingChange>,
    pub updates_applied: Vec<AppliedUpdate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Halted,
    Ran(TraceEvent),
}

#[derive(Debug)]
pub enum RunOutcome {
    Halted,
    NotHalted,
    Failed(VmError),
}

impl RunOutcome {
    pub fn is_halted(&self) -> bool {
        matches!(self, RunOutcome::Halted)
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub outcome: RunOutcome,
    /// Cycles completed during this run.
    pub cycles: u64,
    /// Only filled by [`Machine::run`] with `keep_trace` set.
    pub trace: Vec<TraceEvent>,
}

pub struct Machine<B> {
    memory: Memory,
    backend: B,
    cycles: u64,
    max_passes: usize,
}

impl<B: CompletionBackend> Machine<B> {
    pub fn new(memory: Memory, backend: B) -> Self {
        Machine {
            memory,
            backend,
            cycles: 0,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }

    pub fn with_max_passes(mut self, max_passes: usize) -> Self {
        self.max_passes = max_passes;
        self
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut Memory {
        &mut self.memory
    }

    pub fn backend_mut(&mut self) -> &mut B {
        &mut self.backend
    }

    /// Backend calls completed so far.
    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn into_parts(self) -> (Memory, B) {
        (self.memory, self.backend)
    }

    pub fn is_halted(&self) -> bool {
        self.memory.text(OP) == Some(HALT)
    }

    /// Runs one compute cycle. On error, memory keeps whatever the stages
    /// before the failure did.
    pub fn step(&mut self) -> Result<Step, VmError> {
        let op = match self.memory.get(OP) {
            Some(Value::Text(op)) => op.clone(),
            _ => return Err(VmError::NoInstruction),
        };
        if op == HALT {
            return Ok(Step::Halted);
        }
        let prompt = substitute_nested(&op, '@', &mut self.memory, self.max_passes)?;
        let completion = self.backend.complete(&prompt)?;
        self.cycles += 1;
        let spliced = substitute(&completion, '%', &mut self.memory);
        let mut bindings_changed = Vec::new();
        let suffix = apply_assignments_logged(&spliced, &mut self.memory, &mut bindings_changed);
        let updates_applied = apply_updates(&suffix, &mut self.memory);
        Ok(Step::Ran(TraceEvent {
            cycle: self.cycles,
            op_before: op,
            prompt,
            completion,
            bindings_changed,
            updates_applied,
        }))
    }

    /// Steps until halt, failure or `max_cycles` cycles, handing each event
    /// to `observe`. A machine whose next instruction is `halt` reports
    /// Halted even when the cycle budget is exhausted.
    pub fn run_observed(
        &mut self,
        max_cycles: u64,
        mut observe: impl FnMut(&TraceEvent),
    ) -> RunReport {
        let mut cycles = 0;
        let outcome = loop {
            if self.is_halted() {
                break RunOutcome::Halted;
            }
            if cycles == max_cycles {
                break RunOutcome::NotHalted;
            }
            match self.step() {
                Ok(Step::Halted) => break RunOutcome::Halted,
                Ok(Step::Ran(event)) => {
                    cycles += 1;
                    observe(&event);
                }
                Err(e) => break RunOutcome::Failed(e),
            }
        };
        RunReport {
            outcome,
            cycles,
            trace: Vec::new(),
        }
    }

    pub fn run(&mut self, max_cycles: u64, keep_trace: bool) -> RunReport {
        let mut trace = Vec::new();
        let mut report = self.run_observed(max_cycles, |event| {
            if keep_trace {
                trace.push(event.clone());
            }
        });
        report.trace = trace;
        report
    }
}

/// Which program state the instruction register holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    State(String),
    Halted,
    Unknown,
}

/// Exact-match lookup of `op` among the program's instruction texts. Texts
/// shared by several states decode as Unknown.
pub fn decode_state(memory: &Memory, program: &PromptProgram) -> Decoded {
    let Some(op) = memory.text(OP) else {
        return Decoded::Unknown;
    };
    if op == HALT {
        return Decoded::Halted;
    }
    let mut found = program
        .instructions
        .iter()
        .filter(|(_, text)| text.as_str() == op)
        .map(|(label, _)| label);
    match (found.next(), found.next()) {
        (Some(label), None) => Decoded::State(label.clone()),
        _ => Decoded::Unknown,
    }
}

/// Parses a canonical decimal label (`0`, `17`, `-3`; no sign on zero, no
/// leading zeros).
pub fn cell_index(label: &str) -> Option<BigInt> {
    let digits = label.strip_prefix('-').unwrap_or(label);
    let canonical = !digits.is_empty()
        && digits.bytes().all(|b| b.is_ascii_digit())
        && (digits == "0" || !digits.starts_with('0'))
        && !(digits == "0" && label.starts_with('-'));
    canonical.then(|| label.parse().expect("validated decimal"))
}

/// The simulated tape: integer-labelled bindings whose value is not the
/// blank symbol.
pub fn tape_cells(memory: &Memory) -> BTreeMap<BigInt, String> {
    memory
        .iter()
        .filter_map(|(label, value)| {
            let index = cell_index(label)?;
            let rendered = value.to_string();
            (rendered != memory.blank()).then_some((index, rendered))
        })
        .collect()
}

pub fn head_position(memory: &Memory) -> Option<&BigInt> {
    memory.get(HEAD).and_then(Value::as_integer)
}
