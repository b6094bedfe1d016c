//! A stored-instruction computer whose processor is a text completion
//! backend, a compiler from 2-symbol Turing machines to programs for it, and
//! the tools that check the two agree.
//!
//! * [`memparse`]: associative memory and the splice, assignment and update
//!   text processors.
//! * [`vm`]: the fetch-execute cycle.
//! * [`backends`]: completion backends (rule evaluator, HTTP, record/replay).
//! * [`tm`]: direct Turing machine interpreter and the built-in U(15,2).
//! * [`promptc`]: machine to prompt-program compiler.
//! * [`verify`]: per-transition verification and lockstep equivalence.

pub mod backends;
pub mod memparse;
pub mod promptc;
pub mod tm;
pub mod verify;
pub mod vm;

pub use backends::{CompletionBackend, RuleBackend};
pub use memparse::{Memory, Value};
pub use promptc::{compile_program, init_memory, PromptProgram};
pub use tm::{parse_tm, render_tm, tm_run, u15_2, TuringMachine};
pub use verify::{enumerate_cases, lockstep_run, verify_transitions, Lockstep, Mode};
pub use vm::{Machine, RunOutcome, RunReport};
