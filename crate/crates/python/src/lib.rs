//! Python bindings. Machines, programs and memories are classes; runs,
//! verification and lockstep checks are functions returning plain dicts.
//!
//! Every function that needs completions takes an optional `backend`: a
//! callable from prompt to completion. Without one the rule backend is used.

use num_bigint::BigInt;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use promptvm::backends::{BackendError, CompletionBackend, RuleBackend};
use promptvm::memparse::{self, Value};
use promptvm::tm::{Move, RunStatus};
use promptvm::verify::Mode;
use promptvm::vm::{decode_state, head_position, tape_cells, Decoded, VmError};

create_exception!(promptvm, PromptVmError, PyException);

fn fail(e: impl std::fmt::Display) -> PyErr {
    PromptVmError::new_err(e.to_string())
}

#[pyclass(name = "TuringMachine", module = "promptvm", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyTuringMachine(promptvm::TuringMachine);

#[pymethods]
impl PyTuringMachine {
    #[staticmethod]
    fn u15_2() -> Self {
        PyTuringMachine(promptvm::u15_2())
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        promptvm::parse_tm(text).map(PyTuringMachine).map_err(fail)
    }

    fn render(&self) -> String {
        promptvm::render_tm(&self.0)
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.0.states().to_vec()
    }

    #[getter]
    fn symbols(&self) -> Vec<char> {
        self.0.symbols().to_vec()
    }

    #[getter]
    fn blank(&self) -> char {
        self.0.blank()
    }

    #[getter]
    fn start(&self) -> &str {
        self.0.start()
    }

    #[getter]
    fn halting(&self) -> Vec<(String, char)> {
        self.0.halting().iter().cloned().collect()
    }

    /// `(write, "L" | "R", next)`, or None for a halting pair.
    fn transition(
        &self,
        state: &str,
        symbol: char,
    ) -> PyResult<Option<(char, &'static str, String)>> {
        if !self.0.has_state(state) || !self.0.symbols().contains(&symbol) {
            return Err(PyValueError::new_err(format!(
                "({state}, {symbol}) is not in the machine's domain"
            )));
        }
        Ok(self.0.transition(state, symbol).map(|t| {
            let shift = match t.shift {
                Move::Left => "L",
                Move::Right => "R",
            };
            (t.write, shift, t.next.clone())
        }))
    }

    fn __len__(&self) -> usize {
        self.0.transition_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "TuringMachine(states={}, transitions={}, start={:?})",
            self.0.states().len(),
            self.0.transition_count(),
            self.0.start()
        )
    }
}

#[pyclass(name = "PromptProgram", module = "promptvm", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyPromptProgram(promptvm::PromptProgram);

#[pymethods]
impl PyPromptProgram {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        promptvm::PromptProgram::from_json(text)
            .map(PyPromptProgram)
            .map_err(fail)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn start(&self) -> &str {
        &self.0.start
    }

    #[getter]
    fn blank(&self) -> &str {
        &self.0.blank
    }

    #[getter]
    fn boot(&self) -> &str {
        &self.0.boot
    }

    #[getter]
    fn instructions(&self) -> std::collections::BTreeMap<String, String> {
        self.0.instructions.clone()
    }

    /// Same program with one instruction text replaced.
    fn with_instruction(&self, state: &str, text: String) -> PyResult<Self> {
        let mut program = self.0.clone();
        match program.instructions.get_mut(state) {
            Some(slot) => *slot = text,
            None => {
                return Err(PyValueError::new_err(format!(
                    "no instruction for `{state}`"
                )))
            }
        }
        Ok(PyPromptProgram(program))
    }

    fn __repr__(&self) -> String {
        format!(
            "PromptProgram(start={:?}, instructions={})",
            self.0.start,
            self.0.instructions.len()
        )
    }
}

#[derive(FromPyObject, IntoPyObject)]
enum PyValue {
    Integer(BigInt),
    Text(String),
}

impl From<PyValue> for Value {
    fn from(v: PyValue) -> Self {
        match v {
            PyValue::Integer(n) => Value::Integer(n),
            PyValue::Text(s) => Value::Text(s),
        }
    }
}

impl From<&Value> for PyValue {
    fn from(v: &Value) -> Self {
        match v {
            Value::Integer(n) => PyValue::Integer(n.clone()),
            Value::Text(s) => PyValue::Text(s.clone()),
        }
    }
}

#[pyclass(name = "Memory", module = "promptvm", eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyMemory(memparse::Memory);

#[pymethods]
impl PyMemory {
    #[new]
    #[pyo3(signature = (blank = "0".to_owned(), bindings = None))]
    fn new(blank: String, bindings: Option<std::collections::BTreeMap<String, PyValue>>) -> Self {
        let mut memory = memparse::Memory::new(blank);
        for (label, value) in bindings.into_iter().flatten() {
            memory.set(label, Value::from(value));
        }
        PyMemory(memory)
    }

    #[getter]
    fn blank(&self) -> &str {
        self.0.blank()
    }

    fn __getitem__(&self, label: &str) -> PyResult<PyValue> {
        self.0
            .get(label)
            .map(PyValue::from)
            .ok_or_else(|| pyo3::exceptions::PyKeyError::new_err(label.to_owned()))
    }

    fn __setitem__(&mut self, label: String, value: PyValue) {
        self.0.set(label, Value::from(value));
    }

    fn __delitem__(&mut self, label: &str) -> PyResult<()> {
        self.0
            .remove(label)
            .map(drop)
            .ok_or_else(|| pyo3::exceptions::PyKeyError::new_err(label.to_owned()))
    }

    fn __contains__(&self, label: &str) -> bool {
        self.0.contains(label)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn to_dict(&self) -> std::collections::BTreeMap<String, PyValue> {
        self.0
            .iter()
            .map(|(label, value)| (label.to_owned(), PyValue::from(value)))
            .collect()
    }

    /// Replaces each `{sigil}[label]` once, left to right.
    fn substitute(&mut self, text: &str, sigil: char) -> String {
        memparse::substitute(text, sigil, &mut self.0)
    }

    #[pyo3(signature = (text, sigil, max_passes = memparse::DEFAULT_MAX_PASSES))]
    fn substitute_nested(
        &mut self,
        text: &str,
        sigil: char,
        max_passes: usize,
    ) -> PyResult<String> {
        memparse::substitute_nested(text, sigil, &mut self.0, max_passes).map_err(fail)
    }

    /// Applies the leading assignments and returns the unconsumed suffix.
    fn apply_assignments(&mut self, text: &str) -> String {
        memparse::apply_assignments(text, &mut self.0)
    }

    /// Applies every `label += n` / `label -= n`; returns `(label, delta)` pairs.
    fn apply_updates(&mut self, text: &str) -> Vec<(String, BigInt)> {
        memparse::apply_updates(text, &mut self.0)
            .into_iter()
            .map(|u| (u.label, u.delta))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Memory(blank={:?}, bindings={})",
            self.0.blank(),
            self.0.len()
        )
    }
}

/// A Python callable as a completion backend. The first exception it raises
/// is kept and re-raised once the Rust side has unwound.
struct CallableBackend {
    callable: Py<PyAny>,
    error: Option<PyErr>,
}

impl CompletionBackend for CallableBackend {
    fn complete(&mut self, prompt: &str) -> Result<String, BackendError> {
        let result = Python::attach(|py| {
            self.callable
                .call1(py, (prompt,))
                .and_then(|out| out.extract::<String>(py))
        });
        result.map_err(|e| {
            let message = e.to_string();
            self.error.get_or_insert(e);
            BackendError::Transport(format!("backend callable raised {message}"))
        })
    }
}

enum Backend {
    Rule(RuleBackend),
    Callable(CallableBackend),
}

impl Backend {
    fn new(callable: Option<Py<PyAny>>) -> Self {
        match callable {
            Some(callable) => Backend::Callable(CallableBackend {
                callable,
                error: None,
            }),
            None => Backend::Rule(RuleBackend),
        }
    }

    fn take_error(&mut self) -> Option<PyErr> {
        match self {
            Backend::Callable(b) => b.error.take(),
            Backend::Rule(_) => None,
        }
    }
}

impl CompletionBackend for Backend {
    fn complete(&mut self, prompt: &str) -> Result<String, BackendError> {
        match self {
            Backend::Rule(b) => b.complete(prompt),
            Backend::Callable(b) => b.complete(prompt),
        }
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(fail)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    match mode {
        "exact" => Ok(Mode::Exact),
        "semantic" => Ok(Mode::Semantic),
        other => Err(PyValueError::new_err(format!(
            "mode must be \"exact\" or \"semantic\", not {other:?}"
        ))),
    }
}

fn program_for(
    tm: &PyTuringMachine,
    program: Option<&PyPromptProgram>,
) -> PyResult<promptvm::PromptProgram> {
    match program {
        Some(p) => Ok(p.0.clone()),
        None => promptvm::compile_program(&tm.0).map_err(fail),
    }
}

#[pyfunction]
fn compile_program(tm: &PyTuringMachine) -> PyResult<PyPromptProgram> {
    promptvm::compile_program(&tm.0)
        .map(PyPromptProgram)
        .map_err(fail)
}

#[pyfunction]
#[pyo3(signature = (program, tape = "", head = BigInt::from(0)))]
fn init_memory(program: &PyPromptProgram, tape: &str, head: BigInt) -> PyMemory {
    PyMemory(promptvm::init_memory(&program.0, tape, head))
}

/// Runs the direct interpreter. Returns `status`, `steps`, `cycles`,
/// `state`, `head` and the non-blank `tape` cells.
#[pyfunction]
#[pyo3(signature = (tm, tape = "", head = BigInt::from(0), max_steps = promptvm::vm::DEFAULT_MAX_CYCLES))]
fn tm_run<'py>(
    py: Python<'py>,
    tm: &PyTuringMachine,
    tape: &str,
    head: BigInt,
    max_steps: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let result = promptvm::tm_run(&tm.0, tape, head, max_steps).map_err(fail)?;
    let out = PyDict::new(py);
    out.set_item(
        "status",
        if result.status == RunStatus::Halted {
            "halted"
        } else {
            "not_halted"
        },
    )?;
    out.set_item("steps", result.steps)?;
    out.set_item("cycles", result.cycles())?;
    out.set_item("state", &result.config.state)?;
    out.set_item("head", &result.config.head)?;
    let cells = PyDict::new(py);
    for (index, symbol) in result.config.tape.cells() {
        cells.set_item(index, symbol.to_string())?;
    }
    out.set_item("tape", cells)?;
    Ok(out)
}

/// Executes a program on the prompt computer. Returns `status`, `cycles`,
/// `state`, `head`, `tape`, the final `memory` and, with `trace=True`, one
/// dict per cycle.
#[pyfunction]
#[pyo3(signature = (program, tape = "", head = BigInt::from(0), max_cycles = promptvm::vm::DEFAULT_MAX_CYCLES, trace = false, backend = None))]
fn run<'py>(
    py: Python<'py>,
    program: &PyPromptProgram,
    tape: &str,
    head: BigInt,
    max_cycles: u64,
    trace: bool,
    backend: Option<Py<PyAny>>,
) -> PyResult<Bound<'py, PyDict>> {
    let memory = promptvm::init_memory(&program.0, tape, head);
    let mut machine = promptvm::Machine::new(memory, Backend::new(backend));
    let report = machine.run(max_cycles, trace);
    if let Some(e) = machine.backend_mut().take_error() {
        return Err(e);
    }
    let out = PyDict::new(py);
    match report.outcome {
        promptvm::RunOutcome::Halted => out.set_item("status", "halted")?,
        promptvm::RunOutcome::NotHalted => out.set_item("status", "not_halted")?,
        promptvm::RunOutcome::Failed(VmError::Backend(e)) => {
            out.set_item("status", "failed")?;
            out.set_item("error", e.to_string())?;
        }
        promptvm::RunOutcome::Failed(e) => return Err(fail(e)),
    }
    out.set_item("cycles", report.cycles)?;
    let memory = machine.memory();
    match decode_state(memory, &program.0) {
        Decoded::State(q) => out.set_item("state", q)?,
        Decoded::Halted => out.set_item("state", "halt")?,
        Decoded::Unknown => out.set_item("state", py.None())?,
    }
    out.set_item("head", head_position(memory))?;
    out.set_item("tape", tape_cells(memory))?;
    out.set_item("memory", PyMemory(memory.clone()))?;
    if trace {
        let events = PyList::empty(py);
        for event in &report.trace {
            events.append(json_to_py(py, event)?)?;
        }
        out.set_item("trace", events)?;
    }
    Ok(out)
}

/// Sends every transition prompt to the backend and grades the replies.
/// Returns the report as a dict with `passed`, `failed` and `cases`.
#[pyfunction]
#[pyo3(signature = (tm, program = None, mode = "exact", backend = None))]
fn verify<'py>(
    py: Python<'py>,
    tm: &PyTuringMachine,
    program: Option<&PyPromptProgram>,
    mode: &str,
    backend: Option<Py<PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = parse_mode(mode)?;
    let program = program_for(tm, program)?;
    let cases = promptvm::enumerate_cases(&tm.0, &program).map_err(fail)?;
    let mut backend = Backend::new(backend);
    let report = promptvm::verify_transitions(&tm.0, &program, &cases, &mut backend, mode);
    if let Some(e) = backend.take_error() {
        return Err(e);
    }
    json_to_py(py, &report)
}

/// Runs the prompt computer against the interpreter. Returns
/// `{"result": "equivalent", "cycles", "halted"}` or
/// `{"result": "divergent", "cycle", "field", "vm_value", "oracle_value"}`.
#[pyfunction]
#[pyo3(signature = (tm, tape = "", head = BigInt::from(0), max_cycles = 5000, program = None, backend = None))]
fn lockstep<'py>(
    py: Python<'py>,
    tm: &PyTuringMachine,
    tape: &str,
    head: BigInt,
    max_cycles: u64,
    program: Option<&PyPromptProgram>,
    backend: Option<Py<PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let program = program_for(tm, program)?;
    let mut backend = Backend::new(backend);
    let result = promptvm::lockstep_run(&program, &tm.0, tape, head, max_cycles, &mut backend);
    if let Some(e) = backend.take_error() {
        return Err(e);
    }
    json_to_py(py, &result.map_err(fail)?)
}

/// The rule backend's completion for a pre-processed prompt.
#[pyfunction]
fn rule_complete(prompt: &str) -> PyResult<String> {
    promptvm::backends::rule_complete(prompt).map_err(fail)
}

#[pymodule]
#[pyo3(name = "promptvm")]
fn promptvm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PromptVmError", m.py().get_type::<PromptVmError>())?;
    m.add_class::<PyTuringMachine>()?;
    m.add_class::<PyPromptProgram>()?;
    m.add_class::<PyMemory>()?;
    m.add_function(wrap_pyfunction!(compile_program, m)?)?;
    m.add_function(wrap_pyfunction!(init_memory, m)?)?;
    m.add_function(wrap_pyfunction!(tm_run, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(lockstep, m)?)?;
    m.add_function(wrap_pyfunction!(rule_complete, m)?)?;
    Ok(())
}
