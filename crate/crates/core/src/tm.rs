//! Direct Turing machine interpreter. This is the ground truth the prompt
//! computer is checked against, so it stays deliberately plain.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::One;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TmError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing rule for ({state}, {symbol})")]
    MissingRule { state: String, symbol: char },
    #[error("duplicate rule for ({state}, {symbol})")]
    DuplicateRule { state: String, symbol: char },
    #[error("({state}, {symbol}) is a halting pair and cannot also have a rule")]
    RuleOnHaltingPair { state: String, symbol: char },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(char),
    #[error("missing `{0}:` directive")]
    MissingDirective(&'static str),
    #[error("machine has no states")]
    NoStates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Move {
    Left,
    Right,
}

impl Move {
    pub fn offset(self) -> i64 {
        match self {
            Move::Left => -1,
            Move::Right => 1,
        }
    }

    fn token(self) -> char {
        match self {
            Move::Left => 'L',
            Move::Right => 'R',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub write: char,
    pub shift: Move,
    pub next: String,
}

impl Transition {
    pub fn new(write: char, shift: Move, next: impl Into<String>) -> Self {
        Transition {
            write,
            shift,
            next: next.into(),
        }
    }
}

/// The tuple (Q, Σ, b, q₀, T, f). Immutable once built; every constructor
/// validates that f is total on (Q×Σ)∖T.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuringMachine {
    states: Vec<String>,
    symbols: Vec<char>,
    blank: char,
    start: String,
    halting: BTreeSet<(String, char)>,
    rules: BTreeMap<String, BTreeMap<char, Transition>>,
}

/// Accumulates machine parts before validation.
#[derive(Debug, Clone, Default)]
pub struct MachineBuilder {
    states: Vec<String>,
    symbols: Vec<char>,
    blank: Option<char>,
    start: Option<String>,
    halting: Vec<(String, char)>,
    rules: Vec<(String, char, Transition)>,
}

impl MachineBuilder {
    pub fn states<I, S>(mut self, states: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.states = states.into_iter().map(Into::into).collect();
        self
    }

    pub fn symbols(mut self, symbols: impl IntoIterator<Item = char>) -> Self {
        self.symbols = symbols.into_iter().collect();
        self
    }

    pub fn blank(mut self, blank: char) -> Self {
        self.blank = Some(blank);
        self
    }

    pub fn start(mut self, start: impl Into<String>) -> Self {
        self.start = Some(start.into());
        self
    }

    pub fn halt(mut self, state: impl Into<String>, symbol: char) -> Self {
        self.halting.push((state.into(), symbol));
        self
    }

    pub fn rule(
        mut self,
        state: impl Into<String>,
        read: char,
        write: char,
        shift: Move,
        next: impl Into<String>,
    ) -> Self {
        self.rules
            .push((state.into(), read, Transition::new(write, shift, next)));
        self
    }

    pub fn build(self) -> Result<TuringMachine, TmError> {
        if self.states.is_empty() {
            return Err(TmError::NoStates);
        }
        let blank = self.blank.ok_or(TmError::MissingDirective("blank"))?;
        let start = self.start.ok_or(TmError::MissingDirective("start"))?;
        let known_state = |s: &str| -> Result<(), TmError> {
            if self.states.iter().any(|q| q == s) {
                Ok(())
            } else {
                Err(TmError::UnknownState(s.to_owned()))
            }
        };
        let known_symbol = |c: char| -> Result<(), TmError> {
            if self.symbols.contains(&c) {
                Ok(())
            } else {
                Err(TmError::UnknownSymbol(c))
            }
        };
        known_symbol(blank)?;
        known_state(&start)?;

        let mut halting = BTreeSet::new();
        for (q, s) in self.halting {
            known_state(&q)?;
            known_symbol(s)?;
            halting.insert((q, s));
        }

        let mut rules: BTreeMap<String, BTreeMap<char, Transition>> = BTreeMap::new();
        for (q, s, t) in self.rules {
            known_state(&q)?;
            known_symbol(s)?;
            known_symbol(t.write)?;
            known_state(&t.next)?;
            if halting.contains(&(q.clone(), s)) {
                return Err(TmError::RuleOnHaltingPair {
                    state: q,
                    symbol: s,
                });
            }
            let row = rules.entry(q.clone()).or_default();
            if row.insert(s, t).is_some() {
                return Err(TmError::DuplicateRule {
                    state: q,
                    symbol: s,
                });
            }
        }

        for q in &self.states {
            for &s in &self.symbols {
                let defined = rules.get(q).is_some_and(|row| row.contains_key(&s));
                if !defined && !halting.contains(&(q.clone(), s)) {
                    return Err(TmError::MissingRule {
                        state: q.clone(),
                        symbol: s,
                    });
                }
            }
        }

        Ok(TuringMachine {
            states: self.states,
            symbols: self.symbols,
            blank,
            start,
            halting,
            rules,
        })
    }
}

impl TuringMachine {
    pub fn builder() -> MachineBuilder {
        MachineBuilder::default()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn blank(&self) -> char {
        self.blank
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn halting(&self) -> &BTreeSet<(String, char)> {
        &self.halting
    }

    pub fn has_state(&self, q: &str) -> bool {
        self.states.iter().any(|s| s == q)
    }

    pub fn is_halting(&self, q: &str, s: char) -> bool {
        // Avoids allocating a key for the common non-halting lookup.
        !self.halting.is_empty() && self.halting.iter().any(|(hq, hs)| hq == q && *hs == s)
    }

    pub fn transition(&self, q: &str, s: char) -> Option<&Transition> {
        self.rules.get(q).and_then(|row| row.get(&s))
    }

    /// All defined transitions in (state, symbol) order.
    pub fn transitions(&self) -> impl Iterator<Item = (&str, char, &Transition)> {
        self.rules
            .iter()
            .flat_map(|(q, row)| row.iter().map(move |(s, t)| (q.as_str(), *s, t)))
    }

    pub fn transition_count(&self) -> usize {
        self.rules.values().map(BTreeMap::len).sum()
    }
}

type TableRow = (
    &'static str,
    (char, Move, &'static str),
    Option<(char, Move, &'static str)>,
);

/// The 15-state, 2-symbol universal machine.
pub fn u15_2() -> TuringMachine {
    use Move::{Left as L, Right as R};
    // (state, on 0, on 1); `None` marks the halting pair.
    #[rustfmt::skip]
    let table: [TableRow; 15] = [
        ("A", ('0', R, "B"), Some(('1', R, "A"))),
        ("B", ('1', R, "C"), Some(('1', R, "A"))),
        ("C", ('0', L, "G"), Some(('0', L, "E"))),
        ("D", ('0', L, "F"), Some(('1', L, "E"))),
        ("E", ('1', R, "A"), Some(('1', L, "D"))),
        ("F", ('1', L, "D"), Some(('1', L, "D"))),
        ("G", ('0', R, "H"), Some(('1', L, "G"))),
        ("H", ('1', L, "I"), Some(('1', L, "G"))),
        ("I", ('0', R, "A"), Some(('1', L, "J"))),
        ("J", ('1', L, "K"), None),
        ("K", ('0', R, "L"), Some(('1', R, "N"))),
        ("L", ('0', R, "M"), Some(('1', R, "L"))),
        ("M", ('0', L, "B"), Some(('1', R, "L"))),
        ("N", ('0', L, "C"), Some(('0', R, "O"))),
        ("O", ('0', R, "N"), Some(('1', R, "N"))),
    ];
    let mut b = TuringMachine::builder()
        .states(table.iter().map(|row| row.0))
        .symbols(['0', '1'])
        .blank('0')
        .start("A");
    for (q, (w0, m0, n0), on1) in table {
        b = b.rule(q, '0', w0, m0, n0);
        b = match on1 {
            Some((w1, m1, n1)) => b.rule(q, '1', w1, m1, n1),
            None => b.halt(q, '1'),
        };
    }
    b.build().expect("builtin machine is well formed")
}

/// Sparse bi-infinite tape kept in blank-pruned normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tape {
    cells: BTreeMap<BigInt, char>,
    blank: char,
}

impl Tape {
    pub fn new(blank: char) -> Self {
        Tape {
            cells: BTreeMap::new(),
            blank,
        }
    }

    /// Cells `0..len` from `symbols`.
    pub fn from_symbols(symbols: &str, blank: char) -> Self {
        let mut tape = Tape::new(blank);
        for (i, c) in symbols.chars().enumerate() {
            tape.write(BigInt::from(i), c);
        }
        tape
    }

    pub fn blank(&self) -> char {
        self.blank
    }

    pub fn read(&self, at: &BigInt) -> char {
        self.cells.get(at).copied().unwrap_or(self.blank)
    }

    pub fn write(&mut self, at: BigInt, symbol: char) {
        if symbol == self.blank {
            self.cells.remove(&at);
        } else {
            self.cells.insert(at, symbol);
        }
    }

    /// Non-blank cells in index order.
    pub fn cells(&self) -> &BTreeMap<BigInt, char> {
        &self.cells
    }

    /// The symbols from the leftmost to the rightmost non-blank cell, with
    /// the index of the first one. `None` for an all-blank tape.
    pub fn span(&self) -> Option<(BigInt, String)> {
        let (first, _) = self.cells.first_key_value()?;
        let (last, _) = self.cells.last_key_value()?;
        let mut out = String::new();
        let mut i = first.clone();
        while &i <= last {
            out.push(self.read(&i));
            i += 1;
        }
        Some((first.clone(), out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub state: String,
    pub head: BigInt,
    pub tape: Tape,
}

impl Configuration {
    pub fn initial(tm: &TuringMachine, tape0: &str, head0: BigInt) -> Self {
        Configuration {
            state: tm.start.clone(),
            head: head0,
            tape: Tape::from_symbols(tape0, tm.blank),
        }
    }

    pub fn current_symbol(&self) -> char {
        self.tape.read(&self.head)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "state {} head {}", self.state, self.head)?;
        match self.tape.span() {
            Some((from, symbols)) => write!(f, " tape {symbols}@{from}"),
            None => write!(f, " tape blank"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Halted,
    Advanced,
}

/// Applies one transition in place. A halting pair leaves the configuration
/// untouched: no write and no move.
pub fn tm_step(config: &mut Configuration, tm: &TuringMachine) -> Result<StepOutcome, TmError> {
    if !tm.has_state(&config.state) {
        return Err(TmError::UnknownState(config.state.clone()));
    }
    let symbol = config.current_symbol();
    if !tm.symbols.contains(&symbol) {
        return Err(TmError::UnknownSymbol(symbol));
    }
    if tm.is_halting(&config.state, symbol) {
        return Ok(StepOutcome::Halted);
    }
    let t = tm
        .transition(&config.state, symbol)
        .expect("validated machines are total off the halting set");
    config.tape.write(config.head.clone(), t.write);
    match t.shift {
        Move::Left => config.head -= BigInt::one(),
        Move::Right => config.head += BigInt::one(),
    }
    if config.state != t.next {
        config.state.clone_from(&t.next);
    }
    Ok(StepOutcome::Advanced)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Halted,
    NotHalted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmRun {
    pub status: RunStatus,
    pub steps: u64,
    pub config: Configuration,
}

impl TmRun {
    /// Compute cycles used: the transitions plus the cycle that recognized
    /// the halting pair, if any.
    pub fn cycles(&self) -> u64 {
        self.steps + u64::from(self.status == RunStatus::Halted)
    }
}

/// Runs from state q₀ with cells `0..len(tape0)` initialized and the head at
/// `head0`. `steps` counts applied transitions. Recognizing a halting pair
/// costs one cycle of the `max_steps` budget, the same as the prompt
/// computer's halting cycle, so both report the same status at the limit.
pub fn tm_run(
    tm: &TuringMachine,
    tape0: &str,
    head0: BigInt,
    max_steps: u64,
) -> Result<TmRun, TmError> {
    let mut config = Configuration::initial(tm, tape0, head0);
    let mut steps = 0;
    let mut cycles = 0;
    loop {
        if cycles == max_steps {
            return Ok(TmRun {
                status: RunStatus::NotHalted,
                steps,
                config,
            });
        }
        cycles += 1;
        match tm_step(&mut config, tm)? {
            StepOutcome::Halted => {
                return Ok(TmRun {
                    status: RunStatus::Halted,
                    steps,
                    config,
                })
            }
            StepOutcome::Advanced => steps += 1,
        }
    }
}

fn syntax(line: usize, message: impl Into<String>) -> TmError {
    TmError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_symbol(line: usize, token: &str) -> Result<char, TmError> {
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(syntax(
            line,
            format!("symbol `{token}` must be one character"),
        )),
    }
}

/// Parses the line-based machine format:
///
/// ```text
/// states: A B
/// symbols: 0 1
/// blank: 0
/// start: A
/// halt: B 1
/// rule: A 0 -> 1 R B
/// ```
pub fn parse_tm(text: &str) -> Result<TuringMachine, TmError> {
    let mut b = TuringMachine::builder();
    let mut seen_states = false;
    let mut seen_symbols = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, rest) = content
            .split_once(':')
            .ok_or_else(|| syntax(line, "expected `key: value`"))?;
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        match key.trim() {
            "states" => {
                if seen_states {
                    return Err(syntax(line, "repeated `states:`"));
                }
                seen_states = true;
                b = b.states(tokens);
            }
            "symbols" => {
                if seen_symbols {
                    return Err(syntax(line, "repeated `symbols:`"));
                }
                seen_symbols = true;
                let symbols = tokens
                    .iter()
                    .map(|t| parse_symbol(line, t))
                    .collect::<Result<Vec<_>, _>>()?;
                b = b.symbols(symbols);
            }
            "blank" => match tokens.as_slice() {
                [s] => b = b.blank(parse_symbol(line, s)?),
                _ => return Err(syntax(line, "`blank:` takes one symbol")),
            },
            "start" => match tokens.as_slice() {
                [q] => b = b.start(*q),
                _ => return Err(syntax(line, "`start:` takes one state")),
            },
            "halt" => match tokens.as_slice() {
                [q, s] => b = b.halt(*q, parse_symbol(line, s)?),
                _ => return Err(syntax(line, "`halt:` takes a state and a symbol")),
            },
            "rule" => match tokens.as_slice() {
                [q, s, "->", w, m, n] => {
                    let shift = match *m {
                        "L" => Move::Left,
                        "R" => Move::Right,
                        other => return Err(syntax(line, format!("move `{other}` is not L or R"))),
                    };
                    b = b.rule(
                        *q,
                        parse_symbol(line, s)?,
                        parse_symbol(line, w)?,
                        shift,
                        *n,
                    );
                }
                _ => return Err(syntax(line, "expected `rule: STATE SYM -> SYM L|R STATE`")),
            },
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }
    if !seen_states {
        return Err(TmError::MissingDirective("states"));
    }
    if !seen_symbols {
        return Err(TmError::MissingDirective("symbols"));
    }
    b.build()
}

/// Canonical text form; rules are sorted by (state, symbol).
pub fn render_tm(tm: &TuringMachine) -> String {
    let mut out = String::new();
    let join = |items: Vec<String>| items.join(" ");
    out.push_str(&format!("states: {}\n", tm.states.join(" ")));
    out.push_str(&format!(
        "symbols: {}\n",
        join(tm.symbols.iter().map(char::to_string).collect())
    ));
    out.push_str(&format!("blank: {}\n", tm.blank));
    out.push_str(&format!("start: {}\n", tm.start));
    for (q, s) in &tm.halting {
        out.push_str(&format!("halt: {q} {s}\n"));
    }
    for (q, s, t) in tm.transitions() {
        out.push_str(&format!(
            "rule: {q} {s} -> {} {} {}\n",
            t.write,
            t.shift.token(),
            t.next
        ));
    }
    out
}
