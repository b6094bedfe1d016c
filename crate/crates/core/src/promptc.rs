//! Compiles a 2-symbol Turing machine into a prompt program.
//!
//! Each state becomes one instruction text:
//!
//! ```text
//! @[boot]result = "<value on 0>"
//! if @[@[i]]==1 then result = "<value on 1>"
//! $result
//! ```
//!
//! The `if` line is omitted when both values coincide. A value either halts
//! (` op="halt" `) or writes, moves and branches
//! (` op="%[B]" %[i]="0" i+=1 `). `@[@[i]]` reads the symbol under the head
//! during pre-processing; `%[i]` and `%[B]` are resolved during
//! post-processing, so the head cell gets the write and `op` receives the
//! next instruction text.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::memparse::{Memory, Value};
use crate::tm::{Move, TuringMachine};

pub const HALT: &str = "halt";
pub const OP: &str = "op";
pub const HEAD: &str = "i";
pub const BOOT: &str = "boot";

const RESERVED: [&str; 3] = [OP, HEAD, BOOT];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("only the alphabet {{0, 1}} is supported, got {0:?}")]
    UnsupportedAlphabet(Vec<char>),
    #[error("state label `{0}` collides with a reserved or tape label")]
    LabelClash(String),
    #[error("state label `{0}` is not a valid memory label")]
    InvalidLabel(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("({state}, {symbol}) is outside the machine's domain")]
    NotInDomain { state: String, symbol: char },
    #[error("program file: {0}")]
    ProgramFile(String),
}

/// Boot text plus one instruction text per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptProgram {
    pub blank: String,
    pub start: String,
    pub boot: String,
    pub instructions: BTreeMap<String, String>,
}

impl PromptProgram {
    pub fn from_json(text: &str) -> Result<Self, CompileError> {
        let program: PromptProgram =
            serde_json::from_str(text).map_err(|e| CompileError::ProgramFile(e.to_string()))?;
        if !program.instructions.contains_key(&program.start) {
            return Err(CompileError::ProgramFile(format!(
                "start state `{}` has no instruction",
                program.start
            )));
        }
        Ok(program)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn instruction(&self, state: &str) -> Option<&str> {
        self.instructions.get(state).map(String::as_str)
    }
}

/// The result values of one state: `default_value` when the head reads `0`
/// (or always, if unconditional) and `conditional_value` when it reads `1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultTemplate {
    pub default_value: String,
    pub conditional_value: Option<String>,
}

impl ResultTemplate {
    pub fn default_line(&self) -> String {
        format!("result = \"{}\"", self.default_value)
    }

    pub fn conditional_line(&self) -> Option<String> {
        self.conditional_value
            .as_ref()
            .map(|v| format!("if @[@[i]]==1 then result = \"{v}\""))
    }
}

fn check_alphabet(tm: &TuringMachine) -> Result<(), CompileError> {
    let mut symbols = tm.symbols().to_vec();
    symbols.sort_unstable();
    if symbols != ['0', '1'] {
        return Err(CompileError::UnsupportedAlphabet(tm.symbols().to_vec()));
    }
    Ok(())
}

fn halt_value() -> String {
    format!(" op=\"{HALT}\" ")
}

fn move_value(write: char, shift: Move, next: &str) -> String {
    let sign = match shift {
        Move::Left => '-',
        Move::Right => '+',
    };
    format!(" op=\"%[{next}]\" %[i]=\"{write}\" i{sign}=1 ")
}

/// The canonical result value for reading `symbol` in `state`, without the
/// delimiting quotes.
pub fn result_value(tm: &TuringMachine, state: &str, symbol: char) -> Result<String, CompileError> {
    check_alphabet(tm)?;
    if !tm.has_state(state) {
        return Err(CompileError::UnknownState(state.to_owned()));
    }
    if tm.is_halting(state, symbol) {
        return Ok(halt_value());
    }
    match tm.transition(state, symbol) {
        Some(t) => Ok(move_value(t.write, t.shift, &t.next)),
        None => Err(CompileError::NotInDomain {
            state: state.to_owned(),
            symbol,
        }),
    }
}

/// The exact completion text a conforming backend returns for (`state`,
/// `symbol`), after its leading line break.
pub fn expected_completion(
    tm: &TuringMachine,
    state: &str,
    symbol: char,
) -> Result<String, CompileError> {
    Ok(format!("\"{}\"", result_value(tm, state, symbol)?))
}

pub fn result_template(tm: &TuringMachine, state: &str) -> Result<ResultTemplate, CompileError> {
    let on0 = result_value(tm, state, '0')?;
    let on1 = result_value(tm, state, '1')?;
    Ok(ResultTemplate {
        conditional_value: (on1 != on0).then_some(on1),
        default_value: on0,
    })
}

pub fn compile_instruction(tm: &TuringMachine, state: &str) -> Result<String, CompileError> {
    let template = result_template(tm, state)?;
    let mut text = format!("@[{BOOT}]{}\n", template.default_line());
    if let Some(line) = template.conditional_line() {
        text.push_str(&line);
        text.push('\n');
    }
    text.push_str("$result\n");
    Ok(text)
}

fn boot_block(out: &mut String, condition: char, default: &str, alternative: &str) {
    let answer = if condition == '1' {
        alternative
    } else {
        default
    };
    out.push_str(&format!(
        "result = \"{default}\"\nif {condition}==1 then result = \"{alternative}\"\n$result\n\"{answer}\"\n\n"
    ));
}

/// Few-shot preamble demonstrating conditional assignment. Exemplar values
/// come from the machine's own transitions so they look like the run-time
/// prompts.
pub fn compile_boot(tm: &TuringMachine) -> Result<String, CompileError> {
    check_alphabet(tm)?;
    let mut right = Vec::new();
    let mut left = Vec::new();
    for (_, _, t) in tm.transitions() {
        let value = move_value(t.write, t.shift, &t.next);
        let bucket = match t.shift {
            Move::Right => &mut right,
            Move::Left => &mut left,
        };
        if !bucket.contains(&value) {
            bucket.push(value);
        }
    }
    let pick = |values: &[String], n: usize, shift: Move| {
        values
            .get(n)
            .or_else(|| values.first())
            .cloned()
            .unwrap_or_else(|| move_value('1', shift, tm.start()))
    };
    let r1 = pick(&right, 0, Move::Right);
    let r2 = pick(&right, 1, Move::Right);
    let l1 = pick(&left, 0, Move::Left);
    let l2 = pick(&left, 1, Move::Left);
    let halt = halt_value();

    let blocks: [(char, &str, &str); 13] = [
        ('0', &r1, &l1),
        ('1', &r1, &l1),
        ('0', &l1, &r1),
        ('1', &l1, &r1),
        ('0', &r2, &l2),
        ('1', &r2, &l2),
        ('0', &l2, &r2),
        ('1', &l2, &r2),
        ('0', &l1, &halt),
        ('1', &l1, &halt),
        ('0', &r2, &l1),
        ('1', &r2, &l1),
        ('1', &l2, &r1),
    ];
    let mut boot = String::from("\n");
    for (condition, default, alternative) in blocks {
        boot_block(&mut boot, condition, default, alternative);
    }
    Ok(boot)
}

fn is_memory_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn is_integer_label(label: &str) -> bool {
    let digits = label.strip_prefix('-').unwrap_or(label);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

pub fn compile_program(tm: &TuringMachine) -> Result<PromptProgram, CompileError> {
    check_alphabet(tm)?;
    for q in tm.states() {
        if !is_memory_label(q) {
            return Err(CompileError::InvalidLabel(q.clone()));
        }
        if RESERVED.contains(&q.as_str()) || is_integer_label(q) {
            return Err(CompileError::LabelClash(q.clone()));
        }
    }
    let instructions = tm
        .states()
        .iter()
        .map(|q| Ok((q.clone(), compile_instruction(tm, q)?)))
        .collect::<Result<BTreeMap<_, _>, CompileError>>()?;
    Ok(PromptProgram {
        blank: tm.blank().to_string(),
        start: tm.start().to_owned(),
        boot: compile_boot(tm)?,
        instructions,
    })
}

/// Memory ready to run: boot, instructions, tape cells `0..len(tape0)`,
/// head `i` and `op` set to the start instruction.
pub fn init_memory(program: &PromptProgram, tape0: &str, head0: BigInt) -> Memory {
    let mut memory = Memory::new(program.blank.clone());
    memory.set(BOOT, program.boot.clone());
    for (label, text) in &program.instructions {
        memory.set(label.clone(), text.clone());
    }
    for (loc, symbol) in tape0.chars().enumerate() {
        memory.set(loc.to_string(), symbol.to_string());
    }
    memory.set(HEAD, Value::Integer(head0));
    let start = program
        .instructions
        .get(&program.start)
        .cloned()
        .unwrap_or_default();
    memory.set(OP, start);
    memory
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tm::u15_2;

    #[test]
    fn values_for_state_a() {
        let tm = u15_2();
        let t = result_template(&tm, "A").unwrap();
        assert_eq!(t.default_value, r#" op="%[B]" %[i]="0" i+=1 "#);
        assert_eq!(
            t.conditional_value.as_deref(),
            Some(r#" op="%[A]" %[i]="1" i+=1 "#)
        );
    }

    #[test]
    fn state_f_is_unconditional() {
        let tm = u15_2();
        let text = compile_instruction(&tm, "F").unwrap();
        assert_eq!(
            text,
            "@[boot]result = \" op=\"%[D]\" %[i]=\"1\" i-=1 \"\n$result\n"
        );
    }

    #[test]
    fn state_j_halts_on_one() {
        let tm = u15_2();
        let text = compile_instruction(&tm, "J").unwrap();
        assert_eq!(
            text,
            "@[boot]result = \" op=\"%[K]\" %[i]=\"1\" i-=1 \"\n\
             if @[@[i]]==1 then result = \" op=\"halt\" \"\n$result\n"
        );
    }

    #[test]
    fn expected_completions() {
        let tm = u15_2();
        assert_eq!(
            expected_completion(&tm, "A", '0').unwrap(),
            r#"" op="%[B]" %[i]="0" i+=1 ""#
        );
        assert_eq!(
            expected_completion(&tm, "A", '1').unwrap(),
            r#"" op="%[A]" %[i]="1" i+=1 ""#
        );
        assert_eq!(
            expected_completion(&tm, "J", '1').unwrap(),
            r#"" op="halt" ""#
        );
    }

    #[test]
    fn boot_shape() {
        let boot = compile_boot(&u15_2()).unwrap();
        assert!(!boot.contains("@["));
        assert!(
            boot.contains("if 1==1 then result = \" op=\"halt\" \"\n$result\n\" op=\"halt\" \"\n")
        );
        let blocks: Vec<&str> = boot.trim_matches('\n').split("\n\n").collect();
        assert_eq!(blocks.len(), 13);
        for block in blocks {
            let lines: Vec<&str> = block.lines().collect();
            assert_eq!(lines.len(), 4);
            assert_eq!(lines[2], "$result");
            let default = lines[0].strip_prefix("result = ").unwrap();
            let (cond, alt) = lines[1]
                .strip_prefix("if ")
                .unwrap()
                .split_once("==1 then result = ")
                .unwrap();
            let expected = if cond == "1" { alt } else { default };
            assert_eq!(lines[3], expected);
        }
    }

    #[test]
    fn program_for_u15_2() {
        let program = compile_program(&u15_2()).unwrap();
        let keys: String = program.instructions.keys().map(String::as_str).collect();
        assert_eq!(keys, "ABCDEFGHIJKLMNO");
        assert_eq!(program.start, "A");
        assert_eq!(program.blank, "0");
        for text in program.instructions.values() {
            assert!(text.starts_with("@[boot]"));
            assert!(text.ends_with("$result\n"));
        }
    }

    fn machine(states: &[&str], symbols: &[char]) -> TuringMachine {
        let mut b = TuringMachine::builder()
            .states(states.iter().copied())
            .symbols(symbols.iter().copied())
            .blank(symbols[0])
            .start(states[0]);
        for q in states {
            for &s in symbols {
                b = b.rule(*q, s, s, Move::Right, *q);
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn reserved_and_numeric_labels_clash() {
        for bad in ["op", "i", "boot", "12", "-3"] {
            assert_eq!(
                compile_program(&machine(&[bad], &['0', '1'])),
                Err(CompileError::LabelClash(bad.into()))
            );
        }
        assert_eq!(
            compile_program(&machine(&["a.b"], &['0', '1'])),
            Err(CompileError::InvalidLabel("a.b".into()))
        );
    }

    #[test]
    fn wider_alphabets_are_rejected() {
        let tm = machine(&["S"], &['0', '1', '2']);
        assert!(matches!(
            compile_program(&tm),
            Err(CompileError::UnsupportedAlphabet(_))
        ));
        assert!(matches!(
            compile_boot(&tm),
            Err(CompileError::UnsupportedAlphabet(_))
        ));
    }

    #[test]
    fn init_memory_bindings() {
        let program = compile_program(&u15_2()).unwrap();
        let m = init_memory(&program, "101", BigInt::from(0));
        assert_eq!(m.text("0"), Some("1"));
        assert_eq!(m.text("1"), Some("0"));
        assert_eq!(m.text("2"), Some("1"));
        assert_eq!(m.get("i"), Some(&Value::from(0)));
        assert_eq!(m.text("op"), program.instruction("A"));
        assert_eq!(m.text("boot"), Some(program.boot.as_str()));
        assert_eq!(m.len(), 3 + 15 + 3);

        let m = init_memory(&program, "", BigInt::from(-3));
        assert_eq!(m.get("i"), Some(&Value::from(-3)));
        assert!(!m.contains("0"));
    }

    #[test]
    fn program_json_preserves_text() {
        let program = compile_program(&machine(&["S0", "S1"], &['0', '1'])).unwrap();
        let back = PromptProgram::from_json(&program.to_json()).unwrap();
        assert_eq!(back, program);
        assert!(PromptProgram::from_json(
            r#"{"blank":"0","start":"X","boot":"","instructions":{}}"#
        )
        .is_err());
    }
}
