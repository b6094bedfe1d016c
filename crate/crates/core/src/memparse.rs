//! Associative string memory and the text processors that read and write it.
//!
//! Each processor is a hand-written scanner equivalent to one of three
//! pattern literals evaluated under leftmost, backtracking match semantics:
//!
//! ```text
//! assign:  (?s)(?:((?:\w|\-)+)\s*=\s*(?:\"((?:.*\n)|(?:[^\"]*))\"))(.*)
//! splice:  (?s)(.*?)(?:c\[((?:\w|\-)+)\])(.*)
//! update:  (\w+)\s*((?:\+|\-)=)\s*(\d+)
//! ```
//!
//! `\w` is `[A-Za-z0-9_]`, `\d` is `[0-9]` and `\s` is Unicode white space.
//! All delimiters are ASCII, so the scanners walk UTF-8 bytes directly and
//! only decode characters when skipping white space.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

/// Default bound on the number of splice passes made by [`substitute_nested`].
pub const DEFAULT_MAX_PASSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MemError {
    #[error("splice pattern `{sigil}[...]` still present after {passes} passes")]
    NestingOverflow { sigil: char, passes: usize },
}

/// A memory cell: either text or an arbitrary-precision integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Text(String),
    #[serde(with = "bigint_decimal")]
    Integer(BigInt),
}

impl Value {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            Value::Integer(_) => None,
        }
    }

    pub fn as_integer(&self) -> Option<&BigInt> {
        match self {
            Value::Integer(n) => Some(n),
            Value::Text(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Integer(n) => write!(f, "{n}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<BigInt> for Value {
    fn from(n: BigInt) -> Self {
        Value::Integer(n)
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Integer(BigInt::from(n))
    }
}

/// Integers travel through JSON as decimal strings so no precision is lost.
pub(crate) mod bigint_decimal {
    use num_bigint::BigInt;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(n)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Label → value map. Reading an unbound label through a splice binds it to
/// the blank symbol first, which is what makes the simulated tape unbounded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    bindings: HashMap<String, Value>,
    blank: String,
}

impl Memory {
    pub fn new(blank: impl Into<String>) -> Self {
        Memory {
            bindings: HashMap::new(),
            blank: blank.into(),
        }
    }

    pub fn blank(&self) -> &str {
        &self.blank
    }

    pub fn get(&self, label: &str) -> Option<&Value> {
        self.bindings.get(label)
    }

    pub fn text(&self, label: &str) -> Option<&str> {
        self.get(label).and_then(Value::as_text)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.bindings.contains_key(label)
    }

    /// Binds `label`, returning the previous value.
    pub fn set(&mut self, label: impl Into<String>, value: impl Into<Value>) -> Option<Value> {
        self.bindings.insert(label.into(), value.into())
    }

    pub fn remove(&mut self, label: &str) -> Option<Value> {
        self.bindings.remove(label)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Renders the value at `label` into `out`, materializing a blank binding
    /// when the label is unbound.
    fn splice_into(&mut self, label: &str, out: &mut String) {
        use std::fmt::Write;
        match self.bindings.get(label) {
            Some(Value::Text(s)) => out.push_str(s),
            Some(Value::Integer(n)) => {
                let _ = write!(out, "{n}");
            }
            None => {
                out.push_str(&self.blank);
                self.bindings
                    .insert(label.to_owned(), Value::Text(self.blank.clone()));
            }
        }
    }
}

/// One effect of [`apply_assignments_logged`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingChange {
    pub label: String,
    pub old: Option<Value>,
    pub new: Value,
}

/// One effect of [`apply_updates`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedUpdate {
    pub label: String,
    #[serde(with = "bigint_decimal")]
    pub delta: BigInt,
}

#[inline]
fn is_word(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

#[inline]
fn is_label(b: u8) -> bool {
    is_word(b) || b == b'-'
}

fn skip_while(bytes: &[u8], mut pos: usize, pred: impl Fn(u8) -> bool) -> usize {
    while pos < bytes.len() && pred(bytes[pos]) {
        pos += 1;
    }
    pos
}

/// Skips `\s*` starting at byte offset `pos`.
fn skip_space(text: &str, pos: usize) -> usize {
    let rest = &text[pos..];
    let trimmed = rest.trim_start_matches(char::is_whitespace);
    pos + (rest.len() - trimmed.len())
}

/// Finds the leftmost `sigil[label]`, returning (start, label range, end).
fn find_splice(text: &str, sigil: char) -> Option<(usize, std::ops::Range<usize>, usize)> {
    let bytes = text.as_bytes();
    let mut buf = [0u8; 4];
    let sigil = sigil.encode_utf8(&mut buf).as_bytes();
    let mut from = 0;
    while let Some(off) = find_bytes(&bytes[from..], sigil) {
        let start = from + off;
        let open = start + sigil.len();
        if bytes.get(open) == Some(&b'[') {
            let label_start = open + 1;
            let label_end = skip_while(bytes, label_start, is_label);
            if label_end > label_start && bytes.get(label_end) == Some(&b']') {
                return Some((start, label_start..label_end, label_end + 1));
            }
        }
        from = start + 1;
    }
    None
}

fn find_bytes(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.len() == 1 {
        return haystack.iter().position(|&b| b == needle[0]);
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// True if `text` contains a well-formed `sigil[label]` occurrence.
pub fn contains_splice(text: &str, sigil: char) -> bool {
    find_splice(text, sigil).is_some()
}

/// One left-to-right splice pass. Spliced values are not rescanned.
///
/// Text without any occurrence is returned unchanged.
pub fn substitute(text: &str, sigil: char, memory: &mut Memory) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some((start, label, end)) = find_splice(rest, sigil) {
        out.push_str(&rest[..start]);
        memory.splice_into(&rest[label], &mut out);
        rest = &rest[end..];
    }
    out.push_str(rest);
    out
}

/// Repeats [`substitute`] until no occurrence of `sigil[label]` remains.
pub fn substitute_nested(
    text: &str,
    sigil: char,
    memory: &mut Memory,
    max_passes: usize,
) -> Result<String, MemError> {
    let mut text = text.to_owned();
    let mut passes = 0;
    while contains_splice(&text, sigil) {
        if passes == max_passes {
            return Err(MemError::NestingOverflow {
                sigil,
                passes: max_passes,
            });
        }
        text = substitute(&text, sigil, memory);
        passes += 1;
    }
    Ok(text)
}

struct Assignment<'a> {
    label: &'a str,
    value: &'a str,
    rest: &'a str,
}

/// Tries the assign pattern anchored at `start`, which must begin a label run.
fn match_assignment_at(text: &str, start: usize) -> Option<Assignment<'_>> {
    let bytes = text.as_bytes();
    // The label run is maximal: every shorter label is followed by a label
    // character, which neither `\s` nor `=` accepts.
    let label_end = skip_while(bytes, start, is_label);
    let eq = skip_space(text, label_end);
    if bytes.get(eq) != Some(&b'=') {
        return None;
    }
    let quote = skip_space(text, eq + 1);
    if bytes.get(quote) != Some(&b'"') {
        return None;
    }
    let value_start = quote + 1;
    // First alternative `.*\n` then `"`: greedy, so it ends at the last
    // line break that is immediately followed by a quote.
    let value_end = match text[value_start..].rfind("\n\"") {
        Some(off) => value_start + off + 1,
        // Second alternative `[^"]*` then `"`: the first quote.
        None => value_start + text[value_start..].find('"')?,
    };
    Some(Assignment {
        label: &text[start..label_end],
        value: &text[value_start..value_end],
        rest: &text[value_end + 1..],
    })
}

/// Finds the leftmost assignment. A failed attempt at the start of a label run
/// fails at every later offset inside that run too, so only run starts are tried.
fn find_assignment(text: &str) -> Option<Assignment<'_>> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    while pos < bytes.len() {
        if is_label(bytes[pos]) {
            if let Some(m) = match_assignment_at(text, pos) {
                return Some(m);
            }
            pos = skip_while(bytes, pos, is_label);
        } else {
            pos += 1;
        }
    }
    None
}

/// Applies every leading `label = "value"` assignment and returns what follows
/// the last one. Returns the empty text when nothing matches.
pub fn apply_assignments(text: &str, memory: &mut Memory) -> String {
    apply_assignments_inner(text, memory, None)
}

/// [`apply_assignments`], also recording each binding change.
pub fn apply_assignments_logged(
    text: &str,
    memory: &mut Memory,
    log: &mut Vec<BindingChange>,
) -> String {
    apply_assignments_inner(text, memory, Some(log))
}

fn apply_assignments_inner(
    text: &str,
    memory: &mut Memory,
    mut log: Option<&mut Vec<BindingChange>>,
) -> String {
    let mut suffix = "";
    let mut current = text;
    while let Some(m) = find_assignment(current) {
        let old = memory.set(m.label, m.value);
        if let Some(log) = log.as_deref_mut() {
            log.push(BindingChange {
                label: m.label.to_owned(),
                old,
                new: Value::Text(m.value.to_owned()),
            });
        }
        suffix = m.rest;
        current = m.rest;
    }
    suffix.to_owned()
}

/// Applies every `label += n` / `label -= n` in textual order. A label that is
/// unbound or holds text starts from zero.
pub fn apply_updates(text: &str, memory: &mut Memory) -> Vec<AppliedUpdate> {
    let bytes = text.as_bytes();
    let mut applied = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        if !is_word(bytes[pos]) {
            pos += 1;
            continue;
        }
        let label_end = skip_while(bytes, pos, is_word);
        match match_update_tail(text, label_end) {
            Some((negate, digits, end)) => {
                let magnitude: BigInt = text[digits].parse().expect("ascii digit run");
                let delta = if negate { -magnitude } else { magnitude };
                let label = &text[pos..label_end];
                let next = match memory.get(label) {
                    Some(Value::Integer(n)) => n + &delta,
                    _ => delta.clone(),
                };
                memory.set(label, Value::Integer(next));
                applied.push(AppliedUpdate {
                    label: label.to_owned(),
                    delta,
                });
                pos = end;
            }
            None => pos = label_end,
        }
    }
    applied
}

/// Matches `\s*(\+=|-=)\s*(\d+)` at `pos`: (is decrement, digit range, end).
fn match_update_tail(text: &str, pos: usize) -> Option<(bool, std::ops::Range<usize>, usize)> {
    let bytes = text.as_bytes();
    let op = skip_space(text, pos);
    let negate = match bytes.get(op) {
        Some(b'+') => false,
        Some(b'-') => true,
        _ => return None,
    };
    if bytes.get(op + 1) != Some(&b'=') {
        return None;
    }
    let digits = skip_space(text, op + 2);
    let end = skip_while(bytes, digits, |b| b.is_ascii_digit());
    (end > digits).then_some((negate, digits..end, end))
}
