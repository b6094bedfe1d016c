#![allow(dead_code)]

pub mod machines;
pub mod oracle;
pub mod table;

use std::collections::BTreeMap;

use oracle::{Mem, Oracle};
use promptvm::memparse::{
    apply_assignments, apply_updates, substitute, substitute_nested, Memory, Value,
};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct Vector {
    pub name: String,
    pub op: String,
    pub sigil: Option<char>,
    pub memory: BTreeMap<String, Value>,
    pub text: String,
    pub output: Option<String>,
    pub memory_after: BTreeMap<String, Value>,
}

pub fn load_vectors() -> Vec<Vector> {
    let raw = include_str!("../data/memparse_vectors.json");
    serde_json::from_str(raw).expect("vector corpus parses")
}

pub fn memory_from(bindings: &BTreeMap<String, Value>) -> Memory {
    let mut m = Memory::new("0");
    for (k, v) in bindings {
        m.set(k.clone(), v.clone());
    }
    m
}

pub fn memory_snapshot(memory: &Memory) -> BTreeMap<String, Value> {
    memory
        .iter()
        .map(|(k, v)| (k.to_owned(), v.clone()))
        .collect()
}

pub fn run_impl(v: &Vector) -> (Option<String>, Memory) {
    let mut mem = memory_from(&v.memory);
    let out = match v.op.as_str() {
        "substitute" => Some(substitute(&v.text, v.sigil.unwrap(), &mut mem)),
        "substitute_nested" => substitute_nested(&v.text, v.sigil.unwrap(), &mut mem, 8).ok(),
        "assignments" => Some(apply_assignments(&v.text, &mut mem)),
        "updates" => {
            apply_updates(&v.text, &mut mem);
            Some(String::new())
        }
        "post_process" => {
            let spliced = substitute(&v.text, '%', &mut mem);
            let suffix = apply_assignments(&spliced, &mut mem);
            apply_updates(&suffix, &mut mem);
            Some(suffix)
        }
        other => panic!("unknown op {other}"),
    };
    (out, mem)
}

pub fn run_oracle(o: &Oracle, v: &Vector) -> (Option<String>, Mem) {
    let mut mem: Mem = v.memory.clone();
    let out = match v.op.as_str() {
        "substitute" => Some(o.substitute(&mut mem, &v.text, v.sigil.unwrap())),
        "substitute_nested" => o.substitute_nested(&mut mem, &v.text, v.sigil.unwrap(), 8),
        "assignments" => Some(o.assignments(&mut mem, &v.text)),
        "updates" => {
            o.updates(&mut mem, &v.text);
            Some(String::new())
        }
        "post_process" => Some(o.post_process(&mut mem, &v.text)),
        other => panic!("unknown op {other}"),
    };
    (out, mem)
}
