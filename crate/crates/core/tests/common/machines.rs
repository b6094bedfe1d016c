//! Random and hand-written 2-symbol machines for property tests.

use promptvm::tm::{Move, TuringMachine};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Entry {
    Halt,
    Go(char, Move, usize),
}

fn entry(states: usize) -> impl Strategy<Value = Entry> {
    prop_oneof![
        1 => Just(Entry::Halt),
        6 => (
            prop_oneof![Just('0'), Just('1')],
            prop_oneof![Just(Move::Left), Just(Move::Right)],
            0..states
        )
            .prop_map(|(w, m, n)| Entry::Go(w, m, n)),
    ]
}

fn build(entries: &[(Entry, Entry)]) -> TuringMachine {
    let names: Vec<String> = (0..entries.len()).map(|i| format!("S{i}")).collect();
    let mut b = TuringMachine::builder()
        .states(names.clone())
        .symbols(['0', '1'])
        .blank('0')
        .start(names[0].clone());
    for (q, (on0, on1)) in entries.iter().enumerate() {
        for (symbol, e) in [('0', on0), ('1', on1)] {
            b = match e {
                Entry::Halt => b.halt(names[q].clone(), symbol),
                Entry::Go(w, m, n) => b.rule(names[q].clone(), symbol, *w, *m, names[*n].clone()),
            };
        }
    }
    b.build().expect("generated machine is valid")
}

pub fn arb_machine() -> impl Strategy<Value = TuringMachine> {
    (1usize..6).prop_flat_map(|n| {
        prop::collection::vec((entry(n), entry(n)), n).prop_map(|entries| build(&entries))
    })
}

pub fn arb_tape() -> impl Strategy<Value = String> {
    "[01]{0,12}"
}

/// Binary counter: increments the number left of the head forever.
pub fn counter() -> TuringMachine {
    promptvm::parse_tm(
        "states: inc back\nsymbols: 0 1\nblank: 0\nstart: inc\n\
         rule: inc 1 -> 0 L inc\nrule: inc 0 -> 1 R back\n\
         rule: back 0 -> 0 L inc\nrule: back 1 -> 1 R back\n",
    )
    .unwrap()
}

/// Walks right over ones and halts on the first blank.
pub fn scan_right() -> TuringMachine {
    promptvm::parse_tm(
        "states: scan\nsymbols: 0 1\nblank: 0\nstart: scan\n\
         halt: scan 0\nrule: scan 1 -> 1 R scan\n",
    )
    .unwrap()
}

/// Three-state busy beaver, with an explicit halting state reading either symbol.
pub fn busy_beaver_3() -> TuringMachine {
    promptvm::parse_tm(
        "states: a b c h\nsymbols: 0 1\nblank: 0\nstart: a\nhalt: h 0\nhalt: h 1\n\
         rule: a 0 -> 1 R b\nrule: a 1 -> 1 R h\n\
         rule: b 0 -> 0 R c\nrule: b 1 -> 1 R b\n\
         rule: c 0 -> 1 L c\nrule: c 1 -> 1 L a\n",
    )
    .unwrap()
}

/// Moves left unconditionally while flipping a cell, then stops on a one.
pub fn left_walker() -> TuringMachine {
    promptvm::parse_tm(
        "states: go mark\nsymbols: 0 1\nblank: 0\nstart: go\nhalt: mark 1\n\
         rule: go 0 -> 1 L mark\nrule: go 1 -> 1 L mark\n\
         rule: mark 0 -> 0 L go\n",
    )
    .unwrap()
}

pub fn flip() -> TuringMachine {
    promptvm::parse_tm(include_str!("../../machines/flip.tm")).unwrap()
}
