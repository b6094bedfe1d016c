use promptvm::tm::{Move, TuringMachine};

/// The universal machine's transition table, row by row as printed: one
/// entry per state A..O as `write,move,next`.
pub const ROW_0: [&str; 15] = [
    "0,+,B", "1,+,C", "0,-,G", "0,-,F", "1,+,A", "1,-,D", "0,+,H", "1,-,I", "0,+,A", "1,-,K",
    "0,+,L", "0,+,M", "0,-,B", "0,-,C", "0,+,N",
];
pub const ROW_1: [&str; 15] = [
    "1,+,A", "1,+,A", "0,-,E", "1,-,E", "1,-,D", "1,-,D", "1,-,G", "1,-,G", "1,-,J", "halt",
    "1,+,N", "1,+,L", "1,+,L", "0,+,O", "1,+,N",
];

/// Panics unless `tm` has exactly the states, alphabet and transitions
/// of the table.
pub fn assert_matches_table(tm: &TuringMachine) {
    let states: Vec<String> = "ABCDEFGHIJKLMNO".chars().map(String::from).collect();
    assert_eq!(tm.states(), states.as_slice());
    assert_eq!(tm.symbols(), ['0', '1']);
    assert_eq!(tm.blank(), '0');
    assert_eq!(tm.start(), "A");
    let mut defined = 0;
    for (row, symbol) in [(ROW_0, '0'), (ROW_1, '1')] {
        for (q, cell) in states.iter().zip(row) {
            if cell == "halt" {
                assert!(tm.is_halting(q, symbol));
                assert!(tm.transition(q, symbol).is_none());
                continue;
            }
            let parts: Vec<&str> = cell.split(',').collect();
            let t = tm.transition(q, symbol).unwrap();
            assert_eq!(t.write.to_string(), parts[0], "{q}{symbol}");
            let want = if parts[1] == "+" {
                Move::Right
            } else {
                Move::Left
            };
            assert_eq!(t.shift, want, "{q}{symbol}");
            assert_eq!(t.next, parts[2], "{q}{symbol}");
            defined += 1;
        }
    }
    assert_eq!(defined, 29);
    assert_eq!(tm.transition_count(), 29);
    assert_eq!(
        tm.halting().iter().collect::<Vec<_>>(),
        [&("J".to_string(), '1')]
    );
}
