//! Reference text processors driven by a backtracking regex engine. These
//! loops mirror the pattern-based originals and share no code with the
//! hand-written scanners in `promptvm::memparse`.

use std::collections::BTreeMap;

use fancy_regex::Regex;
use num_bigint::BigInt;
use promptvm::memparse::Value;

const W: &str = "[A-Za-z0-9_]";

pub struct Oracle {
    assign: Regex,
    update: Regex,
    splice_at: Regex,
    splice_pct: Regex,
}

pub type Mem = BTreeMap<String, Value>;

impl Default for Oracle {
    fn default() -> Self {
        Self::new()
    }
}

pub fn shared() -> &'static Oracle {
    static ORACLE: std::sync::OnceLock<Oracle> = std::sync::OnceLock::new();
    ORACLE.get_or_init(Oracle::new)
}

impl Oracle {
    pub fn new() -> Self {
        let assign = format!(r#"(?s)(?:((?:{W}|\-)+)\s*=\s*(?:\"((?:.*\n)|(?:[^\"]*))\"))(.*)"#);
        let update = format!(r#"({W}+)\s*((?:\+|\-)=)\s*([0-9]+)"#);
        let splice = |c: &str| format!(r#"(?s)(.*?)(?:{c}\[((?:{W}|\-)+)\])(.*)"#);
        Oracle {
            assign: Regex::new(&assign).unwrap(),
            update: Regex::new(&update).unwrap(),
            splice_at: Regex::new(&splice("@")).unwrap(),
            splice_pct: Regex::new(&splice("%")).unwrap(),
        }
    }

    fn splice_re(&self, sigil: char) -> &Regex {
        match sigil {
            '@' => &self.splice_at,
            '%' => &self.splice_pct,
            other => panic!("unsupported sigil {other}"),
        }
    }

    pub fn substitute(&self, mem: &mut Mem, text: &str, sigil: char) -> String {
        let re = self.splice_re(sigil);
        let mut caps = re.captures(text).unwrap();
        if caps.is_none() {
            return text.to_owned();
        }
        let mut out = String::new();
        let mut suffix = String::new();
        while let Some(c) = caps {
            let label = c.get(2).unwrap().as_str().to_owned();
            out.push_str(c.get(1).unwrap().as_str());
            let value = mem.entry(label).or_insert_with(|| Value::Text("0".into()));
            out.push_str(&value.to_string());
            suffix = c.get(3).unwrap().as_str().to_owned();
            caps = re.captures(&suffix).unwrap();
        }
        out.push_str(&suffix);
        out
    }

    pub fn substitute_nested(
        &self,
        mem: &mut Mem,
        text: &str,
        sigil: char,
        max_passes: usize,
    ) -> Option<String> {
        let re = self.splice_re(sigil);
        let mut text = text.to_owned();
        let mut passes = 0;
        while re.is_match(&text).unwrap() {
            if passes == max_passes {
                return None;
            }
            text = self.substitute(mem, &text, sigil);
            passes += 1;
        }
        Some(text)
    }

    pub fn assignments(&self, mem: &mut Mem, text: &str) -> String {
        let mut suffix = String::new();
        let mut caps = self.assign.captures(text).unwrap();
        while let Some(c) = caps {
            mem.insert(
                c.get(1).unwrap().as_str().to_owned(),
                Value::Text(c.get(2).unwrap().as_str().to_owned()),
            );
            suffix = c.get(3).unwrap().as_str().to_owned();
            caps = self.assign.captures(&suffix).unwrap();
        }
        suffix
    }

    pub fn updates(&self, mem: &mut Mem, text: &str) {
        for c in self.update.captures_iter(text) {
            let c = c.unwrap();
            let label = c.get(1).unwrap().as_str().to_owned();
            let mut delta: BigInt = c.get(3).unwrap().as_str().parse().unwrap();
            if c.get(2).unwrap().as_str() == "-=" {
                delta = -delta;
            }
            let next = match mem.get(&label) {
                Some(Value::Integer(n)) => n + &delta,
                _ => delta,
            };
            mem.insert(label, Value::Integer(next));
        }
    }

    pub fn post_process(&self, mem: &mut Mem, text: &str) -> String {
        let spliced = self.substitute(mem, text, '%');
        let suffix = self.assignments(mem, &spliced);
        self.updates(mem, &suffix);
        suffix
    }
}
