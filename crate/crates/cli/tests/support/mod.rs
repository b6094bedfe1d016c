#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

pub fn promptvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_promptvm"))
        .args(args)
        .output()
        .expect("binary starts")
}

pub fn code(output: &Output) -> i32 {
    output.status.code().expect("exited normally")
}

pub fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

pub fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

/// The last line written to stderr, parsed as JSON.
pub fn summary(output: &Output) -> serde_json::Value {
    let err = stderr(output);
    let line = err.lines().last().expect("summary line");
    serde_json::from_str(line).expect("summary is JSON")
}

pub fn machine_file(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/machines")
        .join(name)
        .to_string_lossy()
        .into_owned()
}
