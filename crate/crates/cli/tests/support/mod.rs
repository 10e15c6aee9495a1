//! Running the binary and the golden-file cases.
#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

pub struct Run {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Runs `bayeslens` from the workspace root, so relative model paths resolve
/// and any path echoed in the output is stable.
pub fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_bayeslens"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("spawn bayeslens");
    Run {
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
        code: out.status.code().expect("exit code"),
    }
}

pub fn json(r: &Run) -> serde_json::Value {
    serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("stdout is not one JSON document ({e}):\n{}", r.stdout))
}

/// Last line of the stdout, parsed.
pub fn last_line(r: &Run) -> serde_json::Value {
    let line = r.stdout.lines().last().expect("some output");
    serde_json::from_str(line).expect("a JSON line")
}

/// (golden file, arguments, expected exit code)
pub const GOLDEN: &[(&str, &[&str], i32)] = &[
    ("check_die_parity", &["check", "models/die_parity.json"], 0),
    ("check_sticky_hmm", &["check", "models/sticky_hmm.json"], 0),
    ("check_gauss_conjugate", &["check", "models/gauss_conjugate.json"], 0),
    ("check_row_sum", &["check", "crates/cli/tests/fixtures/row_sum.json"], 1),
    ("invert_die_parity", &["invert", "models/die_parity.json"], 0),
    ("invert_identity", &["invert", "models/identity.json"], 0),
    ("invert_partial_support", &["invert", "models/partial_prior.json", "--support"], 0),
    ("invert_partial_error", &["invert", "models/partial_prior.json", "--policy", "error"], 2),
    ("invert_gauss_support", &["invert", "models/gauss_conjugate.json", "--support"], 0),
    ("invert_sticky_chain", &["invert", "models/sticky_chain.json", "--length", "2"], 0),
    ("infer_sticky_chain", &["infer", "models/sticky_chain.json", "--observe", "0,0,0,0", "--method", "both"], 0),
    ("infer_sticky_hmm", &["infer", "models/sticky_hmm.json", "--observe", "0,0,1", "--method", "both"], 0),
    ("infer_gauss_conjugate", &["infer", "models/gauss_conjugate.json", "--observe", "1.5", "--method", "both"], 0),
    ("infer_impossible", &["infer", "models/sticky_chain.json", "--observe", "1,0", "--method", "both"], 2),
    ("lawcheck_die_parity", &["lawcheck", "models/die_parity.json", "--trials", "100", "--seed", "0"], 0),
    ("lawcheck_identity", &["lawcheck", "models/identity.json", "--trials", "100", "--seed", "0"], 0),
    ("lawcheck_partial_prior", &["lawcheck", "models/partial_prior.json", "--trials", "100", "--seed", "0"], 0),
    ("lawcheck_sticky_chain", &["lawcheck", "models/sticky_chain.json", "--trials", "100", "--seed", "0"], 0),
    ("lawcheck_sticky_hmm", &["lawcheck", "models/sticky_hmm.json", "--trials", "100", "--seed", "0"], 0),
    ("lawcheck_gauss_conjugate", &["lawcheck", "models/gauss_conjugate.json", "--trials", "100", "--seed", "0"], 0),
];

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.json"))
}

/// Runs every golden case and returns a description of each mismatch.
/// With `BLESS` set, rewrites the golden files instead.
pub fn golden_mismatches() -> Vec<String> {
    let bless = std::env::var_os("BLESS").is_some();
    let mut bad = Vec::new();
    for (name, args, code) in GOLDEN {
        let r = run(args);
        if r.code != *code {
            bad.push(format!("{name}: exit {} (want {code})\n{}", r.code, r.stderr));
            continue;
        }
        let path = golden_path(name);
        if bless {
            std::fs::write(&path, &r.stdout).expect("write golden file");
            continue;
        }
        match std::fs::read_to_string(&path) {
            Ok(want) if want == r.stdout => {}
            Ok(want) => bad.push(format!("{name}: output differs\n--- want\n{want}--- got\n{}", r.stdout)),
            Err(e) => bad.push(format!("{name}: cannot read {} ({e}); run with BLESS=1", path.display())),
        }
    }
    bad
}
