//! Acceptance run: the full suite twice with the same seed into one
//! directory, so the second pass also checks payload determinism.
//! Prints one PASS/FAIL line per criterion and fails if any criterion does.

use std::process::ExitCode;

use traplab::{format_summary, reproduce_all, Status};

const SEED: u64 = 42;

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let parallel = std::env::args().any(|a| a == "--parallel");
    let first = match reproduce_all(dir.path(), SEED, parallel) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL suite: {e}");
            return ExitCode::FAILURE;
        }
    };
    let second = match reproduce_all(dir.path(), SEED, parallel) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL suite (second run): {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut failed = 0;
    for (a, b) in first.rows.iter().zip(&second.rows) {
        // A criterion passes only if both runs pass it; determinism is only
        // checkable on the second.
        let ok = b.status == Status::Pass && (a.status != Status::Fail);
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({}): {} | tolerance: {} | {:.2} s / {:.2} s",
            if ok { "PASS" } else { "FAIL" },
            b.id,
            b.name,
            b.measured,
            b.tolerance,
            a.seconds,
            b.seconds,
        );
    }
    eprint!("first run:\n{}", format_summary(&first));
    println!("{} of {} criteria passed", second.rows.len() - failed, second.rows.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
