//! Acceptance run: one line per criterion, nonzero exit if any fails.

mod atomicity;
mod fuse;
mod golden;
mod reads;
mod rename;
mod soak;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

pub enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn run(n: u32, title: &str, f: fn() -> Verdict) -> bool {
    let start = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Verdict::Fail(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (word, detail, ok) = match verdict {
        Verdict::Pass(d) => ("PASS", d, true),
        Verdict::Fail(d) => ("FAIL", d, false),
        Verdict::Skip(d) => ("SKIP", d, true),
    };
    println!("criterion {n} [{title}]: {word} ({detail}; {secs:.2}s)");
    ok
}

fn main() -> ExitCode {
    let results = [
        run(1, "invariant soak", soak::criterion_1),
        run(2, "failure atomicity", atomicity::criterion_2),
        run(3, "oracle equivalence", soak::criterion_3),
        run(4, "golden trace", golden::criterion_4),
        run(5, "orphan lifecycle", golden::criterion_5),
        run(6, "three-bound reads", reads::criterion_6),
        run(7, "rename matrix", rename::criterion_7),
        run(8, "fuse differential", fuse::criterion_8),
    ];
    if results.iter().all(|&ok| ok) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
