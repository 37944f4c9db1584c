//! Replays a parsed script against a fresh model instance.
//!
//! Every command echoes as `<command> -> <CODE>[ details]`. The invariant
//! checks run after every command; the first violation or failed `expect`
//! stops the replay. The transcript always ends with a full dump.

use std::fmt::Write;

use vfsafs::check::check_all;
use vfsafs::error::code_name;
use vfsafs::snapshot::{dump, quote_name};
use vfsafs::{mem_vfs, Errno, FaultInjector, FaultPlan, Inode, MemAfs, Outcome, Vfs};

use crate::script::{parse, Command};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    ParseError,
    Violation,
    ExpectationFailed,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::ParseError => 2,
            ExitStatus::Violation => 3,
            ExitStatus::ExpectationFailed => 4,
        }
    }
}

pub struct TraceOutcome {
    pub status: ExitStatus,
    pub transcript: String,
    /// The model after the last executed command.
    pub vfs: Vfs<MemAfs>,
}

fn inode_details(i: &Inode) -> String {
    format!(
        "ino={} kind={} owner={} group={} perms={} nlink={} size={}",
        i.ino,
        if i.isdir { "dir" } else { "file" },
        i.meta.owner,
        i.meta.group,
        i.meta.perms,
        i.nlink,
        i.size
    )
}

fn details(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Done => String::new(),
        Outcome::Ino(ino) => format!("ino={ino}"),
        Outcome::Fd(fd) => format!("fd={fd}"),
        Outcome::Pos(pos) => format!("pos={pos}"),
        Outcome::Data(data) => format!("n={} data={}", data.len(), hex::encode(data)),
        Outcome::Written(n) => format!("n={n}"),
        Outcome::Attr(i) => inode_details(i),
        Outcome::Names(names) => names
            .iter()
            .map(|n| quote_name(n))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// Replays `script` on a fresh model: root directory owned by uid 0 with
/// permissions `0755`, caller uid 0 gid 0.
pub fn run_trace(script: &str, plan: FaultPlan, page_size: usize) -> TraceOutcome {
    let mut out = String::new();
    let _ = writeln!(out, "# page_size {page_size} faults {plan}");
    let mut vfs = mem_vfs(page_size, FaultInjector::new(plan));
    let lines = match parse(script) {
        Ok(lines) => lines,
        Err(e) => {
            let _ = writeln!(out, "parse error: {e}");
            return TraceOutcome {
                status: ExitStatus::ParseError,
                transcript: out,
                vfs,
            };
        }
    };

    let mut status = ExitStatus::Success;
    let mut last: Result<(), Errno> = Ok(());
    for line in &lines {
        match &line.command {
            Command::Expect(want) => {
                let got = last.err();
                if got == *want {
                    let _ = writeln!(out, "{line} -> ok");
                } else {
                    let _ = writeln!(out, "{line} -> FAILED got {}", code_name(&last));
                    status = ExitStatus::ExpectationFailed;
                    break;
                }
                continue;
            }
            Command::Dump => {
                let _ = writeln!(out, "{line}");
                out.push_str(&dump(vfs.afs().state(), vfs.handles()));
                continue;
            }
            Command::User(u) => {
                vfs.set_user(u.clone());
                let _ = writeln!(out, "{line} -> ok");
            }
            Command::Op(op) => {
                let r = op.apply(&mut vfs);
                let _ = write!(out, "{line} -> {}", code_name(&r));
                if let Ok(outcome) = &r {
                    let d = details(outcome);
                    if !d.is_empty() {
                        let _ = write!(out, " {d}");
                    }
                }
                out.push('\n');
                last = r.map(|_| ());
            }
        }
        let violations = check_all(vfs.afs().state(), vfs.handles());
        if !violations.is_empty() {
            for v in &violations {
                let _ = writeln!(out, "{v}");
            }
            status = ExitStatus::Violation;
            break;
        }
    }
    let _ = writeln!(out, "# final state");
    out.push_str(&dump(vfs.afs().state(), vfs.handles()));
    TraceOutcome {
        status,
        transcript: out,
        vfs,
    }
}
