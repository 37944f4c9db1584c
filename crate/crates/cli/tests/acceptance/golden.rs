use std::process::Command;

use vfsafs::{FaultPlan, Ino};
use vfsafs_cli::{run_trace, ExitStatus};

use crate::Verdict;

pub const HELLO: &str = "\
mkdir /tmp 0777
create /tmp/test 0644
open /tmp/test wo
write 0 48656c6c6f2c20576f726c6421
close 0
getattr /tmp/test
open /tmp/test ro
read 0 13
close 0
";

pub const HELLO_TRANSCRIPT: &str = "\
# page_size 4 faults none
mkdir /tmp 0777 -> ESUCCESS ino=2
create /tmp/test 0644 -> ESUCCESS ino=3
open /tmp/test wo -> ESUCCESS fd=0
write 0 48656c6c6f2c20576f726c6421 -> ESUCCESS n=13
close 0 -> ESUCCESS
getattr /tmp/test -> ESUCCESS ino=3 kind=file owner=0 group=0 perms=0644 nlink=1 size=13
open /tmp/test ro -> ESUCCESS fd=0
read 0 13 -> ESUCCESS n=13 data=48656c6c6f2c20576f726c6421
close 0 -> ESUCCESS
# final state
";

pub const HELLO_STATE: &str = "\
page_size 4
dir 1 owner=0 group=0 perms=0755 entries=1
  entry \"tmp\" 2
dir 2 owner=0 group=0 perms=0777 entries=1
  entry \"test\" 3
file 3 owner=0 group=0 perms=0644 size=13 pages=4
  page 0 48656c6c
  page 1 6f2c2057
  page 2 6f726c64
  page 3 21000000
";

/// Replayed through the command-line binary, as a user would.
pub fn criterion_4() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("hello.trace");
    std::fs::write(&script, HELLO).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_vfsafs"))
        .args(["--trace", script.to_str().unwrap(), "--page-size", "4"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let expected = format!("{HELLO_TRANSCRIPT}{HELLO_STATE}");
    if out.status.code() != Some(0) {
        return Verdict::Fail(format!("exit {:?}: {text}", out.status.code()));
    }
    if text != expected {
        return Verdict::Fail(format!("transcript differs:\n{text}"));
    }
    // tail of the last page, checked on the live state as well
    let o = run_trace(HELLO, FaultPlan::None, 4);
    let f = &o.vfs.afs().state().files[&Ino(3)];
    let last = f.pages.last_key_value().unwrap();
    if f.size != 13 || *last.0 != 3 || last.1.bytes()[1..] != [0, 0, 0] {
        return Verdict::Fail("last page tail is not zero".into());
    }
    Verdict::Pass("size 13, read-back equal, last page 21000000, transcript exact".into())
}

pub const ORPHAN: &str = "\
create /f 0644
open /f rw
unlink /f
getattr /f
expect ENOENT
write 0 6f727068616e
seek 0 0 set
read 0 6
close 0
";

pub const ORPHAN_TRANSCRIPT: &str = "\
# page_size 4 faults none
create /f 0644 -> ESUCCESS ino=2
open /f rw -> ESUCCESS fd=0
unlink /f -> ESUCCESS
getattr /f -> ENOENT
expect ENOENT -> ok
write 0 6f727068616e -> ESUCCESS n=6
seek 0 0 set -> ESUCCESS pos=0
read 0 6 -> ESUCCESS n=6 data=6f727068616e
close 0 -> ESUCCESS
# final state
page_size 4
dir 1 owner=0 group=0 perms=0755 entries=0
";

pub fn criterion_5() -> Verdict {
    let o = run_trace(ORPHAN, FaultPlan::None, 4);
    if o.status != ExitStatus::Success || o.transcript != ORPHAN_TRANSCRIPT {
        return Verdict::Fail(format!("transcript differs:\n{}", o.transcript));
    }
    let afs = o.vfs.afs();
    if afs.evictions() != 1 || afs.state().files.contains_key(&Ino(2)) {
        return Verdict::Fail(format!(
            "evictions {} files {:?}",
            afs.evictions(),
            afs.state().files.keys()
        ));
    }
    // the file is still there right before the close
    let before = run_trace(&ORPHAN.replace("close 0\n", ""), FaultPlan::None, 4);
    if !before.vfs.afs().state().files.contains_key(&Ino(2)) || before.vfs.afs().evictions() != 0 {
        return Verdict::Fail("orphan freed before close".into());
    }
    Verdict::Pass("post-unlink write/read ok, evicted exactly once at close".into())
}
