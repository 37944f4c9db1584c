use std::fs::{DirBuilder, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::os::unix::fs::{DirBuilderExt, OpenOptionsExt};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use vfsafs::snapshot::dump;
use vfsafs_fuse::{mount, MountConfig, Mounted};

use crate::golden::{HELLO_STATE, ORPHAN_TRANSCRIPT};
use crate::Verdict;

fn sh(cmd: &str) -> Result<String, String> {
    let out = Command::new("sh")
        .args(["-c", cmd])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("`{cmd}`: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

// release reaches the filesystem after close(2) returns
fn settle(m: &Mounted, done: impl Fn(&Mounted) -> bool) -> bool {
    let deadline = Instant::now() + Duration::from_secs(5);
    while Instant::now() < deadline {
        if done(m) {
            return true;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    false
}

fn state_dump(m: &Mounted) -> String {
    let vfs = m.core().lock().unwrap();
    dump(vfs.afs().state(), vfs.handles())
}

fn hello(m: &Mounted, root: &Path) -> Result<String, String> {
    let e = |e: std::io::Error| e.to_string();
    DirBuilder::new()
        .mode(0o777)
        .create(root.join("tmp"))
        .map_err(e)?;
    let test = root.join("tmp/test");
    OpenOptions::new()
        .write(true)
        .create_new(true)
        .mode(0o644)
        .open(&test)
        .map_err(e)?;
    let t = test.display();
    sh(&format!("printf 'Hello, World!' > {t}"))?;
    let wc = sh(&format!("wc -c < {t}"))?;
    if wc.trim() != "13" {
        return Err(format!("wc -c printed {wc:?}"));
    }
    let cat = sh(&format!("cat {t}"))?;
    if cat != "Hello, World!" {
        return Err(format!("cat printed {cat:?}"));
    }
    if std::fs::metadata(&test).map_err(e)?.len() != 13 {
        return Err("stat size is not 13".into());
    }
    settle(m, |m| m.core().lock().unwrap().handles().is_empty());
    let got = state_dump(m);
    if got != HELLO_STATE {
        return Err(format!("mounted state differs from trace replay:\n{got}"));
    }
    Ok("wc -c = 13, cat equal".into())
}

fn orphan(m: &Mounted, root: &Path) -> Result<String, String> {
    let e = |e: std::io::Error| e.to_string();
    let f = root.join("f");
    let mut file = OpenOptions::new()
        .read(true)
        .write(true)
        .create_new(true)
        .mode(0o644)
        .open(&f)
        .map_err(e)?;
    sh(&format!("rm {}", f.display()))?;
    if f.exists() {
        return Err("file still visible after rm".into());
    }
    file.write_all(b"orphan").map_err(e)?;
    file.seek(SeekFrom::Start(0)).map_err(e)?;
    let mut back = String::new();
    file.read_to_string(&mut back).map_err(e)?;
    if back != "orphan" {
        return Err(format!("read back {back:?}"));
    }
    if m.core().lock().unwrap().afs().evictions() != 0 {
        return Err("evicted while open".into());
    }
    drop(file);
    if !settle(m, |m| m.core().lock().unwrap().afs().evictions() == 1) {
        return Err("no eviction after close".into());
    }
    let expected = ORPHAN_TRANSCRIPT.split("# final state\n").nth(1).unwrap();
    let got = state_dump(m);
    if got != expected {
        return Err(format!("final state differs:\n{got}"));
    }
    Ok("post-rm I/O ok, one eviction".into())
}

fn mounted(root: &Path) -> std::io::Result<Mounted> {
    let mut config = MountConfig::new(root);
    config.page_size = 4;
    mount(&config)
}

pub fn criterion_8() -> Verdict {
    if !Path::new("/dev/fuse").exists() {
        return Verdict::Skip("/dev/fuse not present".into());
    }
    // modes in the host calls are taken literally, as in the traces
    unsafe { libc::umask(0) };
    let mut notes = Vec::new();
    type Check = fn(&Mounted, &Path) -> Result<String, String>;
    for (name, check) in [("hello", hello as Check), ("orphan", orphan as Check)] {
        let dir = tempfile::tempdir().unwrap();
        let m = match mounted(dir.path()) {
            Ok(m) => m,
            Err(e) => return Verdict::Skip(format!("mount failed: {e}")),
        };
        let r = check(&m, dir.path());
        m.unmount();
        match r {
            Ok(note) => notes.push(format!("{name}: {note}")),
            Err(why) => return Verdict::Fail(format!("{name}: {why}")),
        }
    }
    Verdict::Pass(notes.join("; "))
}
