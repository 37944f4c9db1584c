use vfsafs::check::check_all;
use vfsafs::harness::resolve;
use vfsafs::{mem_vfs, Errno, FaultInjector, MemAfs, Meta, Path, Vfs};

use crate::Verdict;

#[derive(Clone, Copy, Debug)]
enum Kind {
    File,
    Dir,
}

#[derive(Clone, Copy, Debug)]
enum Dest {
    Fresh,
    EmptyDir,
    File,
    NonEmptyDir,
}

fn p(s: &str) -> Path {
    s.parse().unwrap()
}

fn make(vfs: &mut Vfs<MemAfs>, path: &Path, kind: Kind) {
    let meta = Meta::new(0, 0, 0o755);
    match kind {
        Kind::File => vfs.create(path, meta).map(drop),
        Kind::Dir => vfs.mkdir(path, meta).map(drop),
    }
    .unwrap();
}

/// Returns a description of the failure, if any.
fn case(cross: bool, src_kind: Kind, dest: Dest) -> Option<String> {
    let mut vfs = mem_vfs(4, FaultInjector::none());
    make(&mut vfs, &p("/p"), Kind::Dir);
    make(&mut vfs, &p("/q"), Kind::Dir);
    let src = p("/p/src");
    let dst = if cross { p("/q/dst") } else { p("/p/dst") };
    make(&mut vfs, &src, src_kind);
    if let Kind::Dir = src_kind {
        make(&mut vfs, &p("/p/src/inner"), Kind::File);
    }
    match dest {
        Dest::Fresh => {}
        Dest::EmptyDir => make(&mut vfs, &dst, Kind::Dir),
        Dest::File => make(&mut vfs, &dst, Kind::File),
        Dest::NonEmptyDir => {
            make(&mut vfs, &dst, Kind::Dir);
            make(&mut vfs, &dst.join("x").unwrap(), Kind::File);
        }
    }

    let expected = match (src_kind, dest) {
        (_, Dest::Fresh) => Ok(()),
        (Kind::Dir, Dest::EmptyDir) | (Kind::File, Dest::File) => Ok(()),
        (Kind::Dir, Dest::NonEmptyDir) => Err(Errno::ENOTEMPTY),
        (Kind::File, Dest::EmptyDir | Dest::NonEmptyDir) => Err(Errno::EISDIR),
        (Kind::Dir, Dest::File) => Err(Errno::ENOTDIR),
    };

    let before = vfs.afs().state().clone();
    let src_ino = resolve(&before, &src).unwrap();
    let old_dst = resolve(&before, &dst);
    let got = vfs.rename(&src, &dst);
    if got != expected {
        return Some(format!("got {got:?}, want {expected:?}"));
    }
    let after = vfs.afs().state();
    let violations = check_all(after, vfs.handles());
    if !violations.is_empty() {
        return Some(format!("{violations:?}"));
    }
    if got.is_err() {
        return (*after != before).then(|| "failed rename changed state".to_string());
    }
    if resolve(after, &dst) != Some(src_ino) || resolve(after, &src).is_some() {
        return Some("destination does not name the source node".into());
    }
    if let Kind::Dir = src_kind {
        if resolve(after, &dst.join("inner").unwrap()).is_none() {
            return Some("moved directory lost its contents".into());
        }
    }
    if let Some(old) = old_dst {
        if after.is_allocated(old) {
            return Some(format!("displaced node {old} still allocated"));
        }
    }
    None
}

pub fn criterion_7() -> Verdict {
    let mut failures = Vec::new();
    let mut n = 0;
    for cross in [false, true] {
        for dest in [Dest::Fresh, Dest::EmptyDir, Dest::File, Dest::NonEmptyDir] {
            for src in [Kind::File, Kind::Dir] {
                n += 1;
                if let Some(why) = case(cross, src, dest) {
                    let parent = if cross { "cross-parent" } else { "same-parent" };
                    failures.push(format!("{parent} {src:?} -> {dest:?}: {why}"));
                }
            }
        }
    }
    if failures.is_empty() {
        Verdict::Pass(format!(
            "{n} combinations, codes and invariants as expected"
        ))
    } else {
        Verdict::Fail(failures.join("; "))
    }
}
