//! Runtime checks of the store and handle invariants, and the flat-byte view
//! of file content used as a reference oracle for reads and writes.
//!
//! The checks are transcribed directly and computed by exhaustive scans; they
//! share no code with the operations they check.
//!
//! | id | invariant |
//! |----|-----------|
//! | 1 | `0` is not allocated, the root is a directory, dirs and files are disjoint |
//! | 2 | every entry targets an allocated inode |
//! | 3 | every directory is the target of at most one entry; the root of none |
//! | 4 | no page starts at or beyond the file size |
//! | 5 | the bytes of the last page beyond the file size are zero |
//! | HANDLE | every open handle refers to a file |
//! | ORACLE | file content agrees with the shadow model |

use std::collections::BTreeMap;
use std::fmt;

use crate::model::{AfsState, File, Ino, ROOT_INO};
use crate::vfs::{Fd, HandleTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InvariantId {
    Allocation,
    Closure,
    SingleParent,
    PageBound,
    ZeroTail,
    Handle,
    Oracle,
}

impl fmt::Display for InvariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InvariantId::Allocation => "1",
            InvariantId::Closure => "2",
            InvariantId::SingleParent => "3",
            InvariantId::PageBound => "4",
            InvariantId::ZeroTail => "5",
            InvariantId::Handle => "HANDLE",
            InvariantId::Oracle => "ORACLE",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subject {
    Ino(Ino),
    Fd(Fd),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub invariant: InvariantId,
    pub subject: Subject,
    pub detail: String,
}

/// One line: `violation <id> ino=<n>: <detail>` (or `fd=<n>`).
impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let subject = match self.subject {
            Subject::Ino(ino) => format!("ino={ino}"),
            Subject::Fd(fd) => format!("fd={fd}"),
        };
        write!(
            f,
            "violation {} {}: {}",
            self.invariant, subject, self.detail
        )
    }
}

fn violation(invariant: InvariantId, subject: Subject, detail: String) -> Violation {
    Violation {
        invariant,
        subject,
        detail,
    }
}

/// All invariant violations of `state` and `handles`; empty iff all hold.
pub fn check_all(state: &AfsState, handles: &HandleTable) -> Vec<Violation> {
    let mut out = Vec::new();
    check_allocation(state, &mut out);
    check_closure(state, &mut out);
    check_single_parent(state, &mut out);
    check_pages(state, &mut out);
    for (fd, h) in handles.iter() {
        if !state.files.contains_key(&h.ino) {
            out.push(violation(
                InvariantId::Handle,
                Subject::Fd(fd),
                format!("handle refers to {} which is not a file", h.ino),
            ));
        }
    }
    out
}

fn check_allocation(state: &AfsState, out: &mut Vec<Violation>) {
    let zero = Ino(0);
    if state.dirs.contains_key(&zero) || state.files.contains_key(&zero) {
        out.push(violation(
            InvariantId::Allocation,
            Subject::Ino(zero),
            "inode 0 is allocated".into(),
        ));
    }
    if !state.dirs.contains_key(&ROOT_INO) {
        out.push(violation(
            InvariantId::Allocation,
            Subject::Ino(ROOT_INO),
            "root is not an allocated directory".into(),
        ));
    }
    for ino in state.dirs.keys().filter(|i| state.files.contains_key(i)) {
        out.push(violation(
            InvariantId::Allocation,
            Subject::Ino(*ino),
            "allocated both as directory and as file".into(),
        ));
    }
}

fn check_closure(state: &AfsState, out: &mut Vec<Violation>) {
    for (&dir, d) in &state.dirs {
        for (name, &target) in &d.entries {
            if !state.dirs.contains_key(&target) && !state.files.contains_key(&target) {
                out.push(violation(
                    InvariantId::Closure,
                    Subject::Ino(dir),
                    format!("entry {name:?} targets unallocated inode {target}"),
                ));
            }
        }
    }
}

fn check_single_parent(state: &AfsState, out: &mut Vec<Violation>) {
    let mut links: BTreeMap<Ino, u32> = BTreeMap::new();
    for d in state.dirs.values() {
        for target in d.entries.values().filter(|t| state.dirs.contains_key(t)) {
            *links.entry(*target).or_default() += 1;
        }
    }
    for (&ino, &links) in &links {
        if links > 1 {
            out.push(violation(
                InvariantId::SingleParent,
                Subject::Ino(ino),
                format!("directory has {links} links"),
            ));
        } else if ino == ROOT_INO {
            out.push(violation(
                InvariantId::SingleParent,
                Subject::Ino(ino),
                "root is the target of an entry".into(),
            ));
        }
    }
}

fn check_pages(state: &AfsState, out: &mut Vec<Violation>) {
    let ps = state.page_size as u64;
    for (&ino, f) in &state.files {
        for (&n, page) in &f.pages {
            if n * ps >= f.size {
                out.push(violation(
                    InvariantId::PageBound,
                    Subject::Ino(ino),
                    format!("page {n} lies beyond size {}", f.size),
                ));
            }
            if page.len() as u64 != ps {
                out.push(violation(
                    InvariantId::PageBound,
                    Subject::Ino(ino),
                    format!("page {n} has {} bytes", page.len()),
                ));
            }
        }
        let tail = f.size % ps;
        if tail != 0 {
            if let Some(last) = f.pages.get(&(f.size / ps)) {
                let junk = last.bytes().iter().skip(tail as usize).any(|&b| b != 0);
                if junk {
                    out.push(violation(
                        InvariantId::ZeroTail,
                        Subject::Ino(ino),
                        format!(
                            "page {} has non-zero bytes beyond size {}",
                            f.size / ps,
                            f.size
                        ),
                    ));
                }
            }
        }
    }
}

/// The linear content of a file: `size` bytes, byte `m` taken from page
/// `m / page_size` at `m % page_size`, or zero when that page is absent.
pub fn flat_content(file: &File, page_size: usize) -> Vec<u8> {
    let size = file.size as usize;
    let mut out = vec![0; size];
    for (&n, page) in &file.pages {
        let start = (n as usize).saturating_mul(page_size);
        if start >= size {
            break;
        }
        let len = page_size.min(size - start);
        out[start..start + len].copy_from_slice(&page.bytes()[..len]);
    }
    out
}

/// Reference model of file content as plain byte vectors, keyed by inode.
///
/// The driver mirrors each successful content change here; [`Shadow::compare`]
/// then checks every file of a store against it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Shadow {
    files: BTreeMap<Ino, Vec<u8>>,
}

impl Shadow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn content(&self, ino: Ino) -> Option<&[u8]> {
        self.files.get(&ino).map(Vec::as_slice)
    }

    pub fn inos(&self) -> impl Iterator<Item = Ino> + '_ {
        self.files.keys().copied()
    }

    pub fn insert(&mut self, ino: Ino) {
        self.files.insert(ino, Vec::new());
    }

    pub fn remove(&mut self, ino: Ino) {
        self.files.remove(&ino);
    }

    /// Bytes `[start, start + len)` clipped to the end of the file.
    pub fn slice(&self, ino: Ino, start: u64, len: usize) -> &[u8] {
        let data = &self.files[&ino];
        let from = (start as usize).min(data.len());
        let to = from.saturating_add(len).min(data.len());
        &data[from..to]
    }

    /// An empty write changes nothing, even past the end.
    pub fn write(&mut self, ino: Ino, start: u64, bytes: &[u8]) {
        let data = self.files.get_mut(&ino).expect("shadow file");
        if bytes.is_empty() {
            return;
        }
        let start = start as usize;
        let end = start + bytes.len();
        if data.len() < end {
            data.resize(end, 0);
        }
        data[start..end].copy_from_slice(bytes);
    }

    pub fn truncate(&mut self, ino: Ino, size: u64) {
        self.files
            .get_mut(&ino)
            .expect("shadow file")
            .resize(size as usize, 0);
    }

    /// Differences between the shadow and the files of `state`.
    pub fn compare(&self, state: &AfsState) -> Vec<Violation> {
        let mut out = Vec::new();
        for (&ino, f) in &state.files {
            match self.files.get(&ino) {
                None => out.push(violation(
                    InvariantId::Oracle,
                    Subject::Ino(ino),
                    "file unknown to the shadow".into(),
                )),
                Some(expected) => {
                    let actual = flat_content(f, state.page_size);
                    if &actual != expected {
                        let at = actual
                            .iter()
                            .zip(expected)
                            .position(|(a, b)| a != b)
                            .unwrap_or(actual.len().min(expected.len()));
                        out.push(violation(
                            InvariantId::Oracle,
                            Subject::Ino(ino),
                            format!(
                                "content differs at byte {at} (size {} vs shadow {})",
                                actual.len(),
                                expected.len()
                            ),
                        ));
                    }
                }
            }
        }
        for &ino in self.files.keys().filter(|i| !state.files.contains_key(i)) {
            out.push(violation(
                InvariantId::Oracle,
                Subject::Ino(ino),
                "shadow file missing from the store".into(),
            ));
        }
        out
    }
}
