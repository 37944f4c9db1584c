//! VFS operations as values, so they can be parsed, generated, printed and
//! replayed.

use std::fmt;

use crate::afs::Afs;
use crate::error::Errno;
use crate::model::{Ino, Inode, Meta};
use crate::snapshot::mode_name;
use crate::vfs::{Fd, Mode, Path, SeekWhence, Vfs};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    /// New files and directories are owned by the calling user.
    Create(Path, u16),
    Mkdir(Path, u16),
    Rmdir(Path),
    Link(Path, Path),
    Unlink(Path),
    Rename(Path, Path),
    Open(Path, Mode),
    Close(Fd),
    Seek(Fd, i64, SeekWhence),
    Read(Fd, usize),
    Write(Fd, Vec<u8>),
    Truncate(Path, u64),
    Getattr(Path),
    /// New permissions and optionally a new owner and group; the current
    /// owner and group are kept otherwise.
    Setattr(Path, u16, Option<(u32, u32)>),
    Readdir(Path),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Ino(Ino),
    Fd(Fd),
    Pos(u64),
    Data(Vec<u8>),
    Written(usize),
    Attr(Inode),
    Names(Vec<String>),
}

impl Op {
    pub fn apply<A: Afs>(&self, vfs: &mut Vfs<A>) -> Result<Outcome, Errno> {
        Ok(match self {
            Op::Create(p, perms) => {
                let meta = Meta::owned_by(vfs.user(), *perms);
                Outcome::Ino(vfs.create(p, meta)?)
            }
            Op::Mkdir(p, perms) => {
                let meta = Meta::owned_by(vfs.user(), *perms);
                Outcome::Ino(vfs.mkdir(p, meta)?)
            }
            Op::Rmdir(p) => vfs.rmdir(p).map(|_| Outcome::Done)?,
            Op::Link(a, b) => vfs.link(a, b).map(|_| Outcome::Done)?,
            Op::Unlink(p) => vfs.unlink(p).map(|_| Outcome::Done)?,
            Op::Rename(a, b) => vfs.rename(a, b).map(|_| Outcome::Done)?,
            Op::Open(p, mode) => Outcome::Fd(vfs.open(p, *mode)?),
            Op::Close(fd) => vfs.close(*fd).map(|_| Outcome::Done)?,
            Op::Seek(fd, off, whence) => Outcome::Pos(vfs.seek(*fd, *off, *whence)?),
            Op::Read(fd, len) => {
                let mut buf = vec![0; *len];
                let n = vfs.read(*fd, &mut buf, *len)?;
                buf.truncate(n);
                Outcome::Data(buf)
            }
            Op::Write(fd, bytes) => Outcome::Written(vfs.write(*fd, bytes)?),
            Op::Truncate(p, size) => vfs.truncate(p, *size).map(|_| Outcome::Done)?,
            Op::Getattr(p) => Outcome::Attr(vfs.getattr(p)?),
            Op::Setattr(p, perms, owner) => {
                let cur = vfs.getattr(p)?.meta;
                let (o, g) = owner.unwrap_or((cur.owner, cur.group));
                vfs.setattr(p, Meta::new(o, g, *perms))
                    .map(|_| Outcome::Done)?
            }
            Op::Readdir(p) => Outcome::Names(vfs.readdir(p)?),
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Trace script syntax.
impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Create(p, m) => write!(f, "create {p} {m:04o}"),
            Op::Mkdir(p, m) => write!(f, "mkdir {p} {m:04o}"),
            Op::Rmdir(p) => write!(f, "rmdir {p}"),
            Op::Link(a, b) => write!(f, "link {a} {b}"),
            Op::Unlink(p) => write!(f, "unlink {p}"),
            Op::Rename(a, b) => write!(f, "rename {a} {b}"),
            Op::Open(p, m) => write!(f, "open {p} {}", mode_name(*m)),
            Op::Close(fd) => write!(f, "close {fd}"),
            Op::Seek(fd, off, w) => {
                let w = match w {
                    SeekWhence::Set => "set",
                    SeekWhence::Cur => "cur",
                    SeekWhence::End => "end",
                };
                write!(f, "seek {fd} {off} {w}")
            }
            Op::Read(fd, len) => write!(f, "read {fd} {len}"),
            Op::Write(fd, b) if b.is_empty() => write!(f, "write {fd}"),
            Op::Write(fd, b) => write!(f, "write {fd} {}", hex(b)),
            Op::Truncate(p, n) => write!(f, "truncate {p} {n}"),
            Op::Getattr(p) => write!(f, "getattr {p}"),
            Op::Setattr(p, m, None) => write!(f, "setattr {p} {m:04o}"),
            Op::Setattr(p, m, Some((o, g))) => write!(f, "setattr {p} {m:04o} {o} {g}"),
            Op::Readdir(p) => write!(f, "readdir {p}"),
        }
    }
}
