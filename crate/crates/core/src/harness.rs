//! Random operation generation and a driver that replays operations while
//! keeping a [`Shadow`] of file content in step with the store.
//!
//! After each step the driver reports every violation of [`check_all`] and
//! every disagreement with the shadow, including read results.

use rand::Rng;

use crate::check::{check_all, flat_content, InvariantId, Shadow, Subject, Violation};
use crate::error::Errno;
use crate::faults::FaultInjector;
use crate::model::{AfsState, Ino, ROOT_INO};
use crate::ops::{Op, Outcome};
use crate::vfs::{Fd, Mode, Path, SeekWhence, Vfs};
use crate::{mem_vfs, MemAfs};

/// Shape of the generated workload. Small name pools and offsets make
/// collisions, overwrites and page-boundary cases common.
#[derive(Clone, Debug)]
pub struct Generator {
    /// Names used for inner path segments.
    pub inner: Vec<String>,
    /// Names used for the last segment.
    pub names: Vec<String>,
    pub max_depth: usize,
    pub fds: u32,
    pub max_offset: u64,
    pub max_write: usize,
}

impl Default for Generator {
    fn default() -> Self {
        Generator {
            inner: ["a", "b"].map(String::from).to_vec(),
            names: ["a", "b", "c", "d"].map(String::from).to_vec(),
            max_depth: 3,
            fds: 3,
            max_offset: 24,
            max_write: 10,
        }
    }
}

const USABLE: [u16; 3] = [0o755, 0o777, 0o700];
const RESTRICTIVE: [u16; 4] = [0o644, 0o500, 0o400, 0o000];

impl Generator {
    pub fn path<R: Rng>(&self, rng: &mut R) -> Path {
        if rng.random_ratio(1, 40) {
            return Path::root();
        }
        // shallow paths dominate so that names collide often
        let depth = match rng.random_range(0..10) {
            0..4 => 1,
            4..8 => 2,
            _ => self.max_depth,
        }
        .min(self.max_depth);
        let mut segs: Vec<String> = (1..depth)
            .map(|_| self.inner[rng.random_range(0..self.inner.len())].clone())
            .collect();
        segs.push(self.names[rng.random_range(0..self.names.len())].clone());
        Path::new(segs).expect("pool names are valid")
    }

    fn perms<R: Rng>(&self, rng: &mut R) -> u16 {
        // mostly usable permissions, occasionally restrictive ones
        if rng.random_ratio(1, 25) {
            RESTRICTIVE[rng.random_range(0..RESTRICTIVE.len())]
        } else {
            USABLE[rng.random_range(0..USABLE.len())]
        }
    }

    fn fd<R: Rng>(&self, rng: &mut R, open: &[Fd]) -> Fd {
        if !open.is_empty() && rng.random_ratio(9, 10) {
            open[rng.random_range(0..open.len())]
        } else {
            Fd(rng.random_range(0..self.fds))
        }
    }

    pub fn op<R: Rng>(&self, rng: &mut R) -> Op {
        self.op_with(rng, &[])
    }

    /// Like [`Generator::op`], but descriptor arguments mostly pick one of
    /// the `open` ones.
    pub fn op_with<R: Rng>(&self, rng: &mut R, open: &[Fd]) -> Op {
        match rng.random_range(0..100) {
            0..12 => Op::Create(self.path(rng), self.perms(rng)),
            12..16 => Op::Mkdir(self.path(rng), self.perms(rng)),
            16..21 => Op::Rmdir(self.path(rng)),
            21..25 => Op::Link(self.path(rng), self.path(rng)),
            25..31 => Op::Unlink(self.path(rng)),
            31..38 => Op::Rename(self.path(rng), self.path(rng)),
            38..51 => {
                let mode =
                    [Mode::ReadOnly, Mode::WriteOnly, Mode::ReadWrite][rng.random_range(0..3)];
                Op::Open(self.path(rng), mode)
            }
            51..54 => Op::Close(self.fd(rng, open)),
            54..60 => {
                let whence =
                    [SeekWhence::Set, SeekWhence::Cur, SeekWhence::End][rng.random_range(0..3)];
                let m = self.max_offset as i64;
                let off = match whence {
                    SeekWhence::Set => rng.random_range(0..=m),
                    _ => rng.random_range(-m / 2..=m / 2),
                };
                Op::Seek(self.fd(rng, open), off, whence)
            }
            60..72 => Op::Read(self.fd(rng, open), rng.random_range(0..=self.max_write + 2)),
            72..85 => {
                let len = rng.random_range(0..=self.max_write);
                let bytes = (0..len).map(|_| rng.random_range(1..=255u8)).collect();
                Op::Write(self.fd(rng, open), bytes)
            }
            85..90 => Op::Truncate(self.path(rng), rng.random_range(0..=self.max_offset)),
            90..94 => Op::Getattr(self.path(rng)),
            94..97 => {
                // mostly restores usable permissions
                let perms = if rng.random_ratio(1, 4) {
                    self.perms(rng)
                } else {
                    0o755
                };
                Op::Setattr(self.path(rng), perms, None)
            }
            _ => Op::Readdir(self.path(rng)),
        }
    }
}

/// Inode a path names in `state`, without going through the (faulting) AFS.
pub fn resolve(state: &AfsState, path: &Path) -> Option<Ino> {
    let mut ino = ROOT_INO;
    for name in path.segments() {
        ino = *state.dirs.get(&ino)?.entries.get(name)?;
    }
    Some(ino)
}

#[derive(Clone, Debug)]
pub struct Step {
    pub result: Result<Outcome, Errno>,
    pub violations: Vec<Violation>,
}

pub struct Driver {
    pub vfs: Vfs<MemAfs>,
    pub shadow: Shadow,
}

impl Driver {
    pub fn new(page_size: usize, faults: FaultInjector) -> Self {
        Driver {
            vfs: mem_vfs(page_size, faults),
            shadow: Shadow::new(),
        }
    }

    pub fn state(&self) -> &AfsState {
        self.vfs.afs().state()
    }

    pub fn open_fds(&self) -> Vec<Fd> {
        self.vfs.handles().iter().map(|(fd, _)| fd).collect()
    }

    fn handle_at(&self, fd: Fd) -> Option<(Ino, u64)> {
        self.vfs.handles().get(fd).map(|h| (h.ino, h.pos))
    }

    fn oracle(ino: Ino, detail: String) -> Violation {
        Violation {
            invariant: InvariantId::Oracle,
            subject: Subject::Ino(ino),
            detail,
        }
    }

    /// A write whose failure rollback also failed leaves a zero-filled
    /// extension; accept it into the shadow when that is all that differs.
    fn absorb_zero_extension(&mut self, ino: Ino) {
        let Some(expected) = self.shadow.content(ino) else {
            return;
        };
        let Some(file) = self.state().files.get(&ino) else {
            return;
        };
        let actual = flat_content(file, self.state().page_size);
        if actual.len() > expected.len()
            && actual[..expected.len()] == *expected
            && actual[expected.len()..].iter().all(|&b| b == 0)
        {
            self.shadow.truncate(ino, actual.len() as u64);
        }
    }

    pub fn step(&mut self, op: &Op) -> Step {
        let before = match op {
            Op::Read(fd, _) | Op::Write(fd, _) => self.handle_at(*fd),
            Op::Truncate(p, _) => resolve(self.state(), p).map(|ino| (ino, 0)),
            _ => None,
        };
        let injected = self.vfs.afs().faults().injected();
        let result = op.apply(&mut self.vfs);
        let faulted = self.vfs.afs().faults().injected() > injected;
        let mut violations = Vec::new();

        match (op, &result, before) {
            (Op::Create(..), Ok(Outcome::Ino(ino)), _) => self.shadow.insert(*ino),
            (Op::Truncate(_, size), Ok(_), Some((ino, _))) => self.shadow.truncate(ino, *size),
            (Op::Write(_, bytes), r, Some((ino, pos))) => {
                if let Ok(Outcome::Written(n)) = r {
                    self.shadow.write(ino, pos, &bytes[..*n]);
                }
                self.absorb_zero_extension(ino);
            }
            (Op::Read(_, len), Ok(Outcome::Data(data)), Some((ino, pos))) => {
                let expected = self.shadow.slice(ino, pos, *len);
                // a page that fails to load after some bytes were copied
                // ends the read early
                let ok =
                    data == expected || (faulted && !data.is_empty() && expected.starts_with(data));
                if !ok {
                    violations.push(Self::oracle(
                        ino,
                        format!(
                            "read at {pos} returned {} bytes, shadow has {}",
                            data.len(),
                            expected.len()
                        ),
                    ));
                }
            }
            _ => {}
        }

        let live: Vec<Ino> = self
            .shadow_inos()
            .into_iter()
            .filter(|i| !self.state().files.contains_key(i))
            .collect();
        for ino in live {
            self.shadow.remove(ino);
        }
        violations.extend(check_all(self.state(), self.vfs.handles()));
        violations.extend(self.shadow.compare(self.state()));
        Step { result, violations }
    }

    fn shadow_inos(&self) -> Vec<Ino> {
        self.shadow.inos().collect()
    }
}
