//! An executable model of a POSIX-style virtual filesystem switch layered on
//! an abstract file-system interface.
//!
//! * [`afs`]: the internal interface ([`Afs`]) with preconditions, and an
//!   in-memory reference store ([`MemAfs`]).
//! * [`vfs`]: path walking, permissions, open handles and the mapping of
//!   byte ranges onto pages, implemented only in terms of [`Afs`].
//! * [`faults`]: deterministic replacement for nondeterministic storage errors.
//! * [`check`]: the store and handle invariants as runtime checks, plus a
//!   flat-byte shadow model of file content.
//! * [`ops`]: operations as values; [`harness`]: random workloads replayed
//!   against the shadow model.
//! * [`snapshot`]: canonical text dumps.

pub mod afs;
pub mod check;
pub mod error;
pub mod faults;
pub mod harness;
pub mod model;
pub mod ops;
pub mod snapshot;
pub mod vfs;

pub use afs::{Afs, MemAfs};
pub use error::Errno;
pub use faults::{FaultInjector, FaultPlan};
pub use model::{AfsState, Dentry, Ino, Inode, Meta, Page, UserContext, ROOT_INO};
pub use ops::{Op, Outcome};
pub use vfs::{Fd, Mode, Path, SeekWhence, Vfs};

/// A model instance with an in-memory store: root directory owned by uid 0
/// with permissions `0755`.
pub fn mem_vfs(page_size: usize, faults: FaultInjector) -> Vfs<MemAfs> {
    let state = AfsState::new(page_size, Meta::new(0, 0, 0o755));
    Vfs::new(MemAfs::with_faults(state, faults))
}
