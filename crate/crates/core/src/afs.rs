//! The abstract file-system interface and its in-memory reference store.
//!
//! Each operation has a precondition. Violating it is a bug in the caller,
//! not an error: [`MemAfs`] panics with `afs precondition violated`. The VFS
//! layer is responsible for never getting there. Once the precondition holds,
//! every operation except [`Afs::evict`] consults the fault injector and may
//! fail with a low-level error, leaving the store untouched.

use crate::error::Errno;
use crate::faults::{FaultInjector, OpId};
use crate::model::{is_valid_name, AfsState, Dentry, Dir, File, Ino, Inode, Meta, Page, ROOT_INO};

pub type AfsResult<T> = Result<T, Errno>;

/// Internal interface of a concrete file system, as seen by the VFS.
pub trait Afs {
    fn page_size(&self) -> usize;

    /// Resolves `dent.name` in directory `pino`. `ENOENT` if absent.
    fn lookup(&mut self, pino: Ino, dent: &Dentry) -> AfsResult<Dentry>;

    /// Creates an empty file under a fresh inode number.
    fn create(&mut self, pino: Ino, meta: Meta, dent: &Dentry) -> AfsResult<Dentry>;

    /// Creates an empty directory under a fresh inode number.
    fn mkdir(&mut self, pino: Ino, meta: Meta, dent: &Dentry) -> AfsResult<Dentry>;

    fn rmdir(&mut self, pino: Ino, dent: &Dentry) -> AfsResult<()>;

    /// Adds `newdent.name` in `pino` as another link to the file `olddent.target`.
    fn link(&mut self, pino: Ino, olddent: &Dentry, newdent: &Dentry) -> AfsResult<Dentry>;

    /// Removes the entry. The file itself stays until [`Afs::evict`].
    fn unlink(&mut self, pino: Ino, dent: &Dentry) -> AfsResult<()>;

    /// Removes `olddent` from `oldino`, then binds `newdent.name` in `newino`
    /// to the moved node. A positive `newdent` is overwritten.
    fn rename(
        &mut self,
        oldino: Ino,
        olddent: &Dentry,
        newino: Ino,
        newdent: &Dentry,
    ) -> AfsResult<()>;

    fn readinode(&mut self, ino: Ino) -> AfsResult<Inode>;

    /// Writes back the metadata of `inode`. Sizes change only via truncate.
    fn writeinode(&mut self, inode: &Inode) -> AfsResult<()>;

    /// Absent pages read as zeros.
    fn readpage(&mut self, ino: Ino, pageno: u64) -> AfsResult<Page>;

    fn writepage(&mut self, ino: Ino, pageno: u64, page: &Page) -> AfsResult<()>;

    fn truncate(&mut self, ino: Ino, size: u64) -> AfsResult<()>;

    /// Entry names in byte order.
    fn readdir(&mut self, ino: Ino) -> AfsResult<Vec<String>>;

    /// Deallocates an unreferenced file. Cannot fail.
    fn evict(&mut self, ino: Ino);
}

macro_rules! require {
    ($cond:expr, $($msg:tt)+) => {
        assert!($cond, "afs precondition violated: {}", format_args!($($msg)+))
    };
}

/// Reference AFS keeping everything in memory.
#[derive(Clone, Debug)]
pub struct MemAfs {
    state: AfsState,
    faults: FaultInjector,
    evictions: u64,
}

impl MemAfs {
    pub fn new(state: AfsState) -> Self {
        MemAfs {
            state,
            faults: FaultInjector::none(),
            evictions: 0,
        }
    }

    pub fn with_faults(state: AfsState, faults: FaultInjector) -> Self {
        MemAfs {
            state,
            faults,
            evictions: 0,
        }
    }

    pub fn state(&self) -> &AfsState {
        &self.state
    }

    /// Direct access for tests that build corrupt stores on purpose.
    pub fn state_mut(&mut self) -> &mut AfsState {
        &mut self.state
    }

    pub fn into_state(self) -> AfsState {
        self.state
    }

    pub fn faults(&self) -> &FaultInjector {
        &self.faults
    }

    pub fn set_faults(&mut self, faults: FaultInjector) {
        self.faults = faults;
    }

    /// Number of successful evictions so far.
    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    fn inject(&mut self, op: OpId) -> AfsResult<()> {
        match self.faults.next_fault(op) {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }

    fn dir(&self, ino: Ino) -> &Dir {
        &self.state.dirs[&ino]
    }

    fn require_dir(&self, ino: Ino, op: &str) {
        require!(
            self.state.dirs.contains_key(&ino),
            "{op}: {ino} is not a directory"
        );
    }

    fn require_file(&self, ino: Ino, op: &str) {
        require!(
            self.state.files.contains_key(&ino),
            "{op}: {ino} is not a file"
        );
    }

    fn require_absent(&self, pino: Ino, dent: &Dentry, op: &str) {
        require!(
            is_valid_name(dent.name()),
            "{op}: invalid name {:?}",
            dent.name()
        );
        require!(
            !self.dir(pino).entries.contains_key(dent.name()),
            "{op}: {:?} already present in {pino}",
            dent.name()
        );
    }

    // positive dentry that matches the entry stored in `pino`
    fn require_consistent(&self, pino: Ino, dent: &Dentry, op: &str) -> Ino {
        let target = dent.target();
        require!(target.is_some(), "{op}: negative dentry {:?}", dent.name());
        let target = target.unwrap();
        require!(
            self.dir(pino).entries.get(dent.name()) == Some(&target),
            "{op}: entry {:?} in {pino} does not point to {target}",
            dent.name()
        );
        target
    }

    // binds `dent.name` in `pino` to a freshly inserted node
    fn bind_new(&mut self, pino: Ino, dent: &Dentry, ino: Ino) -> Dentry {
        self.state
            .dirs
            .get_mut(&pino)
            .unwrap()
            .entries
            .insert(dent.name().to_string(), ino);
        Dentry::positive(dent.name(), ino)
    }
}

impl Afs for MemAfs {
    fn page_size(&self) -> usize {
        self.state.page_size
    }

    fn lookup(&mut self, pino: Ino, dent: &Dentry) -> AfsResult<Dentry> {
        self.require_dir(pino, "lookup");
        self.inject(OpId::Lookup)?;
        match self.dir(pino).entries.get(dent.name()) {
            Some(&target) => Ok(Dentry::positive(dent.name(), target)),
            None => Err(Errno::ENOENT),
        }
    }

    fn create(&mut self, pino: Ino, meta: Meta, dent: &Dentry) -> AfsResult<Dentry> {
        self.require_dir(pino, "create");
        self.require_absent(pino, dent, "create");
        self.inject(OpId::Create)?;
        let ino = self.state.fresh_ino();
        self.state.files.insert(ino, File::new(meta));
        Ok(self.bind_new(pino, dent, ino))
    }

    fn mkdir(&mut self, pino: Ino, meta: Meta, dent: &Dentry) -> AfsResult<Dentry> {
        self.require_dir(pino, "mkdir");
        self.require_absent(pino, dent, "mkdir");
        self.inject(OpId::Mkdir)?;
        let ino = self.state.fresh_ino();
        self.state.dirs.insert(ino, Dir::new(meta));
        Ok(self.bind_new(pino, dent, ino))
    }

    fn rmdir(&mut self, pino: Ino, dent: &Dentry) -> AfsResult<()> {
        self.require_dir(pino, "rmdir");
        let target = self.require_consistent(pino, dent, "rmdir");
        self.require_dir(target, "rmdir");
        require!(target != ROOT_INO, "rmdir: root");
        require!(
            self.dir(target).entries.is_empty(),
            "rmdir: {target} not empty"
        );
        self.inject(OpId::Rmdir)?;
        self.state
            .dirs
            .get_mut(&pino)
            .unwrap()
            .entries
            .remove(dent.name());
        self.state.dirs.remove(&target);
        Ok(())
    }

    fn link(&mut self, pino: Ino, olddent: &Dentry, newdent: &Dentry) -> AfsResult<Dentry> {
        self.require_dir(pino, "link");
        let target = olddent.target();
        require!(target.is_some(), "link: negative source dentry");
        let target = target.unwrap();
        self.require_file(target, "link");
        self.require_absent(pino, newdent, "link");
        self.inject(OpId::Link)?;
        self.state
            .dirs
            .get_mut(&pino)
            .unwrap()
            .entries
            .insert(newdent.name().to_string(), target);
        Ok(Dentry::positive(newdent.name(), target))
    }

    fn unlink(&mut self, pino: Ino, dent: &Dentry) -> AfsResult<()> {
        self.require_dir(pino, "unlink");
        let target = self.require_consistent(pino, dent, "unlink");
        self.require_file(target, "unlink");
        self.inject(OpId::Unlink)?;
        self.state
            .dirs
            .get_mut(&pino)
            .unwrap()
            .entries
            .remove(dent.name());
        Ok(())
    }

    fn rename(
        &mut self,
        oldino: Ino,
        olddent: &Dentry,
        newino: Ino,
        newdent: &Dentry,
    ) -> AfsResult<()> {
        self.require_dir(oldino, "rename");
        self.require_dir(newino, "rename");
        let moved = self.require_consistent(oldino, olddent, "rename");
        let moved_is_dir = self.state.dirs.contains_key(&moved);
        let displaced = match newdent.target() {
            Some(_) => {
                let over = self.require_consistent(newino, newdent, "rename");
                require!(
                    over != moved,
                    "rename: source and destination are the same node"
                );
                let over_is_dir = self.state.dirs.contains_key(&over);
                require!(
                    over_is_dir == moved_is_dir,
                    "rename: kind mismatch at {over}"
                );
                if over_is_dir {
                    require!(
                        self.dir(over).entries.is_empty(),
                        "rename: destination {over} not empty"
                    );
                }
                Some((over, over_is_dir))
            }
            None => {
                self.require_absent(newino, newdent, "rename");
                None
            }
        };
        if moved_is_dir {
            require!(
                !self.state.is_ancestor_or_self(moved, newino),
                "rename: moving {moved} below itself"
            );
        }
        self.inject(OpId::Rename)?;

        // order matters when oldino == newino
        self.state
            .dirs
            .get_mut(&oldino)
            .unwrap()
            .entries
            .remove(olddent.name());
        self.state
            .dirs
            .get_mut(&newino)
            .unwrap()
            .entries
            .insert(newdent.name().to_string(), moved);
        if let Some((over, true)) = displaced {
            self.state.dirs.remove(&over);
        }
        Ok(())
    }

    fn readinode(&mut self, ino: Ino) -> AfsResult<Inode> {
        require!(
            self.state.is_allocated(ino),
            "readinode: {ino} not allocated"
        );
        self.inject(OpId::ReadInode)?;
        let inode = if let Some(dir) = self.state.dirs.get(&ino) {
            let has_parent = self.state.parent_of(ino).is_some();
            Inode {
                ino,
                meta: dir.meta,
                isdir: true,
                nlink: 1 + has_parent as u64,
                size: dir.entries.len() as u64,
            }
        } else {
            let file = &self.state.files[&ino];
            Inode {
                ino,
                meta: file.meta,
                isdir: false,
                nlink: self.state.link_count(ino),
                size: file.size,
            }
        };
        Ok(inode)
    }

    fn writeinode(&mut self, inode: &Inode) -> AfsResult<()> {
        let ino = inode.ino;
        if inode.isdir {
            self.require_dir(ino, "writeinode");
        } else {
            self.require_file(ino, "writeinode");
        }
        self.inject(OpId::WriteInode)?;
        if inode.isdir {
            self.state.dirs.get_mut(&ino).unwrap().meta = inode.meta;
        } else {
            self.state.files.get_mut(&ino).unwrap().meta = inode.meta;
        }
        Ok(())
    }

    fn readpage(&mut self, ino: Ino, pageno: u64) -> AfsResult<Page> {
        self.require_file(ino, "readpage");
        self.inject(OpId::ReadPage)?;
        Ok(self.state.files[&ino]
            .pages
            .get(&pageno)
            .cloned()
            .unwrap_or_else(|| Page::zeroed(self.state.page_size)))
    }

    fn writepage(&mut self, ino: Ino, pageno: u64, page: &Page) -> AfsResult<()> {
        self.require_file(ino, "writepage");
        require!(
            page.len() == self.state.page_size,
            "writepage: page of {} bytes, expected {}",
            page.len(),
            self.state.page_size
        );
        self.inject(OpId::WritePage)?;
        self.state
            .files
            .get_mut(&ino)
            .unwrap()
            .pages
            .insert(pageno, page.clone());
        Ok(())
    }

    fn truncate(&mut self, ino: Ino, size: u64) -> AfsResult<()> {
        self.require_file(ino, "truncate");
        self.inject(OpId::Truncate)?;
        let ps = self.state.page_size as u64;
        let file = self.state.files.get_mut(&ino).unwrap();
        // pages starting at or beyond the new size go away
        file.pages.split_off(&size.div_ceil(ps));
        let tail = (size % ps) as usize;
        if tail != 0 {
            if let Some(last) = file.pages.get_mut(&(size / ps)) {
                last.bytes_mut()[tail..].fill(0);
            }
        }
        file.size = size;
        Ok(())
    }

    fn readdir(&mut self, ino: Ino) -> AfsResult<Vec<String>> {
        self.require_dir(ino, "readdir");
        self.inject(OpId::Readdir)?;
        Ok(self.dir(ino).entries.keys().cloned().collect())
    }

    fn evict(&mut self, ino: Ino) {
        self.require_file(ino, "evict");
        require!(self.state.link_count(ino) == 0, "evict: {ino} still linked");
        self.state.files.remove(&ino);
        self.evictions += 1;
    }
}
