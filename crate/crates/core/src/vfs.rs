//! POSIX-facing operations built only from AFS calls.
//!
//! Every operation is total. It either succeeds or returns an error without
//! touching the AFS store or the handle table. Read and write are the
//! exception: they may stop early after some pages were transferred and then
//! report the short count as success.
//!
//! All checks that can fail run before the single mutating AFS call of an
//! operation. The only AFS call allowed after it is `evict`, which cannot fail.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::afs::Afs;
use crate::error::Errno;
use crate::model::{is_valid_name, Dentry, Ino, Inode, Meta, Page, UserContext, ROOT_INO};

pub type VfsResult<T> = Result<T, Errno>;

/// A path as a sequence of names; the separator is implicit. The empty path
/// denotes the root directory.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Path {
    segments: Vec<String>,
}

impl Path {
    pub fn root() -> Self {
        Path::default()
    }

    /// Fails with `EINVAL` if a segment is empty or contains a separator.
    pub fn new<I, S>(segments: I) -> VfsResult<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segments: Vec<String> = segments.into_iter().map(Into::into).collect();
        if segments.iter().all(|s| is_valid_name(s)) {
            Ok(Path { segments })
        } else {
            Err(Errno::EINVAL)
        }
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn is_root(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn join(&self, name: &str) -> VfsResult<Path> {
        let mut segments = self.segments.clone();
        segments.push(name.to_string());
        Path::new(segments)
    }

    /// `None` for the root.
    pub fn split_last(&self) -> Option<(&[String], &str)> {
        self.segments
            .split_last()
            .map(|(last, prefix)| (prefix, last.as_str()))
    }
}

/// `/`-separated syntax; repeated separators are collapsed, `/` is the root.
impl FromStr for Path {
    type Err = Errno;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Path::new(s.split('/').filter(|seg| !seg.is_empty()))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.segments.is_empty() {
            return f.write_str("/");
        }
        for seg in &self.segments {
            write!(f, "/{seg}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    ReadOnly,
    WriteOnly,
    ReadWrite,
}

impl Mode {
    pub fn can_read(self) -> bool {
        self != Mode::WriteOnly
    }

    pub fn can_write(self) -> bool {
        self != Mode::ReadOnly
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeekWhence {
    Set,
    Cur,
    End,
}

/// File descriptor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fd(pub u32);

impl fmt::Display for Fd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Handle {
    pub ino: Ino,
    pub pos: u64,
    pub mode: Mode,
}

/// Registry of open handles. Every handle refers to a file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HandleTable {
    open: BTreeMap<Fd, Handle>,
}

impl HandleTable {
    pub fn get(&self, fd: Fd) -> Option<&Handle> {
        self.open.get(&fd)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Fd, &Handle)> {
        self.open.iter().map(|(&fd, h)| (fd, h))
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn is_open(&self, ino: Ino) -> bool {
        self.open.values().any(|h| h.ino == ino)
    }

    /// Inserts under the smallest free descriptor.
    pub fn insert(&mut self, handle: Handle) -> Fd {
        let mut fd = 0;
        for &Fd(used) in self.open.keys() {
            if used != fd {
                break;
            }
            fd += 1;
        }
        self.open.insert(Fd(fd), handle);
        Fd(fd)
    }

    /// Unchecked insertion, for building corrupt tables in tests.
    pub fn insert_at(&mut self, fd: Fd, handle: Handle) {
        self.open.insert(fd, handle);
    }

    fn get_mut(&mut self, fd: Fd) -> Option<&mut Handle> {
        self.open.get_mut(&fd)
    }

    fn remove(&mut self, fd: Fd) -> Option<Handle> {
        self.open.remove(&fd)
    }
}

/// The virtual filesystem switch over some AFS implementation.
#[derive(Clone, Debug)]
pub struct Vfs<A> {
    afs: A,
    handles: HandleTable,
    user: UserContext,
}

// Parent directory of the last path segment, together with the inode numbers
// passed on the way from the root (root first, parent last).
struct ParentDir<'p> {
    ino: Ino,
    inode: Inode,
    name: &'p str,
    chain: Vec<Ino>,
}

impl<A: Afs> Vfs<A> {
    pub fn new(afs: A) -> Self {
        Vfs {
            afs,
            handles: HandleTable::default(),
            user: UserContext::default(),
        }
    }

    pub fn afs(&self) -> &A {
        &self.afs
    }

    pub fn afs_mut(&mut self) -> &mut A {
        &mut self.afs
    }

    pub fn handles(&self) -> &HandleTable {
        &self.handles
    }

    /// Test hook for building inconsistent handle tables.
    pub fn handles_mut(&mut self) -> &mut HandleTable {
        &mut self.handles
    }

    pub fn user(&self) -> &UserContext {
        &self.user
    }

    pub fn set_user(&mut self, user: UserContext) {
        self.user = user;
    }

    pub fn page_size(&self) -> usize {
        self.afs.page_size()
    }

    // --- path walking -----------------------------------------------------

    // one step of a walk: `dir` must be a traversable directory
    fn step(&mut self, dir: Ino, name: &str) -> VfsResult<Ino> {
        let inode = self.afs.readinode(dir)?;
        if !inode.isdir {
            return Err(Errno::ENOTDIR);
        }
        if !inode.meta.may_exec(&self.user) {
            return Err(Errno::EACCES);
        }
        self.afs
            .lookup(dir, &Dentry::negative(name))?
            .target()
            .ok_or(Errno::ENOENT)
    }

    fn walk_chain(&mut self, segments: &[String]) -> VfsResult<Vec<Ino>> {
        let mut chain = vec![ROOT_INO];
        for seg in segments {
            let next = self.step(*chain.last().unwrap(), seg)?;
            chain.push(next);
        }
        Ok(chain)
    }

    /// Resolves `path` from the root, checking traverse permission on every
    /// directory passed.
    pub fn walk(&mut self, path: &Path) -> VfsResult<Ino> {
        Ok(*self.walk_chain(path.segments())?.last().unwrap())
    }

    fn parent<'p>(&mut self, path: &'p Path) -> VfsResult<ParentDir<'p>> {
        let (prefix, name) = path.split_last().ok_or(Errno::EINVAL)?;
        let chain = self.walk_chain(prefix)?;
        let ino = *chain.last().unwrap();
        let inode = self.afs.readinode(ino)?;
        if !inode.isdir {
            return Err(Errno::ENOTDIR);
        }
        if !inode.meta.may_exec(&self.user) {
            return Err(Errno::EACCES);
        }
        Ok(ParentDir {
            ino,
            inode,
            name,
            chain,
        })
    }

    // `None` if the name is absent; traverse permission already checked
    fn child(&mut self, dir: Ino, name: &str) -> VfsResult<Option<Ino>> {
        match self.afs.lookup(dir, &Dentry::negative(name)) {
            Ok(dent) => Ok(dent.target()),
            Err(Errno::ENOENT) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn may_modify(&self, parent: &ParentDir<'_>) -> VfsResult<()> {
        if parent.inode.meta.may_write(&self.user) {
            Ok(())
        } else {
            Err(Errno::EACCES)
        }
    }

    fn may_create(&mut self, parent: &ParentDir<'_>) -> VfsResult<()> {
        self.may_modify(parent)?;
        match self.child(parent.ino, parent.name)? {
            Some(_) => Err(Errno::EEXIST),
            None => Ok(()),
        }
    }

    // Called once a link or a handle to `ino` went away; `nlink` is the link
    // count after that change.
    fn putinode(&mut self, ino: Ino, nlink: u64) {
        if nlink == 0 && !self.handles.is_open(ino) {
            self.afs.evict(ino);
        }
    }

    // --- structural operations --------------------------------------------

    /// Creates an empty file and returns its inode number.
    pub fn create(&mut self, path: &Path, meta: Meta) -> VfsResult<Ino> {
        let parent = self.parent(path)?;
        self.may_create(&parent)?;
        let dent = self
            .afs
            .create(parent.ino, meta, &Dentry::negative(parent.name))?;
        dent.target().ok_or(Errno::EIO)
    }

    pub fn mkdir(&mut self, path: &Path, meta: Meta) -> VfsResult<Ino> {
        let parent = self.parent(path)?;
        self.may_create(&parent)?;
        let dent = self
            .afs
            .mkdir(parent.ino, meta, &Dentry::negative(parent.name))?;
        dent.target().ok_or(Errno::EIO)
    }

    pub fn rmdir(&mut self, path: &Path) -> VfsResult<()> {
        let parent = self.parent(path)?;
        let target = self.child(parent.ino, parent.name)?.ok_or(Errno::ENOENT)?;
        let inode = self.afs.readinode(target)?;
        if !inode.isdir {
            return Err(Errno::ENOTDIR);
        }
        if inode.size != 0 {
            return Err(Errno::ENOTEMPTY);
        }
        self.may_modify(&parent)?;
        self.afs
            .rmdir(parent.ino, &Dentry::positive(parent.name, target))
    }

    /// Adds `newpath` as a hard link to the file at `oldpath`.
    pub fn link(&mut self, oldpath: &Path, newpath: &Path) -> VfsResult<()> {
        let target = self.walk(oldpath)?;
        if self.afs.readinode(target)?.isdir {
            return Err(Errno::EISDIR);
        }
        let parent = self.parent(newpath)?;
        self.may_create(&parent)?;
        // the dentry name of the source is irrelevant to the AFS, only its target
        let old_name = oldpath.split_last().map(|(_, n)| n).unwrap_or("/");
        self.afs.link(
            parent.ino,
            &Dentry::positive(old_name, target),
            &Dentry::negative(parent.name),
        )?;
        Ok(())
    }

    /// Removes a link; the file goes away with its last link and last handle.
    pub fn unlink(&mut self, path: &Path) -> VfsResult<()> {
        let parent = self.parent(path)?;
        let target = self.child(parent.ino, parent.name)?.ok_or(Errno::ENOENT)?;
        let inode = self.afs.readinode(target)?;
        if inode.isdir {
            return Err(Errno::EISDIR);
        }
        self.may_modify(&parent)?;
        self.afs
            .unlink(parent.ino, &Dentry::positive(parent.name, target))?;
        self.putinode(target, inode.nlink.saturating_sub(1));
        Ok(())
    }

    pub fn rename(&mut self, oldpath: &Path, newpath: &Path) -> VfsResult<()> {
        if oldpath.is_root() || newpath.is_root() {
            return Err(Errno::EINVAL);
        }
        let src_parent = self.parent(oldpath)?;
        let src = self
            .child(src_parent.ino, src_parent.name)?
            .ok_or(Errno::ENOENT)?;
        let dst_parent = self.parent(newpath)?;
        self.may_modify(&src_parent)?;
        self.may_modify(&dst_parent)?;
        let src_inode = self.afs.readinode(src)?;
        let dst = self.child(dst_parent.ino, dst_parent.name)?;
        if dst == Some(src) {
            // same node under both names
            return Ok(());
        }
        if src_inode.isdir && dst_parent.chain.contains(&src) {
            return Err(Errno::EINVAL);
        }
        let displaced = match dst {
            Some(dst) => {
                let dst_inode = self.afs.readinode(dst)?;
                match (src_inode.isdir, dst_inode.isdir) {
                    (true, false) => return Err(Errno::ENOTDIR),
                    (false, true) => return Err(Errno::EISDIR),
                    (true, true) if dst_inode.size != 0 => return Err(Errno::ENOTEMPTY),
                    _ => {}
                }
                Some(dst_inode)
            }
            None => None,
        };
        let newdent = match displaced {
            Some(inode) => Dentry::positive(dst_parent.name, inode.ino),
            None => Dentry::negative(dst_parent.name),
        };
        self.afs.rename(
            src_parent.ino,
            &Dentry::positive(src_parent.name, src),
            dst_parent.ino,
            &newdent,
        )?;
        if let Some(inode) = displaced.filter(|i| !i.isdir) {
            self.putinode(inode.ino, inode.nlink.saturating_sub(1));
        }
        Ok(())
    }

    // --- handles ------------------------------------------------------------

    pub fn open(&mut self, path: &Path, mode: Mode) -> VfsResult<Fd> {
        let ino = self.walk(path)?;
        let inode = self.afs.readinode(ino)?;
        if inode.isdir {
            return Err(Errno::EISDIR);
        }
        if (mode.can_read() && !inode.meta.may_read(&self.user))
            || (mode.can_write() && !inode.meta.may_write(&self.user))
        {
            return Err(Errno::EACCES);
        }
        Ok(self.handles.insert(Handle { ino, pos: 0, mode }))
    }

    /// Releases `fd`. Closing the last handle of an unlinked file frees it.
    pub fn close(&mut self, fd: Fd) -> VfsResult<()> {
        let ino = self.handles.get(fd).ok_or(Errno::EBADF)?.ino;
        let shared = self
            .handles
            .iter()
            .any(|(other, h)| other != fd && h.ino == ino);
        if shared {
            self.handles.remove(fd);
            return Ok(());
        }
        // the link count is needed before the handle goes away
        let nlink = self.afs.readinode(ino)?.nlink;
        self.handles.remove(fd);
        self.putinode(ino, nlink);
        Ok(())
    }

    pub fn seek(&mut self, fd: Fd, offset: i64, whence: SeekWhence) -> VfsResult<u64> {
        let handle = *self.handles.get(fd).ok_or(Errno::EBADF)?;
        let base = match whence {
            SeekWhence::Set => 0,
            SeekWhence::Cur => handle.pos,
            SeekWhence::End => self.afs.readinode(handle.ino)?.size,
        };
        let pos = u64::try_from(base as i128 + offset as i128).map_err(|_| Errno::EINVAL)?;
        self.handles.get_mut(fd).unwrap().pos = pos;
        Ok(pos)
    }

    /// Reads up to `len` bytes at the handle position into `buf[..len]`.
    /// Bytes of `buf` beyond `len` are left alone. Returns the count read,
    /// which is short at end of file or when a page could not be loaded after
    /// some bytes were already transferred.
    pub fn read(&mut self, fd: Fd, buf: &mut [u8], len: usize) -> VfsResult<usize> {
        let handle = *self.handles.get(fd).ok_or(Errno::EBADF)?;
        if !handle.mode.can_read() {
            return Err(Errno::EACCES);
        }
        if len > buf.len() {
            return Err(Errno::EINVAL);
        }
        let size = self.afs.readinode(handle.ino)?.size;
        let ps = self.afs.page_size() as u64;
        let start = handle.pos;
        let end = size.min(start.saturating_add(len as u64));
        let mut total = 0u64;
        while start + total < end {
            let at = start + total;
            let offset = at % ps;
            // requested bytes left, end of this page, end of file
            let n = (len as u64 - total).min(ps - offset).min(size - at);
            let page = match self.afs.readpage(handle.ino, at / ps) {
                Ok(page) => page,
                Err(e) if total == 0 => return Err(e),
                Err(_) => break,
            };
            let dst = total as usize..(total + n) as usize;
            buf[dst].copy_from_slice(&page.bytes()[offset as usize..(offset + n) as usize]);
            total += n;
        }
        self.handles.get_mut(fd).unwrap().pos = start + total;
        Ok(total as usize)
    }

    /// Writes `buf` at the handle position, extending the file if needed.
    /// Returns the count written; short if a page operation failed after
    /// some bytes were already transferred.
    pub fn write(&mut self, fd: Fd, buf: &[u8]) -> VfsResult<usize> {
        let handle = *self.handles.get(fd).ok_or(Errno::EBADF)?;
        if !handle.mode.can_write() {
            return Err(Errno::EACCES);
        }
        if buf.is_empty() {
            return Ok(0);
        }
        let ino = handle.ino;
        let size = self.afs.readinode(ino)?.size;
        let ps = self.afs.page_size() as u64;
        let start = handle.pos;
        let end = start.checked_add(buf.len() as u64).ok_or(Errno::EINVAL)?;
        // Grow first so that no page is ever stored beyond the file size.
        let grows = end > size;
        if grows {
            self.afs.truncate(ino, end)?;
        }
        let mut total = 0u64;
        let mut failure = None;
        while start + total < end {
            let at = start + total;
            let offset = at % ps;
            let n = (buf.len() as u64 - total).min(ps - offset);
            let chunk = &buf[total as usize..(total + n) as usize];
            let page = if n == ps {
                Page::from_bytes(chunk.to_vec())
            } else {
                match self.afs.readpage(ino, at / ps) {
                    Ok(mut page) => {
                        page.bytes_mut()[offset as usize..(offset + n) as usize]
                            .copy_from_slice(chunk);
                        page
                    }
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            };
            if let Err(e) = self.afs.writepage(ino, at / ps, &page) {
                failure = Some(e);
                break;
            }
            total += n;
        }
        if let Some(err) = failure {
            if grows {
                // Give back the part of the extension that was not written.
                // If this fails too the file keeps a zero-filled tail.
                let keep = if total == 0 {
                    size
                } else {
                    size.max(start + total)
                };
                let _ = self.afs.truncate(ino, keep);
            }
            if total == 0 {
                return Err(err);
            }
        }
        self.handles.get_mut(fd).unwrap().pos = start + total;
        Ok(total as usize)
    }

    // --- attributes -----------------------------------------------------------

    pub fn truncate(&mut self, path: &Path, size: u64) -> VfsResult<()> {
        let ino = self.walk(path)?;
        let inode = self.afs.readinode(ino)?;
        if inode.isdir {
            return Err(Errno::EISDIR);
        }
        if !inode.meta.may_write(&self.user) {
            return Err(Errno::EACCES);
        }
        self.afs.truncate(ino, size)
    }

    pub fn getattr(&mut self, path: &Path) -> VfsResult<Inode> {
        let ino = self.walk(path)?;
        self.afs.readinode(ino)
    }

    /// Attributes of the file behind an open handle, linked or not.
    pub fn fgetattr(&mut self, fd: Fd) -> VfsResult<Inode> {
        let ino = self.handles.get(fd).ok_or(Errno::EBADF)?.ino;
        self.afs.readinode(ino)
    }

    /// Replaces the metadata of a node. Only its owner may do so.
    pub fn setattr(&mut self, path: &Path, meta: Meta) -> VfsResult<()> {
        let ino = self.walk(path)?;
        let inode = self.afs.readinode(ino)?;
        if inode.meta.owner != self.user.uid {
            return Err(Errno::EACCES);
        }
        self.afs.writeinode(&Inode { meta, ..inode })
    }

    pub fn readdir(&mut self, path: &Path) -> VfsResult<Vec<String>> {
        let ino = self.walk(path)?;
        let inode = self.afs.readinode(ino)?;
        if !inode.isdir {
            return Err(Errno::ENOTDIR);
        }
        if !inode.meta.may_read(&self.user) {
            return Err(Errno::EACCES);
        }
        self.afs.readdir(ino)
    }
}
