//! Translation of inode-addressed protocol requests into path-addressed model
//! operations.
//!
//! The kernel names nodes by inode number while the model resolves paths, so
//! the bridge remembers one path per inode number it has handed out and
//! rewrites that table as entries move. Entry TTLs are zero, so the kernel
//! looks names up again on every access and stale paths are refreshed quickly.
//!
//! Reads and writes carry absolute offsets; each is an absolute seek on the
//! model handle followed by the transfer.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, MutexGuard};

use vfsafs::{
    Errno, Fd, Ino, Inode, MemAfs, Meta, Mode, Path, SeekWhence, UserContext, Vfs, ROOT_INO,
};

pub type Core = Arc<Mutex<Vfs<MemAfs>>>;
pub type BridgeResult<T> = Result<T, Errno>;

/// How request credentials become the model's caller identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UserMapping {
    /// Use the uid/gid of each request.
    Passthrough,
    /// Treat every request as coming from this user.
    Fixed { uid: u32, gid: u32 },
}

impl UserMapping {
    pub fn map(&self, uid: u32, gid: u32) -> UserContext {
        match *self {
            UserMapping::Passthrough => UserContext::new(uid, gid),
            UserMapping::Fixed { uid, gid } => UserContext::new(uid, gid),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirEntry {
    pub ino: u64,
    pub isdir: bool,
    pub name: String,
}

pub struct Bridge {
    core: Core,
    paths: HashMap<u64, Path>,
    generations: HashMap<u64, u64>,
    append: HashSet<u64>,
    users: UserMapping,
}

fn access_mode(flags: i32) -> BridgeResult<Mode> {
    match flags & libc::O_ACCMODE {
        libc::O_RDONLY => Ok(Mode::ReadOnly),
        libc::O_WRONLY => Ok(Mode::WriteOnly),
        libc::O_RDWR => Ok(Mode::ReadWrite),
        _ => Err(Errno::EINVAL),
    }
}

fn perms(mode: u32, umask: u32) -> u16 {
    (mode & !umask & 0o777) as u16
}

// A remembered path may since have been bound to a different node.
fn current(vfs: &mut Vfs<MemAfs>, path: &Path, ino: u64) -> BridgeResult<Inode> {
    let inode = vfs.getattr(path)?;
    if inode.ino.0 == ino {
        Ok(inode)
    } else {
        Err(Errno::ENOENT)
    }
}

impl Bridge {
    pub fn new(core: Core, users: UserMapping) -> Self {
        let mut paths = HashMap::new();
        paths.insert(ROOT_INO.0, Path::root());
        Bridge {
            core,
            paths,
            generations: HashMap::new(),
            append: HashSet::new(),
            users,
        }
    }

    pub fn core(&self) -> &Core {
        &self.core
    }

    pub fn generation(&self, ino: u64) -> u64 {
        self.generations.get(&ino).copied().unwrap_or(0)
    }

    // one request = one lock; requests never interleave inside the model
    fn enter(&self, uid: u32, gid: u32) -> MutexGuard<'_, Vfs<MemAfs>> {
        let mut vfs = self.core.lock().unwrap_or_else(|e| e.into_inner());
        vfs.set_user(self.users.map(uid, gid));
        vfs
    }

    fn path_of(&self, ino: u64) -> BridgeResult<Path> {
        self.paths.get(&ino).cloned().ok_or(Errno::ENOENT)
    }

    fn child_path(&self, parent: u64, name: &str) -> BridgeResult<Path> {
        self.path_of(parent)?.join(name)
    }

    fn remember(&mut self, ino: Ino, path: Path) {
        self.paths.insert(ino.0, path);
    }

    // a freshly allocated inode number may be one the kernel saw before
    fn remember_new(&mut self, ino: Ino, path: Path) {
        *self.generations.entry(ino.0).or_insert(0) += 1;
        self.remember(ino, path);
    }

    fn forget_path(&mut self, path: &Path) {
        self.paths
            .retain(|&ino, p| ino == ROOT_INO.0 || !p.segments().starts_with(path.segments()));
    }

    fn moved(&mut self, from: &Path, to: &Path) {
        self.forget_path(to);
        for p in self.paths.values_mut() {
            if p.segments().starts_with(from.segments()) && !from.is_root() {
                let rest = &p.segments()[from.segments().len()..];
                let segs = to.segments().iter().chain(rest).cloned();
                *p = Path::new(segs).expect("segments of valid paths");
            }
        }
    }

    pub fn lookup(&mut self, uid: u32, gid: u32, parent: u64, name: &str) -> BridgeResult<Inode> {
        let path = self.child_path(parent, name)?;
        let inode = self.enter(uid, gid).getattr(&path)?;
        self.remember(inode.ino, path);
        Ok(inode)
    }

    pub fn getattr(
        &mut self,
        uid: u32,
        gid: u32,
        ino: u64,
        fh: Option<u64>,
    ) -> BridgeResult<Inode> {
        if let Some(fh) = fh {
            if let Ok(inode) = self.enter(uid, gid).fgetattr(Fd(fh as u32)) {
                return Ok(inode);
            }
        }
        let path = self.path_of(ino)?;
        let mut vfs = self.enter(uid, gid);
        current(&mut vfs, &path, ino)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn setattr(
        &mut self,
        uid: u32,
        gid: u32,
        ino: u64,
        mode: Option<u32>,
        owner: Option<u32>,
        group: Option<u32>,
        size: Option<u64>,
    ) -> BridgeResult<Inode> {
        let path = self.path_of(ino)?;
        let mut vfs = self.enter(uid, gid);
        if let Some(size) = size {
            vfs.truncate(&path, size)?;
        }
        if mode.is_some() || owner.is_some() || group.is_some() {
            let current = vfs.getattr(&path)?.meta;
            let meta = Meta::new(
                owner.unwrap_or(current.owner),
                group.unwrap_or(current.group),
                mode.map_or(current.perms.bits(), |m| (m & 0o777) as u16),
            );
            vfs.setattr(&path, meta)?;
        }
        vfs.getattr(&path)
    }

    pub fn mknod(
        &mut self,
        uid: u32,
        gid: u32,
        parent: u64,
        name: &str,
        mode: u32,
        umask: u32,
    ) -> BridgeResult<Inode> {
        if mode & libc::S_IFMT != libc::S_IFREG {
            return Err(Errno::EINVAL);
        }
        let path = self.child_path(parent, name)?;
        let mut vfs = self.enter(uid, gid);
        let meta = Meta::owned_by(vfs.user(), perms(mode, umask));
        let ino = vfs.create(&path, meta)?;
        let inode = vfs.getattr(&path)?;
        drop(vfs);
        self.remember_new(ino, path);
        Ok(inode)
    }

    pub fn mkdir(
        &mut self,
        uid: u32,
        gid: u32,
        parent: u64,
        name: &str,
        mode: u32,
        umask: u32,
    ) -> BridgeResult<Inode> {
        let path = self.child_path(parent, name)?;
        let mut vfs = self.enter(uid, gid);
        let meta = Meta::owned_by(vfs.user(), perms(mode, umask));
        let ino = vfs.mkdir(&path, meta)?;
        let inode = vfs.getattr(&path)?;
        drop(vfs);
        self.remember_new(ino, path);
        Ok(inode)
    }

    pub fn unlink(&mut self, uid: u32, gid: u32, parent: u64, name: &str) -> BridgeResult<()> {
        let path = self.child_path(parent, name)?;
        self.enter(uid, gid).unlink(&path)?;
        self.forget_path(&path);
        Ok(())
    }

    pub fn rmdir(&mut self, uid: u32, gid: u32, parent: u64, name: &str) -> BridgeResult<()> {
        let path = self.child_path(parent, name)?;
        self.enter(uid, gid).rmdir(&path)?;
        self.forget_path(&path);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn rename(
        &mut self,
        uid: u32,
        gid: u32,
        parent: u64,
        name: &str,
        newparent: u64,
        newname: &str,
        flags: u32,
    ) -> BridgeResult<()> {
        // RENAME_NOREPLACE / RENAME_EXCHANGE have no model counterpart
        if flags != 0 {
            return Err(Errno::EINVAL);
        }
        let from = self.child_path(parent, name)?;
        let to = self.child_path(newparent, newname)?;
        self.enter(uid, gid).rename(&from, &to)?;
        if from != to {
            self.moved(&from, &to);
        }
        Ok(())
    }

    pub fn link(
        &mut self,
        uid: u32,
        gid: u32,
        ino: u64,
        newparent: u64,
        newname: &str,
    ) -> BridgeResult<Inode> {
        let old = self.path_of(ino)?;
        let new = self.child_path(newparent, newname)?;
        let mut vfs = self.enter(uid, gid);
        vfs.link(&old, &new)?;
        let inode = vfs.getattr(&new)?;
        drop(vfs);
        self.remember(inode.ino, new);
        Ok(inode)
    }

    pub fn open(&mut self, uid: u32, gid: u32, ino: u64, flags: i32) -> BridgeResult<u64> {
        let mode = access_mode(flags)?;
        let path = self.path_of(ino)?;
        let mut vfs = self.enter(uid, gid);
        current(&mut vfs, &path, ino)?;
        let fd = vfs.open(&path, mode)?;
        // only sent when the kernel leaves O_TRUNC to the filesystem
        if flags & libc::O_TRUNC != 0 && mode.can_write() {
            if let Err(e) = vfs.truncate(&path, 0) {
                let _ = vfs.close(fd);
                return Err(e);
            }
        }
        drop(vfs);
        if flags & libc::O_APPEND != 0 {
            self.append.insert(fd.0 as u64);
        }
        Ok(fd.0 as u64)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn create(
        &mut self,
        uid: u32,
        gid: u32,
        parent: u64,
        name: &str,
        mode: u32,
        umask: u32,
        flags: i32,
    ) -> BridgeResult<(Inode, u64)> {
        let inode = self.mknod(
            uid,
            gid,
            parent,
            name,
            libc::S_IFREG | (mode & 0o777),
            umask,
        )?;
        let fh = self.open(uid, gid, inode.ino.0, flags)?;
        Ok((inode, fh))
    }

    pub fn read(
        &mut self,
        uid: u32,
        gid: u32,
        fh: u64,
        offset: i64,
        size: u32,
    ) -> BridgeResult<Vec<u8>> {
        let fd = Fd(fh as u32);
        let mut vfs = self.enter(uid, gid);
        vfs.seek(fd, offset, SeekWhence::Set)?;
        let mut buf = vec![0; size as usize];
        let n = vfs.read(fd, &mut buf, size as usize)?;
        buf.truncate(n);
        Ok(buf)
    }

    pub fn write(
        &mut self,
        uid: u32,
        gid: u32,
        fh: u64,
        offset: i64,
        data: &[u8],
    ) -> BridgeResult<usize> {
        let fd = Fd(fh as u32);
        let append = self.append.contains(&fh);
        let mut vfs = self.enter(uid, gid);
        if append {
            vfs.seek(fd, 0, SeekWhence::End)?;
        } else {
            vfs.seek(fd, offset, SeekWhence::Set)?;
        }
        vfs.write(fd, data)
    }

    /// Closes the model handle. The kernel ignores release errors, so a
    /// close that fails on a storage error is retried a bounded number of times.
    pub fn release(&mut self, uid: u32, gid: u32, fh: u64) -> BridgeResult<()> {
        self.append.remove(&fh);
        let mut vfs = self.enter(uid, gid);
        let mut result = vfs.close(Fd(fh as u32));
        for _ in 0..16 {
            match result {
                Err(e) if e.is_low_level() => result = vfs.close(Fd(fh as u32)),
                _ => break,
            }
        }
        result
    }

    /// Directory listing including `.` and `..`.
    pub fn readdir(&mut self, uid: u32, gid: u32, ino: u64) -> BridgeResult<Vec<DirEntry>> {
        let path = self.path_of(ino)?;
        let mut vfs = self.enter(uid, gid);
        let names = vfs.readdir(&path)?;
        let parent = match path.split_last() {
            Some((prefix, _)) => vfs.walk(&Path::new(prefix.iter().cloned())?)?.0,
            None => ROOT_INO.0,
        };
        let mut out = vec![
            DirEntry {
                ino,
                isdir: true,
                name: ".".into(),
            },
            DirEntry {
                ino: parent,
                isdir: true,
                name: "..".into(),
            },
        ];
        let mut seen = Vec::new();
        for name in names {
            let child = path.join(&name)?;
            let inode = vfs.getattr(&child)?;
            seen.push((inode.ino, child));
            out.push(DirEntry {
                ino: inode.ino.0,
                isdir: inode.isdir,
                name,
            });
        }
        drop(vfs);
        for (ino, child) in seen {
            self.paths.entry(ino.0).or_insert(child);
        }
        Ok(out)
    }
}
