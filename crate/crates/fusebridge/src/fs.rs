//! `fuser::Filesystem` glue: decode request arguments, call the [`Bridge`],
//! encode the reply.

use std::ffi::OsStr;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use fuser::{
    consts::FOPEN_DIRECT_IO, FileAttr, FileType, Filesystem, ReplyAttr, ReplyCreate, ReplyData,
    ReplyDirectory, ReplyEmpty, ReplyEntry, ReplyOpen, ReplyWrite, Request, TimeOrNow,
};
use log::debug;
use vfsafs::{Errno, Inode};

use crate::bridge::Bridge;
use crate::errno::to_host;

const TTL: Duration = Duration::ZERO;

pub struct ModelFs {
    bridge: Bridge,
    block_size: u32,
}

impl ModelFs {
    pub fn new(bridge: Bridge, block_size: u32) -> Self {
        ModelFs { bridge, block_size }
    }

    fn attr(&self, inode: &Inode) -> FileAttr {
        FileAttr {
            ino: inode.ino.0,
            size: if inode.isdir { 0 } else { inode.size },
            blocks: if inode.isdir {
                0
            } else {
                inode.size.div_ceil(512)
            },
            atime: UNIX_EPOCH,
            mtime: UNIX_EPOCH,
            ctime: UNIX_EPOCH,
            crtime: UNIX_EPOCH,
            kind: if inode.isdir {
                FileType::Directory
            } else {
                FileType::RegularFile
            },
            perm: inode.meta.perms.bits(),
            nlink: inode.nlink.min(u32::MAX as u64) as u32,
            uid: inode.meta.owner,
            gid: inode.meta.group,
            rdev: 0,
            blksize: self.block_size,
            flags: 0,
        }
    }

    fn entry(&self, result: Result<Inode, Errno>, reply: ReplyEntry) {
        match result {
            Ok(inode) => reply.entry(
                &TTL,
                &self.attr(&inode),
                self.bridge.generation(inode.ino.0),
            ),
            Err(e) => reply.error(to_host(e)),
        }
    }
}

fn name_str(name: &OsStr) -> Result<&str, Errno> {
    name.to_str().ok_or(Errno::EINVAL)
}

fn empty(result: Result<(), Errno>, reply: ReplyEmpty) {
    match result {
        Ok(()) => reply.ok(),
        Err(e) => reply.error(to_host(e)),
    }
}

impl Filesystem for ModelFs {
    fn lookup(&mut self, req: &Request<'_>, parent: u64, name: &OsStr, reply: ReplyEntry) {
        let r = name_str(name).and_then(|n| self.bridge.lookup(req.uid(), req.gid(), parent, n));
        self.entry(r, reply);
    }

    fn getattr(&mut self, req: &Request<'_>, ino: u64, fh: Option<u64>, reply: ReplyAttr) {
        match self.bridge.getattr(req.uid(), req.gid(), ino, fh) {
            Ok(inode) => reply.attr(&TTL, &self.attr(&inode)),
            Err(e) => reply.error(to_host(e)),
        }
    }

    fn setattr(
        &mut self,
        req: &Request<'_>,
        ino: u64,
        mode: Option<u32>,
        uid: Option<u32>,
        gid: Option<u32>,
        size: Option<u64>,
        _atime: Option<TimeOrNow>,
        _mtime: Option<TimeOrNow>,
        _ctime: Option<SystemTime>,
        _fh: Option<u64>,
        _crtime: Option<SystemTime>,
        _chgtime: Option<SystemTime>,
        _bkuptime: Option<SystemTime>,
        _flags: Option<u32>,
        reply: ReplyAttr,
    ) {
        match self
            .bridge
            .setattr(req.uid(), req.gid(), ino, mode, uid, gid, size)
        {
            Ok(inode) => reply.attr(&TTL, &self.attr(&inode)),
            Err(e) => reply.error(to_host(e)),
        }
    }

    fn mknod(
        &mut self,
        req: &Request<'_>,
        parent: u64,
        name: &OsStr,
        mode: u32,
        umask: u32,
        _rdev: u32,
        reply: ReplyEntry,
    ) {
        let r = name_str(name).and_then(|n| {
            self.bridge
                .mknod(req.uid(), req.gid(), parent, n, mode, umask)
        });
        self.entry(r, reply);
    }

    fn mkdir(
        &mut self,
        req: &Request<'_>,
        parent: u64,
        name: &OsStr,
        mode: u32,
        umask: u32,
        reply: ReplyEntry,
    ) {
        let r = name_str(name).and_then(|n| {
            self.bridge
                .mkdir(req.uid(), req.gid(), parent, n, mode, umask)
        });
        self.entry(r, reply);
    }

    fn unlink(&mut self, req: &Request<'_>, parent: u64, name: &OsStr, reply: ReplyEmpty) {
        empty(
            name_str(name).and_then(|n| self.bridge.unlink(req.uid(), req.gid(), parent, n)),
            reply,
        );
    }

    fn rmdir(&mut self, req: &Request<'_>, parent: u64, name: &OsStr, reply: ReplyEmpty) {
        empty(
            name_str(name).and_then(|n| self.bridge.rmdir(req.uid(), req.gid(), parent, n)),
            reply,
        );
    }

    fn rename(
        &mut self,
        req: &Request<'_>,
        parent: u64,
        name: &OsStr,
        newparent: u64,
        newname: &OsStr,
        flags: u32,
        reply: ReplyEmpty,
    ) {
        let r = name_str(name).and_then(|n| {
            let nn = name_str(newname)?;
            self.bridge
                .rename(req.uid(), req.gid(), parent, n, newparent, nn, flags)
        });
        empty(r, reply);
    }

    fn link(
        &mut self,
        req: &Request<'_>,
        ino: u64,
        newparent: u64,
        newname: &OsStr,
        reply: ReplyEntry,
    ) {
        let r = name_str(newname)
            .and_then(|n| self.bridge.link(req.uid(), req.gid(), ino, newparent, n));
        self.entry(r, reply);
    }

    fn open(&mut self, req: &Request<'_>, ino: u64, flags: i32, reply: ReplyOpen) {
        match self.bridge.open(req.uid(), req.gid(), ino, flags) {
            Ok(fh) => reply.opened(fh, FOPEN_DIRECT_IO),
            Err(e) => reply.error(to_host(e)),
        }
    }

    fn read(
        &mut self,
        req: &Request<'_>,
        _ino: u64,
        fh: u64,
        offset: i64,
        size: u32,
        _flags: i32,
        _lock_owner: Option<u64>,
        reply: ReplyData,
    ) {
        match self.bridge.read(req.uid(), req.gid(), fh, offset, size) {
            Ok(data) => reply.data(&data),
            Err(e) => reply.error(to_host(e)),
        }
    }

    fn write(
        &mut self,
        req: &Request<'_>,
        _ino: u64,
        fh: u64,
        offset: i64,
        data: &[u8],
        _write_flags: u32,
        _flags: i32,
        _lock_owner: Option<u64>,
        reply: ReplyWrite,
    ) {
        match self.bridge.write(req.uid(), req.gid(), fh, offset, data) {
            Ok(n) => reply.written(n as u32),
            Err(e) => reply.error(to_host(e)),
        }
    }

    fn flush(
        &mut self,
        _req: &Request<'_>,
        _ino: u64,
        _fh: u64,
        _lock_owner: u64,
        reply: ReplyEmpty,
    ) {
        reply.ok();
    }

    fn release(
        &mut self,
        req: &Request<'_>,
        _ino: u64,
        fh: u64,
        _flags: i32,
        _lock_owner: Option<u64>,
        _flush: bool,
        reply: ReplyEmpty,
    ) {
        let r = self.bridge.release(req.uid(), req.gid(), fh);
        if let Err(e) = r {
            debug!("release fh={fh}: {e}");
        }
        empty(r, reply);
    }

    fn fsync(
        &mut self,
        _req: &Request<'_>,
        _ino: u64,
        _fh: u64,
        _datasync: bool,
        reply: ReplyEmpty,
    ) {
        reply.ok();
    }

    fn readdir(
        &mut self,
        req: &Request<'_>,
        ino: u64,
        _fh: u64,
        offset: i64,
        mut reply: ReplyDirectory,
    ) {
        let entries = match self.bridge.readdir(req.uid(), req.gid(), ino) {
            Ok(entries) => entries,
            Err(e) => return reply.error(to_host(e)),
        };
        for (i, e) in entries.iter().enumerate().skip(offset.max(0) as usize) {
            let kind = if e.isdir {
                FileType::Directory
            } else {
                FileType::RegularFile
            };
            if reply.add(e.ino, (i + 1) as i64, kind, &e.name) {
                break;
            }
        }
        reply.ok();
    }

    fn create(
        &mut self,
        req: &Request<'_>,
        parent: u64,
        name: &OsStr,
        mode: u32,
        umask: u32,
        flags: i32,
        reply: ReplyCreate,
    ) {
        let r = name_str(name).and_then(|n| {
            self.bridge
                .create(req.uid(), req.gid(), parent, n, mode, umask, flags)
        });
        match r {
            Ok((inode, fh)) => reply.created(
                &TTL,
                &self.attr(&inode),
                self.bridge.generation(inode.ino.0),
                fh,
                FOPEN_DIRECT_IO,
            ),
            Err(e) => reply.error(to_host(e)),
        }
    }
}
