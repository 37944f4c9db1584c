//! One-to-one mapping between model error codes and host `errno` values.

use libc::c_int;
use vfsafs::Errno;

pub fn to_host(err: Errno) -> c_int {
    match err {
        Errno::ENOENT => libc::ENOENT,
        Errno::EEXIST => libc::EEXIST,
        Errno::EISDIR => libc::EISDIR,
        Errno::ENOTDIR => libc::ENOTDIR,
        Errno::ENOTEMPTY => libc::ENOTEMPTY,
        Errno::EACCES => libc::EACCES,
        Errno::EBADF => libc::EBADF,
        Errno::EINVAL => libc::EINVAL,
        Errno::EIO => libc::EIO,
        Errno::ENOSPC => libc::ENOSPC,
        Errno::ENOMEM => libc::ENOMEM,
    }
}

pub fn from_host(code: c_int) -> Option<Errno> {
    Errno::ALL.into_iter().find(|&e| to_host(e) == code)
}
