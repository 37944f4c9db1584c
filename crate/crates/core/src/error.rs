//! Error codes shared by both layers.
//!
//! Success is represented by `Ok(..)`; [`Errno`] only enumerates failures.
//! Where a textual code is needed (trace transcripts, `expect` lines) success
//! is spelled `ESUCCESS`, see [`code_name`].

use std::str::FromStr;

#[allow(clippy::upper_case_acronyms)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, thiserror::Error)]
pub enum Errno {
    #[error("no such file or directory")]
    ENOENT,
    #[error("file exists")]
    EEXIST,
    #[error("is a directory")]
    EISDIR,
    #[error("not a directory")]
    ENOTDIR,
    #[error("directory not empty")]
    ENOTEMPTY,
    #[error("permission denied")]
    EACCES,
    #[error("bad file descriptor")]
    EBADF,
    #[error("invalid argument")]
    EINVAL,
    #[error("input/output error")]
    EIO,
    #[error("no space left on device")]
    ENOSPC,
    #[error("out of memory")]
    ENOMEM,
}

impl Errno {
    pub const ALL: [Errno; 11] = [
        Errno::ENOENT,
        Errno::EEXIST,
        Errno::EISDIR,
        Errno::ENOTDIR,
        Errno::ENOTEMPTY,
        Errno::EACCES,
        Errno::EBADF,
        Errno::EINVAL,
        Errno::EIO,
        Errno::ENOSPC,
        Errno::ENOMEM,
    ];

    /// Errors the storage layer may raise on its own, independent of the request.
    pub const LOW_LEVEL: [Errno; 3] = [Errno::EIO, Errno::ENOSPC, Errno::ENOMEM];

    pub fn name(self) -> &'static str {
        match self {
            Errno::ENOENT => "ENOENT",
            Errno::EEXIST => "EEXIST",
            Errno::EISDIR => "EISDIR",
            Errno::ENOTDIR => "ENOTDIR",
            Errno::ENOTEMPTY => "ENOTEMPTY",
            Errno::EACCES => "EACCES",
            Errno::EBADF => "EBADF",
            Errno::EINVAL => "EINVAL",
            Errno::EIO => "EIO",
            Errno::ENOSPC => "ENOSPC",
            Errno::ENOMEM => "ENOMEM",
        }
    }

    pub fn is_low_level(self) -> bool {
        Self::LOW_LEVEL.contains(&self)
    }
}

/// Name of an operation outcome: `ESUCCESS` for `Ok`, the error name otherwise.
pub fn code_name<T>(result: &Result<T, Errno>) -> &'static str {
    match result {
        Ok(_) => "ESUCCESS",
        Err(e) => e.name(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown error code `{0}`")]
pub struct UnknownCode(pub String);

impl FromStr for Errno {
    type Err = UnknownCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Errno::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| UnknownCode(s.to_string()))
    }
}

/// Parses an expected outcome; `ESUCCESS` yields `None`.
pub fn parse_code(s: &str) -> Result<Option<Errno>, UnknownCode> {
    if s == "ESUCCESS" {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}
