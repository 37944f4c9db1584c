//! Data model shared by the two layers: inode numbers, metadata, pages,
//! dentries and inode records, plus the store held by the reference AFS.

use std::collections::BTreeMap;
use std::fmt;

/// Default page size in bytes.
pub const DEFAULT_PAGE_SIZE: usize = 4096;

/// Inode number. Zero is never allocated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ino(pub u64);

/// The root directory. Always allocated, never the target of an entry.
pub const ROOT_INO: Ino = Ino(1);

impl fmt::Display for Ino {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The nine rwx permission bits, owner/group/other, as in `0o754`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Perms(u16);

impl Perms {
    pub const fn new(bits: u16) -> Self {
        Perms(bits & 0o777)
    }

    pub const fn bits(self) -> u16 {
        self.0
    }
}

impl fmt::Display for Perms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04o}", self.0)
    }
}

/// Who is calling. The first group is the primary group used for new nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserContext {
    pub uid: u32,
    pub gids: Vec<u32>,
}

impl UserContext {
    pub fn new(uid: u32, gid: u32) -> Self {
        UserContext {
            uid,
            gids: vec![gid],
        }
    }

    pub fn primary_gid(&self) -> u32 {
        self.gids.first().copied().unwrap_or(0)
    }
}

impl Default for UserContext {
    fn default() -> Self {
        UserContext::new(0, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Meta {
    pub owner: u32,
    pub group: u32,
    pub perms: Perms,
}

#[derive(Clone, Copy)]
enum Access {
    Read = 4,
    Write = 2,
    Exec = 1,
}

impl Meta {
    pub fn new(owner: u32, group: u32, perms: u16) -> Self {
        Meta {
            owner,
            group,
            perms: Perms::new(perms),
        }
    }

    /// Metadata for a node created by `user`.
    pub fn owned_by(user: &UserContext, perms: u16) -> Self {
        Meta::new(user.uid, user.primary_gid(), perms)
    }

    // Exactly one class applies: owner, else group, else other.
    fn allows(&self, user: &UserContext, access: Access) -> bool {
        let shift = if user.uid == self.owner {
            6
        } else if user.gids.contains(&self.group) {
            3
        } else {
            0
        };
        (self.perms.bits() >> shift) & access as u16 != 0
    }

    /// Files: read content. Directories: list entries.
    pub fn may_read(&self, user: &UserContext) -> bool {
        self.allows(user, Access::Read)
    }

    /// Files: modify content. Directories: add or remove entries.
    pub fn may_write(&self, user: &UserContext) -> bool {
        self.allows(user, Access::Write)
    }

    /// Directories: traverse, i.e. look up a known name.
    pub fn may_exec(&self, user: &UserContext) -> bool {
        self.allows(user, Access::Exec)
    }
}

/// A fixed-length block of file content.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Page(Box<[u8]>);

impl Page {
    pub fn zeroed(page_size: usize) -> Self {
        Page(vec![0; page_size].into_boxed_slice())
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Page(bytes.into_boxed_slice())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn bytes_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }
}

impl fmt::Debug for Page {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Page(")?;
        for b in self.0.iter() {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dir {
    pub meta: Meta,
    pub entries: BTreeMap<String, Ino>,
}

impl Dir {
    pub fn new(meta: Meta) -> Self {
        Dir {
            meta,
            entries: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct File {
    pub meta: Meta,
    pub size: u64,
    pub pages: BTreeMap<u64, Page>,
}

impl File {
    pub fn new(meta: Meta) -> Self {
        File {
            meta,
            size: 0,
            pages: BTreeMap::new(),
        }
    }
}

/// A directory entry: an edge of the file-system graph, or the assertion
/// that a name is absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dentry {
    Positive { name: String, target: Ino },
    Negative { name: String },
}

impl Dentry {
    pub fn negative(name: impl Into<String>) -> Self {
        Dentry::Negative { name: name.into() }
    }

    pub fn positive(name: impl Into<String>, target: Ino) -> Self {
        Dentry::Positive {
            name: name.into(),
            target,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Dentry::Positive { name, .. } | Dentry::Negative { name } => name,
        }
    }

    pub fn target(&self) -> Option<Ino> {
        match self {
            Dentry::Positive { target, .. } => Some(*target),
            Dentry::Negative { .. } => None,
        }
    }
}

/// Returns true if `name` can label a directory entry.
pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty() && !name.contains('/') && !name.contains('\0')
}

/// Snapshot of a node as exchanged between the layers; not stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inode {
    pub ino: Ino,
    pub meta: Meta,
    pub isdir: bool,
    pub nlink: u64,
    /// Bytes for files, number of entries for directories.
    pub size: u64,
}

/// The store behind the reference AFS: two disjoint maps from inode numbers
/// to directories and files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AfsState {
    pub page_size: usize,
    pub dirs: BTreeMap<Ino, Dir>,
    pub files: BTreeMap<Ino, File>,
}

impl AfsState {
    /// A fresh store holding only the root directory.
    pub fn new(page_size: usize, root_meta: Meta) -> Self {
        assert!(page_size > 0, "page size must be positive");
        let mut dirs = BTreeMap::new();
        dirs.insert(ROOT_INO, Dir::new(root_meta));
        AfsState {
            page_size,
            dirs,
            files: BTreeMap::new(),
        }
    }

    pub fn is_allocated(&self, ino: Ino) -> bool {
        self.dirs.contains_key(&ino) || self.files.contains_key(&ino)
    }

    /// Smallest unallocated inode number, starting at 1.
    pub fn fresh_ino(&self) -> Ino {
        let mut used = self
            .dirs
            .keys()
            .chain(self.files.keys())
            .map(|i| i.0)
            .collect::<Vec<_>>();
        used.sort_unstable();
        let mut candidate = 1;
        for n in used {
            if n == candidate {
                candidate += 1;
            } else if n > candidate {
                break;
            }
        }
        Ino(candidate)
    }

    /// Number of directory entries, over all directories, that target `ino`.
    pub fn link_count(&self, ino: Ino) -> u64 {
        self.dirs
            .values()
            .flat_map(|d| d.entries.values())
            .filter(|&&t| t == ino)
            .count() as u64
    }

    /// The directory holding an entry for `ino`, if any.
    pub fn parent_of(&self, ino: Ino) -> Option<Ino> {
        self.dirs
            .iter()
            .find(|(_, d)| d.entries.values().any(|&t| t == ino))
            .map(|(&p, _)| p)
    }

    /// True if `ancestor` is `ino` itself or lies on the parent chain from
    /// `ino` up to the root.
    pub fn is_ancestor_or_self(&self, ancestor: Ino, ino: Ino) -> bool {
        let mut cur = ino;
        // bounded so a malformed (cyclic) store cannot hang the walk
        for _ in 0..=self.dirs.len() {
            if cur == ancestor {
                return true;
            }
            match self.parent_of(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }
}
