//! Canonical text form of a store (and optionally a handle table).
//!
//! ```text
//! page_size 4
//! dir 1 owner=0 group=0 perms=0755 entries=1
//!   entry "tmp" 2
//! file 3 owner=0 group=0 perms=0644 size=13 pages=4
//!   page 0 48656c6c
//! handle 0 ino=3 pos=13 mode=wo
//! ```
//!
//! Directories come first, then files, each sorted by inode number; entries
//! are sorted by name bytes, pages by number. Names are quoted; `"` and `\`
//! are backslash-escaped and every byte outside printable ASCII is written as
//! `\xNN`. The output depends only on the store contents.

use std::fmt::Write;

use crate::model::AfsState;
use crate::vfs::{HandleTable, Mode};

pub fn quote_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 2);
    out.push('"');
    for &b in name.as_bytes() {
        match b {
            b'"' => out.push_str("\\\""),
            b'\\' => out.push_str("\\\\"),
            0x20..=0x7e => out.push(b as char),
            _ => {
                let _ = write!(out, "\\x{b:02x}");
            }
        }
    }
    out.push('"');
    out
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::ReadOnly => "ro",
        Mode::WriteOnly => "wo",
        Mode::ReadWrite => "rw",
    }
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn dump_state(state: &AfsState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "page_size {}", state.page_size);
    for (ino, d) in &state.dirs {
        let m = d.meta;
        let _ = writeln!(
            out,
            "dir {ino} owner={} group={} perms={} entries={}",
            m.owner,
            m.group,
            m.perms,
            d.entries.len()
        );
        for (name, target) in &d.entries {
            let _ = writeln!(out, "  entry {} {target}", quote_name(name));
        }
    }
    for (ino, f) in &state.files {
        let m = f.meta;
        let _ = writeln!(
            out,
            "file {ino} owner={} group={} perms={} size={} pages={}",
            m.owner,
            m.group,
            m.perms,
            f.size,
            f.pages.len()
        );
        for (n, page) in &f.pages {
            let _ = writeln!(out, "  page {n} {}", hex(page.bytes()));
        }
    }
    out
}

/// [`dump_state`] followed by one `handle` line per open descriptor.
pub fn dump(state: &AfsState, handles: &HandleTable) -> String {
    let mut out = dump_state(state);
    for (fd, h) in handles.iter() {
        let _ = writeln!(
            out,
            "handle {fd} ino={} pos={} mode={}",
            h.ino,
            h.pos,
            mode_name(h.mode)
        );
    }
    out
}
