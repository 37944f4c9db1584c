//! Trace script grammar: one command per line, `#` starts a comment.
//!
//! ```text
//! mkdir /tmp 0777
//! create /tmp/test 0644
//! open /tmp/test wo
//! write 0 48656c6c6f
//! expect ESUCCESS
//! ```

use std::fmt;

use thiserror::Error;
use vfsafs::error::parse_code;
use vfsafs::{Errno, Fd, Mode, Op, Path, SeekWhence, UserContext};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Op(Op),
    /// Switch the calling user for the following commands.
    User(UserContext),
    /// `None` expects success.
    Expect(Option<Errno>),
    Dump,
}

impl Command {
    /// Whether the command produces a result code that `expect` can check.
    pub fn is_operation(&self) -> bool {
        matches!(self, Command::Op(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Line {
    pub number: usize,
    pub text: String,
    pub command: Command,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

struct Args<'a> {
    words: std::str::SplitWhitespace<'a>,
}

impl<'a> Args<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, String> {
        self.words.next().ok_or_else(|| format!("missing {what}"))
    }

    fn path(&mut self) -> Result<Path, String> {
        let s = self.next("path")?;
        if !s.starts_with('/') {
            return Err(format!("path `{s}` is not absolute"));
        }
        s.parse().map_err(|_| format!("bad path `{s}`"))
    }

    fn num<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, String> {
        let s = self.next(what)?;
        s.parse().map_err(|_| format!("bad {what} `{s}`"))
    }

    fn octal(&mut self) -> Result<u16, String> {
        let s = self.next("permissions")?;
        match u16::from_str_radix(s, 8) {
            Ok(p) if p <= 0o777 => Ok(p),
            _ => Err(format!("bad permissions `{s}`")),
        }
    }

    fn fd(&mut self) -> Result<Fd, String> {
        self.num("fd").map(Fd)
    }

    fn done(mut self) -> Result<(), String> {
        match self.words.next() {
            Some(w) => Err(format!("unexpected `{w}`")),
            None => Ok(()),
        }
    }
}

fn parse_command(text: &str) -> Result<Command, String> {
    let mut words = text.split_whitespace();
    let op = words.next().ok_or("empty command")?;
    let mut a = Args { words };
    let cmd = match op {
        "create" => Command::Op(Op::Create(a.path()?, a.octal()?)),
        "mkdir" => Command::Op(Op::Mkdir(a.path()?, a.octal()?)),
        "rmdir" => Command::Op(Op::Rmdir(a.path()?)),
        "link" => Command::Op(Op::Link(a.path()?, a.path()?)),
        "unlink" => Command::Op(Op::Unlink(a.path()?)),
        "rename" => Command::Op(Op::Rename(a.path()?, a.path()?)),
        "open" => {
            let path = a.path()?;
            let mode = match a.next("mode")? {
                "ro" => Mode::ReadOnly,
                "wo" => Mode::WriteOnly,
                "rw" => Mode::ReadWrite,
                m => return Err(format!("bad mode `{m}`")),
            };
            Command::Op(Op::Open(path, mode))
        }
        "close" => Command::Op(Op::Close(a.fd()?)),
        "seek" => {
            let fd = a.fd()?;
            let off = a.num("offset")?;
            let whence = match a.next("whence")? {
                "set" => SeekWhence::Set,
                "cur" => SeekWhence::Cur,
                "end" => SeekWhence::End,
                w => return Err(format!("bad whence `{w}`")),
            };
            Command::Op(Op::Seek(fd, off, whence))
        }
        "read" => Command::Op(Op::Read(a.fd()?, a.num("length")?)),
        "write" => {
            let fd = a.fd()?;
            // an empty write has no hex argument
            let bytes = match a.words.next() {
                Some(h) => hex::decode(h).map_err(|e| format!("bad hex: {e}"))?,
                None => Vec::new(),
            };
            Command::Op(Op::Write(fd, bytes))
        }
        "truncate" => Command::Op(Op::Truncate(a.path()?, a.num("size")?)),
        "getattr" => Command::Op(Op::Getattr(a.path()?)),
        "setattr" => {
            let path = a.path()?;
            let perms = a.octal()?;
            let owner = match a.words.next() {
                Some(o) => {
                    let o = o.parse().map_err(|_| format!("bad owner `{o}`"))?;
                    Some((o, a.num("group")?))
                }
                None => None,
            };
            Command::Op(Op::Setattr(path, perms, owner))
        }
        "readdir" => Command::Op(Op::Readdir(a.path()?)),
        "user" => {
            let uid = a.num("uid")?;
            let groups = a.next("gid")?;
            let gids = groups
                .split(',')
                .map(|g| g.parse().map_err(|_| format!("bad gid `{g}`")))
                .collect::<Result<Vec<u32>, _>>()?;
            Command::User(UserContext { uid, gids })
        }
        "expect" => {
            let code = a.next("error code")?;
            Command::Expect(parse_code(code).map_err(|e| e.to_string())?)
        }
        "dump" => Command::Dump,
        _ => return Err(format!("unknown command `{op}`")),
    };
    a.done()?;
    Ok(cmd)
}

/// Parses a whole script. `expect` must follow some operation.
pub fn parse(script: &str) -> Result<Vec<Line>, ParseError> {
    let mut out = Vec::new();
    let mut seen_op = false;
    for (i, raw) in script.lines().enumerate() {
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let number = i + 1;
        let command = parse_command(text).map_err(|msg| ParseError { line: number, msg })?;
        if matches!(command, Command::Expect(_)) && !seen_op {
            return Err(ParseError {
                line: number,
                msg: "expect without a preceding operation".into(),
            });
        }
        seen_op |= command.is_operation();
        out.push(Line {
            number,
            text: text.split_whitespace().collect::<Vec<_>>().join(" "),
            command,
        });
    }
    Ok(out)
}

impl fmt::Display for Line {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}
