//! Text format for update streams.
//!
//! ```text
//! n 4
//! + 0 1
//! - 0 1
//! ```

use super::{CoreError, UpdateEvent, UpdateKind};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Stream {
    pub n: usize,
    pub events: Vec<UpdateEvent>,
}

pub fn parse_stream(text: &str) -> Result<Stream, CoreError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, msg: &str| CoreError::Parse { line: line + 1, msg: msg.to_string() };
    let (i0, header) = lines.next().ok_or_else(|| bad(0, "empty stream"))?;
    let mut it = header.split_whitespace();
    if it.next() != Some("n") {
        return Err(bad(i0, "expected header `n <count>`"));
    }
    let n: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(i0, "bad vertex count"))?;
    let mut events = Vec::new();
    for (i, line) in lines {
        let mut tok = line.split_whitespace();
        let kind = match tok.next() {
            Some("+") => UpdateKind::Insert,
            Some("-") => UpdateKind::Delete,
            _ => return Err(bad(i, "expected `+` or `-`")),
        };
        let mut id = || -> Result<usize, CoreError> {
            let v: usize = tok
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(i, "bad vertex id"))?;
            if v >= n {
                return Err(bad(i, "vertex id out of range"));
            }
            Ok(v)
        };
        let u = id()?;
        let v = id()?;
        if u == v {
            return Err(bad(i, "self-loop"));
        }
        events.push(UpdateEvent { kind, u, v });
    }
    Ok(Stream { n, events })
}

pub fn write_stream(s: &Stream) -> String {
    let mut out = String::with_capacity(16 + s.events.len() * 12);
    let _ = writeln!(out, "n {}", s.n);
    for e in &s.events {
        let c = match e.kind {
            UpdateKind::Insert => '+',
            UpdateKind::Delete => '-',
        };
        let _ = writeln!(out, "{c} {} {}", e.u, e.v);
    }
    out
}
