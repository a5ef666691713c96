//! Design file format.
//!
//! ```text
//! {"v":7,"k":3,"t":2,"blocks":7}
//! 0 1 3
//! 0 2 6
//! ...
//! ```
//!
//! Line 1 is a compact JSON header. Then one block per line, points ascending
//! and space separated, blocks in lexicographic order. LF line endings, with a
//! trailing newline.

use std::fmt::Write as _;

use serde::Deserialize;

use crate::design::{CoveringDesign, DesignParams};
use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    v: u32,
    k: u32,
    t: u32,
    blocks: usize,
}

/// Canonical text form of a design.
pub fn write_design(d: &CoveringDesign) -> String {
    let d = d.canonical();
    let p = d.params();
    let mut out = String::with_capacity(16 + d.len() * p.k() as usize * 4);
    let _ = writeln!(
        out,
        "{{\"v\":{},\"k\":{},\"t\":{},\"blocks\":{}}}",
        p.v(),
        p.k(),
        p.t(),
        d.len()
    );
    for b in d.blocks() {
        for (i, x) in b.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    out
}

pub fn read_design(text: &str) -> Result<CoveringDesign> {
    let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
    if !text.ends_with('\n') {
        return Err(parse_err(
            text.lines().count().max(1),
            "missing trailing newline".into(),
        ));
    }
    let mut lines = text[..text.len() - 1].split('\n');
    let head = lines.next().unwrap_or_default();
    let header: Header =
        serde_json::from_str(head).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    let params =
        DesignParams::new(header.v, header.k, header.t).map_err(|e| parse_err(1, e.to_string()))?;

    let mut d = CoveringDesign::new(params);
    let mut block = Vec::with_capacity(params.k() as usize);
    let mut count = 0usize;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        if count == header.blocks {
            return Err(parse_err(
                lineno,
                format!("more than {} blocks", header.blocks),
            ));
        }
        block.clear();
        let mut offset = 0;
        for tok in line.split(' ') {
            let x: u32 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("offset {offset}: bad point {tok:?}")))?;
            if x >= params.v() {
                return Err(parse_err(
                    lineno,
                    format!("offset {offset}: point {x} is not below v = {}", params.v()),
                ));
            }
            if let Some(&prev) = block.last() {
                if x == prev {
                    return Err(parse_err(
                        lineno,
                        format!("offset {offset}: duplicate point {x}"),
                    ));
                }
                if x < prev {
                    return Err(parse_err(
                        lineno,
                        format!("offset {offset}: points not ascending"),
                    ));
                }
            }
            block.push(x);
            offset += tok.len() + 1;
        }
        if block.len() != params.k() as usize {
            return Err(parse_err(
                lineno,
                format!("block has {} points, expected {}", block.len(), params.k()),
            ));
        }
        d.push_sorted_unchecked(&block);
        count += 1;
    }
    if count != header.blocks {
        return Err(parse_err(
            count + 2,
            format!("header promises {} blocks, found {count}", header.blocks),
        ));
    }
    Ok(d)
}
