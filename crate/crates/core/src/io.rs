//! Text file formats for diagrams and cocycles.
//!
//! Both formats are line oriented with `#` comments. The serializer emits a
//! canonical layout (edges sorted by range vertex, then rank), and parsing
//! the serialized form reproduces the value exactly; re-serializing is then
//! byte-identical.

use crate::bratteli::{EdgeLevel, OrderedBratteliDiagram, RawEdge};
use crate::circle::{CircleCocycle, IsomT};
use crate::error::Error;
use crate::extension::ZmCocycle;
use crate::rational::TorusPoint;
use crate::Result;
use std::fmt::Write as _;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

// ---------------------------------------------------------------------------
// Diagram format
// ---------------------------------------------------------------------------
//
//   bratteli stationary            (or: bratteli levels <n>)
//   vertices 1 <v1> <v2> ...       (vertex counts, level 0 first)
//   level 0
//   <source> <range> <rank>
//   ...
//   repeat                         (stationary only: the repeating pattern)
//   <source> <range> <rank>
//   ...
//   end

pub fn parse_diagram(text: &str) -> Result<OrderedBratteliDiagram> {
    let mut lines = content_lines(text);
    let (ln, header) =
        lines.next().ok_or_else(|| Error::parse(1, "empty diagram file"))?;
    let mut hp = header.split_whitespace();
    if hp.next() != Some("bratteli") {
        return Err(Error::parse(ln, "expected `bratteli stationary` or `bratteli levels <n>`"));
    }
    let stationary = match (hp.next(), hp.next()) {
        (Some("stationary"), None) => true,
        (Some("levels"), Some(n)) => {
            n.parse::<usize>().map_err(|_| Error::parse(ln, "bad level count"))?;
            false
        }
        _ => return Err(Error::parse(ln, "expected `stationary` or `levels <n>`")),
    };

    let (ln, vline) = lines.next().ok_or_else(|| Error::parse(ln, "missing `vertices` line"))?;
    let mut vp = vline.split_whitespace();
    if vp.next() != Some("vertices") {
        return Err(Error::parse(ln, "expected `vertices ...`"));
    }
    let counts: Vec<usize> = vp
        .map(|t| t.parse().map_err(|_| Error::parse(ln, format!("bad vertex count `{t}`"))))
        .collect::<Result<_>>()?;
    if counts.len() < 2 {
        return Err(Error::parse(ln, "need at least two levels of vertex counts"));
    }
    if counts[0] != 1 {
        return Err(Error::parse(ln, "level 0 must have exactly one vertex"));
    }

    #[derive(PartialEq)]
    enum Section {
        Level(usize),
        Repeat,
    }
    let mut head: Vec<Vec<RawEdge>> = vec![Vec::new(); counts.len() - 1];
    let mut repeat: Option<Vec<RawEdge>> = None;
    let mut current: Option<Section> = None;
    let mut ended = false;
    for (ln, line) in lines {
        if ended {
            return Err(Error::parse(ln, "content after `end`"));
        }
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "level" => {
                let i: usize = parts
                    .next()
                    .ok_or_else(|| Error::parse(ln, "missing level index"))?
                    .parse()
                    .map_err(|_| Error::parse(ln, "bad level index"))?;
                if i + 1 >= counts.len() {
                    return Err(Error::parse(ln, format!("level {i} out of range")));
                }
                current = Some(Section::Level(i));
            }
            "repeat" => {
                if !stationary {
                    return Err(Error::parse(ln, "`repeat` in a non-stationary diagram"));
                }
                repeat = Some(Vec::new());
                current = Some(Section::Repeat);
            }
            "end" => ended = true,
            tok => {
                let source: usize =
                    tok.parse().map_err(|_| Error::parse(ln, format!("bad edge source `{tok}`")))?;
                let range: usize = parts
                    .next()
                    .ok_or_else(|| Error::parse(ln, "edge needs `source range rank`"))?
                    .parse()
                    .map_err(|_| Error::parse(ln, "bad edge range"))?;
                let rank: usize = parts
                    .next()
                    .ok_or_else(|| Error::parse(ln, "edge needs `source range rank`"))?
                    .parse()
                    .map_err(|_| Error::parse(ln, "bad edge rank"))?;
                if parts.next().is_some() {
                    return Err(Error::parse(ln, "trailing tokens after edge"));
                }
                let edge = RawEdge { source, range, rank };
                match &current {
                    Some(Section::Level(i)) => head[*i].push(edge),
                    Some(Section::Repeat) => repeat.as_mut().unwrap().push(edge),
                    None => return Err(Error::parse(ln, "edge outside a `level`/`repeat` section")),
                }
            }
        }
    }
    if !ended {
        return Err(Error::parse(0, "missing `end`"));
    }
    let mut levels = Vec::with_capacity(head.len());
    for (i, edges) in head.iter().enumerate() {
        levels.push(EdgeLevel::from_edges(counts[i], counts[i + 1], edges)?);
    }
    let pattern = match repeat {
        Some(edges) => {
            let n = *counts.last().unwrap();
            Some(EdgeLevel::from_edges(n, n, &edges)?)
        }
        None => {
            if stationary {
                return Err(Error::parse(0, "stationary diagram needs a `repeat` section"));
            }
            None
        }
    };
    OrderedBratteliDiagram::new(levels, pattern)
}

pub fn serialize_diagram(d: &OrderedBratteliDiagram) -> String {
    let mut out = String::new();
    if d.is_stationary() {
        out.push_str("bratteli stationary\n");
    } else {
        let _ = writeln!(out, "bratteli levels {}", d.head().len());
    }
    out.push_str("vertices 1");
    for el in d.head() {
        let _ = write!(out, " {}", el.range_count);
    }
    out.push('\n');
    for (i, el) in d.head().iter().enumerate() {
        let _ = writeln!(out, "level {i}");
        for e in el.edges() {
            let _ = writeln!(out, "{} {} {}", e.source, e.range, e.rank);
        }
    }
    if let Some(rep) = d.repeat_pattern() {
        out.push_str("repeat\n");
        for e in rep.edges() {
            let _ = writeln!(out, "{} {} {}", e.source, e.range, e.rank);
        }
    }
    out.push_str("end\n");
    out
}

// ---------------------------------------------------------------------------
// Circle cocycle format
// ---------------------------------------------------------------------------
//
//   cocycle level <n>
//   <tower> <floor> <rot_numerator> <rot_denominator> <flip>
//   ...
//   end
//
// Every cell of the level partition must appear exactly once.

pub fn parse_circle_cocycle(text: &str) -> Result<CircleCocycle> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty cocycle file"))?;
    let mut hp = header.split_whitespace();
    if hp.next() != Some("cocycle") || hp.next() != Some("level") {
        return Err(Error::parse(ln, "expected `cocycle level <n>`"));
    }
    let level: usize = hp
        .next()
        .ok_or_else(|| Error::parse(ln, "missing level"))?
        .parse()
        .map_err(|_| Error::parse(ln, "bad level"))?;
    let mut cells: Vec<(usize, u64, IsomT)> = Vec::new();
    let mut ended = false;
    for (ln, line) in lines {
        if ended {
            return Err(Error::parse(ln, "content after `end`"));
        }
        if line == "end" {
            ended = true;
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(Error::parse(ln, "expected `tower floor num den flip`"));
        }
        let tower: usize = toks[0].parse().map_err(|_| Error::parse(ln, "bad tower"))?;
        let floor: u64 = toks[1].parse().map_err(|_| Error::parse(ln, "bad floor"))?;
        let num: i64 = toks[2].parse().map_err(|_| Error::parse(ln, "bad numerator"))?;
        let den: i64 = toks[3].parse().map_err(|_| Error::parse(ln, "bad denominator"))?;
        if den == 0 {
            return Err(Error::parse(ln, "zero denominator"));
        }
        let flip = match toks[4] {
            "0" => false,
            "1" => true,
            _ => return Err(Error::parse(ln, "flip must be 0 or 1")),
        };
        if floor == 0 {
            return Err(Error::parse(ln, "floors are 1-based"));
        }
        cells.push((tower, floor, IsomT { rot: TorusPoint::from_ints(num, den), flip }));
    }
    if !ended {
        return Err(Error::parse(0, "missing `end`"));
    }
    let rows = assemble_rows(cells, level)?;
    let (level, values) = rows.into_parts();
    Ok(CircleCocycle { level, values })
}

fn assemble_rows<T: Copy>(cells: Vec<(usize, u64, T)>, level: usize) -> Result<CocycleRows<T>> {
    let towers = cells.iter().map(|&(v, _, _)| v + 1).max().unwrap_or(0);
    let mut rows: Vec<Vec<Option<T>>> = vec![Vec::new(); towers];
    for (v, k, val) in cells {
        let row = &mut rows[v];
        if row.len() < k as usize {
            row.resize(k as usize, None);
        }
        if row[(k - 1) as usize].is_some() {
            return Err(Error::parse(0, format!("duplicate cell ({v},{k})")));
        }
        row[(k - 1) as usize] = Some(val);
    }
    let mut values = Vec::with_capacity(rows.len());
    for (v, row) in rows.into_iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (k, slot) in row.into_iter().enumerate() {
            out.push(slot.ok_or_else(|| {
                Error::parse(0, format!("missing cell ({v},{}) (floors must be contiguous)", k + 1))
            })?);
        }
        if out.is_empty() {
            return Err(Error::parse(0, format!("tower {v} has no cells")));
        }
        values.push(out);
    }
    Ok(CocycleRows { level, values })
}

struct CocycleRows<T> {
    level: usize,
    values: Vec<Vec<T>>,
}

impl<T> CocycleRows<T> {
    fn into_parts(self) -> (usize, Vec<Vec<T>>) {
        (self.level, self.values)
    }
}

pub fn serialize_circle_cocycle(c: &CircleCocycle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "cocycle level {}", c.level);
    for (v, row) in c.values.iter().enumerate() {
        for (k0, isom) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                v,
                k0 + 1,
                isom.rot.rep().numer(),
                isom.rot.rep().denom(),
                u8::from(isom.flip)
            );
        }
    }
    out.push_str("end\n");
    out
}

// ---------------------------------------------------------------------------
// Z_m cocycle format
// ---------------------------------------------------------------------------
//
//   zmcocycle modulus <m> level <n>
//   <tower> <floor> <value>
//   ...
//   end

pub fn parse_zm_cocycle(text: &str) -> Result<ZmCocycle> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty cocycle file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 5 || toks[0] != "zmcocycle" || toks[1] != "modulus" || toks[3] != "level" {
        return Err(Error::parse(ln, "expected `zmcocycle modulus <m> level <n>`"));
    }
    let modulus: u64 = toks[2].parse().map_err(|_| Error::parse(ln, "bad modulus"))?;
    if modulus == 0 {
        return Err(Error::parse(ln, "modulus must be positive"));
    }
    let level: usize = toks[4].parse().map_err(|_| Error::parse(ln, "bad level"))?;
    let mut cells: Vec<(usize, u64, u64)> = Vec::new();
    let mut ended = false;
    for (ln, line) in lines {
        if ended {
            return Err(Error::parse(ln, "content after `end`"));
        }
        if line == "end" {
            ended = true;
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::parse(ln, "expected `tower floor value`"));
        }
        let tower: usize = toks[0].parse().map_err(|_| Error::parse(ln, "bad tower"))?;
        let floor: u64 = toks[1].parse().map_err(|_| Error::parse(ln, "bad floor"))?;
        let value: u64 = toks[2].parse().map_err(|_| Error::parse(ln, "bad value"))?;
        if floor == 0 {
            return Err(Error::parse(ln, "floors are 1-based"));
        }
        if value >= modulus {
            return Err(Error::parse(ln, format!("value {value} not reduced mod {modulus}")));
        }
        cells.push((tower, floor, value));
    }
    if !ended {
        return Err(Error::parse(0, "missing `end`"));
    }
    let rows = assemble_rows(cells, level)?;
    let (level, values) = rows.into_parts();
    Ok(ZmCocycle { modulus, level, values })
}

pub fn serialize_zm_cocycle(c: &ZmCocycle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "zmcocycle modulus {} level {}", c.modulus, c.level);
    for (v, row) in c.values.iter().enumerate() {
        for (k0, val) in row.iter().enumerate() {
            let _ = writeln!(out, "{} {} {}", v, k0 + 1, val);
        }
    }
    out.push_str("end\n");
    out
}
