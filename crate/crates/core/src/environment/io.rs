//! Plain-text field records and per-edge CSV.
//!
//! Record layout: a `# rcmlab-field v1` line, then `d`, `n`, `law`, `seed` header lines,
//! then one conductance per line in canonical edge order. Values are written with
//! shortest round-trip formatting so a read-back field is bit-identical.

use std::io::{BufRead, Write};

use super::field::ConductanceField;
use super::lattice::Lattice;
use super::law::ConductanceLaw;
use crate::error::{Error, Result};
use crate::num::Real;

pub const FIELD_MAGIC: &str = "# rcmlab-field v1";

pub fn write_field<T: Real, W: Write>(field: &ConductanceField<T>, mut out: W) -> Result<()> {
    let l = field.lattice();
    writeln!(out, "{FIELD_MAGIC}")?;
    writeln!(out, "d {}", l.dim())?;
    writeln!(out, "n {}", l.period())?;
    match field.law() {
        Some(law) => writeln!(out, "law {law}")?,
        None => writeln!(out, "law none")?,
    }
    match field.seed() {
        Some(s) => writeln!(out, "seed {s}")?,
        None => writeln!(out, "seed none")?,
    }
    for w in field.values() {
        writeln!(out, "{w:?}")?;
    }
    Ok(())
}

/// Parsed record header plus field.
#[derive(Clone, Debug)]
pub struct FieldRecord<T: Real> {
    pub field: ConductanceField<T>,
    pub law: Option<ConductanceLaw>,
    pub seed: Option<u64>,
}

pub fn read_field<T: Real, R: BufRead>(input: R) -> Result<FieldRecord<T>> {
    let mut lines = input.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, line)) => Ok((i + 1, line?)),
            None => Err(Error::Parse { line: 0, message: format!("missing {what}") }),
        }
    };
    let (_, magic) = next("header")?;
    if magic.trim() != FIELD_MAGIC {
        return Err(Error::Parse { line: 1, message: format!("expected '{FIELD_MAGIC}'") });
    }
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (i, line) = next(key)?;
        match line.trim().split_once(' ') {
            Some((k, v)) if k == key => Ok((i, v.trim().to_string())),
            _ => Err(Error::Parse { line: i, message: format!("expected '{key} <value>'") }),
        }
    };
    let bad = |line: usize, m: String| Error::Parse { line, message: m };
    let (i, d) = header("d")?;
    let d: usize = d.parse().map_err(|_| bad(i, format!("bad dimension '{d}'")))?;
    let (i, n) = header("n")?;
    let n: usize = n.parse().map_err(|_| bad(i, format!("bad period '{n}'")))?;
    let (i, law) = header("law")?;
    let law = if law == "none" { None } else { Some(law.parse().map_err(|e: Error| bad(i, e.to_string()))?) };
    let (i, seed) = header("seed")?;
    let seed = if seed == "none" { None } else { Some(seed.parse().map_err(|_| bad(i, format!("bad seed '{seed}'")))?) };
    let lattice = Lattice::new(d, n)?;
    let mut omega = Vec::with_capacity(lattice.edges());
    for (i, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| bad(i + 1, format!("bad conductance '{t}'")))?;
        omega.push(T::lit(v));
    }
    let field = ConductanceField::from_values(lattice, omega)?;
    Ok(FieldRecord { field, law, seed })
}

/// CSV with one row per edge: index, base-site coordinates, axis, conductance.
pub fn write_edge_csv<T: Real, W: Write>(field: &ConductanceField<T>, mut out: W) -> Result<()> {
    let l = field.lattice();
    write!(out, "edge")?;
    for a in 0..l.dim() {
        write!(out, ",x{a}")?;
    }
    writeln!(out, ",axis,omega")?;
    for e in 0..l.edges() {
        write!(out, "{e}")?;
        for c in l.coords(e / l.dim()) {
            write!(out, ",{c}")?;
        }
        writeln!(out, ",{},{:?}", e % l.dim(), field.omega(e))?;
    }
    Ok(())
}
