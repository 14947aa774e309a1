//! Alist text format for sparse parity-check matrices.
//!
//! The format is the usual one consumed by LDPC toolchains: dimensions,
//! maximum column/row weights, per-column and per-row weights, then 1-based
//! index lists per column and per row. Zero entries (padding used by some
//! writers for irregular codes) are accepted on input and not emitted.

use crate::error::{Error, Result};

use super::ldpc::SparseParity;

/// Serializes a parity matrix to alist text.
pub fn to_alist(h: &SparseParity) -> String {
    let mut out = String::new();
    let col_weights: Vec<usize> = (0..h.n).map(|v| h.var_neighbors(v).len()).collect();
    let row_weights: Vec<usize> = (0..h.m).map(|c| h.check_neighbors(c).len()).collect();
    let max_col = col_weights.iter().cloned().max().unwrap_or(0);
    let max_row = row_weights.iter().cloned().max().unwrap_or(0);

    out.push_str(&format!("{} {}\n", h.n, h.m));
    out.push_str(&format!("{max_col} {max_row}\n"));
    push_row(&mut out, col_weights.iter().cloned());
    push_row(&mut out, row_weights.iter().cloned());
    for v in 0..h.n {
        push_row(&mut out, h.var_neighbors(v).iter().map(|&c| c + 1));
    }
    for c in 0..h.m {
        push_row(&mut out, h.check_neighbors(c).iter().map(|&v| v + 1));
    }
    out
}

fn push_row(out: &mut String, values: impl Iterator<Item = usize>) {
    let line: Vec<String> = values.map(|v| v.to_string()).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

/// Parses alist text into a parity matrix.
pub fn from_alist(text: &str) -> Result<SparseParity> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut next_numbers = |what: &str| -> Result<Vec<usize>> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("alist truncated before {what}")))?;
        line.split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad number {tok:?} in {what}")))
            })
            .collect()
    };

    let dims = next_numbers("dimensions")?;
    if dims.len() != 2 {
        return Err(Error::Parse("alist first line must be `n m`".into()));
    }
    let (n, m) = (dims[0], dims[1]);
    let _max_weights = next_numbers("max weights")?;
    let col_weights = next_numbers("column weights")?;
    let row_weights = next_numbers("row weights")?;
    if col_weights.len() != n || row_weights.len() != m {
        return Err(Error::Parse(
            "alist weight list lengths do not match dimensions".into(),
        ));
    }

    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(n);
    for v in 0..n {
        let entries = next_numbers(&format!("column {v}"))?;
        let rows: Vec<usize> = entries
            .into_iter()
            .filter(|&e| e != 0)
            .map(|e| {
                if e > m {
                    Err(Error::Parse(format!(
                        "row index {e} out of range in column {v}"
                    )))
                } else {
                    Ok(e - 1)
                }
            })
            .collect::<Result<_>>()?;
        if rows.len() != col_weights[v] {
            return Err(Error::Parse(format!(
                "column {v} has {} entries, expected {}",
                rows.len(),
                col_weights[v]
            )));
        }
        columns.push(rows);
    }
    // Row lists are redundant; accept and ignore any that follow.

    Ok(SparseParity::from_columns(n, m, &columns))
}
