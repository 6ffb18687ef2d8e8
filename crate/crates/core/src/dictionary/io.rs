//! Dictionary CSV format:
//!
//! ```text
//! # capset-dict v1 N=<n> L=<l> label=<text>
//! <N rows of L comma-separated floats, 17 significant digits>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{Dictionary, UNIT_NORM_TOL};
use crate::error::{CapsetError, Result};

const MAGIC: &str = "# capset-dict v1";

/// Non-fatal findings while loading a dictionary file.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadWarning {
    /// `L <= N`: not an overcomplete dictionary.
    NotOvercomplete { n: usize, l: usize },
    /// Some column norm differs from 1 by `max_deviation`.
    NotUnitNorm { max_deviation: f64, renormalized: bool },
}

#[derive(Debug, Clone)]
pub struct LoadedDictionary {
    pub dictionary: Dictionary,
    pub warnings: Vec<LoadWarning>,
}

pub fn save_dictionary(dict: &Dictionary, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(
        out,
        "{MAGIC} N={} L={} label={}",
        dict.rows(),
        dict.cols(),
        dict.label().replace('\n', " ")
    )?;
    let m = dict.matrix();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn parse_header(path: &Path, line: &str) -> Result<(usize, usize, String)> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| CapsetError::format(path, "missing `# capset-dict v1` header"))?;
    let rest = rest.trim_start();
    let mut fields = rest.splitn(3, ' ');
    let mut take = |key: &str| -> Result<String> {
        let field = fields
            .next()
            .ok_or_else(|| CapsetError::format(path, format!("header lacks {key}=")))?;
        field
            .strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| CapsetError::format(path, format!("expected {key}=..., got `{field}`")))
    };
    let n = take("N")?;
    let l = take("L")?;
    let label = take("label")?;
    let parse = |v: &str, key: &str| {
        v.parse::<usize>()
            .map_err(|_| CapsetError::format(path, format!("bad {key} value `{v}`")))
    };
    Ok((parse(&n, "N")?, parse(&l, "L")?, label))
}

/// Loads a dictionary file. With `renormalize`, columns whose norm is off by
/// more than the unit-norm tolerance are rescaled (and the warning says so).
pub fn load_dictionary(path: impl AsRef<Path>, renormalize: bool) -> Result<LoadedDictionary> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| CapsetError::format(path, "empty file"))??;
    let (n, l, label) = parse_header(path, header.trim_end())?;
    if n == 0 || l == 0 {
        return Err(CapsetError::format(path, "N and L must be positive"));
    }

    let mut data = Vec::with_capacity(n * l);
    let mut rows = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        if rows > n {
            return Err(CapsetError::format(path, format!("more than N={n} data rows")));
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                CapsetError::format(path, format!("row {rows}: bad number `{}`", field.trim()))
            })?;
            if !v.is_finite() {
                return Err(CapsetError::format(path, format!("row {rows}: non-finite entry")));
            }
            data.push(v);
        }
        if data.len() - before != l {
            return Err(CapsetError::format(
                path,
                format!("row {rows} has {} entries, expected L={l}", data.len() - before),
            ));
        }
    }
    if rows != n {
        return Err(CapsetError::format(path, format!("found {rows} rows, expected N={n}")));
    }

    let matrix = DMatrix::from_row_slice(n, l, &data);
    let mut warnings = Vec::new();
    if l <= n {
        warnings.push(LoadWarning::NotOvercomplete { n, l });
    }
    let mut dictionary = Dictionary::new(matrix, label.clone(), None)?;
    let deviation = dictionary.max_norm_deviation();
    if deviation > UNIT_NORM_TOL {
        if renormalize {
            dictionary = Dictionary::normalized(dictionary.into_matrix(), label, None)?;
        }
        warnings.push(LoadWarning::NotUnitNorm {
            max_deviation: deviation,
            renormalized: renormalize,
        });
    }
    for w in &warnings {
        log::warn!("{}: {w:?}", path.display());
    }
    Ok(LoadedDictionary {
        dictionary,
        warnings,
    })
}
