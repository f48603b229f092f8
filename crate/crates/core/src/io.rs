//! CSV ingestion and stable number formatting.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Significant digits used for every number written to a file.
pub const SIG_DIGITS: usize = 12;

/// Formats `x` like C's `%.12g`.
pub fn fmt_g(x: f64) -> String {
    fmt_sig(x, SIG_DIGITS)
}

/// Formats `x` like C's `%.{digits}g`: shortest of fixed or exponent
/// notation, trailing zeros removed.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds `x` to [`SIG_DIGITS`] significant digits, so that JSON encodings
/// are stable across platforms.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    fmt_g(x).parse().unwrap_or(x)
}

/// A numeric table read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub data: Array2<f64>,
    pub col_names: Option<Vec<String>>,
}

/// Reads a comma-separated numeric table. Columns listed in `drop` (by
/// header name, or by zero-based index when there is no header) are skipped.
pub fn read_numeric_csv<R: Read>(reader: R, header: bool, drop: &[String]) -> Result<NumericTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Option<Vec<String>> = if header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let is_dropped = |j: usize| -> bool {
        drop.iter().any(|d| match &names {
            Some(n) => n.get(j).is_some_and(|name| name == d),
            None => d.parse::<usize>().is_ok_and(|idx| idx == j),
        })
    };
    let mut width = None;
    let mut flat = Vec::new();
    let mut nrows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row_len = 0;
        for (j, field) in rec.iter().enumerate() {
            if is_dropped(j) {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!("row {}, column {}: '{}' is not a number", i + 1, j + 1, field))
            })?;
            flat.push(v);
            row_len += 1;
        }
        match width {
            None => width = Some(row_len),
            Some(w) if w != row_len => {
                return Err(Error::Parse(format!(
                    "row {} has {} values, expected {}",
                    i + 1,
                    row_len,
                    w
                )))
            }
            _ => {}
        }
        nrows += 1;
    }
    let ncols = width.unwrap_or(0);
    let data = Array2::from_shape_vec((nrows, ncols), flat).expect("rectangular by construction");
    let col_names = names.as_ref().map(|n| {
        n.iter()
            .enumerate()
            .filter(|(j, _)| !is_dropped(*j))
            .map(|(_, s)| s.clone())
            .collect()
    });
    Ok(NumericTable { data, col_names })
}

pub fn read_numeric_csv_path(path: &Path, header: bool, drop: &[String]) -> Result<NumericTable> {
    read_numeric_csv(std::fs::File::open(path)?, header, drop)
}

/// Reads one column of a headed CSV as strings.
pub fn read_string_column(path: &Path, column: &str) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Parse(format!("no column named '{column}'")))?;
    rdr.records()
        .map(|r| {
            let r = r?;
            r.get(idx)
                .map(str::to_string)
                .ok_or_else(|| Error::Parse("short row".into()))
        })
        .collect()
}

/// Writes a numeric matrix as CSV with an optional header row.
pub fn write_matrix<W: Write>(w: W, header: Option<&[String]>, data: &Array2<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if let Some(h) = header {
        wtr.write_record(h)?;
    }
    for row in data.outer_iter() {
        wtr.write_record(row.iter().map(|&v| fmt_g(v)))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn g_format_matches_c() {
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(0.1), "0.1");
        assert_eq!(fmt_g(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g(2.0f64.sqrt() * 1e6), "1414213.56237");
        assert_eq!(fmt_g(1e-5), "1e-05");
        assert_eq!(fmt_g(1.5e15), "1.5e+15");
        assert_eq!(fmt_g(-123456789012.0), "-123456789012");
        assert_eq!(fmt_g(1234567890123.0), "1.23456789012e+12");
        assert_eq!(fmt_g(0.0001), "0.0001");
        assert_eq!(fmt_sig(1.999682, 7), "1.999682");
    }

    #[test]
    fn round_trip_rounding() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
    }

    #[test]
    fn read_with_header_and_drop() {
        let text = "a,b,class\n1,2,0\n3,4.5,1\n";
        let t = read_numeric_csv(text.as_bytes(), true, &["class".into()]).unwrap();
        assert_eq!(t.data, array![[1.0, 2.0], [3.0, 4.5]]);
        assert_eq!(t.col_names.unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn read_without_header() {
        let t = read_numeric_csv("1,2\n3,4\n".as_bytes(), false, &[]).unwrap();
        assert_eq!(t.data, array![[1.0, 2.0], [3.0, 4.0]]);
        assert!(t.col_names.is_none());
    }

    #[test]
    fn rejects_text_cells() {
        let err = read_numeric_csv("1,x\n".as_bytes(), false, &[]).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn writes_csv() {
        let mut out = Vec::new();
        write_matrix(&mut out, Some(&["a".into(), "b".into()]), &array![[1.0, 0.5]]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a,b\n1,0.5\n");
    }
}
