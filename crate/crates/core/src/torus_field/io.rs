//! CSV export/import of fields and the JSON metadata sidecar.
//!
//! Layout: a header record `n1,n2`, a record with the two sizes, then `n1`
//! rows of `n2` values. Numbers use the shortest decimal form that round-trips.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FieldError, Scheme, TorusField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub n1: usize,
    pub n2: usize,
    pub scheme: Scheme,
    /// Where the data came from: an expression, a file name, or a solver output.
    #[serde(default)]
    pub source: String,
}

impl FieldMeta {
    pub fn for_field(f: &TorusField, source: impl Into<String>) -> Self {
        FieldMeta { n1: f.n1(), n2: f.n2(), scheme: f.scheme(), source: source.into() }
    }
}

fn csv_err(e: csv::Error) -> FieldError {
    FieldError::Parse(e.to_string())
}

pub fn write_csv<W: Write>(f: &TorusField, w: W) -> Result<(), FieldError> {
    let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    wr.write_record(["n1", "n2"]).map_err(csv_err)?;
    wr.write_record([f.n1().to_string(), f.n2().to_string()]).map_err(csv_err)?;
    for i in 0..f.n1() {
        let row = &f.values()[i * f.n2()..(i + 1) * f.n2()];
        wr.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R, scheme: Scheme) -> Result<TorusField, FieldError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(r);
    let mut records = rd.records();
    let mut next = || -> Result<csv::StringRecord, FieldError> {
        records.next().ok_or_else(|| FieldError::Parse("truncated field CSV".into()))?.map_err(csv_err)
    };
    let header = next()?;
    if header.len() != 2 || &header[0] != "n1" || &header[1] != "n2" {
        return Err(FieldError::Parse("field CSV must start with the header `n1,n2`".into()));
    }
    let sizes = next()?;
    let parse_size = |s: &str| s.parse::<usize>().map_err(|e| FieldError::Parse(format!("grid size `{s}`: {e}")));
    if sizes.len() != 2 {
        return Err(FieldError::Parse("second CSV record must hold n1,n2".into()));
    }
    let (n1, n2) = (parse_size(&sizes[0])?, parse_size(&sizes[1])?);
    let mut values = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        let rec = next()?;
        if rec.len() != n2 {
            return Err(FieldError::Parse(format!("row {i} has {} values, expected {n2}", rec.len())));
        }
        for s in rec.iter() {
            values.push(s.parse::<f64>().map_err(|e| FieldError::Parse(format!("value `{s}`: {e}")))?);
        }
    }
    if next().is_ok() {
        return Err(FieldError::Parse(format!("more than {n1} data rows")));
    }
    TorusField::from_values(n1, n2, scheme, values)
}

pub fn save_csv(f: &TorusField, path: &Path) -> Result<(), FieldError> {
    write_csv(f, fs::File::create(path)?)
}

pub fn load_csv(path: &Path, scheme: Scheme) -> Result<TorusField, FieldError> {
    read_csv(fs::File::open(path)?, scheme)
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn save_with_meta(f: &TorusField, dir: &Path, stem: &str, source: &str) -> Result<(), FieldError> {
    save_csv(f, &dir.join(format!("{stem}.csv")))?;
    let meta = FieldMeta::for_field(f, source);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| FieldError::Parse(e.to_string()))?;
    fs::write(dir.join(format!("{stem}.json")), text)?;
    Ok(())
}

/// Reads a field written by [`save_with_meta`]; the sidecar is optional and
/// defaults to the spectral scheme when absent.
pub fn load_with_meta(dir: &Path, stem: &str) -> Result<(TorusField, Option<FieldMeta>), FieldError> {
    let meta_path = dir.join(format!("{stem}.json"));
    let meta: Option<FieldMeta> = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path)?;
        Some(serde_json::from_str(&text).map_err(|e| FieldError::Parse(e.to_string()))?)
    } else {
        None
    };
    let scheme = meta.as_ref().map(|m| m.scheme).unwrap_or_default();
    let f = load_csv(&dir.join(format!("{stem}.csv")), scheme)?;
    if let Some(m) = &meta {
        if m.n1 != f.n1() || m.n2 != f.n2() {
            return Err(FieldError::GridMismatch(m.n1, m.n2, f.n1(), f.n2()));
        }
    }
    Ok((f, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let f = TorusField::from_fn(8, 4, Scheme::Spectral, |x, y| (2.0 * PI * x).sin() / 3.0 + y.exp() * 1e-17);
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let g = read_csv(buf.as_slice(), Scheme::Spectral).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_rejects_bad_shapes() {
        assert!(read_csv("n1,n2\n2,2\n1,2\n".as_bytes(), Scheme::Spectral).is_err());
        assert!(read_csv("n1,n2\n1,2\n1,2,3\n".as_bytes(), Scheme::Spectral).is_err());
        assert!(read_csv("a,b\n1,1\n0\n".as_bytes(), Scheme::Spectral).is_err());
        assert!(read_csv("n1,n2\n1,1\nfoo\n".as_bytes(), Scheme::Spectral).is_err());
        let ok = read_csv("n1,n2\n1,2\n0.5, -1e3\n".as_bytes(), Scheme::Fd4).unwrap();
        assert_eq!(ok.values(), &[0.5, -1000.0]);
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = TorusField::from_fn(4, 4, Scheme::Fd4, |x, y| x - y);
        save_with_meta(&f, dir.path(), "F", "x - y").unwrap();
        let (g, meta) = load_with_meta(dir.path(), "F").unwrap();
        assert_eq!(g, f);
        assert_eq!(meta.unwrap().source, "x - y");
    }
}
