use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_LINE: &str = "# schema=1";
pub const SERIES_HEADER: &str = "abscissa,value,n_tr,converged,residual";

/// One row of a series file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub abscissa: f64,
    pub value: f64,
    pub n_tr: usize,
    pub converged: bool,
    pub residual: f64,
}

/// 17 significant digits, so values round-trip exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a file through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&parent).map_err(|e| Error::io(&parent, e))?;
    tmp.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn render_series(rows: &[SeriesRow]) -> String {
    let mut out = format!("{SCHEMA_LINE}\n{SERIES_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float(r.abscissa),
            fmt_float(r.value),
            r.n_tr,
            r.converged,
            fmt_float(r.residual)
        ));
    }
    out
}

pub fn write_series(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    write_atomic(path, &render_series(rows))
}

/// Reads a series file written by [`write_series`].
pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, reason: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == SCHEMA_LINE => {}
        _ => return Err(bad(1, format!("expected `{SCHEMA_LINE}`"))),
    }
    match lines.next() {
        Some((_, l)) if l.trim() == SERIES_HEADER => {}
        _ => return Err(bad(2, format!("expected header `{SERIES_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(i + 1, format!("expected 5 fields, found {}", f.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(i + 1, format!("`{s}`: {e}")));
        rows.push(SeriesRow {
            abscissa: num(f[0])?,
            value: num(f[1])?,
            n_tr: f[2]
                .trim()
                .parse()
                .map_err(|e| bad(i + 1, format!("`{}`: {e}", f[2])))?,
            converged: f[3]
                .trim()
                .parse()
                .map_err(|e| bad(i + 1, format!("`{}`: {e}", f[3])))?,
            residual: num(f[4])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![
            SeriesRow {
                abscissa: 0.1,
                value: -1.0 / 3.0,
                n_tr: 64,
                converged: true,
                residual: 1e-14,
            },
            SeriesRow {
                abscissa: 0.2,
                value: std::f64::consts::PI * 1e9,
                n_tr: 128,
                converged: false,
                residual: 0.0,
            },
        ];
        write_series(&path, &rows).unwrap();
        assert_eq!(read_series(&path).unwrap(), rows);
    }

    #[test]
    fn rejects_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "abscissa,value\n1,2\n").unwrap();
        assert!(matches!(read_series(&path), Err(Error::Csv { line: 1, .. })));
        std::fs::write(&path, format!("{SCHEMA_LINE}\n{SERIES_HEADER}\n1,2,3\n")).unwrap();
        assert!(matches!(read_series(&path), Err(Error::Csv { line: 3, .. })));
    }
}
