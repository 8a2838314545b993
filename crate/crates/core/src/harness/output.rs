//! Output files. Every write goes to a temporary file in the target
//! directory and is renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::escape::Raster;
use crate::harness::config::TOOL;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Io(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

/// Wraps a command report with the tool version and the resolved config.
pub fn envelope(command: &str, config: &Value, report: impl Serialize) -> Result<Value> {
    let report = serde_json::to_value(report).map_err(|e| Error::Io(e.to_string()))?;
    Ok(json!({
        "tool": TOOL.name,
        "version": TOOL.version,
        "command": command,
        "config": config,
        "report": report,
    }))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// RFC-4180 table with LF line endings.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).map_err(csv_err)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(csv_err)
    }

    pub fn finish(self, path: &Path) -> Result<()> {
        let bytes = self.writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        write_atomic(path, &bytes)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Shortest round-trip decimal form; non-finite values spelled out.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Green values quantized linearly over `[0, v_max]` into 16-bit samples.
pub fn quantize(green: f64, v_max: f64) -> u16 {
    if !(v_max > 0.0) || !(green > 0.0) {
        return 0;
    }
    ((green / v_max).min(1.0) * 65535.0).round() as u16
}

/// Binary 16-bit big-endian PGM. `comments` go into the header, one per
/// `#` line; they must not contain newlines.
pub fn pgm_bytes(raster: &Raster, v_max: f64, comments: &[String]) -> Vec<u8> {
    let mut out = Vec::with_capacity(raster.cells.len() * 2 + 256);
    out.extend_from_slice(b"P5\n");
    for c in comments {
        out.extend_from_slice(format!("# {}\n", c.replace(['\n', '\r'], " ")).as_bytes());
    }
    out.extend_from_slice(format!("{} {}\n65535\n", raster.width, raster.height).as_bytes());
    for cell in &raster.cells {
        out.extend_from_slice(&quantize(cell.green, v_max).to_be_bytes());
    }
    out
}

/// Parsed header and samples of a 16-bit P5 file.
pub fn read_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let bad = || Error::Io("malformed PGM".into());
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?.to_string());
    }
    pos += 1;
    if tokens[0] != "P5" || tokens[3] != "65535" {
        return Err(bad());
    }
    let w: usize = tokens[1].parse().map_err(|_| bad())?;
    let h: usize = tokens[2].parse().map_err(|_| bad())?;
    let data = bytes.get(pos..pos + 2 * w * h).ok_or_else(bad)?;
    Ok((w, h, data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()))
}

/// Paths written by one command, in write order.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Written(pub Vec<PathBuf>);

impl Written {
    pub fn json(&mut self, dir: &Path, name: &str, value: &Value) -> Result<()> {
        let p = dir.join(name);
        write_json(&p, value)?;
        self.0.push(p);
        Ok(())
    }

    pub fn table(&mut self, dir: &Path, name: &str, t: Table) -> Result<()> {
        let p = dir.join(name);
        t.finish(&p)?;
        self.0.push(p);
        Ok(())
    }

    pub fn bytes(&mut self, dir: &Path, name: &str, b: &[u8]) -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, b)?;
        self.0.push(p);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::escape::{Cell, CellVerdict};

    #[test]
    fn pgm_round_trip() {
        let cells = vec![
            Cell { green: 0.0, verdict: CellVerdict::Bounded, n: 10 },
            Cell { green: 1.0, verdict: CellVerdict::EscapedAt(2), n: 2 },
            Cell { green: 0.5, verdict: CellVerdict::EscapedAt(3), n: 3 },
            Cell { green: 0.0, verdict: CellVerdict::Uncertain, n: 10 },
            Cell { green: 0.25, verdict: CellVerdict::EscapedAt(4), n: 4 },
            Cell { green: 2.0, verdict: CellVerdict::EscapedAt(1), n: 1 },
        ];
        let r = Raster { width: 3, height: 2, cells };
        let bytes = pgm_bytes(&r, 2.0, &["hello".into(), "x\ny".into()]);
        assert!(bytes.starts_with(b"P5\n# hello\n# x y\n3 2\n65535\n"));
        let (w, h, px) = read_pgm(&bytes).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(px, vec![0, 32768, 16384, 0, 8192, 65535]);
    }

    #[test]
    fn csv_uses_lf_and_quotes() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["a", "b"]).unwrap();
        t.row(["1", "x,y"]).unwrap();
        let p = dir.path().join("t.csv");
        t.finish(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n1,\"x,y\"\n");
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"{}").unwrap();
        write_atomic(&p, b"[]").unwrap();
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("out.json")]);
        assert_eq!(std::fs::read(&p).unwrap(), b"[]");
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, 1.0, -3.5e-12, 12345.678] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
