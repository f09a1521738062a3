//! JSON-lines persistence. The first line is a header
//! `{"format":"fracap-measure","version":1,"n":..,"s":..}`, then one
//! `{"x":[..],"t":..,"w":..}` record per atom.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::Value;

use crate::error::MeasureError;
use crate::measures::DiscreteMeasure;

pub const FORMAT_NAME: &str = "fracap-measure";
pub const FORMAT_VERSION: u64 = 1;

/// 17 significant digits, enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_measure<W: Write>(m: &DiscreteMeasure, mut out: W) -> Result<(), MeasureError> {
    writeln!(out, "{{\"format\":\"{FORMAT_NAME}\",\"version\":{FORMAT_VERSION},\"n\":{},\"s\":{}}}", m.n(), num(m.s()))?;
    for i in 0..m.len() {
        let x: Vec<String> = m.x(i).iter().map(|&v| num(v)).collect();
        writeln!(out, "{{\"x\":[{}],\"t\":{},\"w\":{}}}", x.join(","), num(m.t(i)), num(m.weight(i)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_measure<R: Read>(input: R) -> Result<DiscreteMeasure, MeasureError> {
    let mut lines = BufReader::new(input).lines().enumerate().map(|(i, l)| (i + 1, l));
    let (line, header) = loop {
        match lines.next() {
            Some((line, text)) => {
                let text = text?;
                if !text.trim().is_empty() {
                    break (line, text);
                }
            }
            None => return Err(MeasureError::Parse { line: 0, message: "missing header".into() }),
        }
    };
    let bad = |line: usize, message: String| MeasureError::Parse { line, message };
    let header: Value = serde_json::from_str(&header).map_err(|e| bad(line, format!("header is not JSON: {e}")))?;
    if header.get("format").and_then(Value::as_str) != Some(FORMAT_NAME) {
        return Err(bad(line, format!("header must carry \"format\":\"{FORMAT_NAME}\"")));
    }
    match header.get("version").and_then(Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        other => return Err(bad(line, format!("unsupported format version {other:?}"))),
    }
    let n = header.get("n").and_then(Value::as_u64).ok_or_else(|| bad(line, "header lacks integer \"n\"".into()))? as usize;
    let s = header.get("s").and_then(Value::as_f64).ok_or_else(|| bad(line, "header lacks numeric \"s\"".into()))?;
    let mut m = DiscreteMeasure::empty(n, s).map_err(|e| bad(line, e.to_string()))?;
    let mut record = 0usize;
    for (line, text) in lines {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        record += 1;
        let v: Value = serde_json::from_str(&text).map_err(|e| bad(line, format!("record {record}: {e}")))?;
        let x: Vec<f64> = v
            .get("x")
            .and_then(Value::as_array)
            .ok_or_else(|| bad(line, format!("record {record}: missing array \"x\"")))?
            .iter()
            .map(|c| c.as_f64())
            .collect::<Option<_>>()
            .ok_or_else(|| bad(line, format!("record {record}: non-numeric entry in \"x\"")))?;
        if x.len() != n {
            return Err(bad(line, format!("record {record}: expected {n} spatial coordinates, found {}", x.len())));
        }
        let field = |name: &str| v.get(name).and_then(Value::as_f64).ok_or_else(|| bad(line, format!("record {record}: missing numeric \"{name}\"")));
        let t = field("t")?;
        let w = field("w")?;
        m.push(&x, t, w).map_err(|e| bad(line, format!("record {record}: {e}")))?;
    }
    Ok(m)
}

pub fn save(m: &DiscreteMeasure, path: impl AsRef<Path>) -> Result<(), MeasureError> {
    write_measure(m, BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<DiscreteMeasure, MeasureError> {
    read_measure(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psgeo::PsPoint;

    #[test]
    fn round_trip_is_exact() {
        let atoms = vec![PsPoint::new(vec![0.1, 1.0 / 3.0], -2.5e-300), PsPoint::new(vec![f64::MAX, -0.0], std::f64::consts::PI)];
        let m = DiscreteMeasure::from_atoms(&atoms, vec![1e-17, -7.0 / 9.0], 2, 0.8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        save(&m, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back, m);
        for i in 0..m.len() {
            assert_eq!(back.weight(i).to_bits(), m.weight(i).to_bits());
        }
    }

    #[test]
    fn empty_round_trip() {
        let m = DiscreteMeasure::empty(3, 1.0).unwrap();
        let mut buf = Vec::new();
        write_measure(&m, &mut buf).unwrap();
        assert_eq!(read_measure(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn errors_name_the_line() {
        let text = "{\"format\":\"fracap-measure\",\"version\":1,\"n\":1,\"s\":0.75}\n{\"x\":[0.5],\"t\":0.1,\"w\":1}\n\n{\"x\":[0.5,0.2],\"t\":0.1,\"w\":1}\n";
        match read_measure(text.as_bytes()) {
            Err(MeasureError::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("record 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let garbage = "{\"format\":\"fracap-measure\",\"version\":1,\"n\":1,\"s\":0.75}\n{\"x\":[0.5],\"t\":oops}\n";
        assert!(matches!(read_measure(garbage.as_bytes()), Err(MeasureError::Parse { line: 2, .. })));
        assert!(matches!(read_measure("".as_bytes()), Err(MeasureError::Parse { .. })));
        assert!(matches!(read_measure("{\"format\":\"other\"}".as_bytes()), Err(MeasureError::Parse { line: 1, .. })));
    }
}
