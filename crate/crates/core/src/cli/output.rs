use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use super::{fmt_f64, Format};
use crate::error::{Error, Result};

/// Pretty JSON with every float written as `{:.16e}`.
struct RoundTrip<'a>(PrettyFormatter<'a>);

impl Formatter for RoundTrip<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format!("{:.16e}", v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize with 17 significant digits per float. Non-finite floats
/// become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, RoundTrip(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Output directory plus the requested formats.
#[derive(Debug, Clone)]
pub struct Sink {
    dir: PathBuf,
    format: Format,
}

impl Sink {
    pub fn new(dir: PathBuf, format: Format) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Sink { dir, format })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<Option<PathBuf>> {
        if !self.format.json() {
            return Ok(None);
        }
        let p = self.dir.join(format!("{name}.json"));
        fs::write(&p, to_json_string(value)?)?;
        Ok(Some(p))
    }

    pub fn csv(&self, name: &str, content: &str) -> Result<Option<PathBuf>> {
        if !self.format.csv() {
            return Ok(None);
        }
        let p = self.dir.join(format!("{name}.csv"));
        fs::write(&p, content)?;
        Ok(Some(p))
    }

    /// Metadata is written regardless of format.
    pub fn write_meta<T: Serialize>(&self, command: &str, value: &T) -> Result<PathBuf> {
        let p = self.dir.join(format!("{command}.meta.json"));
        fs::write(&p, to_json_string(value)?)?;
        Ok(p)
    }
}

/// Header `c0,c1,...`, one row per matrix row.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = (0..m.ncols()).map(|j| format!("c{j}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// `{"code", "message", "context"}` for the error stream.
pub fn error_json(err: &Error, command: Option<&str>) -> String {
    let mut context = json!({ "kind": err.kind() });
    let extra = match err {
        Error::BudgetExhausted {
            value,
            error_estimate,
            regions,
        } => json!({ "value": value, "error_estimate": error_estimate, "regions": regions }),
        Error::NonIntegrableSingularity { chart } => json!({ "chart": chart }),
        Error::IllConditionedBasis { condition } => json!({ "condition": condition }),
        Error::NonContraction { step, ratio } => json!({ "step": step, "ratio": ratio }),
        Error::MaxIterations(n) => json!({ "max_iter": n }),
        Error::LineSearch(n) => json!({ "halvings": n }),
        Error::VerificationFailed { failed, total } => json!({ "failed": failed, "total": total }),
        _ => json!({}),
    };
    if let (Value::Object(c), Value::Object(e)) = (&mut context, extra) {
        c.extend(e);
        if let Some(cmd) = command {
            c.insert("command".into(), Value::String(cmd.into()));
        }
    }
    let v = json!({
        "code": err.exit_code(),
        "message": err.to_string(),
        "context": context,
    });
    serde_json::to_string(&v).expect("plain JSON value")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_digits() {
        let s = to_json_string(&vec![0.1, 2.0]).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("2.0000000000000000e0"), "{s}");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, 2.0]);
    }

    #[test]
    fn nan_is_null() {
        let s = to_json_string(&vec![f64::NAN]).unwrap();
        assert!(s.contains("null"));
    }

    #[test]
    fn error_json_shape() {
        let e = Error::NonContraction { step: 3, ratio: 0.97 };
        let v: Value = serde_json::from_str(&error_json(&e, Some("solve"))).unwrap();
        assert_eq!(v["code"], 1);
        assert_eq!(v["context"]["kind"], "non_contraction");
        assert_eq!(v["context"]["step"], 3);
        assert_eq!(v["context"]["command"], "solve");
        assert!(v["message"].is_string());
    }

    #[test]
    fn matrix_csv_layout() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = matrix_csv(&m);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "c0,c1");
        assert_eq!(lines.len(), 3);
        assert!(!s.contains('\r'));
    }
}
