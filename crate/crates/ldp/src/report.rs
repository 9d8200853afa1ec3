//! Bit-stable CSV and JSON report output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use ldp_core::mc::{speed, McEstimate};
use ldp_core::sim::TailModel;

pub const HEADER: [&str; 9] = ["n", "k", "trials", "hits", "phat", "ci_lo", "ci_hi", "norm_log", "target"];

/// Decimal rendering with 10 significant digits; scientific notation
/// outside `[1e-5, 1e15)`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..15).contains(&e) {
        let decimals = (9 - e).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        trim_fraction(&s).to_string()
    } else {
        let s = format!("{:.9e}", x);
        let (mant, exp) = s.split_once('e').unwrap_or((&s, "0"));
        format!("{}e{}", trim_fraction(mant), exp)
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounded to 10 significant digits, for JSON numbers.
pub fn round_sig(x: f64) -> f64 {
    fmt_sig(x).parse().unwrap_or(x)
}

/// `log(phat)/(c n^α)`, or an upper bound on it when nothing was hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormLog {
    Value(f64),
    Below(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n: Option<u64>,
    pub k: Option<usize>,
    pub trials: u64,
    pub hits: u64,
    pub phat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub norm_log: NormLog,
    pub target: Option<f64>,
}

impl ReportRow {
    pub fn from_estimate(e: &McEstimate, k: Option<usize>, tail: &TailModel, target: Option<f64>) -> Self {
        let norm_log = match e.norm_log {
            Some(v) => NormLog::Value(v),
            None => NormLog::Below(e.ci95.1.ln() / speed(e.n as f64, tail)),
        };
        ReportRow {
            n: Some(e.n),
            k,
            trials: e.trials,
            hits: e.hits,
            phat: e.phat,
            ci_lo: e.ci95.0,
            ci_hi: e.ci95.1,
            norm_log,
            target,
        }
    }

    fn fields(&self) -> [String; 9] {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            opt(self.n.map(|v| v.to_string())),
            opt(self.k.map(|v| v.to_string())),
            self.trials.to_string(),
            self.hits.to_string(),
            fmt_sig(self.phat),
            fmt_sig(self.ci_lo),
            fmt_sig(self.ci_hi),
            match self.norm_log {
                NormLog::Value(v) => fmt_sig(v),
                NormLog::Below(v) => format!("<{}", fmt_sig(v)),
            },
            opt(self.target.map(fmt_sig)),
        ]
    }

    fn to_json(&self) -> serde_json::Value {
        let num = |x: f64| serde_json::Number::from_f64(round_sig(x)).map_or(serde_json::Value::Null, Into::into);
        let mut m = serde_json::Map::new();
        m.insert("n".into(), self.n.map_or(serde_json::Value::Null, Into::into));
        m.insert("k".into(), self.k.map_or(serde_json::Value::Null, Into::into));
        m.insert("trials".into(), self.trials.into());
        m.insert("hits".into(), self.hits.into());
        m.insert("phat".into(), num(self.phat));
        m.insert("ci_lo".into(), num(self.ci_lo));
        m.insert("ci_hi".into(), num(self.ci_hi));
        m.insert(
            "norm_log".into(),
            match self.norm_log {
                NormLog::Value(v) => num(v),
                NormLog::Below(v) => format!("<{}", fmt_sig(v)).into(),
            },
        );
        m.insert("target".into(), self.target.map_or(serde_json::Value::Null, num));
        serde_json::Value::Object(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Header plus one line per row for CSV; one JSON object per line for JSON.
/// Lines end in `\n`.
pub fn write_report<W: Write>(rows: &[ReportRow], format: Format, out: W) -> io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
            w.write_record(HEADER)?;
            for r in rows {
                w.write_record(r.fields())?;
            }
            w.flush()
        }
        Format::Json => {
            let mut out = out;
            for r in rows {
                serde_json::to_writer(&mut out, &r.to_json())?;
                out.write_all(b"\n")?;
            }
            out.flush()
        }
    }
}

/// [`write_report`] to a file, or to stdout when `dest` is `None`.
pub fn emit_report(rows: &[ReportRow], format: Format, dest: Option<&Path>) -> io::Result<()> {
    if rows.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty report"));
    }
    match dest {
        Some(p) => write_report(rows, format, BufWriter::new(File::create(p)?)),
        None => write_report(rows, format, io::stdout().lock()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(2.0 + 0.5f64.sqrt()), "2.707106781");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(-0.000123456789012), "-0.000123456789");
        assert_eq!(fmt_sig(1.0e-7), "1e-7");
        assert_eq!(fmt_sig(123456.0), "123456");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(0.1 + 0.2), "0.3");
    }

    fn row() -> ReportRow {
        ReportRow {
            n: Some(9),
            k: None,
            trials: 100,
            hits: 3,
            phat: 0.03,
            ci_lo: 0.01,
            ci_hi: 0.08,
            norm_log: NormLog::Value(-1.2),
            target: Some(-1.447213595),
        }
    }

    #[test]
    fn csv_has_header_and_lf() {
        let mut buf = Vec::new();
        write_report(&[row()], Format::Csv, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "n,k,trials,hits,phat,ci_lo,ci_hi,norm_log,target\n9,,100,3,0.03,0.01,0.08,-1.2,-1.447213595\n");
    }

    #[test]
    fn json_row_is_one_line() {
        let mut buf = Vec::new();
        let mut r = row();
        r.norm_log = NormLog::Below(-2.5);
        write_report(&[r], Format::Json, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.matches('\n').count(), 1);
        assert!(s.contains(r#""norm_log":"<-2.5""#), "{s}");
        assert!(s.contains(r#""k":null"#));
    }
}
