//! CSV traces. Numbers are written with 17 significant digits so that
//! they read back bit-for-bit; unrecorded quantities are empty fields.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ode::ContinuousSample;
use crate::optimizers::TraceRecord;
use crate::spectral::csv_err;

pub const DISCRETE_HEADER: [&str; 7] = ["k", "f_err", "grad_sq", "prox_grad_sq", "lyapunov", "bound_f", "bound_grad"];
pub const CONTINUOUS_HEADER: [&str; 4] = ["t", "f_err", "lyapunov", "theorem3_bound"];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_discrete<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DISCRETE_HEADER).map_err(csv_err)?;
    for r in trace {
        w.write_record([
            r.k.to_string(),
            num(r.f_err),
            opt(r.grad_sq),
            opt(r.prox_grad_sq),
            opt(r.lyapunov),
            opt(r.bound_f),
            opt(r.bound_grad),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_continuous<W: Write>(out: W, samples: &[ContinuousSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONTINUOUS_HEADER).map_err(csv_err)?;
    for p in samples {
        w.write_record([num(p.t), num(p.f_err), num(p.lyapunov), opt(p.theorem3_bound)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a discrete trace to `path`.
pub fn emit_csv(trace: &[TraceRecord], path: &Path) -> Result<()> {
    write_discrete(BufWriter::new(File::create(path)?), trace)
}

/// Writes a continuous trace to `path`.
pub fn emit_continuous_csv(samples: &[ContinuousSample], path: &Path) -> Result<()> {
    write_continuous(BufWriter::new(File::create(path)?), samples)
}

/// A trace read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvTrace {
    Discrete(Vec<TraceRecord>),
    Continuous(Vec<ContinuousSample>),
}

fn parse_opt(field: &str, line: u64) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|e| Error::InvalidInput(format!("line {line}: `{field}`: {e}")))
}

fn parse_req(field: &str, line: u64) -> Result<f64> {
    parse_opt(field, line)?.ok_or_else(|| Error::InvalidInput(format!("line {line}: missing value")))
}

pub fn read_trace<R: Read>(input: R) -> Result<CsvTrace> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let continuous = if header == DISCRETE_HEADER {
        false
    } else if header == CONTINUOUS_HEADER {
        true
    } else {
        return Err(Error::InvalidInput(format!("unrecognised trace header {header:?}")));
    };
    let mut discrete = Vec::new();
    let mut cont = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i as u64 + 2;
        if continuous {
            cont.push(ContinuousSample {
                t: parse_req(&row[0], line)?,
                f_err: parse_req(&row[1], line)?,
                lyapunov: parse_req(&row[2], line)?,
                theorem3_bound: parse_opt(&row[3], line)?,
            });
        } else {
            let k = row[0]
                .parse::<usize>()
                .map_err(|e| Error::InvalidInput(format!("line {line}: k: {e}")))?;
            discrete.push(TraceRecord {
                k,
                f_err: parse_req(&row[1], line)?,
                grad_sq: parse_opt(&row[2], line)?,
                prox_grad_sq: parse_opt(&row[3], line)?,
                lyapunov: parse_opt(&row[4], line)?,
                bound_f: parse_opt(&row[5], line)?,
                bound_grad: parse_opt(&row[6], line)?,
            });
        }
    }
    Ok(if continuous {
        CsvTrace::Continuous(cont)
    } else {
        CsvTrace::Discrete(discrete)
    })
}

pub fn read_csv(path: &Path) -> Result<CsvTrace> {
    read_trace(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(trace: &[TraceRecord]) -> String {
        let mut buf = Vec::new();
        write_discrete(&mut buf, trace).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(text(&[]), "k,f_err,grad_sq,prox_grad_sq,lyapunov,bound_f,bound_grad\n");
    }

    #[test]
    fn one_record_round_trips_bitwise() {
        let rec = TraceRecord {
            k: 7,
            f_err: 0.1 + 0.2,
            grad_sq: Some(std::f64::consts::PI * 1e-300),
            prox_grad_sq: None,
            lyapunov: Some(-0.0),
            bound_f: Some(1.0 / 3.0),
            bound_grad: None,
        };
        let t = text(std::slice::from_ref(&rec));
        assert_eq!(t.lines().count(), 2);
        assert!(t.lines().nth(1).unwrap().contains(",,"));
        let back = read_trace(t.as_bytes()).unwrap();
        let CsvTrace::Discrete(v) = back else { panic!() };
        assert_eq!(v[0].f_err.to_bits(), rec.f_err.to_bits());
        assert_eq!(v[0].grad_sq.unwrap().to_bits(), rec.grad_sq.unwrap().to_bits());
        assert_eq!(v[0].lyapunov.unwrap().to_bits(), (-0.0f64).to_bits());
        assert_eq!(v[0], rec);
    }

    #[test]
    fn continuous_round_trip() {
        let s = vec![ContinuousSample { t: 0.2, f_err: 0.5, lyapunov: 3.62, theorem3_bound: None }];
        let mut buf = Vec::new();
        write_continuous(&mut buf, &s).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("t,f_err,lyapunov,theorem3_bound\n"));
        assert_eq!(read_trace(buf.as_slice()).unwrap(), CsvTrace::Continuous(s));
    }

    #[test]
    fn rejects_unknown_header() {
        assert!(read_trace("a,b\n1,2\n".as_bytes()).is_err());
    }
}
