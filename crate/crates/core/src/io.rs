//! Text formats: matrix and snapshot CSV, fit reports, traces and tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermlin::{c64, CMatrix, HermMat, Seed, SnapshotSet};
use crate::mm::FitReport;
use crate::simkit::{BenchResult, SinrTable};

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

fn records(text: &str) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    rdr.records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect::<Vec<_>>()).map_err(|e| Error::Parse(e.to_string())))
        .filter(|r| !matches!(r, Ok(v) if v.len() == 1 && v[0].is_empty()))
        .collect()
}

fn number(s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse(format!("invalid number `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("value `{s}`")));
    }
    Ok(v)
}

fn count(s: &str, what: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse(format!("invalid {what} `{s}`")))
}

fn header_value<'a>(head: &'a [String], idx: usize, key: &str) -> Result<&'a str> {
    match (head.get(2 * idx), head.get(2 * idx + 1)) {
        (Some(k), Some(v)) if k == key => Ok(v),
        _ => Err(Error::Parse(format!("header field {} must be `{key},<value>`", idx + 1))),
    }
}

/// Header `m,<dim>`, then one line per row with `re,im` pairs.
pub fn matrix_to_csv(r: &HermMat) -> String {
    let m = r.dim();
    let mut out = format!("m,{m}\n");
    for i in 0..m {
        let row: Vec<String> = (0..m).map(|k| r.get(i, k)).map(|z| format!("{},{}", z.re, z.im)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<HermMat> {
    let recs = records(text)?;
    let (head, body) = recs.split_first().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    if head.len() != 2 {
        return Err(Error::Parse("matrix header must be `m,<dim>`".into()));
    }
    let m = count(header_value(head, 0, "m")?, "dimension")?;
    if m == 0 || body.len() != m {
        return Err(Error::Parse(format!("expected {m} matrix rows, found {}", body.len())));
    }
    let mut a = CMatrix::zeros(m, m);
    for (i, row) in body.iter().enumerate() {
        if row.len() != 2 * m {
            return Err(Error::Parse(format!("row {} has {} fields, expected {}", i + 1, row.len(), 2 * m)));
        }
        for k in 0..m {
            a[(i, k)] = c64(number(&row[2 * k])?, number(&row[2 * k + 1])?);
        }
    }
    HermMat::new(a)
}

/// Header `m,<dim>,n,<count>,seed,<seed>`, then rows `Re x_i`, `Im x_i` for
/// each element `i`, one column per snapshot.
pub fn snapshots_to_csv(s: &SnapshotSet) -> String {
    let (m, n) = (s.dim(), s.count());
    let mut out = format!("m,{m},n,{n},seed,{}\n", s.seed());
    for i in 0..m {
        for part in [|z: num_complex::Complex64| z.re, |z: num_complex::Complex64| z.im] {
            let row: Vec<String> = (0..n).map(|k| part(s.data()[(i, k)]).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn snapshots_from_csv(text: &str) -> Result<SnapshotSet> {
    let recs = records(text)?;
    let (head, body) = recs.split_first().ok_or_else(|| Error::Parse("empty snapshot file".into()))?;
    if head.len() != 6 {
        return Err(Error::Parse("snapshot header must be `m,<dim>,n,<count>,seed,<seed>`".into()));
    }
    let m = count(header_value(head, 0, "m")?, "dimension")?;
    let n = count(header_value(head, 1, "n")?, "snapshot count")?;
    let seed: Seed = header_value(head, 2, "seed")?.parse()?;
    if m == 0 || n == 0 {
        return Err(Error::Parse("snapshot file needs m >= 1 and n >= 1".into()));
    }
    if body.len() != 2 * m {
        return Err(Error::Parse(format!("expected {} data rows, found {}", 2 * m, body.len())));
    }
    let mut a = CMatrix::zeros(m, n);
    for i in 0..m {
        let (re, im) = (&body[2 * i], &body[2 * i + 1]);
        if re.len() != n || im.len() != n {
            return Err(Error::Parse(format!("element {} rows must have {n} fields", i + 1)));
        }
        for k in 0..n {
            a[(i, k)] = c64(number(&re[k])?, number(&im[k])?);
        }
    }
    SnapshotSet::new(a, seed)
}

pub fn read_matrix(path: &Path) -> Result<HermMat> {
    matrix_from_csv(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: &Path, r: &HermMat) -> Result<()> {
    write_atomic(path, matrix_to_csv(r).as_bytes())
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotSet> {
    snapshots_from_csv(&fs::read_to_string(path)?)
}

pub fn write_snapshots(path: &Path, s: &SnapshotSet) -> Result<()> {
    write_atomic(path, snapshots_to_csv(s).as_bytes())
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    write_atomic(path, to_json_pretty(v)?.as_bytes())
}

/// Per-iteration `t,objective,neg_ll,inner_iterations,gamma`; the first row
/// is the initializer.
pub fn trace_to_csv(rep: &FitReport) -> String {
    let mut out = String::from("t,objective,neg_ll,inner_iterations,gamma\n");
    for (t, (p, f)) in rep.objective_trace.iter().zip(&rep.neg_ll_trace).enumerate() {
        let inner = if t == 0 { String::new() } else { rep.inner_iterations.get(t - 1).map(|v| v.to_string()).unwrap_or_default() };
        let gamma = if t == 0 { String::new() } else { rep.gamma_trace.get(t - 1).map(|v| v.to_string()).unwrap_or_default() };
        out.push_str(&format!("{t},{p},{f},{inner},{gamma}\n"));
    }
    out
}

/// One row per `n`: `n,<method>...,crb`.
pub fn bench_to_csv(b: &BenchResult) -> String {
    let mut out = String::from("n");
    for m in &b.methods {
        out.push(',');
        out.push_str(m);
    }
    if b.crb.is_some() {
        out.push_str(",crb");
    }
    out.push('\n');
    for (i, n) in b.n_grid.iter().enumerate() {
        out.push_str(&n.to_string());
        for row in &b.mse {
            out.push_str(&format!(",{}", row[i]));
        }
        if let Some(c) = &b.crb {
            out.push_str(&format!(",{}", c[i]));
        }
        out.push('\n');
    }
    out
}

/// One row per angle: `theta_deg,optimum,<method>...` in dB. Unavailable
/// methods are left empty.
pub fn sinr_to_csv(t: &SinrTable) -> String {
    let db = |x: f64| 10.0 * x.log10();
    let mut out = String::from("theta_deg,optimum");
    for r in &t.rows {
        out.push(',');
        out.push_str(&r.method);
    }
    out.push('\n');
    for (i, th) in t.theta_deg.iter().enumerate() {
        out.push_str(&format!("{th},{}", db(t.optimum[i])));
        for r in &t.rows {
            if r.available && r.sinr[i].is_finite() {
                out.push_str(&format!(",{}", db(r.sinr[i])));
            } else {
                out.push(',');
            }
        }
        out.push('\n');
    }
    out
}
