//! CSV files. Every file starts with one `#` provenance line; numbers are
//! written in shortest round-trip form with `.` decimals and `\n` endings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cascade::CascadeSolution;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{BootstrapResult, EstimateSet};
use crate::linalg::{Mat, Vector};
use crate::mechanism::{Applicant, Population};

/// `# cascade-iv <version> command=<command> seed=<seed>`
/// I/O errors that name the file.
fn with_path(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(with_path(path))
}

pub fn create_file(path: &Path) -> Result<File> {
    File::create(path).map_err(with_path(path))
}

pub fn provenance(command: &str, seed: Option<u64>) -> String {
    let seed = seed.map_or("none".to_string(), |s| s.to_string());
    format!("# cascade-iv {} command={command} seed={seed}", env!("CARGO_PKG_VERSION"))
}

fn writer_for(path: &Path, provenance: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(create_file(path)?);
    writeln!(f, "{provenance}")?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(f))
}

fn finish(w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            Error::Schema(format!("line {line}: row has {len} fields, header has {expected_len}"))
        }
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes())
}

/// Column layout of a dataset file.
struct Layout {
    y: usize,
    a: Vec<usize>,
    z: Vec<usize>,
    x: Vec<usize>,
    cluster: usize,
    group: Option<usize>,
}

fn numbered(header: &csv::StringRecord, prefix: &str) -> Result<Vec<usize>> {
    let mut found: Vec<(usize, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(c, h)| h.strip_prefix(prefix).and_then(|n| n.parse::<usize>().ok()).map(|n| (n, c)))
        .collect();
    found.sort();
    for (expect, (n, _)) in found.iter().enumerate() {
        if *n != expect + 1 {
            return Err(Error::Schema(format!("columns {prefix}1..{prefix}K must be consecutive; missing {prefix}{}", expect + 1)));
        }
    }
    Ok(found.into_iter().map(|(_, c)| c).collect())
}

fn layout(header: &csv::StringRecord, group_col: &str) -> Result<Layout> {
    let find = |name: &str| header.iter().position(|h| h == name);
    let y = find("y").ok_or_else(|| Error::Schema("missing column 'y'".into()))?;
    let cluster = find("cluster").ok_or_else(|| Error::Schema("missing column 'cluster'".into()))?;
    let a = numbered(header, "a_")?;
    let z = numbered(header, "z_")?;
    if a.is_empty() {
        return Err(Error::Schema("missing treatment columns a_1..a_K".into()));
    }
    if z.len() != a.len() {
        return Err(Error::Schema(format!("{} treatment columns but {} instrument columns", a.len(), z.len())));
    }
    let x: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.starts_with("x_")).map(|(c, _)| c).collect();
    if x.is_empty() {
        return Err(Error::Schema("missing control columns x_*".into()));
    }
    let group = find(group_col);
    let known = |c: usize| c == y || c == cluster || a.contains(&c) || z.contains(&c) || x.contains(&c) || Some(c) == group;
    if let Some(c) = (0..header.len()).find(|&c| !known(c)) {
        return Err(Error::Schema(format!("unexpected column '{}'", &header[c])));
    }
    Ok(Layout { y, a, z, x, cluster, group })
}

/// Reads `y, a_1..a_K, z_1..z_K, x_*, cluster[, group]`. The group column is
/// looked up by `group_col` (normally `group`).
pub fn parse_dataset_csv(text: &str, group_col: &str) -> Result<Dataset> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let lay = layout(&header, group_col)?;
    let k = lay.a.len();
    let mut rows = Vec::new();
    let mut clusters = Vec::new();
    let mut groups = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |c: usize| -> Result<f64> {
            rec[c].parse::<f64>().map_err(|_| Error::Parse { line, message: format!("column '{}': '{}' is not a number", &header[c], &rec[c]) })
        };
        let mut row = Vec::with_capacity(1 + 2 * k + lay.x.len());
        row.push(get(lay.y)?);
        for &c in lay.a.iter().chain(&lay.z).chain(&lay.x) {
            row.push(get(c)?);
        }
        rows.push(row);
        clusters.push(rec[lay.cluster].to_string());
        if let Some(g) = lay.group {
            groups.push(rec[g].to_string());
        }
    }
    let n = rows.len();
    let p = lay.x.len();
    let y = Vector::from_fn(n, |i, _| rows[i][0]);
    let a = Mat::from_fn(n, k, |i, j| rows[i][1 + j]);
    let z = Mat::from_fn(n, k, |i, j| rows[i][1 + k + j]);
    let x = Mat::from_fn(n, p, |i, j| rows[i][1 + 2 * k + j]);
    let group = lay.group.map(|_| groups);
    let binary = a.iter().all(|v| *v == 0.0 || *v == 1.0);
    if binary {
        Dataset::new(y, a, z, x, clusters, group)
    } else {
        Dataset::new_continuous(y, a, z, x, clusters, group)
    }
}

pub fn load_dataset_csv(path: &Path, group_col: &str) -> Result<Dataset> {
    let text = read_text(path)?;
    parse_dataset_csv(&text, group_col)
}

pub fn write_dataset_csv(path: &Path, data: &Dataset, provenance: &str) -> Result<()> {
    let (k, p) = (data.k(), data.x().ncols());
    let mut w = writer_for(path, provenance)?;
    let mut header = vec!["y".to_string()];
    header.extend((1..=k).map(|j| format!("a_{j}")));
    header.extend((1..=k).map(|j| format!("z_{j}")));
    header.push("x_const".into());
    header.extend((1..p).map(|j| format!("x_{j}")));
    header.push("cluster".into());
    if data.group().is_some() {
        header.push("group".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    // Put the constant first so the header names stay truthful.
    let xc = (0..p).find(|&c| data.x().column(c).iter().all(|v| *v == data.x()[(0, c)])).unwrap_or(0);
    let xorder: Vec<usize> = std::iter::once(xc).chain((0..p).filter(|&c| c != xc)).collect();
    for i in 0..data.n() {
        let mut rec = vec![data.y()[i].to_string()];
        rec.extend((0..k).map(|j| data.a()[(i, j)].to_string()));
        rec.extend((0..k).map(|j| data.z()[(i, j)].to_string()));
        rec.extend(xorder.iter().map(|&c| data.x()[(i, c)].to_string()));
        rec.push(data.cluster()[i].clone());
        if let Some(g) = data.group() {
            rec.push(g[i].clone());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

/// Named columns, one row per dataset row.
pub fn write_matrix_csv(path: &Path, names: &[String], m: &Mat, provenance: &str) -> Result<()> {
    let mut w = writer_for(path, provenance)?;
    w.write_record(names).map_err(csv_err)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    finish(w)
}

pub fn load_matrix_csv(path: &Path) -> Result<(Vec<String>, Mat)> {
    let text = read_text(path)?;
    let mut rdr = reader(&text);
    let names: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut vals = Vec::new();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        for f in rec.iter() {
            vals.push(f.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("'{f}' is not a number") })?);
        }
        n += 1;
    }
    Ok((names.clone(), Mat::from_row_iterator(n, names.len(), vals)))
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// One row per treatment; bootstrap columns are appended when given.
pub fn write_estimates_csv(path: &Path, est: &EstimateSet, boot: Option<&BootstrapResult>, provenance: &str) -> Result<()> {
    let mut w = writer_for(path, provenance)?;
    let mut header: Vec<String> = ["treatment", "beta", "rf", "wald", "T", "delta", "se_beta", "se_rf", "se_wald", "se_delta", "first_stage_f"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if let Some(b) = boot {
        header.extend([format!("boot_se_{}", b.statistic), format!("boot_ci_lower_{}", b.statistic), format!("boot_ci_upper_{}", b.statistic)]);
    }
    w.write_record(&header).map_err(csv_err)?;
    for k in 0..est.k() {
        let mut rec = vec![(k + 1).to_string()];
        for v in [
            est.beta[k],
            est.rf[k],
            est.wald[k],
            est.cascade_t[k],
            est.cascade_delta[k],
            est.se_beta[k],
            est.se_rf[k],
            est.se_wald[k],
            est.se_delta[k],
            est.first_stage_f[k],
        ] {
            rec.push(fmt(v));
        }
        if let Some(b) = boot {
            rec.extend([fmt(b.se[k]), fmt(b.ci_lower[k]), fmt(b.ci_upper[k])]);
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

/// Aligned plain-text version of an estimate set.
pub fn format_estimates_table(est: &EstimateSet, names: Option<&[&str]>) -> String {
    let mut out = format!(
        "{:<16} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "treatment", "T=beta", "se", "W", "se", "delta", "se"
    );
    for k in 0..est.k() {
        let name = names.and_then(|n| n.get(k)).map_or((k + 1).to_string(), |s| s.to_string());
        let cell = |v: f64| if v.is_nan() { "-".to_string() } else { format!("{v:.5}") };
        out.push_str(&format!(
            "{:<16} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            name,
            cell(est.cascade_t[k]),
            cell(est.se_beta[k]),
            cell(est.wald[k]),
            cell(est.se_wald[k]),
            cell(est.cascade_delta[k]),
            cell(est.se_delta[k]),
        ));
    }
    if est.n_obs > 0 {
        out.push_str(&format!("N = {}, clusters = {}, joint Wald (beta = 0) = {:.3}\n", est.n_obs, est.n_clusters, est.joint_wald));
    }
    for w in &est.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

/// Per-round Neumann contributions followed by the running total.
pub fn write_trace_csv(path: &Path, sol: &CascadeSolution, provenance: &str) -> Result<()> {
    let k = sol.t.len();
    let mut w = writer_for(path, provenance)?;
    let mut header = vec!["round".to_string()];
    header.extend((1..=k).map(|j| format!("contribution_{j}")));
    header.extend((1..=k).map(|j| format!("cumulative_{j}")));
    w.write_record(&header).map_err(csv_err)?;
    let mut total = Vector::zeros(k);
    for (n, r) in sol.rounds.iter().flatten().enumerate() {
        total += r;
        let mut rec = vec![n.to_string()];
        rec.extend(r.iter().map(|v| v.to_string()));
        rec.extend(total.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

/// Simple table writer for command reports.
pub fn write_rows_csv(path: &Path, header: &[&str], rows: &[Vec<String>], provenance: &str) -> Result<()> {
    let mut w = writer_for(path, provenance)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    finish(w)
}

/// `id, merit, prefs, y_0..y_K, label, <covariates>`; prefs are one-based
/// program numbers separated by `;`.
pub fn write_population_csv(path: &Path, pop: &Population, provenance: &str) -> Result<()> {
    let mut w = writer_for(path, provenance)?;
    let mut header = vec!["id".to_string(), "merit".into(), "prefs".into()];
    header.extend((0..=pop.k).map(|j| format!("y_{j}")));
    header.push("label".into());
    header.extend(pop.covariate_names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (i, a) in pop.applicants.iter().enumerate() {
        let mut rec = vec![i.to_string(), a.merit.to_string()];
        rec.push(a.prefs.iter().map(|p| (p + 1).to_string()).collect::<Vec<_>>().join(";"));
        rec.extend(a.po.iter().map(|v| v.to_string()));
        rec.push(a.label.clone().unwrap_or_default());
        rec.extend(a.covariates.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

pub fn parse_population_csv(text: &str) -> Result<Population> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::Schema(format!("missing column '{name}'")));
    let (merit, prefs, label) = (col("merit")?, col("prefs")?, col("label")?);
    let y = numbered_from_zero(&header)?;
    let k = y.len() - 1;
    let cov: Vec<usize> = (label + 1..header.len()).collect();
    let names = cov.iter().map(|&c| header[c].to_string()).collect();
    let mut applicants = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let perr = |m: String| Error::Parse { line, message: m };
        let num = |c: usize| rec[c].parse::<f64>().map_err(|_| perr(format!("'{}' is not a number", &rec[c])));
        let prefs = rec[prefs]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| match s.parse::<usize>() {
                Ok(p) if p >= 1 => Ok(p - 1),
                _ => Err(perr(format!("bad program '{s}' in prefs"))),
            })
            .collect::<Result<Vec<_>>>()?;
        applicants.push(Applicant {
            merit: rec[merit].parse().map_err(|_| perr(format!("bad merit '{}'", &rec[merit])))?,
            prefs,
            po: y.iter().map(|&c| num(c)).collect::<Result<_>>()?,
            label: (!rec[label].is_empty()).then(|| rec[label].to_string()),
            covariates: cov.iter().map(|&c| num(c)).collect::<Result<_>>()?,
        });
    }
    Population::new(k, applicants, names)
}

fn numbered_from_zero(header: &csv::StringRecord) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    while let Some(c) = header.iter().position(|h| h == format!("y_{}", out.len())) {
        out.push(c);
    }
    if out.len() < 2 {
        return Err(Error::Schema("population needs columns y_0..y_K with K >= 1".into()));
    }
    Ok(out)
}

pub fn load_population_csv(path: &Path) -> Result<Population> {
    let text = read_text(path)?;
    parse_population_csv(&text)
}
