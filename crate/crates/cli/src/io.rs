//! CSV and JSON files exchanged between commands and with the plotting
//! scripts. Floats are written in the shortest form that parses back to
//! the same value.

use std::fs;
use std::path::Path;

use alffi::cosmo::{SupernovaCatalog, SupernovaRecord};
use alffi::inference::{ConfidenceSet, CoverageReport, TrainingTriple};
use alffi::nn::TrainLogEntry;
use anyhow::{Context, Result};

use crate::config::config_err;

/// Shortest round-trip decimal form; `inf`, `-inf` and `NaN` for specials.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| config_err(format!("bad number `{s}`: {e}")))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// Writes a header and rows of preformatted fields.
pub fn write_table(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV file into its header and rows of raw fields.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn expect_header(path: &Path, got: &[String], want: &[String]) -> Result<()> {
    if got != want {
        return Err(config_err(format!(
            "{}: expected header {}, found {}",
            path.display(),
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn with_names(prefix: &[&str], names: &[String], suffix: &[&str]) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain(names.iter().cloned())
        .chain(suffix.iter().map(|s| s.to_string()))
        .collect()
}

/// `z,lambda_obs,<params...>`.
pub fn write_triples(path: &Path, names: &[String], triples: &[TrainingTriple]) -> Result<()> {
    let rows = triples.iter().map(|t| {
        let mut r = vec![t.z.to_string(), fmt_f64(t.lambda_obs)];
        r.extend(t.theta.iter().map(|v| fmt_f64(*v)));
        r
    });
    write_table(path, &with_names(&["z", "lambda_obs"], names, &[]), rows)
}

pub fn read_triples(path: &Path, names: &[String]) -> Result<Vec<TrainingTriple>> {
    let (header, rows) = read_table(path)?;
    expect_header(path, &header, &with_names(&["z", "lambda_obs"], names, &[]))?;
    rows.iter()
        .map(|r| {
            let z: u8 = r[0]
                .parse()
                .map_err(|_| config_err(format!("bad z `{}`", r[0])))?;
            if z > 1 {
                return Err(config_err(format!("z must be 0 or 1, got {z}")));
            }
            Ok(TrainingTriple {
                z,
                lambda_obs: parse_f64(&r[1])?,
                theta: r[2..].iter().map(|v| parse_f64(v)).collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// `iteration,train_loss,val_loss`.
pub fn write_train_log(path: &Path, log: &[TrainLogEntry]) -> Result<()> {
    let header: Vec<String> = ["iteration", "train_loss", "val_loss"]
        .map(String::from)
        .to_vec();
    write_table(
        path,
        &header,
        log.iter().map(|e| {
            vec![
                e.iteration.to_string(),
                fmt_f64(e.train_loss),
                fmt_f64(e.val_loss),
            ]
        }),
    )
}

pub fn read_train_log(path: &Path) -> Result<Vec<TrainLogEntry>> {
    let (_, rows) = read_table(path)?;
    rows.iter()
        .map(|r| {
            Ok(TrainLogEntry {
                iteration: r[0].parse().map_err(|_| config_err("bad iteration"))?,
                train_loss: parse_f64(&r[1])?,
                val_loss: parse_f64(&r[2])?,
            })
        })
        .collect()
}

/// Grid `<params...>,lambda_obs,phat` and boundary `tau,segment_id,<params...>`.
pub fn write_sets(grid_path: &Path, boundary_path: &Path, set: &ConfidenceSet) -> Result<()> {
    let dim = set.grid.dim();
    let grid_rows = (0..set.grid.len()).map(|k| {
        let mut r: Vec<String> = set.grid.node(k).iter().map(|v| fmt_f64(*v)).collect();
        r.push(fmt_f64(set.lambda_obs[k]));
        r.push(fmt_f64(set.phat[k]));
        r
    });
    write_table(
        grid_path,
        &with_names(&[], &set.names, &["lambda_obs", "phat"]),
        grid_rows,
    )?;

    let mut rows = Vec::new();
    let mut segment = 0usize;
    for (tau, lines) in set.taus.iter().zip(&set.boundaries) {
        for line in lines {
            for p in &line.points {
                let mut r = vec![fmt_f64(*tau), segment.to_string()];
                r.extend(p[..dim.min(2)].iter().map(|v| fmt_f64(*v)));
                rows.push(r);
            }
            segment += 1;
        }
    }
    write_table(
        boundary_path,
        &with_names(&["tau", "segment_id"], &set.names, &[]),
        rows,
    )
}

/// `<params...>,tau,p,stderr,T`.
pub fn write_coverage(path: &Path, report: &CoverageReport) -> Result<()> {
    let rows = report.rows.iter().map(|row| {
        let mut r: Vec<String> = row.theta.iter().map(|v| fmt_f64(*v)).collect();
        r.extend([
            fmt_f64(row.tau),
            fmt_f64(row.p),
            fmt_f64(row.stderr),
            row.trials.to_string(),
        ]);
        r
    });
    write_table(
        path,
        &with_names(&[], &report.names, &["tau", "p", "stderr", "T"]),
        rows,
    )
}

/// Parameter points, one per row, under a header of parameter names.
pub fn read_points(path: &Path, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let (header, rows) = read_table(path)?;
    expect_header(path, &header, names)?;
    rows.iter()
        .map(|r| r.iter().map(|v| parse_f64(v)).collect())
        .collect()
}

pub fn write_points(path: &Path, names: &[String], points: &[Vec<f64>]) -> Result<()> {
    write_table(
        path,
        names,
        points
            .iter()
            .map(|p| p.iter().map(|v| fmt_f64(*v)).collect()),
    )
}

/// Supernova catalog `z,x,sigma`.
pub fn read_catalog(path: &Path) -> Result<SupernovaCatalog> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    expect_header(path, &header, &["z", "x", "sigma"].map(String::from))?;
    let records = r
        .deserialize::<SupernovaRecord>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    Ok(SupernovaCatalog::new(records)?)
}

pub fn write_catalog(path: &Path, catalog: &SupernovaCatalog) -> Result<()> {
    let header: Vec<String> = ["z", "x", "sigma"].map(String::from).to_vec();
    write_table(
        path,
        &header,
        catalog
            .records()
            .iter()
            .map(|r| vec![fmt_f64(r.z), fmt_f64(r.x), fmt_f64(r.sigma)]),
    )
}

/// Epidemic series `t,x`.
pub fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<u64>)> {
    let text =
        fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    Ok(alffi::sir::parse_series_csv(&text)?)
}

pub fn write_json(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
