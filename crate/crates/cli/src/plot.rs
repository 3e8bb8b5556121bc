//! Plot-ready data: long-format `x,series,value` CSVs under `<campaign>/plots/`.

use crate::error::{CliError, CliResult};
use crate::experiment::{csv_bytes, CORRELATIONS_FILE, FIDELITY_FILE, GROUPS_FILE, TABLE_FILE};
use crate::manifest::Manifest;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const PLOTS_DIR: &str = "plots";

type Series = Vec<(String, String, String)>;

/// Rows of a CSV artifact keyed by column name.
struct Table {
    path: PathBuf,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: PathBuf) -> CliResult<Table> {
        if !path.is_file() {
            return Err(CliError::MissingArtifact(path));
        }
        let bad = |p: &Path, e: csv::Error| CliError::Artifact {
            path: p.to_path_buf(),
            msg: e.to_string(),
        };
        let mut r = csv::Reader::from_path(&path).map_err(|e| bad(&path, e))?;
        let headers = r.headers().map_err(|e| bad(&path, e))?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(String::from).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(|e| bad(&path, e))?;
        Ok(Table { path, headers, rows })
    }

    fn col(&self, name: &str) -> CliResult<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| CliError::Artifact {
            path: self.path.clone(),
            msg: format!("no column `{name}`"),
        })
    }
}

fn history(dir: &Path, group: &str, trial: &str, key: &str) -> CliResult<Option<Vec<f64>>> {
    let path = dir.join(format!("trials/{group}/trial_{:0>3}.json", trial));
    if !path.is_file() {
        return Err(CliError::MissingArtifact(path));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Artifact {
        path: path.clone(),
        msg: e.to_string(),
    })?;
    match v.get(key) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(arr) => serde_json::from_value(arr.clone())
            .map(Some)
            .map_err(|e| CliError::Artifact { path, msg: e.to_string() }),
    }
}

fn vqe_series(dir: &Path) -> CliResult<BTreeMap<&'static str, Series>> {
    let table = Table::read(dir.join(TABLE_FILE))?;
    let (l, s, re) = (table.col("layers")?, table.col("scheme")?, table.col("relative_error")?);
    let rel: Series = table
        .rows
        .iter()
        .filter(|r| !r[re].is_empty())
        .map(|r| (r[l].clone(), r[s].clone(), r[re].clone()))
        .collect();

    let groups = Table::read(dir.join(GROUPS_FILE))?;
    let (g, b) = (groups.col("group")?, groups.col("best_trial")?);
    let mut conv = Series::new();
    let mut prob = Series::new();
    for r in &groups.rows {
        if let Some(h) = history(dir, &r[g], &r[b], "history")? {
            conv.extend(h.iter().enumerate().map(|(k, v)| (k.to_string(), r[g].clone(), v.to_string())));
        }
        if let Some(h) = history(dir, &r[g], &r[b], "success_prob_history")? {
            prob.extend(h.iter().enumerate().map(|(k, v)| (k.to_string(), r[g].clone(), v.to_string())));
        }
    }
    Ok(BTreeMap::from([
        ("relative_error.csv", rel),
        ("convergence.csv", conv),
        ("success_probability.csv", prob),
    ]))
}

fn gibbs_series(dir: &Path) -> CliResult<BTreeMap<&'static str, Series>> {
    let fid = Table::read(dir.join(FIDELITY_FILE))?;
    let (b, l, s, c) = (fid.col("beta")?, fid.col("layers")?, fid.col("scheme")?, fid.col("checkpoint")?);
    let label = |r: &[String]| format!("{}_p{}_{}", r[s], r[l], r[c]);
    let (fg, fr) = (fid.col("fidelity_gibbs")?, fid.col("fidelity_renyi")?);
    let gibbs: Series = fid.rows.iter().map(|r| (r[b].clone(), label(r), r[fg].clone())).collect();
    let renyi: Series = fid.rows.iter().map(|r| (r[b].clone(), label(r), r[fr].clone())).collect();

    let corr = Table::read(dir.join(CORRELATIONS_FILE))?;
    let (b, l, s, c) = (corr.col("beta")?, corr.col("layers")?, corr.col("scheme")?, corr.col("checkpoint")?);
    let (o, e) = (corr.col("observable")?, corr.col("abs_error")?);
    let err: Series = corr
        .rows
        .iter()
        .map(|r| (r[b].clone(), format!("{}_p{}_{}_{}", r[s], r[l], r[c], r[o]), r[e].clone()))
        .collect();
    Ok(BTreeMap::from([
        ("fidelity_vs_beta.csv", gibbs),
        ("renyi_fidelity_vs_beta.csv", renyi),
        ("correlation_error.csv", err),
    ]))
}

/// Writes the plot tables for a finished campaign and returns their paths.
pub fn plot(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let manifest = Manifest::read(dir)?;
    let series = match manifest.task.as_str() {
        "vqe" => vqe_series(dir)?,
        "gibbs" => gibbs_series(dir)?,
        other => {
            return Err(CliError::Usage(format!("task `{other}` has nothing to plot")));
        }
    };
    let out = dir.join(PLOTS_DIR);
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut written = Vec::new();
    for (name, rows) in series {
        let rows: Vec<Vec<String>> = rows.into_iter().map(|(x, s, v)| vec![x, s, v]).collect();
        let path = out.join(name);
        std::fs::write(&path, csv_bytes(&["x", "series", "value"], &rows)).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
