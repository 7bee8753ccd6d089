//! `compare`: loss-distribution curves and a summary table across runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use feasible_core::metrics::{cvar, empirical_cdf};
use feasible_core::record::PersistedRun;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::experiment::Aggregate;
use crate::svg::{line_chart, Series};

/// Quantile grid for CVaR curves, merged with the requested quantiles.
fn cvar_grid(extra: &[f64]) -> Vec<f64> {
    let mut qs: Vec<f64> = (0..100)
        .map(|k| k as f64 / 100.0)
        .chain(extra.iter().copied())
        .collect();
    qs.sort_by(f64::total_cmp);
    qs.dedup();
    qs
}

/// Expands experiment directories (with `seed_*` children) into run directories.
pub fn collect_run_dirs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for p in paths {
        if p.join("config.json").is_file() {
            dirs.push(p.clone());
            continue;
        }
        let entries = std::fs::read_dir(p).map_err(|e| CliError::io(p, e))?;
        let mut children: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|c| c.join("config.json").is_file())
            .collect();
        if children.is_empty() {
            return Err(CliError::Input(format!("{}: no run directories found", p.display())));
        }
        children.sort();
        dirs.extend(children);
    }
    Ok(dirs)
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub label: String,
    pub split: String,
    pub runs: usize,
    pub mean_loss: Aggregate,
    pub max_loss: Aggregate,
    pub accuracy: Option<Aggregate>,
    pub cvar: Vec<(f64, Aggregate)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub dataset_signature: String,
    pub quantiles: Vec<f64>,
    pub rows: Vec<Row>,
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn table(&self) -> String {
        let mut out = String::from("| method | split | runs | avg loss | max loss | acc |");
        for q in &self.quantiles {
            let _ = write!(out, " CVaR@{q} |");
        }
        out.push_str("\n|---|---|---|---|---|---|");
        out.push_str(&"---|".repeat(self.quantiles.len()));
        out.push('\n');
        for r in &self.rows {
            let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_else(|| "-".into());
            let _ = write!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                r.label, r.split, r.runs, r.mean_loss, r.max_loss, acc
            );
            for (_, c) in &r.cvar {
                let _ = write!(out, " {c} |");
            }
            out.push('\n');
        }
        out
    }
}

fn write_xy(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut s = String::from("x,y\n");
    for (x, y) in points {
        let _ = writeln!(s, "{x},{y}");
    }
    std::fs::write(path, s).map_err(|e| CliError::io(path, e))
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// A labelled `(x, y)` polyline.
type Curve = (String, Vec<(f64, f64)>);

/// Groups runs by label, refuses mixed datasets, and writes
/// `cdf_<label>_<split>.csv` and `cvar_<label>_<split>.csv` (plus `.svg`
/// charts when requested) into `out_dir`.
pub fn compare(paths: &[PathBuf], quantiles: &[f64], out_dir: &Path, svg: bool) -> Result<Report> {
    crate::config::check_quantiles(quantiles)?;
    let dirs = collect_run_dirs(paths)?;
    let mut runs = Vec::new();
    for d in &dirs {
        runs.push((d.clone(), PersistedRun::load(d)?));
    }
    let sig_of = |r: &PersistedRun| r.meta("dataset_signature").unwrap_or("").to_string();
    let signature = sig_of(&runs[0].1);
    let mut mismatched = Vec::new();
    for (d, r) in &runs {
        let s = sig_of(r);
        if s.is_empty() || s != signature {
            mismatched.push(format!(
                "{} ({})",
                d.display(),
                if s.is_empty() { "none" } else { &s[..12.min(s.len())] }
            ));
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Input(format!(
            "runs do not share a dataset: {} has signature {}, but {} differ",
            dirs[0].display(),
            &signature[..12.min(signature.len())],
            mismatched.join(", ")
        )));
    }

    let mut groups: BTreeMap<String, Vec<&PersistedRun>> = BTreeMap::new();
    for (_, r) in &runs {
        let label = r
            .meta("label")
            .map(str::to_string)
            .unwrap_or_else(|| r.config.method.name().to_string());
        groups.entry(label).or_default().push(r);
    }

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let grid = cvar_grid(quantiles);
    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut curves: BTreeMap<(&str, &str), Vec<Curve>> = BTreeMap::new();
    for (label, members) in &groups {
        for split in ["train", "test"] {
            let losses: Vec<&Vec<f64>> = members
                .iter()
                .map(|r| {
                    if split == "train" {
                        &r.train_losses
                    } else {
                        &r.test_losses
                    }
                })
                .filter(|l| !l.is_empty())
                .collect();
            if losses.is_empty() {
                continue;
            }
            // CDF of the losses pooled over seeds; CVaR averaged over seeds.
            let pooled: Vec<f64> = losses.iter().flat_map(|l| l.iter().copied()).collect();
            let cdf = empirical_cdf(&pooled)?;
            let mut cvar_curve = Vec::with_capacity(grid.len());
            for &q in &grid {
                let per: Vec<f64> = losses
                    .iter()
                    .map(|l| cvar(l, q))
                    .collect::<feasible_core::Result<_>>()?;
                cvar_curve.push((q, per.iter().sum::<f64>() / per.len() as f64));
            }
            let stem = file_safe(label);
            for (kind, pts) in [("cdf", &cdf), ("cvar", &cvar_curve)] {
                let path = out_dir.join(format!("{kind}_{stem}_{split}.csv"));
                write_xy(&path, pts)?;
                files.push(path);
            }
            curves.entry(("cdf", split)).or_default().push((label.clone(), cdf));
            curves
                .entry(("cvar", split))
                .or_default()
                .push((label.clone(), cvar_curve));

            let pick = |f: &dyn Fn(&PersistedRun) -> Option<f64>| -> Vec<f64> {
                members.iter().filter_map(|r| f(r)).collect()
            };
            let split_of = |r: &PersistedRun| {
                if split == "train" {
                    Some(r.last.train)
                } else {
                    r.last.test
                }
            };
            let mut cv = Vec::new();
            for &q in quantiles {
                let per: Vec<f64> = losses
                    .iter()
                    .map(|l| cvar(l, q))
                    .collect::<feasible_core::Result<_>>()?;
                cv.push((q, Aggregate::of(&per).expect("nonempty")));
            }
            rows.push(Row {
                label: label.clone(),
                split: split.into(),
                runs: losses.len(),
                mean_loss: Aggregate::of(&pick(&|r| split_of(r).map(|s| s.mean_loss))).expect("nonempty"),
                max_loss: Aggregate::of(&pick(&|r| split_of(r).map(|s| s.max_loss))).expect("nonempty"),
                accuracy: Aggregate::of(&pick(&|r| split_of(r).and_then(|s| s.accuracy))),
                cvar: cv,
            });
        }
    }
    if svg {
        for ((kind, split), series) in &curves {
            let (title, x, y) = match *kind {
                "cdf" => (format!("loss CDF ({split})"), "loss", "fraction of samples"),
                _ => (format!("CVaR ({split})"), "quantile q", "mean loss above quantile"),
            };
            let s: Vec<Series> = series.iter().map(|(l, p)| Series { label: l, points: p }).collect();
            let path = out_dir.join(format!("{kind}_{split}.svg"));
            std::fs::write(&path, line_chart(&title, x, y, &s)).map_err(|e| CliError::io(&path, e))?;
            files.push(path);
        }
    }
    let report = Report {
        dataset_signature: signature,
        quantiles: quantiles.to_vec(),
        rows,
        files,
    };
    let table_path = out_dir.join("comparison.md");
    std::fs::write(&table_path, report.table()).map_err(|e| CliError::io(&table_path, e))?;
    let json_path = out_dir.join("comparison.json");
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
    std::fs::write(&json_path, json).map_err(|e| CliError::io(&json_path, e))?;
    Ok(report)
}
