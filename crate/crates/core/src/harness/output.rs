use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{cdf_points, CampaignSummary, RatioEntry};

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_rows_csv<W: Write>(summary: &CampaignSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "scheme", "sigma_e2", "min_rate", "genie_fraction", "fairness", "solve_ms"])?;
    for r in &summary.rows {
        w.write_record([
            r.trial.to_string(),
            r.scheme.to_string(),
            r.sigma_e2.to_string(),
            r.min_rate.to_string(),
            r.genie_fraction.to_string(),
            r.fairness.to_string(),
            opt(r.solve_ms),
        ])?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summary: &CampaignSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "sigma_e2", "trials", "mean_min_rate", "mean_genie_fraction", "mean_fairness"])?;
    for p in &summary.points {
        w.write_record([
            p.scheme.to_string(),
            p.sigma_e2.to_string(),
            p.trials.to_string(),
            p.mean_min_rate.to_string(),
            p.mean_genie_fraction.to_string(),
            p.mean_fairness.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn write_genie_csv<W: Write>(summary: &CampaignSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "genie_min_rate"])?;
    for (t, g) in &summary.genie {
        w.write_record([t.to_string(), g.to_string()])?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn write_ratio_csv<W: Write>(ratios: &[RatioEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sigma_e2", "numerator", "denominator", "ratio", "paired_trials"])?;
    for r in ratios {
        w.write_record([
            r.sigma_e2.to_string(),
            r.numerator.clone(),
            r.denominator.clone(),
            r.ratio.map(|x| x.to_string()).unwrap_or_else(|| "undefined".into()),
            r.paired_trials.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn write_allocations_csv<W: Write>(summary: &CampaignSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "scheme", "sigma_e2", "slot", "user", "power", "scheduled"])?;
    for a in &summary.allocations {
        w.write_record([
            a.trial.to_string(),
            a.scheme.to_string(),
            a.sigma_e2.to_string(),
            a.slot.to_string(),
            a.user.to_string(),
            a.power.to_string(),
            (a.scheduled as u8).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("csv flush: {e}")))?;
    Ok(())
}

/// One `cdf_<scheme>_<sigma_e2>.csv` per populated point, columns
/// `min_rate, cdf`.
pub fn write_cdf_files(summary: &CampaignSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for p in summary.points.iter().filter(|p| !p.cdf.is_empty()) {
        let path = dir.join(format!("cdf_{}_{}.csv", p.scheme, p.sigma_e2));
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["min_rate", "cdf"])?;
        for (v, f) in cdf_points(&p.cdf)? {
            w.write_record([v.to_string(), f.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `rows.csv`, `summary.csv`, `genie.csv`, `ratios.csv` and, when
/// requested, CDF and allocation files into `dir`.
pub fn write_outputs(summary: &CampaignSummary, ratios: &[RatioEntry], dir: &Path, emit_cdf: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(File) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        f(create(&path)?)?;
        written.push(path);
        Ok(())
    };
    emit("rows.csv", &|f| write_rows_csv(summary, f))?;
    emit("summary.csv", &|f| write_summary_csv(summary, f))?;
    emit("genie.csv", &|f| write_genie_csv(summary, f))?;
    emit("ratios.csv", &|f| write_ratio_csv(ratios, f))?;
    if !summary.allocations.is_empty() {
        emit("allocations.csv", &|f| write_allocations_csv(summary, f))?;
    }
    if emit_cdf {
        written.extend(write_cdf_files(summary, dir)?);
    }
    Ok(written)
}
