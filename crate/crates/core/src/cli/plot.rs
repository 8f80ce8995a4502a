//! Long-format, plot-ready CSVs derived from a run directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Files `emit_plot_data` reads; `reports.csv` is required.
pub const PLOT_INPUTS: [&str; 4] = ["reports.csv", "covariance.csv", "marginal_samples.csv", "omega_radial.csv"];
const HISTOGRAM_BINS: usize = 40;
const GAP_TESTS: [&str; 3] = ["fk_marginal_ks", "feynman_kac_gap", "proximity_ratio"];

type Rows = Vec<BTreeMap<String, String>>;

fn read_rows(path: &Path) -> Result<Rows> {
    let fmt = |e: csv::Error| Error::Format { path: path.display().to_string(), reason: e.to_string() };
    let mut reader = csv::Reader::from_path(path).map_err(fmt)?;
    let headers = reader.headers().map_err(fmt)?.clone();
    reader
        .records()
        .map(|r| {
            let r = r.map_err(fmt)?;
            Ok(headers.iter().zip(r.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        })
        .collect()
}

fn field<'a>(row: &'a BTreeMap<String, String>, key: &str, path: &Path) -> Result<&'a str> {
    row.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Format { path: path.display().to_string(), reason: format!("missing column '{key}'") })
}

fn number(row: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<f64> {
    let v = field(row, key, path)?;
    v.parse().map_err(|_| Error::Format { path: path.display().to_string(), reason: format!("bad number '{v}' in '{key}'") })
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `plot_*.csv` next to the reports in `report_dir` and returns the
/// paths written. Plots whose inputs are absent are skipped.
pub fn emit_plot_data(report_dir: &Path) -> Result<Vec<PathBuf>> {
    let reports_path = report_dir.join("reports.csv");
    if !reports_path.is_file() {
        let missing = PLOT_INPUTS.iter().filter(|f| !report_dir.join(f).is_file()).map(|f| f.to_string()).collect();
        return Err(Error::MissingInputs { dir: report_dir.display().to_string(), missing });
    }
    let reports = read_rows(&reports_path)?;
    let mut written = Vec::new();

    let gap_path = report_dir.join("plot_gap.csv");
    let mut out = create(gap_path.clone())?;
    writeln!(out, "test,observable,N,estimate,error")?;
    for r in reports.iter().filter(|r| GAP_TESTS.contains(&r.get("test").map_or("", String::as_str))) {
        writeln!(
            out,
            "{},{},{},{},{}",
            field(r, "test", &reports_path)?,
            csv_escape(field(r, "observable", &reports_path)?),
            field(r, "N", &reports_path)?,
            field(r, "estimate", &reports_path)?,
            field(r, "error", &reports_path)?
        )?;
    }
    out.flush()?;
    written.push(gap_path);

    let window_path = report_dir.join("plot_window_mass.csv");
    let mut out = create(window_path.clone())?;
    writeln!(out, "R,estimate,error")?;
    for r in reports.iter().filter(|r| r.get("test").is_some_and(|t| t == "nonlocal_window_mass")) {
        let params = field(r, "parameters", &reports_path)?;
        let window = params.split(';').find_map(|p| p.strip_prefix("R=")).unwrap_or("");
        writeln!(out, "{window},{},{}", field(r, "estimate", &reports_path)?, field(r, "error", &reports_path)?)?;
    }
    out.flush()?;
    written.push(window_path);

    let cov_path = report_dir.join("covariance.csv");
    if cov_path.is_file() {
        let path = report_dir.join("plot_covariance.csv");
        let mut out = create(path.clone())?;
        writeln!(out, "lag,estimate,std_error,target")?;
        for r in read_rows(&cov_path)? {
            writeln!(
                out,
                "{},{},{},{}",
                field(&r, "lag", &cov_path)?,
                field(&r, "estimate", &cov_path)?,
                field(&r, "std_error", &cov_path)?,
                field(&r, "target", &cov_path)?
            )?;
        }
        out.flush()?;
        written.push(path);
    }

    let samples_path = report_dir.join("marginal_samples.csv");
    let omega_path = report_dir.join("omega_radial.csv");
    if samples_path.is_file() && omega_path.is_file() {
        let path = report_dir.join("plot_marginal.csv");
        write_marginal(&samples_path, &omega_path, &path)?;
        written.push(path);
    }
    Ok(written)
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Histogram density of `|u(0)|` per `N` with the radial density
/// `2πr ρ(r)` of `Ω²` at the bin centers.
fn write_marginal(samples_path: &Path, omega_path: &Path, out_path: &Path) -> Result<()> {
    let mut by_n: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in read_rows(samples_path)? {
        by_n.entry(field(&r, "N", samples_path)?.to_string()).or_default().push(number(&r, "abs_u0", samples_path)?);
    }
    let omega = read_rows(omega_path)?;
    let radii = omega.iter().map(|r| number(r, "r", omega_path)).collect::<Result<Vec<f64>>>()?;
    let density = omega.iter().map(|r| number(r, "density", omega_path)).collect::<Result<Vec<f64>>>()?;
    if radii.len() < 2 {
        return Err(Error::Format { path: omega_path.display().to_string(), reason: "fewer than two radii".into() });
    }
    let h = radii[1] - radii[0];
    let radial = |x: f64| {
        let k = ((x - radii[0]) / h).floor().max(0.0) as usize;
        if k + 1 >= radii.len() {
            return 0.0;
        }
        let t = (x - radii[k]) / h;
        2.0 * std::f64::consts::PI * x * ((1.0 - t) * density[k] + t * density[k + 1])
    };
    let r_max = by_n.values().flatten().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let width = r_max / HISTOGRAM_BINS as f64;
    let mut out = create(out_path.to_path_buf())?;
    writeln!(out, "N,bin_lo,bin_hi,bin_center,count,density,omega_density")?;
    for (n, values) in &by_n {
        let mut counts = vec![0usize; HISTOGRAM_BINS];
        for v in values {
            counts[((v / width) as usize).min(HISTOGRAM_BINS - 1)] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            let lo = b as f64 * width;
            let center = lo + 0.5 * width;
            let dens = *c as f64 / (values.len() as f64 * width);
            writeln!(out, "{n},{lo},{},{center},{c},{dens},{}", lo + width, radial(center))?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dir_names_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        match emit_plot_data(dir.path()) {
            Err(Error::MissingInputs { missing, .. }) => assert_eq!(missing.len(), PLOT_INPUTS.len()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn covariance_schema() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("reports.csv"), "test,observable,N,estimate,error,bound,pass,p_value,gating,parameters\n").unwrap();
        std::fs::write(
            dir.path().join("covariance.csv"),
            "i,j,lag,estimate,std_error,target,seed,config_hash\n0,1,0.1,0.45,0.01,0.4524,7,abc\n",
        )
        .unwrap();
        emit_plot_data(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("plot_covariance.csv")).unwrap();
        assert_eq!(text, "lag,estimate,std_error,target\n0.1,0.45,0.01,0.4524\n");
    }

    #[test]
    fn marginal_histogram_integrates_to_one() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("reports.csv"), "test,observable,N,estimate,error,bound,pass,p_value,gating,parameters\n").unwrap();
        let samples: String = (0..100).map(|k| format!("1,{}\n", 0.01 * k as f64)).collect();
        std::fs::write(dir.path().join("marginal_samples.csv"), format!("N,abs_u0\n{samples}")).unwrap();
        std::fs::write(dir.path().join("omega_radial.csv"), "r,cdf,density\n0,0,0.3\n1,0.5,0.2\n2,1,0\n").unwrap();
        emit_plot_data(dir.path()).unwrap();
        let rows = read_rows(&dir.path().join("plot_marginal.csv")).unwrap();
        assert_eq!(rows.len(), HISTOGRAM_BINS);
        let p = dir.path().join("x");
        let mass: f64 = rows
            .iter()
            .map(|r| number(r, "density", &p).unwrap() * (number(r, "bin_hi", &p).unwrap() - number(r, "bin_lo", &p).unwrap()))
            .sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| number(r, "omega_density", &p).unwrap() >= 0.0));
    }
}
