//! Run artifacts: per-step CSV, TOML summaries and PPM heatmaps.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::gridworld::GridSpec;
use crate::simulator::{EnsembleReport, RunSummary, StepRecord};

pub const STEPS_HEADER: [&str; 6] = ["step", "bin", "s_b", "s_r", "eliminated", "entered_cum"];

/// One row per bin per step.
pub fn write_steps_csv(path: &Path, records: &[StepRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(STEPS_HEADER)?;
    for rec in records {
        for bin in 0..rec.s_b.len() {
            w.write_record([
                rec.step.to_string(),
                bin.to_string(),
                rec.s_b[bin].to_string(),
                rec.s_r[bin].to_string(),
                rec.eliminated[bin].to_string(),
                rec.entered_cum.to_string(),
            ])?;
        }
    }
    w.flush()
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = toml::to_string(value).map_err(io::Error::other)?;
    fs::write(path, text)
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> io::Result<()> {
    write_toml(path, summary)
}

#[derive(Serialize)]
struct EnsembleSummary<'a> {
    runs: usize,
    mean_red_entered: f64,
    std_red_entered: f64,
    mean_blue_lost: f64,
    mean_red_lost: f64,
    mean_estimated_leakage: Option<f64>,
    mean_blue_tv: &'a [f64],
}

pub fn write_ensemble_summary(path: &Path, report: &EnsembleReport) -> io::Result<()> {
    let estimates: Vec<f64> = report
        .runs
        .iter()
        .filter_map(|r| r.summary.estimated_leakage)
        .collect();
    // NaN is not valid TOML; steps no run reports a TV for are written as -1
    let tv: Vec<f64> = report
        .mean_tv
        .iter()
        .map(|v| if v.is_nan() { -1.0 } else { *v })
        .collect();
    write_toml(
        path,
        &EnsembleSummary {
            runs: report.runs.len(),
            mean_red_entered: report.mean_entered,
            std_red_entered: report.std_entered,
            mean_blue_lost: report.mean_blue_lost,
            mean_red_lost: report.mean_red_lost,
            mean_estimated_leakage: (!estimates.is_empty())
                .then(|| estimates.iter().sum::<f64>() / estimates.len() as f64),
            mean_blue_tv: &tv,
        },
    )
}

/// Plain (P3) pixmap of one 2D slice. `shade(bin)` gives the RGB of a bin.
fn ppm(rows: usize, cols: usize, bin_at: impl Fn(usize, usize) -> usize, shade: impl Fn(usize) -> [u8; 3]) -> String {
    let mut out = format!("P3\n{cols} {rows}\n255\n");
    for r in 0..rows {
        let line: Vec<String> = (0..cols)
            .map(|c| {
                let [red, green, blue] = shade(bin_at(r, c));
                format!("{red} {green} {blue}")
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  "));
    }
    out
}

/// Heatmap images for one record: `step_KKKK_{blue,red}.ppm`, or one file per
/// z-slice (`..._zZ.ppm`) on 3D grids. Intensity is `s / population`.
pub fn write_heatmaps(
    dir: &Path,
    grid: &GridSpec,
    rec: &StepRecord,
    blue_population: usize,
    red_population: usize,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let dims = grid.dims();
    let (rows, cols) = (dims[0], dims[1]);
    let slices = dims.get(2).copied().unwrap_or(1);
    for (name, counts, total, channel) in [
        ("blue", &rec.s_b, blue_population, 2usize),
        ("red", &rec.s_r, red_population, 0usize),
    ] {
        for z in 0..slices {
            let bin_at = |r: usize, c: usize| {
                if dims.len() == 3 {
                    grid.index(&[r, c, z]).expect("inside grid")
                } else {
                    grid.index(&[r, c]).expect("inside grid")
                }
            };
            let shade = |bin: usize| {
                if grid.is_obstacle(bin) {
                    return [96, 96, 96];
                }
                let level = if total == 0 {
                    0
                } else {
                    (255.0 * counts[bin] as f64 / total as f64).round().min(255.0) as u8
                };
                let mut rgb = [0, 0, 0];
                rgb[channel] = level;
                if grid.base_bins().contains(&bin) {
                    rgb[1] = 40;
                }
                rgb
            };
            let file = if slices > 1 {
                format!("step_{:04}_{name}_z{z}.ppm", rec.step)
            } else {
                format!("step_{:04}_{name}.ppm", rec.step)
            };
            fs::write(dir.join(file), ppm(rows, cols, bin_at, shade))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn rec() -> StepRecord {
        StepRecord {
            step: 3,
            s_b: vec![2, 0, 0, 0],
            s_r: vec![0, 1, 0, 1],
            eliminated: vec![0, 0, 0, 0],
            entered_cum: 1,
            blue_tv: None,
            phase: None,
        }
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("steps.csv");
        write_steps_csv(&path, &[rec()]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,bin,s_b,s_r,eliminated,entered_cum");
        assert_eq!(lines[1], "3,0,2,0,0,1");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn pixmap_2d_and_3d() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(vec![2, 2], BTreeSet::from([2]), BTreeSet::from([0])).unwrap();
        write_heatmaps(dir.path(), &grid, &rec(), 2, 2).unwrap();
        let blue = fs::read_to_string(dir.path().join("step_0003_blue.ppm")).unwrap();
        assert_eq!(blue, "P3\n2 2\n255\n0 40 255  0 0 0\n96 96 96  0 0 0\n");
        let red = fs::read_to_string(dir.path().join("step_0003_red.ppm")).unwrap();
        assert!(red.ends_with("96 96 96  128 0 0\n"));

        let cube = GridSpec::new(vec![1, 2, 2], BTreeSet::new(), BTreeSet::from([0])).unwrap();
        write_heatmaps(dir.path(), &cube, &rec(), 2, 2).unwrap();
        for z in 0..2 {
            assert!(dir.path().join(format!("step_0003_red_z{z}.ppm")).exists());
        }
    }
}
