//! File formats: sample CSV with a JSON sidecar, model and config JSON.
//!
//! Samples are written as `j,t,re,im` with 17 significant digits so that a
//! write/read cycle reproduces every `f64` exactly. The sidecar carries the
//! grid and the perturbation history, which the CSV cannot express.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VexpaError};
use crate::signal::{Perturbation, SampleSet, SamplingGrid, SignalModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub grid: SamplingGrid<f64>,
    pub perturbations: Vec<Perturbation<f64>>,
}

/// `samples.csv` -> `samples.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn samples_to_csv(samples: &SampleSet<f64>) -> String {
    let mut out = String::with_capacity(64 * (samples.len() + 1));
    out.push_str("j,t,re,im\n");
    for (j, v) in samples.values.iter().enumerate() {
        out.push_str(&format!("{j},{:.16e},{:.16e},{:.16e}\n", samples.grid.time(j), v.re, v.im));
    }
    out
}

/// Parses the CSV body. Without a sidecar the grid is inferred from the
/// first two time stamps.
pub fn samples_from_csv(text: &str, meta: Option<SampleMeta>) -> Result<SampleSet<f64>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["j", "t", "re", "im"] {
        return Err(VexpaError::InvalidGrid(format!("unexpected CSV header {:?}", header)));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| -> Result<f64> {
            record
                .get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| VexpaError::InvalidGrid(format!("row {row}: bad field {c}")))
        };
        let j: usize = record
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| VexpaError::InvalidGrid(format!("row {row}: bad index")))?;
        if j != row {
            return Err(VexpaError::InvalidGrid(format!("row {row} has index {j}")));
        }
        times.push(field(1)?);
        values.push(Complex::new(field(2)?, field(3)?));
    }
    let grid = match &meta {
        Some(m) => m.grid,
        None if times.len() >= 2 => SamplingGrid::new(times[1] - times[0], times.len())?,
        None => return Err(VexpaError::InvalidGrid("need at least 2 samples".into())),
    };
    let mut set = SampleSet::new(grid, values)?;
    if let Some(m) = meta {
        set.perturbations = m.perturbations;
    }
    Ok(set)
}

pub fn write_samples(path: &Path, samples: &SampleSet<f64>) -> Result<()> {
    fs::write(path, samples_to_csv(samples))?;
    let meta = SampleMeta {
        grid: samples.grid,
        perturbations: samples.perturbations.clone(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Reads a CSV and, when present, its sidecar.
pub fn read_samples(path: &Path) -> Result<SampleSet<f64>> {
    let text = fs::read_to_string(path)?;
    let side = sidecar_path(path);
    let meta = if side.exists() {
        Some(serde_json::from_str(&fs::read_to_string(side)?)?)
    } else {
        None
    };
    samples_from_csv(&text, meta)
}

pub fn read_model(path: &Path) -> Result<SignalModel<f64>> {
    SignalModel::from_json_str(&fs::read_to_string(path)?)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::signal::{add_noise, inject_outlier, sample};

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = SamplingGrid::from_rate(presets::OUTLIER_RATE, 40).unwrap();
        let s = sample(&presets::outlier_table::<f64>(), &grid);
        let s = inject_outlier(&add_noise(&s, 30.0, 4).unwrap(), 23, Complex::new(20.0, 0.0)).unwrap();
        let meta = SampleMeta {
            grid: s.grid,
            perturbations: s.perturbations.clone(),
        };
        let back = samples_from_csv(&samples_to_csv(&s), Some(meta)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn grid_inferred_without_sidecar() {
        let grid = SamplingGrid::new(0.25, 4).unwrap();
        let s = sample(&presets::toy::<f64>(), &grid);
        let back = samples_from_csv(&samples_to_csv(&s), None).unwrap();
        assert_eq!(back.grid, grid);
        assert_eq!(back.values, s.values);
    }

    #[test]
    fn rejects_bad_csv() {
        assert!(samples_from_csv("a,b,c,d\n0,0,1,0\n1,1,1,0\n", None).is_err());
        assert!(samples_from_csv("j,t,re,im\n0,0,1,0\n2,1,1,0\n", None).is_err());
        assert!(samples_from_csv("j,t,re,im\n0,0,x,0\n1,1,1,0\n", None).is_err());
        assert!(samples_from_csv("j,t,re,im\n0,0,1,0\n", None).is_err());
    }
}
