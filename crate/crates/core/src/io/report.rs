use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MetricReport, SamplingPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Pca,
    Jet,
    Net,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(Backend::Pca),
            "jet" => Ok(Backend::Jet),
            "net" => Ok(Backend::Net),
            _ => Err(Error::Config(format!(
                "unknown backend {s:?}, expected pca, jet or net"
            ))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Pca => "pca",
            Backend::Jet => "jet",
            Backend::Net => "net",
        })
    }
}

/// Everything needed to reproduce one estimation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub patch_size: usize,
    pub patch_count: usize,
    pub seed: u64,
    pub backend: Backend,
    pub weights: Option<PathBuf>,
    pub sigma_ratio: f64,
    /// Overrides the graph size stored with the weights.
    pub k_graph: Option<usize>,
    pub subset: Option<PathBuf>,
    pub naive_stitch: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            patch_size: 256,
            patch_count: 512,
            seed: 0,
            backend: Backend::Jet,
            weights: None,
            sigma_ratio: 1.0 / 3.0,
            k_graph: None,
            subset: None,
            naive_stitch: false,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 3 {
            return Err(Error::Config(format!(
                "patch size must be at least 3, got {}",
                self.patch_size
            )));
        }
        if self.patch_count == 0 {
            return Err(Error::Config("patch count must be positive".into()));
        }
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio.is_finite()) {
            return Err(Error::Config(format!(
                "sigma ratio must be positive, got {}",
                self.sigma_ratio
            )));
        }
        if self.k_graph == Some(0) {
            return Err(Error::Config("k_graph must be positive".into()));
        }
        if self.backend == Backend::Net && self.weights.is_none() {
            return Err(Error::Config("backend net requires --weights".into()));
        }
        Ok(())
    }

    pub fn plan(&self) -> SamplingPlan {
        SamplingPlan::new(self.patch_size, self.patch_count, self.seed)
    }
}

/// Mean and sample variance over repeated runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean: f64,
    pub variance: f64,
    pub runs: usize,
}

impl TimingStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        let runs = samples.len();
        if runs == 0 {
            return Self { mean: 0.0, variance: 0.0, runs };
        }
        let mean = samples.iter().sum::<f64>() / runs as f64;
        let variance = if runs > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (runs - 1) as f64
        } else {
            0.0
        };
        Self { mean, variance, runs }
    }
}

/// Written next to the output normals by `estimate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub shape: String,
    pub config: RunConfig,
    pub n_points: usize,
    pub metrics: Option<MetricReport>,
    pub overlap: f64,
    pub max_overlap: usize,
    pub uncovered: usize,
    pub timings_ms: StageTimingsMs,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimingsMs {
    pub sample: f64,
    pub extract: f64,
    pub estimate: f64,
    pub index: f64,
    pub stitch: f64,
    pub total: f64,
}

impl From<&crate::stitching::StageTimings> for StageTimingsMs {
    fn from(t: &crate::stitching::StageTimings) -> Self {
        let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
        Self {
            sample: ms(t.sample),
            extract: ms(t.extract),
            estimate: ms(t.estimate),
            index: ms(t.index),
            stitch: ms(t.stitch),
            total: ms(t.total()),
        }
    }
}

/// One row of the benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub dataset: String,
    pub config: RunConfig,
    pub n_points: usize,
    /// Metrics per input variant (noise level, density), in request order.
    pub reports: Vec<(String, MetricReport)>,
    /// Whole pipeline, ms per point.
    pub ms_per_point: TimingStats,
    /// Sampling, extraction and per-patch estimation, ms per point.
    pub inference_ms_per_point: TimingStats,
    /// Index build plus selection, ms per point.
    pub stitch_ms_per_point: TimingStats,
    pub overlap: f64,
    pub max_overlap: usize,
    /// Naive selection time over sparse-index selection time, when measured.
    pub naive_speedup: Option<f64>,
}

/// Pretty JSON with fields in declaration order.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn net_needs_weights() {
        let mut c = RunConfig { backend: Backend::Net, ..Default::default() };
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        c.weights = Some("w.stnw".into());
        c.validate().unwrap();
        c.patch_count = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn backend_names() {
        for b in [Backend::Pca, Backend::Jet, Backend::Net] {
            assert_eq!(b.to_string().parse::<Backend>().unwrap(), b);
        }
        assert!("svd".parse::<Backend>().is_err());
    }

    #[test]
    fn timing_stats() {
        let t = TimingStats::from_samples(&[1.0, 2.0, 3.0]);
        assert_eq!(t.mean, 2.0);
        assert_eq!(t.variance, 1.0);
        assert_eq!(t.runs, 3);
    }

    #[test]
    fn json_key_order_is_stable() {
        let c = RunConfig::default();
        let j = to_json(&c).unwrap();
        let a = j.find("\"patch_size\"").unwrap();
        let b = j.find("\"patch_count\"").unwrap();
        let s = j.find("\"seed\"").unwrap();
        assert!(a < b && b < s);
        let back: RunConfig = serde_json::from_str(&j).unwrap();
        assert_eq!(back, c);
    }
}
