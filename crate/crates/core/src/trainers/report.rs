use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::nn::MlpParams;
use crate::tensor::Tensor;

use super::gan::WganReadout;

/// The fixed leading columns of every training report.
pub const REPORT_COLUMNS: [&str; 8] = [
    "iter",
    "loss_d",
    "loss_g",
    "grad_norm_d",
    "grad_norm_g",
    "hist_js",
    "w1_1d",
    "wall_ms",
];

/// Every column a report may carry; optional ones follow the fixed eight.
pub const DOCUMENTED_COLUMNS: [&str; 13] = [
    "iter",
    "loss_d",
    "loss_g",
    "grad_norm_d",
    "grad_norm_g",
    "hist_js",
    "w1_1d",
    "wall_ms",
    "w1_critic",
    "loss_gan1",
    "loss_gan2",
    "loss_cycle",
    "loss_kl",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iter: usize,
    pub loss_d: f64,
    pub loss_g: f64,
    pub grad_norm_d: f64,
    pub grad_norm_g: f64,
    pub hist_js: f64,
    pub w1_1d: Option<f64>,
    pub wall_ms: Option<f64>,
    /// Values for [`TrainReport::extra_columns`], in order.
    pub extra: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub extra_columns: Vec<String>,
    pub records: Vec<LogRecord>,
    /// Final parameters by tag (`generator`, `discriminator`, …).
    pub final_params: Vec<(String, MlpParams)>,
    /// Generated samples from the final model.
    pub final_samples: Tensor,
    /// Discriminator steps on which the log guard fired for more than half the batch.
    pub saturation_warnings: usize,
    pub wgan_readout: Option<WganReadout>,
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:?}");
}

impl TrainReport {
    pub fn header(&self) -> Vec<String> {
        REPORT_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.extra_columns.iter().cloned())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{}", r.iter);
            for v in [r.loss_d, r.loss_g, r.grad_norm_d, r.grad_norm_g, r.hist_js] {
                out.push(',');
                num(&mut out, v);
            }
            for v in [r.w1_1d, r.wall_ms] {
                out.push(',');
                if let Some(v) = v {
                    num(&mut out, v);
                }
            }
            for &v in &r.extra {
                out.push(',');
                num(&mut out, v);
            }
            out.push('\n');
        }
        out
    }

    pub fn last(&self) -> &LogRecord {
        self.records
            .last()
            .expect("a report always has at least one record")
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let pick: fn(&LogRecord) -> f64 = match name {
            "iter" => |r| r.iter as f64,
            "loss_d" => |r| r.loss_d,
            "loss_g" => |r| r.loss_g,
            "grad_norm_d" => |r| r.grad_norm_d,
            "grad_norm_g" => |r| r.grad_norm_g,
            "hist_js" => |r| r.hist_js,
            "w1_1d" => |r| r.w1_1d.unwrap_or(f64::NAN),
            _ => {
                let j = self.extra_columns.iter().position(|c| c == name)?;
                return Some(self.records.iter().map(|r| r.extra[j]).collect());
            }
        };
        Some(self.records.iter().map(pick).collect())
    }

    /// Samples as CSV `index,x0,x1,…`.
    pub fn samples_csv(&self) -> String {
        samples_csv(&self.final_samples)
    }

    pub fn params(&self, tag: &str) -> Option<&MlpParams> {
        self.final_params
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, p)| p)
    }
}

/// `index,x0,x1,…` with one row per sample.
pub fn samples_csv(t: &Tensor) -> String {
    let mut out = String::from("index");
    for j in 0..t.cols() {
        let _ = write!(out, ",x{j}");
    }
    out.push('\n');
    for i in 0..t.rows() {
        let _ = write!(out, "{i}");
        for &v in t.row(i) {
            out.push(',');
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}
