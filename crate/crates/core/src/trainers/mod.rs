//! Adversarial training: vanilla GAN (with and without the log-D generator
//! objective), f-GAN variational divergence minimization, WGAN with weight
//! clipping, and CycleGAN on 2-D point clouds.
//!
//! Every run alternates `k` discriminator (critic) updates with one generator
//! update, as in the minibatch algorithm. The alternating schedule never
//! optimizes the discriminator to completion, so none of the idealized
//! convergence statements apply literally.

mod cyclegan;
mod gan;
pub mod metrics;
mod report;

pub use cyclegan::{
    cyclegan_loss_graph, cyclegan_losses, train_cyclegan, CycleGanConfig, CycleGanLosses,
    CycleGanModel, CycleLossGraph,
};
pub use gan::{
    discriminator_loss, discriminator_step, generator_loss, generator_step, init_model, train,
    wgan_readout, GanModel, LossGraph, StepOutcome, WganReadout, LOG_GUARD,
};
pub use report::{samples_csv, LogRecord, TrainReport, DOCUMENTED_COLUMNS, REPORT_COLUMNS};

use serde::{Deserialize, Serialize};

use crate::distributions::{SourceDist, TargetDist};
use crate::divergences::CatalogId;
use crate::error::{Error, Result};
use crate::nn::{HiddenActivation, MlpParams, MlpSpec, OutputActivation};
use crate::rng::Stream;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GanVariant {
    /// Discriminator ascends `mean ln D(x) + mean ln(1 − D(G(z)))`; the
    /// generator descends `mean ln(1 − D(G(z)))`.
    Vanilla,
    /// Same discriminator; the generator descends `−mean ln D(G(z))`.
    VanillaLogd,
    /// Critic `T = g_f(S(x))`, objective `mean T(G(z)) − mean f*(T(x))`.
    Fgan { divergence: CatalogId },
    /// Critic ascends `mean T(x) − mean T(G(z))`, then every critic
    /// parameter is clipped into `[−clip, clip]`.
    Wgan {
        #[serde(default = "default_clip")]
        clip: f64,
    },
}

fn default_clip() -> f64 {
    0.01
}

impl GanVariant {
    pub fn label(&self) -> String {
        match self {
            GanVariant::Vanilla => "vanilla".into(),
            GanVariant::VanillaLogd => "vanilla_logd".into(),
            GanVariant::Fgan { divergence } => format!("fgan-{}", divergence.label()),
            GanVariant::Wgan { clip } => format!("wgan(c={clip})"),
        }
    }

    /// The output activation the discriminator must use under this variant.
    pub fn required_output(&self) -> OutputActivation {
        match self {
            GanVariant::Vanilla | GanVariant::VanillaLogd => OutputActivation::Sigmoid,
            GanVariant::Fgan { divergence } => OutputActivation::CustomGf(*divergence),
            GanVariant::Wgan { .. } => OutputActivation::Identity,
        }
    }
}

fn d_k() -> usize {
    1
}
fn d_m() -> usize {
    128
}
fn d_iters() -> usize {
    10000
}
fn d_lr_d() -> f64 {
    0.01
}
fn d_lr_g() -> f64 {
    0.001
}
fn d_momentum() -> f64 {
    0.5
}
fn d_log_interval() -> usize {
    100
}
fn d_eval_samples() -> usize {
    2000
}

/// A complete, seeded description of one adversarial training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub variant: GanVariant,
    /// Discriminator steps per generator step.
    #[serde(default = "d_k")]
    pub k: usize,
    /// Minibatch size.
    #[serde(default = "d_m")]
    pub m: usize,
    #[serde(default = "d_iters")]
    pub iters: usize,
    #[serde(default = "d_lr_d")]
    pub lr_d: f64,
    #[serde(default = "d_lr_g")]
    pub lr_g: f64,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    pub latent_dim: usize,
    /// Latent distribution; `None` is the standard normal `N(0, I_latent_dim)`.
    #[serde(default)]
    pub source: Option<TargetDist>,
    pub generator: MlpSpec,
    pub discriminator: MlpSpec,
    /// Explicit initial parameters; drawn from `init_params` when absent.
    #[serde(default)]
    pub generator_init: Option<MlpParams>,
    #[serde(default)]
    pub discriminator_init: Option<MlpParams>,
    pub target: TargetDist,
    pub seed: u64,
    #[serde(default = "d_log_interval")]
    pub log_interval: usize,
    #[serde(default = "d_eval_samples")]
    pub eval_samples: usize,
    /// Wall-clock timings make reports differ between identical runs, so they
    /// are off unless asked for.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl GanConfig {
    /// A small working configuration for a 1-D target: generator and
    /// discriminator are 2-hidden-layer leaky-relu MLPs of width 16.
    pub fn desk_default(variant: GanVariant, target: TargetDist, seed: u64) -> Self {
        let n = target.dim();
        let hidden = HiddenActivation::LeakyRelu(crate::nn::DEFAULT_LEAKY_SLOPE);
        GanConfig {
            variant,
            k: d_k(),
            m: d_m(),
            iters: d_iters(),
            lr_d: d_lr_d(),
            lr_g: d_lr_g(),
            momentum: d_momentum(),
            latent_dim: n,
            source: None,
            generator: MlpSpec::new(vec![n, 16, 16, n], hidden, OutputActivation::Identity),
            discriminator: MlpSpec::new(vec![n, 16, 16, 1], hidden, variant.required_output()),
            generator_init: None,
            discriminator_init: None,
            target,
            seed,
            log_interval: d_log_interval(),
            eval_samples: d_eval_samples(),
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k < 1 {
            return bad(format!(
                "k must be at least 1 (discriminator steps per generator step), got {}",
                self.k
            ));
        }
        if self.m < 1 {
            return bad("minibatch size m must be at least 1".into());
        }
        if self.iters < 1 || self.log_interval < 1 {
            return bad("iters and log_interval must be at least 1".into());
        }
        if self.eval_samples < metrics::MIN_EVAL_SAMPLES {
            return bad(format!(
                "eval_samples must be at least {}",
                metrics::MIN_EVAL_SAMPLES
            ));
        }
        self.target.validate()?;
        self.generator.validate()?;
        self.discriminator.validate()?;
        let latent = match &self.source {
            Some(s) => {
                s.validate()?;
                s.dim()
            }
            None => self.latent_dim,
        };
        if latent != self.latent_dim || self.latent_dim == 0 {
            return bad(format!(
                "latent_dim {} does not match the source dimension {latent}",
                self.latent_dim
            ));
        }
        if self.generator.input_dim() != latent {
            return bad(format!(
                "generator input width {} differs from latent_dim {latent}",
                self.generator.input_dim()
            ));
        }
        let n = self.target.dim();
        if self.generator.output_dim() != n || self.discriminator.input_dim() != n {
            return bad(format!(
                "generator output and discriminator input must both equal the target dimension {n}"
            ));
        }
        if self.discriminator.output_dim() != 1 {
            return bad("the discriminator must have a single output".into());
        }
        let need = self.variant.required_output();
        if self.discriminator.output_activation != need {
            return bad(format!(
                "{} requires the discriminator output activation {:?}",
                self.variant.label(),
                need
            ));
        }
        if let GanVariant::Wgan { clip } = self.variant {
            if !(clip > 0.0 && clip.is_finite()) {
                return bad(format!("wgan clip must be positive, got {clip}"));
            }
        }
        if let GanVariant::Fgan {
            divergence: CatalogId::Tv { alpha },
        } = self.variant
        {
            if !(alpha > 0.0) {
                return bad("tv alpha must be positive".into());
            }
        }
        crate::nn::OptimizerState::new(self.lr_d, self.momentum)?;
        crate::nn::OptimizerState::new(self.lr_g, self.momentum)?;
        if let Some(p) = &self.generator_init {
            p.check_against(&self.generator)?;
        }
        if let Some(p) = &self.discriminator_init {
            p.check_against(&self.discriminator)?;
        }
        Ok(())
    }

    pub(crate) fn sample_latent(&self, n: usize, rng: &mut Stream) -> Tensor {
        match &self.source {
            Some(s) => s.sample_with(n, rng),
            None => SourceDist::new(self.latent_dim).sample_with(n, rng),
        }
    }
}

/// Stream indices under a run's seed.
pub(crate) mod streams {
    pub const DATA: u64 = 1;
    pub const LATENT: u64 = 2;
    pub const EVAL_LATENT: u64 = 3;
    pub const EVAL_TARGET: u64 = 4;
    pub const INIT_G: u64 = 5;
    pub const INIT_D: u64 = 6;
    pub const INIT_G2: u64 = 7;
    pub const INIT_D2: u64 = 8;
    pub const PAIRS: u64 = 9;
}

pub(crate) fn sub_seed(seed: u64, index: u64) -> u64 {
    Stream::derive(seed, index).next_u64()
}

/// Converts a numerical failure inside a training step into an abort that
/// carries the iteration and a parameter dump.
pub(crate) fn abort_on_numeric(
    err: Error,
    iteration: usize,
    snapshot: impl FnOnce() -> String,
) -> Error {
    match err {
        Error::NonFinite(reason) | Error::Domain(reason) => Error::NumericalAbort {
            iteration,
            reason,
            diagnostic: snapshot(),
        },
        other => other,
    }
}
