//! Variational autoencoder with twin encoders for the mean and the log
//! variance of a diagonal Gaussian posterior, a decoder `H`, and the
//! reparametrized reconstruction loss.
//!
//! The Kullback-Leibler term is
//! `½ Σ (μᵢ² + σᵢ² − 1 − ln σᵢ²) = KL(N(μ, diag σ²) ‖ N(0, I))`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::distributions::{SourceDist, TargetDist};
use crate::error::ShapeError;
use crate::error::{Error, Result};
use crate::nn::{
    init_params, mlp_forward, sgd_momentum_step, snapshot_csv, Direction, HiddenActivation,
    MlpParams, MlpSpec, MlpVars, OptimizerState, OutputActivation,
};
use crate::rng::Stream;
use crate::tensor::Tensor;
use crate::trainers::metrics::{eval_metrics, MIN_EVAL_SAMPLES};
use crate::trainers::streams::{
    DATA, EVAL_LATENT, EVAL_TARGET, INIT_D as INIT_MU, INIT_D2 as INIT_LOGVAR,
    INIT_G as INIT_DECODER, LATENT,
};
use crate::trainers::{LogRecord, TrainReport};

/// Lower bound applied to `σ` before it multiplies the noise.
pub const SIGMA_FLOOR: f64 = 1e-8;

fn same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(ShapeError::new(format!(
            "{what}: lengths {a} and {b} differ"
        ))));
    }
    Ok(())
}

/// `μ + σ ⊙ z`, with `σ` floored at [`SIGMA_FLOOR`].
pub fn reparam_sample(mu: &[f64], sigma: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    same_len("reparam_sample", mu.len(), sigma.len())?;
    same_len("reparam_sample", mu.len(), z.len())?;
    if let Some(s) = sigma.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::Domain(format!(
            "sigma must be nonnegative and finite, got {s}"
        )));
    }
    Ok(mu
        .iter()
        .zip(sigma)
        .zip(z)
        .map(|((m, s), z)| m + s.max(SIGMA_FLOOR) * z)
        .collect())
}

/// `KL(N(μ, diag σ²) ‖ N(0, I)) = ½ Σ (μᵢ² + σᵢ² − 1 − ln σᵢ²)`.
pub fn kl_gaussian_std(mu: &[f64], sigma2: &[f64]) -> Result<f64> {
    same_len("kl_gaussian_std", mu.len(), sigma2.len())?;
    if let Some(s) = sigma2.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::Domain(format!(
            "sigma2 must be positive and finite, got {s}"
        )));
    }
    Ok(0.5
        * mu.iter()
            .zip(sigma2)
            .map(|(m, s)| m * m + s - 1.0 - s.ln())
            .sum::<f64>())
}

/// Architectures of the three networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeSpecs {
    /// `ℝⁿ → ℝᵈ`
    pub encoder_mu: MlpSpec,
    /// `ℝⁿ → ℝᵈ`, predicts `ln σ²`.
    pub encoder_logvar: MlpSpec,
    /// `ℝᵈ → ℝⁿ`
    pub decoder: MlpSpec,
}

impl VaeSpecs {
    /// Leaky-relu networks with the given hidden widths and identity outputs.
    pub fn uniform(data_dim: usize, latent_dim: usize, hidden: &[usize]) -> Self {
        let act = HiddenActivation::LeakyRelu(crate::nn::DEFAULT_LEAKY_SLOPE);
        let widths = |a: usize, b: usize| {
            let mut w = vec![a];
            w.extend_from_slice(hidden);
            w.push(b);
            w
        };
        VaeSpecs {
            encoder_mu: MlpSpec::new(
                widths(data_dim, latent_dim),
                act,
                OutputActivation::Identity,
            ),
            encoder_logvar: MlpSpec::new(
                widths(data_dim, latent_dim),
                act,
                OutputActivation::Identity,
            ),
            decoder: MlpSpec::new(
                widths(latent_dim, data_dim),
                act,
                OutputActivation::Identity,
            ),
        }
    }

    pub fn data_dim(&self) -> usize {
        self.encoder_mu.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder_mu.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder_mu.validate()?;
        self.encoder_logvar.validate()?;
        self.decoder.validate()?;
        let (n, d) = (self.data_dim(), self.latent_dim());
        if self.encoder_logvar.input_dim() != n || self.encoder_logvar.output_dim() != d {
            return Err(Error::InvalidConfig(format!(
                "both encoders must map {n}-D data to {d}-D latents"
            )));
        }
        if self.decoder.input_dim() != d || self.decoder.output_dim() != n {
            return Err(Error::InvalidConfig(format!(
                "the decoder must map {d}-D latents to {n}-D data"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeModel {
    pub specs: VaeSpecs,
    pub encoder_mu: MlpParams,
    pub encoder_logvar: MlpParams,
    pub decoder: MlpParams,
}

impl VaeModel {
    pub fn new(
        specs: VaeSpecs,
        encoder_mu: MlpParams,
        encoder_logvar: MlpParams,
        decoder: MlpParams,
    ) -> Result<Self> {
        specs.validate()?;
        encoder_mu.check_against(&specs.encoder_mu)?;
        encoder_logvar.check_against(&specs.encoder_logvar)?;
        decoder.check_against(&specs.decoder)?;
        Ok(VaeModel {
            specs,
            encoder_mu,
            encoder_logvar,
            decoder,
        })
    }

    fn snapshot(&self) -> String {
        snapshot_csv(&[
            ("encoder_mu", &self.encoder_mu),
            ("encoder_logvar", &self.encoder_logvar),
            ("decoder", &self.decoder),
        ])
    }
}

fn d_lambda() -> f64 {
    1.0
}
fn d_m() -> usize {
    64
}
// 0.01 overshoots through exp(ln σ²) within a few steps.
fn d_lr() -> f64 {
    1e-3
}
fn d_momentum() -> f64 {
    0.9
}
fn d_iters() -> usize {
    3000
}
fn d_log_interval() -> usize {
    100
}
fn d_eval_samples() -> usize {
    2000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    pub target: TargetDist,
    pub networks: VaeSpecs,
    /// Weight of the KL term; must be positive.
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_m")]
    pub m: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default = "d_iters")]
    pub iters: usize,
    pub seed: u64,
    #[serde(default = "d_log_interval")]
    pub log_interval: usize,
    #[serde(default = "d_eval_samples")]
    pub eval_samples: usize,
    #[serde(default)]
    pub record_wall_time: bool,
}

impl VaeConfig {
    /// Width-32 two-hidden-layer networks.
    pub fn desk_default(target: TargetDist, latent_dim: usize, seed: u64) -> Self {
        let n = target.dim();
        VaeConfig {
            target,
            networks: VaeSpecs::uniform(n, latent_dim, &[32, 32]),
            lambda: d_lambda(),
            m: d_m(),
            lr: d_lr(),
            momentum: d_momentum(),
            iters: d_iters(),
            seed,
            log_interval: d_log_interval(),
            eval_samples: d_eval_samples(),
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        self.networks.validate()?;
        if self.networks.data_dim() != self.target.dim() {
            return Err(Error::InvalidConfig(format!(
                "networks expect {}-D data but the target is {}-D",
                self.networks.data_dim(),
                self.target.dim()
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.m < 1 || self.iters < 1 || self.log_interval < 1 {
            return Err(Error::InvalidConfig(
                "m, iters and log_interval must be at least 1".into(),
            ));
        }
        if self.eval_samples < MIN_EVAL_SAMPLES {
            return Err(Error::InvalidConfig(format!(
                "eval_samples must be at least {MIN_EVAL_SAMPLES}"
            )));
        }
        OptimizerState::new(self.lr, self.momentum)?;
        Ok(())
    }

    pub fn init_model(&self) -> Result<VaeModel> {
        self.validate()?;
        let s = &self.networks;
        let seed = |i| Stream::derive(self.seed, i).next_u64();
        VaeModel::new(
            s.clone(),
            init_params(&s.encoder_mu, seed(INIT_MU))?,
            init_params(&s.encoder_logvar, seed(INIT_LOGVAR))?,
            init_params(&s.decoder, seed(INIT_DECODER))?,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeLosses {
    /// Batch mean of `‖H(μ(x) + σ(x) ⊙ z) − x‖²`.
    pub l1: f64,
    /// Batch mean of [`kl_gaussian_std`].
    pub l2: f64,
    pub total: f64,
}

#[derive(Debug)]
pub struct VaeLossGraph {
    pub tape: Tape,
    pub l1: Var,
    pub l2: Var,
    pub total: Var,
    /// Handles of `encoder_mu`, `encoder_logvar` and `decoder`.
    pub vars: [MlpVars; 3],
}

impl VaeLossGraph {
    pub fn losses(&self) -> VaeLosses {
        let v = |x: Var| self.tape.value(x).item();
        VaeLosses {
            l1: v(self.l1),
            l2: v(self.l2),
            total: v(self.total),
        }
    }
}

/// Records the VAE objective `L1 + λ·L2` with one noise row of `z` per row of `batch`.
pub fn vae_loss_graph(
    model: &VaeModel,
    batch: &Tensor,
    z: &Tensor,
    lambda: f64,
) -> Result<VaeLossGraph> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    let d = model.specs.latent_dim();
    if z.rows() != batch.rows() || z.cols() != d || batch.rows() == 0 {
        return Err(Error::Shape(ShapeError::new(format!(
            "need one {d}-D noise row per datum, got noise {:?} for batch {:?}",
            z.shape(),
            batch.shape()
        ))));
    }
    let rows = batch.rows() as f64;
    let s = &model.specs;
    let mut tape = Tape::new();
    let vars = [
        model.encoder_mu.register(&mut tape),
        model.encoder_logvar.register(&mut tape),
        model.decoder.register(&mut tape),
    ];
    let x = tape.input(batch.clone());
    let noise = tape.input(z.clone());
    let mu = mlp_forward(&mut tape, &s.encoder_mu, &vars[0], x)?;
    let logvar = mlp_forward(&mut tape, &s.encoder_logvar, &vars[1], x)?;

    let half = tape.scale(logvar, 0.5)?;
    let sigma = tape.exp(half)?;
    let sigma = tape.clamp_min(sigma, SIGMA_FLOOR)?;
    let spread = tape.mul(sigma, noise)?;
    let xi = tape.add(mu, spread)?;
    let recon = mlp_forward(&mut tape, &s.decoder, &vars[2], xi)?;
    let err = tape.sub(recon, x)?;
    let sq = tape.square(err)?;
    let l1 = tape.sum(sq)?;
    let l1 = tape.scale(l1, 1.0 / rows)?;

    let mu2 = tape.square(mu)?;
    let var = tape.exp(logvar)?;
    let a = tape.add(mu2, var)?;
    let b = tape.sub(a, logvar)?;
    let b = tape.add_scalar(b, -1.0)?;
    let l2 = tape.sum(b)?;
    let l2 = tape.scale(l2, 0.5 / rows)?;

    let weighted = tape.scale(l2, lambda)?;
    let total = tape.add(l1, weighted)?;
    Ok(VaeLossGraph {
        tape,
        l1,
        l2,
        total,
        vars,
    })
}

pub fn vae_loss(model: &VaeModel, batch: &Tensor, z: &Tensor, lambda: f64) -> Result<VaeLosses> {
    Ok(vae_loss_graph(model, batch, z, lambda)?.losses())
}

/// Decodes `n` standard-normal latents drawn from `seed`.
pub fn generate(model: &VaeModel, n: usize, seed: u64) -> Result<Tensor> {
    let z = SourceDist::new(model.specs.latent_dim()).sample(n, seed);
    model.decoder.eval(&model.specs.decoder, &z)
}

/// SGD with momentum on `L1 + λ·L2`.
///
/// Report columns: `loss_d` is the reconstruction term `L1`, `loss_g` the
/// total, `grad_norm_d` covers both encoders, `grad_norm_g` the decoder, and
/// the extra `loss_kl` column holds `L2`. `hist_js` and `w1_1d` compare
/// decoded prior samples against the target.
pub fn train_vae(cfg: &VaeConfig) -> Result<(TrainReport, VaeModel)> {
    let mut model = cfg.init_model()?;
    let mut opts = [
        OptimizerState::new(cfg.lr, cfg.momentum)?,
        OptimizerState::new(cfg.lr, cfg.momentum)?,
        OptimizerState::new(cfg.lr, cfg.momentum)?,
    ];
    let d = model.specs.latent_dim();
    let mut data_rng = Stream::derive(cfg.seed, DATA);
    let mut noise_rng = Stream::derive(cfg.seed, LATENT);
    let eval_seed = Stream::derive(cfg.seed, EVAL_LATENT).next_u64();
    let eval_target = cfg
        .target
        .sample_with(cfg.eval_samples, &mut Stream::derive(cfg.seed, EVAL_TARGET));
    let start = Instant::now();
    let mut records = Vec::new();

    for it in 1..=cfg.iters {
        let batch = cfg.target.sample_with(cfg.m, &mut data_rng);
        let z = SourceDist::new(d).sample_with(cfg.m, &mut noise_rng);
        let abort = |reason: String, m: &VaeModel| Error::NumericalAbort {
            iteration: it,
            reason,
            diagnostic: m.snapshot(),
        };
        let graph = match vae_loss_graph(&model, &batch, &z, cfg.lambda) {
            Ok(g) => g,
            Err(Error::NonFinite(r) | Error::Domain(r)) => return Err(abort(r, &model)),
            Err(e) => return Err(e),
        };
        let losses = graph.losses();
        let grads = match graph.tape.backward(graph.total) {
            Ok(g) => g,
            Err(Error::NonFinite(r)) => return Err(abort(r, &model)),
            Err(e) => return Err(e),
        };
        let enc_norm = (grads.norm_over(&graph.vars[0].flat()).powi(2)
            + grads.norm_over(&graph.vars[1].flat()).powi(2))
        .sqrt();
        let dec_norm = grads.norm_over(&graph.vars[2].flat());
        let [o_mu, o_lv, o_dec] = &mut opts;
        let step = sgd_momentum_step(
            &mut model.encoder_mu,
            &graph.vars[0],
            &grads,
            o_mu,
            Direction::Descend,
            "encoder_mu",
        )
        .and_then(|_| {
            sgd_momentum_step(
                &mut model.encoder_logvar,
                &graph.vars[1],
                &grads,
                o_lv,
                Direction::Descend,
                "encoder_logvar",
            )
        })
        .and_then(|_| {
            sgd_momentum_step(
                &mut model.decoder,
                &graph.vars[2],
                &grads,
                o_dec,
                Direction::Descend,
                "decoder",
            )
        });
        match step {
            Ok(()) => {}
            Err(Error::NonFinite(r)) => return Err(abort(r, &model)),
            Err(e) => return Err(e),
        }

        if it % cfg.log_interval == 0 || it == cfg.iters {
            let generated = generate(&model, cfg.eval_samples, eval_seed)?;
            let m = eval_metrics(&generated, &eval_target)?;
            if ![losses.l1, losses.l2, losses.total, m.hist_js]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(abort("non-finite loss".into(), &model));
            }
            records.push(LogRecord {
                iter: it,
                loss_d: losses.l1,
                loss_g: losses.total,
                grad_norm_d: enc_norm,
                grad_norm_g: dec_norm,
                hist_js: m.hist_js,
                w1_1d: m.w1_1d,
                wall_ms: cfg
                    .record_wall_time
                    .then(|| start.elapsed().as_secs_f64() * 1e3),
                extra: vec![losses.l2],
            });
        }
    }
    let final_samples = generate(&model, cfg.eval_samples, eval_seed)?;
    let report = TrainReport {
        extra_columns: vec!["loss_kl".into()],
        records,
        final_params: vec![
            ("encoder_mu".into(), model.encoder_mu.clone()),
            ("encoder_logvar".into(), model.encoder_logvar.clone()),
            ("decoder".into(), model.decoder.clone()),
        ],
        final_samples,
        saturation_warnings: 0,
        wgan_readout: None,
    };
    Ok((report, model))
}
