use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::gan::{guarded_log, one_minus};
use super::metrics::{eval_metrics, hist_js};
use super::report::{LogRecord, TrainReport};
use super::{abort_on_numeric, streams, sub_seed};
use crate::autodiff::{Tape, Var};
use crate::distributions::TargetDist;
use crate::error::{Error, Result};
use crate::nn::{
    init_params, mlp_forward, sgd_momentum_step, snapshot_csv, Direction, HiddenActivation,
    MlpParams, MlpSpec, MlpVars, OptimizerState, OutputActivation,
};
use crate::rng::Stream;
use crate::tensor::Tensor;

/// Two translators between the domains `X ~ μ` and `Y ~ ν₀`, with one
/// discriminator per domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleGanModel {
    /// `Y → X`
    pub g1: MlpParams,
    /// `X → Y`
    pub g2: MlpParams,
    /// Discriminator on `X`.
    pub d_mu: MlpParams,
    /// Discriminator on `Y`.
    pub d_nu0: MlpParams,
    pub lambda: f64,
}

fn d_lambda() -> f64 {
    10.0
}
fn d_k() -> usize {
    1
}
fn d_m() -> usize {
    64
}
fn d_iters() -> usize {
    2000
}
fn d_lr_d() -> f64 {
    0.02
}
// The L1 cycle term has unit-size gradients scaled by λ, so momentum and a
// larger step make the generators diverge at λ = 10.
fn d_lr_g() -> f64 {
    0.002
}
fn d_momentum() -> f64 {
    0.0
}
fn d_log_interval() -> usize {
    100
}
fn d_eval_samples() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleGanConfig {
    /// Distribution `μ` of the `X` domain.
    pub domain_x: TargetDist,
    /// Distribution `ν₀` of the `Y` domain.
    pub domain_y: TargetDist,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    pub g1: MlpSpec,
    pub g2: MlpSpec,
    pub d_mu: MlpSpec,
    pub d_nu0: MlpSpec,
    #[serde(default)]
    pub g1_init: Option<MlpParams>,
    #[serde(default)]
    pub g2_init: Option<MlpParams>,
    #[serde(default = "d_k")]
    pub k: usize,
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
    pub seed: u64,
    #[serde(default = "d_log_interval")]
    pub log_interval: usize,
    #[serde(default = "d_eval_samples")]
    pub eval_samples: usize,
    #[serde(default)]
    pub record_wall_time: bool,
}

impl CycleGanConfig {
    /// One-hidden-layer leaky-relu networks of width 16 for both translators
    /// and both discriminators.
    pub fn desk_default(
        domain_x: TargetDist,
        domain_y: TargetDist,
        lambda: f64,
        seed: u64,
    ) -> Self {
        let act = HiddenActivation::LeakyRelu(crate::nn::DEFAULT_LEAKY_SLOPE);
        let net = |a, b, out| MlpSpec::new(vec![a, 16, b], act, out);
        let (nx, ny) = (domain_x.dim(), domain_y.dim());
        CycleGanConfig {
            g1: net(ny, nx, OutputActivation::Identity),
            g2: net(nx, ny, OutputActivation::Identity),
            d_mu: net(nx, 1, OutputActivation::Sigmoid),
            d_nu0: net(ny, 1, OutputActivation::Sigmoid),
            domain_x,
            domain_y,
            lambda,
            g1_init: None,
            g2_init: None,
            k: d_k(),
            m: d_m(),
            iters: d_iters(),
            lr_d: d_lr_d(),
            lr_g: d_lr_g(),
            momentum: d_momentum(),
            seed,
            log_interval: d_log_interval(),
            eval_samples: d_eval_samples(),
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.domain_x.validate()?;
        self.domain_y.validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            ));
        }
        if self.k < 1 {
            return bad(format!(
                "k must be at least 1 (discriminator steps per generator step), got {}",
                self.k
            ));
        }
        if self.m < 1 || self.iters < 1 || self.log_interval < 1 {
            return bad("m, iters and log_interval must be at least 1".into());
        }
        if self.eval_samples < super::metrics::MIN_EVAL_SAMPLES {
            return bad(format!(
                "eval_samples must be at least {}",
                super::metrics::MIN_EVAL_SAMPLES
            ));
        }
        for s in [&self.g1, &self.g2, &self.d_mu, &self.d_nu0] {
            s.validate()?;
        }
        let (nx, ny) = (self.domain_x.dim(), self.domain_y.dim());
        if self.g1.input_dim() != ny || self.g1.output_dim() != nx {
            return bad(format!(
                "g1 must map the Y domain ({ny}-D) to the X domain ({nx}-D)"
            ));
        }
        if self.g2.input_dim() != nx || self.g2.output_dim() != ny {
            return bad(format!(
                "g2 must map the X domain ({nx}-D) to the Y domain ({ny}-D)"
            ));
        }
        for (name, s, n) in [("d_mu", &self.d_mu, nx), ("d_nu0", &self.d_nu0, ny)] {
            if s.input_dim() != n
                || s.output_dim() != 1
                || s.output_activation != OutputActivation::Sigmoid
            {
                return bad(format!(
                    "{name} must map {n}-D points to one sigmoid output"
                ));
            }
        }
        OptimizerState::new(self.lr_d, self.momentum)?;
        OptimizerState::new(self.lr_g, self.momentum)?;
        if let Some(p) = &self.g1_init {
            p.check_against(&self.g1)?;
        }
        if let Some(p) = &self.g2_init {
            p.check_against(&self.g2)?;
        }
        Ok(())
    }

    pub fn init_model(&self) -> Result<CycleGanModel> {
        self.validate()?;
        let pick = |init: &Option<MlpParams>, spec: &MlpSpec, s: u64| match init {
            Some(p) => Ok(p.clone()),
            None => init_params(spec, sub_seed(self.seed, s)),
        };
        Ok(CycleGanModel {
            g1: pick(&self.g1_init, &self.g1, streams::INIT_G)?,
            g2: pick(&self.g2_init, &self.g2, streams::INIT_G2)?,
            d_mu: init_params(&self.d_mu, sub_seed(self.seed, streams::INIT_D))?,
            d_nu0: init_params(&self.d_nu0, sub_seed(self.seed, streams::INIT_D2))?,
            lambda: self.lambda,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleGanLosses {
    pub gan1: f64,
    pub gan2: f64,
    pub cycle: f64,
    pub star: f64,
}

/// The four loss terms recorded on one tape.
#[derive(Debug)]
pub struct CycleLossGraph {
    pub tape: Tape,
    pub gan1: Var,
    pub gan2: Var,
    pub cycle: Var,
    pub star: Var,
    /// Trainable handles by tag; the remaining networks are constants.
    pub trainable: Vec<(&'static str, MlpVars)>,
}

impl CycleLossGraph {
    pub fn losses(&self) -> CycleGanLosses {
        let v = |x: Var| self.tape.value(x).item();
        CycleGanLosses {
            gan1: v(self.gan1),
            gan2: v(self.gan2),
            cycle: v(self.cycle),
            star: v(self.star),
        }
    }
}

/// Batch mean of the per-row L1 norm of `a − b`.
fn l1_rows(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let rows = tape.value(b).rows() as f64;
    let d = tape.sub(a, b)?;
    let abs = tape.abs(d)?;
    let s = tape.sum(abs)?;
    tape.scale(s, 1.0 / rows)
}

/// Records `L_gan1`, `L_gan2`, `L_cycle` and `L* = L_gan1 + L_gan2 + λ·L_cycle`.
/// `train_generators` selects which pair of networks is registered as
/// parameters.
pub fn cyclegan_loss_graph(
    specs: [&MlpSpec; 4],
    model: &CycleGanModel,
    batch_x: &Tensor,
    batch_y: &Tensor,
    train_generators: bool,
) -> Result<CycleLossGraph> {
    let [s_g1, s_g2, s_dmu, s_dnu] = specs;
    let mut tape = Tape::new();
    let reg = |tape: &mut Tape, p: &MlpParams, trainable: bool| {
        if trainable {
            p.register(tape)
        } else {
            p.register_frozen(tape)
        }
    };
    let g1 = reg(&mut tape, &model.g1, train_generators);
    let g2 = reg(&mut tape, &model.g2, train_generators);
    let dmu = reg(&mut tape, &model.d_mu, !train_generators);
    let dnu = reg(&mut tape, &model.d_nu0, !train_generators);
    let x = tape.input(batch_x.clone());
    let y = tape.input(batch_y.clone());

    let g1y = mlp_forward(&mut tape, s_g1, &g1, y)?;
    let g2x = mlp_forward(&mut tape, s_g2, &g2, x)?;

    let gan = |tape: &mut Tape, d: &MlpVars, spec: &MlpSpec, real: Var, fake: Var| -> Result<Var> {
        let dr = mlp_forward(tape, spec, d, real)?;
        let df = mlp_forward(tape, spec, d, fake)?;
        let (lr, _) = guarded_log(tape, dr)?;
        let omf = one_minus(tape, df)?;
        let (lf, _) = guarded_log(tape, omf)?;
        let a = tape.mean(lr)?;
        let b = tape.mean(lf)?;
        tape.add(a, b)
    };
    let gan1 = gan(&mut tape, &dmu, s_dmu, x, g1y)?;
    let gan2 = gan(&mut tape, &dnu, s_dnu, y, g2x)?;

    let back_y = mlp_forward(&mut tape, s_g2, &g2, g1y)?;
    let back_x = mlp_forward(&mut tape, s_g1, &g1, g2x)?;
    let cy = l1_rows(&mut tape, back_y, y)?;
    let cx = l1_rows(&mut tape, back_x, x)?;
    let cycle = tape.add(cy, cx)?;

    let gans = tape.add(gan1, gan2)?;
    let weighted = tape.scale(cycle, model.lambda)?;
    let star = tape.add(gans, weighted)?;
    let trainable = if train_generators {
        vec![("g1", g1), ("g2", g2)]
    } else {
        vec![("d_mu", dmu), ("d_nu0", dnu)]
    };
    Ok(CycleLossGraph {
        tape,
        gan1,
        gan2,
        cycle,
        star,
        trainable,
    })
}

/// Evaluates the four CycleGAN loss terms on a pair of batches.
pub fn cyclegan_losses(
    cfg: &CycleGanConfig,
    model: &CycleGanModel,
    batch_x: &Tensor,
    batch_y: &Tensor,
) -> Result<CycleGanLosses> {
    Ok(cyclegan_loss_graph(
        [&cfg.g1, &cfg.g2, &cfg.d_mu, &cfg.d_nu0],
        model,
        batch_x,
        batch_y,
        true,
    )?
    .losses())
}

fn step(
    cfg: &CycleGanConfig,
    model: &mut CycleGanModel,
    opts: &mut [OptimizerState; 2],
    bx: &Tensor,
    by: &Tensor,
    generators: bool,
) -> Result<(CycleGanLosses, f64)> {
    let graph = cyclegan_loss_graph(
        [&cfg.g1, &cfg.g2, &cfg.d_mu, &cfg.d_nu0],
        model,
        bx,
        by,
        generators,
    )?;
    let losses = graph.losses();
    let grads = graph.tape.backward(graph.star)?;
    let mut sq = 0.0;
    for (i, (tag, vars)) in graph.trainable.iter().enumerate() {
        sq += grads.norm_over(&vars.flat()).powi(2);
        let (params, dir) = match *tag {
            "g1" => (&mut model.g1, Direction::Descend),
            "g2" => (&mut model.g2, Direction::Descend),
            "d_mu" => (&mut model.d_mu, Direction::Ascend),
            _ => (&mut model.d_nu0, Direction::Ascend),
        };
        sgd_momentum_step(params, vars, &grads, &mut opts[i], dir, tag)?;
    }
    Ok((losses, sq.sqrt()))
}

/// Alternates `k` ascent steps on both discriminators with one descent step
/// on both generators, all on `L*`.
pub fn train_cyclegan(cfg: &CycleGanConfig) -> Result<TrainReport> {
    let mut model = cfg.init_model()?;
    let opt_d = OptimizerState::new(cfg.lr_d, cfg.momentum)?;
    let opt_g = OptimizerState::new(cfg.lr_g, cfg.momentum)?;
    let mut opts_d = [opt_d.clone(), opt_d];
    let mut opts_g = [opt_g.clone(), opt_g];
    let mut rng_x = Stream::derive(cfg.seed, streams::DATA);
    let mut rng_y = Stream::derive(cfg.seed, streams::LATENT);
    let eval_x = cfg.domain_x.sample_with(
        cfg.eval_samples,
        &mut Stream::derive(cfg.seed, streams::EVAL_TARGET),
    );
    let eval_y = cfg.domain_y.sample_with(
        cfg.eval_samples,
        &mut Stream::derive(cfg.seed, streams::EVAL_LATENT),
    );
    let start = Instant::now();
    let mut records = Vec::new();
    let snapshot = |m: &CycleGanModel| {
        snapshot_csv(&[
            ("g1", &m.g1),
            ("g2", &m.g2),
            ("d_mu", &m.d_mu),
            ("d_nu0", &m.d_nu0),
        ])
    };

    for it in 1..=cfg.iters {
        let mut d_res = None;
        for _ in 0..cfg.k {
            let bx = cfg.domain_x.sample_with(cfg.m, &mut rng_x);
            let by = cfg.domain_y.sample_with(cfg.m, &mut rng_y);
            d_res = Some(
                step(cfg, &mut model, &mut opts_d, &bx, &by, false)
                    .map_err(|e| abort_on_numeric(e, it, || snapshot(&model)))?,
            );
        }
        let bx = cfg.domain_x.sample_with(cfg.m, &mut rng_x);
        let by = cfg.domain_y.sample_with(cfg.m, &mut rng_y);
        let (g_loss, g_norm) = step(cfg, &mut model, &mut opts_g, &bx, &by, true)
            .map_err(|e| abort_on_numeric(e, it, || snapshot(&model)))?;
        let (d_loss, d_norm) = d_res.expect("k >= 1");

        if it % cfg.log_interval == 0 || it == cfg.iters {
            let to_x = model.g1.eval(&cfg.g1, &eval_y)?;
            let to_y = model.g2.eval(&cfg.g2, &eval_x)?;
            let js = 0.5 * (hist_js(&to_x, &eval_x)? + hist_js(&to_y, &eval_y)?);
            let w1 = if to_x.cols() == 1 {
                eval_metrics(&to_x, &eval_x)?.w1_1d
            } else {
                None
            };
            let values = [
                d_loss.star,
                g_loss.star,
                d_norm,
                g_norm,
                js,
                g_loss.gan1,
                g_loss.gan2,
                g_loss.cycle,
            ];
            if !values.iter().all(|v| v.is_finite()) {
                return Err(Error::NumericalAbort {
                    iteration: it,
                    reason: "non-finite loss".into(),
                    diagnostic: snapshot(&model),
                });
            }
            records.push(LogRecord {
                iter: it,
                loss_d: d_loss.star,
                loss_g: g_loss.star,
                grad_norm_d: d_norm,
                grad_norm_g: g_norm,
                hist_js: js,
                w1_1d: w1,
                wall_ms: cfg
                    .record_wall_time
                    .then(|| start.elapsed().as_secs_f64() * 1e3),
                extra: vec![g_loss.gan1, g_loss.gan2, g_loss.cycle],
            });
        }
    }
    let final_samples = model.g1.eval(&cfg.g1, &eval_y)?;
    Ok(TrainReport {
        extra_columns: vec!["loss_gan1".into(), "loss_gan2".into(), "loss_cycle".into()],
        records,
        final_samples,
        final_params: vec![
            ("g1".into(), model.g1),
            ("g2".into(), model.g2),
            ("d_mu".into(), model.d_mu),
            ("d_nu0".into(), model.d_nu0),
        ],
        saturation_warnings: 0,
        wgan_readout: None,
    })
}
