use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::eval_metrics;
use super::report::{LogRecord, TrainReport};
use super::{abort_on_numeric, streams, sub_seed, GanConfig, GanVariant};
use crate::autodiff::{Tape, Var};
use crate::divergences::ConvexFunction;
use crate::error::{Error, Result};
use crate::nn::{
    apply_output, clip_weights, init_params, mlp_forward, mlp_pre_activation, sgd_momentum_step,
    snapshot_csv, Direction, MlpParams, MlpSpec, MlpVars, OptimizerState,
};
use crate::rng::Stream;
use crate::tensor::Tensor;

/// Floor applied inside every `ln(·)` of the vanilla objectives.
pub const LOG_GUARD: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub generator: MlpParams,
    pub discriminator: MlpParams,
}

/// A recorded loss together with the parameter handles it depends on.
#[derive(Debug)]
pub struct LossGraph {
    pub tape: Tape,
    pub loss: Var,
    /// Parameter handles of the network being trained; the other network is
    /// recorded as constants.
    pub trainable: MlpVars,
    /// Entries where the log guard was active.
    pub guard_hits: usize,
    /// Number of guarded log terms.
    pub guarded_terms: usize,
}

impl LossGraph {
    pub fn value(&self) -> f64 {
        self.tape.value(self.loss).item()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    /// The objective before the update.
    pub objective: f64,
    /// Euclidean norm of the gradient over the updated network's parameters.
    pub grad_norm: f64,
    /// The log guard fired for more than half of the guarded terms.
    pub saturated: bool,
}

pub fn init_model(cfg: &GanConfig) -> Result<GanModel> {
    cfg.validate()?;
    let generator = match &cfg.generator_init {
        Some(p) => p.clone(),
        None => init_params(&cfg.generator, sub_seed(cfg.seed, streams::INIT_G))?,
    };
    let discriminator = match &cfg.discriminator_init {
        Some(p) => p.clone(),
        None => init_params(&cfg.discriminator, sub_seed(cfg.seed, streams::INIT_D))?,
    };
    Ok(GanModel {
        generator,
        discriminator,
    })
}

pub(crate) fn guarded_log(tape: &mut Tape, v: Var) -> Result<(Var, usize)> {
    let hits = tape
        .value(v)
        .data()
        .iter()
        .filter(|&&x| x < LOG_GUARD)
        .count();
    let c = tape.clamp_min(v, LOG_GUARD)?;
    Ok((tape.log(c)?, hits))
}

pub(crate) fn one_minus(tape: &mut Tape, v: Var) -> Result<Var> {
    let n = tape.neg(v)?;
    tape.add_scalar(n, 1.0)
}

/// Critic values `T` for `fgan`, probabilities `D` for the vanilla variants,
/// raw critic outputs for `wgan`. Returns `(pre-activation, output)`.
fn critic(tape: &mut Tape, spec: &MlpSpec, vars: &MlpVars, x: Var) -> Result<(Var, Var)> {
    let v = mlp_pre_activation(tape, spec, vars, x)?;
    let out = apply_output(tape, spec.output_activation, v)?;
    Ok((v, out))
}

/// The discriminator objective (to be ascended) on a real and a generated batch.
pub fn discriminator_loss(
    cfg: &GanConfig,
    model: &GanModel,
    real: &Tensor,
    fake: &Tensor,
) -> Result<LossGraph> {
    let mut tape = Tape::new();
    let d = model.discriminator.register(&mut tape);
    let xr = tape.input(real.clone());
    let xf = tape.input(fake.clone());
    let spec = &cfg.discriminator;
    let (mut hits, mut terms) = (0, 0);
    let loss = match cfg.variant {
        GanVariant::Vanilla | GanVariant::VanillaLogd => {
            let (_, dr) = critic(&mut tape, spec, &d, xr)?;
            let (_, df) = critic(&mut tape, spec, &d, xf)?;
            let (lr, h1) = guarded_log(&mut tape, dr)?;
            let omf = one_minus(&mut tape, df)?;
            let (lf, h2) = guarded_log(&mut tape, omf)?;
            hits = h1 + h2;
            terms = real.rows() + fake.rows();
            let a = tape.mean(lr)?;
            let b = tape.mean(lf)?;
            tape.add(a, b)?
        }
        GanVariant::Fgan { divergence } => {
            let cf = ConvexFunction::from(divergence);
            let vr = mlp_pre_activation(&mut tape, spec, &d, xr)?;
            let vf = mlp_pre_activation(&mut tape, spec, &d, xf)?;
            let tf = cf.activation_on_tape(&mut tape, vf)?;
            let fstar = cf.conjugate_of_activation_on_tape(&mut tape, vr)?;
            let a = tape.mean(tf)?;
            let b = tape.mean(fstar)?;
            tape.sub(a, b)?
        }
        GanVariant::Wgan { .. } => {
            let tr = mlp_forward(&mut tape, spec, &d, xr)?;
            let tf = mlp_forward(&mut tape, spec, &d, xf)?;
            let a = tape.mean(tr)?;
            let b = tape.mean(tf)?;
            tape.sub(a, b)?
        }
    };
    Ok(LossGraph {
        tape,
        loss,
        trainable: d,
        guard_hits: hits,
        guarded_terms: terms,
    })
}

/// The generator objective (to be descended) on a latent batch.
pub fn generator_loss(cfg: &GanConfig, model: &GanModel, latent: &Tensor) -> Result<LossGraph> {
    let mut tape = Tape::new();
    let g = model.generator.register(&mut tape);
    let d = model.discriminator.register_frozen(&mut tape);
    let z = tape.input(latent.clone());
    let fake = mlp_forward(&mut tape, &cfg.generator, &g, z)?;
    let spec = &cfg.discriminator;
    let (mut hits, mut terms) = (0, 0);
    let loss = match cfg.variant {
        GanVariant::Vanilla => {
            let (_, df) = critic(&mut tape, spec, &d, fake)?;
            let omf = one_minus(&mut tape, df)?;
            let (l, h) = guarded_log(&mut tape, omf)?;
            hits = h;
            terms = latent.rows();
            tape.mean(l)?
        }
        GanVariant::VanillaLogd => {
            let (_, df) = critic(&mut tape, spec, &d, fake)?;
            let (l, h) = guarded_log(&mut tape, df)?;
            hits = h;
            terms = latent.rows();
            let m = tape.mean(l)?;
            tape.neg(m)?
        }
        GanVariant::Fgan { divergence } => {
            let cf = ConvexFunction::from(divergence);
            let vf = mlp_pre_activation(&mut tape, spec, &d, fake)?;
            let tf = cf.activation_on_tape(&mut tape, vf)?;
            tape.mean(tf)?
        }
        GanVariant::Wgan { .. } => {
            let tf = mlp_forward(&mut tape, spec, &d, fake)?;
            let m = tape.mean(tf)?;
            tape.neg(m)?
        }
    };
    Ok(LossGraph {
        tape,
        loss,
        trainable: g,
        guard_hits: hits,
        guarded_terms: terms,
    })
}

fn finish(graph: &LossGraph) -> Result<(f64, crate::autodiff::GradientMap)> {
    let objective = graph.value();
    if !objective.is_finite() {
        return Err(Error::NonFinite(format!(
            "objective evaluated to {objective}"
        )));
    }
    Ok((objective, graph.tape.backward(graph.loss)?))
}

/// One ascent step on the discriminator (critic). For `wgan` the critic is
/// clipped afterwards.
pub fn discriminator_step(
    cfg: &GanConfig,
    model: &mut GanModel,
    opt: &mut OptimizerState,
    real: &Tensor,
    latent: &Tensor,
) -> Result<StepOutcome> {
    let fake = model.generator.eval(&cfg.generator, latent)?;
    let graph = discriminator_loss(cfg, model, real, &fake)?;
    let (objective, grads) = finish(&graph)?;
    let grad_norm = grads.norm_over(&graph.trainable.flat());
    sgd_momentum_step(
        &mut model.discriminator,
        &graph.trainable,
        &grads,
        opt,
        Direction::Ascend,
        "discriminator",
    )?;
    if let GanVariant::Wgan { clip } = cfg.variant {
        clip_weights(&mut model.discriminator, clip)?;
    }
    Ok(StepOutcome {
        objective,
        grad_norm,
        saturated: 2 * graph.guard_hits > graph.guarded_terms,
    })
}

/// One descent step on the generator.
pub fn generator_step(
    cfg: &GanConfig,
    model: &mut GanModel,
    opt: &mut OptimizerState,
    latent: &Tensor,
) -> Result<StepOutcome> {
    let graph = generator_loss(cfg, model, latent)?;
    let (objective, grads) = finish(&graph)?;
    let grad_norm = grads.norm_over(&graph.trainable.flat());
    sgd_momentum_step(
        &mut model.generator,
        &graph.trainable,
        &grads,
        opt,
        Direction::Descend,
        "generator",
    )?;
    Ok(StepOutcome {
        objective,
        grad_norm,
        saturated: 2 * graph.guard_hits > graph.guarded_terms,
    })
}

/// Critic-based estimate of `W¹` after WGAN training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WganReadout {
    /// `mean T(real) − mean T(generated)`.
    pub raw_gap: f64,
    /// Largest `|T(x) − T(y)| / ‖x − y‖` over random real/generated pairs.
    pub lipschitz: f64,
    /// `raw_gap / lipschitz`.
    pub normalized: f64,
}

/// Number of point pairs probed for the Lipschitz normalization.
pub const LIPSCHITZ_PAIRS: usize = 1024;

/// Computes the critic readout on the given real and generated samples. The
/// Lipschitz constant is the largest finite-difference slope over
/// `LIPSCHITZ_PAIRS` random (real, generated) pairs.
pub fn wgan_readout(
    spec: &MlpSpec,
    critic: &MlpParams,
    real: &Tensor,
    fake: &Tensor,
    seed: u64,
) -> Result<WganReadout> {
    let tr = critic.eval(spec, real)?;
    let tf = critic.eval(spec, fake)?;
    let mean = |t: &Tensor| t.sum() / t.len() as f64;
    let raw_gap = mean(&tr) - mean(&tf);
    let mut rng = Stream::derive(seed, streams::PAIRS);
    let mut lipschitz = 0.0f64;
    for _ in 0..LIPSCHITZ_PAIRS {
        let i = rng.below(real.rows());
        let j = rng.below(fake.rows());
        let dist = real
            .row(i)
            .iter()
            .zip(fake.row(j))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if dist > 1e-12 {
            lipschitz = lipschitz.max((tr.data()[i] - tf.data()[j]).abs() / dist);
        }
    }
    let normalized = if lipschitz > 0.0 {
        raw_gap / lipschitz
    } else {
        0.0
    };
    Ok(WganReadout {
        raw_gap,
        lipschitz,
        normalized,
    })
}

/// Runs `iters` cycles of `k` discriminator steps and one generator step.
pub fn train(cfg: &GanConfig) -> Result<TrainReport> {
    let mut model = init_model(cfg)?;
    let mut opt_d = OptimizerState::new(cfg.lr_d, cfg.momentum)?;
    let mut opt_g = OptimizerState::new(cfg.lr_g, cfg.momentum)?;
    let mut data_rng = Stream::derive(cfg.seed, streams::DATA);
    let mut latent_rng = Stream::derive(cfg.seed, streams::LATENT);
    let eval_latent = cfg.sample_latent(
        cfg.eval_samples,
        &mut Stream::derive(cfg.seed, streams::EVAL_LATENT),
    );
    let eval_target = cfg.target.sample_with(
        cfg.eval_samples,
        &mut Stream::derive(cfg.seed, streams::EVAL_TARGET),
    );
    let is_wgan = matches!(cfg.variant, GanVariant::Wgan { .. });
    let start = Instant::now();
    let mut records = Vec::new();
    let mut saturation_warnings = 0;

    for it in 1..=cfg.iters {
        let snapshot = |m: &GanModel| {
            snapshot_csv(&[
                ("generator", &m.generator),
                ("discriminator", &m.discriminator),
            ])
        };
        let mut d_out = None;
        for _ in 0..cfg.k {
            let real = cfg.target.sample_with(cfg.m, &mut data_rng);
            let latent = cfg.sample_latent(cfg.m, &mut latent_rng);
            let o = discriminator_step(cfg, &mut model, &mut opt_d, &real, &latent)
                .map_err(|e| abort_on_numeric(e, it, || snapshot(&model)))?;
            if o.saturated {
                saturation_warnings += 1;
            }
            d_out = Some(o);
        }
        let latent = cfg.sample_latent(cfg.m, &mut latent_rng);
        let g_out = generator_step(cfg, &mut model, &mut opt_g, &latent)
            .map_err(|e| abort_on_numeric(e, it, || snapshot(&model)))?;
        let d_out = d_out.expect("k >= 1");

        if it % cfg.log_interval == 0 || it == cfg.iters {
            let generated = model.generator.eval(&cfg.generator, &eval_latent)?;
            let m = eval_metrics(&generated, &eval_target)?;
            let mut extra = Vec::new();
            if is_wgan {
                let r = wgan_readout(
                    &cfg.discriminator,
                    &model.discriminator,
                    &eval_target,
                    &generated,
                    cfg.seed,
                )?;
                extra.push(r.normalized);
            }
            let record = LogRecord {
                iter: it,
                loss_d: d_out.objective,
                loss_g: g_out.objective,
                grad_norm_d: d_out.grad_norm,
                grad_norm_g: g_out.grad_norm,
                hist_js: m.hist_js,
                w1_1d: m.w1_1d,
                wall_ms: cfg
                    .record_wall_time
                    .then(|| start.elapsed().as_secs_f64() * 1e3),
                extra,
            };
            if ![
                record.loss_d,
                record.loss_g,
                record.grad_norm_d,
                record.grad_norm_g,
                record.hist_js,
            ]
            .iter()
            .all(|v| v.is_finite())
            {
                return Err(Error::NumericalAbort {
                    iteration: it,
                    reason: "non-finite metric".into(),
                    diagnostic: snapshot(&model),
                });
            }
            records.push(record);
        }
    }

    let final_samples = model.generator.eval(&cfg.generator, &eval_latent)?;
    let wgan = if is_wgan {
        Some(wgan_readout(
            &cfg.discriminator,
            &model.discriminator,
            &eval_target,
            &final_samples,
            cfg.seed,
        )?)
    } else {
        None
    };
    Ok(TrainReport {
        extra_columns: if is_wgan {
            vec!["w1_critic".into()]
        } else {
            Vec::new()
        },
        records,
        final_params: vec![
            ("generator".into(), model.generator),
            ("discriminator".into(), model.discriminator),
        ],
        final_samples,
        saturation_warnings,
        wgan_readout: wgan,
    })
}
