//! Property suites with measured errors, as run by `ganlab verify`.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use crate::autodiff::{grad_check, ScalarMap, Tape, Var};
use crate::distributions::TargetDist;
use crate::divergences::{
    conjugate_numeric, discrete_dual_sup, f_div_discrete, f_div_quadrature, fenchel_check,
    interior_grid, optimal_critic_discrete, optimal_discriminator, variational_objective_discrete,
    CatalogId, ConvexFunction, DensityFn, DiscreteDist, Interval,
};
use crate::error::{Error, Result};
use crate::nn::{init_params, HiddenActivation, MlpSpec, OutputActivation};
use crate::oracle::assignment_w1;
use crate::rng::Stream;
use crate::tensor::Tensor;
use crate::trainers::metrics::w1_sorted;
use crate::trainers::{
    cyclegan_loss_graph, discriminator_loss, generator_loss, init_model, CycleGanModel, GanConfig,
    GanVariant, LossGraph,
};
use crate::vae::{vae_loss_graph, VaeConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Conjugates,
    Divergences,
    Gradients,
    Transport,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Conjugates,
        Suite::Divergences,
        Suite::Gradients,
        Suite::Transport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Conjugates => "conjugates",
            Suite::Divergences => "divergences",
            Suite::Gradients => "gradients",
            Suite::Transport => "transport",
        }
    }

    pub fn from_name(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }

    pub fn run(self) -> Result<Vec<Check>> {
        match self {
            Suite::Conjugates => conjugates(),
            Suite::Divergences => divergences(),
            Suite::Gradients => gradients(),
            Suite::Transport => transport(),
        }
    }
}

/// One invariant with its measured error.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }
}

/// A fixed-width `status  invariant  measured  tolerance` table.
pub fn format_table(checks: &[Check]) -> String {
    let width = checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(9)
        .max(9);
    let mut out = format!(
        "{:<6}  {:<width$}  {:>12}  {:>9}\n",
        "status", "invariant", "measured", "tolerance"
    );
    for c in checks {
        let status = if c.passed() { "pass" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{status:<6}  {:<width$}  {:>12.3e}  {:>9.0e}",
            c.name, c.measured, c.tolerance
        );
    }
    out
}

fn table_entries() -> Vec<ConvexFunction> {
    vec![
        ConvexFunction::Kl,
        ConvexFunction::Exp,
        ConvexFunction::Square,
        ConvexFunction::SoftAbs,
        ConvexFunction::UnitIndicator,
        ConvexFunction::Affine {
            inner: Box::new(ConvexFunction::Square),
            a: 2.0,
            b: 1.0,
        },
        ConvexFunction::Affine {
            inner: Box::new(ConvexFunction::Kl),
            a: -2.0,
            b: 1.0,
        },
    ]
}

fn conjugates() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for cf in table_entries() {
        let grid = interior_grid(cf.conjugate_domain(), 50);
        let mut worst = 0.0f64;
        for &y in &grid {
            worst = worst.max((conjugate_numeric(&cf, y, 1e-12)? - cf.conjugate(y)?).abs());
        }
        out.push(Check::new(
            format!("numeric f* = table f* for {}", cf.name()),
            worst,
            1e-6,
        ));
    }
    let mut fenchel: Vec<ConvexFunction> = CatalogId::all_default()
        .into_iter()
        .map(ConvexFunction::from)
        .collect();
    fenchel.extend([
        ConvexFunction::Exp,
        ConvexFunction::Square,
        ConvexFunction::SoftAbs,
    ]);
    for cf in fenchel {
        let err = fenchel_check(&cf, &interior_grid(cf.domain(), 50))?;
        out.push(Check::new(
            format!("(f*)* = f for {}", cf.name()),
            err,
            1e-6,
        ));
    }
    Ok(out)
}

fn random_pair(rng: &mut Stream, k: usize) -> Result<(DiscreteDist, DiscreteDist)> {
    let w = |rng: &mut Stream| (0..k).map(|_| 0.05 + rng.uniform()).collect::<Vec<_>>();
    Ok((
        DiscreteDist::from_weights(&w(rng))?,
        DiscreteDist::from_weights(&w(rng))?,
    ))
}

fn divergences() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let kl = ConvexFunction::Kl;
    let js = ConvexFunction::from(CatalogId::Js);

    let q = f_div_quadrature(
        &kl,
        &DensityFn::gaussian(0.0, 1.0),
        &DensityFn::gaussian(0.5, 1.0),
    )?;
    out.push(Check::new(
        "kl quadrature, unit Gaussians 0.5 apart = 1/8",
        (q - 0.125).abs(),
        1e-6,
    ));
    let q = f_div_quadrature(
        &js,
        &DensityFn::uniform(0.0, 1.0),
        &DensityFn::uniform(2.0, 3.0),
    )?;
    out.push(Check::new(
        "js quadrature, disjoint uniforms = ln 2",
        (q - LN_2).abs(),
        1e-6,
    ));

    let mut rng = Stream::from_seed(0x5eed);
    let (mut duality, mut dominance, mut half) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let k = 2 + rng.below(5);
        let (p, q) = random_pair(&mut rng, k)?;
        for cf in [&kl, &js] {
            let t = optimal_critic_discrete(cf, &p, &q)?;
            let at_opt = variational_objective_discrete(cf, &t, &p, &q)?;
            let d = f_div_discrete(cf, &p, &q)?;
            duality = duality.max((at_opt - d).abs());
            let dom = cf.conjugate_domain();
            let random: Vec<f64> = (0..p.len())
                .map(|_| dom.anchor() + (rng.uniform() - 0.5))
                .map(|x| clamp_into(dom, x))
                .collect();
            dominance =
                dominance.max(variational_objective_discrete(cf, &random, &p, &q)? - at_opt);
        }
        let d = optimal_discriminator(&p, &p)?;
        half = half.max(
            d.iter()
                .flatten()
                .map(|x| (x - 0.5).abs())
                .fold(0.0, f64::max),
        );
    }
    out.push(Check::new(
        "objective at f'(p/q) = D_f (100 pairs, kl and js)",
        duality,
        1e-9,
    ));
    out.push(Check::new(
        "no random critic beats f'(p/q)",
        dominance.max(0.0),
        1e-12,
    ));
    out.push(Check::new("D* = 1/2 when p = q", half, 0.0));

    let mut singular = 0.0f64;
    for _ in 0..20 {
        let (a, b) = random_pair(&mut rng, 4)?;
        let mass = 0.1 + 0.5 * rng.uniform();
        let mut mu: Vec<f64> = a.probs().iter().map(|x| x * (1.0 - mass)).collect();
        mu.push(mass);
        let mut nu = b.probs().to_vec();
        nu.push(0.0);
        let (mu, nu) = (DiscreteDist::new(mu)?, DiscreteDist::new(nu)?);
        for id in [CatalogId::Js, CatalogId::Logd] {
            let cf = ConvexFunction::from(id);
            // Absolutely continuous part of μ against ν.
            let ac: Vec<f64> = mu.probs()[..4].to_vec();
            let expected = ac
                .iter()
                .zip(nu.probs())
                .map(|(p, q)| q * cf.eval(p / q))
                .sum::<f64>()
                + cf.b_star() * mass;
            singular = singular.max((discrete_dual_sup(&cf, &mu, &nu)? - expected).abs());
        }
    }
    out.push(Check::new(
        "dual sup = D_f + b*·singular mass (js, logd)",
        singular,
        1e-9,
    ));
    Ok(out)
}

fn clamp_into(dom: Interval, x: f64) -> f64 {
    if dom.contains_interior(x) {
        x
    } else {
        dom.anchor()
    }
}

fn max_grad_error(tape: &mut Tape, out: Var, params: &[Var]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &p in params {
        worst = worst.max(grad_check(tape, out, p, 1e-6)?);
    }
    Ok(worst)
}

fn loss_error(g: LossGraph) -> Result<f64> {
    let LossGraph {
        mut tape,
        loss,
        trainable,
        ..
    } = g;
    max_grad_error(&mut tape, loss, &trainable.flat())
}

fn primitive_checks(rng: &mut Stream) -> Result<Vec<Check>> {
    type Build = fn(&mut Tape, Var, Var) -> Result<Var>;
    let cases: Vec<(&str, Build)> = vec![
        ("add", |t, a, b| t.add(a, b)),
        ("sub", |t, a, b| t.sub(a, b)),
        ("mul", |t, a, b| t.mul(a, b)),
        ("scale", |t, a, _| t.scale(a, -1.7)),
        ("add_scalar", |t, a, _| t.add_scalar(a, 0.3)),
        ("neg", |t, a, _| t.neg(a)),
        ("sum", |t, a, _| t.sum(a)),
        ("mean", |t, a, _| t.mean(a)),
        ("exp", |t, a, _| t.exp(a)),
        ("log", |t, _, b| {
            let s = t.square(b)?;
            let s = t.add_scalar(s, 0.5)?;
            t.log(s)
        }),
        ("tanh", |t, a, _| t.tanh(a)),
        ("sigmoid", |t, a, _| t.sigmoid(a)),
        ("relu", |t, a, _| t.relu(a)),
        ("leaky_relu", |t, a, _| t.leaky_relu(a, 0.2)),
        ("softplus", |t, a, _| t.softplus(a)),
        ("abs", |t, a, _| t.abs(a)),
        ("square", |t, a, _| t.square(a)),
        ("clamp_min", |t, a, _| t.clamp_min(a, 0.1)),
        ("map", |t, a, _| {
            t.map(
                a,
                ScalarMap::new("cube", |x| Some(x * x * x), |x| 3.0 * x * x),
            )
        }),
    ];
    let mut out = Vec::new();
    for (name, build) in cases {
        let mut tape = Tape::new();
        // Entries kept away from the kinks of relu, abs and clamp_min.
        let vals = |rng: &mut Stream| {
            (0..6)
                .map(|_| {
                    let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                    sign * (0.3 + 0.7 * rng.uniform())
                })
                .collect::<Vec<_>>()
        };
        let a = tape.param(Tensor::matrix(2, 3, vals(rng)));
        let b = tape.param(Tensor::matrix(2, 3, vals(rng)));
        let y = build(&mut tape, a, b)?;
        let w = tape.constant(Tensor::matrix(2, 3, vals(rng)));
        let yw = if tape.value(y).is_scalar() {
            y
        } else {
            tape.mul(y, w)?
        };
        let s = tape.sum(yw)?;
        out.push(Check::new(
            format!("gradient of {name}"),
            max_grad_error(&mut tape, s, &[a, b])?,
            1e-5,
        ));
    }
    let mut tape = Tape::new();
    let x = tape.param(Tensor::matrix(3, 2, vals6(rng)));
    let w = tape.param(Tensor::matrix(4, 2, (0..8).map(|_| rng.normal()).collect()));
    let bias = tape.param(Tensor::vector((0..4).map(|_| rng.normal()).collect()));
    let a = tape.affine(x, w, bias)?;
    let sq = tape.square(a)?;
    let s = tape.sum(sq)?;
    out.push(Check::new(
        "gradient of affine",
        max_grad_error(&mut tape, s, &[x, w, bias])?,
        1e-5,
    ));
    let mut tape = Tape::new();
    let a = tape.param(Tensor::matrix(3, 2, vals6(rng)));
    let b = tape.param(Tensor::matrix(2, 3, vals6(rng)));
    let m = tape.matmul(a, b)?;
    let sq = tape.square(m)?;
    let s = tape.sum(sq)?;
    out.push(Check::new(
        "gradient of matmul",
        max_grad_error(&mut tape, s, &[a, b])?,
        1e-5,
    ));
    Ok(out)
}

fn vals6(rng: &mut Stream) -> Vec<f64> {
    (0..6).map(|_| rng.normal()).collect()
}

/// A random small GAN state for `variant` on a 1-D mixture.
fn small_gan(variant: GanVariant, seed: u64) -> Result<GanConfig> {
    let target = TargetDist::symmetric_pair_1d(2.0, 0.5);
    let mut cfg = GanConfig::desk_default(variant, target, seed);
    let act = HiddenActivation::Tanh;
    cfg.generator = MlpSpec::new(vec![1, 4, 1], act, OutputActivation::Identity);
    cfg.discriminator = MlpSpec::new(vec![1, 5, 1], act, variant.required_output());
    cfg.m = 8;
    cfg.validate()?;
    Ok(cfg)
}

fn loss_checks(rng: &mut Stream) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut variants = vec![
        ("vanilla", GanVariant::Vanilla),
        ("vanilla_logd", GanVariant::VanillaLogd),
    ];
    for id in CatalogId::all_default() {
        variants.push(("fgan", GanVariant::Fgan { divergence: id }));
    }
    variants.push(("wgan", GanVariant::Wgan { clip: 0.5 }));
    for (i, (_, v)) in variants.iter().enumerate() {
        let cfg = small_gan(*v, 100 + i as u64)?;
        let model = init_model(&cfg)?;
        let real = cfg.target.sample_with(cfg.m, rng);
        let latent = Tensor::matrix(cfg.m, 1, rng.normals(cfg.m));
        let fake = model.generator.eval(&cfg.generator, &latent)?;
        let label = v.label();
        out.push(Check::new(
            format!("gradient of {label} discriminator loss"),
            loss_error(discriminator_loss(&cfg, &model, &real, &fake)?)?,
            1e-5,
        ));
        out.push(Check::new(
            format!("gradient of {label} generator loss"),
            loss_error(generator_loss(&cfg, &model, &latent)?)?,
            1e-5,
        ));
    }

    let act = HiddenActivation::Tanh;
    let g = MlpSpec::new(vec![2, 4, 2], act, OutputActivation::Identity);
    let d = MlpSpec::new(vec![2, 4, 1], act, OutputActivation::Sigmoid);
    let model = CycleGanModel {
        g1: init_params(&g, 1)?,
        g2: init_params(&g, 2)?,
        d_mu: init_params(&d, 3)?,
        d_nu0: init_params(&d, 4)?,
        lambda: 10.0,
    };
    let bx = Tensor::matrix(6, 2, rng.normals(12));
    let by = Tensor::matrix(6, 2, rng.normals(12));
    for generators in [false, true] {
        let graph = cyclegan_loss_graph([&g, &g, &d, &d], &model, &bx, &by, generators)?;
        let params: Vec<Var> = graph.trainable.iter().flat_map(|(_, v)| v.flat()).collect();
        let mut tape = graph.tape;
        let which = if generators {
            "generators"
        } else {
            "discriminators"
        };
        out.push(Check::new(
            format!("gradient of cyclegan L* ({which})"),
            max_grad_error(&mut tape, graph.star, &params)?,
            1e-5,
        ));
    }

    let target = TargetDist::symmetric_pair_1d(2.0, 0.5);
    let mut vcfg = VaeConfig::desk_default(target, 2, 9);
    vcfg.networks = crate::vae::VaeSpecs::uniform(1, 2, &[5]);
    for s in [
        &mut vcfg.networks.encoder_mu,
        &mut vcfg.networks.encoder_logvar,
        &mut vcfg.networks.decoder,
    ] {
        s.hidden_activation = act;
    }
    let vm = vcfg.init_model()?;
    let batch = vcfg.target.sample_with(5, rng);
    let z = Tensor::matrix(5, 2, rng.normals(10));
    let graph = vae_loss_graph(&vm, &batch, &z, 0.7)?;
    let params: Vec<Var> = graph.vars.iter().flat_map(|v| v.flat()).collect();
    let mut tape = graph.tape;
    out.push(Check::new(
        "gradient of vae total loss",
        max_grad_error(&mut tape, graph.total, &params)?,
        1e-5,
    ));
    Ok(out)
}

fn gradients() -> Result<Vec<Check>> {
    let mut rng = Stream::from_seed(0x67ad);
    let mut out = primitive_checks(&mut rng)?;
    out.extend(loss_checks(&mut rng)?);
    Ok(out)
}

fn transport() -> Result<Vec<Check>> {
    let mut rng = Stream::from_seed(0x7a5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = 1 + rng.below(8);
        let a: Vec<f64> = (0..n).map(|_| 3.0 * rng.normal()).collect();
        let b: Vec<f64> = (0..n).map(|_| 1.0 + rng.normal()).collect();
        worst = worst.max((w1_sorted(&a, &b)? - assignment_w1(&a, &b)).abs());
    }
    let mut segment = 0.0f64;
    for theta in [0.0, 0.1, 0.25, 1.0] {
        let (mu, nu) = crate::distributions::segment_pair(theta);
        let a = mu.sample(4000, 1).column(0);
        let b = nu.sample(4000, 2).column(0);
        segment = segment.max((w1_sorted(&a, &b)? - f64::abs(theta)).abs());
    }
    Ok(vec![
        Check::new(
            "sorted W1 = assignment W1 (50 instances, n <= 8)",
            worst,
            1e-12,
        ),
        Check::new("segment pair W1 = |theta|", segment, 1e-12),
    ])
}

/// Runs every suite, in order.
pub fn run_all() -> Result<Vec<(Suite, Vec<Check>)>> {
    Suite::ALL.into_iter().map(|s| Ok((s, s.run()?))).collect()
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::from_name(s).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown suite {s:?}; expected one of conjugates, divergences, gradients, transport"
            ))
        })
    }
}
