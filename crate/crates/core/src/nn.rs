//! Dense feed-forward networks recorded on a [`Tape`], their initializer,
//! SGD with momentum, weight clipping, and the parameter snapshot format.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autodiff::{GradientMap, Tape, Var};
use crate::divergences::{CatalogId, ConvexFunction};
use crate::error::{Error, Result, ShapeError};
use crate::rng::Stream;
use crate::tensor::Tensor;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
    LeakyRelu(f64),
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Sigmoid,
    Tanh,
    /// The catalog entry's `g_f`, mapping onto the interior of its conjugate domain.
    CustomGf(CatalogId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(
        layer_widths: Vec<usize>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Self {
        MlpSpec {
            layer_widths,
            hidden_activation,
            output_activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::InvalidConfig(
                "an MLP needs at least input and output widths".into(),
            ));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if let HiddenActivation::LeakyRelu(s) = self.hidden_activation {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "leaky relu slope must be in (0, 1), got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Tape handles for one registration of an [`MlpParams`].
#[derive(Clone, Debug)]
pub struct MlpVars {
    pub layers: Vec<(Var, Var)>,
}

impl MlpVars {
    /// Parameter handles in `w0, b0, w1, b1, …` order.
    pub fn flat(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }
}

impl MlpParams {
    /// Adds every weight and bias to `tape` as a parameter leaf.
    pub fn register(&self, tape: &mut Tape) -> MlpVars {
        MlpVars {
            layers: self
                .layers
                .iter()
                .map(|l| (tape.param(l.weight.clone()), tape.param(l.bias.clone())))
                .collect(),
        }
    }

    /// Adds the parameters as constants, for a network that is held fixed.
    pub fn register_frozen(&self, tape: &mut Tape) -> MlpVars {
        MlpVars {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    (
                        tape.constant(l.weight.clone()),
                        tape.constant(l.bias.clone()),
                    )
                })
                .collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// `tag.i.weight` / `tag.i.bias`, in [`MlpParams::tensors`] order.
    pub fn names(&self, tag: &str) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("{tag}.{i}.weight"), format!("{tag}.{i}.bias")])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.max_abs())
            .fold(0.0, f64::max)
    }

    pub fn check_against(&self, spec: &MlpSpec) -> Result<()> {
        let w = &spec.layer_widths;
        if self.layers.len() + 1 != w.len() {
            return Err(Error::InvalidConfig(format!(
                "parameters have {} layers, spec expects {}",
                self.layers.len(),
                w.len() - 1
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weight.shape() != [w[i + 1], w[i]] || l.bias.shape() != [w[i + 1]] {
                return Err(Error::InvalidConfig(format!(
                    "layer {i}: weight {:?} / bias {:?} do not match widths {} -> {}",
                    l.weight.shape(),
                    l.bias.shape(),
                    w[i],
                    w[i + 1]
                )));
            }
            if !l.weight.is_finite() || !l.bias.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "layer {i} has non-finite parameters"
                )));
            }
        }
        Ok(())
    }

    /// Evaluates the network on a fresh tape.
    pub fn eval(&self, spec: &MlpSpec, input: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape);
        let x = tape.input(input.clone());
        let y = mlp_forward(&mut tape, spec, &vars, x)?;
        Ok(tape.value(y).clone())
    }
}

/// Weights uniform on `±√3·s` (standard deviation `s`) with `s = √(2/fan_in)`
/// for the relu family and `s = √(1/fan_in)` for tanh; biases zero.
pub fn init_params(spec: &MlpSpec, seed: u64) -> Result<MlpParams> {
    spec.validate()?;
    let gain = match spec.hidden_activation {
        HiddenActivation::Relu | HiddenActivation::LeakyRelu(_) => 2.0,
        HiddenActivation::Tanh => 1.0,
    };
    let mut rng = Stream::derive(seed, 0x6e6e);
    let layers = spec
        .layer_widths
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (3.0 * gain / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| a * (2.0 * rng.uniform() - 1.0))
                .collect();
            Layer {
                weight: Tensor::matrix(fan_out, fan_in, data),
                bias: Tensor::zeros(&[fan_out]),
            }
        })
        .collect();
    Ok(MlpParams { layers })
}

fn hidden(tape: &mut Tape, act: HiddenActivation, v: Var) -> Result<Var> {
    match act {
        HiddenActivation::Relu => tape.relu(v),
        HiddenActivation::LeakyRelu(s) => tape.leaky_relu(v, s),
        HiddenActivation::Tanh => tape.tanh(v),
    }
}

/// Everything up to, but excluding, the output activation.
pub fn mlp_pre_activation(
    tape: &mut Tape,
    spec: &MlpSpec,
    vars: &MlpVars,
    input: Var,
) -> Result<Var> {
    let shape = tape.value(input).shape().to_vec();
    let width = *shape.last().unwrap_or(&0);
    if width != spec.input_dim()
        || shape.len() > 2
        || vars.layers.len() + 1 != spec.layer_widths.len()
    {
        return Err(Error::Shape(ShapeError::new(format!(
            "network expects inputs of width {} and {} layers, got input shape {:?} and {} layers",
            spec.input_dim(),
            spec.layer_widths.len() - 1,
            shape,
            vars.layers.len()
        ))));
    }
    let mut h = input;
    let last = vars.layers.len() - 1;
    for (i, &(w, b)) in vars.layers.iter().enumerate() {
        h = tape.affine(h, w, b)?;
        if i < last {
            h = hidden(tape, spec.hidden_activation, h)?;
        }
    }
    Ok(h)
}

pub fn apply_output(tape: &mut Tape, act: OutputActivation, v: Var) -> Result<Var> {
    match act {
        OutputActivation::Identity => Ok(v),
        OutputActivation::Sigmoid => tape.sigmoid(v),
        OutputActivation::Tanh => tape.tanh(v),
        OutputActivation::CustomGf(id) => ConvexFunction::from(id).activation_on_tape(tape, v),
    }
}

/// Records the network on `tape`; `input` is `[batch, in]` or `[in]`.
pub fn mlp_forward(tape: &mut Tape, spec: &MlpSpec, vars: &MlpVars, input: Var) -> Result<Var> {
    let v = mlp_pre_activation(tape, spec, vars, input)?;
    apply_output(tape, spec.output_activation, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Ascend,
    Descend,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(OptimizerState {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn velocity(&self) -> &[Tensor] {
        &self.velocity
    }

    /// `v ← μ·v + g`, then `p ← p ± lr·v`. Nothing is modified if any
    /// gradient is non-finite or misshapen.
    pub fn step(
        &mut self,
        params: Vec<&mut Tensor>,
        grads: &[&Tensor],
        names: &[String],
        dir: Direction,
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(ShapeError::new(
                "parameter and gradient counts differ",
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            let name = names.get(i).cloned().unwrap_or_else(|| format!("param{i}"));
            if p.shape() != g.shape() {
                return Err(Error::Shape(ShapeError::new(format!(
                    "gradient for {name} has shape {:?}, parameter {:?}",
                    g.shape(),
                    p.shape()
                ))));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient for {name}")));
            }
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        }
        let sign = match dir {
            Direction::Ascend => 1.0,
            Direction::Descend => -1.0,
        };
        for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.velocity) {
            for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                *vv = self.momentum * *vv + gv;
                *pv += sign * self.learning_rate * *vv;
            }
        }
        Ok(())
    }
}

/// One optimizer step on an MLP whose parameters were registered as `vars`.
pub fn sgd_momentum_step(
    params: &mut MlpParams,
    vars: &MlpVars,
    grads: &GradientMap,
    state: &mut OptimizerState,
    dir: Direction,
    tag: &str,
) -> Result<()> {
    let names = params.names(tag);
    let g = grads.collect(&vars.flat());
    let refs: Vec<&Tensor> = g.iter().collect();
    state.step(params.tensors_mut(), &refs, &names, dir)
}

/// Clamps every weight and bias into `[−c, c]`.
pub fn clip_weights(params: &mut MlpParams, c: f64) -> Result<()> {
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "clip constant must be positive, got {c}"
        )));
    }
    for t in params.tensors_mut() {
        for x in t.data_mut() {
            *x = x.clamp(-c, c);
        }
    }
    Ok(())
}

pub const SNAPSHOT_HEADER: &str = "layer,row,col,value";

/// Text snapshot with one row per scalar; biases use column 0.
pub fn snapshot_csv(nets: &[(&str, &MlpParams)]) -> String {
    let mut out = format!("{SNAPSHOT_HEADER}\n");
    for (tag, params) in nets {
        for (name, t) in params.names(tag).iter().zip(params.tensors()) {
            let cols = if t.shape().len() == 2 {
                t.shape()[1]
            } else {
                1
            };
            for (k, v) in t.data().iter().enumerate() {
                let _ = writeln!(out, "{name},{},{},{v:?}", k / cols, k % cols);
            }
        }
    }
    out
}

/// Reads back the parameters stored under `tag` in a snapshot, using `spec`
/// for the shapes.
pub fn parse_snapshot(csv: &str, tag: &str, spec: &MlpSpec) -> Result<MlpParams> {
    let mut params = MlpParams {
        layers: spec
            .layer_widths
            .windows(2)
            .map(|w| Layer {
                weight: Tensor::zeros(&[w[1], w[0]]),
                bias: Tensor::zeros(&[w[1]]),
            })
            .collect(),
    };
    let mut lines = csv.lines();
    if lines.next().map(str::trim) != Some(SNAPSHOT_HEADER) {
        return Err(Error::InvalidConfig(format!(
            "snapshot must start with `{SNAPSHOT_HEADER}`"
        )));
    }
    let prefix = format!("{tag}.");
    let mut seen = 0;
    for (n, line) in lines.enumerate() {
        let bad = || Error::InvalidConfig(format!("malformed snapshot line {}: {line}", n + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        let Some(rest) = f[0].strip_prefix(&prefix) else {
            continue;
        };
        let (idx, kind) = rest.split_once('.').ok_or_else(bad)?;
        let i: usize = idx.parse().map_err(|_| bad())?;
        let (r, c): (usize, usize) = (
            f[1].parse().map_err(|_| bad())?,
            f[2].parse().map_err(|_| bad())?,
        );
        let v: f64 = f[3].parse().map_err(|_| bad())?;
        let layer = params.layers.get_mut(i).ok_or_else(bad)?;
        let t = match kind {
            "weight" => &mut layer.weight,
            "bias" => &mut layer.bias,
            _ => return Err(bad()),
        };
        let cols = if t.shape().len() == 2 {
            t.shape()[1]
        } else {
            1
        };
        let k = r * cols + c;
        if c >= cols || k >= t.len() {
            return Err(bad());
        }
        t.data_mut()[k] = v;
        seen += 1;
    }
    if seen != params.num_params() {
        return Err(Error::InvalidConfig(format!(
            "snapshot holds {seen} values for `{tag}`, expected {}",
            params.num_params()
        )));
    }
    Ok(params)
}
