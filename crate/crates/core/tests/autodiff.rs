use ganlab::autodiff::{grad_check, Tape, Var};
use ganlab::rng::Stream;
use ganlab::Tensor;
use proptest::prelude::*;

fn central(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    up[i] += h;
    down[i] -= h;
    (f(&up) - f(&down)) / (2.0 * h)
}

#[test]
fn residual_norm_gradient_matches_central_differences() {
    let mut rng = Stream::from_seed(1);
    let w0 = rng.normals(9);
    let v = rng.normals(3);
    let y = rng.normals(3);

    let mut tape = Tape::new();
    let w = tape.param(Tensor::matrix(3, 3, w0.clone()));
    let vv = tape.constant(Tensor::matrix(3, 1, v.clone()));
    let yy = tape.constant(Tensor::matrix(3, 1, y.clone()));
    let wv = tape.matmul(w, vv).unwrap();
    let r = tape.sub(wv, yy).unwrap();
    let sq = tape.square(r).unwrap();
    let loss = tape.sum(sq).unwrap();
    let g = tape.backward(loss).unwrap()[w].clone();

    // ‖Wv − y‖² written out by hand
    let f = |wd: &[f64]| -> f64 {
        (0..3)
            .map(|i| {
                let row: f64 = (0..3).map(|j| wd[3 * i + j] * v[j]).sum();
                (row - y[i]).powi(2)
            })
            .sum()
    };
    for i in 0..9 {
        let numeric = central(&f, &w0, i, 1e-5);
        let a = g.data()[i];
        assert!(
            (a - numeric).abs() / a.abs().max(1.0) < 1e-5,
            "entry {i}: {a} vs {numeric}"
        );
        // and the closed form 2 (Wv − y)_i v_j
        let row = i / 3;
        let col = i % 3;
        let resid: f64 = (0..3).map(|j| w0[3 * row + j] * v[j]).sum::<f64>() - y[row];
        assert!((a - 2.0 * resid * v[col]).abs() < 1e-12);
    }
}

#[test]
fn two_layer_tanh_mlp_passes_grad_check() {
    let mut rng = Stream::from_seed(2);
    let mut tape = Tape::new();
    let x = tape.input(Tensor::matrix(5, 2, rng.normals(10)));
    // 2·4 + 4 + 4·1 + 1 = 17 weights, plus a 3-entry output scale = 20 parameters
    let w1 = tape.param(Tensor::matrix(4, 2, rng.normals(8)));
    let b1 = tape.param(Tensor::vector(rng.normals(4)));
    let w2 = tape.param(Tensor::matrix(1, 4, rng.normals(4)));
    let b2 = tape.param(Tensor::vector(rng.normals(1)));
    let s = tape.param(Tensor::matrix(1, 3, rng.normals(3)));
    let h = tape.affine(x, w1, b1).unwrap();
    let h = tape.tanh(h).unwrap();
    let o = tape.affine(h, w2, b2).unwrap();
    let o = tape.tanh(o).unwrap();
    let ss = tape.sum(s).unwrap();
    let ss = tape.square(ss).unwrap();
    let m = tape.mean(o).unwrap();
    let loss = tape.mul(m, ss).unwrap();
    let total: usize = [w1, b1, w2, b2, s]
        .iter()
        .map(|&p| tape.value(p).len())
        .sum();
    assert_eq!(total, 20);
    for p in [w1, b1, w2, b2, s] {
        assert!(grad_check(&mut tape, loss, p, 1e-6).unwrap() < 1e-5);
    }
}

#[test]
fn grad_check_rejects_bad_epsilon() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::scalar(1.0));
    let y = tape.scale(x, 2.0).unwrap();
    assert!(grad_check(&mut tape, y, x, 0.0).is_err());
    assert!(grad_check(&mut tape, y, x, 0.02).is_err());
    assert!(grad_check(&mut tape, y, x, 1e-2).unwrap() < 1e-10);
}

#[test]
fn backward_is_linear() {
    let mut rng = Stream::from_seed(3);
    let x0 = Tensor::vector(rng.normals(6).iter().map(|v| v.abs() + 0.5).collect());
    let (a, b) = (1.7, -0.3);
    let build = |mode: u8| {
        let mut tape = Tape::new();
        let x = tape.param(x0.clone());
        let fx = {
            let e = tape.exp(x).unwrap();
            tape.sum(e).unwrap()
        };
        let gx = {
            let l = tape.log(x).unwrap();
            let t = tape.tanh(x).unwrap();
            let p = tape.mul(l, t).unwrap();
            tape.mean(p).unwrap()
        };
        let out = match mode {
            0 => fx,
            1 => gx,
            _ => {
                let fa = tape.scale(fx, a).unwrap();
                let gb = tape.scale(gx, b).unwrap();
                tape.add(fa, gb).unwrap()
            }
        };
        tape.backward(out).unwrap()[x].clone()
    };
    let (gf, gg, gsum) = (build(0), build(1), build(2));
    for i in 0..6 {
        let lin = a * gf.data()[i] + b * gg.data()[i];
        assert!((gsum.data()[i] - lin).abs() < 1e-12);
    }
}

#[test]
fn identical_tapes_are_bit_identical() {
    let run = || {
        let mut rng = Stream::from_seed(4);
        let mut tape = Tape::new();
        let x = tape.input(Tensor::matrix(4, 3, rng.normals(12)));
        let w = tape.param(Tensor::matrix(2, 3, rng.normals(6)));
        let b = tape.param(Tensor::vector(rng.normals(2)));
        let h = tape.affine(x, w, b).unwrap();
        let h = tape.softplus(h).unwrap();
        let l = tape.mean(h).unwrap();
        let g = tape.backward(l).unwrap();
        (tape.value(l).clone(), g[w].clone(), g[b].clone())
    };
    assert_eq!(run(), run());
}

#[test]
fn gradient_shapes_match_parameters() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::matrix(2, 3, vec![1.0; 6]));
    let w = tape.param(Tensor::matrix(4, 3, vec![0.1; 12]));
    let b = tape.param(Tensor::vector(vec![0.0; 4]));
    let unused = tape.param(Tensor::matrix(2, 2, vec![1.0; 4]));
    let h = tape.affine(x, w, b).unwrap();
    let l = tape.sum(h).unwrap();
    let g = tape.backward(l).unwrap();
    for p in [w, b, unused] {
        assert_eq!(g[p].shape(), tape.value(p).shape());
    }
    assert!(g[unused].data().iter().all(|&v| v == 0.0));
}

type Build = fn(&mut Tape, Var) -> Var;

fn unary_cases() -> Vec<(&'static str, Build)> {
    vec![
        ("exp", |t, x| t.exp(x).unwrap()),
        ("log", |t, x| t.log(x).unwrap()),
        ("tanh", |t, x| t.tanh(x).unwrap()),
        ("sigmoid", |t, x| t.sigmoid(x).unwrap()),
        ("relu", |t, x| t.relu(x).unwrap()),
        ("leaky_relu", |t, x| t.leaky_relu(x, 0.2).unwrap()),
        ("softplus", |t, x| t.softplus(x).unwrap()),
        ("square", |t, x| t.square(x).unwrap()),
        ("abs", |t, x| t.abs(x).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unary_primitives_match_central_differences(
        xs in prop::collection::vec(prop_oneof![-3.0f64..-1e-3, 1e-3f64..3.0], 1..6),
        weights in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        for (name, build) in unary_cases() {
            let positive = name == "log";
            let x0: Vec<f64> = xs.iter().map(|v| if positive { v.abs() } else { *v }).collect();
            let mut tape = Tape::new();
            let x = tape.param(Tensor::vector(x0.clone()));
            let c = tape.constant(Tensor::vector(weights[..x0.len()].to_vec()));
            let y = build(&mut tape, x);
            let wy = tape.mul(y, c).unwrap();
            let l = tape.sum(wy).unwrap();
            let err = grad_check(&mut tape, l, x, 1e-6).unwrap();
            prop_assert!(err < 1e-5, "{} error {}", name, err);
        }
    }

    #[test]
    fn binary_primitives_match_central_differences(
        a in prop::collection::vec(-2.0f64..2.0, 6),
        b in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let mut tape = Tape::new();
        let pa = tape.param(Tensor::matrix(2, 3, a.clone()));
        let pb = tape.param(Tensor::matrix(3, 2, b.clone()));
        let pc = tape.param(Tensor::matrix(2, 3, b.clone()));
        let m = tape.matmul(pa, pb).unwrap();
        let prod = tape.mul(pa, pc).unwrap();
        let diff = tape.sub(prod, pa).unwrap();
        let s1 = tape.sum(m).unwrap();
        let s2 = tape.mean(diff).unwrap();
        let s2 = tape.add_scalar(s2, 0.5).unwrap();
        let out = tape.mul(s1, s2).unwrap();
        let out = tape.neg(out).unwrap();
        for p in [pa, pb, pc] {
            prop_assert!(grad_check(&mut tape, out, p, 1e-6).unwrap() < 1e-5);
        }
    }

    #[test]
    fn forward_values_stay_finite(xs in prop::collection::vec(-30.0f64..30.0, 1..8)) {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::vector(xs.clone()));
        let s = tape.sigmoid(x).unwrap();
        let p = tape.softplus(x).unwrap();
        let t = tape.tanh(x).unwrap();
        let a = tape.add(s, p).unwrap();
        let b = tape.mul(a, t).unwrap();
        let l = tape.sum(b).unwrap();
        prop_assert!(tape.value(l).is_finite());
        let g = tape.backward(l);
        prop_assert!(g.is_ok());
    }
}
