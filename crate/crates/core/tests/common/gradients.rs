//! Analytic gradients against central finite differences. Each check returns
//! the worst relative error over its instances.

use censor_core::nn::{Activation, DenseNetwork, LayerSpec};
use censor_core::optim::{cross_entropy, mse_loss};
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-6;
pub const TOL: f64 = 1e-4;
pub const INSTANCES: u64 = 120;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..scale))
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    (0..n).map(|_| f64::from(rng.random_bool(0.5))).collect()
}

fn random_net(
    rng: &mut ChaCha8Rng,
    input: usize,
    output: usize,
    out_act: Activation,
) -> DenseNetwork {
    const SMOOTH: [Activation; 3] = [Activation::Tanh, Activation::Sigmoid, Activation::Identity];
    let depth = rng.random_range(0..3);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..6)).collect();
    let act = SMOOTH[rng.random_range(0..SMOOTH.len())];
    DenseNetwork::init(
        &LayerSpec::chain(input, &hidden, output, act, out_act),
        rng.random(),
    )
    .unwrap()
}

/// Perturbs every parameter of `net` in turn and compares the central
/// difference of `loss` with `analytic` (flattened layer by layer).
fn check_params(net: &DenseNetwork, analytic: &[f64], loss: impl Fn(&DenseNetwork) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for l in 0..net.layers().len() {
        let (rows, cols) = net.layers()[l].weights().dim();
        for i in 0..rows {
            for j in 0..cols {
                let mut p = net.clone();
                p.layers_mut()[l].weights_mut()[[i, j]] += H;
                let mut m = net.clone();
                m.layers_mut()[l].weights_mut()[[i, j]] -= H;
                let numeric = (loss(&p) - loss(&m)) / (2.0 * H);
                worst = worst.max(rel_err(analytic[k], numeric));
                k += 1;
            }
        }
        for i in 0..net.layers()[l].bias().len() {
            let mut p = net.clone();
            p.layers_mut()[l].bias_mut()[i] += H;
            let mut m = net.clone();
            m.layers_mut()[l].bias_mut()[i] -= H;
            let numeric = (loss(&p) - loss(&m)) / (2.0 * H);
            worst = worst.max(rel_err(analytic[k], numeric));
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
    worst
}

pub fn dense_network() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, d, o) = (
            rng.random_range(1..5),
            rng.random_range(1..5),
            rng.random_range(1..4),
        );
        let net = random_net(&mut rng, d, o, Activation::Tanh);
        let x = random_matrix(&mut rng, n, d, 1.5);
        let proj = random_matrix(&mut rng, n, o, 1.0);
        let loss =
            |net: &DenseNetwork, x: &Array2<f64>| (net.predict(x.view()).unwrap() * &proj).sum();

        let cache = net.forward(x.view()).unwrap();
        let (grads, dx) = net.backward(&cache, proj.view()).unwrap();
        worst = worst.max(check_params(&net, &grads.flatten(), |p| loss(p, &x)));

        for ((i, j), &a) in dx.indexed_iter() {
            let mut xp = x.clone();
            xp[[i, j]] += H;
            let mut xm = x.clone();
            xm[[i, j]] -= H;
            worst = worst.max(rel_err(a, (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * H)));
        }
    }
    worst
}

/// Relu networks, skipping instances with a pre-activation near the kink.
/// Returns the worst error and the number of instances checked.
pub fn relu_network() -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let net = DenseNetwork::init(
            &LayerSpec::chain(3, &[4], 2, Activation::Relu, Activation::Identity),
            rng.random(),
        )
        .unwrap();
        let x = random_matrix(&mut rng, 3, 3, 1.0);
        let pre = x.dot(&net.layers()[0].weights().t()) + net.layers()[0].bias();
        if pre.iter().any(|z| z.abs() < 1e-3) {
            continue;
        }
        checked += 1;
        let proj = random_matrix(&mut rng, 3, 2, 1.0);
        let cache = net.forward(x.view()).unwrap();
        let g = net.param_gradients(&cache, proj.view()).unwrap();
        worst = worst.max(check_params(&net, &g.flatten(), |p| {
            (p.predict(x.view()).unwrap() * &proj).sum()
        }));
    }
    (worst, checked)
}

pub fn mse() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let (n, d) = (rng.random_range(1..6), rng.random_range(1..6));
        let p = random_matrix(&mut rng, n, d, 2.0);
        let t = random_matrix(&mut rng, n, d, 2.0);
        let g = mse_loss(p.view(), t.view()).unwrap().gradient;
        for ((i, j), &a) in g.indexed_iter() {
            let mut pp = p.clone();
            pp[[i, j]] += H;
            let mut pm = p.clone();
            pm[[i, j]] -= H;
            let numeric = (mse_loss(pp.view(), t.view()).unwrap().value
                - mse_loss(pm.view(), t.view()).unwrap().value)
                / (2.0 * H);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

pub fn cross_entropy_loss() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let n = rng.random_range(1..8);
        let p: Array1<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        let s = random_labels(&mut rng, n);
        let g = cross_entropy(p.view(), s.view()).unwrap().gradient;
        for (i, &a) in g.iter().enumerate() {
            let mut pp = p.clone();
            pp[i] += H;
            let mut pm = p.clone();
            pm[i] -= H;
            let numeric = (cross_entropy(pp.view(), s.view()).unwrap().value
                - cross_entropy(pm.view(), s.view()).unwrap().value)
                / (2.0 * H);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

/// The adversary objective: cross-entropy of a sigmoid network.
pub fn adversary_objective() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let (n, d) = (rng.random_range(1..6), rng.random_range(1..5));
        let net = random_net(&mut rng, d, 1, Activation::Sigmoid);
        let z = random_matrix(&mut rng, n, d, 1.0);
        let s = random_labels(&mut rng, n);
        let loss = |net: &DenseNetwork| {
            cross_entropy(net.predict(z.view()).unwrap().column(0), s.view())
                .unwrap()
                .value
        };

        let cache = net.forward(z.view()).unwrap();
        let ce = cross_entropy(cache.output().column(0), s.view()).unwrap();
        let g = net
            .param_gradients(&cache, ce.gradient.insert_axis(Axis(1)).view())
            .unwrap();
        worst = worst.max(check_params(&net, &g.flatten(), loss));
    }
    worst
}

/// The actor objective `mse(d(e(x)), x) − δ·ce(h(e(x)), s)` differentiated
/// with respect to the encoder, chaining decoder and adversary backward
/// passes through the latent code.
pub fn actor_objective() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let (n, d, k) = (
            rng.random_range(2..6),
            rng.random_range(2..5),
            rng.random_range(1..4),
        );
        let enc = random_net(&mut rng, d, k, Activation::Tanh);
        let dec = random_net(&mut rng, k, d, Activation::Identity);
        let adv = random_net(&mut rng, k, 1, Activation::Sigmoid);
        let x = random_matrix(&mut rng, n, d, 1.0);
        let s = random_labels(&mut rng, n);
        let delta: f64 = rng.random_range(0.0..1.0);
        let objective = |e: &DenseNetwork| {
            let z = e.predict(x.view()).unwrap();
            let r = mse_loss(dec.predict(z.view()).unwrap().view(), x.view())
                .unwrap()
                .value;
            let c = cross_entropy(adv.predict(z.view()).unwrap().column(0), s.view())
                .unwrap()
                .value;
            r - delta * c
        };

        let ec = enc.forward(x.view()).unwrap();
        let dc = dec.forward(ec.output().view()).unwrap();
        let mse = mse_loss(dc.output().view(), x.view()).unwrap();
        let (_, dz_mse) = dec.backward(&dc, mse.gradient.view()).unwrap();
        let ac = adv.forward(ec.output().view()).unwrap();
        let ce = cross_entropy(ac.output().column(0), s.view()).unwrap();
        let (_, dz_ce) = adv
            .backward(&ac, ce.gradient.insert_axis(Axis(1)).view())
            .unwrap();
        let dz = dz_mse - &(dz_ce * delta);
        let g = enc.param_gradients(&ec, dz.view()).unwrap();
        worst = worst.max(check_params(&enc, &g.flatten(), objective));
    }
    worst
}
