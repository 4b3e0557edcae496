//! Central finite-difference checks of every layer and of the composed
//! network, all in 64-bit. Each check returns one summary line per tensor.

use ms3l_core::nn::layers::{
    conv_relu_backward, conv_relu_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward, sigmoid,
    ConvShape,
};
use ms3l_core::nn::{idx, NetConfig, NetworkParams};
use ms3l_core::rng::rng_for;
use rand::seq::SliceRandom;
use rand::Rng;

/// Central-difference steps. ReLU and max-pool kinks crossed by one step
/// size bias that estimate, so a parameter passes when any step agrees.
const STEPS: [f64; 3] = [1e-5, 1e-6, 1e-7];
const TOL: f64 = 1e-6;
/// Gradients smaller than this are compared on an absolute scale.
const FLOOR: f64 = 1e-4;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

/// Smallest relative error over [`STEPS`], with its numeric estimate.
fn best_of_steps(analytic: f64, mut numeric: impl FnMut(f64) -> f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, f64::NAN);
    for h in STEPS {
        let n = numeric(h);
        let e = rel_err(analytic, n);
        if e < best.0 {
            best = (e, n);
        }
        if e < TOL {
            break;
        }
    }
    best
}

fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Checks `analytic[i]` against the central difference of `loss` at `x[i]`.
fn check(
    name: &str,
    x: &mut [f64],
    analytic: &[f64],
    which: &[usize],
    mut loss: impl FnMut(&[f64]) -> f64,
) -> Result<String, String> {
    let mut worst = 0.0f64;
    for &i in which {
        let (e, n) = best_of_steps(analytic[i], |h| {
            let orig = x[i];
            x[i] = orig + h;
            let up = loss(x);
            x[i] = orig - h;
            let down = loss(x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        });
        if !(e < TOL) {
            return Err(format!("{name}[{i}]: analytic {} vs numeric {n} (rel {e:e})", analytic[i]));
        }
        worst = worst.max(e);
    }
    Ok(format!("{name}: {} params, worst rel err {worst:.2e}", which.len()))
}

fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

pub fn conv_relu_layer() -> Result<Vec<String>, String> {
    let mut rng = rng_for(11, 0);
    let s = ConvShape { c_in: 2, c_out: 3, height: 5, width: 6 };
    let mut input = random_vec(&mut rng, s.c_in * s.pixels(), 1.0);
    let mut weight = random_vec(&mut rng, s.weight_len(), 0.5);
    let mut bias = random_vec(&mut rng, s.c_out, 0.2);
    let coef = random_vec(&mut rng, s.c_out * s.pixels(), 1.0);

    let forward = |i: &[f64], w: &[f64], b: &[f64]| {
        let (mut col, mut out) = (Vec::new(), Vec::new());
        conv_relu_forward(&s, i, w, b, &mut col, &mut out);
        out.iter().zip(&coef).map(|(o, c)| o * c).sum::<f64>()
    };

    let (mut col, mut out) = (Vec::new(), Vec::new());
    conv_relu_forward(&s, &input, &weight, &bias, &mut col, &mut out);
    let mut d_out = coef.clone();
    let mut dw = vec![0.0; weight.len()];
    let mut db = vec![0.0; bias.len()];
    let mut di = vec![0.0; input.len()];
    let mut d_col = Vec::new();
    conv_relu_backward(&s, &out, &col, &weight, &mut d_out, &mut dw, &mut db, &mut d_col, Some(&mut di));

    let (w0, b0, i0) = (weight.clone(), bias.clone(), input.clone());
    Ok(vec![
        check("conv.weight", &mut weight, &dw, &all(dw.len()), |w| forward(&i0, w, &b0))?,
        check("conv.bias", &mut bias, &db, &all(db.len()), |b| forward(&i0, &w0, b))?,
        check("conv.input", &mut input, &di, &all(di.len()), |i| forward(i, &w0, &b0))?,
    ])
}

pub fn maxpool_layer() -> Result<Vec<String>, String> {
    let mut rng = rng_for(12, 0);
    let (c, h, w) = (2, 6, 4);
    let mut input = random_vec(&mut rng, c * h * w, 1.0);
    let coef = random_vec(&mut rng, c * (h / 2) * (w / 2), 1.0);
    let forward = |i: &[f64]| {
        let (mut out, mut arg) = (Vec::new(), Vec::new());
        maxpool_forward(c, h, w, i, &mut out, &mut arg);
        out.iter().zip(&coef).map(|(o, k)| o * k).sum::<f64>()
    };
    let (mut out, mut arg) = (Vec::new(), Vec::new());
    maxpool_forward(c, h, w, &input, &mut out, &mut arg);
    let mut di = vec![0.0; input.len()];
    maxpool_backward(&arg, &coef, &mut di);
    Ok(vec![check("maxpool.input", &mut input, &di, &all(di.len()), forward)?])
}

pub fn dense_layer() -> Result<Vec<String>, String> {
    let mut rng = rng_for(13, 0);
    let (n_in, n_out) = (7, 5);
    let mut input = random_vec(&mut rng, n_in, 1.0);
    let mut weight = random_vec(&mut rng, n_in * n_out, 0.5);
    let mut bias = random_vec(&mut rng, n_out, 0.5);
    let coef = random_vec(&mut rng, n_out, 1.0);
    let forward = |i: &[f64], w: &[f64], b: &[f64]| {
        let mut out = Vec::new();
        dense_forward(w, b, i, &mut out);
        out.iter().zip(&coef).map(|(o, k)| o * k).sum::<f64>()
    };
    let mut dw = vec![0.0; weight.len()];
    let mut db = vec![0.0; n_out];
    let mut di = vec![0.0; n_in];
    dense_backward(&weight, &input, &coef, &mut dw, &mut db, Some(&mut di));
    let (w0, b0, i0) = (weight.clone(), bias.clone(), input.clone());
    Ok(vec![
        check("dense.weight", &mut weight, &dw, &all(dw.len()), |w| forward(&i0, w, &b0))?,
        check("dense.bias", &mut bias, &db, &all(n_out), |b| forward(&i0, &w0, b))?,
        check("dense.input", &mut input, &di, &all(n_in), |i| forward(i, &w0, &b0))?,
    ])
}

/// Tanh and sigmoid heads, isolated: `L = Σ c·act(x)` against their closed forms.
pub fn activations() -> Result<Vec<String>, String> {
    let mut rng = rng_for(14, 0);
    let mut x = random_vec(&mut rng, 16, 4.0);
    let coef = random_vec(&mut rng, 16, 1.0);
    let d_tanh: Vec<f64> = x.iter().zip(&coef).map(|(v, c)| c * (1.0 - v.tanh() * v.tanh())).collect();
    let d_sig: Vec<f64> =
        x.iter().zip(&coef).map(|(v, c)| c * sigmoid(*v) * (1.0 - sigmoid(*v))).collect();
    let t = check("tanh", &mut x, &d_tanh, &all(16), |x| x.iter().zip(&coef).map(|(v, c)| c * v.tanh()).sum())?;
    let s = check("sigmoid", &mut x, &d_sig, &all(16), |x| x.iter().zip(&coef).map(|(v, c)| c * sigmoid(*v)).sum())?;
    Ok(vec![t, s])
}

pub fn single_linear_layer_closed_form() -> Result<Vec<String>, String> {
    // one output, loss (w·x + b − y)², gradient 2(w·x + b − y)x
    let (w, x, b, y) = ([0.3, -0.7, 1.1], [0.5, 2.0, -1.0], 0.2, 0.4);
    let r = w.iter().zip(&x).map(|(a, c)| a * c).sum::<f64>() + b - y;
    let mut dw = vec![0.0; 3];
    let mut db = vec![0.0];
    dense_backward(&w, &x, &[2.0 * r], &mut dw, &mut db, None);
    let err = (0..3).map(|k| (dw[k] - 2.0 * r * x[k]).abs()).fold((db[0] - 2.0 * r).abs(), f64::max);
    if err < 1e-15 {
        Ok(vec![format!("closed-form linear: max abs err {err:.1e}")])
    } else {
        Err(format!("closed-form linear gradient off by {err:e}"))
    }
}

fn batch(rng: &mut impl Rng, cfg: &NetConfig, n: usize) -> (Vec<Vec<f64>>, Vec<[f64; 2]>) {
    let images = (0..n).map(|_| (0..cfg.input_len()).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let targets = (0..n).map(|_| [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)]).collect();
    (images, targets)
}

fn set(p: &mut NetworkParams<f64>, t: usize, i: usize, v: f64) {
    p.tensors_mut()[t].data_mut()[i] = v;
}

/// Checks tensors `tensors` of the network, using `pick` to choose which
/// entries of each are perturbed.
fn check_network(
    name: &str,
    params: &NetworkParams<f64>,
    grads: &[Vec<f64>],
    tensors: std::ops::Range<usize>,
    mut pick: impl FnMut(usize, usize) -> Vec<usize>,
    loss: impl Fn(&NetworkParams<f64>) -> f64,
) -> Result<Vec<String>, String> {
    let mut lines = Vec::new();
    let mut p = params.clone();
    let names = params.names();
    for t in tensors {
        let len = p.tensors()[t].len();
        let which = pick(t, len);
        let mut worst = 0.0f64;
        for &i in &which {
            let (e, n) = best_of_steps(grads[t][i], |h| {
                let orig = p.tensors()[t].data()[i];
                set(&mut p, t, i, orig + h);
                let up = loss(&p);
                set(&mut p, t, i, orig - h);
                let down = loss(&p);
                set(&mut p, t, i, orig);
                (up - down) / (2.0 * h)
            });
            if !(e < TOL) {
                return Err(format!("{name} {}[{i}]: analytic {} vs numeric {n} (rel {e:e})", names[t], grads[t][i]));
            }
            worst = worst.max(e);
        }
        lines.push(format!("{name} {}: {} params, worst rel err {worst:.2e}", names[t], which.len()));
    }
    Ok(lines)
}

fn grads_of(g: &ms3l_core::nn::Gradients<f64>) -> Vec<Vec<f64>> {
    g.tensors.iter().map(|t| t.data().to_vec()).collect()
}

fn small() -> NetConfig {
    NetConfig { input_size: 8, channels: [2, 3], fc_width: 6, rec_hidden: 4, ..NetConfig::desk() }
}

pub fn network_mse_every_parameter() -> Result<Vec<String>, String> {
    let cfg = small();
    let mut rng = rng_for(21, 0);
    let params = NetworkParams::<f64>::init(cfg.clone(), &mut rng).unwrap();
    let (images, targets) = batch(&mut rng, &cfg, 4);
    let b: Vec<(&[f64], [f64; 2])> = images.iter().map(|i| i.as_slice()).zip(targets.iter().copied()).collect();
    let (_, g) = params.backward_mse(&b).unwrap();
    if !g.all_zero(idx::RECORDING) {
        return Err("imitation loss leaked gradient into the recording head".into());
    }
    let loss = |p: &NetworkParams<f64>| p.mse_loss(&b, &mut Default::default()).unwrap();
    check_network("mse", &params, &grads_of(&g), idx::NAVIGATION, |_, n| all(n), loss)
}

pub fn network_bce_every_parameter() -> Result<Vec<String>, String> {
    let cfg = small();
    let mut rng = rng_for(22, 0);
    let params = NetworkParams::<f64>::init(cfg.clone(), &mut rng).unwrap();
    let (images, _) = batch(&mut rng, &cfg, 4);
    let labels = [true, false, true, false];
    let b: Vec<(&[f64], bool)> = images.iter().map(|i| i.as_slice()).zip(labels).collect();
    let bce = |p: &NetworkParams<f64>| {
        b.iter().map(|(img, l)| ms3l_core::nn::bce(p.forward(img).unwrap().p_r, *l)).sum::<f64>() / b.len() as f64
    };

    let (_, g) = params.backward_bce_images(&b, true).unwrap();
    if !g.all_zero(idx::NAV_W..idx::NAV_B + 1) {
        return Err("recording loss leaked gradient into the navigation head".into());
    }
    let mut lines = check_network("bce-trunk", &params, &grads_of(&g), 0..idx::COUNT, |_, n| all(n), bce)?;

    let (_, g) = params.backward_bce_images(&b, false).unwrap();
    if !g.all_zero(idx::NAVIGATION) {
        return Err("stopped recording loss reached the trunk".into());
    }
    lines.extend(check_network("bce-head", &params, &grads_of(&g), idx::RECORDING, |_, n| all(n), bce)?);

    let feats: Vec<Vec<f64>> = images.iter().map(|i| params.forward(i).unwrap().fc5).collect();
    let fb: Vec<(&[f64], bool)> = feats.iter().map(|f| f.as_slice()).zip(labels).collect();
    let (_, gf) = params.backward_bce_features(&fb).unwrap();
    if idx::RECORDING.clone().any(|t| gf.tensors[t] != g.tensors[t]) {
        return Err("feature and image BCE gradients differ".into());
    }
    Ok(lines)
}

/// Every conv and head parameter at desk size, plus `fc5_samples` random
/// entries of the large `fc5` weight.
pub fn network_desk_size(fc5_samples: usize) -> Result<Vec<String>, String> {
    let cfg = NetConfig::desk();
    let mut rng = rng_for(23, 0);
    let params = NetworkParams::<f64>::init(cfg.clone(), &mut rng).unwrap();
    let (images, targets) = batch(&mut rng, &cfg, 4);
    let b: Vec<(&[f64], [f64; 2])> = images.iter().map(|i| i.as_slice()).zip(targets.iter().copied()).collect();
    let (_, g) = params.backward_mse(&b).unwrap();
    let loss = |p: &NetworkParams<f64>| p.mse_loss(&b, &mut Default::default()).unwrap();
    let mut pick_rng = rng_for(23, 1);
    let pick = |t: usize, n: usize| {
        let mut v = all(n);
        if t == idx::FC5_W {
            v.shuffle(&mut pick_rng);
            v.truncate(fc5_samples);
        }
        v
    };
    check_network("desk-mse", &params, &grads_of(&g), idx::NAVIGATION, pick, loss)
}

/// Every check above, in order.
pub fn all_checks(fc5_samples: usize) -> Result<Vec<String>, String> {
    let mut lines = Vec::new();
    for f in [conv_relu_layer, maxpool_layer, dense_layer, activations, single_linear_layer_closed_form] {
        lines.extend(f()?);
    }
    lines.extend(network_mse_every_parameter()?);
    lines.extend(network_bce_every_parameter()?);
    lines.extend(network_desk_size(fc5_samples)?);
    Ok(lines)
}
