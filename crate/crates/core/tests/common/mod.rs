//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use caugnn::autodiff::{Tape, Tensor, Var};
use caugnn::model::{CauGnnModel, GnnVariant, ModelConfig, Readout};
use caugnn::train::l1_loss;
use caugnn::causality::DiscretizedSeries;
use caugnn::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Uniform values with magnitude in `[0.1, 1)` and random sign, so ReLU and
/// abs kinks stay far from the finite-difference step.
pub fn away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

pub fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// `||a - b|| / max(||a||, ||b||, 1e-12)`.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

pub const FD_STEP: f64 = 1e-5;

/// Builds `op` on fresh leaves for `inputs`, reduces the output to a scalar
/// by contracting with fixed random weights, and returns the worst relative
/// error between the tape gradient and central differences over all inputs.
pub fn gradient_error(
    inputs: &[Tensor],
    seed: u64,
    op: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
) -> f64 {
    let loss_of = |tensors: &[Tensor], weights: Option<&Tensor>| -> (Tape, Var, Vec<Var>, Tensor) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = tensors.iter().map(|t| tape.leaf(t)).collect();
        let out = op(&mut tape, &vars).unwrap();
        let w = match weights {
            Some(w) => w.clone(),
            None => {
                let mut r = rng(seed ^ 0x5eed);
                let shape = tape.shape(out).to_vec();
                let n = tape.value(out).len();
                tensor(&shape, uniform(&mut r, n, -1.0, 1.0))
            }
        };
        let wv = tape.constant(w.clone());
        let prod = tape.mul(out, wv).unwrap();
        let loss = tape.sum(prod);
        (tape, loss, vars, w)
    };

    let leaves: Vec<Tensor> = inputs.iter().map(|t| t.clone().requiring_grad()).collect();
    let (tape, loss, vars, weights) = loss_of(&leaves, None);
    let grads = tape.backward(loss).unwrap();

    let mut worst: f64 = 0.0;
    for (idx, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var).unwrap().to_vec();
        let numeric: Vec<f64> = (0..analytic.len())
            .map(|e| {
                let mut probe = leaves.clone();
                let base = probe[idx].data()[e];
                probe[idx].data_mut()[e] = base + FD_STEP;
                let (t_plus, l_plus, _, _) = loss_of(&probe, Some(&weights));
                probe[idx].data_mut()[e] = base - FD_STEP;
                let (t_minus, l_minus, _, _) = loss_of(&probe, Some(&weights));
                (t_plus.value(l_plus)[0] - t_minus.value(l_minus)[0]) / (2.0 * FD_STEP)
            })
            .collect();
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    worst
}

fn log2(x: f64) -> f64 {
    x.log2()
}

/// Transfer entropy `source -> target` from the full joint frequency table,
/// written in the conditional-probability-ratio form
/// `sum p(x+, xk, yl) log2( p(x+ | xk, yl) / p(x+ | xk) )`, over the samples
/// `t = max(k, l) - 1 ..= T - 2`, clamped at 0.
pub fn te_oracle(source: &[usize], target: &[usize], k: usize, l: usize) -> f64 {
    // a history packed one byte per symbol, most recent first
    let pack = |s: &[usize], t: usize, len: usize| {
        (0..len).fold(0u64, |code, d| {
            assert!(s[t - d] < 256);
            code << 8 | s[t - d] as u64
        })
    };
    assert!(k <= 8 && l <= 8);
    let lag = k.max(l);
    let mut joint: HashMap<(usize, u64, u64), f64> = HashMap::new();
    let mut total = 0.0;
    for t in (lag - 1)..(target.len() - 1) {
        *joint.entry((target[t + 1], pack(target, t, k), pack(source, t, l))).or_default() += 1.0;
        total += 1.0;
    }
    let mut p_xk_yl: HashMap<(u64, u64), f64> = HashMap::new();
    let mut p_next_xk: HashMap<(usize, u64), f64> = HashMap::new();
    let mut p_xk: HashMap<u64, f64> = HashMap::new();
    for (&(next, xk, yl), c) in &joint {
        *p_xk_yl.entry((xk, yl)).or_default() += c;
        *p_next_xk.entry((next, xk)).or_default() += c;
        *p_xk.entry(xk).or_default() += c;
    }
    let mut te = 0.0;
    for (&(next, xk, yl), c) in &joint {
        let p = c / total;
        let cond_full = c / p_xk_yl[&(xk, yl)];
        let cond_own = p_next_xk[&(next, xk)] / p_xk[&xk];
        te += p * log2(cond_full / cond_own);
    }
    te.max(0.0)
}

pub fn series(symbols: &[usize], bins: usize) -> DiscretizedSeries {
    DiscretizedSeries::from_symbols(symbols.to_vec(), bins).unwrap()
}

/// Every sequence of `len` symbols over `0..radix`, as the digits of `code`.
pub fn sequence(code: usize, len: usize, radix: usize) -> Vec<usize> {
    let mut c = code;
    (0..len)
        .map(|_| {
            let d = c % radix;
            c /= radix;
            d
        })
        .collect()
}

/// `j` sends to `i` when `adjacency[j][i] > 0`; the complete graph when
/// `use_causality` is off.
pub fn in_neighbors(adjacency: &[f64], n: usize, i: usize, use_causality: bool) -> Vec<usize> {
    (0..n)
        .filter(|&j| j != i && (!use_causality || adjacency[j * n + i] > 0.0))
        .collect()
}

fn row_times(h: &[f64], w: &[f64], din: usize, dout: usize) -> Vec<f64> {
    let mut out = vec![0.0; dout];
    for a in 0..din {
        for b in 0..dout {
            out[b] += h[a] * w[a * dout + b];
        }
    }
    out
}

/// Per-node loop: `h_i' = relu(h_i W1 + sum_{j in N(i)} h_j W2)`.
#[allow(clippy::too_many_arguments)]
pub fn kgnn_naive(
    h: &[f64],
    batch: usize,
    n: usize,
    din: usize,
    dout: usize,
    adjacency: &[f64],
    use_causality: bool,
    w_self: &[f64],
    w_neigh: &[f64],
) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * n * dout);
    for b in 0..batch {
        for i in 0..n {
            let node = |j: usize| &h[(b * n + j) * din..(b * n + j + 1) * din];
            let mut v = row_times(node(i), w_self, din, dout);
            for j in in_neighbors(adjacency, n, i, use_causality) {
                for (o, x) in v.iter_mut().zip(row_times(node(j), w_neigh, din, dout)) {
                    *o += x;
                }
            }
            out.extend(v.into_iter().map(|x| x.max(0.0)));
        }
    }
    out
}

/// Per-node loop: `h_i' = relu(((1 + eps) h_i + sum_j h_j) W1 + b1) W2 + b2`.
#[allow(clippy::too_many_arguments)]
pub fn gin_naive(
    h: &[f64],
    batch: usize,
    n: usize,
    din: usize,
    dmid: usize,
    dout: usize,
    adjacency: &[f64],
    use_causality: bool,
    eps: f64,
    w1: &[f64],
    b1: &[f64],
    w2: &[f64],
    b2: &[f64],
) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * n * dout);
    for b in 0..batch {
        for i in 0..n {
            let node = |j: usize| &h[(b * n + j) * din..(b * n + j + 1) * din];
            let mut agg: Vec<f64> = node(i).iter().map(|x| (1.0 + eps) * x).collect();
            for j in in_neighbors(adjacency, n, i, use_causality) {
                for (a, x) in agg.iter_mut().zip(node(j)) {
                    *a += x;
                }
            }
            let hidden: Vec<f64> = row_times(&agg, w1, din, dmid)
                .iter()
                .zip(b1)
                .map(|(z, bb)| (z + bb).max(0.0))
                .collect();
            out.extend(row_times(&hidden, w2, dmid, dout).iter().zip(b2).map(|(z, bb)| z + bb));
        }
    }
    out
}

/// Random directed adjacency with positive weights on ~`density` of off-diagonal pairs.
pub fn random_adjacency(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                a[i * n + j] = rng.random_range(0.01..1.0);
            }
        }
    }
    a
}

/// Small model configurations cycling through both layer families and readouts.
pub fn small_config(seed: u64) -> ModelConfig {
    ModelConfig {
        kernel_sizes: vec![2, 3],
        channels_per_kernel: 2,
        gnn_hidden: vec![4, 3],
        window: 6,
        variant: if seed.is_multiple_of(2) { GnnVariant::KGnn } else { GnnVariant::Gin },
        readout: if seed % 4 < 2 { Readout::Linear } else { Readout::GnnLayer },
        ..ModelConfig::default()
    }
}

/// L1 training loss of `model` on a fixed random batch.
fn model_loss(
    model: &CauGnnModel,
    windows: &[f64],
    batch: usize,
    n: usize,
    targets: &[f64],
    adj: &[f64],
) -> (Tape, Var) {
    let mix = model.neighbors(adj, n).unwrap();
    let mut tape = Tape::new();
    let pred = model.forward(&mut tape, windows, batch, &mix).unwrap();
    let target = tape.constant(Tensor::matrix(batch, n, targets.to_vec()).unwrap());
    let loss = l1_loss(&mut tape, pred, target).unwrap();
    (tape, loss)
}

/// Central difference of `f` at `x`. When the one-sided slopes disagree, a
/// ReLU or L1 kink lies inside the probe interval and the derivative is
/// re-probed with a step 100 times smaller.
fn kink_aware_difference(f: &mut impl FnMut(f64) -> f64, x: f64) -> f64 {
    let h = FD_STEP;
    let (up, mid, down) = (f(x + h), f(x), f(x - h));
    let (fwd, bwd) = ((up - mid) / h, (mid - down) / h);
    if (fwd - bwd).abs() <= 1e-4 * fwd.abs().max(bwd.abs()).max(1e-3) {
        return (up - down) / (2.0 * h);
    }
    let h = h / 100.0;
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Worst relative error over all parameter tensors of the end-to-end loss.
pub fn model_gradient_error(seed: u64) -> f64 {
    let mut r = rng(1000 + seed);
    let (batch, n) = (3, 4);
    let config = small_config(seed);
    let mut model = CauGnnModel::new(config.clone(), seed).unwrap();
    let windows = uniform(&mut r, batch * n * config.window, -1.0, 1.0);
    // Targets far from any prediction keep the L1 kink out of the probe range.
    // Unequal signs keep the bias gradient away from an exact zero.
    let targets: Vec<f64> = (0..batch * n)
        .map(|i| if i % 3 == 0 { -10.0 } else { 10.0 })
        .collect();
    let adj = random_adjacency(&mut r, n, 0.4);

    model.params_mut().zero_grad();
    let (tape, loss) = model_loss(&model, &windows, batch, n, &targets, &adj);
    tape.backward_into(loss, model.params_mut()).unwrap();

    let ids: Vec<_> = model.params().ids().collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        let analytic = model.params().get(id).grad().unwrap().to_vec();
        let numeric: Vec<f64> = (0..analytic.len())
            .map(|e| {
                let base = model.params().get(id).data()[e];
                let mut probe = |x: f64| {
                    model.params_mut().get_mut(id).data_mut()[e] = x;
                    let (t, l) = model_loss(&model, &windows, batch, n, &targets, &adj);
                    t.value(l)[0]
                };
                let d = kink_aware_difference(&mut probe, base);
                model.params_mut().get_mut(id).data_mut()[e] = base;
                d
            })
            .collect();
        let err = rel_error(&analytic, &numeric);
        assert!(err.is_finite(), "{}: non-finite error", model.params().name(id));
        worst = worst.max(err);
    }
    worst
}

/// Cases checked and the largest `|estimator - oracle|` seen.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sweep {
    pub cases: usize,
    pub worst: f64,
}

impl Sweep {
    fn record(&mut self, source: &[usize], target: &[usize], radix: usize, k: usize, l: usize) {
        let fast = caugnn::causality::transfer_entropy(&series(source, radix), &series(target, radix), k, l)
            .unwrap();
        let slow = te_oracle(source, target, k, l);
        self.cases += 1;
        self.worst = self.worst.max((fast - slow).abs());
    }

    fn merge(self, other: Sweep) -> Sweep {
        Sweep {
            cases: self.cases + other.cases,
            worst: self.worst.max(other.worst),
        }
    }
}

/// Every ordered pair of `radix`-ary sequences for each length in `lens`,
/// under each `(k, l)` that fits the length.
pub fn te_sweep_pairs(radix: usize, lens: std::ops::RangeInclusive<usize>, histories: &[(usize, usize)]) -> Sweep {
    let mut s = Sweep::default();
    for len in lens {
        let count = radix.pow(len as u32);
        for a in 0..count {
            let x = sequence(a, len, radix);
            for b in 0..count {
                let y = sequence(b, len, radix);
                for &(k, l) in histories {
                    if len >= k.max(l) + 2 {
                        s.record(&x, &y, radix, k, l);
                    }
                }
            }
        }
    }
    s
}

/// Partners derived from `x`: itself, a one-step delay, the symbol-reversed
/// series, and a delayed sum modulo the radix.
fn partners(x: &[usize], radix: usize) -> Vec<Vec<usize>> {
    let len = x.len();
    let delayed: Vec<usize> = (0..len).map(|t| if t == 0 { 0 } else { x[t - 1] }).collect();
    let flipped: Vec<usize> = x.iter().map(|v| radix - 1 - v).collect();
    let mixed: Vec<usize> = (0..len).map(|t| (x[t] + delayed[t]) % radix).collect();
    vec![x.to_vec(), delayed, flipped, mixed]
}

/// Every `radix`-ary sequence of length `3..=max_len`, in both directions
/// against each derived partner.
pub fn te_sweep_singles(radix: usize, max_len: usize) -> Sweep {
    let mut s = Sweep::default();
    for len in 3..=max_len {
        for code in 0..radix.pow(len as u32) {
            let x = sequence(code, len, radix);
            for y in partners(&x, radix) {
                s.record(&x, &y, radix, 1, 1);
                s.record(&y, &x, radix, 1, 1);
            }
        }
    }
    s
}

/// 100 random pairs of length 20..3000 with 2..6 symbols and histories 1..3;
/// every other pair has the target copy the lagged source 70% of the time.
pub fn te_sweep_random(seed: u64) -> Sweep {
    let mut r = rng(seed);
    let mut s = Sweep::default();
    for case in 0..100 {
        let len = r.random_range(20..3000);
        let radix = r.random_range(2..7);
        let (k, l) = (r.random_range(1..4), r.random_range(1..4));
        let x: Vec<usize> = (0..len).map(|_| r.random_range(0..radix)).collect();
        let y: Vec<usize> = if case % 2 == 0 {
            (0..len).map(|_| r.random_range(0..radix)).collect()
        } else {
            (0..len)
                .map(|t| {
                    if t > 0 && r.random_bool(0.7) {
                        x[t - 1]
                    } else {
                        r.random_range(0..radix)
                    }
                })
                .collect()
        };
        s.record(&x, &y, radix, k, l);
        s.record(&y, &x, radix, k, l);
    }
    s
}

/// The full oracle comparison: exhaustive small pairs, exhaustive single
/// series up to length 12 with derived partners, and the random cases.
pub fn te_sweep_all() -> Sweep {
    te_sweep_pairs(2, 3..=6, &[(1, 1), (1, 2), (2, 1), (2, 2)])
        .merge(te_sweep_pairs(2, 7..=10, &[(1, 1)]))
        .merge(te_sweep_pairs(3, 3..=6, &[(1, 1)]))
        .merge(te_sweep_singles(2, 12))
        .merge(te_sweep_singles(3, 12))
        .merge(te_sweep_random(2024))
}

/// Largest `|layer - naive loop|` over `seeds` seeds, each covering every
/// node count `1..=8`, for `(kgnn_layer, gin_layer)`. Every other graph uses
/// the complete graph instead of the causality adjacency.
pub fn layer_oracle_worst(seeds: u64) -> (f64, f64, usize) {
    use caugnn::model::{gin_layer, kgnn_layer, neighbor_matrix, GinVars, NeighborMode};
    let (mut worst_k, mut worst_g, mut graphs) = (0.0f64, 0.0f64, 0);
    for seed in 0..seeds {
        let mut r = rng(7000 + seed);
        for n in 1..=8 {
            let batch = r.random_range(1..4);
            let (din, dmid, dout) = (r.random_range(1..6), r.random_range(1..6), r.random_range(1..6));
            let density = r.random_range(0.0..1.0);
            let adj = random_adjacency(&mut r, n, density);
            let use_causality = (seed + n as u64).is_multiple_of(2);
            let h = uniform(&mut r, batch * n * din, -1.0, 1.0);
            let ws = uniform(&mut r, din * dout, -1.0, 1.0);
            let wn = uniform(&mut r, din * dout, -1.0, 1.0);
            let eps = r.random_range(-0.5..0.5);
            let w1 = uniform(&mut r, din * dmid, -1.0, 1.0);
            let b1 = uniform(&mut r, dmid, -1.0, 1.0);
            let w2 = uniform(&mut r, dmid * dout, -1.0, 1.0);
            let b2 = uniform(&mut r, dout, -1.0, 1.0);

            let mut t = Tape::new();
            let mix = t.constant(neighbor_matrix(&adj, n, use_causality, NeighborMode::Causes).unwrap());
            let hv = t.constant(tensor(&[batch * n, din], h.clone()));
            let (wsv, wnv) = (t.constant(tensor(&[din, dout], ws.clone())), t.constant(tensor(&[din, dout], wn.clone())));
            let out = kgnn_layer(&mut t, hv, mix, wsv, wnv, true).unwrap();
            let naive = kgnn_naive(&h, batch, n, din, dout, &adj, use_causality, &ws, &wn);
            for (a, b) in t.value(out).iter().zip(&naive) {
                worst_k = worst_k.max((a - b).abs());
            }

            let p = GinVars {
                eps: t.constant(Tensor::scalar(eps)),
                w1: t.constant(tensor(&[din, dmid], w1.clone())),
                b1: t.constant(tensor(&[1, dmid], b1.clone())),
                w2: t.constant(tensor(&[dmid, dout], w2.clone())),
                b2: t.constant(tensor(&[1, dout], b2.clone())),
            };
            let out = gin_layer(&mut t, hv, mix, p).unwrap();
            let naive = gin_naive(&h, batch, n, din, dmid, dout, &adj, use_causality, eps, &w1, &b1, &w2, &b2);
            assert_eq!(t.value(out).len(), naive.len());
            for (a, b) in t.value(out).iter().zip(&naive) {
                worst_g = worst_g.max((a - b).abs());
            }
            graphs += 1;
        }
    }
    (worst_k, worst_g, graphs)
}
/// Named gradient checks: each maps a seed to the worst relative error
/// between tape gradients and central differences for one op.
pub type OpCase = (&'static str, Box<dyn Fn(u64) -> f64>);

pub fn op_cases() -> Vec<OpCase> {
    vec![
        ("add", Box::new(|s| {
            let mut r = rng(s);
            let (a, b) = (uniform(&mut r, 12, -2.0, 2.0), uniform(&mut r, 12, -2.0, 2.0));
            gradient_error(&[tensor(&[3, 4], a), tensor(&[3, 4], b)], s, |t, v| t.add(v[0], v[1]))
        })),
        ("sub", Box::new(|s| {
            let mut r = rng(s);
            let (a, b) = (uniform(&mut r, 6, -2.0, 2.0), uniform(&mut r, 6, -2.0, 2.0));
            gradient_error(&[tensor(&[6], a), tensor(&[6], b)], s, |t, v| t.sub(v[0], v[1]))
        })),
        ("mul", Box::new(|s| {
            let mut r = rng(s);
            let (a, b) = (uniform(&mut r, 10, -2.0, 2.0), uniform(&mut r, 10, -2.0, 2.0));
            gradient_error(&[tensor(&[2, 5], a), tensor(&[2, 5], b)], s, |t, v| t.mul(v[0], v[1]))
        })),
        ("mul scalar lhs", Box::new(|s| {
            let mut r = rng(s);
            let a = uniform(&mut r, 1, -2.0, 2.0);
            let b = uniform(&mut r, 8, -2.0, 2.0);
            gradient_error(&[tensor(&[1], a), tensor(&[4, 2], b)], s, |t, v| t.mul(v[0], v[1]))
        })),
        ("add scalar rhs", Box::new(|s| {
            let mut r = rng(s);
            let a = uniform(&mut r, 8, -2.0, 2.0);
            let b = uniform(&mut r, 1, -2.0, 2.0);
            gradient_error(&[tensor(&[8], a), Tensor::scalar(b[0])], s, |t, v| t.add(v[0], v[1]))
        })),
        ("sub scalar lhs", Box::new(|s| {
            let mut r = rng(s);
            let a = uniform(&mut r, 1, -2.0, 2.0);
            let b = uniform(&mut r, 6, -2.0, 2.0);
            gradient_error(&[Tensor::scalar(a[0]), tensor(&[2, 3], b)], s, |t, v| t.sub(v[0], v[1]))
        })),
        ("matmul", Box::new(|s| {
            let mut r = rng(s);
            let (m, k, n) = (r.random_range(1..6), r.random_range(1..6), r.random_range(1..6));
            let a = uniform(&mut r, m * k, -1.0, 1.0);
            let b = uniform(&mut r, k * n, -1.0, 1.0);
            gradient_error(&[tensor(&[m, k], a), tensor(&[k, n], b)], s, |t, v| t.matmul(v[0], v[1]))
        })),
        ("block_matmul", Box::new(|s| {
            let mut r = rng(s);
            let (n, b, c) = (r.random_range(1..5), r.random_range(1..4), r.random_range(1..5));
            let mix = uniform(&mut r, n * n, -1.0, 1.0);
            let x = uniform(&mut r, b * n * c, -1.0, 1.0);
            gradient_error(&[tensor(&[n, n], mix), tensor(&[b * n, c], x)], s, |t, v| {
                t.block_matmul(v[0], v[1])
            })
        })),
        ("conv1d 1-D", Box::new(|s| {
            let mut r = rng(s);
            let (len, k) = (r.random_range(3..12), r.random_range(1..4));
            let x = uniform(&mut r, len, -1.0, 1.0);
            let w = uniform(&mut r, k, -1.0, 1.0);
            let b = uniform(&mut r, 1, -1.0, 1.0);
            gradient_error(&[tensor(&[len], x), tensor(&[k], w), tensor(&[1], b)], s, |t, v| {
                t.conv1d(v[0], v[1], Some(v[2]))
            })
        })),
        ("conv1d batched", Box::new(|s| {
            let mut r = rng(s);
            let (rows, len, ch, k) = (
                r.random_range(1..4),
                r.random_range(4..10),
                r.random_range(1..4),
                r.random_range(1..4),
            );
            let x = uniform(&mut r, rows * len, -1.0, 1.0);
            let w = uniform(&mut r, ch * k, -1.0, 1.0);
            let b = uniform(&mut r, ch, -1.0, 1.0);
            gradient_error(
                &[tensor(&[rows, len], x), tensor(&[ch, k], w), tensor(&[ch], b)],
                s,
                |t, v| t.conv1d(v[0], v[1], Some(v[2])),
            )
        })),
        ("conv1d batched without bias", Box::new(|s| {
            let mut r = rng(s);
            let x = uniform(&mut r, 14, -1.0, 1.0);
            let w = uniform(&mut r, 6, -1.0, 1.0);
            gradient_error(&[tensor(&[2, 7], x), tensor(&[2, 3], w)], s, |t, v| t.conv1d(v[0], v[1], None))
        })),
        ("relu", Box::new(|s| {
            let x = away_from_zero(&mut rng(s), 15);
            gradient_error(&[tensor(&[3, 5], x)], s, |t, v| Ok(t.relu(v[0])))
        })),
        ("abs", Box::new(|s| {
            let x = away_from_zero(&mut rng(s), 15);
            gradient_error(&[tensor(&[15], x)], s, |t, v| Ok(t.abs(v[0])))
        })),
        ("sum", Box::new(|s| {
            let x = uniform(&mut rng(s), 9, -1.0, 1.0);
            gradient_error(&[tensor(&[3, 3], x)], s, |t, v| Ok(t.sum(v[0])))
        })),
        ("mean", Box::new(|s| {
            let x = uniform(&mut rng(s), 7, -1.0, 1.0);
            gradient_error(&[tensor(&[7], x)], s, |t, v| t.mean(v[0]))
        })),
        ("concat axis 0", Box::new(|s| {
            let mut r = rng(s);
            let a = uniform(&mut r, 6, -1.0, 1.0);
            let b = uniform(&mut r, 9, -1.0, 1.0);
            gradient_error(&[tensor(&[2, 3], a), tensor(&[3, 3], b)], s, |t, v| t.concat(&[v[0], v[1]], 0))
        })),
        ("concat axis 1", Box::new(|s| {
            let mut r = rng(s);
            let a = uniform(&mut r, 4, -1.0, 1.0);
            let b = uniform(&mut r, 6, -1.0, 1.0);
            let c = uniform(&mut r, 2, -1.0, 1.0);
            gradient_error(
                &[tensor(&[2, 2], a), tensor(&[2, 3], b), tensor(&[2, 1], c)],
                s,
                |t, v| t.concat(&[v[0], v[1], v[2]], 1),
            )
        })),
        ("reshape", Box::new(|s| {
            let x = uniform(&mut rng(s), 12, -1.0, 1.0);
            gradient_error(&[tensor(&[3, 4], x)], s, |t, v| t.reshape(v[0], &[2, 6]))
        })),
        // relu(A B + c) * A B, summed: every gradient path crosses several ops
        ("composite", Box::new(|s| {
            let mut r = rng(s);
            let a = uniform(&mut r, 6, -1.0, 1.0);
            let b = uniform(&mut r, 6, -1.0, 1.0);
            let c = uniform(&mut r, 1, -1.0, 1.0);
            gradient_error(&[tensor(&[2, 3], a), tensor(&[3, 2], b), tensor(&[1], c)], s, |t, v| {
                let ab = t.matmul(v[0], v[1])?;
                let z = t.add(ab, v[2])?;
                let z = t.relu(z);
                t.mul(z, ab)
            })
        })),
    ]
}
