//! Fully connected classifier: logistic hidden layers, softmax applied to a
//! logistic output layer, cross-entropy loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::objective::Objective;

/// Probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Observations per parallel work unit. Chunk sums are reduced in order, so
/// results do not depend on the thread count.
const CHUNK: usize = 64;

/// Layer sizes `[d, h₁, …, K]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    sizes: Vec<usize>,
    /// Offset of `W_ℓ` in the flat vector; `b_ℓ` follows it directly.
    offsets: Vec<usize>,
    dim: usize,
}

/// Borrowed view of one layer inside a flat parameter vector.
pub struct LayerView<'a> {
    pub w: &'a [f64],
    pub b: &'a [f64],
    pub fan_in: usize,
    pub fan_out: usize,
}

impl NetworkSpec {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "need at least two positive layer sizes, got {sizes:?}"
            )));
        }
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut dim = 0;
        for pair in sizes.windows(2) {
            offsets.push(dim);
            dim += pair[1] * pair[0] + pair[1];
        }
        Ok(Self { sizes: sizes.to_vec(), offsets, dim })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of parameters `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.offsets.len()
    }

    /// Layer `l` (0-based) of `w`.
    pub fn layer<'a>(&self, w: &'a [f64], l: usize) -> LayerView<'a> {
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        let start = self.offsets[l];
        let mid = start + fan_in * fan_out;
        LayerView {
            w: &w[start..mid],
            b: &w[mid..mid + fan_out],
            fan_in,
            fan_out,
        }
    }

    /// Splits `w` into `(W_ℓ, b_ℓ)` blocks, `W_ℓ` row-major.
    pub fn unflatten(&self, w: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.check_dim(w)?;
        Ok((0..self.n_layers())
            .map(|l| {
                let v = self.layer(w, l);
                (v.w.to_vec(), v.b.to_vec())
            })
            .collect())
    }

    pub fn flatten(&self, layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<f64>> {
        if layers.len() != self.n_layers() {
            return Err(Error::InvalidArgument("wrong number of layers".into()));
        }
        let mut w = Vec::with_capacity(self.dim);
        for (l, (wl, bl)) in layers.iter().enumerate() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            if wl.len() != fan_in * fan_out || bl.len() != fan_out {
                return Err(Error::InvalidArgument(format!("layer {l} has the wrong shape")));
            }
            w.extend_from_slice(wl);
            w.extend_from_slice(bl);
        }
        Ok(w)
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has length {}, network needs {}",
                w.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Softmax with max-subtraction, in place.
fn softmax(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

/// Activations `a₀ = x, a₁, …, a_L` of one forward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    pub activations: Vec<Vec<f64>>,
}

fn forward_into(spec: &NetworkSpec, w: &[f64], x: &[f64], cache: &mut ForwardCache, probs: &mut Vec<f64>) {
    let layers = spec.n_layers();
    cache.activations.resize_with(layers + 1, Vec::new);
    cache.activations[0].clear();
    cache.activations[0].extend_from_slice(x);
    for l in 0..layers {
        let v = spec.layer(w, l);
        let (prev, rest) = cache.activations.split_at_mut(l + 1);
        let a_in = &prev[l];
        let a_out = &mut rest[0];
        a_out.clear();
        a_out.extend(v.w.chunks_exact(v.fan_in).zip(v.b).map(|(row, b)| {
            let z = row.iter().zip(a_in).fold(*b, |acc, (wij, aj)| acc + wij * aj);
            logistic(z)
        }));
    }
    probs.clear();
    probs.extend_from_slice(&cache.activations[layers]);
    softmax(probs);
}

/// Class probabilities for one input, plus the activations for backprop.
pub fn forward(spec: &NetworkSpec, w: &[f64], x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    spec.check_dim(w)?;
    if x.len() != spec.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "input has length {}, network expects {}",
            x.len(),
            spec.input_dim()
        )));
    }
    let mut cache = ForwardCache::default();
    let mut probs = Vec::new();
    forward_into(spec, w, x, &mut cache, &mut probs);
    Ok((probs, cache))
}

/// `−Σ_k y_k log max(p_k, PROB_FLOOR)`.
fn cross_entropy(probs: &[f64], y: &[f64]) -> f64 {
    -probs
        .iter()
        .zip(y)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| t * p.max(PROB_FLOOR).ln())
        .sum::<f64>()
}

/// Scratch buffers reused across observations.
#[derive(Default)]
struct Workspace {
    cache: ForwardCache,
    probs: Vec<f64>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

/// Adds `∇f_i` to `grad` and returns `f_i`.
fn accumulate(spec: &NetworkSpec, w: &[f64], x: &[f64], y: &[f64], ws: &mut Workspace, grad: &mut [f64]) -> f64 {
    forward_into(spec, w, x, &mut ws.cache, &mut ws.probs);
    let loss = cross_entropy(&ws.probs, y);
    let layers = spec.n_layers();
    let y_sum: f64 = y.iter().sum();

    // Through the softmax, then the output logistic: (p·Σy − y) ⊙ a(1 − a).
    let a_out = &ws.cache.activations[layers];
    ws.delta.clear();
    ws.delta.extend(
        ws.probs
            .iter()
            .zip(y)
            .zip(a_out)
            .map(|((p, t), a)| (p * y_sum - t) * a * (1.0 - a)),
    );
    for l in (0..layers).rev() {
        let v = spec.layer(w, l);
        let a_in = &ws.cache.activations[l];
        let start = spec.offsets[l];
        let (gw, gb) = grad[start..start + v.fan_out * (v.fan_in + 1)].split_at_mut(v.fan_out * v.fan_in);
        for (i, &d) in ws.delta.iter().enumerate() {
            gb[i] += d;
            for (g, a) in gw[i * v.fan_in..(i + 1) * v.fan_in].iter_mut().zip(a_in) {
                *g += d * a;
            }
        }
        if l > 0 {
            ws.delta_prev.clear();
            ws.delta_prev.resize(v.fan_in, 0.0);
            for (row, &d) in v.w.chunks_exact(v.fan_in).zip(&ws.delta) {
                for (dp, wij) in ws.delta_prev.iter_mut().zip(row) {
                    *dp += wij * d;
                }
            }
            for (dp, a) in ws.delta_prev.iter_mut().zip(a_in) {
                *dp *= a * (1.0 - a);
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
    }
    loss
}

/// Mean loss and gradient over `(x_i, y_i)` pairs, accumulated in order.
pub fn loss_and_grad(spec: &NetworkSpec, w: &[f64], batch: &[(&[f64], &[f64])]) -> Result<(f64, Vec<f64>)> {
    spec.check_dim(w)?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut ws = Workspace::default();
    let mut grad = vec![0.0; spec.dim()];
    let mut loss = 0.0;
    for (x, y) in batch {
        if x.len() != spec.input_dim() || y.len() != spec.classes() {
            return Err(Error::InvalidArgument("observation has the wrong shape".into()));
        }
        loss += accumulate(spec, w, x, y, &mut ws, &mut grad);
    }
    let scale = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// Glorot-uniform weights and zero biases.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; spec.dim()];
    for l in 0..spec.n_layers() {
        let (fan_in, fan_out) = (spec.sizes[l], spec.sizes[l + 1]);
        let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let start = spec.offsets[l];
        for x in &mut w[start..start + fan_in * fan_out] {
            *x = rng.random_range(-r..=r);
        }
    }
    w
}

/// Empirical cross-entropy risk of a network on a dataset.
pub struct Classifier<'a> {
    spec: NetworkSpec,
    data: &'a Dataset,
}

impl<'a> Classifier<'a> {
    pub fn new(spec: NetworkSpec, data: &'a Dataset) -> Result<Self> {
        if spec.input_dim() != data.d || spec.classes() != data.k {
            return Err(Error::InvalidArgument(format!(
                "network {:?} does not fit data with d = {}, K = {}",
                spec.sizes, data.d, data.k
            )));
        }
        if data.n == 0 {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Fraction of observations whose most probable class is the labelled one.
    pub fn accuracy(&self, w: &[f64]) -> f64 {
        let correct: usize = (0..self.data.n)
            .into_par_iter()
            .with_min_len(CHUNK)
            .map_init(Workspace::default, |ws, i| {
                forward_into(&self.spec, w, self.data.image(i), &mut ws.cache, &mut ws.probs);
                let best = ws
                    .probs
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (k, &p)| if p > acc.1 { (k, p) } else { acc });
                usize::from(best.0 == self.data.class(i))
            })
            .sum();
        correct as f64 / self.data.n as f64
    }

    fn eval(&self, w: &[f64], batch: &[usize], with_grad: bool) -> (f64, Vec<f64>) {
        assert_eq!(w.len(), self.spec.dim(), "parameter vector has the wrong length");
        assert!(!batch.is_empty(), "empty batch");
        let m = if with_grad { self.spec.dim() } else { 0 };
        let partials: Vec<(f64, Vec<f64>)> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut ws = Workspace::default();
                let mut grad = vec![0.0; m];
                let mut loss = 0.0;
                for &i in chunk {
                    let (x, y) = (self.data.image(i), self.data.label(i));
                    loss += if with_grad {
                        accumulate(&self.spec, w, x, y, &mut ws, &mut grad)
                    } else {
                        forward_into(&self.spec, w, x, &mut ws.cache, &mut ws.probs);
                        cross_entropy(&ws.probs, y)
                    };
                }
                (loss, grad)
            })
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; m];
        for (l, g) in partials {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (loss * scale, grad)
    }

    fn all(&self) -> Vec<usize> {
        (0..self.data.n).collect()
    }
}

impl Objective for Classifier<'_> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn n_obs(&self) -> usize {
        self.data.n
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.eval(w, &self.all(), false).0
    }

    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        self.eval(w, &self.all(), true)
    }

    fn batch_value(&self, w: &[f64], batch: &[usize]) -> f64 {
        self.eval(w, batch, false).0
    }

    fn batch_value_and_gradient(&self, w: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        self.eval(w, batch, true)
    }
}
