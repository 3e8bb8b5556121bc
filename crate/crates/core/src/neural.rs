//! Reweighting network over ancilla bitstrings and the enumerable classical sampler.

use crate::error::{Result, VpsError};
use crate::statevec::Bitstring;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

/// Largest input width whose bitstrings are enumerated.
pub const MAX_INPUTS: usize = 12;

pub const DEFAULT_HIDDEN: [usize; 2] = [32, 32];

/// Fully connected tanh network g(a) followed by a softmax over all 2^n inputs.
/// Inputs are bits mapped to ±1 (0 → +1). Parameters are stored layer by layer,
/// each as a row-major weight matrix followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reweighter {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    bounded: bool,
    bound: f64,
}

struct Forward {
    /// Activations per layer, each `batch × width`.
    acts: Vec<Vec<f64>>,
    /// Pre-bound network output per input.
    raw: Vec<f64>,
}

impl Reweighter {
    /// Zero-initialized network with the given layer sizes (input first, output 1 last).
    pub fn new(layer_sizes: Vec<usize>, bounded: bool) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(VpsError::InvalidArgument(format!("bad layer sizes {layer_sizes:?}")));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(VpsError::InvalidArgument("network output width must be 1".into()));
        }
        if layer_sizes[0] > MAX_INPUTS {
            return Err(VpsError::Capacity {
                what: "reweighter inputs",
                size: layer_sizes[0],
                limit: MAX_INPUTS,
            });
        }
        let n = Self::count(&layer_sizes);
        Ok(Reweighter {
            layer_sizes,
            params: vec![0.0; n],
            bounded,
            bound: E,
        })
    }

    /// `[n_inputs, 32, 32, 1]`
    pub fn with_default_arch(n_inputs: usize, bounded: bool) -> Result<Self> {
        let mut sizes = vec![n_inputs];
        sizes.extend(DEFAULT_HIDDEN);
        sizes.push(1);
        Self::new(sizes, bounded)
    }

    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(VpsError::InvalidArgument(format!("bound {bound} must be positive")));
        }
        self.bound = bound;
        Ok(self)
    }

    fn count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }
    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }
    pub fn n_outcomes(&self) -> usize {
        1 << self.n_inputs()
    }
    pub fn n_weights(&self) -> usize {
        self.params.len()
    }
    pub fn weights(&self) -> &[f64] {
        &self.params
    }
    pub fn bounded(&self) -> bool {
        self.bounded
    }
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn set_weights(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.params.len() {
            return Err(VpsError::DimensionMismatch(w.len(), self.params.len()));
        }
        self.params.copy_from_slice(w);
        Ok(())
    }

    pub fn init_normal(&mut self, sigma: f64, rng: &mut impl Rng) -> Result<()> {
        let normal = Normal::new(0.0, sigma).map_err(|e| VpsError::InvalidArgument(e.to_string()))?;
        for p in &mut self.params {
            *p = normal.sample(rng);
        }
        Ok(())
    }

    fn inputs(&self) -> Vec<f64> {
        let n = self.n_inputs();
        let mut x = Vec::with_capacity(self.n_outcomes() * n);
        for a in 0..self.n_outcomes() {
            for j in 0..n {
                x.push(if (a >> (n - 1 - j)) & 1 == 0 { 1.0 } else { -1.0 });
            }
        }
        x
    }

    fn forward(&self, w: &[f64]) -> Forward {
        let batch = self.n_outcomes();
        let mut acts = vec![self.inputs()];
        let mut off = 0;
        let last = self.layer_sizes.len() - 2;
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            let (din, dout) = (pair[0], pair[1]);
            let wm = &w[off..off + din * dout];
            let bias = &w[off + din * dout..off + din * dout + dout];
            off += din * dout + dout;
            let prev = &acts[l];
            let mut out = vec![0.0; batch * dout];
            for b in 0..batch {
                let xin = &prev[b * din..(b + 1) * din];
                for o in 0..dout {
                    let row = &wm[o * din..(o + 1) * din];
                    let z: f64 = bias[o] + row.iter().zip(xin).map(|(a, c)| a * c).sum::<f64>();
                    out[b * dout + o] = if l == last { z } else { z.tanh() };
                }
            }
            acts.push(out);
        }
        let raw = acts.last().unwrap().clone();
        Forward { acts, raw }
    }

    fn squash(&self, raw: &[f64]) -> Vec<f64> {
        if self.bounded {
            raw.iter().map(|r| self.bound * r.tanh()).collect()
        } else {
            raw.to_vec()
        }
    }

    /// Pre-softmax values g(a) for weights `w`.
    pub fn logits_with(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.params.len() {
            return Err(VpsError::DimensionMismatch(w.len(), self.params.len()));
        }
        Ok(self.squash(&self.forward(w).raw))
    }

    pub fn logits(&self) -> Result<Vec<f64>> {
        self.logits_with(&self.params)
    }

    /// Softmax probabilities f(a) for weights `w`.
    pub fn probabilities_with(&self, w: &[f64]) -> Result<Vec<f64>> {
        let f = softmax(&self.logits_with(w)?);
        let total: f64 = f.iter().sum();
        if (total - 1.0).abs() > 1e-10 || f.iter().any(|&x| !(x > 0.0)) {
            return Err(VpsError::InvalidArgument(format!("reweighting lost normalization (sum {total})")));
        }
        Ok(f)
    }

    /// ∂L/∂w given ∂L/∂f(a) for every outcome a.
    pub fn backward_with(&self, w: &[f64], dl_df: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.params.len() {
            return Err(VpsError::DimensionMismatch(w.len(), self.params.len()));
        }
        if dl_df.len() != self.n_outcomes() {
            return Err(VpsError::DimensionMismatch(dl_df.len(), self.n_outcomes()));
        }
        let fw = self.forward(w);
        let f = softmax(&self.squash(&fw.raw));
        let mean: f64 = f.iter().zip(dl_df).map(|(a, b)| a * b).sum();
        // softmax, then the optional tanh bound
        let mut delta: Vec<f64> = f
            .iter()
            .zip(dl_df)
            .zip(&fw.raw)
            .map(|((fa, d), r)| {
                let dg = fa * (d - mean);
                if self.bounded {
                    let t = r.tanh();
                    dg * self.bound * (1.0 - t * t)
                } else {
                    dg
                }
            })
            .collect();

        let batch = self.n_outcomes();
        let mut grad = vec![0.0; w.len()];
        let mut offsets = Vec::new();
        let mut off = 0;
        for pair in self.layer_sizes.windows(2) {
            offsets.push(off);
            off += pair[0] * pair[1] + pair[1];
        }
        for l in (0..self.layer_sizes.len() - 1).rev() {
            let (din, dout) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = offsets[l];
            let prev = &fw.acts[l];
            for b in 0..batch {
                let xin = &prev[b * din..(b + 1) * din];
                for o in 0..dout {
                    let d = delta[b * dout + o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut grad[off + o * din..off + (o + 1) * din];
                    for (g, x) in row.iter_mut().zip(xin) {
                        *g += d * x;
                    }
                    grad[off + din * dout + o] += d;
                }
            }
            if l == 0 {
                break;
            }
            let wm = &w[off..off + din * dout];
            let mut next = vec![0.0; batch * din];
            for b in 0..batch {
                for o in 0..dout {
                    let d = delta[b * dout + o];
                    if d == 0.0 {
                        continue;
                    }
                    for i in 0..din {
                        next[b * din + i] += wm[o * din + i] * d;
                    }
                }
                for i in 0..din {
                    let h = prev[b * din + i];
                    next[b * din + i] *= 1.0 - h * h;
                }
            }
            delta = next;
        }
        Ok(grad)
    }

    pub fn checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint {
            layer_sizes: self.layer_sizes.clone(),
            bounded: self.bounded,
            bound: self.bound,
            weights: self.params.clone(),
        }
    }

    pub fn from_checkpoint(c: &NetworkCheckpoint) -> Result<Self> {
        let mut r = Reweighter::new(c.layer_sizes.clone(), c.bounded)?.with_bound(c.bound)?;
        r.set_weights(&c.weights)?;
        Ok(r)
    }
}

/// Flat weight array with its layer-size header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub layer_sizes: Vec<usize>,
    pub bounded: bool,
    pub bound: f64,
    pub weights: Vec<f64>,
}

pub fn softmax(g: &[f64]) -> Vec<f64> {
    let m = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = g.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// f(a) for every ancilla bitstring a.
pub fn reweight_all(r: &Reweighter) -> Result<Vec<f64>> {
    r.probabilities_with(r.weights())
}

/// −Σ P ln P with 0·ln 0 = 0.
pub fn classical_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalSamples {
    pub samples: Vec<Bitstring>,
    pub log_probs: Vec<f64>,
    /// Exact P(s) over all inputs.
    pub distribution: Vec<f64>,
    pub entropy: f64,
}

/// Draws `count` bitstrings from the softmax distribution of `model`.
pub fn classical_model_sample(model: &Reweighter, count: usize, seed: u64) -> Result<ClassicalSamples> {
    let p = reweight_all(model)?;
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &x in &p {
        acc += x;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = model.n_inputs();
    let mut samples = Vec::with_capacity(count);
    let mut log_probs = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(p.len() - 1);
        samples.push(Bitstring { index: idx, width });
        log_probs.push(p[idx].ln());
    }
    let entropy = classical_entropy(&p);
    Ok(ClassicalSamples {
        samples,
        log_probs,
        distribution: p,
        entropy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::finite_difference;

    fn random_net(n: usize, bounded: bool, seed: u64, sigma: f64) -> Reweighter {
        let mut r = Reweighter::new(vec![n, 5, 4, 1], bounded).unwrap();
        r.init_normal(sigma, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        r
    }

    #[test]
    fn zero_network_is_uniform() {
        let r = Reweighter::with_default_arch(4, false).unwrap();
        let f = reweight_all(&r).unwrap();
        assert!(f.iter().all(|&x| (x - 1.0 / 16.0).abs() < 1e-15));
        assert_eq!(r.n_weights(), 4 * 32 + 32 + 32 * 32 + 32 + 32 + 1);
    }

    #[test]
    fn bounded_ratio_cap() {
        let r = random_net(3, true, 1, 20.0);
        let g = r.logits().unwrap();
        assert!(g.iter().all(|x| x.abs() <= E));
        let f = reweight_all(&r).unwrap();
        let ratio = f.iter().copied().fold(0.0, f64::max) / f.iter().copied().fold(1.0, f64::min);
        assert!(ratio <= (2.0 * E).exp() + 1e-9);
        assert!(ratio > 1.0);
    }

    #[test]
    fn gradient_matches_fd() {
        for bounded in [false, true] {
            let r = random_net(3, bounded, 7, 0.7);
            let coeffs: Vec<f64> = (0..8).map(|k| (k as f64 * 0.37).sin()).collect();
            let loss = |w: &[f64]| -> Result<f64> {
                let f = r.probabilities_with(w)?;
                Ok(f.iter().zip(&coeffs).map(|(a, b)| a * b).sum::<f64>() + f.iter().map(|x| x * x).sum::<f64>())
            };
            let f = r.probabilities_with(r.weights()).unwrap();
            let dl_df: Vec<f64> = f.iter().zip(&coeffs).map(|(a, b)| b + 2.0 * a).collect();
            let g = r.backward_with(r.weights(), &dl_df).unwrap();
            let fd = finite_difference(loss, r.weights(), 1e-4).unwrap();
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-5f64.max(1e-4 * b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn entropy_limits() {
        let u = classical_model_sample(&Reweighter::with_default_arch(5, false).unwrap(), 10, 1).unwrap();
        assert!((u.entropy - 5.0 * 2f64.ln()).abs() < 1e-12);

        // Single-layer net w·x + b: only the 00 input saturates at +bound.
        let mut delta = Reweighter::new(vec![2, 1], true).unwrap().with_bound(60.0).unwrap();
        delta.set_weights(&[1e3, 1e3, -1e3]).unwrap();
        let d = classical_model_sample(&delta, 10, 1).unwrap();
        assert!(d.entropy < 1e-12);
        assert!(d.samples.iter().all(|s| s.index == 0));
    }

    #[test]
    fn entropy_matches_enumeration() {
        let r = random_net(4, false, 3, 1.0);
        let s = classical_model_sample(&r, 1000, 9).unwrap();
        let brute: f64 = (0..16)
            .map(|a| {
                let g = r.logits().unwrap();
                let z: f64 = g.iter().map(|x| x.exp()).sum();
                let p = g[a].exp() / z;
                -p * p.ln()
            })
            .sum();
        assert!((s.entropy - brute).abs() < 1e-10);
        for (b, lp) in s.samples.iter().zip(&s.log_probs) {
            assert!((lp - s.distribution[b.index].ln()).abs() < 1e-15);
        }
        assert_eq!(s, classical_model_sample(&r, 1000, 9).unwrap());
    }

    #[test]
    fn checkpoint_round_trip_and_caps() {
        let r = random_net(2, true, 5, 0.3);
        assert_eq!(Reweighter::from_checkpoint(&r.checkpoint()).unwrap(), r);
        assert!(matches!(Reweighter::with_default_arch(13, false), Err(VpsError::Capacity { .. })));
        assert!(Reweighter::new(vec![3, 2], false).is_err());
    }
}
