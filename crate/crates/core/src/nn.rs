//! Small dense-network toolkit shared by the tagger and the pair scorer:
//! named parameter tensors, AdamW, plateau scheduling, seeded
//! initialisation and a checkpoint container.

use std::io::{Read, Write};

use ndarray::{Array2, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, named parameter tensors. Gradients are plain `Vec<Array2<f64>>`
/// in the same order and shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Array2<f64>>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    /// Appends a tensor and returns its index.
    pub fn push(&mut self, name: impl Into<String>, tensor: Array2<f64>) -> usize {
        self.names.push(name.into());
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn zeros_like(&self) -> Vec<Array2<f64>> {
        self.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect()
    }

    pub fn n_values(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors.iter().map(|t| t.dim()).collect()
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

pub fn add_into(acc: &mut [Array2<f64>], other: &[Array2<f64>]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

pub fn scale(grads: &mut [Array2<f64>], factor: f64) {
    for g in grads {
        g.mapv_inplace(|v| v * factor);
    }
}

/// Glorot-uniform matrix.
pub fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

pub fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(params: &ParamSet, lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Array2<f64>]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, eps, lr, wd) = (self.beta1, self.beta2, self.eps, self.lr, self.weight_decay);
        for (((p, g), m), v) in params
            .tensors
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *p);
            });
        }
    }
}

/// Halves (by `factor`) the learning rate once the monitored score has not
/// improved for more than `patience` epochs. Higher scores are better.
#[derive(Debug, Clone)]
pub struct ReduceLrOnPlateau {
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
    best: f64,
    bad_epochs: usize,
}

impl ReduceLrOnPlateau {
    pub fn new(factor: f64, patience: usize) -> Self {
        ReduceLrOnPlateau {
            factor,
            patience,
            threshold: 1e-4,
            best: f64::NEG_INFINITY,
            bad_epochs: 0,
        }
    }

    /// Records a score and returns the (possibly reduced) learning rate.
    pub fn observe(&mut self, score: f64, lr: f64) -> f64 {
        if score > self.best * (1.0 + self.threshold) || self.best == f64::NEG_INFINITY {
            self.best = score;
            self.bad_epochs = 0;
            return lr;
        }
        self.bad_epochs += 1;
        if self.bad_epochs > self.patience {
            self.bad_epochs = 0;
            lr * self.factor
        } else {
            lr
        }
    }
}

/// Largest relative error between an analytic gradient and central
/// differences of `loss`. Entries whose analytic and numeric values are
/// both below `floor` in magnitude are compared against `floor` instead.
pub fn gradient_check(
    params: &mut ParamSet,
    analytic: &[Array2<f64>],
    h: f64,
    floor: f64,
    mut loss: impl FnMut(&ParamSet) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..params.tensors.len() {
        let (rows, cols) = params.tensors[k].dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = params.tensors[k][[r, c]];
                params.tensors[k][[r, c]] = orig + h;
                let up = loss(params);
                params.tensors[k][[r, c]] = orig - h;
                let down = loss(params);
                params.tensors[k][[r, c]] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[k][[r, c]];
                let denom = a.abs().max(numeric.abs()).max(floor);
                worst = worst.max((a - numeric).abs() / denom);
            }
        }
    }
    worst
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    Ok(buf)
}

/// Writes `magic`, a version, a JSON header, then every tensor as
/// `u32 rows, u32 cols` followed by f32 little-endian values.
pub fn write_checkpoint<H: Serialize>(
    out: &mut impl Write,
    magic: &[u8; 4],
    version: u32,
    header: &H,
    params: &ParamSet,
) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + json.len() + params.n_values() * 4);
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&version.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.names.iter().zip(&params.tensors) {
        let name = name.as_bytes();
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name);
        buf.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        buf.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
        for v in t.iter() {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn read_checkpoint<H: for<'de> Deserialize<'de>>(
    input: &mut impl Read,
    magic: &[u8; 4],
    version: u32,
) -> Result<(H, ParamSet)> {
    let got: [u8; 4] = read_exact(input)?;
    if &got != magic {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let v = u32::from_le_bytes(read_exact(input)?);
    if v != version {
        return Err(Error::Checkpoint(format!("unsupported version {v}")));
    }
    let len = u32::from_le_bytes(read_exact(input)?) as usize;
    let mut json = vec![0u8; len];
    input
        .read_exact(&mut json)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    let header: H = serde_json::from_slice(&json).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let n = u32::from_le_bytes(read_exact(input)?) as usize;
    let mut params = ParamSet::new();
    for _ in 0..n {
        let name_len = u32::from_le_bytes(read_exact(input)?) as usize;
        let mut name = vec![0u8; name_len];
        input
            .read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
        let name = String::from_utf8(name).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let rows = u32::from_le_bytes(read_exact(input)?) as usize;
        let cols = u32::from_le_bytes(read_exact(input)?) as usize;
        let mut raw = vec![0u8; rows * cols * 4];
        input
            .read_exact(&mut raw)
            .map_err(|e| Error::Checkpoint(format!("truncated tensor {name}: {e}")))?;
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let t = Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Checkpoint(e.to_string()))?;
        params.push(name, t);
    }
    let mut rest = Vec::new();
    input
        .read_to_end(&mut rest)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Ok((header, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn adamw_minimises_a_quadratic() {
        let mut p = ParamSet::new();
        p.push("x", Array2::from_elem((1, 2), 3.0));
        let mut opt = AdamW::new(&p, 0.1, 0.0);
        for _ in 0..500 {
            let g = vec![p.tensors[0].mapv(|v| 2.0 * (v - 1.0))];
            opt.step(&mut p, &g);
        }
        assert!(p.tensors[0].iter().all(|v| (v - 1.0).abs() < 1e-3));
    }

    #[test]
    fn weight_decay_is_decoupled() {
        let mut p = ParamSet::new();
        p.push("x", Array2::from_elem((1, 1), 2.0));
        let mut opt = AdamW::new(&p, 0.1, 0.5);
        opt.step(&mut p, &[Array2::zeros((1, 1))]);
        // zero gradient: only the decay term moves the parameter
        assert!((p.tensors[0][[0, 0]] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn plateau_halves_after_patience() {
        let mut s = ReduceLrOnPlateau::new(0.5, 2);
        let mut lr = 1.0;
        for score in [0.5, 0.5, 0.5] {
            lr = s.observe(score, lr);
        }
        assert_eq!(lr, 1.0);
        lr = s.observe(0.5, lr);
        assert_eq!(lr, 0.5);
        lr = s.observe(0.9, lr);
        assert_eq!(lr, 0.5);
    }

    #[test]
    fn checkpoint_round_trip_quantises_to_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = ParamSet::new();
        p.push("w", glorot(3, 4, &mut rng));
        p.push("b", Array2::zeros((1, 4)));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, b"TEST", 1, &"hdr", &p).unwrap();
        let (h, q): (String, ParamSet) = read_checkpoint(&mut buf.as_slice(), b"TEST", 1).unwrap();
        assert_eq!(h, "hdr");
        assert_eq!(q.names, p.names);
        for (a, b) in p.tensors.iter().zip(&q.tensors) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        assert!(read_checkpoint::<String>(&mut &buf[..buf.len() - 1], b"TEST", 1).is_err());
        assert!(read_checkpoint::<String>(&mut buf.as_slice(), b"NOPE", 1).is_err());
    }

    #[test]
    fn gradient_check_of_a_known_function() {
        let mut p = ParamSet::new();
        p.push("x", Array2::from_shape_vec((1, 2), vec![0.3, -1.2]).unwrap());
        let grad = vec![p.tensors[0].mapv(|v| 3.0 * v * v)];
        let err = gradient_check(&mut p, &grad, 1e-5, 1e-8, |p| p.tensors[0].iter().map(|v| v.powi(3)).sum());
        assert!(err < 1e-8, "{err}");
    }
}
