//! Sequence encoders mapping `n x input_dim` to `n x 2·hidden`.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{glorot, sigmoid, ParamSet};

/// Contract shared by the encoders: parameters live in a caller-owned
/// slice (so optimisers and checkpoints see one flat list) and the forward
/// pass returns whatever the backward pass needs.
pub trait SequenceEncoder {
    type Cache;

    fn output_dim(&self) -> usize;

    /// Pushes freshly initialised tensors, returning how many were added.
    fn init_params(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> usize;

    fn forward(&self, params: &[Array2<f64>], x: ArrayView2<f64>) -> (Array2<f64>, Self::Cache);

    /// Gradient with respect to the input, and to each parameter tensor.
    fn backward(
        &self,
        params: &[Array2<f64>],
        cache: &Self::Cache,
        d_out: ArrayView2<f64>,
    ) -> (Array2<f64>, Vec<Array2<f64>>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderKind {
    /// `tanh(Σ_k x[t+k] W_k + b)` for `k` in `-window..=window`.
    Mixer { window: usize },
    BiLstm,
}

/// Rows of `x` shifted by `k`: row `t` holds `x[t + k]`, zero outside.
fn shifted(x: ArrayView2<f64>, k: isize) -> Array2<f64> {
    let n = x.nrows() as isize;
    let mut out = Array2::zeros(x.raw_dim());
    let lo = (-k).max(0);
    let hi = (n - k).min(n);
    if lo < hi {
        out.slice_mut(s![lo..hi, ..])
            .assign(&x.slice(s![lo + k..hi + k, ..]));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedMixer {
    pub input_dim: usize,
    pub hidden: usize,
    pub window: usize,
}

pub struct MixerCache {
    x: Array2<f64>,
    out: Array2<f64>,
}

impl SequenceEncoder for WindowedMixer {
    type Cache = MixerCache;

    fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    fn init_params(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> usize {
        let taps = 2 * self.window + 1;
        for k in 0..taps {
            params.push(format!("mixer.w{k}"), glorot(self.input_dim, self.output_dim(), rng));
        }
        params.push("mixer.b", Array2::zeros((1, self.output_dim())));
        taps + 1
    }

    fn forward(&self, p: &[Array2<f64>], x: ArrayView2<f64>) -> (Array2<f64>, MixerCache) {
        let w = self.window as isize;
        let mut z = Array2::zeros((x.nrows(), self.output_dim()));
        for (k, off) in (-w..=w).enumerate() {
            z += &shifted(x, off).dot(&p[k]);
        }
        z += &p[2 * self.window + 1];
        let out = z.mapv(f64::tanh);
        (
            out.clone(),
            MixerCache {
                x: x.to_owned(),
                out,
            },
        )
    }

    fn backward(&self, p: &[Array2<f64>], cache: &MixerCache, d_out: ArrayView2<f64>) -> (Array2<f64>, Vec<Array2<f64>>) {
        let w = self.window as isize;
        let dz = &d_out * &cache.out.mapv(|o| 1.0 - o * o);
        let mut grads = Vec::with_capacity(2 * self.window + 2);
        let mut dx = Array2::zeros(cache.x.raw_dim());
        for (k, off) in (-w..=w).enumerate() {
            grads.push(shifted(cache.x.view(), off).t().dot(&dz));
            dx += &shifted(dz.dot(&p[k].t()).view(), -off);
        }
        grads.push(dz.sum_axis(Axis(0)).insert_axis(Axis(0)));
        (dx, grads)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub input_dim: usize,
    pub hidden: usize,
}

struct StepCache {
    t: usize,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    c: Array2<f64>,
    c_prev: Array2<f64>,
    h_prev: Array2<f64>,
}

pub struct LstmCache {
    x: Array2<f64>,
    forward: Vec<StepCache>,
    backward: Vec<StepCache>,
}

impl BiLstm {
    fn run(&self, w: &Array2<f64>, u: &Array2<f64>, b: &Array2<f64>, x: ArrayView2<f64>, order: impl Iterator<Item = usize>, out: &mut Array2<f64>, col: usize) -> Vec<StepCache> {
        let h = self.hidden;
        let mut h_prev = Array2::zeros((1, h));
        let mut c_prev = Array2::zeros((1, h));
        let mut steps = Vec::new();
        for t in order {
            let z = x.slice(s![t..t + 1, ..]).dot(w) + h_prev.dot(u) + b;
            let i = z.slice(s![.., 0..h]).mapv(sigmoid);
            let f = z.slice(s![.., h..2 * h]).mapv(sigmoid);
            let g = z.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh);
            let o = z.slice(s![.., 3 * h..4 * h]).mapv(sigmoid);
            let c = &f * &c_prev + &i * &g;
            let hh = &o * &c.mapv(f64::tanh);
            out.slice_mut(s![t..t + 1, col..col + h]).assign(&hh);
            steps.push(StepCache {
                t,
                i,
                f,
                g,
                o,
                c: c.clone(),
                c_prev,
                h_prev,
            });
            h_prev = hh;
            c_prev = c;
        }
        steps
    }

    fn back(&self, w: &Array2<f64>, u: &Array2<f64>, x: &Array2<f64>, steps: &[StepCache], d_out: ArrayView2<f64>, col: usize, dx: &mut Array2<f64>) -> Vec<Array2<f64>> {
        let h = self.hidden;
        let mut dw = Array2::zeros(w.raw_dim());
        let mut du = Array2::zeros(u.raw_dim());
        let mut db = Array2::zeros((1, 4 * h));
        let mut dh_next = Array2::<f64>::zeros((1, h));
        let mut dc_next = Array2::<f64>::zeros((1, h));
        for st in steps.iter().rev() {
            let dh = &d_out.slice(s![st.t..st.t + 1, col..col + h]) + &dh_next;
            let tc = st.c.mapv(f64::tanh);
            let d_o = &dh * &tc;
            let dc = &dh * &st.o * &tc.mapv(|v| 1.0 - v * v) + &dc_next;
            let d_i = &dc * &st.g;
            let d_g = &dc * &st.i;
            let d_f = &dc * &st.c_prev;
            dc_next = &dc * &st.f;
            let mut dz = Array2::zeros((1, 4 * h));
            dz.slice_mut(s![.., 0..h]).assign(&(&d_i * &st.i.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![.., h..2 * h]).assign(&(&d_f * &st.f.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![.., 2 * h..3 * h]).assign(&(&d_g * &st.g.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![.., 3 * h..4 * h]).assign(&(&d_o * &st.o.mapv(|v| v * (1.0 - v))));
            dw += &x.slice(s![st.t..st.t + 1, ..]).t().dot(&dz);
            du += &st.h_prev.t().dot(&dz);
            db += &dz;
            let mut row = dx.slice_mut(s![st.t..st.t + 1, ..]);
            row += &dz.dot(&w.t());
            dh_next = dz.dot(&u.t());
        }
        vec![dw, du, db]
    }
}

impl SequenceEncoder for BiLstm {
    type Cache = LstmCache;

    fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    fn init_params(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> usize {
        let h = self.hidden;
        for dir in ["fwd", "bwd"] {
            params.push(format!("lstm.{dir}.w"), glorot(self.input_dim, 4 * h, rng));
            params.push(format!("lstm.{dir}.u"), glorot(h, 4 * h, rng));
            let mut b = Array2::zeros((1, 4 * h));
            // forget gate starts open
            b.slice_mut(s![.., h..2 * h]).fill(1.0);
            params.push(format!("lstm.{dir}.b"), b);
        }
        6
    }

    fn forward(&self, p: &[Array2<f64>], x: ArrayView2<f64>) -> (Array2<f64>, LstmCache) {
        let n = x.nrows();
        let mut out = Array2::zeros((n, 2 * self.hidden));
        let fwd = self.run(&p[0], &p[1], &p[2], x, 0..n, &mut out, 0);
        let bwd = self.run(&p[3], &p[4], &p[5], x, (0..n).rev(), &mut out, self.hidden);
        (
            out,
            LstmCache {
                x: x.to_owned(),
                forward: fwd,
                backward: bwd,
            },
        )
    }

    fn backward(&self, p: &[Array2<f64>], cache: &LstmCache, d_out: ArrayView2<f64>) -> (Array2<f64>, Vec<Array2<f64>>) {
        let mut dx = Array2::zeros(cache.x.raw_dim());
        let mut grads = self.back(&p[0], &p[1], &cache.x, &cache.forward, d_out, 0, &mut dx);
        grads.extend(self.back(&p[3], &p[4], &cache.x, &cache.backward, d_out, self.hidden, &mut dx));
        (dx, grads)
    }
}

/// Either encoder behind one type.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Mixer(WindowedMixer),
    BiLstm(BiLstm),
}

pub enum EncoderCache {
    Mixer(MixerCache),
    BiLstm(LstmCache),
}

impl Encoder {
    pub fn new(kind: EncoderKind, input_dim: usize, hidden: usize) -> Self {
        match kind {
            EncoderKind::Mixer { window } => Encoder::Mixer(WindowedMixer {
                input_dim,
                hidden,
                window,
            }),
            EncoderKind::BiLstm => Encoder::BiLstm(BiLstm { input_dim, hidden }),
        }
    }
}

impl SequenceEncoder for Encoder {
    type Cache = EncoderCache;

    fn output_dim(&self) -> usize {
        match self {
            Encoder::Mixer(m) => m.output_dim(),
            Encoder::BiLstm(l) => l.output_dim(),
        }
    }

    fn init_params(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> usize {
        match self {
            Encoder::Mixer(m) => m.init_params(params, rng),
            Encoder::BiLstm(l) => l.init_params(params, rng),
        }
    }

    fn forward(&self, p: &[Array2<f64>], x: ArrayView2<f64>) -> (Array2<f64>, EncoderCache) {
        match self {
            Encoder::Mixer(m) => {
                let (o, c) = m.forward(p, x);
                (o, EncoderCache::Mixer(c))
            }
            Encoder::BiLstm(l) => {
                let (o, c) = l.forward(p, x);
                (o, EncoderCache::BiLstm(c))
            }
        }
    }

    fn backward(&self, p: &[Array2<f64>], cache: &EncoderCache, d_out: ArrayView2<f64>) -> (Array2<f64>, Vec<Array2<f64>>) {
        match (self, cache) {
            (Encoder::Mixer(m), EncoderCache::Mixer(c)) => m.backward(p, c, d_out),
            (Encoder::BiLstm(l), EncoderCache::BiLstm(c)) => l.backward(p, c, d_out),
            _ => unreachable!("cache produced by a different encoder"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use rand::{Rng, SeedableRng};

    /// Loss = Σ out ⊙ R for a fixed random R, so d_out = R.
    fn check(enc: Encoder, n: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut params = ParamSet::new();
        enc.init_params(&mut params, &mut rng);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let r = Array2::from_shape_fn((n, enc.output_dim()), |_| rng.random_range(-1.0..1.0));
        let (_, cache) = enc.forward(&params.tensors, x.view());
        let (dx, grads) = enc.backward(&params.tensors, &cache, r.view());
        let loss = |p: &ParamSet, x: &Array2<f64>| (enc.forward(&p.tensors, x.view()).0 * &r).sum();
        let err = gradient_check(&mut params.clone(), &grads, 1e-5, 1e-7, |p| loss(p, &x));
        assert!(err < 1e-6, "parameter gradient error {err}");
        // input gradient
        let h = 1e-5;
        for idx in [(0, 0), (n - 1, 2), (n / 2, 1)] {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[idx] += h;
            down[idx] -= h;
            let num = (loss(&params, &up) - loss(&params, &down)) / (2.0 * h);
            assert!((num - dx[idx]).abs() < 1e-7, "{num} vs {}", dx[idx]);
        }
    }

    #[test]
    fn mixer_gradients() {
        check(Encoder::new(EncoderKind::Mixer { window: 1 }, 3, 2), 4);
        check(Encoder::new(EncoderKind::Mixer { window: 2 }, 3, 2), 3);
    }

    #[test]
    fn lstm_gradients() {
        check(Encoder::new(EncoderKind::BiLstm, 3, 2), 4);
    }

    #[test]
    fn output_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in [EncoderKind::Mixer { window: 1 }, EncoderKind::BiLstm] {
            let enc = Encoder::new(kind, 5, 3);
            let mut p = ParamSet::new();
            enc.init_params(&mut p, &mut rng);
            let (out, _) = enc.forward(&p.tensors, Array2::zeros((7, 5)).view());
            assert_eq!(out.dim(), (7, 6));
            let (out, _) = enc.forward(&p.tensors, Array2::zeros((0, 5)).view());
            assert_eq!(out.dim(), (0, 6));
        }
    }
}
