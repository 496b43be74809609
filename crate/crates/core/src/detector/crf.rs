//! Linear-chain CRF over `L` labels with explicit start and stop states.
//!
//! Transition matrices are `(L + 2) x (L + 2)`, indexed `[from, to]`, with
//! row `L` the start state and column `L + 1` the stop state.

use ndarray::{Array2, ArrayView2};

use super::bioes::{Label, N_LABELS};

pub const START: usize = N_LABELS;
pub const STOP: usize = N_LABELS + 1;
pub const N_STATES: usize = N_LABELS + 2;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Score of one label path: start, emissions, transitions and stop.
pub fn path_score(emissions: ArrayView2<f64>, transitions: ArrayView2<f64>, path: &[usize]) -> f64 {
    let l = emissions.ncols();
    let (start, stop) = (l, l + 1);
    if path.is_empty() {
        return 0.0;
    }
    let mut s = transitions[[start, path[0]]] + emissions[[0, path[0]]];
    for t in 1..path.len() {
        s += transitions[[path[t - 1], path[t]]] + emissions[[t, path[t]]];
    }
    s + transitions[[path[path.len() - 1], stop]]
}

/// Best path and its score. Ties go to the lowest label index.
pub fn viterbi(emissions: ArrayView2<f64>, transitions: ArrayView2<f64>) -> (Vec<usize>, f64) {
    let (n, l) = emissions.dim();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let (start, stop) = (l, l + 1);
    let mut score: Vec<f64> = (0..l)
        .map(|j| transitions[[start, j]] + emissions[[0, j]])
        .collect();
    let mut back = vec![vec![0usize; l]; n];
    for t in 1..n {
        let mut next = vec![f64::NEG_INFINITY; l];
        for j in 0..l {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (i, &si) in score.iter().enumerate() {
                let v = si + transitions[[i, j]];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + emissions[[t, j]];
            back[t][j] = arg;
        }
        score = next;
    }
    let mut best = f64::NEG_INFINITY;
    let mut last = 0;
    for (j, &s) in score.iter().enumerate() {
        let v = s + transitions[[j, stop]];
        if v > best {
            best = v;
            last = j;
        }
    }
    let mut path = vec![last; n];
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    (path, best)
}

#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub log_z: f64,
    /// Posterior marginal of each label at each token, `n x L`.
    pub marginals: Array2<f64>,
    /// Expected transition counts, `(L + 2) x (L + 2)`.
    pub expected_transitions: Array2<f64>,
}

pub fn forward_backward(emissions: ArrayView2<f64>, transitions: ArrayView2<f64>) -> ForwardBackward {
    let (n, l) = emissions.dim();
    let (start, stop) = (l, l + 1);
    let mut expected = Array2::zeros((l + 2, l + 2));
    if n == 0 {
        expected[[start, stop]] = 1.0;
        return ForwardBackward {
            log_z: transitions[[start, stop]],
            marginals: Array2::zeros((0, l)),
            expected_transitions: expected,
        };
    }
    let mut alpha = Array2::from_elem((n, l), f64::NEG_INFINITY);
    for j in 0..l {
        alpha[[0, j]] = transitions[[start, j]] + emissions[[0, j]];
    }
    for t in 1..n {
        for j in 0..l {
            alpha[[t, j]] = log_sum_exp((0..l).map(|i| alpha[[t - 1, i]] + transitions[[i, j]]))
                + emissions[[t, j]];
        }
    }
    let mut beta = Array2::from_elem((n, l), f64::NEG_INFINITY);
    for i in 0..l {
        beta[[n - 1, i]] = transitions[[i, stop]];
    }
    for t in (0..n - 1).rev() {
        for i in 0..l {
            beta[[t, i]] = log_sum_exp(
                (0..l).map(|j| transitions[[i, j]] + emissions[[t + 1, j]] + beta[[t + 1, j]]),
            );
        }
    }
    let log_z = log_sum_exp((0..l).map(|j| alpha[[n - 1, j]] + transitions[[j, stop]]));
    let marginals = Array2::from_shape_fn((n, l), |(t, j)| (alpha[[t, j]] + beta[[t, j]] - log_z).exp());
    for j in 0..l {
        expected[[start, j]] = marginals[[0, j]];
        expected[[j, stop]] = marginals[[n - 1, j]];
    }
    for t in 1..n {
        for i in 0..l {
            if alpha[[t - 1, i]] == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..l {
                let lp = alpha[[t - 1, i]] + transitions[[i, j]] + emissions[[t, j]] + beta[[t, j]] - log_z;
                expected[[i, j]] += lp.exp();
            }
        }
    }
    ForwardBackward {
        log_z,
        marginals,
        expected_transitions: expected,
    }
}

/// Negative log-likelihood of `gold` and its gradients with respect to the
/// emissions and the transitions.
pub fn nll_with_grad(
    emissions: ArrayView2<f64>,
    transitions: ArrayView2<f64>,
    gold: &[usize],
) -> (f64, Array2<f64>, Array2<f64>) {
    let (n, l) = emissions.dim();
    let fb = forward_backward(emissions, transitions);
    let loss = fb.log_z - path_score(emissions, transitions, gold);
    let mut d_em = fb.marginals;
    let mut d_tr = fb.expected_transitions;
    if n == 0 {
        d_tr[[l, l + 1]] -= 1.0;
        return (loss, d_em, d_tr);
    }
    for (t, &y) in gold.iter().enumerate() {
        d_em[[t, y]] -= 1.0;
    }
    d_tr[[l, gold[0]]] -= 1.0;
    for t in 1..n {
        d_tr[[gold[t - 1], gold[t]]] -= 1.0;
    }
    d_tr[[gold[n - 1], l + 1]] -= 1.0;
    (loss, d_em, d_tr)
}

/// Whether a BIOES move is structurally possible. `None` stands for the
/// start state on the left and the stop state on the right.
pub fn allowed(from: Option<Label>, to: Option<Label>) -> bool {
    use Label::*;
    let opens = |l: Label| matches!(l, B | S | O);
    match (from, to) {
        (None, None) => true,
        (None, Some(t)) => opens(t),
        (Some(f), None) => matches!(f, E | S | O),
        (Some(B | I), Some(t)) => matches!(t, I | E),
        (Some(E | S | O), Some(t)) => opens(t),
    }
}

/// Additive mask: 0 for allowed moves, −∞ for structurally invalid ones.
pub fn structural_mask() -> Array2<f64> {
    let state = |i: usize| if i < N_LABELS { Some(Label::from_index(i)) } else { None };
    Array2::from_shape_fn((N_STATES, N_STATES), |(i, j)| {
        // nothing enters the start state or leaves the stop state
        if j == START || i == STOP {
            return f64::NEG_INFINITY;
        }
        if allowed(state(i), state(j)) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    })
}

pub fn masked(transitions: ArrayView2<f64>) -> Array2<f64> {
    &transitions + &structural_mask()
}
