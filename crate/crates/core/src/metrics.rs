//! MUC, B³, CEAFe and the CoNLL average.
//!
//! Partitions are slices of clusters over any hashable mention key (mention
//! ids for gold-mention runs, spans for predicted mentions). Mentions that
//! appear on one side only are added to the other side as singletons.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Prf {
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Numerators and denominators of a metric, summable across documents.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricCounts {
    pub recall_num: f64,
    pub recall_den: f64,
    pub precision_num: f64,
    pub precision_den: f64,
}

impl MetricCounts {
    pub fn prf(&self) -> Prf {
        Prf::new(
            ratio(self.precision_num, self.precision_den),
            ratio(self.recall_num, self.recall_den),
        )
    }

    pub fn add(&mut self, other: &MetricCounts) {
        self.recall_num += other.recall_num;
        self.recall_den += other.recall_den;
        self.precision_num += other.precision_num;
        self.precision_den += other.precision_den;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_e: Prf,
    pub conll_f1: f64,
}

pub fn conll_f1(report: &MetricReport) -> f64 {
    (report.muc.f1 + report.b_cubed.f1 + report.ceaf_e.f1) / 3.0
}

/// Clusters as index lists over a shared universe in which every mention
/// of either side appears exactly once on both sides.
struct Aligned {
    gold: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    n: usize,
}

fn align<K: Eq + Hash + Clone>(gold: &[Vec<K>], pred: &[Vec<K>]) -> Aligned {
    let mut index: HashMap<K, usize> = HashMap::new();
    let mut intern = |k: &K| {
        let next = index.len();
        *index.entry(k.clone()).or_insert(next)
    };
    let mut side = |clusters: &[Vec<K>]| -> Vec<Vec<usize>> {
        clusters
            .iter()
            .map(|c| {
                let mut v: Vec<usize> = c.iter().map(&mut intern).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .filter(|c| !c.is_empty())
            .collect()
    };
    let mut g = side(gold);
    let mut p = side(pred);
    let n = index.len();
    let covered = |clusters: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        for c in clusters {
            for &m in c {
                seen[m] = true;
            }
        }
        seen
    };
    let (gs, ps) = (covered(&g), covered(&p));
    let mut twinless = 0;
    for m in 0..n {
        if !gs[m] {
            g.push(vec![m]);
            twinless += 1;
        }
        if !ps[m] {
            p.push(vec![m]);
            twinless += 1;
        }
    }
    if twinless > 0 {
        log::debug!("{twinless} twinless mentions scored as singletons");
    }
    Aligned { gold: g, pred: p, n }
}

fn cluster_of(clusters: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut out = vec![usize::MAX; n];
    for (c, cluster) in clusters.iter().enumerate() {
        for &m in cluster {
            out[m] = c;
        }
    }
    out
}

/// Σ(|K| − p(K)) and Σ(|K| − 1) of `keys` partitioned by `response`.
fn muc_side(keys: &[Vec<usize>], response_of: &[usize]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in keys {
        let parts: HashSet<usize> = k.iter().map(|&m| response_of[m]).collect();
        num += (k.len() - parts.len()) as f64;
        den += (k.len() - 1) as f64;
    }
    (num, den)
}

pub fn muc_counts<K: Eq + Hash + Clone>(gold: &[Vec<K>], pred: &[Vec<K>]) -> MetricCounts {
    let a = align(gold, pred);
    let (rn, rd) = muc_side(&a.gold, &cluster_of(&a.pred, a.n));
    let (pn, pd) = muc_side(&a.pred, &cluster_of(&a.gold, a.n));
    MetricCounts {
        recall_num: rn,
        recall_den: rd,
        precision_num: pn,
        precision_den: pd,
    }
}

fn b3_side(keys: &[Vec<usize>], response_of: &[usize]) -> f64 {
    let mut total = 0.0;
    for k in keys {
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for &m in k {
            *overlap.entry(response_of[m]).or_default() += 1;
        }
        // Each mention of k contributes |k ∩ R(m)| / |k|.
        total += overlap.values().map(|&c| (c * c) as f64).sum::<f64>() / k.len() as f64;
    }
    total
}

pub fn b_cubed_counts<K: Eq + Hash + Clone>(gold: &[Vec<K>], pred: &[Vec<K>]) -> MetricCounts {
    let a = align(gold, pred);
    MetricCounts {
        recall_num: b3_side(&a.gold, &cluster_of(&a.pred, a.n)),
        recall_den: a.n as f64,
        precision_num: b3_side(&a.pred, &cluster_of(&a.gold, a.n)),
        precision_den: a.n as f64,
    }
}

pub fn phi4(k: &[usize], r: &[usize]) -> f64 {
    let rs: HashSet<usize> = r.iter().copied().collect();
    let common = k.iter().filter(|m| rs.contains(m)).count();
    2.0 * common as f64 / (k.len() + r.len()) as f64
}

pub fn ceaf_e_counts<K: Eq + Hash + Clone>(gold: &[Vec<K>], pred: &[Vec<K>]) -> MetricCounts {
    let a = align(gold, pred);
    let pred_of = cluster_of(&a.pred, a.n);
    let mut sim = vec![vec![0.0; a.pred.len()]; a.gold.len()];
    for (i, k) in a.gold.iter().enumerate() {
        let touched: HashSet<usize> = k.iter().map(|&m| pred_of[m]).collect();
        for j in touched {
            sim[i][j] = phi4(k, &a.pred[j]);
        }
    }
    let (_, total) = max_weight_assignment(&sim);
    MetricCounts {
        recall_num: total,
        recall_den: a.gold.len() as f64,
        precision_num: total,
        precision_den: a.pred.len() as f64,
    }
}

pub fn muc<K: Eq + Hash + Clone>(gold: &[Vec<K>], pred: &[Vec<K>]) -> Prf {
    muc_counts(gold, pred).prf()
}

pub fn b_cubed<K: Eq + Hash + Clone>(gold: &[Vec<K>], pred: &[Vec<K>]) -> Prf {
    b_cubed_counts(gold, pred).prf()
}

pub fn ceaf_e<K: Eq + Hash + Clone>(gold: &[Vec<K>], pred: &[Vec<K>]) -> Prf {
    ceaf_e_counts(gold, pred).prf()
}

/// Counts of all three metrics for one document.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorefCounts {
    pub muc: MetricCounts,
    pub b_cubed: MetricCounts,
    pub ceaf_e: MetricCounts,
}

impl CorefCounts {
    pub fn of<K: Eq + Hash + Clone>(gold: &[Vec<K>], pred: &[Vec<K>]) -> Self {
        CorefCounts {
            muc: muc_counts(gold, pred),
            b_cubed: b_cubed_counts(gold, pred),
            ceaf_e: ceaf_e_counts(gold, pred),
        }
    }

    pub fn add(&mut self, other: &CorefCounts) {
        self.muc.add(&other.muc);
        self.b_cubed.add(&other.b_cubed);
        self.ceaf_e.add(&other.ceaf_e);
    }

    pub fn report(&self) -> MetricReport {
        let mut r = MetricReport {
            muc: self.muc.prf(),
            b_cubed: self.b_cubed.prf(),
            ceaf_e: self.ceaf_e.prf(),
            conll_f1: 0.0,
        };
        r.conll_f1 = conll_f1(&r);
        r
    }
}

pub fn evaluate<K: Eq + Hash + Clone>(gold: &[Vec<K>], pred: &[Vec<K>]) -> MetricReport {
    CorefCounts::of(gold, pred).report()
}

/// Micro-averaged report over several documents: counts are summed before
/// the ratios are taken, as in the reference scorer.
pub fn evaluate_corpus<K: Eq + Hash + Clone>(docs: &[(Vec<Vec<K>>, Vec<Vec<K>>)]) -> MetricReport {
    let mut total = CorefCounts::default();
    for (g, p) in docs {
        total.add(&CorefCounts::of(g, p));
    }
    total.report()
}

/// Maximum-weight one-to-one assignment between rows and columns of a
/// rectangular weight matrix (Hungarian method with potentials, O(n²m)).
/// Returns the column matched to each row (if any) and the total weight.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (Vec<Option<usize>>, f64) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return (vec![None; rows], 0.0);
    }
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let w = |i: usize, j: usize| if transpose { weights[j][i] } else { weights[i][j] };
    let max_w = weights
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    // Minimise max_w - w over n <= m; 1-based arrays, column 0 is virtual.
    let cost = |i: usize, j: usize| max_w - w(i - 1, j - 1);
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=m {
        if p[j] != 0 {
            let (r, c) = if transpose { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) };
            assignment[r] = Some(c);
            total += weights[r][c];
        }
    }
    (assignment, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn worked() -> (Vec<Vec<char>>, Vec<Vec<char>>) {
        (
            vec![vec!['a', 'b', 'c'], vec!['d']],
            vec![vec!['a', 'b'], vec!['c', 'd']],
        )
    }

    #[test]
    fn worked_example() {
        let (g, p) = worked();
        let r = evaluate(&g, &p);
        assert!((r.muc.precision - 0.5).abs() < 1e-12);
        assert!((r.muc.recall - 0.5).abs() < 1e-12);
        assert!((r.b_cubed.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.b_cubed.precision - 0.75).abs() < 1e-12);
        assert!((r.b_cubed.f1 - 0.70588).abs() < 1e-5);
        assert!((r.ceaf_e.f1 - 0.73333).abs() < 1e-5);
        assert!((r.conll_f1 - 0.64640).abs() < 1e-5);
    }

    #[test]
    fn identical_partitions() {
        let g = vec![vec![1, 2, 3], vec![4], vec![5, 6]];
        let r = evaluate(&g, &g);
        for prf in [r.muc, r.b_cubed, r.ceaf_e] {
            assert_eq!(prf, Prf::new(1.0, 1.0));
        }
    }

    #[test]
    fn all_singletons_have_no_links() {
        let g = vec![vec![1], vec![2]];
        assert_eq!(muc(&g, &g), Prf::new(0.0, 0.0));
    }

    #[test]
    fn singletons_against_one_chain() {
        let g = vec![vec![1, 2, 3, 4]];
        let p = vec![vec![1], vec![2], vec![3], vec![4]];
        let b = b_cubed(&g, &p);
        assert!((b.precision - 1.0).abs() < 1e-12);
        assert!((b.recall - 0.25).abs() < 1e-12);
    }

    #[test]
    fn twinless_mentions_become_singletons() {
        let g = vec![vec![1, 2]];
        let p = vec![vec![1, 2], vec![3]];
        let r = evaluate(&g, &p);
        assert_eq!(r.muc, Prf::new(1.0, 1.0));
        assert!((r.b_cubed.precision - 1.0).abs() < 1e-12);
        // {3} is added to gold as a singleton, so it aligns with itself.
        assert_eq!(r.ceaf_e, Prf::new(1.0, 1.0));
        let r = evaluate(&[vec![1, 2, 3]], &[vec![1, 2]]);
        assert!((r.b_cubed.recall - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn hungarian_small_cases() {
        let w = vec![vec![1.0, 2.0], vec![3.0, 1.0]];
        assert_eq!(max_weight_assignment(&w), (vec![Some(1), Some(0)], 5.0));
        let tall = vec![vec![0.1], vec![0.9], vec![0.5]];
        let (a, t) = max_weight_assignment(&tall);
        assert_eq!(a, vec![None, Some(0), None]);
        assert!((t - 0.9).abs() < 1e-12);
        assert_eq!(max_weight_assignment(&[]), (vec![], 0.0));
    }

    fn brute_assignment(w: &[Vec<f64>]) -> f64 {
        fn go(w: &[Vec<f64>], i: usize, used: &mut Vec<bool>) -> f64 {
            if i == w.len() {
                return 0.0;
            }
            let mut best = go(w, i + 1, used);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(w[i][j] + go(w, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let m = w.first().map_or(0, |r| r.len());
        go(w, 0, &mut vec![false; m])
    }

    proptest! {
        #[test]
        fn hungarian_matches_brute_force(
            rows in 1usize..6, cols in 1usize..6,
            vals in proptest::collection::vec(0.0f64..1.0, 36)
        ) {
            let w: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| vals[i * 6 + j]).collect()).collect();
            let (_, total) = max_weight_assignment(&w);
            prop_assert!((total - brute_assignment(&w)).abs() < 1e-9);
        }

        #[test]
        fn swapping_sides_swaps_precision_and_recall(
            labels_g in proptest::collection::vec(0usize..4, 1..9),
            labels_p in proptest::collection::vec(0usize..4, 9),
        ) {
            let to_partition = |labels: &[usize]| {
                let mut m: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
                for (i, &l) in labels.iter().enumerate() { m.entry(l).or_default().push(i); }
                m.into_values().collect::<Vec<_>>()
            };
            let g = to_partition(&labels_g);
            let p = to_partition(&labels_p[..labels_g.len()]);
            let a = evaluate(&g, &p);
            let b = evaluate(&p, &g);
            for (x, y) in [(a.muc, b.muc), (a.b_cubed, b.b_cubed), (a.ceaf_e, b.ceaf_e)] {
                prop_assert!((x.precision - y.recall).abs() < 1e-12);
                prop_assert!((x.recall - y.precision).abs() < 1e-12);
            }
            // relabelling and reordering clusters leaves every score unchanged
            let mut g2: Vec<Vec<usize>> = g.iter().rev().map(|c| c.iter().rev().map(|m| m + 100).collect()).collect();
            let half = g2.len() / 2;
            g2.rotate_left(half);
            let p2: Vec<Vec<usize>> = p.iter().map(|c| c.iter().map(|m| m + 100).collect()).collect();
            let c = evaluate(&g2, &p2);
            prop_assert!((a.conll_f1 - c.conll_f1).abs() < 1e-12);
        }
    }
}
