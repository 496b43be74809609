//! Confidence-ordered clustering under must-link and cannot-link constraints.

use std::collections::HashMap;

use super::{AntecedentDecision, ConstraintSet, Diagnostics, UnionFind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EasyFirstOutcome {
    pub chains: Vec<Vec<usize>>,
    /// The antecedent actually used for each decision, after redirection.
    pub links: Vec<(usize, Option<usize>)>,
    pub diagnostics: Diagnostics,
}

struct Clusters {
    uf: UnionFind,
    /// Cannot-link partners of the members of each root.
    partners: HashMap<usize, Vec<usize>>,
}

impl Clusters {
    fn blocked(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.uf.find(a), self.uf.find(b));
        if ra == rb {
            return false;
        }
        let (small, other) = {
            let la = self.partners.get(&ra).map_or(0, Vec::len);
            let lb = self.partners.get(&rb).map_or(0, Vec::len);
            if la <= lb {
                (ra, rb)
            } else {
                (rb, ra)
            }
        };
        let list = self.partners.get(&small).cloned().unwrap_or_default();
        list.into_iter().any(|p| self.uf.find(p) == other)
    }

    fn merge(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.uf.find(a), self.uf.find(b));
        if ra == rb {
            return;
        }
        let root = self.uf.union(ra, rb);
        let gone = if root == ra { rb } else { ra };
        if let Some(mut moved) = self.partners.remove(&gone) {
            self.partners.entry(root).or_default().append(&mut moved);
        }
    }
}

/// Applies must-links, then positive decisions in descending score. A merge
/// that would join a cannot-linked pair falls back to the next candidate
/// above `threshold`, else the anaphor stays unlinked. A must-link that
/// would join a cannot-linked pair is dropped and reported.
pub fn cluster_easy_first(
    n_mentions: usize,
    decisions: &[AntecedentDecision],
    constraints: &ConstraintSet,
    threshold: f64,
) -> Result<EasyFirstOutcome> {
    let mut diagnostics = Diagnostics {
        must_links: constraints.must_link.len(),
        cannot_links: constraints.cannot_link.len(),
        ..Default::default()
    };
    let check = |a: usize, b: usize| {
        if a >= n_mentions || b >= n_mentions {
            Err(Error::BadAntecedent {
                anaphor: a.max(b),
                antecedent: a.min(b),
            })
        } else {
            Ok(())
        }
    };
    let mut clusters = Clusters {
        uf: UnionFind::new(n_mentions),
        partners: HashMap::new(),
    };
    for &(a, b) in &constraints.cannot_link {
        check(a, b)?;
        clusters.partners.entry(a).or_default().push(b);
        clusters.partners.entry(b).or_default().push(a);
    }
    for &(a, b) in &constraints.must_link {
        check(a, b)?;
        if clusters.blocked(a, b) {
            log::warn!("must-link between mentions {a} and {b} dropped: it would join a cannot-link pair");
            diagnostics.constraint_conflicts.push((a, b));
            continue;
        }
        clusters.merge(a, b);
    }

    let mut order: Vec<&AntecedentDecision> = decisions.iter().filter(|d| d.best_score > threshold).collect();
    order.sort_by(|x, y| y.best_score.total_cmp(&x.best_score).then(x.anaphor.cmp(&y.anaphor)));
    let mut links: HashMap<usize, Option<usize>> = decisions.iter().map(|d| (d.anaphor, None)).collect();
    for d in order {
        let mut candidates: Vec<(usize, f64)> = d.scores.iter().copied().filter(|c| c.1 > threshold).collect();
        candidates.sort_by(|x, y| y.1.total_cmp(&x.1).then(y.0.cmp(&x.0)));
        let mut chosen = None;
        for (rank, &(c, _)) in candidates.iter().enumerate() {
            if c >= d.anaphor || d.anaphor >= n_mentions {
                return Err(Error::BadAntecedent {
                    anaphor: d.anaphor,
                    antecedent: c,
                });
            }
            if !clusters.blocked(c, d.anaphor) {
                if rank > 0 {
                    diagnostics.redirected += 1;
                }
                chosen = Some(c);
                break;
            }
        }
        match chosen {
            Some(c) => clusters.merge(c, d.anaphor),
            None => diagnostics.blocked += 1,
        }
        links.insert(d.anaphor, chosen);
    }
    let mut links: Vec<(usize, Option<usize>)> = links.into_iter().collect();
    links.sort();
    Ok(EasyFirstOutcome {
        chains: clusters.uf.chains(),
        links,
        diagnostics,
    })
}
