use crate::error::{Error, Result};

/// Deepest nesting level the annotation scheme allows (third-level nesting).
pub const MAX_NESTING_LEVEL: usize = 2;

/// Raw result of a nesting pass: levels in input order plus every
/// crossing and duplicate pair found (as input indices, lower first).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NestingScan {
    pub levels: Vec<usize>,
    pub crossings: Vec<(usize, usize)>,
    pub duplicates: Vec<(usize, usize)>,
}

/// Counts, for every span, the distinct spans strictly containing it.
///
/// Spans must be well formed (`start <= end`). Crossing spans are recorded
/// rather than rejected; a span crossing one of its would-be containers is
/// not itself treated as a container for later spans.
pub fn scan_nesting(spans: &[(usize, usize)]) -> NestingScan {
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, ea) = spans[a];
        let (sb, eb) = spans[b];
        sa.cmp(&sb).then(eb.cmp(&ea)).then(a.cmp(&b))
    });

    let mut scan = NestingScan {
        levels: vec![0; spans.len()],
        ..Default::default()
    };
    // Chain of open spans, each containing the next.
    let mut stack: Vec<usize> = Vec::new();
    for &cur in &order {
        let (start, end) = spans[cur];
        while let Some(&top) = stack.last() {
            if spans[top].1 < start {
                stack.pop();
            } else {
                break;
            }
        }
        if let Some(&top) = stack.last() {
            if spans[top] == spans[cur] {
                scan.duplicates.push((top.min(cur), top.max(cur)));
                scan.levels[cur] = scan.levels[top];
                continue;
            }
        }
        let mut level = 0;
        let mut crossed = false;
        for &open in &stack {
            if spans[open].1 >= end {
                level += 1;
            } else {
                crossed = true;
                scan.crossings.push((open.min(cur), open.max(cur)));
            }
        }
        scan.levels[cur] = level;
        if !crossed {
            stack.push(cur);
        }
    }
    scan.crossings.sort_unstable();
    scan.duplicates.sort_unstable();
    scan
}

/// Nesting level of every span: the number of distinct spans strictly
/// containing it. Crossing spans and levels beyond [`MAX_NESTING_LEVEL`]
/// are annotation errors.
pub fn compute_nesting_levels(spans: &[(usize, usize)]) -> Result<Vec<usize>> {
    if let Some((i, span)) = spans.iter().enumerate().find(|(_, s)| s.0 > s.1) {
        return Err(Error::MalformedAnnotation(format!(
            "span {i} {span:?} ends before it starts"
        )));
    }
    let scan = scan_nesting(spans);
    if let Some(&(a, b)) = scan.crossings.first() {
        return Err(Error::MalformedAnnotation(format!(
            "spans {:?} and {:?} cross without nesting",
            spans[a], spans[b]
        )));
    }
    if let Some((i, level)) = scan
        .levels
        .iter()
        .enumerate()
        .find(|(_, &l)| l > MAX_NESTING_LEVEL)
    {
        return Err(Error::MalformedAnnotation(format!(
            "span {:?} is nested {level} levels deep (max {MAX_NESTING_LEVEL})",
            spans[i]
        )));
    }
    Ok(scan.levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn possessive_inside_noun_phrase() {
        // [my] inside [my parents]
        assert_eq!(compute_nesting_levels(&[(0, 0), (0, 1)]).unwrap(), vec![1, 0]);
    }

    #[test]
    fn single_span_is_outermost() {
        assert_eq!(compute_nesting_levels(&[(4, 7)]).unwrap(), vec![0]);
    }

    #[test]
    fn third_level_nesting() {
        // [her] in [her husband] in [Mrs. Smith and her husband]
        let spans = [(3, 3), (3, 4), (0, 4)];
        assert_eq!(compute_nesting_levels(&spans).unwrap(), vec![2, 1, 0]);
    }

    #[test]
    fn crossing_spans_rejected() {
        let err = compute_nesting_levels(&[(0, 2), (2, 4)]).unwrap_err();
        assert!(matches!(err, Error::MalformedAnnotation(_)));
        let scan = scan_nesting(&[(0, 2), (2, 4)]);
        assert_eq!(scan.crossings, vec![(0, 1)]);
    }

    #[test]
    fn fourth_level_rejected() {
        let spans = [(0, 10), (1, 9), (2, 8), (3, 3)];
        assert!(compute_nesting_levels(&spans).is_err());
        assert_eq!(scan_nesting(&spans).levels, vec![0, 1, 2, 3]);
    }

    #[test]
    fn duplicates_share_a_level() {
        let scan = scan_nesting(&[(0, 5), (1, 2), (1, 2)]);
        assert_eq!(scan.levels, vec![0, 1, 1]);
        assert_eq!(scan.duplicates, vec![(1, 2)]);
    }

    /// Brute force: count strictly containing distinct spans.
    fn brute_levels(spans: &[(usize, usize)]) -> Vec<usize> {
        spans
            .iter()
            .map(|&(s, e)| {
                let mut containers: Vec<(usize, usize)> = spans
                    .iter()
                    .copied()
                    .filter(|&(s2, e2)| s2 <= s && e <= e2 && (s2, e2) != (s, e))
                    .collect();
                containers.sort_unstable();
                containers.dedup();
                containers.len()
            })
            .collect()
    }

    /// Laminar span families: recursively carve nested or disjoint spans.
    fn laminar(lo: usize, hi: usize, depth: u32, seed: u64, out: &mut Vec<(usize, usize)>) {
        if lo > hi || depth == 0 {
            return;
        }
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut cursor = lo;
        while cursor <= hi {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let len = 1 + (x >> 33) as usize % 4;
            let end = (cursor + len - 1).min(hi);
            if (x >> 20) % 3 != 0 {
                out.push((cursor, end));
                laminar(cursor, end, depth - 1, x, out);
            }
            cursor = end + 1;
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_is_order_independent(seed in any::<u64>(), rot in 0usize..16) {
            let mut spans = Vec::new();
            laminar(0, 15, 3, seed, &mut spans);
            spans.sort_unstable();
            spans.dedup();
            let levels = scan_nesting(&spans).levels;
            prop_assert_eq!(&levels, &brute_levels(&spans));

            let n = spans.len().max(1);
            let mut rotated = spans.clone();
            rotated.rotate_left(rot % n);
            let mut rotated_levels = scan_nesting(&rotated).levels;
            rotated_levels.rotate_right(rot % n);
            prop_assert_eq!(levels.clone(), rotated_levels);
            // idempotent: running twice gives the same answer
            prop_assert_eq!(levels, scan_nesting(&spans).levels);
        }
    }
}
