//! BIOES span tags for a single nesting level.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    B = 0,
    I = 1,
    E = 2,
    S = 3,
    O = 4,
}

pub const N_LABELS: usize = 5;

impl Label {
    pub const ALL: [Label; N_LABELS] = [Label::B, Label::I, Label::E, Label::S, Label::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        Label::ALL[i]
    }

    pub fn tag(self) -> &'static str {
        match self {
            Label::B => "B-PER",
            Label::I => "I-PER",
            Label::E => "E-PER",
            Label::S => "S-PER",
            Label::O => "O",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Tags the inclusive spans `(start, end)` over `n` tokens. Spans must not
/// overlap.
pub fn bioes_encode(spans: &[(usize, usize)], n: usize) -> Result<Vec<Label>> {
    let mut labels = vec![Label::O; n];
    let mut taken = vec![false; n];
    for &(s, e) in spans {
        if s > e || e >= n {
            return Err(Error::MalformedAnnotation(format!(
                "span ({s}, {e}) invalid for {n} tokens"
            )));
        }
        if taken[s..=e].iter().any(|&t| t) {
            return Err(Error::MalformedAnnotation(format!(
                "span ({s}, {e}) overlaps another span of the same level"
            )));
        }
        taken[s..=e].iter_mut().for_each(|t| *t = true);
        if s == e {
            labels[s] = Label::S;
        } else {
            labels[s] = Label::B;
            labels[s + 1..e].iter_mut().for_each(|l| *l = Label::I);
            labels[e] = Label::E;
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSpans {
    /// `(start, end, confidence)`; confidence is the mean token confidence.
    pub spans: Vec<(usize, usize, f64)>,
    /// Ill-formed fragments dropped (orphan I/E, unterminated B).
    pub diagnostics: usize,
}

/// Reads maximal well-formed `B I* E` and `S` segments.
pub fn bioes_decode(labels: &[Label], confidence: &[f64]) -> DecodedSpans {
    let mean = |s: usize, e: usize| confidence[s..=e].iter().sum::<f64>() / (e + 1 - s) as f64;
    let mut spans = Vec::new();
    let mut diagnostics = 0;
    let mut open: Option<usize> = None;
    let mut in_orphan = false;
    for (t, &label) in labels.iter().enumerate() {
        match label {
            Label::I | Label::E if open.is_some() => {
                if label == Label::E {
                    let s = open.take().unwrap();
                    spans.push((s, t, mean(s, t)));
                }
            }
            Label::I | Label::E => {
                if !in_orphan {
                    diagnostics += 1;
                }
                in_orphan = label == Label::I;
            }
            Label::B | Label::S | Label::O => {
                if open.take().is_some() {
                    diagnostics += 1;
                }
                in_orphan = false;
                match label {
                    Label::B => open = Some(t),
                    Label::S => spans.push((t, t, mean(t, t))),
                    _ => {}
                }
            }
        }
    }
    if open.is_some() {
        diagnostics += 1;
    }
    if diagnostics > 0 {
        log::debug!("dropped {diagnostics} ill-formed BIOES fragments");
    }
    DecodedSpans { spans, diagnostics }
}
