use serde::{Deserialize, Serialize};

/// One step of a word-level edit script. Indices point into the reference
/// and hypothesis sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    Match { ref_index: usize, hyp_index: usize },
    Substitute { ref_index: usize, hyp_index: usize },
    Delete { ref_index: usize },
    Insert { hyp_index: usize },
}

impl EditOp {
    pub fn cost(&self) -> usize {
        match self {
            EditOp::Match { .. } => 0,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EditCounts {
    pub matches: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReconstructError {
    #[error("reference index {0} is out of order or repeated")]
    RefIndex(usize),
    #[error("hypothesis index {0} is out of order or repeated")]
    HypIndex(usize),
    #[error("match at ref {ref_index} / hyp {hyp_index} pairs different words")]
    FalseMatch { ref_index: usize, hyp_index: usize },
    #[error("alignment covers {covered} of {len} reference words")]
    RefCoverage { covered: usize, len: usize },
}

impl Alignment {
    pub fn cost(&self) -> usize {
        self.ops.iter().map(EditOp::cost).sum()
    }

    pub fn counts(&self) -> EditCounts {
        let mut c = EditCounts::default();
        for op in &self.ops {
            match op {
                EditOp::Match { .. } => c.matches += 1,
                EditOp::Substitute { .. } => c.substitutions += 1,
                EditOp::Delete { .. } => c.deletions += 1,
                EditOp::Insert { .. } => c.insertions += 1,
            }
        }
        c
    }

    /// Replays the ops over `reference` and returns the sequence they
    /// produce. Checks that every reference and hypothesis index is consumed
    /// exactly once and in increasing order.
    pub fn apply<T: PartialEq + Clone>(
        &self,
        reference: &[T],
        hypothesis: &[T],
    ) -> Result<Vec<T>, ReconstructError> {
        let mut next_ref = 0;
        let mut next_hyp = 0;
        let mut out = Vec::with_capacity(hypothesis.len());
        let mut take_ref = |i: usize| {
            if i != next_ref || i >= reference.len() {
                return Err(ReconstructError::RefIndex(i));
            }
            next_ref += 1;
            Ok(())
        };
        for op in &self.ops {
            let hyp_index = match *op {
                EditOp::Match {
                    ref_index,
                    hyp_index,
                } => {
                    take_ref(ref_index)?;
                    if hypothesis.get(hyp_index) != Some(&reference[ref_index]) {
                        return Err(ReconstructError::FalseMatch {
                            ref_index,
                            hyp_index,
                        });
                    }
                    Some(hyp_index)
                }
                EditOp::Substitute {
                    ref_index,
                    hyp_index,
                } => {
                    take_ref(ref_index)?;
                    Some(hyp_index)
                }
                EditOp::Delete { ref_index } => {
                    take_ref(ref_index)?;
                    None
                }
                EditOp::Insert { hyp_index } => Some(hyp_index),
            };
            if let Some(j) = hyp_index {
                if j != next_hyp || j >= hypothesis.len() {
                    return Err(ReconstructError::HypIndex(j));
                }
                next_hyp += 1;
                out.push(hypothesis[j].clone());
            }
        }
        if next_ref != reference.len() {
            return Err(ReconstructError::RefCoverage {
                covered: next_ref,
                len: reference.len(),
            });
        }
        Ok(out)
    }
}

/// Minimum-cost alignment with unit substitution, deletion and insertion
/// costs.
///
/// Among optimal scripts the backtrace prefers, at every cell, Match over
/// Substitute over Delete over Insert.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Alignment {
    let n = reference.len();
    let m = hypothesis.len();
    let width = m + 1;
    let mut dist = vec![0usize; (n + 1) * width];
    for (j, d) in dist.iter_mut().take(width).enumerate() {
        *d = j;
    }
    for i in 1..=n {
        dist[i * width] = i;
        for j in 1..=m {
            let diag =
                dist[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let up = dist[(i - 1) * width + j] + 1;
            let left = dist[i * width + j - 1] + 1;
            dist[i * width + j] = diag.min(up).min(left);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        if i > 0 && j > 0 {
            let diag = dist[(i - 1) * width + j - 1];
            let same = reference[i - 1] == hypothesis[j - 1];
            if same && diag == here {
                ops.push(EditOp::Match {
                    ref_index: i - 1,
                    hyp_index: j - 1,
                });
                i -= 1;
                j -= 1;
                continue;
            }
            if !same && diag + 1 == here {
                ops.push(EditOp::Substitute {
                    ref_index: i - 1,
                    hyp_index: j - 1,
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dist[(i - 1) * width + j] + 1 == here {
            ops.push(EditOp::Delete { ref_index: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::Insert { hyp_index: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    Alignment { ops }
}
