//! Leave-one-out step agreement inside the dominant group and the
//! depth-wise disagreement profile derived from it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine, EmbedError, StepEmbedding};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("no step position has at least two group members")]
    GroupTooSmall,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// `S[i][j]`: cosine between member `i`'s step and the mean of the other
/// members' steps at the same position. Columns are the 1-based step
/// positions with at least two members; `None` where member `i` has no step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooMatrix<T> {
    pub rows: Vec<usize>,
    pub columns: Vec<usize>,
    pub values: Vec<Vec<Option<T>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementProfile<T> {
    pub steps: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> DisagreementProfile<T> {
    /// Step position with the largest disagreement (first on ties).
    pub fn argmax(&self) -> Option<usize> {
        self.values
            .iter()
            .zip(&self.steps)
            .fold(None::<(T, usize)>, |best, (&d, &j)| match best {
                Some((bd, _)) if bd >= d => best,
                _ => Some((d, j)),
            })
            .map(|(_, j)| j)
    }

    pub fn get(&self, step: usize) -> Option<T> {
        self.steps.iter().position(|&j| j == step).map(|k| self.values[k])
    }
}

/// `members` pairs a row label (rollout id) with that rollout's step embeddings.
pub fn loo_similarity<T: Scalar>(members: &[(usize, Vec<StepEmbedding<T>>)]) -> Result<LooMatrix<T>, DiagnosticsError> {
    let max_len = members.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let mut columns = Vec::new();
    let mut per_col: Vec<Vec<Option<T>>> = Vec::new();
    for j in 0..max_len {
        let present: Vec<usize> = (0..members.len()).filter(|&k| members[k].1.len() > j).collect();
        if present.len() < 2 {
            continue;
        }
        let dim = members[present[0]].1[j].dim();
        let mut total = vec![T::zero(); dim];
        for &k in &present {
            let e = &members[k].1[j];
            if e.dim() != dim {
                return Err(EmbedError::DimensionMismatch(dim, e.dim()).into());
            }
            total.iter_mut().zip(e.as_slice()).for_each(|(t, &x)| *t += x);
        }
        let others = T::of_count(present.len() - 1);
        let mut col = vec![None; members.len()];
        for &k in &present {
            let e = members[k].1[j].as_slice();
            let loo: Vec<T> = total.iter().zip(e).map(|(&t, &x)| (t - x) / others).collect();
            col[k] = Some(cosine(e, &loo)?);
        }
        columns.push(j + 1);
        per_col.push(col);
    }
    if columns.is_empty() {
        return Err(DiagnosticsError::GroupTooSmall);
    }
    let values = (0..members.len())
        .map(|k| per_col.iter().map(|col| col[k]).collect())
        .collect();
    Ok(LooMatrix { rows: members.iter().map(|(id, _)| *id).collect(), columns, values })
}

/// `D_j = 1 - mean_i S[i][j]` over the rows present at `j`.
pub fn disagreement_profile<T: Scalar>(m: &LooMatrix<T>) -> DisagreementProfile<T> {
    let values = (0..m.columns.len())
        .map(|c| {
            let present: Vec<T> = m.values.iter().filter_map(|row| row[c]).collect();
            T::one() - present.iter().copied().sum::<T>() / T::of_count(present.len().max(1))
        })
        .collect();
    DisagreementProfile { steps: m.columns.clone(), values }
}

/// Mean profile over several batches, per step position, over the batches
/// where that position appears.
pub fn aggregate_profiles<T: Scalar>(profiles: &[DisagreementProfile<T>]) -> DisagreementProfile<T> {
    let mut acc: BTreeMap<usize, (T, usize)> = BTreeMap::new();
    for p in profiles {
        for (&j, &d) in p.steps.iter().zip(&p.values) {
            let e = acc.entry(j).or_insert((T::zero(), 0));
            e.0 += d;
            e.1 += 1;
        }
    }
    let (steps, values) = acc
        .into_iter()
        .map(|(j, (s, n))| (j, s / T::of_count(n)))
        .unzip();
    DisagreementProfile { steps, values }
}

/// Heatmap export consumed by plotting and the diagnose endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl<T: Scalar> From<&LooMatrix<T>> for Heatmap {
    fn from(m: &LooMatrix<T>) -> Self {
        Heatmap {
            row_labels: m.rows.iter().map(|r| r.to_string()).collect(),
            column_labels: m.columns.iter().map(|c| c.to_string()).collect(),
            values: m
                .values
                .iter()
                .map(|row| row.iter().map(|v| v.map(Scalar::to_f64_lossy)).collect())
                .collect(),
        }
    }
}
