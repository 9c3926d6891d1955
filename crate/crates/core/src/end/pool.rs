use serde::{Deserialize, Serialize};

use crate::code::{LogicalBits, Syndrome};
use crate::error::{Error, Result};
use crate::logical::LogicalTensor;
use crate::scalar::Scalar;
use crate::symmetry::all_twists;

use super::tensor::Tensor4;

/// Projection from the per-position logit field to one logit per class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Average of the field with each position's classes re-indexed by the
    /// twist of the translation to that position. Exactly invariant.
    #[default]
    Twisted,
    /// Plain global average. Not invariant; kept as an ablation.
    Average,
}

/// Per-sample twist masks in row-major position order, or `None` for plain
/// averaging.
pub(crate) fn masks_for(pooling: Pooling, syndromes: &[Syndrome]) -> Option<Vec<Vec<LogicalBits>>> {
    match pooling {
        Pooling::Twisted => Some(syndromes.iter().map(|s| all_twists(s).masks().to_vec()).collect()),
        Pooling::Average => None,
    }
}

/// `out[n][gamma] = mean_pos field[gamma ^ mask_n(pos)][n, pos]` over a
/// channel-major `[16][N * A]` field.
pub(crate) fn pool_forward<S: Scalar>(
    field: &[S],
    batch: usize,
    area: usize,
    masks: Option<&[Vec<LogicalBits>]>,
) -> Vec<LogicalTensor<S>> {
    let p = batch * area;
    let inv = S::one() / S::of(area as f64);
    (0..batch)
        .map(|n| {
            let mut acc = [S::zero(); 16];
            match masks {
                Some(masks) => {
                    for (pos, m) in masks[n].iter().enumerate() {
                        let m = m.index();
                        for (gamma, a) in acc.iter_mut().enumerate() {
                            *a += field[(gamma ^ m) * p + n * area + pos];
                        }
                    }
                }
                None => {
                    for (gamma, a) in acc.iter_mut().enumerate() {
                        let start = gamma * p + n * area;
                        *a = field[start..start + area].iter().copied().sum();
                    }
                }
            }
            LogicalTensor(acc.map(|v| v * inv))
        })
        .collect()
}

/// Adjoint of [`pool_forward`]: `dfield[c][n, pos] = dout[n][c ^ mask_n(pos)] / A`.
pub(crate) fn pool_backward<S: Scalar>(
    dout: &[LogicalTensor<S>],
    area: usize,
    masks: Option<&[Vec<LogicalBits>]>,
) -> Vec<S> {
    let batch = dout.len();
    let p = batch * area;
    let inv = S::one() / S::of(area as f64);
    let mut dfield = vec![S::zero(); 16 * p];
    for (n, d) in dout.iter().enumerate() {
        for pos in 0..area {
            let m = masks.map_or(0, |m| m[n][pos].index());
            for c in 0..16 {
                dfield[c * p + n * area + pos] = d.0[c ^ m] * inv;
            }
        }
    }
    dfield
}

fn check_field<S: Scalar>(field: &Tensor4<S>, syndromes: &[Syndrome]) -> Result<()> {
    if field.channels() != 16 {
        return Err(Error::Shape(format!("field needs 16 channels, found {}", field.channels())));
    }
    if field.batch() != syndromes.len() {
        return Err(Error::Shape(format!(
            "field batch {} does not match {} syndromes",
            field.batch(),
            syndromes.len()
        )));
    }
    for s in syndromes {
        if s.lattice().size() != field.size() {
            return Err(Error::SizeMismatch { expected: field.size(), found: s.lattice().size() });
        }
    }
    Ok(())
}

/// Twisted global average pooling of a `(batch, 16, L, L)` logit field.
pub fn twisted_pool<S: Scalar>(field: &Tensor4<S>, syndromes: &[Syndrome]) -> Result<Vec<LogicalTensor<S>>> {
    check_field(field, syndromes)?;
    let masks = masks_for(Pooling::Twisted, syndromes).expect("twisted masks");
    Ok(pool_forward(field.data(), field.batch(), field.size() * field.size(), Some(&masks)))
}

/// Plain global average pooling of a `(batch, 16, L, L)` logit field.
pub fn average_pool<S: Scalar>(field: &Tensor4<S>) -> Result<Vec<LogicalTensor<S>>> {
    if field.channels() != 16 {
        return Err(Error::Shape(format!("field needs 16 channels, found {}", field.channels())));
    }
    Ok(pool_forward(field.data(), field.batch(), field.size() * field.size(), None))
}
