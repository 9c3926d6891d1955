use std::ops::{Index, IndexMut};

use serde::Serialize;

use crate::code::LogicalBits;
use crate::scalar::Scalar;

/// A `2x2x2x2` tensor over logical classes, indexed by [`LogicalBits`].
/// Holds either probabilities or logits depending on context.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LogicalTensor<T>(pub [T; 16]);

impl<T: Scalar> LogicalTensor<T> {
    pub fn zeros() -> Self {
        Self([T::zero(); 16])
    }

    pub fn one_hot(class: LogicalBits) -> Self {
        let mut t = Self::zeros();
        t[class] = T::one();
        t
    }

    pub fn sum(&self) -> T {
        self.0.iter().copied().sum()
    }

    /// Divides by the total; a zero tensor is returned unchanged.
    pub fn normalized(&self) -> Self {
        let total = self.sum();
        if total == T::zero() {
            return *self;
        }
        Self(self.0.map(|v| v / total))
    }

    /// Class of the largest entry; ties go to the smallest index.
    pub fn argmax(&self) -> LogicalBits {
        let mut best = 0;
        for i in 1..16 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        LogicalBits::from_index(best)
    }

    /// Numerically stable softmax, treating entries as logits.
    pub fn softmax(&self) -> Self {
        let max = self.0.iter().copied().fold(T::neg_infinity(), T::max);
        let exp = self.0.map(|v| (v - max).exp());
        let total: T = exp.iter().copied().sum();
        Self(exp.map(|v| v / total))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

impl<T> Index<LogicalBits> for LogicalTensor<T> {
    type Output = T;

    fn index(&self, class: LogicalBits) -> &T {
        &self.0[class.index()]
    }
}

impl<T> IndexMut<LogicalBits> for LogicalTensor<T> {
    fn index_mut(&mut self, class: LogicalBits) -> &mut T {
        &mut self.0[class.index()]
    }
}
