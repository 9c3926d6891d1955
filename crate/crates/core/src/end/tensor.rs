use crate::code::Syndrome;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A `(batch, channels, L, L)` activation with periodic spatial axes.
///
/// Storage is channel-major, `[channel][batch][row][col]`, so each channel
/// is one contiguous row of the matrices fed to the convolution GEMMs.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<S> {
    batch: usize,
    channels: usize,
    size: usize,
    data: Vec<S>,
}

impl<S: Scalar> Tensor4<S> {
    pub fn zeros(batch: usize, channels: usize, size: usize) -> Self {
        Self { batch, channels, size, data: vec![S::zero(); batch * channels * size * size] }
    }

    pub fn from_data(batch: usize, channels: usize, size: usize, data: Vec<S>) -> Result<Self> {
        let expected = batch * channels * size * size;
        if data.len() != expected {
            return Err(Error::Shape(format!("expected {expected} values, found {}", data.len())));
        }
        Ok(Self { batch, channels, size, data })
    }

    /// Two input channels per syndrome: vertex defects then plaquette defects.
    pub fn encode(syndromes: &[Syndrome]) -> Result<Self> {
        let first = syndromes.first().ok_or_else(|| Error::Shape("empty syndrome batch".into()))?;
        let l = first.lattice().size();
        let area = l * l;
        let batch = syndromes.len();
        let mut t = Self::zeros(batch, 2, l);
        for (n, s) in syndromes.iter().enumerate() {
            if s.lattice().size() != l {
                return Err(Error::SizeMismatch { expected: l, found: s.lattice().size() });
            }
            for v in s.x_bits().iter_ones() {
                t.data[n * area + v] = S::one();
            }
            for v in s.z_bits().iter_ones() {
                t.data[batch * area + n * area + v] = S::one();
            }
        }
        Ok(t)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `(batch, channels, L, L)`.
    pub fn shape(&self) -> [usize; 4] {
        [self.batch, self.channels, self.size, self.size]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    fn index(&self, n: usize, c: usize, row: usize, col: usize) -> usize {
        ((c * self.batch + n) * self.size + row) * self.size + col
    }

    pub fn get(&self, n: usize, c: usize, row: usize, col: usize) -> S {
        self.data[self.index(n, c, row, col)]
    }

    pub fn set(&mut self, n: usize, c: usize, row: usize, col: usize, value: S) {
        let i = self.index(n, c, row, col);
        self.data[i] = value;
    }

    /// Cyclic shift by `right` columns and `down` rows: `out[r][c] = self[r - down][c - right]`.
    pub fn shifted(&self, right: isize, down: isize) -> Self {
        let l = self.size as isize;
        let mut out = Self::zeros(self.batch, self.channels, self.size);
        for c in 0..self.channels {
            for n in 0..self.batch {
                for r in 0..self.size {
                    for col in 0..self.size {
                        let sr = (r as isize - down).rem_euclid(l) as usize;
                        let sc = (col as isize - right).rem_euclid(l) as usize;
                        out.set(n, c, r, col, self.get(n, c, sr, sc));
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), S::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Lattice;
    use crate::noise::{sample_one, Depolarizing, StreamKey};

    #[test]
    fn encoding_places_defects_on_their_sites() {
        let lat = Lattice::new(5).unwrap();
        let model = Depolarizing::new(0.2).unwrap();
        let mut rng = StreamKey::new(3, 0).rng();
        let batch: Vec<Syndrome> = (0..3).map(|_| sample_one(lat, &model, &mut rng, false).syndrome).collect();
        let t = Tensor4::<f64>::encode(&batch).unwrap();
        assert_eq!(t.shape(), [3, 2, 5, 5]);
        for (n, s) in batch.iter().enumerate() {
            for r in 0..5 {
                for c in 0..5 {
                    assert_eq!(t.get(n, 0, r, c), s.x_at(r as isize, c as isize) as f64);
                    assert_eq!(t.get(n, 1, r, c), s.z_at(r as isize, c as isize) as f64);
                }
            }
        }
    }

    #[test]
    fn shape_checks() {
        assert!(Tensor4::<f32>::from_data(1, 2, 3, vec![0.0; 17]).is_err());
        assert!(Tensor4::<f32>::encode(&[]).is_err());
        let mixed = [Syndrome::zero(Lattice::new(3).unwrap()), Syndrome::zero(Lattice::new(5).unwrap())];
        assert!(Tensor4::<f32>::encode(&mixed).is_err());
    }

    #[test]
    fn shift_composes() {
        let t = Tensor4::<f64>::from_data(1, 1, 3, (0..9).map(f64::from).collect()).unwrap();
        assert_eq!(t.shifted(1, 2).shifted(2, 1), t);
        assert_eq!(t.shifted(1, 0).get(0, 0, 0, 1), t.get(0, 0, 0, 0));
    }
}
