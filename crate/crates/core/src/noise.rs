//! Noise models and reproducible on-the-fly sample generation.
//!
//! Every random stream is a ChaCha8 generator keyed by `(seed, batch,
//! worker)`, so any batch can be regenerated independently of how work was
//! split between threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::code::{Lattice, LogicalBits, PauliError, Syndrome};
use crate::error::{Error, Result};

/// Largest worker index representable in a stream key.
pub const MAX_WORKERS: u64 = 1 << 16;

/// An i.i.d. single-edge Pauli channel.
pub trait NoiseModel: Send + Sync {
    /// Probabilities of `(I, X, Z, XZ)` on every edge.
    fn pauli_probabilities(&self) -> [f64; 4];

    fn sample_error(&self, lattice: Lattice, rng: &mut ChaCha8Rng) -> PauliError {
        let [_, px, pz, py] = self.pauli_probabilities();
        let p_any = px + pz + py;
        let mut error = PauliError::identity(lattice);
        if p_any <= 0.0 {
            return error;
        }
        for edge in 0..lattice.num_edges() {
            let u: f64 = rng.random();
            if u >= p_any {
                continue;
            }
            if u < px {
                error.toggle_x(edge);
            } else if u < px + pz {
                error.toggle_z(edge);
            } else {
                error.toggle_x(edge);
                error.toggle_z(edge);
            }
        }
        error
    }
}

/// Depolarizing noise: `(1 - p, p/3, p/3, p/3)` on every edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Depolarizing {
    p: f64,
}

impl Depolarizing {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("error probability {p} outside [0, 1)")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl NoiseModel for Depolarizing {
    fn pauli_probabilities(&self) -> [f64; 4] {
        let third = self.p / 3.0;
        [1.0 - self.p, third, third, third]
    }
}

/// Key of one independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub batch: u64,
    pub worker: u64,
}

impl StreamKey {
    pub fn new(seed: u64, batch: u64) -> Self {
        Self { seed, batch, worker: 0 }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        assert!(self.worker < MAX_WORKERS, "worker index out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.batch.wrapping_mul(MAX_WORKERS).wrapping_add(self.worker));
        rng
    }
}

/// One training or evaluation example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub syndrome: Syndrome,
    pub logical: LogicalBits,
    pub error: Option<PauliError>,
}

pub fn sample_one<N: NoiseModel + ?Sized>(
    lattice: Lattice,
    model: &N,
    rng: &mut ChaCha8Rng,
    keep_error: bool,
) -> Sample {
    let error = model.sample_error(lattice, rng);
    let syndrome = lattice.syndrome(&error).expect("error sampled on this lattice");
    let logical = lattice.logical_content(&error).expect("error sampled on this lattice");
    Sample { syndrome, logical, error: keep_error.then_some(error) }
}

/// `n` i.i.d. samples from the stream identified by `key`.
pub fn sample_batch<N: NoiseModel + ?Sized>(
    lattice: Lattice,
    model: &N,
    n: usize,
    key: StreamKey,
) -> Result<Vec<Sample>> {
    if n == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    let mut rng = key.rng();
    Ok((0..n).map(|_| sample_one(lattice, model, &mut rng, false)).collect())
}

/// Writes samples as CSV: one comment line, a header row, then
/// `sx_0..sx_{L^2-1}, sz_0..sz_{L^2-1}, g1..g4` as 0/1 per row.
pub fn write_samples_csv<W: Write>(mut out: W, lattice: Lattice, comment: &str, samples: &[Sample]) -> Result<()> {
    writeln!(out, "# toric-samples v1 L={} {comment}", lattice.size())?;
    let sites = lattice.num_vertices();
    let mut writer = csv::Writer::from_writer(out);
    let header: Vec<String> = (0..sites)
        .map(|i| format!("sx_{i}"))
        .chain((0..sites).map(|i| format!("sz_{i}")))
        .chain((1..=4).map(|a| format!("g{a}")))
        .collect();
    writer.write_record(&header)?;
    let mut row: Vec<&'static str> = Vec::with_capacity(header.len());
    let bit = |b: bool| if b { "1" } else { "0" };
    for s in samples {
        row.clear();
        row.extend((0..sites).map(|i| bit(s.syndrome.x_bits().get(i))));
        row.extend((0..sites).map(|i| bit(s.syndrome.z_bits().get(i))));
        row.extend(s.logical.bits().iter().map(|&b| bit(b == 1)));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_validation() {
        assert!(Depolarizing::new(-0.1).is_err());
        assert!(Depolarizing::new(1.0).is_err());
        let m = Depolarizing::new(0.3).unwrap();
        let probs = m.pauli_probabilities();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_gives_identity() {
        let lat = Lattice::new(5).unwrap();
        let m = Depolarizing::new(0.0).unwrap();
        let batch = sample_batch(lat, &m, 50, StreamKey::new(3, 0)).unwrap();
        for s in batch {
            assert!(s.syndrome.is_zero());
            assert_eq!(s.logical, LogicalBits::ZERO);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let lat = Lattice::new(5).unwrap();
        let m = Depolarizing::new(0.2).unwrap();
        let a = sample_batch(lat, &m, 20, StreamKey::new(7, 3)).unwrap();
        let b = sample_batch(lat, &m, 20, StreamKey::new(7, 3)).unwrap();
        let c = sample_batch(lat, &m, 20, StreamKey::new(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_batch_rejected() {
        let lat = Lattice::new(3).unwrap();
        let m = Depolarizing::new(0.1).unwrap();
        assert!(sample_batch(lat, &m, 0, StreamKey::new(0, 0)).is_err());
    }

    #[test]
    fn mean_weight_at_p_tenth() {
        // 18 edges at p = 0.1: mean 1.8, binomial sd of the mean is
        // sqrt(18 * 0.09 / 1e5).
        let lat = Lattice::new(3).unwrap();
        let m = Depolarizing::new(0.1).unwrap();
        let mut rng = StreamKey::new(11, 0).rng();
        let n = 100_000;
        let total: usize = (0..n).map(|_| m.sample_error(lat, &mut rng).weight()).sum();
        let mean = total as f64 / n as f64;
        let sd = (18.0 * 0.1 * 0.9 / n as f64).sqrt();
        assert!((mean - 1.8).abs() < 3.0 * sd, "mean weight {mean}");
    }

    #[test]
    fn per_edge_pauli_frequencies() {
        let lat = Lattice::new(3).unwrap();
        let p = 0.155;
        let m = Depolarizing::new(p).unwrap();
        let mut rng = StreamKey::new(5, 1).rng();
        let draws = 50_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let e = m.sample_error(lat, &mut rng);
            for edge in 0..lat.num_edges() {
                let k = (e.x_part().get(edge) as usize) | ((e.z_part().get(edge) as usize) << 1);
                counts[k] += 1;
            }
        }
        let total = (draws * lat.num_edges()) as f64;
        let expected = [1.0 - p, p / 3.0, p / 3.0, p / 3.0];
        for k in 0..4 {
            let f = counts[k] as f64 / total;
            let sd = (expected[k] * (1.0 - expected[k]) / total).sqrt();
            assert!((f - expected[k]).abs() < 4.0 * sd, "class {k}: {f} vs {}", expected[k]);
        }
    }

    #[test]
    fn csv_dump_layout() {
        let lat = Lattice::new(3).unwrap();
        let m = Depolarizing::new(0.2).unwrap();
        let batch = sample_batch(lat, &m, 3, StreamKey::new(1, 0)).unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, lat, "p=0.2", &batch).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# toric-samples v1 L=3"));
        assert!(lines[1].starts_with("sx_0,"));
        assert!(lines[1].ends_with("g1,g2,g3,g4"));
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2].split(',').count(), 9 + 9 + 4);
    }
}
