#![allow(dead_code)]

use toric_core::end::{Model, ModelConfig};
use toric_core::noise::{sample_batch, sample_one, Depolarizing, StreamKey};
use toric_core::symmetry::{apply_twist, translate_syndrome, twist};
use toric_core::{Lattice, LogicalBits, LogicalTensor, Syndrome, Translation};

pub fn syndromes(l: usize, count: usize, p: f64, seed: u64) -> Vec<Syndrome> {
    let lat = Lattice::new(l).unwrap();
    let model = Depolarizing::new(p).unwrap();
    let mut rng = StreamKey::new(seed, 0).rng();
    (0..count).map(|_| sample_one(lat, &model, &mut rng, false).syndrome).collect()
}

/// Largest violation of `t(s) = M_g(s) t(g^-1 s)` over all translations.
pub fn worst_violation<F>(l: usize, samples: &[Syndrome], f: F) -> f64
where
    F: Fn(&[Syndrome]) -> Vec<LogicalTensor<f64>>,
{
    let lat = Lattice::new(l).unwrap();
    let base = f(samples);
    let mut worst = 0.0f64;
    for g in Translation::all(lat) {
        let pulled: Vec<Syndrome> = samples.iter().map(|s| translate_syndrome(g.inverse(), s)).collect();
        let moved = f(&pulled);
        for ((s, a), b) in samples.iter().zip(&base).zip(&moved) {
            let predicted = apply_twist(twist(g, s), b);
            worst = worst.max(a.max_abs_diff(&predicted));
        }
    }
    worst
}

pub fn widen(t: &LogicalTensor<f32>) -> LogicalTensor<f64> {
    LogicalTensor(t.0.map(f64::from))
}

/// Invariance violation of a model's predicted probabilities.
pub fn model_violation(model: &Model<f32>, l: usize, samples: &[Syndrome]) -> f64 {
    worst_violation(l, samples, |b| model.predict_batch(b).unwrap().iter().map(widen).collect())
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Denominator floor, well above the central-difference roundoff
/// (`eps * loss / FD_STEP`, about 1e-10) so exactly-zero gradients (biases
/// feeding a batch norm) compare absolutely.
pub const FD_FLOOR: f64 = 1e-6;

fn fd_batch(n: usize) -> (Vec<Syndrome>, Vec<LogicalBits>) {
    let lat = Lattice::new(3).unwrap();
    let samples = sample_batch(lat, &Depolarizing::new(0.25).unwrap(), n, StreamKey::new(17, 0)).unwrap();
    (samples.iter().map(|s| s.syndrome.clone()).collect(), samples.iter().map(|s| s.logical).collect())
}

/// Worst relative error between backprop and central differences on L = 3.
pub fn gradient_error(config: ModelConfig) -> f64 {
    let mut m = Model::<f64>::new(config, 23).unwrap();
    // Move away from the initial gamma = 1, beta = 0 point.
    for (i, v) in m.params_mut().iter_mut().enumerate() {
        *v += 0.05 * ((i as f64) * 1.3).sin();
    }
    let (s, t) = fd_batch(6);
    let mut grads = vec![0.0; m.param_count()];
    m.loss_and_grad(&s, &t, 1.0, &mut grads).unwrap();
    let mut worst = 0.0f64;
    for i in 0..m.param_count() {
        let orig = m.params()[i];
        m.params_mut()[i] = orig + FD_STEP;
        let up = m.loss(&s, &t, true).unwrap();
        m.params_mut()[i] = orig - FD_STEP;
        let down = m.loss(&s, &t, true).unwrap();
        m.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let err = (numeric - grads[i]).abs() / numeric.abs().max(grads[i].abs()).max(FD_FLOOR);
        worst = worst.max(err);
    }
    worst
}
