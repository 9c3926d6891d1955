use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::code::{Lattice, LogicalBits, Syndrome};
use crate::error::{Error, Result};
use crate::noise::{sample_batch, Depolarizing, StreamKey};
use crate::scalar::Scalar;

use super::model::{Model, ModelConfig};
use super::optim::{learning_rate, AdamW};

/// Salt separating the evaluation stream from the training stream.
const EVAL_SALT: u64 = 0x6576_616c_5f73_6574;
/// Syndromes per forward pass during evaluation.
const EVAL_CHUNK: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Training lattice size.
    #[serde(rename = "L")]
    pub lattice: usize,
    pub p_train: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub cosine_decay: bool,
    pub seed: u64,
    /// Steps between log rows (each row carries a fresh evaluation).
    pub eval_every: usize,
    pub eval_samples: usize,
    /// Threads sharing each batch; shards are reduced in a fixed order.
    pub workers: usize,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lattice: 3,
            p_train: 0.1,
            batch_size: 128,
            steps: 2000,
            learning_rate: 3e-3,
            weight_decay: 1e-4,
            warmup_steps: 100,
            cosine_decay: true,
            seed: 0,
            eval_every: 250,
            eval_samples: 2048,
            workers: 1,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        Lattice::new(self.lattice)?;
        if !(self.p_train > 0.0 && self.p_train < 1.0) {
            return Err(Error::InvalidParameter(format!("p_train must lie in (0, 1), got {}", self.p_train)));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("steps", self.steps),
            ("eval_every", self.eval_every),
            ("eval_samples", self.eval_samples),
            ("workers", self.workers),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.weight_decay < 0.0 {
            return Err(Error::InvalidParameter("learning rate must be positive and weight decay non-negative".into()));
        }
        if self.workers > self.batch_size {
            return Err(Error::InvalidParameter("more workers than samples per batch".into()));
        }
        self.model.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub step: usize,
    /// Mean training loss since the previous row.
    pub loss: f64,
    pub eval_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fraction of `syndromes` whose predicted class equals the target.
pub fn accuracy<S: Scalar>(model: &Model<S>, syndromes: &[Syndrome], targets: &[LogicalBits]) -> Result<f64> {
    let mut hits = 0usize;
    for (s, t) in syndromes.chunks(EVAL_CHUNK).zip(targets.chunks(EVAL_CHUNK)) {
        hits += model.decode_batch(s)?.iter().zip(t).filter(|(a, b)| a == b).count();
    }
    Ok(hits as f64 / syndromes.len() as f64)
}

/// Trains a fresh 32-bit model.
pub fn train(cfg: &TrainConfig) -> Result<(Model<f32>, TrainLog)> {
    cfg.validate()?;
    let model = Model::new(cfg.model.clone(), cfg.seed)?;
    train_from(cfg, model, |_| {})
}

/// Continues training `model` under `cfg`, reporting each log row.
pub fn train_from<S: Scalar>(
    cfg: &TrainConfig,
    mut model: Model<S>,
    mut progress: impl FnMut(&LogRow),
) -> Result<(Model<S>, TrainLog)> {
    cfg.validate()?;
    let lattice = Lattice::new(cfg.lattice)?;
    let noise = Depolarizing::new(cfg.p_train)?;
    let eval = sample_batch(lattice, &noise, cfg.eval_samples, StreamKey::new(cfg.seed ^ EVAL_SALT, 0))?;
    let eval_s: Vec<Syndrome> = eval.iter().map(|s| s.syndrome.clone()).collect();
    let eval_t: Vec<LogicalBits> = eval.iter().map(|s| s.logical).collect();

    let mut opt = AdamW::<S>::new(model.param_specs(), cfg.weight_decay);
    let mut grads = vec![S::zero(); model.param_count()];
    let mut log = TrainLog::default();
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    for step in 0..cfg.steps {
        let batch = sample_batch(lattice, &noise, cfg.batch_size, StreamKey::new(cfg.seed, step as u64))?;
        let syndromes: Vec<Syndrome> = batch.iter().map(|s| s.syndrome.clone()).collect();
        let targets: Vec<LogicalBits> = batch.iter().map(|s| s.logical).collect();
        grads.fill(S::zero());
        let loss = sharded_step(&model, &syndromes, &targets, cfg.workers, &mut grads)?;
        if !loss.0.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!("training diverged at step {step} (loss {})", loss.0)));
        }
        model.update_running_stats(&loss.1);
        let lr = learning_rate(cfg.learning_rate, step, cfg.steps, cfg.warmup_steps, cfg.cosine_decay);
        opt.step(model.params_mut(), &grads, lr);
        loss_sum += loss.0;
        loss_count += 1;

        if (step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps {
            let row = LogRow {
                step: step + 1,
                loss: loss_sum / loss_count as f64,
                eval_accuracy: accuracy(&model, &eval_s, &eval_t)?,
            };
            progress(&row);
            log.rows.push(row);
            loss_sum = 0.0;
            loss_count = 0;
        }
    }
    Ok((model, log))
}

type StepStats<S> = (f64, Vec<(Vec<S>, Vec<S>)>);
/// Per-shard gradient, loss and batch-norm statistics.
type ShardResult<S> = Result<(Vec<S>, f64, Vec<(Vec<S>, Vec<S>)>)>;

/// Gradient of the batch mean loss. The batch is split into `workers`
/// contiguous shards whose gradients are summed in shard order.
fn sharded_step<S: Scalar>(
    model: &Model<S>,
    syndromes: &[Syndrome],
    targets: &[LogicalBits],
    workers: usize,
    grads: &mut [S],
) -> Result<StepStats<S>> {
    let total = syndromes.len();
    if workers <= 1 {
        let out = model.loss_and_grad(syndromes, targets, S::one(), grads)?;
        return Ok((out.loss.to_f64().unwrap_or(f64::NAN), out.batch_stats));
    }
    let shard = total.div_ceil(workers);
    let results: Vec<ShardResult<S>> = std::thread::scope(|scope| {
        let handles: Vec<_> = syndromes
            .chunks(shard)
            .zip(targets.chunks(shard))
            .map(|(s, t)| {
                scope.spawn(move || {
                    let mut g = vec![S::zero(); model.param_count()];
                    let frac = s.len() as f64 / total as f64;
                    let out = model.loss_and_grad(s, t, S::of(frac), &mut g)?;
                    Ok((g, out.loss.to_f64().unwrap_or(f64::NAN) * frac, out.batch_stats))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect()
    });
    let mut loss = 0.0;
    let mut stats = Vec::new();
    for r in results {
        let (g, l, st) = r?;
        grads.iter_mut().zip(&g).for_each(|(a, b)| *a += *b);
        loss += l;
        if stats.is_empty() {
            stats = st;
        }
    }
    Ok((loss, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> TrainConfig {
        TrainConfig {
            lattice: 3,
            p_train: 0.1,
            batch_size: 32,
            steps: 30,
            eval_every: 10,
            eval_samples: 128,
            model: ModelConfig { channels: vec![4], depth: 1, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(quick().validate().is_ok());
        assert!(TrainConfig { p_train: 0.0, ..quick() }.validate().is_err());
        assert!(TrainConfig { lattice: 4, ..quick() }.validate().is_err());
        assert!(TrainConfig { steps: 0, ..quick() }.validate().is_err());
        assert!(TrainConfig { workers: 64, ..quick() }.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = quick();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"L\":3"));
        let back: TrainConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<TrainConfig>("{\"bogus\": 1}").is_err());
        let partial: TrainConfig = serde_json::from_str("{\"L\": 5, \"model\": {\"channels\": [8]}}").unwrap();
        assert_eq!(partial.lattice, 5);
        assert_eq!(partial.model.kernel, 3);
    }

    #[test]
    fn training_is_deterministic() {
        let (m1, l1) = train(&quick()).unwrap();
        let (m2, l2) = train(&quick()).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(m1.params(), m2.params());
        assert_eq!(l1.rows.len(), 3);
        let mut csv = Vec::new();
        l1.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("step,loss,eval_accuracy\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn loss_falls_below_uniform_within_500_steps() {
        let cfg = TrainConfig { steps: 500, eval_every: 50, batch_size: 64, ..quick() };
        let (_, log) = train(&cfg).unwrap();
        let uniform = 16f64.ln();
        assert!((log.rows[0].loss - uniform).abs() < 0.5, "{}", log.rows[0].loss);
        assert!(log.rows.last().unwrap().loss < 0.7 * uniform, "{:?}", log.rows);
    }

    #[test]
    fn sharded_gradient_matches_single_pass() {
        let cfg = quick();
        let model = Model::<f64>::new(cfg.model.clone(), 1).unwrap();
        let lat = Lattice::new(3).unwrap();
        let batch = sample_batch(lat, &Depolarizing::new(0.2).unwrap(), 12, StreamKey::new(2, 0)).unwrap();
        let s: Vec<Syndrome> = batch.iter().map(|b| b.syndrome.clone()).collect();
        let t: Vec<LogicalBits> = batch.iter().map(|b| b.logical).collect();
        let mut g1 = vec![0.0; model.param_count()];
        let mut g3 = vec![0.0; model.param_count()];
        let (l1, _) = sharded_step(&model, &s, &t, 1, &mut g1).unwrap();
        let (l3, _) = sharded_step(&model, &s, &t, 3, &mut g3).unwrap();
        assert!((l1 - l3).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g3) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nan_is_reported_as_numerical_failure() {
        let cfg = quick();
        let mut model = Model::<f32>::new(cfg.model.clone(), 0).unwrap();
        model.params_mut()[0] = f32::NAN;
        let err = train_from(&cfg, model, |_| {}).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert_eq!(err.exit_code(), 4);
    }
}
