use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::code::{LogicalBits, Syndrome};
use crate::error::{Error, Result};
use crate::logical::LogicalTensor;
use crate::scalar::Scalar;

use super::layers::{gelu, gelu_backward, Conv, Geom, Norm, NormCache, BN_MOMENTUM};
use super::pool::{masks_for, pool_backward, pool_forward, Pooling};
use super::tensor::Tensor4;

/// Negative slope whose leaky-ReLU gain scales the uniform initialization.
pub const INIT_SLOPE: f64 = 0.01;

/// Network shape. Independent of the lattice size: the same weights apply
/// to any `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Channel width of each block; the stem maps the input to `channels[0]`.
    pub channels: Vec<usize>,
    /// Residual units per block.
    pub depth: usize,
    /// Odd convolution kernel size.
    pub kernel: usize,
    pub pooling: Pooling,
    /// Standardize with batch statistics before each per-channel affine map.
    pub batch_norm: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { channels: vec![16, 32], depth: 1, kernel: 3, pooling: Pooling::Twisted, batch_norm: false }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::InvalidParameter("channel plan must be non-empty and positive".into()));
        }
        if self.depth == 0 {
            return Err(Error::InvalidParameter("block depth must be at least 1".into()));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("kernel size must be odd, got {}", self.kernel)));
        }
        Ok(())
    }
}

/// Name, shape and storage offset of one parameter or buffer tensor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
struct Unit {
    conv1: Conv,
    norm1: Norm,
    conv2: Conv,
    norm2: Norm,
    shortcut: Option<Conv>,
}

#[derive(Clone, Debug)]
struct Arch {
    stem: Conv,
    stem_norm: Norm,
    units: Vec<Unit>,
    head: Conv,
}

#[derive(Default)]
struct Layout {
    params: Vec<TensorSpec>,
    buffers: Vec<TensorSpec>,
    param_len: usize,
    buffer_len: usize,
}

impl Layout {
    fn param(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.param_len;
        self.param_len += shape.iter().product::<usize>();
        self.params.push(TensorSpec { name, shape, offset });
        offset
    }

    fn buffer(&mut self, name: String, len: usize) -> usize {
        let offset = self.buffer_len;
        self.buffer_len += len;
        self.buffers.push(TensorSpec { name, shape: vec![len], offset });
        offset
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, kernel: usize) -> Conv {
        let weight = self.param(format!("{name}.weight"), vec![cout, cin, kernel, kernel]);
        let bias = self.param(format!("{name}.bias"), vec![cout]);
        Conv { cin, cout, kernel, weight, bias }
    }

    fn norm(&mut self, name: &str, channels: usize, batch_norm: bool) -> Norm {
        let gamma = self.param(format!("{name}.gamma"), vec![channels]);
        let beta = self.param(format!("{name}.beta"), vec![channels]);
        let running = batch_norm.then(|| {
            (self.buffer(format!("{name}.running_mean"), channels), self.buffer(format!("{name}.running_var"), channels))
        });
        Norm { channels, gamma, beta, running }
    }
}

fn build(config: &ModelConfig) -> (Arch, Layout) {
    let mut lay = Layout::default();
    let k = config.kernel;
    let bn = config.batch_norm;
    let c0 = config.channels[0];
    let stem = lay.conv("stem.conv", 2, c0, k);
    let stem_norm = lay.norm("stem.norm", c0, bn);
    let mut units = Vec::new();
    let mut cin = c0;
    for (b, &ch) in config.channels.iter().enumerate() {
        for u in 0..config.depth {
            let name = format!("block{b}.unit{u}");
            let conv1 = lay.conv(&format!("{name}.conv1"), cin, ch, k);
            let norm1 = lay.norm(&format!("{name}.norm1"), ch, bn);
            let conv2 = lay.conv(&format!("{name}.conv2"), ch, ch, k);
            let norm2 = lay.norm(&format!("{name}.norm2"), ch, bn);
            let shortcut = (cin != ch).then(|| lay.conv(&format!("{name}.shortcut"), cin, ch, 1));
            units.push(Unit { conv1, norm1, conv2, norm2, shortcut });
            cin = ch;
        }
    }
    let head = lay.conv("head", cin, 16, 1);
    (Arch { stem, stem_norm, units, head }, lay)
}

/// The equivariant decoder: a periodic residual CNN producing a 16-class
/// logit field over positions, followed by (twisted) global pooling.
#[derive(Clone, Debug)]
pub struct Model<S> {
    config: ModelConfig,
    arch: Arch,
    param_specs: Vec<TensorSpec>,
    buffer_specs: Vec<TensorSpec>,
    params: Vec<S>,
    buffers: Vec<S>,
}

struct UnitCache<S> {
    input: Vec<S>,
    n1_cache: NormCache<S>,
    n1: Vec<S>,
    g1: Vec<S>,
    n2_cache: NormCache<S>,
    pre: Vec<S>,
}

struct Cache<S> {
    geom: Geom,
    input: Vec<S>,
    stem_cache: NormCache<S>,
    stem_n: Vec<S>,
    units: Vec<UnitCache<S>>,
    head_in: Vec<S>,
    masks: Option<Vec<Vec<LogicalBits>>>,
}

/// Batch loss with its gradient accumulated into a caller buffer.
#[derive(Clone, Debug)]
pub struct LossOutput<S> {
    /// Mean cross entropy over the batch.
    pub loss: S,
    /// Number of samples whose argmax matched the target.
    pub correct: usize,
    /// Batch statistics of every batch-norm layer, in layer order.
    pub batch_stats: Vec<(Vec<S>, Vec<S>)>,
}

impl<S: Scalar> Model<S> {
    /// Fresh model with fan-in scaled uniform weights drawn from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (arch, lay) = build(&config);
        let mut params = vec![S::zero(); lay.param_len];
        let mut buffers = vec![S::zero(); lay.buffer_len];
        let gain = (2.0 / (1.0 + INIT_SLOPE * INIT_SLOPE)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for spec in &lay.params {
            let slot = &mut params[spec.offset..spec.offset + spec.len()];
            if spec.name.ends_with(".weight") {
                let fan_in: usize = spec.shape[1..].iter().product();
                let bound = gain * (3.0 / fan_in as f64).sqrt();
                for v in slot {
                    *v = S::of(rng.random_range(-bound..bound));
                }
            } else if spec.name.ends_with(".gamma") {
                slot.fill(S::one());
            }
        }
        for spec in &lay.buffers {
            if spec.name.ends_with(".running_var") {
                buffers[spec.offset..spec.offset + spec.len()].fill(S::one());
            }
        }
        Ok(Self { config, arch, param_specs: lay.params, buffer_specs: lay.buffers, params, buffers })
    }

    /// Rebuilds a model from stored tensors; lengths must match the config.
    pub fn from_parts(config: ModelConfig, params: Vec<S>, buffers: Vec<S>) -> Result<Self> {
        config.validate()?;
        let (arch, lay) = build(&config);
        if params.len() != lay.param_len || buffers.len() != lay.buffer_len {
            return Err(Error::Shape(format!(
                "expected {} parameters and {} buffers, found {} and {}",
                lay.param_len,
                lay.buffer_len,
                params.len(),
                buffers.len()
            )));
        }
        Ok(Self { config, arch, param_specs: lay.params, buffer_specs: lay.buffers, params, buffers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    pub fn buffers(&self) -> &[S] {
        &self.buffers
    }

    pub fn param_specs(&self) -> &[TensorSpec] {
        &self.param_specs
    }

    pub fn buffer_specs(&self) -> &[TensorSpec] {
        &self.buffer_specs
    }

    /// Same architecture and values in another float width.
    pub fn cast<T: Scalar>(&self) -> Model<T> {
        let conv = |v: &S| T::of(v.to_f64().expect("finite parameter"));
        Model {
            config: self.config.clone(),
            arch: self.arch.clone(),
            param_specs: self.param_specs.clone(),
            buffer_specs: self.buffer_specs.clone(),
            params: self.params.iter().map(conv).collect(),
            buffers: self.buffers.iter().map(conv).collect(),
        }
    }

    fn norms(&self) -> impl Iterator<Item = &Norm> {
        std::iter::once(&self.arch.stem_norm).chain(self.arch.units.iter().flat_map(|u| [&u.norm1, &u.norm2]))
    }

    fn run(&self, syndromes: &[Syndrome], train: bool) -> Result<(Vec<S>, Cache<S>)> {
        let input = Tensor4::<S>::encode(syndromes)?;
        let geom = Geom { batch: input.batch(), size: input.size() };
        let input = input.into_data();
        let (p, b) = (&self.params, &self.buffers);

        let stem_c = self.arch.stem.forward(p, &input, geom);
        let (stem_n, stem_cache) = self.arch.stem_norm.forward(p, b, &stem_c, geom, train);
        let mut h = gelu(&stem_n);
        let mut units = Vec::with_capacity(self.arch.units.len());
        for unit in &self.arch.units {
            let c1 = unit.conv1.forward(p, &h, geom);
            let (n1, n1_cache) = unit.norm1.forward(p, b, &c1, geom, train);
            let g1 = gelu(&n1);
            let c2 = unit.conv2.forward(p, &g1, geom);
            let (mut pre, n2_cache) = unit.norm2.forward(p, b, &c2, geom, train);
            match &unit.shortcut {
                Some(sc) => {
                    let s = sc.forward(p, &h, geom);
                    pre.iter_mut().zip(&s).for_each(|(a, b)| *a += *b);
                }
                None => pre.iter_mut().zip(&h).for_each(|(a, b)| *a += *b),
            }
            let out = gelu(&pre);
            units.push(UnitCache { input: h, n1_cache, n1, g1, n2_cache, pre });
            h = out;
        }
        let field = self.arch.head.forward(p, &h, geom);
        let masks = masks_for(self.config.pooling, syndromes);
        let cache = Cache { geom, input, stem_cache, stem_n, units, head_in: h, masks };
        Ok((field, cache))
    }

    fn backward(&self, cache: Cache<S>, dlogits: &[LogicalTensor<S>], grads: &mut [S]) {
        let g = cache.geom;
        let p = &self.params;
        let area = g.size * g.size;
        let dfield = pool_backward(dlogits, area, cache.masks.as_deref());
        let mut dh = self.arch.head.backward(p, grads, &cache.head_in, &dfield, g);
        for (unit, uc) in self.arch.units.iter().zip(cache.units).rev() {
            let dpre = gelu_backward(&uc.pre, &dh);
            let mut dinput = match &unit.shortcut {
                Some(sc) => sc.backward(p, grads, &uc.input, &dpre, g),
                None => dpre.clone(),
            };
            let dc2 = unit.norm2.backward(p, grads, &uc.n2_cache, &dpre, g);
            let dg1 = unit.conv2.backward(p, grads, &uc.g1, &dc2, g);
            let dn1 = gelu_backward(&uc.n1, &dg1);
            let dc1 = unit.norm1.backward(p, grads, &uc.n1_cache, &dn1, g);
            let dx = unit.conv1.backward(p, grads, &uc.input, &dc1, g);
            dinput.iter_mut().zip(&dx).for_each(|(a, b)| *a += *b);
            dh = dinput;
        }
        let dn = gelu_backward(&cache.stem_n, &dh);
        let dc = self.arch.stem_norm.backward(p, grads, &cache.stem_cache, &dn, g);
        // The input gradient is not needed; only accumulate stem parameters.
        let _ = self.arch.stem.backward(p, grads, &cache.input, &dc, g);
    }

    /// Per-position logit field `(batch, 16, L, L)`, inference mode.
    pub fn forward_body(&self, syndromes: &[Syndrome]) -> Result<Tensor4<S>> {
        let (field, cache) = self.run(syndromes, false)?;
        Tensor4::from_data(cache.geom.batch, 16, cache.geom.size, field)
    }

    /// Pooled class logits, inference mode.
    pub fn logits(&self, syndromes: &[Syndrome]) -> Result<Vec<LogicalTensor<S>>> {
        let (field, cache) = self.run(syndromes, false)?;
        let area = cache.geom.size * cache.geom.size;
        Ok(pool_forward(&field, cache.geom.batch, area, cache.masks.as_deref()))
    }

    /// Class probabilities for each syndrome.
    pub fn predict_batch(&self, syndromes: &[Syndrome]) -> Result<Vec<LogicalTensor<S>>> {
        Ok(self.logits(syndromes)?.iter().map(LogicalTensor::softmax).collect())
    }

    pub fn predict(&self, syndrome: &Syndrome) -> Result<LogicalTensor<S>> {
        Ok(self.predict_batch(std::slice::from_ref(syndrome))?.remove(0))
    }

    /// Most likely class for each syndrome.
    pub fn decode_batch(&self, syndromes: &[Syndrome]) -> Result<Vec<LogicalBits>> {
        Ok(self.logits(syndromes)?.iter().map(LogicalTensor::argmax).collect())
    }

    /// Mean cross entropy of `targets` without gradients.
    pub fn loss(&self, syndromes: &[Syndrome], targets: &[LogicalBits], train: bool) -> Result<S> {
        check_targets(syndromes, targets)?;
        let (field, cache) = self.run(syndromes, train)?;
        let area = cache.geom.size * cache.geom.size;
        let logits = pool_forward(&field, cache.geom.batch, area, cache.masks.as_deref());
        let total: S = logits.iter().zip(targets).map(|(l, &t)| cross_entropy(l, t).0).sum();
        Ok(total / S::of(targets.len() as f64))
    }

    /// Mean cross entropy over the batch; adds `scale * d(loss)/d(params)`
    /// into `grads`. Training mode (batch statistics when enabled).
    pub fn loss_and_grad(
        &self,
        syndromes: &[Syndrome],
        targets: &[LogicalBits],
        scale: S,
        grads: &mut [S],
    ) -> Result<LossOutput<S>> {
        check_targets(syndromes, targets)?;
        if grads.len() != self.params.len() {
            return Err(Error::Shape(format!("gradient buffer has {} entries, need {}", grads.len(), self.params.len())));
        }
        let (field, cache) = self.run(syndromes, true)?;
        let area = cache.geom.size * cache.geom.size;
        let logits = pool_forward(&field, cache.geom.batch, area, cache.masks.as_deref());
        let n = S::of(targets.len() as f64);
        let mut loss = S::zero();
        let mut correct = 0;
        let mut dlogits = Vec::with_capacity(logits.len());
        for (l, &t) in logits.iter().zip(targets) {
            let (nll, mut d) = cross_entropy(l, t);
            loss += nll;
            correct += usize::from(l.argmax() == t);
            d.0.iter_mut().for_each(|v| *v = *v * scale / n);
            dlogits.push(d);
        }
        let mut batch_stats = Vec::new();
        batch_stats.extend(cache.stem_cache.batch_stats.clone());
        for uc in &cache.units {
            batch_stats.extend(uc.n1_cache.batch_stats.clone());
            batch_stats.extend(uc.n2_cache.batch_stats.clone());
        }
        self.backward(cache, &dlogits, grads);
        Ok(LossOutput { loss: loss / n, correct, batch_stats })
    }

    /// Moves running batch-norm statistics toward `stats` (layer order as in
    /// [`LossOutput::batch_stats`]).
    pub fn update_running_stats(&mut self, stats: &[(Vec<S>, Vec<S>)]) {
        let m = S::of(BN_MOMENTUM);
        let slots: Vec<(usize, usize, usize)> =
            self.norms().filter_map(|n| n.running.map(|(a, b)| (a, b, n.channels))).collect();
        for ((mean_off, var_off, ch), (mean, var)) in slots.into_iter().zip(stats) {
            for c in 0..ch {
                let rm = &mut self.buffers[mean_off + c];
                *rm = (S::one() - m) * *rm + m * mean[c];
                let rv = &mut self.buffers[var_off + c];
                *rv = (S::one() - m) * *rv + m * var[c];
            }
        }
    }
}

fn check_targets(syndromes: &[Syndrome], targets: &[LogicalBits]) -> Result<()> {
    if syndromes.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    if syndromes.len() != targets.len() {
        return Err(Error::Shape(format!("{} syndromes but {} targets", syndromes.len(), targets.len())));
    }
    Ok(())
}

/// Negative log-softmax at `target` and its gradient with respect to the logits.
pub fn cross_entropy<S: Scalar>(logits: &LogicalTensor<S>, target: LogicalBits) -> (S, LogicalTensor<S>) {
    let max = logits.0.iter().copied().fold(S::neg_infinity(), S::max);
    let lse = max + logits.0.iter().map(|&v| (v - max).exp()).sum::<S>().ln();
    let mut grad = logits.softmax();
    grad[target] -= S::one();
    (lse - logits[target], grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Lattice;
    use crate::noise::{sample_one, Depolarizing, StreamKey};

    fn tiny(pooling: Pooling, batch_norm: bool) -> ModelConfig {
        ModelConfig { channels: vec![4, 6], depth: 1, kernel: 3, pooling, batch_norm }
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig { channels: vec![], ..Default::default() }.validate().is_err());
        assert!(ModelConfig { depth: 0, ..Default::default() }.validate().is_err());
        assert!(ModelConfig { kernel: 2, ..Default::default() }.validate().is_err());
        assert!(Model::<f32>::new(ModelConfig::default(), 0).is_ok());
    }

    #[test]
    fn param_table_is_contiguous() {
        let m = Model::<f64>::new(tiny(Pooling::Twisted, true), 1).unwrap();
        let mut next = 0;
        for spec in m.param_specs() {
            assert_eq!(spec.offset, next);
            next += spec.len();
        }
        assert_eq!(next, m.param_count());
        assert_eq!(m.buffer_specs().len(), 2 * 5);
        // stem 2->4 (3x3), unit 4->4, unit 4->6 with 1x1 shortcut, head 6->16.
        let convs = (4 * 2 * 9 + 4) + 2 * (4 * 4 * 9 + 4) + (6 * 4 * 9 + 6) + (6 * 6 * 9 + 6) + (6 * 4 + 6) + (16 * 6 + 16);
        let norms = 2 * (4 + 4 + 4 + 6 + 6);
        assert_eq!(m.param_count(), convs + norms);
    }

    #[test]
    fn cross_entropy_edge_cases() {
        let uniform = LogicalTensor::<f64>::zeros();
        let (l, _) = cross_entropy(&uniform, LogicalBits::from_index(5));
        assert!((l - 16f64.ln()).abs() < 1e-12);
        let mut sharp = LogicalTensor::<f64>::zeros();
        sharp.0[2] = 1e3;
        let (l, g) = cross_entropy(&sharp, LogicalBits::from_index(2));
        assert!(l.abs() < 1e-12);
        assert!(g.0.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn identical_inputs_give_identical_outputs() {
        let lat = Lattice::new(5).unwrap();
        let model = Depolarizing::new(0.15).unwrap();
        let s = sample_one(lat, &model, &mut StreamKey::new(1, 0).rng(), false).syndrome;
        let m = Model::<f32>::new(tiny(Pooling::Twisted, false), 3).unwrap();
        let out = m.logits(&[s.clone(), s]).unwrap();
        assert_eq!(out[0], out[1]);
        let p = m.predict(&Syndrome::zero(lat)).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_input_gives_constant_field() {
        let lat = Lattice::new(5).unwrap();
        let m = Model::<f64>::new(tiny(Pooling::Twisted, false), 4).unwrap();
        let f = m.forward_body(&[Syndrome::zero(lat)]).unwrap();
        for c in 0..16 {
            for r in 0..5 {
                for col in 0..5 {
                    assert!((f.get(0, c, r, col) - f.get(0, c, 0, 0)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cast_round_trip_preserves_outputs() {
        let lat = Lattice::new(3).unwrap();
        let m = Model::<f64>::new(tiny(Pooling::Twisted, false), 5).unwrap();
        let s = sample_one(lat, &Depolarizing::new(0.2).unwrap(), &mut StreamKey::new(2, 0).rng(), false).syndrome;
        let a = m.logits(std::slice::from_ref(&s)).unwrap();
        let b = m.cast::<f32>().cast::<f64>().logits(&[s]).unwrap();
        assert!(a[0].max_abs_diff(&b[0]) < 1e-5);
    }
}
