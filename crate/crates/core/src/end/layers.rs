//! Layer kernels on channel-major activations `[C][N * L * L]`.

use crate::scalar::Scalar;

/// Spatial geometry of a batch of activations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Geom {
    pub batch: usize,
    pub size: usize,
}

impl Geom {
    /// Columns per channel.
    pub fn cols(&self) -> usize {
        self.batch * self.size * self.size
    }
}

/// Periodic `k x k` cross-correlation, stride 1, output the same size.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Conv {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    /// Offset of the `[cout][cin * k * k]` weight matrix.
    pub weight: usize,
    /// Offset of the `[cout]` bias.
    pub bias: usize,
}

impl Conv {
    fn taps(&self) -> usize {
        self.cin * self.kernel * self.kernel
    }

    /// Patch matrix `[cin * k * k][P]` with periodic wrap.
    fn im2col<S: Scalar>(&self, x: &[S], g: Geom) -> Vec<S> {
        let l = g.size;
        let p = g.cols();
        let k = self.kernel;
        let half = (k / 2) as isize;
        let mut cols = vec![S::zero(); self.taps() * p];
        for ci in 0..self.cin {
            let src = &x[ci * p..(ci + 1) * p];
            for dy in 0..k {
                for dx in 0..k {
                    let row = (ci * k + dy) * k + dx;
                    let dst = &mut cols[row * p..(row + 1) * p];
                    let oy = dy as isize - half;
                    let ox = dx as isize - half;
                    for n in 0..g.batch {
                        let base = n * l * l;
                        for r in 0..l {
                            let sr = (r as isize + oy).rem_euclid(l as isize) as usize;
                            let srow = &src[base + sr * l..base + (sr + 1) * l];
                            let drow = &mut dst[base + r * l..base + (r + 1) * l];
                            let shift = ox.rem_euclid(l as isize) as usize;
                            drow[..l - shift].copy_from_slice(&srow[shift..]);
                            drow[l - shift..].copy_from_slice(&srow[..shift]);
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`Self::im2col`]: accumulates patch gradients into `dx`.
    fn col2im<S: Scalar>(&self, dcols: &[S], g: Geom, dx: &mut [S]) {
        let l = g.size;
        let p = g.cols();
        let k = self.kernel;
        let half = (k / 2) as isize;
        for ci in 0..self.cin {
            let dst = &mut dx[ci * p..(ci + 1) * p];
            for dy in 0..k {
                for dx_ in 0..k {
                    let row = (ci * k + dy) * k + dx_;
                    let src = &dcols[row * p..(row + 1) * p];
                    let oy = dy as isize - half;
                    let shift = (dx_ as isize - half).rem_euclid(l as isize) as usize;
                    for n in 0..g.batch {
                        let base = n * l * l;
                        for r in 0..l {
                            let sr = (r as isize + oy).rem_euclid(l as isize) as usize;
                            let srow = &src[base + r * l..base + (r + 1) * l];
                            let drow = &mut dst[base + sr * l..base + (sr + 1) * l];
                            for (d, &s) in drow[shift..].iter_mut().zip(&srow[..l - shift]) {
                                *d += s;
                            }
                            for (d, &s) in drow[..shift].iter_mut().zip(&srow[l - shift..]) {
                                *d += s;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward<S: Scalar>(&self, params: &[S], x: &[S], g: Geom) -> Vec<S> {
        let p = g.cols();
        let w = &params[self.weight..self.weight + self.cout * self.taps()];
        let b = &params[self.bias..self.bias + self.cout];
        let mut out = vec![S::zero(); self.cout * p];
        for (co, row) in out.chunks_mut(p).enumerate() {
            row.fill(b[co]);
        }
        let cols;
        let patches = if self.kernel == 1 {
            x
        } else {
            cols = self.im2col(x, g);
            &cols
        };
        let taps = self.taps();
        S::gemm(self.cout, taps, p, S::one(), w, (taps as isize, 1), patches, (p as isize, 1), S::one(), &mut out, (p as isize, 1));
        out
    }

    /// Accumulates weight and bias gradients; returns the input gradient.
    pub fn backward<S: Scalar>(&self, params: &[S], grads: &mut [S], x: &[S], dout: &[S], g: Geom) -> Vec<S> {
        let p = g.cols();
        let taps = self.taps();
        let cols;
        let patches = if self.kernel == 1 {
            x
        } else {
            cols = self.im2col(x, g);
            &cols
        };
        {
            let dw = &mut grads[self.weight..self.weight + self.cout * taps];
            S::gemm(self.cout, p, taps, S::one(), dout, (p as isize, 1), patches, (1, p as isize), S::one(), dw, (taps as isize, 1));
        }
        for (co, row) in dout.chunks(p).enumerate() {
            grads[self.bias + co] += row.iter().copied().sum::<S>();
        }
        let w = &params[self.weight..self.weight + self.cout * taps];
        let mut dcols = vec![S::zero(); taps * p];
        S::gemm(taps, self.cout, p, S::one(), w, (1, taps as isize), dout, (p as isize, 1), S::zero(), &mut dcols, (p as isize, 1));
        if self.kernel == 1 {
            dcols
        } else {
            let mut dx = vec![S::zero(); self.cin * p];
            self.col2im(&dcols, g, &mut dx);
            dx
        }
    }
}

/// Per-channel normalization: a learned affine map, optionally preceded by
/// batch standardization.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Norm {
    pub channels: usize,
    pub gamma: usize,
    pub beta: usize,
    /// Buffer offsets of running mean and variance when batch norm is on.
    pub running: Option<(usize, usize)>,
}

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

/// What the backward pass needs from a normalization forward.
#[derive(Clone, Debug)]
pub(crate) struct NormCache<S> {
    /// Standardized input (or the raw input for the affine variant).
    pub xhat: Vec<S>,
    /// Per-channel `1 / sqrt(var + eps)` when batch statistics were used.
    pub inv_std: Option<Vec<S>>,
    /// Per-channel batch mean and (biased) variance, for running updates.
    pub batch_stats: Option<(Vec<S>, Vec<S>)>,
}

impl Norm {
    /// `train` selects batch statistics; otherwise running statistics are used.
    pub fn forward<S: Scalar>(&self, params: &[S], buffers: &[S], x: &[S], g: Geom, train: bool) -> (Vec<S>, NormCache<S>) {
        let p = g.cols();
        let mut xhat = x.to_vec();
        let mut inv_std = None;
        let mut batch_stats = None;
        if let Some((mean_off, var_off)) = self.running {
            let eps = S::of(BN_EPS);
            let mut means = vec![S::zero(); self.channels];
            let mut vars = vec![S::zero(); self.channels];
            let mut inv = vec![S::zero(); self.channels];
            let count = S::of(p as f64);
            for c in 0..self.channels {
                let row = &mut xhat[c * p..(c + 1) * p];
                let (mean, var) = if train {
                    let mean = row.iter().copied().sum::<S>() / count;
                    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / count;
                    (mean, var)
                } else {
                    (buffers[mean_off + c], buffers[var_off + c])
                };
                let s = S::one() / (var + eps).sqrt();
                for v in row.iter_mut() {
                    *v = (*v - mean) * s;
                }
                means[c] = mean;
                vars[c] = var;
                inv[c] = s;
            }
            if train {
                inv_std = Some(inv);
                batch_stats = Some((means, vars));
            }
        }
        let mut y = xhat.clone();
        for c in 0..self.channels {
            let (ga, be) = (params[self.gamma + c], params[self.beta + c]);
            for v in &mut y[c * p..(c + 1) * p] {
                *v = ga * *v + be;
            }
        }
        (y, NormCache { xhat, inv_std, batch_stats })
    }

    pub fn backward<S: Scalar>(&self, params: &[S], grads: &mut [S], cache: &NormCache<S>, dy: &[S], g: Geom) -> Vec<S> {
        let p = g.cols();
        let mut dx = vec![S::zero(); self.channels * p];
        let count = S::of(p as f64);
        for c in 0..self.channels {
            let xh = &cache.xhat[c * p..(c + 1) * p];
            let d = &dy[c * p..(c + 1) * p];
            let dgamma: S = xh.iter().zip(d).map(|(&a, &b)| a * b).sum();
            let dbeta: S = d.iter().copied().sum();
            grads[self.gamma + c] += dgamma;
            grads[self.beta + c] += dbeta;
            let ga = params[self.gamma + c];
            let out = &mut dx[c * p..(c + 1) * p];
            match &cache.inv_std {
                Some(inv) => {
                    let scale = ga * inv[c];
                    let mean_d = dbeta / count;
                    let mean_dx = dgamma / count;
                    for ((o, &dv), &xv) in out.iter_mut().zip(d).zip(xh) {
                        *o = scale * (dv - mean_d - xv * mean_dx);
                    }
                }
                None => {
                    debug_assert!(self.running.is_none(), "backward through frozen batch statistics");
                    for (o, &dv) in out.iter_mut().zip(d) {
                        *o = ga * dv;
                    }
                }
            }
        }
        dx
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// `sigmoid(2u)`, equal to `(1 + tanh u) / 2` but cheaper to evaluate.
fn half_one_plus_tanh<S: Scalar>(u: S) -> S {
    S::one() / (S::one() + (-(u + u)).exp())
}

/// GeLU, tanh approximation.
pub(crate) fn gelu<S: Scalar>(x: &[S]) -> Vec<S> {
    let (c, a) = (S::of(GELU_C), S::of(GELU_A));
    x.iter().map(|&v| v * half_one_plus_tanh(c * (v + a * v * v * v))).collect()
}

/// `dx = dy * gelu'(x)`.
pub(crate) fn gelu_backward<S: Scalar>(x: &[S], dy: &[S]) -> Vec<S> {
    let (c, a, two, three) = (S::of(GELU_C), S::of(GELU_A), S::of(2.0), S::of(3.0));
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| {
            let s = half_one_plus_tanh(c * (v + a * v * v * v));
            let ds = two * s * (S::one() - s) * c * (S::one() + three * a * v * v);
            d * (s + v * ds)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct periodic cross-correlation.
    fn naive_conv(conv: &Conv, params: &[f64], x: &[f64], g: Geom) -> Vec<f64> {
        let (l, p, k) = (g.size, g.cols(), conv.kernel);
        let half = (k / 2) as isize;
        let mut out = vec![0.0; conv.cout * p];
        for co in 0..conv.cout {
            for n in 0..g.batch {
                for r in 0..l {
                    for c in 0..l {
                        let mut acc = params[conv.bias + co];
                        for ci in 0..conv.cin {
                            for dy in 0..k {
                                for dx in 0..k {
                                    let sr = (r as isize + dy as isize - half).rem_euclid(l as isize) as usize;
                                    let sc = (c as isize + dx as isize - half).rem_euclid(l as isize) as usize;
                                    let w = params[conv.weight + ((co * conv.cin + ci) * k + dy) * k + dx];
                                    acc += w * x[ci * p + n * l * l + sr * l + sc];
                                }
                            }
                        }
                        out[co * p + n * l * l + r * l + c] = acc;
                    }
                }
            }
        }
        out
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn conv_matches_direct_sum_and_adjoint() {
        for k in [1, 3, 5] {
            let conv = Conv { cin: 3, cout: 4, kernel: k, weight: 0, bias: 4 * 3 * k * k };
            let g = Geom { batch: 2, size: 5 };
            let params = pseudo(conv.bias + 4, k as u64);
            let x = pseudo(3 * g.cols(), 7);
            let y = conv.forward(&params, &x, g);
            let reference = naive_conv(&conv, &params, &x, g);
            for (a, b) in y.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-12);
            }
            // <dy, J dx> == <J^T dy, dx> for the input Jacobian.
            let dy = pseudo(4 * g.cols(), 9);
            let mut grads = vec![0.0; params.len()];
            let dx = conv.backward(&params, &mut grads, &x, &dy, g);
            let v = pseudo(x.len(), 11);
            let mut zero_bias = params.clone();
            zero_bias[conv.bias..].fill(0.0);
            let jv = conv.forward(&zero_bias, &v, g);
            let lhs: f64 = dy.iter().zip(&jv).map(|(a, b)| a * b).sum();
            let rhs: f64 = dx.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn gelu_derivative_matches_difference_quotient() {
        let xs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.1).collect();
        let d = gelu_backward(&xs, &vec![1.0; xs.len()]);
        let h = 1e-6;
        for (i, &x) in xs.iter().enumerate() {
            let num = (gelu(&[x + h])[0] - gelu(&[x - h])[0]) / (2.0 * h);
            assert!((num - d[i]).abs() < 1e-8);
        }
        assert_eq!(gelu(&[0.0f64])[0], 0.0);
        assert!((gelu(&[10.0f64])[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn batch_norm_standardizes() {
        let norm = Norm { channels: 2, gamma: 0, beta: 2, running: Some((0, 2)) };
        let params = [1.0, 1.0, 0.0, 0.0];
        let buffers = [0.0, 0.0, 1.0, 1.0];
        let g = Geom { batch: 2, size: 3 };
        let x = pseudo(2 * g.cols(), 5);
        let (y, cache) = norm.forward(&params, &buffers, &x, g, true);
        for c in 0..2 {
            let row = &y[c * 18..(c + 1) * 18];
            let mean: f64 = row.iter().sum::<f64>() / 18.0;
            let var: f64 = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 18.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
        assert!(cache.batch_stats.is_some());
        let (_, eval) = norm.forward(&params, &buffers, &x, g, false);
        assert!(eval.batch_stats.is_none());
    }
}
