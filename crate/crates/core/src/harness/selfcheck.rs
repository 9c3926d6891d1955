//! Invariant suite behind the `selfcheck` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::code::{Lattice, LogicalBits, PauliError, Syndrome};
use crate::end::{Model, ModelConfig, Pooling};
use crate::exact::{exact_distribution_with, representative_error, StabilizerGroup};
use crate::mwpm::{min_weight_perfect_matching, MwpmDecoder};
use crate::noise::{sample_one, Depolarizing, StreamKey};
use crate::symmetry::{all_twists, apply_twist, translate_error, translate_syndrome, twist};
use crate::{LogicalTensor, Translation};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: std::result::Result<String, String>) -> Check {
    match result {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn samples(lattice: Lattice, p: f64, count: usize, seed: u64, keep_error: bool) -> Vec<crate::noise::Sample> {
    let model = Depolarizing::new(p).expect("valid rate");
    let mut rng = StreamKey::new(seed, 0).rng();
    (0..count).map(|_| sample_one(lattice, &model, &mut rng, keep_error)).collect()
}

fn random_stabilizer(lattice: Lattice, rng: &mut ChaCha8Rng) -> PauliError {
    let l = lattice.size() as isize;
    let mut s = PauliError::identity(lattice);
    for r in 0..l {
        for c in 0..l {
            if rng.random_bool(0.5) {
                s ^= &lattice.stabilizer_x(r, c);
            }
            if rng.random_bool(0.5) {
                s ^= &lattice.stabilizer_z(r, c);
            }
        }
    }
    s
}

/// Translation pairs to test: all of them on small lattices, a sample otherwise.
fn translation_pairs(lattice: Lattice, rng: &mut ChaCha8Rng) -> Vec<(Translation, Translation)> {
    let all: Vec<Translation> = Translation::all(lattice).collect();
    if all.len() <= 25 {
        all.iter().flat_map(|&g| all.iter().map(move |&h| (g, h))).collect()
    } else {
        (0..400)
            .map(|_| (all[rng.random_range(0..all.len())], all[rng.random_range(0..all.len())]))
            .collect()
    }
}

fn brute_force_matching(n: usize, d: &dyn Fn(usize, usize) -> usize, used: &mut [bool]) -> usize {
    let Some(i) = (0..n).find(|&i| !used[i]) else {
        return 0;
    };
    used[i] = true;
    let mut best = usize::MAX;
    for j in i + 1..n {
        if !used[j] {
            used[j] = true;
            best = best.min(d(i, j) + brute_force_matching(n, d, used));
            used[j] = false;
        }
    }
    used[i] = false;
    best
}

/// Runs every invariant on `lattice` (the exact oracle always uses `L = 3`).
pub fn run(lattice: Lattice, seed: u64) -> Vec<Check> {
    let l = lattice.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    out.push(check("stabilizers have trivial syndrome", (|| {
        for r in 0..l as isize {
            for c in 0..l as isize {
                for s in [lattice.stabilizer_x(r, c), lattice.stabilizer_z(r, c)] {
                    ensure(lattice.syndrome(&s).map_err(|e| e.to_string())?.is_zero(), || {
                        format!("stabilizer at ({r},{c}) anticommutes with a check")
                    })?;
                    ensure(lattice.logical_content(&s).map_err(|e| e.to_string())? == LogicalBits::ZERO, || {
                        format!("stabilizer at ({r},{c}) has logical content")
                    })?;
                }
            }
        }
        Ok(format!("{} stabilizers", 2 * l * l))
    })()));

    out.push(check("logical operators", (|| {
        let expected = [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]];
        for (op, bits) in lattice.logical_operators().iter().zip(expected) {
            ensure(lattice.syndrome(op).map_err(|e| e.to_string())?.is_zero(), || "logical has a syndrome".into())?;
            let got = lattice.logical_content(op).map_err(|e| e.to_string())?;
            ensure(got == LogicalBits::from_bits(bits), || format!("logical content {got}, expected {bits:?}"))?;
        }
        Ok("commutation structure (X1,Z1) and (X2,Z2) anticommuting".into())
    })()));

    out.push(check("sampled syndromes have even parity", (|| {
        let n = 10_000;
        for s in samples(lattice, 0.3, n, seed, false) {
            ensure(s.syndrome.is_valid(), || "odd-parity syndrome".into())?;
        }
        Ok(format!("{n} samples"))
    })()));

    out.push(check("stabilizer invariance of syndrome and logical content", (|| {
        for s in samples(lattice, 0.2, 200, seed + 1, true) {
            let e = s.error.expect("error kept");
            let moved = &e ^ &random_stabilizer(lattice, &mut rng);
            ensure(lattice.syndrome(&moved).map_err(|x| x.to_string())? == s.syndrome, || "syndrome changed".into())?;
            ensure(lattice.logical_content(&moved).map_err(|x| x.to_string())? == s.logical, || {
                "logical content changed".into()
            })?;
        }
        Ok("200 errors".into())
    })()));

    let syn = samples(lattice, 0.2, 50, seed + 2, true);

    out.push(check("translation commutes with the syndrome map", (|| {
        for s in &syn {
            let e = s.error.as_ref().expect("error kept");
            for g in Translation::all(lattice) {
                let lhs = lattice.syndrome(&translate_error(g, e)).map_err(|x| x.to_string())?;
                ensure(lhs == translate_syndrome(g, &s.syndrome), || format!("mismatch at {g:?}"))?;
            }
        }
        Ok(format!("{} errors x {} translations", syn.len(), l * l))
    })()));

    out.push(check("twist homomorphism law", (|| {
        let pairs = translation_pairs(lattice, &mut rng);
        for s in &syn {
            for &(g, h) in &pairs {
                let lhs = twist(g.compose(h), &s.syndrome);
                let rhs = twist(g, &s.syndrome).compose(twist(h, &translate_syndrome(g.inverse(), &s.syndrome)));
                ensure(lhs == rhs, || format!("law fails at g={g:?}, h={h:?}"))?;
            }
        }
        Ok(format!("{} syndromes x {} pairs", syn.len(), pairs.len()))
    })()));

    out.push(check("twist grid recursion equals direct computation", (|| {
        for s in &syn {
            let grid = all_twists(&s.syndrome);
            for g in Translation::all(lattice) {
                ensure(grid.get(g, lattice) == twist(g, &s.syndrome), || format!("mismatch at {g:?}"))?;
            }
        }
        Ok(format!("{} syndromes", syn.len()))
    })()));

    out.push(check("exact oracle invariance (L=3)", (|| {
        let l3 = Lattice::new(3).expect("valid");
        let group = StabilizerGroup::new(l3).map_err(|e| e.to_string())?;
        let noise = Depolarizing::new(0.1).expect("valid");
        let mut worst = 0.0f64;
        for s in samples(l3, 0.2, 20, seed + 3, false) {
            let base: LogicalTensor<f64> = exact_distribution_with(&group, &s.syndrome, &noise).map_err(|e| e.to_string())?;
            let base = base.normalized();
            for gamma in LogicalBits::all() {
                let rep = representative_error(&s.syndrome, gamma).map_err(|e| e.to_string())?;
                ensure(l3.syndrome(&rep).map_err(|e| e.to_string())? == s.syndrome, || "representative syndrome".into())?;
                ensure(l3.logical_content(&rep).map_err(|e| e.to_string())? == gamma, || "representative class".into())?;
            }
            for g in Translation::all(l3) {
                let pulled = translate_syndrome(g.inverse(), &s.syndrome);
                let moved: LogicalTensor<f64> = exact_distribution_with(&group, &pulled, &noise).map_err(|e| e.to_string())?;
                worst = worst.max(base.max_abs_diff(&apply_twist(twist(g, &s.syndrome), &moved.normalized())));
            }
        }
        ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
        Ok(format!("max deviation {worst:e}"))
    })()));

    out.push(check("matching correction reproduces the syndrome", (|| {
        let dec = MwpmDecoder::new(lattice);
        for s in samples(lattice, 0.15, 200, seed + 4, false) {
            let c = dec.correction(&s.syndrome).map_err(|e| e.to_string())?;
            ensure(lattice.syndrome(&c).map_err(|e| e.to_string())? == s.syndrome, || "syndrome mismatch".into())?;
        }
        Ok("200 syndromes".into())
    })()));

    out.push(check("blossom matching optimal vs enumeration", (|| {
        for _ in 0..100 {
            let n = 2 * rng.random_range(1..=5);
            let pts: Vec<(usize, usize)> = (0..n).map(|_| (rng.random_range(0..l), rng.random_range(0..l))).collect();
            let d = |i: usize, j: usize| crate::mwpm::torus_distance(l, pts[i], pts[j]);
            let pairs = min_weight_perfect_matching(n, d);
            let cost: usize = pairs.iter().map(|&(i, j)| d(i, j)).sum();
            let best = brute_force_matching(n, &d, &mut vec![false; n]);
            ensure(cost == best, || format!("cost {cost}, optimum {best}"))?;
        }
        Ok("100 instances with up to 10 defects".into())
    })()));

    out.push(check("neural predictor invariance (random weights)", (|| {
        let cfg = ModelConfig { channels: vec![8], depth: 1, ..Default::default() };
        let m = Model::<f32>::new(cfg, seed).map_err(|e| e.to_string())?;
        let batch: Vec<Syndrome> = syn.iter().take(10).map(|s| s.syndrome.clone()).collect();
        let base = m.predict_batch(&batch).map_err(|e| e.to_string())?;
        let mut worst = 0.0f32;
        for g in Translation::all(lattice) {
            let pulled: Vec<Syndrome> = batch.iter().map(|s| translate_syndrome(g.inverse(), s)).collect();
            let moved = m.predict_batch(&pulled).map_err(|e| e.to_string())?;
            for ((s, a), b) in batch.iter().zip(&base).zip(&moved) {
                worst = worst.max(a.max_abs_diff(&apply_twist(twist(g, s), b)));
            }
        }
        ensure(worst <= 1e-5, || format!("max deviation {worst:e}"))?;
        Ok(format!("max deviation {worst:e}"))
    })()));

    out.push(check("gradient matches finite differences (f64, L=3)", (|| {
        let cfg = ModelConfig { channels: vec![4], depth: 1, pooling: Pooling::Twisted, ..Default::default() };
        let mut m = Model::<f64>::new(cfg, seed).map_err(|e| e.to_string())?;
        let l3 = Lattice::new(3).expect("valid");
        let batch = samples(l3, 0.25, 4, seed + 5, false);
        let s: Vec<Syndrome> = batch.iter().map(|b| b.syndrome.clone()).collect();
        let t: Vec<LogicalBits> = batch.iter().map(|b| b.logical).collect();
        let mut grads = vec![0.0; m.param_count()];
        m.loss_and_grad(&s, &t, 1.0, &mut grads).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..m.param_count() {
            let orig = m.params()[i];
            m.params_mut()[i] = orig + h;
            let up = m.loss(&s, &t, true).map_err(|e| e.to_string())?;
            m.params_mut()[i] = orig - h;
            let down = m.loss(&s, &t, true).map_err(|e| e.to_string())?;
            m.params_mut()[i] = orig;
            let num = (up - down) / (2.0 * h);
            worst = worst.max((num - grads[i]).abs() / num.abs().max(grads[i].abs()).max(1e-6));
        }
        ensure(worst <= 1e-4, || format!("worst relative error {worst:e}"))?;
        Ok(format!("{} parameters, worst relative error {worst:e}", m.param_count()))
    })()));

    out
}
