use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::code::{Lattice, Syndrome};
use crate::error::{Error, Result};
use crate::noise::{sample_batch, Depolarizing, StreamKey};

use super::{Decoder, DecoderKind};

/// Samples per random-stream block. Blocks are keyed by index, so the
/// sample sequence does not depend on how blocks are spread over workers.
pub const EVAL_BLOCK: usize = 1024;

/// Outcome of decoding `n_samples` fresh samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub decoder: String,
    #[serde(rename = "L")]
    pub lattice: usize,
    pub p: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Fraction of samples whose decoded class equals the true class.
    pub p_acc: f64,
    /// Binomial standard error `sqrt(p_acc (1 - p_acc) / n)`.
    pub std_err: f64,
    /// Seconds.
    pub wall_time: f64,
}

impl EvalReport {
    fn new(decoder: &str, lattice: Lattice, p: f64, n: usize, seed: u64, hits: usize, wall_time: f64) -> Self {
        let p_acc = hits as f64 / n as f64;
        Self {
            decoder: decoder.to_string(),
            lattice: lattice.size(),
            p,
            n_samples: n,
            seed,
            p_acc,
            std_err: (p_acc * (1.0 - p_acc) / n as f64).sqrt(),
            wall_time,
        }
    }
}

/// Accuracy of `kind` at depolarizing rate `p` on `n` samples.
pub fn evaluate(kind: &DecoderKind, lattice: Lattice, p: f64, n: usize, seed: u64, workers: usize) -> Result<EvalReport> {
    evaluate_with(kind.id(), lattice, p, n, seed, workers, || kind.build(lattice, p))
}

/// Like [`evaluate`] with a custom decoder factory; each worker builds its
/// own decoder and handles blocks `w, w + workers, ...`.
pub fn evaluate_with<F>(
    id: &str,
    lattice: Lattice,
    p: f64,
    n: usize,
    seed: u64,
    workers: usize,
    make: F,
) -> Result<EvalReport>
where
    F: Fn() -> Result<Box<dyn Decoder>> + Sync,
{
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    if workers == 0 {
        return Err(Error::InvalidParameter("worker count must be positive".into()));
    }
    let noise = Depolarizing::new(p)?;
    let blocks = n.div_ceil(EVAL_BLOCK);
    let workers = workers.min(blocks);
    let start = Instant::now();

    let run = |w: usize| -> Result<usize> {
        let mut decoder = make()?;
        let mut hits = 0;
        for b in (w..blocks).step_by(workers) {
            let count = EVAL_BLOCK.min(n - b * EVAL_BLOCK);
            let samples = sample_batch(lattice, &noise, count, StreamKey::new(seed, b as u64))?;
            let syndromes: Vec<Syndrome> = samples.iter().map(|s| s.syndrome.clone()).collect();
            let decoded = decoder.decode_batch(&syndromes)?;
            hits += decoded.iter().zip(&samples).filter(|(d, s)| **d == s.logical).count();
        }
        Ok(hits)
    };

    let hits = if workers == 1 {
        run(0)?
    } else {
        let results: Vec<Result<usize>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers).map(|w| scope.spawn(move || run(w))).collect();
            handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
        });
        let mut total = 0;
        for r in results {
            total += r?;
        }
        total
    };
    Ok(EvalReport::new(id, lattice, p, n, seed, hits, start.elapsed().as_secs_f64()))
}

/// CSV with a format comment line, then one row per report.
pub fn write_reports_csv<W: Write>(mut out: W, reports: &[EvalReport]) -> Result<()> {
    writeln!(out, "# toric-eval v1")?;
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_always_decoded() {
        for (kind, l) in [(DecoderKind::Mwpm, 5), (DecoderKind::Mld, 3)] {
            let lat = Lattice::new(l).unwrap();
            let r = evaluate(&kind, lat, 0.0, 500, 1, 1).unwrap();
            assert_eq!(r.p_acc, 1.0);
            assert_eq!(r.std_err, 0.0);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let lat = Lattice::new(5).unwrap();
        let a = evaluate(&DecoderKind::Mwpm, lat, 0.12, 3000, 9, 1).unwrap();
        let b = evaluate(&DecoderKind::Mwpm, lat, 0.12, 3000, 9, 3).unwrap();
        assert_eq!(a.p_acc, b.p_acc);
        assert!((a.std_err - (a.p_acc * (1.0 - a.p_acc) / 3000.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn capacity_and_argument_errors() {
        let lat = Lattice::new(5).unwrap();
        let err = evaluate(&DecoderKind::Mld, lat, 0.1, 10, 0, 1).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(evaluate(&DecoderKind::Mwpm, lat, 0.1, 0, 0, 1).is_err());
        assert!(evaluate(&DecoderKind::Mwpm, lat, 0.1, 10, 0, 0).is_err());
        assert!(evaluate(&DecoderKind::Mwpm, lat, 1.5, 10, 0, 1).is_err());
    }

    #[test]
    fn csv_has_version_line_and_header() {
        let lat = Lattice::new(3).unwrap();
        let r = evaluate(&DecoderKind::Mwpm, lat, 0.05, 100, 0, 1).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# toric-eval v1");
        assert_eq!(lines[1], "decoder,L,p,n_samples,seed,p_acc,std_err,wall_time");
        assert!(lines[2].starts_with("mwpm,3,0.05,100,0,"));
    }
}
