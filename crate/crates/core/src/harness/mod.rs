//! Evaluation, threshold fitting and self checks.

mod eval;
pub mod selfcheck;
mod threshold;

use std::sync::Arc;

use crate::code::{Lattice, LogicalBits, Syndrome};
use crate::end::Model;
use crate::error::{Error, Result};
use crate::exact::MldDecoder;
use crate::mwpm::MwpmDecoder;
use crate::noise::Depolarizing;

pub use eval::{evaluate, evaluate_with, write_reports_csv, EvalReport, EVAL_BLOCK};
pub use threshold::{threshold_fit, threshold_sweep, write_points_csv, ThresholdFit, ThresholdPoint};

/// Maps a syndrome to a logical class guess.
pub trait Decoder: Send {
    fn decode(&mut self, syndrome: &Syndrome) -> Result<LogicalBits>;

    fn decode_batch(&mut self, syndromes: &[Syndrome]) -> Result<Vec<LogicalBits>> {
        syndromes.iter().map(|s| self.decode(s)).collect()
    }
}

impl Decoder for MwpmDecoder {
    fn decode(&mut self, syndrome: &Syndrome) -> Result<LogicalBits> {
        MwpmDecoder::decode(self, syndrome)
    }
}

impl Decoder for MldDecoder<Depolarizing> {
    fn decode(&mut self, syndrome: &Syndrome) -> Result<LogicalBits> {
        MldDecoder::decode(self, syndrome)
    }
}

/// Neural decoder sharing one set of weights across workers.
#[derive(Clone, Debug)]
pub struct EndDecoder {
    model: Arc<Model<f32>>,
}

impl EndDecoder {
    pub fn new(model: Arc<Model<f32>>) -> Self {
        Self { model }
    }
}

impl Decoder for EndDecoder {
    fn decode(&mut self, syndrome: &Syndrome) -> Result<LogicalBits> {
        Ok(self.model.decode_batch(std::slice::from_ref(syndrome))?[0])
    }

    fn decode_batch(&mut self, syndromes: &[Syndrome]) -> Result<Vec<LogicalBits>> {
        self.model.decode_batch(syndromes)
    }
}

/// Which decoder to build for each evaluation worker.
#[derive(Clone, Debug)]
pub enum DecoderKind {
    Mwpm,
    /// Exact maximum likelihood under depolarizing noise of the evaluated `p`.
    Mld,
    End(Arc<Model<f32>>),
}

impl DecoderKind {
    pub fn id(&self) -> &'static str {
        match self {
            DecoderKind::Mwpm => "mwpm",
            DecoderKind::Mld => "mld",
            DecoderKind::End(_) => "end",
        }
    }

    /// A fresh decoder for `lattice`, assuming depolarizing noise at `p`.
    pub fn build(&self, lattice: Lattice, p: f64) -> Result<Box<dyn Decoder>> {
        Ok(match self {
            DecoderKind::Mwpm => Box::new(MwpmDecoder::new(lattice)),
            DecoderKind::Mld => Box::new(MldDecoder::new(lattice, Depolarizing::new(p)?)?),
            DecoderKind::End(model) => Box::new(EndDecoder::new(model.clone())),
        })
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;

    /// Parses `mwpm` or `mld`; `end` needs a model and is built by the caller.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mwpm" => Ok(DecoderKind::Mwpm),
            "mld" => Ok(DecoderKind::Mld),
            other => Err(Error::InvalidParameter(format!("unknown decoder '{other}'"))),
        }
    }
}
