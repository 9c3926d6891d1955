//! `toric`: sampling, decoding, training and threshold experiments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use toric_core::bits::BitSet;
use toric_core::end::{checkpoint, train_from, Model, TrainConfig};
use toric_core::exact::exact_posterior;
use toric_core::harness::{
    evaluate, selfcheck, threshold_fit, threshold_sweep, write_points_csv, write_reports_csv, DecoderKind,
};
use toric_core::noise::{sample_batch, sample_one, write_samples_csv};
use toric_core::{Depolarizing, Error, Lattice, Result, StreamKey, Syndrome};

#[derive(Parser)]
#[command(name = "toric", version, about = "Toric code decoding workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a dataset of sampled syndromes and logical classes.
    Sample(SampleArgs),
    /// Exact logical-class distribution for one syndrome (L = 3).
    Oracle(OracleArgs),
    /// Measure decoder accuracy on fresh samples.
    Eval(EvalArgs),
    /// Train the neural decoder from a JSON config.
    Train(TrainArgs),
    /// Accuracy sweep over lattice sizes and rates, then a threshold fit.
    Threshold(ThresholdArgs),
    /// Run the invariant suite.
    Selfcheck(SelfcheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    Mwpm,
    Mld,
    End,
}

#[derive(Args)]
struct Common {
    /// Lattice size.
    #[arg(long = "L", default_value_t = 3)]
    lattice: usize,
    /// Depolarizing rate.
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Vertex syndrome as L*L characters of 0/1, row-major.
    #[arg(long, requires = "sz")]
    sx: Option<String>,
    /// Plaquette syndrome as L*L characters of 0/1, row-major.
    #[arg(long, requires = "sx")]
    sz: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = DecoderArg::Mwpm)]
    decoder: DecoderArg,
    /// Checkpoint for `--decoder end`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON training config; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint path for the trained model.
    #[arg(long, default_value = "model.bin")]
    out: PathBuf,
    /// Optional CSV of the training curve.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Overrides the config's worker count.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, value_enum, default_value_t = DecoderArg::Mwpm)]
    decoder: DecoderArg,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated lattice sizes.
    #[arg(long = "L", value_delimiter = ',', default_values_t = [11, 15, 17, 21])]
    lattices: Vec<usize>,
    /// Rate grid `start:end:count`.
    #[arg(long, default_value = "0.145:0.18:21", value_parser = parse_grid)]
    p_grid: Grid,
    #[arg(long, default_value_t = 20_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Format of the fit summary on standard output.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Points CSV for plotting.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelfcheckArgs {
    #[arg(long = "L", default_value_t = 3)]
    lattice: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err("expected start:end:count".into());
    };
    let a: f64 = a.parse().map_err(|e| format!("start: {e}"))?;
    let b: f64 = b.parse().map_err(|e| format!("end: {e}"))?;
    let n: usize = n.parse().map_err(|e| format!("count: {e}"))?;
    if n < 2 || a.is_nan() || b.is_nan() || a >= b {
        return Err("need count >= 2 and start < end".into());
    }
    Ok(Grid((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn bitstring(bits: &BitSet) -> String {
    (0..bits.len()).map(|i| if bits.get(i) { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str, len: usize, what: &str) -> Result<BitSet> {
    if s.len() != len || !s.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(Error::InvalidParameter(format!("{what} must be {len} characters of 0/1")));
    }
    Ok(BitSet::from_bools(s.bytes().map(|b| b == b'1')))
}

fn decoder_kind(decoder: DecoderArg, model: Option<&Path>) -> Result<DecoderKind> {
    Ok(match decoder {
        DecoderArg::Mwpm => DecoderKind::Mwpm,
        DecoderArg::Mld => DecoderKind::Mld,
        DecoderArg::End => {
            let path = model.ok_or_else(|| Error::InvalidParameter("--decoder end needs --model".into()))?;
            DecoderKind::End(Arc::new(checkpoint::load::<f32>(path)?))
        }
    })
}

#[derive(Serialize)]
struct SampleRow {
    sx: String,
    sz: String,
    gamma: [u8; 4],
}

fn sample(args: SampleArgs) -> Result<()> {
    let c = &args.common;
    let lattice = Lattice::new(c.lattice)?;
    let noise = Depolarizing::new(c.p)?;
    let samples = sample_batch(lattice, &noise, args.n, StreamKey::new(c.seed, 0))?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => write_samples_csv(&mut out, lattice, &format!("p={} seed={}", c.p, c.seed), &samples)?,
        Format::Json => {
            let rows: Vec<SampleRow> = samples
                .iter()
                .map(|s| SampleRow {
                    sx: bitstring(s.syndrome.x_bits()),
                    sz: bitstring(s.syndrome.z_bits()),
                    gamma: s.logical.bits(),
                })
                .collect();
            write_json(&mut out, &rows)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    #[serde(rename = "L")]
    lattice: usize,
    p: f64,
    sx: String,
    sz: String,
    /// True class when the syndrome was sampled.
    sampled_gamma: Option<[u8; 4]>,
    /// Posterior indexed by `8 g1 + 4 g2 + 2 g3 + g4`.
    posterior: Vec<f64>,
    mld: [u8; 4],
}

fn oracle(args: OracleArgs) -> Result<()> {
    let c = &args.common;
    let lattice = Lattice::new(c.lattice)?;
    let noise = Depolarizing::new(c.p)?;
    let (syndrome, sampled) = match (&args.sx, &args.sz) {
        (Some(sx), Some(sz)) => {
            let sites = lattice.num_vertices();
            let s = Syndrome::from_parts(lattice, parse_bits(sx, sites, "--sx")?, parse_bits(sz, sites, "--sz")?)?;
            s.ensure_valid()?;
            (s, None)
        }
        _ => {
            let mut rng = StreamKey::new(c.seed, 0).rng();
            let s = sample_one(lattice, &noise, &mut rng, false);
            (s.syndrome, Some(s.logical.bits()))
        }
    };
    let posterior = exact_posterior::<f64, _>(&syndrome, &noise)?;
    let report = OracleReport {
        lattice: c.lattice,
        p: c.p,
        sx: bitstring(syndrome.x_bits()),
        sz: bitstring(syndrome.z_bits()),
        sampled_gamma: sampled,
        posterior: posterior.0.to_vec(),
        mld: posterior.argmax().bits(),
    };
    let mut out = output(args.out.as_deref())?;
    write_json(&mut out, &report)?;
    out.flush()?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let c = &args.common;
    let lattice = Lattice::new(c.lattice)?;
    let kind = decoder_kind(args.decoder, args.model.as_deref())?;
    let report = evaluate(&kind, lattice, c.p, args.n, c.seed, args.workers)?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => write_reports_csv(&mut out, std::slice::from_ref(&report))?,
        Format::Json => write_json(&mut out, &report)?,
    }
    out.flush()?;
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = match &args.config {
        Some(path) => serde_json::from_reader(File::open(path)?)?,
        None => TrainConfig::default(),
    };
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    let model = Model::<f32>::new(cfg.model.clone(), cfg.seed)?;
    eprintln!("training {} parameters for {} steps", model.param_count(), cfg.steps);
    let (model, log) = train_from(&cfg, model, |row| {
        eprintln!("step {:>7}  loss {:.4}  eval_accuracy {:.4}", row.step, row.loss, row.eval_accuracy);
    })?;
    checkpoint::save(&model, &args.out)?;
    if let Some(path) = &args.log {
        log.write_csv(BufWriter::new(File::create(path)?))?;
    }
    eprintln!("saved {}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct FitRow {
    p_th: f64,
    c0: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    residual: f64,
    degenerate: bool,
}

fn threshold(args: ThresholdArgs) -> Result<()> {
    let kind = decoder_kind(args.decoder, args.model.as_deref())?;
    let points = threshold_sweep(&kind, &args.lattices, &args.p_grid.0, args.n, args.seed, args.workers)?;
    if let Some(path) = &args.out {
        write_points_csv(BufWriter::new(File::create(path)?), &points)?;
    }
    let fit = threshold_fit(&points)?;
    if let Some(w) = &fit.warning {
        eprintln!("warning: {w}");
    }
    let mut out = output(None)?;
    match args.format {
        Format::Json => write_json(&mut out, &fit)?,
        Format::Csv => {
            writeln!(out, "# toric-threshold-fit v1")?;
            let [c0, c1, c2, c3] = fit.coefficients;
            let mut w = csv::Writer::from_writer(&mut out);
            w.serialize(FitRow { p_th: fit.p_th, c0, c1, c2, c3, residual: fit.residual, degenerate: fit.degenerate })?;
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

fn run_selfcheck(args: SelfcheckArgs) -> Result<bool> {
    let lattice = Lattice::new(args.lattice)?;
    let checks = selfcheck::run(lattice, args.seed);
    let mut out = output(None)?;
    for c in &checks {
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    out.flush()?;
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => sample(a).map(|_| true),
        Command::Oracle(a) => oracle(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Train(a) => train(a).map(|_| true),
        Command::Threshold(a) => threshold(a).map(|_| true),
        Command::Selfcheck(a) => run_selfcheck(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
