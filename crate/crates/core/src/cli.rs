//! Command-line front end. Every subcommand writes CSV (or summary lines)
//! to standard output or `--out`, preceded by a `# seed=<n>` comment line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::encoders::{build_encoding_matrix, EncodingKind, PeConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    position_decode_accuracy, run_comparison, ModelConfig, SyntheticTaskConfig,
};
use crate::reconstruction::reconstruct;
use crate::selftest;
use crate::spectral::{dft_distribution, kde_distribution, KdeConfig};
use crate::Signal;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SELFTEST_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dftpe",
    version,
    about = "DFT positional encoding analysis toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Write output to this file instead of standard output
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed echoed in the output preamble (and used by `demo`)
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct Geometry {
    /// Encoding dimension / lattice size (even, >= 4)
    #[arg(long, default_value_t = 256)]
    pub d: usize,
    /// Sequence length (positions are 0-based: 0..S-1)
    #[arg(long = "s", default_value_t = 80)]
    pub seq_len: usize,
    /// Frequency base of the sinusoidal encoding
    #[arg(long, default_value_t = 10_000.0)]
    pub rho: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Frequency distributions of both encoders on the grid k = 0..d/2
    Spectrum {
        #[arg(long, default_value_t = 256)]
        d: usize,
        #[arg(long, default_value_t = 10_000.0)]
        rho: f64,
        /// KDE bandwidth as a multiple of 2π/d
        #[arg(long = "sigma-mult", default_value_t = 4.0)]
        sigma_mult: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct position functions through an encoder's frequency weights
    Reconstruct {
        #[command(flatten)]
        geometry: Geometry,
        /// Comma-separated 0-based positions
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 40, 75])]
        positions: Vec<usize>,
        #[arg(long, default_value = "dft")]
        encoding: String,
        #[arg(long = "sigma-mult", default_value_t = 4.0)]
        sigma_mult: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Dump the encoding matrix, one row per dimension
    Encode {
        #[command(flatten)]
        geometry: Geometry,
        #[arg(long, default_value = "dft")]
        encoding: String,
        #[command(flatten)]
        common: Common,
    },
    /// Position recovery by inner-product argmax for both encoders
    DecodeTest {
        #[command(flatten)]
        geometry: Geometry,
        #[command(flatten)]
        common: Common,
    },
    /// Train the attention classifier on the synthetic position task
    Demo {
        /// Comma-separated encoders: original, dft, none
        #[arg(long, value_delimiter = ',', default_values_t = ["original".to_string(), "dft".to_string()])]
        encoders: Vec<String>,
        #[arg(long = "seq-len")]
        seq_len: Option<usize>,
        /// Anomaly band start (inclusive)
        #[arg(long = "band-start")]
        band_start: Option<usize>,
        /// Anomaly band end (exclusive)
        #[arg(long = "band-end")]
        band_end: Option<usize>,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        heads: Option<usize>,
        #[arg(long = "head-dim")]
        head_dim: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Write the training loss curve (`epoch,loss`); one file per
        /// encoder, suffixed with the encoder name when several are run
        #[arg(long = "loss-csv")]
        loss_csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in invariant checks
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Spectrum { common, .. }
            | Command::Reconstruct { common, .. }
            | Command::Encode { common, .. }
            | Command::DecodeTest { common, .. }
            | Command::Demo { common, .. }
            | Command::Selftest { common } => common,
        }
    }
}

/// Format a real with 16 significant digits.
pub fn fmt_real(v: f64) -> String {
    // normalize -0 so identical math always prints identically
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.15e}")
}

fn preamble(seed: u64) -> String {
    format!("# seed={seed}\n")
}

fn parse_kind(s: &str) -> Result<EncodingKind> {
    s.parse()
}

pub fn spectrum_csv(d: usize, rho: f64, sigma_mult: f64) -> Result<String> {
    let config = PeConfig::new(d, 1, rho)?;
    let lattice = config.lattice();
    let kde = KdeConfig::from_multiplier(sigma_mult, lattice)?;
    let g_orig = kde_distribution(&config, &kde)?;
    let g_dft = dft_distribution(lattice);
    let mut out = String::from("k,omega,g_original,g_dft\n");
    for (k, omega) in lattice.frequency_grid().into_iter().enumerate() {
        writeln!(
            out,
            "{k},{},{},{}",
            fmt_real(omega),
            fmt_real(g_orig.weights()[k]),
            fmt_real(g_dft.weights()[k])
        )
        .expect("write to string");
    }
    Ok(out)
}

pub fn reconstruct_csv(
    geometry: &Geometry,
    positions: &[usize],
    kind: EncodingKind,
    sigma_mult: f64,
) -> Result<String> {
    let config = PeConfig::new(geometry.d, geometry.seq_len, geometry.rho)?;
    let lattice = config.lattice();
    if geometry.seq_len > geometry.d {
        return Err(Error::Validation(format!(
            "display length S={} exceeds lattice size d={}",
            geometry.seq_len, geometry.d
        )));
    }
    if positions.is_empty() {
        return Err(Error::Validation("at least one position required".into()));
    }
    if let Some(&p) = positions.iter().find(|&&p| p >= geometry.seq_len) {
        return Err(Error::Validation(format!(
            "position {p} outside display range 0..{}",
            geometry.seq_len
        )));
    }
    let weights = match kind {
        EncodingKind::Original => {
            kde_distribution(&config, &KdeConfig::from_multiplier(sigma_mult, lattice)?)?
        }
        EncodingKind::Dft => dft_distribution(lattice),
        EncodingKind::None => {
            return Err(Error::Validation(
                "reconstruct needs an encoding with a spectrum (original or dft)".into(),
            ))
        }
    };
    let reports = positions
        .iter()
        .map(|&p| reconstruct(&Signal::one_hot(p, lattice)?, &weights))
        .collect::<Result<Vec<_>>>()?;

    let mut out = String::from("t");
    for i in 1..=positions.len() {
        write!(out, ",ref_p{i},rec_p{i}").expect("write to string");
    }
    out.push('\n');
    for t in 0..geometry.seq_len {
        out.push_str(&t.to_string());
        for r in &reports {
            write!(
                out,
                ",{},{}",
                fmt_real(r.reference.values()[t]),
                fmt_real(r.reconstructed.values()[t])
            )
            .expect("write to string");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn encode_csv(geometry: &Geometry, kind: EncodingKind) -> Result<String> {
    let config = PeConfig::new(geometry.d, geometry.seq_len, geometry.rho)?;
    let enc = build_encoding_matrix(kind, config);
    if enc.aliasing_warning() {
        eprintln!(
            "warning: S={} > d={}; DFT positions alias modulo d",
            geometry.seq_len, geometry.d
        );
    }
    let mut out = String::from("t");
    for s in 1..=geometry.seq_len {
        write!(out, ",e{s}").expect("write to string");
    }
    out.push('\n');
    for (t, row) in enc.columns().rows().into_iter().enumerate() {
        out.push_str(&t.to_string());
        for v in row {
            write!(out, ",{}", fmt_real(*v)).expect("write to string");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn decode_csv(geometry: &Geometry) -> Result<String> {
    let config = PeConfig::new(geometry.d, geometry.seq_len, geometry.rho)?;
    let mut out = String::from("encoding,d,s,accuracy\n");
    for kind in [EncodingKind::Original, EncodingKind::Dft] {
        let acc = position_decode_accuracy(&build_encoding_matrix(kind, config));
        writeln!(
            out,
            "{kind},{},{},{}",
            geometry.d,
            geometry.seq_len,
            fmt_real(acc)
        )
        .expect("write to string");
    }
    Ok(out)
}

fn loss_csv(curve: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (e, l) in curve.iter().enumerate() {
        writeln!(out, "{e},{}", fmt_real(*l)).expect("write to string");
    }
    out
}

fn loss_path(base: &Path, kind: EncodingKind, many: bool) -> PathBuf {
    if !many {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("loss");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{kind}.{ext}"),
        None => format!("{stem}_{kind}"),
    };
    base.with_file_name(name)
}

fn demo(
    encoders: &[String],
    task: SyntheticTaskConfig,
    model: ModelConfig,
    loss_csv_path: Option<&Path>,
) -> Result<String> {
    let kinds = encoders
        .iter()
        .map(|s| parse_kind(s))
        .collect::<Result<Vec<_>>>()?;
    if kinds.is_empty() {
        return Err(Error::Validation("at least one encoder required".into()));
    }
    let results = run_comparison(&task, &model, &kinds)?;
    let mut out = String::new();
    for r in &results {
        writeln!(
            out,
            "encoder={} precision={:.6} recall={:.6} f1={:.6}",
            r.kind, r.metrics.precision, r.metrics.recall, r.metrics.f1
        )
        .expect("write to string");
        if !r.converged {
            eprintln!(
                "warning: encoder={} did not reduce its training loss",
                r.kind
            );
        }
        if let Some(base) = loss_csv_path {
            let path = loss_path(base, r.kind, results.len() > 1);
            fs::write(&path, loss_csv(&r.loss_curve))
                .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    Ok(out)
}

fn execute(command: &Command) -> Result<(String, bool)> {
    let seed = command.common().seed;
    let body = match command {
        Command::Spectrum {
            d, rho, sigma_mult, ..
        } => spectrum_csv(*d, *rho, *sigma_mult)?,
        Command::Reconstruct {
            geometry,
            positions,
            encoding,
            sigma_mult,
            ..
        } => reconstruct_csv(geometry, positions, parse_kind(encoding)?, *sigma_mult)?,
        Command::Encode {
            geometry, encoding, ..
        } => encode_csv(geometry, parse_kind(encoding)?)?,
        Command::DecodeTest { geometry, .. } => decode_csv(geometry)?,
        Command::Demo {
            encoders,
            seq_len,
            band_start,
            band_end,
            amplitude,
            noise,
            samples,
            heads,
            head_dim,
            lr,
            epochs,
            loss_csv,
            ..
        } => {
            let base = SyntheticTaskConfig::default();
            let s = seq_len.unwrap_or(base.seq_len);
            let task = SyntheticTaskConfig {
                seq_len: s,
                feature_dim: s,
                band: band_start.unwrap_or(base.band.start)..band_end.unwrap_or(base.band.end),
                amplitude: amplitude.unwrap_or(base.amplitude),
                noise: noise.unwrap_or(base.noise),
                samples: samples.unwrap_or(base.samples),
                seed,
            };
            let m = ModelConfig::default();
            let model = ModelConfig {
                heads: heads.unwrap_or(m.heads),
                head_dim: head_dim.unwrap_or(m.head_dim),
                learning_rate: lr.unwrap_or(m.learning_rate),
                epochs: epochs.unwrap_or(m.epochs),
                ..m
            };
            demo(encoders, task, model, loss_csv.as_deref())?
        }
        Command::Selftest { .. } => {
            let report = selftest::run_all();
            return Ok((report.render(), report.passed()));
        }
    };
    Ok((body, true))
}

fn emit(common: &Common, text: &str) -> io::Result<()> {
    match &common.out {
        Some(path) => fs::write(path, text),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

/// Parse `args` (including the program name) and run; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    let common = cli.command.common().clone();
    match execute(&cli.command) {
        Ok((body, passed)) => {
            let text = format!("{}{}", preamble(common.seed), body);
            if let Err(e) = emit(&common, &text) {
                eprintln!("error: {e}");
                return EXIT_INVALID;
            }
            if passed {
                EXIT_OK
            } else {
                EXIT_SELFTEST_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("run with --help for usage");
            EXIT_INVALID
        }
    }
}
