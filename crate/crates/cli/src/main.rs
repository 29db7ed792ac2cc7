//! `siltok` command-line front-end.
//!
//! Exit codes: 0 on success, 1 when input or arguments fail validation, 2 on
//! filesystem errors.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::TypedValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use siltok::corpus::stream::{tokenize_corpus, TokenFormat};
use siltok::corpus::{load_corpus, write_corpus, write_pgm_gray, CorpusFormat, WalkerConfig};
use siltok::stats::{
    compute_acr, compute_histogram, count_pixels, density_report, roundtrip_report,
    FrequencyHeatmap, FrequencyHistogram, HeatmapNormalization, MapType,
};
use siltok::vocab::{
    estimate_frequencies, read_frequency_list, read_vocabulary_json, write_vocabulary_json,
};
use siltok::{Channel, Error, FillMode, SilhouetteSequence, VocabularyMap};

#[derive(Parser, Debug)]
#[command(name = "siltok", version, about = "Contour-velocity tokenizer for binary silhouette sequences")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, global = true, env = "SILTOK_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic walker corpus
    Gen(GenArgs),
    /// Vocabulary files
    #[command(subcommand)]
    Vocab(VocabCommand),
    /// Tokenize a corpus into a token stream
    Tokenize(TokenizeArgs),
    /// Density, frequency and compression statistics
    Stats(StatsArgs),
    /// Check that silhouettes are recovered from their contours
    Roundtrip(RoundtripArgs),
}

#[derive(Subcommand, Debug)]
enum VocabCommand {
    /// Estimate token frequencies and coefficients from a corpus
    Build(VocabBuildArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Base seed; sequence k uses a seed derived from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frames per sequence
    #[arg(long, default_value_t = 30)]
    frames: usize,
    /// Number of sequences
    #[arg(long, default_value_t = 1)]
    sequences: usize,
    /// Frame height in pixels (at least 16)
    #[arg(long, default_value_t = siltok::DEFAULT_HEIGHT)]
    height: usize,
    /// Frame width in pixels (at least 16)
    #[arg(long, default_value_t = siltok::DEFAULT_WIDTH)]
    width: usize,
    /// Frames per gait cycle
    #[arg(long, default_value_t = 30)]
    period: usize,
    /// Horizontal foot excursion in pixels
    #[arg(long, default_value_t = 7)]
    stride: usize,
    /// Head diameter in thousandths of the height
    #[arg(long, default_value_t = 130)]
    head_permille: u32,
    /// Torso length in thousandths of the height
    #[arg(long, default_value_t = 330)]
    torso_permille: u32,
    /// Keep enclosed background holes instead of filling them
    #[arg(long)]
    allow_holes: bool,
    /// Corpus layout to write
    #[arg(long, value_enum, default_value_t = CorpusKind::Silb)]
    format: CorpusKind,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum CorpusKind {
    /// One packed `.silb` file per sequence
    Silb,
    /// One directory of numbered `.pgm` frames per sequence
    Pgm,
}

#[derive(Args, Debug, Serialize)]
struct VocabBuildArgs {
    /// Corpus directory or `.silb` file
    corpus: PathBuf,
    /// Output vocabulary file (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Vocabulary size N
    #[arg(long = "n", default_value_t = siltok::DEFAULT_VOCAB_SIZE)]
    vocab_size: usize,
    /// Permutation seed; 0 keeps the identity layout
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frequency floor for coefficients (default 1 / frame count)
    #[arg(long)]
    f_min: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct TokenizeArgs {
    /// Corpus directory or `.silb` file
    corpus: PathBuf,
    /// Vocabulary file from `vocab build`
    #[arg(long)]
    vocab: PathBuf,
    /// Output token stream
    #[arg(long)]
    out: PathBuf,
    /// Token stream encoding
    #[arg(long, value_enum, default_value_t = StreamKind::Jsonl)]
    format: StreamKind,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum StreamKind {
    /// One JSON object per frame
    Jsonl,
    /// Compact little-endian records
    Binary,
}

#[derive(Args, Debug, Serialize)]
struct StatsArgs {
    /// Corpus directory or `.silb` file
    corpus: PathBuf,
    /// Report path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of log-spaced frequency histogram bins
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Write contour.csv and velocity.csv frequency histograms here
    #[arg(long)]
    histogram_dir: Option<PathBuf>,
    /// Vocabulary-format file whose frequencies are overlaid on histograms
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Write silhouette/contour/velocity heatmaps (.pgm and .csv) here
    #[arg(long)]
    heatmap_dir: Option<PathBuf>,
    /// Heatmap normalisation
    #[arg(long, value_enum, default_value_t = Normalization::ContourRange)]
    normalize: Normalization,
    /// Heatmap PGM sample depth in bits
    #[arg(long, default_value_t = 8, value_parser = clap::builder::PossibleValuesParser::new(["8", "16"]).map(|s| s.parse::<u8>().expect("listed value")))]
    pgm_depth: u8,
    /// Reference densities "Ps,Pc,Pv;Ps,Pc,Pv;..." (fractions or percents)
    /// for which compression rates are also reported
    #[arg(long)]
    reference_densities: Option<String>,
    /// Fill mode of the round-trip section
    #[arg(long, value_enum, default_value_t = Mode::ExteriorFill)]
    mode: Mode,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Normalization {
    Raw,
    ContourRange,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    ExteriorFill,
    ParityFill,
}

impl From<Mode> for FillMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::ExteriorFill => FillMode::ExteriorFill,
            Mode::ParityFill => FillMode::ParityFill,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct RoundtripArgs {
    /// Corpus directory or `.silb` file
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::ExteriorFill)]
    mode: Mode,
    /// Largest tolerated number of mismatched pixels
    #[arg(long, default_value_t = 0)]
    max_mismatch: usize,
    /// Report path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code.
enum Failure {
    Validation(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Vocab(VocabCommand::Build(args)) => cmd_vocab_build(args),
        Command::Tokenize(args) => cmd_tokenize(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Roundtrip(args) => cmd_roundtrip(args),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable report");
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(io_failure(path)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn load(path: &Path) -> Result<Vec<SilhouetteSequence>, Failure> {
    Ok(load_corpus(path)?)
}

fn cmd_gen(args: GenArgs) -> CmdResult {
    let config = WalkerConfig {
        seed: args.seed,
        frames: args.frames,
        height: args.height,
        width: args.width,
        period: args.period,
        stride: args.stride,
        head_permille: args.head_permille,
        torso_permille: args.torso_permille,
        hole_free: !args.allow_holes,
    };
    if args.sequences == 0 {
        return Err(Failure::Validation("--sequences must be positive".into()));
    }
    let corpus = siltok::corpus::generate_corpus(&config, args.sequences)?;
    let format = match args.format {
        CorpusKind::Silb => CorpusFormat::Silb,
        CorpusKind::Pgm => CorpusFormat::Pgm,
    };
    write_corpus(&args.out, &corpus, format)?;
    let frames: usize = corpus.iter().map(|s| s.len()).sum();
    let ones: usize = corpus
        .iter()
        .flat_map(|s| s.frames())
        .map(|g| g.count_ones())
        .sum();
    let density = ones as f64 / (frames * args.height * args.width) as f64;
    emit(
        &json!({
            "sequences": corpus.len(),
            "frames": frames,
            "silhouette_density": density,
            "config": args,
        }),
        None,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_vocab_build(args: VocabBuildArgs) -> CmdResult {
    let corpus = load(&args.corpus)?;
    let (h, w) = (corpus[0].height(), corpus[0].width());
    let vocab = VocabularyMap::new(h, w, args.vocab_size, args.seed)?;
    let table = estimate_frequencies::<f64>(&corpus, &vocab, args.f_min)?;
    let text = write_vocabulary_json(&vocab, &table);
    fs::write(&args.out, text).map_err(io_failure(&args.out))?;
    emit(
        &json!({
            "mapped_tokens": vocab.mapped_tokens(),
            "frames": table.frame_count(),
            "mean_contour_frequency": table.mean_contour_frequency(),
            "config": args,
        }),
        None,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_tokenize(args: TokenizeArgs) -> CmdResult {
    let text = fs::read_to_string(&args.vocab).map_err(io_failure(&args.vocab))?;
    let (vocab, table) = read_vocabulary_json::<f64>(&text)?;
    let corpus = load(&args.corpus)?;
    let format = match args.format {
        StreamKind::Jsonl => TokenFormat::Jsonl,
        StreamKind::Binary => TokenFormat::Binary,
    };
    // Encode into memory first so that a validation failure leaves no
    // partial output behind.
    let mut buf = Vec::new();
    let frames = tokenize_corpus(&corpus, &vocab, &table, format, &mut buf)?;
    let file = fs::File::create(&args.out).map_err(io_failure(&args.out))?;
    let mut out = BufWriter::new(file);
    out.write_all(&buf)
        .and_then(|_| out.flush())
        .map_err(io_failure(&args.out))?;
    emit(&json!({ "frames": frames, "config": args }), None)?;
    Ok(ExitCode::SUCCESS)
}

/// Parses `"Ps,Pc,Pv;..."`. Values above 1 are read as percentages.
fn parse_reference(text: &str) -> Result<Vec<[f64; 3]>, Failure> {
    let bad = |m: String| Failure::Validation(format!("--reference-densities: {m}"));
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|row| {
            let vals: Vec<f64> = row
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("{v:?}: {e}"))))
                .collect::<Result<_, _>>()?;
            match vals.as_slice() {
                &[s, c, v] => {
                    let pct = [s, c, v].iter().any(|&x| x > 1.0);
                    let k = if pct { 0.01 } else { 1.0 };
                    Ok([s * k, c * k, v * k])
                }
                _ => Err(bad(format!("expected 3 values per dataset, got {}", vals.len()))),
            }
        })
        .collect()
}

fn cmd_stats(args: StatsArgs) -> CmdResult {
    let corpus = load(&args.corpus)?;
    let densities = density_report::<f64>(&corpus)?;

    let reference = match &args.reference_densities {
        Some(text) => {
            let rows = parse_reference(text)?;
            let pairs = |i: usize| rows.iter().map(|r| (r[0], r[i])).collect::<Vec<_>>();
            Some(json!({
                "datasets": rows,
                "contour": compute_acr(&pairs(1))?,
                "velocity": compute_acr(&pairs(2))?,
            }))
        }
        None => None,
    };

    let (h, w) = (densities.height, densities.width);
    let vocab = VocabularyMap::new(h, w, 2 * h * w, 0)?;
    let table = estimate_frequencies::<f64>(&corpus, &vocab, None)?;
    let overlay_values = match &args.overlay {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_failure(path))?;
            Some(read_frequency_list(&text)?)
        }
        None => None,
    };
    let overlay = overlay_values
        .map(|v| FrequencyHistogram::from_values(v, table.f_min(), args.bins, None))
        .transpose()?;
    let histograms = Channel::ALL
        .iter()
        .map(|&ch| compute_histogram(&table, Some(ch), args.bins))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(dir) = &args.histogram_dir {
        fs::create_dir_all(dir).map_err(io_failure(dir))?;
        for (ch, hist) in ["contour", "velocity"].iter().zip(&histograms) {
            let path = dir.join(format!("{ch}.csv"));
            fs::write(&path, hist.to_csv(overlay.as_ref())).map_err(io_failure(&path))?;
        }
    }

    if let Some(dir) = &args.heatmap_dir {
        fs::create_dir_all(dir).map_err(io_failure(dir))?;
        let counts = count_pixels(&corpus)?;
        let norm = match args.normalize {
            Normalization::Raw => HeatmapNormalization::Raw,
            Normalization::ContourRange => HeatmapNormalization::ContourRange,
        };
        let maxval = if args.pgm_depth == 16 { u16::MAX } else { 255 };
        for map in MapType::ALL {
            let heat = FrequencyHeatmap::<f64>::from_counts(&counts, map, norm);
            let pgm = write_pgm_gray(w, h, maxval, &heat.quantize(maxval))?;
            let path = dir.join(format!("{map}.pgm"));
            fs::write(&path, pgm).map_err(io_failure(&path))?;
            let path = dir.join(format!("{map}.csv"));
            fs::write(&path, heat.to_csv()).map_err(io_failure(&path))?;
        }
    }

    let roundtrip = roundtrip_report(&corpus, args.mode.into());
    let report = json!({
        "densities": densities,
        "acr": {
            "contour": densities.acr_contour,
            "velocity": densities.acr_velocity,
            "reference": reference,
        },
        "histograms": {
            "contour": histograms[0],
            "velocity": histograms[1],
            "overlay": overlay,
        },
        "roundtrip": roundtrip,
        "config": args,
    });
    emit(&report, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_roundtrip(args: RoundtripArgs) -> CmdResult {
    let corpus = load(&args.corpus)?;
    let report = roundtrip_report(&corpus, args.mode.into());
    let failed = report.mismatched_pixels > args.max_mismatch;
    emit(
        &json!({ "roundtrip": report, "passed": !failed, "config": args }),
        args.out.as_deref(),
    )?;
    if failed {
        eprintln!(
            "error: {} mismatched pixels exceed --max-mismatch {}",
            report.mismatched_pixels, args.max_mismatch
        );
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
