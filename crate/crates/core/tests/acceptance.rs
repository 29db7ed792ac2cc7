//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::Frame;
use siltok::corpus::pgm::{read_pgm, write_pgm};
use siltok::corpus::silb::{encode_frames, read_packed};
use siltok::corpus::stream::{tokenize_corpus, TokenFormat};
use siltok::corpus::{generate_corpus, load_corpus, write_corpus, CorpusFormat, WalkerConfig};
use siltok::extract::{extract_contour, extract_sequence_maps, reconstruct_silhouette};
use siltok::stats::{compute_acr, compute_density, MapType};
use siltok::vocab::{encode_frame, estimate_frequencies, write_vocabulary_json};
use siltok::{BitGrid, Channel, Error, FillMode, SilhouetteSequence, VocabularyMap};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn walkers(seed: u64, sequences: usize, frames: usize) -> Vec<SilhouetteSequence> {
    let cfg = WalkerConfig {
        seed,
        frames,
        ..WalkerConfig::default()
    };
    generate_corpus(&cfg, sequences).expect("default walker is satisfiable")
}

fn as_pixels(corpus: &[SilhouetteSequence]) -> Vec<Vec<Frame>> {
    corpus.iter().map(common::sequence_pixels).collect()
}

fn acr_arithmetic() -> Outcome {
    let s = [0.212, 0.250, 0.202];
    let c = [0.045, 0.041, 0.041];
    let v = [0.018, 0.020, 0.021];
    let pairs = |x: &[f64; 3]| -> Vec<(f64, f64)> { s.iter().copied().zip(x.iter().copied()).collect() };
    let acr_c = compute_acr(&pairs(&c)).map_err(|e| e.to_string())?;
    let acr_v = compute_acr(&pairs(&v)).map_err(|e| e.to_string())?;
    ensure!((acr_c * 100.0 - 19.3).abs() <= 0.15, "contour ACR {:.3}%", acr_c * 100.0);
    ensure!((acr_v * 100.0 - 9.0).abs() <= 0.15, "velocity ACR {:.3}%", acr_v * 100.0);
    Ok(format!("contour {:.2}%, velocity {:.2}%", acr_c * 100.0, acr_v * 100.0))
}

fn lossless_roundtrip() -> Outcome {
    let corpus = walkers(2024, 20, 50);
    let mut frames = 0;
    for seq in &corpus {
        for s in seq.frames() {
            frames += 1;
            let back = reconstruct_silhouette(&extract_contour(s), FillMode::ExteriorFill);
            ensure!(back == *s, "{} differs after exterior fill", seq.label());
        }
    }
    ensure!(frames == 1000, "{frames} frames");

    let donut = BitGrid::from_fn(12, 12, |r, c| {
        let (inside, hole) = ((2..10).contains(&r) && (2..10).contains(&c), (5..7).contains(&r) && (5..7).contains(&c));
        inside && !hole
    })
    .unwrap();
    let hole_area = 4;
    let contour = extract_contour(&donut);
    let parity = reconstruct_silhouette(&contour, FillMode::ParityFill).hamming(&donut).unwrap();
    let exterior = reconstruct_silhouette(&contour, FillMode::ExteriorFill).hamming(&donut).unwrap();
    ensure!(parity == 0, "parity fill mismatches {parity} pixels on the donut");
    ensure!(exterior == hole_area, "exterior fill mismatches {exterior}, hole area {hole_area}");
    Ok(format!("{frames}/{frames} frames exact; donut parity 0, exterior {exterior}"))
}

fn density_ordering() -> Outcome {
    let mut lines = Vec::new();
    for seed in [1u64, 2, 3, 4, 5] {
        let corpus = walkers(seed, 10, 100);
        let [ns, nc, nv] = common::density_counts(&as_pixels(&corpus));
        let total = 1000 * 64 * 44;
        let mut d = [0.0; 3];
        for (i, (map, n)) in [(MapType::Silhouette, ns), (MapType::Contour, nc), (MapType::Velocity, nv)]
            .into_iter()
            .enumerate()
        {
            let e = compute_density::<f64>(&corpus, map).map_err(|e| e.to_string())?;
            ensure!(e.active == n, "seed {seed} {map}: {} active, oracle {n}", e.active);
            ensure!(e.frames == 1000, "seed {seed}: {} frames", e.frames);
            ensure!(e.density == n as f64 / total as f64, "seed {seed} {map}: density differs from oracle");
            d[i] = e.density;
        }
        ensure!(d[2] < d[1] && d[1] < d[0], "seed {seed}: P_v {} P_c {} P_s {}", d[2], d[1], d[0]);
        lines.push(format!("{:.1}/{:.1}/{:.1}", d[0] * 100.0, d[1] * 100.0, d[2] * 100.0));
    }
    Ok(format!("P_s/P_c/P_v % per seed: {}", lines.join(", ")))
}

fn frequency_flattening() -> Outcome {
    let corpus = walkers(77, 10, 100);
    let vocab = VocabularyMap::new(64, 44, 151_642, 9).unwrap();
    let freq = estimate_frequencies::<f64>(&corpus, &vocab, None).map_err(|e| e.to_string())?;
    ensure!(freq.len() == 5632, "{} tokens", freq.len());
    let mean = freq.mean_contour_frequency();
    let mut checked = 0;
    for k in 0..freq.len() as u32 {
        let (f, w) = (freq.frequency(k), freq.coefficient(k));
        if f >= freq.f_min() {
            checked += 1;
            ensure!((w * f - mean).abs() <= 1e-9, "token {k}: w*f = {} vs {mean}", w * f);
        }
    }
    Ok(format!("{checked} of 5632 tokens at or above f_min, mean {mean:.6}"))
}

fn vocabulary_injectivity() -> Outcome {
    for seed in [0u64, 1, 42, 0xDEAD_BEEF] {
        let vocab = VocabularyMap::new(64, 44, 151_642, seed).map_err(|e| e.to_string())?;
        let mut seen = vec![false; 151_642];
        for ch in Channel::ALL {
            for p in 0..2816 {
                let t = vocab.token(ch, p).unwrap() as usize;
                ensure!(t < 151_642, "seed {seed}: token {t} out of range");
                ensure!(!seen[t], "seed {seed}: collision at token {t}");
                seen[t] = true;
                ensure!(vocab.slot(t as u32) == Some((ch, p)), "seed {seed}: inverse broken at {t}");
            }
        }
    }
    for n in [0, 1000, 5631] {
        match VocabularyMap::new(64, 44, n, 0) {
            Err(Error::VocabularyTooSmall { required: 5632, .. }) => {}
            other => return Err(format!("N = {n} gave {other:?}")),
        }
    }
    VocabularyMap::new(64, 44, 5632, 3).map_err(|e| format!("N = 5632 rejected: {e}"))?;
    Ok("4 seeds x 5632 slots collision free; N < 5632 rejected".into())
}

fn token_conservation() -> Outcome {
    let corpus = walkers(31, 100, 100);
    let vocab = VocabularyMap::new(64, 44, 151_642, 5).unwrap();
    let freq = estimate_frequencies::<f64>(&corpus, &vocab, None).map_err(|e| e.to_string())?;
    let mut frames = 0;
    let mut tokens = 0;
    for seq in &corpus {
        let oracle = common::maps(&common::sequence_pixels(seq));
        for ((t, (c, v)), (oc, ov)) in extract_sequence_maps(seq).iter().enumerate().zip(&oracle) {
            let tf = encode_frame(t, c, v, &vocab, &freq).map_err(|e| e.to_string())?;
            let expected = common::popcount(oc) + common::popcount(ov);
            ensure!(tf.len() == expected, "{} t={t}: {} tokens, oracle {expected}", seq.label(), tf.len());
            ensure!(tf.weights.len() == tf.len(), "{} t={t}: weight count", seq.label());
            frames += 1;
            tokens += expected;
        }
    }
    ensure!(frames == 10_000, "{frames} frames");
    Ok(format!("{frames} frames, {tokens} tokens"))
}

struct Artifacts {
    silb: Vec<(String, Vec<u8>)>,
    vocab: String,
    jsonl: String,
}

fn run_pipeline(seed: u64, vocab_seed: u64) -> Result<(Vec<SilhouetteSequence>, Artifacts), Error> {
    let dir = tempfile::tempdir()?;
    write_corpus(dir.path(), &walkers(seed, 4, 30), CorpusFormat::Silb)?;
    let mut silb = Vec::new();
    let mut names: Vec<_> = fs::read_dir(dir.path())?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    names.sort();
    for p in names {
        silb.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p)?));
    }
    let corpus = load_corpus(dir.path())?;
    let vocab = VocabularyMap::new(64, 44, 151_642, vocab_seed)?;
    let freq = estimate_frequencies::<f64>(&corpus, &vocab, None)?;
    let text = write_vocabulary_json(&vocab, &freq);
    let mut jsonl = Vec::new();
    tokenize_corpus(&corpus, &vocab, &freq, TokenFormat::Jsonl, &mut jsonl)?;
    let artifacts = Artifacts {
        silb,
        vocab: text,
        jsonl: String::from_utf8(jsonl).expect("JSON is UTF-8"),
    };
    Ok((corpus, artifacts))
}

fn determinism() -> Outcome {
    let mut bytes = 0;
    for (seed, vocab_seed) in [(11u64, 0u64), (12, 7)] {
        let (corpus, a) = run_pipeline(seed, vocab_seed).map_err(|e| e.to_string())?;
        let (_, b) = run_pipeline(seed, vocab_seed).map_err(|e| e.to_string())?;
        ensure!(a.silb == b.silb, "seed {seed}: SILB files differ between runs");
        ensure!(a.vocab == b.vocab, "seed {seed}: vocabulary files differ between runs");
        ensure!(a.jsonl == b.jsonl, "seed {seed}: token streams differ between runs");

        let labelled: Vec<(String, Vec<Frame>)> = corpus
            .iter()
            .map(|s| (s.label().to_string(), common::sequence_pixels(s)))
            .collect();
        for ((name, bytes), (label, frames)) in a.silb.iter().zip(&labelled) {
            ensure!(*name == format!("{label}.silb"), "unexpected file {name}");
            ensure!(*bytes == common::silb(frames), "{name} differs from the oracle encoding");
        }
        let perm = common::permutation(5632, vocab_seed);
        let frames: Vec<Vec<Frame>> = labelled.iter().map(|(_, f)| f.clone()).collect();
        let table = common::table(&frames, &perm, None);
        ensure!(
            a.vocab == common::vocab_json(64, 44, 151_642, vocab_seed, &table),
            "vocabulary seed {vocab_seed}: file differs from the oracle"
        );
        ensure!(
            a.jsonl == common::jsonl(&labelled, &perm, vocab_seed, &table),
            "vocabulary seed {vocab_seed}: token stream differs from the oracle"
        );
        bytes += a.silb.iter().map(|(_, b)| b.len()).sum::<usize>() + a.vocab.len() + a.jsonl.len();
    }
    Ok(format!("2 configurations, {bytes} bytes identical across runs and oracle"))
}

fn throughput() -> Outcome {
    let corpus = walkers(8, 100, 100);
    let vocab = VocabularyMap::new(64, 44, 151_642, 1).unwrap();
    let freq = estimate_frequencies::<f64>(&corpus, &vocab, None).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut tokens = 0usize;
    for seq in &corpus {
        for (t, (c, v)) in extract_sequence_maps(seq).iter().enumerate() {
            tokens += encode_frame(t, c, v, &vocab, &freq).map_err(|e| e.to_string())?.len();
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(2), "10000 frames took {elapsed:.2?}");
    Ok(format!("10000 frames, {tokens} tokens in {elapsed:.2?}"))
}

fn format_roundtrips() -> Outcome {
    let mut rng = common::Rng::new(99);
    for i in 0..1000 {
        let h = 1 + rng.below(80) as usize;
        let w = 1 + rng.below(140) as usize;
        let density = rng.below(1001);
        let frame = common::random_frame(&mut rng, h, w, density);
        let grid = common::to_grid(&frame);

        let pgm = write_pgm(&grid);
        ensure!(read_pgm(&pgm).map_err(|e| e.to_string())? == grid, "grid {i}: PGM round trip");
        let ascii = ascii_pgm(&frame);
        ensure!(read_pgm(ascii.as_bytes()).map_err(|e| e.to_string())? == grid, "grid {i}: P2 decode");

        let silb = encode_frames(std::slice::from_ref(&grid)).map_err(|e| e.to_string())?;
        ensure!(silb == common::silb(&[frame]), "grid {i}: SILB bytes differ from oracle");
        let back = read_packed(&silb, "r", "random").map_err(|e| e.to_string())?;
        ensure!(back.frames() == [grid], "grid {i}: SILB round trip");
    }
    let rejected = malformed_inputs()?;
    Ok(format!("1000 grids round trip; {rejected} malformed inputs rejected"))
}

fn ascii_pgm(f: &Frame) -> String {
    let mut s = format!("P2\n# random\n{} {}\n1\n", f[0].len(), f.len());
    for row in f {
        let cells: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

/// Each case must be rejected with a message containing the given text.
fn malformed_inputs() -> Result<usize, String> {
    let grid = BitGrid::from_rows(&["1100", "0110", "0011"]).unwrap();
    let silb = encode_frames(&[grid.clone(), grid.clone()]).unwrap();
    let mut cases: Vec<(&str, Vec<u8>, &str)> = vec![
        ("silb truncated header", silb[..7].to_vec(), "truncated"),
        ("silb truncated payload", silb[..silb.len() - 1].to_vec(), "truncated"),
        ("silb bad magic", [b"SILC", &silb[4..]].concat(), "magic"),
        ("silb bad version", [&silb[..4], &[9u8][..], &silb[5..]].concat(), "version"),
        ("silb trailing bytes", [&silb[..], &[0u8][..]].concat(), "trailing"),
        ("silb zero frames", [&silb[..9], &[0u8; 4][..]].concat(), "frame count"),
        ("silb zero height", [&silb[..5], &[0u8, 0][..], &silb[7..]].concat(), "dimension"),
    ];
    let mut padded = silb.clone();
    padded[13] |= 0x01;
    cases.push(("silb padding bits", padded, "padding"));
    for (name, bytes, needle) in &cases {
        match read_packed(bytes, "m", "malformed") {
            Ok(_) => return Err(format!("{name} accepted")),
            Err(e) => ensure!(e.to_string().contains(needle), "{name}: diagnostic {e:?}"),
        }
    }

    let pgm = write_pgm(&grid);
    let pgm_cases: Vec<(&str, Vec<u8>, &str)> = vec![
        ("pgm bad magic", [b"P6", &pgm[2..]].concat(), "magic"),
        ("pgm truncated raster", pgm[..pgm.len() - 2].to_vec(), "truncated"),
        ("pgm missing header", b"P5\n4".to_vec(), ""),
        ("pgm zero maxval", b"P5\n1 1\n0\n\x00".to_vec(), "maxval"),
        ("pgm huge maxval", b"P2\n1 1\n70000\n0\n".to_vec(), "maxval"),
        ("pgm sample above maxval", b"P2\n1 1\n1\n2\n".to_vec(), ""),
        ("pgm zero width", b"P5\n0 1\n255\n".to_vec(), ""),
    ];
    for (name, bytes, needle) in &pgm_cases {
        match read_pgm(bytes) {
            Ok(_) => return Err(format!("{name} accepted")),
            Err(e) => ensure!(
                !e.to_string().is_empty() && e.to_string().contains(needle),
                "{name}: diagnostic {e:?}"
            ),
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seq = dir.path().join("mixed");
    fs::create_dir(&seq).unwrap();
    fs::write(seq.join("1.pgm"), write_pgm(&BitGrid::new(64, 44).unwrap())).unwrap();
    fs::write(seq.join("2.pgm"), write_pgm(&BitGrid::new(64, 40).unwrap())).unwrap();
    match load_corpus(dir.path()) {
        Ok(_) => return Err("mixed dimensions accepted".into()),
        Err(e) => ensure!(
            e.to_string().contains("2.pgm") && e.to_string().contains("64x44"),
            "mixed dimensions: diagnostic {e}"
        ),
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    fs::write(dir.path().join("bad.silb"), &cases[2].1).unwrap();
    match load_corpus(dir.path()) {
        Ok(_) => return Err("corpus with a bad SILB file accepted".into()),
        Err(e) => ensure!(
            e.to_string().contains("bad.silb") && e.to_string().contains("magic"),
            "corpus diagnostic {e}"
        ),
    }
    Ok(cases.len() + pgm_cases.len() + 2)
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("ACR arithmetic", acr_arithmetic),
        ("lossless roundtrip", lossless_roundtrip),
        ("density ordering", density_ordering),
        ("frequency flattening", frequency_flattening),
        ("vocabulary injectivity", vocabulary_injectivity),
        ("token conservation", token_conservation),
        ("determinism and conformance", determinism),
        ("throughput", throughput),
        ("format roundtrips", format_roundtrips),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {}. {name}: {why} [{took:.2?}]", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
