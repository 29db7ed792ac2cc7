//! Reading and writing silhouette corpora.
//!
//! A corpus directory holds one entry per sequence, visited in lexicographic
//! path order:
//!
//! ```text
//! <corpus>/<sequence-id>/<frame-number>.pgm   frames sorted numerically
//! <corpus>/<sequence-id>.silb                 packed sequence
//! ```

pub mod pgm;
pub mod silb;
pub mod stream;
pub mod walker;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SilhouetteSequence;

pub use pgm::{read_pgm, write_pgm, write_pgm_gray};
pub use silb::{read_packed, write_packed};
pub use walker::{generate_corpus, generate_walker, WalkerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Silb,
    Pgm,
}

enum Entry {
    PgmDir(PathBuf),
    Silb(PathBuf),
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::from(e).at_path(path))
}

fn label_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Loads every sequence of a corpus. `path` may also point at a single
/// `.silb` file.
pub fn load_corpus(path: &Path) -> Result<Vec<SilhouetteSequence>> {
    let meta = fs::metadata(path).map_err(|e| Error::from(e).at_path(path))?;
    if meta.is_file() {
        return Ok(vec![load_silb(path)?]);
    }
    let mut entries = Vec::new();
    for item in fs::read_dir(path).map_err(|e| Error::from(e).at_path(path))? {
        let item = item.map_err(|e| Error::from(e).at_path(path))?;
        let p = item.path();
        if p.is_dir() {
            entries.push(Entry::PgmDir(p));
        } else if p.extension().is_some_and(|e| e == "silb") {
            entries.push(Entry::Silb(p));
        }
    }
    entries.sort_by(|a, b| entry_path(a).cmp(entry_path(b)));
    if entries.is_empty() {
        return Err(Error::EmptyCorpus.at_path(path));
    }
    entries
        .par_iter()
        .map(|entry| match entry {
            Entry::PgmDir(p) => load_pgm_sequence(p),
            Entry::Silb(p) => load_silb(p),
        })
        .collect()
}

fn entry_path(e: &Entry) -> &Path {
    match e {
        Entry::PgmDir(p) | Entry::Silb(p) => p,
    }
}

fn load_silb(path: &Path) -> Result<SilhouetteSequence> {
    let bytes = read_file(path)?;
    read_packed(&bytes, label_of(path), path.display().to_string()).map_err(|e| e.at_path(path))
}

/// Loads `<dir>/<n>.pgm` frames in numeric order of `n`.
pub fn load_pgm_sequence(dir: &Path) -> Result<SilhouetteSequence> {
    let mut frames: Vec<(u64, PathBuf)> = Vec::new();
    for item in fs::read_dir(dir).map_err(|e| Error::from(e).at_path(dir))? {
        let p = item.map_err(|e| Error::from(e).at_path(dir))?.path();
        if !p.extension().is_some_and(|e| e == "pgm") {
            continue;
        }
        let number = p
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| {
                Error::InvalidArgument("frame file name is not a number".into()).at_path(&p)
            })?;
        frames.push((number, p));
    }
    frames.sort();
    if frames.is_empty() {
        return Err(Error::EmptySequence.at_path(dir));
    }
    let mut grids = Vec::with_capacity(frames.len());
    for (_, p) in &frames {
        let grid = read_pgm(&read_file(p)?).map_err(|e| e.at_path(p))?;
        if let Some(first) = grids.first() {
            crate::grid::BitGrid::check_shape(first, &grid).map_err(|e| e.at_path(p))?;
        }
        grids.push(grid);
    }
    SilhouetteSequence::new(grids, label_of(dir), dir.display().to_string())
}

/// Writes each sequence as `<dir>/<label>.silb` or as a directory of
/// `<dir>/<label>/<t>.pgm` frames numbered from 1 with three digits.
pub fn write_corpus(dir: &Path, corpus: &[SilhouetteSequence], format: CorpusFormat) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).at_path(dir))?;
    for seq in corpus {
        match format {
            CorpusFormat::Silb => {
                let path = dir.join(format!("{}.silb", seq.label()));
                let bytes = write_packed(seq)?;
                fs::write(&path, bytes).map_err(|e| Error::from(e).at_path(&path))?;
            }
            CorpusFormat::Pgm => {
                let seq_dir = dir.join(seq.label());
                fs::create_dir_all(&seq_dir).map_err(|e| Error::from(e).at_path(&seq_dir))?;
                for (t, frame) in seq.frames().iter().enumerate() {
                    let path = seq_dir.join(format!("{:03}.pgm", t + 1));
                    fs::write(&path, write_pgm(frame)).map_err(|e| Error::from(e).at_path(&path))?;
                }
            }
        }
    }
    Ok(())
}
