use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use seeker_core::data::{parse_tracks, LabelFile, TrackFile, DEFAULT_KEYPOINTS};

pub const RUN_CONFIG: &str = "run_config.json";

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let file_name = path
        .file_name()
        .with_context(|| format!("{} is not a file path", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let result: Result<()> = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        fill(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

pub fn output_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

pub fn read_tracks(path: &Path) -> Result<TrackFile> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_tracks(BufReader::new(f), DEFAULT_KEYPOINTS).with_context(|| format!("reading tracks from {}", path.display()))
}

pub fn read_labels(path: &Path) -> Result<LabelFile> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    LabelFile::read(BufReader::new(f)).with_context(|| format!("reading labels from {}", path.display()))
}
