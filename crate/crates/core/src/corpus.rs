//! Sequence corpora on disk and in memory.
//!
//! A sequence directory holds `frames/NNNN.png`, `masks/NNNN.png`, and an
//! optional `truth.json`. A corpus root holds one directory per sequence plus
//! a `corpus.json` manifest listing them; a directory that itself contains
//! `frames/` is loaded as a single-sequence corpus.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::LevelState;
use crate::error::{Error, Result};
use crate::image::RasterImage;
use crate::io::{read_image, read_mask, write_image, write_mask};
use crate::mask::BinaryMask;
use crate::par::run_jobs;
use crate::synth::{render_sequence, standard_case, RenderedSequence, Scenario, SceneSpec};

/// Ground truth stored alongside a rendered sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// Real-valued level row per frame.
    pub levels: Vec<f64>,
    /// One label per adjacent frame pair.
    pub labels: Vec<LevelState>,
    pub spec: SceneSpec,
    pub scenario: Scenario,
}

/// A sequence ready for processing: frames, raw masks, optional truth.
#[derive(Debug, Clone)]
pub struct LoadedSequence {
    pub id: String,
    pub frames: Vec<RasterImage>,
    pub masks: Vec<BinaryMask>,
    pub truth: Option<Truth>,
}

impl LoadedSequence {
    /// Wraps a rendered sequence without touching the filesystem.
    pub fn from_rendered(
        id: impl Into<String>,
        rendered: RenderedSequence,
        spec: SceneSpec,
        scenario: Scenario,
    ) -> Self {
        let truth = Truth {
            levels: rendered.levels,
            labels: rendered.labels,
            spec,
            scenario,
        };
        LoadedSequence {
            id: id.into(),
            frames: rendered.frames,
            masks: rendered.masks,
            truth: Some(truth),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Empty { what: "sequence frames" });
        }
        if self.masks.len() != self.frames.len() {
            return Err(Error::InvalidParameter(format!(
                "sequence {}: {} frames but {} masks",
                self.id,
                self.frames.len(),
                self.masks.len()
            )));
        }
        if let Some(truth) = &self.truth {
            if truth.levels.len() != self.frames.len() {
                return Err(Error::InvalidParameter(format!(
                    "sequence {}: truth lists {} levels for {} frames",
                    self.id,
                    truth.levels.len(),
                    self.frames.len()
                )));
            }
            if truth.labels.len() + 1 != self.frames.len() {
                return Err(Error::InvalidParameter(format!(
                    "sequence {}: truth lists {} labels for {} frames",
                    self.id,
                    truth.labels.len(),
                    self.frames.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    sequences: Vec<String>,
}

const MANIFEST_NAME: &str = "corpus.json";

fn frame_name(index: usize) -> String {
    format!("{index:04}.png")
}

/// Writes one sequence into `dir`: `frames/`, `masks/`, and `truth.json`.
pub fn write_sequence(
    dir: &Path,
    rendered: &RenderedSequence,
    spec: &SceneSpec,
    scenario: &Scenario,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, &e))?;
    for (i, frame) in rendered.frames.iter().enumerate() {
        write_image(&dir.join("frames").join(frame_name(i)), frame)?;
    }
    for (i, mask) in rendered.masks.iter().enumerate() {
        write_mask(&dir.join("masks").join(frame_name(i)), mask)?;
    }
    let truth = Truth {
        levels: rendered.levels.clone(),
        labels: rendered.labels.clone(),
        spec: *spec,
        scenario: *scenario,
    };
    let path = dir.join("truth.json");
    let json = serde_json::to_string_pretty(&truth)
        .map_err(|e| Error::file(&path, &e))?;
    fs::write(&path, json).map_err(|e| Error::file(&path, &e))?;
    Ok(())
}

fn numbered_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::file(dir, &e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png" | "pgm" | "ppm" | "pnm")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::File {
            path: dir.to_path_buf(),
            message: "no image files found".into(),
        });
    }
    Ok(paths)
}

/// Loads one sequence directory (`frames/`, `masks/`, optional `truth.json`).
pub fn load_sequence(dir: &Path) -> Result<LoadedSequence> {
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());

    let frames = numbered_images(&dir.join("frames"))?
        .iter()
        .map(|p| read_image(p))
        .collect::<Result<Vec<_>>>()?;
    let masks = numbered_images(&dir.join("masks"))?
        .iter()
        .map(|p| read_mask(p))
        .collect::<Result<Vec<_>>>()?;

    let truth_path = dir.join("truth.json");
    let truth = if truth_path.exists() {
        let text = fs::read_to_string(&truth_path).map_err(|e| Error::file(&truth_path, &e))?;
        Some(serde_json::from_str(&text).map_err(|e| Error::file(&truth_path, &e))?)
    } else {
        None
    };

    let seq = LoadedSequence {
        id,
        frames,
        masks,
        truth,
    };
    seq.validate()?;
    Ok(seq)
}

/// Loads a corpus root: every sequence named by `corpus.json`, or the root
/// itself when it contains a `frames/` directory.
pub fn load_corpus(root: &Path) -> Result<Vec<LoadedSequence>> {
    let manifest_path = root.join(MANIFEST_NAME);
    if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path)
            .map_err(|e| Error::file(&manifest_path, &e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::file(&manifest_path, &e))?;
        if manifest.sequences.is_empty() {
            return Err(Error::Empty { what: "corpus manifest" });
        }
        return manifest
            .sequences
            .iter()
            .map(|name| load_sequence(&root.join(name)))
            .collect();
    }
    if root.join("frames").is_dir() {
        return Ok(vec![load_sequence(root)?]);
    }
    Err(Error::File {
        path: root.to_path_buf(),
        message: format!("expected a {MANIFEST_NAME} manifest or a frames/ directory"),
    })
}

/// Renders the standard cases for `seeds` in memory. Sequence ids are
/// `seq-NNNN` after the seed; rendering fans out across `jobs`.
pub fn generate_cases(
    seeds: std::ops::Range<u64>,
    frames: usize,
    jobs: usize,
) -> Result<Vec<LoadedSequence>> {
    let seeds: Vec<u64> = seeds.collect();
    if seeds.is_empty() {
        return Err(Error::Empty { what: "seed range" });
    }
    run_jobs(jobs, seeds, |seed| {
        let (spec, scenario) = standard_case(seed, frames);
        let rendered = render_sequence(&spec, &scenario)?;
        Ok(LoadedSequence::from_rendered(
            format!("seq-{seed:04}"),
            rendered,
            spec,
            scenario,
        ))
    })
    .into_iter()
    .collect()
}

/// Renders and writes the standard cases for `seeds` under `root`, including
/// the manifest. Returns the sequence ids in manifest order.
pub fn write_corpus(
    root: &Path,
    seeds: std::ops::Range<u64>,
    frames: usize,
    jobs: usize,
) -> Result<Vec<String>> {
    let cases: Vec<(u64, _)> = seeds.clone().zip(
        run_jobs(jobs, seeds.collect(), |seed| {
            let (spec, scenario) = standard_case(seed, frames);
            render_sequence(&spec, &scenario).map(|r| (r, spec, scenario))
        })
        .into_iter(),
    )
    .collect();

    let mut ids = Vec::with_capacity(cases.len());
    for (seed, rendered) in cases {
        let (rendered, spec, scenario) = rendered?;
        let id = format!("seq-{seed:04}");
        write_sequence(&root.join(&id), &rendered, &spec, &scenario)?;
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(Error::Empty { what: "seed range" });
    }

    let manifest = Manifest {
        sequences: ids.clone(),
    };
    let path = root.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::file(&path, &e))?;
    fs::write(&path, json).map_err(|e| Error::file(&path, &e))?;
    Ok(ids)
}
