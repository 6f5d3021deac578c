//! PNG snapshots of the pipeline's intermediate stages.

use std::path::Path;

use anyhow::{Context, Result};
use liqd_core::corpus::LoadedSequence;
use liqd_core::diff::frame_diff;
use liqd_core::image::{to_grayscale, ColorMode, RasterImage};
use liqd_core::io::{write_image, write_mask};
use liqd_core::morphology::{apply_mask, compensate, StructuringElement};
use liqd_core::pipeline::{pair_indices, PipelineConfig};

fn stage_name(index: usize) -> String {
    format!("{index:04}.png")
}

/// Writes the repaired masks, masked grayscale frames, and per-pair change
/// planes of one sequence under `dir`.
pub fn dump_sequence(dir: &Path, seq: &LoadedSequence, config: &PipelineConfig) -> Result<()> {
    let se = StructuringElement::ellipse(config.se_size)?;
    let mut gray = Vec::with_capacity(seq.frames.len());
    for (i, (frame, mask)) in seq.frames.iter().zip(&seq.masks).enumerate() {
        let repaired = compensate(mask, &se);
        let masked = apply_mask(frame, &repaired)?;
        let frame_gray: RasterImage = if masked.mode() == ColorMode::Gray {
            masked
        } else {
            to_grayscale(&masked, config.gray)?
        };
        write_mask(dir.join("mask").join(stage_name(i)), &repaired)?;
        write_image(dir.join("gray").join(stage_name(i)), &frame_gray)?;
        gray.push(frame_gray);
    }
    for (pair, (a, b)) in pair_indices(seq.frames.len(), config.stride)
        .into_iter()
        .enumerate()
    {
        let diff = frame_diff(&gray[a], &gray[b], &config.diff)?;
        write_mask(dir.join("diff").join(stage_name(pair)), &diff.abs_plane)?;
        write_mask(dir.join("blocks").join(stage_name(pair)), &diff.block_map)?;
    }
    Ok(())
}

/// Dumps every sequence into `root/<sequence id>/`.
pub fn dump_corpus(root: &Path, seqs: &[LoadedSequence], config: &PipelineConfig) -> Result<()> {
    for seq in seqs {
        dump_sequence(&root.join(&seq.id), seq, config)
            .with_context(|| format!("dumping intermediates for {}", seq.id))?;
    }
    Ok(())
}
