//! Tile quantization into frequency-class codebooks plus a hypersparse
//! uniform-quantized overlay for outlier and salient weights.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};
use crate::profile::WeightProfile;
use crate::sensitivity::{
    compute_adaptive_k, extract_outliers, extract_salient, fisher_sensitivity,
    tile_sensitivities, Matrix2D, TileClass,
};

pub const MODEL_SCHEMA: &str = "halo-model-v1";

/// A (voltage, frequency, codebook) triple defining one quantization/DVFS
/// class. Every codebook value must sustain the target frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyClass {
    pub id: usize,
    pub target_freq_ghz: f64,
    pub voltage_v: f64,
    /// Sorted ascending, duplicate-free, contains 0.
    pub codebook: Vec<i8>,
}

impl FrequencyClass {
    pub fn validate(&self, profile: &WeightProfile) -> Result<()> {
        if self.codebook.is_empty() {
            return Err(HaloError::InvalidArgument("empty codebook".into()));
        }
        if !self.codebook.contains(&0) {
            return Err(HaloError::InvalidArgument("codebook must contain 0".into()));
        }
        if self.codebook.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HaloError::InvalidArgument(
                "codebook must be sorted and duplicate-free".into(),
            ));
        }
        for &v in &self.codebook {
            if profile.max_freq_ghz(v) < self.target_freq_ghz {
                return Err(HaloError::InvalidArgument(format!(
                    "codebook value {v} cannot sustain {} GHz",
                    self.target_freq_ghz
                )));
            }
        }
        Ok(())
    }

    /// Worst-case MAC delay over the codebook.
    pub fn critical_path_ps(&self, profile: &WeightProfile) -> u32 {
        self.codebook
            .iter()
            .map(|&v| profile.worst_delay_ps(v))
            .max()
            .unwrap_or(1)
    }
}

/// Builds the codebook for a target frequency: all weight values whose
/// achievable frequency reaches the target, plus 0. If the candidate set
/// exceeds `max_size`, 0 is kept and the rest are ranked by achievable
/// frequency (ties: smaller magnitude first, then positive before negative).
pub fn build_codebook(profile: &WeightProfile, target_freq_ghz: f64, max_size: usize) -> Result<Vec<i8>> {
    if max_size == 0 || max_size > 256 {
        return Err(HaloError::InvalidArgument(
            "codebook max_size must be in 1..=256".into(),
        ));
    }
    let mut candidates: Vec<i8> = (i8::MIN..=i8::MAX)
        .filter(|&v| profile.max_freq_ghz(v) >= target_freq_ghz)
        .collect();
    if candidates.is_empty() {
        return Err(HaloError::EmptyCodebook {
            target_ghz: target_freq_ghz,
        });
    }
    if !candidates.contains(&0) {
        candidates.push(0);
    }
    if candidates.len() > max_size {
        candidates.sort_by(|&a, &b| {
            profile
                .max_freq_ghz(b)
                .partial_cmp(&profile.max_freq_ghz(a))
                .unwrap()
                .then((a as i16).unsigned_abs().cmp(&(b as i16).unsigned_abs()))
                .then((a < 0).cmp(&(b < 0)))
        });
        let mut kept: Vec<i8> = vec![0];
        for &v in &candidates {
            if kept.len() == max_size {
                break;
            }
            if v != 0 {
                kept.push(v);
            }
        }
        candidates = kept;
    }
    candidates.sort_unstable();
    Ok(candidates)
}

/// CSR overlay of per-channel uniformly quantized outlier/salient weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOverlay {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<i8>,
    pub channel_scales: Vec<f32>,
}

impl SparseOverlay {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.row_ptr.len() != self.rows + 1
            || self.channel_scales.len() != self.rows
            || self.col_idx.len() != self.values.len()
            || self.row_ptr.first() != Some(&0)
            || self.row_ptr.last() != Some(&self.values.len())
        {
            return Err(HaloError::MalformedModel("overlay CSR structure".into()));
        }
        for r in 0..self.rows {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            if lo > hi {
                return Err(HaloError::MalformedModel("row_ptr not nondecreasing".into()));
            }
            let row = &self.col_idx[lo..hi];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&c| c >= self.cols) {
                return Err(HaloError::MalformedModel(format!(
                    "overlay row {r} column indices invalid"
                )));
            }
        }
        Ok(())
    }
}

/// Per-channel (row) uniform 8-bit quantization of the masked weights into a
/// CSR overlay. Scale is max|w|/127 over the row's masked entries, 1 if the
/// row has none; values use round-half-even and clamp to [-127, 127].
pub fn quantize_overlay(
    weights: &Matrix2D,
    outlier_mask: &[bool],
    salient_mask: &[bool],
) -> Result<SparseOverlay> {
    let n = weights.len();
    if outlier_mask.len() != n || salient_mask.len() != n {
        return Err(HaloError::ShapeMismatch("mask length".into()));
    }
    if outlier_mask.iter().zip(salient_mask).any(|(&o, &s)| o && s) {
        return Err(HaloError::InvalidArgument(
            "outlier and salient masks must be disjoint".into(),
        ));
    }
    let mut row_ptr = Vec::with_capacity(weights.rows + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut channel_scales = Vec::with_capacity(weights.rows);
    row_ptr.push(0);
    for r in 0..weights.rows {
        let base = r * weights.cols;
        let mut max_abs = 0.0f32;
        for c in 0..weights.cols {
            if outlier_mask[base + c] || salient_mask[base + c] {
                max_abs = max_abs.max(weights.data[base + c].abs());
            }
        }
        let scale = if max_abs > 0.0 { max_abs / 127.0 } else { 1.0 };
        for c in 0..weights.cols {
            let i = base + c;
            if outlier_mask[i] || salient_mask[i] {
                let q = (weights.data[i] / scale).round_ties_even();
                values.push(q.clamp(-127.0, 127.0) as i8);
                col_idx.push(c);
            }
        }
        channel_scales.push(scale);
        row_ptr.push(values.len());
    }
    Ok(SparseOverlay {
        rows: weights.rows,
        cols: weights.cols,
        row_ptr,
        col_idx,
        values,
        channel_scales,
    })
}

/// Snaps a tile of normal weights onto the codebook: scale is
/// max|w| / max|codebook| (1 for an all-zero tile), and each weight maps to
/// the nearest codebook value of w/scale, ties to the smaller value.
pub fn quantize_tile(tile: &[f32], codebook: &[i8]) -> (Vec<u8>, f32) {
    let cb_max = codebook
        .iter()
        .map(|&c| (c as i16).unsigned_abs())
        .max()
        .unwrap_or(1)
        .max(1) as f32;
    let max_abs = tile.iter().fold(0.0f32, |m, w| m.max(w.abs()));
    let scale = if max_abs > 0.0 { max_abs / cb_max } else { 1.0 };
    let indices = tile
        .iter()
        .map(|&w| {
            let target = w / scale;
            let mut best = 0usize;
            let mut best_dist = f32::INFINITY;
            for (i, &c) in codebook.iter().enumerate() {
                let d = (target - c as f32).abs();
                if d < best_dist {
                    best_dist = d;
                    best = i;
                }
            }
            best as u8
        })
        .collect();
    (indices, scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedTile {
    pub class_id: usize,
    /// Codebook indices, row-major over the tile.
    pub indices: Vec<u8>,
    pub scale: f32,
}

/// Dense tile-quantized weights plus the sparse overlay.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub rows: usize,
    pub cols: usize,
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub classes: Vec<FrequencyClass>,
    /// Row-major over the tile grid.
    pub tiles: Vec<QuantizedTile>,
    pub overlay: SparseOverlay,
    pub k_fraction: f64,
    pub profile_digest: String,
}

/// Class target frequency, voltage and codebook size cap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassSpec {
    pub target_freq_ghz: f64,
    pub voltage_v: f64,
    pub max_codebook: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuantizeConfig {
    pub tile_rows: usize,
    pub tile_cols: usize,
    /// Fraction of total tile sensitivity the HIGH class must retain.
    pub retention: f64,
    /// Fraction of weights preserved as salient.
    pub salient_fraction: f64,
    /// Cap on combined overlay density (outliers + salient).
    pub overlay_cap: f64,
    /// LOW-sensitivity tiles: small fast codebook.
    pub low_class: ClassSpec,
    /// HIGH-sensitivity tiles: larger, slower codebook.
    pub high_class: ClassSpec,
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        QuantizeConfig {
            tile_rows: 128,
            tile_cols: 128,
            retention: 0.95,
            salient_fraction: 0.0005,
            overlay_cap: 0.005,
            low_class: ClassSpec {
                target_freq_ghz: 3.7,
                voltage_v: 1.2,
                max_codebook: 9,
            },
            high_class: ClassSpec {
                target_freq_ghz: 2.4,
                voltage_v: 1.1,
                max_codebook: 16,
            },
        }
    }
}

pub const LOW_CLASS_ID: usize = 0;
pub const HIGH_CLASS_ID: usize = 1;

/// Runs the full quantization flow: outlier extraction, salient selection
/// from the remainder, overlay quantization, tile sensitivity classification
/// and per-tile codebook quantization.
pub fn quantize_model(
    weights: &Matrix2D,
    gradients: &Matrix2D,
    config: &QuantizeConfig,
    profile: &WeightProfile,
) -> Result<QuantizedModel> {
    if weights.rows != gradients.rows || weights.cols != gradients.cols {
        return Err(HaloError::ShapeMismatch(format!(
            "weights {}x{} vs gradients {}x{}",
            weights.rows, weights.cols, gradients.rows, gradients.cols
        )));
    }

    let fisher = fisher_sensitivity(gradients)?;
    let (outlier_mask, _) = extract_outliers(weights)?;
    // With no gradient signal at all there is nothing salient to preserve.
    let mut salient_mask = if fisher.data.iter().all(|&v| v == 0.0) {
        vec![false; weights.len()]
    } else {
        extract_salient(weights, &fisher, config.salient_fraction, &outlier_mask)?
    };

    // Combined overlay density must stay under the cap; salient entries are
    // trimmed (lowest sensitivity first) if outliers already claim the budget.
    let n = weights.len();
    let cap = (config.overlay_cap * n as f64).ceil() as usize;
    let outlier_count = outlier_mask.iter().filter(|&&m| m).count();
    let salient_budget = cap.saturating_sub(outlier_count);
    let salient_count = salient_mask.iter().filter(|&&m| m).count();
    if salient_count > salient_budget {
        let mut chosen: Vec<usize> = (0..n).filter(|&i| salient_mask[i]).collect();
        chosen.sort_by(|&a, &b| fisher.data[b].partial_cmp(&fisher.data[a]).unwrap());
        salient_mask = vec![false; n];
        for &i in chosen.iter().take(salient_budget) {
            salient_mask[i] = true;
        }
    }

    let overlay = quantize_overlay(weights, &outlier_mask, &salient_mask)?;

    // Normal weights: overlay positions zeroed before tiling.
    let mut dense = weights.clone();
    for i in 0..n {
        if outlier_mask[i] || salient_mask[i] {
            dense.data[i] = 0.0;
        }
    }
    let padded = dense.padded(config.tile_rows, config.tile_cols);

    let grid = tile_sensitivities(gradients, config.tile_rows, config.tile_cols)?;
    let (k_fraction, tile_class) = compute_adaptive_k(&grid.sensitivities, config.retention)?;

    let low_cb = build_codebook(
        profile,
        config.low_class.target_freq_ghz,
        config.low_class.max_codebook,
    )?;
    let high_cb = build_codebook(
        profile,
        config.high_class.target_freq_ghz,
        config.high_class.max_codebook,
    )?;
    let classes = vec![
        FrequencyClass {
            id: LOW_CLASS_ID,
            target_freq_ghz: config.low_class.target_freq_ghz,
            voltage_v: config.low_class.voltage_v,
            codebook: low_cb,
        },
        FrequencyClass {
            id: HIGH_CLASS_ID,
            target_freq_ghz: config.high_class.target_freq_ghz,
            voltage_v: config.high_class.voltage_v,
            codebook: high_cb,
        },
    ];

    let mut tiles = Vec::with_capacity(grid.grid_rows * grid.grid_cols);
    let mut tile_buf = vec![0.0f32; config.tile_rows * config.tile_cols];
    for tr in 0..grid.grid_rows {
        for tc in 0..grid.grid_cols {
            for r in 0..config.tile_rows {
                let src = (tr * config.tile_rows + r) * padded.cols + tc * config.tile_cols;
                tile_buf[r * config.tile_cols..(r + 1) * config.tile_cols]
                    .copy_from_slice(&padded.data[src..src + config.tile_cols]);
            }
            let class_id = match tile_class[tr * grid.grid_cols + tc] {
                TileClass::Low => LOW_CLASS_ID,
                TileClass::High => HIGH_CLASS_ID,
            };
            let (indices, scale) = quantize_tile(&tile_buf, &classes[class_id].codebook);
            tiles.push(QuantizedTile {
                class_id,
                indices,
                scale,
            });
        }
    }

    Ok(QuantizedModel {
        rows: weights.rows,
        cols: weights.cols,
        tile_rows: config.tile_rows,
        tile_cols: config.tile_cols,
        grid_rows: grid.grid_rows,
        grid_cols: grid.grid_cols,
        classes,
        tiles,
        overlay,
        k_fraction,
        profile_digest: profile.digest(),
    })
}

impl QuantizedModel {
    pub fn class(&self, id: usize) -> &FrequencyClass {
        &self.classes[id]
    }

    /// Int8 codebook value for a tile-local index.
    pub fn tile_value(&self, tile: &QuantizedTile, i: usize) -> i8 {
        self.classes[tile.class_id].codebook[tile.indices[i] as usize]
    }

    /// Per-tile class labels in grid row-major order.
    pub fn tile_class_ids(&self) -> Vec<usize> {
        self.tiles.iter().map(|t| t.class_id).collect()
    }
}

/// Dense reconstruction: tiles expand to scale * codebook[index], the overlay
/// overwrites its positions, padding is stripped.
pub fn dequantize(model: &QuantizedModel) -> Matrix2D {
    let mut out = Matrix2D::zeros(model.rows, model.cols);
    for tr in 0..model.grid_rows {
        for tc in 0..model.grid_cols {
            let tile = &model.tiles[tr * model.grid_cols + tc];
            for r in 0..model.tile_rows {
                let gr = tr * model.tile_rows + r;
                if gr >= model.rows {
                    break;
                }
                for c in 0..model.tile_cols {
                    let gc = tc * model.tile_cols + c;
                    if gc >= model.cols {
                        break;
                    }
                    let v = model.tile_value(tile, r * model.tile_cols + c);
                    out.data[gr * model.cols + gc] = tile.scale * v as f32;
                }
            }
        }
    }
    for r in 0..model.overlay.rows {
        let scale = model.overlay.channel_scales[r];
        for k in model.overlay.row_ptr[r]..model.overlay.row_ptr[r + 1] {
            let c = model.overlay.col_idx[k];
            out.data[r * model.cols + c] = model.overlay.values[k] as f32 * scale;
        }
    }
    out
}

/// Parameter-weighted average bits per weight: log2(codebook size) for dense
/// tiles, 8 bits for overlay entries.
pub fn effective_bitwidth(model: &QuantizedModel) -> f64 {
    let total = (model.rows * model.cols) as f64;
    // Non-padding positions per class; overlay positions are then reassigned
    // from their tile's class to the 8-bit overlay bucket.
    let mut class_params = vec![0i64; model.classes.len()];
    for tr in 0..model.grid_rows {
        for tc in 0..model.grid_cols {
            let tile = &model.tiles[tr * model.grid_cols + tc];
            let rows = model.rows.saturating_sub(tr * model.tile_rows).min(model.tile_rows);
            let cols = model.cols.saturating_sub(tc * model.tile_cols).min(model.tile_cols);
            class_params[tile.class_id] += (rows * cols) as i64;
        }
    }
    for r in 0..model.overlay.rows {
        for k in model.overlay.row_ptr[r]..model.overlay.row_ptr[r + 1] {
            let c = model.overlay.col_idx[k];
            let tile = &model.tiles[(r / model.tile_rows) * model.grid_cols + c / model.tile_cols];
            class_params[tile.class_id] -= 1;
        }
    }
    let mut bits = model.overlay.nnz() as f64 * 8.0;
    for (class, &params) in model.classes.iter().zip(&class_params) {
        bits += params as f64 * (class.codebook.len() as f64).log2();
    }
    bits / total
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    schema: String,
    rows: usize,
    cols: usize,
    tile_rows: usize,
    tile_cols: usize,
    grid_rows: usize,
    grid_cols: usize,
    classes: Vec<FrequencyClass>,
    tile_class_ids: Vec<usize>,
    k_fraction: f64,
    overlay_nnz: usize,
    profile_digest: String,
}

/// Writes the model container: `manifest.json` plus raw little-endian arrays
/// `tiles.i8`, `scales.f32`, `overlay_row_ptr.u64`, `overlay_col_idx.u64`,
/// `overlay_values.i8`, `overlay_scales.f32`.
pub fn save_model(model: &QuantizedModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| HaloError::io(dir, e))?;
    let manifest = ModelManifest {
        schema: MODEL_SCHEMA.to_string(),
        rows: model.rows,
        cols: model.cols,
        tile_rows: model.tile_rows,
        tile_cols: model.tile_cols,
        grid_rows: model.grid_rows,
        grid_cols: model.grid_cols,
        classes: model.classes.clone(),
        tile_class_ids: model.tile_class_ids(),
        k_fraction: model.k_fraction,
        overlay_nnz: model.overlay.nnz(),
        profile_digest: model.profile_digest.clone(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| HaloError::json(&path, e))?;
    fs::write(&path, text).map_err(|e| HaloError::io(&path, e))?;

    let write = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| HaloError::io(&p, e))
    };
    let mut tile_bytes = Vec::new();
    let mut scale_bytes = Vec::new();
    for tile in &model.tiles {
        tile_bytes.extend_from_slice(&tile.indices);
        scale_bytes.extend_from_slice(&tile.scale.to_le_bytes());
    }
    write("tiles.i8", tile_bytes)?;
    write("scales.f32", scale_bytes)?;
    write(
        "overlay_row_ptr.u64",
        model
            .overlay
            .row_ptr
            .iter()
            .flat_map(|&v| (v as u64).to_le_bytes())
            .collect(),
    )?;
    write(
        "overlay_col_idx.u64",
        model
            .overlay
            .col_idx
            .iter()
            .flat_map(|&v| (v as u64).to_le_bytes())
            .collect(),
    )?;
    write(
        "overlay_values.i8",
        model.overlay.values.iter().map(|&v| v as u8).collect(),
    )?;
    write(
        "overlay_scales.f32",
        model
            .overlay
            .channel_scales
            .iter()
            .flat_map(|&v| v.to_le_bytes())
            .collect(),
    )?;
    Ok(())
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<QuantizedModel> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| HaloError::io(&path, e))?;
    let manifest: ModelManifest =
        serde_json::from_str(&text).map_err(|e| HaloError::json(&path, e))?;
    if manifest.schema != MODEL_SCHEMA {
        return Err(HaloError::MalformedModel(format!(
            "unknown schema {:?}",
            manifest.schema
        )));
    }
    let read = |name: &str| -> Result<Vec<u8>> {
        let p = dir.join(name);
        fs::read(&p).map_err(|e| HaloError::io(&p, e))
    };

    let tile_area = manifest.tile_rows * manifest.tile_cols;
    let tile_count = manifest.grid_rows * manifest.grid_cols;
    let tile_bytes = read("tiles.i8")?;
    let scale_bytes = read("scales.f32")?;
    if tile_bytes.len() != tile_area * tile_count
        || scale_bytes.len() != 4 * tile_count
        || manifest.tile_class_ids.len() != tile_count
    {
        return Err(HaloError::MalformedModel("tile array sizes".into()));
    }
    let mut tiles = Vec::with_capacity(tile_count);
    for t in 0..tile_count {
        let class_id = manifest.tile_class_ids[t];
        let class = manifest
            .classes
            .get(class_id)
            .ok_or(HaloError::UnmappedClass(class_id))?;
        let indices = tile_bytes[t * tile_area..(t + 1) * tile_area].to_vec();
        if indices.iter().any(|&i| i as usize >= class.codebook.len()) {
            return Err(HaloError::MalformedModel(format!(
                "tile {t} index out of codebook range"
            )));
        }
        let scale = f32::from_le_bytes(scale_bytes[t * 4..t * 4 + 4].try_into().unwrap());
        tiles.push(QuantizedTile {
            class_id,
            indices,
            scale,
        });
    }

    let u64s = |bytes: Vec<u8>| -> Vec<usize> {
        bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect()
    };
    let overlay = SparseOverlay {
        rows: manifest.rows,
        cols: manifest.cols,
        row_ptr: u64s(read("overlay_row_ptr.u64")?),
        col_idx: u64s(read("overlay_col_idx.u64")?),
        values: read("overlay_values.i8")?
            .iter()
            .map(|&b| b as i8)
            .collect(),
        channel_scales: read("overlay_scales.f32")?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    overlay.validate()?;
    if overlay.nnz() != manifest.overlay_nnz {
        return Err(HaloError::MalformedModel("overlay nnz mismatch".into()));
    }

    Ok(QuantizedModel {
        rows: manifest.rows,
        cols: manifest.cols,
        tile_rows: manifest.tile_rows,
        tile_cols: manifest.tile_cols,
        grid_rows: manifest.grid_rows,
        grid_cols: manifest.grid_cols,
        classes: manifest.classes,
        tiles,
        overlay,
        k_fraction: manifest.k_fraction,
        profile_digest: manifest.profile_digest,
    })
}

/// Fisher-weighted squared quantization error, the accuracy proxy consumed by
/// the pipeline sweep.
pub fn proxy_loss(weights: &Matrix2D, gradients: &Matrix2D, model: &QuantizedModel) -> f64 {
    let deq = dequantize(model);
    let mut loss = 0.0f64;
    for i in 0..weights.len() {
        let g = gradients.data[i] as f64;
        let d = weights.data[i] as f64 - deq.data[i] as f64;
        loss += g * g * d * d;
    }
    loss
}
