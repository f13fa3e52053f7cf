//! Gradient-based weight and tile sensitivity.
//!
//! Per-weight sensitivity is the diagonal Fisher approximation (elementwise
//! squared gradient). Outliers are the 3-sigma tail of the weight
//! distribution, salient weights the top fraction by sensitivity among the
//! remainder, and tiles are split LOW/HIGH by a cumulative-retention rule.

use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};

/// Row-major dense matrix of f32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix2D {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix2D {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(HaloError::InvalidArgument(
                "matrix dimensions must be positive".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(HaloError::ShapeMismatch(format!(
                "expected {} elements, got {}",
                rows * cols,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(HaloError::NonFinite("matrix data".into()));
        }
        Ok(Matrix2D { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix2D {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn at(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Zero-pads on the right/bottom to multiples of the tile dimensions.
    pub fn padded(&self, tile_rows: usize, tile_cols: usize) -> Matrix2D {
        let pr = self.rows.div_ceil(tile_rows) * tile_rows;
        let pc = self.cols.div_ceil(tile_cols) * tile_cols;
        if pr == self.rows && pc == self.cols {
            return self.clone();
        }
        let mut out = Matrix2D::zeros(pr, pc);
        for r in 0..self.rows {
            let src = &self.data[r * self.cols..(r + 1) * self.cols];
            out.data[r * pc..r * pc + self.cols].copy_from_slice(src);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TileClass {
    Low,
    High,
}

/// Tile decomposition of a gradient matrix with per-tile sensitivity scores.
#[derive(Debug, Clone)]
pub struct TileGrid {
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Row-major over the tile grid.
    pub sensitivities: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SensitivityMasks {
    pub salient_mask: Vec<bool>,
    pub outlier_mask: Vec<bool>,
    pub tile_class: Vec<TileClass>,
    pub k_fraction: f64,
}

/// Elementwise squared gradient: the diagonal Fisher approximation for a
/// single sample. Callers average over calibration samples before invoking.
pub fn fisher_sensitivity(gradient: &Matrix2D) -> Result<Matrix2D> {
    if !gradient.data.iter().all(|v| v.is_finite()) {
        return Err(HaloError::NonFinite("gradient".into()));
    }
    Ok(Matrix2D {
        rows: gradient.rows,
        cols: gradient.cols,
        data: gradient.data.iter().map(|g| g * g).collect(),
    })
}

/// 3-sigma outlier extraction with population standard deviation; returns the
/// mask and a copy of the matrix with outlier positions zeroed.
pub fn extract_outliers(weights: &Matrix2D) -> Result<(Vec<bool>, Matrix2D)> {
    if weights.len() < 2 {
        return Err(HaloError::InvalidArgument(
            "outlier extraction needs at least 2 elements".into(),
        ));
    }
    let n = weights.len() as f64;
    let mean = weights.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = weights
        .data
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let sigma = var.sqrt();
    let mut mask = vec![false; weights.len()];
    let mut cleaned = weights.clone();
    if sigma > 0.0 {
        for (i, &v) in weights.data.iter().enumerate() {
            if (v as f64 - mean).abs() > 3.0 * sigma {
                mask[i] = true;
                cleaned.data[i] = 0.0;
            }
        }
    }
    Ok((mask, cleaned))
}

/// Marks the ceil(fraction*N) positions with largest sensitivity, skipping
/// positions excluded by `excluded` (outliers). Ties break by ascending
/// row-major index.
pub fn extract_salient(
    weights: &Matrix2D,
    sensitivity: &Matrix2D,
    fraction: f64,
    excluded: &[bool],
) -> Result<Vec<bool>> {
    if weights.rows != sensitivity.rows || weights.cols != sensitivity.cols {
        return Err(HaloError::ShapeMismatch(format!(
            "weights {}x{} vs sensitivity {}x{}",
            weights.rows, weights.cols, sensitivity.rows, sensitivity.cols
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HaloError::InvalidArgument(
            "salient fraction must be in (0,1)".into(),
        ));
    }
    if excluded.len() != weights.len() {
        return Err(HaloError::ShapeMismatch("excluded mask length".into()));
    }
    let count = ((fraction * weights.len() as f64).ceil() as usize).min(weights.len());
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| !excluded[i]).collect();
    // Stable sort by descending sensitivity keeps row-major tie order.
    order.sort_by(|&a, &b| {
        sensitivity.data[b]
            .partial_cmp(&sensitivity.data[a])
            .unwrap()
    });
    let mut mask = vec![false; weights.len()];
    for &i in order.iter().take(count) {
        mask[i] = true;
    }
    Ok(mask)
}

/// Per-tile sensitivity: sum of squared gradients in each tile divided by the
/// nominal tile area (padded boundary tiles keep the full-area divisor).
pub fn tile_sensitivities(
    gradient: &Matrix2D,
    tile_rows: usize,
    tile_cols: usize,
) -> Result<TileGrid> {
    if tile_rows == 0 || tile_cols == 0 {
        return Err(HaloError::InvalidArgument(
            "tile dimensions must be positive".into(),
        ));
    }
    let padded = gradient.padded(tile_rows, tile_cols);
    let grid_rows = padded.rows / tile_rows;
    let grid_cols = padded.cols / tile_cols;
    let area = (tile_rows * tile_cols) as f64;
    let mut sensitivities = Vec::with_capacity(grid_rows * grid_cols);
    for tr in 0..grid_rows {
        for tc in 0..grid_cols {
            let mut sum = 0.0f64;
            for r in 0..tile_rows {
                for c in 0..tile_cols {
                    let g = padded.at(tr * tile_rows + r, tc * tile_cols + c) as f64;
                    sum += g * g;
                }
            }
            sensitivities.push(sum / area);
        }
    }
    Ok(TileGrid {
        tile_rows,
        tile_cols,
        grid_rows,
        grid_cols,
        sensitivities,
    })
}

/// Splits tiles into a minimal descending-sensitivity prefix (HIGH) whose
/// cumulative normalized sensitivity reaches `retention`; the rest are LOW.
/// Returns the LOW fraction k and per-tile class labels. Zero total
/// sensitivity classifies everything LOW with k = 1.
pub fn compute_adaptive_k(sensitivities: &[f64], retention: f64) -> Result<(f64, Vec<TileClass>)> {
    if sensitivities.is_empty() {
        return Err(HaloError::InvalidArgument("empty tile list".into()));
    }
    if !(retention > 0.0 && retention <= 1.0) {
        return Err(HaloError::InvalidArgument(
            "retention must be in (0,1]".into(),
        ));
    }
    let n = sensitivities.len();
    let total: f64 = sensitivities.iter().sum();
    let mut classes = vec![TileClass::Low; n];
    if total <= 0.0 {
        return Ok((1.0, classes));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        sensitivities[b]
            .partial_cmp(&sensitivities[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut cum = 0.0;
    let mut high_count = n;
    for (rank, &idx) in order.iter().enumerate() {
        cum += sensitivities[idx];
        if cum >= retention * total - 1e-12 * total {
            high_count = rank + 1;
            break;
        }
    }
    for &idx in order.iter().take(high_count) {
        classes[idx] = TileClass::High;
    }
    let k = (n - high_count) as f64 / n as f64;
    Ok((k, classes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, data: Vec<f32>) -> Matrix2D {
        Matrix2D::new(rows, cols, data).unwrap()
    }

    #[test]
    fn fisher_squares_elementwise() {
        let g = mat(2, 2, vec![0.0, 2.0, -3.0, 0.5]);
        let f = fisher_sensitivity(&g).unwrap();
        assert_eq!(f.data, vec![0.0, 4.0, 9.0, 0.25]);
    }

    #[test]
    fn fisher_of_zeros_is_zero() {
        let g = Matrix2D::zeros(4, 4);
        let f = fisher_sensitivity(&g).unwrap();
        assert!(f.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_matrix_has_no_outliers() {
        let w = mat(3, 3, vec![1.5; 9]);
        let (mask, cleaned) = extract_outliers(&w).unwrap();
        assert!(mask.iter().all(|&m| !m));
        assert_eq!(cleaned, w);
    }

    #[test]
    fn injected_spike_is_masked() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut data: Vec<f32> = (0..10_000)
            .map(|_| {
                // Approximate N(0,1) via CLT of uniforms.
                let s: f32 = (0..12).map(|_| rng.gen::<f32>()).sum::<f32>() - 6.0;
                s
            })
            .collect();
        data[1234] = 10.0;
        let w = mat(100, 100, data.clone());
        let (mask, cleaned) = extract_outliers(&w).unwrap();
        assert!(mask[1234]);
        assert_eq!(cleaned.data[1234], 0.0);
        // Direct mean/stddev oracle agreement on every position.
        let n = data.len() as f64;
        let mean = data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let sigma = (data
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        for (i, &v) in data.iter().enumerate() {
            assert_eq!(mask[i], (v as f64 - mean).abs() > 3.0 * sigma);
        }
    }

    #[test]
    fn symmetric_injection_masks_both() {
        let mut data = vec![0.0f32; 1000];
        for (i, v) in data.iter_mut().enumerate() {
            *v = if i % 2 == 0 { 0.1 } else { -0.1 };
        }
        data[10] = 10.0;
        data[20] = -10.0;
        let (mask, _) = extract_outliers(&mat(10, 100, data)).unwrap();
        assert!(mask[10] && mask[20]);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 2);
    }

    #[test]
    fn outlier_mask_invariant_under_shift() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let data: Vec<f32> = (0..400).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shifted: Vec<f32> = data.iter().map(|v| v + 5.0).collect();
        let (m1, _) = extract_outliers(&mat(20, 20, data)).unwrap();
        let (m2, _) = extract_outliers(&mat(20, 20, shifted)).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn salient_selects_spike_plus_next_largest() {
        let n = 10_000;
        let mut sens = vec![0.0f32; n];
        sens[777] = 100.0;
        for (i, s) in sens.iter_mut().enumerate().take(20) {
            *s = 10.0 - i as f32 * 0.1;
        }
        let w = Matrix2D::zeros(100, 100);
        let s = mat(100, 100, sens.clone());
        let mask = extract_salient(&w, &s, 0.0005, &vec![false; n]).unwrap();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 5);
        assert!(mask[777]);
        // Sort oracle: the other four are the largest remaining scores.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sens[b].partial_cmp(&sens[a]).unwrap());
        for &i in order.iter().take(5) {
            assert!(mask[i], "position {i} should be salient");
        }
    }

    #[test]
    fn all_equal_sensitivity_ties_break_row_major() {
        let w = Matrix2D::zeros(10, 10);
        let s = mat(10, 10, vec![1.0; 100]);
        let mask = extract_salient(&w, &s, 0.03, &vec![false; 100]).unwrap();
        for i in 0..100 {
            assert_eq!(mask[i], i < 3);
        }
    }

    #[test]
    fn tile_of_ones_scores_one() {
        let g = mat(2, 2, vec![1.0; 4]);
        let grid = tile_sensitivities(&g, 2, 2).unwrap();
        assert_eq!(grid.sensitivities, vec![1.0]);
    }

    #[test]
    fn tile_scores_match_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f32> = (0..256 * 256).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g = mat(256, 256, data);
        let grid = tile_sensitivities(&g, 128, 128).unwrap();
        assert_eq!(grid.sensitivities.len(), 4);
        for tr in 0..2 {
            for tc in 0..2 {
                let mut sum = 0.0f64;
                for r in 0..128 {
                    for c in 0..128 {
                        let v = g.at(tr * 128 + r, tc * 128 + c) as f64;
                        sum += v * v;
                    }
                }
                let got = grid.sensitivities[tr * 2 + tc];
                assert!((got - sum / (128.0 * 128.0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn padded_boundary_tiles_keep_nominal_divisor() {
        let g = mat(3, 3, vec![1.0; 9]);
        let grid = tile_sensitivities(&g, 2, 2).unwrap();
        assert_eq!((grid.grid_rows, grid.grid_cols), (2, 2));
        assert_eq!(grid.sensitivities, vec![1.0, 0.5, 0.5, 0.25]);
    }

    #[test]
    fn adaptive_k_cumulative_oracle() {
        let (k, classes) = compute_adaptive_k(&[0.9, 0.05, 0.05], 0.95).unwrap();
        assert_eq!(classes, vec![TileClass::High, TileClass::High, TileClass::Low]);
        assert!((k - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_tile_is_high() {
        let (k, classes) = compute_adaptive_k(&[0.1], 0.5).unwrap();
        assert_eq!(classes, vec![TileClass::High]);
        assert_eq!(k, 0.0);
    }

    #[test]
    fn zero_sensitivity_defaults_to_all_low() {
        let (k, classes) = compute_adaptive_k(&[0.0; 5], 0.95).unwrap();
        assert!(classes.iter().all(|&c| c == TileClass::Low));
        assert_eq!(k, 1.0);
    }

    #[test]
    fn retention_prefix_is_minimal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let sens: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = sens.iter().sum();
            let retention = 0.9;
            let (_, classes) = compute_adaptive_k(&sens, retention).unwrap();
            let high: Vec<f64> = sens
                .iter()
                .zip(&classes)
                .filter(|(_, &c)| c == TileClass::High)
                .map(|(&s, _)| s)
                .collect();
            let high_sum: f64 = high.iter().sum();
            assert!(high_sum >= retention * total - 1e-9);
            let min_high = high.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(high_sum - min_high < retention * total + 1e-9);
        }
    }

    #[test]
    fn gradient_scaling_leaves_classes_unchanged() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let sens: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let scaled: Vec<f64> = sens.iter().map(|s| s * 9.0).collect();
        let (k1, c1) = compute_adaptive_k(&sens, 0.95).unwrap();
        let (k2, c2) = compute_adaptive_k(&scaled, 0.95).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(k1, k2);
    }
}
