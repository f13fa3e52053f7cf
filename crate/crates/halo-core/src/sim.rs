//! Deterministic analytical simulator of a weight-stationary systolic array
//! plus a SpMV side engine for the sparse overlay.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dvfs::{DvfsLevel, DvfsSchedule, DvfsTable, ScheduleGroup};
use crate::error::{HaloError, Result};
use crate::profile::WeightProfile;
use crate::quantize::{FrequencyClass, QuantizedModel, QuantizedTile, SparseOverlay};
use crate::sensitivity::Matrix2D;

/// Systolic-array geometry and energy-model coefficients. Energy units are
/// abstract; only relative magnitudes and orderings are meaningful.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub array_rows: usize,
    pub array_cols: usize,
    /// Width of the streamed activation batch.
    pub batch_cols: usize,
    /// Leakage burn rate, units per second of wall time.
    pub static_power_units: f64,
    pub buffer_energy_per_byte: f64,
    pub dram_energy_per_byte: f64,
    /// Reference voltage for (V/V_ref)^2 dynamic-energy scaling; callers
    /// normally set it to the lowest voltage in the DVFS table.
    pub v_ref_v: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            array_rows: 128,
            array_cols: 128,
            batch_cols: 128,
            static_power_units: 1e9,
            buffer_energy_per_byte: 0.05,
            dram_energy_per_byte: 0.5,
            v_ref_v: 1.0,
        }
    }
}

impl ArrayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.array_rows == 0 || self.array_cols == 0 || self.batch_cols == 0 {
            return Err(HaloError::InvalidArgument(
                "array dimensions and batch_cols must be positive".into(),
            ));
        }
        let finite = [
            self.static_power_units,
            self.buffer_energy_per_byte,
            self.dram_energy_per_byte,
            self.v_ref_v,
        ];
        if finite.iter().any(|v| !v.is_finite() || *v < 0.0) || self.v_ref_v == 0.0 {
            return Err(HaloError::InvalidArgument(
                "array energy coefficients must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    fn voltage_scale(&self, voltage_v: f64) -> f64 {
        let r = voltage_v / self.v_ref_v;
        r * r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub static_units: f64,
    pub core_dynamic: f64,
    pub buffer: f64,
    pub memory: f64,
    pub total: f64,
}

/// Per-group slice of the report, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub class_id: usize,
    pub freq_ghz: f64,
    pub voltage_v: f64,
    pub tile_count: usize,
    pub cycles: u64,
    pub time_s: f64,
    pub core_dynamic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Wall time including DVFS transition overhead.
    pub exec_time_s: f64,
    pub energy: EnergyBreakdown,
    pub transitions: usize,
    pub per_group: Vec<GroupReport>,
    /// MAC operations on real (non-padding) weights.
    pub mac_ops: u64,
    /// MAC operations executed on tile padding.
    pub pad_mac_ops: u64,
}

/// Weight-stationary pipeline cycles for one tile: load the weights row by
/// row, stream the batch through, and drain the last partial sums.
pub fn tile_cycles(tile_rows: usize, tile_cols: usize, array: &ArrayConfig) -> Result<u64> {
    if tile_rows > array.array_rows || tile_cols > array.array_cols {
        return Err(HaloError::TileTooLarge {
            tile_rows,
            tile_cols,
            array_rows: array.array_rows,
            array_cols: array.array_cols,
        });
    }
    if tile_rows == 0 || tile_cols == 0 {
        return Err(HaloError::InvalidArgument("empty tile".into()));
    }
    Ok((tile_rows + array.batch_cols + tile_rows + tile_cols - 2) as u64)
}

struct GroupCost {
    report: GroupReport,
    buffer: f64,
    mac_ops: u64,
    pad_mac_ops: u64,
}

fn simulate_group(
    model: &QuantizedModel,
    group: &ScheduleGroup,
    array: &ArrayConfig,
    profile: &WeightProfile,
) -> Result<GroupCost> {
    let class = model.class(group.class_id);
    let critical_ps = class.critical_path_ps(profile) as f64;
    let period_ps = group.level.period_ps();
    if period_ps < critical_ps {
        return Err(HaloError::TimingViolation {
            freq_ghz: group.level.freq_ghz,
            delay_ps: critical_ps as u32,
        });
    }
    let per_tile_cycles = tile_cycles(model.tile_rows, model.tile_cols, array)?;
    let vscale = array.voltage_scale(group.level.voltage_v);
    let tile_area = model.tile_rows * model.tile_cols;
    let tile_bytes = tile_area; // int8 weights
    let out_bytes = model.tile_rows * array.batch_cols * 4; // int32 partial sums

    let mut core_dynamic = 0.0f64;
    let mut buffer = 0.0f64;
    let mut mac_ops = 0u64;
    let mut pad_mac_ops = 0u64;
    for &tile_id in &group.tile_ids {
        let tile: &QuantizedTile = &model.tiles[tile_id];
        let mut per_weight = 0.0f64;
        for i in 0..tile.indices.len() {
            per_weight += profile.mean_switch_energy(model.tile_value(tile, i));
        }
        core_dynamic += per_weight * array.batch_cols as f64 * vscale;

        let tr = tile_id / model.grid_cols;
        let tc = tile_id % model.grid_cols;
        let valid_r = model.tile_rows.min(model.rows - tr * model.tile_rows);
        let valid_c = model.tile_cols.min(model.cols - tc * model.tile_cols);
        let valid = (valid_r * valid_c) as u64;
        mac_ops += valid * array.batch_cols as u64;
        pad_mac_ops += (tile_area as u64 - valid) * array.batch_cols as u64;

        let act_bytes = model.tile_cols * array.batch_cols;
        buffer += (tile_bytes + act_bytes + out_bytes) as f64 * array.buffer_energy_per_byte;
    }
    let cycles = per_tile_cycles * group.tile_ids.len() as u64;
    let time_s = cycles as f64 / (group.level.freq_ghz * 1e9);
    Ok(GroupCost {
        report: GroupReport {
            class_id: group.class_id,
            freq_ghz: group.level.freq_ghz,
            voltage_v: group.level.voltage_v,
            tile_count: group.tile_ids.len(),
            cycles,
            time_s,
            core_dynamic,
        },
        buffer,
        mac_ops,
        pad_mac_ops,
    })
}

/// Runs the model under the schedule. Per-group work may evaluate in
/// parallel; reduction order is fixed (group index, then tile index) so
/// reports are bit-identical across runs.
pub fn simulate(
    model: &QuantizedModel,
    schedule: &DvfsSchedule,
    array: &ArrayConfig,
    profile: &WeightProfile,
) -> Result<SimReport> {
    array.validate()?;
    let mut seen = vec![false; model.tiles.len()];
    for g in &schedule.groups {
        for &t in &g.tile_ids {
            if t >= seen.len() || seen[t] {
                return Err(HaloError::InvalidArgument(format!(
                    "schedule tile {t} missing from model or listed twice"
                )));
            }
            seen[t] = true;
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(HaloError::InvalidArgument(
            "schedule does not cover every tile".into(),
        ));
    }

    let costs: Vec<GroupCost> = schedule
        .groups
        .par_iter()
        .map(|g| simulate_group(model, g, array, profile))
        .collect::<Result<_>>()?;

    let mut per_group = Vec::with_capacity(costs.len());
    let mut compute_time = 0.0f64;
    let mut core_dynamic = 0.0f64;
    let mut buffer = 0.0f64;
    let mut mac_ops = 0u64;
    let mut pad_mac_ops = 0u64;
    for c in costs {
        compute_time += c.report.time_s;
        core_dynamic += c.report.core_dynamic;
        buffer += c.buffer;
        mac_ops += c.mac_ops;
        pad_mac_ops += c.pad_mac_ops;
        per_group.push(c.report);
    }

    // DRAM traffic: every tile's weights once (padding included), each
    // distinct activation slab once (tiles in a grid column share theirs),
    // and each output block once.
    let weight_bytes = model.tiles.len() * model.tile_rows * model.tile_cols;
    let act_bytes = model.grid_cols * model.tile_cols * array.batch_cols;
    let out_bytes = model.grid_rows * model.tile_rows * array.batch_cols * 4;
    let memory = (weight_bytes + act_bytes + out_bytes) as f64 * array.dram_energy_per_byte;

    let exec_time_s = compute_time + schedule.transition_overhead_s;
    let static_units = array.static_power_units * exec_time_s;
    let total = static_units + core_dynamic + buffer + memory;
    Ok(SimReport {
        exec_time_s,
        energy: EnergyBreakdown {
            static_units,
            core_dynamic,
            buffer,
            memory,
            total,
        },
        transitions: schedule.transition_count,
        per_group,
        mac_ops,
        pad_mac_ops,
    })
}

/// SpMV side-engine coefficients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpmvConfig {
    pub cycles_per_nnz: f64,
    /// Worst-case per-multiply energy; defaults from the profile maximum.
    pub energy_per_op: f64,
}

impl SpmvConfig {
    pub fn for_profile(profile: &WeightProfile) -> Self {
        SpmvConfig {
            cycles_per_nnz: 1.0,
            energy_per_op: profile.max_energy(),
        }
    }
}

/// CSR row reduction res[i] = Σ val·b[idx], dequantized by channel scales.
pub fn simulate_spmv(
    overlay: &SparseOverlay,
    b: &[f32],
    level: DvfsLevel,
    engine: &SpmvConfig,
) -> Result<(Vec<f32>, f64, f64)> {
    overlay.validate()?;
    if b.len() != overlay.cols {
        return Err(HaloError::ShapeMismatch(format!(
            "vector length {} vs overlay cols {}",
            b.len(),
            overlay.cols
        )));
    }
    let mut result = vec![0.0f32; overlay.rows];
    for r in 0..overlay.rows {
        let mut acc = 0.0f32;
        for k in overlay.row_ptr[r]..overlay.row_ptr[r + 1] {
            let c = overlay.col_idx[k];
            if c >= b.len() {
                return Err(HaloError::IndexOutOfBounds(format!(
                    "overlay column {c} out of range for vector of length {}",
                    b.len()
                )));
            }
            acc += overlay.values[k] as f32 * b[c];
        }
        result[r] = acc * overlay.channel_scales[r];
    }
    let nnz = overlay.nnz() as f64;
    let time_s = nnz * engine.cycles_per_nnz / (level.freq_ghz * 1e9);
    let energy = nnz * engine.energy_per_op;
    Ok((result, time_s, energy))
}

/// Simulates a uniform per-channel int8 baseline (e.g. W8A8): one frequency
/// group at the fastest level that covers the full int8 weight range.
pub fn run_baseline(
    weights: &Matrix2D,
    array: &ArrayConfig,
    table: &DvfsTable,
    profile: &WeightProfile,
) -> Result<SimReport> {
    array.validate()?;
    let worst_ps = profile.global_worst_delay_ps() as f64;
    let level = table
        .levels
        .iter()
        .rev()
        .find(|l| l.period_ps() >= worst_ps)
        .copied()
        .ok_or(HaloError::NoFeasibleLevel {
            critical_path_ps: worst_ps,
        })?;

    // Full-range codebook so any int8 value maps to itself.
    let codebook: Vec<i8> = (i8::MIN..=i8::MAX).collect();
    let class = FrequencyClass {
        id: 0,
        target_freq_ghz: 1000.0 / worst_ps,
        voltage_v: level.voltage_v,
        codebook,
    };

    let tile_rows = array.array_rows;
    let tile_cols = array.array_cols;
    let grid_rows = weights.rows.div_ceil(tile_rows);
    let grid_cols = weights.cols.div_ceil(tile_cols);
    let mut tiles = Vec::with_capacity(grid_rows * grid_cols);
    for tr in 0..grid_rows {
        for tc in 0..grid_cols {
            let mut indices = vec![0u8; tile_rows * tile_cols];
            for r in 0..tile_rows {
                for c in 0..tile_cols {
                    let (gr, gc) = (tr * tile_rows + r, tc * tile_cols + c);
                    let q = if gr < weights.rows && gc < weights.cols {
                        quantize_channel_int8(weights, gr, gc)
                    } else {
                        0
                    };
                    indices[r * tile_cols + c] = (q as i16 + 128) as u8;
                }
            }
            tiles.push(QuantizedTile {
                class_id: 0,
                indices,
                scale: 1.0,
            });
        }
    }
    let tile_count = tiles.len();
    let model = QuantizedModel {
        rows: weights.rows,
        cols: weights.cols,
        tile_rows,
        tile_cols,
        grid_rows,
        grid_cols,
        classes: vec![class],
        tiles,
        overlay: SparseOverlay {
            rows: weights.rows,
            cols: weights.cols,
            row_ptr: vec![0; weights.rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
            channel_scales: vec![1.0; weights.rows],
        },
        k_fraction: 0.0,
        profile_digest: profile.digest(),
    };
    let schedule = DvfsSchedule {
        groups: vec![ScheduleGroup {
            class_id: 0,
            level,
            tile_ids: (0..tile_count).collect(),
        }],
        transition_count: 1,
        transition_overhead_s: 0.0,
    };
    simulate(&model, &schedule, array, profile)
}

/// Per-channel symmetric int8 value for one weight: scale = row max|w|/127.
fn quantize_channel_int8(weights: &Matrix2D, r: usize, c: usize) -> i8 {
    let base = r * weights.cols;
    let row = &weights.data[base..base + weights.cols];
    let max_abs = row.iter().fold(0.0f32, |m, w| m.max(w.abs()));
    if max_abs == 0.0 {
        return 0;
    }
    let scale = max_abs / 127.0;
    (weights.at(r, c) / scale).round_ties_even().clamp(-127.0, 127.0) as i8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvfs::{build_schedule, DEFAULT_TRANSITION_TIME_S};
    use crate::profile::synthetic_tiered_profile;
    use crate::quantize::{quantize_model, quantize_overlay, QuantizeConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn array8() -> ArrayConfig {
        ArrayConfig {
            array_rows: 8,
            array_cols: 8,
            batch_cols: 8,
            ..ArrayConfig::default()
        }
    }

    fn small_model(seed: u64, rows: usize, cols: usize) -> QuantizedModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gauss = |rng: &mut ChaCha8Rng| (0..12).map(|_| rng.gen::<f32>()).sum::<f32>() - 6.0;
        let w: Vec<f32> = (0..rows * cols).map(|_| gauss(&mut rng) * 0.1).collect();
        let g: Vec<f32> = (0..rows * cols).map(|_| gauss(&mut rng) * 0.01).collect();
        let config = QuantizeConfig {
            tile_rows: 8,
            tile_cols: 8,
            ..QuantizeConfig::default()
        };
        quantize_model(
            &Matrix2D::new(rows, cols, w).unwrap(),
            &Matrix2D::new(rows, cols, g).unwrap(),
            &config,
            &synthetic_tiered_profile(),
        )
        .unwrap()
    }

    fn schedule_for(model: &QuantizedModel, transition_s: f64) -> DvfsSchedule {
        let table = DvfsTable::tpu();
        let profile = synthetic_tiered_profile();
        let levels: Vec<DvfsLevel> = model
            .classes
            .iter()
            .map(|c| {
                crate::dvfs::level_for_class(&table, c, &profile, crate::dvfs::LevelMode::MaxFreq)
                    .unwrap()
            })
            .collect();
        build_schedule(&model.tile_class_ids(), &levels, transition_s).unwrap()
    }

    #[test]
    fn cycle_formula_closed_forms() {
        let unit = ArrayConfig {
            array_rows: 1,
            array_cols: 1,
            batch_cols: 1,
            ..ArrayConfig::default()
        };
        assert_eq!(tile_cycles(1, 1, &unit).unwrap(), 2);
        assert_eq!(tile_cycles(128, 128, &ArrayConfig::default()).unwrap(), 510);
        let mut prev = 0;
        for batch in 1..10 {
            let a = ArrayConfig {
                batch_cols: batch,
                ..ArrayConfig::default()
            };
            let c = tile_cycles(16, 16, &a).unwrap();
            assert!(c > prev);
            prev = c;
        }
        assert!(matches!(
            tile_cycles(256, 8, &ArrayConfig::default()),
            Err(HaloError::TileTooLarge { .. })
        ));
    }

    #[test]
    fn energy_components_sum_exactly() {
        let model = small_model(40, 40, 24);
        let report = simulate(
            &model,
            &schedule_for(&model, DEFAULT_TRANSITION_TIME_S),
            &array8(),
            &synthetic_tiered_profile(),
        )
        .unwrap();
        let e = &report.energy;
        assert_eq!(e.total, e.static_units + e.core_dynamic + e.buffer + e.memory);
        assert!(e.static_units > 0.0 && e.core_dynamic > 0.0 && e.buffer > 0.0 && e.memory > 0.0);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let model = small_model(41, 64, 48);
        let schedule = schedule_for(&model, DEFAULT_TRANSITION_TIME_S);
        let profile = synthetic_tiered_profile();
        let a = simulate(&model, &schedule, &array8(), &profile).unwrap();
        let b = simulate(&model, &schedule, &array8(), &profile).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mac_op_count_is_conserved_and_padding_reported() {
        // 20x12 over 8x8 tiles: grid 3x2, padded area 24*16 - 240.
        let model = small_model(42, 20, 12);
        let report = simulate(
            &model,
            &schedule_for(&model, 0.0),
            &array8(),
            &synthetic_tiered_profile(),
        )
        .unwrap();
        assert_eq!(report.mac_ops, 20 * 12 * 8);
        assert_eq!(report.pad_mac_ops, (24 * 16 - 20 * 12) * 8);
    }

    #[test]
    fn compute_time_scales_inversely_with_frequency() {
        let model = small_model(43, 32, 32);
        let schedule = schedule_for(&model, 0.0);
        // Halving keeps every group feasible; time = cycles/f doubles exactly.
        let mut halved = schedule.clone();
        for g in &mut halved.groups {
            g.level.freq_ghz /= 2.0;
        }
        let profile = synthetic_tiered_profile();
        let base = simulate(&model, &schedule, &array8(), &profile).unwrap();
        let slow = simulate(&model, &halved, &array8(), &profile).unwrap();
        assert!((slow.exec_time_s - base.exec_time_s * 2.0).abs() <= 1e-15);
    }

    #[test]
    fn group_order_does_not_change_totals() {
        let model = small_model(44, 48, 48);
        let schedule = schedule_for(&model, DEFAULT_TRANSITION_TIME_S);
        assert!(schedule.groups.len() >= 2, "want a mixed-class model");
        let mut reversed = schedule.clone();
        reversed.groups.reverse();
        let profile = synthetic_tiered_profile();
        let a = simulate(&model, &schedule, &array8(), &profile).unwrap();
        let b = simulate(&model, &reversed, &array8(), &profile).unwrap();
        assert_eq!(a.exec_time_s, b.exec_time_s);
        assert_eq!(a.energy.total, b.energy.total);
        assert_eq!(a.mac_ops, b.mac_ops);
    }

    #[test]
    fn infeasible_group_frequency_is_rejected() {
        let model = small_model(45, 16, 16);
        let mut schedule = schedule_for(&model, 0.0);
        for g in &mut schedule.groups {
            g.level.freq_ghz = 100.0;
        }
        assert!(matches!(
            simulate(&model, &schedule, &array8(), &synthetic_tiered_profile()),
            Err(HaloError::TimingViolation { .. })
        ));
    }

    #[test]
    fn incomplete_schedule_is_rejected() {
        let model = small_model(46, 16, 16);
        let mut schedule = schedule_for(&model, 0.0);
        schedule.groups[0].tile_ids.pop();
        assert!(simulate(&model, &schedule, &array8(), &synthetic_tiered_profile()).is_err());
    }

    #[test]
    fn empty_overlay_spmv_is_zero() {
        let overlay = SparseOverlay {
            rows: 3,
            cols: 4,
            row_ptr: vec![0; 4],
            col_idx: vec![],
            values: vec![],
            channel_scales: vec![1.0; 3],
        };
        let level = DvfsLevel { voltage_v: 1.0, freq_ghz: 1.9 };
        let engine = SpmvConfig { cycles_per_nnz: 1.0, energy_per_op: 50.0 };
        let (res, time_s, energy) = simulate_spmv(&overlay, &[1.0; 4], level, &engine).unwrap();
        assert_eq!(res, vec![0.0; 3]);
        assert_eq!(time_s, 0.0);
        assert_eq!(energy, 0.0);
    }

    #[test]
    fn single_entry_spmv_closed_form() {
        let overlay = SparseOverlay {
            rows: 1,
            cols: 4,
            row_ptr: vec![0, 1],
            col_idx: vec![2],
            values: vec![127],
            channel_scales: vec![0.03],
        };
        let level = DvfsLevel { voltage_v: 1.0, freq_ghz: 2.0 };
        let engine = SpmvConfig { cycles_per_nnz: 1.0, energy_per_op: 50.0 };
        let (res, time_s, energy) =
            simulate_spmv(&overlay, &[0.0, 0.0, 1.0, 0.0], level, &engine).unwrap();
        assert_eq!(res[0], 127.0 * 0.03);
        assert!((time_s - 1.0 / 2.0e9).abs() < 1e-24);
        assert_eq!(energy, 50.0);
    }

    #[test]
    fn spmv_matches_dense_matvec_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let (rows, cols) = (12, 20);
        let data: Vec<f32> = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w = Matrix2D::new(rows, cols, data).unwrap();
        let mask: Vec<bool> = (0..rows * cols).map(|_| rng.gen_bool(0.2)).collect();
        let overlay = quantize_overlay(&w, &mask, &vec![false; rows * cols]).unwrap();
        let b: Vec<f32> = (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let level = DvfsLevel { voltage_v: 1.0, freq_ghz: 1.9 };
        let engine = SpmvConfig { cycles_per_nnz: 1.0, energy_per_op: 1.0 };
        let (res, _, _) = simulate_spmv(&overlay, &b, level, &engine).unwrap();
        for r in 0..rows {
            // Dense oracle over the dequantized overlay.
            let mut want = 0.0f32;
            for k in overlay.row_ptr[r]..overlay.row_ptr[r + 1] {
                want += overlay.values[k] as f32 * b[overlay.col_idx[k]];
            }
            want *= overlay.channel_scales[r];
            assert!((res[r] - want).abs() <= want.abs() * f32::EPSILON * 4.0 + f32::EPSILON);
        }
    }

    #[test]
    fn baseline_runs_at_lowest_level_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let data: Vec<f32> = (0..32 * 32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Matrix2D::new(32, 32, data).unwrap();
        let profile = synthetic_tiered_profile();
        let table = DvfsTable::tpu();
        let a = run_baseline(&w, &array8(), &table, &profile).unwrap();
        let b = run_baseline(&w, &array8(), &table, &profile).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_group.len(), 1);
        assert_eq!(a.per_group[0].freq_ghz, 1.9);
    }

    #[test]
    fn all_low_model_beats_baseline_within_frequency_ratio() {
        // Zero gradients force every tile LOW (3.7 GHz); baseline is 1.9 GHz.
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        let data: Vec<f32> = (0..64 * 64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Matrix2D::new(64, 64, data).unwrap();
        let g = Matrix2D::zeros(64, 64);
        let profile = synthetic_tiered_profile();
        let config = QuantizeConfig {
            tile_rows: 8,
            tile_cols: 8,
            ..QuantizeConfig::default()
        };
        let model = quantize_model(&w, &g, &config, &profile).unwrap();
        let halo = simulate(&model, &schedule_for(&model, 0.0), &array8(), &profile).unwrap();
        let base = run_baseline(&w, &array8(), &DvfsTable::tpu(), &profile).unwrap();
        let speedup = base.exec_time_s / halo.exec_time_s;
        assert!((speedup - 3.7 / 1.9).abs() < 1e-6, "speedup = {speedup}");
    }

    #[test]
    fn static_energy_tracks_exec_time() {
        let model = small_model(50, 32, 32);
        let profile = synthetic_tiered_profile();
        let slow = simulate(&model, &schedule_for(&model, 1e-3), &array8(), &profile).unwrap();
        let fast = simulate(&model, &schedule_for(&model, 0.0), &array8(), &profile).unwrap();
        assert!(fast.exec_time_s < slow.exec_time_s);
        assert!(fast.energy.static_units < slow.energy.static_units);
    }
}
