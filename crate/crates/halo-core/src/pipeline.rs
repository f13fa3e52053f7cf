//! End-to-end orchestration: tensor ingestion, goal-driven quantization,
//! DVFS scheduling, simulation, Pareto sweep with knee-point selection, and
//! report emission.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dvfs::{
    build_schedule, level_for_class, DvfsSchedule, DvfsTable, LevelMode,
    DEFAULT_TRANSITION_TIME_S,
};
use crate::error::{HaloError, Result};
use crate::profile::WeightProfile;
use crate::quantize::{
    effective_bitwidth, proxy_loss, quantize_model, QuantizeConfig, QuantizedModel,
};
use crate::sensitivity::Matrix2D;
use crate::sim::{run_baseline, simulate, ArrayConfig, SimReport};

pub const TENSORS_SCHEMA: &str = "halo-tensors-v1";
pub const REPORT_SCHEMA: &str = "halo-report-v1";

/// One layer's calibration tensors: weights W and gradients G.
#[derive(Debug, Clone)]
pub struct LayerTensors {
    pub name: String,
    pub weights: Matrix2D,
    pub gradients: Matrix2D,
}

/// On-disk container of per-layer f32 tensors (little-endian raw blobs plus
/// a JSON manifest).
#[derive(Debug, Clone)]
pub struct TensorContainer {
    pub layers: Vec<LayerTensors>,
}

#[derive(Serialize, Deserialize)]
struct ContainerManifest {
    schema: String,
    layers: Vec<LayerManifest>,
}

#[derive(Serialize, Deserialize)]
struct LayerManifest {
    name: String,
    rows: usize,
    cols: usize,
    weights: String,
    gradients: String,
}

fn write_f32_blob(path: &Path, data: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| HaloError::io(path, e))
}

fn read_f32_blob(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| HaloError::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(HaloError::MalformedContainer(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            expected * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

impl TensorContainer {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(HaloError::EmptyContainer);
        }
        for layer in &self.layers {
            if layer.weights.rows != layer.gradients.rows
                || layer.weights.cols != layer.gradients.cols
            {
                return Err(HaloError::ShapeMismatch(format!(
                    "layer {}: weights vs gradients",
                    layer.name
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| HaloError::io(dir, e))?;
        let mut manifest = ContainerManifest {
            schema: TENSORS_SCHEMA.into(),
            layers: Vec::new(),
        };
        for (i, layer) in self.layers.iter().enumerate() {
            let w_name = format!("w{i}.f32");
            let g_name = format!("g{i}.f32");
            write_f32_blob(&dir.join(&w_name), &layer.weights.data)?;
            write_f32_blob(&dir.join(&g_name), &layer.gradients.data)?;
            manifest.layers.push(LayerManifest {
                name: layer.name.clone(),
                rows: layer.weights.rows,
                cols: layer.weights.cols,
                weights: w_name,
                gradients: g_name,
            });
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| HaloError::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| HaloError::io(&path, e))?;
        let manifest: ContainerManifest =
            serde_json::from_str(&text).map_err(|e| HaloError::json(&path, e))?;
        if manifest.schema != TENSORS_SCHEMA {
            return Err(HaloError::MalformedContainer(format!(
                "unsupported schema {:?}",
                manifest.schema
            )));
        }
        let mut layers = Vec::with_capacity(manifest.layers.len());
        for lm in &manifest.layers {
            let n = lm.rows * lm.cols;
            let weights =
                Matrix2D::new(lm.rows, lm.cols, read_f32_blob(&dir.join(&lm.weights), n)?)?;
            let gradients =
                Matrix2D::new(lm.rows, lm.cols, read_f32_blob(&dir.join(&lm.gradients), n)?)?;
            layers.push(LayerTensors {
                name: lm.name.clone(),
                weights,
                gradients,
            });
        }
        let container = TensorContainer { layers };
        container.validate()?;
        Ok(container)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    PerfOpt,
    AccOpt,
    Bal,
}

/// User-facing design-goal configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoalConfig {
    pub goal: Goal,
    pub retention_perf: f64,
    pub retention_acc: f64,
    pub sweep_points: usize,
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub dvfs_target: String,
    pub level_mode: LevelMode,
    pub transition_time_s: f64,
}

impl Default for GoalConfig {
    fn default() -> Self {
        GoalConfig {
            goal: Goal::Bal,
            retention_perf: 0.80,
            retention_acc: 0.99,
            sweep_points: 9,
            tile_rows: 128,
            tile_cols: 128,
            dvfs_target: "tpu".into(),
            level_mode: LevelMode::MaxFreq,
            transition_time_s: DEFAULT_TRANSITION_TIME_S,
        }
    }
}

impl GoalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.retention_perf
            && self.retention_perf < self.retention_acc
            && self.retention_acc <= 1.0)
        {
            return Err(HaloError::InvalidArgument(
                "require 0 < retention_perf < retention_acc <= 1".into(),
            ));
        }
        if self.sweep_points < 2 {
            return Err(HaloError::InvalidArgument(
                "sweep_points must be at least 2".into(),
            ));
        }
        if self.tile_rows == 0 || self.tile_cols == 0 {
            return Err(HaloError::InvalidArgument("tile size must be positive".into()));
        }
        Ok(())
    }
}

/// One operating point of the retention sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub retention: f64,
    /// baseline_time / halo_time.
    pub normalized_perf: f64,
    /// Fisher-weighted squared quantization error (perplexity surrogate).
    pub proxy_loss: f64,
    pub b_eff: f64,
}

#[derive(Debug, Clone)]
pub struct LayerOutcome {
    pub name: String,
    pub model: QuantizedModel,
    pub schedule: DvfsSchedule,
    pub report: SimReport,
    pub baseline: SimReport,
    pub proxy_loss: f64,
    pub b_eff: f64,
}

/// Aggregate metrics over all layers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Metrics {
    pub retention: f64,
    pub exec_time_s: f64,
    pub baseline_time_s: f64,
    pub normalized_perf: f64,
    pub energy_total: f64,
    pub baseline_energy: f64,
    pub proxy_loss: f64,
    /// Parameter-weighted average effective bit-width.
    pub b_eff: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub goal: Goal,
    pub layers: Vec<LayerOutcome>,
    pub metrics: Metrics,
    /// Populated for BAL runs.
    pub pareto: Vec<ParetoPoint>,
    pub knee_warning: bool,
}

fn run_at_retention(
    container: &TensorContainer,
    goal: &GoalConfig,
    retention: f64,
    profile: &WeightProfile,
    array: &ArrayConfig,
    table: &DvfsTable,
) -> Result<(Vec<LayerOutcome>, Metrics)> {
    let qconfig = QuantizeConfig {
        tile_rows: goal.tile_rows,
        tile_cols: goal.tile_cols,
        retention,
        ..QuantizeConfig::default()
    };
    let mut layers = Vec::with_capacity(container.layers.len());
    let mut exec_time_s = 0.0;
    let mut baseline_time_s = 0.0;
    let mut energy_total = 0.0;
    let mut baseline_energy = 0.0;
    let mut loss = 0.0;
    let mut beff_weighted = 0.0;
    let mut params = 0usize;
    for layer in &container.layers {
        let model = quantize_model(&layer.weights, &layer.gradients, &qconfig, profile)?;
        let levels = model
            .classes
            .iter()
            .map(|c| level_for_class(table, c, profile, goal.level_mode))
            .collect::<Result<Vec<_>>>()?;
        let schedule = build_schedule(&model.tile_class_ids(), &levels, goal.transition_time_s)?;
        let report = simulate(&model, &schedule, array, profile)?;
        let baseline = run_baseline(&layer.weights, array, table, profile)?;
        let layer_loss = proxy_loss(&layer.weights, &layer.gradients, &model);
        let b_eff = effective_bitwidth(&model);
        let n = layer.weights.len();
        exec_time_s += report.exec_time_s;
        baseline_time_s += baseline.exec_time_s;
        energy_total += report.energy.total;
        baseline_energy += baseline.energy.total;
        loss += layer_loss;
        beff_weighted += b_eff * n as f64;
        params += n;
        layers.push(LayerOutcome {
            name: layer.name.clone(),
            model,
            schedule,
            report,
            baseline,
            proxy_loss: layer_loss,
            b_eff,
        });
    }
    let metrics = Metrics {
        retention,
        exec_time_s,
        baseline_time_s,
        normalized_perf: baseline_time_s / exec_time_s,
        energy_total,
        baseline_energy,
        proxy_loss: loss,
        b_eff: beff_weighted / params as f64,
    };
    Ok((layers, metrics))
}

/// Knee selection result: index into the input slice, plus a warning flag
/// when the input was too small for chord analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Knee {
    pub index: usize,
    pub warning: bool,
}

/// Picks the knee: on the Pareto-dominant subset with both axes normalized
/// to [0,1], the point furthest from the chord joining the extremes. Ties
/// break toward lower proxy_loss. Fewer than 3 points degrade to the
/// best-proxy_loss point with a warning.
pub fn knee_point(points: &[ParetoPoint]) -> Result<Knee> {
    if points.is_empty() {
        return Err(HaloError::InvalidArgument("no Pareto points".into()));
    }
    let best_loss = |ids: &[usize]| {
        ids.iter()
            .copied()
            .min_by(|&a, &b| {
                points[a]
                    .proxy_loss
                    .partial_cmp(&points[b].proxy_loss)
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .unwrap()
    };
    if points.len() < 3 {
        let all: Vec<usize> = (0..points.len()).collect();
        return Ok(Knee {
            index: best_loss(&all),
            warning: true,
        });
    }
    // Pareto-dominant subset: maximize perf, minimize loss.
    let dominated = |i: usize| {
        points.iter().enumerate().any(|(j, q)| {
            j != i
                && q.normalized_perf >= points[i].normalized_perf
                && q.proxy_loss <= points[i].proxy_loss
                && (q.normalized_perf > points[i].normalized_perf
                    || q.proxy_loss < points[i].proxy_loss)
        })
    };
    let mut front: Vec<usize> = (0..points.len()).filter(|&i| !dominated(i)).collect();
    front.sort_by(|&a, &b| {
        points[a]
            .normalized_perf
            .partial_cmp(&points[b].normalized_perf)
            .unwrap()
            .then(a.cmp(&b))
    });
    front.dedup_by(|&mut a, &mut b| {
        points[a].normalized_perf == points[b].normalized_perf
            && points[a].proxy_loss == points[b].proxy_loss
    });
    if front.len() < 3 {
        return Ok(Knee {
            index: best_loss(&front),
            warning: true,
        });
    }
    let (px, qx) = (
        points[front[0]].normalized_perf,
        points[*front.last().unwrap()].normalized_perf,
    );
    let (lo_loss, hi_loss) = front.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |m, &i| {
        (m.0.min(points[i].proxy_loss), m.1.max(points[i].proxy_loss))
    });
    let span_x = (qx - px).max(f64::MIN_POSITIVE);
    let span_y = (hi_loss - lo_loss).max(f64::MIN_POSITIVE);
    let norm = |i: usize| {
        (
            (points[i].normalized_perf - px) / span_x,
            (points[i].proxy_loss - lo_loss) / span_y,
        )
    };
    let (x0, y0) = norm(front[0]);
    let (x1, y1) = norm(*front.last().unwrap());
    let chord = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt().max(f64::MIN_POSITIVE);
    let mut best = front[0];
    let mut best_d = f64::NEG_INFINITY;
    for &i in &front {
        let (x, y) = norm(i);
        let d = ((x1 - x0) * (y0 - y) - (x0 - x) * (y1 - y0)).abs() / chord;
        let wins = d > best_d
            || (d == best_d
                && (points[i].proxy_loss, i) < (points[best].proxy_loss, best));
        if wins {
            best = i;
            best_d = d;
        }
    }
    Ok(Knee {
        index: best,
        warning: false,
    })
}

/// Runs the full HALO flow for the configured goal.
pub fn run_pipeline(
    container: &TensorContainer,
    goal: &GoalConfig,
    profile: &WeightProfile,
    array: &ArrayConfig,
) -> Result<PipelineOutput> {
    container.validate()?;
    goal.validate()?;
    let table = DvfsTable::builtin(&goal.dvfs_target)?;
    let mut array = *array;
    array.v_ref_v = table.lowest().voltage_v;
    if goal.tile_rows > array.array_rows || goal.tile_cols > array.array_cols {
        return Err(HaloError::TileTooLarge {
            tile_rows: goal.tile_rows,
            tile_cols: goal.tile_cols,
            array_rows: array.array_rows,
            array_cols: array.array_cols,
        });
    }

    let run = |retention: f64| run_at_retention(container, goal, retention, profile, &array, &table);
    match goal.goal {
        Goal::PerfOpt => {
            let (layers, metrics) = run(goal.retention_perf)?;
            Ok(PipelineOutput {
                goal: goal.goal,
                layers,
                metrics,
                pareto: Vec::new(),
                knee_warning: false,
            })
        }
        Goal::AccOpt => {
            let (layers, metrics) = run(goal.retention_acc)?;
            Ok(PipelineOutput {
                goal: goal.goal,
                layers,
                metrics,
                pareto: Vec::new(),
                knee_warning: false,
            })
        }
        Goal::Bal => {
            let step = (goal.retention_acc - goal.retention_perf)
                / (goal.sweep_points - 1) as f64;
            let mut pareto = Vec::with_capacity(goal.sweep_points);
            let mut runs = Vec::with_capacity(goal.sweep_points);
            for i in 0..goal.sweep_points {
                let retention = goal.retention_perf + step * i as f64;
                let (layers, metrics) = run(retention)?;
                pareto.push(ParetoPoint {
                    retention,
                    normalized_perf: metrics.normalized_perf,
                    proxy_loss: metrics.proxy_loss,
                    b_eff: metrics.b_eff,
                });
                runs.push((layers, metrics));
            }
            let knee = knee_point(&pareto)?;
            let (layers, metrics) = runs.swap_remove(knee.index);
            Ok(PipelineOutput {
                goal: goal.goal,
                layers,
                metrics,
                pareto,
                knee_warning: knee.warning,
            })
        }
    }
}

fn fmt_g(v: f64) -> String {
    format!("{v:.12e}")
}

/// Writes report.json plus layers.csv (per-layer metrics) and, for sweep
/// runs, pareto.csv. Output bytes are a pure function of the input.
pub fn emit_report(output: &PipelineOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| HaloError::io(dir, e))?;

    let layers: Vec<serde_json::Value> = output
        .layers
        .iter()
        .map(|l| {
            json!({
                "name": l.name,
                "rows": l.model.rows,
                "cols": l.model.cols,
                "k_fraction": l.model.k_fraction,
                "exec_time_s": l.report.exec_time_s,
                "baseline_time_s": l.baseline.exec_time_s,
                "energy": l.report.energy,
                "transitions": l.report.transitions,
                "groups": l.schedule.groups.iter().map(|g| json!({
                    "class_id": g.class_id,
                    "freq_ghz": g.level.freq_ghz,
                    "voltage_v": g.level.voltage_v,
                    "tiles": g.tile_ids.len(),
                })).collect::<Vec<_>>(),
                "overlay_nnz": l.model.overlay.nnz(),
                "proxy_loss": l.proxy_loss,
                "b_eff": l.b_eff,
            })
        })
        .collect();
    let doc = json!({
        "schema": REPORT_SCHEMA,
        "goal": output.goal,
        "metrics": output.metrics,
        "knee_warning": output.knee_warning,
        "pareto": output.pareto,
        "layers": layers,
    });
    let path = dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&doc).expect("report serializes"))
        .map_err(|e| HaloError::io(&path, e))?;

    let mut csv = String::from(
        "name,rows,cols,exec_time_s,baseline_time_s,energy_total,proxy_loss,b_eff,transitions\n",
    );
    for l in &output.layers {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            l.name,
            l.model.rows,
            l.model.cols,
            fmt_g(l.report.exec_time_s),
            fmt_g(l.baseline.exec_time_s),
            fmt_g(l.report.energy.total),
            fmt_g(l.proxy_loss),
            fmt_g(l.b_eff),
            l.report.transitions,
        ));
    }
    let path = dir.join("layers.csv");
    fs::write(&path, csv).map_err(|e| HaloError::io(&path, e))?;

    if !output.pareto.is_empty() {
        let mut csv = String::from("retention,normalized_perf,proxy_loss,b_eff\n");
        for p in &output.pareto {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt_g(p.retention),
                fmt_g(p.normalized_perf),
                fmt_g(p.proxy_loss),
                fmt_g(p.b_eff),
            ));
        }
        let path = dir.join("pareto.csv");
        fs::write(&path, csv).map_err(|e| HaloError::io(&path, e))?;
    }
    Ok(())
}

/// Generates a synthetic multi-layer container with heavy-tailed gradients
/// so tile sensitivities (and hence LOW/HIGH splits) vary meaningfully.
pub fn synthetic_container(
    seed: u64,
    layer_count: usize,
    rows: usize,
    cols: usize,
) -> TensorContainer {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = move |rng: &mut ChaCha8Rng| {
        (0..12).map(|_| rng.gen::<f32>()).sum::<f32>() - 6.0
    };
    let layers = (0..layer_count)
        .map(|i| {
            let weights: Vec<f32> = (0..rows * cols).map(|_| gauss(&mut rng) * 0.1).collect();
            // Pareto-like tail: most gradients tiny, a few dominant.
            let gradients: Vec<f32> = (0..rows * cols)
                .map(|_| {
                    let u: f32 = rng.gen_range(1e-3..1.0f32);
                    let mag = 0.01 / u.powf(0.7);
                    if rng.gen_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            LayerTensors {
                name: format!("layer{i}"),
                weights: Matrix2D::new(rows, cols, weights).unwrap(),
                gradients: Matrix2D::new(rows, cols, gradients).unwrap(),
            }
        })
        .collect();
    TensorContainer { layers }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::synthetic_tiered_profile;

    fn small_array() -> ArrayConfig {
        ArrayConfig {
            array_rows: 16,
            array_cols: 16,
            batch_cols: 16,
            ..ArrayConfig::default()
        }
    }

    fn small_goal(goal: Goal) -> GoalConfig {
        GoalConfig {
            goal,
            tile_rows: 16,
            tile_cols: 16,
            // At desk scale the per-class transition overhead would swamp
            // compute time and mask the frequency-driven ordering.
            transition_time_s: 0.0,
            ..GoalConfig::default()
        }
    }

    #[test]
    fn container_round_trips() {
        let container = synthetic_container(60, 2, 20, 28);
        let dir = tempfile::tempdir().unwrap();
        container.save(dir.path()).unwrap();
        let back = TensorContainer::load(dir.path()).unwrap();
        assert_eq!(back.layers.len(), 2);
        for (a, b) in container.layers.iter().zip(&back.layers) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.gradients, b.gradients);
        }
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let container = synthetic_container(61, 1, 8, 8);
        let dir = tempfile::tempdir().unwrap();
        container.save(dir.path()).unwrap();
        let blob = dir.path().join("w0.f32");
        let bytes = std::fs::read(&blob).unwrap();
        std::fs::write(&blob, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            TensorContainer::load(dir.path()),
            Err(HaloError::MalformedContainer(_))
        ));
    }

    #[test]
    fn goal_ordering_on_loss_and_time() {
        let container = synthetic_container(62, 2, 64, 64);
        let profile = synthetic_tiered_profile();
        let array = small_array();
        let acc = run_pipeline(&container, &small_goal(Goal::AccOpt), &profile, &array).unwrap();
        let bal = run_pipeline(&container, &small_goal(Goal::Bal), &profile, &array).unwrap();
        let perf = run_pipeline(&container, &small_goal(Goal::PerfOpt), &profile, &array).unwrap();
        assert!(acc.metrics.proxy_loss <= bal.metrics.proxy_loss + 1e-12);
        assert!(bal.metrics.proxy_loss <= perf.metrics.proxy_loss + 1e-12);
        assert!(acc.metrics.exec_time_s >= bal.metrics.exec_time_s - 1e-15);
        assert!(bal.metrics.exec_time_s >= perf.metrics.exec_time_s - 1e-15);
        assert_eq!(bal.pareto.len(), 9);
    }

    #[test]
    fn zero_gradient_container_collapses_goals() {
        let mut container = synthetic_container(63, 1, 32, 32);
        for v in container.layers[0].gradients.data.iter_mut() {
            *v = 0.0;
        }
        let profile = synthetic_tiered_profile();
        let array = small_array();
        let acc = run_pipeline(&container, &small_goal(Goal::AccOpt), &profile, &array).unwrap();
        let perf = run_pipeline(&container, &small_goal(Goal::PerfOpt), &profile, &array).unwrap();
        assert_eq!(acc.layers[0].model.tiles, perf.layers[0].model.tiles);
        assert!(acc.layers[0]
            .model
            .tiles
            .iter()
            .all(|t| t.class_id == crate::quantize::LOW_CLASS_ID));
    }

    fn point(perf: f64, loss: f64) -> ParetoPoint {
        ParetoPoint {
            retention: 0.9,
            normalized_perf: perf,
            proxy_loss: loss,
            b_eff: 3.5,
        }
    }

    #[test]
    fn collinear_points_fall_back_to_lowest_loss_extreme() {
        let points = vec![point(1.0, 1.0), point(1.2, 2.0), point(1.4, 3.0)];
        let knee = knee_point(&points).unwrap();
        assert_eq!(knee.index, 0);
        assert!(!knee.warning);
    }

    #[test]
    fn elbow_point_wins_by_hand_oracle() {
        // Middle point gains most perf per unit loss; chord-distance oracle
        // computed by hand picks it.
        let points = vec![point(1.0, 5.0), point(1.4, 5.1), point(1.45, 6.3)];
        let knee = knee_point(&points).unwrap();
        assert_eq!(knee.index, 1);
    }

    #[test]
    fn quarter_circle_knee_is_near_45_degrees() {
        // Frontier perf = sin t, loss = 1 - cos t: curvature is uniform, so
        // the max-distance point sits at the 45-degree bisector.
        let points: Vec<ParetoPoint> = (0..=10)
            .map(|i| {
                let t = std::f64::consts::FRAC_PI_2 * i as f64 / 10.0;
                point(t.sin(), 1.0 - t.cos())
            })
            .collect();
        let knee = knee_point(&points).unwrap();
        assert_eq!(knee.index, 5);
    }

    #[test]
    fn two_points_warn_and_pick_lowest_loss() {
        let points = vec![point(1.3, 2.0), point(1.1, 1.0)];
        let knee = knee_point(&points).unwrap();
        assert_eq!(knee.index, 1);
        assert!(knee.warning);
    }

    #[test]
    fn knee_is_pareto_dominant() {
        let points = vec![
            point(1.0, 1.0),
            point(1.2, 0.9), // dominates the first
            point(1.3, 2.0),
            point(1.5, 4.0),
        ];
        let knee = knee_point(&points).unwrap();
        let k = &points[knee.index];
        for p in &points {
            assert!(
                !(p.normalized_perf >= k.normalized_perf
                    && p.proxy_loss <= k.proxy_loss
                    && (p.normalized_perf > k.normalized_perf || p.proxy_loss < k.proxy_loss)),
                "knee dominated by ({}, {})",
                p.normalized_perf,
                p.proxy_loss
            );
        }
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let container = synthetic_container(64, 1, 32, 32);
        let profile = synthetic_tiered_profile();
        let array = small_array();
        let mut blobs = Vec::new();
        for _ in 0..2 {
            let out = run_pipeline(&container, &small_goal(Goal::Bal), &profile, &array).unwrap();
            let dir = tempfile::tempdir().unwrap();
            emit_report(&out, dir.path()).unwrap();
            let json = std::fs::read(dir.path().join("report.json")).unwrap();
            let layers = std::fs::read(dir.path().join("layers.csv")).unwrap();
            let pareto = std::fs::read(dir.path().join("pareto.csv")).unwrap();
            blobs.push((json, layers, pareto));
        }
        assert_eq!(blobs[0], blobs[1]);
        let pareto_rows = blobs[0].2.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count();
        assert_eq!(pareto_rows, 1 + 9);
    }

    #[test]
    fn empty_container_is_rejected() {
        let container = TensorContainer { layers: Vec::new() };
        let profile = synthetic_tiered_profile();
        assert!(matches!(
            run_pipeline(&container, &small_goal(Goal::Bal), &profile, &small_array()),
            Err(HaloError::EmptyContainer)
        ));
    }
}
