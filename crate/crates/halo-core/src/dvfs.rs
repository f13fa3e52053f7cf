//! Voltage-frequency level selection under critical-path constraints and
//! transition-minimizing schedule construction over tile frequency classes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};
use crate::profile::WeightProfile;
use crate::quantize::FrequencyClass;

/// One discrete DVFS operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvfsLevel {
    #[serde(rename = "v")]
    pub voltage_v: f64,
    #[serde(rename = "f_ghz")]
    pub freq_ghz: f64,
}

impl DvfsLevel {
    /// Clock period in picoseconds.
    pub fn period_ps(&self) -> f64 {
        1000.0 / self.freq_ghz
    }
}

/// An ordered table of operating points for one accelerator target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvfsTable {
    pub target: String,
    pub levels: Vec<DvfsLevel>,
}

impl DvfsTable {
    /// Assumed systolic-array (TPU-class) levels.
    pub fn tpu() -> Self {
        DvfsTable {
            target: "tpu".into(),
            levels: vec![
                DvfsLevel { voltage_v: 1.0, freq_ghz: 1.9 },
                DvfsLevel { voltage_v: 1.1, freq_ghz: 2.4 },
                DvfsLevel { voltage_v: 1.2, freq_ghz: 3.7 },
            ],
        }
    }

    /// Assumed GPU levels.
    pub fn gpu() -> Self {
        DvfsTable {
            target: "gpu".into(),
            levels: vec![
                DvfsLevel { voltage_v: 0.9, freq_ghz: 1.5 },
                DvfsLevel { voltage_v: 1.0, freq_ghz: 2.0 },
                DvfsLevel { voltage_v: 1.1, freq_ghz: 2.8 },
            ],
        }
    }

    pub fn builtin(target: &str) -> Result<Self> {
        match target {
            "tpu" => Ok(Self::tpu()),
            "gpu" => Ok(Self::gpu()),
            other => Err(HaloError::InvalidArgument(format!(
                "unknown DVFS target {other:?} (expected \"tpu\" or \"gpu\")"
            ))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HaloError::io(path, e))?;
        let table: DvfsTable =
            serde_json::from_str(&text).map_err(|e| HaloError::json(path, e))?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(HaloError::InvalidArgument("empty DVFS table".into()));
        }
        for w in self.levels.windows(2) {
            if w[0].freq_ghz >= w[1].freq_ghz || w[0].voltage_v > w[1].voltage_v {
                return Err(HaloError::InvalidArgument(
                    "DVFS levels must have ascending frequency and nondecreasing voltage".into(),
                ));
            }
        }
        for l in &self.levels {
            if !(l.voltage_v > 0.0 && l.freq_ghz > 0.0) {
                return Err(HaloError::InvalidArgument(
                    "DVFS voltage and frequency must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Lowest (most permissive) operating point.
    pub fn lowest(&self) -> DvfsLevel {
        self.levels[0]
    }
}

/// Default transition latency: 1 microsecond, the conservative end of typical
/// on-chip DVFS switching costs.
pub const DEFAULT_TRANSITION_TIME_S: f64 = 1e-6;

/// Level-selection policy for a frequency class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelMode {
    MinEnergy,
    MaxFreq,
}

/// One run of same-level tiles in a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleGroup {
    pub class_id: usize,
    pub level: DvfsLevel,
    pub tile_ids: Vec<usize>,
}

/// Execution order over tile groups; one DVFS transition per group (the
/// switch into the first group counts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvfsSchedule {
    pub groups: Vec<ScheduleGroup>,
    pub transition_count: usize,
    pub transition_overhead_s: f64,
}

impl DvfsSchedule {
    pub fn tile_count(&self) -> usize {
        self.groups.iter().map(|g| g.tile_ids.len()).sum()
    }
}

/// Dynamic CV²-style energy for fixed work: lower voltage always wins among
/// feasible levels.
pub fn default_energy_model(level: &DvfsLevel) -> f64 {
    level.voltage_v * level.voltage_v
}

/// Picks the feasible level minimizing `energy_model`; ties break toward
/// lower voltage, then lower frequency.
pub fn select_level<F>(table: &DvfsTable, critical_path_ps: f64, energy_model: F) -> Result<DvfsLevel>
where
    F: Fn(&DvfsLevel) -> f64,
{
    let mut best: Option<DvfsLevel> = None;
    for &level in &table.levels {
        if level.period_ps() < critical_path_ps {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let (e, eb) = (energy_model(&level), energy_model(&b));
                e < eb
                    || (e == eb
                        && (level.voltage_v, level.freq_ghz) < (b.voltage_v, b.freq_ghz))
            }
        };
        if better {
            best = Some(level);
        }
    }
    best.ok_or(HaloError::NoFeasibleLevel { critical_path_ps })
}

/// Maps a frequency class to an operating point. `MinEnergy` minimizes the
/// default energy model; `MaxFreq` overclocks to the fastest feasible level.
pub fn level_for_class(
    table: &DvfsTable,
    class: &FrequencyClass,
    profile: &WeightProfile,
    mode: LevelMode,
) -> Result<DvfsLevel> {
    let critical_path_ps = class.critical_path_ps(profile) as f64;
    match mode {
        LevelMode::MinEnergy => select_level(table, critical_path_ps, default_energy_model),
        LevelMode::MaxFreq => table
            .levels
            .iter()
            .rev()
            .find(|l| l.period_ps() >= critical_path_ps)
            .copied()
            .ok_or(HaloError::NoFeasibleLevel { critical_path_ps }),
    }
}

/// Groups tiles by class so each distinct level is entered exactly once.
/// Groups run fastest-first; tile order within a group follows tile index.
pub fn build_schedule(
    tile_class_ids: &[usize],
    class_levels: &[DvfsLevel],
    transition_time_s: f64,
) -> Result<DvfsSchedule> {
    if !(transition_time_s >= 0.0 && transition_time_s.is_finite()) {
        return Err(HaloError::InvalidArgument(
            "transition_time_s must be finite and nonnegative".into(),
        ));
    }
    let mut groups: Vec<ScheduleGroup> = Vec::new();
    for (tile_id, &class_id) in tile_class_ids.iter().enumerate() {
        let level = *class_levels
            .get(class_id)
            .ok_or(HaloError::UnmappedClass(class_id))?;
        match groups.iter_mut().find(|g| g.class_id == class_id) {
            Some(g) => g.tile_ids.push(tile_id),
            None => groups.push(ScheduleGroup {
                class_id,
                level,
                tile_ids: vec![tile_id],
            }),
        }
    }
    groups.sort_by(|a, b| {
        b.level
            .freq_ghz
            .partial_cmp(&a.level.freq_ghz)
            .unwrap()
            .then(a.class_id.cmp(&b.class_id))
    });
    let transition_count = groups.len();
    Ok(DvfsSchedule {
        groups,
        transition_count,
        transition_overhead_s: transition_count as f64 * transition_time_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::synthetic_tiered_profile;
    use crate::quantize::build_codebook;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_range_critical_path_forces_lowest_level() {
        let level = select_level(&DvfsTable::tpu(), 522.0, default_energy_model).unwrap();
        assert_eq!(level, DvfsLevel { voltage_v: 1.0, freq_ghz: 1.9 });
    }

    #[test]
    fn min_energy_prefers_lowest_voltage_when_all_feasible() {
        // All three TPU periods (526/417/270 ps) cover 265 ps; V²f ranks the
        // 1.0 V point first.
        let level = select_level(&DvfsTable::tpu(), 265.0, |l| {
            l.voltage_v * l.voltage_v * l.freq_ghz
        })
        .unwrap();
        assert_eq!(level, DvfsLevel { voltage_v: 1.0, freq_ghz: 1.9 });
    }

    #[test]
    fn infeasible_critical_path_errors() {
        assert!(matches!(
            select_level(&DvfsTable::tpu(), 600.0, default_energy_model),
            Err(HaloError::NoFeasibleLevel { .. })
        ));
    }

    #[test]
    fn select_level_matches_brute_force_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for table in [DvfsTable::tpu(), DvfsTable::gpu()] {
            for _ in 0..500 {
                let cp = rng.gen_range(1.0..700.0);
                let scan = table
                    .levels
                    .iter()
                    .filter(|l| l.period_ps() >= cp)
                    .min_by(|a, b| {
                        default_energy_model(a)
                            .partial_cmp(&default_energy_model(b))
                            .unwrap()
                            .then(a.voltage_v.partial_cmp(&b.voltage_v).unwrap())
                            .then(a.freq_ghz.partial_cmp(&b.freq_ghz).unwrap())
                    })
                    .copied();
                match (select_level(&table, cp, default_energy_model), scan) {
                    (Ok(got), Some(want)) => assert_eq!(got, want, "cp = {cp}"),
                    (Err(HaloError::NoFeasibleLevel { .. }), None) => {}
                    (got, want) => panic!("cp = {cp}: {got:?} vs {want:?}"),
                }
            }
        }
    }

    fn class(id: usize, target: f64, size: usize) -> FrequencyClass {
        let profile = synthetic_tiered_profile();
        FrequencyClass {
            id,
            target_freq_ghz: target,
            voltage_v: 1.0,
            codebook: build_codebook(&profile, target, size).unwrap(),
        }
    }

    #[test]
    fn max_freq_overclocks_each_class() {
        let profile = synthetic_tiered_profile();
        let table = DvfsTable::tpu();
        let low = level_for_class(&table, &class(0, 3.7, 9), &profile, LevelMode::MaxFreq).unwrap();
        assert_eq!(low.freq_ghz, 3.7);
        let high = level_for_class(&table, &class(1, 2.4, 16), &profile, LevelMode::MaxFreq).unwrap();
        assert_eq!(high.freq_ghz, 2.4);
    }

    #[test]
    fn full_int8_codebook_runs_at_lowest_level() {
        let profile = synthetic_tiered_profile();
        let full = FrequencyClass {
            id: 0,
            target_freq_ghz: 1.9,
            voltage_v: 1.0,
            codebook: (i8::MIN..=i8::MAX).collect(),
        };
        let table = DvfsTable::tpu();
        for mode in [LevelMode::MinEnergy, LevelMode::MaxFreq] {
            let level = level_for_class(&table, &full, &profile, mode).unwrap();
            assert_eq!(level, table.lowest());
        }
    }

    #[test]
    fn uniform_labels_form_one_group() {
        let levels = [DvfsLevel { voltage_v: 1.2, freq_ghz: 3.7 }];
        let schedule = build_schedule(&[0; 7], &levels, 1e-6).unwrap();
        assert_eq!(schedule.groups.len(), 1);
        assert_eq!(schedule.transition_count, 1);
        assert_eq!(schedule.groups[0].tile_ids, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn transition_count_tracks_distinct_classes_not_tiles() {
        let levels = [
            DvfsLevel { voltage_v: 1.2, freq_ghz: 3.7 },
            DvfsLevel { voltage_v: 1.1, freq_ghz: 2.4 },
        ];
        let labels: Vec<usize> = (0..10_000).map(|i| i % 2).collect();
        let schedule = build_schedule(&labels, &levels, 1e-6).unwrap();
        assert_eq!(schedule.transition_count, 2);
        assert!((schedule.transition_overhead_s - 2e-6).abs() < 1e-18);
        assert_eq!(schedule.tile_count(), 10_000);
        // Fastest group first; tile order within each preserves tile index.
        assert_eq!(schedule.groups[0].level.freq_ghz, 3.7);
        for g in &schedule.groups {
            assert!(g.tile_ids.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn unmapped_label_errors() {
        let levels = [DvfsLevel { voltage_v: 1.0, freq_ghz: 1.9 }];
        assert!(matches!(
            build_schedule(&[0, 3], &levels, 0.0),
            Err(HaloError::UnmappedClass(3))
        ));
    }

    #[test]
    fn builtin_tables_validate_and_match_assumed_levels() {
        for table in [DvfsTable::tpu(), DvfsTable::gpu()] {
            table.validate().unwrap();
        }
        assert_eq!(DvfsTable::gpu().levels[2], DvfsLevel { voltage_v: 1.1, freq_ghz: 2.8 });
        assert!(DvfsTable::builtin("npu").is_err());
    }

    #[test]
    fn table_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("levels.json");
        std::fs::write(
            &path,
            r#"{"target":"tpu","levels":[{"v":1.0,"f_ghz":1.9},{"v":1.1,"f_ghz":2.4}]}"#,
        )
        .unwrap();
        let table = DvfsTable::load(&path).unwrap();
        assert_eq!(table.levels.len(), 2);
        assert_eq!(table.levels[1].freq_ghz, 2.4);
    }
}
