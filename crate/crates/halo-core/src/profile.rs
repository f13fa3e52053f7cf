//! Per-weight-value timing and energy profile of the MAC unit.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};
use crate::netlist::GateNetlist;

/// Accumulator pattern pinned during characterization sweeps.
pub const ACC_PATTERN: i32 = 0x5555_5555u32 as i32;

pub const PROFILE_SCHEMA: &str = "halo-profile-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingSpec {
    /// All 256x256 ordered activation transitions per weight value.
    Exhaustive,
    /// `n` random (a_prev, a_next) pairs; the stream is derived from the seed
    /// and the weight value, so per-weight results are order-independent.
    Random { n: usize, seed: u64 },
}

impl SamplingSpec {
    fn validate(&self) -> Result<()> {
        if let SamplingSpec::Random { n: 0, .. } = self {
            return Err(HaloError::InvalidArgument(
                "RANDOM sampling requires n > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Parameters for [`WeightProfile::calibrated`]. Defaults pin the slowest
/// weight to a 1.9 GHz-limited 522 ps path and admit nine weight values at
/// the 3.7 GHz level (270 ps period).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub target_max_ps: u32,
    pub fast_class_size: usize,
    pub fast_period_ps: u32,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec {
            target_max_ps: 522,
            fast_class_size: 9,
            fast_period_ps: 270,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    /// Signed 8-bit weight value.
    pub value: i8,
    pub delay_ps: u32,
    pub energy: f64,
}

/// Timing/energy record for every signed 8-bit weight value.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    /// Indexed by `(v as u8) as usize` wrapped to offset form: index = v + 128.
    entries: Vec<ProfileEntry>,
}

fn idx(v: i8) -> usize {
    (v as i16 + 128) as usize
}

impl WeightProfile {
    pub fn from_entries(mut entries: Vec<ProfileEntry>) -> Result<Self> {
        if entries.len() != 256 {
            return Err(HaloError::IncompleteProfile(entries.len()));
        }
        entries.sort_by_key(|e| e.value);
        for (i, e) in entries.iter().enumerate() {
            if e.value as i16 != i as i16 - 128 {
                return Err(HaloError::MalformedProfile(format!(
                    "duplicate or missing entry near value {}",
                    e.value
                )));
            }
            if e.delay_ps == 0 {
                return Err(HaloError::MalformedProfile(format!(
                    "delay must be positive (value {})",
                    e.value
                )));
            }
            if !(e.energy.is_finite() && e.energy >= 0.0) {
                return Err(HaloError::MalformedProfile(format!(
                    "energy must be finite and nonnegative (value {})",
                    e.value
                )));
            }
        }
        Ok(WeightProfile { entries })
    }

    pub fn entries(&self) -> &[ProfileEntry] {
        &self.entries
    }

    pub fn worst_delay_ps(&self, v: i8) -> u32 {
        self.entries[idx(v)].delay_ps
    }

    pub fn max_freq_ghz(&self, v: i8) -> f64 {
        1000.0 / self.worst_delay_ps(v) as f64
    }

    pub fn mean_switch_energy(&self, v: i8) -> f64 {
        self.entries[idx(v)].energy
    }

    pub fn global_worst_delay_ps(&self) -> u32 {
        self.entries.iter().map(|e| e.delay_ps).max().unwrap()
    }

    pub fn max_energy(&self) -> f64 {
        self.entries.iter().map(|e| e.energy).fold(0.0, f64::max)
    }

    /// Affine delay calibration: maps raw gate-model delays so that the
    /// `fast_class_size`-th fastest weight lands on `fast_period_ps` and the
    /// slowest weight on `target_max_ps`, preserving relative order. This
    /// aligns the abstract unit-delay model with a DVFS table whose top level
    /// should admit exactly `fast_class_size` weight values.
    pub fn calibrated(&self, spec: CalibrationSpec) -> WeightProfile {
        let mut delays: Vec<u32> = self.entries.iter().map(|e| e.delay_ps).collect();
        delays.sort_unstable();
        let d_fast = delays[spec.fast_class_size.saturating_sub(1).min(255)] as f64;
        let d_max = *delays.last().unwrap() as f64;
        let (a, b) = if d_max > d_fast {
            let a = (spec.target_max_ps as f64 - spec.fast_period_ps as f64) / (d_max - d_fast);
            (a, spec.target_max_ps as f64 - a * d_max)
        } else {
            (spec.target_max_ps as f64 / d_max, 0.0)
        };
        let entries = self
            .entries
            .iter()
            .map(|e| ProfileEntry {
                value: e.value,
                delay_ps: ((a * e.delay_ps as f64 + b).round() as i64).max(1) as u32,
                energy: e.energy,
            })
            .collect();
        WeightProfile { entries }
    }

    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.value.to_le_bytes());
            h.update(e.delay_ps.to_le_bytes());
            h.update(e.energy.to_le_bytes());
        }
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn transition_pairs(spec: SamplingSpec, v: i8) -> Vec<(i8, i8)> {
    match spec {
        SamplingSpec::Exhaustive => {
            let mut pairs = Vec::with_capacity(256 * 256);
            for a0 in i8::MIN..=i8::MAX {
                for a1 in i8::MIN..=i8::MAX {
                    pairs.push((a0, a1));
                }
            }
            pairs
        }
        SamplingSpec::Random { n, seed } => {
            let mixed = seed ^ (v as i64 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rng = ChaCha8Rng::seed_from_u64(mixed);
            (0..n).map(|_| (rng.gen::<i8>(), rng.gen::<i8>())).collect()
        }
    }
}

struct WeightStats {
    worst_delay_ps: u32,
    mean_toggles: f64,
}

/// One sweep computes both delay and energy; the per-weight simulations are
/// pure and independent.
fn sweep_weight(netlist: &GateNetlist, v: i8, spec: SamplingSpec) -> Result<WeightStats> {
    spec.validate()?;
    let pairs = transition_pairs(spec, v);
    let mut worst = 0u32;
    let mut toggles = 0.0f64;
    match spec {
        SamplingSpec::Exhaustive => {
            // Group by a_prev so the settled state is computed once per group.
            for a0 in i8::MIN..=i8::MAX {
                let settled = netlist.settle(v, a0, ACC_PATTERN);
                let mut values = settled.clone();
                for a1 in i8::MIN..=i8::MAX {
                    values.copy_from_slice(&settled);
                    let stats = netlist.transition(&mut values, a1);
                    worst = worst.max(stats.settle_time_ps);
                    toggles += stats.weighted_toggles;
                }
            }
        }
        SamplingSpec::Random { .. } => {
            for &(a0, a1) in &pairs {
                let mut values = netlist.settle(v, a0, ACC_PATTERN);
                let stats = netlist.transition(&mut values, a1);
                worst = worst.max(stats.settle_time_ps);
                toggles += stats.weighted_toggles;
            }
        }
    }
    Ok(WeightStats {
        // A weight that never perturbs the outputs still pays one wire delay.
        worst_delay_ps: worst.max(1),
        mean_toggles: toggles / pairs.len() as f64,
    })
}

/// Maximum primary-output settling time over sampled activation transitions
/// with the weight pinned to `v`.
pub fn worst_delay_for_weight(netlist: &GateNetlist, v: i8, spec: SamplingSpec) -> Result<u32> {
    Ok(sweep_weight(netlist, v, spec)?.worst_delay_ps)
}

/// Mean energy-weighted toggle count per MAC operation with the weight pinned
/// to `v`.
pub fn switching_energy_for_weight(netlist: &GateNetlist, v: i8, spec: SamplingSpec) -> Result<f64> {
    Ok(sweep_weight(netlist, v, spec)?.mean_toggles)
}

/// Runs the delay and energy sweeps for all 256 weight values in parallel.
pub fn characterize(netlist: &GateNetlist, spec: SamplingSpec) -> Result<WeightProfile> {
    spec.validate()?;
    let entries: Result<Vec<ProfileEntry>> = (-128i16..=127)
        .into_par_iter()
        .map(|v| {
            let v = v as i8;
            let stats = sweep_weight(netlist, v, spec)?;
            Ok(ProfileEntry {
                value: v,
                delay_ps: stats.worst_delay_ps,
                energy: stats.mean_toggles,
            })
        })
        .collect();
    WeightProfile::from_entries(entries?)
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    schema: String,
    entries: Vec<ProfileEntry>,
}

pub fn save_profile(profile: &WeightProfile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = ProfileFile {
        schema: PROFILE_SCHEMA.to_string(),
        entries: profile.entries.clone(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| HaloError::json(path, e))?;
    fs::write(path, text).map_err(|e| HaloError::io(path, e))
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<WeightProfile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HaloError::io(path, e))?;
    let file: ProfileFile =
        serde_json::from_str(&text).map_err(|e| HaloError::json(path, e))?;
    if file.schema != PROFILE_SCHEMA {
        return Err(HaloError::MalformedProfile(format!(
            "unknown schema {:?}",
            file.schema
        )));
    }
    WeightProfile::from_entries(file.entries)
}

/// Hand-built tiered profile for fast tests: the nine cheapest values reach
/// 3.7 GHz, the next seven reach 2.4 GHz, everything else needs the base
/// level. Delay ordering follows bit density and magnitude.
pub fn synthetic_tiered_profile() -> WeightProfile {
    let mut order: Vec<i8> = (-128i16..=127).map(|v| v as i8).collect();
    order.sort_by_key(|&v| {
        let mag = (v as i16).unsigned_abs();
        let bits = (v as u8).count_ones();
        (bits, mag, (v < 0) as u8)
    });
    let mut entries = Vec::with_capacity(256);
    for (rank, &v) in order.iter().enumerate() {
        let delay = if rank < 9 {
            200 + rank as u32 * 5
        } else if rank < 16 {
            320 + (rank as u32 - 9) * 10
        } else {
            440 + ((rank as u32 - 16) * 82) / 240
        };
        entries.push(ProfileEntry {
            value: v,
            delay_ps: delay,
            energy: delay as f64 / 10.0,
        });
    }
    WeightProfile::from_entries(entries).unwrap()
}
