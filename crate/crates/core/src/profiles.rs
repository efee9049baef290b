//! Hourly PV, load, self-consumption and export profiles for one
//! representative prosumer.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Category, Zone};

/// Slots in the fixed non-leap profile year.
pub const HOURS_PER_YEAR: usize = 8760;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile must have {HOURS_PER_YEAR} hourly values, found {0}")]
    Length(usize),
    #[error("leap-year profile with {0} hours is not accepted; supply a {HOURS_PER_YEAR}-hour year")]
    LeapYear(usize),
    #[error("value {value} at hour index {index} is negative or not finite")]
    InvalidValue { index: usize, value: f64 },
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("capacity must be a finite non-negative number, got {0}")]
    InvalidCapacity(f64),
    #[error("derate factor must lie in (0, 1], got {0}")]
    InvalidDerate(f64),
    #[error("annual PV production is zero; self-consumption ratio undefined")]
    ZeroPv,
    #[error("self-consumption target must lie in (0, 1], got {0}")]
    InvalidTarget(f64),
    #[error("tuning tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("target self-consumption {target} unreachable; the load shape supports at most {supremum}")]
    Unreachable { target: f64, supremum: f64 },
    #[error("load scaling did not converge in {iterations} iterations (last ratio {last_ratio})")]
    NonConvergence { iterations: usize, last_ratio: f64 },
    #[error("{0} producers have no load and no self-consumption target")]
    StandaloneWithLoad(Category),
    #[error("{0} prosumers need a base load profile and a self-consumption target")]
    MissingLoad(Category),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// kWh per installed kWp.
    YieldPerKwp,
    Pv,
    Load,
    SelfConsumed,
    Export,
}

/// A full year of non-negative hourly energy values. Index 0 is hour 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyProfile {
    kind: ProfileKind,
    values: Vec<f64>,
}

impl HourlyProfile {
    pub fn new(kind: ProfileKind, values: Vec<f64>) -> Result<Self, ProfileError> {
        match values.len() {
            HOURS_PER_YEAR => {}
            n if n == HOURS_PER_YEAR + 24 => return Err(ProfileError::LeapYear(n)),
            n => return Err(ProfileError::Length(n)),
        }
        check_non_negative(&values)?;
        Ok(HourlyProfile { kind, values })
    }

    pub fn zeros(kind: ProfileKind) -> Self {
        HourlyProfile {
            kind,
            values: vec![0.0; HOURS_PER_YEAR],
        }
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Multiplies every value by `factor`, keeping the kind.
    pub fn scaled(&self, factor: f64) -> HourlyProfile {
        HourlyProfile {
            kind: self.kind,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

fn check_non_negative(values: &[f64]) -> Result<(), ProfileError> {
    match values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        Some(i) => Err(ProfileError::InvalidValue {
            index: i + 1,
            value: values[i],
        }),
        None => Ok(()),
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<(), ProfileError> {
    if a.len() != b.len() {
        return Err(ProfileError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// PV production of one installation: yield per kWp times capacity.
pub fn scale_pv(yield_profile: &HourlyProfile, capacity_kwp: f64) -> Result<HourlyProfile, ProfileError> {
    if !(capacity_kwp.is_finite() && capacity_kwp >= 0.0) {
        return Err(ProfileError::InvalidCapacity(capacity_kwp));
    }
    HourlyProfile::new(ProfileKind::Pv, scale_values(yield_profile.values(), capacity_kwp))
}

/// Slice form of [`scale_pv`], used for short test series.
pub fn scale_values(values: &[f64], factor: f64) -> Vec<f64> {
    values.iter().map(|y| y * factor).collect()
}

/// Applies a system-loss derate to a gross yield profile. Net yields are
/// used as-is (factor 1.0).
pub fn derate(yield_profile: &HourlyProfile, factor: f64) -> Result<HourlyProfile, ProfileError> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(ProfileError::InvalidDerate(factor));
    }
    Ok(yield_profile.scaled(factor))
}

/// Annual share of PV production consumed on site:
/// `sum(min(pv, load)) / sum(pv)`.
pub fn self_consumption_ratio(pv: &[f64], load: &[f64]) -> Result<f64, ProfileError> {
    check_lengths(pv, load)?;
    let produced: f64 = pv.iter().sum();
    if produced <= 0.0 {
        return Err(ProfileError::ZeroPv);
    }
    let consumed: f64 = pv.iter().zip(load).map(|(p, l)| p.min(*l)).sum();
    Ok(consumed / produced)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    /// Absolute tolerance on the achieved ratio.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            tolerance: 1e-3,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadScale {
    pub factor: f64,
    pub achieved_ratio: f64,
    pub iterations: usize,
}

/// Finds a multiplier `k` for `base_load` such that the self-consumption
/// ratio of `pv` against `k * base_load` is within tolerance of `target`.
///
/// The ratio is continuous and nondecreasing in `k`, bounded above by the PV
/// share falling in hours with positive load, so a doubling/halving bracket
/// from `k = 1` followed by bisection always converges when the target is
/// reachable.
pub fn tune_load_scale(
    base_load: &[f64],
    pv: &[f64],
    target: f64,
    opts: TuneOptions,
) -> Result<LoadScale, ProfileError> {
    check_lengths(base_load, pv)?;
    if !(target > 0.0 && target <= 1.0) {
        return Err(ProfileError::InvalidTarget(target));
    }
    if !(opts.tolerance > 0.0) {
        return Err(ProfileError::InvalidTolerance(opts.tolerance));
    }
    let produced: f64 = pv.iter().sum();
    if produced <= 0.0 {
        return Err(ProfileError::ZeroPv);
    }
    let coverable: f64 = pv
        .iter()
        .zip(base_load)
        .filter(|(_, l)| **l > 0.0)
        .map(|(p, _)| *p)
        .sum();
    let supremum = coverable / produced;
    if supremum + opts.tolerance < target {
        return Err(ProfileError::Unreachable { target, supremum });
    }

    let mut scaled = vec![0.0; base_load.len()];
    let mut ratio_at = |k: f64| -> f64 {
        for (s, l) in scaled.iter_mut().zip(base_load) {
            *s = l * k;
        }
        // lengths and PV total are already validated
        self_consumption_ratio(pv, &scaled).unwrap_or(0.0)
    };
    let close = |r: f64| (r - target).abs() <= opts.tolerance;

    let mut iterations = 1;
    let r1 = ratio_at(1.0);
    if close(r1) {
        return Ok(LoadScale {
            factor: 1.0,
            achieved_ratio: r1,
            iterations,
        });
    }

    let (mut lo, mut hi);
    let mut last: f64;
    if r1 < target {
        lo = 1.0;
        hi = 2.0;
        loop {
            iterations += 1;
            last = ratio_at(hi);
            if close(last) {
                return Ok(LoadScale {
                    factor: hi,
                    achieved_ratio: last,
                    iterations,
                });
            }
            if last > target || iterations >= opts.max_iterations {
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        loop {
            iterations += 1;
            last = ratio_at(lo);
            if close(last) {
                return Ok(LoadScale {
                    factor: lo,
                    achieved_ratio: last,
                    iterations,
                });
            }
            if last < target || iterations >= opts.max_iterations {
                break;
            }
            hi = lo;
            lo *= 0.5;
        }
    }

    while iterations < opts.max_iterations {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        last = ratio_at(mid);
        if close(last) {
            return Ok(LoadScale {
                factor: mid,
                achieved_ratio: last,
                iterations,
            });
        }
        if last < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(ProfileError::NonConvergence {
        iterations,
        last_ratio: last,
    })
}

/// Splits one hour of PV production into (self-consumed, exported).
///
/// Self-consumption is `min(pv, load)` and export `max(pv - load, 0)`, with
/// the export rounded upward when `pv - load` is inexact so that
/// `self + export == pv` holds exactly in floating point and self never
/// exceeds the load.
pub fn split_hour(pv: f64, load: f64) -> (f64, f64) {
    if load >= pv {
        return (pv, 0.0);
    }
    let mut export = pv - load;
    // two-sum residual: exact (pv - load) minus the rounded difference
    let b = export - pv;
    let residual = (pv - (export - b)) + (-load - b);
    if residual > 0.0 {
        export = export.next_up();
    }
    (pv - export, export)
}

/// Element-wise [`split_hour`] over aligned series.
pub fn split_energy(pv: &[f64], load: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ProfileError> {
    check_lengths(pv, load)?;
    Ok(pv.iter().zip(load).map(|(p, l)| split_hour(*p, *l)).unzip())
}

/// The four annual series of one representative prosumer or producer.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsumerEnergy {
    pub category: Category,
    pub zone: Zone,
    pub pv: HourlyProfile,
    pub load: HourlyProfile,
    pub self_consumed: HourlyProfile,
    pub export: HourlyProfile,
    /// Achieved annual self-consumption fraction (0 for standalone plants).
    pub sc_ratio: f64,
    /// Load multiplier chosen by tuning (`None` for standalone plants).
    pub load_scale: Option<f64>,
}

impl ProsumerEnergy {
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(out);
        writeln!(w, "hour_index,pv_kwh,load_kwh,self_kwh,export_kwh")?;
        for t in 0..HOURS_PER_YEAR {
            writeln!(
                w,
                "{},{},{},{},{}",
                t + 1,
                self.pv.values[t],
                self.load.values[t],
                self.self_consumed.values[t],
                self.export.values[t]
            )?;
        }
        w.flush()
    }
}

/// Builds the representative profiles of one category in one zone.
///
/// Prosumers need a base load and a self-consumption target; the base load
/// is scaled until the target is hit. Standalone plants take neither and
/// export everything they produce.
pub fn build_prosumer(
    category: Category,
    zone: Zone,
    yield_profile: &HourlyProfile,
    base_load: Option<&HourlyProfile>,
    capacity_kwp: f64,
    target_sc: Option<f64>,
    opts: TuneOptions,
) -> Result<ProsumerEnergy, ProfileError> {
    let pv = scale_pv(yield_profile, capacity_kwp)?;
    if !category.has_load() {
        if base_load.is_some() || target_sc.is_some() {
            return Err(ProfileError::StandaloneWithLoad(category));
        }
        let export = HourlyProfile {
            kind: ProfileKind::Export,
            values: pv.values.clone(),
        };
        return Ok(ProsumerEnergy {
            category,
            zone,
            pv,
            load: HourlyProfile::zeros(ProfileKind::Load),
            self_consumed: HourlyProfile::zeros(ProfileKind::SelfConsumed),
            export,
            sc_ratio: 0.0,
            load_scale: None,
        });
    }

    let (Some(base_load), Some(target)) = (base_load, target_sc) else {
        return Err(ProfileError::MissingLoad(category));
    };
    let scale = tune_load_scale(base_load.values(), pv.values(), target, opts)?;
    let load = HourlyProfile {
        kind: ProfileKind::Load,
        values: scale_values(base_load.values(), scale.factor),
    };
    let (self_values, export_values) = split_energy(pv.values(), load.values())?;
    Ok(ProsumerEnergy {
        category,
        zone,
        pv,
        load,
        self_consumed: HourlyProfile {
            kind: ProfileKind::SelfConsumed,
            values: self_values,
        },
        export: HourlyProfile {
            kind: ProfileKind::Export,
            values: export_values,
        },
        sc_ratio: scale.achieved_ratio,
        load_scale: Some(scale.factor),
    })
}

/// Reads a two-column hourly file (`hour_index`, `value_column`). Hour
/// indices must run 1..=8760 in order.
pub fn read_hourly_file(
    path: impl AsRef<Path>,
    kind: ProfileKind,
    value_column: &str,
) -> Result<HourlyProfile, ProfileError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| ProfileError::Io {
        path: display.clone(),
        source,
    })?;
    read_hourly(file, &display, kind, value_column)
}

pub fn read_hourly<R: Read>(
    reader: R,
    source_name: &str,
    kind: ProfileKind,
    value_column: &str,
) -> Result<HourlyProfile, ProfileError> {
    let parse_err = |line: usize, message: String| ProfileError::Parse {
        path: source_name.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let hour_col = find("hour_index")?;
    let value_col = find(value_column)?;

    let mut values = Vec::with_capacity(HOURS_PER_YEAR);
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| parse_err(line, e.to_string()))?;
        let hour: usize = row
            .get(hour_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(line, "malformed hour_index".into()))?;
        if hour != values.len() + 1 {
            return Err(parse_err(
                line,
                format!("expected hour_index {}, found {hour}", values.len() + 1),
            ));
        }
        let v: f64 = row
            .get(value_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(line, format!("malformed {value_column}")))?;
        values.push(v);
    }
    HourlyProfile::new(kind, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn padded(head: &[f64]) -> Vec<f64> {
        let mut v = head.to_vec();
        v.resize(HOURS_PER_YEAR, 0.0);
        v
    }

    #[test]
    fn profile_length_rules() {
        assert!(matches!(
            HourlyProfile::new(ProfileKind::Load, vec![0.0; 100]),
            Err(ProfileError::Length(100))
        ));
        assert!(matches!(
            HourlyProfile::new(ProfileKind::Load, vec![0.0; 8784]),
            Err(ProfileError::LeapYear(8784))
        ));
        let mut v = vec![0.0; HOURS_PER_YEAR];
        v[10] = -1.0;
        assert!(matches!(
            HourlyProfile::new(ProfileKind::Load, v),
            Err(ProfileError::InvalidValue { index: 11, .. })
        ));
    }

    #[test]
    fn scale_pv_examples() {
        let y = HourlyProfile::new(ProfileKind::YieldPerKwp, padded(&[0.1, 0.5, 0.0])).unwrap();
        let zero = scale_pv(&y, 0.0).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));

        let ones = HourlyProfile::new(ProfileKind::YieldPerKwp, vec![1.0; HOURS_PER_YEAR]).unwrap();
        assert!(scale_pv(&ones, 35.0).unwrap().values().iter().all(|v| *v == 35.0));

        let pv = scale_pv(&y, 10.0).unwrap();
        assert_eq!(&pv.values()[..3], &[1.0, 5.0, 0.0]);
        assert_eq!(pv.kind(), ProfileKind::Pv);
        assert!(scale_pv(&y, -1.0).is_err());
    }

    #[test]
    fn derate_bounds() {
        let ones = HourlyProfile::new(ProfileKind::YieldPerKwp, vec![1.0; HOURS_PER_YEAR]).unwrap();
        assert_eq!(derate(&ones, 0.85).unwrap().values()[0], 0.85);
        assert!(derate(&ones, 0.0).is_err());
        assert!(derate(&ones, 1.2).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(self_consumption_ratio(&[1.0, 2.0], &[3.0, 2.0]).unwrap(), 1.0);
        assert_eq!(self_consumption_ratio(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(self_consumption_ratio(&[2.0, 0.0], &[1.0, 5.0]).unwrap(), 0.5);
        assert!(matches!(
            self_consumption_ratio(&[0.0, 0.0], &[1.0, 1.0]),
            Err(ProfileError::ZeroPv)
        ));
    }

    #[test]
    fn tuning_fixed_point_returns_unity() {
        let pv = [2.0, 0.0];
        let load = [1.0, 5.0];
        let s = tune_load_scale(&load, &pv, 0.5, TuneOptions::default()).unwrap();
        assert_eq!(s.factor, 1.0);
        assert_eq!(s.achieved_ratio, 0.5);
    }

    #[test]
    fn tuning_on_step_function_stops_at_first_bracket() {
        // ratio is 0.5 for every k >= 1
        let s = tune_load_scale(&[1.0, 0.0], &[1.0, 1.0], 0.5, TuneOptions::default()).unwrap();
        assert!((s.factor - 1.0).abs() < 1e-9);
        assert_eq!(s.achieved_ratio, 0.5);
    }

    #[test]
    fn tuning_hits_45_50_55_targets_on_toy_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pv: Vec<f64> = (0..240)
            .map(|h| {
                let x = (h % 24) as f64;
                if (6.0..18.0).contains(&x) {
                    ((x - 6.0) * std::f64::consts::PI / 12.0).sin() * rng.gen_range(0.5..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let load: Vec<f64> = (0..240).map(|_| rng.gen_range(0.05..1.0)).collect();
        for target in [0.45, 0.50, 0.55] {
            let s = tune_load_scale(&load, &pv, target, TuneOptions::default()).unwrap();
            let scaled = scale_values(&load, s.factor);
            let re = self_consumption_ratio(&pv, &scaled).unwrap();
            assert!((re - target).abs() <= 1e-3, "target {target} got {re}");
            assert_eq!(re, s.achieved_ratio);
        }
    }

    #[test]
    fn tuning_rejects_unreachable_targets() {
        // all PV falls in an hour with zero load
        match tune_load_scale(&[0.0, 1.0], &[1.0, 0.0], 0.5, TuneOptions::default()) {
            Err(ProfileError::Unreachable { supremum, .. }) => assert_eq!(supremum, 0.0),
            other => panic!("unexpected {other:?}"),
        }
        // at most 25% of PV can ever be self-consumed
        match tune_load_scale(&[1.0, 0.0], &[1.0, 3.0], 0.5, TuneOptions::default()) {
            Err(ProfileError::Unreachable { supremum, .. }) => assert_eq!(supremum, 0.25),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            tune_load_scale(&[1.0], &[1.0], 0.0, TuneOptions::default()),
            Err(ProfileError::InvalidTarget(_))
        ));
        let bad_tol = TuneOptions {
            tolerance: 0.0,
            ..TuneOptions::default()
        };
        assert!(matches!(
            tune_load_scale(&[1.0], &[1.0], 0.5, bad_tol),
            Err(ProfileError::InvalidTolerance(_))
        ));
    }

    #[test]
    fn tuning_reports_non_convergence() {
        let opts = TuneOptions {
            tolerance: 1e-12,
            max_iterations: 3,
        };
        let pv = [1.0, 2.0, 3.0];
        let load = [0.3, 0.1, 0.7];
        assert!(matches!(
            tune_load_scale(&load, &pv, 0.37, opts),
            Err(ProfileError::NonConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn split_examples() {
        let (s, e) = split_energy(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!((s, e), (vec![0.0, 0.0], vec![0.0, 0.0]));
        let (s, e) = split_energy(&[2.0, 0.0], &[1.0, 5.0]).unwrap();
        assert_eq!(s, vec![1.0, 0.0]);
        assert_eq!(e, vec![1.0, 0.0]);
        assert!(split_energy(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn split_matches_scalar_reference_on_grid_values() {
        // values on a 1/1024 grid keep pv - load exact, so the reference
        // min/max loop and the balanced split must agree bit for bit
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let pv: Vec<f64> = (0..48).map(|_| rng.gen_range(0..4096) as f64 / 1024.0).collect();
        let load: Vec<f64> = (0..48).map(|_| rng.gen_range(0..4096) as f64 / 1024.0).collect();
        let mut ref_self = Vec::new();
        let mut ref_export = Vec::new();
        for t in 0..48 {
            ref_self.push(if pv[t] < load[t] { pv[t] } else { load[t] });
            ref_export.push(if pv[t] > load[t] { pv[t] - load[t] } else { 0.0 });
        }
        let (s, e) = split_energy(&pv, &load).unwrap();
        assert_eq!(s, ref_self);
        assert_eq!(e, ref_export);
    }

    #[test]
    fn split_is_balanced_where_naive_rounding_is_not() {
        // naive load + (pv - load) != pv for this pair
        let (pv, load): (f64, f64) = (0.8367989267071522, 0.1299902075280323);
        assert_ne!(load + (pv - load), pv);
        let (s, e) = split_hour(pv, load);
        assert_eq!(s + e, pv);
        assert!(s <= load && s <= pv && e >= 0.0);
    }

    fn noisy_yield(seed: u64) -> HourlyProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..HOURS_PER_YEAR)
            .map(|h| {
                let x = (h % 24) as f64;
                if (6.0..19.0).contains(&x) {
                    ((x - 6.0) * std::f64::consts::PI / 13.0).sin() * rng.gen_range(0.2..0.8)
                } else {
                    0.0
                }
            })
            .collect();
        HourlyProfile::new(ProfileKind::YieldPerKwp, v).unwrap()
    }

    fn noisy_load(seed: u64) -> HourlyProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HourlyProfile::new(
            ProfileKind::Load,
            (0..HOURS_PER_YEAR).map(|_| rng.gen_range(0.0..3.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn standalone_exports_everything() {
        let y = noisy_yield(1);
        let p = build_prosumer(
            Category::Standalone,
            Zone::Nord,
            &y,
            None,
            100.0,
            None,
            TuneOptions::default(),
        )
        .unwrap();
        assert_eq!(p.export.values(), p.pv.values());
        assert!(p.self_consumed.values().iter().all(|v| *v == 0.0));
        assert!(p.load.values().iter().all(|v| *v == 0.0));

        let l = noisy_load(2);
        assert!(matches!(
            build_prosumer(
                Category::Standalone,
                Zone::Nord,
                &y,
                Some(&l),
                100.0,
                None,
                TuneOptions::default()
            ),
            Err(ProfileError::StandaloneWithLoad(_))
        ));
        assert!(matches!(
            build_prosumer(
                Category::Public,
                Zone::Nord,
                &y,
                None,
                10.0,
                Some(0.5),
                TuneOptions::default()
            ),
            Err(ProfileError::MissingLoad(_))
        ));
    }

    #[test]
    fn prosumer_hits_target_and_balances() {
        let y = noisy_yield(3);
        let l = noisy_load(4);
        let p = build_prosumer(
            Category::Public,
            Zone::Nord,
            &y,
            Some(&l),
            35.0,
            Some(0.5),
            TuneOptions::default(),
        )
        .unwrap();
        assert!((0.499..=0.501).contains(&p.sc_ratio));

        let r = build_prosumer(
            Category::Residential,
            Zone::Sud,
            &y,
            Some(&l),
            5.0,
            Some(0.55),
            TuneOptions::default(),
        )
        .unwrap();
        for t in 0..HOURS_PER_YEAR {
            assert_eq!(r.self_consumed.values()[t] + r.export.values()[t], r.pv.values()[t]);
        }
    }

    #[test]
    fn reads_hourly_files_and_rejects_gaps() {
        let mut text = String::from("hour_index,yield_kwh_per_kwp\n");
        for h in 1..=HOURS_PER_YEAR {
            text.push_str(&format!("{h},0.25\n"));
        }
        let p = read_hourly(text.as_bytes(), "y", ProfileKind::YieldPerKwp, "yield_kwh_per_kwp").unwrap();
        assert_eq!(p.total(), 0.25 * HOURS_PER_YEAR as f64);

        let gap = text.replacen("\n5,0.25\n", "\n6,0.25\n", 1);
        assert!(matches!(
            read_hourly(gap.as_bytes(), "y", ProfileKind::YieldPerKwp, "yield_kwh_per_kwp"),
            Err(ProfileError::Parse { line: 6, .. })
        ));
    }

    #[test]
    fn csv_output_has_documented_columns() {
        let y = noisy_yield(5);
        let p = build_prosumer(
            Category::Standalone,
            Zone::Sard,
            &y,
            None,
            1.0,
            None,
            TuneOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("hour_index,pv_kwh,load_kwh,self_kwh,export_kwh\n1,"));
        assert_eq!(text.lines().count(), HOURS_PER_YEAR + 1);
    }
}
