//! Impact views over paired actual/counterfactual equilibria: relative
//! differences, selective smoothing, monthly means and hourly profiles.

use std::io::Write;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{DayFilter, HourKey};
use crate::domain::Zone;
use crate::market::{CounterfactualOutcome, ShiftAmounts, Volume};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("smoothing window must be odd and at least 3, got {0}")]
    InvalidWindow(usize),
    #[error("no entries selected for {0}")]
    EmptySelection(String),
    #[error("no defined relative differences in month {0}")]
    NoDefinedEntries(u32),
    #[error("month must be in 1..=12, got {0}")]
    InvalidMonth(u32),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Baseline used for the percentage difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Denominator {
    /// The counterfactual volume without RECs.
    #[default]
    Synthetic,
    Actual,
}

/// `100 * (actual - synthetic) / baseline`; `None` when the baseline is not
/// positive. Positive means the observed market traded more than the
/// counterfactual one.
pub fn relative_diff(actual: f64, synthetic: f64, denominator: Denominator) -> Option<f64> {
    let base = match denominator {
        Denominator::Synthetic => synthetic,
        Denominator::Actual => actual,
    };
    (base > 0.0).then(|| 100.0 * (actual - synthetic) / base)
}

/// Same as [`relative_diff`], with the difference taken exactly.
pub fn relative_diff_volume(actual: Volume, synthetic: Volume, denominator: Denominator) -> Option<f64> {
    let base = match denominator {
        Denominator::Synthetic => synthetic,
        Denominator::Actual => actual,
    };
    base.is_positive()
        .then(|| 100.0 * (actual - synthetic).mwh() / base.mwh())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgePolicy {
    /// Entries without a full window keep their original value.
    #[default]
    LeaveUnsmoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub window: usize,
    pub positive_only: bool,
    #[serde(default)]
    pub edge_policy: EdgePolicy,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            window: 7,
            positive_only: true,
            edge_policy: EdgePolicy::LeaveUnsmoothed,
        }
    }
}

impl SmoothingConfig {
    pub fn with_window(window: usize) -> Result<Self, AnalysisError> {
        let cfg = SmoothingConfig {
            window,
            ..SmoothingConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(AnalysisError::InvalidWindow(self.window));
        }
        Ok(())
    }

    fn eligible(&self, v: f64) -> bool {
        !self.positive_only || v > 0.0
    }
}

/// Centered moving average read from the original series.
pub fn smooth(series: &[f64], cfg: &SmoothingConfig) -> Result<Vec<f64>, AnalysisError> {
    cfg.validate()?;
    let half = cfg.window / 2;
    let mut out = series.to_vec();
    if series.len() < cfg.window {
        return Ok(out);
    }
    for i in half..series.len() - half {
        if cfg.eligible(series[i]) {
            let window = &series[i - half..=i + half];
            out[i] = window.iter().sum::<f64>() / cfg.window as f64;
        }
    }
    Ok(out)
}

/// [`smooth`] for series with undefined entries. Undefined entries stay
/// undefined, and an entry whose window touches one is left as is.
pub fn smooth_defined(series: &[Option<f64>], cfg: &SmoothingConfig) -> Result<Vec<Option<f64>>, AnalysisError> {
    cfg.validate()?;
    let half = cfg.window / 2;
    let mut out = series.to_vec();
    if series.len() < cfg.window {
        return Ok(out);
    }
    for i in half..series.len() - half {
        let Some(v) = series[i] else { continue };
        if !cfg.eligible(v) {
            continue;
        }
        let window: Option<Vec<f64>> = series[i - half..=i + half].iter().copied().collect();
        if let Some(w) = window {
            out[i] = Some(w.iter().sum::<f64>() / cfg.window as f64);
        }
    }
    Ok(out)
}

/// One cleared zone-hour with both equilibria and the shifts applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRow {
    pub key: HourKey,
    pub outcome: CounterfactualOutcome,
    pub shifts: ShiftAmounts,
}

/// Header of the per-zone equilibrium file.
pub const EQUILIBRIUM_HEADER: [&str; 9] = [
    "date",
    "hour",
    "price_actual",
    "quantity_actual",
    "price_synt",
    "quantity_synt",
    "delta_demand",
    "delta_supply",
    "crossing_kind",
];

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes equilibria. `crossing_kind` is `<actual>/<synthetic>`.
pub fn write_equilibria<W: Write>(w: W, rows: &[EquilibriumRow]) -> Result<(), AnalysisError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(EQUILIBRIUM_HEADER)?;
    for r in rows {
        let (a, s) = (&r.outcome.actual, &r.outcome.synthetic);
        wtr.write_record([
            r.key.date.to_string(),
            r.key.hour.to_string(),
            opt_num(a.price),
            a.quantity.to_string(),
            opt_num(s.price),
            s.quantity.to_string(),
            r.shifts.delta_demand.to_string(),
            r.shifts.delta_supply.to_string(),
            format!("{}/{}", a.kind.label(), s.kind.label()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactEntry {
    pub key: HourKey,
    pub q_actual: Volume,
    pub q_synt: Volume,
    pub p_actual: Option<f64>,
    pub p_synt: Option<f64>,
    pub rel_diff_pct: Option<f64>,
    pub rel_diff_smoothed_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactSeries {
    pub zone: Zone,
    pub scenario: String,
    pub entries: Vec<ImpactEntry>,
}

impl ImpactSeries {
    /// Builds the series from chronologically ordered equilibria. Smoothing
    /// runs over consecutive entries of the series.
    pub fn build(
        zone: Zone,
        scenario: &str,
        rows: &[EquilibriumRow],
        denominator: Denominator,
        smoothing: &SmoothingConfig,
    ) -> Result<ImpactSeries, AnalysisError> {
        let raw: Vec<Option<f64>> = rows
            .iter()
            .map(|r| relative_diff_volume(r.outcome.actual.quantity, r.outcome.synthetic.quantity, denominator))
            .collect();
        let smoothed = smooth_defined(&raw, smoothing)?;
        let entries = rows
            .iter()
            .zip(raw.iter().zip(&smoothed))
            .map(|(r, (d, s))| ImpactEntry {
                key: r.key,
                q_actual: r.outcome.actual.quantity,
                q_synt: r.outcome.synthetic.quantity,
                p_actual: r.outcome.actual.price,
                p_synt: r.outcome.synthetic.price,
                rel_diff_pct: *d,
                rel_diff_smoothed_pct: *s,
            })
            .collect();
        Ok(ImpactSeries {
            zone,
            scenario: scenario.to_string(),
            entries,
        })
    }

    pub fn months(&self) -> Vec<u32> {
        let mut m: Vec<u32> = self.entries.iter().map(|e| e.key.date.month()).collect();
        m.sort_unstable();
        m.dedup();
        m
    }
}

pub const IMPACT_HEADER: [&str; 8] = [
    "date",
    "hour",
    "q_actual",
    "q_synt",
    "p_actual",
    "p_synt",
    "rel_diff_pct",
    "rel_diff_smoothed_pct",
];

pub fn write_impact<W: Write>(w: W, series: &ImpactSeries) -> Result<(), AnalysisError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(IMPACT_HEADER)?;
    for e in &series.entries {
        wtr.write_record([
            e.key.date.to_string(),
            e.key.hour.to_string(),
            e.q_actual.to_string(),
            e.q_synt.to_string(),
            opt_num(e.p_actual),
            opt_num(e.p_synt),
            opt_num(e.rel_diff_pct),
            opt_num(e.rel_diff_smoothed_pct),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean of the defined relative differences in `month`.
pub fn monthly_average_impact(series: &ImpactSeries, month: u32) -> Result<f64, AnalysisError> {
    monthly_mean_of(series, month, |e| e.rel_diff_pct)
}

/// Mean of the defined smoothed relative differences in `month`.
pub fn monthly_average_impact_smoothed(series: &ImpactSeries, month: u32) -> Result<f64, AnalysisError> {
    monthly_mean_of(series, month, |e| e.rel_diff_smoothed_pct)
}

fn monthly_mean_of(
    series: &ImpactSeries,
    month: u32,
    pick: impl Fn(&ImpactEntry) -> Option<f64>,
) -> Result<f64, AnalysisError> {
    if !(1..=12).contains(&month) {
        return Err(AnalysisError::InvalidMonth(month));
    }
    mean(
        series
            .entries
            .iter()
            .filter(|e| e.key.date.month() == month)
            .filter_map(pick),
    )
    .ok_or(AnalysisError::NoDefinedEntries(month))
}

/// Mean value for each settlement hour 1..=24 over the selected days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyMeans {
    pub means: [Option<f64>; 24],
    pub counts: [usize; 24],
}

impl HourlyMeans {
    pub fn get(&self, hour: u8) -> Option<f64> {
        self.means.get(usize::from(hour).checked_sub(1)?).copied().flatten()
    }
}

/// Averages `(key, value)` points by settlement hour. The extra hour of
/// the autumn clock change is left out.
pub fn hourly_profile_mean(
    points: &[(HourKey, f64)],
    month: Option<u32>,
    days: DayFilter,
) -> Result<HourlyMeans, AnalysisError> {
    let mut sums = [0.0f64; 24];
    let mut counts = [0usize; 24];
    for (key, v) in points {
        if !(1..=24).contains(&key.hour) || month.is_some_and(|m| key.date.month() != m) || !days.accepts(key.date) {
            continue;
        }
        let h = usize::from(key.hour) - 1;
        sums[h] += v;
        counts[h] += 1;
    }
    if counts.iter().all(|&c| c == 0) {
        let what = match month {
            Some(m) => format!("month {m}, {} days", days.label()),
            None => format!("{} days", days.label()),
        };
        return Err(AnalysisError::EmptySelection(what));
    }
    let mut means = [None; 24];
    for h in 0..24 {
        if counts[h] > 0 {
            means[h] = Some(sums[h] / counts[h] as f64);
        }
    }
    Ok(HourlyMeans { means, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySummary {
    pub month: u32,
    pub hours: usize,
    pub defined_hours: usize,
    pub mean_rel_diff_pct: Option<f64>,
    pub mean_rel_diff_smoothed_pct: Option<f64>,
    pub mean_q_actual: f64,
    pub mean_q_synt: f64,
}

pub fn monthly_summary(series: &ImpactSeries) -> Vec<MonthlySummary> {
    series
        .months()
        .into_iter()
        .map(|month| {
            let sel: Vec<&ImpactEntry> = series.entries.iter().filter(|e| e.key.date.month() == month).collect();
            MonthlySummary {
                month,
                hours: sel.len(),
                defined_hours: sel.iter().filter(|e| e.rel_diff_pct.is_some()).count(),
                mean_rel_diff_pct: monthly_average_impact(series, month).ok(),
                mean_rel_diff_smoothed_pct: monthly_average_impact_smoothed(series, month).ok(),
                mean_q_actual: mean(sel.iter().map(|e| e.q_actual.mwh())).unwrap_or(0.0),
                mean_q_synt: mean(sel.iter().map(|e| e.q_synt.mwh())).unwrap_or(0.0),
            }
        })
        .collect()
}

pub fn write_monthly_summary<W: Write>(w: W, rows: &[MonthlySummary]) -> Result<(), AnalysisError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "month",
        "hours",
        "defined_hours",
        "mean_rel_diff_pct",
        "mean_rel_diff_smoothed_pct",
        "mean_q_actual",
        "mean_q_synt",
    ])?;
    for r in rows {
        wtr.write_record([
            r.month.to_string(),
            r.hours.to_string(),
            r.defined_hours.to_string(),
            opt_num(r.mean_rel_diff_pct),
            opt_num(r.mean_rel_diff_smoothed_pct),
            r.mean_q_actual.to_string(),
            r.mean_q_synt.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// 24-row profile tables tagged by month (`all` or 1..=12) and day type,
/// for actual and counterfactual volumes and both impact columns.
pub fn write_hourly_profiles<W: Write>(w: W, series: &ImpactSeries) -> Result<(), AnalysisError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "month",
        "day_type",
        "hour",
        "days",
        "q_actual",
        "q_synt",
        "rel_diff_pct",
        "rel_diff_smoothed_pct",
    ])?;
    let pts = |pick: fn(&ImpactEntry) -> Option<f64>| -> Vec<(HourKey, f64)> {
        series
            .entries
            .iter()
            .filter_map(|e| pick(e).map(|v| (e.key, v)))
            .collect()
    };
    let qa = pts(|e| Some(e.q_actual.mwh()));
    let qs = pts(|e| Some(e.q_synt.mwh()));
    let rd = pts(|e| e.rel_diff_pct);
    let rs = pts(|e| e.rel_diff_smoothed_pct);
    let months = std::iter::once(None).chain(series.months().into_iter().map(Some));
    for month in months {
        for days in DayFilter::ALL {
            let Ok(q_actual) = hourly_profile_mean(&qa, month, days) else {
                continue;
            };
            let q_synt = hourly_profile_mean(&qs, month, days)?;
            let rel = hourly_profile_mean(&rd, month, days).ok();
            let rel_s = hourly_profile_mean(&rs, month, days).ok();
            let tag = month.map(|m| m.to_string()).unwrap_or_else(|| "all".into());
            for h in 1..=24u8 {
                let i = usize::from(h) - 1;
                wtr.write_record([
                    tag.clone(),
                    days.label().to_string(),
                    h.to_string(),
                    q_actual.counts[i].to_string(),
                    opt_num(q_actual.means[i]),
                    opt_num(q_synt.means[i]),
                    opt_num(rel.as_ref().and_then(|p| p.means[i])),
                    opt_num(rel_s.as_ref().and_then(|p| p.means[i])),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{CrossingKind, Equilibrium};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn day(m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, m, d).unwrap()
    }

    fn eq(q_mwh: i64) -> Equilibrium {
        Equilibrium {
            price: Some(50.0),
            quantity: Volume::from_wh(q_mwh * 1_000_000),
            kind: CrossingKind::Interior,
        }
    }

    fn row(key: HourKey, qa: i64, qs: i64) -> EquilibriumRow {
        EquilibriumRow {
            key,
            outcome: CounterfactualOutcome {
                actual: eq(qa),
                synthetic: eq(qs),
            },
            shifts: ShiftAmounts::default(),
        }
    }

    #[test]
    fn relative_diff_examples() {
        assert_eq!(relative_diff(100.0, 100.0, Denominator::Synthetic), Some(0.0));
        assert_eq!(relative_diff(101.0, 100.0, Denominator::Synthetic), Some(1.0));
        assert_eq!(relative_diff(5.0, 0.0, Denominator::Synthetic), None);
        assert_eq!(relative_diff(5.0, -1.0, Denominator::Synthetic), None);
        assert_eq!(relative_diff(0.0, 5.0, Denominator::Actual), None);
        let a = relative_diff(110.0, 100.0, Denominator::Actual).unwrap();
        assert!((a - 100.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn volume_diff_matches_float_formula() {
        let (a, s) = (Volume::from_wh(101_000_000), Volume::from_wh(100_000_000));
        assert_eq!(relative_diff_volume(a, s, Denominator::Synthetic), Some(1.0));
        assert_eq!(relative_diff_volume(a, Volume::ZERO, Denominator::Synthetic), None);
    }

    #[test]
    fn window_validation() {
        assert!(SmoothingConfig::with_window(7).is_ok());
        for w in [0, 1, 2, 4, 8] {
            assert!(matches!(
                SmoothingConfig::with_window(w),
                Err(AnalysisError::InvalidWindow(_))
            ));
        }
    }

    #[test]
    fn smoothing_examples() {
        let cfg = SmoothingConfig::default();
        assert_eq!(smooth(&[3.0; 10], &cfg).unwrap(), vec![3.0; 10]);
        let s: Vec<f64> = (1..=7).map(f64::from).collect();
        let out = smooth(&s, &cfg).unwrap();
        assert_eq!(out[3], 4.0);
        assert_eq!(&out[..3], &s[..3]);
        assert_eq!(&out[4..], &s[4..]);
        // shorter than the window: nothing to smooth
        assert_eq!(smooth(&[1.0, 2.0, 3.0], &cfg).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn negative_entry_kept_and_neighbors_use_it() {
        let cfg = SmoothingConfig::with_window(3).unwrap();
        let s = [1.0, 2.0, -3.0, 4.0, 5.0];
        let out = smooth(&s, &cfg).unwrap();
        assert_eq!(out[2], -3.0);
        assert_eq!(out[1], (1.0 + 2.0 - 3.0) / 3.0);
        assert_eq!(out[3], (-3.0 + 4.0 + 5.0) / 3.0);
        assert_eq!(out[0], 1.0);
        assert_eq!(out[4], 5.0);
    }

    #[test]
    fn all_entries_mode_smooths_non_positive_too() {
        let cfg = SmoothingConfig {
            window: 3,
            positive_only: false,
            ..SmoothingConfig::default()
        };
        let out = smooth(&[0.0, -3.0, 0.0], &cfg).unwrap();
        assert_eq!(out[1], -1.0);
    }

    #[test]
    fn undefined_entries_block_their_windows() {
        let cfg = SmoothingConfig::with_window(3).unwrap();
        let s = [Some(1.0), Some(2.0), None, Some(4.0), Some(5.0), Some(6.0)];
        let out = smooth_defined(&s, &cfg).unwrap();
        assert_eq!(out[1], Some(2.0));
        assert_eq!(out[2], None);
        assert_eq!(out[3], Some(4.0));
        assert_eq!(out[4], Some(5.0));
    }

    #[test]
    fn monthly_means() {
        let k = |m, d| HourKey::new(day(m, d), 1);
        let zero = ImpactSeries::build(
            Zone::Nord,
            "t",
            &[row(k(1, 1), 100, 100), row(k(1, 2), 50, 50)],
            Denominator::Synthetic,
            &SmoothingConfig::default(),
        )
        .unwrap();
        assert_eq!(monthly_average_impact(&zero, 1).unwrap(), 0.0);

        let pm = ImpactSeries::build(
            Zone::Nord,
            "t",
            &[row(k(4, 1), 101, 100), row(k(4, 2), 99, 100), row(k(5, 1), 0, 0)],
            Denominator::Synthetic,
            &SmoothingConfig::default(),
        )
        .unwrap();
        assert_eq!(monthly_average_impact(&pm, 4).unwrap(), 0.0);
        assert!(matches!(
            monthly_average_impact(&pm, 5),
            Err(AnalysisError::NoDefinedEntries(5))
        ));
        assert!(matches!(
            monthly_average_impact(&pm, 13),
            Err(AnalysisError::InvalidMonth(13))
        ));
        let summary = monthly_summary(&pm);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[1].defined_hours, 0);
        assert_eq!(summary[1].mean_rel_diff_pct, None);
    }

    #[test]
    fn hourly_profile_examples() {
        let one_day: Vec<(HourKey, f64)> = (1..=24u8)
            .map(|h| (HourKey::new(day(1, 8), h), f64::from(h) * 1.5))
            .collect();
        let p = hourly_profile_mean(&one_day, None, DayFilter::All).unwrap();
        for h in 1..=24u8 {
            assert_eq!(p.get(h), Some(f64::from(h) * 1.5));
        }
        let mut two = one_day.clone();
        two.extend(one_day.iter().map(|(k, v)| (HourKey::new(day(1, 9), k.hour), *v)));
        assert_eq!(
            hourly_profile_mean(&two, Some(1), DayFilter::All).unwrap().means,
            p.means
        );
        assert!(matches!(
            hourly_profile_mean(&one_day, None, DayFilter::Weekend),
            Err(AnalysisError::EmptySelection(_))
        ));
        assert!(hourly_profile_mean(&one_day, Some(2), DayFilter::All).is_err());
        // hour 25 is not a profile slot
        let extra = [(HourKey::new(day(10, 27), 25), 9.0)];
        assert!(hourly_profile_mean(&extra, None, DayFilter::All).is_err());
    }

    #[test]
    fn writers_emit_headers_and_blanks() {
        let k = HourKey::new(day(1, 8), 3);
        let series = ImpactSeries::build(
            Zone::Csud,
            "policy.2027",
            &[row(k, 0, 0)],
            Denominator::Synthetic,
            &SmoothingConfig::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_impact(&mut buf, &series).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "date,hour,q_actual,q_synt,p_actual,p_synt,rel_diff_pct,rel_diff_smoothed_pct\n\
             2024-01-08,3,0.000000,0.000000,50,50,,\n"
        );

        let mut buf = Vec::new();
        write_equilibria(&mut buf, &[row(k, 2, 1)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(&EQUILIBRIUM_HEADER.join(",")));
        assert!(text.contains("2024-01-08,3,50,2.000000,50,1.000000,0.000000,0.000000,interior/interior"));

        let mut buf = Vec::new();
        write_hourly_profiles(&mut buf, &series).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // all/all, all/weekday, 1/all, 1/weekday
        assert_eq!(text.lines().count(), 1 + 4 * 24);
    }

    proptest! {
        #[test]
        fn non_positive_entries_never_change(s in prop::collection::vec(-5.0f64..5.0, 0..60), w in 1usize..6) {
            let cfg = SmoothingConfig::with_window(2 * w + 1).unwrap();
            let out = smooth(&s, &cfg).unwrap();
            for (a, b) in s.iter().zip(&out) {
                if *a <= 0.0 {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }

        #[test]
        fn constant_positive_is_fixed_point(c in 0.001f64..1e6, n in 0usize..40) {
            let s = vec![c; n];
            let out = smooth(&s, &SmoothingConfig::default()).unwrap();
            for v in &out {
                prop_assert!((v - c).abs() <= c * 1e-15);
            }
        }

        #[test]
        fn all_days_is_weighted_combination(vals in prop::collection::vec(0.0f64..100.0, 24 * 14)) {
            let pts: Vec<(HourKey, f64)> = vals
                .iter()
                .enumerate()
                .map(|(i, v)| (HourKey::new(day(1, 1 + (i / 24) as u32), (i % 24) as u8 + 1), *v))
                .collect();
            let all = hourly_profile_mean(&pts, None, DayFilter::All).unwrap();
            let wd = hourly_profile_mean(&pts, None, DayFilter::Weekday).unwrap();
            let we = hourly_profile_mean(&pts, None, DayFilter::Weekend).unwrap();
            for h in 0..24 {
                let (nw, ne) = (wd.counts[h] as f64, we.counts[h] as f64);
                let combined = (nw * wd.means[h].unwrap() + ne * we.means[h].unwrap()) / (nw + ne);
                prop_assert!((combined - all.means[h].unwrap()).abs() < 1e-9);
                prop_assert_eq!(wd.counts[h] + we.counts[h], all.counts[h]);
            }
        }

        #[test]
        fn sign_convention(a in 1i64..1_000_000, s in 1i64..1_000_000) {
            let d = relative_diff_volume(Volume::from_wh(a), Volume::from_wh(s), Denominator::Synthetic).unwrap();
            prop_assert_eq!(d > 0.0, a > s);
            prop_assert_eq!(d == 0.0, a == s);
        }
    }
}
