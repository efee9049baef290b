//! Deterministic synthetic inputs: a 362-REC registry, zonal PV yields,
//! category base loads and a two-zone, fourteen-day bid ledger.
//!
//! Everything is generated from fixed seeds so that files written by
//! [`write_inputs`] are byte-identical across runs and platforms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atlas::REGISTRY_COLUMNS;
use crate::domain::{Category, Zone};
use crate::market::{clear, Bid, Side, StepCurve, Volume};
use crate::profiles::{HourlyProfile, ProfileKind, HOURS_PER_YEAR};

const REGISTRY_SEED: u64 = 0x5245_4331;
const YIELD_SEED: u64 = 0x5956_4c44;
const LOAD_SEED: u64 = 0x4c4f_4144;
const LEDGER_SEED: u64 = 0x4c45_4447;

/// REC counts per zone in the synthetic registry.
pub const REGISTRY_ZONE_COUNTS: [(Zone, usize); 7] = [
    (Zone::Nord, 231),
    (Zone::Csud, 69),
    (Zone::Cnord, 20),
    (Zone::Sud, 18),
    (Zone::Sici, 12),
    (Zone::Cala, 6),
    (Zone::Sard, 6),
];
pub const REGISTRY_OPERATIONAL: usize = 184;
/// Installed PV, milli-kWp, of operational and design RECs.
const OPERATIONAL_CAPACITY_MILLI_KWP: u64 = 29_646_000;
const DESIGN_CAPACITY_MILLI_KWP: u64 = 338_354_000;
/// Mean self-consumption over reporting RECs, tenths of a percent.
const MEAN_SELF_CONSUMPTION_TENTHS: i64 = 491;
const SELF_CONSUMPTION_REPORTED: usize = 150;

/// (category, RECs including it, mean rooftop units per including REC)
const CATEGORY_PRESENCE: [(Category, usize, f64); 5] = [
    (Category::Public, 260, 4.4),
    (Category::Residential, 36, 17.7),
    (Category::Sme, 42, 2.3),
    (Category::Npo, 22, 2.3),
    (Category::Standalone, 61, 1.7),
];

fn building_palette(category: Category) -> &'static [(&'static str, u32)] {
    match category {
        Category::Public => &[
            ("school", 40),
            ("town hall", 20),
            ("sports facility", 15),
            ("unspecified", 15),
            ("library", 10),
        ],
        Category::Sme => &[
            ("commercial building", 35),
            ("hotel", 20),
            ("industrial building", 20),
            ("unspecified", 25),
        ],
        Category::Npo => &[("office", 55), ("church", 25), ("others", 20)],
        Category::Residential => &[("unspecified", 90), ("detached house", 10)],
        Category::Standalone => &[],
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, palette: &'a [(&'a str, u32)]) -> &'a str {
    let total: u32 = palette.iter().map(|(_, w)| w).sum();
    let mut x = rng.gen_range(0..total);
    for (label, w) in palette {
        if x < *w {
            return label;
        }
        x -= w;
    }
    palette[palette.len() - 1].0
}

/// Splits `total` into `weights.len()` integer parts proportional to the
/// weights, handing the rounding remainder to the first entries.
fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    let mut parts: Vec<u64> = weights
        .iter()
        .map(|w| ((w / sum) * total as f64).floor() as u64)
        .collect();
    let mut rest = total - parts.iter().sum::<u64>();
    let n = parts.len();
    let mut i = 0;
    while rest > 0 {
        parts[i % n] += 1;
        rest -= 1;
        i += 1;
    }
    parts
}

fn fmt_milli(v: u64) -> String {
    format!("{}.{:03}", v / 1000, v % 1000)
}

fn fmt_tenths(v: i64) -> String {
    format!("{}.{}", v / 10, v % 10)
}

fn share_col(c: Category) -> &'static str {
    match c {
        Category::Public => "share_public_pct",
        Category::Residential => "share_residential_pct",
        Category::Sme => "share_sme_pct",
        Category::Npo => "share_npo_pct",
        Category::Standalone => "share_standalone_pct",
    }
}

fn count_col(c: Category) -> &'static str {
    match c {
        Category::Public => "n_rooftop_public",
        Category::Residential => "n_rooftop_residential",
        Category::Sme => "n_rooftop_sme",
        Category::Npo => "n_rooftop_npo",
        Category::Standalone => "n_standalone",
    }
}

fn building_col(c: Category) -> Option<&'static str> {
    match c {
        Category::Public => Some("building_types_public"),
        Category::Sme => Some("building_types_sme"),
        Category::Npo => Some("building_types_npo"),
        Category::Residential => Some("building_types_residential"),
        Category::Standalone => None,
    }
}

/// The synthetic 362-REC registry as CSV text.
pub fn registry_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(REGISTRY_SEED);
    let mut zones: Vec<Zone> = REGISTRY_ZONE_COUNTS
        .iter()
        .flat_map(|(z, n)| std::iter::repeat_n(*z, *n))
        .collect();
    zones.shuffle(&mut rng);
    let n = zones.len();

    let mut rows: Vec<BTreeMap<&'static str, String>> = (0..n)
        .map(|i| {
            let mut r = BTreeMap::new();
            r.insert("id", format!("REC{:03}", i + 1));
            r.insert("zone", zones[i].code().to_string());
            let status = if i < REGISTRY_OPERATIONAL {
                "operational"
            } else {
                "design"
            };
            r.insert("status", status.to_string());
            r
        })
        .collect();

    // Residential and NPO rooftops only appear in the zones with the most
    // diverse communities.
    let mut members: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
    for (category, count, _) in CATEGORY_PRESENCE {
        let mut pool: Vec<usize> = (0..n)
            .filter(|i| match category {
                Category::Residential | Category::Npo => {
                    matches!(zones[*i], Zone::Nord | Zone::Csud | Zone::Sud)
                }
                _ => true,
            })
            .collect();
        pool.shuffle(&mut rng);
        let mut chosen: Vec<usize> = pool.into_iter().take(count).collect();
        chosen.sort_unstable();
        members.insert(category, chosen);
    }

    for i in 0..n {
        let included: Vec<Category> = Category::ALL
            .into_iter()
            .filter(|c| members[c].binary_search(&i).is_ok())
            .collect();
        if included.is_empty() {
            continue;
        }
        let weights: Vec<f64> = included
            .iter()
            .map(|c| {
                let w = rng.gen_range(0.2..1.0);
                if *c == Category::Standalone {
                    2.0 * w
                } else {
                    w
                }
            })
            .collect();
        for (c, tenths) in included.iter().zip(apportion(1000, &weights)) {
            rows[i].insert(share_col(*c), fmt_tenths(tenths as i64));
        }
    }

    for (category, count, mean_units) in CATEGORY_PRESENCE {
        let target = (mean_units * count as f64).round() as u64;
        let weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.1..1.0)).collect();
        let extra = apportion(target - count as u64, &weights);
        for (&i, e) in members[&category].iter().zip(extra) {
            rows[i].insert(count_col(category), (1 + e).to_string());
        }
    }

    for (range, total) in [
        (0..REGISTRY_OPERATIONAL, OPERATIONAL_CAPACITY_MILLI_KWP),
        (REGISTRY_OPERATIONAL..n, DESIGN_CAPACITY_MILLI_KWP),
    ] {
        let weights: Vec<f64> = range
            .clone()
            .map(|_| {
                let u: f64 = rng.gen_range(0.0..1.0);
                (2.5 * u).exp()
            })
            .collect();
        for (i, milli) in range.zip(apportion(total, &weights)) {
            rows[i].insert("pv_capacity_kwp", fmt_milli(milli));
        }
    }

    // Building labels for a subset of RECs, one label per rooftop.
    let mut labelled: Vec<usize> = (0..n).collect();
    labelled.shuffle(&mut rng);
    labelled.truncate(158);
    labelled.sort_unstable();
    for &i in &labelled {
        for c in Category::PROSUMERS {
            let Some(units) = rows[i].get(count_col(c)).map(|s| s.parse::<usize>().unwrap_or(0)) else {
                continue;
            };
            let labels: Vec<&str> = (0..units.min(8)).map(|_| pick(&mut rng, building_palette(c))).collect();
            if let Some(col) = building_col(c) {
                rows[i].insert(col, labels.join("|"));
            }
        }
    }

    let mut reporting: Vec<usize> = (0..n).collect();
    reporting.shuffle(&mut rng);
    reporting.truncate(SELF_CONSUMPTION_REPORTED);
    reporting.sort_unstable();
    let mut tenths: Vec<i64> = reporting
        .iter()
        .map(|_| MEAN_SELF_CONSUMPTION_TENTHS + rng.gen_range(-180..=180))
        .collect();
    let target = MEAN_SELF_CONSUMPTION_TENTHS * SELF_CONSUMPTION_REPORTED as i64;
    let diff = target - tenths.iter().sum::<i64>();
    let k = tenths.len() as i64;
    for (j, t) in tenths.iter_mut().enumerate() {
        *t += diff.div_euclid(k) + i64::from((j as i64) < diff.rem_euclid(k));
    }
    for (&i, t) in reporting.iter().zip(&tenths) {
        rows[i].insert("self_consumption_pct", fmt_tenths(*t));
    }

    for row in rows.iter_mut() {
        let x: f64 = rng.gen_range(0.0..1.0);
        if x < 0.15 {
            row.insert("has_bess", "true".into());
        } else if x < 0.75 {
            row.insert("has_bess", "false".into());
        }
    }

    let mut out = REGISTRY_COLUMNS.join(",");
    out.push('\n');
    for row in &rows {
        let cells: Vec<&str> = REGISTRY_COLUMNS
            .iter()
            .map(|c| row.get(c).map(String::as_str).unwrap_or(""))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn latitude(zone: Zone) -> f64 {
    match zone {
        Zone::Nord => 45.46,
        Zone::Cnord => 43.77,
        Zone::Csud => 41.90,
        Zone::Cala => 38.91,
        Zone::Sud => 40.63,
        Zone::Sici => 38.12,
        Zone::Sard => 39.22,
    }
}

/// Target annual net yield, kWh per kWp.
fn annual_yield(zone: Zone) -> f64 {
    match zone {
        Zone::Nord => 1250.0,
        Zone::Cnord => 1350.0,
        Zone::Csud => 1400.0,
        Zone::Cala => 1500.0,
        Zone::Sud => 1480.0,
        Zone::Sici => 1550.0,
        Zone::Sard => 1520.0,
    }
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// Synthetic hourly PV yield for the zone's reference city, kWh/kWp.
pub fn yield_profile(zone: Zone) -> HourlyProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(YIELD_SEED ^ zone as u64);
    let phi = latitude(zone).to_radians();
    let mut raw = Vec::with_capacity(HOURS_PER_YEAR);
    for day in 0..365 {
        let decl = (23.45f64).to_radians() * (2.0 * std::f64::consts::PI * (284.0 + day as f64 + 1.0) / 365.0).sin();
        let seasonal = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (day as f64 + 10.0) / 365.0).cos();
        let clearness = (rng.gen_range(0.25..1.0f64) * (0.75 + 0.25 * seasonal)).min(1.0);
        for hour in 0..24 {
            // local clock runs roughly half an hour ahead of solar time
            let omega = (15.0 * (hour as f64 + 0.5 - 12.5)).to_radians();
            let cosz = phi.sin() * decl.sin() + phi.cos() * decl.cos() * omega.cos();
            raw.push(clearness * cosz.max(0.0).powf(1.2));
        }
    }
    let total: f64 = raw.iter().sum();
    let scale = annual_yield(zone) / total;
    let values = raw.into_iter().map(|v| round4(v * scale)).collect();
    HourlyProfile::new(ProfileKind::YieldPerKwp, values).expect("synthetic yield is valid")
}

/// Synthetic base load of a prosumer category, kWh per hour. Slot 0 is a
/// Monday. Residential load covers cooling only, with a small standby draw.
pub fn load_profile(category: Category) -> Option<HourlyProfile> {
    if !category.has_load() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(LOAD_SEED ^ category as u64);
    let mut values = Vec::with_capacity(HOURS_PER_YEAR);
    for day in 0..365usize {
        let weekday = day % 7;
        let workday = weekday < 5;
        let summer = (day as f64 - 200.0).abs() < 60.0;
        let heat = (-((day as f64 - 205.0) / 35.0).powi(2)).exp();
        for hour in 0..24usize {
            let h = hour as f64;
            let v = match category {
                Category::Public => {
                    let term = !(160..250).contains(&day);
                    if workday && term && (8..16).contains(&hour) {
                        12.0
                    } else if workday && (7..18).contains(&hour) {
                        3.0
                    } else {
                        0.8
                    }
                }
                Category::Residential => {
                    let shape = (-((h - 17.0) / 4.0).powi(2)).exp();
                    0.05 + 2.5 * heat * shape
                }
                Category::Sme => {
                    let open = weekday < 6 && (8..20).contains(&hour);
                    let base = if open { 9.0 } else { 2.5 };
                    if summer && open {
                        base * 1.3
                    } else {
                        base
                    }
                }
                Category::Npo => {
                    if workday && (8..18).contains(&hour) {
                        6.0
                    } else {
                        0.9
                    }
                }
                Category::Standalone => unreachable!(),
            };
            values.push(round4(v * rng.gen_range(0.9..1.1)));
        }
    }
    Some(HourlyProfile::new(ProfileKind::Load, values).expect("synthetic load is valid"))
}

/// Zones covered by the synthetic ledger.
pub const LEDGER_ZONES: [Zone; 2] = [Zone::Nord, Zone::Csud];

/// The fourteen market days of the synthetic ledger: one winter and one
/// spring week of 2024.
pub fn ledger_dates() -> Vec<NaiveDate> {
    let week = |m: u32, d0: u32| (0..7u32).map(move |k| NaiveDate::from_ymd_opt(2024, m, d0 + k).expect("valid date"));
    week(1, 8).chain(week(4, 8)).collect()
}

/// The zone-hour whose demand bids are withheld, to exercise exclusion of
/// hours without a usable curve.
pub fn degenerate_hour() -> (Zone, NaiveDate, u8) {
    (Zone::Csud, NaiveDate::from_ymd_opt(2024, 4, 14).expect("valid date"), 3)
}

/// Mean hourly demand level, MWh.
fn zone_level(zone: Zone) -> f64 {
    match zone {
        Zone::Nord => 17_000.0,
        _ => 6_000.0,
    }
}

const BIDS_PER_SIDE: usize = 120;
const ELASTIC_PRICE_MAX: f64 = 300.0;

fn fmt_mwh(wh: u64) -> String {
    // quantities are kept to the kWh, i.e. three decimals of MWh
    let kwh = wh / 1000;
    format!("{}.{:03}", kwh / 1000, kwh % 1000)
}

/// Writes the synthetic ledger in the canonical schema.
///
/// Per zone-hour: price-taking demand of 70% of the load level, 120
/// elastic demand bids worth 80% of it priced up to 300 EUR/MWh, a
/// zero-price supply block of 30% and 120 priced offers worth 100%. The two
/// elastic sides have comparable slopes around the crossing. A handful of
/// rows carry the defects the reader must survive.
pub fn write_ledger<W: Write>(mut w: W) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(LEDGER_SEED);
    writeln!(w, "date,hour,zone,side,price_eur_mwh,quantity_mwh,status")?;
    let (dz, dd, dh) = degenerate_hour();
    let mut line = String::new();
    for zone in LEDGER_ZONES {
        for date in ledger_dates() {
            let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
            let season = if date.month() == 1 { 1.05 } else { 0.92 };
            for hour in 1..=24u8 {
                let h = f64::from(hour);
                let daily =
                    0.8 + 0.25 * (-((h - 11.0) / 4.0).powi(2)).exp() + 0.15 * (-((h - 19.0) / 2.5).powi(2)).exp();
                let level = zone_level(zone) * daily * season * if weekend { 0.85 } else { 1.0 };
                let kwh = |x: f64| ((x * 1000.0).round() as u64) * 1000;

                let mut supply: Vec<(f64, u64)> = Vec::new();
                let zero: Vec<f64> = (0..10).map(|_| rng.gen_range(0.5..1.0)).collect();
                for q in apportion(kwh(0.3 * level), &zero) {
                    supply.push((0.0, q));
                }
                let sw: Vec<f64> = (0..BIDS_PER_SIDE).map(|_| rng.gen_range(0.3..1.0)).collect();
                for q in apportion(kwh(level), &sw) {
                    let p = (rng.gen_range(5.0..ELASTIC_PRICE_MAX) * 100.0f64).round() / 100.0;
                    supply.push((p, q));
                }

                let mut demand: Vec<(Option<f64>, u64)> = Vec::new();
                let pt: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..1.0)).collect();
                for q in apportion(kwh(0.7 * level), &pt) {
                    demand.push((None, q));
                }
                let dw: Vec<f64> = (0..BIDS_PER_SIDE).map(|_| rng.gen_range(0.3..1.0)).collect();
                for q in apportion(kwh(0.8 * level), &dw) {
                    let p = (rng.gen_range(0.0..ELASTIC_PRICE_MAX) * 100.0f64).round() / 100.0;
                    demand.push((Some(p), q));
                }

                let to_bids = |v: &mut dyn Iterator<Item = (f64, u64)>| -> Vec<Bid> {
                    v.map(|(p, q)| Bid::new(p, Volume::from_wh(q as i64))).collect()
                };
                let s_curve = StepCurve::from_bids(Side::Supply, &to_bids(&mut supply.iter().copied()))
                    .expect("synthetic supply is valid");
                let d_curve = StepCurve::from_bids(
                    Side::Demand,
                    &to_bids(
                        &mut demand
                            .iter()
                            .map(|(p, q)| (p.unwrap_or(crate::market::DEFAULT_PRICE_CAP), *q)),
                    ),
                )
                .expect("synthetic demand is valid");
                let clearing = clear(&s_curve, &d_curve).price.unwrap_or(0.0);

                for (p, q) in &supply {
                    let status = if *p <= clearing { "ACC" } else { "REJ" };
                    line.clear();
                    let _ = write!(
                        line,
                        "{date},{hour},{},supply,{p},{},{status}",
                        zone.code(),
                        fmt_mwh(*q)
                    );
                    writeln!(w, "{line}")?;
                }
                if (zone, date, hour) == (dz, dd, dh) {
                    continue;
                }
                for (p, q) in &demand {
                    let accepted = p.is_none_or(|p| p >= clearing);
                    let status = if accepted { "ACC" } else { "REJ" };
                    let price = p.map(|p| p.to_string()).unwrap_or_default();
                    writeln!(
                        w,
                        "{date},{hour},{},demand,{price},{},{status}",
                        zone.code(),
                        fmt_mwh(*q)
                    )?;
                }
            }
            // one defect of each kind per zone-day
            writeln!(w, "{date},12,{},supply,n/a,25.000,ACC", zone.code())?;
            writeln!(w, "{date},13,{},demand,40,0.000,REJ", zone.code())?;
            writeln!(w, "{date},14,{},supply,12.5,50.000,INC", zone.code())?;
        }
    }
    Ok(())
}

/// Scenario definitions used by fixture runs: a hand-sized fleet on top of
/// the built-in trajectories.
pub const FIXTURE_SCENARIOS_TOML: &str = r#"[[scenario]]
code = "fixture.hand"
name = "Hand-sized fixture fleet"
year = 2024
total_capacity_gw = 0.6
includes_standalone = true
policy_target_achieving = false

[scenario.sc_targets]
Public = 0.5
Residential = 0.5
SME = 0.5
NPO = 0.5
"#;

/// Scenarios cleared in fixture runs.
pub const FIXTURE_RUN_SCENARIOS: [&str; 3] = ["fixture.hand", "sc45.2027", "sc55.2027"];

/// Locations of the written fixture inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixturePaths {
    pub registry: PathBuf,
    pub yield_dir: PathBuf,
    pub load_dir: PathBuf,
    pub ledger: PathBuf,
    pub scenarios: PathBuf,
}

pub fn yield_file_name(zone: Zone) -> String {
    format!("yield_{}.csv", zone.code())
}

pub fn load_file_name(category: Category) -> String {
    format!("load_{}.csv", category.slug())
}

fn write_hourly(path: &Path, column: &str, values: &[f64]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "hour_index,{column}")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{},{v}", i + 1)?;
    }
    w.flush()
}

/// Writes every fixture input below `dir`.
pub fn write_inputs(dir: &Path) -> std::io::Result<FixturePaths> {
    let yield_dir = dir.join("yields");
    let load_dir = dir.join("loads");
    std::fs::create_dir_all(&yield_dir)?;
    std::fs::create_dir_all(&load_dir)?;
    let registry = dir.join("registry.csv");
    std::fs::write(&registry, registry_csv())?;
    for zone in Zone::ALL {
        write_hourly(
            &yield_dir.join(yield_file_name(zone)),
            "yield_kwh_per_kwp",
            yield_profile(zone).values(),
        )?;
    }
    for category in Category::PROSUMERS {
        if let Some(load) = load_profile(category) {
            write_hourly(&load_dir.join(load_file_name(category)), "load_kwh", load.values())?;
        }
    }
    let ledger = dir.join("ledger.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&ledger)?);
    write_ledger(&mut w)?;
    w.flush()?;
    let scenarios = dir.join("scenarios.toml");
    std::fs::write(&scenarios, FIXTURE_SCENARIOS_TOML)?;
    Ok(FixturePaths {
        registry,
        yield_dir,
        load_dir,
        ledger,
        scenarios,
    })
}
