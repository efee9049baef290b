//! Shared test helpers: a brute-force clearing oracle working on raw bids
//! and an independent re-derivation of the impact tables.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use recmerit::calendar::HourKey;
use recmerit::market::{parse_bid_ledger, BidRecord, LedgerOptions, Side};
use recmerit::pipeline::{execute, fixture_config, Command, RunConfig, RunManifest};
use recmerit::projection::{read_zonal_series, ZonalSeries};
use recmerit::Zone;

/// Raw bid as (price, quantity in Wh).
pub type RawBid = (f64, i64);

/// Scans every supply price: the traded volume is the largest
/// `min(S(p), D(p))` and the price the lowest supply price achieving it.
pub fn oracle_clear(supply: &[RawBid], demand: &[RawBid]) -> (Option<f64>, i64) {
    let mut prices: Vec<f64> = supply.iter().map(|b| b.0).collect();
    prices.sort_by(f64::total_cmp);
    prices.dedup();
    let mut best: (Option<f64>, i64) = (None, 0);
    for p in prices {
        let s: i64 = supply.iter().filter(|b| b.0 <= p).map(|b| b.1).sum();
        let d: i64 = demand.iter().filter(|b| b.0 >= p).map(|b| b.1).sum();
        let q = s.min(d);
        if q > best.1 {
            best = (Some(p), q);
        }
    }
    best
}

/// Removes `delta` Wh from the cheapest supply bids; `None` when the
/// whole curve would be consumed.
pub fn oracle_shift_supply(supply: &[RawBid], delta: i64) -> Option<Vec<RawBid>> {
    let total: i64 = supply.iter().map(|b| b.1).sum();
    if delta >= total {
        return None;
    }
    let mut sorted = supply.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut left = delta;
    let mut out = Vec::new();
    for (p, q) in sorted {
        let take = left.min(q);
        left -= take;
        if q - take > 0 {
            out.push((p, q - take));
        }
    }
    Some(out)
}

/// Adds `delta` Wh of price-taking demand at the cap.
pub fn oracle_shift_demand(demand: &[RawBid], delta: i64, cap: f64) -> Vec<RawBid> {
    let mut out = demand.to_vec();
    if delta > 0 {
        out.push((cap, delta));
    }
    out
}

pub fn fmt_wh(wh: i64) -> String {
    assert!(wh >= 0);
    format!("{}.{:06}", wh / 1_000_000, wh % 1_000_000)
}

fn mwh_to_wh(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One cleared hour as the oracle sees it.
pub struct OracleHour {
    pub key: HourKey,
    pub q_actual: i64,
    pub q_synt: i64,
    pub p_actual: Option<f64>,
    pub p_synt: Option<f64>,
}

/// Clears every hour of `zone` found in `records` under the REC series.
/// Hours without bids on one side, or whose supply would be exhausted,
/// are left out.
pub fn oracle_hours(records: &[BidRecord], zone: Zone, series: &ZonalSeries, cap: f64) -> Vec<OracleHour> {
    let mut keys: Vec<HourKey> = records.iter().filter(|r| r.zone == zone).map(|r| r.key).collect();
    keys.sort();
    keys.dedup();
    let mut out = Vec::new();
    for key in keys {
        let bids = |side: Side| -> Vec<RawBid> {
            records
                .iter()
                .filter(|r| r.zone == zone && r.key == key && r.side == side)
                .map(|r| (r.price, r.quantity.wh()))
                .collect()
        };
        let supply = bids(Side::Supply);
        let demand = bids(Side::Demand);
        if supply.is_empty() || demand.is_empty() {
            continue;
        }
        let t = key.profile_index();
        let Some(synt_supply) = oracle_shift_supply(&supply, mwh_to_wh(series.export_mwh[t])) else {
            continue;
        };
        let synt_demand = oracle_shift_demand(&demand, mwh_to_wh(series.self_mwh[t]), cap);
        let (p_actual, q_actual) = oracle_clear(&supply, &demand);
        let (p_synt, q_synt) = oracle_clear(&synt_supply, &synt_demand);
        out.push(OracleHour {
            key,
            q_actual,
            q_synt,
            p_actual,
            p_synt,
        });
    }
    out
}

/// Relative difference against the synthetic quantity, in percent.
pub fn oracle_rel_diff(h: &OracleHour) -> Option<f64> {
    (h.q_synt > 0).then(|| 100.0 * ((h.q_actual - h.q_synt) as f64 / 1e6) / (h.q_synt as f64 / 1e6))
}

/// Centered moving average over consecutive entries, applied to positive
/// entries whose whole window is defined; everything else is copied.
pub fn oracle_smooth(values: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let v = values[i]?;
            if v <= 0.0 || i < half || i + half >= values.len() {
                return Some(v);
            }
            let mut sum = 0.0;
            for w in &values[i - half..=i + half] {
                match w {
                    Some(x) => sum += x,
                    None => return Some(v),
                }
            }
            Some(sum / window as f64)
        })
        .collect()
}

/// The impact table the pipeline is expected to write.
pub fn oracle_impact_csv(hours: &[OracleHour], window: usize) -> String {
    let raw: Vec<Option<f64>> = hours.iter().map(oracle_rel_diff).collect();
    let smoothed = oracle_smooth(&raw, window);
    let mut s = String::from("date,hour,q_actual,q_synt,p_actual,p_synt,rel_diff_pct,rel_diff_smoothed_pct\n");
    for ((h, r), sm) in hours.iter().zip(&raw).zip(&smoothed) {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            h.key.date,
            h.key.hour,
            fmt_wh(h.q_actual),
            fmt_wh(h.q_synt),
            opt(h.p_actual),
            opt(h.p_synt),
            opt(*r),
            opt(*sm)
        )
        .unwrap();
    }
    s
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn blessing() -> bool {
    std::env::var("RECMERIT_BLESS").is_ok_and(|v| v == "1")
}

/// Writes the fixture inputs below `root/in` and runs every stage into
/// `root/out`.
pub fn run_fixture(root: &Path) -> (RunConfig, RunManifest) {
    let cfg = fixture_config(&root.join("in"), &root.join("out")).expect("fixture inputs");
    let manifest = execute(Command::RunAll, &cfg).expect("fixture run");
    (cfg, manifest)
}

/// Compares every impact file of a finished fixture run with the golden
/// copy, and the golden copy with the oracle's recomputation. With
/// `RECMERIT_BLESS=1` the golden files are rewritten from the oracle.
pub fn check_against_oracle(cfg: &RunConfig) -> Result<usize, String> {
    let opts = LedgerOptions {
        price_cap: cfg.market.price_cap,
        mode: cfg.market.bids,
    };
    let mut records = Vec::new();
    for path in &cfg.paths.bids {
        records.extend(parse_bid_ledger(path, opts).map_err(|e| e.to_string())?.0);
    }
    let zones: Vec<Zone> = recmerit::fixture::LEDGER_ZONES.to_vec();
    let out = &cfg.paths.output;
    let mut checked = 0;
    for code in &cfg.run.scenarios {
        for &zone in &zones {
            let series = read_zonal_series(out.join(format!("series/{code}/{}.csv", zone.code())), zone)
                .map_err(|e| e.to_string())?;
            let hours = oracle_hours(&records, zone, &series, cfg.market.price_cap);
            let expected = oracle_impact_csv(&hours, cfg.analysis.window);
            let golden = golden_dir().join(code).join(format!("{}.csv", zone.code()));
            if blessing() {
                std::fs::create_dir_all(golden.parent().unwrap()).map_err(|e| e.to_string())?;
                std::fs::write(&golden, &expected).map_err(|e| e.to_string())?;
            }
            let stored = std::fs::read_to_string(&golden)
                .map_err(|e| format!("{}: {e} (regenerate with RECMERIT_BLESS=1)", golden.display()))?;
            if stored != expected {
                return Err(format!("{} no longer matches the oracle", golden.display()));
            }
            let produced = std::fs::read_to_string(out.join(format!("impact/{code}/{}.csv", zone.code())))
                .map_err(|e| e.to_string())?;
            if produced != stored {
                let line = produced
                    .lines()
                    .zip(stored.lines())
                    .position(|(a, b)| a != b)
                    .map(|i| i + 1)
                    .unwrap_or(0);
                return Err(format!(
                    "impact/{code}/{} differs from golden at line {line}",
                    zone.code()
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
