//! End-to-end orchestration: derive -> simulate -> clear, with every
//! intermediate persisted as a plain CSV file and a JSON manifest per run.
//!
//! Output layout below `paths.output`:
//!
//! ```text
//! params/<statistic>.csv                  category,zone,value,sample_size
//! profiles/sc<NN>_<ZONE>/<category>.csv   representative prosumer series
//! profiles/summary.csv
//! series/<scenario>/<ZONE>.csv            hour_index,export_mwh,self_mwh
//! series/<scenario>/allocation.csv
//! series/summary.csv
//! market/<scenario>/<ZONE>.csv            equilibria
//! impact/<scenario>/<ZONE>.csv
//! monthly/<scenario>/<ZONE>.csv
//! hourly/<scenario>/<ZONE>.csv
//! skipped_hours.csv
//! manifests/<command>.json
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error (outputs
//! that could be produced are still written).

mod config;

pub use config::{
    AnalysisSection, AtlasSection, MarketSection, Overrides, PathsConfig, ProfilesSection, ProjectionSection,
    RunConfig, RunSection, ENV_PREFIX,
};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::Datelike;
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    monthly_summary, write_equilibria, write_hourly_profiles, write_impact, write_monthly_summary, EquilibriumRow,
    ImpactSeries,
};
use crate::atlas::{
    bess_share_pct, derive_params, load_rec_registry, mean_self_consumption, most_common_building_type, zonal_shares,
    Stat, ZonalShares,
};
use crate::calendar::HourKey;
use crate::domain::{Category, Zone};
use crate::fixture;
use crate::market::{
    counterfactual_clear, index_by_hour, parse_bid_ledger, ClearingOptions, HourBids, LedgerOptions, LedgerStats,
    ShiftAmounts,
};
use crate::profiles::{
    build_prosumer, derate, read_hourly_file, HourlyProfile, ProfileKind, ProsumerEnergy, TuneOptions, HOURS_PER_YEAR,
};
use crate::projection::{
    aggregate_zone, allocate, project_series, read_zonal_series, AllocationOptions, Scenario, ZonalSeries,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) | PipelineError::Io { .. } => 3,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Data(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Derive,
    Simulate,
    Clear,
    RunAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Derive => "derive",
            Command::Simulate => "simulate",
            Command::Clear => "clear",
            Command::RunAll => "run-all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub wall_seconds: f64,
    pub counts: BTreeMap<String, u64>,
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    /// SHA-256 of every input file read.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file, keyed by path relative to the output
    /// directory.
    pub outputs: BTreeMap<String, String>,
    pub stages: Vec<StageReport>,
    /// Per-cell, per-zone or per-scenario problems that did not stop the run.
    pub issues: Vec<String>,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        if self.issues.is_empty() {
            0
        } else {
            3
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

struct Run<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    manifest: RunManifest,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, command: Command) -> Self {
        Run {
            cfg,
            out: cfg.paths.output.clone(),
            manifest: RunManifest {
                command: command.name().into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config: cfg.clone(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                stages: Vec::new(),
                issues: Vec::new(),
            },
        }
    }

    fn input(&mut self, path: &Path) -> Result<(), PipelineError> {
        let d = digest_file(path)?;
        self.manifest.inputs.insert(path.display().to_string(), d);
        Ok(())
    }

    /// Renders a file in memory, writes it and records its digest.
    fn write(
        &mut self,
        rel: &str,
        render: impl FnOnce(&mut Vec<u8>) -> Result<(), PipelineError>,
    ) -> Result<(), PipelineError> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        let path = self.out.join(rel);
        let io = |source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(&path, &buf).map_err(io)?;
        self.manifest.outputs.insert(rel.to_string(), sha256_hex(&buf));
        Ok(())
    }

    fn issue(&mut self, msg: String) {
        warn!("{msg}");
        self.manifest.issues.push(msg);
    }

    fn stage(&mut self, name: &str, started: Instant, counts: BTreeMap<String, u64>) {
        self.manifest.stages.push(StageReport {
            name: name.into(),
            wall_seconds: started.elapsed().as_secs_f64(),
            counts,
        });
    }

    fn finish(self) -> Result<RunManifest, PipelineError> {
        let rel = format!("manifests/{}.json", self.manifest.command);
        let json = serde_json::to_vec_pretty(&self.manifest).map_err(data_err)?;
        let path = self.out.join(&rel);
        let io = |source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(path.parent().unwrap_or(&self.out)).map_err(io)?;
        std::fs::write(&path, json).map_err(io)?;
        Ok(self.manifest)
    }
}

fn csv_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Data(format!("csv: {e}"))
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes a `category,zone,value,sample_size` table.
fn param_table(buf: &mut Vec<u8>, rows: &[(String, String, Option<f64>, usize)]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["category", "zone", "value", "sample_size"])
        .map_err(csv_err)?;
    for (c, z, v, n) in rows {
        w.write_record([c.as_str(), z.as_str(), &opt_num(*v), &n.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub const PARAM_FILES: [&str; 8] = [
    "params/avg_total_capacity.csv",
    "params/avg_units_per_rec.csv",
    "params/avg_unit_capacity.csv",
    "params/avg_capacity_share.csv",
    "params/zonal_shares.csv",
    "params/building_types.csv",
    "params/self_consumption.csv",
    "params/bess_share.csv",
];

fn stage_derive(run: &mut Run) -> Result<(), PipelineError> {
    let started = Instant::now();
    let cfg = run.cfg;
    cfg.validate_derive()?;
    let path = cfg.paths.registry.clone().expect("validated");
    run.input(&path)?;
    let all = load_rec_registry(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let records = cfg.atlas.status.apply(&all);
    let shares = zonal_shares(&records).map_err(data_err)?;
    let params = derive_params(&records, cfg.atlas.units_basis);

    let stat_rows = |pick: &dyn Fn(&crate::atlas::CategoryZoneParams) -> Stat| {
        params
            .iter()
            .map(|p| {
                let s = pick(p);
                (
                    p.category.name().to_string(),
                    p.zone.code().to_string(),
                    s.value,
                    s.sample_size,
                )
            })
            .collect::<Vec<_>>()
    };
    let totals = stat_rows(&|p| p.avg_total_capacity_kwp);
    let units = stat_rows(&|p| p.avg_units_per_rec);
    let unit_cap: Vec<_> = params
        .iter()
        .map(|p| {
            (
                p.category.name().to_string(),
                p.zone.code().to_string(),
                p.avg_unit_capacity_kwp,
                p.avg_total_capacity_kwp.sample_size,
            )
        })
        .collect();
    let cap_share = stat_rows(&|p| p.avg_capacity_share_pct);
    let zonal: Vec<_> = Zone::ALL
        .iter()
        .map(|z| {
            (
                "all".to_string(),
                z.code().to_string(),
                Some(shares.share(*z)),
                shares.counts.get(z).copied().unwrap_or(0),
            )
        })
        .collect();
    let buildings: Vec<_> = Category::PROSUMERS
        .iter()
        .map(|c| {
            let labelled = records.iter().filter(|r| r.building_types.contains_key(c)).count();
            let mode = most_common_building_type(&records, *c).ok();
            (c.name().to_string(), "ALL".to_string(), mode, labelled)
        })
        .collect();
    let sc = mean_self_consumption(&records);
    let bess = bess_share_pct(&records);

    run.write(PARAM_FILES[0], |b| param_table(b, &totals))?;
    run.write(PARAM_FILES[1], |b| param_table(b, &units))?;
    run.write(PARAM_FILES[2], |b| param_table(b, &unit_cap))?;
    run.write(PARAM_FILES[3], |b| param_table(b, &cap_share))?;
    run.write(PARAM_FILES[4], |b| param_table(b, &zonal))?;
    run.write(PARAM_FILES[5], |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["category", "zone", "value", "sample_size"])
            .map_err(csv_err)?;
        for (c, z, v, n) in &buildings {
            w.write_record([c.as_str(), z.as_str(), v.as_deref().unwrap_or(""), &n.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(csv_err)
    })?;
    let country = |s: Stat| vec![("all".to_string(), "ALL".to_string(), s.value, s.sample_size)];
    run.write(PARAM_FILES[6], |b| param_table(b, &country(sc)))?;
    run.write(PARAM_FILES[7], |b| param_table(b, &country(bess)))?;

    // Total capacity of the filtered fleet, a useful sanity figure.
    let fleet_kwp: f64 = records.iter().filter_map(|r| r.pv_capacity_kwp).sum();
    info!(
        "derive: {} RECs ({} after status filter), {:.3} kWp, NORD share {:.2}%",
        all.len(),
        records.len(),
        fleet_kwp,
        shares.share(Zone::Nord)
    );
    let counts = BTreeMap::from([
        ("registry_rows".to_string(), all.len() as u64),
        ("records_used".to_string(), records.len() as u64),
    ]);
    run.stage("derive", started, counts);
    Ok(())
}

type ParamMap = BTreeMap<(Category, Zone), (Option<f64>, usize)>;

fn read_param_table(path: &Path) -> Result<ParamMap, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::Config(format!(
            "parameter table {} is missing; run `derive` first",
            path.display()
        )));
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let bad = |m: String| data_err(format!("{} line {}: {m}", path.display(), i + 2));
        let row = row.map_err(|e| bad(e.to_string()))?;
        let category: Category = row
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e: crate::domain::UnknownCategory| bad(e.to_string()))?;
        let zone: Zone = row
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e: crate::domain::UnknownZone| bad(e.to_string()))?;
        let value = match row.get(2).unwrap_or("") {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(format!("bad value `{s}`")))?),
        };
        let n = row
            .get(3)
            .unwrap_or("0")
            .parse::<usize>()
            .map_err(|_| bad("bad sample size".into()))?;
        out.insert((category, zone), (value, n));
    }
    Ok(out)
}

fn read_zonal_share_table(path: &Path) -> Result<ZonalShares, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::Config(format!(
            "parameter table {} is missing; run `derive` first",
            path.display()
        )));
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let mut shares = ZonalShares {
        shares_pct: BTreeMap::new(),
        counts: BTreeMap::new(),
        total_recs: 0,
    };
    for row in rdr.records() {
        let row = row.map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let zone: Zone = row.get(1).unwrap_or("").parse().map_err(data_err)?;
        let v: f64 = row
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| data_err(format!("{}: bad share", path.display())))?;
        let n: usize = row
            .get(3)
            .unwrap_or("")
            .parse()
            .map_err(|_| data_err(format!("{}: bad count", path.display())))?;
        shares.shares_pct.insert(zone, v);
        shares.counts.insert(zone, n);
        shares.total_recs += n;
    }
    Ok(shares)
}

/// Directory label of a self-consumption level, e.g. `sc50`, `sc47.5`.
pub fn level_label(level: f64) -> String {
    let pct = (level * 1000.0).round() / 10.0;
    format!("sc{pct}")
}

fn level_key(level: f64) -> u64 {
    ((level * 1e6).round()) as u64
}

fn stage_simulate(run: &mut Run) -> Result<(), PipelineError> {
    let started = Instant::now();
    let cfg = run.cfg;
    cfg.validate_simulate()?;
    let scenarios = cfg.selected_scenarios()?;
    let params_dir = run.out.join("params");
    let unit_caps_raw = read_param_table(&params_dir.join("avg_unit_capacity.csv"))?;
    let shares_raw = read_param_table(&params_dir.join("avg_capacity_share.csv"))?;
    let zonal = read_zonal_share_table(&params_dir.join("zonal_shares.csv"))?;
    let unit_caps: BTreeMap<(Category, Zone), f64> = unit_caps_raw
        .iter()
        .filter_map(|(k, (v, _))| v.map(|v| (*k, v)))
        .collect();
    let cap_shares: BTreeMap<(Category, Zone), f64> =
        shares_raw.iter().filter_map(|(k, (v, _))| v.map(|v| (*k, v))).collect();

    let zones = cfg.simulation_zones();
    let yield_dir = cfg.paths.yield_dir.clone().expect("validated");
    let load_dir = cfg.paths.load_dir.clone().expect("validated");
    let mut yields: BTreeMap<Zone, HourlyProfile> = BTreeMap::new();
    for &zone in &zones {
        let path = yield_dir.join(fixture::yield_file_name(zone));
        run.input(&path)
            .map_err(|_| data_err(format!("missing yield file {}", path.display())))?;
        let y = read_hourly_file(&path, ProfileKind::YieldPerKwp, "yield_kwh_per_kwp").map_err(data_err)?;
        let y = if cfg.profiles.derate != 1.0 {
            derate(&y, cfg.profiles.derate).map_err(data_err)?
        } else {
            y
        };
        yields.insert(zone, y);
    }
    let mut loads: BTreeMap<Category, HourlyProfile> = BTreeMap::new();
    for category in Category::PROSUMERS {
        let path = load_dir.join(fixture::load_file_name(category));
        run.input(&path)
            .map_err(|_| data_err(format!("missing load file {}", path.display())))?;
        loads.insert(
            category,
            read_hourly_file(&path, ProfileKind::Load, "load_kwh").map_err(data_err)?,
        );
    }

    let mut levels: Vec<f64> = cfg.profiles.sc_levels.clone();
    for s in &scenarios {
        levels.extend(s.sc_targets.values().copied());
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup_by_key(|l| level_key(*l));

    let opts = TuneOptions {
        tolerance: cfg.profiles.tolerance,
        max_iterations: cfg.profiles.max_iterations,
    };

    // Representative prosumers: one per (level, zone, prosumer category)
    // plus one standalone plant per zone.
    #[derive(Clone, Copy)]
    struct Cell {
        level: Option<f64>,
        zone: Zone,
        category: Category,
        capacity: f64,
    }
    let mut cells = Vec::new();
    let mut missing = Vec::new();
    for &zone in &zones {
        for category in Category::ALL {
            let Some(&capacity) = unit_caps.get(&(category, zone)) else {
                missing.push((category, zone));
                continue;
            };
            if category.has_load() {
                for &l in &levels {
                    cells.push(Cell {
                        level: Some(l),
                        zone,
                        category,
                        capacity,
                    });
                }
            } else {
                cells.push(Cell {
                    level: None,
                    zone,
                    category,
                    capacity,
                });
            }
        }
    }
    let built: Vec<(Cell, Result<ProsumerEnergy, String>)> = cells
        .par_iter()
        .map(|c| {
            let r = build_prosumer(
                c.category,
                c.zone,
                &yields[&c.zone],
                c.level.map(|_| &loads[&c.category]),
                c.capacity,
                c.level,
                opts,
            )
            .map_err(|e| e.to_string());
            (*c, r)
        })
        .collect();

    let mut energies: BTreeMap<(Option<u64>, Category, Zone), ProsumerEnergy> = BTreeMap::new();
    let mut summary = Vec::new();
    let mut failed = 0u64;
    for (c, r) in built {
        let level_txt = c.level.map(|l| l.to_string()).unwrap_or_default();
        match r {
            Ok(e) => {
                summary.push(format!(
                    "{level_txt},{},{},{},{},{},ok",
                    c.zone.code(),
                    c.category.name(),
                    c.capacity,
                    opt_num(e.load_scale),
                    e.sc_ratio
                ));
                energies.insert((c.level.map(level_key), c.category, c.zone), e);
            }
            Err(msg) => {
                failed += 1;
                let label = c.level.map(level_label).unwrap_or_else(|| "standalone".into());
                run.issue(format!(
                    "profile {label}/{}/{}: {msg}",
                    c.zone.code(),
                    c.category.name()
                ));
                summary.push(format!(
                    "{level_txt},{},{},{},,,failed",
                    c.zone.code(),
                    c.category.name(),
                    c.capacity
                ));
            }
        }
    }
    for (category, zone) in &missing {
        summary.push(format!(",{},{},,,,no-unit-capacity", zone.code(), category.name()));
    }

    let mut datasets = 0u64;
    for &l in &levels {
        for &zone in &zones {
            datasets += 1;
            for category in Category::ALL {
                let key = (category.has_load().then(|| level_key(l)), category, zone);
                if let Some(e) = energies.get(&key) {
                    let rel = format!("profiles/{}_{}/{}.csv", level_label(l), zone.code(), category.slug());
                    run.write(&rel, |b| e.write_csv(b).map_err(data_err))?;
                }
            }
        }
    }
    run.write("profiles/summary.csv", |b| {
        writeln!(b, "sc_level,zone,category,capacity_kwp,load_scale,sc_ratio,status").map_err(data_err)?;
        for line in &summary {
            writeln!(b, "{line}").map_err(data_err)?;
        }
        Ok(())
    })?;

    let mut series_rows = Vec::new();
    let mut scenario_failures = 0u64;
    for scenario in &scenarios {
        match project_scenario(run, scenario, &zonal, &cap_shares, &unit_caps, &energies, &zones) {
            Ok(rows) => series_rows.extend(rows),
            Err(msg) => {
                scenario_failures += 1;
                run.issue(format!("scenario {}: {msg}", scenario.code));
            }
        }
    }
    run.write("series/summary.csv", |b| {
        writeln!(b, "scenario,zone,export_mwh,self_mwh,sc_ratio").map_err(data_err)?;
        for line in &series_rows {
            writeln!(b, "{line}").map_err(data_err)?;
        }
        Ok(())
    })?;

    let counts = BTreeMap::from([
        ("profile_cells".to_string(), cells.len() as u64),
        ("profile_failures".to_string(), failed),
        ("datasets".to_string(), datasets),
        ("scenarios".to_string(), scenarios.len() as u64),
        ("scenario_failures".to_string(), scenario_failures),
    ]);
    run.stage("simulate", started, counts);
    Ok(())
}

fn project_scenario(
    run: &mut Run,
    scenario: &Scenario,
    zonal: &ZonalShares,
    cap_shares: &BTreeMap<(Category, Zone), f64>,
    unit_caps: &BTreeMap<(Category, Zone), f64>,
    energies: &BTreeMap<(Option<u64>, Category, Zone), ProsumerEnergy>,
    zones: &[Zone],
) -> Result<Vec<String>, String> {
    let opts = AllocationOptions {
        renormalize: run.cfg.projection.renormalize,
    };
    let allocation = allocate(scenario, zonal, cap_shares, unit_caps, opts).map_err(|e| e.to_string())?;
    let mut selected: BTreeMap<(Category, Zone), ProsumerEnergy> = BTreeMap::new();
    for &(category, zone) in allocation.cells.keys() {
        let level = scenario.sc_target(category).map(level_key);
        if let Some(e) = energies.get(&(level, category, zone)) {
            selected.insert((category, zone), e.clone());
        }
    }
    let zone_set: BTreeSet<Zone> = zones.iter().copied().collect();
    let allocation_zones = crate::projection::FleetAllocation {
        scenario_code: allocation.scenario_code.clone(),
        cells: allocation
            .cells
            .iter()
            .filter(|((_, z), _)| zone_set.contains(z))
            .map(|(k, v)| (*k, *v))
            .collect(),
        share_shortfall_pct: allocation.share_shortfall_pct.clone(),
    };
    let series = project_series(&allocation_zones, &selected).map_err(|e| e.to_string())?;

    let code = &scenario.code;
    let mut rows = Vec::new();
    let write_err = |e: PipelineError| e.to_string();
    run.write(&format!("series/{code}/allocation.csv"), |b| {
        writeln!(b, "category,zone,capacity_share_pct,allocated_capacity_kwp,plant_count").map_err(data_err)?;
        for ((c, z), cell) in &allocation_zones.cells {
            writeln!(
                b,
                "{},{},{},{},{}",
                c.name(),
                z.code(),
                cell.capacity_share_pct,
                cell.allocated_capacity_kwp,
                cell.plant_count
            )
            .map_err(data_err)?;
        }
        Ok(())
    })
    .map_err(write_err)?;
    for &zone in zones {
        let z = aggregate_zone(&series, zone).map_err(|e| e.to_string())?;
        run.write(&format!("series/{code}/{}.csv", zone.code()), |b| {
            z.write_csv(b).map_err(data_err)
        })
        .map_err(write_err)?;
        let e: f64 = z.export_mwh.iter().sum();
        let s: f64 = z.self_mwh.iter().sum();
        rows.push(format!("{code},{},{e},{s},{}", zone.code(), opt_num(z.sc_ratio())));
    }
    Ok(rows)
}

/// Why a zone-hour produced no equilibrium.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedHour {
    pub scenario: String,
    pub zone: Zone,
    pub key: HourKey,
    pub reason: String,
}

/// Clears every zone-hour of one zone under the given REC series. Results
/// come back in key order whatever the evaluation order.
pub fn clear_zone_hours(
    hours: &[(HourKey, &HourBids)],
    series: &ZonalSeries,
    opts: ClearingOptions,
) -> Vec<Result<EquilibriumRow, (HourKey, String)>> {
    hours
        .par_iter()
        .map(|(key, bids)| {
            let fail = |m: String| (*key, m);
            let (supply, demand) = bids.curves().map_err(|e| fail(e.to_string()))?;
            let t = key.profile_index();
            let shifts =
                ShiftAmounts::from_mwh(series.self_mwh[t], series.export_mwh[t]).map_err(|e| fail(e.to_string()))?;
            let outcome = counterfactual_clear(&supply, &demand, shifts, opts).map_err(|e| fail(e.to_string()))?;
            Ok(EquilibriumRow {
                key: *key,
                outcome,
                shifts,
            })
        })
        .collect()
}

fn stage_clear(run: &mut Run) -> Result<(), PipelineError> {
    let started = Instant::now();
    let cfg = run.cfg;
    cfg.validate_clear()?;
    let scenarios = cfg.selected_scenarios()?;
    let ledger_opts = LedgerOptions {
        price_cap: cfg.market.price_cap,
        mode: cfg.market.bids,
    };
    let mut records = Vec::new();
    let mut stats = LedgerStats::default();
    for path in &cfg.paths.bids {
        run.input(path)?;
        let (recs, s) = parse_bid_ledger(path, ledger_opts).map_err(data_err)?;
        if s.rows == 0 {
            run.issue(format!("bid ledger {} has no rows", path.display()));
        }
        records.extend(recs);
        stats.rows += s.rows;
        stats.kept += s.kept;
        stats.skipped_malformed += s.skipped_malformed;
        stats.skipped_rejected_status += s.skipped_rejected_status;
        stats.skipped_zero_quantity += s.skipped_zero_quantity;
        stats.skipped_not_accepted += s.skipped_not_accepted;
    }
    let before = records.len();
    records.retain(|r| r.key.date.year() == cfg.run.year);
    let out_of_year = before - records.len();
    if !cfg.run.zones.is_empty() {
        records.retain(|r| cfg.run.zones.contains(&r.zone));
    }
    let index = index_by_hour(records);
    let zones: Vec<Zone> = if cfg.run.zones.is_empty() {
        index
            .keys()
            .map(|(z, _)| *z)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        cfg.simulation_zones()
    };

    let opts = ClearingOptions {
        price_cap: cfg.market.price_cap,
        supply_shift: cfg.market.supply_shift,
    };
    let smoothing = cfg.analysis.smoothing();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;

    let mut skipped: Vec<SkippedHour> = Vec::new();
    let mut cleared = 0u64;
    for scenario in &scenarios {
        let code = &scenario.code;
        for &zone in &zones {
            let hours: Vec<(HourKey, &HourBids)> = index
                .range((zone, HourKey::new(chrono::NaiveDate::MIN, 0))..)
                .take_while(|((z, _), _)| *z == zone)
                .map(|((_, k), b)| (*k, b))
                .collect();
            if hours.is_empty() {
                run.issue(format!(
                    "{code}/{}: no ledger hours for this zone; zone excluded",
                    zone.code()
                ));
                continue;
            }
            let series_path = run.out.join(format!("series/{code}/{}.csv", zone.code()));
            if !series_path.exists() {
                run.issue(format!(
                    "{code}/{}: REC series {} missing; run `simulate` first",
                    zone.code(),
                    series_path.display()
                ));
                continue;
            }
            let series = read_zonal_series(&series_path, zone).map_err(data_err)?;
            if series.export_mwh.len() != HOURS_PER_YEAR {
                run.issue(format!(
                    "{code}/{}: REC series has {} hours, expected {HOURS_PER_YEAR}",
                    zone.code(),
                    series.export_mwh.len()
                ));
                continue;
            }
            let results = pool.install(|| clear_zone_hours(&hours, &series, opts));
            let mut rows = Vec::with_capacity(results.len());
            for r in results {
                match r {
                    Ok(row) => rows.push(row),
                    Err((key, reason)) => skipped.push(SkippedHour {
                        scenario: code.clone(),
                        zone,
                        key,
                        reason,
                    }),
                }
            }
            if rows.is_empty() {
                run.issue(format!("{code}/{}: no valid hours; zone excluded", zone.code()));
                continue;
            }
            cleared += rows.len() as u64;
            let impact =
                ImpactSeries::build(zone, code, &rows, cfg.analysis.denominator, &smoothing).map_err(data_err)?;
            let z = zone.code();
            run.write(&format!("market/{code}/{z}.csv"), |b| {
                write_equilibria(b, &rows).map_err(data_err)
            })?;
            run.write(&format!("impact/{code}/{z}.csv"), |b| {
                write_impact(b, &impact).map_err(data_err)
            })?;
            run.write(&format!("monthly/{code}/{z}.csv"), |b| {
                write_monthly_summary(b, &monthly_summary(&impact)).map_err(data_err)
            })?;
            run.write(&format!("hourly/{code}/{z}.csv"), |b| {
                write_hourly_profiles(b, &impact).map_err(data_err)
            })?;
        }
    }
    run.write("skipped_hours.csv", |b| {
        writeln!(b, "scenario,zone,date,hour,reason").map_err(data_err)?;
        for s in &skipped {
            let reason = s.reason.replace(',', ";");
            writeln!(
                b,
                "{},{},{},{},{reason}",
                s.scenario,
                s.zone.code(),
                s.key.date,
                s.key.hour
            )
            .map_err(data_err)?;
        }
        Ok(())
    })?;

    let counts = BTreeMap::from([
        ("ledger_rows".to_string(), stats.rows as u64),
        ("ledger_kept".to_string(), stats.kept as u64),
        ("skipped_malformed".to_string(), stats.skipped_malformed as u64),
        (
            "skipped_rejected_status".to_string(),
            stats.skipped_rejected_status as u64,
        ),
        ("skipped_zero_quantity".to_string(), stats.skipped_zero_quantity as u64),
        ("skipped_not_accepted".to_string(), stats.skipped_not_accepted as u64),
        ("skipped_out_of_year".to_string(), out_of_year as u64),
        ("zone_hours".to_string(), index.len() as u64),
        ("cleared_hours".to_string(), cleared),
        ("skipped_hours".to_string(), skipped.len() as u64),
    ]);
    run.stage("clear", started, counts);
    Ok(())
}

/// Runs a command and writes its manifest. Problems confined to single
/// cells, zones or scenarios are collected in the manifest's `issues`;
/// anything else aborts with an error.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<RunManifest, PipelineError> {
    match command {
        Command::Derive => cfg.validate_derive()?,
        Command::Simulate => cfg.validate_simulate()?,
        Command::Clear => cfg.validate_clear()?,
        Command::RunAll => {
            cfg.validate_derive()?;
            cfg.validate_simulate()?;
            cfg.validate_clear()?;
        }
    }
    let mut run = Run::new(cfg, command);
    match command {
        Command::Derive => stage_derive(&mut run)?,
        Command::Simulate => stage_simulate(&mut run)?,
        Command::Clear => stage_clear(&mut run)?,
        Command::RunAll => {
            stage_derive(&mut run)?;
            stage_simulate(&mut run)?;
            stage_clear(&mut run)?;
        }
    }
    run.finish()
}

/// Writes the bundled synthetic inputs below `dir` and returns a config
/// pointing at them, with outputs in `output`.
pub fn fixture_config(dir: &Path, output: &Path) -> Result<RunConfig, PipelineError> {
    let paths = fixture::write_inputs(dir).map_err(|source| PipelineError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut cfg = RunConfig {
        paths: PathsConfig {
            registry: Some(paths.registry),
            yield_dir: Some(paths.yield_dir),
            load_dir: Some(paths.load_dir),
            bids: vec![paths.ledger],
            scenarios_file: Some(paths.scenarios),
            output: output.to_path_buf(),
        },
        ..RunConfig::default()
    };
    cfg.run.scenarios = fixture::FIXTURE_RUN_SCENARIOS.iter().map(|s| s.to_string()).collect();
    Ok(cfg)
}
