//! Fleet-level projection of single-prosumer profiles under deployment
//! scenarios.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::ZonalShares;
use crate::domain::{Category, Zone};
use crate::profiles::ProsumerEnergy;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("scenario {code}: {message}")]
    InvalidScenario { code: String, message: String },
    #[error("unknown scenario code `{0}`")]
    UnknownScenario(String),
    #[error("{category}/{zone}: capacity share {share}% needs a positive unit capacity")]
    MissingUnitCapacity { category: Category, zone: Zone, share: f64 },
    #[error("{category}/{zone}: no prosumer profile for a cell with {plants} plants")]
    MissingProfile {
        category: Category,
        zone: Zone,
        plants: f64,
    },
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

/// Capacity assumed for the mixed sensitivity scenarios, which carry no
/// capacity of their own.
pub const DEFAULT_MIXED_TOTAL_GW: f64 = 5.0;
/// 2024 deployed capacity, operational and design RECs.
pub const EXPOST_2024_ALL_GW: f64 = 0.368;
/// 2024 deployed capacity, operational RECs only.
pub const EXPOST_2024_OPERATIONAL_GW: f64 = 0.029646;

/// A named deployment trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub code: String,
    #[serde(default)]
    pub name: String,
    pub year: i32,
    pub total_capacity_gw: f64,
    /// Self-consumption fraction per prosumer category. Standalone plants
    /// never carry one.
    pub sc_targets: BTreeMap<Category, f64>,
    #[serde(default = "default_true")]
    pub includes_standalone: bool,
    #[serde(default)]
    pub policy_target_achieving: bool,
}

fn default_true() -> bool {
    true
}

impl Scenario {
    pub fn uniform(
        code: &str,
        name: &str,
        year: i32,
        total_capacity_gw: f64,
        sc: f64,
        policy_target_achieving: bool,
    ) -> Scenario {
        Scenario {
            code: code.into(),
            name: name.into(),
            year,
            total_capacity_gw,
            sc_targets: Category::PROSUMERS.iter().map(|c| (*c, sc)).collect(),
            includes_standalone: true,
            policy_target_achieving,
        }
    }

    pub fn sc_target(&self, category: Category) -> Option<f64> {
        self.sc_targets.get(&category).copied()
    }

    /// The common target when every prosumer category shares one.
    pub fn uniform_target(&self) -> Option<f64> {
        let first = self.sc_target(Category::PROSUMERS[0])?;
        Category::PROSUMERS
            .iter()
            .all(|c| self.sc_target(*c) == Some(first))
            .then_some(first)
    }

    pub fn validate(&self) -> Result<(), ProjectionError> {
        let invalid = |message: String| ProjectionError::InvalidScenario {
            code: self.code.clone(),
            message,
        };
        if self.code.trim().is_empty() {
            return Err(invalid("empty scenario code".into()));
        }
        if !(self.total_capacity_gw.is_finite() && self.total_capacity_gw > 0.0) {
            return Err(invalid(format!(
                "total capacity must be positive, got {} GW",
                self.total_capacity_gw
            )));
        }
        if self.sc_targets.contains_key(&Category::Standalone) {
            return Err(invalid("standalone producers carry no self-consumption target".into()));
        }
        for c in Category::PROSUMERS {
            match self.sc_target(c) {
                Some(t) if t > 0.0 && t <= 1.0 => {}
                Some(t) => return Err(invalid(format!("{c} target {t} outside (0, 1]"))),
                None => return Err(invalid(format!("missing target for {c}"))),
            }
        }
        Ok(())
    }
}

/// The eleven simulated scenarios, mixed ones at the default capacity.
pub fn builtin_scenarios() -> Vec<Scenario> {
    builtin_scenarios_with(DEFAULT_MIXED_TOTAL_GW)
}

pub fn builtin_scenarios_with(mixed_total_gw: f64) -> Vec<Scenario> {
    let mut out = Vec::with_capacity(11);
    for (suffix, name, gw, achieving) in [
        ("", "Policy", 5.0, true),
        (".HW", "Half-way", 1.47, false),
        (".BU", "Business-as-usual", 0.119, false),
    ] {
        for (pct, sc) in [(45, 0.45), (50, 0.50), (55, 0.55)] {
            let code = format!("sc{pct}{suffix}.2027");
            out.push(Scenario::uniform(&code, name, 2027, gw, sc, achieving));
        }
    }
    let mixed = |code: &str, name: &str, targets: [f64; 4], achieving: bool| Scenario {
        code: code.into(),
        name: name.into(),
        year: 2027,
        total_capacity_gw: mixed_total_gw,
        sc_targets: Category::PROSUMERS.into_iter().zip(targets).collect(),
        includes_standalone: false,
        policy_target_achieving: achieving,
    };
    out.push(mixed(
        "sc_mix1.2027",
        "Mixed scenario 1",
        [0.50, 0.45, 0.55, 0.50],
        false,
    ));
    out.push(mixed(
        "sc_mix2.2027",
        "Mixed scenario 2",
        [0.55, 0.55, 0.55, 0.55],
        true,
    ));
    out
}

#[derive(Debug, Deserialize)]
struct ScenarioFile {
    #[serde(default)]
    scenario: Vec<Scenario>,
}

/// Reads user-defined scenarios from a TOML file with `[[scenario]]` tables.
pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<Scenario>, ProjectionError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ProjectionError::Io {
        path: display.clone(),
        source,
    })?;
    parse_scenarios(&text).map_err(|e| match e {
        ProjectionError::Parse { message, .. } => ProjectionError::Parse { path: display, message },
        other => other,
    })
}

pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>, ProjectionError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ProjectionError::Parse {
        path: "<scenarios>".into(),
        message: e.to_string(),
    })?;
    for s in &file.scenario {
        s.validate()?;
    }
    Ok(file.scenario)
}

/// Looks scenario codes up among `available`, preserving request order.
pub fn resolve_scenarios(codes: &[String], available: &[Scenario]) -> Result<Vec<Scenario>, ProjectionError> {
    codes
        .iter()
        .map(|code| {
            available
                .iter()
                .find(|s| &s.code == code)
                .cloned()
                .ok_or_else(|| ProjectionError::UnknownScenario(code.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AllocationOptions {
    /// Rescale each zone's category shares to sum to 100 before allocating.
    pub renormalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationCell {
    pub capacity_share_pct: f64,
    pub allocated_capacity_kwp: f64,
    /// Fractional plant counts are kept as-is.
    pub plant_count: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetAllocation {
    pub scenario_code: String,
    pub cells: BTreeMap<(Category, Zone), AllocationCell>,
    /// 100 minus the summed category shares used in each zone.
    pub share_shortfall_pct: BTreeMap<Zone, f64>,
}

impl FleetAllocation {
    pub fn cell(&self, category: Category, zone: Zone) -> Option<&AllocationCell> {
        self.cells.get(&(category, zone))
    }

    pub fn total_capacity_kwp(&self) -> f64 {
        self.cells.values().map(|c| c.allocated_capacity_kwp).sum()
    }

    pub fn prosumer_count(&self, zone: Zone) -> f64 {
        Category::PROSUMERS
            .iter()
            .filter_map(|c| self.cell(*c, zone))
            .map(|c| c.plant_count)
            .sum()
    }
}

/// Distributes the scenario capacity over zones and categories, then
/// converts each cell into a plant count using the unit capacity.
pub fn allocate(
    scenario: &Scenario,
    zonal_shares: &ZonalShares,
    capacity_shares: &BTreeMap<(Category, Zone), f64>,
    unit_capacities: &BTreeMap<(Category, Zone), f64>,
    opts: AllocationOptions,
) -> Result<FleetAllocation, ProjectionError> {
    scenario.validate()?;
    let total_kwp = scenario.total_capacity_gw * 1e6;
    let included: Vec<Category> = Category::ALL
        .into_iter()
        .filter(|c| *c != Category::Standalone || scenario.includes_standalone)
        .collect();

    let mut cells = BTreeMap::new();
    let mut shortfall = BTreeMap::new();
    for zone in Zone::ALL {
        let zone_share = zonal_shares.share(zone);
        let raw: Vec<(Category, f64)> = included
            .iter()
            .map(|c| (*c, capacity_shares.get(&(*c, zone)).copied().unwrap_or(0.0)))
            .collect();
        let sum: f64 = raw.iter().map(|(_, s)| s).sum();
        let scale = if opts.renormalize && sum > 0.0 {
            100.0 / sum
        } else {
            1.0
        };
        shortfall.insert(zone, 100.0 - sum * scale);

        for category in Category::ALL {
            let share = raw
                .iter()
                .find(|(c, _)| *c == category)
                .map(|(_, s)| s * scale)
                .unwrap_or(0.0);
            let capacity = total_kwp * zone_share * share / 10_000.0;
            let plant_count = if capacity > 0.0 {
                match unit_capacities.get(&(category, zone)) {
                    Some(u) if *u > 0.0 => capacity / u,
                    _ => return Err(ProjectionError::MissingUnitCapacity { category, zone, share }),
                }
            } else {
                0.0
            };
            cells.insert(
                (category, zone),
                AllocationCell {
                    capacity_share_pct: share,
                    allocated_capacity_kwp: capacity,
                    plant_count,
                },
            );
        }
    }
    Ok(FleetAllocation {
        scenario_code: scenario.code.clone(),
        cells,
        share_shortfall_pct: shortfall,
    })
}

/// Projected hourly series of one category in one zone, in MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorySeries {
    pub category: Category,
    pub zone: Zone,
    pub export_mwh: Vec<f64>,
    pub self_mwh: Vec<f64>,
}

/// Scales each cell's single-prosumer export and self-consumption by its
/// plant count, converting kWh to MWh.
pub fn project_series(
    allocation: &FleetAllocation,
    energies: &BTreeMap<(Category, Zone), ProsumerEnergy>,
) -> Result<Vec<CategorySeries>, ProjectionError> {
    let mut out = Vec::with_capacity(allocation.cells.len());
    for (&(category, zone), cell) in &allocation.cells {
        let plants = cell.plant_count;
        if plants == 0.0 {
            let len = energies
                .values()
                .next()
                .map(|e| e.pv.values().len())
                .unwrap_or(crate::profiles::HOURS_PER_YEAR);
            out.push(CategorySeries {
                category,
                zone,
                export_mwh: vec![0.0; len],
                self_mwh: vec![0.0; len],
            });
            continue;
        }
        let energy =
            energies
                .get(&(category, zone))
                .ok_or(ProjectionError::MissingProfile { category, zone, plants })?;
        out.push(CategorySeries {
            category,
            zone,
            export_mwh: scale_to_mwh(energy.export.values(), plants),
            self_mwh: scale_to_mwh(energy.self_consumed.values(), plants),
        });
    }
    Ok(out)
}

pub fn scale_to_mwh(kwh: &[f64], plants: f64) -> Vec<f64> {
    kwh.iter().map(|v| v * plants / 1000.0).collect()
}

/// Zone totals of projected REC injection and self-consumption, MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalSeries {
    pub zone: Zone,
    pub export_mwh: Vec<f64>,
    pub self_mwh: Vec<f64>,
}

impl ZonalSeries {
    /// Annual self-consumed share of the zone's REC production.
    pub fn sc_ratio(&self) -> Option<f64> {
        let s: f64 = self.self_mwh.iter().sum();
        let e: f64 = self.export_mwh.iter().sum();
        (s + e > 0.0).then(|| s / (s + e))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(out);
        writeln!(w, "hour_index,export_mwh,self_mwh")?;
        for (t, (e, s)) in self.export_mwh.iter().zip(&self.self_mwh).enumerate() {
            writeln!(w, "{},{},{}", t + 1, e, s)?;
        }
        w.flush()
    }
}

/// Sums the category series belonging to `zone`. Categories are summed in
/// their canonical order whatever the input order.
pub fn aggregate_zone(series: &[CategorySeries], zone: Zone) -> Result<ZonalSeries, ProjectionError> {
    let mut parts: Vec<&CategorySeries> = series.iter().filter(|s| s.zone == zone).collect();
    parts.sort_by_key(|s| s.category);
    let len = parts.first().map(|s| s.export_mwh.len()).unwrap_or(0);
    let mut export_mwh = vec![0.0; len];
    let mut self_mwh = vec![0.0; len];
    for p in parts {
        for v in [&p.export_mwh, &p.self_mwh] {
            if v.len() != len {
                return Err(ProjectionError::LengthMismatch {
                    left: len,
                    right: v.len(),
                });
            }
        }
        for (acc, v) in export_mwh.iter_mut().zip(&p.export_mwh) {
            *acc += v;
        }
        for (acc, v) in self_mwh.iter_mut().zip(&p.self_mwh) {
            *acc += v;
        }
    }
    Ok(ZonalSeries {
        zone,
        export_mwh,
        self_mwh,
    })
}

pub fn read_zonal_series(path: impl AsRef<Path>, zone: Zone) -> Result<ZonalSeries, ProjectionError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| ProjectionError::Io {
        path: display.clone(),
        source,
    })?;
    read_zonal(file, zone).map_err(|message| ProjectionError::Parse { path: display, message })
}

fn read_zonal<R: Read>(reader: R, zone: Zone) -> Result<ZonalSeries, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut export_mwh = Vec::new();
    let mut self_mwh = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let num = |j: usize| -> Result<f64, String> {
            row.get(j)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("line {}: malformed column {}", i + 2, j + 1))
        };
        export_mwh.push(num(1)?);
        self_mwh.push(num(2)?);
    }
    Ok(ZonalSeries {
        zone,
        export_mwh,
        self_mwh,
    })
}
