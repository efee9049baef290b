//! Run configuration: TOML file, `RECMERIT_*` environment overrides and
//! command-line overrides, applied in that order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::analysis::{Denominator, SmoothingConfig};
use crate::atlas::{StatusFilter, UnitsBasis};
use crate::domain::Zone;
use crate::market::{BidsMode, SupplyShiftMode, DEFAULT_PRICE_CAP};
use crate::projection::{builtin_scenarios_with, load_scenarios, resolve_scenarios, Scenario, DEFAULT_MIXED_TOTAL_GW};

/// Prefix of the environment variables read by [`RunConfig::apply_env`].
pub const ENV_PREFIX: &str = "RECMERIT_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub registry: Option<PathBuf>,
    /// Directory holding `yield_<ZONE>.csv` files.
    pub yield_dir: Option<PathBuf>,
    /// Directory holding `load_<category>.csv` files.
    pub load_dir: Option<PathBuf>,
    /// Bid ledgers; records from all files are merged.
    pub bids: Vec<PathBuf>,
    /// Extra `[[scenario]]` definitions.
    pub scenarios_file: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            registry: None,
            yield_dir: None,
            load_dir: None,
            bids: Vec::new(),
            scenarios_file: None,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Scenario codes; empty means every built-in scenario.
    pub scenarios: Vec<String>,
    /// Zones to simulate and clear; empty means all zones for simulation
    /// and the zones present in the ledger for clearing.
    pub zones: Vec<Zone>,
    /// Market year; ledger rows from other years are ignored.
    pub year: i32,
    /// Worker threads for clearing; 0 picks the number of CPUs.
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            scenarios: Vec::new(),
            zones: Vec::new(),
            year: 2024,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtlasSection {
    pub status: StatusFilter,
    pub units_basis: UnitsBasis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfilesSection {
    /// Self-consumption levels simulated for every zone.
    pub sc_levels: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Multiplier applied to yield files (1.0 for net yields).
    pub derate: f64,
}

impl Default for ProfilesSection {
    fn default() -> Self {
        ProfilesSection {
            sc_levels: vec![0.45, 0.50, 0.55],
            tolerance: 1e-3,
            max_iterations: 200,
            derate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSection {
    pub renormalize: bool,
    pub mixed_total_gw: f64,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        ProjectionSection {
            renormalize: false,
            mixed_total_gw: DEFAULT_MIXED_TOTAL_GW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    pub price_cap: f64,
    pub bids: BidsMode,
    pub supply_shift: SupplyShiftMode,
}

impl Default for MarketSection {
    fn default() -> Self {
        MarketSection {
            price_cap: DEFAULT_PRICE_CAP,
            bids: BidsMode::All,
            supply_shift: SupplyShiftMode::CheapEnd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub window: usize,
    pub positive_only: bool,
    pub denominator: Denominator,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            window: 7,
            positive_only: true,
            denominator: Denominator::Synthetic,
        }
    }
}

impl AnalysisSection {
    pub fn smoothing(&self) -> SmoothingConfig {
        SmoothingConfig {
            window: self.window,
            positive_only: self.positive_only,
            ..SmoothingConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub run: RunSection,
    pub atlas: AtlasSection,
    pub profiles: ProfilesSection,
    pub projection: ProjectionSection,
    pub market: MarketSection,
    pub analysis: AnalysisSection,
}

/// Command-line overrides; `None`/empty leaves the configured value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenarios: Vec<String>,
    pub zones: Vec<Zone>,
    pub year: Option<i32>,
    pub bids_mode: Option<BidsMode>,
    pub window: Option<usize>,
    pub price_cap: Option<f64>,
    pub output: Option<PathBuf>,
    pub ledgers: Vec<PathBuf>,
    pub workers: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn parse_env<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PipelineError> {
    value
        .trim()
        .parse()
        .map_err(|_| config_err(format!("{ENV_PREFIX}{key}: cannot parse `{value}`")))
}

impl RunConfig {
    /// Parses a TOML config. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<RunConfig, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(format!("config: {e}")))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_toml(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for opt in [
            &mut p.registry,
            &mut p.yield_dir,
            &mut p.load_dir,
            &mut p.scenarios_file,
        ] {
            if let Some(path) = opt.as_mut() {
                fix(path);
            }
        }
        p.bids.iter_mut().for_each(fix);
        fix(&mut p.output);
    }

    /// Applies `RECMERIT_*` variables: `REGISTRY`, `YIELD_DIR`, `LOAD_DIR`,
    /// `BIDS` (comma list), `SCENARIOS_FILE`, `OUTPUT`, `SCENARIOS`,
    /// `ZONES`, `YEAR`, `WORKERS`, `PRICE_CAP`, `BIDS_MODE`, `WINDOW`,
    /// `TOLERANCE`, `MIXED_TOTAL_GW`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), PipelineError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let Some(key) = k.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let v = v.as_ref();
            match key {
                "REGISTRY" => self.paths.registry = Some(v.into()),
                "YIELD_DIR" => self.paths.yield_dir = Some(v.into()),
                "LOAD_DIR" => self.paths.load_dir = Some(v.into()),
                "BIDS" => self.paths.bids = split_list(v).map(PathBuf::from).collect(),
                "SCENARIOS_FILE" => self.paths.scenarios_file = Some(v.into()),
                "OUTPUT" => self.paths.output = v.into(),
                "SCENARIOS" => self.run.scenarios = split_list(v).map(String::from).collect(),
                "ZONES" => {
                    self.run.zones = split_list(v)
                        .map(|z| z.parse().map_err(|e| config_err(format!("{ENV_PREFIX}ZONES: {e}"))))
                        .collect::<Result<_, _>>()?
                }
                "YEAR" => self.run.year = parse_env(key, v)?,
                "WORKERS" => self.run.workers = parse_env(key, v)?,
                "PRICE_CAP" => self.market.price_cap = parse_env(key, v)?,
                "BIDS_MODE" => self.market.bids = v.parse().map_err(config_err)?,
                "WINDOW" => self.analysis.window = parse_env(key, v)?,
                "TOLERANCE" => self.profiles.tolerance = parse_env(key, v)?,
                "MIXED_TOTAL_GW" => self.projection.mixed_total_gw = parse_env(key, v)?,
                // other variables with the prefix (e.g. log settings) are not ours
                _ => {}
            }
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if !o.scenarios.is_empty() {
            self.run.scenarios = o.scenarios.clone();
        }
        if !o.zones.is_empty() {
            self.run.zones = o.zones.clone();
        }
        if let Some(y) = o.year {
            self.run.year = y;
        }
        if let Some(m) = o.bids_mode {
            self.market.bids = m;
        }
        if let Some(w) = o.window {
            self.analysis.window = w;
        }
        if let Some(c) = o.price_cap {
            self.market.price_cap = c;
        }
        if let Some(out) = &o.output {
            self.paths.output = out.clone();
        }
        if !o.ledgers.is_empty() {
            self.paths.bids = o.ledgers.clone();
        }
        if let Some(w) = o.workers {
            self.run.workers = w;
        }
    }

    /// Built-in scenarios plus those of `scenarios_file`; a file entry
    /// replaces a built-in with the same code.
    pub fn available_scenarios(&self) -> Result<Vec<Scenario>, PipelineError> {
        let mut all = builtin_scenarios_with(self.projection.mixed_total_gw);
        if let Some(path) = &self.paths.scenarios_file {
            for s in load_scenarios(path).map_err(|e| config_err(e.to_string()))? {
                all.retain(|b| b.code != s.code);
                all.push(s);
            }
        }
        Ok(all)
    }

    pub fn selected_scenarios(&self) -> Result<Vec<Scenario>, PipelineError> {
        let available = self.available_scenarios()?;
        if self.run.scenarios.is_empty() {
            return Ok(builtin_scenarios_with(self.projection.mixed_total_gw));
        }
        resolve_scenarios(&self.run.scenarios, &available).map_err(|e| config_err(e.to_string()))
    }

    /// Zones to simulate.
    pub fn simulation_zones(&self) -> Vec<Zone> {
        if self.run.zones.is_empty() {
            Zone::ALL.to_vec()
        } else {
            let mut z = self.run.zones.clone();
            z.sort();
            z.dedup();
            z
        }
    }

    fn require_file(label: &str, path: &Option<PathBuf>) -> Result<(), PipelineError> {
        match path {
            None => Err(config_err(format!("paths.{label} is not set"))),
            Some(p) if !p.exists() => Err(config_err(format!("paths.{label} {} does not exist", p.display()))),
            Some(_) => Ok(()),
        }
    }

    pub fn validate_derive(&self) -> Result<(), PipelineError> {
        Self::require_file("registry", &self.paths.registry)
    }

    pub fn validate_simulate(&self) -> Result<(), PipelineError> {
        Self::require_file("yield_dir", &self.paths.yield_dir)?;
        Self::require_file("load_dir", &self.paths.load_dir)?;
        if self.paths.scenarios_file.is_some() {
            Self::require_file("scenarios_file", &self.paths.scenarios_file)?;
        }
        let p = &self.profiles;
        if p.sc_levels.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) {
            return Err(config_err("profiles.sc_levels must lie in (0, 1]"));
        }
        if !(p.tolerance > 0.0) || p.max_iterations == 0 {
            return Err(config_err("profiles.tolerance and max_iterations must be positive"));
        }
        if !(p.derate > 0.0 && p.derate <= 1.0) {
            return Err(config_err("profiles.derate must lie in (0, 1]"));
        }
        if !(self.projection.mixed_total_gw > 0.0 && self.projection.mixed_total_gw.is_finite()) {
            return Err(config_err("projection.mixed_total_gw must be positive"));
        }
        self.selected_scenarios().map(|_| ())
    }

    pub fn validate_clear(&self) -> Result<(), PipelineError> {
        if self.paths.bids.is_empty() {
            return Err(config_err("paths.bids lists no ledger"));
        }
        for b in &self.paths.bids {
            if !b.exists() {
                return Err(config_err(format!("bid ledger {} does not exist", b.display())));
            }
        }
        if !(self.market.price_cap > 0.0 && self.market.price_cap.is_finite()) {
            return Err(config_err("market.price_cap must be positive"));
        }
        self.analysis
            .smoothing()
            .validate()
            .map_err(|e| config_err(format!("analysis.window: {e}")))?;
        self.selected_scenarios().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_resolves_paths() {
        let text = r#"
[paths]
registry = "data/registry.csv"
bids = ["ledger.csv", "/abs/ledger2.csv"]
output = "out"

[run]
scenarios = ["sc50.2027"]
zones = ["NORD", "cnor"]
year = 2024

[market]
price_cap = 3000.0
bids = "accepted"
supply_shift = "zero-price-only"

[analysis]
window = 5
denominator = "actual"
"#;
        let cfg = RunConfig::from_toml(text, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.paths.registry, Some(PathBuf::from("/cfg/data/registry.csv")));
        assert_eq!(cfg.paths.bids[1], PathBuf::from("/abs/ledger2.csv"));
        assert_eq!(cfg.run.zones, vec![Zone::Nord, Zone::Cnord]);
        assert_eq!(cfg.market.bids, BidsMode::Accepted);
        assert_eq!(cfg.market.supply_shift, SupplyShiftMode::ZeroPriceOnly);
        assert_eq!(cfg.analysis.denominator, Denominator::Actual);
        assert_eq!(cfg.profiles, ProfilesSection::default());
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let err = RunConfig::from_toml("[run]\nyaer = 2024\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, PipelineError::Config(_)));
    }

    #[test]
    fn env_then_cli_precedence() {
        let mut cfg = RunConfig::default();
        cfg.apply_env([
            ("RECMERIT_YEAR", "2023"),
            ("RECMERIT_ZONES", "NORD,CSUD"),
            ("RECMERIT_BIDS_MODE", "accepted"),
            ("RECMERIT_PRICE_CAP", "3000"),
            ("OTHER_YEAR", "1999"),
        ])
        .unwrap();
        assert_eq!(cfg.run.year, 2023);
        assert_eq!(cfg.run.zones, vec![Zone::Nord, Zone::Csud]);
        cfg.apply_overrides(&Overrides {
            year: Some(2024),
            window: Some(9),
            ..Overrides::default()
        });
        assert_eq!(cfg.run.year, 2024);
        assert_eq!(cfg.analysis.window, 9);
        assert_eq!(cfg.market.price_cap, 3000.0);
        assert!(cfg.apply_env([("RECMERIT_YEAR", "soon")]).is_err());
        assert!(cfg.apply_env([("RECMERIT_ZONES", "ATLANTIS")]).is_err());
    }

    #[test]
    fn validation_catches_missing_paths() {
        let cfg = RunConfig::default();
        assert!(matches!(cfg.validate_derive(), Err(PipelineError::Config(_))));
        assert!(matches!(cfg.validate_clear(), Err(PipelineError::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.paths.registry = Some(PathBuf::from("/definitely/not/here.csv"));
        assert!(cfg.validate_derive().is_err());
    }

    #[test]
    fn scenario_selection() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.selected_scenarios().unwrap().len(), 11);
        cfg.run.scenarios = vec!["sc50.BU.2027".into()];
        assert_eq!(cfg.selected_scenarios().unwrap()[0].total_capacity_gw, 0.119);
        cfg.run.scenarios = vec!["nope".into()];
        assert!(matches!(cfg.selected_scenarios(), Err(PipelineError::Config(_))));
    }
}
