//! REC registry ingestion and fleet parameter derivation.
//!
//! Every statistic is computed over the available subsample only and carries
//! its sample size. A REC "includes" a category when its capacity share for
//! that category is present and strictly positive.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Category, Zone};

#[derive(Debug, Error)]
pub enum AtlasError {
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("registry is empty")]
    EmptyRegistry,
    #[error("registry header is missing column `{0}`")]
    MissingColumn(String),
    #[error("registry line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("no records to compute statistics over")]
    NoRecords,
    #[error("no building-type data for category {0}")]
    NoBuildingTypes(Category),
    #[error("average installations per REC must be positive, got {0}")]
    ZeroUnits(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecStatus {
    Operational,
    Design,
}

/// One mapped renewable energy community.
#[derive(Debug, Clone, PartialEq)]
pub struct RecRecord {
    pub id: String,
    pub zone: Zone,
    pub status: RecStatus,
    pub pv_capacity_kwp: Option<f64>,
    /// Percentage of REC capacity owned by each category.
    pub category_shares: BTreeMap<Category, f64>,
    pub rooftop_counts: BTreeMap<Category, u32>,
    pub building_types: BTreeMap<Category, Vec<String>>,
    pub self_consumption_pct: Option<f64>,
    pub has_bess: Option<bool>,
}

impl RecRecord {
    /// Share of `category` when the REC includes it (present and > 0).
    pub fn included_share(&self, category: Category) -> Option<f64> {
        self.category_shares.get(&category).copied().filter(|s| *s > 0.0)
    }
}

pub const REGISTRY_COLUMNS: [&str; 20] = [
    "id",
    "zone",
    "status",
    "pv_capacity_kwp",
    "share_public_pct",
    "share_residential_pct",
    "share_sme_pct",
    "share_npo_pct",
    "share_standalone_pct",
    "n_rooftop_public",
    "n_rooftop_residential",
    "n_rooftop_sme",
    "n_rooftop_npo",
    "n_standalone",
    "building_types_public",
    "building_types_sme",
    "building_types_npo",
    "building_types_residential",
    "self_consumption_pct",
    "has_bess",
];

fn share_column(c: Category) -> &'static str {
    match c {
        Category::Public => "share_public_pct",
        Category::Residential => "share_residential_pct",
        Category::Sme => "share_sme_pct",
        Category::Npo => "share_npo_pct",
        Category::Standalone => "share_standalone_pct",
    }
}

fn count_column(c: Category) -> &'static str {
    match c {
        Category::Public => "n_rooftop_public",
        Category::Residential => "n_rooftop_residential",
        Category::Sme => "n_rooftop_sme",
        Category::Npo => "n_rooftop_npo",
        Category::Standalone => "n_standalone",
    }
}

fn building_column(c: Category) -> Option<&'static str> {
    match c {
        Category::Public => Some("building_types_public"),
        Category::Residential => Some("building_types_residential"),
        Category::Sme => Some("building_types_sme"),
        Category::Npo => Some("building_types_npo"),
        Category::Standalone => None,
    }
}

/// Separator between labels inside a building-type cell.
pub const BUILDING_TYPE_SEPARATOR: char = '|';

pub fn load_rec_registry(path: impl AsRef<Path>) -> Result<Vec<RecRecord>, AtlasError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| AtlasError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_rec_registry(file)
}

/// Parses a registry from any reader. Comma and semicolon delimiters are
/// both accepted; the header decides.
pub fn read_rec_registry<R: Read>(mut reader: R) -> Result<Vec<RecRecord>, AtlasError> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|source| AtlasError::Io {
        path: "<reader>".into(),
        source,
    })?;
    if text.trim().is_empty() {
        return Err(AtlasError::EmptyRegistry);
    }
    let header_line = text.lines().next().unwrap_or_default();
    let delimiter = if header_line.contains(';') && !header_line.contains(',') {
        b';'
    } else {
        b','
    };

    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| AtlasError::Row {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut index = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        index.insert(h.to_ascii_lowercase(), i);
    }
    for col in REGISTRY_COLUMNS {
        if !index.contains_key(col) {
            return Err(AtlasError::MissingColumn(col.to_string()));
        }
    }

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| AtlasError::Row {
            line,
            message: e.to_string(),
        })?;
        let cell = |name: &str| -> Option<&str> { row.get(index[name]).map(str::trim).filter(|s| !s.is_empty()) };
        records.push(parse_row(line, &cell)?);
    }
    if records.is_empty() {
        return Err(AtlasError::EmptyRegistry);
    }
    Ok(records)
}

fn parse_row<'a>(line: usize, cell: &dyn Fn(&str) -> Option<&'a str>) -> Result<RecRecord, AtlasError> {
    let err = |message: String| AtlasError::Row { line, message };
    let number = |name: &str| -> Result<Option<f64>, AtlasError> {
        match cell(name) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| err(format!("malformed number `{s}` in column {name}"))),
        }
    };

    let id = cell("id").ok_or_else(|| err("missing id".into()))?.to_string();
    let zone_label = cell("zone").ok_or_else(|| err("missing zone".into()))?;
    let zone = zone_label.parse::<Zone>().map_err(|e| err(e.to_string()))?;
    let status = match cell("status").map(str::to_ascii_lowercase).as_deref() {
        Some("operational") => RecStatus::Operational,
        Some("design") => RecStatus::Design,
        other => return Err(err(format!("unknown status {other:?}"))),
    };

    let pv_capacity_kwp = number("pv_capacity_kwp")?;
    if let Some(c) = pv_capacity_kwp {
        if c < 0.0 {
            return Err(err(format!("negative pv capacity {c}")));
        }
    }

    let mut category_shares = BTreeMap::new();
    let mut rooftop_counts = BTreeMap::new();
    let mut building_types = BTreeMap::new();
    for c in Category::ALL {
        if let Some(share) = number(share_column(c))? {
            if !(0.0..=100.0).contains(&share) {
                return Err(err(format!("{c} share {share} outside [0, 100]")));
            }
            category_shares.insert(c, share);
        }
        if let Some(s) = cell(count_column(c)) {
            let n = s
                .parse::<u32>()
                .map_err(|_| err(format!("malformed count `{s}` in {}", count_column(c))))?;
            rooftop_counts.insert(c, n);
        }
        if let Some(col) = building_column(c) {
            if let Some(s) = cell(col) {
                let labels: Vec<String> = s
                    .split(BUILDING_TYPE_SEPARATOR)
                    .map(|l| l.trim().to_lowercase())
                    .filter(|l| !l.is_empty())
                    .collect();
                if !labels.is_empty() {
                    building_types.insert(c, labels);
                }
            }
        }
    }

    let self_consumption_pct = number("self_consumption_pct")?;
    if let Some(sc) = self_consumption_pct {
        if !(0.0..=100.0).contains(&sc) {
            return Err(err(format!("self-consumption {sc} outside [0, 100]")));
        }
    }
    let has_bess = match cell("has_bess").map(str::to_ascii_lowercase).as_deref() {
        None => None,
        Some("1" | "true" | "yes" | "y") => Some(true),
        Some("0" | "false" | "no" | "n") => Some(false),
        Some(other) => return Err(err(format!("malformed has_bess `{other}`"))),
    };

    Ok(RecRecord {
        id,
        zone,
        status,
        pv_capacity_kwp,
        category_shares,
        rooftop_counts,
        building_types,
        self_consumption_pct,
        has_bess,
    })
}

/// Which RECs enter the statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatusFilter {
    /// Operational and design RECs.
    #[default]
    All,
    OperationalOnly,
}

impl StatusFilter {
    pub fn apply(self, records: &[RecRecord]) -> Vec<RecRecord> {
        records
            .iter()
            .filter(|r| match self {
                StatusFilter::All => true,
                StatusFilter::OperationalOnly => r.status == RecStatus::Operational,
            })
            .cloned()
            .collect()
    }
}

/// Whether the average installation count per REC is pooled country-wide
/// or computed per zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitsBasis {
    #[default]
    Country,
    Zone,
}

/// A sample mean together with the number of observations behind it.
/// `value` is `None` when the sample is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub value: Option<f64>,
    pub sample_size: usize,
}

impl Stat {
    pub fn empty() -> Self {
        Stat {
            value: None,
            sample_size: 0,
        }
    }

    pub fn mean_of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut sum = 0.0;
        let mut n = 0usize;
        for v in values {
            sum += v;
            n += 1;
        }
        Stat {
            value: (n > 0).then(|| sum / n as f64),
            sample_size: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalShares {
    pub shares_pct: BTreeMap<Zone, f64>,
    pub counts: BTreeMap<Zone, usize>,
    pub total_recs: usize,
}

impl ZonalShares {
    pub fn share(&self, zone: Zone) -> f64 {
        self.shares_pct.get(&zone).copied().unwrap_or(0.0)
    }
}

pub fn zonal_shares(records: &[RecRecord]) -> Result<ZonalShares, AtlasError> {
    if records.is_empty() {
        return Err(AtlasError::NoRecords);
    }
    let mut counts: BTreeMap<Zone, usize> = Zone::ALL.iter().map(|z| (*z, 0)).collect();
    for r in records {
        *counts.entry(r.zone).or_default() += 1;
    }
    let n = records.len();
    let shares_pct = counts.iter().map(|(z, c)| (*z, 100.0 * *c as f64 / n as f64)).collect();
    Ok(ZonalShares {
        shares_pct,
        counts,
        total_recs: n,
    })
}

/// Mean over RECs in `zone` that include `category` of the capacity owned by
/// that category. RECs without a recorded capacity are left out.
pub fn avg_total_capacity(records: &[RecRecord], category: Category, zone: Zone) -> Stat {
    Stat::mean_of(records.iter().filter(|r| r.zone == zone).filter_map(|r| {
        let share = r.included_share(category)?;
        let cap = r.pv_capacity_kwp?;
        Some(cap * share / 100.0)
    }))
}

/// Mean category share over the RECs in `zone` that include the category.
pub fn avg_capacity_share(records: &[RecRecord], category: Category, zone: Zone) -> Stat {
    Stat::mean_of(
        records
            .iter()
            .filter(|r| r.zone == zone)
            .filter_map(|r| r.included_share(category)),
    )
}

/// Average number of rooftop (or standalone) installations of `category`
/// per REC, over RECs reporting a positive count. `zone = None` pools the
/// whole country.
pub fn avg_units_per_rec(records: &[RecRecord], category: Category, zone: Option<Zone>) -> Stat {
    Stat::mean_of(
        records
            .iter()
            .filter(|r| zone.is_none_or(|z| r.zone == z))
            .filter_map(|r| r.rooftop_counts.get(&category).copied())
            .filter(|n| *n > 0)
            .map(f64::from),
    )
}

pub fn avg_unit_capacity(avg_total_kwp: f64, avg_units_per_rec: f64) -> Result<f64, AtlasError> {
    if avg_units_per_rec.is_nan() || avg_units_per_rec <= 0.0 {
        return Err(AtlasError::ZeroUnits(avg_units_per_rec));
    }
    Ok(avg_total_kwp / avg_units_per_rec)
}

/// Label that never counts toward the building-type mode.
const UNSPECIFIED: &str = "unspecified";

/// Mode of the building-type labels for a category. Ties go to the
/// lexicographically smallest label.
pub fn most_common_building_type(records: &[RecRecord], category: Category) -> Result<String, AtlasError> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for labels in records.iter().filter_map(|r| r.building_types.get(&category)) {
        for l in labels.iter().filter(|l| l.as_str() != UNSPECIFIED) {
            *counts.entry(l.as_str()).or_default() += 1;
        }
    }
    // max_by returns the last maximum, so order ties by reversed label.
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(label, _)| label.to_string())
        .ok_or(AtlasError::NoBuildingTypes(category))
}

/// Mean reported self-consumption percentage.
pub fn mean_self_consumption(records: &[RecRecord]) -> Stat {
    Stat::mean_of(records.iter().filter_map(|r| r.self_consumption_pct))
}

/// Fraction of RECs, among those answering, that report storage.
pub fn bess_share_pct(records: &[RecRecord]) -> Stat {
    Stat::mean_of(
        records
            .iter()
            .filter_map(|r| r.has_bess)
            .map(|b| if b { 100.0 } else { 0.0 }),
    )
}

/// Derived per-(category, zone) fleet parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryZoneParams {
    pub category: Category,
    pub zone: Zone,
    pub avg_total_capacity_kwp: Stat,
    pub avg_units_per_rec: Stat,
    /// `None` when either input statistic is missing.
    pub avg_unit_capacity_kwp: Option<f64>,
    pub avg_capacity_share_pct: Stat,
    /// RECs in the zone that include the category.
    pub sample_size: usize,
}

pub fn derive_params(records: &[RecRecord], basis: UnitsBasis) -> Vec<CategoryZoneParams> {
    let country_units: BTreeMap<Category, Stat> = Category::ALL
        .iter()
        .map(|c| (*c, avg_units_per_rec(records, *c, None)))
        .collect();
    let mut out = Vec::with_capacity(Category::ALL.len() * Zone::ALL.len());
    for category in Category::ALL {
        for zone in Zone::ALL {
            let total = avg_total_capacity(records, category, zone);
            let units = match basis {
                UnitsBasis::Country => country_units[&category],
                UnitsBasis::Zone => avg_units_per_rec(records, category, Some(zone)),
            };
            let unit_cap = match (total.value, units.value) {
                (Some(t), Some(u)) => avg_unit_capacity(t, u).ok(),
                _ => None,
            };
            let share = avg_capacity_share(records, category, zone);
            out.push(CategoryZoneParams {
                category,
                zone,
                avg_total_capacity_kwp: total,
                avg_units_per_rec: units,
                avg_unit_capacity_kwp: unit_cap,
                avg_capacity_share_pct: share,
                sample_size: share.sample_size,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(zone: Zone, cap: Option<f64>, shares: &[(Category, f64)]) -> RecRecord {
        RecRecord {
            id: "x".into(),
            zone,
            status: RecStatus::Operational,
            pv_capacity_kwp: cap,
            category_shares: shares.iter().copied().collect(),
            rooftop_counts: BTreeMap::new(),
            building_types: BTreeMap::new(),
            self_consumption_pct: None,
            has_bess: None,
        }
    }

    const FIXTURE: &str = "\
id,zone,status,pv_capacity_kwp,share_public_pct,share_residential_pct,share_sme_pct,share_npo_pct,share_standalone_pct,n_rooftop_public,n_rooftop_residential,n_rooftop_sme,n_rooftop_npo,n_standalone,building_types_public,building_types_sme,building_types_npo,building_types_residential,self_consumption_pct,has_bess
r1,NORD,operational,100,40,60,,,,2,12,,,,school|town hall,,,detached house,48.5,no
r2,CSUD,design,200,50,,50,,,3,,1,,,school,supermarket,,,,
r3,SICI,operational,,,,,100,,,,,2,,,,church|office,,,yes
";

    #[test]
    fn three_row_fixture_parses_field_by_field() {
        let recs = read_rec_registry(FIXTURE.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        let r1 = &recs[0];
        assert_eq!(r1.id, "r1");
        assert_eq!(r1.zone, Zone::Nord);
        assert_eq!(r1.status, RecStatus::Operational);
        assert_eq!(r1.pv_capacity_kwp, Some(100.0));
        assert_eq!(r1.category_shares[&Category::Public], 40.0);
        assert_eq!(r1.category_shares[&Category::Residential], 60.0);
        assert!(!r1.category_shares.contains_key(&Category::Sme));
        assert_eq!(r1.rooftop_counts[&Category::Residential], 12);
        assert_eq!(
            r1.building_types[&Category::Public],
            vec!["school".to_string(), "town hall".to_string()]
        );
        assert_eq!(r1.self_consumption_pct, Some(48.5));
        assert_eq!(r1.has_bess, Some(false));

        let r2 = &recs[1];
        assert_eq!(r2.status, RecStatus::Design);
        assert_eq!(r2.self_consumption_pct, None);
        assert_eq!(r2.has_bess, None);

        let r3 = &recs[2];
        assert_eq!(r3.pv_capacity_kwp, None);
        assert_eq!(r3.category_shares[&Category::Npo], 100.0);
        assert_eq!(r3.has_bess, Some(true));
    }

    #[test]
    fn semicolon_delimited_registry_is_accepted() {
        let text = FIXTURE.replace(',', ";");
        assert_eq!(read_rec_registry(text.as_bytes()).unwrap().len(), 3);
    }

    #[test]
    fn unknown_zone_reports_line() {
        let bad = FIXTURE.replace("r2,CSUD", "r2,AUST");
        match read_rec_registry(bad.as_bytes()) {
            Err(AtlasError::Row { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("AUST"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_number_reports_line() {
        let bad = FIXTURE.replace("r1,NORD,operational,100", "r1,NORD,operational,1o0");
        assert!(matches!(
            read_rec_registry(bad.as_bytes()),
            Err(AtlasError::Row { line: 2, .. })
        ));
    }

    #[test]
    fn empty_inputs_are_module_errors() {
        assert!(matches!(
            read_rec_registry("".as_bytes()),
            Err(AtlasError::EmptyRegistry)
        ));
        let header_only = FIXTURE.lines().next().unwrap();
        assert!(matches!(
            read_rec_registry(header_only.as_bytes()),
            Err(AtlasError::EmptyRegistry)
        ));
        assert!(matches!(
            read_rec_registry("id,zone\nr1,NORD\n".as_bytes()),
            Err(AtlasError::MissingColumn(_))
        ));
    }

    #[test]
    fn zonal_shares_hand_count() {
        let mut recs: Vec<_> = (0..4).map(|_| rec(Zone::Nord, None, &[])).collect();
        recs.push(rec(Zone::Sud, None, &[]));
        let s = zonal_shares(&recs).unwrap();
        assert_eq!(s.share(Zone::Nord), 80.0);
        assert_eq!(s.share(Zone::Sud), 20.0);
        assert_eq!(s.share(Zone::Sard), 0.0);
        assert_eq!(s.total_recs, 5);
        assert!(zonal_shares(&[]).is_err());
    }

    #[test]
    fn degenerate_single_zone_distribution() {
        let recs: Vec<_> = (0..3).map(|_| rec(Zone::Cala, None, &[])).collect();
        let s = zonal_shares(&recs).unwrap();
        assert_eq!(s.share(Zone::Cala), 100.0);
        assert_eq!(s.shares_pct.values().sum::<f64>(), 100.0);
    }

    #[test]
    fn avg_total_capacity_examples() {
        let one = [rec(Zone::Nord, Some(100.0), &[(Category::Public, 40.0)])];
        let s = avg_total_capacity(&one, Category::Public, Zone::Nord);
        assert_eq!(s.value, Some(40.0));
        assert_eq!(s.sample_size, 1);

        let two = [
            rec(Zone::Nord, Some(100.0), &[(Category::Public, 40.0)]),
            rec(Zone::Nord, Some(200.0), &[(Category::Public, 50.0)]),
        ];
        assert_eq!(avg_total_capacity(&two, Category::Public, Zone::Nord).value, Some(70.0));
        assert_eq!(avg_total_capacity(&two, Category::Public, Zone::Sud), Stat::empty());
    }

    #[test]
    fn zero_share_is_absence() {
        let mut recs = vec![rec(Zone::Nord, Some(100.0), &[(Category::Sme, 40.0)])];
        let before = avg_total_capacity(&recs, Category::Sme, Zone::Nord);
        recs.push(rec(Zone::Nord, Some(500.0), &[(Category::Sme, 0.0)]));
        let after = avg_total_capacity(&recs, Category::Sme, Zone::Nord);
        assert_eq!(before, after);
        assert_eq!(after.sample_size, 1);
        assert_eq!(avg_capacity_share(&recs, Category::Sme, Zone::Nord).sample_size, 1);
    }

    #[test]
    fn unit_capacity_division() {
        assert_eq!(avg_unit_capacity(70.0, 2.0).unwrap(), 35.0);
        let r = avg_unit_capacity(88.5, 17.7).unwrap();
        assert!((r - 5.0).abs() < 1e-12);
        assert!(matches!(avg_unit_capacity(10.0, 0.0), Err(AtlasError::ZeroUnits(_))));
    }

    #[test]
    fn capacity_share_means() {
        let recs = [
            rec(Zone::Csud, None, &[(Category::Npo, 20.0)]),
            rec(Zone::Csud, None, &[(Category::Npo, 40.0)]),
        ];
        assert_eq!(
            avg_capacity_share(&recs[..1], Category::Npo, Zone::Csud).value,
            Some(20.0)
        );
        assert_eq!(avg_capacity_share(&recs, Category::Npo, Zone::Csud).value, Some(30.0));
        assert_eq!(avg_capacity_share(&recs, Category::Public, Zone::Csud).value, None);
    }

    #[test]
    fn building_type_mode_and_ties() {
        let mut a = rec(Zone::Nord, None, &[]);
        a.building_types
            .insert(Category::Npo, vec!["office".into(), "church".into()]);
        let mut b = rec(Zone::Nord, None, &[]);
        b.building_types.insert(Category::Npo, vec!["office".into()]);
        let recs = vec![a.clone(), b];
        assert_eq!(most_common_building_type(&recs, Category::Npo).unwrap(), "office");
        // one office, one church: lexicographic tie-break
        assert_eq!(most_common_building_type(&[a], Category::Npo).unwrap(), "church");
        assert!(matches!(
            most_common_building_type(&recs, Category::Sme),
            Err(AtlasError::NoBuildingTypes(Category::Sme))
        ));
    }

    #[test]
    fn derived_unit_capacity_reproduces_total() {
        let recs = read_rec_registry(FIXTURE.as_bytes()).unwrap();
        for p in derive_params(&recs, UnitsBasis::Country) {
            if let (Some(one), Some(n), Some(total)) = (
                p.avg_unit_capacity_kwp,
                p.avg_units_per_rec.value,
                p.avg_total_capacity_kwp.value,
            ) {
                assert!((one * n - total).abs() <= 1e-9 * total.abs().max(1.0));
            }
        }
    }
}
