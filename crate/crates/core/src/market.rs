//! Day-ahead bid ledgers, merit-order step curves and uniform-price
//! clearing, with the counterfactual curve shifts that remove REC effects.
//!
//! Quantities are held as integer watt-hours so that cumulative sums, shifts
//! and the equilibrium volume are exact and independent of summation order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::path::Path;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{parse_date, HourKey};
use crate::domain::Zone;

pub const DEFAULT_PRICE_CAP: f64 = 4000.0;

const WH_PER_MWH: i64 = 1_000_000;

/// Energy volume in watt-hours.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Volume(i64);

impl Volume {
    pub const ZERO: Volume = Volume(0);

    pub const fn from_wh(wh: i64) -> Volume {
        Volume(wh)
    }

    /// Rounds to the nearest watt-hour. `None` for non-finite or
    /// out-of-range input.
    pub fn from_mwh(mwh: f64) -> Option<Volume> {
        let wh = (mwh * WH_PER_MWH as f64).round();
        (wh.is_finite() && wh.abs() < 9.0e18).then_some(Volume(wh as i64))
    }

    pub fn wh(self) -> i64 {
        self.0
    }

    pub fn mwh(self) -> f64 {
        self.0 as f64 / WH_PER_MWH as f64
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl Add for Volume {
    type Output = Volume;
    fn add(self, rhs: Volume) -> Volume {
        Volume(self.0 + rhs.0)
    }
}

impl AddAssign for Volume {
    fn add_assign(&mut self, rhs: Volume) {
        self.0 += rhs.0;
    }
}

impl Sub for Volume {
    type Output = Volume;
    fn sub(self, rhs: Volume) -> Volume {
        Volume(self.0 - rhs.0)
    }
}

impl Sum for Volume {
    fn sum<I: Iterator<Item = Volume>>(iter: I) -> Volume {
        iter.fold(Volume::ZERO, Add::add)
    }
}

/// Exact decimal MWh with six fractional digits.
impl fmt::Display for Volume {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let unit = WH_PER_MWH as u64;
        write!(f, "{sign}{}.{:06}", abs / unit, abs % unit)
    }
}

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("no {0} bids for this hour")]
    EmptyCurve(Side),
    #[error("invalid bid: price {price}, quantity {quantity} Wh")]
    InvalidBid { price: f64, quantity: i64 },
    #[error("curve violates step invariants: {0}")]
    BrokenCurve(String),
    #[error("shift must be a finite non-negative MWh amount, got {0}")]
    InvalidShift(f64),
    #[error("supply removal of {requested} MWh exhausts the {available} MWh on offer")]
    SupplyExhausted { requested: Volume, available: Volume },
    #[error("only {available} MWh offered at zero price, {requested} MWh requested")]
    InsufficientZeroPrice { requested: Volume, available: Volume },
    #[error("cannot read ledger {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ledger schema mismatch: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Supply,
    Demand,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Supply => "supply",
            Side::Demand => "demand",
        })
    }
}

/// A price-quantity pair for one side of one zone-hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub price: f64,
    pub quantity: Volume,
}

impl Bid {
    pub fn new(price: f64, quantity: Volume) -> Bid {
        Bid { price, quantity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub price: f64,
    pub cumulative: Volume,
}

/// Aggregated merit-order curve. Supply prices rise and demand prices fall
/// along strictly increasing cumulative quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCurve {
    side: Side,
    steps: Vec<Step>,
}

impl StepCurve {
    /// Sorts bids in merit order, merges equal prices and accumulates.
    pub fn from_bids(side: Side, bids: &[Bid]) -> Result<StepCurve, MarketError> {
        if bids.is_empty() {
            return Err(MarketError::EmptyCurve(side));
        }
        if let Some(b) = bids.iter().find(|b| !b.price.is_finite() || !b.quantity.is_positive()) {
            return Err(MarketError::InvalidBid {
                price: b.price,
                quantity: b.quantity.wh(),
            });
        }
        let mut sorted: Vec<Bid> = bids.to_vec();
        match side {
            Side::Supply => sorted.sort_by(|a, b| a.price.total_cmp(&b.price)),
            Side::Demand => sorted.sort_by(|a, b| b.price.total_cmp(&a.price)),
        }
        let mut steps: Vec<Step> = Vec::with_capacity(sorted.len());
        let mut cumulative = Volume::ZERO;
        for b in sorted {
            cumulative += b.quantity;
            match steps.last_mut() {
                Some(last) if last.price == b.price => last.cumulative = cumulative,
                _ => steps.push(Step {
                    price: b.price,
                    cumulative,
                }),
            }
        }
        Ok(StepCurve { side, steps })
    }

    /// Builds a curve from explicit steps, checking the invariants.
    pub fn from_steps(side: Side, steps: Vec<Step>) -> Result<StepCurve, MarketError> {
        let curve = StepCurve { side, steps };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if self.steps.is_empty() {
            return Err(MarketError::EmptyCurve(self.side));
        }
        let mut prev: Option<&Step> = None;
        for s in &self.steps {
            if !s.price.is_finite() {
                return Err(MarketError::BrokenCurve(format!("non-finite price {}", s.price)));
            }
            if let Some(p) = prev {
                if s.cumulative <= p.cumulative {
                    return Err(MarketError::BrokenCurve("cumulative quantity not increasing".into()));
                }
                let ordered = match self.side {
                    Side::Supply => s.price > p.price,
                    Side::Demand => s.price < p.price,
                };
                if !ordered {
                    return Err(MarketError::BrokenCurve(format!(
                        "{} prices out of merit order at {}",
                        self.side, s.price
                    )));
                }
            } else if !s.cumulative.is_positive() {
                return Err(MarketError::BrokenCurve("first step has no quantity".into()));
            }
            prev = Some(s);
        }
        Ok(())
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn total(&self) -> Volume {
        self.steps.last().map(|s| s.cumulative).unwrap_or_default()
    }

    /// Cumulative quantity offered at or below `price` (supply) or bid at or
    /// above `price` (demand).
    pub fn quantity_at(&self, price: f64) -> Volume {
        let within = |s: &&Step| match self.side {
            Side::Supply => s.price <= price,
            Side::Demand => s.price >= price,
        };
        self.steps
            .iter()
            .take_while(within)
            .last()
            .map(|s| s.cumulative)
            .unwrap_or_default()
    }
}

/// How the curves meet at the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingKind {
    /// Demand crosses strictly inside a flat supply step.
    Interior,
    /// Curves share a vertical segment; the price is the supply step price
    /// serving the marginal unit.
    VerticalOverlap,
    /// Curves share a flat segment at the clearing price; the quantity is the
    /// largest volume traded there.
    HorizontalOverlap,
    NoCross,
}

impl CrossingKind {
    pub fn label(self) -> &'static str {
        match self {
            CrossingKind::Interior => "interior",
            CrossingKind::VerticalOverlap => "vertical-overlap",
            CrossingKind::HorizontalOverlap => "horizontal-overlap",
            CrossingKind::NoCross => "no-cross",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    /// `None` when the curves do not cross.
    pub price: Option<f64>,
    pub quantity: Volume,
    pub kind: CrossingKind,
}

/// Uniform-price clearing: the traded volume is the largest
/// `min(S(p), D(p))` over all prices, and the price is the lowest supply
/// step price achieving it.
pub fn clear(supply: &StepCurve, demand: &StepCurve) -> Equilibrium {
    let d = &demand.steps;
    let mut j = d.len();
    let mut best: Option<(usize, usize, Volume)> = None;
    for (i, s) in supply.steps.iter().enumerate() {
        while j > 0 && d[j - 1].price < s.price {
            j -= 1;
        }
        if j == 0 {
            break;
        }
        let traded = s.cumulative.min(d[j - 1].cumulative);
        if best.is_none_or(|(_, _, q)| traded > q) {
            best = Some((i, j, traded));
        }
    }

    let Some((i, j, quantity)) = best else {
        return Equilibrium {
            price: None,
            quantity: Volume::ZERO,
            kind: CrossingKind::NoCross,
        };
    };
    let price = supply.steps[i].price;
    let s_at = supply.steps[i].cumulative;
    let s_below = if i > 0 {
        supply.steps[i - 1].cumulative
    } else {
        Volume::ZERO
    };
    let d_at = d[j - 1].cumulative;
    let kind = if d[j - 1].price == price && {
        let d_above = if j > 1 { d[j - 2].cumulative } else { Volume::ZERO };
        s_below.max(d_above) < s_at.min(d_at)
    } {
        CrossingKind::HorizontalOverlap
    } else if s_at > d_at {
        CrossingKind::Interior
    } else {
        CrossingKind::VerticalOverlap
    };
    Equilibrium {
        price: Some(price),
        quantity,
        kind,
    }
}

/// Adds a price-taking block of `delta` at `cap`: `D'(p) = D(p) + delta`
/// for every price up to the cap.
pub fn shift_demand_right(demand: &StepCurve, delta: Volume, cap: f64) -> Result<StepCurve, MarketError> {
    if delta < Volume::ZERO {
        return Err(MarketError::InvalidShift(delta.mwh()));
    }
    if delta == Volume::ZERO {
        return Ok(demand.clone());
    }
    let mut steps = Vec::with_capacity(demand.steps.len() + 1);
    let mut inserted = false;
    for s in &demand.steps {
        if !inserted && s.price <= cap {
            inserted = true;
            if s.price < cap {
                let base = steps.last().map(|p: &Step| p.cumulative).unwrap_or_default();
                steps.push(Step {
                    price: cap,
                    cumulative: base + delta,
                });
            }
        }
        steps.push(Step {
            price: s.price,
            cumulative: if inserted { s.cumulative + delta } else { s.cumulative },
        });
    }
    if !inserted {
        let base = demand.total();
        steps.push(Step {
            price: cap,
            cumulative: base + delta,
        });
    }
    Ok(StepCurve {
        side: Side::Demand,
        steps,
    })
}

/// Where supply capacity is withdrawn for the counterfactual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupplyShiftMode {
    /// Remove from the cheapest end of the merit order.
    #[default]
    CheapEnd,
    /// Remove only capacity offered at zero price; fail if there is too
    /// little of it.
    ZeroPriceOnly,
}

/// `S'(p) = max(S(p) - delta, 0)`; steps left without quantity are dropped.
pub fn shift_supply_left(supply: &StepCurve, delta: Volume, mode: SupplyShiftMode) -> Result<StepCurve, MarketError> {
    if delta < Volume::ZERO {
        return Err(MarketError::InvalidShift(delta.mwh()));
    }
    if delta == Volume::ZERO {
        return Ok(supply.clone());
    }
    let available = supply.total();
    if delta >= available {
        return Err(MarketError::SupplyExhausted {
            requested: delta,
            available,
        });
    }
    if mode == SupplyShiftMode::ZeroPriceOnly {
        let zero_priced = supply.quantity_at(0.0);
        if zero_priced < delta {
            return Err(MarketError::InsufficientZeroPrice {
                requested: delta,
                available: zero_priced,
            });
        }
    }
    let steps = supply
        .steps
        .iter()
        .filter(|s| s.cumulative > delta)
        .map(|s| Step {
            price: s.price,
            cumulative: s.cumulative - delta,
        })
        .collect();
    Ok(StepCurve {
        side: Side::Supply,
        steps,
    })
}

/// REC self-consumption added back to demand and REC injection taken out of
/// supply, for one zone-hour.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShiftAmounts {
    pub delta_demand: Volume,
    pub delta_supply: Volume,
}

impl ShiftAmounts {
    pub fn from_mwh(delta_demand: f64, delta_supply: f64) -> Result<ShiftAmounts, MarketError> {
        let conv = |v: f64| {
            if v.is_finite() && v >= 0.0 {
                Volume::from_mwh(v).ok_or(MarketError::InvalidShift(v))
            } else {
                Err(MarketError::InvalidShift(v))
            }
        };
        Ok(ShiftAmounts {
            delta_demand: conv(delta_demand)?,
            delta_supply: conv(delta_supply)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearingOptions {
    pub price_cap: f64,
    pub supply_shift: SupplyShiftMode,
}

impl Default for ClearingOptions {
    fn default() -> Self {
        ClearingOptions {
            price_cap: DEFAULT_PRICE_CAP,
            supply_shift: SupplyShiftMode::CheapEnd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualOutcome {
    pub actual: Equilibrium,
    pub synthetic: Equilibrium,
}

/// Clears the observed curves and the curves without RECs.
pub fn counterfactual_clear(
    supply: &StepCurve,
    demand: &StepCurve,
    shifts: ShiftAmounts,
    opts: ClearingOptions,
) -> Result<CounterfactualOutcome, MarketError> {
    let actual = clear(supply, demand);
    let synt_supply = shift_supply_left(supply, shifts.delta_supply, opts.supply_shift)?;
    let synt_demand = shift_demand_right(demand, shifts.delta_demand, opts.price_cap)?;
    Ok(CounterfactualOutcome {
        actual,
        synthetic: clear(&synt_supply, &synt_demand),
    })
}

/// Which submitted bids enter curve reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BidsMode {
    /// Every valid bid, awarded or not.
    #[default]
    All,
    /// Awarded bids only.
    Accepted,
}

impl std::str::FromStr for BidsMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(BidsMode::All),
            "accepted" => Ok(BidsMode::Accepted),
            other => Err(format!("unknown bids mode `{other}` (expected all|accepted)")),
        }
    }
}

/// One parsed ledger row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidRecord {
    pub zone: Zone,
    pub key: HourKey,
    pub side: Side,
    /// Cap price for price-taking demand.
    pub price: f64,
    pub price_taking: bool,
    pub quantity: Volume,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LedgerStats {
    pub rows: usize,
    pub kept: usize,
    pub skipped_malformed: usize,
    pub skipped_rejected_status: usize,
    pub skipped_zero_quantity: usize,
    /// Valid but unawarded rows left out in accepted-only mode.
    pub skipped_not_accepted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerOptions {
    pub price_cap: f64,
    pub mode: BidsMode,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        LedgerOptions {
            price_cap: DEFAULT_PRICE_CAP,
            mode: BidsMode::All,
        }
    }
}

/// Column names of the canonical ledger schema.
pub const LEDGER_COLUMNS: [&str; 7] = [
    "date",
    "hour",
    "zone",
    "side",
    "price_eur_mwh",
    "quantity_mwh",
    "status",
];

/// Native public-offers column names, in canonical order.
pub const NATIVE_LEDGER_COLUMNS: [&str; 7] = [
    "BID_OFFER_DATE_DT",
    "INTERVAL_NO",
    "ZONE_CD",
    "PURPOSE_CD",
    "ENERGY_PRICE_NO",
    "QUANTITY_NO",
    "STATUS_CD",
];

enum Status {
    Accepted,
    Submitted,
    Rejected,
}

fn parse_status(s: &str) -> Option<Status> {
    match s.trim().to_ascii_lowercase().as_str() {
        "acc" | "accepted" => Some(Status::Accepted),
        // REJ marks a valid bid that was not awarded in the merit order.
        "rej" | "sub" | "submitted" | "not_accepted" => Some(Status::Submitted),
        "inc" | "rev" | "rep" | "ann" | "rejected" | "invalid" => Some(Status::Rejected),
        _ => None,
    }
}

fn parse_side(s: &str) -> Option<Side> {
    match s.trim().to_ascii_lowercase().as_str() {
        "supply" | "off" | "offer" | "sell" => Some(Side::Supply),
        "demand" | "bid" | "buy" => Some(Side::Demand),
        _ => None,
    }
}

enum RowOutcome {
    Kept(BidRecord),
    Malformed(String),
    RejectedStatus,
    ZeroQuantity,
    NotAccepted,
}

/// Streaming ledger reader. Bad rows are logged, counted and skipped; a
/// header that matches neither schema is fatal.
pub struct LedgerReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    columns: [usize; 7],
    opts: LedgerOptions,
    line: usize,
    stats: LedgerStats,
}

impl<R: Read> LedgerReader<R> {
    pub fn new(reader: R, opts: LedgerOptions) -> Result<Self, MarketError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| MarketError::Schema(e.to_string()))?.clone();
        let find = |names: &[&str; 7]| -> Option<[usize; 7]> {
            let mut cols = [0usize; 7];
            for (k, name) in names.iter().enumerate() {
                cols[k] = headers.iter().position(|h| h.eq_ignore_ascii_case(name))?;
            }
            Some(cols)
        };
        let columns = find(&LEDGER_COLUMNS)
            .or_else(|| find(&NATIVE_LEDGER_COLUMNS))
            .ok_or_else(|| {
                MarketError::Schema(format!(
                    "expected columns {} (or the native public-offers names)",
                    LEDGER_COLUMNS.join(", ")
                ))
            })?;
        Ok(LedgerReader {
            records: rdr.into_records(),
            columns,
            opts,
            line: 1,
            stats: LedgerStats::default(),
        })
    }

    pub fn stats(&self) -> LedgerStats {
        self.stats
    }

    fn parse(&self, row: &csv::StringRecord) -> RowOutcome {
        let get = |k: usize| row.get(self.columns[k]).unwrap_or("").trim();
        let Some(date) = parse_date(get(0)) else {
            return RowOutcome::Malformed(format!("bad date `{}`", get(0)));
        };
        let hour = match get(1).parse::<u8>() {
            Ok(h) if (1..=25).contains(&h) => h,
            _ => return RowOutcome::Malformed(format!("bad hour `{}`", get(1))),
        };
        let zone = match get(2).parse::<Zone>() {
            Ok(z) => z,
            Err(e) => return RowOutcome::Malformed(e.to_string()),
        };
        let Some(side) = parse_side(get(3)) else {
            return RowOutcome::Malformed(format!("bad side `{}`", get(3)));
        };
        let accepted = match parse_status(get(6)) {
            Some(Status::Accepted) => true,
            Some(Status::Submitted) => false,
            Some(Status::Rejected) => return RowOutcome::RejectedStatus,
            None => return RowOutcome::Malformed(format!("bad status `{}`", get(6))),
        };
        let quantity = match get(5).parse::<f64>().ok().and_then(Volume::from_mwh) {
            Some(q) if q.is_positive() => q,
            Some(q) if q == Volume::ZERO => return RowOutcome::ZeroQuantity,
            _ => return RowOutcome::Malformed(format!("bad quantity `{}`", get(5))),
        };
        let cap = self.opts.price_cap;
        let raw_price = get(4);
        let (price, price_taking) =
            if side == Side::Demand && (raw_price.is_empty() || raw_price.eq_ignore_ascii_case("cap")) {
                (cap, true)
            } else {
                match raw_price.parse::<f64>() {
                    Ok(p) if p.is_finite() && p >= 0.0 && p < cap => (p, false),
                    Ok(p) if p.is_finite() && side == Side::Demand && p >= cap => (cap, true),
                    Ok(p) if p == cap => (cap, false),
                    _ => return RowOutcome::Malformed(format!("bad price `{raw_price}`")),
                }
            };
        if self.opts.mode == BidsMode::Accepted && !accepted {
            return RowOutcome::NotAccepted;
        }
        RowOutcome::Kept(BidRecord {
            zone,
            key: HourKey::new(date, hour),
            side,
            price,
            price_taking,
            quantity,
            accepted,
        })
    }
}

impl<R: Read> Iterator for LedgerReader<R> {
    type Item = BidRecord;

    fn next(&mut self) -> Option<BidRecord> {
        loop {
            let row = self.records.next()?;
            self.line += 1;
            self.stats.rows += 1;
            let outcome = match row {
                Ok(row) => self.parse(&row),
                Err(e) => RowOutcome::Malformed(e.to_string()),
            };
            match outcome {
                RowOutcome::Kept(r) => {
                    self.stats.kept += 1;
                    return Some(r);
                }
                RowOutcome::Malformed(msg) => {
                    debug!("ledger line {}: {msg}; row skipped", self.line);
                    self.stats.skipped_malformed += 1;
                }
                RowOutcome::RejectedStatus => self.stats.skipped_rejected_status += 1,
                RowOutcome::ZeroQuantity => self.stats.skipped_zero_quantity += 1,
                RowOutcome::NotAccepted => self.stats.skipped_not_accepted += 1,
            }
        }
    }
}

pub fn read_bid_ledger<R: Read>(reader: R, opts: LedgerOptions) -> Result<(Vec<BidRecord>, LedgerStats), MarketError> {
    let mut rdr = LedgerReader::new(reader, opts)?;
    let records: Vec<BidRecord> = rdr.by_ref().collect();
    let stats = rdr.stats();
    if stats.rows == 0 {
        warn!("bid ledger has no rows");
    } else if stats.skipped_malformed > 0 {
        warn!("bid ledger: {} malformed rows skipped", stats.skipped_malformed);
    }
    Ok((records, stats))
}

pub fn parse_bid_ledger(
    path: impl AsRef<Path>,
    opts: LedgerOptions,
) -> Result<(Vec<BidRecord>, LedgerStats), MarketError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MarketError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_bid_ledger(std::io::BufReader::new(file), opts)
}

/// Raw bids of one zone-hour, both sides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HourBids {
    pub supply: Vec<Bid>,
    pub demand: Vec<Bid>,
}

impl HourBids {
    pub fn curves(&self) -> Result<(StepCurve, StepCurve), MarketError> {
        Ok((
            StepCurve::from_bids(Side::Supply, &self.supply)?,
            StepCurve::from_bids(Side::Demand, &self.demand)?,
        ))
    }
}

pub type HourIndex = BTreeMap<(Zone, HourKey), HourBids>;

/// Groups ledger records by zone and settlement period.
pub fn index_by_hour(records: impl IntoIterator<Item = BidRecord>) -> HourIndex {
    let mut index = HourIndex::new();
    for r in records {
        let entry = index.entry((r.zone, r.key)).or_default();
        let bid = Bid::new(r.price, r.quantity);
        match r.side {
            Side::Supply => entry.supply.push(bid),
            Side::Demand => entry.demand.push(bid),
        }
    }
    index
}
