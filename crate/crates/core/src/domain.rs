//! Market zones and prosumer categories shared by every stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Italian day-ahead bidding zones, cleared as closed systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Zone {
    Nord,
    Cnord,
    Csud,
    Cala,
    Sud,
    Sici,
    Sard,
}

impl Zone {
    pub const ALL: [Zone; 7] = [
        Zone::Nord,
        Zone::Cnord,
        Zone::Csud,
        Zone::Cala,
        Zone::Sud,
        Zone::Sici,
        Zone::Sard,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Zone::Nord => "NORD",
            Zone::Cnord => "CNORD",
            Zone::Csud => "CSUD",
            Zone::Cala => "CALA",
            Zone::Sud => "SUD",
            Zone::Sici => "SICI",
            Zone::Sard => "SARD",
        }
    }

    /// Reference city whose PV yield profile represents the zone.
    pub fn reference_city(self) -> &'static str {
        match self {
            Zone::Nord => "Milan",
            Zone::Cnord => "Florence",
            Zone::Csud => "Rome",
            Zone::Cala => "Catanzaro",
            Zone::Sud => "Brindisi",
            Zone::Sici => "Palermo",
            Zone::Sard => "Cagliari",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown market zone `{0}`")]
pub struct UnknownZone(pub String);

impl FromStr for Zone {
    type Err = UnknownZone;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // CNOR is the operator's own spelling of the central-north zone.
        match s.trim().to_ascii_uppercase().as_str() {
            "NORD" => Ok(Zone::Nord),
            "CNORD" | "CNOR" => Ok(Zone::Cnord),
            "CSUD" => Ok(Zone::Csud),
            "CALA" => Ok(Zone::Cala),
            "SUD" => Ok(Zone::Sud),
            "SICI" => Ok(Zone::Sici),
            "SARD" => Ok(Zone::Sard),
            _ => Err(UnknownZone(s.to_string())),
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl TryFrom<String> for Zone {
    type Error = UnknownZone;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Zone> for String {
    fn from(z: Zone) -> Self {
        z.code().to_string()
    }
}

/// Prosumer / producer category inside a REC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Category {
    Public,
    Residential,
    Sme,
    Npo,
    Standalone,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Public,
        Category::Residential,
        Category::Sme,
        Category::Npo,
        Category::Standalone,
    ];

    /// Categories with an on-site load.
    pub const PROSUMERS: [Category; 4] = [Category::Public, Category::Residential, Category::Sme, Category::Npo];

    pub fn name(self) -> &'static str {
        match self {
            Category::Public => "Public",
            Category::Residential => "Residential",
            Category::Sme => "SME",
            Category::Npo => "NPO",
            Category::Standalone => "Standalone",
        }
    }

    /// Lower-case token used in column names and file names.
    pub fn slug(self) -> &'static str {
        match self {
            Category::Public => "public",
            Category::Residential => "residential",
            Category::Sme => "sme",
            Category::Npo => "npo",
            Category::Standalone => "standalone",
        }
    }

    pub fn has_load(self) -> bool {
        self != Category::Standalone
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown prosumer category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for Category {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "public" => Ok(Category::Public),
            "residential" => Ok(Category::Residential),
            "sme" => Ok(Category::Sme),
            "npo" => Ok(Category::Npo),
            "standalone" => Ok(Category::Standalone),
            _ => Err(UnknownCategory(s.to_string())),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for Category {
    type Error = UnknownCategory;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Category> for String {
    fn from(c: Category) -> Self {
        c.name().to_string()
    }
}
