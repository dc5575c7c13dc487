//! Feature catalogue: calendar columns, market covariates and the R1–R5 groups.

use serde::{Deserialize, Serialize};

use super::calendar::CALENDAR_FEATURES;
use crate::error::{Error, Result};

/// Name of the target (day-ahead price) column.
pub const PRICE: &str = "price";

/// Suffix of week-lagged future-proxy columns.
pub const PROXY_SUFFIX: &str = "_lag168";

/// Lag, in hours, of the future-proxy representation.
pub const PROXY_LAG_HOURS: i64 = 168;

pub const MARKET_FEATURES: [&str; 7] = [
    "co2_price",
    "load",
    "gas_price",
    "synthetic_price",
    "gen_nonrenewable",
    "gen_renewable",
    "cross_border_flow",
];

/// Gas plant efficiency and emission intensity (gCO2/kWh) of the synthetic price.
const PLANT_EFFICIENCY: f64 = 0.55;
const EMISSION_INTENSITY: f64 = 400.0;

/// Merit-order proxy for the price set by a gas plant, in EUR/MWh.
pub fn synthetic_price(gas_price: f64, co2_price: f64) -> Result<f64> {
    if !(gas_price >= 0.0 && co2_price >= 0.0) {
        return Err(Error::domain(format!(
            "synthetic price needs non-negative inputs, got gas={gas_price} co2={co2_price}"
        )));
    }
    Ok(gas_price / PLANT_EFFICIENCY + EMISSION_INTENSITY * co2_price / 1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    Calendar,
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl FeatureGroup {
    pub const CANDIDATES: [FeatureGroup; 5] = [
        FeatureGroup::R1,
        FeatureGroup::R2,
        FeatureGroup::R3,
        FeatureGroup::R4,
        FeatureGroup::R5,
    ];

    pub fn members(self) -> &'static [&'static str] {
        match self {
            FeatureGroup::Calendar => &CALENDAR_FEATURES,
            FeatureGroup::R1 => &["co2_price", "load"],
            FeatureGroup::R2 => &["gas_price", "synthetic_price"],
            FeatureGroup::R3 => &["gen_nonrenewable", "gen_renewable"],
            FeatureGroup::R4 => &["cross_border_flow", "gen_nonrenewable", "gen_renewable"],
            FeatureGroup::R5 => &["load", "gen_nonrenewable", "gen_renewable"],
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "calendar" => Ok(FeatureGroup::Calendar),
            "r1" => Ok(FeatureGroup::R1),
            "r2" => Ok(FeatureGroup::R2),
            "r3" => Ok(FeatureGroup::R3),
            "r4" => Ok(FeatureGroup::R4),
            "r5" => Ok(FeatureGroup::R5),
            _ => Err(Error::domain(format!("unknown feature group `{s}`"))),
        }
    }

    /// Specs for both representations of the group's members.
    pub fn specs(self) -> Vec<FeatureSpec> {
        let members: Vec<String> = self.members().iter().map(|s| s.to_string()).collect();
        if self == FeatureGroup::Calendar {
            return vec![FeatureSpec {
                group: self,
                members,
                representation: Representation::PastOnly,
                market_dependent: false,
            }];
        }
        vec![
            FeatureSpec {
                group: self,
                members: members.clone(),
                representation: Representation::PastOnly,
                market_dependent: true,
            },
            FeatureSpec {
                group: self,
                members: members.iter().map(|m| proxy_name(m)).collect(),
                representation: Representation::FutureProxy,
                market_dependent: false,
            },
        ]
    }
}

impl std::fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FeatureGroup::Calendar => "calendar",
            FeatureGroup::R1 => "R1",
            FeatureGroup::R2 => "R2",
            FeatureGroup::R3 => "R3",
            FeatureGroup::R4 => "R4",
            FeatureGroup::R5 => "R5",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    PastOnly,
    /// Same feature observed exactly one week earlier.
    FutureProxy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub group: FeatureGroup,
    pub members: Vec<String>,
    pub representation: Representation,
    pub market_dependent: bool,
}

/// How a single column behaves with respect to the forecaster's information set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    /// Price history: known over the whole input, unknown over the horizon.
    Target,
    /// Deterministic; known everywhere.
    Calendar,
    /// Observed market covariate; hidden after gate closure and over the horizon.
    Market,
    /// Week-lagged copy of a market covariate; known everywhere.
    Proxy,
}

impl FeatureKind {
    pub fn market_dependent(self) -> bool {
        self == FeatureKind::Market
    }

    pub fn known_in_future(self) -> bool {
        matches!(self, FeatureKind::Calendar | FeatureKind::Proxy)
    }
}

pub fn proxy_name(feature: &str) -> String {
    format!("{feature}{PROXY_SUFFIX}")
}

/// Resolves a column name to its kind.
pub fn resolve_feature(name: &str) -> Result<FeatureKind> {
    if name == PRICE {
        return Ok(FeatureKind::Target);
    }
    if CALENDAR_FEATURES.contains(&name) {
        return Ok(FeatureKind::Calendar);
    }
    if MARKET_FEATURES.contains(&name) {
        return Ok(FeatureKind::Market);
    }
    if let Some(base) = name.strip_suffix(PROXY_SUFFIX) {
        if MARKET_FEATURES.contains(&base) || base == PRICE {
            return Ok(FeatureKind::Proxy);
        }
    }
    Err(Error::domain(format!("unknown feature `{name}`")))
}

/// Union of market members of `groups`, in catalogue order.
pub fn market_members(groups: &[FeatureGroup]) -> Vec<&'static str> {
    MARKET_FEATURES
        .iter()
        .copied()
        .filter(|f| groups.iter().any(|g| g.members().contains(f)))
        .collect()
}
