//! Feature frames assembled from a zone's cached series.

use super::config::ZoneConfig;
use super::csvio::load_csv;
use crate::error::{Error, Result};
use crate::timeseries::features::{market_members, PRICE};
use crate::timeseries::{synthetic_price, FeatureFrame, FeatureGroup, HourlySeries};

/// Hourly synthetic price on the timestamps shared by gas and CO2 prices.
pub fn synthetic_price_series(gas: &HourlySeries, co2: &HourlySeries) -> Result<HourlySeries> {
    let mut ts = Vec::new();
    let mut values = Vec::new();
    for (t, g) in gas.iter() {
        if let Some(c) = co2.value_at(t) {
            ts.push(t);
            values.push(synthetic_price(g, c)?);
        }
    }
    if ts.is_empty() {
        return Err(Error::Empty("overlap of gas and CO2 prices"));
    }
    HourlySeries::new(gas.zone.clone(), ts, values)
}

fn load_feature(zone: &ZoneConfig, name: &str) -> Result<HourlySeries> {
    let path = zone.cache_path(name);
    if name == "synthetic_price" && !path.exists() {
        let gas = load_csv(&zone.cache_path("gas_price"), &zone.code)?;
        let co2 = load_csv(&zone.cache_path("co2_price"), &zone.code)?;
        return synthetic_price_series(&gas, &co2);
    }
    load_csv(&path, &zone.code)
}

/// Price, calendar columns and the market members of `groups`.
pub fn load_zone_frame(zone: &ZoneConfig, groups: &[FeatureGroup], proxies: bool) -> Result<FeatureFrame> {
    let price = load_feature(zone, PRICE)?;
    let names = market_members(groups);
    let series: Vec<HourlySeries> = names.iter().map(|n| load_feature(zone, n)).collect::<Result<_>>()?;
    let market: Vec<(&str, &HourlySeries)> = names.iter().copied().zip(series.iter()).collect();
    FeatureFrame::assemble(&price, &market, zone.tz()?, &zone.holiday_set(), proxies)
}
