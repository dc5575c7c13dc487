//! Energy and emissions accounting for compute runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid carbon intensity in kgCO2e per kWh.
pub const DEFAULT_INTENSITY: f64 = 0.328;
/// Power usage effectiveness of the data centre.
pub const DEFAULT_PUE: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarbonReport {
    pub time_hours: f64,
    pub power_kw: f64,
    pub energy_kwh: f64,
    pub co2e_kg: f64,
    pub co2e_pue_kg: f64,
}

fn check(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and non-negative, got {v}")))
    }
}

pub fn carbon_report(time_hours: f64, power_kw: f64, intensity: f64, pue: f64) -> Result<CarbonReport> {
    check("time", time_hours)?;
    check("power", power_kw)?;
    check("intensity", intensity)?;
    check("pue", pue)?;
    let energy_kwh = time_hours * power_kw;
    let co2e_kg = energy_kwh * intensity;
    Ok(CarbonReport {
        time_hours,
        power_kw,
        energy_kwh,
        co2e_kg,
        co2e_pue_kg: co2e_kg * pue,
    })
}

/// Report for a measured energy total over a known run time.
pub fn from_energy(time_hours: f64, energy_kwh: f64, intensity: f64, pue: f64) -> Result<CarbonReport> {
    check("time", time_hours)?;
    check("energy", energy_kwh)?;
    let power_kw = if time_hours > 0.0 { energy_kwh / time_hours } else { 0.0 };
    let mut r = carbon_report(time_hours, power_kw, intensity, pue)?;
    r.energy_kwh = energy_kwh;
    r.co2e_kg = energy_kwh * intensity;
    r.co2e_pue_kg = r.co2e_kg * pue;
    Ok(r)
}

/// Mean power over an energy-meter log of `seconds,watts` rows (header optional).
pub fn mean_power_kw(log: &str) -> Result<f64> {
    let mut points = Vec::new();
    for (i, line) in log.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            return Err(Error::Parse { index: i, message: "expected `seconds,watts`".into() });
        };
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(t), Ok(w)) => points.push((t, w)),
            _ if i == 0 => continue,
            _ => return Err(Error::Parse { index: i, message: format!("bad row `{line}`") }),
        }
    }
    match points.len() {
        0 => Err(Error::Empty("energy log")),
        1 => Ok(points[0].1 / 1000.0),
        _ => {
            let span = points.last().expect("non-empty").0 - points[0].0;
            if span <= 0.0 {
                return Ok(points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64 / 1000.0);
            }
            let joules: f64 = points.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
            Ok(joules / span / 1000.0)
        }
    }
}
