//! Rydberg nS data of rubidium: C6 coefficients and decay rates per principal quantum number.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rb D2 linewidth Γ in s⁻¹ (2π × 6.07 MHz).
pub const GAMMA_D2: f64 = 2.0 * std::f64::consts::PI * 6.07e6;
/// Rb D2 wavelength in μm.
pub const LAMBDA_UM: f64 = 0.78;

const BUNDLED: &str = include_str!("../data/rb_ns.csv");

/// C6 in GHz·μm⁶ (energy/h) to Γ·λ⁶.
pub fn c6_to_units(c6_ghz_um6: f64) -> f64 {
    c6_ghz_um6 * 1e9 * 2.0 * std::f64::consts::PI / GAMMA_D2 / LAMBDA_UM.powi(6)
}

pub fn c6_from_units(c6: f64) -> f64 {
    c6 * LAMBDA_UM.powi(6) * GAMMA_D2 / (1e9 * 2.0 * std::f64::consts::PI)
}

/// Decay rate in μs⁻¹ to units of Γ.
pub fn gamma_to_units(per_us: f64) -> f64 {
    per_us * 1e6 / GAMMA_D2
}

pub fn gamma_from_units(gamma: f64) -> f64 {
    gamma * GAMMA_D2 / 1e6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Row {
    n: u32,
    #[serde(rename = "C6_GHz_um6")]
    c6: f64,
    gamma_per_us: f64,
    source: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RydbergState {
    pub n: u32,
    /// Γ·λ⁶.
    pub c6: f64,
    /// Γ.
    pub gamma: f64,
    pub provenance: String,
    /// Source values in GHz·μm⁶ and μs⁻¹.
    pub c6_ghz_um6: f64,
    pub gamma_per_us: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateTable {
    pub states: Vec<RydbergState>,
}

pub fn load_states(path: &Path) -> Result<StateTable> {
    let f = std::fs::File::open(path)?;
    parse_states(f)
}

pub fn bundled() -> StateTable {
    parse_states(BUNDLED.as_bytes()).expect("bundled table is valid")
}

pub fn parse_states<R: Read>(reader: R) -> Result<StateTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let want = ["n", "C6_GHz_um6", "gamma_per_us", "source"];
    if header.iter().collect::<Vec<_>>() != want {
        return Err(Error::Data(format!("expected header {}", want.join(","))));
    }
    let mut states: Vec<RydbergState> = Vec::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| Error::Data(format!("row {i}: {e}")))?;
        if !(row.c6 > 0.0) || !(row.gamma_per_us > 0.0) {
            return Err(Error::Data(format!("row {i}: C6 and gamma must be positive")));
        }
        if let Some(prev) = states.last() {
            if row.n <= prev.n {
                return Err(Error::Data(format!("row {i}: n must increase")));
            }
            if gamma_to_units(row.gamma_per_us) >= prev.gamma {
                return Err(Error::Data(format!("row {i}: gamma must decrease with n")));
            }
        }
        states.push(RydbergState {
            n: row.n,
            c6: c6_to_units(row.c6),
            gamma: gamma_to_units(row.gamma_per_us),
            provenance: row.source,
            c6_ghz_um6: row.c6,
            gamma_per_us: row.gamma_per_us,
        });
    }
    if states.is_empty() {
        return Err(Error::Data("state table is empty".into()));
    }
    Ok(StateTable { states })
}

impl StateTable {
    /// Writes the table back in physical units.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.states {
            w.serialize(Row {
                n: s.n,
                c6: s.c6_ghz_um6,
                gamma_per_us: s.gamma_per_us,
                source: s.provenance.clone(),
            })
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn range(&self) -> (u32, u32) {
        (self.states[0].n, self.states[self.states.len() - 1].n)
    }

    /// Log-log interpolation of C6 and γ inside the tabulated range.
    pub fn interpolate_state(&self, n: u32) -> Result<RydbergState> {
        let (lo, hi) = self.range();
        if n < lo || n > hi {
            return Err(Error::InvalidInput(format!("n = {n} is outside the table range [{lo}, {hi}]")));
        }
        let k = self.states.partition_point(|s| s.n < n);
        let b = &self.states[k];
        if b.n == n {
            return Ok(b.clone());
        }
        let a = &self.states[k - 1];
        let t = ((n as f64).ln() - (a.n as f64).ln()) / ((b.n as f64).ln() - (a.n as f64).ln());
        let lerp = |x: f64, y: f64| (x.ln() + t * (y.ln() - x.ln())).exp();
        let (c6, gamma) = (lerp(a.c6, b.c6), lerp(a.gamma, b.gamma));
        Ok(RydbergState {
            n,
            c6,
            gamma,
            c6_ghz_um6: c6_from_units(c6),
            gamma_per_us: gamma_from_units(gamma),
            provenance: format!("log-log interpolation between n={} and n={}", a.n, b.n),
        })
    }
}
