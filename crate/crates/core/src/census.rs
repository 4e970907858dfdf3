//! Order-of-magnitude estimators for environment-induced intricacy waves.
//!
//! A box of linear size `L` immersed in an environment of number density
//! `n_e` and mean molecular speed `v_e` receives `n_e v_e L²` wall
//! collisions per unit time, each launching an intricacy wave that crosses
//! the box at the in-gas front speed `v'`. That gives `n_e (v_e/v') L³`
//! waves in flight and, since only a shell of one mean free path behind each
//! front is active, `n_e L² λ` active waves at any point.

use crate::error::{Error, Result};

/// Inputs in SI units. Callers supply densities and speeds directly; no
/// physical constants are baked in.
#[derive(Debug, Clone, Copy)]
pub struct CensusInputs {
    /// Environment number density (1/m³).
    pub n_e: f64,
    /// Environment mean molecular speed (m/s).
    pub v_e: f64,
    /// In-gas front speed v' (m/s).
    pub v_prime: f64,
    /// Box length scale (m).
    pub box_length: f64,
    /// In-gas mean free path (m).
    pub lambda_mfp: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CensusReport {
    /// Wave generation rate `n_e v_e L²` (1/s).
    pub rate_tau_d_inv: f64,
    /// Waves in flight `n_e (v_e/v') L³`.
    pub waves_in_box: f64,
    /// Active waves at a point `n_e L² λ`.
    pub active_waves: f64,
}

pub fn wave_census(inputs: &CensusInputs) -> Result<CensusReport> {
    let fields = [
        ("n_e", inputs.n_e),
        ("v_e", inputs.v_e),
        ("v_prime", inputs.v_prime),
        ("box_length", inputs.box_length),
        ("lambda_mfp", inputs.lambda_mfp),
    ];
    for (name, value) in fields {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::config(format!(
                "census input {name} must be finite and positive, got {value}"
            )));
        }
    }
    let l2 = inputs.box_length * inputs.box_length;
    Ok(CensusReport {
        rate_tau_d_inv: inputs.n_e * inputs.v_e * l2,
        waves_in_box: inputs.n_e * (inputs.v_e / inputs.v_prime) * l2 * inputs.box_length,
        active_waves: inputs.n_e * l2 * inputs.lambda_mfp,
    })
}

/// Argon at standard conditions in a 10 cm box, the worked example.
pub fn argon_standard_conditions() -> CensusInputs {
    CensusInputs {
        n_e: 2.7e25,
        v_e: 400.0,
        v_prime: 230.0,
        box_length: 0.1,
        lambda_mfp: 7e-8,
    }
}
