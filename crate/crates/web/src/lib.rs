//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string.

use mlqaoa::error::Result;
use mlqaoa::fermion::{gaussian_entropy_profile, ground_covariance, initial_parity, jw_compile, FermionObjective};
use mlqaoa::fit::{fit_central_charge, EntropySamples};
use mlqaoa::model::{ansatz_spec, energy_error_percent, exact_ground_energy, ModelKind, ModelSpec};
use mlqaoa::optimizer::Objective;
use mlqaoa::pipeline::{rdm_scan, RunConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest chain the page accepts; Gaussian work is O(N³).
pub const MAX_SITES: usize = 256;

fn free_model(model: &str, g: f64, n: usize) -> Result<ModelSpec> {
    let kind = ModelKind::parse(model)?;
    if kind == ModelKind::Xxz {
        return Err(mlqaoa::error::Error::Capability("xxz needs the state-vector backend, which the page does not ship".into()));
    }
    if n > MAX_SITES {
        return Err(mlqaoa::error::Error::Config(format!("N={n} is above the page limit of {MAX_SITES}")));
    }
    // XY has no field
    let g = if kind == ModelKind::Xy { 0.0 } else { g };
    ModelSpec::new(kind, g, n, kind.boundary())
}

#[derive(Serialize)]
struct EntropyView {
    n: usize,
    profile: Vec<f64>,
    c: f64,
    a: f64,
    rms: f64,
}

/// Ground-state entanglement entropy `S(n)` and the chord-length fit.
pub fn entropy_json(model: &str, g: f64, n: usize) -> Result<String> {
    let m = free_model(model, g, n)?;
    let spec = ansatz_spec(&m)?;
    let circuit = jw_compile(&spec, initial_parity(&spec)?)?;
    let profile = gaussian_entropy_profile(&ground_covariance(&circuit.hamiltonian)?)?;
    let fit = fit_central_charge(&EntropySamples::from_profile(n, &profile)?, false)?;
    Ok(serde_json::to_string(&EntropyView { n, profile, c: fit.c, a: fit.a, rms: fit.rms })?)
}

#[derive(Serialize)]
struct RampView {
    depth: usize,
    angles: Vec<f64>,
    energy: f64,
    exact: f64,
    error_percent: f64,
}

/// Energy of the ansatz on the linear-ramp angles with time step `dt`.
pub fn ramp_json(model: &str, g: f64, n: usize, dt: f64) -> Result<String> {
    let m = free_model(model, g, n)?;
    let spec = ansatz_spec(&m)?;
    let angles = spec.ramp_guess(dt);
    let energy = FermionObjective::new(&spec)?.evaluate(&angles)?;
    let exact = exact_ground_energy(&m, 0)?;
    Ok(serde_json::to_string(&RampView {
        depth: spec.depth,
        angles,
        energy,
        exact,
        error_percent: energy_error_percent(energy, exact),
    })?)
}

/// `[ρ̂₂(N)]_{ij}` of the TFIM ground state for `N = 8, 12, …, n_max` and
/// its decay fit.
pub fn rdm_json(g: f64, i: usize, j: usize, n_max: usize) -> Result<String> {
    if n_max > MAX_SITES {
        return Err(mlqaoa::error::Error::Config(format!("N={n_max} is above the page limit of {MAX_SITES}")));
    }
    let cfg = RunConfig {
        model: ModelKind::Tfim,
        g: Some(g),
        sizes: Some((8..=n_max).step_by(4).collect()),
        entry: (i, j),
        ..RunConfig::default()
    };
    Ok(serde_json::to_string(&rdm_scan(&cfg)?)?)
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn entropy(model: &str, g: f64, n: usize) -> std::result::Result<String, JsError> {
    js(entropy_json(model, g, n))
}

#[wasm_bindgen]
pub fn ramp_energy(model: &str, g: f64, n: usize, dt: f64) -> std::result::Result<String, JsError> {
    js(ramp_json(model, g, n, dt))
}

#[wasm_bindgen]
pub fn rdm_decay(g: f64, i: usize, j: usize, n_max: usize) -> std::result::Result<String, JsError> {
    js(rdm_json(g, i, j, n_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn critical_ising_entropy_fit() {
        let v: Value = serde_json::from_str(&entropy_json("tfim", 0.5, 64).unwrap()).unwrap();
        assert_eq!(v["profile"].as_array().unwrap().len(), 63);
        let c = v["c"].as_f64().unwrap();
        assert!((c - 0.5).abs() < 0.02, "{c}");
    }

    #[test]
    fn ramp_energy_is_above_the_ground_energy() {
        let v: Value = serde_json::from_str(&ramp_json("xy", 0.5, 16, 0.3).unwrap()).unwrap();
        let (e, e0) = (v["energy"].as_f64().unwrap(), v["exact"].as_f64().unwrap());
        assert!(e >= e0 - 1e-9);
        assert_eq!(v["angles"].as_array().unwrap().len(), 8);
    }

    #[test]
    fn rdm_series_and_fit() {
        let v: Value = serde_json::from_str(&rdm_json(0.5, 1, 1, 32).unwrap()).unwrap();
        assert_eq!(v["values"].as_array().unwrap().len(), 7);
        assert!(v["fit"]["params"]["delta"].as_f64().unwrap() >= 0.0);
    }

    #[test]
    fn unsupported_requests_fail_cleanly() {
        assert!(entropy_json("xxz", 0.1, 12).is_err());
        assert!(entropy_json("tfim", 0.5, 1000).is_err());
        assert!(ramp_json("xy", 0.0, 10, 0.3).is_err());
        assert!(rdm_json(0.5, 5, 1, 32).is_err());
    }
}
