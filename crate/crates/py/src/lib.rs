//! Python bindings: clearing, counterfactual shifts, energy split, load
//! tuning, smoothing and the batch pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use recmerit_core::analysis::{relative_diff as rel_diff, smooth as smooth_series, Denominator, SmoothingConfig};
use recmerit_core::market::{
    clear as clear_curves, counterfactual_clear, Bid, ClearingOptions, Equilibrium, ShiftAmounts, Side, StepCurve,
    SupplyShiftMode, Volume,
};
use recmerit_core::pipeline::{execute, fixture_config, Command, RunConfig};
use recmerit_core::profiles::{split_hour as split, tune_load_scale as tune, TuneOptions};
use recmerit_core::projection::builtin_scenarios as scenarios;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn curve(side: Side, bids: &[(f64, f64)]) -> PyResult<StepCurve> {
    let bids = bids
        .iter()
        .map(|&(price, mwh)| {
            let quantity = Volume::from_mwh(mwh).ok_or_else(|| value_err(format!("bad quantity {mwh}")))?;
            Ok(Bid { price, quantity })
        })
        .collect::<PyResult<Vec<_>>>()?;
    StepCurve::from_bids(side, &bids).map_err(value_err)
}

type PyEquilibrium = (Option<f64>, f64, &'static str);

fn eq_tuple(e: &Equilibrium) -> PyEquilibrium {
    (e.price, e.quantity.mwh(), e.kind.label())
}

/// Clears `(price, MWh)` supply and demand bids; returns
/// `(price or None, quantity MWh, crossing kind)`.
#[pyfunction]
fn clear(supply: Vec<(f64, f64)>, demand: Vec<(f64, f64)>) -> PyResult<PyEquilibrium> {
    let s = curve(Side::Supply, &supply)?;
    let d = curve(Side::Demand, &demand)?;
    Ok(eq_tuple(&clear_curves(&s, &d)))
}

/// Actual and synthetic equilibria after moving `delta_demand` MWh of
/// demand to the cap and removing `delta_supply` MWh of supply.
#[pyfunction]
#[pyo3(signature = (supply, demand, delta_demand, delta_supply, price_cap = 4000.0, supply_shift = "cheap-end"))]
fn counterfactual(
    supply: Vec<(f64, f64)>,
    demand: Vec<(f64, f64)>,
    delta_demand: f64,
    delta_supply: f64,
    price_cap: f64,
    supply_shift: &str,
) -> PyResult<(PyEquilibrium, PyEquilibrium)> {
    let mode = match supply_shift {
        "cheap-end" => SupplyShiftMode::CheapEnd,
        "zero-price-only" => SupplyShiftMode::ZeroPriceOnly,
        other => return Err(value_err(format!("unknown supply shift mode `{other}`"))),
    };
    let s = curve(Side::Supply, &supply)?;
    let d = curve(Side::Demand, &demand)?;
    let shifts = ShiftAmounts::from_mwh(delta_demand, delta_supply).map_err(value_err)?;
    let opts = ClearingOptions {
        price_cap,
        supply_shift: mode,
    };
    let out = counterfactual_clear(&s, &d, shifts, opts).map_err(value_err)?;
    Ok((eq_tuple(&out.actual), eq_tuple(&out.synthetic)))
}

/// `(self_consumed, export)` of one hour.
#[pyfunction]
fn split_hour(pv: f64, load: f64) -> (f64, f64) {
    split(pv, load)
}

/// `(factor, achieved_ratio, iterations)`.
#[pyfunction]
#[pyo3(signature = (base_load, pv, target, tolerance = 1e-3, max_iterations = 200))]
fn tune_load_scale(
    base_load: Vec<f64>,
    pv: Vec<f64>,
    target: f64,
    tolerance: f64,
    max_iterations: usize,
) -> PyResult<(f64, f64, usize)> {
    let opts = TuneOptions {
        tolerance,
        max_iterations,
    };
    let s = tune(&base_load, &pv, target, opts).map_err(value_err)?;
    Ok((s.factor, s.achieved_ratio, s.iterations))
}

#[pyfunction]
#[pyo3(signature = (values, window = 7, positive_only = true))]
fn smooth(values: Vec<f64>, window: usize, positive_only: bool) -> PyResult<Vec<f64>> {
    let cfg = SmoothingConfig {
        positive_only,
        ..SmoothingConfig::with_window(window).map_err(value_err)?
    };
    smooth_series(&values, &cfg).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (actual, synthetic, denominator = "synthetic"))]
fn relative_diff(actual: f64, synthetic: f64, denominator: &str) -> PyResult<Option<f64>> {
    let d = match denominator {
        "synthetic" => Denominator::Synthetic,
        "actual" => Denominator::Actual,
        other => return Err(value_err(format!("unknown denominator `{other}`"))),
    };
    Ok(rel_diff(actual, synthetic, d))
}

type PyScenario = (String, String, i32, f64, BTreeMap<String, f64>, bool, bool);

/// `(code, name, year, GW, targets, includes_standalone, policy_target_achieving)`.
#[pyfunction]
fn builtin_scenarios() -> Vec<PyScenario> {
    scenarios()
        .into_iter()
        .map(|s| {
            let targets = s.sc_targets.iter().map(|(c, v)| (c.name().to_string(), *v)).collect();
            (
                s.code,
                s.name,
                s.year,
                s.total_capacity_gw,
                targets,
                s.includes_standalone,
                s.policy_target_achieving,
            )
        })
        .collect()
}

/// Runs `derive`, `simulate`, `clear` or `run-all` and returns
/// `(exit_code, manifest_json)`. Configuration and fatal data errors raise.
#[pyfunction]
#[pyo3(signature = (command, config = None, fixture = false, output = None))]
fn run(command: &str, config: Option<PathBuf>, fixture: bool, output: Option<PathBuf>) -> PyResult<(i32, String)> {
    let command = match command {
        "derive" => Command::Derive,
        "simulate" => Command::Simulate,
        "clear" => Command::Clear,
        "run-all" => Command::RunAll,
        other => return Err(value_err(format!("unknown command `{other}`"))),
    };
    let mut cfg = match (&config, fixture) {
        (Some(_), true) => return Err(value_err("`config` and `fixture` are exclusive")),
        (Some(path), false) => RunConfig::load(path).map_err(value_err)?,
        (None, true) => {
            let out = output.clone().unwrap_or_else(|| PathBuf::from("out"));
            fixture_config(&out.join("fixture"), &out).map_err(value_err)?
        }
        (None, false) => RunConfig::default(),
    };
    if let Some(out) = output {
        cfg.paths.output = out;
    }
    let manifest = execute(command, &cfg).map_err(|e| match e.exit_code() {
        2 => value_err(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    })?;
    let json = serde_json::to_string(&manifest).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((manifest.exit_code(), json))
}

#[pymodule]
fn recmerit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(clear, m)?)?;
    m.add_function(wrap_pyfunction!(counterfactual, m)?)?;
    m.add_function(wrap_pyfunction!(split_hour, m)?)?;
    m.add_function(wrap_pyfunction!(tune_load_scale, m)?)?;
    m.add_function(wrap_pyfunction!(smooth, m)?)?;
    m.add_function(wrap_pyfunction!(relative_diff, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
