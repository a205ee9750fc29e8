//! Sweep and multi-round execution against the exact evaluator and the
//! trajectory sampler. Sweep points are dispatched to the worker pool and
//! gathered in kappa order, so output is deterministic regardless of thread
//! count.

use rayon::prelude::*;

use sliceqec_core::circuit::{expand_sk1, Circuit};
use sliceqec_core::codes::{build_lookup_decoder, GaugeFrame, SyndromeTable};
use sliceqec_core::evaluate::{
    exact_logical_error, improvement_ratio, trajectory_sample, TrajectoryConfig, TrajectoryMode,
    TrajectoryResult,
};
use sliceqec_core::noise::bind_noise;
use sliceqec_core::slicer::{
    build_extraction_3body, build_extraction_iontrap_with, GateSet, SlicingMode,
};

use crate::config::{MultiroundModes, Resolved};
use crate::{LabError, Result};

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kappa: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub p_sliced: f64,
    pub p_unsliced: f64,
    pub ratio: f64,
}

/// Build the extraction circuit a sweep point simulates.
pub fn build_circuit(resolved: &Resolved, mode: SlicingMode) -> Result<Circuit> {
    let circuit = match resolved.gate_set {
        GateSet::Native3Body => build_extraction_3body(&resolved.code, mode)?,
        GateSet::IonTrap2Body => {
            let frame = GaugeFrame::all_plus(&resolved.code);
            let fr = (mode == SlicingMode::AdaptiveSliced).then_some(&frame);
            build_extraction_iontrap_with(&resolved.code, mode, fr, resolved.baseline)?
        }
    };
    if resolved.sk1 {
        Ok(expand_sk1(&circuit)?)
    } else {
        Ok(circuit)
    }
}

fn point(
    resolved: &Resolved,
    table: &SyndromeTable,
    sliced: &Circuit,
    unsliced: &Circuit,
    kappa: f64,
) -> Result<SweepRow> {
    let params = resolved.params.with_kappa(kappa)?;
    let p_sliced = exact_logical_error(
        &bind_noise(sliced, &params, resolved.dephasing.as_ref())?,
        &resolved.code,
        table,
    )?;
    let p_unsliced = exact_logical_error(
        &bind_noise(unsliced, &params, resolved.dephasing.as_ref())?,
        &resolved.code,
        table,
    )?;
    for (label, r) in [("sliced", &p_sliced), ("unsliced", &p_unsliced)] {
        let total = r.total_probability();
        if (total - 1.0).abs() > 1e-9 {
            return Err(LabError::Numeric(format!(
                "{label} branch probabilities sum to {total} at kappa = {kappa}"
            )));
        }
        if !(-1e-12..=1.0 + 1e-9).contains(&r.p_logical) {
            return Err(LabError::Numeric(format!(
                "{label} logical error {} out of range at kappa = {kappa}",
                r.p_logical
            )));
        }
    }
    Ok(SweepRow {
        kappa,
        eps1: params.eps1,
        eps2: params.eps2,
        eps3: params.eps3,
        p_sliced: p_sliced.p_logical.max(0.0),
        p_unsliced: p_unsliced.p_logical.max(0.0),
        ratio: improvement_ratio(p_unsliced.p_logical.max(0.0), p_sliced.p_logical.max(0.0))
            .value,
    })
}

/// Evaluate sliced and unsliced circuits exactly at every kappa; rows come
/// back ordered by kappa.
pub fn run_sweep(resolved: &Resolved) -> Result<Vec<SweepRow>> {
    let table = build_lookup_decoder(&resolved.code);
    let sliced = build_circuit(resolved, SlicingMode::Sliced)?;
    let unsliced = build_circuit(resolved, SlicingMode::Unsliced)?;
    let mut rows: Vec<(usize, SweepRow)> = resolved
        .kappas
        .par_iter()
        .enumerate()
        .map(|(i, &k)| point(resolved, &table, &sliced, &unsliced, k).map(|r| (i, r)))
        .collect::<Result<_>>()?;
    rows.sort_by_key(|(i, _)| *i);
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// One multi-round series.
#[derive(Debug, Clone)]
pub struct MultiroundSeries {
    pub mode: TrajectoryMode,
    pub result: TrajectoryResult,
}

pub fn mode_name(mode: TrajectoryMode) -> &'static str {
    match mode {
        TrajectoryMode::Static => "static",
        TrajectoryMode::Adaptive => "adaptive",
        TrajectoryMode::PerfectGaugeBaseline => "perfect-gauge",
        TrajectoryMode::WorstGaugeBaseline => "worst-gauge",
    }
}

/// Sample the configured multi-round experiment at the first kappa of the
/// grid, for one mode or all four.
pub fn run_multiround(resolved: &Resolved, seed_override: Option<u64>) -> Result<Vec<MultiroundSeries>> {
    let (rounds, shots, seed, correct_each_round, modes) = resolved.multiround_modes()?;
    let seed = seed_override.unwrap_or(seed);
    let kappa = resolved.kappas[0];
    let params = resolved.params.with_kappa(kappa)?;
    let table = build_lookup_decoder(&resolved.code);
    let list: Vec<TrajectoryMode> = match modes {
        MultiroundModes::One(m) => vec![m],
        MultiroundModes::All => vec![
            TrajectoryMode::Static,
            TrajectoryMode::Adaptive,
            TrajectoryMode::PerfectGaugeBaseline,
            TrajectoryMode::WorstGaugeBaseline,
        ],
    };
    let mut out = Vec::with_capacity(list.len());
    for mode in list {
        let cfg = TrajectoryConfig {
            rounds,
            shots,
            seed,
            mode,
            correct_each_round,
        };
        let result = trajectory_sample(
            &cfg,
            &resolved.code,
            resolved.gate_set,
            &params,
            resolved.dephasing.as_ref(),
            &table,
        )?;
        out.push(MultiroundSeries { mode, result });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn tiny_config(kappas: &str) -> Resolved {
        let json = format!(
            r#"{{
                "code": "surface17",
                "gate_set": "native3body",
                "noise": {{"kappas": {kappas}, "infidelity_2q": 1.0e-3, "equal_eps3": true}},
                "evaluator": {{"kind": "exact"}}
            }}"#
        );
        ExperimentConfig::from_json(&json).unwrap().resolve().unwrap()
    }

    #[test]
    fn zero_noise_sweep_is_all_zero() {
        let json = r#"{
            "code": "surface17",
            "gate_set": "native3body",
            "noise": {"kappas": [0.0, 1.0], "eps": {"eps1": 0.0, "eps2": 0.0, "eps3": 0.0}},
            "evaluator": {"kind": "exact"}
        }"#;
        let resolved = ExperimentConfig::from_json(json).unwrap().resolve().unwrap();
        let rows = run_sweep(&resolved).unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert!(row.p_sliced.abs() < 1e-12);
            assert!(row.p_unsliced.abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_one_sliced_vanishes_for_native_gates() {
        let resolved = tiny_config("[1.0]");
        let rows = run_sweep(&resolved).unwrap();
        assert!(rows[0].p_sliced < 1e-10, "p_sliced = {}", rows[0].p_sliced);
        assert!(rows[0].p_unsliced > 1e-6);
        assert!(rows[0].ratio.is_infinite() || rows[0].ratio > 1e4);
    }

    #[test]
    fn rows_sorted_by_kappa_regardless_of_input_order() {
        let resolved = tiny_config("[1.0, 0.0]");
        let rows = run_sweep(&resolved).unwrap();
        assert!(rows[0].kappa < rows[1].kappa);
    }
}
