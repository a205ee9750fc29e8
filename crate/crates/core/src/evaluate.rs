//! Exact logical-error evaluation by exhaustive syndrome postselection, and
//! trajectory sampling for multi-round experiments.
//!
//! The exact route enumerates every measurement-outcome branch of the full
//! quantum channel depth-first, decoding and noiselessly correcting each
//! subnormalized leaf, then sums the one-sided contributions. Cost is
//! exponential in the number of postselections, so multi-round studies use
//! the seeded pure-state sampler instead.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::MeasBasis;
use crate::codes::{
    nearest_gauge_frame_pure, one_sided_error, one_sided_error_pure, prepare_logical_zero,
    prepare_logical_zero_pure, GaugeFrame, SubsystemCode, SyndromeTable,
};
use crate::noise::{bind_noise, DephasingParams, NoisyCircuit, NoisyStep, OverrotationParams};
use crate::pauli::Qubit;
use crate::slicer::{build_extraction, GateSet, SlicingMode};
use crate::state::{DensityState, MixtureOp, PureState};
use crate::{Result, SimError};

/// Branches with weight below this are carried as exact zeros.
const PRUNE_WEIGHT: f64 = 1e-15;

fn hadamard_matrix() -> Array2<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_vec(
        (2, 2),
        vec![
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(-h, 0.0),
        ],
    )
    .expect("2x2")
}

/// One postselection branch: the full syndrome, its probability, and its
/// (weight-bearing) one-sided error contribution after correction.
#[derive(Debug, Clone)]
pub struct BranchRecord {
    pub syndrome: Vec<bool>,
    pub probability: f64,
    pub error_contribution: f64,
}

/// Exhaustive postselection result.
#[derive(Debug, Clone)]
pub struct ExactResult {
    pub branches: Vec<BranchRecord>,
    pub p_logical: f64,
    /// Syndromes outside the lookup table, decoded as identity.
    pub decoder_misses: usize,
}

impl ExactResult {
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }
}

struct ExactWalk<'a> {
    code: &'a SubsystemCode,
    table: &'a SyndromeTable,
    stab_index: std::collections::BTreeMap<String, usize>,
}

impl ExactWalk<'_> {
    fn leaf(
        &self,
        outcomes: &[(String, u8)],
        state: Option<&DensityState>,
    ) -> Result<BranchRecord> {
        let mut syndrome = vec![false; self.code.stabilizers.len()];
        for (name, bit) in outcomes {
            if let Some(&i) = self.stab_index.get(name) {
                syndrome[i] = *bit == 1;
            }
        }
        let (probability, contribution) = match state {
            None => (0.0, 0.0),
            Some(s) => {
                let mut corrected = s.clone();
                if let Some(c) = self.table.correction_for(&syndrome) {
                    corrected.apply_pauli(c)?;
                }
                (s.weight(), one_sided_error(&corrected, self.code)?)
            }
        };
        Ok(BranchRecord {
            syndrome,
            probability,
            error_contribution: contribution,
        })
    }

    /// Enumerate the leaves of a dead (zero-weight) subtree without
    /// simulating it, so the branch census stays complete.
    fn dead_subtree(
        &self,
        steps: &[NoisyStep],
        outcomes: &mut Vec<(String, u8)>,
        sink: &mut Vec<BranchRecord>,
    ) -> Result<()> {
        let next = steps
            .iter()
            .position(|s| matches!(s, NoisyStep::Measure { .. }));
        match next {
            None => {
                sink.push(self.leaf(outcomes, None)?);
                Ok(())
            }
            Some(i) => {
                if let NoisyStep::Measure { report, .. } = &steps[i] {
                    for bit in [0u8, 1] {
                        outcomes.push((report.clone().unwrap_or_default(), bit));
                        self.dead_subtree(&steps[i + 1..], outcomes, sink)?;
                        outcomes.pop();
                    }
                }
                Ok(())
            }
        }
    }

    /// Depth-first branch enumeration; the two subtrees of each measurement
    /// run in parallel and merge in fixed outcome order.
    fn walk(
        &self,
        steps: &[NoisyStep],
        state: DensityState,
        outcomes: Vec<(String, u8)>,
    ) -> Result<Vec<BranchRecord>> {
        let mut state = state;
        for (i, step) in steps.iter().enumerate() {
            match step {
                NoisyStep::Prep { qubit, basis } => state.add_qubit(*qubit, *basis)?,
                NoisyStep::Gate(g) => {
                    let (perm, phase) = g.generator.basis_tables(state.qubits())?;
                    state.apply_involution_overrotation(&perm, &phase, g.theta, 1.0, 1.0)?;
                }
                NoisyStep::Channel(ch) => ch.apply_density(&mut state)?,
                NoisyStep::Measure {
                    qubit,
                    basis,
                    report,
                } => {
                    if *basis == MeasBasis::X {
                        state.apply_unitary_unchecked(&hadamard_matrix(), &[*qubit])?;
                    }
                    let (b0, b1) = state.measure_qubit_branches(*qubit)?;
                    let name = report.clone().unwrap_or_default();
                    let descend = |branch: crate::state::MeasurementBranch| {
                        let mut o = outcomes.clone();
                        o.push((name.clone(), branch.outcome));
                        if branch.state.weight() < PRUNE_WEIGHT {
                            let mut sink = Vec::new();
                            self.dead_subtree(&steps[i + 1..], &mut o, &mut sink)?;
                            Ok(sink)
                        } else {
                            self.walk(&steps[i + 1..], branch.state, o)
                        }
                    };
                    let (r0, r1) = rayon::join(|| descend(b0), || descend(b1));
                    let mut r0 = r0?;
                    r0.extend(r1?);
                    return Ok(r0);
                }
            }
        }
        Ok(vec![self.leaf(&outcomes, Some(&state))?])
    }
}

/// Exact one-round logical error of a noise-bound extraction circuit:
/// prepare |0>_L, enumerate all syndrome branches, decode and noiselessly
/// correct each, and sum the subnormalized one-sided contributions.
pub fn exact_logical_error(
    circuit: &NoisyCircuit,
    code: &SubsystemCode,
    table: &SyndromeTable,
) -> Result<ExactResult> {
    let initial = prepare_logical_zero(code)?;
    exact_logical_error_from(circuit, code, table, initial)
}

/// Same as [`exact_logical_error`] with an explicit initial state.
pub fn exact_logical_error_from(
    circuit: &NoisyCircuit,
    code: &SubsystemCode,
    table: &SyndromeTable,
    initial: DensityState,
) -> Result<ExactResult> {
    let stab_index = code
        .stabilizer_names()
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect();
    let walk = ExactWalk {
        code,
        table,
        stab_index,
    };
    let branches = walk.walk(&circuit.steps, initial, Vec::new())?;
    // Fixed-order reduction keeps the totals bit-stable across thread counts.
    let p_logical = branches.iter().map(|b| b.error_contribution).sum();
    let decoder_misses = branches
        .iter()
        .filter(|b| {
            b.probability > 0.0
                && b.syndrome.iter().any(|&x| x)
                && !table.contains(&b.syndrome)
        })
        .count();
    Ok(ExactResult {
        branches,
        p_logical,
        decoder_misses,
    })
}

/// Ratio of unsliced to sliced logical error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovementRatio {
    pub value: f64,
    pub infinite: bool,
}

pub fn improvement_ratio(p_unsliced: f64, p_sliced: f64) -> ImprovementRatio {
    if p_sliced <= 0.0 {
        ImprovementRatio {
            value: f64::INFINITY,
            infinite: true,
        }
    } else {
        ImprovementRatio {
            value: p_unsliced / p_sliced,
            infinite: false,
        }
    }
}

/// Gauge handling for multi-round sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryMode {
    /// Directions fixed to the prepared all-plus frame.
    Static,
    /// Directions rebuilt each round from the classically tracked frame.
    Adaptive,
    /// Directions matched to the state's actual gauge sector each round:
    /// the ideal re-slicing reference.
    PerfectGaugeBaseline,
    /// Directions anti-matched to the actual sector: the fewest-cancellation
    /// reference.
    WorstGaugeBaseline,
}

impl TrajectoryMode {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "static" => Ok(TrajectoryMode::Static),
            "adaptive" => Ok(TrajectoryMode::Adaptive),
            "perfect-gauge" => Ok(TrajectoryMode::PerfectGaugeBaseline),
            "worst-gauge" => Ok(TrajectoryMode::WorstGaugeBaseline),
            other => Err(SimError::InvalidCircuit(format!(
                "unknown trajectory mode `{other}`"
            ))),
        }
    }
}

/// Multi-round sampling configuration. Per-shot seeds derive from the master
/// seed, so results are reproducible and thread-count independent.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryConfig {
    pub rounds: usize,
    pub shots: usize,
    pub seed: u64,
    pub mode: TrajectoryMode,
    /// Decode and correct after every round; otherwise only terminally.
    pub correct_each_round: bool,
}

/// Per-round aggregate of the sampled one-sided logical outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundStat {
    pub round: usize,
    pub p_logical: f64,
    pub std_err: f64,
}

/// Sampled multi-round statistics with a least-squares line through
/// (round, cumulative error).
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub per_round: Vec<RoundStat>,
    pub fit_intercept: f64,
    pub fit_slope: f64,
}

fn shot_seed(master: u64, shot: usize) -> u64 {
    // SplitMix64 over the shot index, xored into the master seed.
    let mut z = (shot as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    master ^ (z ^ (z >> 31))
}

fn sample_mixture(terms: &[crate::state::MixtureTerm], draw: f64) -> &MixtureOp {
    let mut acc = 0.0;
    for t in terms {
        acc += t.probability;
        if draw < acc {
            return &t.op;
        }
    }
    &terms.last().expect("nonempty mixture").op
}

struct ShotOutcome {
    round_bits: Vec<u8>,
}

fn run_one_shot(
    code: &SubsystemCode,
    table: &SyndromeTable,
    gate_set: GateSet,
    params: &OverrotationParams,
    dephasing: Option<&DephasingParams>,
    cfg: &TrajectoryConfig,
    shot: usize,
) -> Result<ShotOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(shot_seed(cfg.seed, shot));
    let mut state = prepare_logical_zero_pure(code)?;
    let mut tracked = GaugeFrame::all_plus(code);
    let stab_names = code.stabilizer_names();
    let mut round_bits = Vec::with_capacity(cfg.rounds);

    // The static circuit never changes; build it once.
    let static_circuit = bind_noise(
        &build_extraction(code, gate_set, SlicingMode::Sliced, None)?,
        params,
        dephasing,
    )?;

    for round in 0..cfg.rounds {
        let circuit = match cfg.mode {
            TrajectoryMode::Static => static_circuit.clone(),
            TrajectoryMode::Adaptive => bind_noise(
                &build_extraction(
                    code,
                    gate_set,
                    SlicingMode::AdaptiveSliced,
                    Some(&tracked),
                )?,
                params,
                dephasing,
            )?,
            TrajectoryMode::PerfectGaugeBaseline | TrajectoryMode::WorstGaugeBaseline => {
                let mut frame = nearest_gauge_frame_pure(&state, code)?;
                if cfg.mode == TrajectoryMode::WorstGaugeBaseline {
                    for s in frame.signs.iter_mut() {
                        *s = -*s;
                    }
                }
                bind_noise(
                    &build_extraction(code, gate_set, SlicingMode::AdaptiveSliced, Some(&frame))?,
                    params,
                    dephasing,
                )?
            }
        };

        let mut syndrome = vec![false; stab_names.len()];
        for step in &circuit.steps {
            match step {
                NoisyStep::Prep { qubit, basis } => state.add_qubit(*qubit, *basis)?,
                NoisyStep::Gate(g) => {
                    let (perm, phase) = g.generator.basis_tables(state.qubits())?;
                    state.apply_involution_rotation(&perm, &phase, g.theta)?;
                }
                NoisyStep::Channel(ch) => {
                    let op = sample_mixture(ch.terms(), rng.random::<f64>());
                    op.apply_pure(&mut state)?;
                    if let MixtureOp::Pauli(p) = op {
                        tracked.update_with_pauli(code, p);
                    }
                }
                NoisyStep::Measure {
                    qubit,
                    basis,
                    report,
                } => {
                    if *basis == MeasBasis::X {
                        state.apply_unitary_unchecked(&hadamard_matrix(), &[*qubit])?;
                    }
                    let (bit, _p) = state.measure_qubit_sampled(*qubit, rng.random::<f64>())?;
                    if let Some(name) = report {
                        if let Some(i) = stab_names.iter().position(|n| n == name) {
                            syndrome[i] = bit == 1;
                        }
                    }
                }
            }
        }

        let decode_now = cfg.correct_each_round || round + 1 == cfg.rounds;
        if decode_now {
            if let Some(correction) = table.correction_for(&syndrome) {
                state.apply_pauli(correction)?;
                tracked.update_with_pauli(code, correction);
            }
        }

        let p_minus = one_sided_error_pure(&state, code)?;
        round_bits.push(u8::from(rng.random::<f64>() < p_minus));
    }
    Ok(ShotOutcome { round_bits })
}

/// Sample `shots` independent pure-state trajectories of `rounds` extraction
/// rounds each, decoding and correcting per round, and aggregate the sampled
/// one-sided logical outcome per round.
pub fn trajectory_sample(
    cfg: &TrajectoryConfig,
    code: &SubsystemCode,
    gate_set: GateSet,
    params: &OverrotationParams,
    dephasing: Option<&DephasingParams>,
    table: &SyndromeTable,
) -> Result<TrajectoryResult> {
    if cfg.shots == 0 || cfg.rounds == 0 {
        return Err(SimError::InvalidCircuit(
            "trajectory sampling needs at least one shot and one round".into(),
        ));
    }
    let outcomes: Vec<Result<ShotOutcome>> = (0..cfg.shots)
        .into_par_iter()
        .map(|shot| run_one_shot(code, table, gate_set, params, dephasing, cfg, shot))
        .collect();
    let mut flips = vec![0u64; cfg.rounds];
    for o in outcomes {
        let o = o?;
        for (r, &bit) in o.round_bits.iter().enumerate() {
            flips[r] += u64::from(bit);
        }
    }
    let n = cfg.shots as f64;
    let per_round: Vec<RoundStat> = flips
        .iter()
        .enumerate()
        .map(|(r, &f)| {
            let p = f as f64 / n;
            RoundStat {
                round: r + 1,
                p_logical: p,
                std_err: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect();
    let (fit_intercept, fit_slope) = line_fit(
        &per_round
            .iter()
            .map(|s| (s.round as f64, s.p_logical))
            .collect::<Vec<_>>(),
    );
    Ok(TrajectoryResult {
        per_round,
        fit_intercept,
        fit_slope,
    })
}

/// Ordinary least squares line through the points, returning (intercept,
/// slope).
pub fn line_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() < 2 {
        return (points.first().map_or(0.0, |p| p.1), 0.0);
    }
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return (sy / n, 0.0);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (intercept, slope)
}

/// Convenience wrapper: bind noise to a fresh extraction circuit and
/// evaluate it exactly.
pub fn evaluate_extraction(
    code: &SubsystemCode,
    gate_set: GateSet,
    mode: SlicingMode,
    params: &OverrotationParams,
    dephasing: Option<&DephasingParams>,
    table: &SyndromeTable,
) -> Result<ExactResult> {
    let circuit = build_extraction(code, gate_set, mode, None)?;
    let noisy = bind_noise(&circuit, params, dephasing)?;
    exact_logical_error(&noisy, code, table)
}

/// Noiseless single-block runner used by oracle tests: returns each outcome
/// branch of one measurement block applied to `initial`.
pub fn run_block_branches(
    circuit: &NoisyCircuit,
    initial: &DensityState,
) -> Result<Vec<(Vec<u8>, DensityState)>> {
    struct Walker {
        out: Vec<(Vec<u8>, DensityState)>,
    }
    impl Walker {
        fn go(
            &mut self,
            steps: &[NoisyStep],
            mut state: DensityState,
            bits: &mut Vec<u8>,
        ) -> Result<()> {
            for (i, step) in steps.iter().enumerate() {
                match step {
                    NoisyStep::Prep { qubit, basis } => state.add_qubit(*qubit, *basis)?,
                    NoisyStep::Gate(g) => {
                        let u = crate::circuit::rotation_unitary(g)?;
                        state.apply_unitary_unchecked(&u, &g.support())?;
                    }
                    NoisyStep::Channel(ch) => ch.apply_density(&mut state)?,
                    NoisyStep::Measure { qubit, basis, .. } => {
                        if *basis == MeasBasis::X {
                            state.apply_unitary_unchecked(&hadamard_matrix(), &[*qubit])?;
                        }
                        let (b0, b1) = state.measure_qubit_branches(*qubit)?;
                        for branch in [b0, b1] {
                            bits.push(branch.outcome);
                            self.go(&steps[i + 1..], branch.state, bits)?;
                            bits.pop();
                        }
                        return Ok(());
                    }
                }
            }
            self.out.push((bits.clone(), state));
            Ok(())
        }
    }
    let mut w = Walker { out: Vec::new() };
    let mut bits = Vec::new();
    w.go(&circuit.steps, initial.clone(), &mut bits)?;
    Ok(w.out)
}

/// Run only the unitary part of a circuit (gates and coherent channels must
/// be deterministic: kappa = 1) on a pure state; measurement steps are
/// rejected. Used by cancellation oracles.
pub fn run_unitary_part_pure(circuit: &NoisyCircuit, state: &mut PureState) -> Result<()> {
    for step in &circuit.steps {
        match step {
            NoisyStep::Prep { qubit, basis } => state.add_qubit(*qubit, *basis)?,
            NoisyStep::Gate(g) => {
                let (perm, phase) = g.generator.basis_tables(state.qubits())?;
                state.apply_involution_rotation(&perm, &phase, g.theta)?;
            }
            NoisyStep::Channel(ch) => {
                let terms = ch.terms();
                if terms.len() != 1 {
                    return Err(SimError::BadProbabilities(terms.len() as f64));
                }
                terms[0].op.apply_pure(state)?;
            }
            NoisyStep::Measure { .. } => return Err(SimError::MeasurementInUnitary),
        }
    }
    Ok(())
}

/// Pauli label of a qubit for diagnostics.
pub fn qubit(n: u32) -> Qubit {
    Qubit(n)
}
