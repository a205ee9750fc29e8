//! Syndrome-extraction synthesis: unsliced baselines and sliced variants for
//! the native controlled-Pauli gate set and the two-body trapped-ion gate
//! set, with gauge-aware adaptive direction assignment.
//!
//! Slicing splits each measured operator into two halves applied with
//! opposite rotation directions, so systematic overrotations interfere
//! destructively on the +1 eigenspace. With native multi-body gates the two
//! halves are controlled rotations and the cancellation is exact. With
//! two-body gates the weight-6 subsystem stabilizers are sliced along their
//! weight-2 gauges instead, which cancels exactly only while the prepared
//! gauge signs survive.
//!
//! The ion-trap blocks are emitted directly in fully cancelled form. Each
//! controlled-X factor is realized by one commuting cell
//!
//! ```text
//! CX(anc -> q) = W (exp(+i s pi/4 X_a) exp(-i s pi/4 X_q) exp(-i s pi/4 X_a X_q)) W^d
//! ```
//!
//! (any `s = +/-1`), where the ancilla conjugation `W` is absorbed into a
//! `|0>` preparation and a plain Z readout. A block is a product of such
//! cells, all mutually commuting; the leftover ancilla `X_a` factors either
//! vanish (sliced) or reduce to one classical readout flip, emitted as a
//! noiseless compensator rotation. Z-type stabilizers get the same cells
//! conjugated by compiled Hadamards on the data side.

use std::f64::consts::FRAC_PI_4;

use crate::circuit::{compile_hadamard, ms_gate, Circuit, Gate, Generator, MeasBasis, NoiseClass, Step};
use crate::codes::{GaugeFrame, StabKind, SubsystemCode};
use crate::pauli::{Axis, PauliString, Qubit};
use crate::state::PrepBasis;
use crate::{Result, SimError};

/// How rotation directions are assigned across each stabilizer block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlicingMode {
    /// All-positive rotations: the worst coherent case.
    Unsliced,
    /// Static opposite-direction halves, matched to the prepared +1 gauges.
    Sliced,
    /// Opposite-direction halves re-oriented by a tracked gauge frame.
    AdaptiveSliced,
}

impl SlicingMode {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "unsliced" => Ok(SlicingMode::Unsliced),
            "sliced" => Ok(SlicingMode::Sliced),
            "adaptive" | "adaptive-sliced" => Ok(SlicingMode::AdaptiveSliced),
            other => Err(SimError::InvalidCircuit(format!(
                "unknown slicing mode `{other}`"
            ))),
        }
    }
}

/// Unsliced-baseline construction for the ion-trap route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaselineConvention {
    /// Direct fully-cancelled blocks with every rotation positive.
    #[default]
    AllPositive,
    /// Stacked verbatim CNOT compilations with `s = v = +1`, then peephole
    /// cancellation; the naive compilation already opposes many single-qubit
    /// gates.
    Figure1Default,
}

/// An equal-weight split `S = S_L * S_R` with opposite direction signs.
#[derive(Debug, Clone)]
pub struct SlicedPair {
    pub left: PauliString,
    pub right: PauliString,
    pub left_sign: i8,
    pub right_sign: i8,
}

/// Split a stabilizer into its first and second half in layout (ascending
/// label) order; the first half rotates positively. Odd weights get the
/// ceil/floor split.
pub fn slice_stabilizer(s: &PauliString) -> Result<SlicedPair> {
    let support = s.support();
    if support.is_empty() {
        return Err(SimError::EmptyPauli);
    }
    let cut = support.len().div_ceil(2);
    let left = s
        .restricted_to(&support[..cut])
        .expect("nonempty first half");
    let right = match s.restricted_to(&support[cut..]) {
        Some(r) => r,
        None => return Err(SimError::UnsupportedWeight(1)),
    };
    Ok(SlicedPair {
        left,
        right,
        left_sign: 1,
        right_sign: -1,
    })
}

/// One stabilizer measurement block with resolved direction signs: the
/// sliced parts in emission order, each with its sign.
#[derive(Debug, Clone)]
pub struct BlockPlan {
    pub name: String,
    pub kind: StabKind,
    pub ancilla: Qubit,
    pub parts: Vec<(PauliString, i8)>,
}

/// The full resolved extraction plan: sequential blocks, one reusable
/// ancilla slot (fresh label per block), X-type blocks before Z-type.
#[derive(Debug, Clone)]
pub struct ExtractionSchedule {
    pub mode: SlicingMode,
    pub blocks: Vec<BlockPlan>,
}

const ANCILLA_BASE: u32 = 100;

fn fresh_ancilla(index: usize) -> Qubit {
    Qubit(ANCILLA_BASE + index as u32)
}

/// Pair members of a weight-6 subsystem stabilizer along its parallel
/// weight-2 gauges, in row (X-type) or column (Z-type) order.
fn gauge_pair_order(code: &SubsystemCode, stab_name: &str, kind: StabKind) -> Option<Vec<Qubit>> {
    if code.name != "baconshor13" {
        return None;
    }
    let mut order = Vec::with_capacity(6);
    match kind {
        StabKind::X => {
            let c: u32 = stab_name.chars().rev().nth(1)?.to_digit(10)?;
            for r in 0..3u32 {
                order.push(crate::codes::grid_qubit(r, c));
                order.push(crate::codes::grid_qubit(r, c + 1));
            }
        }
        StabKind::Z => {
            let r: u32 = stab_name.chars().rev().nth(1)?.to_digit(10)?;
            for c in 0..3u32 {
                order.push(crate::codes::grid_qubit(r, c));
                order.push(crate::codes::grid_qubit(r + 1, c));
            }
        }
    }
    Some(order)
}

/// Resolve the per-part direction signs for every block.
///
/// Unsliced assigns every part +1. Sliced pairs the parts of each slice
/// group as (+1, -1). AdaptiveSliced additionally flips a pair's signs
/// wherever the tracked pair-gauge sign is -1, restoring cancellation on the
/// actual gauge sector; it requires a frame.
pub fn assign_directions(
    code: &SubsystemCode,
    per_qubit_parts: bool,
    mode: SlicingMode,
    frame: Option<&GaugeFrame>,
) -> Result<ExtractionSchedule> {
    if mode == SlicingMode::AdaptiveSliced && frame.is_none() {
        return Err(SimError::MissingGaugeFrame);
    }
    let mut blocks = Vec::with_capacity(code.stabilizers.len());
    for (idx, stab) in code.stabilizers.iter().enumerate() {
        let axis = match stab.kind {
            StabKind::X => Axis::X,
            StabKind::Z => Axis::Z,
        };
        let parts: Vec<(PauliString, i8)> = if per_qubit_parts {
            // Two-body route: one controlled single-Pauli factor per data
            // qubit, paired along gauges (subsystem code) or halves.
            let order = gauge_pair_order(code, &stab.name, stab.kind).unwrap_or_else(|| {
                let support = stab.pauli.support();
                let cut = support.len().div_ceil(2);
                // Pair i-th of first half with i-th of second half.
                let mut v = Vec::with_capacity(support.len());
                for i in 0..cut {
                    v.push(support[i]);
                    if cut + i < support.len() {
                        v.push(support[cut + i]);
                    }
                }
                v
            });
            order
                .iter()
                .enumerate()
                .map(|(i, &q)| {
                    let sign = match mode {
                        SlicingMode::Unsliced => 1,
                        _ => {
                            if i % 2 == 0 {
                                1
                            } else {
                                -1
                            }
                        }
                    };
                    (PauliString::single(q, axis), sign)
                })
                .collect()
        } else {
            let pair = slice_stabilizer(&stab.pauli)?;
            match mode {
                SlicingMode::Unsliced => vec![(pair.left, 1), (pair.right, 1)],
                _ => vec![
                    (pair.left, pair.left_sign),
                    (pair.right, pair.right_sign),
                ],
            }
        };
        let mut parts = parts;
        if mode == SlicingMode::AdaptiveSliced {
            let frame = frame.expect("checked above");
            for pair in parts.chunks_mut(2) {
                if pair.len() != 2 {
                    continue;
                }
                if let Some(gauge) = pair[0].0.product_up_to_phase(&pair[1].0) {
                    if frame.sign_of(code, &gauge) == Some(-1) {
                        // A -1 pair-gauge swaps which half mirrors which, so
                        // cancellation needs aligned signs there: flip the
                        // pair's relative direction.
                        pair[1].1 = -pair[1].1;
                    }
                }
            }
        }
        blocks.push(BlockPlan {
            name: stab.name.clone(),
            kind: stab.kind,
            ancilla: fresh_ancilla(idx),
            parts,
        });
    }
    Ok(ExtractionSchedule { mode, blocks })
}

/// The generic sliced measurement block: ancilla in |+>, a controlled
/// rotation per part at `theta = sign * pi/2`, X-basis readout.
pub fn controlled_block_steps(
    ancilla: Qubit,
    parts: &[(PauliString, i8)],
    report: Option<String>,
) -> Vec<Step> {
    let mut steps = Vec::with_capacity(parts.len() + 2);
    steps.push(Step::Prep {
        qubit: ancilla,
        basis: PrepBasis::XPlus,
    });
    for (part, sign) in parts {
        steps.push(Step::Gate(Gate::new(
            Generator::ControlledPauli {
                control: ancilla,
                target: part.clone(),
            },
            f64::from(*sign) * std::f64::consts::FRAC_PI_2,
            NoiseClass::ThreeQubitNative,
        )));
    }
    steps.push(Step::Measure {
        qubit: ancilla,
        basis: MeasBasis::X,
        report,
    });
    steps
}

/// Bare-ancilla syndrome extraction with native controlled-Pauli rotations:
/// one ancilla per stabilizer, two controlled half-rotations, X readout.
/// Only defined for stabilizer weights up to 4 (weight-2 halves need a
/// 3-body interaction).
pub fn build_extraction_3body(code: &SubsystemCode, mode: SlicingMode) -> Result<Circuit> {
    for s in &code.stabilizers {
        if s.pauli.weight() > 4 {
            return Err(SimError::UnsupportedWeight(s.pauli.weight()));
        }
    }
    // Stabilizer-level slicing has no pair gauges; an all-plus frame makes
    // AdaptiveSliced coincide with Sliced here.
    let frame_holder = GaugeFrame::all_plus(code);
    let frame = (mode == SlicingMode::AdaptiveSliced).then_some(&frame_holder);
    let schedule = assign_directions(code, false, mode, frame)?;
    let mut circuit = Circuit::new(code.data_qubits.clone());
    for block in &schedule.blocks {
        for step in controlled_block_steps(block.ancilla, &block.parts, Some(block.name.clone())) {
            circuit.push(step);
        }
    }
    Ok(circuit)
}

/// Emit one fully cancelled ion-trap cell: the two-qubit coupling rotation
/// plus the paired data rotation. X-type checks couple through `X_a X_q`
/// around a `|0>`-prepared, Z-read ancilla; Z-type checks are the exact
/// sector mirror, coupling through `Z_a Z_q` around a `|+>`-prepared,
/// X-read ancilla, so their miscalibration noise stays entirely Z-type on
/// the data. Returns the cell's contribution to the leftover ancilla
/// factor.
fn push_iontrap_cell(circuit: &mut Circuit, ancilla: Qubit, q: Qubit, sigma: i8, z_type: bool) -> i8 {
    let theta = f64::from(sigma) * FRAC_PI_4;
    if z_type {
        circuit.push(Step::Gate(Gate::new(
            Generator::Pauli(PauliString::uniform(Axis::Z, &[ancilla, q]).expect("distinct")),
            theta,
            NoiseClass::TwoQubitMS,
        )));
        circuit.push(Step::Gate(Gate::new(
            Generator::Pauli(PauliString::single(q, Axis::Z)),
            -theta,
            NoiseClass::OneQubit,
        )));
    } else {
        circuit.push(Step::Gate(ms_gate(ancilla, q, theta)));
        circuit.push(Step::Gate(Gate::new(
            Generator::Pauli(PauliString::single(q, Axis::X)),
            theta,
            NoiseClass::OneQubit,
        )));
    }
    sigma
}

/// Ion-trap extraction: each stabilizer measured through one ancilla, a
/// commuting coupling-plus-rotation cell per data qubit, a noiseless readout
/// compensator when the leftover ancilla factor demands one, and a plain
/// ancilla readout. Z-type blocks come first: their Z-sector noise is what
/// erodes the prepared X-gauges that the X-type slicing relies on.
pub fn build_extraction_iontrap(
    code: &SubsystemCode,
    mode: SlicingMode,
    frame: Option<&GaugeFrame>,
) -> Result<Circuit> {
    build_extraction_iontrap_with(code, mode, frame, BaselineConvention::AllPositive)
}

pub fn build_extraction_iontrap_with(
    code: &SubsystemCode,
    mode: SlicingMode,
    frame: Option<&GaugeFrame>,
    baseline: BaselineConvention,
) -> Result<Circuit> {
    let raw = build_extraction_iontrap_unoptimized(code, mode, frame, baseline)?;
    Ok(peephole_between_blocks(raw))
}

/// The same circuit before cross-block cancellation; each stabilizer block
/// is self-contained, which the measurement-equivalence oracles rely on.
pub fn build_extraction_iontrap_unoptimized(
    code: &SubsystemCode,
    mode: SlicingMode,
    frame: Option<&GaugeFrame>,
    baseline: BaselineConvention,
) -> Result<Circuit> {
    if code.name != "baconshor13" && code.name != "surface17" {
        return Err(SimError::UnsupportedCode(code.name.clone()));
    }
    if mode == SlicingMode::Unsliced && baseline == BaselineConvention::Figure1Default {
        return build_extraction_figure1(code);
    }
    let schedule = assign_directions(code, true, mode, frame)?;
    // Z-type blocks run first: in a single round their Z-sector noise is
    // what degrades the prepared gauge signs the X-type slicing depends on.
    let mut blocks: Vec<&BlockPlan> = schedule.blocks.iter().collect();
    blocks.sort_by_key(|b| match b.kind {
        StabKind::Z => 0,
        StabKind::X => 1,
    });
    let mut circuit = Circuit::new(code.data_qubits.clone());
    for block in blocks {
        let z_type = block.kind == StabKind::Z;
        circuit.push(Step::Prep {
            qubit: block.ancilla,
            basis: if z_type { PrepBasis::XPlus } else { PrepBasis::Z0 },
        });
        let mut sigma_sum: i32 = 0;
        for (part, sign) in &block.parts {
            let q = part.support()[0];
            sigma_sum += i32::from(push_iontrap_cell(
                &mut circuit,
                block.ancilla,
                q,
                *sign,
                z_type,
            ));
        }
        if sigma_sum.rem_euclid(4) == 2 {
            // Leftover ancilla half-turn: a readout flip, applied as a
            // noiseless compensator so the text format stays lossless.
            let axis = if z_type { Axis::Z } else { Axis::X };
            circuit.push(Step::Gate(Gate::new(
                Generator::Pauli(PauliString::single(block.ancilla, axis)),
                std::f64::consts::FRAC_PI_2,
                NoiseClass::Noiseless,
            )));
        }
        circuit.push(Step::Measure {
            qubit: block.ancilla,
            basis: if z_type { MeasBasis::X } else { MeasBasis::Z },
            report: Some(block.name.clone()),
        });
    }
    Ok(circuit)
}

/// The verbatim stacked-compilation baseline: ancilla in |+>, one compiled
/// CNOT per data qubit with `s = v = +1` (Hadamard sandwiches for Z-type),
/// X readout. Cross-block cancellation is applied by the caller.
fn build_extraction_figure1(code: &SubsystemCode) -> Result<Circuit> {
    let schedule = assign_directions(code, true, SlicingMode::Unsliced, None)?;
    let mut circuit = Circuit::new(code.data_qubits.clone());
    for block in &schedule.blocks {
        circuit.push(Step::Prep {
            qubit: block.ancilla,
            basis: PrepBasis::XPlus,
        });
        let z_type = block.kind == StabKind::Z;
        for (part, _) in &block.parts {
            let q = part.support()[0];
            if z_type {
                circuit.push_gates(compile_hadamard(q, 2));
            }
            circuit.push_gates(crate::circuit::compile_cnot(block.ancilla, q, 1, 1));
            if z_type {
                circuit.push_gates(compile_hadamard(q, 1));
            }
        }
        circuit.push(Step::Measure {
            qubit: block.ancilla,
            basis: MeasBasis::X,
            report: Some(block.name.clone()),
        });
    }
    Ok(circuit)
}

fn peephole_between_blocks(circuit: Circuit) -> Circuit {
    // Opposing-pair removal only: basis-change sandwiches between
    // consecutive blocks vanish, while same-direction cell rotations are
    // never merged across blocks (that would fuse their error directions).
    crate::circuit::cancel_opposing_pairs(&circuit)
}

/// Which physical gate set the extraction circuits compile to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateSet {
    Native3Body,
    IonTrap2Body,
}

impl GateSet {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "native3body" => Ok(GateSet::Native3Body),
            "iontrap2body" => Ok(GateSet::IonTrap2Body),
            other => Err(SimError::InvalidCircuit(format!(
                "unknown gate set `{other}`"
            ))),
        }
    }
}

/// One full extraction round for the chosen gate set.
pub fn build_extraction(
    code: &SubsystemCode,
    gate_set: GateSet,
    mode: SlicingMode,
    frame: Option<&GaugeFrame>,
) -> Result<Circuit> {
    match gate_set {
        GateSet::Native3Body => build_extraction_3body(code, mode),
        GateSet::IonTrap2Body => build_extraction_iontrap(code, mode, frame),
    }
}
