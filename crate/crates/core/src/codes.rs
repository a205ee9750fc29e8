//! The two distance-3 codes, brute-force lookup decoding, logical state
//! preparation, and gauge-frame tracking.
//!
//! Data qubits live on a 3x3 grid with label `3*row + col`. The subsystem
//! code convention puts X-gauges on horizontal neighbor pairs and X-type
//! stabilizers on column pairs (each weight-6 stabilizer is the product of
//! its three parallel weight-2 gauges); Z is transposed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::pauli::{Axis, PauliString, Qubit};
use crate::state::{DensityState, PureState};
use crate::{Result, SimError};

/// Stabilizer type marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabKind {
    X,
    Z,
}

/// A named stabilizer generator.
#[derive(Debug, Clone)]
pub struct Stabilizer {
    pub name: String,
    pub kind: StabKind,
    pub pauli: PauliString,
}

/// Code geometry: stabilizers, gauge generators (empty for subspace codes),
/// and bare logical operators.
#[derive(Debug, Clone)]
pub struct SubsystemCode {
    pub name: String,
    pub data_qubits: Vec<Qubit>,
    pub coords: Vec<(u32, u32)>,
    pub stabilizers: Vec<Stabilizer>,
    pub x_gauges: Vec<PauliString>,
    pub z_gauges: Vec<PauliString>,
    pub logical_z: PauliString,
    pub logical_x: PauliString,
}

pub fn grid_qubit(row: u32, col: u32) -> Qubit {
    Qubit(3 * row + col)
}

fn pauli_on(axis: Axis, cells: &[(u32, u32)]) -> PauliString {
    let qs: Vec<Qubit> = cells.iter().map(|&(r, c)| grid_qubit(r, c)).collect();
    PauliString::uniform(axis, &qs).expect("distinct cells")
}

/// Rotated distance-3 surface code on 9 data qubits: four weight-4 bulk
/// plaquettes and four weight-2 boundary checks, no gauges.
pub fn surface17() -> SubsystemCode {
    let stabilizers = vec![
        Stabilizer {
            name: "X_top".into(),
            kind: StabKind::X,
            pauli: pauli_on(Axis::X, &[(0, 0), (0, 1)]),
        },
        Stabilizer {
            name: "X_ne".into(),
            kind: StabKind::X,
            pauli: pauli_on(Axis::X, &[(0, 1), (0, 2), (1, 1), (1, 2)]),
        },
        Stabilizer {
            name: "X_sw".into(),
            kind: StabKind::X,
            pauli: pauli_on(Axis::X, &[(1, 0), (1, 1), (2, 0), (2, 1)]),
        },
        Stabilizer {
            name: "X_bottom".into(),
            kind: StabKind::X,
            pauli: pauli_on(Axis::X, &[(2, 1), (2, 2)]),
        },
        Stabilizer {
            name: "Z_nw".into(),
            kind: StabKind::Z,
            pauli: pauli_on(Axis::Z, &[(0, 0), (0, 1), (1, 0), (1, 1)]),
        },
        Stabilizer {
            name: "Z_right".into(),
            kind: StabKind::Z,
            pauli: pauli_on(Axis::Z, &[(0, 2), (1, 2)]),
        },
        Stabilizer {
            name: "Z_left".into(),
            kind: StabKind::Z,
            pauli: pauli_on(Axis::Z, &[(1, 0), (2, 0)]),
        },
        Stabilizer {
            name: "Z_se".into(),
            kind: StabKind::Z,
            pauli: pauli_on(Axis::Z, &[(1, 1), (1, 2), (2, 1), (2, 2)]),
        },
    ];
    SubsystemCode {
        name: "surface17".into(),
        data_qubits: (0..9).map(Qubit).collect(),
        coords: (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).collect(),
        stabilizers,
        x_gauges: Vec::new(),
        z_gauges: Vec::new(),
        logical_z: pauli_on(Axis::Z, &[(1, 0), (1, 1), (1, 2)]),
        logical_x: pauli_on(Axis::X, &[(0, 1), (1, 1), (2, 1)]),
    }
}

/// Nine-qubit Bacon-Shor code: two weight-6 X stabilizers on adjacent column
/// pairs, two weight-6 Z stabilizers on adjacent row pairs, and twelve
/// weight-2 gauge generators.
pub fn baconshor13() -> SubsystemCode {
    let mut stabilizers = Vec::new();
    for c in 0..2u32 {
        let cells: Vec<(u32, u32)> = (0..3).flat_map(|r| [(r, c), (r, c + 1)]).collect();
        stabilizers.push(Stabilizer {
            name: format!("X_cols{}{}", c, c + 1),
            kind: StabKind::X,
            pauli: pauli_on(Axis::X, &cells),
        });
    }
    for r in 0..2u32 {
        let cells: Vec<(u32, u32)> = (0..3).flat_map(|c| [(r, c), (r + 1, c)]).collect();
        stabilizers.push(Stabilizer {
            name: format!("Z_rows{}{}", r, r + 1),
            kind: StabKind::Z,
            pauli: pauli_on(Axis::Z, &cells),
        });
    }
    let mut x_gauges = Vec::new();
    for r in 0..3u32 {
        for c in 0..2u32 {
            x_gauges.push(pauli_on(Axis::X, &[(r, c), (r, c + 1)]));
        }
    }
    let mut z_gauges = Vec::new();
    for r in 0..2u32 {
        for c in 0..3u32 {
            z_gauges.push(pauli_on(Axis::Z, &[(r, c), (r + 1, c)]));
        }
    }
    SubsystemCode {
        name: "baconshor13".into(),
        data_qubits: (0..9).map(Qubit).collect(),
        coords: (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).collect(),
        stabilizers,
        x_gauges,
        z_gauges,
        logical_z: pauli_on(Axis::Z, &[(0, 0), (0, 1), (0, 2)]),
        logical_x: pauli_on(Axis::X, &[(0, 0), (1, 0), (2, 0)]),
    }
}

/// Code lookup by config name.
pub fn code_by_name(name: &str) -> Result<SubsystemCode> {
    match name {
        "surface17" => Ok(surface17()),
        "baconshor13" => Ok(baconshor13()),
        other => Err(SimError::UnsupportedCode(other.into())),
    }
}

impl SubsystemCode {
    /// Syndrome bits of a Pauli error, one per stabilizer: 1 iff they
    /// anticommute.
    pub fn syndrome_of(&self, error: &PauliString) -> Vec<bool> {
        self.stabilizers
            .iter()
            .map(|s| !s.pauli.commutes_with(error))
            .collect()
    }

    /// Membership in the group generated by stabilizers and gauges, up to
    /// phase: trivial syndrome and commuting with both bare logicals.
    pub fn in_gauge_group(&self, p: &PauliString) -> bool {
        self.syndrome_of(p).iter().all(|b| !b)
            && p.commutes_with(&self.logical_x)
            && p.commutes_with(&self.logical_z)
    }

    pub fn stabilizer_names(&self) -> Vec<String> {
        self.stabilizers.iter().map(|s| s.name.clone()).collect()
    }

    pub fn stabilizer_by_name(&self, name: &str) -> Option<&Stabilizer> {
        self.stabilizers.iter().find(|s| s.name == name)
    }
}

/// Lookup decoder: syndrome bits to correction, built by brute force over
/// weight-1 errors and extended by minimum-weight search over weight-2
/// errors; ties break to the lexicographically smallest (label, letter)
/// sequence. Trivial syndrome maps to the identity.
#[derive(Debug, Clone)]
pub struct SyndromeTable {
    entries: BTreeMap<Vec<bool>, PauliString>,
    n_stabilizers: usize,
}

const LETTERS: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

pub fn build_lookup_decoder(code: &SubsystemCode) -> SyndromeTable {
    let mut entries: BTreeMap<Vec<bool>, PauliString> = BTreeMap::new();
    let qs = &code.data_qubits;
    for &q in qs {
        for a in LETTERS {
            let e = PauliString::single(q, a);
            let syn = code.syndrome_of(&e);
            if syn.iter().any(|&b| b) {
                entries.entry(syn).or_insert(e);
            }
        }
    }
    for i in 0..qs.len() {
        for a in LETTERS {
            for j in (i + 1)..qs.len() {
                for b in LETTERS {
                    let mut m = BTreeMap::new();
                    m.insert(qs[i], a);
                    m.insert(qs[j], b);
                    let e = PauliString::new(m).expect("nonempty");
                    let syn = code.syndrome_of(&e);
                    if syn.iter().any(|&x| x) {
                        entries.entry(syn).or_insert(e);
                    }
                }
            }
        }
    }
    SyndromeTable {
        entries,
        n_stabilizers: code.stabilizers.len(),
    }
}

impl SyndromeTable {
    /// Correction for a syndrome; `None` means identity (trivial syndrome or
    /// unreachable by weight <= 2, which callers may warn about via
    /// [`Self::contains`]).
    pub fn correction_for(&self, syndrome: &[bool]) -> Option<&PauliString> {
        self.entries.get(syndrome)
    }

    /// Whether the syndrome is either trivial or has a table entry.
    pub fn contains(&self, syndrome: &[bool]) -> bool {
        syndrome.iter().all(|&b| !b) || self.entries.contains_key(syndrome)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Text dump for auditing, one `bits -> correction` line per syndrome.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let zeros: String = "0".repeat(self.n_stabilizers);
        let _ = writeln!(out, "{zeros} -> I");
        for (syn, corr) in &self.entries {
            let bits: String = syn.iter().map(|&b| if b { '1' } else { '0' }).collect();
            let _ = writeln!(out, "{bits} -> {corr}");
        }
        out
    }
}

/// Pure |0>_L with every stabilizer at +1, bare Z_L at +1, and (for the
/// subsystem code) every X-gauge at +1; built by projecting a fiducial basis
/// state and renormalizing.
pub fn prepare_logical_zero_pure(code: &SubsystemCode) -> Result<PureState> {
    let n = code.data_qubits.len();
    let mut state = PureState::new_state(&code.data_qubits, &vec![false; n])?;
    let mut generators: Vec<&PauliString> = Vec::new();
    for s in &code.stabilizers {
        generators.push(&s.pauli);
    }
    for g in &code.x_gauges {
        generators.push(g);
    }
    generators.push(&code.logical_z);
    for g in generators {
        let mut flipped = state.clone();
        flipped.apply_pauli(g)?;
        state.average_with(&flipped)?;
        if state.norm_sq() < 1e-12 {
            return Err(SimError::AnnihilatedFiducial);
        }
    }
    state.renormalize()?;
    Ok(state)
}

/// Density-matrix form of [`prepare_logical_zero_pure`].
pub fn prepare_logical_zero(code: &SubsystemCode) -> Result<DensityState> {
    Ok(DensityState::from_pure(&prepare_logical_zero_pure(code)?))
}

/// One-sided logical error functional: `tr(Pi_- rho)` with
/// `Pi_- = (I - Z_L)/2` using the bare logical. Weight-bearing, so
/// subnormalized branch states contribute their share directly.
pub fn one_sided_error(state: &DensityState, code: &SubsystemCode) -> Result<f64> {
    let w = state.weight();
    let t = state.pauli_trace(&code.logical_z)?;
    Ok((w - t) / 2.0)
}

/// Pure-state variant: probability that an ideal logical-Z readout returns
/// -1.
pub fn one_sided_error_pure(state: &PureState, code: &SubsystemCode) -> Result<f64> {
    let t = state.pauli_expectation(&code.logical_z)?;
    Ok(((1.0 - t) / 2.0).clamp(0.0, 1.0))
}

/// Tracked +/-1 signs of the X-gauge generators, in `code.x_gauges` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaugeFrame {
    pub signs: Vec<i8>,
}

impl GaugeFrame {
    pub fn all_plus(code: &SubsystemCode) -> Self {
        GaugeFrame {
            signs: vec![1; code.x_gauges.len()],
        }
    }

    /// Flip every tracked sign whose gauge anticommutes with the applied
    /// Pauli (correction or sampled stochastic error).
    pub fn update_with_pauli(&mut self, code: &SubsystemCode, p: &PauliString) {
        for (i, g) in code.x_gauges.iter().enumerate() {
            if !g.commutes_with(p) {
                self.signs[i] = -self.signs[i];
            }
        }
    }

    /// Sign of one tracked gauge generator, matched structurally.
    pub fn sign_of(&self, code: &SubsystemCode, gauge: &PauliString) -> Option<i8> {
        code.x_gauges
            .iter()
            .position(|g| g == gauge)
            .map(|i| self.signs[i])
    }
}

/// Read the gauge frame off a state with definite gauge expectations; each
/// X-gauge expectation must lie within 1e-6 of +/-1.
pub fn infer_gauge_frame(state: &DensityState, code: &SubsystemCode) -> Result<GaugeFrame> {
    let mut signs = Vec::with_capacity(code.x_gauges.len());
    for g in &code.x_gauges {
        let e = state.pauli_expectation(g)?;
        if (e - 1.0).abs() < 1e-6 {
            signs.push(1);
        } else if (e + 1.0).abs() < 1e-6 {
            signs.push(-1);
        } else {
            return Err(SimError::IndefiniteGauge(e));
        }
    }
    Ok(GaugeFrame { signs })
}

/// Sign-rounded gauge frame of a trajectory state; tolerates the small
/// coherent wiggle that strict inference rejects.
pub fn nearest_gauge_frame_pure(state: &PureState, code: &SubsystemCode) -> Result<GaugeFrame> {
    let mut signs = Vec::with_capacity(code.x_gauges.len());
    for g in &code.x_gauges {
        let e = state.pauli_expectation(g)?;
        signs.push(if e >= 0.0 { 1 } else { -1 });
    }
    Ok(GaugeFrame { signs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: u32) -> Qubit {
        Qubit(n)
    }

    #[test]
    fn surface17_structure() {
        let code = surface17();
        assert_eq!(code.data_qubits.len(), 9);
        assert_eq!(code.stabilizers.len(), 8);
        let mut weights: Vec<usize> = code.stabilizers.iter().map(|s| s.pauli.weight()).collect();
        weights.sort_unstable();
        assert_eq!(weights, vec![2, 2, 2, 2, 4, 4, 4, 4]);
        // All-commuting stabilizer set.
        for a in &code.stabilizers {
            for b in &code.stabilizers {
                assert!(a.pauli.commutes_with(&b.pauli), "{} vs {}", a.name, b.name);
            }
        }
        assert_eq!(code.logical_z.weight(), 3);
        assert_eq!(code.logical_x.weight(), 3);
        assert!(!code.logical_z.commutes_with(&code.logical_x));
        for s in &code.stabilizers {
            assert!(s.pauli.commutes_with(&code.logical_z));
            assert!(s.pauli.commutes_with(&code.logical_x));
        }
    }

    #[test]
    fn baconshor13_structure() {
        let code = baconshor13();
        assert_eq!(code.stabilizers.len(), 4);
        assert!(code.stabilizers.iter().all(|s| s.pauli.weight() == 6));
        assert_eq!(code.x_gauges.len(), 6);
        assert_eq!(code.z_gauges.len(), 6);

        // Each X stabilizer is the product of its three parallel gauges.
        let xs0 = &code.stabilizer_by_name("X_cols01").unwrap().pauli;
        let mut acc: Option<PauliString> = None;
        for r in 0..3 {
            let g = &code.x_gauges[2 * r]; // (r, 0)-(r, 1)
            acc = Some(match acc {
                None => g.clone(),
                Some(a) => a.product_up_to_phase(g).unwrap(),
            });
        }
        assert_eq!(&acc.unwrap(), xs0);

        // Stabilizers commute with every gauge.
        for s in &code.stabilizers {
            for g in code.x_gauges.iter().chain(code.z_gauges.iter()) {
                assert!(s.pauli.commutes_with(g));
            }
        }
        // Bare logicals commute with every gauge generator.
        for g in code.x_gauges.iter().chain(code.z_gauges.iter()) {
            assert!(code.logical_z.commutes_with(g));
            assert!(code.logical_x.commutes_with(g));
        }
        assert!(!code.logical_z.commutes_with(&code.logical_x));
    }

    #[test]
    fn baconshor_syndrome_example() {
        let code = baconshor13();
        // X error at grid (0,0): Z_rows01 fires, Z_rows12 does not.
        let e = PauliString::single(grid_qubit(0, 0), Axis::X);
        let syn = code.syndrome_of(&e);
        let names = code.stabilizer_names();
        let idx = |n: &str| names.iter().position(|s| s == n).unwrap();
        assert!(syn[idx("Z_rows01")]);
        assert!(!syn[idx("Z_rows12")]);
        assert!(!syn[idx("X_cols01")]);
        assert!(!syn[idx("X_cols12")]);
    }

    #[test]
    fn decoder_trivial_syndrome_is_identity() {
        let code = surface17();
        let table = build_lookup_decoder(&code);
        let trivial = vec![false; 8];
        assert!(table.correction_for(&trivial).is_none());
        assert!(table.contains(&trivial));
    }

    #[test]
    fn decoder_soundness_weight_one_exhaustive() {
        for code in [surface17(), baconshor13()] {
            let table = build_lookup_decoder(&code);
            for &qq in &code.data_qubits {
                for a in LETTERS {
                    let e = PauliString::single(qq, a);
                    let syn = code.syndrome_of(&e);
                    if syn.iter().all(|&b| !b) {
                        assert!(code.in_gauge_group(&e));
                        continue;
                    }
                    let corr = table
                        .correction_for(&syn)
                        .unwrap_or_else(|| panic!("{}: missing {:?}", code.name, syn));
                    let residue = corr.product_up_to_phase(&e);
                    match residue {
                        None => {}
                        Some(r) => assert!(
                            code.in_gauge_group(&r),
                            "{}: correction leaves logical component for {a:?} on {qq}",
                            code.name
                        ),
                    }
                }
            }
        }
    }

    #[test]
    fn surface17_z_errors_all_corrected_cleanly() {
        let code = surface17();
        let table = build_lookup_decoder(&code);
        for &qq in &code.data_qubits {
            let e = PauliString::single(qq, Axis::Z);
            let syn = code.syndrome_of(&e);
            let corr = table.correction_for(&syn).expect("single Z must decode");
            let residue = corr.product_up_to_phase(&e);
            match residue {
                None => {}
                Some(r) => assert!(code.in_gauge_group(&r), "logical flip on {qq}"),
            }
        }
    }

    #[test]
    fn baconshor_x00_correction_in_row0() {
        let code = baconshor13();
        let table = build_lookup_decoder(&code);
        let e = PauliString::single(grid_qubit(0, 0), Axis::X);
        let corr = table.correction_for(&code.syndrome_of(&e)).unwrap();
        // An X supported on row 0, equivalent to the error up to X-gauges.
        for (qq, a) in corr.factors() {
            assert_eq!(*a, Axis::X);
            assert!(qq.0 < 3, "correction off row 0: {qq}");
        }
        let residue = corr.product_up_to_phase(&e);
        if let Some(r) = residue {
            assert!(code.in_gauge_group(&r));
        }
    }

    #[test]
    fn decoder_dump_is_parseable_text() {
        let code = baconshor13();
        let table = build_lookup_decoder(&code);
        let dump = table.dump();
        assert!(dump.lines().count() > table.len());
        assert!(dump.starts_with("0000 -> I"));
    }

    #[test]
    fn prepared_zero_surface17() {
        let code = surface17();
        let state = prepare_logical_zero(&code).unwrap();
        assert!((state.weight() - 1.0).abs() < 1e-10);
        for s in &code.stabilizers {
            assert!(
                (state.pauli_expectation(&s.pauli).unwrap() - 1.0).abs() < 1e-10,
                "{} not +1",
                s.name
            );
        }
        assert!((state.pauli_expectation(&code.logical_z).unwrap() - 1.0).abs() < 1e-10);
        assert!(state.pauli_expectation(&code.logical_x).unwrap().abs() < 1e-10);
    }

    #[test]
    fn prepared_zero_baconshor_gauge_fixed() {
        let code = baconshor13();
        let state = prepare_logical_zero(&code).unwrap();
        for g in &code.x_gauges {
            assert!((state.pauli_expectation(g).unwrap() - 1.0).abs() < 1e-10);
        }
        for s in &code.stabilizers {
            assert!((state.pauli_expectation(&s.pauli).unwrap() - 1.0).abs() < 1e-10);
        }
        assert!((state.pauli_expectation(&code.logical_z).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn one_sided_error_values() {
        let code = surface17();
        let clean = prepare_logical_zero(&code).unwrap();
        assert!(one_sided_error(&clean, &code).unwrap().abs() < 1e-12);

        let mut flipped = clean.clone();
        flipped.apply_pauli(&code.logical_x).unwrap();
        assert!((one_sided_error(&flipped, &code).unwrap() - 1.0).abs() < 1e-12);

        let mut phased = clean.clone();
        phased.apply_pauli(&code.logical_z).unwrap();
        assert!(one_sided_error(&phased, &code).unwrap().abs() < 1e-12);
    }

    #[test]
    fn one_sided_error_gauge_invariance_and_linearity() {
        let code = baconshor13();
        let clean = prepare_logical_zero(&code).unwrap();
        let mut conj = clean.clone();
        conj.apply_pauli(&code.z_gauges[2]).unwrap();
        let a = one_sided_error(&clean, &code).unwrap();
        let b = one_sided_error(&conj, &code).unwrap();
        assert!((a - b).abs() < 1e-12);

        let mut scaled = clean.clone();
        scaled.apply_pauli(&code.logical_x).unwrap();
        scaled.scale(0.25);
        assert!((one_sided_error(&scaled, &code).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gauge_frame_inference_and_updates() {
        let code = baconshor13();
        let state = prepare_logical_zero(&code).unwrap();
        let frame = infer_gauge_frame(&state, &code).unwrap();
        assert_eq!(frame, GaugeFrame::all_plus(&code));

        // Z at grid (0,0) flips the X-gauges touching that qubit.
        let mut hit = state.clone();
        let z00 = PauliString::single(grid_qubit(0, 0), Axis::Z);
        hit.apply_pauli(&z00).unwrap();
        let inferred = infer_gauge_frame(&hit, &code).unwrap();
        let mut tracked = GaugeFrame::all_plus(&code);
        tracked.update_with_pauli(&code, &z00);
        assert_eq!(inferred, tracked);

        // Applying an X-gauge itself leaves the frame alone.
        let mut gauged = state.clone();
        gauged.apply_pauli(&code.x_gauges[3]).unwrap();
        assert_eq!(
            infer_gauge_frame(&gauged, &code).unwrap(),
            GaugeFrame::all_plus(&code)
        );
    }

    #[test]
    fn indefinite_gauge_detected() {
        let code = baconshor13();
        // |0...0> has <X-gauge> = 0.
        let state = DensityState::new_state(&code.data_qubits, &[false; 9]).unwrap();
        assert!(matches!(
            infer_gauge_frame(&state, &code),
            Err(SimError::IndefiniteGauge(_))
        ));
    }

    #[test]
    fn gauge_group_membership() {
        let code = baconshor13();
        assert!(code.in_gauge_group(&code.x_gauges[0]));
        assert!(code.in_gauge_group(&code.stabilizers[0].pauli));
        assert!(!code.in_gauge_group(&code.logical_x));
        assert!(!code.in_gauge_group(&PauliString::single(q(4), Axis::Y)));
    }
}
