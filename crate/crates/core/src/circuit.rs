//! Circuits as rotations generated by Hermitian involutions with explicit
//! direction signs.
//!
//! Every gate is `exp(-i theta M)` for an involution `M` (`M^2 = I`,
//! `M = M^dagger`), so the unitary is exactly `cos(theta) I - i sin(theta) M`
//! and direction is simply the sign of `theta`. Trapped-ion gate
//! compilations, the first-order-cancelling three-pulse composite rotation,
//! and a peephole cancellation pass live here too.

use std::f64::consts::PI;
use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;

use crate::pauli::{Axis, PauliString, Qubit};
use crate::state::PrepBasis;
use crate::{Result, SimError};

/// Hermitian involution generating a rotation.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// Tensor product of Paulis.
    Pauli(PauliString),
    /// Controlled Pauli string: `|0><0| (x) I + |1><1| (x) P`, itself a
    /// Hermitian involution. The control must not be in the target support.
    ControlledPauli { control: Qubit, target: PauliString },
    /// `cos(phi) X + sin(phi) Y` on one qubit; the axis lies in the XY plane.
    PlanarAxis { qubit: Qubit, phi: f64 },
}

impl Generator {
    /// Gate support in matrix order: control first for controlled gates.
    pub fn support(&self) -> Vec<Qubit> {
        match self {
            Generator::Pauli(p) => p.support(),
            Generator::ControlledPauli { control, target } => {
                let mut v = vec![*control];
                v.extend(target.support());
                v
            }
            Generator::PlanarAxis { qubit, .. } => vec![*qubit],
        }
    }

    /// Dense matrix in the support order returned by [`Self::support`].
    pub fn matrix(&self) -> Result<Array2<Complex64>> {
        match self {
            Generator::Pauli(p) => {
                let order = p.support();
                p.matrix_on(&order)
            }
            Generator::ControlledPauli { control, target } => {
                if target.support().contains(control) {
                    return Err(SimError::BadSupport(
                        "control overlaps controlled-Pauli target".into(),
                    ));
                }
                let tgt_order = target.support();
                let pt = target.matrix_on(&tgt_order)?;
                let d = pt.nrows();
                let mut m = Array2::zeros((2 * d, 2 * d));
                for i in 0..d {
                    m[(i, i)] = Complex64::new(1.0, 0.0);
                }
                for r in 0..d {
                    for c in 0..d {
                        m[(d + r, d + c)] = pt[(r, c)];
                    }
                }
                Ok(m)
            }
            Generator::PlanarAxis { phi, .. } => {
                let mut m = Array2::zeros((2, 2));
                m[(0, 1)] = Complex64::new(phi.cos(), -phi.sin());
                m[(1, 0)] = Complex64::new(phi.cos(), phi.sin());
                Ok(m)
            }
        }
    }

    /// Number of qubits the generator acts on.
    pub fn arity(&self) -> usize {
        self.support().len()
    }

    /// Signed-permutation action on the computational basis of a register:
    /// `G|c> = phase[c] |perm[c]>`. Every generator kind here is such an
    /// involution, which is what makes the in-place channel update possible.
    pub fn basis_tables(&self, order: &[Qubit]) -> Result<(Vec<usize>, Vec<Complex64>)> {
        let n = order.len();
        let dim = 1usize << n;
        let one = Complex64::new(1.0, 0.0);
        match self {
            Generator::Pauli(p) => {
                for q in p.support() {
                    if !order.contains(&q) {
                        return Err(SimError::UnknownQubit(q.0));
                    }
                }
                let mut perm = vec![0usize; dim];
                let mut phase = vec![one; dim];
                for idx in 0..dim {
                    let (r, ph) = p.apply_to_basis(idx, order);
                    perm[idx] = r;
                    phase[idx] = ph;
                }
                Ok((perm, phase))
            }
            Generator::ControlledPauli { control, target } => {
                let pos = order
                    .iter()
                    .position(|q| q == control)
                    .ok_or(SimError::UnknownQubit(control.0))?;
                for q in target.support() {
                    if !order.contains(&q) {
                        return Err(SimError::UnknownQubit(q.0));
                    }
                }
                let cbit = 1usize << (n - 1 - pos);
                let mut perm = vec![0usize; dim];
                let mut phase = vec![one; dim];
                for idx in 0..dim {
                    if idx & cbit != 0 {
                        let (r, ph) = target.apply_to_basis(idx, order);
                        perm[idx] = r;
                        phase[idx] = ph;
                    } else {
                        perm[idx] = idx;
                    }
                }
                Ok((perm, phase))
            }
            Generator::PlanarAxis { qubit, phi } => {
                let pos = order
                    .iter()
                    .position(|q| q == qubit)
                    .ok_or(SimError::UnknownQubit(qubit.0))?;
                let bit = 1usize << (n - 1 - pos);
                let up = Complex64::new(phi.cos(), phi.sin());
                let mut perm = vec![0usize; dim];
                let mut phase = vec![one; dim];
                for idx in 0..dim {
                    perm[idx] = idx ^ bit;
                    phase[idx] = if idx & bit == 0 { up } else { up.conj() };
                }
                Ok((perm, phase))
            }
        }
    }
}

/// Noise class a gate belongs to; fixes which error angle applies and the
/// reference rotation angle the error is quoted at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseClass {
    OneQubit,
    TwoQubitMS,
    ThreeQubitNative,
    Noiseless,
}

/// A signed rotation. Direction is carried by the sign of `theta`; there is
/// no separate flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub generator: Generator,
    pub theta: f64,
    pub noise_class: NoiseClass,
}

impl Gate {
    pub fn new(generator: Generator, theta: f64, noise_class: NoiseClass) -> Self {
        Gate {
            generator,
            theta,
            noise_class,
        }
    }

    pub fn support(&self) -> Vec<Qubit> {
        self.generator.support()
    }

    pub fn direction(&self) -> f64 {
        if self.theta >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// `exp(-i theta M) = cos(theta) I - i sin(theta) M`; exact for involutions.
pub fn rotation_unitary(gate: &Gate) -> Result<Array2<Complex64>> {
    rotation_matrix(&gate.generator, gate.theta)
}

/// Rotation by an explicit angle about a generator.
pub fn rotation_matrix(generator: &Generator, theta: f64) -> Result<Array2<Complex64>> {
    let m = generator.matrix()?;
    let d = m.nrows();
    let mut out = m.mapv(|v| v * Complex64::new(0.0, -theta.sin()));
    let c = Complex64::new(theta.cos(), 0.0);
    for i in 0..d {
        out[(i, i)] += c;
    }
    Ok(out)
}

/// Measurement basis for an ancilla readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasBasis {
    Z,
    X,
}

/// One circuit step. Ancillas are prepared before use and measured exactly
/// once; a measurement removes its qubit from the register.
#[derive(Debug, Clone)]
pub enum Step {
    Prep {
        qubit: Qubit,
        basis: PrepBasis,
    },
    Gate(Gate),
    Measure {
        qubit: Qubit,
        basis: MeasBasis,
        /// Which stabilizer this readout reports, if any.
        report: Option<String>,
    },
}

/// Ordered list of steps over declared data qubits plus dynamically prepared
/// ancillas.
#[derive(Debug, Clone, Default)]
pub struct Circuit {
    pub data_qubits: Vec<Qubit>,
    pub steps: Vec<Step>,
}

impl Circuit {
    pub fn new(data_qubits: Vec<Qubit>) -> Self {
        Circuit {
            data_qubits,
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, step: Step) {
        self.steps.push(step);
    }

    pub fn push_gates(&mut self, gates: impl IntoIterator<Item = Gate>) {
        for g in gates {
            self.steps.push(Step::Gate(g));
        }
    }

    pub fn gate_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, Step::Gate(_)))
            .count()
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.steps.iter().filter_map(|s| match s {
            Step::Gate(g) => Some(g),
            _ => None,
        })
    }

    /// Enforce the structural invariants: every gate support declared or a
    /// live ancilla, ancillas prepared before use and measured exactly once,
    /// nothing touches a measured qubit afterward.
    pub fn validate(&self) -> Result<()> {
        let mut live: Vec<Qubit> = self.data_qubits.clone();
        let mut measured: Vec<Qubit> = Vec::new();
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::Prep { qubit, .. } => {
                    if live.contains(qubit) || measured.contains(qubit) {
                        return Err(SimError::InvalidCircuit(format!(
                            "step {i}: qubit {qubit} prepared twice or already live"
                        )));
                    }
                    live.push(*qubit);
                }
                Step::Gate(g) => {
                    for q in g.support() {
                        if measured.contains(&q) {
                            return Err(SimError::InvalidCircuit(format!(
                                "step {i}: gate touches measured qubit {q}"
                            )));
                        }
                        if !live.contains(&q) {
                            return Err(SimError::InvalidCircuit(format!(
                                "step {i}: gate touches undeclared qubit {q}"
                            )));
                        }
                    }
                }
                Step::Measure { qubit, .. } => {
                    if !live.contains(qubit) {
                        return Err(SimError::InvalidCircuit(format!(
                            "step {i}: measurement of non-live qubit {qubit}"
                        )));
                    }
                    live.retain(|q| q != qubit);
                    measured.push(*qubit);
                }
            }
        }
        Ok(())
    }

    /// Ordered product of the gate unitaries over the declared register;
    /// only defined for measurement-free circuits of at most 12 qubits.
    pub fn unitary(&self) -> Result<Array2<Complex64>> {
        let mut order = self.data_qubits.clone();
        for step in &self.steps {
            match step {
                Step::Measure { .. } => return Err(SimError::MeasurementInUnitary),
                Step::Prep { qubit, .. } => order.push(*qubit),
                Step::Gate(_) => {}
            }
        }
        if order.len() > crate::state::MAX_QUBITS {
            return Err(SimError::RegisterOverflow(crate::state::MAX_QUBITS));
        }
        let n = order.len();
        let dim = 1usize << n;
        let mut total = Array2::from_diag_elem(dim, Complex64::new(1.0, 0.0));
        for step in &self.steps {
            if let Step::Gate(g) = step {
                let u = rotation_unitary(g)?;
                let emb = embed_unitary(&u, &g.support(), &order)?;
                total = emb.dot(&total);
            }
        }
        Ok(total)
    }
}

/// Embed a `k`-qubit unitary into the full register in `order` convention
/// (first label = most significant bit).
pub fn embed_unitary(
    u: &Array2<Complex64>,
    support: &[Qubit],
    order: &[Qubit],
) -> Result<Array2<Complex64>> {
    let n = order.len();
    let k = support.len();
    let bits: Vec<usize> = support
        .iter()
        .map(|q| {
            order
                .iter()
                .position(|r| r == q)
                .map(|p| n - 1 - p)
                .ok_or(SimError::UnknownQubit(q.0))
        })
        .collect::<Result<_>>()?;
    let dim = 1usize << n;
    let sub = 1usize << k;
    let mask: usize = bits.iter().map(|&b| 1usize << b).sum();
    let spread = |s: usize| -> usize {
        let mut out = 0usize;
        for (j, &b) in bits.iter().enumerate() {
            out |= ((s >> (k - 1 - j)) & 1) << b;
        }
        out
    };
    let mut out = Array2::zeros((dim, dim));
    for base in 0..dim {
        if base & mask != 0 {
            continue;
        }
        for s in 0..sub {
            for t in 0..sub {
                out[(base | spread(s), base | spread(t))] = u[(s, t)];
            }
        }
    }
    Ok(out)
}

fn rx(q: Qubit, theta: f64) -> Gate {
    Gate::new(
        Generator::Pauli(PauliString::single(q, Axis::X)),
        theta,
        NoiseClass::OneQubit,
    )
}

fn ry(q: Qubit, theta: f64) -> Gate {
    Gate::new(
        Generator::Pauli(PauliString::single(q, Axis::Y)),
        theta,
        NoiseClass::OneQubit,
    )
}

/// Two-qubit XX rotation; `theta = +/- pi/4` is the maximally entangling
/// native gate.
pub fn ms_gate(a: Qubit, b: Qubit, theta: f64) -> Gate {
    Gate::new(
        Generator::Pauli(PauliString::uniform(Axis::X, &[a, b]).expect("distinct")),
        theta,
        NoiseClass::TwoQubitMS,
    )
}

/// CNOT from one XX rotation and four single-qubit rotations. The rotational
/// degrees of freedom `s, v = +/-1` pick the XX direction and the basis-change
/// direction; the product equals CNOT up to global phase for every choice.
pub fn compile_cnot(control: Qubit, target: Qubit, s: i8, v: i8) -> Vec<Gate> {
    let s = f64::from(s.signum());
    let v = f64::from(v.signum());
    vec![
        ry(control, v * PI / 4.0),
        ms_gate(control, target, s * PI / 4.0),
        rx(control, -s * PI / 4.0),
        rx(target, -v * s * PI / 4.0),
        ry(control, -v * PI / 4.0),
    ]
}

/// Hadamard as two rotations; both variants equal `H` up to global phase.
/// Variant 2 is the reversed, sign-flipped form of variant 1, so a variant-1
/// gate string meeting a variant-2 string cancels completely.
pub fn compile_hadamard(q: Qubit, variant: u8) -> Vec<Gate> {
    match variant {
        1 => vec![ry(q, PI / 4.0), rx(q, -PI / 2.0)],
        _ => vec![rx(q, PI / 2.0), ry(q, -PI / 4.0)],
    }
}

/// Three-pulse composite rotation cancelling first-order amplitude errors:
/// the target pulse followed by two full `2 pi` rotations about axes tilted
/// by `+/- phi1` with `phi1 = arccos(-theta / 4 pi)`. Residual infidelity
/// under a fractional overrotation `f` on all three pulses scales as `f^4`
/// versus `f^2` for the bare pulse.
pub fn compile_sk1(q: Qubit, theta: f64, phi: f64) -> Result<Vec<Gate>> {
    if !(theta > 0.0 && theta < 2.0 * PI) {
        return Err(SimError::BadPulseAngle(theta));
    }
    let ratio = -theta / (4.0 * PI);
    if ratio.abs() > 1.0 {
        return Err(SimError::BadPulseAngle(theta));
    }
    let phi1 = ratio.acos();
    let pulse = |axis: f64, angle: f64| {
        Gate::new(
            Generator::PlanarAxis {
                qubit: q,
                phi: axis,
            },
            angle,
            NoiseClass::OneQubit,
        )
    };
    Ok(vec![
        pulse(phi, theta),
        pulse(phi - phi1, 2.0 * PI),
        pulse(phi + phi1, 2.0 * PI),
    ])
}

/// Replace every noisy single-qubit X/Y/planar rotation with its
/// first-order-cancelling composite form. Gates outside the XY plane and
/// noiseless compensators pass through unchanged.
pub fn expand_sk1(circuit: &Circuit) -> Result<Circuit> {
    let mut out = Circuit::new(circuit.data_qubits.clone());
    for step in &circuit.steps {
        match step {
            Step::Gate(g) if g.noise_class == NoiseClass::OneQubit => {
                let target = match &g.generator {
                    Generator::Pauli(p) if p.weight() == 1 => {
                        let qubit = p.support()[0];
                        match p.axis_on(qubit) {
                            Some(Axis::X) => Some((qubit, 0.0)),
                            Some(Axis::Y) => Some((qubit, PI / 2.0)),
                            _ => None,
                        }
                    }
                    Generator::PlanarAxis { qubit, phi } => Some((*qubit, *phi)),
                    _ => None,
                };
                match target {
                    Some((qubit, mut phi)) => {
                        let mut theta = g.theta;
                        if theta < 0.0 {
                            // A negative rotation is a positive one about
                            // the opposite axis.
                            theta = -theta;
                            phi += PI;
                        }
                        out.push_gates(compile_sk1(qubit, theta, phi)?);
                    }
                    None => out.push(step.clone()),
                }
            }
            other => out.push(other.clone()),
        }
    }
    Ok(out)
}

fn same_generator(a: &Generator, b: &Generator) -> bool {
    match (a, b) {
        (Generator::Pauli(p), Generator::Pauli(q)) => p == q,
        (
            Generator::ControlledPauli {
                control: c1,
                target: t1,
            },
            Generator::ControlledPauli {
                control: c2,
                target: t2,
            },
        ) => c1 == c2 && t1 == t2,
        (
            Generator::PlanarAxis { qubit: q1, phi: f1 },
            Generator::PlanarAxis { qubit: q2, phi: f2 },
        ) => q1 == q2 && (f1 - f2).abs() < 1e-12,
        _ => false,
    }
}

fn step_support(step: &Step) -> Vec<Qubit> {
    match step {
        Step::Prep { qubit, .. } => vec![*qubit],
        Step::Gate(g) => g.support(),
        Step::Measure { qubit, .. } => vec![*qubit],
    }
}

/// Peephole cancellation: repeatedly merge same-generator rotations that are
/// adjacent on their support (no intervening step touches any of their
/// qubits) and drop rotations whose merged angle is zero. The merge guard is
/// purely support-based, so algebraically commuting but overlapping gates do
/// not slide past each other.
pub fn peephole_cancel(circuit: &Circuit) -> Circuit {
    peephole_pass(circuit, true)
}

/// Remove exactly opposing adjacent pairs only, leaving same-direction
/// rotations unmerged. Extraction builders use this form so direction
/// pairing survives across block boundaries.
pub fn cancel_opposing_pairs(circuit: &Circuit) -> Circuit {
    peephole_pass(circuit, false)
}

fn peephole_pass(circuit: &Circuit, merge: bool) -> Circuit {
    let mut steps = circuit.steps.clone();
    loop {
        let mut changed = false;
        'outer: for i in 0..steps.len() {
            let (gen_i, theta_i, class_i) = match &steps[i] {
                Step::Gate(g) => (g.generator.clone(), g.theta, g.noise_class),
                _ => continue,
            };
            let support = gen_i.support();
            for j in (i + 1)..steps.len() {
                let blocking = step_support(&steps[j])
                    .iter()
                    .any(|q| support.contains(q));
                if !blocking {
                    continue;
                }
                if let Step::Gate(g) = &steps[j] {
                    if same_generator(&g.generator, &gen_i)
                        && g.noise_class == class_i
                        && g.support() == support
                    {
                        let merged = theta_i + g.theta;
                        if merged.abs() < 1e-12 {
                            steps.remove(j);
                            steps.remove(i);
                        } else if merge {
                            if let Step::Gate(gi) = &mut steps[i] {
                                gi.theta = merged;
                            }
                            steps.remove(j);
                        } else {
                            continue 'outer;
                        }
                        changed = true;
                        break 'outer;
                    }
                }
                // First blocking step was not a mergeable twin.
                continue 'outer;
            }
        }
        if !changed {
            break;
        }
    }
    Circuit {
        data_qubits: circuit.data_qubits.clone(),
        steps,
    }
}

fn fmt_angle(theta: f64) -> String {
    // Angles are recorded in units of pi.
    let units = theta / PI;
    let sign = if units >= 0.0 { "+" } else { "-" };
    format!("{sign}{}", format_float(units.abs()))
}

fn format_float(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') {
        s
    } else {
        format!("{s}.0")
    }
}

/// Line-oriented lossless text form of a circuit.
pub fn emit_text(circuit: &Circuit) -> String {
    let mut out = String::new();
    let labels: Vec<String> = circuit.data_qubits.iter().map(|q| q.to_string()).collect();
    let _ = writeln!(out, "Q {}", labels.join(" "));
    for step in &circuit.steps {
        match step {
            Step::Prep { qubit, basis } => {
                let b = match basis {
                    PrepBasis::Z0 => "Z0",
                    PrepBasis::Z1 => "Z1",
                    PrepBasis::XPlus => "X+",
                };
                let _ = writeln!(out, "PREP {qubit} {b}");
            }
            Step::Gate(g) => {
                let ang = fmt_angle(g.theta);
                match &g.generator {
                    Generator::Pauli(p) => {
                        let _ = writeln!(out, "ROT {ang} P {p}");
                    }
                    Generator::ControlledPauli { control, target } => {
                        let _ = writeln!(out, "CROT {ang} C {control} P {target}");
                    }
                    Generator::PlanarAxis { qubit, phi } => {
                        let _ = writeln!(out, "AXROT {ang} {qubit} {}", format_float(*phi));
                    }
                }
            }
            Step::Measure {
                qubit,
                basis,
                report,
            } => {
                let b = match basis {
                    MeasBasis::Z => "Z",
                    MeasBasis::X => "X",
                };
                match report {
                    Some(name) => {
                        let _ = writeln!(out, "MEAS {qubit} {b} {name}");
                    }
                    None => {
                        let _ = writeln!(out, "MEAS {qubit} {b}");
                    }
                }
            }
        }
    }
    out
}

fn parse_qubit(tok: &str, line: usize) -> Result<Qubit> {
    tok.parse::<u32>().map(Qubit).map_err(|_| SimError::Parse {
        line,
        msg: format!("bad qubit label `{tok}`"),
    })
}

fn parse_angle(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map(|u| u * PI).map_err(|_| SimError::Parse {
        line,
        msg: format!("bad angle `{tok}`"),
    })
}

fn parse_pauli(tokens: &[&str], line: usize) -> Result<PauliString> {
    let mut map = std::collections::BTreeMap::new();
    for tok in tokens {
        let (l, a) = tok.split_once(':').ok_or(SimError::Parse {
            line,
            msg: format!("bad factor `{tok}`"),
        })?;
        let q = parse_qubit(l, line)?;
        let axis = a
            .chars()
            .next()
            .and_then(Axis::from_letter)
            .ok_or(SimError::Parse {
                line,
                msg: format!("bad Pauli letter `{a}`"),
            })?;
        if map.insert(q, axis).is_some() {
            return Err(SimError::Parse {
                line,
                msg: format!("duplicate qubit {q} in Pauli string"),
            });
        }
    }
    PauliString::new(map).map_err(|_| SimError::Parse {
        line,
        msg: "empty Pauli string".into(),
    })
}

/// Noise class inferred from generator shape when reading the text form.
fn inferred_class(generator: &Generator) -> NoiseClass {
    match generator {
        Generator::Pauli(p) if p.weight() == 1 => NoiseClass::OneQubit,
        Generator::Pauli(_) => NoiseClass::TwoQubitMS,
        Generator::ControlledPauli { .. } => NoiseClass::ThreeQubitNative,
        Generator::PlanarAxis { .. } => NoiseClass::OneQubit,
    }
}

/// Parse the text format produced by [`emit_text`].
pub fn parse_text(text: &str) -> Result<Circuit> {
    let mut circuit = Circuit::new(Vec::new());
    let mut saw_decl = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        match toks[0] {
            "Q" => {
                if saw_decl {
                    return Err(SimError::Parse {
                        line,
                        msg: "duplicate declaration line".into(),
                    });
                }
                saw_decl = true;
                for t in &toks[1..] {
                    circuit.data_qubits.push(parse_qubit(t, line)?);
                }
            }
            "PREP" => {
                if toks.len() != 3 {
                    return Err(SimError::Parse {
                        line,
                        msg: "PREP wants `PREP <label> <Z0|Z1|X+>`".into(),
                    });
                }
                let basis = match toks[2] {
                    "Z0" => PrepBasis::Z0,
                    "Z1" => PrepBasis::Z1,
                    "X+" => PrepBasis::XPlus,
                    other => {
                        return Err(SimError::Parse {
                            line,
                            msg: format!("bad prep basis `{other}`"),
                        })
                    }
                };
                circuit.push(Step::Prep {
                    qubit: parse_qubit(toks[1], line)?,
                    basis,
                });
            }
            "ROT" => {
                if toks.len() < 4 || toks[2] != "P" {
                    return Err(SimError::Parse {
                        line,
                        msg: "ROT wants `ROT <angle> P <label:pauli ...>`".into(),
                    });
                }
                let theta = parse_angle(toks[1], line)?;
                let p = parse_pauli(&toks[3..], line)?;
                let generator = Generator::Pauli(p);
                let class = inferred_class(&generator);
                circuit.push(Step::Gate(Gate::new(generator, theta, class)));
            }
            "CROT" => {
                if toks.len() < 6 || toks[2] != "C" || toks[4] != "P" {
                    return Err(SimError::Parse {
                        line,
                        msg: "CROT wants `CROT <angle> C <control> P <label:pauli ...>`".into(),
                    });
                }
                let theta = parse_angle(toks[1], line)?;
                let control = parse_qubit(toks[3], line)?;
                let target = parse_pauli(&toks[5..], line)?;
                let generator = Generator::ControlledPauli { control, target };
                let class = inferred_class(&generator);
                circuit.push(Step::Gate(Gate::new(generator, theta, class)));
            }
            "AXROT" => {
                if toks.len() != 4 {
                    return Err(SimError::Parse {
                        line,
                        msg: "AXROT wants `AXROT <angle> <label> <phi>`".into(),
                    });
                }
                let theta = parse_angle(toks[1], line)?;
                let qubit = parse_qubit(toks[2], line)?;
                let phi: f64 = toks[3].parse().map_err(|_| SimError::Parse {
                    line,
                    msg: format!("bad axis angle `{}`", toks[3]),
                })?;
                circuit.push(Step::Gate(Gate::new(
                    Generator::PlanarAxis { qubit, phi },
                    theta,
                    NoiseClass::OneQubit,
                )));
            }
            "MEAS" => {
                if toks.len() < 3 || toks.len() > 4 {
                    return Err(SimError::Parse {
                        line,
                        msg: "MEAS wants `MEAS <label> <Z|X> [name]`".into(),
                    });
                }
                let basis = match toks[2] {
                    "Z" => MeasBasis::Z,
                    "X" => MeasBasis::X,
                    other => {
                        return Err(SimError::Parse {
                            line,
                            msg: format!("bad measurement basis `{other}`"),
                        })
                    }
                };
                circuit.push(Step::Measure {
                    qubit: parse_qubit(toks[1], line)?,
                    basis,
                    report: toks.get(3).map(|s| s.to_string()),
                });
            }
            other => {
                return Err(SimError::Parse {
                    line,
                    msg: format!("unknown record `{other}`"),
                });
            }
        }
    }
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: u32) -> Qubit {
        Qubit(n)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Distance to the nearest global-phase multiple.
    fn phase_distance(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        let mut phase = None;
        for (x, y) in a.iter().zip(b.iter()) {
            if y.norm() > 1e-8 {
                phase = Some(x / y);
                break;
            }
        }
        let phase = phase.expect("nonzero reference entry");
        let scaled = b.mapv(|v| v * phase);
        max_diff(a, &scaled)
    }

    /// Taylor-series matrix exponential with scaling and squaring; test
    /// oracle independent of the cos/sin closed form.
    fn expm(m: &Array2<Complex64>) -> Array2<Complex64> {
        let d = m.nrows();
        let norm: f64 = m.iter().map(|v| v.norm()).sum();
        let scale = norm.log2().ceil().max(0.0) as u32 + 4;
        let factor = Complex64::new(1.0 / f64::from(1u32 << scale.min(30)), 0.0);
        let small = m.mapv(|v| v * factor);
        let mut term = Array2::from_diag_elem(d, c(1.0, 0.0));
        let mut acc = term.clone();
        for k in 1..25 {
            term = term.dot(&small).mapv(|v| v / c(k as f64, 0.0));
            acc = acc + &term;
        }
        for _ in 0..scale.min(30) {
            acc = acc.dot(&acc);
        }
        acc
    }

    #[test]
    fn rotation_formula_examples() {
        // (Z, pi/2) -> diag(-i, +i).
        let g = Gate::new(
            Generator::Pauli(PauliString::single(q(0), Axis::Z)),
            PI / 2.0,
            NoiseClass::OneQubit,
        );
        let u = rotation_unitary(&g).unwrap();
        assert!((u[(0, 0)] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((u[(1, 1)] - c(0.0, 1.0)).norm() < 1e-15);

        // (XX, 0.1) against the series exponential.
        let xx = PauliString::uniform(Axis::X, &[q(0), q(1)]).unwrap();
        let g = Gate::new(Generator::Pauli(xx.clone()), 0.1, NoiseClass::TwoQubitMS);
        let u = rotation_unitary(&g).unwrap();
        let m = xx.matrix_on(&[q(0), q(1)]).unwrap();
        let want = expm(&m.mapv(|v| v * c(0.0, -0.1)));
        assert!(max_diff(&u, &want) < 1e-12);

        // Controlled-Z at pi/2 equals -i CZ; generator squares to I.
        let gen = Generator::ControlledPauli {
            control: q(0),
            target: PauliString::single(q(1), Axis::Z),
        };
        let m = gen.matrix().unwrap();
        let sq = m.dot(&m);
        let eye = Array2::from_diag_elem(4, c(1.0, 0.0));
        assert!(max_diff(&sq, &eye) < 1e-12);
        let u = rotation_matrix(&gen, PI / 2.0).unwrap();
        let want = m.mapv(|v| v * c(0.0, -1.0));
        assert!(max_diff(&u, &want) < 1e-12);
    }

    #[test]
    fn every_generator_kind_is_an_involution() {
        let gens = vec![
            Generator::Pauli(PauliString::uniform(Axis::Y, &[q(0), q(3)]).unwrap()),
            Generator::ControlledPauli {
                control: q(2),
                target: PauliString::uniform(Axis::X, &[q(0), q(1), q(4)]).unwrap(),
            },
            Generator::PlanarAxis {
                qubit: q(1),
                phi: 0.77,
            },
        ];
        for g in gens {
            let m = g.matrix().unwrap();
            let d = m.nrows();
            let eye = Array2::from_diag_elem(d, c(1.0, 0.0));
            assert!(max_diff(&m.dot(&m), &eye) < 1e-12);
            // Hermitian too.
            for r in 0..d {
                for cc in 0..d {
                    assert!((m[(r, cc)] - m[(cc, r)].conj()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rotation_composition_and_reversal() {
        let gen = Generator::PlanarAxis {
            qubit: q(0),
            phi: 1.1,
        };
        let a = rotation_matrix(&gen, 0.3).unwrap();
        let b = rotation_matrix(&gen, 0.9).unwrap();
        let ab = a.dot(&b);
        let want = rotation_matrix(&gen, 1.2).unwrap();
        assert!(max_diff(&ab, &want) < 1e-12);
        let back = rotation_matrix(&gen, -0.3).unwrap();
        let adj = a.t().mapv(|v| v.conj());
        assert!(max_diff(&back, &adj) < 1e-12);
    }

    #[test]
    fn cnot_compilation_all_sign_choices() {
        let mut cx = Array2::zeros((4, 4));
        cx[(0, 0)] = c(1.0, 0.0);
        cx[(1, 1)] = c(1.0, 0.0);
        cx[(2, 3)] = c(1.0, 0.0);
        cx[(3, 2)] = c(1.0, 0.0);
        for s in [1i8, -1] {
            for v in [1i8, -1] {
                let mut circ = Circuit::new(vec![q(0), q(1)]);
                circ.push_gates(compile_cnot(q(0), q(1), s, v));
                let u = circ.unitary().unwrap();
                assert!(
                    phase_distance(&u, &cx) < 1e-12,
                    "CNOT failed for s={s}, v={v}"
                );
            }
        }
    }

    #[test]
    fn cnot_gate_census() {
        let gates = compile_cnot(q(0), q(1), 1, 1);
        assert_eq!(gates.len(), 5);
        let ms: Vec<_> = gates
            .iter()
            .filter(|g| g.noise_class == NoiseClass::TwoQubitMS)
            .collect();
        assert_eq!(ms.len(), 1);
        assert_eq!(
            gates
                .iter()
                .filter(|g| g.noise_class == NoiseClass::OneQubit)
                .count(),
            4
        );
    }

    #[test]
    fn cnot_channel_is_sign_independent() {
        use crate::state::DensityState;
        // All four (s, v) act identically on a generic density matrix.
        let mut reference: Option<DensityState> = None;
        for s in [1i8, -1] {
            for v in [1i8, -1] {
                let mut state =
                    DensityState::new_state(&[q(0), q(1)], &[false, false]).unwrap();
                // A generic-ish input: rotate both qubits first.
                let pre = rotation_matrix(
                    &Generator::PlanarAxis {
                        qubit: q(0),
                        phi: 0.3,
                    },
                    0.7,
                )
                .unwrap();
                state.apply_unitary(&pre, &[q(0)]).unwrap();
                let pre2 = rotation_matrix(
                    &Generator::PlanarAxis {
                        qubit: q(1),
                        phi: 1.9,
                    },
                    0.4,
                )
                .unwrap();
                state.apply_unitary(&pre2, &[q(1)]).unwrap();
                for gate in compile_cnot(q(0), q(1), s, v) {
                    let u = rotation_unitary(&gate).unwrap();
                    state.apply_unitary(&u, &gate.support()).unwrap();
                }
                match &reference {
                    None => reference = Some(state),
                    Some(r) => assert!(r.max_abs_diff(&state) < 1e-12),
                }
            }
        }
    }

    #[test]
    fn hadamard_compilations() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = Array2::from_shape_vec(
            (2, 2),
            vec![c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)],
        )
        .unwrap();
        for variant in [1u8, 2] {
            let mut circ = Circuit::new(vec![q(0)]);
            circ.push_gates(compile_hadamard(q(0), variant));
            let u = circ.unitary().unwrap();
            assert!(
                phase_distance(&u, &want) < 1e-12,
                "H variant {variant} failed"
            );
        }
    }

    #[test]
    fn sk1_axis_angle_and_zero_error_identity() {
        let gates = compile_sk1(q(0), PI / 2.0, 0.0).unwrap();
        assert_eq!(gates.len(), 3);
        match &gates[1].generator {
            Generator::PlanarAxis { phi, .. } => {
                // arccos(-1/8)
                assert!((phi + (-1.0f64 / 8.0).acos()).abs() < 1e-12);
            }
            _ => panic!("expected planar-axis pulse"),
        }
        let mut circ = Circuit::new(vec![q(0)]);
        circ.push_gates(gates);
        let u = circ.unitary().unwrap();
        let want = rotation_matrix(
            &Generator::PlanarAxis {
                qubit: q(0),
                phi: 0.0,
            },
            PI / 2.0,
        )
        .unwrap();
        assert!(phase_distance(&u, &want) < 1e-12);
    }

    #[test]
    fn sk1_rejects_out_of_range_targets() {
        assert!(compile_sk1(q(0), 0.0, 0.0).is_err());
        assert!(compile_sk1(q(0), 2.0 * PI, 0.0).is_err());
    }

    #[test]
    fn sk1_quartic_error_scaling() {
        // Log-log slope of composite infidelity vs fractional error is ~4;
        // the bare pulse is ~2.
        let theta = PI / 2.0;
        let phi = 0.0;
        let target = rotation_matrix(
            &Generator::PlanarAxis { qubit: q(0), phi },
            theta,
        )
        .unwrap();
        let infid = |u: &Array2<Complex64>| -> f64 {
            // Average gate infidelity for a 2x2 unitary error.
            let m = target.t().mapv(|v| v.conj()).dot(u);
            let tr = m[(0, 0)] + m[(1, 1)];
            1.0 - (tr.norm_sqr() + 2.0) / 6.0
        };
        let composite_infidelity = |f: f64| -> f64 {
            let gates = compile_sk1(q(0), theta, phi).unwrap();
            let mut u = Array2::from_diag_elem(2, c(1.0, 0.0));
            for g in &gates {
                let overrotated = rotation_matrix(&g.generator, g.theta * (1.0 + f)).unwrap();
                u = overrotated.dot(&u);
            }
            infid(&u)
        };
        let bare_infidelity = |f: f64| -> f64 {
            let u = rotation_matrix(
                &Generator::PlanarAxis { qubit: q(0), phi },
                theta * (1.0 + f),
            )
            .unwrap();
            infid(&u)
        };
        let (f0, f1) = (1e-3, 1e-2);
        let slope = |lo: f64, hi: f64| (hi / lo).ln();
        let comp_slope =
            slope(composite_infidelity(f0), composite_infidelity(f1)) / (f1 / f0).ln();
        let bare_slope = slope(bare_infidelity(f0), bare_infidelity(f1)) / (f1 / f0).ln();
        assert!((comp_slope - 4.0).abs() < 0.3, "slope {comp_slope}");
        assert!((bare_slope - 2.0).abs() < 0.1, "slope {bare_slope}");
    }

    #[test]
    fn peephole_cancels_and_respects_blocking() {
        // Opposite rotations cancel.
        let mut circ = Circuit::new(vec![q(0)]);
        circ.push_gates(vec![rx(q(0), PI / 2.0), rx(q(0), -PI / 2.0)]);
        let out = peephole_cancel(&circ);
        assert_eq!(out.gate_count(), 0);

        // Blocked by an intervening gate on the same qubit, even though XX
        // commutes with X algebraically.
        let mut circ = Circuit::new(vec![q(0), q(1)]);
        circ.push_gates(vec![
            rx(q(0), PI / 2.0),
            ms_gate(q(0), q(1), PI / 4.0),
            rx(q(0), -PI / 2.0),
        ]);
        let out = peephole_cancel(&circ);
        assert_eq!(out.gate_count(), 3);
    }

    #[test]
    fn peephole_merges_same_generator() {
        let mut circ = Circuit::new(vec![q(0)]);
        circ.push_gates(vec![rx(q(0), PI / 4.0), rx(q(0), PI / 4.0)]);
        let out = peephole_cancel(&circ);
        assert_eq!(out.gate_count(), 1);
        let g = out.gates().next().unwrap();
        assert!((g.theta - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn peephole_is_idempotent() {
        let mut circ = Circuit::new(vec![q(0), q(1)]);
        circ.push_gates(vec![
            ry(q(0), PI / 4.0),
            rx(q(1), PI / 2.0),
            rx(q(1), -PI / 2.0),
            ry(q(0), -PI / 4.0),
            ms_gate(q(0), q(1), PI / 4.0),
        ]);
        let once = peephole_cancel(&circ);
        let twice = peephole_cancel(&once);
        assert_eq!(once.gate_count(), twice.gate_count());
        assert_eq!(once.gate_count(), 1);
    }

    #[test]
    fn empty_and_single_gate_unitaries() {
        let circ = Circuit::new(vec![q(0)]);
        let u = circ.unitary().unwrap();
        assert!((u[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);

        let mut circ = Circuit::new(vec![q(0)]);
        let g = rx(q(0), 0.3);
        let want = rotation_unitary(&g).unwrap();
        circ.push(Step::Gate(g));
        assert!(max_diff(&circ.unitary().unwrap(), &want) < 1e-14);
    }

    #[test]
    fn unitary_rejects_measurement() {
        let mut circ = Circuit::new(vec![q(0)]);
        circ.push(Step::Measure {
            qubit: q(0),
            basis: MeasBasis::Z,
            report: None,
        });
        assert!(matches!(
            circ.unitary(),
            Err(SimError::MeasurementInUnitary)
        ));
    }

    #[test]
    fn text_round_trip() {
        let mut circ = Circuit::new(vec![q(0), q(1), q(2)]);
        circ.push(Step::Prep {
            qubit: q(9),
            basis: PrepBasis::XPlus,
        });
        circ.push_gates(compile_cnot(q(0), q(1), 1, -1));
        circ.push_gates(compile_sk1(q(2), PI / 2.0, 0.25).unwrap());
        circ.push(Step::Gate(Gate::new(
            Generator::ControlledPauli {
                control: q(9),
                target: PauliString::uniform(Axis::Z, &[q(0), q(2)]).unwrap(),
            },
            -PI / 2.0,
            NoiseClass::ThreeQubitNative,
        )));
        circ.push(Step::Measure {
            qubit: q(9),
            basis: MeasBasis::X,
            report: Some("ZZ02".into()),
        });
        let text = emit_text(&circ);
        let parsed = parse_text(&text).unwrap();
        assert_eq!(parsed.data_qubits, circ.data_qubits);
        assert_eq!(parsed.steps.len(), circ.steps.len());
        // Re-emission is stable.
        assert_eq!(emit_text(&parsed), text);
    }

    #[test]
    fn ms_text_example() {
        let mut circ = Circuit::new(vec![q(3), q(7)]);
        circ.push(Step::Gate(ms_gate(q(3), q(7), PI / 4.0)));
        let text = emit_text(&circ);
        assert!(text.contains("ROT +0.25 P 3:X 7:X"));
    }

    #[test]
    fn validation_catches_reuse_after_measurement() {
        let mut circ = Circuit::new(vec![q(0)]);
        circ.push(Step::Prep {
            qubit: q(9),
            basis: PrepBasis::Z0,
        });
        circ.push(Step::Measure {
            qubit: q(9),
            basis: MeasBasis::Z,
            report: None,
        });
        circ.push(Step::Gate(ms_gate(q(0), q(9), PI / 4.0)));
        assert!(circ.validate().is_err());
    }
}
