//! The mixed coherent/stochastic overrotation channel family, trapped-ion
//! parameter relations, and binding of noise to circuits.
//!
//! After a perfect gate with generator `G`, angle `theta`, and class `k`, the
//! bound channel is the unitarity-weighted mixture
//!
//! ```text
//! rho -> kappa * exp(-i sgn(theta) e G) rho exp(+i sgn(theta) e G)
//!        + (1 - kappa) * (cos^2(e) I rho I + sin^2(e) G rho G)
//! ```
//!
//! with `e = eps_k * |theta| / theta_ref_k`. Error angles scale linearly with
//! pulse area, quoted at the class reference angle, and the coherent error
//! direction follows the gate's rotation direction. The coherent and
//! stochastic channels have equal average gate fidelity at the same `e`.

use ndarray::Array2;
use num_complex::Complex64;

use crate::circuit::{rotation_matrix, Circuit, Gate, Generator, MeasBasis, NoiseClass, Step};
use crate::pauli::{Axis, PauliString, Qubit};
use crate::state::{MixtureOp, MixtureTerm, PrepBasis};
use crate::{Result, SimError};

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

/// Reference rotation angle per class: the angle at which the class error
/// angle applies verbatim. The native single-qubit and MS pulses sit at
/// `pi/4`, the extraction-rotation class at `pi/2`.
pub fn reference_angle(class: NoiseClass) -> f64 {
    match class {
        NoiseClass::OneQubit => FRAC_PI_4,
        NoiseClass::TwoQubitMS => FRAC_PI_4,
        NoiseClass::ThreeQubitNative => FRAC_PI_2,
        NoiseClass::Noiseless => 1.0,
    }
}

/// Overrotation error model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverrotationParams {
    /// Unitarity: mixture weight of the coherent channel.
    pub kappa: f64,
    /// Per-class error angles, radians.
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    /// When set, `eps2 = (1 + eps1)^2 - 1` holds and the one-qubit angle was
    /// derived from the two-qubit one.
    pub linked: bool,
}

impl OverrotationParams {
    pub fn new(kappa: f64, eps1: f64, eps2: f64, eps3: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(SimError::KappaOutOfRange(kappa));
        }
        if eps1 < 0.0 || eps2 < 0.0 || eps3 < 0.0 {
            return Err(SimError::BadProbabilities(-1.0));
        }
        Ok(OverrotationParams {
            kappa,
            eps1,
            eps2,
            eps3,
            linked: false,
        })
    }

    /// Two-qubit error angle from a gate infidelity `sin^2(eps2)`, with the
    /// one-qubit angle linked through the quadratic Rabi-frequency relation
    /// and `eps3 = eps2`.
    pub fn linked_from_infidelity(kappa: f64, infidelity_2q: f64) -> Result<Self> {
        let eps2 = infidelity_to_epsilon(infidelity_2q)?;
        let mut p = Self::new(kappa, epsilon_relation_inverse(eps2), eps2, eps2)?;
        p.linked = true;
        Ok(p)
    }

    /// Equal two- and three-qubit error angles from a shared infidelity; no
    /// single-qubit error. Matches the native three-body study.
    pub fn equal_23_from_infidelity(kappa: f64, infidelity: f64) -> Result<Self> {
        let eps = infidelity_to_epsilon(infidelity)?;
        Self::new(kappa, 0.0, eps, eps)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(SimError::KappaOutOfRange(kappa));
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn eps_for_class(&self, class: NoiseClass) -> f64 {
        match class {
            NoiseClass::OneQubit => self.eps1,
            NoiseClass::TwoQubitMS => self.eps2,
            NoiseClass::ThreeQubitNative => self.eps3,
            NoiseClass::Noiseless => 0.0,
        }
    }
}

/// `eps = arcsin(sqrt(infidelity))`.
pub fn infidelity_to_epsilon(infidelity: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&infidelity) {
        return Err(SimError::InfidelityOutOfRange(infidelity));
    }
    Ok(infidelity.sqrt().asin())
}

/// `eps2 = (1 + eps1)^2 - 1`: the two-qubit Rabi frequency depends
/// quadratically on the one-qubit Rabi frequency.
pub fn epsilon_relation(eps1: f64) -> f64 {
    (1.0 + eps1).powi(2) - 1.0
}

/// Inverse relation `eps1 = sqrt(1 + eps2) - 1`.
pub fn epsilon_relation_inverse(eps2: f64) -> f64 {
    (1.0 + eps2).sqrt() - 1.0
}

/// The kappa-weighted coherent/stochastic overrotation channel attached to a
/// gate, generated by the gate's own generator.
#[derive(Debug, Clone)]
pub struct MixedChannelSpec {
    pub generator: Generator,
    pub eps: f64,
    pub kappa: f64,
    /// +1 or -1; follows the gate's rotation direction.
    pub direction: f64,
}

impl MixedChannelSpec {
    pub fn new(generator: Generator, eps: f64, kappa: f64, direction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(SimError::KappaOutOfRange(kappa));
        }
        Ok(MixedChannelSpec {
            generator,
            eps,
            kappa,
            direction: direction.signum(),
        })
    }

    /// The three-term unitary mixture realizing the channel.
    pub fn terms(&self) -> Result<Vec<MixtureTerm>> {
        let mut out = Vec::with_capacity(3);
        if self.kappa > 0.0 {
            out.push(MixtureTerm {
                probability: self.kappa,
                op: coherent_op(&self.generator, self.eps, self.direction)?,
            });
        }
        let stoch = 1.0 - self.kappa;
        if stoch > 0.0 {
            let (c2, s2) = (self.eps.cos().powi(2), self.eps.sin().powi(2));
            if c2 > 0.0 {
                out.push(MixtureTerm {
                    probability: stoch * c2,
                    op: MixtureOp::Identity,
                });
            }
            if s2 > 0.0 {
                out.push(MixtureTerm {
                    probability: stoch * s2,
                    op: involution_op(&self.generator)?,
                });
            }
        }
        Ok(out)
    }
}

/// Single-term coherent overrotation: `exp(-i direction eps G)`.
pub fn coherent_channel(
    generator: &Generator,
    eps: f64,
    direction: f64,
) -> Result<Vec<MixtureTerm>> {
    Ok(vec![MixtureTerm {
        probability: 1.0,
        op: coherent_op(generator, eps, direction)?,
    }])
}

/// Two-term stochastic overrotation: `cos^2(eps) I rho I + sin^2(eps) G rho G`.
pub fn stochastic_channel(generator: &Generator, eps: f64) -> Result<Vec<MixtureTerm>> {
    Ok(vec![
        MixtureTerm {
            probability: eps.cos().powi(2),
            op: MixtureOp::Identity,
        },
        MixtureTerm {
            probability: eps.sin().powi(2),
            op: involution_op(generator)?,
        },
    ])
}

/// Convex combination of the coherent and stochastic channels.
pub fn mixed_channel(
    generator: &Generator,
    eps: f64,
    kappa: f64,
    direction: f64,
) -> Result<MixedChannelSpec> {
    MixedChannelSpec::new(generator.clone(), eps, kappa, direction)
}

fn coherent_op(generator: &Generator, eps: f64, direction: f64) -> Result<MixtureOp> {
    if eps == 0.0 {
        return Ok(MixtureOp::Identity);
    }
    let u = rotation_matrix(generator, direction.signum() * eps)?;
    Ok(MixtureOp::Matrix {
        u,
        support: generator.support(),
    })
}

/// The generator applied as a unitary; Pauli generators keep their identity
/// for classical frame tracking.
fn involution_op(generator: &Generator) -> Result<MixtureOp> {
    match generator {
        Generator::Pauli(p) => Ok(MixtureOp::Pauli(p.clone())),
        _ => Ok(MixtureOp::Matrix {
            u: generator.matrix()?,
            support: generator.support(),
        }),
    }
}

/// Gate-time / dephasing-time parameters for the optional per-qubit
/// phase-flip noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingParams {
    pub t_1q: f64,
    pub t_2q: f64,
    pub t2_time: f64,
}

impl Default for DephasingParams {
    fn default() -> Self {
        DephasingParams {
            t_1q: 1.0,
            t_2q: 10.0,
            t2_time: 2.0e4,
        }
    }
}

impl DephasingParams {
    /// Phase-flip probability for a gate of duration `t`:
    /// `p = (1 - exp(-t / T2)) / 2`.
    pub fn flip_probability(&self, t: f64) -> f64 {
        (1.0 - (-t / self.t2_time).exp()) / 2.0
    }

    pub fn duration_for(&self, class: NoiseClass) -> f64 {
        match class {
            NoiseClass::OneQubit => self.t_1q,
            NoiseClass::TwoQubitMS | NoiseClass::ThreeQubitNative => self.t_2q,
            NoiseClass::Noiseless => 0.0,
        }
    }
}

/// A channel bound to a circuit position: the spec plus the prebuilt unitary
/// mixture for trajectory sampling.
#[derive(Debug, Clone)]
pub struct BoundChannel {
    pub spec: MixedChannelSpec,
    terms: Vec<MixtureTerm>,
}

impl BoundChannel {
    pub fn new(spec: MixedChannelSpec) -> Result<Self> {
        let terms = spec.terms()?;
        Ok(BoundChannel { spec, terms })
    }

    /// Closed-form in-place application to a density matrix.
    pub fn apply_density(&self, state: &mut crate::state::DensityState) -> Result<()> {
        let (perm, phase) = self.spec.generator.basis_tables(state.qubits())?;
        state.apply_involution_overrotation(
            &perm,
            &phase,
            self.spec.eps,
            self.spec.kappa,
            self.spec.direction,
        )
    }

    /// The unitary mixture, for sampling or general channel application.
    pub fn terms(&self) -> &[MixtureTerm] {
        &self.terms
    }
}

/// A circuit step with noise channels interleaved after each gate.
#[derive(Debug, Clone)]
pub enum NoisyStep {
    Prep {
        qubit: Qubit,
        basis: PrepBasis,
    },
    Gate(Gate),
    Channel(BoundChannel),
    Measure {
        qubit: Qubit,
        basis: MeasBasis,
        report: Option<String>,
    },
}

/// A circuit with bound noise.
#[derive(Debug, Clone)]
pub struct NoisyCircuit {
    pub data_qubits: Vec<Qubit>,
    pub steps: Vec<NoisyStep>,
}

impl NoisyCircuit {
    pub fn channel_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, NoisyStep::Channel(_)))
            .count()
    }

    pub fn measurement_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, NoisyStep::Measure { .. }))
            .count()
    }
}

/// Attach the mixed overrotation channel after every noisy gate, scaled to
/// the gate's angle, plus optional per-qubit dephasing.
pub fn bind_noise(
    circuit: &Circuit,
    params: &OverrotationParams,
    dephasing: Option<&DephasingParams>,
) -> Result<NoisyCircuit> {
    let mut steps = Vec::with_capacity(circuit.steps.len() * 2);
    for step in &circuit.steps {
        match step {
            Step::Prep { qubit, basis } => steps.push(NoisyStep::Prep {
                qubit: *qubit,
                basis: *basis,
            }),
            Step::Measure {
                qubit,
                basis,
                report,
            } => steps.push(NoisyStep::Measure {
                qubit: *qubit,
                basis: *basis,
                report: report.clone(),
            }),
            Step::Gate(gate) => {
                let class = gate.noise_class;
                steps.push(NoisyStep::Gate(gate.clone()));
                if class != NoiseClass::Noiseless {
                    let eps_ref = params.eps_for_class(class);
                    let eps = eps_ref * gate.theta.abs() / reference_angle(class);
                    if eps > 0.0 {
                        let spec = MixedChannelSpec::new(
                            gate.generator.clone(),
                            eps,
                            params.kappa,
                            gate.direction(),
                        )?;
                        steps.push(NoisyStep::Channel(BoundChannel::new(spec)?));
                    }
                    if let Some(d) = dephasing {
                        let p = d.flip_probability(d.duration_for(class));
                        if p > 0.0 {
                            // A phase flip with probability p is the
                            // stochastic Z overrotation at sin^2(e) = p.
                            let eps_z = p.sqrt().asin();
                            for q in gate.support() {
                                let spec = MixedChannelSpec::new(
                                    Generator::Pauli(PauliString::single(q, Axis::Z)),
                                    eps_z,
                                    0.0,
                                    1.0,
                                )?;
                                steps.push(NoisyStep::Channel(BoundChannel::new(spec)?));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(NoisyCircuit {
        data_qubits: circuit.data_qubits.clone(),
        steps,
    })
}

/// Average gate fidelity of a unitary mixture against a target unitary of
/// the same dimension: `(sum_i p_i |tr(T^d U_i)|^2 + d) / (d^2 + d)`.
pub fn average_gate_fidelity(
    terms: &[(f64, Array2<Complex64>)],
    target: &Array2<Complex64>,
) -> f64 {
    let d = target.nrows();
    let tdag = target.t().mapv(|v| v.conj());
    let mut acc = 0.0;
    for (p, u) in terms {
        let m = tdag.dot(u);
        let tr: Complex64 = (0..d).map(|i| m[(i, i)]).sum();
        acc += p * tr.norm_sqr();
    }
    (acc + d as f64) / (d as f64 * d as f64 + d as f64)
}

/// Dense matrices for a term list on the given support order; identity and
/// Pauli terms are materialized.
pub fn terms_as_matrices(
    terms: &[MixtureTerm],
    order: &[Qubit],
) -> Result<Vec<(f64, Array2<Complex64>)>> {
    let dim = 1usize << order.len();
    terms
        .iter()
        .map(|t| {
            let u = match &t.op {
                MixtureOp::Identity => Array2::from_diag_elem(dim, Complex64::new(1.0, 0.0)),
                MixtureOp::Pauli(p) => {
                    crate::circuit::embed_unitary(&p.matrix_on(&p.support())?, &p.support(), order)?
                }
                MixtureOp::Matrix { u, support } => {
                    crate::circuit::embed_unitary(u, support, order)?
                }
            };
            Ok((t.probability, u))
        })
        .collect()
}
