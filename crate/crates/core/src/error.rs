use thiserror::Error;

/// Errors surfaced by the simulation engine and circuit machinery.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("duplicate qubit label {0}")]
    DuplicateLabel(u32),
    #[error("unknown qubit label {0}")]
    UnknownQubit(u32),
    #[error("operator on {0} qubit(s) is not unitary within tolerance")]
    NonUnitary(usize),
    #[error("projector is not idempotent within tolerance")]
    NonIdempotentProjector,
    #[error("mixture probabilities sum to {0}, expected 1")]
    BadProbabilities(f64),
    #[error("unitarity kappa {0} outside [0, 1]")]
    KappaOutOfRange(f64),
    #[error("infidelity {0} outside [0, 1]")]
    InfidelityOutOfRange(f64),
    #[error("state has zero weight")]
    ZeroWeightState,
    #[error("support/label list mismatch: {0}")]
    BadSupport(String),
    #[error("empty Pauli string")]
    EmptyPauli,
    #[error("rotation target angle {0} invalid for composite pulse")]
    BadPulseAngle(f64),
    #[error("circuit contains a measurement; unitary is undefined")]
    MeasurementInUnitary,
    #[error("circuit validation failed: {0}")]
    InvalidCircuit(String),
    #[error("gate carries no noise class")]
    UnclassifiedGate,
    #[error("unsupported code for this gate set: {0}")]
    UnsupportedCode(String),
    #[error("stabilizer weight {0} unsupported here")]
    UnsupportedWeight(usize),
    #[error("gauge expectation {0} is not within 1e-6 of +/-1")]
    IndefiniteGauge(f64),
    #[error("fiducial state annihilated by projector product")]
    AnnihilatedFiducial,
    #[error("register would exceed the {0}-qubit limit")]
    RegisterOverflow(usize),
    #[error("decoder has no entry for syndrome {0}")]
    DecoderMiss(String),
    #[error("adaptive slicing requires a gauge frame")]
    MissingGaugeFrame,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
