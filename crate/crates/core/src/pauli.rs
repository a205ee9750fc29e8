//! Pauli strings over labeled qubits.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;
use num_complex::Complex64;

use crate::{Result, SimError};

/// Opaque qubit label. Matrix qubit order is always taken from an explicit
/// label list, never from the label value itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Qubit(pub u32);

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Single-qubit Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Axis> {
        match c {
            'X' | 'x' => Some(Axis::X),
            'Y' | 'y' => Some(Axis::Y),
            'Z' | 'z' => Some(Axis::Z),
        _ => None,
        }
    }

    /// 2x2 matrix of the axis.
    pub fn matrix(self) -> Array2<Complex64> {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Axis::X => Array2::from_shape_vec((2, 2), vec![z, one, one, z]).unwrap(),
            Axis::Y => Array2::from_shape_vec((2, 2), vec![z, -i, i, z]).unwrap(),
            Axis::Z => Array2::from_shape_vec((2, 2), vec![one, z, z, -one]).unwrap(),
        }
    }
}

/// Nonempty tensor product of single-qubit Paulis; identity factors are
/// omitted from the map.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    factors: BTreeMap<Qubit, Axis>,
}

impl PauliString {
    pub fn new(factors: BTreeMap<Qubit, Axis>) -> Result<Self> {
        if factors.is_empty() {
            return Err(SimError::EmptyPauli);
        }
        Ok(PauliString { factors })
    }

    /// Uniform string, e.g. `X` on every listed qubit.
    pub fn uniform(axis: Axis, qubits: &[Qubit]) -> Result<Self> {
        let mut m = BTreeMap::new();
        for &q in qubits {
            if m.insert(q, axis).is_some() {
                return Err(SimError::DuplicateLabel(q.0));
            }
        }
        Self::new(m)
    }

    pub fn single(q: Qubit, axis: Axis) -> Self {
        let mut m = BTreeMap::new();
        m.insert(q, axis);
        PauliString { factors: m }
    }

    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &BTreeMap<Qubit, Axis> {
        &self.factors
    }

    pub fn axis_on(&self, q: Qubit) -> Option<Axis> {
        self.factors.get(&q).copied()
    }

    /// Support in ascending label order.
    pub fn support(&self) -> Vec<Qubit> {
        self.factors.keys().copied().collect()
    }

    /// True iff the two strings commute as operators.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let mut anti = 0usize;
        for (q, a) in &self.factors {
            if let Some(b) = other.factors.get(q) {
                if a != b {
                    anti += 1;
                }
            }
        }
        anti % 2 == 0
    }

    /// Product of two strings, discarding the overall phase. `None` is the
    /// identity (all factors cancelled).
    pub fn product_up_to_phase(&self, other: &PauliString) -> Option<PauliString> {
        let mut m = self.factors.clone();
        for (&q, &b) in &other.factors {
            match m.remove(&q) {
                None => {
                    m.insert(q, b);
                }
                Some(a) if a == b => {}
                Some(a) => {
                    // XY ~ Z etc.; phase dropped.
                    let c = match (a, b) {
                        (Axis::X, Axis::Y) | (Axis::Y, Axis::X) => Axis::Z,
                        (Axis::Y, Axis::Z) | (Axis::Z, Axis::Y) => Axis::X,
                        (Axis::Z, Axis::X) | (Axis::X, Axis::Z) => Axis::Y,
                        _ => unreachable!(),
                    };
                    m.insert(q, c);
                }
            }
        }
        if m.is_empty() {
            None
        } else {
            Some(PauliString { factors: m })
        }
    }

    /// Restriction to the given qubits, if nonempty.
    pub fn restricted_to(&self, qubits: &[Qubit]) -> Option<PauliString> {
        let m: BTreeMap<Qubit, Axis> = self
            .factors
            .iter()
            .filter(|(q, _)| qubits.contains(q))
            .map(|(&q, &a)| (q, a))
            .collect();
        if m.is_empty() {
            None
        } else {
            Some(PauliString { factors: m })
        }
    }

    /// Dense matrix on the listed qubits (which must cover the support);
    /// the matrix index order follows `order`.
    pub fn matrix_on(&self, order: &[Qubit]) -> Result<Array2<Complex64>> {
        for q in self.factors.keys() {
            if !order.contains(q) {
                return Err(SimError::UnknownQubit(q.0));
            }
        }
        let n = order.len();
        let dim = 1usize << n;
        let mut out = Array2::zeros((dim, dim));
        for col in 0..dim {
            let (row, phase) = self.apply_to_basis(col, order);
            out[(row, col)] = phase;
        }
        Ok(out)
    }

    /// Action on a computational basis index: `P|col> = phase |row>`.
    /// Bit k of the index corresponds to `order[n-1-k]`, so the first label
    /// is the most significant bit.
    pub fn apply_to_basis(&self, col: usize, order: &[Qubit]) -> (usize, Complex64) {
        let n = order.len();
        let mut row = col;
        let mut phase = Complex64::new(1.0, 0.0);
        for (pos, q) in order.iter().enumerate() {
            if let Some(a) = self.factors.get(q) {
                let bit_idx = n - 1 - pos;
                let bit = (col >> bit_idx) & 1;
                match a {
                    Axis::X => row ^= 1 << bit_idx,
                    Axis::Y => {
                        row ^= 1 << bit_idx;
                        // Y|0> = i|1>, Y|1> = -i|0>
                        phase *= if bit == 0 {
                            Complex64::new(0.0, 1.0)
                        } else {
                            Complex64::new(0.0, -1.0)
                        };
                    }
                    Axis::Z => {
                        if bit == 1 {
                            phase = -phase;
                        }
                    }
                }
            }
        }
        (row, phase)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (q, a) in &self.factors {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}:{}", q, a.letter())?;
            first = false;
        }
        Ok(())
    }
}
