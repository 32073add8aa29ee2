//! Qubit states, two-outcome measurements, POVMs and Gram matrices in the
//! Bloch-vector picture, together with Born-rule probabilities.
//!
//! A qubit state is `ρ = (1 + m·σ)/2` with `|m| ≤ 1`. A two-outcome
//! measurement is parameterised by a bias `μ ∈ [-1, 1]` and a unit direction
//! `v`, so that `P(0) - P(1) = μ + (1 - |μ|) m·v`. A POVM element is
//! `λ_b (1 + n_b·σ)` with `Σ λ_b = 1` and `Σ λ_b n_b = 0`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on `|v| - 1` for vectors that must be unit length.
pub const UNIT_TOL: f64 = 1e-9;
/// Slack on `|m| ≤ 1` for mixed states.
pub const BALL_TOL: f64 = 1e-12;
/// Eigenvalue floor for a Gram matrix to count as positive semidefinite.
pub const PSD_TOL: f64 = -1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlochVector(pub [f64; 3]);

impl BlochVector {
    pub const Z: BlochVector = BlochVector([0.0, 0.0, 1.0]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector([x, y, z])
    }

    pub fn zero() -> Self {
        BlochVector([0.0; 3])
    }

    pub fn as_array(&self) -> &[f64; 3] {
        &self.0
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector along `self`, or `None` when the norm is at most `tol`.
    pub fn normalized(&self, tol: f64) -> Option<BlochVector> {
        let n = self.norm();
        (n > tol).then(|| *self * (1.0 / n))
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOL
    }

    pub fn to_vector3(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn from_vector3(v: &Vector3<f64>) -> Self {
        BlochVector([v[0], v[1], v[2]])
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        (*self - *other).norm()
    }
}

impl Add for BlochVector {
    type Output = BlochVector;
    fn add(self, o: BlochVector) -> BlochVector {
        BlochVector([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for BlochVector {
    fn add_assign(&mut self, o: BlochVector) {
        for i in 0..3 {
            self.0[i] += o.0[i];
        }
    }
}

impl Sub for BlochVector {
    type Output = BlochVector;
    fn sub(self, o: BlochVector) -> BlochVector {
        BlochVector([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for BlochVector {
    type Output = BlochVector;
    fn neg(self) -> BlochVector {
        BlochVector([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for BlochVector {
    type Output = BlochVector;
    fn mul(self, s: f64) -> BlochVector {
        BlochVector([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl std::iter::Sum for BlochVector {
    fn sum<I: Iterator<Item = BlochVector>>(iter: I) -> BlochVector {
        iter.fold(BlochVector::zero(), |a, b| a + b)
    }
}

/// Qubit density matrix `(1 + m·σ)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    bloch: BlochVector,
}

impl QubitState {
    pub fn new(bloch: BlochVector) -> Result<Self> {
        let n = bloch.norm();
        if !n.is_finite() || n > 1.0 + BALL_TOL {
            return Err(Error::OutsideBall(n));
        }
        Ok(QubitState { bloch })
    }

    /// Pure state; the Bloch vector must be unit length.
    pub fn pure(bloch: BlochVector) -> Result<Self> {
        let n = bloch.norm();
        if !((n - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::NotPure(n));
        }
        Ok(QubitState { bloch })
    }

    pub fn bloch(&self) -> BlochVector {
        self.bloch
    }

    pub fn is_pure(&self) -> bool {
        self.bloch.is_unit()
    }
}

/// Two-outcome measurement with `M_0 - M_1 = μ·1 + (1 - |μ|) v·σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMeasurement {
    mu: f64,
    v: BlochVector,
}

impl BinaryMeasurement {
    pub fn new(mu: f64, v: BlochVector) -> Result<Self> {
        if !(mu.is_finite() && (-1.0..=1.0).contains(&mu)) {
            return Err(Error::InvalidBias(mu));
        }
        let n = v.norm();
        if !((n - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::NotUnit(n));
        }
        Ok(BinaryMeasurement { mu, v })
    }

    /// Genuine von Neumann measurement along `v`.
    pub fn projective(v: BlochVector) -> Result<Self> {
        Self::new(0.0, v)
    }

    /// Fixed-outcome measurement: outcome 0 when `outcome_zero`, else outcome 1.
    pub fn degenerate(outcome_zero: bool) -> Self {
        BinaryMeasurement {
            mu: if outcome_zero { 1.0 } else { -1.0 },
            v: BlochVector::Z,
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn direction(&self) -> BlochVector {
        self.v
    }

    pub fn is_degenerate(&self) -> bool {
        self.mu.abs() == 1.0
    }

    /// Expectation of the ±1 observable on a state with Bloch vector `m`.
    pub fn correlator(&self, m: &BlochVector) -> f64 {
        self.mu + (1.0 - self.mu.abs()) * m.dot(&self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovmElement {
    pub weight: f64,
    pub direction: BlochVector,
}

/// Rank-one qubit POVM `{λ_b (1 + n_b·σ)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Povm {
    elements: Vec<PovmElement>,
}

impl Povm {
    /// Validates normalisation (`Σλ = 1`, `Σλn = 0`), positivity and unit
    /// directions. Extremality is checked separately by [`Povm::is_extremal`].
    pub fn new(elements: Vec<PovmElement>) -> Result<Self> {
        let o = elements.len();
        if !(3..=4).contains(&o) {
            return Err(Error::InvalidPovm(format!("{o} outcomes; expected 3 or 4")));
        }
        for (b, e) in elements.iter().enumerate() {
            if !(e.weight > 0.0) {
                return Err(Error::InvalidPovm(format!("weight {b} is {}", e.weight)));
            }
            if !e.direction.is_unit() {
                return Err(Error::InvalidPovm(format!(
                    "direction {b} has norm {}",
                    e.direction.norm()
                )));
            }
        }
        let total: f64 = elements.iter().map(|e| e.weight).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidPovm(format!("weights sum to {total}")));
        }
        let resid: BlochVector = elements.iter().map(|e| e.direction * e.weight).sum();
        if resid.norm() > 1e-10 {
            return Err(Error::InvalidPovm(format!(
                "weighted directions sum to norm {}",
                resid.norm()
            )));
        }
        Ok(Povm { elements })
    }

    /// The four-outcome POVM with tetrahedral directions and equal weights.
    pub fn sic() -> Self {
        let s = 1.0 / 3.0_f64.sqrt();
        let dirs = [
            BlochVector::new(s, s, s),
            BlochVector::new(s, -s, -s),
            BlochVector::new(-s, s, -s),
            BlochVector::new(-s, -s, s),
        ];
        Povm {
            elements: dirs
                .into_iter()
                .map(|d| PovmElement {
                    weight: 0.25,
                    direction: d,
                })
                .collect(),
        }
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.weight).collect()
    }

    pub fn directions(&self) -> Vec<BlochVector> {
        self.elements.iter().map(|e| e.direction).collect()
    }

    /// Four outcomes spanning three dimensions, or three spanning a plane.
    pub fn is_extremal(&self) -> bool {
        let (rank, _) = linalg::null_space(&self.directions());
        match self.outcomes() {
            4 => rank == 3,
            3 => rank == 2,
            _ => false,
        }
    }
}

/// Symmetric matrix of pairwise overlaps with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Gram matrix is {}x{}",
                n,
                entries.ncols()
            )));
        }
        for i in 0..n {
            if (entries[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "Gram diagonal entry {i} is {}",
                    entries[(i, i)]
                )));
            }
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "Gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(GramMatrix { entries })
    }

    /// Builds the Gram matrix of a set of unit vectors.
    pub fn from_vectors(vs: &[BlochVector]) -> Self {
        GramMatrix {
            entries: gram_of(vs),
        }
    }

    /// Symmetric matrix with unit diagonal and the given upper triangle
    /// (row-major order over `i < j`).
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * (n - 1) / 2 {
            return Err(Error::DimensionMismatch(format!(
                "{} off-diagonal entries for size {n}",
                upper.len()
            )));
        }
        let mut m = DMatrix::identity(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                m[(i, j)] = upper[k];
                m[(j, i)] = upper[k];
                k += 1;
            }
        }
        Ok(GramMatrix { entries: m })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_legitimate(&self) -> bool {
        self.min_eigenvalue() >= PSD_TOL
    }

    /// Realises the Gram matrix by unit vectors in three dimensions
    /// (`X Xᵀ = γ` with `X = V √Λ` over the top three eigenpairs).
    pub fn factor(&self) -> Result<Vec<BlochVector>> {
        let min = self.min_eigenvalue();
        if min < PSD_TOL {
            return Err(Error::IllegitimateGram(min));
        }
        let (vals, vecs) = linalg::sorted_symmetric_eigen(&self.entries, 0.0);
        let max = vals.first().cloned().unwrap_or(0.0);
        if vals.len() > 3 && vals[3] > linalg::RANK_RTOL * max.max(1.0) {
            return Err(Error::DimensionMismatch(format!(
                "Gram matrix has rank above 3 (fourth eigenvalue {})",
                vals[3]
            )));
        }
        let n = self.dim();
        let out = (0..n)
            .map(|i| {
                let mut c = [0.0; 3];
                for (k, slot) in c.iter_mut().enumerate().take(vals.len().min(3)) {
                    *slot = vecs[k][i] * vals[k].max(0.0).sqrt();
                }
                BlochVector(c)
            })
            .collect();
        Ok(out)
    }
}

pub(crate) fn gram_of(vs: &[BlochVector]) -> DMatrix<f64> {
    let n = vs.len();
    DMatrix::from_fn(n, n, |i, j| vs[i].dot(&vs[j]))
}

fn clamp01(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// `(P(0), P(1))` for a two-outcome measurement on a qubit state.
pub fn born_binary(state: &QubitState, meas: &BinaryMeasurement) -> (f64, f64) {
    let e = meas.correlator(&state.bloch());
    (clamp01((1.0 + e) / 2.0), clamp01((1.0 - e) / 2.0))
}

/// Outcome distribution `P(b) = λ_b (1 + m·n_b)` of a POVM.
pub fn born_povm(state: &QubitState, povm: &Povm) -> Vec<f64> {
    let m = state.bloch();
    povm.elements
        .iter()
        .map(|e| clamp01(e.weight * (1.0 + m.dot(&e.direction))))
        .collect()
}

/// Recovers the unique weights turning unit directions into a POVM.
///
/// The weights span the one-dimensional null space of the stacked directions;
/// a larger null space means the directions do not fix the POVM.
pub fn povm_from_bloch(directions: &[BlochVector]) -> Result<Povm> {
    let o = directions.len();
    if !(3..=4).contains(&o) {
        return Err(Error::InvalidArgument(format!(
            "{o} directions; expected 3 or 4"
        )));
    }
    for d in directions {
        if !d.is_unit() {
            return Err(Error::NotUnit(d.norm()));
        }
    }
    let (_, null) = linalg::null_space(directions);
    match null.len() {
        0 => Err(Error::NoValidWeights),
        1 => {
            let mut c = null[0].clone();
            linalg::orient_first_nonzero(&mut c, 1e-12);
            let scale = c.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if c.iter().any(|&x| x <= 1e-12 * scale) {
                return Err(Error::NoValidWeights);
            }
            let total: f64 = c.iter().sum();
            let elements = directions
                .iter()
                .zip(c.iter())
                .map(|(d, w)| PovmElement {
                    weight: w / total,
                    direction: *d,
                })
                .collect();
            Povm::new(elements)
        }
        k => Err(Error::NonExtremal(k)),
    }
}
