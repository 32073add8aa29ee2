//! Witness evaluation over prepare-and-measure configurations and the
//! closed-form best responses used by the see-saw.
//!
//! With binary settings `(μ_y, v_y)` and preparations `m_x` the witness is
//! `W = Σ_y Σ_x w_{xy} [μ_y + (1 - |μ_y|) m_x·v_y]`. For fixed settings the
//! optimal preparation is `m_x = u_x / |u_x|` with `u_x = Σ_y w_{xy} v_y`,
//! giving `Q_v = Σ_x |u_x|`; for fixed preparations the optimal genuine
//! direction is `v_y ∝ Σ_x w_{xy} m_x`.

use serde::{Deserialize, Serialize};

use crate::builder::FourByThreeParams;
use crate::error::{Error, Result};
use crate::qstate::{born_povm, BinaryMeasurement, BlochVector, GramMatrix, Povm, QubitState};
use crate::witness::WitnessMatrix;

/// Norm below which a response vector is treated as zero.
pub const RESPONSE_TOL: f64 = 1e-12;

/// Preparations, binary settings and an optional target POVM.
#[derive(Debug, Clone, PartialEq)]
pub struct PMScenario {
    pub states: Vec<QubitState>,
    pub binaries: Vec<BinaryMeasurement>,
    pub target_povm: Option<Povm>,
}

impl PMScenario {
    pub fn new(states: Vec<QubitState>, binaries: Vec<BinaryMeasurement>) -> Self {
        PMScenario {
            states,
            binaries,
            target_povm: None,
        }
    }

    /// Pure preparations with genuine projective settings.
    pub fn pure(states: &[BlochVector], directions: &[BlochVector]) -> Result<Self> {
        Ok(PMScenario::new(
            states.iter().map(|m| QubitState::pure(*m)).collect::<Result<_>>()?,
            directions
                .iter()
                .map(|v| BinaryMeasurement::projective(*v))
                .collect::<Result<_>>()?,
        ))
    }

    pub fn with_target(mut self, povm: Povm) -> Self {
        self.target_povm = Some(povm);
        self
    }

    pub fn state_vectors(&self) -> Vec<BlochVector> {
        self.states.iter().map(|s| s.bloch()).collect()
    }

    pub fn directions(&self) -> Vec<BlochVector> {
        self.binaries.iter().map(|b| b.direction()).collect()
    }

    fn check_dims(&self, w: &WitnessMatrix) -> Result<()> {
        if self.states.len() != w.rows() || self.binaries.len() != w.cols() {
            return Err(Error::DimensionMismatch(format!(
                "witness is {}x{}, scenario has {} states and {} settings",
                w.rows(),
                w.cols(),
                self.states.len(),
                self.binaries.len()
            )));
        }
        Ok(())
    }
}

/// The vectors `u_x = Σ_y w_{xy} v_y` and their norms.
#[derive(Debug, Clone, PartialEq)]
pub struct UVectors {
    pub u: Vec<BlochVector>,
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestStates {
    pub states: Vec<BlochVector>,
    pub u: UVectors,
    pub q_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestMeasurements {
    pub directions: Vec<BlochVector>,
    /// Columns whose response `Σ_x w_{xy} m_x` vanished; their direction is a
    /// placeholder the caller has to choose.
    pub flagged: Vec<bool>,
}

impl BestMeasurements {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    Genuine,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub column: usize,
    /// `|Σ_x w_{xy} m_x|`, the payoff of the best genuine setting.
    pub genuine: f64,
    /// `|Σ_x w_{xy}|`, the payoff of the best fixed-outcome setting.
    pub degenerate: f64,
    /// `genuine - degenerate`.
    pub margin: f64,
    pub preferred: Preference,
    pub tie: bool,
}

pub fn eval_witness(w: &WitnessMatrix, sc: &PMScenario) -> Result<f64> {
    sc.check_dims(w)?;
    let mut total = 0.0;
    for (y, meas) in sc.binaries.iter().enumerate() {
        for (x, st) in sc.states.iter().enumerate() {
            total += w.get(x, y) * meas.correlator(&st.bloch());
        }
    }
    Ok(total)
}

/// Penalty term `Σ_b P(b = x | x, target)` summed over the first `O` preparations.
pub fn povm_penalty(states: &[QubitState], povm: &Povm) -> f64 {
    states
        .iter()
        .take(povm.outcomes())
        .enumerate()
        .map(|(b, s)| born_povm(s, povm)[b])
        .sum()
}

/// `W' = W - k Σ_b P(b = x | x, target)`.
pub fn eval_full_witness(w: &WitnessMatrix, sc: &PMScenario) -> Result<f64> {
    let pen = w.penalty().ok_or(Error::MissingPovm)?;
    let base = eval_witness(w, sc)?;
    Ok(base - pen.k * povm_penalty(&sc.states, &pen.povm))
}

/// Best preparations for the given settings; fixed-outcome settings do not
/// contribute to `u_x`. Returns the states together with `Σ_x |u_x|`.
pub fn best_states_for(w: &WitnessMatrix, binaries: &[BinaryMeasurement]) -> BestStates {
    let mut u = vec![BlochVector::zero(); w.rows()];
    for (y, b) in binaries.iter().enumerate() {
        let scale = 1.0 - b.mu().abs();
        if scale == 0.0 {
            continue;
        }
        let v = b.direction() * scale;
        for (x, ux) in u.iter_mut().enumerate() {
            *ux += v * w.get(x, y);
        }
    }
    let norms: Vec<f64> = u.iter().map(|v| v.norm()).collect();
    let states = u
        .iter()
        .map(|v| v.normalized(RESPONSE_TOL).unwrap_or(BlochVector::Z))
        .collect();
    let q_v = norms.iter().sum();
    BestStates {
        states,
        u: UVectors { u, norms },
        q_v,
    }
}

/// Optimal pure states `m_x = u_x / |u_x|` for unit settings `v_y`.
pub fn best_states(w: &WitnessMatrix, v: &[BlochVector]) -> Result<BestStates> {
    if v.len() != w.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} settings for {} columns",
            v.len(),
            w.cols()
        )));
    }
    let binaries = v
        .iter()
        .map(|d| BinaryMeasurement::projective(*d))
        .collect::<Result<Vec<_>>>()?;
    Ok(best_states_for(w, &binaries))
}

/// `Σ_x w_{xy} m_x` for every column.
pub fn column_responses(w: &WitnessMatrix, m: &[BlochVector]) -> Vec<BlochVector> {
    (0..w.cols())
        .map(|y| m.iter().enumerate().map(|(x, mx)| *mx * w.get(x, y)).sum())
        .collect()
}

/// Optimal genuine directions `v_y ∝ Σ_x w_{xy} m_x`.
pub fn best_measurements(w: &WitnessMatrix, m: &[BlochVector]) -> Result<BestMeasurements> {
    if m.len() != w.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} states for {} rows",
            m.len(),
            w.rows()
        )));
    }
    let mut directions = Vec::with_capacity(w.cols());
    let mut flagged = Vec::with_capacity(w.cols());
    for r in column_responses(w, m) {
        match r.normalized(RESPONSE_TOL) {
            Some(v) => {
                directions.push(v);
                flagged.push(false);
            }
            None => {
                directions.push(BlochVector::Z);
                flagged.push(true);
            }
        }
    }
    Ok(BestMeasurements {
        directions,
        flagged,
    })
}

/// Compares, column by column, the best genuine payoff against the best
/// fixed-outcome payoff for the given preparations.
pub fn degenerate_check(w: &WitnessMatrix, m: &[BlochVector]) -> Result<Vec<ColumnReport>> {
    if m.len() != w.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} states for {} rows",
            m.len(),
            w.rows()
        )));
    }
    let sums = w.column_sums();
    Ok(column_responses(w, m)
        .into_iter()
        .zip(sums)
        .enumerate()
        .map(|(column, (r, s))| {
            let genuine = r.norm();
            let degenerate = s.abs();
            let margin = genuine - degenerate;
            ColumnReport {
                column,
                genuine,
                degenerate,
                margin,
                preferred: if margin >= 0.0 {
                    Preference::Genuine
                } else {
                    Preference::Degenerate
                },
                tie: margin.abs() <= 1e-12 * genuine.max(degenerate).max(1.0),
            }
        })
        .collect())
}

/// `|u_x|` from the overlaps `γ_{yy'} = v_y·v_{y'}`:
/// `|u_x|² = Σ_y w_{xy}² + 2 Σ_{y<y'} w_{xy} w_{xy'} γ_{yy'}`.
pub fn u_norm_from_gram(w: &WitnessMatrix, x: usize, gram: &GramMatrix) -> f64 {
    let n = w.cols();
    let mut s = 0.0;
    for y in 0..n {
        s += w.get(x, y) * w.get(x, y);
        for yp in y + 1..n {
            s += 2.0 * w.get(x, y) * w.get(x, yp) * gram.get(y, yp);
        }
    }
    s.max(0.0).sqrt()
}

/// Largest violation of the stationarity conditions of `Q_v` with respect to
/// the three overlaps of a 4×3 witness.
///
/// With `a_x = p_x² / |u_x|` the conditions read
/// `a_1 - a_2 - a_3 + a_4 = a_1 - a_2 + a_3 - a_4 = a_1 + a_2 - a_3 - a_4 = 0`.
pub fn stationarity_residual(
    w: &WitnessMatrix,
    params: &FourByThreeParams,
    gram: &GramMatrix,
) -> Result<f64> {
    if w.rows() != 4 || w.cols() != 3 || gram.dim() != 3 {
        return Err(Error::DimensionMismatch("stationarity needs a 4x3 witness".into()));
    }
    let a: Vec<f64> = (0..4)
        .map(|x| {
            let p2 = params.p[x] * params.p[x];
            if p2 == 0.0 {
                0.0
            } else {
                p2 / u_norm_from_gram(w, x, gram)
            }
        })
        .collect();
    let e = [
        a[0] - a[1] - a[2] + a[3],
        a[0] - a[1] + a[2] - a[3],
        a[0] + a[1] - a[2] - a[3],
    ];
    Ok(e.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}
