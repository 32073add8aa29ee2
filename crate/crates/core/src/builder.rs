//! Witness constructions that self-test a prescribed set of qubit states.
//!
//! * [`build_4x3`]: four states spanning space, three settings, `w_{xy} = ±p_x q_y`.
//! * [`build_general`]: any number of states, one setting per dimension of
//!   their span, `w_{xy} = r_x μ_{xy}` in the eigenframe of `Σ r_x m_x m_xᵀ`.
//! * [`build_4x6`]: one setting per pair of states, `w_{x,ij} = F_{ij}(δ_{xi} - δ_{xj})`.
//! * [`umbrella`]: the closed-form one-parameter 4×3 family.
//!
//! Every builder returns a [`Construction`] holding the witness, the ideal
//! states and settings that maximise it, and the value of that maximum.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{check_range, Error, Result};
use crate::eval::{self, PMScenario, Preference};
use crate::linalg;
use crate::qstate::{povm_from_bloch, BlochVector, GramMatrix, Povm, PovmElement};
use crate::witness::{WitnessMatrix, DEFAULT_K};

/// Distance below which two states count as coincident.
pub const COINCIDENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstructionKind {
    FourByThree,
    General,
    Pairwise,
    Umbrella,
}

impl ConstructionKind {
    pub fn label(&self) -> &'static str {
        match self {
            ConstructionKind::FourByThree => "4x3",
            ConstructionKind::General => "general",
            ConstructionKind::Pairwise => "4x6",
            ConstructionKind::Umbrella => "umbrella",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        match s {
            "4x3" => Ok(ConstructionKind::FourByThree),
            "general" => Ok(ConstructionKind::General),
            "4x6" => Ok(ConstructionKind::Pairwise),
            "umbrella" => Ok(ConstructionKind::Umbrella),
            other => Err(Error::InvalidArgument(format!("unknown construction {other:?}"))),
        }
    }
}

/// Parameters of `w = (±p_x q_y)`; `gram` holds `(γ_12, γ_13, γ_23)` of the
/// optimal settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FourByThreeParams {
    pub p: [f64; 4],
    pub q: [f64; 3],
    pub gram: [f64; 3],
}

impl FourByThreeParams {
    pub fn gram_matrix(&self) -> GramMatrix {
        GramMatrix::from_upper(3, &self.gram).expect("three overlaps")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralParams {
    pub r: Vec<f64>,
    /// Components of each state in the frame of the settings.
    pub mu: DMatrix<f64>,
    /// Retained eigenvalues of `Σ r_x m_x m_xᵀ`, descending.
    pub eigenvalues: Vec<f64>,
    pub hessian_rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseParams {
    /// Symmetric pair weights with zero diagonal.
    pub f: DMatrix<f64>,
    /// Radial force magnitudes at the target configuration.
    pub tau: Vec<f64>,
    /// Pairs `(i, j)`, `i < j`, in column order.
    pub pairs: Vec<(usize, usize)>,
    /// Pairs skipped because the two states coincide.
    pub dropped: Vec<(usize, usize)>,
    /// Null-combination weights used for `F` (the POVM weights when the
    /// states come from a POVM).
    pub lambda: Vec<f64>,
    /// `-1` marks rows negated to handle negative combination coefficients.
    pub row_signs: Vec<f64>,
    /// Largest violation of the force balance at the target.
    pub equilibrium_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UmbrellaFamily {
    pub c: f64,
}

impl UmbrellaFamily {
    pub fn new(c: f64) -> Result<Self> {
        check_range("c", c, 0.0, 3.0)?;
        Ok(UmbrellaFamily { c })
    }

    /// `w = (9 + 3c²)^{-1/2} [[c, c, c], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]`.
    pub fn witness(&self) -> WitnessMatrix {
        let c = self.c;
        let s = 1.0 / (9.0 + 3.0 * c * c).sqrt();
        let rows = [
            [c, c, c],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ];
        WitnessMatrix::new(DMatrix::from_fn(4, 3, |i, j| rows[i][j] * s)).expect("finite")
    }

    pub fn states(&self) -> Vec<BlochVector> {
        let c = self.c;
        let s = (9.0 - c * c).max(0.0).sqrt();
        let r3 = 3.0_f64.sqrt();
        vec![
            BlochVector::new(0.0, 0.0, -1.0),
            BlochVector::new(-s / 3.0, 0.0, c / 3.0),
            BlochVector::new(s / 6.0, s / (2.0 * r3), c / 3.0),
            BlochVector::new(s / 6.0, -s / (2.0 * r3), c / 3.0),
        ]
    }

    pub fn measurements(&self) -> Vec<BlochVector> {
        let c = self.c;
        let s = (9.0 - c * c).max(0.0).sqrt();
        let r = 1.0 / (2.0 * (9.0 + 3.0 * c * c).sqrt());
        let t = (3.0 * (9.0 - c * c)).max(0.0).sqrt();
        vec![
            BlochVector::new(-2.0 * s, 0.0, -4.0 * c) * r,
            BlochVector::new(s, t, -4.0 * c) * r,
            BlochVector::new(s, -t, -4.0 * c) * r,
        ]
    }

    pub fn params(&self) -> FourByThreeParams {
        let c = self.c;
        let n = (3.0 + c * c).sqrt();
        let p = [c / n, 1.0 / n, 1.0 / n, 1.0 / n];
        let q = [1.0 / 3.0_f64.sqrt(); 3];
        FourByThreeParams {
            p,
            q,
            gram: optimal_overlaps(&p, &q),
        }
    }

    /// Target POVM `n_x = -m_x` with weights proportional to `p_x`, when the
    /// weights are positive (`c > 0`).
    pub fn target_povm(&self) -> Option<Povm> {
        let c = self.c;
        if c <= 0.0 {
            return None;
        }
        let weights = [c, 1.0, 1.0, 1.0].map(|v| v / (c + 3.0));
        Povm::new(
            self.states()
                .iter()
                .zip(weights)
                .map(|(m, weight)| PovmElement {
                    weight,
                    direction: -*m,
                })
                .collect(),
        )
        .ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstructionParams {
    FourByThree(FourByThreeParams),
    General(GeneralParams),
    Pairwise(PairwiseParams),
    Umbrella(UmbrellaFamily, FourByThreeParams),
}

/// A witness together with the configuration that maximises it.
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub kind: ConstructionKind,
    pub witness: WitnessMatrix,
    pub states: Vec<BlochVector>,
    pub measurements: Vec<BlochVector>,
    pub params: ConstructionParams,
    /// Witness value at the ideal configuration.
    pub ideal_max: f64,
    pub doubled: bool,
}

impl Construction {
    pub fn scenario(&self) -> Result<PMScenario> {
        let sc = PMScenario::pure(&self.states, &self.measurements)?;
        Ok(match self.witness.penalty() {
            Some(p) => sc.with_target(p.povm.clone()),
            None => sc,
        })
    }

    /// Appends negated rows and antipodal states; see [`double_rows`].
    pub fn doubled(&self) -> Construction {
        let (witness, states) = double_rows(&self.witness, &self.states);
        Construction {
            kind: self.kind,
            witness,
            states,
            measurements: self.measurements.clone(),
            params: self.params.clone(),
            ideal_max: 2.0 * self.ideal_max,
            doubled: true,
        }
    }

    /// Fails with `DegenerateAdvantage` when a fixed-outcome setting beats the
    /// genuine one in some column at the ideal states.
    pub fn ensure_genuine(&self) -> Result<()> {
        ensure_genuine(&self.witness, &self.states)
    }
}

fn ensure_genuine(w: &WitnessMatrix, m: &[BlochVector]) -> Result<()> {
    for r in eval::degenerate_check(w, m)? {
        if r.preferred == Preference::Degenerate && !r.tie {
            return Err(Error::DegenerateAdvantage {
                column: r.column,
                margin: r.margin,
            });
        }
    }
    Ok(())
}

fn require_unit(m: &[BlochVector]) -> Result<()> {
    for v in m {
        if !v.is_unit() {
            return Err(Error::NotPure(v.norm()));
        }
    }
    Ok(())
}

fn attach_target(w: WitnessMatrix, povm: Option<Povm>) -> WitnessMatrix {
    match povm {
        Some(p) if p.outcomes() <= w.rows() => w.clone().with_penalty(DEFAULT_K, p).unwrap_or(w),
        _ => w,
    }
}

/// Overlaps at the stationary point:
/// `γ_12 = (p_1² + p_4² - 1/2)/(q_1 q_2)`, `γ_13 = (p_1² + p_3² - 1/2)/(q_1 q_3)`,
/// `γ_23 = (p_1² + p_2² - 1/2)/(q_2 q_3)`.
pub fn optimal_overlaps(p: &[f64; 4], q: &[f64; 3]) -> [f64; 3] {
    let p2 = p.map(|v| v * v);
    [
        (p2[0] + p2[3] - 0.5) / (q[0] * q[1]),
        (p2[0] + p2[2] - 0.5) / (q[0] * q[2]),
        (p2[0] + p2[1] - 0.5) / (q[1] * q[2]),
    ]
}

const SIGNS_4X3: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

/// 4×3 witness for four states spanning three dimensions. `p` is the
/// normalised null combination `Σ p_x m_x = 0`, signed so that `Σ p_x ≥ 0`.
pub fn build_4x3(m: &[BlochVector]) -> Result<Construction> {
    let c = build_4x3_raw(m)?;
    c.ensure_genuine()?;
    Ok(c)
}

/// [`build_4x3`] without the fixed-outcome check, for callers that intend to
/// double the rows.
pub fn build_4x3_raw(m: &[BlochVector]) -> Result<Construction> {
    if m.len() != 4 {
        return Err(Error::DimensionMismatch(format!("{} states; expected 4", m.len())));
    }
    require_unit(m)?;
    let (rank, null) = linalg::null_space(m);
    if rank < 3 {
        return Err(Error::CoplanarStates(rank));
    }
    let mut p = null[0].clone();
    p /= p.norm();
    let sum: f64 = p.iter().sum();
    if sum < -1e-12 {
        p.neg_mut();
    } else if sum.abs() <= 1e-12 {
        linalg::orient_first_nonzero(&mut p, 1e-12);
    }
    build_4x3_with_p_raw(m, [p[0], p[1], p[2], p[3]])
}

/// 4×3 witness with explicitly chosen `p`, required when the states are
/// coplanar and `p` is not unique.
pub fn build_4x3_with_p(m: &[BlochVector], p: [f64; 4]) -> Result<Construction> {
    let c = build_4x3_with_p_raw(m, p)?;
    c.ensure_genuine()?;
    Ok(c)
}

fn build_4x3_with_p_raw(m: &[BlochVector], p: [f64; 4]) -> Result<Construction> {
    if m.len() != 4 {
        return Err(Error::DimensionMismatch(format!("{} states; expected 4", m.len())));
    }
    require_unit(m)?;
    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(pn > 0.0) {
        return Err(Error::InvalidArgument("p must be nonzero".into()));
    }
    let p = p.map(|v| v / pn);
    let resid: BlochVector = m.iter().zip(p).map(|(mx, px)| *mx * px).sum();
    if resid.norm() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "Σ p_x m_x has norm {}",
            resid.norm()
        )));
    }
    let head = m[0] * p[0];
    let q = [
        (head + m[1] * p[1]).norm(),
        (head + m[2] * p[2]).norm(),
        (head + m[3] * p[3]).norm(),
    ];
    for (y, qy) in q.iter().enumerate() {
        if *qy <= 1e-12 {
            return Err(Error::VanishingQ(y + 1));
        }
    }
    let qn: f64 = q.iter().map(|v| v * v).sum();
    if (qn - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("Σ q_y² = {qn}")));
    }
    let w = WitnessMatrix::new(DMatrix::from_fn(4, 3, |x, y| SIGNS_4X3[x][y] * p[x] * q[y]))?;
    let gram = optimal_overlaps(&p, &q);
    let g = GramMatrix::from_upper(3, &gram)?;
    let min = g.min_eigenvalue();
    if min < crate::qstate::PSD_TOL {
        return Err(Error::IllegitimateGram(min));
    }
    let best = eval::best_measurements(&w, m)?;
    if best.any_flagged() {
        return Err(Error::InvalidArgument(
            "a setting response vanishes at the target states".into(),
        ));
    }
    let target = if p.iter().all(|&v| v > 0.0) {
        povm_from_bloch(&m.iter().map(|v| -*v).collect::<Vec<_>>()).ok()
    } else {
        None
    };
    Ok(Construction {
        kind: ConstructionKind::FourByThree,
        witness: attach_target(w, target),
        states: m.to_vec(),
        measurements: best.directions,
        params: ConstructionParams::FourByThree(FourByThreeParams { p, q, gram }),
        ideal_max: 2.0,
        doubled: false,
    })
}

/// Appends the negated rows of `w` and the antipodal states. Every column of
/// the result sums to exactly zero.
pub fn double_rows(w: &WitnessMatrix, m: &[BlochVector]) -> (WitnessMatrix, Vec<BlochVector>) {
    let rows = w.rows();
    let mat = DMatrix::from_fn(2 * rows, w.cols(), |x, y| {
        if x < rows {
            w.get(x, y)
        } else {
            -w.get(x - rows, y)
        }
    });
    let mut out = WitnessMatrix::new(mat).expect("finite");
    if let Some(p) = w.penalty() {
        out = out.with_penalty(p.k, p.povm.clone()).expect("validated penalty");
    }
    let states = m.iter().cloned().chain(m.iter().map(|v| -*v)).collect();
    (out, states)
}

/// Witness `w_{xy} = r_x μ_{xy}` for any set of states, with `μ_{xy}` the
/// components of `m_x` in the eigenframe of `Σ_x r_x m_x m_xᵀ`.
///
/// Eigenvectors orthogonal to the span of the states are dropped; the rest,
/// in descending eigenvalue order and signed so their first nonzero component
/// is positive, are the settings.
pub fn build_general(m: &[BlochVector], r: &[f64]) -> Result<Construction> {
    let c = build_general_raw(m, r)?;
    c.ensure_genuine()?;
    Ok(c)
}

/// [`build_general`] without the fixed-outcome check.
pub fn build_general_raw(m: &[BlochVector], r: &[f64]) -> Result<Construction> {
    if m.is_empty() || m.len() != r.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} states with {} weights",
            m.len(),
            r.len()
        )));
    }
    require_unit(m)?;
    if let Some(bad) = r.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("weight {bad} is not positive")));
    }
    let mut s = DMatrix::<f64>::zeros(3, 3);
    for (mx, rx) in m.iter().zip(r) {
        let v = mx.to_vector3();
        for i in 0..3 {
            for j in 0..3 {
                s[(i, j)] += rx * v[i] * v[j];
            }
        }
    }
    let scale = r.iter().sum::<f64>();
    let (vals, vecs) = linalg::sorted_symmetric_eigen(&s, 1e-10 * scale.max(1.0));
    let max = vals[0];
    let mut eigenvalues = Vec::new();
    let mut settings = Vec::new();
    for (val, mut vec) in vals.into_iter().zip(vecs) {
        if val > linalg::RANK_RTOL * max {
            linalg::orient_first_nonzero(&mut vec, 1e-12);
            eigenvalues.push(val);
            settings.push(BlochVector::new(vec[0], vec[1], vec[2]));
        }
    }
    let mv = settings.len();
    let mm = m.len();
    let mu = DMatrix::from_fn(mm, mv, |x, y| m[x].dot(&settings[y]));
    let w = WitnessMatrix::new(DMatrix::from_fn(mm, mv, |x, y| r[x] * mu[(x, y)]))?;

    for y1 in 0..mv {
        for y2 in y1 + 1..mv {
            let off: f64 = (0..mm).map(|x| r[x] * mu[(x, y1)] * mu[(x, y2)]).sum();
            if off.abs() > 1e-10 * scale.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "frame not diagonal: Σ r μ_{y1} μ_{y2} = {off}"
                )));
            }
        }
    }

    let required = mv * (mv.saturating_sub(1)) / 2;
    if mm < required + 1 {
        warn!(
            "{mm} states cannot give a Hessian of rank {required}; the optimum will not be unique"
        );
    }
    let pairs: Vec<(usize, usize)> = (0..mv)
        .flat_map(|a| (a + 1..mv).map(move |b| (a, b)))
        .collect();
    let t = DMatrix::from_fn(mm, pairs.len(), |x, k| {
        let (a, b) = pairs[k];
        r[x] * r[x] * mu[(x, a)] * mu[(x, b)]
    });
    let hessian_rank = linalg::rank(&t);
    if hessian_rank < required {
        return Err(Error::RankDeficient {
            rank: hessian_rank,
            required,
        });
    }

    let target = if (3..=4).contains(&mm) {
        povm_from_bloch(&m.iter().map(|v| -*v).collect::<Vec<_>>()).ok()
    } else {
        None
    };
    Ok(Construction {
        kind: ConstructionKind::General,
        witness: attach_target(w, target),
        states: m.to_vec(),
        measurements: settings,
        params: ConstructionParams::General(GeneralParams {
            r: r.to_vec(),
            mu,
            eigenvalues,
            hessian_rank,
        }),
        ideal_max: scale,
        doubled: false,
    })
}

/// Extra state `-Σ r'_x m_x / |Σ r'_x m_x|` after which the zero vector is a
/// positive combination of the enlarged set.
pub fn augment_state(m: &[BlochVector], r_prime: &[f64]) -> Result<BlochVector> {
    if m.len() != r_prime.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} states with {} weights",
            m.len(),
            r_prime.len()
        )));
    }
    if let Some(bad) = r_prime.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!("weight {bad} is not positive")));
    }
    let s: BlochVector = m.iter().zip(r_prime).map(|(v, r)| *v * *r).sum();
    let scale = r_prime.iter().sum::<f64>();
    match s.normalized(1e-12 * scale) {
        Some(u) => Ok(-u),
        None => Err(Error::ZeroSum),
    }
}

/// Pairwise witness for a three- or four-outcome POVM: the states are
/// `m_x = -n_x` and `F_{ij} = λ_i λ_j |n_i - n_j|`.
pub fn build_4x6(povm: &Povm) -> Result<Construction> {
    let m: Vec<BlochVector> = povm.directions().iter().map(|n| -*n).collect();
    let signs = vec![1.0; m.len()];
    let c = pairwise(&m, &povm.weights(), &signs)?;
    Ok(Construction {
        witness: attach_target(c.witness.clone(), Some(povm.clone())),
        ..c
    })
}

/// Pairwise witness for states given directly. The weights are the unique
/// null combination of the states; when some are negative and
/// `allow_sign_flip` is set, the corresponding rows are negated.
pub fn build_4x6_states(m: &[BlochVector], allow_sign_flip: bool) -> Result<Construction> {
    if !(3..=4).contains(&m.len()) {
        return Err(Error::DimensionMismatch(format!("{} states; expected 3 or 4", m.len())));
    }
    require_unit(m)?;
    let (_, null) = linalg::null_space(m);
    if null.len() != 1 {
        return Err(if null.is_empty() {
            Error::NoValidWeights
        } else {
            Error::NonExtremal(null.len())
        });
    }
    let mut c: DVector<f64> = null[0].clone();
    linalg::orient_first_nonzero(&mut c, 1e-12);
    let scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if c.iter().any(|v| v.abs() <= 1e-12 * scale) {
        return Err(Error::NoValidWeights);
    }
    let negative = c.iter().any(|&v| v < 0.0);
    if negative && !allow_sign_flip {
        return Err(Error::NoValidWeights);
    }
    let signs: Vec<f64> = c.iter().map(|v| v.signum()).collect();
    let total: f64 = c.iter().map(|v| v.abs()).sum();
    let lambda: Vec<f64> = c.iter().map(|v| v.abs() / total).collect();
    let c = pairwise(m, &lambda, &signs)?;
    let target = if negative {
        None
    } else {
        povm_from_bloch(&m.iter().map(|v| -*v).collect::<Vec<_>>()).ok()
    };
    Ok(Construction {
        witness: attach_target(c.witness.clone(), target),
        ..c
    })
}

fn pairwise(m: &[BlochVector], lambda: &[f64], signs: &[f64]) -> Result<Construction> {
    let o = m.len();
    // rows with negative sign are built for the flipped state
    let eff: Vec<BlochVector> = m.iter().zip(signs).map(|(v, s)| *v * *s).collect();
    let mut f = DMatrix::zeros(o, o);
    let mut pairs = Vec::new();
    let mut dropped = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut settings = Vec::new();
    let mut ideal_max = 0.0;
    for i in 0..o {
        for j in i + 1..o {
            let diff = eff[i] - eff[j];
            let d = diff.norm();
            if d <= COINCIDENT_TOL {
                warn!("states {} and {} coincide; dropping their setting", i + 1, j + 1);
                dropped.push((i, j));
                continue;
            }
            let fij = lambda[i] * lambda[j] * d;
            f[(i, j)] = fij;
            f[(j, i)] = fij;
            let mut col = vec![0.0; o];
            col[i] = signs[i] * fij;
            col[j] = -signs[j] * fij;
            columns.push(col);
            settings.push(diff * (1.0 / d));
            pairs.push((i, j));
            ideal_max += fij * d;
        }
    }
    let mut tau = vec![0.0; o];
    let mut residual = 0.0_f64;
    for i in 0..o {
        let mut force = BlochVector::zero();
        for j in 0..o {
            if i == j || f[(i, j)] == 0.0 {
                continue;
            }
            let diff = eff[i] - eff[j];
            let d = diff.norm();
            force += diff * (f[(i, j)] / d);
            tau[i] += f[(i, j)] * (1.0 - eff[i].dot(&eff[j])) / d;
        }
        residual = residual.max((force - eff[i] * tau[i]).norm());
    }
    let w = WitnessMatrix::new(DMatrix::from_fn(o, columns.len(), |x, a| columns[a][x]))?;
    Ok(Construction {
        kind: ConstructionKind::Pairwise,
        witness: w,
        states: m.to_vec(),
        measurements: settings,
        params: ConstructionParams::Pairwise(PairwiseParams {
            f,
            tau,
            pairs,
            dropped,
            lambda: lambda.to_vec(),
            row_signs: signs.to_vec(),
            equilibrium_residual: residual,
        }),
        ideal_max,
        doubled: false,
    })
}

/// The umbrella-like 4×3 family, `c ∈ [0, 3]`; its maximum is 2 for every `c`.
pub fn umbrella(c: f64) -> Result<Construction> {
    let fam = UmbrellaFamily::new(c)?;
    let w = fam.witness();
    Ok(Construction {
        kind: ConstructionKind::Umbrella,
        witness: attach_target(w, fam.target_povm()),
        states: fam.states(),
        measurements: fam.measurements(),
        params: ConstructionParams::Umbrella(fam, fam.params()),
        ideal_max: 2.0,
        doubled: false,
    })
}
