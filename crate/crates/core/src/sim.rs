//! Circuit-level simulation of a prepare-and-measure run.
//!
//! Each preparation `m_x` becomes a state-preparation unitary applied to
//! `|0⟩`, each setting `v_y` a basis rotation followed by a computational
//! basis measurement. Every `(x, y)` circuit is run for the same number of
//! shots, and the witness is estimated from the observed frequencies.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bundle::Sig17;
use crate::error::{check_range, Error, Result};
use crate::qstate::{BlochVector, UNIT_TOL};
use crate::witness::WitnessMatrix;

/// `b₁² + b₂²` below which a Bloch vector counts as lying on the z-axis.
pub const POLE_TOL: f64 = 1e-24;
/// Allowed deviation of `|α|² + |β|²` from one.
pub const NORM_TOL: f64 = 1e-12;

fn check_unit(v: &BlochVector) -> std::result::Result<(), f64> {
    let n = v.norm();
    if (n - 1.0).abs() <= UNIT_TOL {
        Ok(())
    } else {
        Err(n)
    }
}

/// Amplitudes `(α, β)` of the pure state with Bloch vector `m`, `α ≥ 0` real.
pub fn prep_amplitudes(m: &BlochVector) -> Result<(Complex64, Complex64)> {
    check_unit(m).map_err(Error::NotPure)?;
    let [b1, b2, b3] = m.0;
    let alpha = Complex64::new(((1.0 + b3) / 2.0).max(0.0).sqrt(), 0.0);
    let rho2 = b1 * b1 + b2 * b2;
    let beta = if rho2 > POLE_TOL {
        Complex64::new(b1, b2) / rho2.sqrt() * ((1.0 - b3) / 2.0).max(0.0).sqrt()
    } else if b3 > 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        // south pole: the phase is free, fix it to +1
        Complex64::new(1.0, 0.0)
    };
    Ok((alpha, beta))
}

/// Polar and azimuthal angles `(θ, φ)` of `v`, `θ ∈ [0, π]`, `φ ∈ [0, 2π)`.
pub fn meas_angles(v: &BlochVector) -> Result<(f64, f64)> {
    check_unit(v).map_err(Error::NotUnit)?;
    let [v1, v2, v3] = v.0;
    if v1 * v1 + v2 * v2 <= POLE_TOL {
        return Ok((if v3 > 0.0 { 0.0 } else { std::f64::consts::PI }, 0.0));
    }
    let theta = 2.0 * ((1.0 + v3) / 2.0).clamp(0.0, 1.0).sqrt().acos();
    let mut phi = v2.atan2(v1).rem_euclid(TAU);
    if phi >= TAU {
        phi = 0.0;
    }
    Ok((theta, phi))
}

/// `[[α, -β*], [β, α*]]`, mapping `|0⟩` to `α|0⟩ + β|1⟩`.
pub fn prep_unitary(alpha: Complex64, beta: Complex64) -> Matrix2<Complex64> {
    Matrix2::new(alpha, -beta.conj(), beta, alpha.conj())
}

/// Basis rotation whose first row is the conjugate of the `+v` eigenstate.
pub fn proj_unitary(theta: f64, phi: f64) -> Matrix2<Complex64> {
    let (s, c) = (theta / 2.0).sin_cos();
    let e = Complex64::from_polar(1.0, -phi);
    Matrix2::new(Complex64::new(c, 0.0), e * s, Complex64::new(s, 0.0), -e * c)
}

/// One `(x, y)` circuit. Indices are zero-based in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub x: usize,
    pub y: usize,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub theta: f64,
    pub phi: f64,
    pub shots: u64,
}

impl Circuit {
    pub fn new(x: usize, y: usize, m: &BlochVector, v: &BlochVector, shots: u64) -> Result<Self> {
        let (alpha, beta) = prep_amplitudes(m)?;
        let (theta, phi) = meas_angles(v)?;
        Ok(Circuit {
            x,
            y,
            alpha,
            beta,
            theta,
            phi,
            shots,
        })
    }

    /// `(P(0), P(1))` of the noiseless circuit.
    pub fn probabilities(&self) -> (f64, f64) {
        let u = proj_unitary(self.theta, self.phi);
        let amp0 = u[(0, 0)] * self.alpha + u[(0, 1)] * self.beta;
        let amp1 = u[(1, 0)] * self.alpha + u[(1, 1)] * self.beta;
        (amp0.norm_sqr().clamp(0.0, 1.0), amp1.norm_sqr().clamp(0.0, 1.0))
    }

    fn validate(&self) -> Result<()> {
        let n = self.alpha.norm_sqr() + self.beta.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Format(format!(
                "circuit ({}, {}): |α|² + |β|² = {n}",
                self.x + 1,
                self.y + 1
            )));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.theta) || !(0.0..TAU).contains(&self.phi) {
            return Err(Error::Format(format!(
                "circuit ({}, {}): angles out of range",
                self.x + 1,
                self.y + 1
            )));
        }
        Ok(())
    }
}

/// All `M_m × M_v` circuits of a run, row-major in `(x, y)`, with a common
/// shot count.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    rows: usize,
    cols: usize,
    shots: u64,
    circuits: Vec<Circuit>,
}

impl CircuitSpec {
    pub fn from_vectors(states: &[BlochVector], dirs: &[BlochVector], shots: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        let mut circuits = Vec::with_capacity(states.len() * dirs.len());
        for (x, m) in states.iter().enumerate() {
            for (y, v) in dirs.iter().enumerate() {
                circuits.push(Circuit::new(x, y, m, v, shots)?);
            }
        }
        Ok(CircuitSpec {
            rows: states.len(),
            cols: dirs.len(),
            shots,
            circuits,
        })
    }

    /// Validates a list of circuits covering every `(x, y)` once with equal shots.
    pub fn from_circuits(mut circuits: Vec<Circuit>) -> Result<Self> {
        let rows = circuits.iter().map(|c| c.x + 1).max().unwrap_or(0);
        let cols = circuits.iter().map(|c| c.y + 1).max().unwrap_or(0);
        if rows * cols != circuits.len() || circuits.is_empty() {
            return Err(Error::Format(format!(
                "{} circuits do not cover a {rows}x{cols} grid",
                circuits.len()
            )));
        }
        circuits.sort_by_key(|c| (c.x, c.y));
        for (i, c) in circuits.iter().enumerate() {
            if (c.x, c.y) != (i / cols, i % cols) {
                return Err(Error::Format(format!(
                    "duplicate circuit ({}, {})",
                    c.x + 1,
                    c.y + 1
                )));
            }
            c.validate()?;
        }
        let shots = circuits[0].shots;
        if shots == 0 || circuits.iter().any(|c| c.shots != shots) {
            return Err(Error::Format("every circuit needs the same positive shot count".into()));
        }
        Ok(CircuitSpec {
            rows,
            cols,
            shots,
            circuits,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn circuits(&self) -> &[Circuit] {
        &self.circuits
    }

    pub fn get(&self, x: usize, y: usize) -> &Circuit {
        &self.circuits[x * self.cols + y]
    }

    /// Outcome-0 probabilities, row-major, under depolarising noise `η`
    /// (the state `m` is replaced by `η m`).
    pub fn p0_table(&self, eta: f64) -> Result<Vec<f64>> {
        check_range("eta", eta, 0.0, 1.0)?;
        Ok(self
            .circuits
            .iter()
            .map(|c| (eta * c.probabilities().0 + (1.0 - eta) / 2.0).clamp(0.0, 1.0))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let records: Vec<CircuitRecord> = self.circuits.iter().map(CircuitRecord::from).collect();
        serde_json::to_string_pretty(&records).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let records: Vec<CircuitRecord> =
            serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        let circuits = records
            .into_iter()
            .map(Circuit::try_from)
            .collect::<Result<Vec<_>>>()?;
        Self::from_circuits(circuits)
    }
}

/// On-disk form of a circuit; `x` and `y` are one-based.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitRecord {
    x: usize,
    y: usize,
    alpha: [Sig17; 2],
    beta: [Sig17; 2],
    theta: Sig17,
    phi: Sig17,
    shots: u64,
}

impl From<&Circuit> for CircuitRecord {
    fn from(c: &Circuit) -> Self {
        CircuitRecord {
            x: c.x + 1,
            y: c.y + 1,
            alpha: [Sig17(c.alpha.re), Sig17(c.alpha.im)],
            beta: [Sig17(c.beta.re), Sig17(c.beta.im)],
            theta: Sig17(c.theta),
            phi: Sig17(c.phi),
            shots: c.shots,
        }
    }
}

impl TryFrom<CircuitRecord> for Circuit {
    type Error = Error;

    fn try_from(r: CircuitRecord) -> Result<Self> {
        if r.x == 0 || r.y == 0 {
            return Err(Error::Format("circuit indices are one-based".into()));
        }
        Ok(Circuit {
            x: r.x - 1,
            y: r.y - 1,
            alpha: Complex64::new(r.alpha[0].0, r.alpha[1].0),
            beta: Complex64::new(r.beta[0].0, r.beta[1].0),
            theta: r.theta.0,
            phi: r.phi.0,
            shots: r.shots,
        })
    }
}

/// Observed counts `N(b | x, y)` with the same `N` in every cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatTable {
    rows: usize,
    cols: usize,
    shots: u64,
    /// `[N(0|x,y), N(1|x,y)]`, row-major.
    counts: Vec<[u64; 2]>,
}

impl StatTable {
    pub fn new(rows: usize, cols: usize, counts: Vec<[u64; 2]>) -> Result<Self> {
        if rows == 0 || cols == 0 || counts.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} cells for a {rows}x{cols} table",
                counts.len()
            )));
        }
        let shots = counts[0][0] + counts[0][1];
        if shots == 0 {
            return Err(Error::Format("cell (1, 1) has no shots".into()));
        }
        for (i, c) in counts.iter().enumerate() {
            if c[0] + c[1] != shots {
                return Err(Error::Format(format!(
                    "cell ({}, {}) has {} shots, expected {shots}",
                    i / cols + 1,
                    i % cols + 1,
                    c[0] + c[1]
                )));
            }
        }
        Ok(StatTable {
            rows,
            cols,
            shots,
            counts,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn count(&self, x: usize, y: usize, b: usize) -> u64 {
        self.counts[x * self.cols + y][b]
    }

    /// `(f(0|x,y), f(1|x,y))`.
    pub fn frequencies(&self, x: usize, y: usize) -> (f64, f64) {
        let c = self.counts[x * self.cols + y];
        let n = self.shots as f64;
        (c[0] as f64 / n, c[1] as f64 / n)
    }

    /// Writes the `x,y,b,count` table, one-based indices.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Format(e.to_string());
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["x", "y", "b", "count"]).map_err(io)?;
        for x in 0..self.rows {
            for y in 0..self.cols {
                for b in 0..2 {
                    wr.serialize((x + 1, y + 1, b, self.count(x, y, b))).map_err(io)?;
                }
            }
        }
        wr.flush().map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    /// Reads an `x,y,b,count` table. Every `(x, y, b)` of the implied grid
    /// must appear exactly once.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = rd.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["x", "y", "b", "count"] {
            return Err(Error::Format(format!("expected header x,y,b,count, got {:?}", header)));
        }
        let mut rows = Vec::new();
        for (line, rec) in rd.deserialize::<(usize, usize, usize, u64)>().enumerate() {
            let (x, y, b, n) = rec.map_err(|e| Error::Format(format!("row {}: {e}", line + 2)))?;
            if x == 0 || y == 0 || b > 1 {
                return Err(Error::Format(format!("row {}: bad index ({x}, {y}, {b})", line + 2)));
            }
            rows.push((x - 1, y - 1, b, n));
        }
        let nx = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let ny = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if nx == 0 {
            return Err(Error::Format("no counts".into()));
        }
        let mut cells: Vec<[Option<u64>; 2]> = vec![[None, None]; nx * ny];
        for (x, y, b, n) in rows {
            let slot = &mut cells[x * ny + y][b];
            if slot.is_some() {
                return Err(Error::Format(format!("duplicate row ({}, {}, {b})", x + 1, y + 1)));
            }
            *slot = Some(n);
        }
        let mut counts = Vec::with_capacity(cells.len());
        for (i, c) in cells.iter().enumerate() {
            match c {
                [Some(a), Some(b)] => counts.push([*a, *b]),
                _ => {
                    let b = if c[0].is_none() { 0 } else { 1 };
                    return Err(Error::Format(format!(
                        "missing row ({}, {}, {b})",
                        i / ny + 1,
                        i % ny + 1
                    )));
                }
            }
        }
        Self::new(nx, ny, counts)
    }
}

/// Random stream for cell `(x, y)`; independent of how cells are scheduled.
fn cell_rng(seed: u64, x: usize, y: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((x as u64) << 32) | y as u64);
    rng
}

/// Draws `N(0|x,y) ~ Binomial(N, P(0|x,y))` for every circuit.
pub fn sample_counts(spec: &CircuitSpec, eta: f64, seed: u64) -> Result<StatTable> {
    let p0 = spec.p0_table(eta)?;
    sample_from_p0(spec.rows, spec.cols, &p0, spec.shots, seed)
}

/// Sampling from an explicit row-major table of outcome-0 probabilities.
pub fn sample_from_p0(rows: usize, cols: usize, p0: &[f64], shots: u64, seed: u64) -> Result<StatTable> {
    if p0.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities for a {rows}x{cols} grid",
            p0.len()
        )));
    }
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let mut counts = Vec::with_capacity(p0.len());
    for (i, &p) in p0.iter().enumerate() {
        let dist = Binomial::new(shots, p.clamp(0.0, 1.0))
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let n0 = dist.sample(&mut cell_rng(seed, i / cols, i % cols));
        counts.push([n0, shots - n0]);
    }
    StatTable::new(rows, cols, counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessEstimate {
    pub w_hat: f64,
    pub sigma_hat: f64,
    /// Closed-form standard deviation, available for the umbrella family.
    pub sigma_analytic: Option<f64>,
    pub shots: u64,
}

/// `Ŵ = Σ w_{xy} [f(0|x,y) - f(1|x,y)]` with the plug-in standard deviation
/// `σ̂² = Σ w_{xy}² · 4 f(0) f(1) / N` (cells independent, outcomes within a
/// cell perfectly anticorrelated).
pub fn estimate_witness(w: &WitnessMatrix, t: &StatTable) -> Result<WitnessEstimate> {
    if w.rows() != t.rows || w.cols() != t.cols {
        return Err(Error::DimensionMismatch(format!(
            "witness is {}x{}, counts are {}x{}",
            w.rows(),
            w.cols(),
            t.rows,
            t.cols
        )));
    }
    let f: Vec<(f64, f64)> = (0..t.rows)
        .flat_map(|x| (0..t.cols).map(move |y| (x, y)))
        .map(|(x, y)| t.frequencies(x, y))
        .collect();
    Ok(estimate_from_frequencies(w, &f, t.shots))
}

/// The estimator on a row-major table of `(f(0), f(1))` pairs.
pub fn estimate_from_frequencies(w: &WitnessMatrix, f: &[(f64, f64)], shots: u64) -> WitnessEstimate {
    let cols = w.cols();
    let mut w_hat = 0.0;
    let mut var = 0.0;
    for (i, &(f0, f1)) in f.iter().enumerate() {
        let wxy = w.get(i / cols, i % cols);
        w_hat += wxy * (f0 - f1);
        var += wxy * wxy * 4.0 * f0 * f1;
    }
    WitnessEstimate {
        w_hat,
        sigma_hat: (var / shots as f64).sqrt(),
        sigma_analytic: None,
        shots,
    }
}

/// `σ_W = (3 + c²)^{-1} √((27 + 42c² - 5c⁴) / (6N))` for the umbrella family.
pub fn sigma_analytic(c: f64, shots: u64) -> Result<f64> {
    check_range("c", c, 0.0, 3.0)?;
    if shots == 0 {
        return Err(Error::OutOfRange {
            name: "N",
            value: 0.0,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let c2 = c * c;
    let num = (27.0 + 42.0 * c2 - 5.0 * c2 * c2).max(0.0);
    Ok((num / (6.0 * shots as f64)).sqrt() / (3.0 + c2))
}
