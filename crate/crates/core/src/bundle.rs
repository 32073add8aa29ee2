//! Text serialization of constructions.
//!
//! A witness bundle is a JSON document holding the witness, its ideal
//! configuration and the construction parameters. Floating-point values are
//! written with 17 significant digits so that reading a bundle back yields
//! bit-identical numbers.

use nalgebra::DMatrix;
use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::builder::{
    Construction, ConstructionKind, ConstructionParams, FourByThreeParams, GeneralParams,
    PairwiseParams, UmbrellaFamily,
};
use crate::error::{Error, Result};
use crate::qstate::{BlochVector, Povm, PovmElement};
use crate::witness::WitnessMatrix;

/// An `f64` that serializes with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

/// `x` in scientific notation with 17 significant digits.
pub fn format_sig17(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("non-finite number {}", self.0)));
        }
        RawValue::from_string(format_sig17(self.0))
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Sig17 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Sig17)
    }
}

fn sig(v: &[f64]) -> Vec<Sig17> {
    v.iter().map(|&x| Sig17(x)).collect()
}

fn unsig(v: &[Sig17]) -> Vec<f64> {
    v.iter().map(|x| x.0).collect()
}

fn triple(v: &BlochVector) -> [Sig17; 3] {
    v.0.map(Sig17)
}

fn untriple(v: &[Sig17; 3]) -> BlochVector {
    BlochVector(v.map(|x| x.0))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<Sig17>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|&x| Sig17(x)).collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<Sig17>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |v| v.len());
    if rows.iter().any(|v| v.len() != c) {
        return Err(Error::Format("ragged matrix".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j].0))
}

fn array<const N: usize>(v: &[Sig17], name: &str) -> Result<[f64; N]> {
    unsig(v)
        .try_into()
        .map_err(|_| Error::Format(format!("{name} needs {N} entries")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmRecord {
    pub weights: Vec<Sig17>,
    pub directions: Vec<[Sig17; 3]>,
}

impl PovmRecord {
    pub fn from_povm(p: &Povm) -> Self {
        PovmRecord {
            weights: sig(&p.weights()),
            directions: p.directions().iter().map(triple).collect(),
        }
    }

    pub fn to_povm(&self) -> Result<Povm> {
        if self.weights.len() != self.directions.len() {
            return Err(Error::Format("POVM weights and directions differ in length".into()));
        }
        Povm::new(
            self.weights
                .iter()
                .zip(&self.directions)
                .map(|(w, d)| PovmElement {
                    weight: w.0,
                    direction: untriple(d),
                })
                .collect(),
        )
    }
}

/// Construction-specific parameters; the variant is implied by the fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamsRecord {
    Umbrella {
        c: Sig17,
        p: Vec<Sig17>,
        q: Vec<Sig17>,
        gram: Vec<Sig17>,
    },
    FourByThree {
        p: Vec<Sig17>,
        q: Vec<Sig17>,
        gram: Vec<Sig17>,
    },
    General {
        r: Vec<Sig17>,
        mu: Vec<Vec<Sig17>>,
        eigenvalues: Vec<Sig17>,
        hessian_rank: usize,
    },
    Pairwise {
        f: Vec<Vec<Sig17>>,
        tau: Vec<Sig17>,
        /// One-based pair indices.
        pairs: Vec<[usize; 2]>,
        dropped: Vec<[usize; 2]>,
        lambda: Vec<Sig17>,
        row_signs: Vec<Sig17>,
        equilibrium_residual: Sig17,
    },
}

fn pairs_out(v: &[(usize, usize)]) -> Vec<[usize; 2]> {
    v.iter().map(|&(i, j)| [i + 1, j + 1]).collect()
}

fn pairs_in(v: &[[usize; 2]]) -> Result<Vec<(usize, usize)>> {
    v.iter()
        .map(|&[i, j]| {
            if i == 0 || j == 0 {
                Err(Error::Format("pair indices are one-based".into()))
            } else {
                Ok((i - 1, j - 1))
            }
        })
        .collect()
}

impl ParamsRecord {
    fn from_params(p: &ConstructionParams) -> Self {
        match p {
            ConstructionParams::FourByThree(f) => ParamsRecord::FourByThree {
                p: sig(&f.p),
                q: sig(&f.q),
                gram: sig(&f.gram),
            },
            ConstructionParams::Umbrella(u, f) => ParamsRecord::Umbrella {
                c: Sig17(u.c),
                p: sig(&f.p),
                q: sig(&f.q),
                gram: sig(&f.gram),
            },
            ConstructionParams::General(g) => ParamsRecord::General {
                r: sig(&g.r),
                mu: matrix_rows(&g.mu),
                eigenvalues: sig(&g.eigenvalues),
                hessian_rank: g.hessian_rank,
            },
            ConstructionParams::Pairwise(p) => ParamsRecord::Pairwise {
                f: matrix_rows(&p.f),
                tau: sig(&p.tau),
                pairs: pairs_out(&p.pairs),
                dropped: pairs_out(&p.dropped),
                lambda: sig(&p.lambda),
                row_signs: sig(&p.row_signs),
                equilibrium_residual: Sig17(p.equilibrium_residual),
            },
        }
    }

    fn to_params(&self) -> Result<ConstructionParams> {
        let four = |p: &[Sig17], q: &[Sig17], g: &[Sig17]| -> Result<FourByThreeParams> {
            Ok(FourByThreeParams {
                p: array(p, "p")?,
                q: array(q, "q")?,
                gram: array(g, "gram")?,
            })
        };
        Ok(match self {
            ParamsRecord::FourByThree { p, q, gram } => {
                ConstructionParams::FourByThree(four(p, q, gram)?)
            }
            ParamsRecord::Umbrella { c, p, q, gram } => {
                ConstructionParams::Umbrella(UmbrellaFamily::new(c.0)?, four(p, q, gram)?)
            }
            ParamsRecord::General {
                r,
                mu,
                eigenvalues,
                hessian_rank,
            } => ConstructionParams::General(GeneralParams {
                r: unsig(r),
                mu: rows_matrix(mu)?,
                eigenvalues: unsig(eigenvalues),
                hessian_rank: *hessian_rank,
            }),
            ParamsRecord::Pairwise {
                f,
                tau,
                pairs,
                dropped,
                lambda,
                row_signs,
                equilibrium_residual,
            } => ConstructionParams::Pairwise(PairwiseParams {
                f: rows_matrix(f)?,
                tau: unsig(tau),
                pairs: pairs_in(pairs)?,
                dropped: pairs_in(dropped)?,
                lambda: unsig(lambda),
                row_signs: unsig(row_signs),
                equilibrium_residual: equilibrium_residual.0,
            }),
        })
    }
}

/// On-disk form of a [`Construction`]. `run` carries provenance added by the
/// caller and is ignored when the construction is rebuilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessBundle {
    pub construction: String,
    pub w: Vec<Vec<Sig17>>,
    /// Penalty weight, `null` when the witness has no POVM term.
    pub k: Option<Sig17>,
    pub states: Vec<[Sig17; 3]>,
    pub measurements: Vec<[Sig17; 3]>,
    pub params: ParamsRecord,
    pub target_povm: Option<PovmRecord>,
    pub ideal_max: Sig17,
    pub doubled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

impl WitnessBundle {
    pub fn from_construction(c: &Construction) -> Self {
        let pen = c.witness.penalty();
        WitnessBundle {
            construction: c.kind.label().to_string(),
            w: matrix_rows(c.witness.matrix()),
            k: pen.map(|p| Sig17(p.k)),
            states: c.states.iter().map(triple).collect(),
            measurements: c.measurements.iter().map(triple).collect(),
            params: ParamsRecord::from_params(&c.params),
            target_povm: pen.map(|p| PovmRecord::from_povm(&p.povm)),
            ideal_max: Sig17(c.ideal_max),
            doubled: c.doubled,
            run: None,
        }
    }

    pub fn to_construction(&self) -> Result<Construction> {
        let kind = ConstructionKind::from_label(&self.construction)?;
        let mut witness = WitnessMatrix::new(rows_matrix(&self.w)?)?;
        match (&self.k, &self.target_povm) {
            (Some(k), Some(p)) => witness = witness.with_penalty(k.0, p.to_povm()?)?,
            (None, None) => {}
            _ => return Err(Error::Format("k and target_povm must be given together".into())),
        }
        let states: Vec<BlochVector> = self.states.iter().map(untriple).collect();
        let measurements: Vec<BlochVector> = self.measurements.iter().map(untriple).collect();
        if states.len() != witness.rows() || measurements.len() != witness.cols() {
            return Err(Error::DimensionMismatch(format!(
                "witness is {}x{}, bundle lists {} states and {} measurements",
                witness.rows(),
                witness.cols(),
                states.len(),
                measurements.len()
            )));
        }
        let params = self.params.to_params()?;
        let params_kind = match &params {
            ConstructionParams::FourByThree(_) => ConstructionKind::FourByThree,
            ConstructionParams::General(_) => ConstructionKind::General,
            ConstructionParams::Pairwise(_) => ConstructionKind::Pairwise,
            ConstructionParams::Umbrella(..) => ConstructionKind::Umbrella,
        };
        if params_kind != kind {
            return Err(Error::Format(format!(
                "params describe a {} construction, not {}",
                params_kind.label(),
                kind.label()
            )));
        }
        Ok(Construction {
            kind,
            witness,
            states,
            measurements,
            params,
            ideal_max: self.ideal_max.0,
            doubled: self.doubled,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_4x6, build_general, umbrella};

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_sig17(0.1), "1.0000000000000001e-1");
        assert_eq!(format_sig17(-2.0), "-2.0000000000000000e0");
        let s = serde_json::to_string(&Sig17(1.0 / 3.0)).unwrap();
        assert_eq!(s, "3.3333333333333331e-1");
        assert!(serde_json::to_string(&Sig17(f64::NAN)).is_err());
    }

    #[test]
    fn bundles_round_trip_bit_exact() {
        let s3 = 3.0_f64.sqrt();
        let general = build_general(
            &[
                BlochVector::new(1.0, 0.0, 0.0),
                BlochVector::new(0.5, 0.0, s3 / 2.0),
                BlochVector::new(-s3 / 2.0, 0.0, -0.5),
            ],
            &[1.0, 1.0, s3],
        )
        .unwrap();
        for c in [
            umbrella(0.7).unwrap(),
            build_4x6(&Povm::sic()).unwrap(),
            general,
            umbrella(1.3).unwrap().doubled(),
        ] {
            let text = WitnessBundle::from_construction(&c).to_json().unwrap();
            let back = WitnessBundle::from_json(&text).unwrap().to_construction().unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn mismatched_params_rejected() {
        let mut b = WitnessBundle::from_construction(&umbrella(1.0).unwrap());
        b.construction = "general".into();
        assert!(b.to_construction().is_err());
    }
}
