#![allow(dead_code)]

use pmst_core::qstate::povm_from_bloch;
use pmst_core::{BlochVector, Povm, WitnessMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn unit<R: Rng>(rng: &mut R) -> BlochVector {
    loop {
        let v = BlochVector::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Some(u) = v.normalized(1e-6) {
            return u;
        }
    }
}

pub fn units<R: Rng>(rng: &mut R, n: usize) -> Vec<BlochVector> {
    (0..n).map(|_| unit(rng)).collect()
}

/// Four-outcome extremal POVM from four random directions whose convex hull
/// contains the origin comfortably.
pub fn extremal_povm<R: Rng>(rng: &mut R) -> Povm {
    loop {
        let n = units(rng, 4);
        if let Ok(p) = povm_from_bloch(&n) {
            if p.weights().iter().all(|&w| w > 0.02) {
                return p;
            }
        }
    }
}

pub fn witness<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> WitnessMatrix {
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    WitnessMatrix::from_rows(&data).unwrap()
}

/// Rotation of `v` about the unit axis `k` by `angle` (Rodrigues).
pub fn rotate(v: &BlochVector, k: &BlochVector, angle: f64) -> BlochVector {
    let (s, c) = angle.sin_cos();
    let [kx, ky, kz] = k.0;
    let [x, y, z] = v.0;
    let cross = BlochVector::new(ky * z - kz * y, kz * x - kx * z, kx * y - ky * x);
    *v * c + cross * s + *k * (k.dot(v) * (1.0 - c))
}
