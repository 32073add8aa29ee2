//! Small dense linear-algebra helpers shared by the constructions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::qstate::BlochVector;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_RTOL: f64 = 1e-8;

/// Numerical rank of a matrix using the relative singular-value cutoff.
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * max).count()
}

/// Rank of the span of `vs` and an orthonormal basis of the null space of
/// the column stack (coefficient vectors `c` with `Σ c_j vs[j] = 0`).
pub fn null_space(vs: &[BlochVector]) -> (usize, Vec<DVector<f64>>) {
    let k = vs.len();
    if k == 0 {
        return (0, Vec::new());
    }
    // pad to at least k rows so the SVD exposes the full right basis
    let n = k.max(3);
    let mut a = DMatrix::zeros(n, k);
    for (j, v) in vs.iter().enumerate() {
        for i in 0..3 {
            a[(i, j)] = v.as_array()[i];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sv = svd.singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let mut rank = 0;
    let mut null = Vec::new();
    for (idx, s) in sv.iter().enumerate() {
        if max > 0.0 && *s > RANK_RTOL * max {
            rank += 1;
        } else {
            null.push(v_t.row(idx).transpose().into_owned());
        }
    }
    (rank, null)
}

/// Flips `v` so that its first component exceeding `tol` in magnitude is positive.
pub fn orient_first_nonzero(v: &mut DVector<f64>, tol: f64) {
    if let Some(first) = v.iter().find(|x| x.abs() > tol) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Eigenvectors of (numerically) repeated eigenvalues are
/// replaced by a canonical basis: the standard unit vectors projected onto the
/// eigenspace and orthonormalised in index order.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>, cluster_tol: f64) -> (Vec<f64>, Vec<DVector<f64>>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors: Vec<DVector<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[start] - values[end]).abs() <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let space: Vec<DVector<f64>> = vectors[start..end].to_vec();
            let mut basis: Vec<DVector<f64>> = Vec::new();
            for e in 0..n {
                if basis.len() == space.len() {
                    break;
                }
                let mut p = DVector::zeros(n);
                for s in &space {
                    p += s * s[e];
                }
                for b in &basis {
                    let d = b.dot(&p);
                    p -= b * d;
                }
                let norm = p.norm();
                if norm > 1e-6 {
                    basis.push(p / norm);
                }
            }
            if basis.len() == space.len() {
                vectors[start..end].clone_from_slice(&basis);
            }
        }
        start = end;
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_tetrahedron_is_uniform() {
        let s = 1.0 / 3.0_f64.sqrt();
        let vs = [
            BlochVector::new(s, s, s),
            BlochVector::new(s, -s, -s),
            BlochVector::new(-s, s, -s),
            BlochVector::new(-s, -s, s),
        ];
        let (rank, null) = null_space(&vs);
        assert_eq!(rank, 3);
        assert_eq!(null.len(), 1);
        let c = &null[0];
        for i in 1..4 {
            assert!((c[i] - c[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_eigenvalues_get_canonical_basis() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 1.0]));
        let (vals, vecs) = sorted_symmetric_eigen(&m, 1e-10);
        assert_eq!(vals, vec![2.0, 1.0, 1.0]);
        assert!((vecs[1][1].abs() - 1.0).abs() < 1e-12);
        assert!((vecs[2][2].abs() - 1.0).abs() < 1e-12);
    }
}
