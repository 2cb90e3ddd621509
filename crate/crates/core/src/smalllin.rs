//! Small dense Hermitian kernels: eigensolves, the band-restricted
//! pseudoinverse, and first-order eigenpair derivatives.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::CMat;

pub type CVec = DVector<C64>;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: CVec,
}

/// Full eigendecomposition of a Hermitian matrix, ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: CMat,
}

fn hermitian_defect(h: &CMat) -> f64 {
    (h - h.adjoint()).norm()
}

impl Spectrum {
    pub fn new(h: &CMat) -> Result<Spectrum> {
        if h.nrows() != h.ncols() {
            return Err(Error::ShapeMismatch(format!("{}x{}", h.nrows(), h.ncols())));
        }
        let defect = hermitian_defect(h);
        if defect > 1e-10 * h.norm().max(1.0) {
            return Err(Error::NonHermitianInput(defect));
        }
        Ok(Spectrum::new_unchecked(h))
    }

    /// Skips the Hermiticity check; the strictly lower triangle is ignored.
    pub fn new_unchecked(h: &CMat) -> Spectrum {
        let n = h.nrows();
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Spectrum { values, vectors }
    }

    pub fn pair(&self, band: usize) -> EigenPair {
        EigenPair {
            value: self.values[band],
            vector: self.vectors.column(band).into_owned(),
        }
    }

    /// Index of the eigenvalue closest to `e`, and the distance to the next closest.
    fn nearest(&self, e: f64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        let mut second = f64::INFINITY;
        for (j, &l) in self.values.iter().enumerate() {
            let d = (l - e).abs();
            if d < best.1 {
                second = best.1;
                best = (j, d);
            } else if d < second {
                second = d;
            }
        }
        (best.0, second)
    }

    /// (h - e)^+ q with the singular triplet of smallest |λ_j - e| discarded.
    pub fn pinv_apply(&self, e: f64, q: &CVec, gap_tol: f64) -> Result<CVec> {
        let (skip, second) = self.nearest(e);
        if second < gap_tol {
            return Err(Error::NearDegenerate {
                gap: second,
                tol: gap_tol,
                at: None,
            });
        }
        let n = self.values.len();
        let mut out = CVec::zeros(n);
        for j in 0..n {
            if j == skip {
                continue;
            }
            let v = self.vectors.column(j);
            let coef = v.dotc(q) / (self.values[j] - e);
            out.axpy(coef, &v, C64::new(1.0, 0.0));
        }
        Ok(out)
    }
}

/// Eigenpairs of a Hermitian matrix in ascending order.
pub fn hermitian_eigensolve(h: &CMat) -> Result<Vec<EigenPair>> {
    let s = Spectrum::new(h)?;
    Ok((0..s.values.len()).map(|j| s.pair(j)).collect())
}

/// Applies the pseudoinverse of (h - e), dropping its smallest singular triplet.
pub fn pseudoinverse_apply(h: &CMat, e: f64, q: &CVec, gap_tol: f64) -> Result<CVec> {
    Spectrum::new(h)?.pinv_apply(e, q, gap_tol)
}

/// First-order change (dE, du) of a simple eigenpair under h → h + t·dh,
/// with du orthogonal to u.
pub fn band_derivative(h: &CMat, dh: &CMat, pair: &EigenPair, gap_tol: f64) -> Result<(f64, CVec)> {
    let s = Spectrum::new(h)?;
    band_derivative_with(&s, dh, pair, gap_tol)
}

pub fn band_derivative_with(
    s: &Spectrum,
    dh: &CMat,
    pair: &EigenPair,
    gap_tol: f64,
) -> Result<(f64, CVec)> {
    let q = dh * &pair.vector;
    let de = pair.vector.dotc(&q).re;
    let du = -s.pinv_apply(pair.value, &q, gap_tol)?;
    Ok((de, du))
}
