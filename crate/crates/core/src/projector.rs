//! Orthonormal bases for the clutter range and the projectors built on them.
//!
//! A [`SpotlightBasis`] holds `r` orthonormal columns `U` spanning (an
//! approximation of) the range of `A2`. The projector pair is `P = U U^T`
//! and `P_perp = I - P`, applied without ever materializing an `m x m`
//! matrix. [`project_model`] then rewrites the problem in an explicit
//! orthonormal coordinate system for the complement, which keeps the
//! projected noise covariance equal to the identity: the reduced problem is
//! an ordinary whitened least-squares problem in `m - r` coordinates rather
//! than a rank-deficient one in `m`.

use nalgebra::{DMatrix, DVector};

use crate::matrix::Matrix;
use crate::model::PartitionedForwardModel;
use crate::rng::standard_normal_matrix;
use crate::{scalar, scalar_from_usize, Error, Result, Scalar};

/// How a basis was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// All left singular directions above the numerical-rank tolerance.
    Exact,
    /// The `r` leading left singular directions.
    Truncated,
    /// Range captured from a Gaussian sketch of `A2`.
    Randomized,
}

impl BasisKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BasisKind::Exact => "exact",
            BasisKind::Truncated => "truncated",
            BasisKind::Randomized => "randomized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(BasisKind::Exact),
            "truncated" => Ok(BasisKind::Truncated),
            "randomized" => Ok(BasisKind::Randomized),
            other => Err(Error::Format(format!("unknown basis kind '{other}'"))),
        }
    }
}

/// Orthonormal column set spanning (an approximation of) the clutter range.
#[derive(Debug, Clone)]
pub struct SpotlightBasis<T: Scalar> {
    u: DMatrix<T>,
    kind: BasisKind,
    spectrum: Option<DVector<T>>,
    complement: Option<DMatrix<T>>,
}

impl<T: Scalar> SpotlightBasis<T> {
    /// Wraps imported columns, validating orthonormality.
    pub fn from_parts(
        u: DMatrix<T>,
        kind: BasisKind,
        spectrum: Option<DVector<T>>,
    ) -> Result<Self> {
        let r = u.ncols();
        if r > 0 {
            let gram = u.transpose() * &u;
            let dev = (&gram - DMatrix::identity(r, r)).norm();
            let tol = scalar::<T>(50.0) * T::default_epsilon() * scalar_from_usize::<T>(r.max(1));
            if dev > tol.max(scalar::<T>(1e-12) * scalar_from_usize::<T>(r)) {
                return Err(Error::InvalidArgument(format!(
                    "basis columns are not orthonormal (deviation {dev})"
                )));
            }
        }
        Ok(Self {
            u,
            kind,
            spectrum,
            complement: None,
        })
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn u(&self) -> &DMatrix<T> {
        &self.u
    }

    /// Singular spectrum of the matrix the basis was derived from
    /// (present for exact and truncated bases).
    pub fn spectrum(&self) -> Option<&DVector<T>> {
        self.spectrum.as_ref()
    }

    /// `P v = U (U^T v)`.
    pub fn apply_p(&self, v: &DVector<T>) -> Result<DVector<T>> {
        if v.len() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} does not match m = {}",
                v.len(),
                self.m()
            )));
        }
        Ok(&self.u * (self.u.transpose() * v))
    }

    /// `P_perp v = v - P v`.
    pub fn apply_p_perp(&self, v: &DVector<T>) -> Result<DVector<T>> {
        Ok(v - self.apply_p(v)?)
    }

    /// Orthonormal rows spanning the complement of the basis columns:
    /// `(m - r) x m` with `B U = 0` and `B B^T = I`. Uses the stored
    /// trailing singular vectors when the basis came from a factorization,
    /// otherwise a Householder completion of `U`.
    pub fn complement_rows(&self) -> DMatrix<T> {
        match &self.complement {
            Some(c) => c.transpose(),
            None => orthonormal_completion(&self.u).transpose(),
        }
    }
}

/// Orthonormal completion of `u` to a full basis of the data space, via the
/// trailing columns of a Householder QR factorization.
fn orthonormal_completion<T: Scalar>(u: &DMatrix<T>) -> DMatrix<T> {
    let m = u.nrows();
    let r = u.ncols();
    if r == 0 {
        return DMatrix::identity(m, m);
    }
    let qr = u.clone().qr();
    let mut qt = DMatrix::identity(m, m);
    qr.q_tr_mul(&mut qt);
    qt.transpose().columns(r, m - r).into_owned()
}

/// One-shot spectral factorization of `A2`, reused to derive exact or
/// truncated bases at any rank without refactorizing.
///
/// Dense inputs go through the SVD directly. Sparse inputs use the
/// eigendecomposition of the row Gram matrix `A2 A2^T`, which yields the
/// same left singular vectors plus the full orthonormal complement in one
/// pass and never densifies `A2` itself.
#[derive(Debug, Clone)]
pub struct ClutterSvd<T: Scalar> {
    /// `m x m` orthonormal; the first `min(m, n2)` columns are left
    /// singular vectors in nonincreasing singular-value order, the rest
    /// complete the basis.
    u: DMatrix<T>,
    /// Nonincreasing singular values, length `min(m, n2)`.
    spectrum: DVector<T>,
    /// Right singular vectors (rows), available on the dense route.
    v_t: Option<DMatrix<T>>,
}

impl<T: Scalar> ClutterSvd<T> {
    pub fn compute(a2: &Matrix<T>) -> Result<Self> {
        let m = a2.nrows();
        let n2 = a2.ncols();
        if n2 == 0 || a2.frobenius_norm() == T::zero() {
            return Ok(Self {
                u: DMatrix::identity(m, m),
                spectrum: DVector::zeros(n2.min(m)),
                v_t: None,
            });
        }
        match a2 {
            Matrix::Dense(d) => Self::from_dense_svd(d),
            Matrix::Sparse(_) => Self::from_gram(a2),
        }
    }

    fn from_dense_svd(d: &DMatrix<T>) -> Result<Self> {
        let m = d.nrows();
        let k = m.min(d.ncols());
        let svd = d
            .clone()
            .try_svd(true, true, T::default_epsilon(), 1000)
            .ok_or_else(|| Error::Factorization("SVD did not converge".into()))?;
        let u_thin = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let spectrum = svd.singular_values.map(|s| s.max(T::zero()));
        let u = if u_thin.ncols() == m {
            u_thin
        } else {
            let mut full = DMatrix::zeros(m, m);
            full.view_mut((0, 0), (m, k)).copy_from(&u_thin);
            full.view_mut((0, k), (m, m - k))
                .copy_from(&orthonormal_completion(&u_thin));
            full
        };
        Ok(Self {
            u,
            spectrum,
            v_t: Some(v_t),
        })
    }

    fn from_gram(a2: &Matrix<T>) -> Result<Self> {
        let m = a2.nrows();
        let n2 = a2.ncols();
        let gram = a2.gram_rows();
        let eig = gram
            .try_symmetric_eigen(T::default_epsilon(), 2000)
            .ok_or_else(|| Error::Factorization("symmetric eigensolve did not converge".into()))?;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let u = eig.eigenvectors.select_columns(order.iter());
        let k = m.min(n2);
        let spectrum = DVector::from_fn(k, |j, _| eig.eigenvalues[order[j]].max(T::zero()).sqrt());
        Ok(Self {
            u,
            spectrum,
            v_t: None,
        })
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    /// Nonincreasing singular values, length `min(m, n2)`.
    pub fn spectrum(&self) -> &DVector<T> {
        &self.spectrum
    }

    /// Right singular vectors as rows (dense factorization route only).
    pub fn v_t(&self) -> Option<&DMatrix<T>> {
        self.v_t.as_ref()
    }

    /// Full orthonormal left basis (`m x m`).
    pub fn u_full(&self) -> &DMatrix<T> {
        &self.u
    }

    /// Count of singular values above `rank_tol` times the largest.
    pub fn numerical_rank(&self, rank_tol: T) -> usize {
        match self.spectrum.iter().cloned().fold(T::zero(), T::max) {
            top if top > T::zero() => self
                .spectrum
                .iter()
                .filter(|&&s| s > rank_tol * top)
                .count(),
            _ => 0,
        }
    }

    fn basis(&self, r: usize, kind: BasisKind) -> SpotlightBasis<T> {
        let m = self.m();
        SpotlightBasis {
            u: self.u.columns(0, r).into_owned(),
            kind,
            spectrum: Some(self.spectrum.clone()),
            complement: Some(self.u.columns(r, m - r).into_owned()),
        }
    }

    /// Basis of the numerically exact range.
    pub fn exact_basis(&self, rank_tol: T) -> SpotlightBasis<T> {
        self.basis(self.numerical_rank(rank_tol), BasisKind::Exact)
    }

    /// Basis of the `r` leading singular directions. Ties between equal
    /// singular values keep the factorization's output order: the basis is
    /// then not unique, though the projector is whenever
    /// `lambda_r > lambda_{r+1}`.
    pub fn truncated_basis(&self, r: usize) -> Result<SpotlightBasis<T>> {
        let max_r = self.spectrum.len();
        if r > max_r {
            return Err(Error::InvalidArgument(format!(
                "truncation rank {r} exceeds min(m, n2) = {max_r}"
            )));
        }
        Ok(self.basis(r, BasisKind::Truncated))
    }
}

/// Default relative rank tolerance: machine epsilon times the larger matrix
/// dimension.
pub fn default_rank_tol<T: Scalar>(m: usize, n2: usize) -> T {
    T::default_epsilon() * scalar_from_usize::<T>(m.max(n2).max(1))
}

/// Basis of the numerically exact range of `A2`. `rank_tol` defaults to
/// [`default_rank_tol`].
pub fn exact_complement_basis<T: Scalar>(
    a2: &Matrix<T>,
    rank_tol: Option<T>,
) -> Result<SpotlightBasis<T>> {
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(a2.nrows(), a2.ncols()));
    Ok(ClutterSvd::compute(a2)?.exact_basis(tol))
}

/// Basis of the `r` leading left singular directions of `A2`.
pub fn truncated_basis<T: Scalar>(a2: &Matrix<T>, r: usize) -> Result<SpotlightBasis<T>> {
    ClutterSvd::compute(a2)?.truncated_basis(r)
}

/// Randomized range finder: sketches `A2` with a seeded Gaussian test
/// matrix of `k` columns and orthonormalizes the sketch by a lean SVD,
/// discarding directions with singular value at or below `drop_tol` times
/// the largest. Deterministic given `seed`.
pub fn randomized_basis<T, F>(
    apply_a2: F,
    n2: usize,
    k: usize,
    seed: u64,
    drop_tol: T,
) -> Result<SpotlightBasis<T>>
where
    T: Scalar,
    F: Fn(&DVector<T>) -> DVector<T>,
{
    if k == 0 {
        return Err(Error::InvalidArgument("sketch width k must be >= 1".into()));
    }
    let omega = standard_normal_matrix::<T>(n2, k, seed);
    let mut z: Option<DMatrix<T>> = None;
    for j in 0..k {
        let y = apply_a2(&omega.column(j).into_owned());
        let zmat = z.get_or_insert_with(|| DMatrix::zeros(y.len(), k));
        if y.len() != zmat.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "operator returned length {}, expected {}",
                y.len(),
                zmat.nrows()
            )));
        }
        zmat.set_column(j, &y);
    }
    let z = z.expect("k >= 1");
    let m = z.nrows();
    let svd = z
        .try_svd(true, false, T::default_epsilon(), 1000)
        .ok_or_else(|| Error::Factorization("sketch SVD did not converge".into()))?;
    let u = svd.u.expect("u requested");
    let top = svd
        .singular_values
        .iter()
        .cloned()
        .fold(T::zero(), T::max);
    let r = if top > T::zero() {
        svd.singular_values
            .iter()
            .filter(|&&s| s > drop_tol * top)
            .count()
    } else {
        0
    };
    let _ = m;
    Ok(SpotlightBasis {
        u: u.columns(0, r).into_owned(),
        kind: BasisKind::Randomized,
        spectrum: None,
        complement: None,
    })
}

/// Whitened model rewritten in orthonormal complement coordinates.
#[derive(Debug, Clone)]
pub struct ProjectedModel<T: Scalar> {
    complement_rows: DMatrix<T>,
    a1_reduced: DMatrix<T>,
    residual_clutter_bound: T,
}

impl<T: Scalar> ProjectedModel<T> {
    /// The `(m - r) x m` orthonormal row basis `B` of the complement.
    pub fn complement_rows(&self) -> &DMatrix<T> {
        &self.complement_rows
    }

    /// `B A1`, the reduced spotlight operator.
    pub fn a1_reduced(&self) -> &DMatrix<T> {
        &self.a1_reduced
    }

    /// Frobenius norm of `B A2`: the clutter leakage surviving projection.
    pub fn residual_clutter_bound(&self) -> T {
        self.residual_clutter_bound
    }

    /// Original data dimension `m`.
    pub fn m(&self) -> usize {
        self.complement_rows.ncols()
    }

    /// Reduced dimension `m - r`.
    pub fn reduced_dim(&self) -> usize {
        self.complement_rows.nrows()
    }

    /// Maps a data vector into complement coordinates.
    pub fn reduce(&self, b: &DVector<T>) -> Result<DVector<T>> {
        if b.len() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} does not match m = {}",
                b.len(),
                self.m()
            )));
        }
        Ok(&self.complement_rows * b)
    }
}

/// Reduces a whitened model to complement coordinates: returns the reduced
/// model and `B b`. With `r = 0` the complement basis is the identity and
/// the problem is unchanged; `r = m` leaves no data space and is an error.
pub fn project_model<T: Scalar>(
    model: &PartitionedForwardModel<T>,
    basis: &SpotlightBasis<T>,
    b: &DVector<T>,
) -> Result<(ProjectedModel<T>, DVector<T>)> {
    if !model.is_whitened() {
        return Err(Error::InvalidArgument(
            "project_model requires a whitened model".into(),
        ));
    }
    let m = model.m();
    if basis.m() != m {
        return Err(Error::DimensionMismatch(format!(
            "basis lives in dimension {}, model in {}",
            basis.m(),
            m
        )));
    }
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "data length {} does not match m = {}",
            b.len(),
            m
        )));
    }
    let r = basis.rank();
    if r == m {
        return Err(Error::EmptyProjection(m));
    }
    let rows = if r == 0 {
        DMatrix::identity(m, m)
    } else {
        basis.complement_rows()
    };
    let b_red = &rows * b;
    let a1_reduced = model.a1().premul_dense(&rows);
    let residual_clutter_bound = if model.n2() == 0 {
        T::zero()
    } else {
        model.a2().premul_dense(&rows).norm()
    };
    Ok((
        ProjectedModel {
            complement_rows: rows,
            a1_reduced,
            residual_clutter_bound,
        },
        b_red,
    ))
}
