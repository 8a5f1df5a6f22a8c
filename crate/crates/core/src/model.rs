//! Partitioned linear forward models `b = A1 x1 + A2 x2 + noise`.
//!
//! The columns of interest (the "spotlight") form `A1`; the remaining
//! columns form the clutter block `A2`. The permutation that produced the
//! split is stored inside the model so full-domain solutions can always be
//! mapped back to the original column order.

use nalgebra::{DMatrix, DVector};

use crate::matrix::Matrix;
use crate::{scalar, Error, Result, Scalar};

/// Record of how the original columns were split into spotlight and clutter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    spotlight: Vec<usize>,
    clutter: Vec<usize>,
}

impl Partition {
    /// Validates the spotlight index set against a domain of size `n`; the
    /// clutter indices are the remaining ones in their original order.
    pub fn new(n: usize, spotlight_indices: &[usize]) -> Result<Self> {
        let mut seen = vec![false; n];
        for &idx in spotlight_indices {
            if idx >= n {
                return Err(Error::InvalidPartition(format!(
                    "index {idx} out of range for {n} columns"
                )));
            }
            if seen[idx] {
                return Err(Error::InvalidPartition(format!("duplicate index {idx}")));
            }
            seen[idx] = true;
        }
        let clutter = (0..n).filter(|&j| !seen[j]).collect();
        Ok(Self {
            spotlight: spotlight_indices.to_vec(),
            clutter,
        })
    }

    /// Identity layout: the first `n1` columns are the spotlight.
    pub fn identity(n1: usize, n2: usize) -> Self {
        Self {
            spotlight: (0..n1).collect(),
            clutter: (n1..n1 + n2).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.spotlight.len() + self.clutter.len()
    }

    pub fn n1(&self) -> usize {
        self.spotlight.len()
    }

    pub fn n2(&self) -> usize {
        self.clutter.len()
    }

    pub fn spotlight(&self) -> &[usize] {
        &self.spotlight
    }

    pub fn clutter(&self) -> &[usize] {
        &self.clutter
    }

    /// Maps `(x1, x2)` back to a full vector in the original column order.
    pub fn scatter<T: Scalar>(&self, x1: &DVector<T>, x2: &DVector<T>) -> Result<DVector<T>> {
        if x1.len() != self.n1() || x2.len() != self.n2() {
            return Err(Error::DimensionMismatch(format!(
                "scatter expects ({}, {}), got ({}, {})",
                self.n1(),
                self.n2(),
                x1.len(),
                x2.len()
            )));
        }
        let mut full = DVector::zeros(self.n());
        for (k, &idx) in self.spotlight.iter().enumerate() {
            full[idx] = x1[k];
        }
        for (k, &idx) in self.clutter.iter().enumerate() {
            full[idx] = x2[k];
        }
        Ok(full)
    }

    /// Splits a full vector in original column order into `(x1, x2)`.
    pub fn split<T: Scalar>(&self, x: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "split expects length {}, got {}",
                self.n(),
                x.len()
            )));
        }
        let x1 = DVector::from_fn(self.n1(), |k, _| x[self.spotlight[k]]);
        let x2 = DVector::from_fn(self.n2(), |k, _| x[self.clutter[k]]);
        Ok((x1, x2))
    }
}

/// Partitioned forward model with its noise level and whitening state.
#[derive(Debug, Clone)]
pub struct PartitionedForwardModel<T: Scalar> {
    a1: Matrix<T>,
    a2: Matrix<T>,
    noise_std: T,
    whitened: bool,
    partition: Partition,
}

impl<T: Scalar> PartitionedForwardModel<T> {
    /// Builds a model whose blocks are already split, with the identity
    /// partition record.
    pub fn new(a1: Matrix<T>, a2: Matrix<T>, noise_std: T) -> Result<Self> {
        let partition = Partition::identity(a1.ncols(), a2.ncols());
        Self::with_partition(a1, a2, noise_std, partition)
    }

    pub fn with_partition(
        a1: Matrix<T>,
        a2: Matrix<T>,
        noise_std: T,
        partition: Partition,
    ) -> Result<Self> {
        if a1.nrows() != a2.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "A1 has {} rows, A2 has {}",
                a1.nrows(),
                a2.nrows()
            )));
        }
        if a1.nrows() == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if a1.ncols() == 0 {
            return Err(Error::InvalidArgument("n1 must be at least 1".into()));
        }
        if !(noise_std > T::zero()) {
            return Err(Error::InvalidArgument("noise_std must be positive".into()));
        }
        if partition.n1() != a1.ncols() || partition.n2() != a2.ncols() {
            return Err(Error::InvalidPartition(
                "partition sizes disagree with matrix blocks".into(),
            ));
        }
        Ok(Self {
            a1,
            a2,
            noise_std,
            whitened: false,
            partition,
        })
    }

    pub fn m(&self) -> usize {
        self.a1.nrows()
    }

    pub fn n1(&self) -> usize {
        self.a1.ncols()
    }

    pub fn n2(&self) -> usize {
        self.a2.ncols()
    }

    pub fn n(&self) -> usize {
        self.n1() + self.n2()
    }

    pub fn a1(&self) -> &Matrix<T> {
        &self.a1
    }

    pub fn a2(&self) -> &Matrix<T> {
        &self.a2
    }

    pub fn noise_std(&self) -> T {
        self.noise_std
    }

    pub fn is_whitened(&self) -> bool {
        self.whitened
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Noiseless forward map `A1 x1 + A2 x2`.
    pub fn apply(&self, x1: &DVector<T>, x2: &DVector<T>) -> Result<DVector<T>> {
        if x1.len() != self.n1() || x2.len() != self.n2() {
            return Err(Error::DimensionMismatch(format!(
                "apply expects ({}, {}), got ({}, {})",
                self.n1(),
                self.n2(),
                x1.len(),
                x2.len()
            )));
        }
        let mut y = self.a1.matvec(x1);
        if self.n2() > 0 {
            y += self.a2.matvec(x2);
        }
        Ok(y)
    }
}

/// Splits the columns of `A` into a spotlight block (the given indices, in
/// the given order) and a clutter block (the remaining columns, original
/// order), retaining the permutation inside the model.
pub fn partition_model<T: Scalar>(
    a: &Matrix<T>,
    spotlight_indices: &[usize],
    noise_std: T,
) -> Result<PartitionedForwardModel<T>> {
    let partition = Partition::new(a.ncols(), spotlight_indices)?;
    if partition.n1() == 0 {
        return Err(Error::InvalidPartition("spotlight set is empty".into()));
    }
    let a1 = a.select_columns(partition.spotlight());
    let a2 = a.select_columns(partition.clutter());
    PartitionedForwardModel::with_partition(a1, a2, noise_std, partition)
}

/// Rescales the model and data by `1/noise_std` so the additive noise has
/// unit standard deviation. Rejects a second application.
pub fn whiten<T: Scalar>(
    model: PartitionedForwardModel<T>,
    b: &DVector<T>,
) -> Result<(PartitionedForwardModel<T>, DVector<T>)> {
    if model.whitened {
        return Err(Error::InvalidArgument(
            "model is already whitened".into(),
        ));
    }
    if b.len() != model.m() {
        return Err(Error::DimensionMismatch(format!(
            "data length {} does not match m = {}",
            b.len(),
            model.m()
        )));
    }
    let inv = T::one() / model.noise_std;
    let whitened = PartitionedForwardModel {
        a1: model.a1.scaled(inv),
        a2: model.a2.scaled(inv),
        noise_std: T::one(),
        whitened: true,
        partition: model.partition,
    };
    Ok((whitened, b * inv))
}

/// Draws `b = A1 x1 + A2 x2 + noise_std * w` with `w` standard normal and
/// fully determined by `seed` (see [`crate::rng`]).
pub fn simulate_data<T: Scalar>(
    model: &PartitionedForwardModel<T>,
    x1_true: &DVector<T>,
    x2_true: &DVector<T>,
    seed: u64,
) -> Result<DVector<T>> {
    let mut b = model.apply(x1_true, x2_true)?;
    let w = crate::rng::standard_normal_vector::<T>(model.m(), seed);
    b.axpy(model.noise_std, &w, T::one());
    Ok(b)
}

/// Gaussian prior for the partitioned unknown: explicit covariance blocks or
/// the isotropic shorthand used by the tomography experiment.
#[derive(Debug, Clone)]
pub enum GaussianPriorSpec<T: Scalar> {
    /// Block covariance; `C21` is implicitly `C12^T`.
    Blocks {
        c11: DMatrix<T>,
        c12: DMatrix<T>,
        c22: DMatrix<T>,
    },
    /// `C11 = zeta^2 I`, `C12 = 0`, and `C22 = zeta^2 I` (or `alpha^-2 I`
    /// when `alpha` is set, widening the clutter prior).
    Isotropic { zeta: T, alpha: Option<T> },
}

/// Expanded covariance blocks of a [`GaussianPriorSpec`].
#[derive(Debug, Clone)]
pub struct PriorBlocks<T: Scalar> {
    pub c11: DMatrix<T>,
    pub c12: DMatrix<T>,
    pub c22: DMatrix<T>,
}

impl<T: Scalar> GaussianPriorSpec<T> {
    pub fn isotropic(zeta: T) -> Result<Self> {
        if !(zeta > T::zero()) {
            return Err(Error::InvalidArgument("zeta must be positive".into()));
        }
        Ok(GaussianPriorSpec::Isotropic { zeta, alpha: None })
    }

    pub fn isotropic_with_alpha(zeta: T, alpha: T) -> Result<Self> {
        if !(zeta > T::zero()) || !(alpha > T::zero()) {
            return Err(Error::InvalidArgument(
                "zeta and alpha must be positive".into(),
            ));
        }
        Ok(GaussianPriorSpec::Isotropic {
            zeta,
            alpha: Some(alpha),
        })
    }

    /// Validates shapes and positive definiteness (via a Cholesky
    /// factorization of the assembled covariance).
    pub fn blocks(c11: DMatrix<T>, c12: DMatrix<T>, c22: DMatrix<T>) -> Result<Self> {
        let n1 = c11.nrows();
        let n2 = c22.nrows();
        if !c11.is_square() || !c22.is_square() || c12.nrows() != n1 || c12.ncols() != n2 {
            return Err(Error::DimensionMismatch(
                "prior blocks have inconsistent shapes".into(),
            ));
        }
        let spec = GaussianPriorSpec::Blocks { c11, c12, c22 };
        let full = spec.assemble(n1, n2)?;
        if nalgebra::Cholesky::new(full).is_none() {
            return Err(Error::Factorization(
                "prior covariance is not positive definite".into(),
            ));
        }
        Ok(spec)
    }

    /// Expands to explicit blocks for the given partition sizes.
    pub fn to_blocks(&self, n1: usize, n2: usize) -> Result<PriorBlocks<T>> {
        match self {
            GaussianPriorSpec::Blocks { c11, c12, c22 } => {
                if c11.nrows() != n1 || c22.nrows() != n2 {
                    return Err(Error::DimensionMismatch(format!(
                        "prior blocks sized ({}, {}), model needs ({n1}, {n2})",
                        c11.nrows(),
                        c22.nrows()
                    )));
                }
                Ok(PriorBlocks {
                    c11: c11.clone(),
                    c12: c12.clone(),
                    c22: c22.clone(),
                })
            }
            GaussianPriorSpec::Isotropic { zeta, alpha } => {
                let z2 = *zeta * *zeta;
                let c22_scale = match alpha {
                    Some(a) => T::one() / (*a * *a),
                    None => z2,
                };
                Ok(PriorBlocks {
                    c11: DMatrix::identity(n1, n1) * z2,
                    c12: DMatrix::zeros(n1, n2),
                    c22: DMatrix::identity(n2, n2) * c22_scale,
                })
            }
        }
    }

    /// Variance scalar of the clutter block for isotropic priors.
    pub fn c22_isotropic_scale(&self) -> Option<T> {
        match self {
            GaussianPriorSpec::Isotropic { zeta, alpha } => Some(match alpha {
                Some(a) => T::one() / (*a * *a),
                None => *zeta * *zeta,
            }),
            GaussianPriorSpec::Blocks { .. } => None,
        }
    }

    /// Spectral norm of `C22`: exact for isotropic priors, largest
    /// eigenvalue otherwise.
    pub fn c22_spectral_norm(&self, n2: usize) -> Result<T> {
        if n2 == 0 {
            return Ok(T::zero());
        }
        match self {
            GaussianPriorSpec::Isotropic { .. } => Ok(self.c22_isotropic_scale().unwrap()),
            GaussianPriorSpec::Blocks { c22, .. } => {
                if c22.nrows() != n2 {
                    return Err(Error::DimensionMismatch(format!(
                        "C22 is {}x{}, expected {n2}x{n2}",
                        c22.nrows(),
                        c22.ncols()
                    )));
                }
                Ok(spd_spectral_norm(c22))
            }
        }
    }

    fn assemble(&self, n1: usize, n2: usize) -> Result<DMatrix<T>> {
        let b = self.to_blocks(n1, n2)?;
        let n = n1 + n2;
        let mut c = DMatrix::zeros(n, n);
        c.view_mut((0, 0), (n1, n1)).copy_from(&b.c11);
        c.view_mut((0, n1), (n1, n2)).copy_from(&b.c12);
        c.view_mut((n1, 0), (n2, n1)).copy_from(&b.c12.transpose());
        c.view_mut((n1, n1), (n2, n2)).copy_from(&b.c22);
        Ok(c)
    }

    /// Full covariance in partition order (spotlight block first).
    pub fn full_covariance(&self, n1: usize, n2: usize) -> Result<DMatrix<T>> {
        self.assemble(n1, n2)
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix: exact
/// eigendecomposition for small sizes, power iteration above that (only a
/// scalar bound is needed).
pub(crate) fn spd_spectral_norm<T: Scalar>(c: &DMatrix<T>) -> T {
    let n = c.nrows();
    if n == 0 {
        return T::zero();
    }
    if n <= 256 {
        let eig = c.clone().symmetric_eigen();
        return eig
            .eigenvalues
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()));
    }
    let mut v = DVector::from_element(n, T::one() / scalar_sqrt_usize::<T>(n));
    let mut lambda = T::zero();
    for _ in 0..500 {
        let w = c * &v;
        let norm = w.norm();
        if norm == T::zero() {
            return T::zero();
        }
        let next = w / norm;
        let new_lambda = (c * &next).dot(&next);
        let done = (new_lambda - lambda).abs() <= scalar::<T>(1e-12) * new_lambda.abs();
        v = next;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    lambda.abs()
}

fn scalar_sqrt_usize<T: Scalar>(n: usize) -> T {
    crate::scalar_from_usize::<T>(n).sqrt()
}
