//! Clutter-to-noise diagnostics and truncation-rank selection.
//!
//! For a whitened model with clutter spectrum `lambda` and clutter prior
//! covariance bound `||C22||`, the ratio curve
//!
//! ```text
//! R_r = ||C22|| * sum_{j > r} lambda_j^2 / (m - r),   0 <= r < m
//! ```
//!
//! compares the expected residual clutter energy surviving a rank-`r`
//! projection against the expected energy of the projected noise. `R_0`
//! bounds the clutter signal-to-noise ratio from above: below one, the
//! clutter drowns in the noise and no projection is needed. Otherwise the
//! selected rank is the smallest `r` with `R_r < 1`, falling back to the
//! minimizer of the curve (with a warning) when no ratio drops below one,
//! which can happen when `n2 >= m`.

use nalgebra::DMatrix;

use crate::{scalar_from_usize, Error, Result, Scalar};

/// Rule for picking the truncation rank from the ratio curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Least `r` with `R_r < 1`; falls back to [`SelectionRule::Argmin`]
    /// with a warning flag when the curve never drops below one.
    SmallestBelowOne,
    /// Least `r` attaining the minimum of the curve.
    Argmin,
}

impl SelectionRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionRule::SmallestBelowOne => "smallest-below-one",
            SelectionRule::Argmin => "argmin",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smallest-below-one" => Ok(SelectionRule::SmallestBelowOne),
            "argmin" => Ok(SelectionRule::Argmin),
            other => Err(Error::Format(format!("unknown selection rule '{other}'"))),
        }
    }
}

/// Outcome of [`select_rank`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankSelection {
    pub r: usize,
    /// True when the smallest-below-one rule found no ratio below one and
    /// fell back to the curve minimizer.
    pub fallback: bool,
}

/// Ratio curve `R_r` for `r = 0 .. m-1`. Tail sums are accumulated in
/// reverse, which keeps long spectra numerically stable; spectra shorter
/// than `m` are zero-padded, so the curve vanishes beyond the clutter rank.
pub fn r_curve<T: Scalar>(lambda: &[T], c22_norm: T, m: usize) -> Vec<T> {
    let len = lambda.len();
    // tails[r] = sum_{j >= r} lambda_j^2
    let mut tails = vec![T::zero(); len + 1];
    for r in (0..len).rev() {
        tails[r] = tails[r + 1] + lambda[r] * lambda[r];
    }
    (0..m)
        .map(|r| {
            let tail = tails[r.min(len)];
            c22_norm * tail / scalar_from_usize::<T>(m - r)
        })
        .collect()
}

/// Upper bound `R_0` on the clutter signal-to-noise ratio. Below one, the
/// clutter is dominated by the additive noise and no projection is needed.
pub fn clutter_snr_bound<T: Scalar>(lambda: &[T], c22_norm: T, m: usize) -> T {
    let total = lambda.iter().fold(T::zero(), |acc, &s| acc + s * s);
    c22_norm * total / scalar_from_usize::<T>(m)
}

/// Applies the selection rule to a ratio curve. Ties in the argmin rule go
/// to the smallest rank.
pub fn select_rank<T: Scalar>(curve: &[T], rule: SelectionRule) -> RankSelection {
    assert!(!curve.is_empty(), "ratio curve must be nonempty");
    let argmin = || {
        let mut best = 0usize;
        for (r, &v) in curve.iter().enumerate() {
            if v < curve[best] {
                best = r;
            }
        }
        best
    };
    match rule {
        SelectionRule::Argmin => RankSelection {
            r: argmin(),
            fallback: false,
        },
        SelectionRule::SmallestBelowOne => {
            match curve.iter().position(|&v| v < T::one()) {
                Some(r) => RankSelection { r, fallback: false },
                None => RankSelection {
                    r: argmin(),
                    fallback: true,
                },
            }
        }
    }
}

/// Clutter covariance for the exact residual formula.
#[derive(Debug, Clone)]
pub enum ClutterCovariance<T: Scalar> {
    /// `C22 = c * I`.
    Isotropic(T),
    /// Full symmetric positive semidefinite matrix.
    Matrix(DMatrix<T>),
}

/// Exact expected squared residual clutter `E || P_r_perp A2 X2 ||^2 =
/// sum_{j > r} lambda_j^2 || C22^{1/2} v_j ||^2`, where `v_j` are the right
/// singular vectors of `A2` (columns of `v`). For isotropic `C22 = c I`
/// this collapses to `c * sum_{j > r} lambda_j^2` and `v` is not consulted.
pub fn expected_residual_clutter<T: Scalar>(
    lambda: &[T],
    v: Option<&DMatrix<T>>,
    c22: &ClutterCovariance<T>,
    r: usize,
) -> Result<T> {
    let tail_indices = r..lambda.len();
    match c22 {
        ClutterCovariance::Isotropic(c) => {
            if *c < T::zero() {
                return Err(Error::InvalidArgument(
                    "isotropic clutter variance must be nonnegative".into(),
                ));
            }
            Ok(*c
                * tail_indices
                    .map(|j| lambda[j] * lambda[j])
                    .fold(T::zero(), |a, b| a + b))
        }
        ClutterCovariance::Matrix(c) => {
            let v = v.ok_or_else(|| {
                Error::InvalidArgument(
                    "right singular vectors required for a matrix C22".into(),
                )
            })?;
            if c.nrows() != v.nrows() || !c.is_square() {
                return Err(Error::DimensionMismatch(format!(
                    "C22 is {}x{}, singular vectors live in dimension {}",
                    c.nrows(),
                    c.ncols(),
                    v.nrows()
                )));
            }
            // factorization doubles as the positive-definiteness check
            if nalgebra::Cholesky::new(c.clone()).is_none() {
                return Err(Error::Factorization(
                    "C22 is not positive definite".into(),
                ));
            }
            let mut total = T::zero();
            for j in tail_indices {
                let vj = v.column(j);
                let quad = vj.dot(&(c * vj));
                total += lambda[j] * lambda[j] * quad;
            }
            Ok(total)
        }
    }
}

/// Singular spectrum of `A2` together with the ratio curve, the
/// clutter-to-noise bound, and the selected truncation rank.
#[derive(Debug, Clone)]
pub struct TruncationAnalysis<T: Scalar> {
    lambda: Vec<T>,
    c22_norm: T,
    m: usize,
    r_curve: Vec<T>,
    csnr_bound: T,
    selection: RankSelection,
    rule: SelectionRule,
}

impl<T: Scalar> TruncationAnalysis<T> {
    pub fn analyze(lambda: Vec<T>, c22_norm: T, m: usize, rule: SelectionRule) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if lambda.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "spectrum must be nonincreasing".into(),
            ));
        }
        let r_curve = r_curve(&lambda, c22_norm, m);
        let csnr_bound = clutter_snr_bound(&lambda, c22_norm, m);
        let selection = select_rank(&r_curve, rule);
        Ok(Self {
            lambda,
            c22_norm,
            m,
            r_curve,
            csnr_bound,
            selection,
            rule,
        })
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn c22_norm(&self) -> T {
        self.c22_norm
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r_curve(&self) -> &[T] {
        &self.r_curve
    }

    /// `R_0`, the upper bound on the clutter signal-to-noise ratio.
    pub fn csnr_bound(&self) -> T {
        self.csnr_bound
    }

    pub fn selected_r(&self) -> usize {
        self.selection.r
    }

    pub fn fallback_used(&self) -> bool {
        self.selection.fallback
    }

    pub fn rule(&self) -> SelectionRule {
        self.rule
    }

    /// True when `R_0 < 1`: no projection is necessary.
    pub fn projection_unnecessary(&self) -> bool {
        self.csnr_bound < T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projector::ClutterSvd;
    use crate::rng::{standard_normal_matrix, standard_normal_vector, NormalStream};
    use approx::assert_relative_eq;

    #[test]
    fn hand_example() {
        // lambda = (2, 1), ||C22|| = 1, m = 4
        let curve = r_curve(&[2.0f64, 1.0], 1.0, 4);
        assert_eq!(curve.len(), 4);
        assert_relative_eq!(curve[0], 1.25, epsilon = 1e-15);
        assert_relative_eq!(curve[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(curve[2], 0.0, epsilon = 1e-15);
        assert_relative_eq!(curve[3], 0.0, epsilon = 1e-15);
        assert_relative_eq!(clutter_snr_bound(&[2.0f64, 1.0], 1.0, 4), 1.25, epsilon = 1e-15);
        let sel = select_rank(&curve, SelectionRule::SmallestBelowOne);
        assert_eq!(sel.r, 1);
        assert!(!sel.fallback);
    }

    #[test]
    fn zero_spectrum_gives_zero_curve() {
        let curve = r_curve(&[0.0f64, 0.0], 3.0, 5);
        assert!(curve.iter().all(|&v| v == 0.0));
        let curve = r_curve::<f64>(&[], 3.0, 5);
        assert_eq!(curve.len(), 5);
        assert!(curve.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn curve_matches_brute_force_summation() {
        let lambda: Vec<f64> = {
            let mut l: Vec<f64> = standard_normal_vector::<f64>(6, 12)
                .iter()
                .map(|x| x.abs())
                .collect();
            l.sort_by(|a, b| b.partial_cmp(a).unwrap());
            l
        };
        let m = 10;
        let c22 = 1.7;
        let curve = r_curve(&lambda, c22, m);
        for r in 0..m {
            // independent summation loop
            let mut tail = 0.0;
            for (j, &l) in lambda.iter().enumerate() {
                if j >= r {
                    tail += l * l;
                }
            }
            let expected = c22 * tail / (m - r) as f64;
            assert!((curve[r] - expected).abs() <= 1e-14 * expected.max(1.0));
        }
    }

    #[test]
    fn bound_is_zero_and_linear_in_c22() {
        let lambda = [3.0f64, 1.0, 0.5];
        assert_eq!(clutter_snr_bound(&lambda, 0.0, 7), 0.0);
        let b1 = clutter_snr_bound(&lambda, 1.0, 7);
        let b4 = clutter_snr_bound(&lambda, 4.0, 7);
        assert_relative_eq!(b4, 4.0 * b1, epsilon = 1e-15);
    }

    #[test]
    fn selection_rules() {
        // R0 < 1: no projection necessary
        let sel = select_rank(&[0.5f64, 0.2, 0.0], SelectionRule::SmallestBelowOne);
        assert_eq!(sel.r, 0);
        assert!(!sel.fallback);

        // never below one: fallback argmin with warning
        let sel = select_rank(&[3.0f64, 2.0, 1.5, 1.2], SelectionRule::SmallestBelowOne);
        assert_eq!(sel.r, 3);
        assert!(sel.fallback);

        // argmin with tie goes to the smallest rank
        let sel = select_rank(&[2.0f64, 1.0, 1.0, 3.0], SelectionRule::Argmin);
        assert_eq!(sel.r, 1);
        assert!(!sel.fallback);
    }

    #[test]
    fn smallest_below_one_matches_inequality_brute_force() {
        for seed in 0..20u64 {
            let mut lambda: Vec<f64> = standard_normal_vector::<f64>(5, seed)
                .iter()
                .map(|x| x.abs() + 0.1)
                .collect();
            lambda.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let m = 8;
            let c22 = 1.3;
            let curve = r_curve(&lambda, c22, m);
            let sel = select_rank(&curve, SelectionRule::SmallestBelowOne);
            // brute force: least r satisfying ||C22|| * tail < m - r
            let mut expected = None;
            for r in 0..m {
                let tail: f64 = lambda.iter().skip(r).map(|l| l * l).sum();
                if c22 * tail < (m - r) as f64 {
                    expected = Some(r);
                    break;
                }
            }
            if let Some(r) = expected {
                assert_eq!(sel.r, r, "seed {seed}");
                assert!(!sel.fallback);
            } else {
                assert!(sel.fallback);
            }
        }
    }

    #[test]
    fn expected_residual_identity_cases() {
        // C22 = I, lambda = (3, 2, 1), r = 1 -> 4 + 1 = 5
        let lambda = [3.0f64, 2.0, 1.0];
        let got =
            expected_residual_clutter(&lambda, None, &ClutterCovariance::Isotropic(1.0), 1)
                .unwrap();
        assert_relative_eq!(got, 5.0, epsilon = 1e-14);
        // r >= rank -> 0
        let got =
            expected_residual_clutter(&lambda, None, &ClutterCovariance::Isotropic(1.0), 3)
                .unwrap();
        assert_eq!(got, 0.0);
    }

    #[test]
    fn expected_residual_matches_monte_carlo() {
        // random 6x4 A2 with a random SPD C22; Monte-Carlo over draws of X2
        let a2 = standard_normal_matrix::<f64>(6, 4, 77);
        let g = standard_normal_matrix::<f64>(4, 4, 78);
        let c22 = &g * g.transpose() + DMatrix::identity(4, 4) * 0.2;
        let chol = nalgebra::Cholesky::new(c22.clone()).unwrap();
        let l = chol.l();

        let svd = ClutterSvd::compute(&crate::matrix::Matrix::Dense(a2.clone())).unwrap();
        let lambda: Vec<f64> = svd.spectrum().iter().cloned().collect();
        let v_t = svd.v_t().unwrap();
        let v = v_t.transpose();

        let r = 2usize;
        let exact =
            expected_residual_clutter(&lambda, Some(&v), &ClutterCovariance::Matrix(c22), r)
                .unwrap();

        let basis = svd.truncated_basis(r).unwrap();
        let n = 100_000usize;
        let mut stream = NormalStream::new(4242);
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for _ in 0..n {
            let z: nalgebra::DVector<f64> = stream.vector(4);
            let x2 = &l * z;
            let y = basis.apply_p_perp(&(&a2 * x2)).unwrap();
            let s = y.norm_squared();
            sum += s;
            sum_sq += s * s;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "MC {mean} vs exact {exact} (se {se})"
        );
    }

    #[test]
    fn exact_residual_below_bound_for_random_spd() {
        for seed in 0..10u64 {
            let a2 = standard_normal_matrix::<f64>(7, 5, 200 + seed);
            let g = standard_normal_matrix::<f64>(5, 5, 300 + seed);
            let c22 = &g * g.transpose() + DMatrix::identity(5, 5) * 0.1;
            let c22_norm = crate::model::spd_spectral_norm(&c22);
            let svd = ClutterSvd::compute(&crate::matrix::Matrix::Dense(a2)).unwrap();
            let lambda: Vec<f64> = svd.spectrum().iter().cloned().collect();
            let v = svd.v_t().unwrap().transpose();
            for r in 0..=5 {
                let exact = expected_residual_clutter(
                    &lambda,
                    Some(&v),
                    &ClutterCovariance::Matrix(c22.clone()),
                    r,
                )
                .unwrap();
                let tail: f64 = lambda.iter().skip(r).map(|l| l * l).sum();
                assert!(
                    exact <= c22_norm * tail * (1.0 + 1e-12),
                    "seed {seed} r {r}: {exact} > {}",
                    c22_norm * tail
                );
            }
        }
    }

    #[test]
    fn analysis_assembles_consistently() {
        let analysis =
            TruncationAnalysis::analyze(vec![2.0f64, 1.0], 1.0, 4, SelectionRule::SmallestBelowOne)
                .unwrap();
        assert_eq!(analysis.selected_r(), 1);
        assert!(!analysis.fallback_used());
        assert!(!analysis.projection_unnecessary());
        assert_relative_eq!(analysis.csnr_bound(), 1.25, epsilon = 1e-15);
        assert!(TruncationAnalysis::analyze(vec![1.0f64, 2.0], 1.0, 4, SelectionRule::Argmin)
            .is_err());
    }
}
