//! Dense complex matrix kernel, the state-weighted inner product and
//! subspace algebra on spaces of `d x d` operators.
//!
//! Operators are vectorized by column stacking: `vec(A X B) = (B^T ⊗ A) vec(X)`.
//! A subspace of operators is stored as an explicit orthonormal basis together
//! with the coordinate matrix of that basis in an isometric coordinate system
//! (`vec(x)` for Hilbert-Schmidt, `vec(x ρ^{1/2})` for the state inner product),
//! so all span computations reduce to standard Euclidean linear algebra.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Numerical thresholds shared by every computation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    /// Relative equality threshold.
    pub eq_tol: f64,
    /// Singular-value ratio below which a direction is considered absent.
    pub rank_gap: f64,
    /// Cap on operator-limit iterations.
    pub iter_max: usize,
    /// Stopping threshold for iterations.
    pub conv_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            eq_tol: 1e-9,
            rank_gap: 1e-7,
            iter_max: 10_000,
            conv_tol: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.eq_tol) || !positive(self.rank_gap) || !positive(self.conv_tol) {
            return Err(Error::InvalidTolerance(
                "all thresholds must be finite and strictly positive".into(),
            ));
        }
        if self.iter_max == 0 {
            return Err(Error::InvalidTolerance("iter_max must be positive".into()));
        }
        if self.eq_tol <= self.conv_tol {
            return Err(Error::InvalidTolerance(format!(
                "eq_tol ({}) must exceed conv_tol ({})",
                self.eq_tol, self.conv_tol
            )));
        }
        Ok(())
    }
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// `E_ij`: one in row `i`, column `j`.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    m[(i, j)] = re(1.0);
    m
}

/// All `d^2` matrix units in column-stacking order, so that `vec(E_ij)` is the
/// standard basis vector with index `j * d + i`.
pub fn matrix_units(d: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            out.push(matrix_unit(d, i, j));
        }
    }
    out
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)])
}

pub fn diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(values.len(), values.iter().map(|&v| re(v))))
}

/// Column-stacking vectorization.
pub fn vectorize(x: &CMat) -> CVec {
    CVec::from_column_slice(x.as_slice())
}

pub fn unvectorize(v: &CVec, d: usize) -> CMat {
    CMat::from_column_slice(d, d, v.as_slice())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Superoperator of `x -> A x B`.
pub fn sandwich_superop(a: &CMat, b: &CMat) -> CMat {
    kron(&b.transpose(), a)
}

/// Superoperator of `x -> A x`.
pub fn left_superop(a: &CMat) -> CMat {
    kron(&identity(a.nrows()), a)
}

/// Superoperator of `x -> x B`.
pub fn right_superop(b: &CMat) -> CMat {
    kron(&b.transpose(), &identity(b.nrows()))
}

/// Applies a `d^2 x d^2` superoperator to a `d x d` matrix.
pub fn apply_superop(s: &CMat, x: &CMat) -> CMat {
    unvectorize(&(s * vectorize(x)), x.nrows())
}

/// Matrix of a linear map `M_{d_in} -> M_{d_out}` given pointwise.
pub fn superop_from_fn(d_in: usize, d_out: usize, f: impl Fn(&CMat) -> CMat) -> CMat {
    let mut s = CMat::zeros(d_out * d_out, d_in * d_in);
    for j in 0..d_in {
        for i in 0..d_in {
            let image = f(&matrix_unit(d_in, i, j));
            s.set_column(j * d_in + i, &vectorize(&image));
        }
    }
    s
}

/// Applies a rectangular superoperator, returning a `d_out x d_out` matrix.
pub fn apply_map(s: &CMat, x: &CMat) -> CMat {
    let d_out = (s.nrows() as f64).sqrt().round() as usize;
    unvectorize(&(s * vectorize(x)), d_out)
}

pub fn is_finite(x: &CMat) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn trace(x: &CMat) -> C64 {
    x.trace()
}

pub fn hermitian_part(x: &CMat) -> CMat {
    (x + x.adjoint()) * re(0.5)
}

/// Largest singular value.
pub fn op_norm(x: &CMat) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    if !is_finite(x) {
        return f64::NAN;
    }
    x.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of `x`.
pub fn hermitian_eigen(x: &CMat) -> (Vec<f64>, CMat) {
    let n = x.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(x));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// `f(x)` for Hermitian `x`, via the spectral theorem.
pub fn hermitian_fn(x: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (values, vectors) = hermitian_eigen(x);
    let fd = CMat::from_diagonal(&CVec::from_iterator(
        values.len(),
        values.iter().map(|&v| f(v)),
    ));
    &vectors * fd * vectors.adjoint()
}

pub fn min_hermitian_eigenvalue(x: &CMat) -> f64 {
    hermitian_eigen(x).0.first().copied().unwrap_or(0.0)
}

/// Eigenvalues of a general square matrix from its complex Schur form.
pub fn eigenvalues(x: &CMat) -> Vec<C64> {
    let n = x.nrows();
    if n == 0 {
        return Vec::new();
    }
    // Deflation at machine epsilon can stall on nearly defective spectra;
    // loosen it step by step with a bounded iteration budget.
    for eps in [f64::EPSILON, 1e-15, 1e-14, 1e-13, 1e-12] {
        if let Some(schur) = Schur::try_new(x.clone(), eps, 500 * n) {
            let (_, t) = schur.unpack();
            return (0..n).map(|i| t[(i, i)]).collect();
        }
    }
    let (_, t) = Schur::try_new(x.clone(), 1e-11, 0)
        .expect("unbounded Schur iteration")
        .unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Singular values in descending order with the matching right singular
/// vectors as columns (full set, `ncols` of them).
fn svd_full_right(a: &CMat) -> (Vec<f64>, CMat) {
    let (n, m) = a.shape();
    let padded = if n < m {
        let mut p = CMat::zeros(m, m);
        p.view_mut((0, 0), (n, m)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = CMat::zeros(m, m);
    for (col, &i) in order.iter().enumerate() {
        v.set_column(col, &v_t.row(i).adjoint());
    }
    (values, v)
}

/// Orthonormal basis (as columns) of `{v : |A v| ≈ 0}`, keeping right singular
/// vectors whose singular value is at most `threshold`.
pub fn nullspace(a: &CMat, threshold: f64) -> CMat {
    let m = a.ncols();
    if m == 0 {
        return CMat::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return CMat::identity(m, m);
    }
    let (values, v) = svd_full_right(a);
    let keep: Vec<usize> = (0..m).filter(|&i| values[i] <= threshold).collect();
    select_columns(&v, &keep)
}

/// Nullspace with a threshold relative to the largest singular value.
pub fn nullspace_rel(a: &CMat, rank_gap: f64) -> CMat {
    let m = a.ncols();
    if a.nrows() == 0 || m == 0 {
        return CMat::identity(m, m);
    }
    let (values, v) = svd_full_right(a);
    let smax = values.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..m).filter(|&i| values[i] <= rank_gap * smax).collect();
    select_columns(&v, &keep)
}

/// Orthonormal basis (as columns) of the column space of `a`, dropping
/// directions with singular value below `rank_gap` times the largest.
pub fn range_basis(a: &CMat, rank_gap: f64) -> CMat {
    let (n, m) = a.shape();
    if m == 0 || n == 0 {
        return CMat::zeros(n, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return CMat::zeros(n, 0);
    }
    let mut keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rank_gap * smax)
        .collect();
    keep.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    select_columns(&u, &keep)
}

pub fn select_columns(a: &CMat, cols: &[usize]) -> CMat {
    let mut out = CMat::zeros(a.nrows(), cols.len());
    for (k, &j) in cols.iter().enumerate() {
        out.set_column(k, &a.column(j));
    }
    out
}

pub fn hstack(blocks: &[CMat], nrows: usize) -> CMat {
    let ncols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(nrows, ncols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (nrows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[CMat], ncols: usize) -> CMat {
    let nrows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(nrows, ncols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), (b.nrows(), ncols)).copy_from(b);
        at += b.nrows();
    }
    out
}

/// `trace(ρ · x† · y)`: the state pairing `φ(x* y)`.
pub fn phi_inner(x: &CMat, y: &CMat, rho: &CMat, tol: &Tolerance) -> Result<C64> {
    let d = rho.nrows();
    for m in [x, y] {
        if m.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.nrows(),
            });
        }
    }
    check_positive_definite(rho, tol)?;
    Ok((rho * x.adjoint() * y).trace())
}

fn check_positive_definite(rho: &CMat, tol: &Tolerance) -> Result<()> {
    let (values, _) = hermitian_eigen(rho);
    let max = values.last().copied().unwrap_or(0.0);
    let min = values.first().copied().unwrap_or(0.0);
    if max <= 0.0 || min <= tol.rank_gap * max {
        return Err(Error::NotFaithful {
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    Ok(())
}

/// Which inner product an operator subspace is orthonormal for.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerProduct {
    /// `trace(x† y)`.
    HilbertSchmidt,
    /// `trace(ρ x† y)` for a faithful density matrix `ρ`.
    State { sqrt_rho: CMat, inv_sqrt_rho: CMat },
}

impl InnerProduct {
    pub fn state(rho: &CMat, tol: &Tolerance) -> Result<Self> {
        check_positive_definite(rho, tol)?;
        Ok(Self::State {
            sqrt_rho: hermitian_fn(rho, |v| re(v.sqrt())),
            inv_sqrt_rho: hermitian_fn(rho, |v| re(1.0 / v.sqrt())),
        })
    }

    /// Coordinates in an orthonormal frame of the inner product.
    pub fn coords(&self, x: &CMat) -> CVec {
        match self {
            Self::HilbertSchmidt => vectorize(x),
            Self::State { sqrt_rho, .. } => vectorize(&(x * sqrt_rho)),
        }
    }

    pub fn from_coords(&self, v: &CVec, d: usize) -> CMat {
        match self {
            Self::HilbertSchmidt => unvectorize(v, d),
            Self::State { inv_sqrt_rho, .. } => unvectorize(v, d) * inv_sqrt_rho,
        }
    }

    pub fn inner(&self, x: &CMat, y: &CMat) -> C64 {
        self.coords(x).dotc(&self.coords(y))
    }

    pub fn norm(&self, x: &CMat) -> f64 {
        self.coords(x).norm()
    }
}

/// A linear subspace of `M_d` with an orthonormal basis.
#[derive(Debug, Clone)]
pub struct OperatorSubspace {
    ambient_dim: usize,
    basis: Vec<CMat>,
    coords: CMat,
    inner: InnerProduct,
}

impl OperatorSubspace {
    pub fn zero(d: usize, inner: InnerProduct) -> Self {
        Self {
            ambient_dim: d,
            basis: Vec::new(),
            coords: CMat::zeros(d * d, 0),
            inner,
        }
    }

    pub fn full(d: usize, inner: InnerProduct) -> Self {
        Self::from_coords(d, inner, CMat::identity(d * d, d * d))
    }

    /// Builds the subspace spanned by orthonormal coordinate columns.
    pub fn from_coords(d: usize, inner: InnerProduct, coords: CMat) -> Self {
        assert_eq!(coords.nrows(), d * d);
        let basis = (0..coords.ncols())
            .map(|j| inner.from_coords(&coords.column(j).into_owned(), d))
            .collect();
        Self {
            ambient_dim: d,
            basis,
            coords,
            inner,
        }
    }

    /// Rank-revealing orthonormalization of `vectors` for `inner`.
    pub fn span(d: usize, vectors: &[CMat], inner: InnerProduct, tol: &Tolerance) -> Result<Self> {
        if vectors.is_empty() {
            return Ok(Self::zero(d, inner));
        }
        let mut raw = CMat::zeros(d * d, vectors.len());
        for (j, v) in vectors.iter().enumerate() {
            if v.shape() != (d, d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.nrows(),
                });
            }
            if !is_finite(v) {
                return Err(Error::NonFinite);
            }
            raw.set_column(j, &inner.coords(v));
        }
        let q = range_basis(&raw, tol.rank_gap);
        Ok(Self::from_coords(d, inner, q))
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    /// Orthonormal coordinate columns (`d^2 x dim`).
    pub fn coords(&self) -> &CMat {
        &self.coords
    }

    pub fn inner_product(&self) -> &InnerProduct {
        &self.inner
    }

    pub fn gram(&self) -> CMat {
        self.coords.adjoint() * &self.coords
    }

    /// Orthogonal projector in coordinates.
    pub fn projector(&self) -> CMat {
        &self.coords * self.coords.adjoint()
    }

    /// Orthogonal projection of `x` onto the subspace.
    pub fn project(&self, x: &CMat) -> CMat {
        let v = self.inner.coords(x);
        let p = &self.coords * (self.coords.adjoint() * v);
        self.inner.from_coords(&p, self.ambient_dim)
    }

    /// Norm of the component of `x` outside the subspace.
    pub fn residual(&self, x: &CMat) -> f64 {
        let v = self.inner.coords(x);
        let p = &self.coords * (self.coords.adjoint() * &v);
        (v - p).norm()
    }

    /// Residual of `x` relative to `max(1, |x|)`.
    pub fn relative_residual(&self, x: &CMat) -> f64 {
        self.residual(x) / self.inner.norm(x).max(1.0)
    }

    pub fn contains(&self, x: &CMat, tol: &Tolerance) -> bool {
        self.relative_residual(x) <= tol.eq_tol
    }

    /// Largest residual of `other`'s basis vectors outside `self`.
    pub fn containment_residual(&self, other: &OperatorSubspace) -> f64 {
        other
            .basis
            .iter()
            .map(|b| self.relative_residual(b))
            .fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &OperatorSubspace) -> Result<()> {
        if self.ambient_dim != other.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: other.ambient_dim,
            });
        }
        if self.inner != other.inner {
            return Err(Error::PreconditionViolated(
                "subspaces carry different inner products".into(),
            ));
        }
        Ok(())
    }

    /// Intersection via principal angles: directions of `self` whose sine of
    /// the angle to `other` is at most `rank_gap`.
    pub fn intersect(&self, other: &OperatorSubspace, tol: &Tolerance) -> Result<Self> {
        self.check_compatible(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.ambient_dim, self.inner.clone()));
        }
        let n = self.coords.nrows();
        let outside = (CMat::identity(n, n) - other.projector()) * &self.coords;
        let null = nullspace(&outside, tol.rank_gap);
        let q = &self.coords * null;
        let q = range_basis(&q, tol.rank_gap);
        Ok(Self::from_coords(self.ambient_dim, self.inner.clone(), q))
    }

    /// Orthogonal complement for the same inner product.
    pub fn complement(&self) -> Self {
        let n = self.ambient_dim * self.ambient_dim;
        if self.is_zero() {
            return Self::full(self.ambient_dim, self.inner.clone());
        }
        let q = nullspace(&self.coords.adjoint(), 0.5);
        let q = if q.ncols() + self.dim() != n {
            // Fallback through the projector when the padded SVD misbehaves.
            let (values, vectors) = hermitian_eigen(&(CMat::identity(n, n) - self.projector()));
            let keep: Vec<usize> = (0..n).filter(|&i| values[i] > 0.5).collect();
            select_columns(&vectors, &keep)
        } else {
            q
        };
        Self::from_coords(self.ambient_dim, self.inner.clone(), q)
    }

    /// Spectral norm of the difference of orthogonal projectors.
    pub fn distance(&self, other: &OperatorSubspace) -> f64 {
        op_norm(&(self.projector() - other.projector()))
    }

    /// Same span, re-orthonormalized for another inner product.
    pub fn with_inner(&self, inner: InnerProduct, tol: &Tolerance) -> Result<Self> {
        Self::span(self.ambient_dim, &self.basis, inner, tol)
    }

    /// Span of the images of the basis under `f`.
    pub fn image(&self, f: impl Fn(&CMat) -> CMat, tol: &Tolerance) -> Result<Self> {
        let images: Vec<CMat> = self.basis.iter().map(f).collect();
        Self::span(self.ambient_dim, &images, self.inner.clone(), tol)
    }
}

/// Orthonormalizes `vectors` for the state inner product of `rho`.
pub fn orthonormalize(vectors: &[CMat], rho: &CMat, tol: &Tolerance) -> Result<OperatorSubspace> {
    let inner = InnerProduct::state(rho, tol)?;
    OperatorSubspace::span(rho.nrows(), vectors, inner, tol)
}

pub fn subspace_intersect(
    a: &OperatorSubspace,
    b: &OperatorSubspace,
    tol: &Tolerance,
) -> Result<OperatorSubspace> {
    a.intersect(b, tol)
}

/// `{X : XB = BX for all B in set}`, Hilbert-Schmidt orthonormal.
pub fn commutant(set: &[CMat], d: usize, tol: &Tolerance) -> Result<OperatorSubspace> {
    let inner = InnerProduct::HilbertSchmidt;
    if set.is_empty() {
        return Ok(OperatorSubspace::full(d, inner));
    }
    let id = identity(d);
    let mut blocks = Vec::with_capacity(set.len());
    for b in set {
        if b.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: b.nrows(),
            });
        }
        blocks.push(kron(&b.transpose(), &id) - kron(&id, b));
    }
    let stacked = vstack(&blocks, d * d);
    let null = nullspace_rel(&stacked, tol.rank_gap);
    Ok(OperatorSubspace::from_coords(d, inner, null))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn tolerance_rules() {
        assert!(Tolerance::default().validate().is_ok());
        let bad = Tolerance {
            eq_tol: 1e-13,
            ..Tolerance::default()
        };
        assert!(bad.validate().is_err());
        let neg = Tolerance {
            rank_gap: -1.0,
            ..Tolerance::default()
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn vectorization_is_column_stacking() {
        let a = CMat::from_row_slice(2, 2, &[re(1.0), re(2.0), re(3.0), re(4.0)]);
        let b = CMat::from_row_slice(2, 2, &[c(0.0, 1.0), re(-1.0), re(0.5), re(2.0)]);
        let x = CMat::from_row_slice(2, 2, &[re(0.3), c(1.0, 1.0), re(-2.0), re(0.1)]);
        let direct = &a * &x * &b;
        let via = apply_superop(&sandwich_superop(&a, &b), &x);
        assert!((direct - via).norm() < 1e-14);
        assert_eq!(vectorize(&matrix_unit(2, 1, 0))[1], re(1.0));
    }

    #[test]
    fn phi_inner_examples() {
        let rho = diag(&[0.6, 0.4]);
        let t = tol();
        let i2 = identity(2);
        assert!((phi_inner(&i2, &i2, &rho, &t).unwrap() - re(1.0)).norm() < 1e-15);
        let e01 = matrix_unit(2, 0, 1);
        let e10 = matrix_unit(2, 1, 0);
        assert!((phi_inner(&e01, &e01, &rho, &t).unwrap() - re(0.4)).norm() < 1e-15);
        assert!(phi_inner(&e01, &e10, &rho, &t).unwrap().norm() < 1e-15);
    }

    #[test]
    fn phi_inner_rejects_bad_input() {
        let t = tol();
        let rho = diag(&[1.0, 0.0]);
        let i2 = identity(2);
        assert!(matches!(
            phi_inner(&i2, &i2, &rho, &t),
            Err(Error::NotFaithful { .. })
        ));
        let rho = diag(&[0.5, 0.5]);
        assert!(matches!(
            phi_inner(&identity(3), &i2, &rho, &t),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn orthonormalize_examples() {
        let t = tol();
        let rho = diag(&[0.6, 0.4]);
        let i2 = identity(2);
        let s = orthonormalize(&[i2.clone(), &i2 * re(2.0)], &rho, &t).unwrap();
        assert_eq!(s.dim(), 1);
        let s = orthonormalize(&matrix_units(2), &rho, &t).unwrap();
        assert_eq!(s.dim(), 4);
        assert!((s.gram() - CMat::identity(4, 4)).norm() < 1e-12);
        let e00 = matrix_unit(2, 0, 0);
        let near = &e00 + matrix_unit(2, 0, 1) * re(1e-15);
        assert_eq!(orthonormalize(&[e00, near], &rho, &t).unwrap().dim(), 1);
        assert_eq!(orthonormalize(&[], &rho, &t).unwrap().dim(), 0);
        let mut nan = identity(2);
        nan[(0, 0)] = re(f64::NAN);
        assert_eq!(orthonormalize(&[nan], &rho, &t).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn basis_is_orthonormal_for_state_inner_product() {
        let t = tol();
        let rho = diag(&[0.7, 0.2, 0.1]);
        let s = orthonormalize(&matrix_units(3), &rho, &t).unwrap();
        for (i, x) in s.basis().iter().enumerate() {
            for (j, y) in s.basis().iter().enumerate() {
                let g = phi_inner(x, y, &rho, &t).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - re(expect)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn intersection_examples() {
        let t = tol();
        let rho = diag(&[0.6, 0.4]);
        let diagonal = orthonormalize(&[matrix_unit(2, 0, 0), matrix_unit(2, 1, 1)], &rho, &t).unwrap();
        let other = orthonormalize(&[identity(2), matrix_unit(2, 0, 1)], &rho, &t).unwrap();
        let both = diagonal.intersect(&other, &t).unwrap();
        assert_eq!(both.dim(), 1);
        assert!(both.contains(&identity(2), &t));
        let self_meet = diagonal.intersect(&diagonal, &t).unwrap();
        assert_eq!(self_meet.dim(), 2);
        assert!(self_meet.distance(&diagonal) < 1e-12);
        let a = orthonormalize(&[matrix_unit(2, 0, 0)], &rho, &t).unwrap();
        let b = orthonormalize(&[matrix_unit(2, 1, 1)], &rho, &t).unwrap();
        assert_eq!(a.intersect(&b, &t).unwrap().dim(), 0);
    }

    #[test]
    fn intersection_rejects_mixed_inner_products() {
        let t = tol();
        let rho = diag(&[0.6, 0.4]);
        let a = orthonormalize(&[identity(2)], &rho, &t).unwrap();
        let b = OperatorSubspace::full(2, InnerProduct::HilbertSchmidt);
        assert!(a.intersect(&b, &t).is_err());
    }

    #[test]
    fn complement_dimensions() {
        let t = tol();
        let rho = diag(&[0.6, 0.4]);
        let a = orthonormalize(&[identity(2)], &rho, &t).unwrap();
        let perp = a.complement();
        assert_eq!(perp.dim(), 3);
        for b in perp.basis() {
            assert!(phi_inner(&identity(2), b, &rho, &t).unwrap().norm() < 1e-12);
        }
        let full = OperatorSubspace::full(2, a.inner_product().clone());
        assert_eq!(full.complement().dim(), 0);
    }

    #[test]
    fn commutant_examples() {
        let t = tol();
        assert_eq!(commutant(&[identity(2)], 2, &t).unwrap().dim(), 4);
        let c1 = commutant(&[diag(&[1.0, 2.0])], 2, &t).unwrap();
        assert_eq!(c1.dim(), 2);
        assert!(c1.contains(&matrix_unit(2, 1, 1), &t));
        let c2 = commutant(&[matrix_unit(2, 0, 1), matrix_unit(2, 1, 0)], 2, &t).unwrap();
        assert_eq!(c2.dim(), 1);
        assert!(c2.contains(&identity(2), &t));
        assert_eq!(commutant(&[], 3, &t).unwrap().dim(), 9);
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let x = CMat::from_row_slice(
            3,
            3,
            &[re(2.0), c(0.5, 1.0), re(0.0), c(0.5, -1.0), re(-1.0), c(0.0, 2.0), re(0.0), c(0.0, -2.0), re(0.3)],
        );
        let (v, q) = hermitian_eigen(&x);
        let rec = &q * diag(&v) * q.adjoint();
        assert!((rec - &x).norm() <= 1e-12 * x.norm());
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn schur_eigenvalues_of_cyclic_permutation() {
        let z = re(0.0);
        let o = re(1.0);
        let p = CMat::from_row_slice(3, 3, &[z, o, z, z, z, o, o, z, z]);
        let ev = eigenvalues(&p);
        for l in &ev {
            assert!(((l * l * l) - re(1.0)).norm() < 1e-12);
        }
    }
}
