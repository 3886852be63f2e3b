//! Certified *-subalgebras of `M_d` and the structures built from them:
//! multiplicative domains, the reversible part `D∞`, conditional
//! expectations, centers and the flat product.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    commutant, eigenvalues, hermitian_eigen, identity, min_hermitian_eigenvalue, nullspace,
    op_norm, range_basis, re, select_columns, CMat, InnerProduct, OperatorSubspace, Tolerance,
};
use crate::qds::{Channel, Qds};

/// Worst relative residuals of the algebra axioms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Certificate {
    pub identity: f64,
    pub star: f64,
    pub product: f64,
}

/// A linear span certified to contain `I` and be closed under `*` and products.
#[derive(Debug, Clone)]
pub struct SubAlgebra {
    space: OperatorSubspace,
    certificate: Certificate,
}

fn product_residuals(space: &OperatorSubspace) -> Vec<Vec<f64>> {
    let basis = space.basis();
    basis
        .iter()
        .map(|x| basis.iter().map(|y| space.relative_residual(&(x * y))).collect())
        .collect()
}

fn measure(space: &OperatorSubspace) -> Certificate {
    let d = space.ambient_dim();
    let identity = space.relative_residual(&identity(d));
    let star = space
        .basis()
        .iter()
        .map(|b| space.relative_residual(&b.adjoint()))
        .fold(0.0, f64::max);
    let product = product_residuals(space)
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max);
    Certificate {
        identity,
        star,
        product,
    }
}

impl SubAlgebra {
    /// Verifies the algebra axioms on the basis of `space`.
    pub fn certify(space: OperatorSubspace, tol: &Tolerance) -> Result<Self> {
        let certificate = measure(&space);
        if certificate.identity > tol.eq_tol {
            return Err(Error::NotAnAlgebra {
                property: "identity",
                residual: certificate.identity,
            });
        }
        if certificate.star > tol.eq_tol {
            return Err(Error::NotAnAlgebra {
                property: "adjoint closure",
                residual: certificate.star,
            });
        }
        if certificate.product > tol.eq_tol {
            return Err(Error::NotAnAlgebra {
                property: "product closure",
                residual: certificate.product,
            });
        }
        Ok(Self { space, certificate })
    }

    /// Certifies, dropping basis vectors that break product closure one at a
    /// time (worst offender first, lowest index on ties).
    pub fn certify_or_shrink(space: OperatorSubspace, tol: &Tolerance) -> Result<Self> {
        let mut space = space;
        loop {
            match Self::certify(space.clone(), tol) {
                Ok(a) => return Ok(a),
                Err(Error::NotAnAlgebra {
                    property: "product closure",
                    ..
                }) if space.dim() > 1 => {
                    let r = product_residuals(&space);
                    let n = space.dim();
                    let score: Vec<f64> = (0..n)
                        .map(|i| (0..n).map(|j| r[i][j].max(r[j][i])).fold(0.0, f64::max))
                        .collect();
                    let mut worst = 0;
                    for i in 1..n {
                        if score[i] > score[worst] {
                            worst = i;
                        }
                    }
                    let keep: Vec<usize> = (0..n).filter(|&i| i != worst).collect();
                    let coords = select_columns(space.coords(), &keep);
                    space = OperatorSubspace::from_coords(
                        space.ambient_dim(),
                        space.inner_product().clone(),
                        coords,
                    );
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// The *-algebra generated by `generators` and the identity.
    pub fn generated_by(
        d: usize,
        generators: &[CMat],
        inner: InnerProduct,
        tol: &Tolerance,
    ) -> Result<Self> {
        let mut vectors = vec![identity(d)];
        for g in generators {
            vectors.push(g.clone());
            vectors.push(g.adjoint());
        }
        let mut space = OperatorSubspace::span(d, &vectors, inner.clone(), tol)?;
        loop {
            let mut next: Vec<CMat> = space.basis().to_vec();
            for x in space.basis() {
                for y in space.basis() {
                    next.push(x * y);
                }
            }
            let grown = OperatorSubspace::span(d, &next, inner.clone(), tol)?;
            if grown.dim() == space.dim() {
                return Self::certify(grown, tol);
            }
            space = grown;
        }
    }

    pub fn full(q: &Qds) -> Self {
        let space = OperatorSubspace::full(q.dim(), q.state().inner_product());
        Self::certify(space, q.tol()).expect("full matrix algebra")
    }

    pub fn scalars(q: &Qds) -> Self {
        let space = OperatorSubspace::span(q.dim(), &[identity(q.dim())], q.state().inner_product(), q.tol())
            .expect("identity spans a line");
        Self::certify(space, q.tol()).expect("scalar algebra")
    }

    pub fn space(&self) -> &OperatorSubspace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn basis(&self) -> &[CMat] {
        self.space.basis()
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    pub fn contains(&self, x: &CMat, tol: &Tolerance) -> bool {
        self.space.contains(x, tol)
    }

    pub fn distance(&self, other: &SubAlgebra) -> f64 {
        self.space.distance(&other.space)
    }

    pub fn intersect(&self, other: &SubAlgebra, tol: &Tolerance) -> Result<SubAlgebra> {
        let space = self.space.intersect(&other.space, tol)?;
        SubAlgebra::certify(space, tol)
    }
}

/// GNS matrix of a channel for the state of `q`.
pub fn gns_matrix(channel: &Channel, q: &Qds) -> CMat {
    q.state().to_gns(channel.superop())
}

/// Eigenvalue-one eigenspace of a self-φ-adjoint unital map.
pub fn fixed_point_algebra(t: &Channel, q: &Qds) -> Result<SubAlgebra> {
    let tol = q.tol();
    let g = gns_matrix(t, q);
    let asym = op_norm(&(&g - g.adjoint()));
    if asym > tol.eq_tol * op_norm(&g).max(1.0) {
        return Err(Error::PreconditionViolated(format!(
            "map is not self-φ-adjoint (residual {asym:e})"
        )));
    }
    let (values, vectors) = hermitian_eigen(&g);
    let keep: Vec<usize> = (0..values.len())
        .filter(|&i| (values[i] - 1.0).abs() <= tol.rank_gap)
        .collect();
    let coords = select_columns(&vectors, &keep);
    let space = OperatorSubspace::from_coords(q.dim(), q.state().inner_product(), coords);
    SubAlgebra::certify_or_shrink(space, tol)
}

/// Largest `|S_k(b_i, b_j)|` over basis pairs, relative to the factor norms.
pub fn multiplicativity_residual(map: &Channel, space: &OperatorSubspace) -> f64 {
    let basis = space.basis();
    let images: Vec<CMat> = basis.iter().map(|b| map.apply(b)).collect();
    let adj_images: Vec<CMat> = basis.iter().map(|b| map.apply(&b.adjoint())).collect();
    let norms: Vec<f64> = basis.iter().map(op_norm).collect();
    let mut worst = 0.0f64;
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            let s = map.apply(&(basis[i].adjoint() * &basis[j])) - &adj_images[i] * &images[j];
            worst = worst.max(op_norm(&s) / (norms[i] * norms[j]).max(1.0));
        }
    }
    worst
}

/// `D_{Φ_k}`, computed as the fixed points of `τ_k` and cross-checked
/// against the defining multiplicativity relations.
pub fn multiplicative_domain(q: &Qds, k: i64) -> Result<SubAlgebra> {
    if k == 0 {
        return Ok(SubAlgebra::full(q));
    }
    let domain = fixed_point_algebra(&q.tau_k(k), q)?;
    let residual = multiplicativity_residual(&q.phi_k(k), domain.space());
    if residual > q.tol().eq_tol {
        return Err(Error::CertificateFailure {
            what: format!("Φ_{k} is not multiplicative on F(τ_{k})"),
            residual,
        });
    }
    Ok(domain)
}

/// Worst relative residual of `map(B) ⊆ B`.
pub fn invariance_residual(map: &Channel, space: &OperatorSubspace) -> f64 {
    space
        .basis()
        .iter()
        .map(|b| space.relative_residual(&map.apply(b)))
        .fold(0.0, f64::max)
}

/// `D∞⁺ = ⋂_n D_{Φⁿ}`.
pub fn d_infinity_plus(q: &Qds) -> Result<SubAlgebra> {
    let tol = q.tol();
    let cap = q.dim() * q.dim();
    let phi = q.channel();
    let mut current = multiplicative_domain(q, 1)?;
    let mut prev_dim = usize::MAX;
    for n in 1..=cap {
        if n > 1 {
            let next = multiplicative_domain(q, n as i64)?;
            current = current.intersect(&next, tol)?;
        }
        if current.dim() == prev_dim
            || invariance_residual(phi, current.space()) <= tol.eq_tol
        {
            let invariant = invariance_residual(phi, current.space());
            let mult = multiplicativity_residual(phi, current.space());
            if invariant <= tol.eq_tol && mult <= tol.eq_tol {
                return Ok(current);
            }
        }
        prev_dim = current.dim();
    }
    Err(Error::StabilizationFailure {
        what: "D∞⁺",
        cap,
    })
}

/// `C_Φ = ⋂_n Φⁿ(D∞⁺)`.
pub fn multiplicative_core(q: &Qds) -> Result<SubAlgebra> {
    multiplicative_core_from(q, &d_infinity_plus(q)?)
}

pub fn multiplicative_core_from(q: &Qds, d_plus: &SubAlgebra) -> Result<SubAlgebra> {
    let tol = q.tol();
    let cap = q.dim() * q.dim();
    let phi = q.channel();
    let mut space = d_plus.space().clone();
    for _ in 0..=cap {
        let image = space.image(|b| phi.apply(b), tol)?;
        if image.dim() == space.dim() && space.containment_residual(&image) <= tol.eq_tol {
            return SubAlgebra::certify(image, tol);
        }
        space = image.intersect(&space, tol)?;
    }
    Err(Error::StabilizationFailure {
        what: "multiplicative core",
        cap,
    })
}

/// Residuals of the automorphism certificate on `B`:
/// `Φ(B) = B`, `Φ♯(B) = B`, `Φ♯Φ = id = ΦΦ♯` on `B`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AutomorphismCertificate {
    pub phi_invariance: f64,
    pub sharp_invariance: f64,
    pub sharp_phi_identity: f64,
    pub phi_sharp_identity: f64,
}

impl AutomorphismCertificate {
    pub fn worst(&self) -> f64 {
        self.phi_invariance
            .max(self.sharp_invariance)
            .max(self.sharp_phi_identity)
            .max(self.phi_sharp_identity)
    }
}

pub fn automorphism_certificate(q: &Qds, b: &SubAlgebra) -> AutomorphismCertificate {
    let phi = q.channel();
    let sharp = q.phi_sharp();
    let space = b.space();
    let inner = space.inner_product();
    let identity_gap = |first: &Channel, second: &Channel| {
        space
            .basis()
            .iter()
            .map(|x| inner.norm(&(second.apply(&first.apply(x)) - x)))
            .fold(0.0, f64::max)
    };
    AutomorphismCertificate {
        phi_invariance: invariance_residual(phi, space),
        sharp_invariance: invariance_residual(sharp, space),
        sharp_phi_identity: identity_gap(phi, sharp),
        phi_sharp_identity: identity_gap(sharp, phi),
    }
}

/// Record of the intersection over `k ∈ ℤ`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DInfinityTrace {
    /// `(k, dim D_{Φ_k})` in computation order.
    pub domain_dims: Vec<(i64, usize)>,
    /// `(k, dim)` of the running intersection after each `k`.
    pub running_dims: Vec<(i64, usize)>,
    /// Largest `|k|` used.
    pub stabilized_at: usize,
    pub certificate: AutomorphismCertificate,
    pub core_distance: f64,
}

/// `D∞ = ⋂_{k∈ℤ} D_{Φ_k}`.
pub fn d_infinity(q: &Qds) -> Result<SubAlgebra> {
    d_infinity_with_trace(q).map(|(a, _)| a)
}

pub fn d_infinity_with_trace(q: &Qds) -> Result<(SubAlgebra, DInfinityTrace)> {
    let tol = q.tol();
    // One confirming step past the longest strictly decreasing chain.
    let cap = q.dim() * q.dim() + 1;
    let mut domain_dims = Vec::new();
    let mut running_dims = Vec::new();
    let mut current: Option<SubAlgebra> = None;
    let mut result = None;
    for m in 1..=cap {
        let before = current.as_ref().map(SubAlgebra::dim);
        for k in [m as i64, -(m as i64)] {
            let domain = multiplicative_domain(q, k)?;
            domain_dims.push((k, domain.dim()));
            current = Some(match current {
                None => domain,
                Some(c) => c.intersect(&domain, tol)?,
            });
            running_dims.push((k, current.as_ref().map_or(0, SubAlgebra::dim)));
        }
        let c = current.as_ref().expect("set above");
        if before == Some(c.dim()) {
            let cert = automorphism_certificate(q, c);
            if cert.worst() <= tol.eq_tol {
                result = Some((c.clone(), m, cert));
                break;
            }
        }
    }
    let (d_inf, stabilized_at, certificate) = result.ok_or(Error::StabilizationFailure {
        what: "D∞",
        cap,
    })?;
    let core = multiplicative_core(q)?;
    let core_distance = d_inf.distance(&core);
    if core_distance > tol.eq_tol {
        return Err(Error::CoreMismatch {
            distance: core_distance,
        });
    }
    Ok((
        d_inf,
        DInfinityTrace {
            domain_dims,
            running_dims,
            stabilized_at,
            certificate,
            core_distance,
        },
    ))
}

/// Span of the eigenoperators of `Φ` with unimodular eigenvalue.
pub fn peripheral_oracle(q: &Qds) -> Result<SubAlgebra> {
    let tol = q.tol();
    let u = gns_matrix(q.channel(), q);
    let n = u.nrows();
    let mut centers: Vec<crate::numerics::C64> = Vec::new();
    for l in eigenvalues(&u) {
        if l.norm() >= 1.0 - tol.rank_gap && centers.iter().all(|c| (c - l).norm() > 1e-6) {
            centers.push(l);
        }
    }
    let mut columns = Vec::new();
    for l in &centers {
        let shifted = &u - CMat::identity(n, n) * *l;
        columns.push(nullspace(&shifted, 10.0 * tol.rank_gap));
    }
    let stacked = crate::numerics::hstack(&columns, n);
    let coords = range_basis(&stacked, tol.rank_gap);
    let space = OperatorSubspace::from_coords(q.dim(), q.state().inner_product(), coords);
    SubAlgebra::certify(space, tol)
}

/// `R^⊥φ = {a : φ(a* x) = 0 for all x ∈ R}`.
pub fn perp_space(r: &SubAlgebra, q: &Qds) -> Result<OperatorSubspace> {
    let perp = r.space().complement();
    let star = perp
        .basis()
        .iter()
        .map(|b| perp.relative_residual(&b.adjoint()))
        .fold(0.0, f64::max);
    if star > q.tol().eq_tol {
        return Err(Error::ModularInvarianceFailure {
            property: "adjoint closure of the φ-orthogonal complement",
            residual: star,
        });
    }
    Ok(perp)
}

/// φ-preserving conditional expectation onto a certified subalgebra.
#[derive(Debug, Clone)]
pub struct ConditionalExpectation {
    target: SubAlgebra,
    matrix: CMat,
    gns: CMat,
}

/// Residuals measured while building a conditional expectation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExpectationChecks {
    pub idempotence: f64,
    pub unital: f64,
    pub choi_min_eigenvalue: f64,
    pub state_preservation: f64,
    pub module_property: f64,
}

impl ConditionalExpectation {
    pub fn target(&self) -> &SubAlgebra {
        &self.target
    }

    /// Superoperator in column-stacking coordinates.
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Orthogonal projector in GNS coordinates.
    pub fn gns_projector(&self) -> &CMat {
        &self.gns
    }

    pub fn apply(&self, a: &CMat) -> CMat {
        crate::numerics::apply_superop(&self.matrix, a)
    }

    pub fn as_channel(&self) -> Channel {
        Channel::from_superop(self.matrix.clone()).expect("square superoperator")
    }

    pub fn checks(&self, q: &Qds) -> ExpectationChecks {
        let d = q.dim();
        let e = &self.matrix;
        let idempotence = op_norm(&(e * e - e));
        let id = identity(d);
        let unital = op_norm(&(self.apply(&id) - &id));
        let choi_min_eigenvalue = min_hermitian_eigenvalue(&self.as_channel().choi());
        let units = crate::numerics::matrix_units(d);
        let state_preservation = units
            .iter()
            .map(|a| (q.phi(&self.apply(a)) - q.phi(a)).norm())
            .fold(0.0, f64::max);
        let basis = self.target.basis();
        let norms: Vec<f64> = basis.iter().map(op_norm).collect();
        let mut module_property = 0.0f64;
        for a in &units {
            let ea = self.apply(a);
            for (x, nx) in basis.iter().zip(&norms) {
                for (y, ny) in basis.iter().zip(&norms) {
                    let lhs = self.apply(&(x * a * y));
                    let rhs = x * &ea * y;
                    module_property = module_property.max(op_norm(&(lhs - rhs)) / (nx * ny).max(1.0));
                }
            }
        }
        ExpectationChecks {
            idempotence,
            unital,
            choi_min_eigenvalue,
            state_preservation,
            module_property,
        }
    }
}

/// φ-orthogonal projection onto `R`, with every defining property checked.
pub fn conditional_expectation(r: &SubAlgebra, q: &Qds) -> Result<ConditionalExpectation> {
    let tol = q.tol();
    let gns = r.space().projector();
    let matrix = q.state().from_gns(&gns);
    let e = ConditionalExpectation {
        target: r.clone(),
        matrix,
        gns,
    };
    let c = e.checks(q);
    let failures = [
        ("idempotence", c.idempotence),
        ("unitality", c.unital),
        ("positivity", (-c.choi_min_eigenvalue).max(0.0)),
        ("state preservation", c.state_preservation),
        ("module property", c.module_property),
    ];
    for (property, residual) in failures {
        if residual > tol.eq_tol {
            return Err(Error::ModularInvarianceFailure { property, residual });
        }
    }
    Ok(e)
}

/// Residuals of the commutation and invariance properties of `E∞`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EInfinityChecks {
    /// `max_k ‖E∞ Φ_k − Φ_k E∞‖` over `k ∈ {±1, ±2}`.
    pub commutation: f64,
    /// Worst relative residual of `Φ_k(D∞^⊥φ) ⊆ D∞^⊥φ`.
    pub perp_invariance: f64,
}

pub fn e_infinity(q: &Qds) -> Result<ConditionalExpectation> {
    let d_inf = d_infinity(q)?;
    e_infinity_from(q, &d_inf).map(|(e, _)| e)
}

/// `E∞` for an already computed `D∞`.
pub fn e_infinity_from(
    q: &Qds,
    d_inf: &SubAlgebra,
) -> Result<(ConditionalExpectation, EInfinityChecks)> {
    let tol = q.tol();
    let e = conditional_expectation(d_inf, q)?;
    let perp = perp_space(d_inf, q)?;
    let mut commutation = 0.0f64;
    let mut perp_invariance = 0.0f64;
    for k in [1, -1, 2, -2] {
        let phi_k = q.phi_k(k);
        let s = phi_k.superop();
        commutation = commutation.max(op_norm(&(e.matrix() * s - s * e.matrix())));
        perp_invariance = perp_invariance.max(invariance_residual(&phi_k, &perp));
    }
    let checks = EInfinityChecks {
        commutation,
        perp_invariance,
    };
    // Φ_k powers amplify rounding by up to ‖Φ_k‖; compare at a slightly looser scale.
    if commutation > 10.0 * tol.eq_tol {
        return Err(Error::CertificateFailure {
            what: "E∞ does not commute with Φ_k".into(),
            residual: commutation,
        });
    }
    if perp_invariance > 10.0 * tol.eq_tol {
        return Err(Error::CertificateFailure {
            what: "Φ_k does not preserve D∞^⊥φ".into(),
            residual: perp_invariance,
        });
    }
    Ok((e, checks))
}

/// `a = a∥ + a⊥` with `a∥ = E(a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatElement {
    pub par: CMat,
    pub perp: CMat,
}

impl FlatElement {
    pub fn value(&self) -> CMat {
        &self.par + &self.perp
    }
}

pub fn decompose(a: &CMat, e: &ConditionalExpectation) -> FlatElement {
    let par = e.apply(a);
    let perp = a - &par;
    FlatElement { par, perp }
}

/// `| ‖aΩ‖² − ‖a∥Ω‖² − ‖a⊥Ω‖² |`.
pub fn pythagoras_residual(x: &FlatElement, q: &Qds) -> f64 {
    let n = |m: &CMat| q.state().inner(m, m).re;
    (n(&x.value()) - n(&x.par) - n(&x.perp)).abs()
}

fn check_flat(x: &FlatElement, e: &ConditionalExpectation, tol: &Tolerance) -> Result<()> {
    let scale = op_norm(&x.par).max(op_norm(&x.perp)).max(1.0);
    let par = op_norm(&(e.apply(&x.par) - &x.par)) / scale;
    let perp = op_norm(&e.apply(&x.perp)) / scale;
    let residual = par.max(perp);
    if residual > tol.eq_tol {
        return Err(Error::MismatchedTarget { residual });
    }
    Ok(())
}

/// `x × y = x∥ y∥ + x∥ y⊥ + x⊥ y∥`.
pub fn flat_product(
    x: &FlatElement,
    y: &FlatElement,
    e: &ConditionalExpectation,
    tol: &Tolerance,
) -> Result<FlatElement> {
    check_flat(x, e, tol)?;
    check_flat(y, e, tol)?;
    Ok(FlatElement {
        par: &x.par * &y.par,
        perp: &x.par * &y.perp + &x.perp * &y.par,
    })
}

/// `Z(R) = R ∩ R′`.
pub fn center(r: &SubAlgebra, tol: &Tolerance) -> Result<SubAlgebra> {
    let d = r.space().ambient_dim();
    let comm = commutant(r.basis(), d, tol)?;
    let comm = comm.with_inner(r.space().inner_product().clone(), tol)?;
    let space = r.space().intersect(&comm, tol)?;
    SubAlgebra::certify(space, tol)
}

/// Outcome of the abelian effective-observable computation.
#[derive(Debug, Clone)]
pub struct AbelianEffective {
    pub algebra: SubAlgebra,
    /// Worst relative residual of `Φ(A) ⊆ A`.
    pub invariance: f64,
    /// Number of sampled pure states of `D∞`.
    pub samples: usize,
    /// Worst `ω(z*z) − |ω(z)|²` over samples and central basis elements.
    pub pure_state_residual: f64,
}

const PURE_STATE_SAMPLES: usize = 200;

fn random_hermitian_in(r: &SubAlgebra, rng: &mut impl Rng) -> CMat {
    let d = r.space().ambient_dim();
    let mut h = CMat::zeros(d, d);
    for b in r.basis() {
        let g: f64 = rng.gen_range(-1.0..1.0);
        h += (b + b.adjoint()) * re(g);
    }
    h
}

/// Spectral projections of a Hermitian matrix, clustering eigenvalues
/// closer than `gap` relative to the spread.
fn spectral_projections(h: &CMat, gap: f64) -> Vec<CMat> {
    let (values, vectors) = hermitian_eigen(h);
    let spread = values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..values.len() {
        match groups.last_mut() {
            Some(g) if (values[i] - values[*g.last().unwrap()]).abs() <= gap * spread => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
        .iter()
        .map(|g| {
            let v = select_columns(&vectors, g);
            &v * v.adjoint()
        })
        .collect()
}

/// `A` for the reversible part: the center of `D∞`, checked against
/// multiplicativity of sampled pure states of `D∞`.
pub fn abelian_effective(q: &Qds, d_inf: &SubAlgebra, seed: u64) -> Result<AbelianEffective> {
    let tol = q.tol();
    let algebra = center(d_inf, tol)?;
    let invariance = invariance_residual(q.channel(), algebra.space());
    if invariance > tol.eq_tol {
        return Err(Error::CertificateFailure {
            what: "Φ(A) ⊄ A".into(),
            residual: invariance,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..PURE_STATE_SAMPLES {
        let h = random_hermitian_in(d_inf, &mut rng);
        let projections = spectral_projections(&h, 1e-8);
        let p = &projections[rng.gen_range(0..projections.len())];
        let rank = p.trace().re;
        let omega = |x: &CMat| (p * x).trace() / re(rank);
        for z in algebra.basis() {
            let v = omega(&(z.adjoint() * z)) - omega(z).norm_sqr();
            worst = worst.max(v.norm() / op_norm(z).powi(2).max(1.0));
        }
    }
    if worst > tol.eq_tol {
        return Err(Error::CertificateFailure {
            what: "a central element is not multiplicative for a pure state of D∞".into(),
            residual: worst,
        });
    }
    Ok(AbelianEffective {
        algebra,
        invariance,
        samples: PURE_STATE_SAMPLES,
        pure_state_residual: worst,
    })
}

/// One simple summand `M_n ⊗ I_m` of a finite-dimensional *-algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Block {
    pub size: usize,
    pub multiplicity: usize,
}

const STRUCTURE_ATTEMPTS: usize = 5;

/// Block sizes from the spectral projections of a random central element.
pub fn structure_report(r: &SubAlgebra, seed: u64, tol: &Tolerance) -> Result<Vec<Block>> {
    let z = center(r, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..STRUCTURE_ATTEMPTS {
        let h = random_hermitian_in(&z, &mut rng);
        let mut blocks = Vec::new();
        for p in spectral_projections(&h, 1e-6) {
            let compressed: Vec<CMat> = r.basis().iter().map(|b| b * &p).collect();
            let dim = OperatorSubspace::span(
                r.space().ambient_dim(),
                &compressed,
                InnerProduct::HilbertSchmidt,
                tol,
            )?
            .dim();
            let n = (dim as f64).sqrt().round() as usize;
            let rank = p.trace().re.round() as usize;
            if n == 0 || n * n != dim || rank % n != 0 {
                continue 'attempt;
            }
            blocks.push(Block {
                size: n,
                multiplicity: rank / n,
            });
        }
        if blocks.iter().map(|b| b.size * b.size).sum::<usize>() != r.dim()
            || blocks.len() != z.dim()
        {
            continue;
        }
        blocks.sort_by(|a, b| b.size.cmp(&a.size).then(b.multiplicity.cmp(&a.multiplicity)));
        return Ok(blocks);
    }
    Err(Error::DegenerateRandomElement {
        attempts: STRUCTURE_ATTEMPTS,
    })
}
