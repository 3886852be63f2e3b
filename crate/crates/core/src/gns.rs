//! The GNS space of `(M_d, φ)` and the contraction `U` induced by `Φ`.
//!
//! Coordinates: `xΩ ↦ vec(x ρ^{1/2})`, which is an isometry for
//! `⟨xΩ, yΩ⟩ = φ(x* y)`. A subspace of `H_φ` is stored as an
//! [`OperatorSubspace`] with the state inner product; its coordinate columns
//! are exactly the GNS vectors.

use crate::algebra::{conditional_expectation, multiplicative_domain, perp_space, SubAlgebra};
use crate::error::{Error, Result};
use crate::numerics::{
    eigenvalues, hermitian_eigen, hermitian_fn, left_superop, nullspace, op_norm, re,
    sandwich_superop, select_columns, vectorize, CMat, CVec, OperatorSubspace,
};
use crate::qds::{transpose_permutation, Qds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GnsTag {
    U,
    UK(i64),
    Defect,
    VPlus,
    VMinus,
    Projection,
    ModularJ,
    ModularDelta,
    Restriction,
}

/// Operator on `H_φ` in orthonormal GNS coordinates.
#[derive(Debug, Clone)]
pub struct GnsOperator {
    pub matrix: CMat,
    pub tag: GnsTag,
}

impl GnsOperator {
    pub fn adjoint(&self) -> CMat {
        self.matrix.adjoint()
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.matrix)
    }
}

/// Coordinates of `H_φ`.
#[derive(Debug, Clone)]
pub struct GnsSpace {
    pub dim: usize,
    /// Coordinates of `Ω = I`.
    pub omega: CVec,
}

impl GnsSpace {
    pub fn new(q: &Qds) -> Self {
        let omega = vectorize(q.state().sqrt_rho());
        Self {
            dim: q.dim() * q.dim(),
            omega,
        }
    }

    /// `xΩ`.
    pub fn vector(q: &Qds, x: &CMat) -> CVec {
        vectorize(&(x * q.state().sqrt_rho()))
    }

    /// Left multiplication `π_φ(a)`.
    pub fn left(a: &CMat) -> CMat {
        left_superop(a)
    }
}

pub fn contraction(q: &Qds) -> GnsOperator {
    GnsOperator {
        matrix: q.state().to_gns(q.channel().superop()),
        tag: GnsTag::U,
    }
}

/// `U^k` for `k ≥ 0`, `U*^{|k|}` for `k < 0`.
pub fn u_k(q: &Qds, k: i64) -> GnsOperator {
    let u = contraction(q).matrix;
    let base = if k >= 0 { u } else { u.adjoint() };
    let n = base.nrows();
    let mut out = CMat::identity(n, n);
    for _ in 0..k.unsigned_abs() {
        out = &out * &base;
    }
    GnsOperator {
        matrix: out,
        tag: GnsTag::UK(k),
    }
}

/// `D_T = √(I − T*T)`.
pub fn defect(t: &GnsOperator, eq_tol: f64) -> Result<GnsOperator> {
    let norm = t.norm();
    if norm > 1.0 + eq_tol {
        return Err(Error::NotContraction { norm });
    }
    let n = t.matrix.nrows();
    let gap = CMat::identity(n, n) - t.matrix.adjoint() * &t.matrix;
    Ok(GnsOperator {
        matrix: hermitian_fn(&gap, |v| re(v.max(0.0).sqrt())),
        tag: GnsTag::Defect,
    })
}

/// Strong limits `V₋ = lim U*ⁿUⁿ` and `V₊ = lim UⁿU*ⁿ`.
#[derive(Debug, Clone)]
pub struct VLimits {
    pub v_plus: GnsOperator,
    pub v_minus: GnsOperator,
    /// Squarings performed; the power reached is `2^iterations`.
    pub iterations_plus: usize,
    pub iterations_minus: usize,
    /// Last accepted increment `‖f(U^{2n}) − f(Uⁿ)‖`.
    pub residual_plus: f64,
    pub residual_minus: f64,
    /// Acceptance threshold: `conv_tol` or the rounding floor, whichever is larger.
    pub accepted_plus: f64,
    pub accepted_minus: f64,
}

/// `lim f(Uⁿ)` along `n = 2^m`, squaring `Uⁿ` each step.
///
/// Increments collapse super-exponentially until rounding, which grows
/// like `n ε`, takes over. The iteration stops at `conv_tol`; otherwise the
/// iterate with the smallest increment is accepted when that increment lies
/// within the rounding floor `64 n ε`.
fn squaring_limit(
    u: &CMat,
    f: impl Fn(&CMat) -> CMat,
    conv_tol: f64,
    iter_max: usize,
    what: &'static str,
) -> Result<LimitRun> {
    let mut p = u.clone();
    let mut a = f(&p);
    let mut best: Option<LimitRun> = None;
    let cap = iter_max.min(MAX_SQUARINGS);
    for it in 1..=cap {
        p = &p * &p;
        if !crate::numerics::is_finite(&p) {
            return Err(Error::NonFinite);
        }
        let next = f(&p);
        let delta = op_norm(&(&next - &a));
        a = next;
        let floor = rounding_floor(it);
        if delta < conv_tol {
            return Ok(LimitRun { limit: a, iterations: it, residual: delta, floor });
        }
        if best.as_ref().is_none_or(|b| delta < b.residual) {
            best = Some(LimitRun { limit: a.clone(), iterations: it, residual: delta, floor });
        }
    }
    match best {
        Some(b) if b.residual <= b.floor => Ok(b),
        b => Err(Error::ConvergenceFailure {
            what,
            residual: b.map_or(f64::INFINITY, |b| b.residual),
            iterations: cap,
        }),
    }
}

struct LimitRun {
    limit: CMat,
    iterations: usize,
    residual: f64,
    floor: f64,
}

/// `64 · 2^m · ε`.
fn rounding_floor(squarings: usize) -> f64 {
    64.0 * (squarings as f64).exp2() * f64::EPSILON
}

/// `n = 2^32`; beyond this the rounding floor exceeds 1e-5.
const MAX_SQUARINGS: usize = 32;

pub fn v_limits(q: &Qds) -> Result<VLimits> {
    let tol = q.tol();
    let u = contraction(q).matrix;
    let m = squaring_limit(&u, |p| p.adjoint() * p, tol.conv_tol, tol.iter_max, "V₋")?;
    let p = squaring_limit(&u, |p| p * p.adjoint(), tol.conv_tol, tol.iter_max, "V₊")?;
    Ok(VLimits {
        v_plus: GnsOperator {
            matrix: crate::numerics::hermitian_part(&p.limit),
            tag: GnsTag::VPlus,
        },
        v_minus: GnsOperator {
            matrix: crate::numerics::hermitian_part(&m.limit),
            tag: GnsTag::VMinus,
        },
        iterations_plus: p.iterations,
        iterations_minus: m.iterations,
        residual_plus: p.residual,
        residual_minus: m.residual,
        accepted_plus: tol.conv_tol.max(p.floor),
        accepted_minus: tol.conv_tol.max(m.floor),
    })
}

/// `max |lim φ(S_n(a,b)) − ⟨aΩ, (I − V₋) bΩ⟩|` over matrix units, with the
/// left side evaluated at `n = horizon`.
pub fn limit_pairing_residual(q: &Qds, v_minus: &GnsOperator, horizon: usize) -> f64 {
    let d = q.dim();
    let units = crate::numerics::matrix_units(d);
    let phi_n = q.channel().power(horizon);
    let n = d * d;
    let gap = CMat::identity(n, n) - &v_minus.matrix;
    let vecs: Vec<CVec> = units.iter().map(|a| GnsSpace::vector(q, a)).collect();
    let mut worst = 0.0f64;
    for (ai, a) in units.iter().enumerate() {
        let pa = phi_n.apply(&a.adjoint());
        for (bi, b) in units.iter().enumerate() {
            let s = phi_n.apply(&(a.adjoint() * b)) - &pa * phi_n.apply(b);
            let lhs = q.phi(&s);
            let rhs = vecs[ai].dotc(&(&gap * &vecs[bi]));
            worst = worst.max((lhs - rhs).norm());
        }
    }
    worst
}

fn eigenspace_of_one(v: &CMat, rank_gap: f64) -> CMat {
    let (values, vectors) = hermitian_eigen(v);
    let keep: Vec<usize> = (0..values.len())
        .filter(|&i| (values[i] - 1.0).abs() <= rank_gap)
        .collect();
    select_columns(&vectors, &keep)
}

fn gns_subspace(q: &Qds, coords: CMat) -> OperatorSubspace {
    OperatorSubspace::from_coords(q.dim(), q.state().inner_product(), coords)
}

/// Sz.-Nagy–Foias splitting `H_φ = H₀ ⊕ H₁`.
#[derive(Debug, Clone)]
pub struct NagyFoias {
    pub h0: OperatorSubspace,
    pub h1: OperatorSubspace,
    /// `U` restricted to `H₀`, in the basis of `h0`.
    pub unitary_part: GnsOperator,
    /// `U` restricted to `H₁`, in the basis of `h1`.
    pub cnu_part: GnsOperator,
    /// `‖P₁ U P₀‖ + ‖P₀ U P₁‖`.
    pub reducing_residual: f64,
    /// `max |σ − 1|` over singular values of the unitary part.
    pub unitary_residual: f64,
    /// Spectral radius of the c.n.u. part.
    pub cnu_spectral_radius: f64,
    /// Unimodular eigenvectors of the c.n.u. part isometric for `U` and `U*`.
    pub common_isometric_eigenvectors: usize,
    /// Distance to `H₀` obtained from multiplicative domains.
    pub h0_distance: f64,
    pub limits: VLimits,
}

pub fn nagy_foias(q: &Qds) -> Result<NagyFoias> {
    let tol = q.tol();
    let limits = v_limits(q)?;
    let u = contraction(q).matrix;
    let ker_plus = gns_subspace(q, eigenspace_of_one(&limits.v_plus.matrix, tol.rank_gap));
    let ker_minus = gns_subspace(q, eigenspace_of_one(&limits.v_minus.matrix, tol.rank_gap));
    let h0 = ker_plus.intersect(&ker_minus, tol)?;
    let h1 = h0.complement();

    let q0 = h0.coords();
    let q1 = h1.coords();
    let reducing_residual = op_norm(&(q1.adjoint() * &u * q0)) + op_norm(&(q0.adjoint() * &u * q1));
    let u0 = q0.adjoint() * &u * q0;
    let u1 = q1.adjoint() * &u * q1;
    let unitary_residual = if u0.is_empty() {
        0.0
    } else {
        u0.clone()
            .svd(false, false)
            .singular_values
            .iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    };

    let (cnu_spectral_radius, common) = cnu_certificate(&u1, tol.rank_gap, tol.eq_tol);
    if common > 0 {
        return Err(Error::CertificateFailure {
            what: format!("{common} unimodular eigenvectors of the H₁ part are isometric for U and U*"),
            residual: cnu_spectral_radius,
        });
    }
    if reducing_residual > tol.eq_tol {
        return Err(Error::CertificateFailure {
            what: "H₀ does not reduce U".into(),
            residual: reducing_residual,
        });
    }

    let by_domains = h0_via_domains(q)?;
    let h0_distance = h0.distance(&by_domains);
    if h0_distance > tol.eq_tol {
        return Err(Error::H0Mismatch {
            distance: h0_distance,
        });
    }

    Ok(NagyFoias {
        h0,
        h1,
        unitary_part: GnsOperator {
            matrix: u0,
            tag: GnsTag::Restriction,
        },
        cnu_part: GnsOperator {
            matrix: u1,
            tag: GnsTag::Restriction,
        },
        reducing_residual,
        unitary_residual,
        cnu_spectral_radius,
        common_isometric_eigenvectors: common,
        h0_distance,
        limits,
    })
}

/// Spectral radius of `t` and the number of its unimodular eigenvectors on
/// which both `t` and `t*` are isometric.
pub fn cnu_certificate(t: &CMat, rank_gap: f64, eq_tol: f64) -> (f64, usize) {
    let n = t.nrows();
    if n == 0 {
        return (0.0, 0);
    }
    let spectrum = eigenvalues(t);
    let radius = spectrum.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let mut common = 0;
    let mut seen: Vec<crate::numerics::C64> = Vec::new();
    for l in spectrum {
        if l.norm() < 1.0 - rank_gap || seen.iter().any(|s| (s - l).norm() < 1e-6) {
            continue;
        }
        seen.push(l);
        let null = nullspace(&(t - CMat::identity(n, n) * l), 10.0 * rank_gap);
        for j in 0..null.ncols() {
            let x = null.column(j).into_owned();
            let fwd = (t * &x).norm();
            let back = (t.adjoint() * &x).norm();
            if (fwd - 1.0).abs() <= eq_tol && (back - 1.0).abs() <= eq_tol {
                common += 1;
            }
        }
    }
    (radius, common)
}

/// Residuals of the certificate attached to `h0_via_domains`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct H0Certificate {
    pub invariance: f64,
    pub isometry: f64,
    pub intertwining: f64,
    pub stabilized_at: usize,
}

/// `H₀ = ⋂_k closure(π(D_{Φ_k}) Ω)`.
pub fn h0_via_domains(q: &Qds) -> Result<OperatorSubspace> {
    h0_via_domains_with_certificate(q).map(|(s, _)| s)
}

pub fn h0_via_domains_with_certificate(q: &Qds) -> Result<(OperatorSubspace, H0Certificate)> {
    let tol = q.tol();
    // One confirming step past the longest strictly decreasing chain.
    let cap = q.dim() * q.dim() + 1;
    let u = contraction(q).matrix;
    let ua = u.adjoint();
    let mut current: Option<OperatorSubspace> = None;
    for m in 1..=cap {
        let before = current.as_ref().map(OperatorSubspace::dim);
        for k in [m as i64, -(m as i64)] {
            let domain = multiplicative_domain(q, k)?.space().clone();
            current = Some(match current {
                None => domain,
                Some(c) => c.intersect(&domain, tol)?,
            });
        }
        let space = current.as_ref().expect("set above");
        if before != Some(space.dim()) {
            continue;
        }
        let qc = space.coords();
        let n = qc.nrows();
        let outside = CMat::identity(n, n) - space.projector();
        let invariance = op_norm(&(&outside * &u * qc)).max(op_norm(&(&outside * &ua * qc)));
        let k_dim = qc.ncols();
        let isometry = if k_dim == 0 {
            0.0
        } else {
            let id = CMat::identity(k_dim, k_dim);
            op_norm(&(qc.adjoint() * &ua * &u * qc - &id)).max(op_norm(&(qc.adjoint() * &u * &ua * qc - &id)))
        };
        if invariance <= tol.eq_tol && isometry <= tol.eq_tol {
            let intertwining = intertwining_residual(q, space, 3);
            if intertwining > 10.0 * tol.eq_tol {
                return Err(Error::CertificateFailure {
                    what: "Uᵏπ(a)ξ₀ = π(Φᵏ(a))Uᵏξ₀ fails on H₀".into(),
                    residual: intertwining,
                });
            }
            let cert = H0Certificate {
                invariance,
                isometry,
                intertwining,
                stabilized_at: m,
            };
            return Ok((space.clone(), cert));
        }
    }
    Err(Error::StabilizationFailure {
        what: "H₀ via multiplicative domains",
        cap,
    })
}

/// `max ‖Uᵏ π(a) ξ₀ − π(Φᵏ(a)) Uᵏ ξ₀‖` for `k = 1..=kmax`, matrix units `a`
/// and basis vectors `ξ₀` of `h0`.
pub fn intertwining_residual(q: &Qds, h0: &OperatorSubspace, kmax: usize) -> f64 {
    let d = q.dim();
    let units = crate::numerics::matrix_units(d);
    let mut worst = 0.0f64;
    for k in 1..=kmax {
        let uk = u_k(q, k as i64).matrix;
        let phik = q.phi_k(k as i64);
        for j in 0..h0.dim() {
            let xi = h0.coords().column(j).into_owned();
            let uxi = &uk * &xi;
            for a in &units {
                let lhs = &uk * (left_superop(a) * &xi);
                let rhs = left_superop(&phik.apply(a)) * &uxi;
                worst = worst.max((lhs - rhs).norm() / op_norm(a).max(1.0));
            }
        }
    }
    worst
}

/// `H_φ = H∞ ⊕ K∞` with the projection onto `H∞`.
#[derive(Debug, Clone)]
pub struct HInfinity {
    pub h_inf: OperatorSubspace,
    pub k_inf: OperatorSubspace,
    pub p_inf: GnsOperator,
    /// `‖Q_H* Q_K‖`.
    pub orthogonality: f64,
    /// `max_d ‖[P∞, π(d)]‖` over the `D∞` basis.
    pub commutant_residual: f64,
}

pub fn h_infinity(q: &Qds, d_inf: &SubAlgebra) -> Result<HInfinity> {
    let tol = q.tol();
    let h_inf = d_inf.space().clone();
    let k_inf = perp_space(d_inf, q)?;
    let p = h_inf.projector();
    let orthogonality = op_norm(&(h_inf.coords().adjoint() * k_inf.coords()));
    let commutant_residual = d_inf
        .basis()
        .iter()
        .map(|d| {
            let l = left_superop(d);
            op_norm(&(&p * &l - &l * &p)) / op_norm(d).max(1.0)
        })
        .fold(0.0, f64::max);
    if h_inf.dim() + k_inf.dim() != q.dim() * q.dim() || orthogonality > tol.eq_tol {
        return Err(Error::CertificateFailure {
            what: "H∞ and K∞ do not split H_φ".into(),
            residual: orthogonality,
        });
    }
    if commutant_residual > tol.eq_tol {
        return Err(Error::CertificateFailure {
            what: "P∞ is not in π(D∞)′".into(),
            residual: commutant_residual,
        });
    }
    Ok(HInfinity {
        h_inf,
        k_inf,
        p_inf: GnsOperator {
            matrix: p,
            tag: GnsTag::Projection,
        },
        orthogonality,
        commutant_residual,
    })
}

/// The flat GNS space realized on `H∞`: `Z` maps the class of `a` to
/// `E∞(a)Ω`, and `U♭` is `U` restricted to `H∞`.
#[derive(Debug, Clone)]
pub struct FlatIsometry {
    /// `d² × dim D∞`, orthonormal columns spanning `H∞`.
    pub z: GnsOperator,
    /// Unitary on `ℂ^{dim D∞}`.
    pub u_flat: CMat,
    /// `‖Z*Z − I‖`.
    pub isometry_residual: f64,
    /// `‖Z U♭ⁿ − Uⁿ Z‖` for `n = 0..=5`.
    pub intertwining: Vec<f64>,
}

impl FlatIsometry {
    /// Flat coordinates of the class of `a`.
    pub fn class_of(&self, q: &Qds, a: &CMat) -> CVec {
        self.z.matrix.adjoint() * GnsSpace::vector(q, a)
    }

    /// `Z(class of a) = E∞(a)Ω`.
    pub fn embed(&self, q: &Qds, a: &CMat) -> CVec {
        &self.z.matrix * self.class_of(q, a)
    }
}

pub fn flat_isometry(q: &Qds, d_inf: &SubAlgebra) -> Result<FlatIsometry> {
    let tol = q.tol();
    // Building E∞ re-checks that D∞ carries a conditional expectation.
    conditional_expectation(d_inf, q)?;
    let z = d_inf.space().coords().clone();
    let u = contraction(q).matrix;
    let m = z.ncols();
    let u_flat = z.adjoint() * &u * &z;
    let isometry_residual = op_norm(&(z.adjoint() * &z - CMat::identity(m, m)));
    let mut intertwining = Vec::new();
    let mut uf_n = CMat::identity(m, m);
    let mut u_n = CMat::identity(u.nrows(), u.nrows());
    for _ in 0..=5 {
        intertwining.push(op_norm(&(&z * &uf_n - &u_n * &z)));
        uf_n = &uf_n * &u_flat;
        u_n = &u_n * &u;
    }
    let worst = intertwining.iter().copied().fold(isometry_residual, f64::max);
    if worst > tol.eq_tol {
        return Err(Error::CertificateFailure {
            what: "Z U♭ⁿ = Uⁿ Z fails".into(),
            residual: worst,
        });
    }
    Ok(FlatIsometry {
        z: GnsOperator {
            matrix: z,
            tag: GnsTag::Projection,
        },
        u_flat,
        isometry_residual,
        intertwining,
    })
}

/// Modular operator `Δ` and conjugation `J` on `H_φ`. `J` is antilinear:
/// `J(v) = j.matrix · conj(v)`.
#[derive(Debug, Clone)]
pub struct ModularOps {
    pub delta: GnsOperator,
    pub j: GnsOperator,
    /// `‖UΔ − ΔU‖ / ‖Δ‖`.
    pub delta_commutation: f64,
    /// `‖UJ − JU‖` as real-linear maps.
    pub j_commutation: f64,
    /// `‖J² − I‖`.
    pub j_involution: f64,
    /// `max ‖JΔ^{1/2} xΩ − x*Ω‖` over matrix units.
    pub polar_residual: f64,
}

impl ModularOps {
    pub fn apply_j(&self, v: &CVec) -> CVec {
        &self.j.matrix * v.conjugate()
    }
}

pub fn modular_ops(q: &Qds) -> ModularOps {
    let st = q.state();
    let d = q.dim();
    let delta = st.to_gns(&sandwich_superop(st.rho(), st.inv_rho()));
    let jm = transpose_permutation(d);
    let u = contraction(q).matrix;
    let delta_commutation = op_norm(&(&u * &delta - &delta * &u)) / op_norm(&delta).max(1.0);
    let j_commutation = op_norm(&(&u * &jm - &jm * u.conjugate()));
    let j_involution = op_norm(&(&jm * jm.conjugate() - CMat::identity(d * d, d * d)));
    let half = st.to_gns(&sandwich_superop(st.sqrt_rho(), st.inv_sqrt_rho()));
    let polar_residual = crate::numerics::matrix_units(d)
        .iter()
        .map(|x| {
            let v = &half * GnsSpace::vector(q, x);
            let jv = &jm * v.conjugate();
            (jv - GnsSpace::vector(q, &x.adjoint())).norm()
        })
        .fold(0.0, f64::max);
    ModularOps {
        delta: GnsOperator {
            matrix: delta,
            tag: GnsTag::ModularDelta,
        },
        j: GnsOperator {
            matrix: jm,
            tag: GnsTag::ModularJ,
        },
        delta_commutation,
        j_commutation,
        j_involution,
        polar_residual,
    }
}

/// `ω ↦ ‖U ω‖ = ‖ω‖` test for `xΩ`.
pub fn is_isometric_on(q: &Qds, x: &CMat, eq_tol: f64) -> bool {
    let u = contraction(q).matrix;
    let v = GnsSpace::vector(q, x);
    let n = v.norm();
    ((&u * &v).norm() - n).abs() <= eq_tol * n.max(1.0)
}

pub fn identity_gns(q: &Qds) -> GnsOperator {
    let n = q.dim() * q.dim();
    GnsOperator {
        matrix: CMat::identity(n, n),
        tag: GnsTag::U,
    }
}
