//! Quantum dynamical systems `(M_d, Φ, φ)`: channels, faithful states and the
//! validated triple with its φ-adjoint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    apply_superop, c, hermitian_eigen, hermitian_fn, identity, is_finite, kron, left_superop,
    matrix_unit, min_hermitian_eigenvalue, op_norm, re, right_superop, sandwich_superop, CMat,
    InnerProduct, Tolerance, C64,
};

/// Unital map on `M_d` in the Heisenberg picture, `Φ(a) = Σ K_i† a K_i`.
#[derive(Debug, Clone)]
pub struct Channel {
    dim: usize,
    kraus: Option<Vec<CMat>>,
    superop: CMat,
}

impl Channel {
    pub fn from_kraus(kraus: Vec<CMat>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidState("empty Kraus list".into()))?;
        let d = first.nrows();
        let mut superop = CMat::zeros(d * d, d * d);
        for k in &kraus {
            if k.shape() != (d, d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: k.nrows(),
                });
            }
            if !is_finite(k) {
                return Err(Error::NonFinite);
            }
            superop += sandwich_superop(&k.adjoint(), k);
        }
        Ok(Self {
            dim: d,
            kraus: Some(kraus),
            superop,
        })
    }

    pub fn from_superop(superop: CMat) -> Result<Self> {
        let n = superop.nrows();
        let d = (n as f64).sqrt().round() as usize;
        if superop.ncols() != n || d * d != n {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: superop.ncols(),
            });
        }
        if !is_finite(&superop) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            dim: d,
            kraus: None,
            superop,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            dim: d,
            kraus: Some(vec![identity(d)]),
            superop: CMat::identity(d * d, d * d),
        }
    }

    /// Channel of a linear map given pointwise.
    pub fn from_fn(d: usize, f: impl Fn(&CMat) -> CMat) -> Self {
        let mut superop = CMat::zeros(d * d, d * d);
        for j in 0..d {
            for i in 0..d {
                let image = f(&matrix_unit(d, i, j));
                superop.set_column(j * d + i, &crate::numerics::vectorize(&image));
            }
        }
        Self {
            dim: d,
            kraus: None,
            superop,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> Option<&[CMat]> {
        self.kraus.as_deref()
    }

    pub fn superop(&self) -> &CMat {
        &self.superop
    }

    pub fn apply(&self, a: &CMat) -> CMat {
        apply_superop(&self.superop, a)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Channel) -> Channel {
        Channel {
            dim: self.dim,
            kraus: None,
            superop: &self.superop * &other.superop,
        }
    }

    pub fn power(&self, n: usize) -> Channel {
        let m = self.dim * self.dim;
        let mut result = CMat::identity(m, m);
        let mut base = self.superop.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Channel {
            dim: self.dim,
            kraus: if n == 0 { Some(vec![identity(self.dim)]) } else { None },
            superop: result,
        }
    }

    /// Trace dual `Φ_*`, defined by `tr(Φ_*(x) a) = tr(x Φ(a))`.
    pub fn trace_dual(&self) -> Channel {
        let t = transpose_permutation(self.dim);
        Channel {
            dim: self.dim,
            kraus: None,
            superop: &t * self.superop.transpose() * &t,
        }
    }

    /// Choi matrix `Σ E_ij ⊗ Φ(E_ij)`.
    pub fn choi(&self) -> CMat {
        let d = self.dim;
        let mut out = CMat::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let e = matrix_unit(d, i, j);
                out += kron(&e, &self.apply(&e));
            }
        }
        out
    }

    pub fn unital_residual(&self) -> f64 {
        let id = identity(self.dim);
        op_norm(&(self.apply(&id) - id))
    }

    pub fn choi_min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.choi())
    }
}

/// Permutation with `vec(x^T) = T vec(x)`.
pub fn transpose_permutation(d: usize) -> CMat {
    let mut t = CMat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            t[(i * d + j, j * d + i)] = re(1.0);
        }
    }
    t
}

/// Faithful density matrix with cached spectral data.
#[derive(Debug, Clone)]
pub struct SystemState {
    rho: CMat,
    eigvals: Vec<f64>,
    eigvecs: CMat,
    log_rho: CMat,
    sqrt_rho: CMat,
    inv_sqrt_rho: CMat,
    inv_rho: CMat,
}

impl SystemState {
    pub fn new(rho: CMat, tol: &Tolerance) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::DimensionMismatch {
                expected: rho.nrows(),
                found: rho.ncols(),
            });
        }
        if !is_finite(&rho) {
            return Err(Error::NonFinite);
        }
        let herm = op_norm(&(&rho - rho.adjoint()));
        if herm > tol.eq_tol {
            return Err(Error::InvalidState(format!(
                "density matrix is not Hermitian (residual {herm:e})"
            )));
        }
        let tr = rho.trace();
        if (tr - re(1.0)).norm() > tol.eq_tol {
            return Err(Error::InvalidState(format!(
                "density matrix trace is {} instead of 1",
                tr.re
            )));
        }
        let (eigvals, eigvecs) = hermitian_eigen(&rho);
        let max = eigvals.last().copied().unwrap_or(0.0);
        let min = eigvals.first().copied().unwrap_or(0.0);
        if max <= 0.0 || min <= tol.rank_gap * max {
            return Err(Error::NotFaithful {
                ratio: if max > 0.0 { min / max } else { 0.0 },
            });
        }
        let spectral = |f: &dyn Fn(f64) -> f64| {
            let fd = CMat::from_diagonal(&crate::numerics::CVec::from_iterator(
                eigvals.len(),
                eigvals.iter().map(|&v| re(f(v))),
            ));
            &eigvecs * fd * eigvecs.adjoint()
        };
        let log_rho = spectral(&f64::ln);
        let sqrt_rho = spectral(&f64::sqrt);
        let inv_sqrt_rho = spectral(&|v| 1.0 / v.sqrt());
        let inv_rho = spectral(&|v| 1.0 / v);
        Ok(Self {
            rho: crate::numerics::hermitian_part(&rho),
            eigvals,
            eigvecs,
            log_rho,
            sqrt_rho,
            inv_sqrt_rho,
            inv_rho,
        })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::new(identity(d) * re(1.0 / d as f64), &Tolerance::default())
            .expect("maximally mixed state is faithful")
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &CMat {
        &self.rho
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &CMat {
        &self.eigvecs
    }

    pub fn log_rho(&self) -> &CMat {
        &self.log_rho
    }

    pub fn sqrt_rho(&self) -> &CMat {
        &self.sqrt_rho
    }

    pub fn inv_sqrt_rho(&self) -> &CMat {
        &self.inv_sqrt_rho
    }

    pub fn inv_rho(&self) -> &CMat {
        &self.inv_rho
    }

    /// `φ(x) = tr(ρ x)`.
    pub fn phi(&self, x: &CMat) -> C64 {
        (&self.rho * x).trace()
    }

    /// `φ(x* y)`.
    pub fn inner(&self, x: &CMat, y: &CMat) -> C64 {
        (&self.rho * x.adjoint() * y).trace()
    }

    pub fn inner_product(&self) -> InnerProduct {
        InnerProduct::State {
            sqrt_rho: self.sqrt_rho.clone(),
            inv_sqrt_rho: self.inv_sqrt_rho.clone(),
        }
    }

    /// `Δ(x) = ρ x ρ^{-1}`.
    pub fn modular_delta(&self, x: &CMat) -> CMat {
        &self.rho * x * &self.inv_rho
    }

    /// `J(x) = ρ^{1/2} x† ρ^{-1/2}`.
    pub fn modular_j(&self, x: &CMat) -> CMat {
        &self.sqrt_rho * x.adjoint() * &self.inv_sqrt_rho
    }

    /// `σ_t(x) = ρ^{it} x ρ^{-it}`.
    pub fn modular_orbit(&self, x: &CMat, t: f64) -> CMat {
        let u = hermitian_fn(&self.rho, |v| C64::from_polar(1.0, t * v.ln()));
        &u * x * u.adjoint()
    }

    /// Superoperator of the modular generator `x ↦ Hx − xH`, `H = log ρ`.
    pub fn modular_generator(&self) -> CMat {
        left_superop(&self.log_rho) - right_superop(&self.log_rho)
    }

    /// `R` with `vec(x ρ^{1/2}) = R vec(x)`.
    pub fn gns_map(&self) -> CMat {
        kron(&self.sqrt_rho.transpose(), &identity(self.dim()))
    }

    pub fn gns_map_inverse(&self) -> CMat {
        kron(&self.inv_sqrt_rho.transpose(), &identity(self.dim()))
    }

    /// A superoperator expressed in orthonormal GNS coordinates.
    pub fn to_gns(&self, superop: &CMat) -> CMat {
        self.gns_map() * superop * self.gns_map_inverse()
    }

    pub fn from_gns(&self, matrix: &CMat) -> CMat {
        self.gns_map_inverse() * matrix * self.gns_map()
    }
}

/// Residuals measured while validating a system.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ValidationResiduals {
    pub unital: f64,
    pub choi_min_eigenvalue: f64,
    pub schwarz_min_eigenvalue: Option<f64>,
    pub invariance: f64,
    pub modular_commutation: f64,
    pub sharp_choi_min_eigenvalue: f64,
    pub pairing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct QdsFlags {
    pub invariant: bool,
    pub modular_commuting: bool,
}

/// A validated quantum dynamical system with its φ-adjoint.
#[derive(Debug, Clone)]
pub struct Qds {
    channel: Channel,
    state: SystemState,
    adjoint_channel: Channel,
    tol: Tolerance,
    flags: QdsFlags,
    residuals: ValidationResiduals,
}

const SCHWARZ_SAMPLES: usize = 100;
const SCHWARZ_SEED: u64 = 0x5c4a_72a2;

/// `ρ^{-1} Φ_*(ρ ·)` as a channel.
pub fn phi_adjoint_channel(channel: &Channel, state: &SystemState) -> Channel {
    let dual = channel.trace_dual();
    Channel {
        dim: channel.dim,
        kraus: None,
        superop: left_superop(state.inv_rho()) * dual.superop() * left_superop(state.rho()),
    }
}

fn random_matrix(rng: &mut impl Rng, d: usize) -> CMat {
    CMat::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn schwarz_min_eigenvalue(channel: &Channel) -> f64 {
    let d = channel.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(SCHWARZ_SEED);
    let mut worst = f64::INFINITY;
    for _ in 0..SCHWARZ_SAMPLES {
        let a = random_matrix(&mut rng, d);
        let scale = op_norm(&a).powi(2).max(f64::MIN_POSITIVE);
        let fa = channel.apply(&a);
        let gap = channel.apply(&(a.adjoint() * &a)) - fa.adjoint() * fa;
        worst = worst.min(min_hermitian_eigenvalue(&gap) / scale);
    }
    worst
}

impl Qds {
    /// Checks every standing hypothesis and builds `Φ♯`.
    pub fn validate(channel: Channel, state: SystemState, tol: Tolerance) -> Result<Self> {
        tol.validate()?;
        let d = state.dim();
        if channel.dim != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: channel.dim,
            });
        }

        let unital = channel.unital_residual();
        if unital > tol.eq_tol {
            return Err(Error::NotUnital { residual: unital });
        }

        let choi = channel.choi();
        let choi_min = min_hermitian_eigenvalue(&choi);
        if choi_min < -tol.eq_tol * op_norm(&choi).max(1.0) {
            return Err(Error::NotCp {
                min_eigenvalue: choi_min,
            });
        }

        let schwarz = if channel.kraus.is_none() {
            let s = schwarz_min_eigenvalue(&channel);
            if s < -tol.eq_tol {
                return Err(Error::NotSchwarz { min_eigenvalue: s });
            }
            Some(s)
        } else {
            None
        };

        let image = channel.trace_dual().apply(state.rho());
        let invariance = op_norm(&(image - state.rho()));
        if invariance > tol.eq_tol {
            return Err(Error::NotInvariantState {
                residual: invariance,
            });
        }

        let gen = state.modular_generator();
        let s = channel.superop();
        let modular = op_norm(&(s * &gen - &gen * s)) / op_norm(&gen).max(1.0);
        if modular > tol.eq_tol {
            return Err(Error::NoModularCommutation {
                detail: "Φ does not commute with the modular generator ad(log ρ)".into(),
                residual: modular,
            });
        }

        let sharp = phi_adjoint_channel(&channel, &state);
        let sharp_choi = sharp.choi();
        let sharp_min = min_hermitian_eigenvalue(&sharp_choi);
        if sharp_min < -tol.eq_tol * op_norm(&sharp_choi).max(1.0) {
            return Err(Error::NoModularCommutation {
                detail: "the φ-adjoint is not completely positive".into(),
                residual: -sharp_min,
            });
        }

        let pairing = pairing_residual(&channel, &sharp, &state);
        if pairing > tol.eq_tol {
            return Err(Error::NoModularCommutation {
                detail: "pairing φ(bΦ(a)) = φ(Φ♯(b)a) fails".into(),
                residual: pairing,
            });
        }

        Ok(Self {
            channel,
            state,
            adjoint_channel: sharp,
            tol,
            flags: QdsFlags {
                invariant: true,
                modular_commuting: true,
            },
            residuals: ValidationResiduals {
                unital,
                choi_min_eigenvalue: choi_min,
                schwarz_min_eigenvalue: schwarz,
                invariance,
                modular_commutation: modular,
                sharp_choi_min_eigenvalue: sharp_min,
                pairing,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn tol(&self) -> &Tolerance {
        &self.tol
    }

    pub fn flags(&self) -> QdsFlags {
        self.flags
    }

    pub fn residuals(&self) -> &ValidationResiduals {
        &self.residuals
    }

    /// A copy of the system with other numerical thresholds.
    pub fn with_tolerance(&self, tol: Tolerance) -> Result<Self> {
        tol.validate()?;
        let mut q = self.clone();
        q.tol = tol;
        Ok(q)
    }

    pub fn phi_sharp(&self) -> &Channel {
        &self.adjoint_channel
    }

    /// `Φ^k` for `k ≥ 0`, `(Φ♯)^{|k|}` for `k < 0`.
    pub fn phi_k(&self, k: i64) -> Channel {
        if k >= 0 {
            self.channel.power(k as usize)
        } else {
            self.adjoint_channel.power(k.unsigned_abs() as usize)
        }
    }

    /// `τ_k = Φ_{-k} ∘ Φ_k`.
    pub fn tau_k(&self, k: i64) -> Channel {
        if k == 0 {
            return Channel::identity(self.dim());
        }
        self.phi_k(-k).compose(&self.phi_k(k))
    }

    /// `S_k(a, b) = Φ_k(a* b) − Φ_k(a*) Φ_k(b)`.
    pub fn sk_form(&self, k: i64, a: &CMat, b: &CMat) -> CMat {
        let map = self.phi_k(k);
        map.apply(&(a.adjoint() * b)) - map.apply(&a.adjoint()) * map.apply(b)
    }

    pub fn modular_orbit(&self, x: &CMat, t: f64) -> CMat {
        self.state.modular_orbit(x, t)
    }

    pub fn phi(&self, x: &CMat) -> C64 {
        self.state.phi(x)
    }
}

/// `max |φ(b Φ(a)) − φ(Φ♯(b) a)|` over matrix units.
pub fn pairing_residual(channel: &Channel, sharp: &Channel, state: &SystemState) -> f64 {
    let d = state.dim();
    let units: Vec<CMat> = (0..d * d).map(|n| matrix_unit(d, n % d, n / d)).collect();
    let images: Vec<CMat> = units.iter().map(|a| channel.apply(a)).collect();
    let back: Vec<CMat> = units.iter().map(|b| sharp.apply(b)).collect();
    let mut worst = 0.0f64;
    for (ai, a) in units.iter().enumerate() {
        for (bi, b) in units.iter().enumerate() {
            let lhs = state.phi(&(b * &images[ai]));
            let rhs = state.phi(&(&back[bi] * a));
            worst = worst.max((lhs - rhs).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::numerics::{diag, pauli_x};

    #[test]
    fn dephasing_is_self_adjoint() {
        let q = fixtures::dephasing();
        let diff = q.phi_sharp().superop() - q.channel().superop();
        assert!(op_norm(&diff) < 1e-12);
    }

    #[test]
    fn identity_channel_accepted() {
        let state = SystemState::new(diag(&[0.3, 0.5, 0.2]), &Tolerance::default()).unwrap();
        let q = Qds::validate(Channel::identity(3), state, Tolerance::default()).unwrap();
        assert!(op_norm(&(q.phi_sharp().superop() - CMat::identity(9, 9))) < 1e-12);
    }

    #[test]
    fn amplitude_damping_rejected() {
        let err = fixtures::amplitude_damping_system(0.3).unwrap_err();
        assert!(matches!(err, Error::NotInvariantState { .. }), "{err:?}");
    }

    #[test]
    fn trace_dual_matches_kraus_form() {
        let q = fixtures::classical();
        let x = CMat::from_row_slice(2, 2, &[re(0.3), c(0.1, 0.2), c(-0.4, 0.0), c(0.0, 1.0)]);
        let mut direct = CMat::zeros(2, 2);
        for k in q.channel().kraus().unwrap() {
            direct += k * &x * k.adjoint();
        }
        let via = q.channel().trace_dual().apply(&x);
        assert!(op_norm(&(direct - via)) < 1e-14);
    }

    #[test]
    fn phi_k_and_tau_k_on_dephasing() {
        let q = fixtures::dephasing();
        let e01 = matrix_unit(2, 0, 1);
        assert!(op_norm(&(q.phi_k(3).apply(&e01) - &e01 * re(0.125))) < 1e-14);
        assert!(op_norm(&(q.phi_k(0).superop() - CMat::identity(4, 4))) < 1e-15);
        assert!(op_norm(&(q.phi_k(-1).superop() - q.phi_k(1).superop())) < 1e-12);
        assert!(op_norm(&(q.tau_k(1).apply(&e01) - &e01 * re(0.25))) < 1e-12);
    }

    #[test]
    fn tau_k_is_identity_for_unitary_channel() {
        let q = fixtures::unitary();
        for k in [-2, -1, 0, 1, 3] {
            assert!(op_norm(&(q.tau_k(k).superop() - CMat::identity(4, 4))) < 1e-12);
        }
    }

    #[test]
    fn sk_form_examples() {
        let q = fixtures::dephasing();
        let id = identity(2);
        assert!(op_norm(&q.sk_form(1, &id, &id)) < 1e-14);
        let sx = pauli_x();
        assert!(op_norm(&(q.sk_form(1, &sx, &sx) - &id * re(0.75))) < 1e-14);
        let e00 = matrix_unit(2, 0, 0);
        assert!(op_norm(&q.sk_form(1, &e00, &e00)) < 1e-14);
    }

    #[test]
    fn modular_orbit_examples() {
        let q = fixtures::dephasing();
        let e01 = matrix_unit(2, 0, 1);
        assert!(op_norm(&(q.modular_orbit(&e01, 0.0) - &e01)) < 1e-14);
        let phase = C64::from_polar(1.0, (0.6f64 / 0.4).ln());
        assert!(op_norm(&(q.modular_orbit(&e01, 1.0) - &e01 * phase)) < 1e-14);
        let dg = diag(&[2.0, -1.0]);
        assert!(op_norm(&(q.modular_orbit(&dg, 2.7) - &dg)) < 1e-14);
    }

    #[test]
    fn classical_reversal_matches_formula() {
        let q = fixtures::classical();
        let p = [[0.9, 0.1], [0.3, 0.7]];
        let pi = [0.75, 0.25];
        let mut p_hat = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                p_hat[i][j] = pi[j] * p[j][i] / pi[i];
            }
        }
        let hat = fixtures::classical_channel(&p_hat).unwrap();
        let diff = q.phi_sharp().superop() - hat.superop();
        assert!(op_norm(&diff) < 1e-12);
    }

    #[test]
    fn non_unital_and_non_cp_rejected() {
        let tol = Tolerance::default();
        let state = SystemState::maximally_mixed(2);
        let k = diag(&[1.0, 0.5]);
        let ch = Channel::from_kraus(vec![k]).unwrap();
        assert!(matches!(
            Qds::validate(ch, state.clone(), tol),
            Err(Error::NotUnital { .. })
        ));
        let transpose = Channel::from_fn(2, |a| a.transpose());
        assert!(matches!(
            Qds::validate(transpose, state, tol),
            Err(Error::NotCp { .. })
        ));
    }

    #[test]
    fn non_commuting_channel_rejected() {
        // Unitary conjugation that does not commute with ρ.
        let h = CMat::from_row_slice(2, 2, &[re(1.0), re(1.0), re(1.0), re(-1.0)]) * re(0.5f64.sqrt());
        let ch = Channel::from_kraus(vec![h]).unwrap();
        let state = SystemState::new(diag(&[0.6, 0.4]), &Tolerance::default()).unwrap();
        let err = Qds::validate(ch, state, Tolerance::default()).unwrap_err();
        assert!(
            matches!(err, Error::NotInvariantState { .. } | Error::NoModularCommutation { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn state_rejections() {
        let tol = Tolerance::default();
        assert!(matches!(
            SystemState::new(diag(&[1.0, 0.0]), &tol),
            Err(Error::NotFaithful { .. })
        ));
        assert!(matches!(
            SystemState::new(diag(&[0.5, 0.6]), &tol),
            Err(Error::InvalidState(_))
        ));
    }
}
