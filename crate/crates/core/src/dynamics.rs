//! Long-time behaviour: ergodic classification, Cesàro means, the symmetric
//! mean `Z_N`, trajectories and reversible-dilation checks.

use crate::algebra::{
    conditional_expectation, d_infinity, d_infinity_plus, multiplicative_domain,
    ConditionalExpectation, SubAlgebra,
};
use crate::error::{Error, Result};
use crate::gns::{contraction, v_limits};
use crate::numerics::{
    apply_map, eigenvalues, identity, kron, matrix_units, nullspace, op_norm, re, superop_from_fn,
    CMat, C64,
};
use crate::qds::{Channel, Qds};

/// Finite dimensions make the absolute Cesàro criterion coincide with the
/// mixing criterion, so the two flags always agree.
pub const WEAK_MIXING_NOTE: &str =
    "weakly_mixing equals mixing: both hold iff the peripheral spectrum is the simple eigenvalue 1";

#[derive(Debug, Clone, serde::Serialize)]
pub struct Classification {
    pub ergodic: bool,
    pub weakly_mixing: bool,
    pub mixing: bool,
    pub completely_irreversible: bool,
    pub asymptotic_equilibrium: bool,
    /// Largest modulus among non-peripheral eigenvalues of `Φ` (0 if none).
    pub second_modulus: f64,
    pub dim_d_infinity: usize,
    pub dim_fixed_space: usize,
    /// Distinct peripheral eigenvalues as `[re, im]`.
    pub peripheral_spectrum: Vec<[f64; 2]>,
    /// Ergodicity and mixing of `Φ` restricted to `D∞`.
    pub reversible_ergodic: bool,
    pub reversible_mixing: bool,
    /// `min_m ‖Φ^{2^m} − φ(·)I‖`.
    pub equilibrium_residual: Option<f64>,
    pub weak_mixing_note: &'static str,
}

const MAX_SQUARINGS: usize = 32;

/// Distinct eigenvalues of `m` with modulus at least `1 − rank_gap`, and
/// the largest modulus among the rest.
pub fn peripheral_split(m: &CMat, rank_gap: f64) -> (Vec<C64>, f64) {
    let mut peripheral: Vec<C64> = Vec::new();
    let mut second = 0.0f64;
    for l in eigenvalues(m) {
        if l.norm() >= 1.0 - rank_gap {
            if peripheral.iter().all(|p| (p - l).norm() > 1e-6) {
                peripheral.push(l);
            }
        } else {
            second = second.max(l.norm());
        }
    }
    peripheral.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    (peripheral, second)
}

pub fn classify(q: &Qds) -> Result<Classification> {
    let d_inf = d_infinity(q)?;
    classify_with(q, &d_inf)
}

pub fn classify_with(q: &Qds, d_inf: &SubAlgebra) -> Result<Classification> {
    let tol = q.tol();
    let u = contraction(q).matrix;
    let n = u.nrows();
    let fixed = nullspace(&(&u - CMat::identity(n, n)), 10.0 * tol.rank_gap).ncols();
    let (peripheral, second_modulus) = peripheral_split(&u, tol.rank_gap);
    let ergodic = fixed == 1;
    let mixing = ergodic && peripheral.len() == 1 && (peripheral[0] - re(1.0)).norm() <= 1e-6;
    let completely_irreversible = d_inf.dim() == 1;

    // The reversible part: Φ on D∞ is a unitary on H∞.
    let qd = d_inf.space().coords();
    let r = qd.adjoint() * &u * qd;
    let m = r.nrows();
    let rev_fixed = nullspace(&(&r - CMat::identity(m, m)), 10.0 * tol.rank_gap).ncols();
    let (rev_peripheral, _) = peripheral_split(&r, tol.rank_gap);
    let reversible_ergodic = rev_fixed == 1;
    let reversible_mixing = reversible_ergodic && rev_peripheral.len() == 1 && m == 1;
    if reversible_ergodic != ergodic || reversible_mixing != mixing {
        return Err(Error::ReversiblePartMismatch(format!(
            "ergodic {ergodic} vs {reversible_ergodic}, mixing {mixing} vs {reversible_mixing}"
        )));
    }

    let equilibrium_residual = equilibrium_limit_distance(q);
    let asymptotic_equilibrium = equilibrium_residual.0 <= tol.eq_tol.max(equilibrium_residual.1);
    let equilibrium_residual = Some(equilibrium_residual.0);

    Ok(Classification {
        ergodic,
        weakly_mixing: mixing,
        mixing,
        completely_irreversible,
        asymptotic_equilibrium,
        second_modulus,
        dim_d_infinity: d_inf.dim(),
        dim_fixed_space: fixed,
        peripheral_spectrum: peripheral.iter().map(|l| [l.re, l.im]).collect(),
        reversible_ergodic,
        reversible_mixing,
        equilibrium_residual,
        weak_mixing_note: WEAK_MIXING_NOTE,
    })
}

/// `min_m ‖Φ^{2^m} − φ(·)I‖` over `m ≤ 32` as a superoperator norm, with
/// the rounding floor `64 · 2^m · ε` at the minimizing `m`.
pub fn equilibrium_limit_distance(q: &Qds) -> (f64, f64) {
    let d = q.dim();
    let target = superop_from_fn(d, d, |a| identity(d) * q.phi(a));
    let mut p = q.channel().superop().clone();
    let mut best = (op_norm(&(&p - &target)), 64.0 * f64::EPSILON);
    for m in 1..=MAX_SQUARINGS {
        p = &p * &p;
        let dist = op_norm(&(&p - &target));
        if dist.is_nan() {
            break;
        }
        if dist < best.0 {
            best = (dist, 64.0 * (m as f64).exp2() * f64::EPSILON);
        }
    }
    best
}

/// `max_a ‖Φⁿ(a) − φ(a)I‖` over matrix units.
pub fn equilibrium_distance(q: &Qds, n: usize) -> f64 {
    let phi_n = q.channel().power(n);
    let d = q.dim();
    matrix_units(d)
        .iter()
        .map(|a| op_norm(&(phi_n.apply(a) - identity(d) * q.phi(a))))
        .fold(0.0, f64::max)
}

/// `(1/(N+1)) Σ_{k=0}^{N} [φ(a Φᵏ(b)) − φ(a)φ(b)]`.
pub fn correlation_mean(q: &Qds, a: &CMat, b: &CMat, n: usize) -> C64 {
    let base = q.phi(a) * q.phi(b);
    let mut x = b.clone();
    let mut total = C64::new(0.0, 0.0);
    for k in 0..=n {
        if k > 0 {
            x = q.channel().apply(&x);
        }
        total += q.phi(&(a * &x)) - base;
    }
    total / re((n + 1) as f64)
}

/// `E_k` together with the Cesàro residual `‖S_{N,k} − E_k‖`, measured as
/// an operator norm on `H_φ`.
#[derive(Debug, Clone)]
pub struct CesaroResult {
    pub k: i64,
    pub n: usize,
    pub expectation: ConditionalExpectation,
    pub residual: f64,
}

fn cesaro_gns(q: &Qds, k: i64, n: usize) -> CMat {
    let t = q.state().to_gns(q.tau_k(k).superop());
    let m = t.nrows();
    let mut power = CMat::identity(m, m);
    let mut sum = CMat::identity(m, m);
    for _ in 0..n {
        power = &power * &t;
        sum += &power;
    }
    sum / re((n + 1) as f64)
}

pub fn cesaro_expectation(q: &Qds, k: i64, n: usize) -> Result<CesaroResult> {
    if n == 0 {
        return Err(Error::InvalidParams("Cesàro mean needs N >= 1".into()));
    }
    let domain = multiplicative_domain(q, k)?;
    let expectation = conditional_expectation(&domain, q)?;
    let s = cesaro_gns(q, k, n);
    let residual = op_norm(&(s - expectation.gns_projector()));
    Ok(CesaroResult {
        k,
        n,
        expectation,
        residual,
    })
}

/// Residuals `‖S_{N,k} − E_k‖` for `N = 1..=n_max`.
pub fn cesaro_table(q: &Qds, k: i64, n_max: usize) -> Result<Vec<(usize, f64)>> {
    let domain = multiplicative_domain(q, k)?;
    let e = conditional_expectation(&domain, q)?;
    let t = q.state().to_gns(q.tau_k(k).superop());
    let m = t.nrows();
    let mut power = CMat::identity(m, m);
    let mut sum = CMat::identity(m, m);
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        power = &power * &t;
        sum += &power;
        let s = &sum / re((n + 1) as f64);
        out.push((n, op_norm(&(s - e.gns_projector()))));
    }
    Ok(out)
}

/// `max_{1 ≤ h ≤ k ≤ k_max} ‖E_h ∘ E_k − E_k‖`.
pub fn cesaro_consistency(q: &Qds, k_max: i64) -> Result<f64> {
    let mut es = Vec::new();
    for k in 1..=k_max {
        es.push(conditional_expectation(&multiplicative_domain(q, k)?, q)?);
    }
    let mut worst = 0.0f64;
    for k in 0..es.len() {
        for h in 0..=k {
            let composed = es[h].matrix() * es[k].matrix();
            worst = worst.max(op_norm(&(composed - es[k].matrix())));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct EPlus {
    pub expectation: ConditionalExpectation,
    /// `(k, ‖E_k − E₊‖)` for `k = 1..=k_stable`.
    pub distances: Vec<(i64, f64)>,
    pub state_preservation: f64,
}

/// Conditional expectation onto `D∞⁺`, compared with the `E_k`, `k ≥ 1`.
pub fn e_plus(q: &Qds) -> Result<EPlus> {
    let tol = q.tol();
    let target = d_infinity_plus(q)?;
    let expectation = conditional_expectation(&target, q)?;
    let mut distances = Vec::new();
    let cap = (q.dim() * q.dim()) as i64;
    for k in 1..=cap {
        let ek = conditional_expectation(&multiplicative_domain(q, k)?, q)?;
        let dist = op_norm(&(ek.gns_projector() - expectation.gns_projector()));
        distances.push((k, dist));
        if dist <= tol.eq_tol {
            break;
        }
    }
    let last = distances.last().map_or(f64::INFINITY, |p| p.1);
    if last > tol.eq_tol {
        return Err(Error::CertificateFailure {
            what: "E_k does not reach E₊".into(),
            residual: last,
        });
    }
    let state_preservation = matrix_units(q.dim())
        .iter()
        .map(|a| (q.phi(&expectation.apply(a)) - q.phi(a)).norm())
        .fold(0.0, f64::max);
    Ok(EPlus {
        expectation,
        distances,
        state_preservation,
    })
}

/// `Z_N = (1/(2N+1)) Σ_{k=−N}^{N} τ_k` and its relation to the limit map
/// `Z = ½(V₊ + V₋)` on `H_φ`.
#[derive(Debug, Clone)]
pub struct ZMean {
    pub n: usize,
    /// `Z_N` in column-stacking coordinates.
    pub superop: CMat,
    /// `‖Z_N − Z‖` on `H_φ`.
    pub residual_to_limit: f64,
    /// `‖Z_N − E∞‖` on `H_φ`.
    pub residual_to_e_infinity: f64,
    /// `‖Z − E∞‖` on `H_φ`.
    pub limit_vs_e_infinity: f64,
    /// `‖Z P∞ − P∞‖`, the statement `Z(a∥ + a⊥) = a∥ + Z(a⊥)`.
    pub split_residual: f64,
}

pub fn z_mean(q: &Qds, n: usize, e_inf: &ConditionalExpectation) -> Result<ZMean> {
    let tol = q.tol();
    let u = contraction(q).matrix;
    let ua = u.adjoint();
    let m = u.nrows();
    let mut fwd = CMat::identity(m, m);
    let mut bwd = CMat::identity(m, m);
    let mut sum = CMat::identity(m, m);
    for _ in 0..n {
        fwd = &fwd * &u;
        bwd = &bwd * &ua;
        // τ_k ↔ U*ᵏUᵏ, τ_{−k} ↔ UᵏU*ᵏ.
        sum += &bwd * &fwd + &fwd * &bwd;
    }
    let zn = sum / re((2 * n + 1) as f64);
    let limits = v_limits(q)?;
    let z = (&limits.v_plus.matrix + &limits.v_minus.matrix) * re(0.5);
    let p = e_inf.gns_projector();
    let residual_to_limit = op_norm(&(&zn - &z));
    let residual_to_e_infinity = op_norm(&(&zn - p));
    let limit_vs_e_infinity = op_norm(&(&z - p));
    let split_residual = op_norm(&(&z * p - p));
    if split_residual > tol.eq_tol {
        return Err(Error::CertificateFailure {
            what: "Z does not fix H∞".into(),
            residual: split_residual,
        });
    }
    Ok(ZMean {
        n,
        superop: q.state().from_gns(&zn),
        residual_to_limit,
        residual_to_e_infinity,
        limit_vs_e_infinity,
        split_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Adjoint,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayReport {
    pub second_modulus: f64,
    /// `max_j ‖Φʲ(a) − φ(a)I‖ / (second_modulusʲ ‖a − φ(a)I‖)`.
    pub max_ratio: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<CMat>,
    pub norms: Vec<f64>,
    /// `‖Φʲ(a) − φ(a)I‖`.
    pub equilibrium_distance: Vec<f64>,
    pub decay: Option<DecayReport>,
}

/// `[a, Φ(a), …, Φⁿ(a)]`, or the same with `Φ♯`.
pub fn evolve(q: &Qds, a: &CMat, n: usize, direction: Direction, d_inf_dim: usize) -> Trajectory {
    let map: &Channel = match direction {
        Direction::Forward => q.channel(),
        Direction::Adjoint => q.phi_sharp(),
    };
    let d = q.dim();
    let target = identity(d) * q.phi(a);
    let mut states = vec![a.clone()];
    for _ in 0..n {
        let next = map.apply(states.last().expect("non-empty"));
        states.push(next);
    }
    let norms = states.iter().map(op_norm).collect();
    let equilibrium_distance: Vec<f64> = states.iter().map(|x| op_norm(&(x - &target))).collect();
    let decay = (d_inf_dim == 1).then(|| {
        let u = contraction(q).matrix;
        let (_, second) = peripheral_split(&u, q.tol().rank_gap);
        let base = equilibrium_distance[0];
        let mut max_ratio = 0.0f64;
        let mut consistent = true;
        for (j, &dist) in equilibrium_distance.iter().enumerate() {
            let predicted = second.powi(j as i32) * base;
            if dist > 10.0 * predicted + q.tol().eq_tol {
                consistent = false;
            }
            if predicted > 0.0 && dist > q.tol().eq_tol {
                max_ratio = max_ratio.max(dist / predicted);
            }
        }
        DecayReport {
            second_modulus: second,
            max_ratio,
            consistent,
        }
    });
    Trajectory {
        states,
        norms,
        equilibrium_distance,
        decay,
    }
}

/// A reversible system `(M_D, X ↦ W* X W, φ̂)` with embedding and
/// expectation given as rectangular superoperators.
#[derive(Debug, Clone)]
pub struct Dilation {
    pub w: CMat,
    pub rho_hat: CMat,
    /// `D² × d²`.
    pub embed: CMat,
    /// `d² × D²`.
    pub expect: CMat,
}

impl Dilation {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn evolve(&self, x: &CMat) -> CMat {
        self.w.adjoint() * x * &self.w
    }

    pub fn embed(&self, a: &CMat) -> CMat {
        apply_map(&self.embed, a)
    }

    pub fn expect(&self, x: &CMat) -> CMat {
        apply_map(&self.expect, x)
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DilationReport {
    pub checks: Vec<NamedCheck>,
    /// Worst `‖Φ̂(i(a)) − i(Φ(a))‖` over the `D_Φ` basis.
    pub inside_residual: f64,
    /// Largest `‖Φ̂(i(a)) − i(Φ(a))‖` over a basis of the complement of `D_Φ`.
    pub outside_residual: f64,
}

impl DilationReport {
    pub fn check(&self, name: &str) -> Option<&NamedCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Property checks for a candidate reversible dilation of `q`. Mathematical
/// failures are reported, not raised.
pub fn verify_dilation(q: &Qds, hat: &Dilation, n_max: usize) -> Result<DilationReport> {
    let tol = q.tol();
    let d = q.dim();
    let big = hat.dim();
    if hat.embed.shape() != (big * big, d * d) || hat.expect.shape() != (d * d, big * big) {
        return Err(Error::DimensionMismatch {
            expected: big * big,
            found: hat.embed.nrows(),
        });
    }
    let mut checks = Vec::new();
    let mut push = |name: String, residual: f64, passed: bool| {
        checks.push(NamedCheck {
            name,
            passed,
            residual,
        })
    };
    let small = |r: f64| r <= tol.eq_tol;

    let unitary = op_norm(&(hat.w.adjoint() * &hat.w - identity(big)));
    push("dilation unitary".into(), unitary, small(unitary));
    let invariant = op_norm(&(&hat.w * &hat.rho_hat * hat.w.adjoint() - &hat.rho_hat));
    push("dilation state invariant".into(), invariant, small(invariant));

    let units = matrix_units(d);
    let unital = op_norm(&(hat.embed(&identity(d)) - identity(big)));
    push("embedding unital".into(), unital, small(unital));
    let star = units
        .iter()
        .map(|a| op_norm(&(hat.embed(&a.adjoint()) - hat.embed(a).adjoint())))
        .fold(0.0, f64::max);
    push("embedding *-preserving".into(), star, small(star));
    let mut mult = 0.0f64;
    for a in &units {
        for b in &units {
            mult = mult.max(op_norm(&(hat.embed(&(a * b)) - hat.embed(a) * hat.embed(b))));
        }
    }
    push("embedding multiplicative".into(), mult, small(mult));
    let smallest = hat
        .embed
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    push("embedding injective".into(), smallest, smallest > tol.rank_gap);

    let state = units
        .iter()
        .map(|a| ((&hat.rho_hat * hat.embed(a)).trace() - q.phi(a)).norm())
        .fold(0.0, f64::max);
    push("state compatibility".into(), state, small(state));

    let big_units = matrix_units(big);
    let e_unital = op_norm(&(hat.expect(&identity(big)) - identity(d)));
    push("expectation unital".into(), e_unital, small(e_unital));
    let e_state = big_units
        .iter()
        .map(|x| (q.phi(&hat.expect(x)) - (&hat.rho_hat * x).trace()).norm())
        .fold(0.0, f64::max);
    push("expectation state-preserving".into(), e_state, small(e_state));

    let mut module = 0.0f64;
    for a in &units {
        let ia = hat.embed(a);
        for x in &big_units {
            module = module.max(op_norm(&(hat.expect(&(&ia * x)) - a * hat.expect(x))));
        }
    }
    push("module identity".into(), module, small(module));

    let mut evolved: Vec<CMat> = units.iter().map(|a| hat.embed(a)).collect();
    for n in 1..=n_max {
        let phi_n = q.channel().power(n);
        let mut worst = 0.0f64;
        for (a, x) in units.iter().zip(evolved.iter_mut()) {
            *x = hat.evolve(x);
            worst = worst.max(op_norm(&(hat.expect(x) - phi_n.apply(a))));
        }
        push(format!("dilation identity n={n}"), worst, small(worst));
    }

    let domain = multiplicative_domain(q, 1)?;
    let gap = |a: &CMat| {
        op_norm(&(hat.evolve(&hat.embed(a)) - hat.embed(&q.channel().apply(a)))) / op_norm(a).max(1e-300)
    };
    let inside_residual = domain.basis().iter().map(&gap).fold(0.0, f64::max);
    let outside = domain.space().complement();
    let outside_residual = outside.basis().iter().map(&gap).fold(0.0, f64::max);
    let separates = inside_residual <= tol.eq_tol
        && (outside.dim() == 0 || outside_residual > 10.0 * tol.eq_tol);
    push(
        "biconditional".into(),
        if outside.dim() == 0 {
            inside_residual
        } else {
            outside_residual - inside_residual
        },
        separates,
    );

    Ok(DilationReport {
        checks,
        inside_residual,
        outside_residual,
    })
}

/// Two-outcome random-unitary dilation of dephasing:
/// `W = I ⊗ |0⟩⟨0| + σ_z ⊗ |1⟩⟨1|`, ancilla weights `((1+p)/2, (1−p)/2)`.
pub fn dephasing_dilation(q: &Qds, p: f64) -> Dilation {
    let weights = [(1.0 + p) / 2.0, (1.0 - p) / 2.0];
    let proj = |j: usize| crate::numerics::matrix_unit(2, j, j);
    let w = kron(&identity(2), &proj(0)) + kron(&crate::numerics::pauli_z(), &proj(1));
    let rho_hat = kron(q.state().rho(), &crate::numerics::diag(&weights));
    let embed = crate::numerics::superop_from_fn(2, 4, |a| kron(a, &identity(2)));
    let expect = crate::numerics::superop_from_fn(4, 2, |x| {
        let mut out = CMat::zeros(2, 2);
        for (j, &wj) in weights.iter().enumerate() {
            let e = kron(&identity(2), &crate::numerics::matrix_unit(2, j, j));
            // Compress onto ancilla level j.
            let block = &e * x * &e;
            for r in 0..2 {
                for c in 0..2 {
                    out[(r, c)] += block[(2 * r + j, 2 * c + j)] * re(wj);
                }
            }
        }
        out
    });
    Dilation {
        w,
        rho_hat,
        embed,
        expect,
    }
}

/// The dilation with a non-multiplicative embedding
/// `a ↦ a ⊗ I + 0.1 (a − tr(a)/d) ⊗ σ_x`.
pub fn corrupted_dilation(q: &Qds, p: f64) -> Dilation {
    let mut hat = dephasing_dilation(q, p);
    hat.embed = crate::numerics::superop_from_fn(2, 4, |a| {
        let centered = a - identity(2) * (a.trace() / re(2.0));
        kron(a, &identity(2)) + kron(&centered, &crate::numerics::pauli_x()) * re(0.1)
    });
    hat
}

/// `W = U` from the single Kraus operator of a unitary channel, trivial
/// embedding and expectation.
pub fn trivial_dilation(q: &Qds) -> Result<Dilation> {
    let kraus = q
        .channel()
        .kraus()
        .filter(|k| k.len() == 1)
        .ok_or_else(|| Error::PreconditionViolated("channel is not a single unitary conjugation".into()))?;
    let d = q.dim();
    let n = d * d;
    Ok(Dilation {
        w: kraus[0].clone(),
        rho_hat: q.state().rho().clone(),
        embed: CMat::identity(n, n),
        expect: CMat::identity(n, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::numerics::{diag, matrix_unit, pauli_x};

    #[test]
    fn classification_examples() {
        let c = classify(&fixtures::classical()).unwrap();
        assert!(c.ergodic && c.mixing && c.completely_irreversible && c.asymptotic_equilibrium);
        assert!((c.second_modulus - 0.6).abs() < 1e-10);
        let s = classify(&fixtures::shift_dephase()).unwrap();
        assert!(s.ergodic && !s.mixing && !s.completely_irreversible);
        assert_eq!(s.dim_d_infinity, 3);
        let u = classify(&fixtures::unitary()).unwrap();
        assert!(!u.ergodic);
        let d = classify(&fixtures::dephasing()).unwrap();
        assert!(!d.ergodic && !d.mixing);
    }

    #[test]
    fn correlation_examples() {
        let q = fixtures::dephasing();
        let a = CMat::from_row_slice(2, 2, &[re(1.0), re(2.0), re(0.5), re(-3.0)]);
        assert!(correlation_mean(&q, &a, &identity(2), 7).norm() < 1e-14);
        let sx = pauli_x();
        let expect = (1.0 - 0.5f64.powi(10)) / (0.5 * 10.0);
        assert!((correlation_mean(&q, &sx, &sx, 9) - re(expect)).norm() < 1e-14);
        let c = fixtures::classical();
        let z = diag(&[1.0, -3.0]);
        // φ(z) = 0, Var = 3, decay factor 0.6.
        let closed = 3.0 * (1.0 - 0.6f64.powi(41)) / (0.4 * 41.0);
        assert!((correlation_mean(&c, &z, &z, 40) - re(closed)).norm() < 1e-12);
    }

    #[test]
    fn cesaro_examples() {
        let u = cesaro_expectation(&fixtures::unitary(), 1, 1).unwrap();
        assert!(u.residual < 1e-12);
        let q = cesaro_expectation(&fixtures::dephasing(), 1, 9).unwrap();
        let closed = (1.0 - 0.25f64.powi(10)) / (10.0 * 0.75);
        assert!((q.residual - closed).abs() < 1e-12);
        assert!(op_norm(&q.expectation.apply(&pauli_x())) < 1e-12);
        let c = cesaro_expectation(&fixtures::classical(), 1, 200).unwrap();
        assert!(c.residual <= 1e-2);
    }

    #[test]
    fn e_plus_examples() {
        let q = fixtures::dephasing();
        let e = e_plus(&q).unwrap();
        assert!(op_norm(&e.expectation.apply(&pauli_x())) < 1e-12);
        let c = e_plus(&fixtures::classical()).unwrap();
        let a = diag(&[2.0, 0.0]);
        assert!(op_norm(&(c.expectation.apply(&a) - identity(2) * re(1.5))) < 1e-12);
    }

    #[test]
    fn evolve_examples() {
        let q = fixtures::dephasing();
        let t = evolve(&q, &pauli_x(), 10, Direction::Forward, 2);
        for (n, norm) in t.norms.iter().enumerate() {
            assert!((norm - 0.5f64.powi(n as i32)).abs() < 1e-14);
        }
        let c = fixtures::classical();
        let t = evolve(&c, &matrix_unit(2, 0, 0), 30, Direction::Forward, 1);
        for (n, dist) in t.equilibrium_distance.iter().enumerate() {
            assert!((dist - 0.75 * 0.6f64.powi(n as i32)).abs() < 1e-12);
        }
        assert!(t.decay.unwrap().consistent);
        let i = evolve(&c, &identity(2), 5, Direction::Adjoint, 1);
        assert!(i.states.iter().all(|x| op_norm(&(x - identity(2))) < 1e-14));
    }

    #[test]
    fn dilation_examples() {
        let q = fixtures::dephasing();
        let r = verify_dilation(&q, &dephasing_dilation(&q, 0.5), 3).unwrap();
        assert!(r.check("dilation identity n=1").unwrap().passed);
        assert!(!r.check("dilation identity n=2").unwrap().passed);
        assert!(r.check("biconditional").unwrap().passed);
        assert!(r.check("embedding multiplicative").unwrap().passed);
        let bad = verify_dilation(&q, &corrupted_dilation(&q, 0.5), 1).unwrap();
        assert!(!bad.check("embedding multiplicative").unwrap().passed);
        let u = fixtures::unitary();
        let tr = verify_dilation(&u, &trivial_dilation(&u).unwrap(), 4).unwrap();
        assert!(tr.all_passed(), "{:?}", tr.checks);
    }
}
