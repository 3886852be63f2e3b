//! Reference systems: dephasing, diagonal unitary, classical Markov chain,
//! cyclic shift with dephasing, amplitude damping, and seeded random
//! modular-covariant channels.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{c, diag, identity, matrix_unit, pauli_z, re, CMat, Tolerance, C64};
use crate::qds::{Channel, Qds, SystemState};

/// An unvalidated channel together with its candidate invariant state.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub channel: Channel,
    pub rho: CMat,
}

impl SystemSpec {
    pub fn validate(self, tol: Tolerance) -> Result<Qds> {
        let state = SystemState::new(self.rho, &tol)?;
        Qds::validate(self.channel, state, tol)
    }
}

fn check_probabilities(rho: &[f64]) -> Result<()> {
    if rho.is_empty() {
        return Err(Error::InvalidParams("rho spectrum is empty".into()));
    }
    if rho.iter().any(|&r| !r.is_finite() || r <= 0.0) {
        return Err(Error::InvalidParams("rho entries must be positive".into()));
    }
    let total: f64 = rho.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!("rho entries sum to {total}, not 1")));
    }
    Ok(())
}

/// `Φ(a) = p a + (1 − p) diag(a)` with diagonal `ρ`.
pub fn dephasing_spec(p: f64, rho: &[f64]) -> Result<SystemSpec> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("p = {p} outside [0, 1]")));
    }
    check_probabilities(rho)?;
    let d = rho.len();
    let kraus = if d == 2 {
        vec![
            identity(2) * re(((1.0 + p) / 2.0).sqrt()),
            pauli_z() * re(((1.0 - p) / 2.0).sqrt()),
        ]
    } else {
        let mut k = vec![identity(d) * re(p.sqrt())];
        for i in 0..d {
            k.push(matrix_unit(d, i, i) * re((1.0 - p).sqrt()));
        }
        k
    };
    Ok(SystemSpec {
        channel: Channel::from_kraus(kraus)?,
        rho: diag(rho),
    })
}

/// `Φ(a) = U† a U` with `U = diag(e^{iθ_j})`, diagonal `ρ`.
pub fn unitary_spec(phases: &[f64], rho: &[f64]) -> Result<SystemSpec> {
    check_probabilities(rho)?;
    if phases.len() != rho.len() {
        return Err(Error::InvalidParams(format!(
            "{} phases for dimension {}",
            phases.len(),
            rho.len()
        )));
    }
    let d = rho.len();
    let mut u = CMat::zeros(d, d);
    for (j, &t) in phases.iter().enumerate() {
        u[(j, j)] = C64::from_polar(1.0, t);
    }
    Ok(SystemSpec {
        channel: Channel::from_kraus(vec![u])?,
        rho: diag(rho),
    })
}

fn check_stochastic(p: &[Vec<f64>]) -> Result<usize> {
    let d = p.len();
    if d == 0 {
        return Err(Error::InvalidParams("empty transition matrix".into()));
    }
    for (i, row) in p.iter().enumerate() {
        if row.len() != d {
            return Err(Error::InvalidParams(format!("row {i} has {} entries", row.len())));
        }
        if row.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::InvalidParams(format!("row {i} has a negative entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("row {i} sums to {s}")));
        }
    }
    Ok(d)
}

/// Channel of a stochastic matrix, `Φ(a) = diag(P · diag(a))`, with Kraus
/// operators `√P_ij E_ji`.
pub fn classical_channel<R: AsRef<[f64]>>(p: &[R]) -> Result<Channel> {
    let rows: Vec<Vec<f64>> = p.iter().map(|r| r.as_ref().to_vec()).collect();
    let d = check_stochastic(&rows)?;
    let mut kraus = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &pij) in row.iter().enumerate() {
            if pij > 0.0 {
                kraus.push(matrix_unit(d, j, i) * re(pij.sqrt()));
            }
        }
    }
    Channel::from_kraus(kraus)
}

/// Stationary law `π P = π` of an irreducible chain.
pub fn stationary_distribution<R: AsRef<[f64]>>(p: &[R]) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = p.iter().map(|r| r.as_ref().to_vec()).collect();
    let d = check_stochastic(&rows)?;
    // Solve (P^T − I) π = 0 with the last equation replaced by Σ π = 1.
    let mut a = nalgebra::DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = rows[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(d);
    b[d - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidParams("stationary law is not unique".into()))?;
    if pi.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParams(
            "stationary law is not strictly positive (chain not irreducible)".into(),
        ));
    }
    Ok(pi.iter().copied().collect())
}

pub fn classical_spec<R: AsRef<[f64]>>(p: &[R]) -> Result<SystemSpec> {
    let pi = stationary_distribution(p)?;
    Ok(SystemSpec {
        channel: classical_channel(p)?,
        rho: diag(&pi),
    })
}

/// Kraus `K_i = E_{i+1 mod d, i}`, maximally mixed `ρ`.
pub fn shift_dephase_spec(d: usize) -> Result<SystemSpec> {
    if d < 2 {
        return Err(Error::InvalidParams("shift needs d >= 2".into()));
    }
    let kraus = (0..d).map(|i| matrix_unit(d, (i + 1) % d, i)).collect();
    Ok(SystemSpec {
        channel: Channel::from_kraus(kraus)?,
        rho: identity(d) * re(1.0 / d as f64),
    })
}

pub fn amplitude_damping_spec(gamma: f64, rho: &[f64]) -> Result<SystemSpec> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParams(format!("gamma = {gamma} outside [0, 1]")));
    }
    check_probabilities(rho)?;
    let k0 = CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re((1.0 - gamma).sqrt())]);
    let k1 = CMat::from_row_slice(2, 2, &[re(0.0), re(gamma.sqrt()), re(0.0), re(0.0)]);
    Ok(SystemSpec {
        channel: Channel::from_kraus(vec![k0, k1])?,
        rho: diag(rho),
    })
}

fn expect(spec: Result<SystemSpec>) -> Qds {
    spec.and_then(|s| s.validate(Tolerance::default()))
        .expect("reference fixture validates")
}

/// Dephasing with `p = 0.5`, `ρ = diag(0.6, 0.4)`.
pub fn dephasing() -> Qds {
    expect(dephasing_spec(0.5, &[0.6, 0.4]))
}

/// `U = diag(1, e^{i})`, `ρ = diag(0.6, 0.4)`.
pub fn unitary() -> Qds {
    expect(unitary_spec(&[0.0, 1.0], &[0.6, 0.4]))
}

pub const CLASSICAL_P: [[f64; 2]; 2] = [[0.9, 0.1], [0.3, 0.7]];

/// Two-state chain `P = [[0.9, 0.1], [0.3, 0.7]]`, `π = (0.75, 0.25)`.
pub fn classical() -> Qds {
    expect(classical_spec(&CLASSICAL_P))
}

/// Cyclic shift composed with dephasing on `d = 3`.
pub fn shift_dephase() -> Qds {
    expect(shift_dephase_spec(3))
}

pub fn amplitude_damping_system(gamma: f64) -> Result<Qds> {
    amplitude_damping_spec(gamma, &[0.6, 0.4])?.validate(Tolerance::default())
}

/// The named reference systems (all validate).
pub fn all() -> Vec<(&'static str, Qds)> {
    vec![
        ("dephasing", dephasing()),
        ("classical", classical()),
        ("unitary", unitary()),
        ("shift_dephase", shift_dephase()),
        ("identity", identity_system()),
    ]
}

/// Identity channel on `d = 2` with `ρ = diag(0.7, 0.3)`.
pub fn identity_system() -> Qds {
    let state = SystemState::new(diag(&[0.7, 0.3]), &Tolerance::default()).expect("faithful");
    Qds::validate(Channel::identity(2), state, Tolerance::default()).expect("identity validates")
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller; avoids an extra distribution dependency.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary(rng: &mut impl Rng, d: usize) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| c(gaussian(rng), gaussian(rng)));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut phases = CMat::zeros(d, d);
    for i in 0..d {
        let rii = r[(i, i)];
        phases[(i, i)] = if rii.norm() > 0.0 { rii / rii.norm() } else { re(1.0) };
    }
    q * phases
}

/// Seeded convex combination of channels sharing a faithful invariant state
/// and commuting with its modular group: block unitaries within eigenspaces
/// of `ρ`, eigenbasis dephasing, and a reversible classical chain with the
/// spectrum of `ρ` as stationary law. The whole system is finally rotated by
/// a random unitary.
pub fn random_covariant_spec(d: usize, seed: u64) -> Result<SystemSpec> {
    if d == 0 || d > 8 {
        return Err(Error::InvalidParams(format!("random_covariant supports 1 <= d <= 8, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Grouped spectrum: consecutive levels share an eigenvalue with some probability.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..d {
        match groups.last_mut() {
            Some(g) if rng.gen_bool(0.35) => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let weights: Vec<f64> = groups.iter().map(|_| rng.gen_range(0.5..2.0)).collect();
    let mut spectrum = vec![0.0; d];
    for (g, &w) in groups.iter().zip(&weights) {
        for &i in g {
            spectrum[i] = w;
        }
    }
    let total: f64 = spectrum.iter().sum();
    spectrum.iter_mut().for_each(|x| *x /= total);

    let mut components: Vec<usize> = vec![0, 1, 2];
    components.shuffle(&mut rng);
    let take = rng.gen_range(1..=3);
    let mut chosen = components[..take].to_vec();
    chosen.sort_unstable();
    let mut mix: Vec<f64> = chosen.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
    let msum: f64 = mix.iter().sum();
    mix.iter_mut().for_each(|x| *x /= msum);

    let mut kraus: Vec<CMat> = Vec::new();
    for (&component, &w) in chosen.iter().zip(&mix) {
        let parts: Vec<CMat> = match component {
            0 => {
                let mut u = CMat::zeros(d, d);
                for g in &groups {
                    let block = random_unitary(&mut rng, g.len());
                    for (a, &i) in g.iter().enumerate() {
                        for (b, &j) in g.iter().enumerate() {
                            u[(i, j)] = block[(a, b)];
                        }
                    }
                }
                vec![u]
            }
            1 => {
                let p: f64 = rng.gen_range(0.0..1.0);
                let mut k = vec![identity(d) * re(p.sqrt())];
                for i in 0..d {
                    k.push(matrix_unit(d, i, i) * re((1.0 - p).sqrt()));
                }
                k
            }
            _ => {
                let p = metropolis_chain(&mut rng, &spectrum);
                classical_channel(&p)?.kraus().expect("built from Kraus").to_vec()
            }
        };
        kraus.extend(parts.into_iter().map(|k| k * re(w.sqrt())));
    }

    let v = random_unitary(&mut rng, d);
    let kraus = kraus.into_iter().map(|k| &v * k * v.adjoint()).collect();
    let rho = &v * diag(&spectrum) * v.adjoint();
    let rho = (&rho + rho.adjoint()) * re(0.5);
    Ok(SystemSpec {
        channel: Channel::from_kraus(kraus)?,
        rho,
    })
}

fn metropolis_chain(rng: &mut impl Rng, pi: &[f64]) -> Vec<Vec<f64>> {
    let d = pi.len();
    let mut q = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in (i + 1)..d {
            let x = rng.gen_range(0.0..1.0) / d as f64;
            q[i][j] = x;
            q[j][i] = x;
        }
    }
    let mut p = vec![vec![0.0; d]; d];
    for i in 0..d {
        let mut off = 0.0;
        for j in 0..d {
            if i != j {
                p[i][j] = q[i][j] * (pi[j] / pi[i]).min(1.0);
                off += p[i][j];
            }
        }
        p[i][i] = 1.0 - off;
    }
    p
}

pub fn random_covariant(d: usize, seed: u64) -> Result<Qds> {
    random_covariant_spec(d, seed)?.validate(Tolerance::default())
}
