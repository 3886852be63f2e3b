mod support;

use proptest::prelude::*;
use revpart::algebra::{
    automorphism_certificate, d_infinity, decompose, e_infinity_from, fixed_point_algebra,
    flat_product, multiplicative_domain, perp_space, SubAlgebra,
};
use revpart::dynamics::{cesaro_table, classify_with};
use revpart::fixtures;
use revpart::gns::{contraction, is_isometric_on, v_limits, GnsSpace};
use revpart::numerics::{
    c, commutant, hermitian_eigen, identity, matrix_unit, matrix_units, op_norm,
    orthonormalize, phi_inner, subspace_intersect, CMat, InnerProduct, OperatorSubspace,
    Tolerance, C64,
};
use revpart::qds::Qds;
use support::random_matrix;

fn system(d: usize, seed: u64) -> Qds {
    fixtures::random_covariant(d, seed).expect("covariant draw validates")
}

fn density(rng: &mut impl rand::Rng, d: usize) -> CMat {
    let a = random_matrix(rng, d);
    let p = &a * a.adjoint() + identity(d) * c(0.05, 0.0);
    let t = p.trace();
    p / t
}

fn sub_system(d: usize, seed: u64) -> impl Strategy<Value = (usize, u64)> {
    (2..=d, 0..10_000u64).prop_map(move |(d, s)| (d, s ^ seed))
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cfg(100))]

    #[test]
    fn phi_inner_is_sesquilinear_and_positive(d in 1usize..=6, seed in any::<u64>(),
                                              ar in -2.0f64..2.0, ai in -2.0f64..2.0) {
        let tol = Tolerance::default();
        let mut r = support::rng(seed);
        let rho = density(&mut r, d);
        let (x, y, z) = (random_matrix(&mut r, d), random_matrix(&mut r, d), random_matrix(&mut r, d));
        let alpha = c(ar, ai);
        let ip = |a: &CMat, b: &CMat| phi_inner(a, b, &rho, &tol).unwrap();
        let lin = ip(&x, &(&y * alpha + &z)) - (ip(&x, &y) * alpha + ip(&x, &z));
        let anti = ip(&(&y * alpha), &x) - ip(&y, &x) * alpha.conj();
        let herm = ip(&x, &y) - ip(&y, &x).conj();
        prop_assert!(lin.norm() <= 1e-9 && anti.norm() <= 1e-9 && herm.norm() <= 1e-9);
        let nx = ip(&x, &x);
        prop_assert!(nx.re > 0.0 && nx.im.abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(cfg(40))]

    #[test]
    fn orthonormalize_is_idempotent(d in 2usize..=4, k in 1usize..=6, seed in any::<u64>()) {
        let tol = Tolerance::default();
        let mut r = support::rng(seed);
        let rho = density(&mut r, d);
        let vs: Vec<CMat> = (0..k).map(|_| random_matrix(&mut r, d)).collect();
        let once = orthonormalize(&vs, &rho, &tol).unwrap();
        let twice = orthonormalize(once.basis(), &rho, &tol).unwrap();
        prop_assert_eq!(once.dim(), twice.dim());
        prop_assert!(once.distance(&twice) <= 1e-9);
    }

    #[test]
    fn intersection_is_commutative_and_monotone(d in 2usize..=3, ka in 1usize..=8,
                                                kb in 1usize..=8, shared in 0usize..=3,
                                                seed in any::<u64>()) {
        let tol = Tolerance::default();
        let mut r = support::rng(seed);
        let common: Vec<CMat> = (0..shared).map(|_| random_matrix(&mut r, d)).collect();
        let mut va = common.clone();
        va.extend((0..ka).map(|_| random_matrix(&mut r, d)));
        let mut vb = common;
        vb.extend((0..kb).map(|_| random_matrix(&mut r, d)));
        let hs = InnerProduct::HilbertSchmidt;
        let a = OperatorSubspace::span(d, &va, hs.clone(), &tol).unwrap();
        let b = OperatorSubspace::span(d, &vb, hs, &tol).unwrap();
        let ab = subspace_intersect(&a, &b, &tol).unwrap();
        let ba = subspace_intersect(&b, &a, &tol).unwrap();
        prop_assert!(ab.distance(&ba) <= 1e-8);
        prop_assert!(ab.dim() <= a.dim().min(b.dim()));
        let again = subspace_intersect(&ab, &b, &tol).unwrap();
        prop_assert!(again.distance(&ab) <= 1e-8);
    }

    #[test]
    fn commutant_is_a_unital_star_algebra(d in 2usize..=4, k in 0usize..=2, seed in any::<u64>()) {
        let tol = Tolerance::default();
        let mut r = support::rng(seed);
        // Self-adjoint block-diagonal generators leave a non-trivial *-closed commutant.
        let mut set: Vec<CMat> = (0..k).map(|_| {
            let mut m = random_matrix(&mut r, d);
            for i in 0..d { for j in 0..d { if (i == 0) != (j == 0) { m[(i, j)] = c(0.0, 0.0); } } }
            &m + m.adjoint()
        }).collect();
        set.push(matrix_unit(d, 0, 0));
        let comm = commutant(&set, d, &tol).unwrap();
        prop_assert!(comm.contains(&identity(d), &tol));
        for x in comm.basis() {
            prop_assert!(comm.contains(&x.adjoint(), &tol));
            for y in comm.basis() {
                prop_assert!(comm.contains(&(x * y), &tol));
            }
        }
    }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn modular_generator_commutes((d, seed) in sub_system(4, 0x11)) {
        let q = system(d, seed);
        let h = q.state().log_rho().clone();
        let ad = |x: &CMat| &h * x - x * &h;
        for x in matrix_units(d) {
            let lhs = q.channel().apply(&ad(&x));
            let rhs = ad(&q.channel().apply(&x));
            prop_assert!(op_norm(&(lhs - rhs)) <= q.tol().eq_tol * op_norm(&x).max(1.0) * 10.0);
        }
    }

    #[test]
    fn pairing_and_tau_identities((d, seed) in sub_system(4, 0x22)) {
        let q = system(d, seed);
        let units = matrix_units(d);
        for a in &units {
            for b in &units {
                let lhs = q.phi(&(b * q.channel().apply(a)));
                let rhs = q.phi(&(q.phi_sharp().apply(b) * a));
                prop_assert!((lhs - rhs).norm() <= q.tol().eq_tol);
            }
        }
        for k in [1i64, -1, 2] {
            let tau = q.tau_k(k);
            for x in &units {
                prop_assert!((q.phi(&tau.apply(x)) - q.phi(x)).norm() <= q.tol().eq_tol);
                for y in &units {
                    let l = q.phi(&(x * tau.apply(y)));
                    let r = q.phi(&(tau.apply(x) * y));
                    prop_assert!((l - r).norm() <= q.tol().eq_tol);
                }
            }
        }
    }

    #[test]
    fn sk_cauchy_schwarz((d, seed) in sub_system(4, 0x33), k in -2i64..=2) {
        let q = system(d, seed);
        let mut r = support::rng(seed);
        for _ in 0..10 {
            let (a, b) = (random_matrix(&mut r, d), random_matrix(&mut r, d));
            let ab = q.phi(&q.sk_form(k, &a, &b)).norm();
            let aa = q.phi(&q.sk_form(k, &a, &a)).re;
            let bb = q.phi(&q.sk_form(k, &b, &b)).re;
            prop_assert!(ab * ab <= aa * bb + q.tol().eq_tol);
        }
    }

    #[test]
    fn automorphisms_are_reversible(d in 2usize..=4, seed in any::<u64>()) {
        let mut r = support::rng(seed);
        let phases: Vec<f64> = (0..d).map(|_| rand::Rng::gen_range(&mut r, 0.0..6.0)).collect();
        let mut w: Vec<f64> = (0..d).map(|_| rand::Rng::gen_range(&mut r, 0.5..1.5)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let q = fixtures::unitary_spec(&phases, &w).unwrap().validate(Tolerance::default()).unwrap();
        let both = q.phi_sharp().compose(q.channel());
        let n = d * d;
        prop_assert!(op_norm(&(both.superop() - CMat::identity(n, n))) <= q.tol().eq_tol);
    }

    #[test]
    fn domain_chain_decreases((d, seed) in sub_system(3, 0x44)) {
        let q = system(d, seed);
        let domains: Vec<SubAlgebra> = (1..=5).map(|n| multiplicative_domain(&q, n).unwrap()).collect();
        for w in domains.windows(2) {
            prop_assert!(w[0].space().containment_residual(w[1].space()) <= q.tol().eq_tol);
        }
    }

    #[test]
    fn dynamics_is_an_automorphism_on_d_infinity((d, seed) in sub_system(4, 0x55)) {
        let q = system(d, seed);
        let dinf = d_infinity(&q).unwrap();
        prop_assert!(automorphism_certificate(&q, &dinf).worst() <= q.tol().eq_tol);
        let u = contraction(&q).matrix;
        let coords = dinf.space().coords();
        let restricted = &u * coords;
        for s in restricted.singular_values().iter() {
            prop_assert!((s - 1.0).abs() <= q.tol().eq_tol);
        }
    }

    #[test]
    fn e_infinity_structure((d, seed) in sub_system(4, 0x66)) {
        let q = system(d, seed);
        let dinf = d_infinity(&q).unwrap();
        let (e, _) = e_infinity_from(&q, &dinf).unwrap();
        prop_assert!(op_norm(&(e.matrix() * e.matrix() - e.matrix())) <= q.tol().eq_tol);
        let perp = perp_space(&dinf, &q).unwrap();
        prop_assert_eq!(perp.dim() + dinf.dim(), d * d);
        for x in perp.basis() {
            prop_assert!(op_norm(&e.apply(x)) <= q.tol().eq_tol * 10.0);
        }
        let mut r = support::rng(seed);
        for _ in 0..5 {
            let (a, b, w) = (random_matrix(&mut r, d), random_matrix(&mut r, d), random_matrix(&mut r, d));
            let (xa, xb, xw) = (decompose(&a, &e), decompose(&b, &e), decompose(&w, &e));
            prop_assert!(op_norm(&(xa.value() - &a)) <= 1e-12);
            prop_assert!(q.state().inner(&xa.par, &xa.perp).norm() <= q.tol().eq_tol);
            let tol = q.tol();
            let l = flat_product(&flat_product(&xa, &xb, &e, tol).unwrap(), &xw, &e, tol).unwrap();
            let rr = flat_product(&xa, &flat_product(&xb, &xw, &e, tol).unwrap(), &e, tol).unwrap();
            prop_assert!(op_norm(&(l.value() - rr.value())) <= q.tol().eq_tol);
        }
    }

    #[test]
    fn defect_commutes_with_domain((d, seed) in sub_system(4, 0x77)) {
        let q = system(d, seed);
        let u = contraction(&q).matrix;
        let (uu, uut) = (u.adjoint() * &u, &u * u.adjoint());
        let dom = multiplicative_domain(&q, 1).unwrap();
        for x in dom.basis() {
            let l = GnsSpace::left(x);
            prop_assert!(op_norm(&(&uu * &l - &l * &uu)) <= 1e-8);
            let lf = GnsSpace::left(&q.channel().apply(x));
            prop_assert!(op_norm(&(&uut * &lf - &lf * &uut)) <= 1e-8);
            prop_assert!(is_isometric_on(&q, x, 1e-8) && is_isometric_on(&q, &x.adjoint(), 1e-8));
        }
        let outside = dom.space().complement();
        for x in outside.basis() {
            prop_assert!(!(is_isometric_on(&q, x, 1e-8) && is_isometric_on(&q, &x.adjoint(), 1e-8)));
        }
    }

    #[test]
    fn implication_chain((d, seed) in sub_system(4, 0x88)) {
        let q = system(d, seed);
        let dinf = d_infinity(&q).unwrap();
        let k = classify_with(&q, &dinf).unwrap();
        let tau_ergodic = fixed_point_algebra(&q.tau_k(1), &q).unwrap().dim() == 1;
        prop_assert!(!tau_ergodic || k.completely_irreversible);
        prop_assert!(!k.completely_irreversible || k.ergodic);
        let tau2_ergodic = fixed_point_algebra(&q.tau_k(2), &q).unwrap().dim() == 1;
        prop_assert!(!(tau_ergodic || tau2_ergodic) || dinf.dim() == 1);
        prop_assert_eq!(k.mixing, k.weakly_mixing);
    }

    #[test]
    fn v_limits_match_the_unitary_part((d, seed) in sub_system(4, 0x99)) {
        let q = system(d, seed);
        let dinf = d_infinity(&q).unwrap();
        let (e, _) = e_infinity_from(&q, &dinf).unwrap();
        let l = v_limits(&q).unwrap();
        prop_assert!(op_norm(&(&l.v_plus.matrix - e.gns_projector())) <= 1e-8);
        prop_assert!(op_norm(&(&l.v_minus.matrix - e.gns_projector())) <= 1e-8);
    }

    #[test]
    fn generated_files_round_trip(d in 2usize..=4, seed in any::<u64>()) {
        let spec = fixtures::random_covariant_spec(d, seed).unwrap();
        let text = revpart::cli::SystemFile::from_spec(&spec).to_json();
        let file = revpart::cli::SystemFile::parse(&text).unwrap();
        prop_assert_eq!(file.to_json(), text);
        prop_assert!(file.system(Tolerance::default()).is_ok());
    }
}

#[test]
fn shift_dephase_diagonal_lies_in_d_infinity() {
    let q = fixtures::shift_dephase();
    let dinf = d_infinity(&q).unwrap();
    for i in 0..3 {
        assert!(dinf.contains(&matrix_unit(3, i, i), q.tol()));
    }
}

#[test]
fn completely_irreversible_fixture_has_projector_gap() {
    let q = fixtures::classical();
    let mut r = support::rng(5);
    let h = {
        let a = random_matrix(&mut r, 2);
        (&a + a.adjoint()) * c(0.5, 0.0)
    };
    let (_, vecs) = hermitian_eigen(&h);
    let gap = (0..2)
        .map(|j| {
            let v = vecs.column(j);
            let p = &v * v.adjoint();
            let f = q.phi(&p).re;
            f - f * f
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(gap > 10.0 * q.tol().eq_tol);
}

#[test]
fn orthogonal_part_decays_on_fixtures() {
    for (name, q) in support::reference_systems() {
        let dinf = d_infinity(&q).unwrap();
        let perp = perp_space(&dinf, &q).unwrap();
        let u = contraction(&q).matrix;
        let (mut un, mut uan) = (u.clone(), u.adjoint());
        let p200 = q.channel().power(200);
        for _ in 1..200 {
            un = &un * &u;
            uan = &uan * u.adjoint();
        }
        for x in perp.basis() {
            let v = GnsSpace::vector(&q, x);
            assert!((&un * &v).norm() <= 1e-8, "{name}: Uⁿ d⊥ does not decay");
            assert!((&uan * &v).norm() <= 1e-8, "{name}: U*ⁿ d⊥ does not decay");
            assert!(op_norm(&p200.apply(x)) <= 1e-8, "{name}: Φⁿ(d⊥) does not decay");
        }
        let mut r = support::rng(9);
        for k in 1..=3i64 {
            for _ in 0..5 {
                let (a, b) = (random_matrix(&mut r, q.dim()), random_matrix(&mut r, q.dim()));
                let s: C64 = q.phi(&q.sk_form(k, &p200.apply(&a), &b));
                assert!(s.norm() <= 1e-8, "{name}: φ(S_k(Φⁿ(a), b)) does not vanish");
            }
        }
    }
}

#[test]
fn cesaro_residuals_are_monotone_on_fixtures() {
    for (name, q) in support::reference_systems() {
        for k in [1i64, 2] {
            let t = cesaro_table(&q, k, 40).unwrap();
            assert!(t.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12), "{name} k={k}");
        }
    }
}

#[test]
fn unitary_tau_is_identity() {
    let q = fixtures::unitary();
    let t = q.tau_k(1);
    assert!(op_norm(&(t.superop() - CMat::identity(4, 4))) <= 1e-12);
    assert!(fixed_point_algebra(&t, &q).unwrap().dim() == 4);
}

/// Spectral projections of a random Hermitian element of `D∞`.
fn d_infinity_projections(q: &Qds, dinf: &SubAlgebra, seed: u64) -> Vec<CMat> {
    use rand::Rng;
    let mut r = support::rng(seed);
    let d = q.dim();
    let mut x = CMat::zeros(d, d);
    for b in dinf.basis() {
        x += b * c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
    }
    let h = (&x + x.adjoint()) * c(0.5, 0.0);
    let (values, vecs) = hermitian_eigen(&h);
    let mut out: Vec<(f64, CMat)> = Vec::new();
    for (j, &v) in values.iter().enumerate() {
        let col = vecs.column(j);
        let p = &col * col.adjoint();
        match out.iter_mut().find(|(w, _)| (w - v).abs() < 1e-6) {
            Some((_, acc)) => *acc += p,
            None => out.push((v, p)),
        }
    }
    out.into_iter().map(|(_, p)| p).collect()
}

#[test]
fn projections_of_d_infinity_stay_projections() {
    for (name, q) in support::reference_systems() {
        let dinf = d_infinity(&q).unwrap();
        for seed in 0..5 {
            for p in d_infinity_projections(&q, &dinf, seed) {
                assert!(dinf.contains(&p, q.tol()), "{name}: projection outside D∞");
                for k in [-2, -1, 1, 2] {
                    let image = q.phi_k(k).apply(&p);
                    let idem = op_norm(&(&image * &image - &image));
                    assert!(idem <= 1e-8, "{name} k={k}: ‖Φ_k(p)² − Φ_k(p)‖ = {idem:e}");
                }
            }
        }
    }
}

#[test]
fn multiplicative_domain_elements_factor_on_both_sides() {
    for (name, q) in support::reference_systems() {
        let dom = multiplicative_domain(&q, 1).unwrap();
        let phi = q.channel();
        let mut r = support::rng(17);
        for a in dom.basis() {
            for _ in 0..10 {
                let x = random_matrix(&mut r, q.dim());
                let left = op_norm(&(phi.apply(&(a * &x)) - phi.apply(a) * phi.apply(&x)));
                let right = op_norm(&(phi.apply(&(&x * a)) - phi.apply(&x) * phi.apply(a)));
                assert!(left.max(right) <= 1e-9, "{name}: factorisation residual {:e}", left.max(right));
            }
        }
    }
}
