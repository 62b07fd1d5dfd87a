//! Structural invariants of the solvers over randomized problems.

use landr::dcg::{cg, d_cg, deflation_project, CgOptions};
use landr::kernels::{dot, norm2, sub};
use landr::landr::LanDr;
use landr::minresdr::{minres, minres_dr};
use landr::{lan_dr, rng, CsrMatrix, Diagonal, LanDrConfig, LinearOperator, ReorthPolicy, Scalar};
use num_complex::Complex64;
use proptest::prelude::*;

fn spectrum(seed: u64, n: usize, indefinite: bool) -> Diagonal {
    let z: Vec<f64> = rng::normal_vector(n, &mut rng::stream(seed, 99));
    Diagonal::new(
        z.iter()
            .enumerate()
            .map(|(i, v)| {
                let base = 0.5 + i as f64 * 0.1 + 0.01 * v.abs();
                if indefinite && i % 7 == 0 {
                    -base
                } else {
                    base
                }
            })
            .collect(),
    )
}

fn rhs<S: Scalar>(n: usize, seed: u64) -> Vec<S> {
    rng::normal_vector(n, &mut rng::stream(seed, 0))
}

/// `‖A V_m − V_{m+1} T̄_m‖_F` computed column by column.
fn relation_defect<S: Scalar>(solver: &LanDr<'_, S, Diagonal>, a: &Diagonal) -> f64 {
    let basis = solver.basis().unwrap();
    let proj = solver.projected();
    let mut total = 0.0;
    for j in 0..proj.cols {
        let mut w = a.apply(basis.v.col(j));
        for i in 0..=proj.cols.min(basis.filled() - 1) {
            let t = proj.t[(i, j)];
            for (wi, vi) in w.iter_mut().zip(basis.v.col(i)) {
                *wi -= vi.scale(t);
            }
        }
        total += norm2(&w).powi(2);
    }
    total.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn relation_orthogonality_and_shortcut(seed in 0u64..1000, m in 12usize..30, kfrac in 0.2f64..0.6) {
        let n = 150;
        let k = ((m as f64 * kfrac) as usize).max(1);
        let a = spectrum(seed, n, false);
        let b: Vec<f64> = rhs(n, seed);
        let cfg = LanDrConfig { policy: ReorthPolicy::Full, max_cycles: 4, lin_rtol: 1e-14, ..LanDrConfig::new(m, k) };
        let mut solver = LanDr::new(&a, &b, None, cfg).unwrap();
        let anorm = a.norm();
        let r0 = norm2(&b);
        for cycle in 0..4 {
            solver.run_cycle().unwrap();
            prop_assert!(relation_defect(&solver, &a) <= 1e-10 * anorm);

            let basis = solver.basis().unwrap();
            let cols = solver.projected().cols;
            let r = solver.residual();
            for j in 0..cols {
                prop_assert!(dot(basis.v.col(j), r).abs() <= 1e-12 * r0, "cycle {} column {}", cycle, j);
            }

            let ritz = solver.ritz().unwrap();
            for i in 0..ritz.len() {
                let y = ritz.vector(basis, i);
                let mut ay = a.apply(&y);
                for (p, q) in ay.iter_mut().zip(&y) {
                    *p -= ritz.values[i] * q;
                }
                prop_assert!((norm2(&ay) - ritz.residuals[i]).abs() <= 1e-8);
            }
            solver.restart_basis().unwrap();
        }
    }

    #[test]
    fn minres_dr_restart_maps_are_orthonormal(seed in 0u64..1000) {
        let n = 200;
        let a = spectrum(seed, n, true);
        let b: Vec<f64> = rhs(n, seed);
        let cfg = LanDrConfig { max_cycles: 6, lin_rtol: 1e-12, run_all_cycles: true, ..LanDrConfig::new(25, 8) };
        let out = minres_dr(&a, &b, None, &cfg).unwrap();
        prop_assert!(!out.restart_defects.is_empty());
        for d in &out.restart_defects {
            prop_assert!(*d <= 1e-13, "PᵀP − I = {}", d);
        }
        let rel: Vec<f64> = out.history.rows.iter().map(|r| r.resid_rel).collect();
        for w in rel.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn deflation_projection_leaves_residual_orthogonal(seed in 0u64..1000) {
        let n = 300;
        let a = spectrum(seed, n, false);
        let b0: Vec<f64> = rhs(n, seed);
        let b1: Vec<f64> = rhs(n, seed + 7);
        let out = lan_dr(&a, &b0, None, &LanDrConfig { max_cycles: 3, run_all_cycles: true, ..LanDrConfig::new(30, 10) }).unwrap();
        let ds = &out.deflation;
        let mut x = vec![0.0; n];
        let mut r = b1.clone();
        deflation_project(ds, &mut x, &mut r).unwrap();
        let r0 = norm2(&b1);
        for j in 0..ds.k() {
            prop_assert!(dot(ds.v.col(j), &r).abs() <= 1e-12 * r0);
        }
        let truth = sub(&b1, &a.apply(&x));
        prop_assert!(norm2(&sub(&truth, &r)) <= 1e-10 * r0);
    }

    #[test]
    fn minres_history_never_increases(seed in 0u64..1000) {
        let n = 250;
        let a = spectrum(seed, n, true);
        let b: Vec<f64> = rhs(n, seed);
        let out = minres(&a, &b, None, 1e-10, 2000).unwrap();
        for w in out.history.rows.windows(2) {
            prop_assert!(w[1].resid_rel <= w[0].resid_rel * (1.0 + 1e-12));
        }
        let true_rel = norm2(&sub(&b, &a.apply(&out.x))) / norm2(&b);
        prop_assert!(true_rel <= 1e-8);
    }

    #[test]
    fn counters_grow_with_work(seed in 0u64..1000) {
        let n = 100;
        let a = spectrum(seed, n, false);
        let b: Vec<f64> = rhs(n, seed);
        let out = cg(&a, &b, None, &CgOptions::new(1e-8, 500)).unwrap();
        let rows = &out.history.rows;
        for w in rows.windows(2) {
            prop_assert!(w[1].matvecs > w[0].matvecs);
            prop_assert!(w[1].vecops > w[0].vecops);
        }
        prop_assert_eq!(out.history.totals.matvecs, rows.last().unwrap().matvecs);
    }
}

#[test]
fn d_cg_beats_cg_and_stays_accurate() {
    let n = 400;
    let a = spectrum(3, n, false);
    let b0: Vec<f64> = rhs(n, 1);
    let b1: Vec<f64> = rhs(n, 2);
    let out = lan_dr(&a, &b0, None, &LanDrConfig { n_eig_wanted: 8, ..LanDrConfig::new(40, 15) }).unwrap();
    let plain = cg(&a, &b1, None, &CgOptions::new(1e-10, 2000)).unwrap();
    let defl = d_cg(&a, &b1, None, &out.deflation, &CgOptions::new(1e-10, 2000)).unwrap();
    assert!(defl.iterations < plain.iterations);
    assert!(norm2(&sub(&b1, &a.apply(&defl.x))) <= 1e-9 * norm2(&b1));
}

#[test]
fn complex_hermitian_tridiagonal_solves() {
    let n = 120;
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((i, i, Complex64::new(3.0 + 0.05 * i as f64, 0.0)));
        if i + 1 < n {
            let off = Complex64::new(0.4, 0.3);
            trip.push((i, i + 1, off));
            trip.push((i + 1, i, off.conj()));
        }
    }
    let a = CsrMatrix::from_triplets(n, &trip);
    assert!(landr::operator::symmetry_defect(&a, 4, 1) <= 1e-13);
    let b: Vec<Complex64> = rhs(n, 5);
    let out = lan_dr(&a, &b, None, &LanDrConfig::new(30, 8)).unwrap();
    assert!(out.status.is_converged());
    let r = sub(&b, &a.apply(&out.x));
    assert!(norm2(&r) <= 1e-7 * norm2(&b));
    for v in &out.ritz.values {
        assert!(*v > 0.0);
    }
}
