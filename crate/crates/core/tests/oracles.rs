//! Solver output checked against independent dense computations.

use landr::dcg::{cg, CgOptions};
use landr::harness::recipes::{example1, example10, EXAMPLE10_SEED};
use landr::landr::{compute_ritz, first_cycle, CycleCtx, LanDr};
use landr::minresdr::{minres, minres_update};
use landr::{rng, Diagonal, LanDrConfig, LinearOperator, ReorthPolicy, Target};
use nalgebra::{DMatrix, DVector};

fn spread(n: usize) -> Diagonal {
    // distinct eigenvalues with a cluster near the origin
    Diagonal::new((0..n).map(|i| 0.05 * (i + 1) as f64 + if i >= 10 { 2.0 + i as f64 } else { 0.0 }).collect())
}

fn dense(a: &Diagonal) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(a.entries.clone()))
}

fn rhs(n: usize, seed: u64) -> Vec<f64> {
    rng::normal_vector(n, &mut rng::stream(seed, 0))
}

/// Orthonormal basis of the columns of `m` by two passes of Gram-Schmidt.
fn orth(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q: Vec<DVector<f64>> = Vec::new();
    for j in 0..m.ncols() {
        let mut v = m.column(j).clone_owned();
        for _ in 0..2 {
            for u in &q {
                let h = u.dot(&v);
                v -= u * h;
            }
        }
        let nv = v.norm();
        assert!(nv > 1e-10 * m.column(j).norm(), "dependent Krylov column {j}");
        q.push(v / nv);
    }
    DMatrix::from_columns(&q)
}

/// Orthonormal Krylov basis by Arnoldi with two Gram-Schmidt passes.
fn krylov(a: &DMatrix<f64>, start: &DVector<f64>, dim: usize) -> DMatrix<f64> {
    let mut q = vec![start.normalize()];
    while q.len() < dim {
        let mut w = a * q.last().unwrap();
        for _ in 0..2 {
            for u in &q {
                let h = u.dot(&w);
                w -= u * h;
            }
        }
        q.push(w.normalize());
    }
    DMatrix::from_columns(&q)
}

#[test]
fn ritz_pairs_match_dense_rayleigh_ritz() {
    let n = 60;
    let a = spread(n);
    let b = rhs(n, 3);
    let mut ctx = CycleCtx::new(n, 20);
    let (basis, proj, broke) = first_cycle(&a, &b, 20, &mut ctx).unwrap();
    assert!(!broke);
    let ritz = compute_ritz(&proj, 6, Target::SmallestMagnitude, 0).unwrap();

    let ad = dense(&a);
    let w = krylov(&ad, &DVector::from_vec(b.clone()), 20);
    let h = w.transpose() * &ad * &w;
    let eig = h.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|p, q| p.abs().partial_cmp(&q.abs()).unwrap());
    for (i, th) in ritz.values.iter().enumerate() {
        assert!((th - vals[i]).abs() <= 1e-9 * vals[i].abs().max(1.0), "{th} vs {}", vals[i]);
        let y = ritz.vector(&basis, i);
        let ay = a.apply(&y);
        let direct: f64 = ay.iter().zip(&y).map(|(p, q)| (p - th * q).powi(2)).sum::<f64>().sqrt();
        assert!((direct - ritz.residuals[i]).abs() <= 1e-8, "shortcut {} direct {direct}", ritz.residuals[i]);
    }
}

#[test]
fn minres_update_is_the_dense_least_squares_minimizer() {
    let n = 60;
    let a = Diagonal::new((0..n).map(|i| i as f64 - 7.5).collect());
    let b = rhs(n, 5);
    let mut ctx = CycleCtx::new(n, 15);
    let (basis, proj, _) = first_cycle(&a, &b, 15, &mut ctx).unwrap();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    let step = minres_update(&basis, &proj, &mut x, &b, &[bn]);

    let ad = dense(&a);
    let k = krylov(&ad, &DVector::from_vec(b.clone()), 15);
    let ak = &ad * &k;
    let svd = ak.clone().svd(true, true);
    let y = svd.solve(&DVector::from_vec(b.clone()), 1e-14).unwrap();
    let best = (DVector::from_vec(b.clone()) - &ak * &y).norm();
    assert!((step.resid_norm - best).abs() <= 1e-10 * bn, "{} vs {best}", step.resid_norm);
    let true_r: f64 = a.apply(&x).iter().zip(&b).map(|(p, q)| (q - p).powi(2)).sum::<f64>().sqrt();
    assert!((true_r - best).abs() <= 1e-10 * bn);
}

/// Deflated restarted FOM built from dense pieces: each cycle projects over
/// `[Y, K_{m-k}(A, r)]` and keeps the `k` smallest Ritz vectors as `Y`.
fn thick_restart_fom(a: &DMatrix<f64>, b: &DVector<f64>, m: usize, k: usize, cycles: usize) -> Vec<f64> {
    let mut x = DVector::zeros(b.len());
    let mut r = b.clone();
    let mut y: Option<DMatrix<f64>> = None;
    let mut out = Vec::new();
    for _ in 0..cycles {
        let w = match &y {
            None => krylov(a, &r, m),
            Some(y) => {
                let kr = krylov(a, &r, m - k);
                let mut cols: Vec<DVector<f64>> = y.column_iter().map(|c| c.clone_owned()).collect();
                cols.extend(kr.column_iter().map(|c| c.clone_owned()));
                orth(&DMatrix::from_columns(&cols))
            }
        };
        let h = w.transpose() * a * &w;
        let d = h.clone().lu().solve(&(w.transpose() * &r)).unwrap();
        x += &w * d;
        r = b - a * &x;
        out.push(r.norm() / b.norm());
        let eig = h.symmetric_eigen();
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&p, &q| eig.eigenvalues[p].abs().partial_cmp(&eig.eigenvalues[q].abs()).unwrap());
        let g = DMatrix::from_columns(&idx[..k].iter().map(|&i| eig.eigenvectors.column(i).clone_owned()).collect::<Vec<_>>());
        y = Some(&w * g);
    }
    out
}

#[test]
fn lan_dr_cycles_match_dense_thick_restart_fom() {
    let n = 200;
    let a = spread(n);
    let b = rhs(n, 11);
    let (m, k, cycles) = (14, 4, 5);
    let expect = thick_restart_fom(&dense(&a), &DVector::from_vec(b.clone()), m, k, cycles);
    let cfg = LanDrConfig {
        policy: ReorthPolicy::Full,
        lin_rtol: 1e-14,
        max_cycles: cycles,
        ..LanDrConfig::new(m, k)
    };
    let mut solver = LanDr::new(&a, &b, None, cfg).unwrap();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (c, want) in expect.iter().enumerate() {
        solver.run_cycle().unwrap();
        let x = solver.x().to_vec();
        let got = a.apply(&x).iter().zip(&b).map(|(p, q)| (q - p).powi(2)).sum::<f64>().sqrt() / bn;
        assert!((got - want).abs() <= 1e-7 * want.max(1e-12) + 1e-12, "cycle {}: {got} vs {want}", c + 1);
        if c + 1 < cycles {
            solver.restart_basis().unwrap();
        }
    }
}

/// Textbook CG with no counters or residual replacement.
fn naive_cg(d: &[f64], b: &[f64], rtol: f64, maxit: usize) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut rho: f64 = r.iter().map(|v| v * v).sum();
    let mut hist = vec![rho.sqrt() / bn];
    for _ in 0..maxit {
        let q: Vec<f64> = p.iter().zip(d).map(|(pi, di)| pi * di).collect();
        let alpha = rho / p.iter().zip(&q).map(|(u, v)| u * v).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rho_new: f64 = r.iter().map(|v| v * v).sum();
        hist.push(rho_new.sqrt() / bn);
        if rho_new.sqrt() <= rtol * bn {
            break;
        }
        for i in 0..n {
            p[i] = r[i] + rho_new / rho * p[i];
        }
        rho = rho_new;
    }
    hist
}

#[test]
fn cg_tracks_textbook_cg_on_clustered_spectrum() {
    let a = example1(5000);
    let b = rhs(5000, 1);
    let oracle = naive_cg(&a.entries, &b, 1e-8, 5000);
    let ours = cg(&a, &b, None, &CgOptions::new(1e-8, 5000)).unwrap();
    let its = ours.iterations as i64;
    assert!((its - (oracle.len() as i64 - 1)).abs() <= 5, "{its} vs {}", oracle.len() - 1);
    // curves agree while roundoff is small
    for (row, want) in ours.history.rows.iter().zip(&oracle).take(60) {
        assert!((row.resid_rel - want).abs() <= 1e-6 * want, "{} vs {want}", row.resid_rel);
    }
}

#[test]
fn minres_matches_dense_krylov_least_squares_for_fifty_steps() {
    let a = example10(1000, EXAMPLE10_SEED, 2.0);
    let b = rhs(1000, 2);
    let out = minres(&a, &b, None, 1e-14, 50).unwrap();
    let ad = dense(&a);
    let bv = DVector::from_vec(b.clone());
    let k = krylov(&ad, &bv, 50);
    let bn = bv.norm();
    for j in [1usize, 5, 10, 20, 35, 50] {
        let kj = k.columns(0, j).clone_owned();
        let ak = &ad * &kj;
        let qr = ak.clone().qr();
        let y = qr.r().solve_upper_triangular(&(qr.q().transpose() * &bv)).unwrap();
        let best = (&bv - &ak * &y).norm() / bn;
        let got = out.history.rows[j].resid_rel;
        assert!((got - best).abs() <= 1e-8 * best.max(1e-3), "step {j}: {got} vs {best}");
    }
}
