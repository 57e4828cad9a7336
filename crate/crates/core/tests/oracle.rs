mod common;

use common::{gauss_solve_complex, gauss_solve_real, max_abs, max_abs_diff, matvec, DenseOracle};
use gppfem::assembly::{
    assemble_density_load, assemble_load, assemble_mass, assemble_stiffness, assemble_weighted_mass, SparseMatrix,
};
use gppfem::fem::{build_space, ComplexField, FeSpace, RealField};
use gppfem::linalg::{solve_complex, solve_spd, solve_zero_mean, SolverKind};
use gppfem::mesh::Mesh;
use gppfem::scheme::{step, Operators, Params, SchemeState};
use gppfem::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn small_spaces() -> Vec<Arc<FeSpace>> {
    let mut out = Vec::new();
    for k in 1..=2 {
        out.push(build_space(Mesh::interval(1.7, 6).unwrap(), k).unwrap());
        out.push(build_space(Mesh::interval(3.0, 10).unwrap(), k).unwrap());
        // 2 x 2 grid, 8 triangles; the non-square cells exercise the Jacobian.
        out.push(build_space(Mesh::rectangle(1.5, 0.8, 2, 2).unwrap(), k).unwrap());
    }
    out
}

fn scale(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn sparse_assembly_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for space in small_spaces() {
        let oracle = DenseOracle::new(&space);
        let n = space.ndof();
        let m = assemble_mass(&space).to_dense();
        let k = assemble_stiffness(&space).to_dense();
        let om = oracle.mass();
        let ok = oracle.stiffness();
        assert!(max_abs_diff(&m, &om) <= 1e-13 * scale(&om).max(1.0), "mass");
        assert!(max_abs_diff(&k, &ok) <= 1e-13 * scale(&ok).max(1.0), "stiffness");

        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let w = assemble_weighted_mass(&space, &RealField::from_values(&space, c.clone()).unwrap())
            .unwrap()
            .to_dense();
        let ow = oracle.weighted_mass(&c);
        assert!(max_abs_diff(&w, &ow) <= 1e-13 * scale(&ow).max(1.0), "weighted mass");

        let psi: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let b = assemble_density_load(&space, &ComplexField::from_values(&space, psi.clone()).unwrap()).unwrap();
        let ob = oracle.density_load(&psi);
        assert!(max_abs(&b, &ob, |x, y| (x - y).abs()) <= 1e-13, "density load");

        let f = |p: [f64; 2]| 1.0 + 0.5 * p[0] - 0.3 * p[1] + 0.2 * p[0] * p[1];
        let l = assemble_load(&space, |p: &[f64]| f([p[0], p.get(1).copied().unwrap_or(0.0)]));
        let ol = oracle.load(f);
        assert!(max_abs(&l, &ol, |x, y| (x - y).abs()) <= 1e-13, "load");
    }
}

fn random_state(space: &Arc<FeSpace>, rng: &mut ChaCha8Rng) -> (Vec<C64>, Vec<C64>, Vec<f64>, Vec<f64>) {
    let n = space.ndof();
    let m = assemble_mass(space);
    let mut rand_c = || -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    };
    let pp = rand_c();
    let mut pm = rand_c();
    let mass = |v: &[C64]| -> f64 { v.iter().zip(m.mul_vec(v)).map(|(a, b)| (a.conj() * b).re).sum() };
    let s = (mass(&pp) / mass(&pm)).sqrt();
    pm.iter_mut().for_each(|v| *v *= s);
    let zp: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    let mut zm: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    let w = space.basis_integrals();
    let shift = (w.iter().zip(&zp).map(|(a, b)| a * b).sum::<f64>()
        - w.iter().zip(&zm).map(|(a, b)| a * b).sum::<f64>())
        / space.domain_measure();
    zm.iter_mut().for_each(|v| *v += shift);
    (pp, pm, zp, zm)
}

#[test]
fn single_step_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for space in small_spaces() {
        for &(g, big_g, q) in &[(1.0, 2.0, 1.0), (0.7, -0.4, 0.0), (-1.5, 0.3, 2.5)] {
            let tau = 0.013;
            let params = Params::new(g, big_g, q, tau, tau).unwrap();
            let ops = Operators::new(&space, &params, SolverKind::Direct).unwrap();
            let (pp, pm, zp, zm) = random_state(&space, &mut rng);
            let state = SchemeState {
                n: 0,
                psi_plus: ComplexField::from_values(&space, pp.clone()).unwrap(),
                psi_minus: ComplexField::from_values(&space, pm.clone()).unwrap(),
                z_plus: RealField::from_values(&space, zp.clone()).unwrap(),
                z_minus: RealField::from_values(&space, zm.clone()).unwrap(),
                phi: None,
            };
            let next = step(&state, &params, &ops).unwrap();
            let oracle = DenseOracle::new(&space);
            let (opp, opm, ozp, ozm, ophi) = oracle.step([&pp, &pm], [&zp, &zm], g, big_g, q, tau);

            let cdiff = |a: C64, b: C64| (a - b).norm();
            let rdiff = |a: f64, b: f64| (a - b).abs();
            let tol = 1e-10;
            assert!(max_abs(next.psi_plus.values(), &opp, cdiff) <= tol);
            assert!(max_abs(next.psi_minus.values(), &opm, cdiff) <= tol);
            assert!(max_abs(next.z_plus.values(), &ozp, rdiff) <= tol * 10.0f64.max(scale(&[ozp.clone()])));
            assert!(max_abs(next.z_minus.values(), &ozm, rdiff) <= tol * 10.0f64.max(scale(&[ozm.clone()])));
            match &next.phi {
                Some(phi) => assert!(max_abs(phi.values(), &ophi, rdiff) <= tol * scale(&[ophi.clone()]).max(1.0)),
                None => assert_eq!(q, 0.0),
            }
        }
    }
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>() + if i == j { n as f64 } else { 0.0 })
                .collect()
        })
        .collect()
}

fn to_sparse<T: Copy + Default + PartialEq>(a: &[Vec<T>]) -> Vec<(usize, usize, T)> {
    let mut t = Vec::new();
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            t.push((i, j, v));
        }
    }
    t
}

#[test]
fn random_spd_solve_matches_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let a = random_spd(&mut rng, 8);
        let b: Vec<f64> = (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let sparse = SparseMatrix::from_triplets(8, &to_sparse(&a)).unwrap();
        let x = solve_spd(&sparse, &b).unwrap();
        let y = gauss_solve_real(a, b);
        assert!(max_abs(&x, &y, |p, q| (p - q).abs()) <= 1e-11);
    }
}

#[test]
fn random_complex_solve_matches_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let a: Vec<Vec<C64>> = (0..8)
            .map(|i| {
                (0..8)
                    .map(|j| {
                        let d = if i == j { C64::new(0.0, 6.0) } else { C64::new(0.0, 0.0) };
                        d + C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    })
                    .collect()
            })
            .collect();
        let b: Vec<C64> = (0..8).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let sparse = SparseMatrix::from_triplets(8, &to_sparse(&a)).unwrap();
        let x = solve_complex(&sparse, &b).unwrap();
        let y = gauss_solve_complex(a, b);
        assert!(max_abs(&x, &y, |p, q| (p - q).norm()) <= 1e-10);
    }
}

#[test]
fn zero_mean_solve_matches_bordered_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for space in small_spaces() {
        let oracle = DenseOracle::new(&space);
        let k = assemble_stiffness(&space);
        let n = space.ndof();
        let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: f64 = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= s);
        let x = solve_zero_mean(&k, space.basis_integrals(), &b).unwrap();
        let y = oracle.zero_mean_solve(&oracle.stiffness(), &b);
        let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs(&x, &y, |p, q| (p - q).abs()) <= 1e-11 * scale);
        // Dense check of the residual as well.
        let kx = matvec(&oracle.stiffness(), &x);
        assert!(max_abs(&kx, &b, |p, q| (p - q).abs()) <= 1e-11);
    }
}
