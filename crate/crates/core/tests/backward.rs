mod common;

use nalgebra::{DMatrix, DVector};
use nlqre::backward::backward_distance;
use nlqre::xi::{constraint_apply, constraint_transpose_apply};
use nlqre::zoo::{random_game, random_treeplex};
use nlqre::{
    backward_residual, build_xi, direct_backward_solve, fom_backward_solve, newton_solve, quadratic_best_response,
    BackwardProblem, Game, RationalityParams, Treeplex,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn interior_plan(t: &Treeplex, rng: &mut impl Rng) -> Vec<f64> {
    let mut lb = vec![0.0; t.num_sequences()];
    for info in t.infosets() {
        let w: Vec<f64> = info.actions.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        for (&a, x) in info.actions.iter().zip(&w) {
            lb[a] = (x / s).ln();
        }
    }
    t.plan_from_log_behavior(&lb).into_inner()
}

fn random_lambda(t: &Treeplex, rng: &mut impl Rng) -> Vec<f64> {
    (0..t.num_infosets()).map(|_| rng.random_range(0.2..3.0)).collect()
}

/// True when `s` lies in the subtree below one of the actions of infoset `h`.
fn below(t: &Treeplex, h: usize, mut s: usize) -> bool {
    while s != 0 {
        if t.infoset_of(s) == Some(h) {
            return true;
        }
        s = t.parent_sequence(s);
    }
    false
}

/// Dense KKT solve of the backward system over non-root sequences.
fn dense_backward(g: &Game, lambda: &RationalityParams, u: &[f64], v: &[f64], gu: &[f64], gv: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (tu, tv) = (g.treeplex_u(), g.treeplex_v());
    let (n, m) = (tu.num_sequences() - 1, tv.num_sequences() - 1);
    let (hu, hv) = (tu.num_infosets(), tv.num_infosets());
    let p = common::dense_payoff(g);
    let (e, f) = (common::dense_constraints(tu), common::dense_constraints(tv));
    let dim = n + m + hu + hv;
    let mut k = DMatrix::zeros(dim, dim);
    k.view_mut((0, 0), (n, n)).copy_from(&common::dense_xi(tu, u, &lambda.u));
    k.view_mut((0, n), (n, m)).copy_from(&p.view((1, 1), (n, m)));
    k.view_mut((0, n + m), (n, hu)).copy_from(&e.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(&p.view((1, 1), (n, m)).transpose());
    k.view_mut((n, n), (m, m)).copy_from(&(-common::dense_xi(tv, v, &lambda.v)));
    k.view_mut((n, n + m + hu), (m, hv)).copy_from(&f.transpose());
    k.view_mut((n + m, 0), (hu, n)).copy_from(&e);
    k.view_mut((n + m + hu, n), (hv, m)).copy_from(&f);
    let mut rhs = DVector::zeros(dim);
    for a in 0..n {
        rhs[a] = -gu[a + 1];
    }
    for b in 0..m {
        rhs[n + b] = -gv[b + 1];
    }
    let y = k.lu().solve(&rhs).expect("nonsingular backward system");
    (y.rows(0, n).iter().copied().collect(), y.rows(n, m).iter().copied().collect())
}

#[test]
fn schur_complement_is_diagonal() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_treeplex(&mut rng, 60);
        let u = interior_plan(&t, &mut rng);
        let lambda = random_lambda(&t, &mut rng);
        let xi = common::dense_xi(&t, &u, &lambda);
        let e = common::dense_constraints(&t);
        let s = &e * xi.clone().lu().solve(&e.transpose()).unwrap();
        for h in 0..t.num_infosets() {
            let want = u[t.infosets()[h].parent] / lambda[h];
            for k in 0..t.num_infosets() {
                let expect = if h == k { want } else { 0.0 };
                assert!((s[(h, k)] - expect).abs() <= 1e-10 * want.max(1.0), "seed {seed} ({h},{k})");
            }
        }
        let lib = build_xi(&t, &u, &lambda).unwrap().schur_diagonal();
        for h in 0..t.num_infosets() {
            assert!((lib[h] - s[(h, h)]).abs() <= 1e-10 * s[(h, h)].max(1.0));
        }
    }
}

#[test]
fn inverse_constraint_columns_live_below_their_infoset() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let t = random_treeplex(&mut rng, 60);
        let u = interior_plan(&t, &mut rng);
        let lambda = random_lambda(&t, &mut rng);
        let xi = common::dense_xi(&t, &u, &lambda);
        let cols = xi.lu().solve(&common::dense_constraints(&t).transpose()).unwrap();
        let scale = cols.amax().max(1.0);
        for h in 0..t.num_infosets() {
            for s in 1..t.num_sequences() {
                if !below(&t, h, s) {
                    assert!(cols[(s - 1, h)].abs() <= 1e-12 * scale, "seed {seed} infoset {h} sequence {s}");
                }
            }
        }
    }
}

#[test]
fn quadratic_best_response_matches_dense_kkt() {
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let t = random_treeplex(&mut rng, 200);
        let u = interior_plan(&t, &mut rng);
        let lambda = random_lambda(&t, &mut rng);
        let c: Vec<f64> = (0..t.num_sequences()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let xi = build_xi(&t, &u, &lambda).unwrap();
        let (x, gamma) = xi.quadratic_best_response(&c);
        let (want, want_gamma) = common::dense_qbr(&common::dense_xi(&t, &u, &lambda), &common::dense_constraints(&t), &c[1..]);
        let scale = want.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (a, b) in x[1..].iter().zip(&want) {
            assert!((a - b).abs() <= 1e-8 * scale, "seed {seed}: {a} vs {b}");
        }
        for (a, b) in gamma.iter().zip(&want_gamma) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(scale));
        }
        assert_eq!(x[0], 0.0);
    }
}

#[test]
fn quadratic_best_response_on_a_simplex() {
    // min x.c + sum lambda x_a^2 / 2u_a, sum x = 0  =>  x_a = -u_a (c_a - sum_b u_b c_b) / lambda.
    let t = common::simplex(3);
    let u = [1.0, 0.2, 0.3, 0.5];
    let c = [0.0, 1.0, -2.0, 0.5];
    let lam = 0.8;
    let x = quadratic_best_response(&build_xi(&t, &u, &[lam]).unwrap(), &c);
    let mean: f64 = (1..4).map(|a| u[a] * c[a]).sum();
    for a in 1..4 {
        assert!((x[a] + u[a] * (c[a] - mean) / lam).abs() <= 1e-10);
    }
}

#[test]
fn zero_cost_gives_zero_response() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = random_treeplex(&mut rng, 40);
    let u = interior_plan(&t, &mut rng);
    let lambda = random_lambda(&t, &mut rng);
    let x = quadratic_best_response(&build_xi(&t, &u, &lambda).unwrap(), &vec![0.0; t.num_sequences()]);
    assert!(x.iter().all(|v| *v == 0.0));
}

#[test]
fn direct_backward_matches_dense_solve() {
    for seed in 0..15 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let g = random_game(&mut rng, 30, 0.4, 3.0);
        let lambda = common::lambda_of(&g);
        let sol = newton_solve(&g, &lambda, 1e-12, 100).unwrap();
        let gu: Vec<f64> = (0..g.treeplex_u().num_sequences()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gv: Vec<f64> = (0..g.treeplex_v().num_sequences()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bp = BackwardProblem::new(&g, &lambda, &sol, gu.clone(), gv.clone()).unwrap();
        let got = direct_backward_solve(&bp, &g).unwrap();
        assert!(got.residual <= 1e-9);
        let (yu, yv) = dense_backward(&g, &lambda, &sol.u, &sol.v, &gu, &gv);
        let scale = yu.iter().chain(&yv).fold(1.0f64, |m, x| m.max(x.abs()));
        for (a, b) in got.y_u[1..].iter().zip(&yu).chain(got.y_v[1..].iter().zip(&yv)) {
            assert!((a - b).abs() <= 1e-8 * scale, "seed {seed}: {a} vs {b}");
        }
        // The strategy parts stay in the null space of the constraints.
        let ex = constraint_apply(g.treeplex_u(), &got.y_u);
        assert!(ex.iter().all(|v| v.abs() <= 1e-9 * scale));
    }
}

#[test]
fn zero_loss_gradient_gives_zero_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = random_game(&mut rng, 20, 0.5, 3.0);
    let lambda = common::lambda_of(&g);
    let sol = newton_solve(&g, &lambda, 1e-12, 100).unwrap();
    let bp = BackwardProblem::new(
        &g,
        &lambda,
        &sol,
        vec![0.0; g.treeplex_u().num_sequences()],
        vec![0.0; g.treeplex_v().num_sequences()],
    )
    .unwrap();
    let direct = direct_backward_solve(&bp, &g).unwrap();
    assert!(direct.y_u.iter().chain(&direct.y_v).all(|x| x.abs() <= 1e-14));
    let fom = fom_backward_solve(&bp, &g, 0.1, 1e-10, 1000).unwrap();
    assert!(fom.y_u.iter().chain(&fom.y_v).all(|x| x.abs() <= 1e-14));
}

#[test]
fn first_order_backward_matches_direct() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let g = random_game(&mut rng, 40, 0.4, 3.0);
        let lambda = common::lambda_of(&g);
        let sol = newton_solve(&g, &lambda, 1e-12, 100).unwrap();
        let gu: Vec<f64> = (0..g.treeplex_u().num_sequences()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gv: Vec<f64> = (0..g.treeplex_v().num_sequences()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bp = BackwardProblem::new(&g, &lambda, &sol, gu, gv).unwrap();
        let direct = direct_backward_solve(&bp, &g).unwrap();
        let fom = fom_backward_solve(&bp, &g, 0.1, 1e-8, 1_000_000).unwrap();
        assert!(fom.residual <= 1e-8);
        assert!(backward_distance(&direct, &fom) <= 1e-4, "seed {seed}: {}", backward_distance(&direct, &fom));
    }
}

#[test]
fn one_player_backward_is_a_single_quadratic_response() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = random_treeplex(&mut rng, 50);
    let costs: Vec<f64> = (0..t.num_sequences()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g = Game::one_player(t.clone(), &costs).unwrap();
    let lambda = RationalityParams {
        u: random_lambda(&t, &mut rng),
        v: Vec::new(),
    };
    let sol = newton_solve(&g, &lambda, 1e-12, 100).unwrap();
    let gu: Vec<f64> = (0..t.num_sequences()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let bp = BackwardProblem::new(&g, &lambda, &sol, gu.clone(), vec![0.0]).unwrap();
    let want = quadratic_best_response(&build_xi(&t, &sol.u, &lambda.u).unwrap(), &gu);
    for got in [
        direct_backward_solve(&bp, &g).unwrap(),
        fom_backward_solve(&bp, &g, 0.1, 1e-12, 100_000).unwrap(),
    ] {
        for (a, b) in got.y_u.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadratic_response_certificate(seed in any::<u64>(), size in 2usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_treeplex(&mut rng, size);
        let u = interior_plan(&t, &mut rng);
        let lambda = random_lambda(&t, &mut rng);
        let c: Vec<f64> = (0..t.num_sequences()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let xi = build_xi(&t, &u, &lambda).unwrap();
        let (x, gamma) = xi.quadratic_best_response(&c);
        // Stationarity against the closed-form dense matrix, feasibility against E.
        let dx = common::dense_xi(&t, &u, &lambda) * DVector::from_column_slice(&x[1..]);
        let et = constraint_transpose_apply(&t, &gamma);
        let scale = c.iter().chain(&x).fold(1.0f64, |m, v| m.max(v.abs()));
        for a in 1..t.num_sequences() {
            prop_assert!((c[a] + et[a] + dx[a - 1]).abs() <= 1e-9 * scale);
        }
        for r in constraint_apply(&t, &x) {
            prop_assert!(r.abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn backward_residual_vanishes_at_the_direct_solution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game(&mut rng, 25, 0.5, 3.0);
        let lambda = common::lambda_of(&g);
        let sol = newton_solve(&g, &lambda, 1e-11, 100).unwrap();
        let gu: Vec<f64> = (0..g.treeplex_u().num_sequences()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gv: Vec<f64> = (0..g.treeplex_v().num_sequences()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bp = BackwardProblem::new(&g, &lambda, &sol, gu, gv).unwrap();
        let d = direct_backward_solve(&bp, &g).unwrap();
        prop_assert!(backward_residual(&bp, &g, &d.y_u, &d.y_v) <= 1e-9);
    }
}
