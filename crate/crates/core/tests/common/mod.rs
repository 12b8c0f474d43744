//! Independent oracles shared by the integration tests: dense linear algebra,
//! logit fixed-point iteration and a sequence-form LP.
#![allow(dead_code)]

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use nlqre::treeplex::{InfosetDef, TreeplexDef};
use nlqre::{Game, RationalityParams, SparsePayoff, Treeplex};

pub fn simplex(k: usize) -> Treeplex {
    Treeplex::new(TreeplexDef {
        num_sequences: k + 1,
        infosets: vec![InfosetDef {
            parent: 0,
            actions: (1..=k).collect(),
        }],
    })
    .unwrap()
}

/// Normal-form game; `a[i][j]` is paid to the max (column) player.
pub fn matrix_game(a: &[Vec<f64>]) -> Game {
    let (m, n) = (a.len(), a[0].len());
    let mut trip = Vec::new();
    for (i, row) in a.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if x != 0.0 {
                trip.push((i + 1, j + 1, x));
            }
        }
    }
    let p = SparsePayoff::new(m + 1, n + 1, trip).unwrap();
    Game::new(simplex(m), simplex(n), p).unwrap()
}

/// Rock-paper-scissors with winner payoffs `w` for rock, paper and scissors wins.
pub fn rps_weighted(w: [f64; 3]) -> Game {
    // Row = min player's action. Entries are the max player's winnings.
    let (r, p, s) = (w[0], w[1], w[2]);
    matrix_game(&[vec![0.0, p, -r], vec![-p, 0.0, s], vec![r, -s, 0.0]])
}

pub fn rps() -> Game {
    rps_weighted([1.0, 1.0, 1.0])
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Logit QRE of a matrix game by damped fixed-point iteration of
/// `x = softmax(-A y / lu)`, `y = softmax(A^T x / lv)`. Returns mixed strategies.
pub fn logit_fixed_point(a: &[Vec<f64>], lu: f64, lv: f64) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (a.len(), a[0].len());
    let mut x = vec![1.0 / m as f64; m];
    let mut y = vec![1.0 / n as f64; n];
    let eta = 0.2;
    for _ in 0..1_000_000 {
        let ay: Vec<f64> = (0..m).map(|i| -(0..n).map(|j| a[i][j] * y[j]).sum::<f64>() / lu).collect();
        let atx: Vec<f64> = (0..n).map(|j| (0..m).map(|i| a[i][j] * x[i]).sum::<f64>() / lv).collect();
        let bx = softmax(&ay);
        let by = softmax(&atx);
        let mut delta: f64 = 0.0;
        for i in 0..m {
            let nx = (1.0 - eta) * x[i] + eta * bx[i];
            delta = delta.max((nx - x[i]).abs());
            x[i] = nx;
        }
        for j in 0..n {
            let ny = (1.0 - eta) * y[j] + eta * by[j];
            delta = delta.max((ny - y[j]).abs());
            y[j] = ny;
        }
        if delta < 1e-15 {
            break;
        }
    }
    (x, y)
}

pub fn dense_payoff(g: &Game) -> DMatrix<f64> {
    let p = g.payoff();
    let mut m = DMatrix::zeros(p.rows(), p.cols());
    for &(i, j, x) in p.triplets() {
        m[(i, j)] += x;
    }
    m
}

/// Constraint matrix over the non-root sequences: row `h` has `+1` on the
/// actions of `h` and `-1` at its parent when the parent is not the root.
pub fn dense_constraints(t: &Treeplex) -> DMatrix<f64> {
    let n = t.num_sequences() - 1;
    let mut e = DMatrix::zeros(t.num_infosets(), n);
    for (h, info) in t.infosets().iter().enumerate() {
        for &a in &info.actions {
            e[(h, a - 1)] = 1.0;
        }
        if info.parent != 0 {
            e[(h, info.parent - 1)] = -1.0;
        }
    }
    e
}

/// Non-root block of Xi from its closed-form entries, built directly from
/// the treeplex rather than from the library's matrix type.
pub fn dense_xi(t: &Treeplex, u: &[f64], lambda: &[f64]) -> DMatrix<f64> {
    let n = t.num_sequences() - 1;
    let mut m = DMatrix::zeros(n, n);
    for (h, info) in t.infosets().iter().enumerate() {
        for &a in &info.actions {
            let jsum: f64 = t.child_infosets(a).iter().map(|&c| lambda[c]).sum();
            m[(a - 1, a - 1)] += (lambda[h] + jsum) / u[a];
            if info.parent != 0 {
                let p = info.parent;
                m[(a - 1, p - 1)] -= lambda[h] / u[p];
                m[(p - 1, a - 1)] -= lambda[h] / u[p];
            }
        }
    }
    m
}

/// Solves `min x^T c + x^T Xi x / 2` subject to `E x = 0` through the dense
/// KKT system. `c` and the result cover the non-root sequences.
pub fn dense_qbr(xi: &DMatrix<f64>, e: &DMatrix<f64>, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (xi.nrows(), e.nrows());
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(xi);
    k.view_mut((0, n), (n, m)).copy_from(&e.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(e);
    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        rhs[i] = -c[i];
    }
    let sol = k.lu().solve(&rhs).expect("nonsingular KKT");
    (sol.rows(0, n).iter().copied().collect(), sol.rows(n, m).iter().copied().collect())
}

/// Nash value (paid to the max player) of the sequence-form game by LP:
/// `min_{u, q} q_root` s.t. `F^T q >= P^T u`, `E u = e`, `u >= 0`.
pub fn lp_nash_value(g: &Game) -> f64 {
    let (tu, tv) = (g.treeplex_u(), g.treeplex_v());
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let u: Vec<_> = (0..tu.num_sequences()).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let q_root = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let q: Vec<_> = (0..tv.num_infosets())
        .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    lp.add_constraint(&[(u[0], 1.0)], ComparisonOp::Eq, 1.0);
    for info in tu.infosets() {
        let mut row: Vec<_> = info.actions.iter().map(|&a| (u[a], 1.0)).collect();
        row.push((u[info.parent], -1.0));
        lp.add_constraint(&row, ComparisonOp::Eq, 0.0);
    }
    let dense = dense_payoff(g);
    for b in 0..tv.num_sequences() {
        // (F^T q)_b: the root row covers b = 0, infoset rows give +q at their
        // actions and -q at their parent.
        let mut row = Vec::new();
        if b == 0 {
            row.push((q_root, 1.0));
        } else {
            row.push((q[tv.infoset_of(b).unwrap()], 1.0));
        }
        for &h in tv.child_infosets(b) {
            row.push((q[h], -1.0));
        }
        for a in 0..tu.num_sequences() {
            if dense[(a, b)] != 0.0 {
                row.push((u[a], -dense[(a, b)]));
            }
        }
        lp.add_constraint(&row, ComparisonOp::Ge, 0.0);
    }
    lp.solve().expect("feasible bounded LP").objective()
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn lambda_of(g: &Game) -> RationalityParams {
    g.lambda().cloned().unwrap_or_else(|| RationalityParams::constant(g, 1.0))
}

/// Behavioral strategy that plays every reduced pure strategy with equal
/// probability: each action is weighted by the number of reduced strategies
/// below it, `N(a) = prod_{h in C_a} sum_{a' in A_h} N(a')`.
pub fn reduced_uniform_behavior(t: &Treeplex) -> Vec<Vec<f64>> {
    // Log counts. Sequence indices are topological, so a descending sweep
    // sees every child action before its parent.
    let mut log_n = vec![0.0; t.num_sequences()];
    for a in (0..t.num_sequences()).rev() {
        for &h in t.child_infosets(a) {
            let acts = &t.infosets()[h].actions;
            let m = acts.iter().map(|&b| log_n[b]).fold(f64::NEG_INFINITY, f64::max);
            log_n[a] += m + acts.iter().map(|&b| (log_n[b] - m).exp()).sum::<f64>().ln();
        }
    }
    t.infosets()
        .iter()
        .map(|info| softmax(&info.actions.iter().map(|&a| log_n[a]).collect::<Vec<_>>()))
        .collect()
}
