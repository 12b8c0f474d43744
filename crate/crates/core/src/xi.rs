//! The Hessian `Xi(u)` of the dilated entropy and its tree-structured solves.
//!
//! On the treeplex the quadratic form factors as
//! `x^T Xi x = sum_a lambda_{rho_a} (x_a - b_a x_{p_a})^2 / u_a` with
//! `b_a = u_a / u_{p_a}`, i.e. `Xi = L^T D L` with `L` unit lower triangular in
//! topological order. Every solve below is one or two linear sweeps over that
//! factorization.
//!
//! The root sequence is held fixed, so products and solves act on the
//! non-root block. Vectors are still full length; the root entry of inputs is
//! ignored and the root entry of outputs is zero.

use crate::error::{Error, Result};
use crate::treeplex::Treeplex;

const NO_INFOSET: usize = usize::MAX;

/// Scratch vectors for repeated quadratic best responses.
#[derive(Debug, Clone, Default)]
pub struct QbrWorkspace {
    b: Vec<f64>,
    gamma: Vec<f64>,
}

impl QbrWorkspace {
    /// Multipliers of the last solve.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiMatrix {
    parent: Vec<usize>,
    infoset: Vec<usize>,
    num_infosets: usize,
    u: Vec<f64>,
    behavior: Vec<f64>,
    lam: Vec<f64>,
    jsum: Vec<f64>,
    infoset_lambda: Vec<f64>,
    infoset_parent: Vec<usize>,
}

/// `Xi(u)` for an interior realization plan.
pub fn build_xi(t: &Treeplex, u: &[f64], lambda: &[f64]) -> Result<XiMatrix> {
    t.check_lambda(lambda)?;
    let lb = t.log_behavior_of(u)?;
    Ok(XiMatrix::from_parts(t, u.to_vec(), lb.iter().map(|l| l.exp()).collect(), lambda))
}

impl XiMatrix {
    /// Builds `Xi` from a plan together with its log-behavioral form, which is
    /// more accurate than dividing tiny plan entries.
    pub fn from_log_behavior(t: &Treeplex, u: &[f64], log_behavior: &[f64], lambda: &[f64]) -> Result<XiMatrix> {
        t.check_len(u, "realization plan")?;
        t.check_len(log_behavior, "log-behavioral strategy")?;
        t.check_lambda(lambda)?;
        if let Some(a) = (0..u.len()).find(|&a| !(u[a] > 0.0)) {
            return Err(Error::NonPositive {
                what: "realization plan entry",
                index: a,
                value: u[a],
            });
        }
        let beh = log_behavior.iter().map(|l| l.exp()).collect();
        Ok(XiMatrix::from_parts(t, u.to_vec(), beh, lambda))
    }

    fn from_parts(t: &Treeplex, u: Vec<f64>, mut behavior: Vec<f64>, lambda: &[f64]) -> XiMatrix {
        let n = t.num_sequences();
        behavior[0] = 1.0;
        XiMatrix {
            parent: (0..n).map(|a| t.parent_sequence(a)).collect(),
            infoset: (0..n).map(|a| t.infoset_of(a).unwrap_or(NO_INFOSET)).collect(),
            num_infosets: t.num_infosets(),
            u,
            behavior,
            lam: t.lambda_per_sequence(lambda),
            jsum: t.child_lambda_sum(lambda),
            infoset_lambda: lambda.to_vec(),
            infoset_parent: t.infosets().iter().map(|i| i.parent).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// Diagonal entry `(lambda_{rho_a} + J_a) / u_a`.
    pub fn diag(&self, a: usize) -> f64 {
        (self.lam[a] + self.jsum[a]) / self.u[a]
    }

    /// Off-diagonal entry `-lambda_{rho_a} / u_{p_a}` between `a` and its parent.
    pub fn off_diag(&self, a: usize) -> f64 {
        -self.lam[a] / self.u[self.parent[a]]
    }

    /// Upper-and-lower entries `(row, col, value)` of the full matrix,
    /// root row and column included.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(3 * self.dim());
        for a in 0..self.dim() {
            out.push((a, a, self.diag(a)));
            if a != 0 {
                let p = self.parent[a];
                let o = self.off_diag(a);
                out.push((a, p, o));
                out.push((p, a, o));
            }
        }
        out
    }

    /// Row-major dense copy of the full matrix.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (r, c, v) in self.entries() {
            d[r][c] += v;
        }
        d
    }

    /// `Xi x` on the non-root block.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mul_into(x, &mut out);
        out
    }

    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        for a in 0..self.dim() {
            out[a] = 0.0;
        }
        for c in 1..self.dim() {
            out[c] += self.diag(c) * x[c];
            let p = self.parent[c];
            if p != 0 {
                let o = self.off_diag(c);
                out[c] += o * x[p];
                out[p] += o * x[c];
            }
        }
    }

    /// `L^{-T} r`: `B_a = r_a + sum_{c child of a} b_c B_c`, bottom-up.
    fn lower_t_solve(&self, rhs: &[f64], b: &mut [f64]) {
        b.copy_from_slice(rhs);
        for a in (1..self.dim()).rev() {
            let p = self.parent[a];
            b[p] += self.behavior[a] * b[a];
        }
    }

    /// Solves `Xi x = rhs` on the non-root block in two sweeps.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut b = vec![0.0; n];
        self.lower_t_solve(rhs, &mut b);
        let mut x = vec![0.0; n];
        for a in 1..n {
            x[a] = self.u[a] / self.lam[a] * b[a] + self.behavior[a] * x[self.parent[a]];
        }
        x
    }

    /// `w = E Xi^{-1} c` per infoset: `w_h = (u_{p_h} / lambda_h) sum_{a in A_h} b_a B_a`,
    /// with `B` from one bottom-up sweep.
    pub fn constraint_of_inverse(&self, c: &[f64]) -> Vec<f64> {
        self.constraint_of_inverse_from(&self.infoset_sums(c).1)
    }

    /// Diagonal of `E Xi^{-1} E^T`: `u_{p_h} / lambda_h`.
    pub fn schur_diagonal(&self) -> Vec<f64> {
        (0..self.num_infosets)
            .map(|h| self.u[self.infoset_parent[h]] / self.infoset_lambda[h])
            .collect()
    }

    fn infoset_sums(&self, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut b = vec![0.0; n];
        self.lower_t_solve(c, &mut b);
        let mut g = vec![0.0; self.num_infosets];
        for a in 1..n {
            g[self.infoset[a]] += self.behavior[a] * b[a];
        }
        (b, g)
    }

    /// `argmin_{Ex = 0, x_root = 0} x^T c + x^T Xi x / 2` and its multipliers `gamma`
    /// (one per infoset), satisfying `c + E^T gamma + Xi x = 0` off the root.
    pub fn quadratic_best_response(&self, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut ws = self.workspace();
        let mut x = vec![0.0; self.dim()];
        self.quadratic_best_response_into(c, &mut ws, &mut x);
        (x, ws.gamma)
    }

    pub fn workspace(&self) -> QbrWorkspace {
        QbrWorkspace {
            b: vec![0.0; self.dim()],
            gamma: vec![0.0; self.num_infosets],
        }
    }

    /// Allocation-free [`XiMatrix::quadratic_best_response`]: the minimizer goes
    /// to `x`, the multipliers stay in [`QbrWorkspace::gamma`].
    pub fn quadratic_best_response_into(&self, c: &[f64], ws: &mut QbrWorkspace, x: &mut [f64]) {
        let n = self.dim();
        ws.b.resize(n, 0.0);
        ws.gamma.resize(self.num_infosets, 0.0);
        self.lower_t_solve(c, &mut ws.b);
        // gamma_h = -w_h / s_h, and w_h and the Schur diagonal s_h share the
        // factor u_{p_h} / lambda_h, so gamma_h is minus the infoset sum.
        ws.gamma.fill(0.0);
        for a in 1..n {
            ws.gamma[self.infoset[a]] -= self.behavior[a] * ws.b[a];
        }
        x[0] = 0.0;
        for a in 1..n {
            let y = -self.u[a] / self.lam[a] * (ws.b[a] + ws.gamma[self.infoset[a]]);
            x[a] = y + self.behavior[a] * x[self.parent[a]];
        }
    }

    fn constraint_of_inverse_from(&self, g: &[f64]) -> Vec<f64> {
        g.iter()
            .enumerate()
            .map(|(h, gh)| self.u[self.infoset_parent[h]] / self.infoset_lambda[h] * gh)
            .collect()
    }
}

/// [`XiMatrix::quadratic_best_response`] without the multipliers.
pub fn quadratic_best_response(xi: &XiMatrix, c: &[f64]) -> Vec<f64> {
    xi.quadratic_best_response(c).0
}

/// `(E^T gamma)_a = gamma_{rho_a} - sum_{h in C_a} gamma_h`.
pub fn constraint_transpose_apply(t: &Treeplex, gamma: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t.num_sequences()];
    for (h, info) in t.infosets().iter().enumerate() {
        out[info.parent] -= gamma[h];
        for &a in &info.actions {
            out[a] += gamma[h];
        }
    }
    out
}

/// `(E x)_h = sum_{a in A_h} x_a - x_{p_h}`.
pub fn constraint_apply(t: &Treeplex, x: &[f64]) -> Vec<f64> {
    t.infosets()
        .iter()
        .map(|info| info.actions.iter().map(|&a| x[a]).sum::<f64>() - x[info.parent])
        .collect()
}
