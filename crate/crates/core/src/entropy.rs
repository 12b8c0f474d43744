//! Dilated entropy `Psi(u) = sum_h lambda_h sum_{a in A_h} u_a log(u_a / u_{p_h})`.
//!
//! Both functions take per-sequence log-behavioral probabilities so callers
//! never divide realization weights that may have underflowed.

use crate::treeplex::Treeplex;

/// `Psi(u)`; terms with `u_a = 0` contribute zero.
pub fn dilated_entropy(t: &Treeplex, lambda: &[f64], u: &[f64], log_behavior: &[f64]) -> f64 {
    let mut s = 0.0;
    for (h, info) in t.infosets().iter().enumerate() {
        let mut inner = 0.0;
        for &a in &info.actions {
            if u[a] > 0.0 {
                inner += u[a] * log_behavior[a];
            }
        }
        s += lambda[h] * inner;
    }
    s
}

/// Gradient of `Psi` on the feasible set:
/// `lambda_{rho_a} (1 + log(u_a / u_{p_{rho_a}})) - J_a`, with `-J_0` at the root.
pub fn entropy_gradient(t: &Treeplex, lambda: &[f64], log_behavior: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; t.num_sequences()];
    for (h, info) in t.infosets().iter().enumerate() {
        g[info.parent] -= lambda[h];
        for &a in &info.actions {
            g[a] += lambda[h] * (1.0 + log_behavior[a]);
        }
    }
    g
}
