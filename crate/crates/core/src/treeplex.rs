//! Sequence-form decision structure of one player.
//!
//! Sequences are indexed `0..num_sequences` with sequence `0` the empty (root)
//! sequence. Every infoset `h` has a parent sequence `p_h` (the player's own
//! last action before reaching `h`) and a list of actions, each of which is a
//! sequence owned by `h`. The implied constraint matrix `E` has one row for the
//! root (`u_0 = 1`) and one row per infoset (`sum_{a in A_h} u_a - u_{p_h} = 0`).
//!
//! Indices are required to be topological: a parent sequence precedes its
//! children and an infoset precedes every infoset nested below it. All
//! traversals below are single linear scans because of that.

use std::fmt;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NO_INFOSET: usize = usize::MAX;

/// Tolerance on `|sum(b) - 1|` accepted for behavioral input.
pub const BEHAVIORAL_TOL: f64 = 1e-9;

/// Serialized form of an infoset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfosetDef {
    pub parent: usize,
    pub actions: Vec<usize>,
}

/// Serialized (unvalidated) form of a treeplex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeplexDef {
    pub num_sequences: usize,
    pub infosets: Vec<InfosetDef>,
}

/// One broken treeplex invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoSequences,
    IndexOutOfRange { infoset: usize, sequence: usize },
    EmptyInfoset { infoset: usize },
    RootAsAction { infoset: usize },
    OrphanSequence { sequence: usize },
    SharedSequence { sequence: usize, infosets: Vec<usize> },
    Cycle { infoset: usize },
    NonTopologicalSequence { sequence: usize, parent: usize },
    NonTopologicalInfoset { infoset: usize, parent_infoset: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoSequences => write!(f, "treeplex has no root sequence"),
            Violation::IndexOutOfRange { infoset, sequence } => {
                write!(f, "infoset {infoset} references sequence {sequence} out of range")
            }
            Violation::EmptyInfoset { infoset } => write!(f, "infoset {infoset} has no actions"),
            Violation::RootAsAction { infoset } => {
                write!(f, "infoset {infoset} lists the root sequence as an action")
            }
            Violation::OrphanSequence { sequence } => {
                write!(f, "sequence {sequence} belongs to no infoset")
            }
            Violation::SharedSequence { sequence, infosets } => {
                write!(f, "sequence {sequence} belongs to several infosets {infosets:?}")
            }
            Violation::Cycle { infoset } => {
                write!(f, "infoset {infoset} lies on a parent cycle")
            }
            Violation::NonTopologicalSequence { sequence, parent } => {
                write!(f, "sequence {sequence} does not come after its parent sequence {parent}")
            }
            Violation::NonTopologicalInfoset {
                infoset,
                parent_infoset,
            } => write!(
                f,
                "infoset {infoset} does not come after its parent infoset {parent_infoset}"
            ),
        }
    }
}

/// Result of [`validate_treeplex`]; empty when the description is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every treeplex invariant and lists each violation found.
pub fn validate_treeplex(def: &TreeplexDef) -> ValidationReport {
    let n = def.num_sequences;
    let mut violations = Vec::new();
    if n == 0 {
        violations.push(Violation::NoSequences);
        return ValidationReport { violations };
    }

    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (h, info) in def.infosets.iter().enumerate() {
        if info.parent >= n {
            violations.push(Violation::IndexOutOfRange {
                infoset: h,
                sequence: info.parent,
            });
        }
        if info.actions.is_empty() {
            violations.push(Violation::EmptyInfoset { infoset: h });
        }
        for &a in &info.actions {
            if a >= n {
                violations.push(Violation::IndexOutOfRange {
                    infoset: h,
                    sequence: a,
                });
            } else if a == 0 {
                violations.push(Violation::RootAsAction { infoset: h });
            } else {
                owners[a].push(h);
            }
        }
    }
    for (a, own) in owners.iter().enumerate().skip(1) {
        match own.len() {
            0 => violations.push(Violation::OrphanSequence { sequence: a }),
            1 => {}
            _ => violations.push(Violation::SharedSequence {
                sequence: a,
                infosets: own.clone(),
            }),
        }
    }

    // Cycle detection walks parent links infoset -> parent sequence -> owner.
    let owner_of = |a: usize| -> Option<usize> {
        if a < n && owners[a].len() == 1 {
            Some(owners[a][0])
        } else {
            None
        }
    };
    for (h, info) in def.infosets.iter().enumerate() {
        let mut seen = 0usize;
        let mut cur = info.parent;
        let mut cyclic = false;
        while cur != 0 && cur < n {
            match owner_of(cur) {
                Some(g) => {
                    if g == h {
                        cyclic = true;
                        break;
                    }
                    seen += 1;
                    if seen > def.infosets.len() {
                        cyclic = true;
                        break;
                    }
                    cur = def.infosets[g].parent;
                }
                None => break,
            }
        }
        if cyclic {
            violations.push(Violation::Cycle { infoset: h });
        }
    }

    for (h, info) in def.infosets.iter().enumerate() {
        for &a in &info.actions {
            if a < n && info.parent < n && a <= info.parent {
                violations.push(Violation::NonTopologicalSequence {
                    sequence: a,
                    parent: info.parent,
                });
            }
        }
        if info.parent != 0 {
            if let Some(g) = owner_of(info.parent) {
                if g >= h {
                    violations.push(Violation::NonTopologicalInfoset {
                        infoset: h,
                        parent_infoset: g,
                    });
                }
            }
        }
    }

    ValidationReport { violations }
}

/// A validated treeplex. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeplexDef", into = "TreeplexDef")]
pub struct Treeplex {
    num_sequences: usize,
    infosets: Vec<InfosetDef>,
    seq_infoset: Vec<usize>,
    seq_parent: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl TryFrom<TreeplexDef> for Treeplex {
    type Error = Error;

    fn try_from(def: TreeplexDef) -> Result<Self> {
        Treeplex::new(def)
    }
}

impl From<Treeplex> for TreeplexDef {
    fn from(t: Treeplex) -> Self {
        TreeplexDef {
            num_sequences: t.num_sequences,
            infosets: t.infosets,
        }
    }
}

impl Treeplex {
    pub fn new(def: TreeplexDef) -> Result<Self> {
        let report = validate_treeplex(&def);
        if !report.is_valid() {
            return Err(Error::InvalidTreeplex(report));
        }
        let n = def.num_sequences;
        let mut seq_infoset = vec![NO_INFOSET; n];
        let mut seq_parent = vec![0; n];
        let mut children = vec![Vec::new(); n];
        for (h, info) in def.infosets.iter().enumerate() {
            children[info.parent].push(h);
            for &a in &info.actions {
                seq_infoset[a] = h;
                seq_parent[a] = info.parent;
            }
        }
        Ok(Treeplex {
            num_sequences: n,
            infosets: def.infosets,
            seq_infoset,
            seq_parent,
            children,
        })
    }

    /// The root-only treeplex of a player without decisions.
    pub fn trivial() -> Self {
        Treeplex::new(TreeplexDef {
            num_sequences: 1,
            infosets: Vec::new(),
        })
        .expect("root-only treeplex is valid")
    }

    pub fn num_sequences(&self) -> usize {
        self.num_sequences
    }

    pub fn num_infosets(&self) -> usize {
        self.infosets.len()
    }

    pub fn infosets(&self) -> &[InfosetDef] {
        &self.infosets
    }

    /// Parent sequence `p_h` of infoset `h`.
    pub fn parent_of_infoset(&self, h: usize) -> usize {
        self.infosets[h].parent
    }

    /// Action sequences `A_h` of infoset `h`.
    pub fn actions(&self, h: usize) -> &[usize] {
        &self.infosets[h].actions
    }

    /// Owning infoset `rho_a` of sequence `a`; `None` for the root.
    pub fn infoset_of(&self, a: usize) -> Option<usize> {
        match self.seq_infoset[a] {
            NO_INFOSET => None,
            h => Some(h),
        }
    }

    /// Parent sequence `p_{rho_a}` of a non-root sequence. The root maps to itself.
    pub fn parent_sequence(&self, a: usize) -> usize {
        self.seq_parent[a]
    }

    /// Infosets `C_a` immediately following sequence `a`.
    pub fn child_infosets(&self, a: usize) -> &[usize] {
        &self.children[a]
    }

    /// `lambda_{rho_a}` per sequence (0 for the root).
    pub fn lambda_per_sequence(&self, lambda: &[f64]) -> Vec<f64> {
        (0..self.num_sequences)
            .map(|a| self.infoset_of(a).map_or(0.0, |h| lambda[h]))
            .collect()
    }

    /// `J_a = sum_{h in C_a} lambda_h` per sequence.
    pub fn child_lambda_sum(&self, lambda: &[f64]) -> Vec<f64> {
        self.children
            .iter()
            .map(|hs| hs.iter().map(|&h| lambda[h]).sum())
            .collect()
    }

    /// Uniform behavioral strategy converted to sequence form.
    pub fn uniform_plan(&self) -> RealizationPlan {
        let mut u = vec![0.0; self.num_sequences];
        u[0] = 1.0;
        for info in &self.infosets {
            let p = u[info.parent] / info.actions.len() as f64;
            for &a in &info.actions {
                u[a] = p;
            }
        }
        RealizationPlan(u)
    }

    /// Uniform log-behavioral probabilities per sequence (root entry 0).
    pub fn uniform_log_behavior(&self) -> Vec<f64> {
        let mut lb = vec![0.0; self.num_sequences];
        for info in &self.infosets {
            let l = -(info.actions.len() as f64).ln();
            for &a in &info.actions {
                lb[a] = l;
            }
        }
        lb
    }

    /// Sequence form from per-sequence log-behavioral probabilities.
    pub fn plan_from_log_behavior(&self, log_behavior: &[f64]) -> RealizationPlan {
        let mut u = vec![0.0; self.num_sequences];
        u[0] = 1.0;
        for info in &self.infosets {
            let up = u[info.parent];
            for &a in &info.actions {
                u[a] = up * log_behavior[a].exp();
            }
        }
        RealizationPlan(u)
    }

    /// Per-sequence `log(u_a / u_{p_{rho_a}})` of an interior plan.
    pub fn log_behavior_of(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u, "realization plan")?;
        let mut lb = vec![0.0; self.num_sequences];
        for info in &self.infosets {
            let up = u[info.parent];
            for &a in &info.actions {
                if !(u[a] > 0.0) || !(up > 0.0) {
                    return Err(Error::NonPositive {
                        what: "realization plan entry",
                        index: a,
                        value: u[a],
                    });
                }
                lb[a] = (u[a] / up).ln();
            }
        }
        Ok(lb)
    }

    pub(crate) fn check_len(&self, x: &[f64], what: &'static str) -> Result<()> {
        if x.len() != self.num_sequences {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.num_sequences,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Every `lambda_h` must be finite and strictly positive.
    pub(crate) fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.infosets.len() {
            return Err(Error::DimensionMismatch {
                what: "rationality parameters",
                expected: self.infosets.len(),
                found: lambda.len(),
            });
        }
        for (h, &l) in lambda.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::NonPositive {
                    what: "lambda",
                    index: h,
                    value: l,
                });
            }
        }
        Ok(())
    }
}

/// Nonnegative vector over a player's sequences satisfying `Eu = e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealizationPlan(pub Vec<f64>);

impl RealizationPlan {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RealizationPlan {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for RealizationPlan {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for RealizationPlan {
    fn from(v: Vec<f64>) -> Self {
        RealizationPlan(v)
    }
}

/// Max-norm of `Eu - e`, the root row included.
pub fn constraint_residual(t: &Treeplex, u: &[f64]) -> Result<f64> {
    t.check_len(u, "realization plan")?;
    let mut r = (u[0] - 1.0).abs();
    for info in t.infosets() {
        let s: f64 = info.actions.iter().map(|&a| u[a]).sum();
        r = r.max((s - u[info.parent]).abs());
    }
    Ok(r)
}

/// `u_a = u_{p_{rho_a}} * b_a` with `u_0 = 1`.
///
/// `behavioral[h]` lists probabilities in the order of `t.actions(h)`.
pub fn behavioral_to_sequence(t: &Treeplex, behavioral: &[Vec<f64>]) -> Result<RealizationPlan> {
    if behavioral.len() != t.num_infosets() {
        return Err(Error::DimensionMismatch {
            what: "behavioral strategy",
            expected: t.num_infosets(),
            found: behavioral.len(),
        });
    }
    let mut u = vec![0.0; t.num_sequences()];
    u[0] = 1.0;
    for (h, (info, b)) in t.infosets().iter().zip(behavioral).enumerate() {
        if b.len() != info.actions.len() {
            return Err(Error::InvalidBehavioral {
                infoset: h,
                reason: format!("{} probabilities for {} actions", b.len(), info.actions.len()),
            });
        }
        if let Some(&p) = b.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidBehavioral {
                infoset: h,
                reason: format!("entry {p} is not a probability"),
            });
        }
        let s: f64 = b.iter().sum();
        if (s - 1.0).abs() > BEHAVIORAL_TOL {
            return Err(Error::InvalidBehavioral {
                infoset: h,
                reason: format!("probabilities sum to {s}"),
            });
        }
        let up = u[info.parent];
        for (&a, &p) in info.actions.iter().zip(b) {
            u[a] = up * p;
        }
    }
    Ok(RealizationPlan(u))
}

/// `b_a = u_a / u_{p_{rho_a}}`; inverse of [`behavioral_to_sequence`].
pub fn sequence_to_behavioral(t: &Treeplex, u: &[f64], tol: f64) -> Result<Vec<Vec<f64>>> {
    let residual = constraint_residual(t, u)?;
    if residual > tol {
        return Err(Error::Infeasible { residual });
    }
    t.infosets()
        .iter()
        .map(|info| {
            let up = u[info.parent];
            if !(up > 0.0) {
                return Err(Error::ZeroParentMass {
                    sequence: info.parent,
                });
            }
            Ok(info.actions.iter().map(|&a| u[a] / up).collect())
        })
        .collect()
}

/// Behavioral strategy from per-sequence log-behavioral values.
pub fn behavioral_from_log(t: &Treeplex, log_behavior: &[f64]) -> Vec<Vec<f64>> {
    t.infosets()
        .iter()
        .map(|info| info.actions.iter().map(|&a| log_behavior[a].exp()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn def(n: usize, infosets: &[(usize, &[usize])]) -> TreeplexDef {
        TreeplexDef {
            num_sequences: n,
            infosets: infosets
                .iter()
                .map(|(p, a)| InfosetDef {
                    parent: *p,
                    actions: a.to_vec(),
                })
                .collect(),
        }
    }

    #[test]
    fn single_root_infoset_is_valid() {
        assert!(validate_treeplex(&def(4, &[(0, &[1, 2, 3])])).is_valid());
    }

    #[test]
    fn parent_among_own_actions_is_a_cycle() {
        let report = validate_treeplex(&def(4, &[(0, &[1]), (2, &[2, 3])]));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Cycle { infoset: 1 })));
    }

    #[test]
    fn parallel_infosets_are_valid() {
        let report = validate_treeplex(&def(7, &[(0, &[1, 2]), (1, &[3, 4]), (1, &[5, 6])]));
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn reports_orphans_empties_and_order() {
        let report = validate_treeplex(&def(5, &[(0, &[3, 4]), (3, &[])]));
        let v = &report.violations;
        assert!(v.contains(&Violation::OrphanSequence { sequence: 1 }));
        assert!(v.contains(&Violation::OrphanSequence { sequence: 2 }));
        assert!(v.contains(&Violation::EmptyInfoset { infoset: 1 }));

        let report = validate_treeplex(&def(5, &[(2, &[3, 4]), (0, &[1, 2])]));
        assert!(report
            .violations
            .contains(&Violation::NonTopologicalInfoset {
                infoset: 0,
                parent_infoset: 1
            }));
        let report = validate_treeplex(&def(5, &[(0, &[3, 4]), (3, &[1, 2])]));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonTopologicalSequence { .. })));
    }

    #[test]
    fn shared_and_out_of_range_sequences() {
        let report = validate_treeplex(&def(3, &[(0, &[1, 2]), (0, &[2, 7])]));
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::SharedSequence { sequence: 2, .. }
        )));
        assert!(report.violations.contains(&Violation::IndexOutOfRange {
            infoset: 1,
            sequence: 7
        }));
    }

    #[test]
    fn constraint_residual_examples() {
        let t = Treeplex::new(def(4, &[(0, &[1, 2, 3])])).unwrap();
        assert_eq!(constraint_residual(&t, &[1.0; 4]).unwrap(), 2.0);
        let mut u = t.uniform_plan();
        assert!(constraint_residual(&t, &u).unwrap() < 1e-15);
        u[2] += 1e-3;
        assert!(constraint_residual(&t, &u).unwrap() >= 1e-3 - 1e-15);
        assert!(constraint_residual(&t, &[1.0; 3]).is_err());
    }

    #[test]
    fn behavioral_conversions() {
        let t = Treeplex::new(def(5, &[(0, &[1, 2, 3, 4])])).unwrap();
        let u = behavioral_to_sequence(&t, &[vec![0.25; 4]]).unwrap();
        assert_eq!(u.0, vec![1.0, 0.25, 0.25, 0.25, 0.25]);
        let b = sequence_to_behavioral(&t, &u, 1e-12).unwrap();
        assert_eq!(b, vec![vec![0.25; 4]]);

        let chain = Treeplex::new(def(5, &[(0, &[1, 2]), (1, &[3, 4])])).unwrap();
        let u = behavioral_to_sequence(&chain, &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(&u[3..], &[0.25, 0.25]);

        let par = Treeplex::new(def(7, &[(0, &[1, 2]), (1, &[3, 4]), (1, &[5, 6])])).unwrap();
        let u = behavioral_to_sequence(&par, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]])
            .unwrap();
        assert_eq!(u.0, vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn behavioral_input_errors() {
        let t = Treeplex::new(def(3, &[(0, &[1, 2])])).unwrap();
        assert!(behavioral_to_sequence(&t, &[vec![0.7, 0.7]]).is_err());
        assert!(behavioral_to_sequence(&t, &[vec![1.5, -0.5]]).is_err());
        assert!(behavioral_to_sequence(&t, &[vec![1.0]]).is_err());
    }

    #[test]
    fn zero_parent_mass_is_an_error() {
        let t = Treeplex::new(def(5, &[(0, &[1, 2]), (1, &[3, 4])])).unwrap();
        let err = sequence_to_behavioral(&t, &[1.0, 0.0, 1.0, 0.0, 0.0], 1e-12).unwrap_err();
        assert!(matches!(err, Error::ZeroParentMass { sequence: 1 }));
    }

    #[test]
    fn serde_roundtrip_validates() {
        let t = Treeplex::new(def(4, &[(0, &[1, 2, 3])])).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"num_sequences":4,"infosets":[{"parent":0,"actions":[1,2,3]}]}"#);
        let back: Treeplex = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<Treeplex>(
            r#"{"num_sequences":3,"infosets":[{"parent":2,"actions":[2,1]}]}"#
        )
        .is_err());
    }
}
