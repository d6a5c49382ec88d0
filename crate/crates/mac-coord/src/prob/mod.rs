//! Exact finite-alphabet probability.
//!
//! A [`JointPmf`] is a dense tensor over an ordered list of named finite
//! variables. All information measures are base-2 with the convention
//! `0 log 0 = 0`. Values are immutable after construction and safe to share
//! across threads.

pub mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Normalization tolerance for pmfs and kernel rows.
pub const NORM_TOL: f64 = 1e-9;
/// Support threshold below which a cell is treated as zero when building
/// the common-part labeling.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Default cap on dense tensor length (number of cells).
pub const DEFAULT_MEMORY_CAP: usize = 1 << 26;

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum ProbError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{0}` must have size >= 1")]
    ZeroSize(String),
    #[error("tensor has {got} entries but the alphabets require {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("negative entry {value:.6e} at cell {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entries sum to {0} which is outside 1 +/- 1e-9")]
    NotNormalized(f64),
    #[error("kernel row {row} sums to {sum} which is outside 1 +/- 1e-9")]
    BadKernelRow { row: usize, sum: f64 },
    #[error("variable sets overlap on `{0}`")]
    Overlap(String),
    #[error("target variable set is empty")]
    EmptyTarget,
    #[error("conditioning row {0} has zero probability")]
    UndefinedRow(usize),
    #[error("memory bound exceeded: {need} cells, cap {cap}")]
    MemoryBound { need: usize, cap: usize },
    #[error("mismatched variable declarations: {0}")]
    AlphabetMismatch(String),
    #[error("common part needs exactly two variables, got {0}")]
    NotBivariate(usize),
}

/// A named finite variable together with its alphabet cardinality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub name: String,
    pub size: usize,
}

impl VariableDecl {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self { name: name.into(), size }
    }
}

/// Dense joint distribution over an ordered list of variables, row-major.
///
/// The last declared variable varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    vars: Vec<VariableDecl>,
    probs: Vec<f64>,
}

/// Conditional distribution of `to` given `from`, stored row per
/// `from`-configuration. Rows whose conditioning event has zero probability
/// are `None` rather than fabricated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalKernel {
    pub from: Vec<VariableDecl>,
    pub to: Vec<VariableDecl>,
    pub rows: Vec<Option<Vec<f64>>>,
}

/// Maximal labeling of two sources by a variable computable from each
/// separately: the connected components of the support bipartite graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommonPartLabeling {
    pub labels1: Vec<usize>,
    pub labels2: Vec<usize>,
    pub count: usize,
}

fn strides(sizes: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; sizes.len()];
    for i in (0..sizes.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * sizes[i + 1];
    }
    s
}

fn entropy_of_weights(weights: impl Iterator<Item = f64>) -> f64 {
    let mut h = 0.0;
    for w in weights {
        if w > 0.0 {
            h -= w * w.ln();
        }
    }
    h / LN_2
}

impl JointPmf {
    /// Builds a pmf, validating sizes, nonnegativity and normalization.
    pub fn new(vars: Vec<VariableDecl>, probs: Vec<f64>) -> Result<Self, ProbError> {
        let mut seen = std::collections::HashSet::new();
        for v in &vars {
            if v.size == 0 {
                return Err(ProbError::ZeroSize(v.name.clone()));
            }
            if !seen.insert(v.name.clone()) {
                return Err(ProbError::DuplicateVariable(v.name.clone()));
            }
        }
        let want: usize = vars.iter().map(|v| v.size).product();
        if probs.len() != want {
            return Err(ProbError::LengthMismatch { got: probs.len(), want });
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if p < 0.0 {
                return Err(ProbError::NegativeEntry { index: i, value: p });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(ProbError::NotNormalized(sum));
        }
        Ok(Self { vars, probs })
    }

    /// Builds a pmf from unnormalized nonnegative weights.
    pub fn from_weights(vars: Vec<VariableDecl>, mut weights: Vec<f64>) -> Result<Self, ProbError> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ProbError::NotNormalized(total));
        }
        for w in weights.iter_mut() {
            *w /= total;
        }
        Self::new(vars, weights)
    }

    /// Uniform distribution over the product alphabet.
    pub fn uniform(vars: Vec<VariableDecl>) -> Self {
        let n: usize = vars.iter().map(|v| v.size).product();
        Self { vars, probs: vec![1.0 / n as f64; n] }
    }

    pub fn vars(&self) -> &[VariableDecl] {
        &self.vars
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn var_index(&self, name: &str) -> Result<usize, ProbError> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| ProbError::UnknownVariable(name.to_string()))
    }

    fn indices(&self, names: &[&str]) -> Result<Vec<usize>, ProbError> {
        names.iter().map(|n| self.var_index(n)).collect()
    }

    fn check_disjoint(sets: &[&[&str]]) -> Result<(), ProbError> {
        let mut seen = std::collections::HashSet::new();
        for set in sets {
            for name in *set {
                if !seen.insert(*name) {
                    return Err(ProbError::Overlap((*name).to_string()));
                }
            }
        }
        Ok(())
    }

    /// Probability of a full configuration given as one symbol per variable
    /// in declaration order.
    pub fn prob_at(&self, config: &[usize]) -> f64 {
        let st = strides(&self.sizes());
        let idx: usize = config.iter().zip(&st).map(|(c, s)| c * s).sum();
        self.probs[idx]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.vars.iter().map(|v| v.size).collect()
    }

    /// Sums out every variable not in `keep`. The kept variables appear in
    /// the order they are listed.
    pub fn marginal(&self, keep: &[&str]) -> Result<JointPmf, ProbError> {
        let keep_idx = self.indices(keep)?;
        Self::check_disjoint(&[keep])?;
        let sizes = self.sizes();
        let out_vars: Vec<VariableDecl> = keep_idx.iter().map(|&i| self.vars[i].clone()).collect();
        let out_sizes: Vec<usize> = keep_idx.iter().map(|&i| sizes[i]).collect();
        let out_strides = strides(&out_sizes);
        let out_len: usize = out_sizes.iter().product();
        let mut out = vec![0.0; out_len];

        let mut digits = vec![0usize; sizes.len()];
        for &p in &self.probs {
            let mut oi = 0usize;
            for (k, &vi) in keep_idx.iter().enumerate() {
                oi += digits[vi] * out_strides[k];
            }
            out[oi] += p;
            // odometer increment
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                if digits[d] < sizes[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
        Ok(JointPmf { vars: out_vars, probs: out })
    }

    /// Conditional kernel of `to` given `given`. Rows on zero-probability
    /// conditioning events are flagged undefined.
    pub fn conditional(&self, to: &[&str], given: &[&str]) -> Result<ConditionalKernel, ProbError> {
        Self::check_disjoint(&[to, given])?;
        if to.is_empty() {
            return Err(ProbError::EmptyTarget);
        }
        let joint = self.marginal(&[given, to].concat())?;
        let g = given.len();
        let sizes = joint.sizes();
        let row_count: usize = sizes[..g].iter().product();
        let row_len: usize = sizes[g..].iter().product();
        let mut rows = Vec::with_capacity(row_count);
        for r in 0..row_count {
            let slice = &joint.probs[r * row_len..(r + 1) * row_len];
            let z: f64 = slice.iter().sum();
            if z <= 0.0 {
                rows.push(None);
            } else {
                rows.push(Some(slice.iter().map(|&p| p / z).collect()));
            }
        }
        Ok(ConditionalKernel {
            from: given.iter().map(|n| self.vars[self.var_index(n).unwrap()].clone()).collect(),
            to: to.iter().map(|n| self.vars[self.var_index(n).unwrap()].clone()).collect(),
            rows,
        })
    }

    fn joint_entropy(&self, of: &[&str]) -> Result<f64, ProbError> {
        if of.is_empty() {
            return Ok(0.0);
        }
        let m = self.marginal(of)?;
        Ok(entropy_of_weights(m.probs.iter().copied()))
    }

    /// Conditional entropy H(of | given) in bits.
    pub fn entropy(&self, of: &[&str], given: &[&str]) -> Result<f64, ProbError> {
        if of.is_empty() {
            return Err(ProbError::EmptyTarget);
        }
        Self::check_disjoint(&[of, given])?;
        let h_all = self.joint_entropy(&[given, of].concat())?;
        let h_given = self.joint_entropy(given)?;
        Ok((h_all - h_given).max(0.0))
    }

    /// Conditional mutual information I(a; b | given) in bits, clamped at 0.
    pub fn mutual_info(&self, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64, ProbError> {
        Self::check_disjoint(&[a, b, given])?;
        if a.is_empty() || b.is_empty() {
            return Err(ProbError::EmptyTarget);
        }
        let h_ag = self.joint_entropy(&[a, given].concat())?;
        let h_bg = self.joint_entropy(&[b, given].concat())?;
        let h_abg = self.joint_entropy(&[a, b, given].concat())?;
        let h_g = self.joint_entropy(given)?;
        Ok((h_ag + h_bg - h_abg - h_g).max(0.0))
    }

    /// Half the L1 distance between two pmfs over identical declarations.
    pub fn total_variation(&self, other: &JointPmf) -> Result<f64, ProbError> {
        if self.vars != other.vars {
            return Err(ProbError::AlphabetMismatch(format!(
                "{:?} vs {:?}",
                self.vars.iter().map(|v| (&v.name, v.size)).collect::<Vec<_>>(),
                other.vars.iter().map(|v| (&v.name, v.size)).collect::<Vec<_>>()
            )));
        }
        let s: f64 = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (p - q).abs())
            .sum();
        Ok(0.5 * s)
    }

    /// n-fold product extension. Each variable keeps its name; its alphabet
    /// becomes the set of length-n sequences, indexed with the first symbol
    /// most significant.
    pub fn iid_extend(&self, n: usize, cap: usize) -> Result<JointPmf, ProbError> {
        assert!(n >= 1, "blocklength must be >= 1");
        let base = self.len();
        let mut need: usize = 1;
        for _ in 0..n {
            need = need
                .checked_mul(base)
                .ok_or(ProbError::MemoryBound { need: usize::MAX, cap })?;
        }
        if need > cap {
            return Err(ProbError::MemoryBound { need, cap });
        }
        let sizes = self.sizes();
        let k = sizes.len();
        let out_vars: Vec<VariableDecl> = self
            .vars
            .iter()
            .map(|v| VariableDecl::new(v.name.clone(), v.size.pow(n as u32)))
            .collect();
        let out_sizes: Vec<usize> = out_vars.iter().map(|v| v.size).collect();
        let out_strides = strides(&out_sizes);
        let mut out = vec![0.0; need];

        // odometer over n single-letter cells
        let st = strides(&sizes);
        let mut cells = vec![0usize; n];
        loop {
            let mut value = 1.0;
            let mut seq_idx = vec![0usize; k];
            for &c in &cells {
                value *= self.probs[c];
                for v in 0..k {
                    let digit = (c / st[v]) % sizes[v];
                    seq_idx[v] = seq_idx[v] * sizes[v] + digit;
                }
            }
            let oi: usize = seq_idx.iter().zip(&out_strides).map(|(i, s)| i * s).sum();
            out[oi] = value;

            let mut done = true;
            for d in (0..n).rev() {
                cells[d] += 1;
                if cells[d] < base {
                    done = false;
                    break;
                }
                cells[d] = 0;
            }
            if done {
                break;
            }
        }
        Ok(JointPmf { vars: out_vars, probs: out })
    }

    /// True iff I(a; c | b) <= tol, i.e. a -> b -> c holds up to tolerance.
    pub fn is_markov(&self, a: &[&str], b: &[&str], c: &[&str], tol: f64) -> Result<bool, ProbError> {
        Ok(self.mutual_info(a, c, b)? <= tol)
    }

    /// Common-part labeling of a two-variable pmf: connected components of
    /// the bipartite graph with an edge wherever the cell exceeds the
    /// support threshold.
    pub fn common_part(&self) -> Result<CommonPartLabeling, ProbError> {
        if self.vars.len() != 2 {
            return Err(ProbError::NotBivariate(self.vars.len()));
        }
        let (n1, n2) = (self.vars[0].size, self.vars[1].size);
        let mut uf = UnionFind::new(n1 + n2);
        for a in 0..n1 {
            for b in 0..n2 {
                if self.probs[a * n2 + b] > SUPPORT_TOL {
                    uf.union(a, n1 + b);
                }
            }
        }
        // canonical labels in order of first appearance over a-symbols, then b
        let mut label_of_root = std::collections::HashMap::new();
        let mut labels1 = vec![0usize; n1];
        let mut labels2 = vec![0usize; n2];
        for (a, l) in labels1.iter_mut().enumerate() {
            let r = uf.find(a);
            let next = label_of_root.len();
            *l = *label_of_root.entry(r).or_insert(next);
        }
        for (b, l) in labels2.iter_mut().enumerate() {
            let r = uf.find(n1 + b);
            let next = label_of_root.len();
            *l = *label_of_root.entry(r).or_insert(next);
        }
        Ok(CommonPartLabeling { labels1, labels2, count: label_of_root.len() })
    }

    /// Inserts a size-1 variable at `pos`, leaving probabilities unchanged.
    pub fn with_singleton(&self, name: &str, pos: usize) -> Result<JointPmf, ProbError> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(ProbError::DuplicateVariable(name.to_string()));
        }
        let mut vars = self.vars.clone();
        vars.insert(pos, VariableDecl::new(name, 1));
        Ok(JointPmf { vars, probs: self.probs.clone() })
    }

    /// Reorders variables to the given name order (must be a permutation of
    /// the declared names).
    pub fn reorder(&self, order: &[&str]) -> Result<JointPmf, ProbError> {
        let idx = self.indices(order)?;
        if idx.len() != self.vars.len() {
            return Err(ProbError::AlphabetMismatch("reorder must list every variable".into()));
        }
        Self::check_disjoint(&[order])?;
        let sizes = self.sizes();
        let out_vars: Vec<VariableDecl> = idx.iter().map(|&i| self.vars[i].clone()).collect();
        let out_sizes: Vec<usize> = idx.iter().map(|&i| sizes[i]).collect();
        let out_strides = strides(&out_sizes);
        let mut out = vec![0.0; self.probs.len()];
        let mut digits = vec![0usize; sizes.len()];
        for &p in &self.probs {
            let mut oi = 0;
            for (k, &vi) in idx.iter().enumerate() {
                oi += digits[vi] * out_strides[k];
            }
            out[oi] = p;
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                if digits[d] < sizes[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
        Ok(JointPmf { vars: out_vars, probs: out })
    }
}

impl ConditionalKernel {
    /// Validates row normalization and nonnegativity.
    pub fn validate(&self) -> Result<(), ProbError> {
        let row_len: usize = self.to.iter().map(|v| v.size).product();
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(r) = row {
                if r.len() != row_len {
                    return Err(ProbError::LengthMismatch { got: r.len(), want: row_len });
                }
                let mut sum = 0.0;
                for &p in r {
                    if p < 0.0 {
                        return Err(ProbError::NegativeEntry { index: i, value: p });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > NORM_TOL {
                    return Err(ProbError::BadKernelRow { row: i, sum });
                }
            }
        }
        Ok(())
    }

    pub fn row(&self, idx: usize) -> Result<&[f64], ProbError> {
        self.rows
            .get(idx)
            .ok_or(ProbError::UndefinedRow(idx))?
            .as_deref()
            .ok_or(ProbError::UndefinedRow(idx))
    }

    pub fn from_len(&self) -> usize {
        self.from.iter().map(|v| v.size).product()
    }

    pub fn to_len(&self) -> usize {
        self.to.iter().map(|v| v.size).product()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins, keeps labels stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str, size: usize) -> VariableDecl {
        VariableDecl::new(name, size)
    }

    /// Selector example source: X1 = (X11,X12), X2 = (X21,X22) independent
    /// uniform pairs of bits, Y = (X1J, X2J) with J a fair coin.
    /// Symbols are encoded as 2*b1 + b2.
    pub(crate) fn selector_example() -> JointPmf {
        let mut probs = vec![0.0; 4 * 4 * 4];
        for x1 in 0..4usize {
            for x2 in 0..4usize {
                let (x11, x12) = (x1 >> 1, x1 & 1);
                let (x21, x22) = (x2 >> 1, x2 & 1);
                let y1 = 2 * x11 + x21;
                let y2 = 2 * x12 + x22;
                probs[(x1 * 4 + x2) * 4 + y1] += 1.0 / 32.0;
                probs[(x1 * 4 + x2) * 4 + y2] += 1.0 / 32.0;
            }
        }
        JointPmf::new(vec![v("X1", 4), v("X2", 4), v("Y", 4)], probs).unwrap()
    }

    #[test]
    fn marginal_identity_and_symmetry() {
        let p = JointPmf::uniform(vec![v("A", 2), v("B", 2)]);
        let all = p.marginal(&["A", "B"]).unwrap();
        assert_eq!(all, p);
        let a = p.marginal(&["A"]).unwrap();
        assert_eq!(a.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn marginal_of_selector_example_output_is_uniform() {
        // independent oracle: enumerate the 16 x 2 outcomes of (X1, X2, J)
        let mut y_counts = [0.0f64; 4];
        for x1 in 0..4usize {
            for x2 in 0..4usize {
                for j in 0..2usize {
                    let b1 = if j == 0 { x1 >> 1 } else { x1 & 1 };
                    let b2 = if j == 0 { x2 >> 1 } else { x2 & 1 };
                    y_counts[2 * b1 + b2] += 1.0 / 32.0;
                }
            }
        }
        assert!(y_counts.iter().all(|&c| (c - 0.25).abs() < 1e-15));

        let q = selector_example();
        let y = q.marginal(&["Y"]).unwrap();
        for &p in y.probs() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_independent_and_deterministic() {
        let p = JointPmf::new(
            vec![v("A", 2), v("B", 2)],
            vec![0.35 * 0.5, 0.35 * 0.5, 0.65 * 0.5, 0.65 * 0.5],
        )
        .unwrap();
        let k = p.conditional(&["A"], &["B"]).unwrap();
        for row in &k.rows {
            let r = row.as_ref().unwrap();
            assert!((r[0] - 0.35).abs() < 1e-12 && (r[1] - 0.65).abs() < 1e-12);
        }

        let eq = JointPmf::new(vec![v("A", 2), v("B", 2)], vec![0.3, 0.0, 0.0, 0.7]).unwrap();
        let k = eq.conditional(&["A"], &["B"]).unwrap();
        assert_eq!(k.row(0).unwrap(), &[1.0, 0.0]);
        assert_eq!(k.row(1).unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn conditional_rows_of_selector_example() {
        // oracle: given (x1, x2), Y is (x11,x21) or (x12,x22) with prob 1/2
        // each, merged when the two coincide.
        let q = selector_example();
        let k = q.conditional(&["Y"], &["X1", "X2"]).unwrap();
        for x1 in 0..4usize {
            for x2 in 0..4usize {
                let row = k.row(x1 * 4 + x2).unwrap();
                let y1 = 2 * (x1 >> 1) + (x2 >> 1);
                let y2 = 2 * (x1 & 1) + (x2 & 1);
                let mut want = [0.0f64; 4];
                want[y1] += 0.5;
                want[y2] += 0.5;
                for y in 0..4 {
                    assert!((row[y] - want[y]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conditional_undefined_rows_are_flagged() {
        let p = JointPmf::new(vec![v("A", 2), v("B", 2)], vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        let k = p.conditional(&["A"], &["B"]).unwrap();
        assert!(k.rows[0].is_some());
        assert!(k.rows[1].is_none());
        assert!(matches!(k.row(1), Err(ProbError::UndefinedRow(1))));
    }

    #[test]
    fn entropy_basics() {
        let p = JointPmf::uniform(vec![v("A", 4)]);
        assert!((p.entropy(&["A"], &[]).unwrap() - 2.0).abs() < 1e-12);

        let eq = JointPmf::new(vec![v("A", 2), v("B", 2)], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(eq.entropy(&["A"], &["B"]).unwrap() < 1e-12);
        assert!(eq.entropy(&[], &["A"]).is_err());
    }

    #[test]
    fn selector_example_first_source_entropy_is_two_bits() {
        let q = selector_example();
        assert!((q.entropy(&["X1"], &[]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mutual_info_basics() {
        let p = JointPmf::uniform(vec![v("A", 2), v("B", 3)]);
        assert!(p.mutual_info(&["A"], &["B"], &[]).unwrap() < 1e-12);
        assert!(p.mutual_info(&["A"], &["A"], &[]).is_err());
    }

    #[test]
    fn selector_example_published_mi_values() {
        // I(J, X2J; X2) = 1 and I(X1J, X2J, J; X1, X2) = 2. Build the joint
        // over (X1, X2, J, X1J, X2J) explicitly.
        let mut probs = vec![0.0; 4 * 4 * 2 * 2 * 2];
        for x1 in 0..4usize {
            for x2 in 0..4usize {
                for j in 0..2usize {
                    let b1 = if j == 0 { x1 >> 1 } else { x1 & 1 };
                    let b2 = if j == 0 { x2 >> 1 } else { x2 & 1 };
                    let idx = (((x1 * 4 + x2) * 2 + j) * 2 + b1) * 2 + b2;
                    probs[idx] = 1.0 / 32.0;
                }
            }
        }
        let p = JointPmf::new(
            vec![v("X1", 4), v("X2", 4), v("J", 2), v("B1", 2), v("B2", 2)],
            probs,
        )
        .unwrap();
        let mi = p.mutual_info(&["J", "B2"], &["X2"], &[]).unwrap();
        assert!((mi - 1.0).abs() < 1e-9, "I(J, X2J; X2) = {mi}");
        let mi2 = p.mutual_info(&["B1", "B2", "J"], &["X1", "X2"], &[]).unwrap();
        assert!((mi2 - 2.0).abs() < 1e-9, "I(X1J, X2J, J; X1, X2) = {mi2}");
    }

    #[test]
    fn total_variation_basics() {
        let p = JointPmf::new(vec![v("A", 2)], vec![1.0, 0.0]).unwrap();
        let q = JointPmf::uniform(vec![v("A", 2)]);
        assert_eq!(p.total_variation(&p).unwrap(), 0.0);
        assert!((p.total_variation(&q).unwrap() - 0.5).abs() < 1e-15);
        let r = JointPmf::uniform(vec![v("B", 2)]);
        assert!(p.total_variation(&r).is_err());
    }

    #[test]
    fn selector_example_tv_to_product_of_marginals() {
        // oracle: direct enumeration over the 64 cells; the closed-form sum
        // works out to 36/64.
        let q = selector_example();
        let m1 = q.marginal(&["X1"]).unwrap();
        let m2 = q.marginal(&["X2"]).unwrap();
        let my = q.marginal(&["Y"]).unwrap();
        let mut probs = vec![0.0; 64];
        for a in 0..4 {
            for b in 0..4 {
                for y in 0..4 {
                    probs[(a * 4 + b) * 4 + y] = m1.probs()[a] * m2.probs()[b] * my.probs()[y];
                }
            }
        }
        let prod = JointPmf::new(q.vars().to_vec(), probs).unwrap();
        let tv = q.total_variation(&prod).unwrap();
        assert!((tv - 0.5625).abs() < 1e-12, "tv = {tv}");
    }

    #[test]
    fn iid_extend_basics() {
        let p = JointPmf::new(vec![v("A", 2), v("B", 2)], vec![0.4, 0.1, 0.2, 0.3]).unwrap();
        let e1 = p.iid_extend(1, DEFAULT_MEMORY_CAP).unwrap();
        assert_eq!(e1.probs(), p.probs());

        let u = JointPmf::uniform(vec![v("A", 2)]);
        let e5 = u.iid_extend(5, DEFAULT_MEMORY_CAP).unwrap();
        assert!((e5.entropy(&["A"], &[]).unwrap() - 5.0).abs() < 1e-9);

        assert!(matches!(
            u.iid_extend(10, 100),
            Err(ProbError::MemoryBound { .. })
        ));
    }

    #[test]
    fn iid_extend_matches_product_structure() {
        let p = JointPmf::new(vec![v("A", 2), v("B", 3)], vec![0.1, 0.2, 0.05, 0.3, 0.15, 0.2])
            .unwrap();
        let e = p.iid_extend(2, DEFAULT_MEMORY_CAP).unwrap();
        // spot-check: sequences a=(1,0), b=(2,1) -> p(1,2)*p(0,1)
        let a_idx = 1 * 2 + 0;
        let b_idx = 2 * 3 + 1;
        let got = e.probs()[a_idx * 9 + b_idx];
        assert!((got - 0.2 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn markov_chain_detection() {
        // A -> B -> C by kernel composition
        let mut probs = vec![0.0; 8];
        let pa = [0.3, 0.7];
        let k_ab = [[0.9, 0.1], [0.2, 0.8]];
        let k_bc = [[0.6, 0.4], [0.1, 0.9]];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    probs[(a * 2 + b) * 2 + c] = pa[a] * k_ab[a][b] * k_bc[b][c];
                }
            }
        }
        let p = JointPmf::new(vec![v("A", 2), v("B", 2), v("C", 2)], probs).unwrap();
        assert!(p.is_markov(&["A"], &["B"], &["C"], 1e-9).unwrap());

        // A = C fair bit, B independent
        let mut probs = vec![0.0; 8];
        for a in 0..2 {
            for b in 0..2 {
                probs[(a * 2 + b) * 2 + a] = 0.25;
            }
        }
        let p = JointPmf::new(vec![v("A", 2), v("B", 2), v("C", 2)], probs).unwrap();
        assert!(!p.is_markov(&["A"], &["B"], &["C"], 1e-9).unwrap());
    }

    #[test]
    fn common_part_identity_independent_block() {
        let eq = JointPmf::new(vec![v("A", 2), v("B", 2)], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let lab = eq.common_part().unwrap();
        assert_eq!(lab.count, 2);
        assert_ne!(lab.labels1[0], lab.labels1[1]);
        assert_eq!(lab.labels1, lab.labels2);

        let ind = JointPmf::uniform(vec![v("A", 3), v("B", 2)]);
        assert_eq!(ind.common_part().unwrap().count, 1);

        // block-diagonal support on {0,1}^2 union {2,3}^2
        let mut probs = vec![0.0; 16];
        for a in 0..4usize {
            for b in 0..4usize {
                if (a < 2) == (b < 2) {
                    probs[a * 4 + b] = 1.0 / 8.0;
                }
            }
        }
        let blk = JointPmf::new(vec![v("A", 4), v("B", 4)], probs).unwrap();
        let lab = blk.common_part().unwrap();
        assert_eq!(lab.count, 2);
        assert_eq!(lab.labels1[0], lab.labels1[1]);
        assert_eq!(lab.labels1[2], lab.labels1[3]);
        assert_ne!(lab.labels1[0], lab.labels1[2]);

        let tri = JointPmf::uniform(vec![v("A", 2), v("B", 2), v("C", 2)]);
        assert!(matches!(tri.common_part(), Err(ProbError::NotBivariate(3))));
    }

    #[test]
    fn common_part_idempotence() {
        // relabel both sides by the common part; labeling the labeled pair
        // is the identity labeling
        let mut probs = vec![0.0; 16];
        for a in 0..4usize {
            for b in 0..4usize {
                if (a < 2) == (b < 2) {
                    probs[a * 4 + b] = 1.0 / 8.0;
                }
            }
        }
        let p = JointPmf::new(vec![v("A", 4), v("B", 4)], probs).unwrap();
        let lab = p.common_part().unwrap();
        let mut collapsed = vec![0.0; lab.count * lab.count];
        for a in 0..4 {
            for b in 0..4 {
                collapsed[lab.labels1[a] * lab.count + lab.labels2[b]] += p.probs()[a * 4 + b];
            }
        }
        let c = JointPmf::new(vec![v("L1", lab.count), v("L2", lab.count)], collapsed).unwrap();
        let lab2 = c.common_part().unwrap();
        assert_eq!(lab2.count, lab.count);
        for i in 0..lab.count {
            assert_eq!(lab2.labels1[i], lab2.labels2[i]);
            assert_eq!(lab2.labels1[i], i);
        }
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(
            JointPmf::new(vec![v("A", 2)], vec![0.5, 0.6]),
            Err(ProbError::NotNormalized(_))
        ));
        assert!(matches!(
            JointPmf::new(vec![v("A", 2)], vec![1.5, -0.5]),
            Err(ProbError::NegativeEntry { .. })
        ));
        assert!(matches!(
            JointPmf::new(vec![v("A", 2), v("A", 2)], vec![0.25; 4]),
            Err(ProbError::DuplicateVariable(_))
        ));
        assert!(matches!(
            JointPmf::new(vec![v("A", 0)], vec![]),
            Err(ProbError::ZeroSize(_))
        ));
        assert!(matches!(
            JointPmf::new(vec![v("A", 2)], vec![1.0]),
            Err(ProbError::LengthMismatch { .. })
        ));
    }
}
