//! Executable reproductions of the worked selector example and of the
//! region-derivation checks.
//!
//! The example source: X1 = (X11, X12) and X2 = (X21, X22) are independent
//! pairs of fair bits, and the target output is Y = (X1J, X2J) where J is a
//! fair coin independent of the sources. Two-bit symbols are encoded as
//! `2*first + second`; pairs (j, b) are encoded as `2*j + b`. There is no
//! decoder side information (Z is a one-symbol alphabet).

mod claims;
mod reports;
mod systems;

pub use claims::{claim_search, ClaimId, ClaimSearchOutcome};
pub use reports::{
    appendix_a_region, det_fn_redundancy_check, enc_sr_point, remark3_eval, verify_prop1_corners,
};
pub use systems::{
    achievable_region_system, binning_feasibility_system, osrb_atom_values, pooled_randomness_region,
    random_thm1_dec, random_thm1_target,
};

use serde::{Deserialize, Serialize};

use crate::prob::{ConditionalKernel, JointPmf, VariableDecl};
use crate::region::{AuxDecomposition, U0Stage, UStage};

/// One named check inside an [`ExampleReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleEntry {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    /// Where the expected value comes from (a published display, a
    /// construction, or an enumeration oracle).
    pub provenance: String,
    pub tol: f64,
    pub pass: bool,
}

/// Outcome of one worked-example check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleReport {
    pub name: String,
    pub entries: Vec<ExampleEntry>,
    pub pass: bool,
}

impl ExampleReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), entries: Vec::new(), pass: true }
    }

    pub fn push(
        &mut self,
        name: impl Into<String>,
        computed: f64,
        expected: f64,
        provenance: impl Into<String>,
        tol: f64,
    ) {
        let pass = (computed - expected).abs() <= tol;
        self.pass &= pass;
        self.entries.push(ExampleEntry {
            name: name.into(),
            computed,
            expected,
            provenance: provenance.into(),
            tol,
            pass,
        });
    }

    /// Records a boolean check as a 0/1 entry.
    pub fn push_flag(&mut self, name: impl Into<String>, ok: bool, provenance: impl Into<String>) {
        self.push(name, if ok { 1.0 } else { 0.0 }, 1.0, provenance, 0.0);
    }

    pub fn entry(&self, name: &str) -> Option<&ExampleEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

fn bit(sym: usize, idx: usize) -> usize {
    // idx 0 is the first (most significant) of the two bits
    if idx == 0 {
        sym >> 1
    } else {
        sym & 1
    }
}

/// The example source-target joint over (X1, X2, Y), all on four-symbol
/// alphabets.
pub fn example1_distribution() -> JointPmf {
    let mut probs = vec![0.0; 64];
    for x1 in 0..4usize {
        for x2 in 0..4usize {
            for j in 0..2usize {
                let y = 2 * bit(x1, j) + bit(x2, j);
                probs[(x1 * 4 + x2) * 4 + y] += 1.0 / 32.0;
            }
        }
    }
    JointPmf::new(
        vec![
            VariableDecl::new("X1", 4),
            VariableDecl::new("X2", 4),
            VariableDecl::new("Y", 4),
        ],
        probs,
    )
    .unwrap()
}

/// The example target over (X1, X2, Z, Y) with a one-symbol Z inserted, the
/// shape the evaluators expect.
pub fn example1_target() -> JointPmf {
    example1_distribution().with_singleton("Z", 2).unwrap()
}

pub(crate) fn kernel(
    from: Vec<(&str, usize)>,
    to: Vec<(&str, usize)>,
    rows: Vec<Vec<f64>>,
) -> ConditionalKernel {
    ConditionalKernel {
        from: from.into_iter().map(|(n, s)| VariableDecl::new(n, s)).collect(),
        to: to.into_iter().map(|(n, s)| VariableDecl::new(n, s)).collect(),
        rows: rows.into_iter().map(Some).collect(),
    }
}

/// Deterministic kernel built from a map row -> symbol.
pub(crate) fn det_kernel(
    from: Vec<(&str, usize)>,
    to: Vec<(&str, usize)>,
    map: impl Fn(usize) -> usize,
) -> ConditionalKernel {
    let n_rows: usize = from.iter().map(|(_, s)| *s).product();
    let n_cols: usize = to.iter().map(|(_, s)| *s).product();
    let rows = (0..n_rows)
        .map(|r| {
            let mut row = vec![0.0; n_cols];
            row[map(r)] = 1.0;
            row
        })
        .collect();
    kernel(from, to, rows)
}

/// Corner decomposition: U1 = X1 and U2 = (J, X2J). Certifies the (2, 1)
/// corner of the example's communication rate region.
pub fn corner_dec() -> AuxDecomposition {
    let u1 = det_kernel(vec![("X1", 4), ("T", 1)], vec![("U1", 4)], |r| r);
    // row x2: u2 = 2*j + bit(x2, j) with prob 1/2 each
    let mut rows = Vec::new();
    for x2 in 0..4usize {
        let mut row = vec![0.0; 4];
        for j in 0..2usize {
            row[2 * j + bit(x2, j)] += 0.5;
        }
        rows.push(row);
    }
    let u2 = kernel(vec![("X2", 4), ("T", 1)], vec![("U2", 4)], rows);
    // y = (bit(u1, j), b) where u2 = (j, b)
    let y = det_kernel(
        vec![("U1", 4), ("U2", 4), ("Z", 1), ("T", 1)],
        vec![("Y", 4)],
        |r| {
            let (u1, u2) = (r / 4, r % 4);
            let (j, b) = (u2 / 2, u2 % 2);
            2 * bit(u1, j) + b
        },
    );
    AuxDecomposition { t_pmf: vec![1.0], u0: U0Stage::Absent, u: UStage::Separate { u1, u2 }, y }
}

/// Mirror of [`corner_dec`]: U1 = (J, X1J), U2 = X2, certifying (1, 2).
pub fn mirrored_corner_dec() -> AuxDecomposition {
    let mut rows = Vec::new();
    for x1 in 0..4usize {
        let mut row = vec![0.0; 4];
        for j in 0..2usize {
            row[2 * j + bit(x1, j)] += 0.5;
        }
        rows.push(row);
    }
    let u1 = kernel(vec![("X1", 4), ("T", 1)], vec![("U1", 4)], rows);
    let u2 = det_kernel(vec![("X2", 4), ("T", 1)], vec![("U2", 4)], |r| r);
    let y = det_kernel(
        vec![("U1", 4), ("U2", 4), ("Z", 1), ("T", 1)],
        vec![("Y", 4)],
        |r| {
            let (u1, u2) = (r / 4, r % 4);
            let (j, b) = (u1 / 2, u1 % 2);
            2 * b + bit(u2, j)
        },
    );
    AuxDecomposition { t_pmf: vec![1.0], u0: U0Stage::Absent, u: UStage::Separate { u1, u2 }, y }
}

/// Jointly correlated outer-bound decomposition: U1 = (X1J, J) and
/// U2 = (X2J, J) share the selector J, so they need a joint kernel.
pub fn correlated_selector_dec() -> AuxDecomposition {
    let mut rows = Vec::new();
    for x1 in 0..4usize {
        for x2 in 0..4usize {
            let mut row = vec![0.0; 16];
            for j in 0..2usize {
                let u1 = 2 * j + bit(x1, j);
                let u2 = 2 * j + bit(x2, j);
                row[u1 * 4 + u2] += 0.5;
            }
            rows.push(row);
        }
    }
    let u = kernel(
        vec![("X1", 4), ("X2", 4), ("T", 1)],
        vec![("U1", 4), ("U2", 4)],
        rows,
    );
    let y = det_kernel(
        vec![("U1", 4), ("U2", 4), ("Z", 1), ("T", 1)],
        vec![("Y", 4)],
        |r| {
            let (u1, u2) = (r / 4, r % 4);
            2 * (u1 % 2) + (u2 % 2)
        },
    );
    AuxDecomposition { t_pmf: vec![1.0], u0: U0Stage::Absent, u: UStage::Joint(u), y }
}

/// Encoder shared-randomness decomposition: U0 = J, U1 = X1J, U2 = X2J.
/// `common_part` controls whether U0 is declared as conditioned on the
/// common part (the inner-bound shape) or on T alone (the outer-bound
/// shape); the example's common part is a single label, so both compose to
/// the same joint.
pub fn selector_u0_dec(common_part: bool) -> AuxDecomposition {
    let u0 = if common_part {
        U0Stage::FromCommonPart(kernel(
            vec![("X0", 1), ("T", 1)],
            vec![("U0", 2)],
            vec![vec![0.5, 0.5]],
        ))
    } else {
        U0Stage::FromTimeSharing(kernel(
            vec![("T", 1)],
            vec![("U0", 2)],
            vec![vec![0.5, 0.5]],
        ))
    };
    let u1 = det_kernel(vec![("X1", 4), ("U0", 2), ("T", 1)], vec![("U1", 2)], |r| {
        let u0 = r % 2;
        let x1 = r / 2;
        bit(x1, u0)
    });
    let u2 = det_kernel(vec![("X2", 4), ("U0", 2), ("T", 1)], vec![("U2", 2)], |r| {
        let u0 = r % 2;
        let x2 = r / 2;
        bit(x2, u0)
    });
    let y = det_kernel(
        vec![("U1", 2), ("U2", 2), ("Z", 1), ("T", 1)],
        vec![("Y", 4)],
        |r| {
            let u2 = r % 2;
            let u1 = r / 2;
            2 * u1 + u2
        },
    );
    AuxDecomposition { t_pmf: vec![1.0], u0, u: UStage::Separate { u1, u2 }, y }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_marginals() {
        let q = example1_distribution();
        for name in ["X1", "X2", "Y"] {
            let m = q.marginal(&[name]).unwrap();
            for &p in m.probs() {
                assert!((p - 0.25).abs() < 1e-12);
            }
        }
        assert!(q.mutual_info(&["X1"], &["X2"], &[]).unwrap() < 1e-12);
        assert!((q.entropy(&["X1"], &[]).unwrap() - 2.0).abs() < 1e-12);
        assert!((q.entropy(&["X2"], &[]).unwrap() - 2.0).abs() < 1e-12);
    }
}
