//! Rate-bound evaluators for the six bound families, the decomposition
//! composer, and certificate search.
//!
//! A decomposition factors as
//! `p(t) p(u0|x0,t) p(u1|x1,u0,t) p(u2|x2,u0,t) p(y|u1,u2,z,t)`
//! where the `u0` stage may be absent (or conditioned on `t` alone) and the
//! two encoder kernels may be replaced by one joint kernel
//! `p(u1,u2|x1,x2,u0,t)` for the outer-bound families. Correctness of a
//! decomposition against a target always means: for every `t` of positive
//! probability, the composed conditional over `(X1,X2,Z,Y)` equals the
//! target.

pub mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::{CommonPartLabeling, ConditionalKernel, JointPmf, ProbError, VariableDecl};

pub use search::{
    region_membership, trace_boundary, MembershipOutcome, SearchBudget, TracePoint,
};

#[derive(Debug, Error)]
pub enum RegionError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("structural mismatch: {0}")]
    Structure(String),
    #[error("sources are not conditionally independent given the side information: I(X1;X2|Z) = {0:.3e}")]
    NotConditionallyIndependent(f64),
    #[error("invalid rate point: {0}")]
    InvalidPoint(String),
    #[error("invalid search budget: {0}")]
    InvalidBudget(String),
    #[error("composition needs {need} cells, cap {cap}")]
    ComposeTooLarge { need: usize, cap: usize },
}

/// Identifier for the six bound families exposed by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremId {
    /// Inner bound, pairwise shared randomness only.
    Thm1,
    /// Outer bound, pairwise shared randomness only.
    Thm2,
    /// Exact region for sources conditionally independent given Z.
    Thm3,
    /// Inner bound with encoder shared randomness (U0 from the common part).
    Thm4,
    /// Outer bound with encoder shared randomness.
    Thm5,
    /// Outer bound with encoder shared randomness, conditionally
    /// independent sources.
    Thm6,
}

impl TheoremId {
    pub fn parse(s: &str) -> Option<TheoremId> {
        match s {
            "thm1" => Some(TheoremId::Thm1),
            "thm2" => Some(TheoremId::Thm2),
            "thm3" => Some(TheoremId::Thm3),
            "thm4" => Some(TheoremId::Thm4),
            "thm5" => Some(TheoremId::Thm5),
            "thm6" => Some(TheoremId::Thm6),
            _ => None,
        }
    }

    pub fn token(&self) -> &'static str {
        match self {
            TheoremId::Thm1 => "thm1",
            TheoremId::Thm2 => "thm2",
            TheoremId::Thm3 => "thm3",
            TheoremId::Thm4 => "thm4",
            TheoremId::Thm5 => "thm5",
            TheoremId::Thm6 => "thm6",
        }
    }

    /// Whether the family carries an encoder shared-randomness rate R00.
    pub fn has_r00(&self) -> bool {
        matches!(self, TheoremId::Thm4 | TheoremId::Thm5 | TheoremId::Thm6)
    }
}

/// Rate coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rate {
    R1,
    R2,
    R00,
    R01,
    R02,
}

impl Rate {
    pub fn name(&self) -> &'static str {
        match self {
            Rate::R1 => "R1",
            Rate::R2 => "R2",
            Rate::R00 => "R00",
            Rate::R01 => "R01",
            Rate::R02 => "R02",
        }
    }
}

/// A rate tuple; `R00` is absent for the families without encoder shared
/// randomness. Coordinates may be `+inf` (unlimited shared randomness).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
    pub r00: Option<f64>,
    pub r01: f64,
    pub r02: f64,
}

impl RatePoint {
    pub fn without_r00(r1: f64, r2: f64, r01: f64, r02: f64) -> Self {
        Self { r1, r2, r00: None, r01, r02 }
    }

    pub fn with_r00(r1: f64, r2: f64, r00: f64, r01: f64, r02: f64) -> Self {
        Self { r1, r2, r00: Some(r00), r01, r02 }
    }

    pub fn get(&self, rate: Rate) -> Option<f64> {
        match rate {
            Rate::R1 => Some(self.r1),
            Rate::R2 => Some(self.r2),
            Rate::R00 => self.r00,
            Rate::R01 => Some(self.r01),
            Rate::R02 => Some(self.r02),
        }
    }

    pub fn validate(&self, theorem: TheoremId) -> Result<(), RegionError> {
        let mut coords = vec![self.r1, self.r2, self.r01, self.r02];
        if theorem.has_r00() {
            let r00 = self
                .r00
                .ok_or_else(|| RegionError::InvalidPoint("R00 required for this family".into()))?;
            coords.push(r00);
        }
        for c in coords {
            if c.is_nan() || c < 0.0 {
                return Err(RegionError::InvalidPoint(format!("coordinate {c} not allowed")));
            }
        }
        Ok(())
    }
}

/// The stage producing the encoder-cooperation auxiliary U0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum U0Stage {
    /// No U0 (treated as a one-symbol alphabet).
    Absent,
    /// `p(u0 | x0, t)` where X0 is the common part of (X1, X2).
    FromCommonPart(ConditionalKernel),
    /// `p(u0 | t)`.
    FromTimeSharing(ConditionalKernel),
}

/// Encoder stage: separate kernels or one joint kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UStage {
    /// `p(u1|x1[,u0],t)` and `p(u2|x2[,u0],t)`.
    Separate { u1: ConditionalKernel, u2: ConditionalKernel },
    /// `p(u1,u2|x1,x2[,u0],t)`, allowed by the outer-bound families.
    Joint(ConditionalKernel),
}

/// Factored auxiliary decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxDecomposition {
    /// Time-sharing distribution over T.
    pub t_pmf: Vec<f64>,
    pub u0: U0Stage,
    pub u: UStage,
    /// `p(y | u1, u2, z, t)`.
    pub y: ConditionalKernel,
}

/// Alphabet sizes for the searched auxiliaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxSizes {
    pub u1: usize,
    pub u2: usize,
    pub u0: usize,
    pub t: usize,
}

impl AuxSizes {
    /// Defaults: |U1| = |X1||Y|+2, |U2| = |X2||Y|+2, |U0| = |X0|+2, |T| = 1.
    pub fn defaults(q: &JointPmf) -> Result<Self, RegionError> {
        let x1 = q.vars()[q.var_index("X1")?].size;
        let x2 = q.vars()[q.var_index("X2")?].size;
        let y = q.vars()[q.var_index("Y")?].size;
        let x0 = common_part_of(q)?.count;
        Ok(Self { u1: x1 * y + 2, u2: x2 * y + 2, u0: x0 + 2, t: 1 })
    }
}

/// One lower bound: `sum of the named rates >= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEval {
    pub label: String,
    pub rates: Vec<Rate>,
    pub rhs: f64,
}

/// Result of evaluating one bound family at a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEval {
    pub theorem: TheoremId,
    pub bounds: Vec<BoundEval>,
    /// Max over t of the total variation between the composed conditional
    /// over (X1, X2, Z, Y) and the target.
    pub correctness_error: f64,
    pub per_t_error: Vec<f64>,
    /// Conditional mutual informations that the structure requires to be 0.
    pub markov_errors: Vec<(String, f64)>,
}

impl RegionEval {
    /// Checks the bounds against a point; every bound must satisfy
    /// `sum of rates + tol >= rhs`, with any `+inf` coordinate absorbing
    /// its bounds.
    pub fn satisfied_by(&self, point: &RatePoint, tol: f64) -> bool {
        self.bounds.iter().all(|b| {
            let mut sum = 0.0;
            for r in &b.rates {
                match point.get(*r) {
                    Some(v) if v.is_infinite() => return true,
                    Some(v) => sum += v,
                    None => return false,
                }
            }
            sum + tol >= b.rhs
        })
    }

    pub fn bound(&self, label: &str) -> Option<f64> {
        self.bounds.iter().find(|b| b.label == label).map(|b| b.rhs)
    }

    pub fn max_markov_error(&self) -> f64 {
        self.markov_errors.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }
}

pub(crate) fn require(cond: bool, msg: &str) -> Result<(), RegionError> {
    if cond {
        Ok(())
    } else {
        Err(RegionError::Structure(msg.to_string()))
    }
}

/// Common part of the (X1, X2) marginal of a target distribution.
pub fn common_part_of(q: &JointPmf) -> Result<CommonPartLabeling, RegionError> {
    Ok(q.marginal(&["X1", "X2"])?.common_part()?)
}

fn check_kernel(
    k: &ConditionalKernel,
    from: &[(&str, usize)],
    to: &[(&str, usize)],
    what: &str,
) -> Result<(), RegionError> {
    let fmt = |d: &[VariableDecl]| {
        d.iter().map(|v| format!("{}:{}", v.name, v.size)).collect::<Vec<_>>().join(",")
    };
    let want_from: Vec<VariableDecl> =
        from.iter().map(|(n, s)| VariableDecl::new(*n, *s)).collect();
    let want_to: Vec<VariableDecl> = to.iter().map(|(n, s)| VariableDecl::new(*n, *s)).collect();
    require(
        k.from == want_from && k.to == want_to,
        &format!(
            "{what} kernel must be ({}) -> ({}), found ({}) -> ({})",
            fmt(&want_from),
            fmt(&want_to),
            fmt(&k.from),
            fmt(&k.to)
        ),
    )?;
    k.validate()?;
    Ok(())
}

/// Sizes of the target variables (X1, X2, Z, Y).
pub(crate) fn target_sizes(q: &JointPmf) -> Result<(usize, usize, usize, usize), RegionError> {
    let get = |n: &str| -> Result<usize, RegionError> { Ok(q.vars()[q.var_index(n)?].size) };
    Ok((get("X1")?, get("X2")?, get("Z")?, get("Y")?))
}

impl AuxDecomposition {
    pub fn t_size(&self) -> usize {
        self.t_pmf.len()
    }

    pub fn u0_size(&self) -> usize {
        match &self.u0 {
            U0Stage::Absent => 1,
            U0Stage::FromCommonPart(k) | U0Stage::FromTimeSharing(k) => {
                k.to.first().map(|v| v.size).unwrap_or(1)
            }
        }
    }

    pub fn u_sizes(&self) -> (usize, usize) {
        match &self.u {
            UStage::Separate { u1, u2 } => (u1.to[0].size, u2.to[0].size),
            UStage::Joint(k) => (k.to[0].size, k.to[1].size),
        }
    }

    pub fn y_size(&self) -> usize {
        self.y.to[0].size
    }

    pub fn is_separate(&self) -> bool {
        matches!(self.u, UStage::Separate { .. })
    }

    /// Validates kernel shapes against the target `q` over (X1, X2, Z, Y)
    /// and the common-part labeling.
    pub fn validate(&self, q: &JointPmf) -> Result<(), RegionError> {
        let (sx1, sx2, sz, sy) = target_sizes(q)?;
        let st = self.t_size();
        require(st >= 1, "time sharing alphabet must be nonempty")?;
        let sum: f64 = self.t_pmf.iter().sum();
        require(
            self.t_pmf.iter().all(|p| *p >= 0.0) && (sum - 1.0).abs() <= 1e-9,
            "time sharing pmf must be a distribution",
        )?;
        let su0 = self.u0_size();
        match &self.u0 {
            U0Stage::Absent => {}
            U0Stage::FromCommonPart(k) => {
                let x0 = common_part_of(q)?;
                check_kernel(k, &[("X0", x0.count), ("T", st)], &[("U0", su0)], "u0")?;
            }
            U0Stage::FromTimeSharing(k) => {
                check_kernel(k, &[("T", st)], &[("U0", su0)], "u0")?;
            }
        }
        let (su1, su2) = self.u_sizes();
        match &self.u {
            UStage::Separate { u1, u2 } => {
                if su0 == 1 && matches!(self.u0, U0Stage::Absent) {
                    check_kernel(u1, &[("X1", sx1), ("T", st)], &[("U1", su1)], "u1")?;
                    check_kernel(u2, &[("X2", sx2), ("T", st)], &[("U2", su2)], "u2")?;
                } else {
                    check_kernel(u1, &[("X1", sx1), ("U0", su0), ("T", st)], &[("U1", su1)], "u1")?;
                    check_kernel(u2, &[("X2", sx2), ("U0", su0), ("T", st)], &[("U2", su2)], "u2")?;
                }
            }
            UStage::Joint(k) => {
                if su0 == 1 && matches!(self.u0, U0Stage::Absent) {
                    check_kernel(
                        k,
                        &[("X1", sx1), ("X2", sx2), ("T", st)],
                        &[("U1", su1), ("U2", su2)],
                        "joint u",
                    )?;
                } else {
                    check_kernel(
                        k,
                        &[("X1", sx1), ("X2", sx2), ("U0", su0), ("T", st)],
                        &[("U1", su1), ("U2", su2)],
                        "joint u",
                    )?;
                }
            }
        }
        check_kernel(
            &self.y,
            &[("U1", su1), ("U2", su2), ("Z", sz), ("T", st)],
            &[("Y", sy)],
            "y",
        )?;
        Ok(())
    }
}

/// Composed joint over (X1, X2, Z, X0, T, U0, U1, U2, Y) with X0 the
/// deterministic common-part label of X1.
pub(crate) fn compose_full(
    q: &JointPmf,
    dec: &AuxDecomposition,
    cap: usize,
) -> Result<JointPmf, RegionError> {
    dec.validate(q)?;
    let (sx1, sx2, sz, sy) = target_sizes(q)?;
    let labeling = common_part_of(q)?;
    let sx0 = labeling.count;
    let (st, su0) = (dec.t_size(), dec.u0_size());
    let (su1, su2) = dec.u_sizes();

    let need = sx1
        .checked_mul(sx2)
        .and_then(|v| v.checked_mul(sz))
        .and_then(|v| v.checked_mul(sx0))
        .and_then(|v| v.checked_mul(st))
        .and_then(|v| v.checked_mul(su0))
        .and_then(|v| v.checked_mul(su1))
        .and_then(|v| v.checked_mul(su2))
        .and_then(|v| v.checked_mul(sy))
        .ok_or(RegionError::ComposeTooLarge { need: usize::MAX, cap })?;
    if need > cap {
        return Err(RegionError::ComposeTooLarge { need, cap });
    }

    let q3 = q.marginal(&["X1", "X2", "Z"])?;
    let mut probs = vec![0.0; need];
    let mut oi = 0usize; // runs in row-major order over the loops below
    for x1 in 0..sx1 {
        let x0 = labeling.labels1[x1];
        for x2 in 0..sx2 {
            for z in 0..sz {
                let base = q3.probs()[(x1 * sx2 + x2) * sz + z];
                for x0i in 0..sx0 {
                    for t in 0..st {
                        for u0 in 0..su0 {
                            for u1 in 0..su1 {
                                for u2 in 0..su2 {
                                    for y in 0..sy {
                                        let v = 'cell: {
                                            if x0i != x0 || base == 0.0 {
                                                break 'cell 0.0;
                                            }
                                            let pt = dec.t_pmf[t];
                                            if pt == 0.0 {
                                                break 'cell 0.0;
                                            }
                                            let p0 = match &dec.u0 {
                                                U0Stage::Absent => 1.0,
                                                U0Stage::FromCommonPart(k) => {
                                                    kernel_entry(k, x0 * st + t, u0)?
                                                }
                                                U0Stage::FromTimeSharing(k) => {
                                                    kernel_entry(k, t, u0)?
                                                }
                                            };
                                            if p0 == 0.0 {
                                                break 'cell 0.0;
                                            }
                                            let pu = match &dec.u {
                                                UStage::Separate { u1: k1, u2: k2 } => {
                                                    let (r1, r2) = if matches!(
                                                        dec.u0,
                                                        U0Stage::Absent
                                                    ) {
                                                        (x1 * st + t, x2 * st + t)
                                                    } else {
                                                        (
                                                            (x1 * su0 + u0) * st + t,
                                                            (x2 * su0 + u0) * st + t,
                                                        )
                                                    };
                                                    let a = kernel_entry(k1, r1, u1)?;
                                                    if a == 0.0 {
                                                        break 'cell 0.0;
                                                    }
                                                    a * kernel_entry(k2, r2, u2)?
                                                }
                                                UStage::Joint(k) => {
                                                    let r = if matches!(dec.u0, U0Stage::Absent) {
                                                        (x1 * sx2 + x2) * st + t
                                                    } else {
                                                        ((x1 * sx2 + x2) * su0 + u0) * st + t
                                                    };
                                                    kernel_entry(k, r, u1 * su2 + u2)?
                                                }
                                            };
                                            if pu == 0.0 {
                                                break 'cell 0.0;
                                            }
                                            let py = kernel_entry(
                                                &dec.y,
                                                ((u1 * su2 + u2) * sz + z) * st + t,
                                                y,
                                            )?;
                                            base * pt * p0 * pu * py
                                        };
                                        probs[oi] = v;
                                        oi += 1;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert_eq!(oi, need);
    let vars = vec![
        VariableDecl::new("X1", sx1),
        VariableDecl::new("X2", sx2),
        VariableDecl::new("Z", sz),
        VariableDecl::new("X0", sx0),
        VariableDecl::new("T", st),
        VariableDecl::new("U0", su0),
        VariableDecl::new("U1", su1),
        VariableDecl::new("U2", su2),
        VariableDecl::new("Y", sy),
    ];
    Ok(JointPmf::new(vars, probs)?)
}

fn kernel_entry(k: &ConditionalKernel, row: usize, col: usize) -> Result<f64, RegionError> {
    match &k.rows[row] {
        Some(r) => Ok(r[col]),
        // a reachable undefined row is a structural error; unreachable rows
        // never get here because the weight is zero before the lookup
        None => Err(RegionError::Structure(format!(
            "kernel row {row} is undefined but reachable"
        ))),
    }
}

/// Composes a source distribution over (X1, X2, Z) with a decomposition,
/// producing the joint over (X1, X2, Z, T, U0, U1, U2, Y).
///
/// `q` may carry a Y variable (used for kernel-shape validation against the
/// full target); only its (X1, X2, Z) marginal enters the composition.
pub fn compose(q: &JointPmf, dec: &AuxDecomposition, cap: usize) -> Result<JointPmf, RegionError> {
    let full = compose_full(q, dec, cap)?;
    Ok(full.marginal(&["X1", "X2", "Z", "T", "U0", "U1", "U2", "Y"])?)
}

/// Per-t total variation between the composed conditional over
/// (X1, X2, Z, Y) and the target; entries for t with zero probability are
/// 0 (unused time-sharing slots constrain nothing).
pub fn correctness_errors(
    composed: &JointPmf,
    q: &JointPmf,
) -> Result<(f64, Vec<f64>), RegionError> {
    let st = composed.vars()[composed.var_index("T")?].size;
    let m = composed.marginal(&["T", "X1", "X2", "Z", "Y"])?;
    let qr = q.reorder(&["X1", "X2", "Z", "Y"])?;
    let block = qr.len();
    let mut per_t = vec![0.0; st];
    for t in 0..st {
        let slice = &m.probs()[t * block..(t + 1) * block];
        let pt: f64 = slice.iter().sum();
        if pt <= 0.0 {
            continue;
        }
        let tv: f64 = slice
            .iter()
            .zip(qr.probs())
            .map(|(p, q)| (p / pt - q).abs())
            .sum::<f64>()
            * 0.5;
        per_t[t] = tv;
    }
    let max = per_t.iter().copied().fold(0.0, f64::max);
    Ok((max, per_t))
}

// ---------------------------------------------------------------------------
// Bound formulas
// ---------------------------------------------------------------------------

/// A bound's right-hand side as +/- conditional mutual informations over
/// the composed joint, or a max of two alternatives.
#[derive(Debug, Clone)]
pub(crate) struct BoundSpec {
    pub label: &'static str,
    pub rates: Vec<Rate>,
    pub terms: Vec<MiTerm>,
    pub alt: Option<Vec<MiTerm>>,
}

/// `sign * I(a; b | c)` with variable-name lists over the composed joint.
#[derive(Debug, Clone)]
pub(crate) struct MiTerm {
    pub sign: f64,
    pub a: &'static [&'static str],
    pub b: &'static [&'static str],
    pub c: &'static [&'static str],
}

const ZT: &[&str] = &["Z", "T"];

macro_rules! mi {
    (neg $a:expr, $b:expr, $c:expr) => {
        MiTerm { sign: -1.0, a: $a, b: $b, c: $c }
    };
    ($a:expr, $b:expr) => {
        MiTerm { sign: 1.0, a: $a, b: $b, c: ZT }
    };
    ($a:expr, $b:expr, $c:expr) => {
        MiTerm { sign: 1.0, a: $a, b: $b, c: $c }
    };
}

pub(crate) fn bound_specs(theorem: TheoremId) -> Vec<BoundSpec> {
    use Rate::*;
    let b = |label: &'static str, rates: Vec<Rate>, terms: Vec<MiTerm>| BoundSpec {
        label,
        rates,
        terms,
        alt: None,
    };
    match theorem {
        TheoremId::Thm1 => vec![
            b("R1", vec![R1], vec![mi!(&["U1"], &["X1"], &["U2", "Z", "T"])]),
            b("R2", vec![R2], vec![mi!(&["U2"], &["X2"], &["U1", "Z", "T"])]),
            b("R1+R2", vec![R1, R2], vec![mi!(&["U1", "U2"], &["X1", "X2"])]),
            b(
                "R1+R01",
                vec![R1, R01],
                vec![mi!(&["U1"], &["X1", "X2", "Y"]), mi!(neg &["U1"], &["U2"], ZT)],
            ),
            b(
                "R2+R02",
                vec![R2, R02],
                vec![mi!(&["U2"], &["X1", "X2", "Y"]), mi!(neg &["U1"], &["U2"], ZT)],
            ),
            b(
                "R1+R2+R01",
                vec![R1, R2, R01],
                vec![mi!(&["U1"], &["X1", "X2", "Y"]), mi!(&["U2"], &["X2"], &["U1", "Z", "T"])],
            ),
            b(
                "R1+R2+R02",
                vec![R1, R2, R02],
                vec![mi!(&["U2"], &["X1", "X2", "Y"]), mi!(&["U1"], &["X1"], &["U2", "Z", "T"])],
            ),
            b("R1+R2+R01+R02", vec![R1, R2, R01, R02], vec![mi!(&["U1", "U2"], &["X1", "X2", "Y"])]),
        ],
        TheoremId::Thm2 => vec![
            BoundSpec {
                label: "R1",
                rates: vec![R1],
                terms: vec![mi!(&["U1"], &["X1"])],
                alt: Some(vec![mi!(&["U1"], &["X1"], &["U2", "X2", "Z", "T"])]),
            },
            BoundSpec {
                label: "R2",
                rates: vec![R2],
                terms: vec![mi!(&["U2"], &["X2"])],
                alt: Some(vec![mi!(&["U2"], &["X2"], &["U1", "X1", "Z", "T"])]),
            },
            b("R1+R2", vec![R1, R2], vec![mi!(&["U1", "U2"], &["X1", "X2"])]),
            b("R1+R01", vec![R1, R01], vec![mi!(&["U1"], &["X1", "X2", "Y"])]),
            b("R2+R02", vec![R2, R02], vec![mi!(&["U2"], &["X1", "X2", "Y"])]),
            b("R1+R2+R01+R02", vec![R1, R2, R01, R02], vec![mi!(&["U1", "U2"], &["X1", "X2", "Y"])]),
        ],
        TheoremId::Thm3 => vec![
            b("R1", vec![R1], vec![mi!(&["U1"], &["X1"])]),
            b("R2", vec![R2], vec![mi!(&["U2"], &["X2"])]),
            b("R1+R01", vec![R1, R01], vec![mi!(&["U1"], &["X1", "Y"], &["X2", "Z", "T"])]),
            b("R2+R02", vec![R2, R02], vec![mi!(&["U2"], &["X2", "Y"], &["X1", "Z", "T"])]),
            b("R1+R2+R01+R02", vec![R1, R2, R01, R02], vec![mi!(&["U1", "U2"], &["X1", "X2", "Y"])]),
        ],
        TheoremId::Thm4 => vec![
            // H(U0|X0,T) written as I(U0; U0 | X0, T)
            b("R00", vec![R00], vec![mi!(&["U0"], &["U0"], &["X0", "T"])]),
            b("R1", vec![R1], vec![mi!(&["U1"], &["X1", "U0"], &["U2", "Z", "T"])]),
            b("R2", vec![R2], vec![mi!(&["U2"], &["X2", "U0"], &["U1", "Z", "T"])]),
            b("R1+R2", vec![R1, R2], vec![mi!(&["U1", "U2"], &["X1", "X2", "U0"])]),
            b(
                "R1+R01",
                vec![R1, R01],
                vec![mi!(&["U1"], &["X1", "X2", "U0", "Y"]), mi!(neg &["U1"], &["U2"], ZT)],
            ),
            b(
                "R2+R02",
                vec![R2, R02],
                vec![mi!(&["U2"], &["X1", "X2", "U0", "Y"]), mi!(neg &["U1"], &["U2"], ZT)],
            ),
            b(
                "R1+R2+R01",
                vec![R1, R2, R01],
                vec![
                    mi!(&["U1"], &["X1", "X2", "U0", "Y"]),
                    mi!(&["U2"], &["X2", "U0"], &["U1", "Z", "T"]),
                ],
            ),
            b(
                "R1+R2+R02",
                vec![R1, R2, R02],
                vec![
                    mi!(&["U2"], &["X1", "X2", "U0", "Y"]),
                    mi!(&["U1"], &["X1", "U0"], &["U2", "Z", "T"]),
                ],
            ),
            b(
                "R1+R2+R01+R02",
                vec![R1, R2, R01, R02],
                vec![mi!(&["U1", "U2"], &["X1", "X2", "U0", "Y"])],
            ),
        ],
        TheoremId::Thm5 => vec![
            BoundSpec {
                label: "R1",
                rates: vec![R1],
                terms: vec![mi!(&["U1"], &["X1"], &["U0", "Z", "T"])],
                alt: Some(vec![mi!(&["U1"], &["X1"], &["U0", "U2", "X2", "Z", "T"])]),
            },
            BoundSpec {
                label: "R2",
                rates: vec![R2],
                terms: vec![mi!(&["U2"], &["X2"], &["U0", "Z", "T"])],
                alt: Some(vec![mi!(&["U2"], &["X2"], &["U0", "U1", "X1", "Z", "T"])]),
            },
            b("R1+R2", vec![R1, R2], vec![mi!(&["U1", "U2"], &["X1", "X2"], &["U0", "Z", "T"])]),
            b("R1+R01", vec![R1, R01], vec![mi!(&["U1"], &["X1", "X2", "Y"])]),
            b("R2+R02", vec![R2, R02], vec![mi!(&["U2"], &["X1", "X2", "Y"])]),
            b("R00+R1+R01", vec![R00, R1, R01], vec![mi!(&["U0", "U1"], &["X1", "X2", "Y"])]),
            b("R00+R2+R02", vec![R00, R2, R02], vec![mi!(&["U0", "U2"], &["X1", "X2", "Y"])]),
            b(
                "R1+R2+R01+R02",
                vec![R1, R2, R01, R02],
                vec![mi!(&["U1", "U2"], &["X1", "X2", "Y"])],
            ),
            b(
                "R00+R1+R2+R01+R02",
                vec![R00, R1, R2, R01, R02],
                vec![mi!(&["U0", "U1", "U2"], &["X1", "X2", "Y"])],
            ),
        ],
        TheoremId::Thm6 => vec![
            b("R1", vec![R1], vec![mi!(&["U0", "U1"], &["X1"])]),
            b("R2", vec![R2], vec![mi!(&["U0", "U2"], &["X2"])]),
            b("R1+R2", vec![R1, R2], vec![mi!(&["U0", "U1", "U2"], &["X1", "X2"])]),
            b("R1+R01", vec![R1, R01], vec![mi!(&["U1"], &["X1", "Y"], &["X2", "Z", "T"])]),
            b("R2+R02", vec![R2, R02], vec![mi!(&["U2"], &["X2", "Y"], &["X1", "Z", "T"])]),
            b(
                "R00+R1+R01",
                vec![R00, R1, R01],
                vec![mi!(&["U0", "U1"], &["X1", "Y"], &["X2", "Z", "T"])],
            ),
            b(
                "R00+R2+R02",
                vec![R00, R2, R02],
                vec![mi!(&["U0", "U2"], &["X2", "Y"], &["X1", "Z", "T"])],
            ),
            b(
                "R1+R2+R01+R02",
                vec![R1, R2, R01, R02],
                vec![mi!(&["U1", "U2"], &["X1", "X2", "Y"])],
            ),
            b(
                "R00+R1+R2+R01+R02",
                vec![R00, R1, R2, R01, R02],
                vec![mi!(&["U0", "U1", "U2"], &["X1", "X2", "Y"])],
            ),
        ],
    }
}

fn mi_value(joint: &JointPmf, term: &MiTerm) -> Result<f64, RegionError> {
    // H(A|C) - H(A|BC) written through entropies handles the A = B case
    // used for plain conditional entropies
    if term.a == term.b {
        return Ok(term.sign * joint.entropy(term.a, term.c)?);
    }
    Ok(term.sign * joint.mutual_info(term.a, term.b, term.c)?)
}

fn structure_check(theorem: TheoremId, q: &JointPmf, dec: &AuxDecomposition) -> Result<(), RegionError> {
    match theorem {
        TheoremId::Thm1 | TheoremId::Thm3 => {
            require(
                matches!(dec.u0, U0Stage::Absent),
                "this family has no encoder shared-randomness auxiliary",
            )?;
            require(dec.is_separate(), "this family requires separate encoder kernels")?;
        }
        TheoremId::Thm2 => {
            require(
                matches!(dec.u0, U0Stage::Absent),
                "this family has no encoder shared-randomness auxiliary",
            )?;
        }
        TheoremId::Thm4 => {
            require(dec.is_separate(), "this family requires separate encoder kernels")?;
        }
        TheoremId::Thm5 => {
            if let U0Stage::FromCommonPart(_) = dec.u0 {
                let x0 = common_part_of(q)?;
                require(
                    x0.count == 1,
                    "U0 must be conditioned on the time sharing variable only",
                )?;
            }
        }
        TheoremId::Thm6 => {
            if let U0Stage::FromCommonPart(_) = dec.u0 {
                let x0 = common_part_of(q)?;
                require(
                    x0.count == 1,
                    "U0 must be conditioned on the time sharing variable only",
                )?;
            }
            require(dec.is_separate(), "this family requires separate encoder kernels")?;
        }
    }
    if matches!(theorem, TheoremId::Thm3 | TheoremId::Thm6) {
        let mi = q.mutual_info(&["X1"], &["X2"], &["Z"])?;
        if mi > 1e-9 {
            return Err(RegionError::NotConditionallyIndependent(mi));
        }
    }
    Ok(())
}

/// Evaluates one bound family at a decomposition against a target
/// distribution over (X1, X2, Z, Y). Correctness and Markov residuals are
/// reported, not enforced.
pub fn evaluate(
    theorem: TheoremId,
    q: &JointPmf,
    dec: &AuxDecomposition,
    cap: usize,
) -> Result<RegionEval, RegionError> {
    structure_check(theorem, q, dec)?;
    let full = compose_full(q, dec, cap)?;
    let (correctness_error, per_t_error) = correctness_errors(&full, q)?;

    let with_u0 = !matches!(dec.u0, U0Stage::Absent);
    let markov_errors = if with_u0 {
        vec![
            (
                "I(U1;X2,Z|X1,U0,T)".to_string(),
                full.mutual_info(&["U1"], &["X2", "Z"], &["X1", "U0", "T"])?,
            ),
            (
                "I(U2;X1,Z|X2,U0,T)".to_string(),
                full.mutual_info(&["U2"], &["X1", "Z"], &["X2", "U0", "T"])?,
            ),
            (
                "I(Y;X1,X2,U0|U1,U2,Z,T)".to_string(),
                full.mutual_info(&["Y"], &["X1", "X2", "U0"], &["U1", "U2", "Z", "T"])?,
            ),
        ]
    } else {
        vec![
            (
                "I(U1;X2,Z|X1,T)".to_string(),
                full.mutual_info(&["U1"], &["X2", "Z"], &["X1", "T"])?,
            ),
            (
                "I(U2;X1,Z|X2,T)".to_string(),
                full.mutual_info(&["U2"], &["X1", "Z"], &["X2", "T"])?,
            ),
            (
                "I(Y;X1,X2|U1,U2,Z,T)".to_string(),
                full.mutual_info(&["Y"], &["X1", "X2"], &["U1", "U2", "Z", "T"])?,
            ),
        ]
    };

    let mut bounds = Vec::new();
    for spec in bound_specs(theorem) {
        let mut rhs: f64 = spec.terms.iter().map(|t| mi_value(&full, t)).sum::<Result<f64, _>>()?;
        if let Some(alt) = &spec.alt {
            let alt_rhs: f64 = alt.iter().map(|t| mi_value(&full, t)).sum::<Result<f64, _>>()?;
            rhs = rhs.max(alt_rhs);
        }
        bounds.push(BoundEval { label: spec.label.to_string(), rates: spec.rates.clone(), rhs });
    }
    Ok(RegionEval { theorem, bounds, correctness_error, per_t_error, markov_errors })
}

#[cfg(test)]
mod tests;
