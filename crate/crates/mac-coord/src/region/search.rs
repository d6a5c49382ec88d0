//! Multi-start search for rate-region certificates.
//!
//! A restart draws random kernels, then runs exponentiated-gradient descent
//! on the simplex rows against a penalty objective: correctness total
//! variation plus structural Markov residuals (escalating weight, x10 every
//! 200 iterations) plus hinge losses of violated bounds. Promising restarts
//! get a multiplicative fitting polish that rescales kernel rows toward
//! exact correctness. Certificates are re-checked with the plain evaluator
//! before being returned.
//!
//! Restarts are independent; each derives its generator from
//! `mix(seed, index)` and the best-of reduction is by (outcome, index), so
//! results do not depend on scheduling.

use rayon::prelude::*;

use super::*;
use crate::prob::DEFAULT_MEMORY_CAP;

/// Search effort and tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub sizes: AuxSizes,
    pub restarts: usize,
    /// Iteration cap per restart.
    pub iters: usize,
    pub seed: u64,
    /// Certificates require max-over-t correctness TV and Markov residuals
    /// at or below this.
    pub correctness_tol: f64,
    /// Certificates may clear every bound by at most this slack.
    pub bound_tol: f64,
}

impl SearchBudget {
    pub fn new(sizes: AuxSizes, restarts: usize, seed: u64) -> Self {
        Self { sizes, restarts, iters: 600, seed, correctness_tol: 1e-6, bound_tol: 1e-6 }
    }

    fn validate(&self) -> Result<(), RegionError> {
        if self.restarts == 0 || self.iters == 0 {
            return Err(RegionError::InvalidBudget("restarts and iters must be positive".into()));
        }
        if self.sizes.u1 == 0 || self.sizes.u2 == 0 || self.sizes.u0 == 0 || self.sizes.t == 0 {
            return Err(RegionError::InvalidBudget("auxiliary sizes must be positive".into()));
        }
        if self.correctness_tol <= 0.0 || self.bound_tol <= 0.0 {
            return Err(RegionError::InvalidBudget("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a membership search. `NotFound` is not a proof of
/// non-membership; it carries the smallest violation seen.
#[derive(Debug, Clone)]
pub enum MembershipOutcome {
    Certificate { dec: AuxDecomposition, eval: RegionEval, restart: usize },
    NotFound { best_violation: f64, restarts_run: usize },
}

impl MembershipOutcome {
    pub fn certificate(&self) -> Option<(&AuxDecomposition, &RegionEval)> {
        match self {
            MembershipOutcome::Certificate { dec, eval, .. } => Some((dec, eval)),
            MembershipOutcome::NotFound { .. } => None,
        }
    }
}

/// One traced boundary point for a weight vector.
#[derive(Debug, Clone)]
pub struct TracePoint {
    pub weights: Vec<f64>,
    /// Minimizing rate point over the region of the best decomposition;
    /// entries for zero-weight rates are +inf.
    pub point: Vec<f64>,
    pub objective: f64,
    pub dec: AuxDecomposition,
    pub eval: RegionEval,
}

pub(crate) fn mix_seed(master: u64, index: u64) -> u64 {
    // splitmix64 round
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Factored model: fast objective and gradient
// ---------------------------------------------------------------------------

const SLOT_X1: usize = 0;
const SLOT_X2: usize = 1;
const SLOT_Z: usize = 2;
const SLOT_T: usize = 3;
const SLOT_U0: usize = 4;
const SLOT_U1: usize = 5;
const SLOT_U2: usize = 6;
const SLOT_Y: usize = 7;
const SLOT_X0: usize = 8;

fn slot_of(name: &str) -> usize {
    match name {
        "X1" => SLOT_X1,
        "X2" => SLOT_X2,
        "Z" => SLOT_Z,
        "T" => SLOT_T,
        "U0" => SLOT_U0,
        "U1" => SLOT_U1,
        "U2" => SLOT_U2,
        "Y" => SLOT_Y,
        "X0" => SLOT_X0,
        other => panic!("unknown variable {other}"),
    }
}

#[derive(Debug, Clone)]
struct MaskPlan {
    /// (slot, stride) pairs for the non-Y part of the folded index; when
    /// `has_y`, y is the fastest digit.
    dims: Vec<(usize, usize)>,
    has_y: bool,
    len: usize,
}

#[derive(Debug, Clone)]
struct HingePlan {
    target: f64,
    /// rhs = sum of sign * H(mask)
    terms: Vec<(f64, usize)>,
    alt: Option<Vec<(f64, usize)>>,
}

struct Plan {
    theorem: TheoremId,
    masks: Vec<MaskPlan>,
    hinges: Vec<HingePlan>,
    markov: Vec<Vec<(f64, usize)>>,
    joint_u: bool,
    u0_from_x0: bool,
    has_u0: bool,
}

struct Dims {
    sx1: usize,
    sx2: usize,
    sz: usize,
    st: usize,
    su0: usize,
    su1: usize,
    su2: usize,
    sy: usize,
    sx0: usize,
    x0_of_x1: Vec<usize>,
}

impl Dims {
    fn size_of_slot(&self, slot: usize) -> usize {
        match slot {
            SLOT_X1 => self.sx1,
            SLOT_X2 => self.sx2,
            SLOT_Z => self.sz,
            SLOT_T => self.st,
            SLOT_U0 => self.su0,
            SLOT_U1 => self.su1,
            SLOT_U2 => self.su2,
            SLOT_Y => self.sy,
            SLOT_X0 => self.sx0,
            _ => unreachable!(),
        }
    }

    fn w_len(&self) -> usize {
        self.sx1 * self.sx2 * self.sz * self.st * self.su0 * self.su1 * self.su2
    }
}

struct PlanBuilder<'a> {
    dims: &'a Dims,
    masks: Vec<MaskPlan>,
    keys: Vec<Vec<usize>>,
}

impl<'a> PlanBuilder<'a> {
    fn new(dims: &'a Dims) -> Self {
        Self { dims, masks: Vec::new(), keys: Vec::new() }
    }

    fn mask(&mut self, names: &[&[&str]]) -> usize {
        let mut slots: Vec<usize> =
            names.iter().flat_map(|g| g.iter()).map(|n| slot_of(n)).collect();
        slots.sort_unstable();
        slots.dedup();
        if let Some(i) = self.keys.iter().position(|k| *k == slots) {
            return i;
        }
        let has_y = slots.contains(&SLOT_Y);
        let non_y: Vec<usize> = slots.iter().copied().filter(|s| *s != SLOT_Y).collect();
        let mut dims_out = Vec::new();
        let mut stride = if has_y { self.dims.sy } else { 1 };
        for slot in non_y.iter().rev() {
            dims_out.push((*slot, stride));
            stride *= self.dims.size_of_slot(*slot);
        }
        dims_out.reverse();
        let len = stride;
        self.keys.push(slots);
        self.masks.push(MaskPlan { dims: dims_out, has_y, len });
        self.masks.len() - 1
    }

    /// Expands sign * I(a;b|c), or sign * H(a|c) when a == b, into entropy
    /// terms.
    fn mi_terms(&mut self, term: &MiTerm, out: &mut Vec<(f64, usize)>) {
        if term.a == term.b {
            out.push((term.sign, self.mask(&[term.a, term.c])));
            if !term.c.is_empty() {
                out.push((-term.sign, self.mask(&[term.c])));
            }
            return;
        }
        out.push((term.sign, self.mask(&[term.a, term.c])));
        out.push((term.sign, self.mask(&[term.b, term.c])));
        out.push((-term.sign, self.mask(&[term.a, term.b, term.c])));
        if !term.c.is_empty() {
            out.push((-term.sign, self.mask(&[term.c])));
        }
    }
}

fn build_plan(
    theorem: TheoremId,
    dims: &Dims,
    point: Option<&RatePoint>,
) -> Result<Plan, RegionError> {
    let joint_u = matches!(theorem, TheoremId::Thm2 | TheoremId::Thm5);
    let has_u0 = theorem.has_r00();
    let u0_from_x0 = matches!(theorem, TheoremId::Thm4);
    let mut b = PlanBuilder::new(dims);
    let mut hinges = Vec::new();
    for spec in bound_specs(theorem) {
        let target = match point {
            Some(p) => {
                let mut sum = 0.0;
                let mut skip = false;
                for r in &spec.rates {
                    match p.get(*r) {
                        Some(v) if v.is_infinite() => skip = true,
                        Some(v) => sum += v,
                        None => {
                            return Err(RegionError::InvalidPoint(format!(
                                "{} required",
                                r.name()
                            )))
                        }
                    }
                }
                if skip {
                    continue;
                }
                sum
            }
            None => f64::INFINITY,
        };
        let mut terms = Vec::new();
        for t in &spec.terms {
            b.mi_terms(t, &mut terms);
        }
        let alt = spec.alt.as_ref().map(|alts| {
            let mut v = Vec::new();
            for t in alts {
                b.mi_terms(t, &mut v);
            }
            v
        });
        hinges.push(HingePlan { target, terms, alt });
    }
    let mut markov = Vec::new();
    if joint_u {
        let base1: &[&str] = if has_u0 { &["X1", "U0", "T"] } else { &["X1", "T"] };
        let base2: &[&str] = if has_u0 { &["X2", "U0", "T"] } else { &["X2", "T"] };
        let mut v1 = Vec::new();
        b.mi_terms(&MiTerm { sign: 1.0, a: &["U1"], b: &["X2", "Z"], c: base1 }, &mut v1);
        markov.push(v1);
        let mut v2 = Vec::new();
        b.mi_terms(&MiTerm { sign: 1.0, a: &["U2"], b: &["X1", "Z"], c: base2 }, &mut v2);
        markov.push(v2);
    }
    Ok(Plan { theorem, masks: b.masks, hinges, markov, joint_u, u0_from_x0, has_u0 })
}

/// Simplex-parameterized kernels of one restart.
#[derive(Debug, Clone)]
struct Params {
    t: Vec<f64>,
    u0: Vec<Vec<f64>>,
    k1: Vec<Vec<f64>>,
    k2: Vec<Vec<f64>>,
    k12: Vec<Vec<f64>>,
    ky: Vec<Vec<f64>>,
}

struct Scratch {
    w: Vec<f64>,
    marg: Vec<Vec<f64>>,
    glog: Vec<Vec<f64>>,
    coef: Vec<f64>,
    /// m(x1,x2,z,t,y)
    m: Vec<f64>,
    grad: Params,
}

struct Model<'a> {
    dims: Dims,
    plan: &'a Plan,
    q3: Vec<f64>,
    /// q(x1,x2,z,y), row-major
    q_target: Vec<f64>,
}

struct Forward {
    #[allow(dead_code)]
    tv_per_t: Vec<f64>,
    max_tv: f64,
    sum_tv: f64,
    hinge_violation: f64,
    hinge_sum: f64,
    markov_value: f64,
    entropies: Vec<f64>,
}

impl Forward {
    fn objective(&self, lambda: f64) -> f64 {
        lambda * (self.sum_tv + self.markov_value) + self.hinge_sum
    }
}

impl<'a> Model<'a> {
    fn new(q: &JointPmf, plan: &'a Plan, sizes: &AuxSizes) -> Result<Self, RegionError> {
        let dims = probe_dims(q, sizes, plan.has_u0)?;
        let q3 = q.marginal(&["X1", "X2", "Z"])?.probs().to_vec();
        let q_target = q.reorder(&["X1", "X2", "Z", "Y"])?.probs().to_vec();
        Ok(Self { dims, plan, q3, q_target })
    }

    fn fresh_scratch(&self) -> Scratch {
        let d = &self.dims;
        Scratch {
            w: vec![0.0; d.w_len()],
            marg: self.plan.masks.iter().map(|m| vec![0.0; m.len]).collect(),
            glog: self.plan.masks.iter().map(|m| vec![0.0; m.len]).collect(),
            coef: vec![0.0; self.plan.masks.len()],
            m: vec![0.0; d.sx1 * d.sx2 * d.sz * d.st * d.sy],
            grad: self.zero_params(),
        }
    }

    fn zero_params(&self) -> Params {
        let d = &self.dims;
        let rows = |n: usize, w: usize| vec![vec![0.0; w]; n];
        Params {
            t: vec![0.0; d.st],
            u0: if self.plan.has_u0 {
                rows(if self.plan.u0_from_x0 { d.sx0 * d.st } else { d.st }, d.su0)
            } else {
                Vec::new()
            },
            k1: if self.plan.joint_u { Vec::new() } else { rows(d.sx1 * d.su0 * d.st, d.su1) },
            k2: if self.plan.joint_u { Vec::new() } else { rows(d.sx2 * d.su0 * d.st, d.su2) },
            k12: if self.plan.joint_u {
                rows(d.sx1 * d.sx2 * d.su0 * d.st, d.su1 * d.su2)
            } else {
                Vec::new()
            },
            ky: rows(d.su1 * d.su2 * d.sz * d.st, d.sy),
        }
    }

    fn random_params(&self, rng: &mut rand_chacha::ChaCha8Rng, sharpness: f64) -> Params {
        use rand::Rng;
        let mut p = self.zero_params();
        let fill = |rows: &mut Vec<Vec<f64>>, rng: &mut rand_chacha::ChaCha8Rng| {
            for row in rows.iter_mut() {
                let mut s = 0.0;
                for v in row.iter_mut() {
                    let e = -(rng.gen::<f64>().max(1e-12)).ln();
                    *v = e.powf(sharpness);
                    s += *v;
                }
                for v in row.iter_mut() {
                    *v /= s;
                }
            }
        };
        fill(&mut p.u0, rng);
        fill(&mut p.k1, rng);
        fill(&mut p.k2, rng);
        fill(&mut p.k12, rng);
        fill(&mut p.ky, rng);
        let mut s = 0.0;
        for v in p.t.iter_mut() {
            *v = 1.0 + 0.1 * rng.gen::<f64>();
            s += *v;
        }
        for v in p.t.iter_mut() {
            *v /= s;
        }
        p
    }

    /// Forward sweep: fills W, folded marginals, the output marginal m,
    /// then computes entropies, hinge and Markov values, per-t correctness.
    fn forward(&self, params: &Params, s: &mut Scratch) -> Forward {
        let d = &self.dims;
        let plan = self.plan;
        for buf in s.marg.iter_mut() {
            buf.iter_mut().for_each(|v| *v = 0.0);
        }
        s.m.iter_mut().for_each(|v| *v = 0.0);

        let mut digits = [0usize; 9];
        let mut wi = 0usize;
        for x1 in 0..d.sx1 {
            digits[SLOT_X1] = x1;
            digits[SLOT_X0] = d.x0_of_x1[x1];
            for x2 in 0..d.sx2 {
                digits[SLOT_X2] = x2;
                for z in 0..d.sz {
                    digits[SLOT_Z] = z;
                    let q3 = self.q3[(x1 * d.sx2 + x2) * d.sz + z];
                    for t in 0..d.st {
                        digits[SLOT_T] = t;
                        let pt = params.t[t];
                        for u0 in 0..d.su0 {
                            digits[SLOT_U0] = u0;
                            let p0 = if plan.has_u0 {
                                let row =
                                    if plan.u0_from_x0 { digits[SLOT_X0] * d.st + t } else { t };
                                params.u0[row][u0]
                            } else {
                                1.0
                            };
                            for u1 in 0..d.su1 {
                                digits[SLOT_U1] = u1;
                                let p1 = if plan.joint_u {
                                    1.0
                                } else {
                                    params.k1[(x1 * d.su0 + u0) * d.st + t][u1]
                                };
                                for u2 in 0..d.su2 {
                                    digits[SLOT_U2] = u2;
                                    let p2 = if plan.joint_u {
                                        params.k12[((x1 * d.sx2 + x2) * d.su0 + u0) * d.st + t]
                                            [u1 * d.su2 + u2]
                                    } else {
                                        params.k2[(x2 * d.su0 + u0) * d.st + t][u2]
                                    };
                                    let w = q3 * pt * p0 * p1 * p2;
                                    s.w[wi] = w;
                                    wi += 1;
                                    if w <= 0.0 {
                                        continue;
                                    }
                                    let yrow = ((u1 * d.su2 + u2) * d.sz + z) * d.st + t;
                                    let m_base =
                                        (((x1 * d.sx2 + x2) * d.sz + z) * d.st + t) * d.sy;
                                    for (mi, mask) in plan.masks.iter().enumerate() {
                                        let mut idx = 0usize;
                                        for (slot, stride) in &mask.dims {
                                            idx += digits[*slot] * stride;
                                        }
                                        if mask.has_y {
                                            let row = &params.ky[yrow];
                                            let buf = &mut s.marg[mi];
                                            for (y, ky) in row.iter().enumerate() {
                                                buf[idx + y] += w * ky;
                                            }
                                        } else {
                                            s.marg[mi][idx] += w;
                                        }
                                    }
                                    let row = &params.ky[yrow];
                                    for (y, ky) in row.iter().enumerate() {
                                        s.m[m_base + y] += w * ky;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        let ln2 = std::f64::consts::LN_2;
        let mut entropies = vec![0.0; plan.masks.len()];
        for (mi, buf) in s.marg.iter().enumerate() {
            let mut h = 0.0;
            for &p in buf.iter() {
                if p > 0.0 {
                    h -= p * p.ln();
                }
            }
            entropies[mi] = h / ln2;
        }

        let mut tv_per_t = vec![0.0; d.st];
        for t in 0..d.st {
            let pt = params.t[t];
            if pt <= 1e-300 {
                continue;
            }
            let mut tv = 0.0;
            for x in 0..d.sx1 * d.sx2 * d.sz {
                for y in 0..d.sy {
                    let m = s.m[(x * d.st + t) * d.sy + y] / pt;
                    tv += (m - self.q_target[x * d.sy + y]).abs();
                }
            }
            tv_per_t[t] = 0.5 * tv;
        }
        let max_tv = tv_per_t.iter().copied().fold(0.0, f64::max);
        let sum_tv: f64 = tv_per_t.iter().sum();

        let eval_terms = |terms: &[(f64, usize)]| -> f64 {
            terms.iter().map(|(sg, mi)| sg * entropies[*mi]).sum()
        };
        let mut hinge_violation: f64 = 0.0;
        let mut hinge_sum = 0.0;
        for h in &plan.hinges {
            if h.target.is_infinite() {
                continue;
            }
            let mut rhs = eval_terms(&h.terms);
            if let Some(alt) = &h.alt {
                rhs = rhs.max(eval_terms(alt));
            }
            let viol = rhs - h.target;
            hinge_violation = hinge_violation.max(viol);
            if viol > 0.0 {
                hinge_sum += viol;
            }
        }
        let markov_value: f64 = plan
            .markov
            .iter()
            .map(|m| eval_terms(m).max(0.0))
            .sum();

        Forward { tv_per_t, max_tv, sum_tv, hinge_violation, hinge_sum, markov_value, entropies }
    }

    /// Loads mask coefficients for the membership objective: violated
    /// hinges at weight 1 (through the larger branch of a max), Markov
    /// residuals at weight lambda.
    fn load_membership_coefs(&self, s: &mut Scratch, fwd: &Forward, lambda: f64) {
        s.coef.iter_mut().for_each(|c| *c = 0.0);
        let val = |terms: &[(f64, usize)]| -> f64 {
            terms.iter().map(|(sg, mi)| sg * fwd.entropies[*mi]).sum()
        };
        for h in &self.plan.hinges {
            if h.target.is_infinite() {
                continue;
            }
            let main = val(&h.terms);
            let (rhs, branch) = match &h.alt {
                Some(alt) => {
                    let a = val(alt);
                    if a > main {
                        (a, alt.as_slice())
                    } else {
                        (main, h.terms.as_slice())
                    }
                }
                None => (main, h.terms.as_slice()),
            };
            if rhs > h.target {
                for (sg, mi) in branch {
                    s.coef[*mi] += sg;
                }
            }
        }
        for m in &self.plan.markov {
            for (sg, mi) in m {
                s.coef[*mi] += lambda * sg;
            }
        }
    }

    /// Loads mask coefficients with external per-bound weights (LP duals)
    /// plus lambda-weighted Markov residuals, used by boundary tracing.
    fn load_weighted_coefs(&self, s: &mut Scratch, fwd: &Forward, lambda: f64, weights: &[f64]) {
        s.coef.iter_mut().for_each(|c| *c = 0.0);
        let val = |terms: &[(f64, usize)]| -> f64 {
            terms.iter().map(|(sg, mi)| sg * fwd.entropies[*mi]).sum()
        };
        for (h, w) in self.plan.hinges.iter().zip(weights) {
            if *w == 0.0 {
                continue;
            }
            let branch = match &h.alt {
                Some(alt) if val(alt) > val(&h.terms) => alt.as_slice(),
                _ => h.terms.as_slice(),
            };
            for (sg, mi) in branch {
                s.coef[*mi] += w * sg;
            }
        }
        for m in &self.plan.markov {
            for (sg, mi) in m {
                s.coef[*mi] += lambda * sg;
            }
        }
    }

    /// Gradient sweep over the factored joint: entropy terms weighted by
    /// `s.coef` plus the correctness penalty at weight lambda. Fills
    /// `s.grad`. Requires a preceding `forward` with the same params.
    fn gradient_sweep(&self, params: &Params, s: &mut Scratch, lambda: f64) {
        let d = &self.dims;
        let plan = self.plan;
        let ln2 = std::f64::consts::LN_2;

        let mut active_noy: Vec<usize> = Vec::new();
        let mut active_y: Vec<usize> = Vec::new();
        for (mi, c) in s.coef.iter().enumerate() {
            if *c != 0.0 {
                if plan.masks[mi].has_y {
                    active_y.push(mi);
                } else {
                    active_noy.push(mi);
                }
                let (marg, glog) = (&s.marg[mi], &mut s.glog[mi]);
                for (g, &p) in glog.iter_mut().zip(marg.iter()) {
                    let lp = if p > 1e-290 { p.log2() } else { -964.0 };
                    *g = -(lp + 1.0 / ln2);
                }
            }
        }

        let g = &mut s.grad;
        g.t.iter_mut().for_each(|v| *v = 0.0);
        for rows in [&mut g.u0, &mut g.k1, &mut g.k2, &mut g.k12, &mut g.ky] {
            for row in rows.iter_mut() {
                row.iter_mut().for_each(|v| *v = 0.0);
            }
        }

        let mut digits = [0usize; 9];
        let mut wi = 0usize;
        for x1 in 0..d.sx1 {
            digits[SLOT_X1] = x1;
            digits[SLOT_X0] = d.x0_of_x1[x1];
            for x2 in 0..d.sx2 {
                digits[SLOT_X2] = x2;
                for z in 0..d.sz {
                    digits[SLOT_Z] = z;
                    let q3 = self.q3[(x1 * d.sx2 + x2) * d.sz + z];
                    if q3 == 0.0 {
                        wi += d.st * d.su0 * d.su1 * d.su2;
                        continue;
                    }
                    for t in 0..d.st {
                        digits[SLOT_T] = t;
                        let pt = params.t[t];
                        let inv_pt = if pt > 1e-300 { 1.0 / pt } else { 0.0 };
                        for u0 in 0..d.su0 {
                            digits[SLOT_U0] = u0;
                            let u0row =
                                if plan.u0_from_x0 { digits[SLOT_X0] * d.st + t } else { t };
                            let p0 = if plan.has_u0 { params.u0[u0row][u0] } else { 1.0 };
                            for u1 in 0..d.su1 {
                                digits[SLOT_U1] = u1;
                                let k1row = (x1 * d.su0 + u0) * d.st + t;
                                let p1 = if plan.joint_u { 1.0 } else { params.k1[k1row][u1] };
                                for u2 in 0..d.su2 {
                                    digits[SLOT_U2] = u2;
                                    let w = s.w[wi];
                                    wi += 1;
                                    let k2row = (x2 * d.su0 + u0) * d.st + t;
                                    let k12row = ((x1 * d.sx2 + x2) * d.su0 + u0) * d.st + t;
                                    let p2 = if plan.joint_u {
                                        params.k12[k12row][u1 * d.su2 + u2]
                                    } else {
                                        params.k2[k2row][u2]
                                    };

                                    let mut ge = 0.0;
                                    for &mi in &active_noy {
                                        let mask = &plan.masks[mi];
                                        let mut idx = 0usize;
                                        for (slot, stride) in &mask.dims {
                                            idx += digits[*slot] * stride;
                                        }
                                        ge += s.coef[mi] * s.glog[mi][idx];
                                    }

                                    let yrow = ((u1 * d.su2 + u2) * d.sz + z) * d.st + t;
                                    let m_base =
                                        (((x1 * d.sx2 + x2) * d.sz + z) * d.st + t) * d.sy;
                                    let x_base = ((x1 * d.sx2 + x2) * d.sz + z) * d.sy;
                                    let kyr = &params.ky[yrow];
                                    let gky = &mut g.ky[yrow];
                                    let mut gy_dot = 0.0;
                                    let mut corr_dot = 0.0;
                                    for y in 0..d.sy {
                                        digits[SLOT_Y] = y;
                                        let mut bracket = 0.0;
                                        for &mi in &active_y {
                                            let mask = &plan.masks[mi];
                                            let mut idx = 0usize;
                                            for (slot, stride) in &mask.dims {
                                                idx += digits[*slot] * stride;
                                            }
                                            bracket += s.coef[mi] * s.glog[mi][idx + y];
                                        }
                                        let diff = s.m[m_base + y] * inv_pt
                                            - self.q_target[x_base + y];
                                        let corr = lambda * 0.5 * diff.signum() * inv_pt;
                                        bracket += corr;
                                        corr_dot += kyr[y] * corr;
                                        gy_dot += kyr[y] * bracket;
                                        gky[y] += w * bracket;
                                    }
                                    let ge_total = ge + gy_dot;

                                    // leave-one-out products of
                                    // W = q3 * pt * p0 * p1 * p2
                                    if d.st > 1 {
                                        // correctness cancels in the per-t
                                        // conditional, so t sees only the
                                        // entropy part
                                        let loo_t = q3 * p0 * p1 * p2;
                                        g.t[t] += (ge_total - corr_dot) * loo_t;
                                    }
                                    if plan.has_u0 {
                                        g.u0[u0row][u0] += ge_total * (q3 * pt * p1 * p2);
                                    }
                                    if plan.joint_u {
                                        g.k12[k12row][u1 * d.su2 + u2] +=
                                            ge_total * (q3 * pt * p0);
                                    } else {
                                        g.k1[k1row][u1] += ge_total * (q3 * pt * p0 * p2);
                                        g.k2[k2row][u2] += ge_total * (q3 * pt * p0 * p1);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn eg_step(rows: &mut [Vec<f64>], grads: &[Vec<f64>], step: f64) {
    for (row, g) in rows.iter_mut().zip(grads) {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let scale = g.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        if scale <= 1e-14 {
            continue;
        }
        let eta = step / scale;
        let mut total = 0.0;
        for (p, gv) in row.iter_mut().zip(g) {
            let e = (-eta * (gv - mean)).clamp(-40.0, 40.0);
            *p = (*p).max(1e-300) * e.exp();
            total += *p;
        }
        if total > 0.0 {
            for p in row.iter_mut() {
                *p /= total;
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum PolishScope {
    All,
    /// Only rescale the output kernel; encoder kernels (and so the bounds
    /// that do not involve Y) stay fixed.
    YOnly,
}

/// Multiplicative fitting sweeps that rescale kernel rows toward exact
/// correctness: the output kernel and the encoder kernels get proportional
/// updates from the target/composed likelihood ratio.
fn correctness_polish(
    model: &Model,
    params: &mut Params,
    s: &mut Scratch,
    sweeps: usize,
    tol: f64,
    scope: PolishScope,
) {
    let d = &model.dims;
    let mut recent = f64::INFINITY;
    for sweep in 0..sweeps {
        let fwd = model.forward(params, s);
        if fwd.max_tv <= tol {
            break;
        }
        // plateaued fits exit early
        if sweep % 12 == 0 {
            if fwd.max_tv > 0.995 * recent {
                break;
            }
            recent = fwd.max_tv;
        }
        let mut num = vec![0.0; d.su1 * d.su2 * d.sz * d.st * d.sy];
        let mut den = vec![0.0; d.su1 * d.su2 * d.sz * d.st];
        let zeros = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| vec![0.0; r.len()]).collect()
        };
        let mut k1num = zeros(&params.k1);
        let mut k1den = zeros(&params.k1);
        let mut k2num = zeros(&params.k2);
        let mut k2den = zeros(&params.k2);
        let mut k12num = zeros(&params.k12);
        let mut k12den = zeros(&params.k12);

        let mut wi = 0usize;
        for x1 in 0..d.sx1 {
            for x2 in 0..d.sx2 {
                for z in 0..d.sz {
                    let x_base = ((x1 * d.sx2 + x2) * d.sz + z) * d.sy;
                    for t in 0..d.st {
                        let pt = params.t[t];
                        let inv_pt = if pt > 1e-300 { 1.0 / pt } else { 0.0 };
                        let m_base = (((x1 * d.sx2 + x2) * d.sz + z) * d.st + t) * d.sy;
                        for u0 in 0..d.su0 {
                            for u1 in 0..d.su1 {
                                for u2 in 0..d.su2 {
                                    let w = s.w[wi];
                                    wi += 1;
                                    if w <= 0.0 {
                                        continue;
                                    }
                                    let yrow = ((u1 * d.su2 + u2) * d.sz + z) * d.st + t;
                                    let kyr = &params.ky[yrow];
                                    let mut r_dot = 0.0;
                                    for y in 0..d.sy {
                                        let m = s.m[m_base + y] * inv_pt;
                                        let q = model.q_target[x_base + y];
                                        let r = if m > 1e-300 {
                                            (q / m).min(1e3)
                                        } else if q > 0.0 {
                                            1e3
                                        } else {
                                            0.0
                                        };
                                        num[yrow * d.sy + y] += w * r;
                                        r_dot += kyr[y] * r;
                                    }
                                    den[yrow] += w;
                                    if !params.k1.is_empty() {
                                        let k1row = (x1 * d.su0 + u0) * d.st + t;
                                        let k2row = (x2 * d.su0 + u0) * d.st + t;
                                        k1num[k1row][u1] += w * r_dot;
                                        k1den[k1row][u1] += w;
                                        k2num[k2row][u2] += w * r_dot;
                                        k2den[k2row][u2] += w;
                                    } else {
                                        let k12row =
                                            ((x1 * d.sx2 + x2) * d.su0 + u0) * d.st + t;
                                        k12num[k12row][u1 * d.su2 + u2] += w * r_dot;
                                        k12den[k12row][u1 * d.su2 + u2] += w;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        for (rowi, row) in params.ky.iter_mut().enumerate() {
            if den[rowi] <= 0.0 {
                continue;
            }
            let mut total = 0.0;
            for (y, p) in row.iter_mut().enumerate() {
                let factor = num[rowi * d.sy + y] / den[rowi];
                *p *= factor.max(1e-12);
                total += *p;
            }
            if total > 0.0 {
                row.iter_mut().for_each(|p| *p /= total);
            }
        }
        if scope == PolishScope::All {
            let apply = |rows: &mut Vec<Vec<f64>>, num: &[Vec<f64>], den: &[Vec<f64>]| {
                for (ri, row) in rows.iter_mut().enumerate() {
                    let mut total = 0.0;
                    for (ci, p) in row.iter_mut().enumerate() {
                        if den[ri][ci] > 0.0 {
                            *p *= (num[ri][ci] / den[ri][ci]).max(1e-12);
                        }
                        total += *p;
                    }
                    if total > 0.0 {
                        row.iter_mut().for_each(|p| *p /= total);
                    }
                }
            };
            apply(&mut params.k1, &k1num, &k1den);
            apply(&mut params.k2, &k2num, &k2den);
            apply(&mut params.k12, &k12num, &k12den);
        }
    }
}


/// Which encoder auxiliary a merge move collapses.
#[derive(Clone, Copy, PartialEq)]
enum MergeSide {
    U1,
    U2,
}

/// Attempts to merge pairs of auxiliary symbols with similar output rows,
/// refitting correctness after each merge and keeping only merges that do
/// not worsen the hinge. Shrinking the effective alphabet walks the search
/// off diffuse correct structures toward low-information ones.
fn try_symbol_merges(
    model: &Model,
    params: &mut Params,
    s: &mut Scratch,
    budget: &SearchBudget,
    side: MergeSide,
    baseline: &mut Forward,
) {
    let d = &model.dims;
    let (n, other) = match side {
        MergeSide::U1 => (d.su1, d.su2),
        MergeSide::U2 => (d.su2, d.su1),
    };
    if n < 2 {
        return;
    }
    let mut attempts = 0;
    'outer: while attempts < 8 {
        // rank candidate pairs by total variation between their output rows
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let mut dist = 0.0;
                for o in 0..other {
                    for z in 0..d.sz {
                        for t in 0..d.st {
                            let (ra, rb) = match side {
                                MergeSide::U1 => (
                                    ((a * d.su2 + o) * d.sz + z) * d.st + t,
                                    ((b * d.su2 + o) * d.sz + z) * d.st + t,
                                ),
                                MergeSide::U2 => (
                                    ((o * d.su2 + a) * d.sz + z) * d.st + t,
                                    ((o * d.su2 + b) * d.sz + z) * d.st + t,
                                ),
                            };
                            for y in 0..d.sy {
                                dist += (params.ky[ra][y] - params.ky[rb][y]).abs();
                            }
                        }
                    }
                }
                pairs.push((dist, a, b));
            }
        }
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

        for (_, a, b) in pairs.into_iter().take(4) {
            attempts += 1;
            let saved = params.clone();
            // move the b column onto a in the encoder kernel
            let rows = match side {
                MergeSide::U1 => &mut params.k1,
                MergeSide::U2 => &mut params.k2,
            };
            let mut b_mass = 0.0;
            for row in rows.iter_mut() {
                b_mass += row[b];
                row[a] += row[b];
                row[b] = 0.0;
            }
            if b_mass == 0.0 {
                continue; // b already dead
            }
            // crude merged output rows; the fitting pass refines them
            for o in 0..other {
                for z in 0..d.sz {
                    for t in 0..d.st {
                        let (ra, rb) = match side {
                            MergeSide::U1 => (
                                ((a * d.su2 + o) * d.sz + z) * d.st + t,
                                ((b * d.su2 + o) * d.sz + z) * d.st + t,
                            ),
                            MergeSide::U2 => (
                                ((o * d.su2 + a) * d.sz + z) * d.st + t,
                                ((o * d.su2 + b) * d.sz + z) * d.st + t,
                            ),
                        };
                        for y in 0..d.sy {
                            params.ky[ra][y] = 0.5 * (params.ky[ra][y] + params.ky[rb][y]);
                        }
                    }
                }
            }
            correctness_polish(
                model,
                params,
                s,
                200,
                budget.correctness_tol * 0.1,
                PolishScope::All,
            );
            let fwd = model.forward(params, s);
            if fwd.max_tv.max(fwd.markov_value) <= budget.correctness_tol.max(baseline.max_tv)
                && fwd.hinge_violation <= baseline.hinge_violation + 1e-12
            {
                *baseline = fwd;
                if baseline.hinge_violation <= 0.0 {
                    return;
                }
                continue 'outer; // re-rank pairs after a successful merge
            }
            *params = saved;
        }
        return;
    }
}

fn params_to_dec(model: &Model, params: &Params) -> AuxDecomposition {
    let d = &model.dims;
    let plan = model.plan;
    let mk = |from: Vec<(&str, usize)>, to: Vec<(&str, usize)>, rows: &[Vec<f64>]| {
        crate::prob::ConditionalKernel {
            from: from.into_iter().map(|(n, s)| VariableDecl::new(n, s)).collect(),
            to: to.into_iter().map(|(n, s)| VariableDecl::new(n, s)).collect(),
            rows: rows.iter().map(|r| Some(normalize_row(r))).collect(),
        }
    };
    let u0 = if !plan.has_u0 {
        U0Stage::Absent
    } else if plan.u0_from_x0 {
        U0Stage::FromCommonPart(mk(
            vec![("X0", d.sx0), ("T", d.st)],
            vec![("U0", d.su0)],
            &params.u0,
        ))
    } else {
        U0Stage::FromTimeSharing(mk(vec![("T", d.st)], vec![("U0", d.su0)], &params.u0))
    };
    let u = if plan.joint_u {
        let from = if plan.has_u0 {
            vec![("X1", d.sx1), ("X2", d.sx2), ("U0", d.su0), ("T", d.st)]
        } else {
            vec![("X1", d.sx1), ("X2", d.sx2), ("T", d.st)]
        };
        UStage::Joint(mk(from, vec![("U1", d.su1), ("U2", d.su2)], &params.k12))
    } else {
        let (from1, from2) = if plan.has_u0 {
            (
                vec![("X1", d.sx1), ("U0", d.su0), ("T", d.st)],
                vec![("X2", d.sx2), ("U0", d.su0), ("T", d.st)],
            )
        } else {
            (vec![("X1", d.sx1), ("T", d.st)], vec![("X2", d.sx2), ("T", d.st)])
        };
        UStage::Separate {
            u1: mk(from1, vec![("U1", d.su1)], &params.k1),
            u2: mk(from2, vec![("U2", d.su2)], &params.k2),
        }
    };
    let y = mk(
        vec![("U1", d.su1), ("U2", d.su2), ("Z", d.sz), ("T", d.st)],
        vec![("Y", d.sy)],
        &params.ky,
    );
    AuxDecomposition { t_pmf: normalize_row(&params.t), u0, u, y }
}

/// Zeroes entries below the threshold and renormalizes each row. Tiny
/// stray mass in a kernel row perturbs the information bounds by
/// O(eps log 1/eps); removing it lets near-exact structures become exact.
fn snap_small_entries(rows: &mut [Vec<f64>], threshold: f64) {
    for row in rows.iter_mut() {
        let mut total = 0.0;
        for p in row.iter_mut() {
            if *p < threshold {
                *p = 0.0;
            }
            total += *p;
        }
        if total > 0.0 {
            row.iter_mut().for_each(|p| *p /= total);
        } else {
            let n = row.len() as f64;
            row.iter_mut().for_each(|p| *p = 1.0 / n);
        }
    }
}

fn normalize_row(row: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = row.iter().map(|p| p.max(0.0)).collect();
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|p| *p /= s);
    } else {
        let n = v.len() as f64;
        v.iter_mut().for_each(|p| *p = 1.0 / n);
    }
    v
}

struct RestartOutcome {
    index: usize,
    feasible: Option<(AuxDecomposition, RegionEval)>,
    violation: f64,
}

fn run_membership_restart(
    model: &Model,
    q: &JointPmf,
    point: &RatePoint,
    budget: &SearchBudget,
    index: usize,
) -> RestartOutcome {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(budget.seed, index as u64));
    let sharpness = [1.0, 2.5, 5.0][index % 3];
    let mut params = model.random_params(&mut rng, sharpness);
    let mut s = model.fresh_scratch();

    let mut violation = f64::INFINITY;
    let rounds = budget.iters.div_ceil(200).max(1);
    let mut iter_budget = budget.iters;
    let debug = std::env::var_os("MC_DEBUG").is_some() && index < 8;
    for round in 0..rounds {
        // the fitting polish owns correctness; the descent phase keeps the
        // penalty moderate so the hinge direction is not drowned out
        let lambda = if round == 0 { 4.0 } else { 30.0 };
        let era_iters = iter_budget.min(200);
        iter_budget -= era_iters;
        let mut best_obj = f64::INFINITY;
        let mut stall = 0usize;
        for it in 0..era_iters {
            let fwd = model.forward(&params, &mut s);
            let v = fwd.max_tv.max(fwd.markov_value).max(fwd.hinge_violation.max(0.0));
            violation = violation.min(v);
            let obj = fwd.objective(lambda);
            if obj < best_obj - 1e-10 {
                best_obj = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > 40 {
                    break;
                }
            }
            model.load_membership_coefs(&mut s, &fwd, lambda);
            model.gradient_sweep(&params, &mut s, lambda);
            // later rounds start on the correctness manifold; keep steps
            // small there so the hinge push does not wreck the fit
            let base = if round == 0 { 0.5 } else { 0.25 };
            let step = base / (1.0 + (it as f64) / 400.0);
            apply_steps(model, &mut params, &s, step);
        }
        let last = round + 1 == rounds;
        let sweeps = if last { 500 } else { 160 };
        correctness_polish(
            model,
            &mut params,
            &mut s,
            sweeps,
            budget.correctness_tol * 0.2,
            PolishScope::All,
        );
        let mut fwd = model.forward(&params, &mut s);
        // near-miss repair: collapse auxiliary symbols with similar output
        // behavior, then drop stray kernel mass; multiplicative fitting
        // never regrows zeroed entries, so each accepted move projects onto
        // a smaller-support correct structure
        if !model.plan.joint_u
            && fwd.max_tv <= 1e-4
            && fwd.hinge_violation > 0.0
            && fwd.hinge_violation <= 0.35
        {
            try_symbol_merges(model, &mut params, &mut s, budget, MergeSide::U2, &mut fwd);
            if fwd.hinge_violation > 0.0 {
                try_symbol_merges(model, &mut params, &mut s, budget, MergeSide::U1, &mut fwd);
            }
        }
        if fwd.max_tv <= 1e-4 && fwd.hinge_violation > 0.0 && fwd.hinge_violation <= 0.1 {
            for threshold in [3e-3, 0.03, 0.1] {
                let saved = params.clone();
                snap_small_entries(&mut params.k1, threshold);
                snap_small_entries(&mut params.k2, threshold);
                snap_small_entries(&mut params.k12, threshold);
                snap_small_entries(&mut params.u0, threshold);
                correctness_polish(
                    model,
                    &mut params,
                    &mut s,
                    250,
                    budget.correctness_tol * 0.1,
                    PolishScope::All,
                );
                let snapped = model.forward(&params, &mut s);
                if snapped.max_tv.max(snapped.markov_value) <= budget.correctness_tol
                    && snapped.hinge_violation <= fwd.hinge_violation
                {
                    fwd = snapped;
                } else {
                    params = saved;
                    break;
                }
                if fwd.hinge_violation <= 0.0 {
                    break;
                }
            }
        }
        if debug {
            eprintln!(
                "restart {index} round {round}: tv {:.3e} hinge {:+.3e} markov {:.1e}",
                fwd.max_tv, fwd.hinge_violation, fwd.markov_value
            );
        }
        let candidate = fwd.max_tv <= budget.correctness_tol
            && fwd.markov_value <= budget.correctness_tol
            && fwd.hinge_violation <= budget.bound_tol;
        if candidate {
            let dec = params_to_dec(model, &params);
            if let Ok(eval) = evaluate(model.plan.theorem, q, &dec, DEFAULT_MEMORY_CAP) {
                let feasible = eval.correctness_error <= budget.correctness_tol
                    && eval.max_markov_error() <= budget.correctness_tol
                    && eval.satisfied_by(point, budget.bound_tol);
                let viol_bounds = eval
                    .bounds
                    .iter()
                    .filter_map(|b| {
                        let mut sum = 0.0;
                        for r in &b.rates {
                            match point.get(*r) {
                                Some(v) if v.is_infinite() => return None,
                                Some(v) => sum += v,
                                None => return None,
                            }
                        }
                        Some(b.rhs - sum)
                    })
                    .fold(0.0f64, f64::max);
                violation = violation
                    .min(eval.correctness_error.max(eval.max_markov_error()).max(viol_bounds));
                if feasible {
                    return RestartOutcome { index, feasible: Some((dec, eval)), violation };
                }
            }
        }
        if iter_budget == 0 {
            break;
        }
    }
    if std::env::var_os("MC_DUMP").is_some() && index < 3 {
        let fwd = model.forward(&params, &mut s);
        eprintln!("== restart {index}: tv {:.2e} hinge {:+.4e}", fwd.max_tv, fwd.hinge_violation);
        for (r, row) in params.k2.iter().enumerate() {
            let pretty: Vec<String> = row.iter().map(|p| format!("{p:.4}")).collect();
            eprintln!("k2[{r}] = [{}]", pretty.join(", "));
        }
        for (r, row) in params.k1.iter().enumerate() {
            let pretty: Vec<String> = row.iter().map(|p| format!("{p:.4}")).collect();
            eprintln!("k1[{r}] = [{}]", pretty.join(", "));
        }
    }
    RestartOutcome { index, feasible: None, violation }
}

fn apply_steps(model: &Model, params: &mut Params, s: &Scratch, step: f64) {
    eg_step(&mut params.ky, &s.grad.ky, step);
    if model.plan.joint_u {
        eg_step(&mut params.k12, &s.grad.k12, step);
    } else {
        eg_step(&mut params.k1, &s.grad.k1, step);
        eg_step(&mut params.k2, &s.grad.k2, step);
    }
    if model.plan.has_u0 {
        eg_step(&mut params.u0, &s.grad.u0, step);
    }
    if model.dims.st > 1 {
        let mut t_rows = vec![params.t.clone()];
        let t_grads = vec![s.grad.t.clone()];
        eg_step(&mut t_rows, &t_grads, step);
        params.t = t_rows.pop().unwrap();
    }
}

/// Searches for a decomposition certifying membership of `point` in the
/// given bound family's region. A returned certificate satisfies the
/// budget's correctness, Markov and bound tolerances; `NotFound` is not a
/// proof of non-membership.
pub fn region_membership(
    q: &JointPmf,
    point: &RatePoint,
    theorem: TheoremId,
    budget: &SearchBudget,
) -> Result<MembershipOutcome, RegionError> {
    budget.validate()?;
    point.validate(theorem)?;
    if matches!(theorem, TheoremId::Thm3 | TheoremId::Thm6) {
        let mi = q.mutual_info(&["X1"], &["X2"], &["Z"])?;
        if mi > 1e-9 {
            return Err(RegionError::NotConditionallyIndependent(mi));
        }
    }
    let plan = build_plan(theorem, &probe_dims(q, &budget.sizes, theorem.has_r00())?, Some(point))?;
    let model = Model::new(q, &plan, &budget.sizes)?;

    let batch = 256usize;
    let mut best_violation = f64::INFINITY;
    let mut run = 0usize;
    while run < budget.restarts {
        let hi = (run + batch).min(budget.restarts);
        let outcomes: Vec<RestartOutcome> = (run..hi)
            .into_par_iter()
            .map(|i| run_membership_restart(&model, q, point, budget, i))
            .collect();
        run = hi;
        let mut found: Option<RestartOutcome> = None;
        for o in outcomes {
            best_violation = best_violation.min(o.violation);
            if o.feasible.is_some() {
                match &found {
                    Some(f) if f.index <= o.index => {}
                    _ => found = Some(o),
                }
            }
        }
        if let Some(f) = found {
            let (dec, eval) = f.feasible.unwrap();
            return Ok(MembershipOutcome::Certificate { dec, eval, restart: f.index });
        }
    }
    Ok(MembershipOutcome::NotFound { best_violation, restarts_run: run })
}

fn probe_dims(q: &JointPmf, sizes: &AuxSizes, has_u0: bool) -> Result<Dims, RegionError> {
    let (sx1, sx2, sz, sy) = target_sizes(q)?;
    let labeling = common_part_of(q)?;
    Ok(Dims {
        sx1,
        sx2,
        sz,
        st: sizes.t,
        su0: if has_u0 { sizes.u0 } else { 1 },
        su1: sizes.u1,
        su2: sizes.u2,
        sy,
        sx0: labeling.count,
        x0_of_x1: labeling.labels1.clone(),
    })
}

// ---------------------------------------------------------------------------
// Weighted boundary tracing
// ---------------------------------------------------------------------------

/// Rates in canonical order for weight vectors.
pub fn rate_order(theorem: TheoremId) -> Vec<Rate> {
    if theorem.has_r00() {
        vec![Rate::R1, Rate::R2, Rate::R00, Rate::R01, Rate::R02]
    } else {
        vec![Rate::R1, Rate::R2, Rate::R01, Rate::R02]
    }
}

fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let d = subset.len();
    let mut i = d;
    while i > 0 {
        i -= 1;
        if subset[i] < n - d + i {
            subset[i] += 1;
            for j in i + 1..d {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Minimizes `sum_r w_r x_r` subject to the bounds and `x >= 0`, with
/// zero-weight rates unconstrained (their bounds are absorbed and their
/// coordinates reported as +inf). Returns (value, point, per-bound duals).
fn weighted_lp(
    eval_bounds: &[BoundEval],
    order: &[Rate],
    weights: &[f64],
) -> (f64, Vec<f64>, Vec<f64>) {
    let active: Vec<usize> = (0..order.len()).filter(|i| weights[*i] > 0.0).collect();
    let d = active.len();
    let mut duals = vec![0.0; eval_bounds.len()];
    if d == 0 {
        return (0.0, vec![f64::INFINITY; order.len()], duals);
    }
    let col_of = |r: Rate| -> Option<usize> {
        order.iter().position(|o| *o == r).and_then(|i| active.iter().position(|a| *a == i))
    };
    let mut rows: Vec<(Vec<f64>, f64, Option<usize>)> = Vec::new();
    'bounds: for (bi, b) in eval_bounds.iter().enumerate() {
        let mut coeff = vec![0.0; d];
        for r in &b.rates {
            match col_of(*r) {
                Some(c) => coeff[c] += 1.0,
                None => continue 'bounds,
            }
        }
        rows.push((coeff, b.rhs, Some(bi)));
    }
    for c in 0..d {
        let mut coeff = vec![0.0; d];
        coeff[c] = 1.0;
        rows.push((coeff, 0.0, None));
    }
    let c_vec: Vec<f64> = active.iter().map(|i| weights[*i]).collect();

    let n = rows.len();
    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    let mut subset: Vec<usize> = (0..d).collect();
    loop {
        let a: Vec<Vec<f64>> = subset.iter().map(|i| rows[*i].0.clone()).collect();
        let b: Vec<f64> = subset.iter().map(|i| rows[*i].1).collect();
        if let Some(x) = solve_dense(&a, &b) {
            let feasible = rows.iter().all(|(coeff, rhs, _)| {
                coeff.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() >= rhs - 1e-9
            });
            if feasible {
                let obj: f64 = c_vec.iter().zip(&x).map(|(a, b)| a * b).sum();
                if best.as_ref().map_or(true, |(bo, _, _)| obj < bo - 1e-12) {
                    best = Some((obj, x, subset.clone()));
                }
            }
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    let (obj, x, basis) = best.expect("covering LP always has a vertex optimum");
    let mut at = vec![vec![0.0; d]; d];
    for (k, ri) in basis.iter().enumerate() {
        for (c, row) in at.iter_mut().enumerate() {
            row[k] = rows[*ri].0[c];
        }
    }
    if let Some(y) = solve_dense(&at, &c_vec) {
        for (k, ri) in basis.iter().enumerate() {
            if let Some(bi) = rows[*ri].2 {
                duals[bi] = y[k].max(0.0);
            }
        }
    }
    let mut point = vec![f64::INFINITY; order.len()];
    for (k, i) in active.iter().enumerate() {
        point[*i] = x[k].max(0.0);
    }
    (obj, point, duals)
}

fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let d = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..d {
        let piv = (col..d)
            .max_by(|i, j| m[*i][col].abs().partial_cmp(&m[*j][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let p = m[col][col];
        for r in 0..d {
            if r == col {
                continue;
            }
            let f = m[r][col] / p;
            if f == 0.0 {
                continue;
            }
            for c in col..d {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    Some((0..d).map(|i| rhs[i] / m[i][i]).collect())
}

fn bounds_from_entropies(plan: &Plan, entropies: &[f64]) -> Vec<BoundEval> {
    // hinge order lines up with the spec list in trace mode (no filtering)
    let specs = bound_specs(plan.theorem);
    specs
        .into_iter()
        .zip(&plan.hinges)
        .map(|(spec, h)| {
            let val = |terms: &[(f64, usize)]| -> f64 {
                terms.iter().map(|(sg, mi)| sg * entropies[*mi]).sum()
            };
            let mut rhs = val(&h.terms);
            if let Some(alt) = &h.alt {
                rhs = rhs.max(val(alt));
            }
            BoundEval { label: spec.label.to_string(), rates: spec.rates, rhs }
        })
        .collect()
}

fn run_trace_restart(
    model: &Model,
    q: &JointPmf,
    weights: &[f64],
    order: &[Rate],
    budget: &SearchBudget,
    index: usize,
) -> (usize, Option<TracePoint>) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(budget.seed, index as u64));
    let sharpness = [1.0, 2.5, 5.0][index % 3];
    let mut params = model.random_params(&mut rng, sharpness);
    let mut s = model.fresh_scratch();

    let mut stall = 0usize;
    let mut best_obj = f64::INFINITY;
    let mut era = usize::MAX;
    for iter in 0..budget.iters {
        let lambda = (4.0 * 10f64.powi((iter / 200) as i32)).min(1e7);
        if iter / 200 != era {
            era = iter / 200;
            best_obj = f64::INFINITY;
        }
        let fwd = model.forward(&params, &mut s);
        let bounds = bounds_from_entropies(model.plan, &fwd.entropies);
        let (lp_value, _, duals) = weighted_lp(&bounds, order, weights);
        let obj = lambda * (fwd.sum_tv + fwd.markov_value) + lp_value;
        if obj < best_obj - 1e-10 {
            best_obj = obj;
            stall = 0;
        } else {
            stall += 1;
            if stall > 60 {
                break;
            }
        }
        model.load_weighted_coefs(&mut s, &fwd, lambda, &duals);
        model.gradient_sweep(&params, &mut s, lambda);
        let step = 0.5 / (1.0 + (iter as f64) / 400.0);
        apply_steps(model, &mut params, &s, step);
    }
    correctness_polish(
        model,
        &mut params,
        &mut s,
        400,
        budget.correctness_tol * 0.2,
        PolishScope::All,
    );
    let dec = params_to_dec(model, &params);
    let eval = match evaluate(model.plan.theorem, q, &dec, DEFAULT_MEMORY_CAP) {
        Ok(e) => e,
        Err(_) => return (index, None),
    };
    if eval.correctness_error > budget.correctness_tol
        || eval.max_markov_error() > budget.correctness_tol
    {
        return (index, None);
    }
    let (obj, point, _) = weighted_lp(&eval.bounds, order, weights);
    (index, Some(TracePoint { weights: weights.to_vec(), point, objective: obj, dec, eval }))
}

/// Minimizes the weighted combination of rates over decompositions found
/// within the budget. Zero-weight rates are treated as unlimited.
pub fn trace_boundary(
    q: &JointPmf,
    theorem: TheoremId,
    weights: &[f64],
    budget: &SearchBudget,
) -> Result<TracePoint, RegionError> {
    budget.validate()?;
    let order = rate_order(theorem);
    if weights.len() != order.len() {
        return Err(RegionError::InvalidPoint(format!(
            "expected {} weights, got {}",
            order.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| *w < 0.0 || w.is_nan()) || weights.iter().all(|w| *w == 0.0) {
        return Err(RegionError::InvalidPoint(
            "weights must be nonnegative and not all zero".into(),
        ));
    }
    if matches!(theorem, TheoremId::Thm3 | TheoremId::Thm6) {
        let mi = q.mutual_info(&["X1"], &["X2"], &["Z"])?;
        if mi > 1e-9 {
            return Err(RegionError::NotConditionallyIndependent(mi));
        }
    }
    let plan = build_plan(theorem, &probe_dims(q, &budget.sizes, theorem.has_r00())?, None)?;
    let model = Model::new(q, &plan, &budget.sizes)?;
    let results: Vec<(usize, Option<TracePoint>)> = (0..budget.restarts)
        .into_par_iter()
        .map(|i| run_trace_restart(&model, q, weights, &order, budget, i))
        .collect();
    let best = results
        .into_iter()
        .filter_map(|(i, tp)| tp.map(|t| (i, t)))
        .min_by(|(ia, a), (ib, b)| {
            a.objective.partial_cmp(&b.objective).unwrap().then(ia.cmp(ib))
        });
    match best {
        Some((_, tp)) => Ok(tp),
        None => Err(RegionError::InvalidBudget(
            "no correct decomposition found within the trace budget; increase restarts".into(),
        )),
    }
}

#[cfg(test)]
#[path = "search_tests_inc.rs"]
mod search_tests;
