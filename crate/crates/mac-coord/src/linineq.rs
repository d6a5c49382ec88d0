//! Symbolic linear inequalities over rate variables and opaque entropy atoms.
//!
//! Systems are lists of rows `expr >= 0` where `expr` has exact rational
//! coefficients on rate variables and atoms plus a rational constant.
//! Entropy atoms are never manipulated symbolically; equivalence of derived
//! systems is certified numerically on valuations coming from real
//! distributions. Fourier-Motzkin elimination combines opposing rows
//! pairwise and prunes only by syntactic dominance.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const DEFAULT_ROW_CAP: usize = 100_000;

#[derive(Debug, Error)]
pub enum LinIneqError {
    #[error("unknown rate variable `{0}`")]
    UnknownRate(String),
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("duplicate identifier `{0}`")]
    Duplicate(String),
    #[error("elimination produced {rows} rows, cap {cap}")]
    Blowup { rows: usize, cap: usize },
    #[error("missing value for atom `{0}`")]
    MissingAtomValue(String),
    #[error("polytopes are over different rate variables")]
    RateVarMismatch,
    #[error("point has {got} coordinates, polytope has {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("invalid rational literal `{0}`")]
    BadRational(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Opaque entropy quantity appearing on the right-hand side of bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntropyAtom {
    pub id: String,
    pub description: String,
}

/// Linear expression with exact rational coefficients. A row in a system
/// means `expr >= 0`; an equality means `expr = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinExpr {
    pub rate_coeffs: BTreeMap<usize, BigRational>,
    pub atom_coeffs: BTreeMap<usize, BigRational>,
    pub constant: BigRational,
}

impl LinExpr {
    pub fn rate(&self, idx: usize) -> BigRational {
        self.rate_coeffs.get(&idx).cloned().unwrap_or_else(BigRational::zero)
    }

    fn scaled_add(&self, scale: &BigRational, other: &LinExpr, other_scale: &BigRational) -> LinExpr {
        let mut out = LinExpr::default();
        let merge = |dst: &mut BTreeMap<usize, BigRational>,
                         a: &BTreeMap<usize, BigRational>,
                         b: &BTreeMap<usize, BigRational>| {
            for (k, v) in a {
                let e = dst.entry(*k).or_insert_with(BigRational::zero);
                *e += v * scale;
            }
            for (k, v) in b {
                let e = dst.entry(*k).or_insert_with(BigRational::zero);
                *e += v * other_scale;
            }
            dst.retain(|_, v| !v.is_zero());
        };
        merge(&mut out.rate_coeffs, &self.rate_coeffs, &other.rate_coeffs);
        merge(&mut out.atom_coeffs, &self.atom_coeffs, &other.atom_coeffs);
        out.constant = &self.constant * scale + &other.constant * other_scale;
        out
    }

    fn is_trivially_true(&self) -> bool {
        self.rate_coeffs.is_empty() && self.atom_coeffs.is_empty() && !self.constant.is_negative()
    }

    /// Scales so the leading (lowest-index rate, then atom, then constant)
    /// coefficient has absolute value one, preserving the inequality
    /// direction. Gives rows a canonical representative for deduplication.
    fn normalized(&self) -> LinExpr {
        let lead = self
            .rate_coeffs
            .values()
            .chain(self.atom_coeffs.values())
            .chain(std::iter::once(&self.constant))
            .find(|c| !c.is_zero());
        let Some(lead) = lead else { return self.clone() };
        let scale = lead.abs().recip();
        let mut out = self.clone();
        for v in out.rate_coeffs.values_mut() {
            *v *= &scale;
        }
        for v in out.atom_coeffs.values_mut() {
            *v *= &scale;
        }
        out.constant *= &scale;
        out
    }
}

/// A system of inequalities `rows[i] >= 0` and equalities `equalities[i] = 0`
/// over declared rate variables and entropy atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct IneqSystem {
    pub rate_vars: Vec<String>,
    pub atoms: Vec<EntropyAtom>,
    pub rows: Vec<LinExpr>,
    pub equalities: Vec<LinExpr>,
}

impl IneqSystem {
    pub fn new(rate_vars: Vec<String>, atoms: Vec<EntropyAtom>) -> Result<Self, LinIneqError> {
        let mut seen = std::collections::HashSet::new();
        for r in &rate_vars {
            if !seen.insert(r.clone()) {
                return Err(LinIneqError::Duplicate(r.clone()));
            }
        }
        for a in &atoms {
            if !seen.insert(a.id.clone()) {
                return Err(LinIneqError::Duplicate(a.id.clone()));
            }
        }
        Ok(Self { rate_vars, atoms, rows: Vec::new(), equalities: Vec::new() })
    }

    pub fn rate_index(&self, name: &str) -> Result<usize, LinIneqError> {
        self.rate_vars
            .iter()
            .position(|r| r == name)
            .ok_or_else(|| LinIneqError::UnknownRate(name.to_string()))
    }

    pub fn atom_index(&self, id: &str) -> Result<usize, LinIneqError> {
        self.atoms
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| LinIneqError::UnknownAtom(id.to_string()))
    }

    /// Convenience builder: adds the row
    /// `sum(rates) - sum(atom terms) - constant >= 0` from integer-friendly
    /// terms given as (name, numerator, denominator).
    pub fn add_row(
        &mut self,
        rate_terms: &[(&str, i64)],
        atom_terms: &[(&str, i64)],
        constant: i64,
    ) -> Result<(), LinIneqError> {
        let mut e = LinExpr::default();
        for (name, c) in rate_terms {
            let i = self.rate_index(name)?;
            let entry = e.rate_coeffs.entry(i).or_insert_with(BigRational::zero);
            *entry += BigRational::from(BigInt::from(*c));
        }
        for (id, c) in atom_terms {
            let i = self.atom_index(id)?;
            let entry = e.atom_coeffs.entry(i).or_insert_with(BigRational::zero);
            *entry += BigRational::from(BigInt::from(*c));
        }
        e.constant = BigRational::from(BigInt::from(constant));
        e.rate_coeffs.retain(|_, v| !v.is_zero());
        e.atom_coeffs.retain(|_, v| !v.is_zero());
        self.rows.push(e);
        Ok(())
    }

    pub fn add_equality(
        &mut self,
        rate_terms: &[(&str, i64)],
        atom_terms: &[(&str, i64)],
        constant: i64,
    ) -> Result<(), LinIneqError> {
        self.add_row(rate_terms, atom_terms, constant)?;
        let e = self.rows.pop().unwrap();
        self.equalities.push(e);
        Ok(())
    }

    fn dedupe(rows: Vec<LinExpr>) -> Vec<LinExpr> {
        // normalize, drop trivial rows, then keep the strongest row per
        // coefficient pattern (smallest constant dominates)
        let mut best: BTreeMap<String, LinExpr> = BTreeMap::new();
        for row in rows {
            let n = row.normalized();
            if n.is_trivially_true() {
                continue;
            }
            let key = format!("{:?}|{:?}", n.rate_coeffs, n.atom_coeffs);
            match best.get(&key) {
                Some(prev) if prev.constant <= n.constant => {}
                _ => {
                    best.insert(key, n);
                }
            }
        }
        best.into_values().collect()
    }

    /// Fourier-Motzkin elimination of the named rate variables.
    ///
    /// Equalities involving a dropped variable are substituted out first.
    /// When `add_nonneg` is set, a `r >= 0` row is added for every rate
    /// variable before eliminating.
    pub fn fme_eliminate(
        &self,
        drop: &[&str],
        add_nonneg: bool,
        row_cap: usize,
    ) -> Result<IneqSystem, LinIneqError> {
        let mut drop_idx: Vec<usize> = drop
            .iter()
            .map(|d| self.rate_index(d))
            .collect::<Result<_, _>>()?;
        drop_idx.sort_unstable();
        drop_idx.dedup();

        let mut rows = self.rows.clone();
        let mut equalities = self.equalities.clone();
        if add_nonneg {
            for i in 0..self.rate_vars.len() {
                let mut e = LinExpr::default();
                e.rate_coeffs.insert(i, BigRational::one());
                rows.push(e);
            }
        }

        // substitute equalities that mention dropped variables
        let mut remaining_drop = drop_idx.clone();
        loop {
            let pick = equalities.iter().position(|eq| {
                remaining_drop.iter().any(|d| !eq.rate(*d).is_zero())
            });
            let Some(eq_pos) = pick else { break };
            let eq = equalities.remove(eq_pos);
            let var = *remaining_drop
                .iter()
                .find(|d| !eq.rate(**d).is_zero())
                .unwrap();
            let pivot = eq.rate(var);
            // var = -(eq - pivot*var)/pivot; substitute into every row:
            // row' = row - row_coeff/pivot * eq
            let substitute = |row: &LinExpr| -> LinExpr {
                let c = row.rate(var);
                if c.is_zero() {
                    return row.clone();
                }
                let scale = -&c / &pivot;
                row.scaled_add(&BigRational::one(), &eq, &scale)
            };
            rows = rows.iter().map(&substitute).collect();
            equalities = equalities.iter().map(&substitute).collect();
            remaining_drop.retain(|d| *d != var);
        }

        // eliminate the rest pairwise, cheapest variable first
        while !remaining_drop.is_empty() {
            let (k, &var) = remaining_drop
                .iter()
                .enumerate()
                .min_by_key(|(_, &v)| {
                    let pos = rows.iter().filter(|r| r.rate(v).is_positive()).count();
                    let neg = rows.iter().filter(|r| r.rate(v).is_negative()).count();
                    pos * neg
                })
                .unwrap();
            remaining_drop.remove(k);

            let mut pos = Vec::new();
            let mut neg = Vec::new();
            let mut keep = Vec::new();
            for r in rows {
                let c = r.rate(var);
                if c.is_positive() {
                    pos.push(r);
                } else if c.is_negative() {
                    neg.push(r);
                } else {
                    keep.push(r);
                }
            }
            if keep.len() + pos.len() * neg.len() > row_cap {
                return Err(LinIneqError::Blowup {
                    rows: keep.len() + pos.len() * neg.len(),
                    cap: row_cap,
                });
            }
            for p in &pos {
                let a = p.rate(var);
                for n in &neg {
                    let b = n.rate(var); // negative
                    let combined = p.scaled_add(&(-&b), n, &a);
                    debug_assert!(combined.rate(var).is_zero());
                    keep.push(combined);
                }
            }
            rows = Self::dedupe(keep);
        }

        // rebuild with the dropped variables removed
        let mut new_names = Vec::new();
        let mut remap = vec![usize::MAX; self.rate_vars.len()];
        for (i, name) in self.rate_vars.iter().enumerate() {
            if !drop_idx.contains(&i) {
                remap[i] = new_names.len();
                new_names.push(name.clone());
            }
        }
        let remap_expr = |e: &LinExpr| -> LinExpr {
            let mut out = e.clone();
            out.rate_coeffs = e
                .rate_coeffs
                .iter()
                .map(|(k, v)| (remap[*k], v.clone()))
                .collect();
            debug_assert!(!out.rate_coeffs.contains_key(&usize::MAX));
            out
        };
        Ok(IneqSystem {
            rate_vars: new_names,
            atoms: self.atoms.clone(),
            rows: rows.iter().map(&remap_expr).collect(),
            equalities: equalities.iter().map(&remap_expr).collect(),
        })
    }

    /// Plugs in atom values, producing numeric half-spaces over the rate
    /// variables. Equalities become opposing half-space pairs.
    pub fn instantiate(
        &self,
        atom_values: &BTreeMap<String, f64>,
    ) -> Result<NumericPolytope, LinIneqError> {
        for a in &self.atoms {
            if !atom_values.contains_key(&a.id) {
                return Err(LinIneqError::MissingAtomValue(a.id.clone()));
            }
        }
        let d = self.rate_vars.len();
        let to_halfspace = |e: &LinExpr| -> HalfSpace {
            let mut coeffs = vec![0.0; d];
            for (k, v) in &e.rate_coeffs {
                coeffs[*k] = rational_to_f64(v);
            }
            let mut shift = rational_to_f64(&e.constant);
            for (k, v) in &e.atom_coeffs {
                shift += rational_to_f64(v) * atom_values[&self.atoms[*k].id];
            }
            HalfSpace { coeffs, rhs: -shift }
        };
        let mut halfspaces: Vec<HalfSpace> = self.rows.iter().map(to_halfspace).collect();
        for e in &self.equalities {
            let h = to_halfspace(e);
            let neg = HalfSpace {
                coeffs: h.coeffs.iter().map(|c| -c).collect(),
                rhs: -h.rhs,
            };
            halfspaces.push(h);
            halfspaces.push(neg);
        }
        Ok(NumericPolytope { rate_vars: self.rate_vars.clone(), halfspaces })
    }
}

impl fmt::Display for IneqSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            let mut parts = Vec::new();
            for (k, v) in &row.rate_coeffs {
                parts.push(format!("{} {}", v, self.rate_vars[*k]));
            }
            for (k, v) in &row.atom_coeffs {
                parts.push(format!("{} {}", v, self.atoms[*k].id));
            }
            if !row.constant.is_zero() {
                parts.push(format!("{}", row.constant));
            }
            writeln!(f, "{} >= 0", parts.join(" + "))?;
        }
        for eq in &self.equalities {
            let mut parts = Vec::new();
            for (k, v) in &eq.rate_coeffs {
                parts.push(format!("{} {}", v, self.rate_vars[*k]));
            }
            for (k, v) in &eq.atom_coeffs {
                parts.push(format!("{} {}", v, self.atoms[*k].id));
            }
            if !eq.constant.is_zero() {
                parts.push(format!("{}", eq.constant));
            }
            writeln!(f, "{} = 0", parts.join(" + "))?;
        }
        Ok(())
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    // exact for the small numbers appearing here
    let num = r.numer();
    let den = r.denom();
    bigint_to_f64(num) / bigint_to_f64(den)
}

fn bigint_to_f64(b: &BigInt) -> f64 {
    b.to_string().parse::<f64>().unwrap_or(f64::NAN)
}

/// Half-space `coeffs . x >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// Numeric polytope over named rate variables, as an intersection of
/// half-spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericPolytope {
    pub rate_vars: Vec<String>,
    pub halfspaces: Vec<HalfSpace>,
}

impl NumericPolytope {
    pub fn dim(&self) -> usize {
        self.rate_vars.len()
    }

    /// Membership within tolerance. Coordinates may be `+inf`; a half-space
    /// is satisfied by an infinite coordinate with positive coefficient and
    /// violated by one with negative coefficient.
    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool, LinIneqError> {
        if point.len() != self.dim() {
            return Err(LinIneqError::DimensionMismatch { got: point.len(), want: self.dim() });
        }
        'rows: for h in &self.halfspaces {
            let mut lhs = 0.0;
            for (c, x) in h.coeffs.iter().zip(point) {
                if *c == 0.0 {
                    continue;
                }
                if x.is_infinite() {
                    if (*c > 0.0) == (*x > 0.0) {
                        continue 'rows; // satisfied outright
                    }
                    return Ok(false);
                }
                lhs += c * x;
            }
            if lhs < h.rhs - tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Outcome of sampled polytope comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum EquivVerdict {
    Agree { checked: usize },
    Disagree { point: Vec<f64>, in_a: bool, in_b: bool },
}

impl EquivVerdict {
    pub fn agrees(&self) -> bool {
        matches!(self, EquivVerdict::Agree { .. })
    }
}

/// Compares membership of two polytopes on points drawn uniformly from the
/// centered box of the given radius and on points placed near each
/// hyperplane of either system. Returns the first disagreeing point if any.
pub fn poly_equiv_sampled(
    a: &NumericPolytope,
    b: &NumericPolytope,
    box_radius: f64,
    samples: usize,
    seed: u64,
) -> Result<EquivVerdict, LinIneqError> {
    if a.rate_vars != b.rate_vars {
        return Err(LinIneqError::RateVarMismatch);
    }
    let d = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-9 * box_radius.max(1.0);
    let mut checked = 0usize;

    let test = |point: &[f64], a: &NumericPolytope, b: &NumericPolytope, checked: &mut usize|
        -> Result<Option<EquivVerdict>, LinIneqError> {
        let ia = a.contains(point, tol)?;
        let ib = b.contains(point, tol)?;
        *checked += 1;
        if ia != ib {
            return Ok(Some(EquivVerdict::Disagree { point: point.to_vec(), in_a: ia, in_b: ib }));
        }
        Ok(None)
    };

    for _ in 0..samples {
        let point: Vec<f64> = (0..d).map(|_| rng.gen_range(-box_radius..=box_radius)).collect();
        if let Some(v) = test(&point, a, b, &mut checked)? {
            return Ok(v);
        }
    }

    // points straddling each hyperplane of either system
    let planes: Vec<&HalfSpace> = a.halfspaces.iter().chain(&b.halfspaces).collect();
    let per_plane = (samples / (10 * planes.len().max(1))).max(2);
    let jitter = 1e-4 * box_radius.max(1.0);
    for h in planes {
        let norm2: f64 = h.coeffs.iter().map(|c| c * c).sum();
        if norm2 == 0.0 {
            continue;
        }
        for _ in 0..per_plane {
            let base: Vec<f64> =
                (0..d).map(|_| rng.gen_range(-box_radius..=box_radius)).collect();
            let dot: f64 = h.coeffs.iter().zip(&base).map(|(c, x)| c * x).sum();
            let shift = (h.rhs - dot) / norm2;
            for side in [jitter, -jitter] {
                let point: Vec<f64> = base
                    .iter()
                    .zip(&h.coeffs)
                    .map(|(x, c)| x + (shift + side / norm2.sqrt()) * c)
                    .collect();
                if let Some(v) = test(&point, a, b, &mut checked)? {
                    return Ok(v);
                }
            }
        }
    }
    Ok(EquivVerdict::Agree { checked })
}

// ---------------------------------------------------------------------------
// JSON format
// ---------------------------------------------------------------------------

mod json {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct AtomJson {
        id: String,
        desc: String,
    }

    #[derive(Serialize, Deserialize, Default)]
    struct RowJson {
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        rate: BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        atom: BTreeMap<String, String>,
        #[serde(default, rename = "const", skip_serializing_if = "String::is_empty")]
        constant: String,
    }

    #[derive(Serialize, Deserialize)]
    struct SystemJson {
        rates: Vec<String>,
        atoms: Vec<AtomJson>,
        rows: Vec<RowJson>,
        #[serde(default)]
        equalities: Vec<RowJson>,
    }

    fn parse_rational(s: &str) -> Result<BigRational, LinIneqError> {
        let bad = || LinIneqError::BadRational(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        } else {
            let n: BigInt = s.trim().parse().map_err(|_| bad())?;
            Ok(BigRational::from(n))
        }
    }

    fn rational_string(r: &BigRational) -> String {
        if r.denom().is_one() {
            r.numer().to_string()
        } else {
            format!("{}/{}", r.numer(), r.denom())
        }
    }

    fn expr_from_json(sys: &IneqSystem, row: &RowJson) -> Result<LinExpr, LinIneqError> {
        let mut e = LinExpr::default();
        for (name, lit) in &row.rate {
            e.rate_coeffs.insert(sys.rate_index(name)?, parse_rational(lit)?);
        }
        for (id, lit) in &row.atom {
            e.atom_coeffs.insert(sys.atom_index(id)?, parse_rational(lit)?);
        }
        if !row.constant.is_empty() {
            e.constant = parse_rational(&row.constant)?;
        }
        Ok(e)
    }

    fn expr_to_json(sys: &IneqSystem, e: &LinExpr) -> RowJson {
        RowJson {
            rate: e
                .rate_coeffs
                .iter()
                .map(|(k, v)| (sys.rate_vars[*k].clone(), rational_string(v)))
                .collect(),
            atom: e
                .atom_coeffs
                .iter()
                .map(|(k, v)| (sys.atoms[*k].id.clone(), rational_string(v)))
                .collect(),
            constant: if e.constant.is_zero() { String::new() } else { rational_string(&e.constant) },
        }
    }

    pub fn system_from_json(text: &str) -> Result<IneqSystem, LinIneqError> {
        let raw: SystemJson = serde_json::from_str(text)?;
        let mut sys = IneqSystem::new(
            raw.rates,
            raw.atoms
                .into_iter()
                .map(|a| EntropyAtom { id: a.id, description: a.desc })
                .collect(),
        )?;
        for r in &raw.rows {
            let e = expr_from_json(&sys, r)?;
            sys.rows.push(e);
        }
        for r in &raw.equalities {
            let e = expr_from_json(&sys, r)?;
            sys.equalities.push(e);
        }
        Ok(sys)
    }

    pub fn system_to_json(sys: &IneqSystem) -> String {
        let raw = SystemJson {
            rates: sys.rate_vars.clone(),
            atoms: sys
                .atoms
                .iter()
                .map(|a| AtomJson { id: a.id.clone(), desc: a.description.clone() })
                .collect(),
            rows: sys.rows.iter().map(|e| expr_to_json(sys, e)).collect(),
            equalities: sys.equalities.iter().map(|e| expr_to_json(sys, e)).collect(),
        };
        serde_json::to_string_pretty(&raw).expect("system serializes")
    }
}

pub use json::{system_from_json, system_to_json};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eliminate_single_variable() {
        // {x <= a, -x <= 0} eliminate x -> {a >= 0}
        let mut sys = IneqSystem::new(
            vec!["x".into()],
            vec![EntropyAtom { id: "a".into(), description: "atom".into() }],
        )
        .unwrap();
        sys.add_row(&[("x", -1)], &[("a", 1)], 0).unwrap(); // a - x >= 0
        sys.add_row(&[("x", 1)], &[], 0).unwrap(); // x >= 0
        let out = sys.fme_eliminate(&["x"], false, DEFAULT_ROW_CAP).unwrap();
        assert!(out.rate_vars.is_empty());
        assert_eq!(out.rows.len(), 1);
        let row = &out.rows[0];
        assert!(row.rate_coeffs.is_empty());
        assert_eq!(row.atom_coeffs.len(), 1);
    }

    #[test]
    fn substitution_matches_double_inequality() {
        // y = x + 1 substituted into {y <= 3, x >= 0} equals eliminating y
        // after encoding the equality as two inequalities.
        let build = |as_equality: bool| {
            let mut sys = IneqSystem::new(vec!["x".into(), "y".into()], vec![]).unwrap();
            sys.add_row(&[("y", -1)], &[], 3).unwrap(); // 3 - y >= 0
            sys.add_row(&[("x", 1)], &[], 0).unwrap();
            if as_equality {
                sys.add_equality(&[("y", 1), ("x", -1)], &[], -1).unwrap(); // y - x - 1 = 0
            } else {
                sys.add_row(&[("y", 1), ("x", -1)], &[], -1).unwrap();
                sys.add_row(&[("y", -1), ("x", 1)], &[], 1).unwrap();
            }
            sys.fme_eliminate(&["y"], false, DEFAULT_ROW_CAP).unwrap()
        };
        let via_eq = build(true).instantiate(&BTreeMap::new()).unwrap();
        let via_ineq = build(false).instantiate(&BTreeMap::new()).unwrap();
        let verdict = poly_equiv_sampled(&via_eq, &via_ineq, 10.0, 500, 7).unwrap();
        assert!(verdict.agrees(), "{verdict:?}");
        // x in [0, 2]
        assert!(via_eq.contains(&[1.5], 1e-9).unwrap());
        assert!(!via_eq.contains(&[2.5], 1e-9).unwrap());
    }

    #[test]
    fn instantiate_and_membership() {
        let mut sys = IneqSystem::new(
            vec!["R1".into()],
            vec![EntropyAtom { id: "h".into(), description: "H(U1|Z)".into() }],
        )
        .unwrap();
        sys.add_row(&[("R1", 1)], &[("h", -1)], 0).unwrap(); // R1 - h >= 0
        let mut vals = BTreeMap::new();
        vals.insert("h".to_string(), 0.7);
        let poly = sys.instantiate(&vals).unwrap();
        assert!(poly.contains(&[0.7], 1e-9).unwrap());
        assert!(poly.contains(&[f64::INFINITY], 1e-9).unwrap());
        assert!(!poly.contains(&[0.5], 1e-9).unwrap());
        assert!(poly.contains(&[0.699_999_999], 1e-6).unwrap());
    }

    #[test]
    fn membership_edge_cases() {
        let empty = NumericPolytope { rate_vars: vec!["R1".into()], halfspaces: vec![] };
        assert!(empty.contains(&[42.0], 1e-9).unwrap());
        assert!(empty.contains(&[-42.0], 1e-9).unwrap());

        let poly = NumericPolytope {
            rate_vars: vec!["R1".into(), "R2".into()],
            halfspaces: vec![
                HalfSpace { coeffs: vec![1.0, 0.0], rhs: 1.0 },
                HalfSpace { coeffs: vec![0.0, 1.0], rhs: 1.0 },
                HalfSpace { coeffs: vec![1.0, 1.0], rhs: 3.0 },
            ],
        };
        assert!(!poly.contains(&[1.0, 1.0], 1e-9).unwrap());
        assert!(poly.contains(&[2.0, 1.0], 1e-9).unwrap());
        assert!(poly.contains(&[0.5], 1e-9).is_err());
    }

    #[test]
    fn redundant_row_still_equivalent() {
        let a = NumericPolytope {
            rate_vars: vec!["R1".into()],
            halfspaces: vec![HalfSpace { coeffs: vec![1.0], rhs: 1.0 }],
        };
        let b = NumericPolytope {
            rate_vars: vec!["R1".into()],
            halfspaces: vec![
                HalfSpace { coeffs: vec![1.0], rhs: 1.0 },
                HalfSpace { coeffs: vec![1.0], rhs: 0.0 },
            ],
        };
        assert!(poly_equiv_sampled(&a, &b, 5.0, 400, 3).unwrap().agrees());
        let c = NumericPolytope {
            rate_vars: vec!["R1".into()],
            halfspaces: vec![HalfSpace { coeffs: vec![1.0], rhs: 1.5 }],
        };
        assert!(!poly_equiv_sampled(&a, &c, 5.0, 400, 3).unwrap().agrees());
    }

    #[test]
    fn elimination_order_is_immaterial() {
        let mut sys = IneqSystem::new(
            vec!["R1".into(), "u".into(), "v".into()],
            vec![],
        )
        .unwrap();
        sys.add_row(&[("R1", 1), ("u", 1), ("v", -2)], &[], -1).unwrap();
        sys.add_row(&[("u", -1), ("v", 1)], &[], 2).unwrap();
        sys.add_row(&[("u", 1)], &[], 0).unwrap();
        sys.add_row(&[("v", 1)], &[], 0).unwrap();
        sys.add_row(&[("R1", 1), ("v", 3)], &[], -2).unwrap();
        let uv = sys.fme_eliminate(&["u", "v"], false, DEFAULT_ROW_CAP).unwrap();
        let vu = sys.fme_eliminate(&["v", "u"], false, DEFAULT_ROW_CAP).unwrap();
        let pa = uv.instantiate(&BTreeMap::new()).unwrap();
        let pb = vu.instantiate(&BTreeMap::new()).unwrap();
        assert!(poly_equiv_sampled(&pa, &pb, 8.0, 1200, 11).unwrap().agrees());
    }

    #[test]
    fn blowup_is_reported() {
        let mut sys = IneqSystem::new(
            (0..12).map(|i| format!("r{i}")).collect(),
            vec![],
        )
        .unwrap();
        // many rows touching r0 with both signs
        for i in 1..12 {
            let name = format!("r{i}");
            sys.add_row(&[("r0", 1), (name.as_str(), 1)], &[], 0).unwrap();
            sys.add_row(&[("r0", -1), (name.as_str(), 3)], &[], -1).unwrap();
        }
        let r = sys.fme_eliminate(&["r0"], false, 20);
        assert!(matches!(r, Err(LinIneqError::Blowup { .. })));
    }

    #[test]
    fn json_round_trip() {
        let mut sys = IneqSystem::new(
            vec!["R1".into(), "R2".into()],
            vec![EntropyAtom { id: "h1".into(), description: "H(U1|U2,Z)".into() }],
        )
        .unwrap();
        sys.add_row(&[("R1", 1), ("R2", 2)], &[("h1", -1)], 3).unwrap();
        sys.add_equality(&[("R1", 1), ("R2", -1)], &[], 0).unwrap();
        let text = system_to_json(&sys);
        let back = system_from_json(&text).unwrap();
        assert_eq!(back, sys);
    }

    /// FME soundness on random systems: membership in the eliminated system
    /// must match existence of values for the dropped variables. Dropped
    /// variables are boxed to [-radius, radius] by explicit rows so that a
    /// grid sweep (at most one gridded variable; the last one is solved by
    /// interval arithmetic) is a complete oracle.
    #[test]
    fn fme_soundness_against_grid_oracle() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let radius = 4.0;
        for trial in 0..40 {
            let keep = 2;
            let drop_n = if trial % 2 == 0 { 1 } else { 2 };
            let total = keep + drop_n;
            let names: Vec<String> = (0..total).map(|i| format!("r{i}")).collect();
            let mut sys = IneqSystem::new(names.clone(), vec![]).unwrap();
            let n_rows = rng.gen_range(3..7);
            for _ in 0..n_rows {
                let mut e = LinExpr::default();
                for v in 0..total {
                    let c: i64 = rng.gen_range(-2..=2);
                    if c != 0 {
                        e.rate_coeffs.insert(v, BigRational::from(BigInt::from(c)));
                    }
                }
                e.constant = BigRational::from(BigInt::from(rng.gen_range(-3..=3i64)));
                sys.rows.push(e);
            }
            // box the dropped variables so projection equals bounded existence
            for v in keep..total {
                let name = names[v].clone();
                sys.add_row(&[(name.as_str(), 1)], &[], 4).unwrap(); // v >= -4
                sys.add_row(&[(name.as_str(), -1)], &[], 4).unwrap(); // v <= 4
            }
            let drop_names: Vec<&str> =
                names[keep..].iter().map(|s| s.as_str()).collect();
            let reduced = sys.fme_eliminate(&drop_names, false, DEFAULT_ROW_CAP).unwrap();
            let full = sys.instantiate(&BTreeMap::new()).unwrap();
            let red = reduced.instantiate(&BTreeMap::new()).unwrap();

            // interval for the last dropped variable once everything else is
            // fixed; `prefix` holds (point, possibly v1)
            let last_interval = |prefix: &[f64]| -> Option<(f64, f64)> {
                let mut lo: f64 = -radius;
                let mut hi: f64 = radius;
                for h in &full.halfspaces {
                    let fixed: f64 =
                        h.coeffs[..prefix.len()].iter().zip(prefix).map(|(c, x)| c * x).sum();
                    let c = h.coeffs[total - 1];
                    if c == 0.0 {
                        if fixed < h.rhs - 1e-9 {
                            return None;
                        }
                    } else if c > 0.0 {
                        lo = lo.max((h.rhs - fixed) / c);
                    } else {
                        hi = hi.min((h.rhs - fixed) / c);
                    }
                }
                (lo <= hi + 1e-9).then_some((lo, hi))
            };

            for _ in 0..30 {
                let pt: Vec<f64> =
                    (0..keep).map(|_| rng.gen_range(-radius..=radius)).collect();
                let in_reduced = red.contains(&pt, 1e-9).unwrap();

                let exists = if drop_n == 1 {
                    last_interval(&pt).is_some()
                } else {
                    let step = radius / 1000.0;
                    let mut found = false;
                    let mut v1 = -radius;
                    while v1 <= radius + 1e-12 {
                        let mut prefix = pt.clone();
                        prefix.push(v1);
                        if last_interval(&prefix).is_some() {
                            found = true;
                            break;
                        }
                        v1 += step;
                    }
                    found
                };

                // a coarse grid can miss slivers near the projected boundary
                if in_reduced != exists {
                    let margin = red
                        .halfspaces
                        .iter()
                        .map(|h| {
                            let lhs: f64 =
                                h.coeffs.iter().zip(&pt).map(|(c, x)| c * x).sum();
                            (lhs - h.rhs).abs()
                        })
                        .fold(f64::INFINITY, f64::min);
                    assert!(
                        margin < 0.05,
                        "trial {trial}: FME mismatch at {pt:?} (reduced={in_reduced}, grid={exists}, margin={margin})"
                    );
                }
            }
        }
    }
}
