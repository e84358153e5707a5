//! Descending filtrations of principal ideals in one variable, described by
//! the roots of their generators inside a closed window.
//!
//! Level `j` is `<P_j>` with `P_j` determined up to units by its window roots
//! and multiplicities. Order loci `V_i(I_j)` are the window points where every
//! element of `I_j` vanishes to order at least `i`.

pub mod poly;

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::Rat;
use crate::smoothfn::expr::{ExprBuilder, ExprError, SmoothExpr};
use crate::smoothfn::set::{Region, SetDescriptor};
use poly::{rational_roots, Poly};

/// Most levels ever materialized.
pub const MAX_LEVELS: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum FiltrationError {
    #[error("window must satisfy lo < hi")]
    Window,
    #[error("level {level}: {reason}")]
    Level { level: usize, reason: String },
    #[error("level {level} has an irrational root in [{lo}, {hi}]")]
    Irrational { level: usize, lo: Rat, hi: Rat },
    #[error("level {level}: roots and coefficients disagree")]
    Disagree { level: usize },
    #[error("level {next} is not inside level {level}: root {root} has multiplicity {have} < {need}")]
    NotNested { level: usize, next: usize, root: Rat, have: u32, need: u32 },
    #[error("rule: {0}")]
    Rule(String),
    #[error("point {0} lies outside the window")]
    OutsideWindow(Rat),
    #[error("level {0} is not available, only {1} levels were supplied")]
    Missing(usize, usize),
    #[error("level {0} is the zero ideal; order loci are not finite sets")]
    ZeroLevel(usize),
    #[error("no growth witness: {0}")]
    NoWitness(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootMult {
    pub root: Rat,
    pub mult: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roots: Option<Vec<RootMult>>,
    /// Ascending coefficients; all zero means the zero ideal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<Rat>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RuleRepr {
    /// Roots `num / (i + offset)` with multiplicity `i`, for `i <= j`.
    Harmonic {
        num: Rat,
        #[serde(default)]
        offset: u64,
        #[serde(default)]
        fixed: Vec<RootMult>,
    },
    /// Root `r` with multiplicity `j * mult`, plus fixed factors.
    Power {
        roots: Vec<RootMult>,
        #[serde(default)]
        fixed: Vec<RootMult>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiltrationRepr {
    window: [Rat; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<LevelRepr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule: Option<RuleRepr>,
}

/// Window roots with multiplicities; `None` is the zero ideal.
pub type Level = Option<BTreeMap<Rat, u32>>;

#[derive(Clone, Debug)]
enum Source {
    Explicit(Vec<Level>),
    Harmonic { num: Rat, offset: u64, fixed: BTreeMap<Rat, u32> },
    Power { growing: BTreeMap<Rat, u32>, fixed: BTreeMap<Rat, u32> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "FiltrationRepr", into = "FiltrationRepr")]
pub struct PolyFiltration {
    repr: FiltrationRepr,
    source: Source,
}

impl TryFrom<FiltrationRepr> for PolyFiltration {
    type Error = FiltrationError;
    fn try_from(repr: FiltrationRepr) -> Result<PolyFiltration, FiltrationError> {
        PolyFiltration::from_repr(repr)
    }
}

impl From<PolyFiltration> for FiltrationRepr {
    fn from(f: PolyFiltration) -> FiltrationRepr {
        f.repr
    }
}

/// `ord_p` of a level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    Finite(u32),
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stabilizes,
    Grows,
    Undetermined,
}

/// Behaviour of one chain `V_i(I_1) ⊆ V_i(I_2) ⊆ ...`.
#[derive(Clone, Debug, Serialize)]
pub struct ChainRow {
    pub i: u32,
    pub verdict: Verdict,
    /// Proven from a rule rather than read off finitely many levels.
    pub definitive: bool,
    /// First level at which the chain reaches its final value.
    pub j0: Option<usize>,
    pub limit: Option<Vec<Rat>>,
    /// `(level, point)` for every point that joins the chain up to `j_max`.
    pub new_points: Vec<(usize, Rat)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderLoci {
    pub i_max: u32,
    pub j_max: usize,
    /// `table[i - 1][j - 1] = V_i(I_j)`.
    pub table: Vec<Vec<Vec<Rat>>>,
    pub rows: Vec<ChainRow>,
}

/// Per-level comparison indices of a filtration that passes the form check.
#[derive(Clone, Debug, Serialize)]
pub struct LevelIndices {
    pub j: usize,
    /// Least `k` with `I_k` inside the target ideal of level `j`.
    pub k: Option<usize>,
    /// Greatest `d` with the target ideal of level `j` inside `I_d`.
    pub d: usize,
    /// `d` hit the search cap, so it may be larger.
    pub d_capped: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict")]
pub enum FormVerdict {
    #[serde(rename = "FORM-OK")]
    Ok {
        zero_set: Vec<Rat>,
        /// Eventual multiplicity per point; `None` when it grows without bound.
        limit_mult: Vec<(Rat, Option<u32>)>,
        indices: Vec<LevelIndices>,
        definitive: bool,
    },
    #[serde(rename = "FORM-FAIL")]
    Fail { i: u32, reason: String, witness: Vec<(usize, Rat)>, definitive: bool },
}

impl FormVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, FormVerdict::Ok { .. })
    }

    /// The zero set as a set descriptor, for handing on to the realizer.
    pub fn zero_set_descriptor(&self) -> Option<SetDescriptor> {
        match self {
            FormVerdict::Ok { zero_set, .. } => Some(SetDescriptor::points_1d(zero_set)),
            FormVerdict::Fail { .. } => None,
        }
    }
}

fn to_map(level: usize, rm: &[RootMult], lo: &Rat, hi: &Rat) -> Result<BTreeMap<Rat, u32>, FiltrationError> {
    let mut m = BTreeMap::new();
    for r in rm {
        if r.mult == 0 {
            return Err(FiltrationError::Level { level, reason: format!("root {} has multiplicity 0", r.root) });
        }
        if &r.root < lo || &r.root > hi {
            return Err(FiltrationError::Level { level, reason: format!("root {} outside the window", r.root) });
        }
        if m.insert(r.root.clone(), r.mult).is_some() {
            return Err(FiltrationError::Level { level, reason: format!("root {} listed twice", r.root) });
        }
    }
    Ok(m)
}

fn window_roots(level: usize, coeffs: &[Rat], lo: &Rat, hi: &Rat) -> Result<Level, FiltrationError> {
    let p = Poly::new(coeffs.iter().map(|c| c.0.clone()).collect());
    if p.is_zero() {
        return Ok(None);
    }
    let roots = rational_roots(&p, &lo.0, &hi.0).map_err(|e| FiltrationError::Irrational { level, lo: Rat(e.lo), hi: Rat(e.hi) })?;
    Ok(Some(roots.into_iter().map(|(r, m)| (Rat(r), m)).collect()))
}

fn mult(level: &BTreeMap<Rat, u32>, p: &Rat) -> u32 {
    level.get(p).copied().unwrap_or(0)
}

impl PolyFiltration {
    fn from_repr(repr: FiltrationRepr) -> Result<PolyFiltration, FiltrationError> {
        let [lo, hi] = &repr.window;
        if lo >= hi {
            return Err(FiltrationError::Window);
        }
        let source = match (&repr.levels, &repr.rule) {
            (Some(levels), None) => {
                if levels.is_empty() {
                    return Err(FiltrationError::Level { level: 0, reason: "no levels".into() });
                }
                let mut out = Vec::with_capacity(levels.len());
                for (k, l) in levels.iter().enumerate() {
                    let j = k + 1;
                    let lv = match (&l.roots, &l.coeffs) {
                        (None, None) => return Err(FiltrationError::Level { level: j, reason: "needs roots or coeffs".into() }),
                        (Some(r), None) => Some(to_map(j, r, lo, hi)?),
                        (None, Some(c)) => window_roots(j, c, lo, hi)?,
                        (Some(r), Some(c)) => {
                            let given = to_map(j, r, lo, hi)?;
                            match window_roots(j, c, lo, hi)? {
                                Some(found) if found == given => Some(given),
                                _ => return Err(FiltrationError::Disagree { level: j }),
                            }
                        }
                    };
                    out.push(lv);
                }
                for (k, w) in out.windows(2).enumerate() {
                    match (&w[0], &w[1]) {
                        (_, None) => {}
                        (None, Some(_)) => return Err(FiltrationError::Level { level: k + 2, reason: "follows a zero level".into() }),
                        (Some(a), Some(b)) => {
                            for (r, &m) in a {
                                let have = mult(b, r);
                                if have < m {
                                    return Err(FiltrationError::NotNested { level: k + 1, next: k + 2, root: r.clone(), have, need: m });
                                }
                            }
                        }
                    }
                }
                Source::Explicit(out)
            }
            (None, Some(RuleRepr::Harmonic { num, offset, fixed })) => {
                if num.is_zero() {
                    return Err(FiltrationError::Rule("harmonic numerator must be nonzero".into()));
                }
                Source::Harmonic { num: num.clone(), offset: *offset, fixed: to_map(0, fixed, lo, hi)? }
            }
            (None, Some(RuleRepr::Power { roots, fixed })) => {
                let growing = to_map(0, roots, lo, hi)?;
                if growing.is_empty() {
                    return Err(FiltrationError::Rule("power rule needs at least one growing root".into()));
                }
                Source::Power { growing, fixed: to_map(0, fixed, lo, hi)? }
            }
            _ => return Err(FiltrationError::Rule("give exactly one of levels or rule".into())),
        };
        Ok(PolyFiltration { repr, source })
    }

    /// Filtration given by explicit root lists.
    pub fn from_levels(window: (Rat, Rat), levels: Vec<Vec<RootMult>>) -> Result<PolyFiltration, FiltrationError> {
        PolyFiltration::from_repr(FiltrationRepr {
            window: [window.0, window.1],
            levels: Some(levels.into_iter().map(|r| LevelRepr { roots: Some(r), coeffs: None }).collect()),
            rule: None,
        })
    }

    /// `I_j = <prod_{i <= j} (x - num/(i + offset))^i>`.
    pub fn harmonic(window: (Rat, Rat), num: Rat, offset: u64) -> Result<PolyFiltration, FiltrationError> {
        PolyFiltration::from_repr(FiltrationRepr {
            window: [window.0, window.1],
            levels: None,
            rule: Some(RuleRepr::Harmonic { num, offset, fixed: vec![] }),
        })
    }

    /// `I_j = <fixed * prod (x - r)^(j m)>`.
    pub fn power(window: (Rat, Rat), roots: Vec<RootMult>, fixed: Vec<RootMult>) -> Result<PolyFiltration, FiltrationError> {
        PolyFiltration::from_repr(FiltrationRepr { window: [window.0, window.1], levels: None, rule: Some(RuleRepr::Power { roots, fixed }) })
    }

    pub fn window(&self) -> (&Rat, &Rat) {
        (&self.repr.window[0], &self.repr.window[1])
    }

    /// Number of explicit levels, `None` for rules.
    pub fn explicit_len(&self) -> Option<usize> {
        match &self.source {
            Source::Explicit(l) => Some(l.len()),
            _ => None,
        }
    }

    fn in_window(&self, p: &Rat) -> bool {
        let (lo, hi) = self.window();
        lo <= p && p <= hi
    }

    fn harmonic_root(num: &Rat, offset: u64, i: u64) -> Rat {
        Rat(&num.0 / BigRational::from_integer((i + offset).into()))
    }

    /// Index bound for harmonic roots inside the window; `None` if infinitely many.
    fn harmonic_last(&self) -> Option<u64> {
        let Source::Harmonic { num, offset, .. } = &self.source else { return Some(0) };
        let (lo, hi) = self.window();
        // roots tend to 0 from the side of num's sign
        let accumulates = if num.is_positive() { !lo.is_positive() && hi.is_positive() } else { lo.0.is_negative() && !hi.0.is_negative() };
        if accumulates {
            return None;
        }
        // |p_i| >= min |window end| on the relevant side
        let edge = if num.is_positive() { lo } else { hi };
        if edge.is_zero() || (num.is_positive() && !hi.is_positive()) || (!num.is_positive() && !lo.0.is_negative()) {
            return Some(0);
        }
        let bound = (&num.0 / &edge.0).floor().to_integer();
        let b: i128 = bound.try_into().unwrap_or(i128::MAX);
        Some((b - *offset as i128).clamp(0, u64::MAX as i128) as u64)
    }

    /// Roots and multiplicities of level `j >= 1`.
    pub fn level(&self, j: usize) -> Result<Level, FiltrationError> {
        assert!(j >= 1, "levels start at 1");
        match &self.source {
            Source::Explicit(l) => l.get(j - 1).cloned().ok_or(FiltrationError::Missing(j, l.len())),
            Source::Harmonic { num, offset, fixed } => {
                let mut m = fixed.clone();
                let top = self.harmonic_last().map_or(j as u64, |k| k.min(j as u64));
                for i in 1..=top {
                    let p = Self::harmonic_root(num, *offset, i);
                    if self.in_window(&p) {
                        *m.entry(p).or_insert(0) += i as u32;
                    }
                }
                Ok(Some(m))
            }
            Source::Power { growing, fixed } => {
                let mut m = fixed.clone();
                for (r, &k) in growing {
                    *m.entry(r.clone()).or_insert(0) += k * j as u32;
                }
                Ok(Some(m))
            }
        }
    }

    /// `ord_p(I_j)`, infinite on the zero ideal.
    pub fn ord_at(&self, j: usize, p: &Rat) -> Result<Order, FiltrationError> {
        if !self.in_window(p) {
            return Err(FiltrationError::OutsideWindow(p.clone()));
        }
        Ok(match self.level(j)? {
            None => Order::Infinite,
            Some(l) => Order::Finite(mult(&l, p)),
        })
    }

    fn finite_level(&self, j: usize) -> Result<BTreeMap<Rat, u32>, FiltrationError> {
        self.level(j)?.ok_or(FiltrationError::ZeroLevel(j))
    }

    /// Level from which every order locus `V_i`, `i <= i_max`, is constant.
    fn stable_level(&self, i_max: u32) -> Option<usize> {
        match &self.source {
            Source::Explicit(_) => None,
            Source::Harmonic { .. } => self.harmonic_last().map(|k| (k as usize).max(1)),
            Source::Power { .. } => Some(i_max.max(1) as usize),
        }
    }

    /// Order loci `V_i(I_j)` for `i <= i_max`, `j <= j_max`, with the
    /// stabilization verdict of every chain. Explicit data caps `j_max` at the
    /// number of levels.
    pub fn order_loci(&self, i_max: u32, j_max: usize) -> Result<OrderLoci, FiltrationError> {
        let j_max = match self.explicit_len() {
            Some(n) => j_max.min(n),
            None => j_max,
        }
        .max(1);
        let stable = self.stable_level(i_max);
        let top = stable.map_or(j_max, |s| s.max(j_max));
        if top > MAX_LEVELS {
            return Err(FiltrationError::Rule(format!("loci need {top} levels, limit is {MAX_LEVELS}")));
        }
        let levels: Vec<BTreeMap<Rat, u32>> = (1..=top).map(|j| self.finite_level(j)).collect::<Result<_, _>>()?;
        let locus = |i: u32, j: usize| -> Vec<Rat> { levels[j - 1].iter().filter(|(_, &m)| m >= i).map(|(r, _)| r.clone()).collect() };
        let grows_forever = matches!(self.source, Source::Harmonic { .. }) && stable.is_none();
        let mut table = Vec::with_capacity(i_max as usize);
        let mut rows = Vec::with_capacity(i_max as usize);
        for i in 1..=i_max {
            let chain: Vec<Vec<Rat>> = (1..=top).map(|j| locus(i, j)).collect();
            let mut new_points = Vec::new();
            for j in 1..=j_max {
                let before: BTreeSet<&Rat> = if j == 1 { BTreeSet::new() } else { chain[j - 2].iter().collect() };
                new_points.extend(chain[j - 1].iter().filter(|p| !before.contains(p)).map(|p| (j, p.clone())));
            }
            let last = &chain[top - 1];
            let j0 = chain.iter().position(|c| c == last).map(|k| k + 1);
            let row = if grows_forever {
                ChainRow { i, verdict: Verdict::Grows, definitive: true, j0: None, limit: None, new_points }
            } else if stable.is_some() {
                ChainRow { i, verdict: Verdict::Stabilizes, definitive: true, j0, limit: Some(last.clone()), new_points }
            } else if j_max >= 2 && j0.is_some_and(|j| j < j_max) {
                ChainRow { i, verdict: Verdict::Stabilizes, definitive: false, j0, limit: Some(last.clone()), new_points }
            } else {
                ChainRow { i, verdict: Verdict::Undetermined, definitive: false, j0: None, limit: None, new_points }
            };
            table.push(chain.into_iter().take(j_max).collect());
            rows.push(row);
        }
        Ok(OrderLoci { i_max, j_max, table, rows })
    }

    /// Stabilization verdict per chain, `i <= i_max`.
    pub fn stabilization_check(&self, i_max: u32, j_max: usize) -> Result<Vec<ChainRow>, FiltrationError> {
        Ok(self.order_loci(i_max, j_max)?.rows)
    }

    /// Eventual multiplicity at `p`; `None` when unbounded.
    fn limit_mult(&self, p: &Rat, top: usize) -> Result<Option<u32>, FiltrationError> {
        Ok(match &self.source {
            Source::Power { growing, fixed } => {
                if growing.contains_key(p) {
                    None
                } else {
                    Some(mult(fixed, p))
                }
            }
            _ => Some(mult(&self.finite_level(top)?, p)),
        })
    }

    /// Checks whether every order locus chain stabilizes, and if so computes
    /// the comparison indices `k_j`, `d_j` against the standard filtration of
    /// the zero set capped by the eventual multiplicities.
    pub fn necessary_form_check(&self, j_max: usize) -> Result<FormVerdict, FiltrationError> {
        // the last supplied level can only confirm chains that settled before it
        let i_max = match self.explicit_len() {
            Some(n) => j_max.min(n).saturating_sub(1).max(1),
            None => j_max.max(1),
        } as u32;
        let loci = self.order_loci(i_max, j_max)?;
        for row in &loci.rows {
            match row.verdict {
                Verdict::Stabilizes => {}
                Verdict::Grows => {
                    return Ok(FormVerdict::Fail {
                        i: row.i,
                        reason: format!("order locus V_{} keeps gaining points", row.i),
                        witness: row.new_points.clone(),
                        definitive: row.definitive,
                    })
                }
                Verdict::Undetermined => {
                    return Ok(FormVerdict::Fail {
                        i: row.i,
                        reason: format!("order locus V_{} still changes at the last supplied level", row.i),
                        witness: row.new_points.clone(),
                        definitive: false,
                    })
                }
            }
        }
        let definitive = loci.rows.iter().all(|r| r.definitive);
        let j_used = loci.j_max;
        // search range for k and d
        let cap = match self.explicit_len() {
            Some(n) => n,
            None => self.stable_level(i_max).unwrap_or(1).max(4 * j_used) + 8,
        };
        let levels: Vec<BTreeMap<Rat, u32>> = (1..=cap).map(|j| self.finite_level(j)).collect::<Result<_, _>>()?;
        let zero_set = loci.rows[0].limit.clone().unwrap_or_default();
        let points: BTreeSet<Rat> = levels.iter().flat_map(|l| l.keys().cloned()).collect();
        let mut limit_mult = Vec::new();
        for p in &points {
            limit_mult.push((p.clone(), self.limit_mult(p, cap)?));
        }
        let mut indices = Vec::with_capacity(j_used);
        for j in 1..=j_used {
            let target: Vec<(usize, u32)> = limit_mult
                .iter()
                .enumerate()
                .map(|(n, (p, mu))| {
                    let want = mult(&levels[j - 1], p).max(if zero_set.contains(p) { j as u32 } else { 0 });
                    (n, mu.map_or(want, |m| want.min(m)))
                })
                .collect();
            let pts: Vec<&Rat> = limit_mult.iter().map(|(p, _)| p).collect();
            let k = (1..=cap).find(|&k| target.iter().all(|&(n, t)| mult(&levels[k - 1], pts[n]) >= t));
            let d = (1..=cap).take_while(|&d| target.iter().all(|&(n, t)| t >= mult(&levels[d - 1], pts[n]))).last().unwrap_or(0);
            indices.push(LevelIndices { j, k, d, d_capped: d == cap });
        }
        Ok(FormVerdict::Ok { zero_set, limit_mult, indices, definitive })
    }

    /// For a filtration whose first order locus grows without bound, builds
    /// `g_j` in `I_j`, `j = 1..=n`, with disjoint supports and `g_j(w_j) = j!`
    /// at distinct window points `w_j`.
    pub fn witness_unbounded(&self, n: usize) -> Result<Witness, FiltrationError> {
        let Source::Harmonic { num, offset, fixed } = &self.source else {
            return Err(FiltrationError::NoWitness("only filtrations with a proven growing locus have one".into()));
        };
        if self.harmonic_last().is_some() {
            return Err(FiltrationError::NoWitness("every order locus stabilizes".into()));
        }
        // w_j = next in-window root beyond level j, strictly increasing index
        let mut picks: Vec<(u64, Rat)> = Vec::with_capacity(n);
        let mut idx = 0u64;
        for j in 1..=n as u64 {
            idx = idx.max(j) + 1;
            loop {
                let p = Self::harmonic_root(num, *offset, idx);
                if self.in_window(&p) && !fixed.contains_key(&p) {
                    picks.push((idx, p));
                    break;
                }
                idx += 1;
            }
        }
        let top = picks.last().map_or(1, |(k, _)| *k as usize);
        let all_roots: Vec<Rat> = self.finite_level(top)?.into_keys().collect();
        let (lo, hi) = self.window();
        let region = Region::interval(lo.clone(), hi.clone());
        let mut terms = Vec::with_capacity(n);
        let mut fact = BigRational::one();
        for (j0, (_, w)) in picks.iter().enumerate() {
            let j = j0 + 1;
            fact *= BigRational::from_integer(j.into());
            let gap = all_roots.iter().filter(|r| *r != w).map(|r| (&r.0 - &w.0).abs()).min().expect("other roots exist");
            let radius = Rat(gap / BigRational::from_integer(3.into()));
            let level = self.finite_level(j)?;
            let gen = Poly::from_roots(level.iter().map(|(r, m)| (&r.0, *m)));
            let pw = gen.eval(&w.0);
            let scale = Rat(&fact / &pw);
            let expr = witness_expr(&region, &level, &scale, w, &radius)?;
            terms.push(WitnessTerm {
                level: j,
                point: w.clone(),
                radius,
                scale,
                generator: level.into_iter().map(|(root, mult)| RootMult { root, mult }).collect(),
                expr,
            });
        }
        Ok(Witness { terms })
    }
}

fn witness_expr(region: &Region, level: &BTreeMap<Rat, u32>, scale: &Rat, w: &Rat, radius: &Rat) -> Result<SmoothExpr, ExprError> {
    let mut b = ExprBuilder::new(region);
    let x = b.coord(0);
    let mut factors = vec![b.constant(scale.clone())];
    for (r, &m) in level {
        let lin = b.affine_exact(x, Rat::one(), Rat(-r.0.clone()));
        factors.push(b.pow(lin, m));
    }
    let inv = Rat(radius.0.recip());
    let u = b.affine_exact(x, inv.clone(), Rat(-(&w.0 * &inv.0)));
    factors.push(b.cutoff(u));
    let root = b.mul(factors);
    b.finish(root)
}

/// `scale * P_j * cutoff((x - point) / radius)`.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessTerm {
    pub level: usize,
    pub point: Rat,
    pub radius: Rat,
    pub scale: Rat,
    pub generator: Vec<RootMult>,
    pub expr: SmoothExpr,
}

impl WitnessTerm {
    /// Exact value where the cutoff is 0 or 1, `None` on its transition layer.
    pub fn exact_value(&self, x: &Rat) -> Option<Rat> {
        let d = (&x.0 - &self.point.0).abs();
        if d >= self.radius.0 {
            return Some(Rat::zero());
        }
        if d * BigRational::from_integer(2.into()) > self.radius.0 {
            return None;
        }
        let p = Poly::from_roots(self.generator.iter().map(|r| (&r.root.0, r.mult)));
        Some(Rat(&self.scale.0 * p.eval(&x.0)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub terms: Vec<WitnessTerm>,
}

impl Witness {
    /// Exact partial sum of the first `n` terms at `x`.
    pub fn partial_sum(&self, n: usize, x: &Rat) -> Option<Rat> {
        let mut acc = BigRational::zero();
        for t in self.terms.iter().take(n) {
            acc += t.exact_value(x)?.0;
        }
        Some(Rat(acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rm(root: Rat, mult: u32) -> RootMult {
        RootMult { root, mult }
    }

    fn unit() -> (Rat, Rat) {
        (Rat::zero(), Rat::one())
    }

    #[test]
    fn harmonic_fails_with_witness() {
        let f = PolyFiltration::harmonic(unit(), Rat::one(), 0).unwrap();
        let v = f.necessary_form_check(12).unwrap();
        let FormVerdict::Fail { i, witness, definitive, .. } = v else { panic!("expected failure") };
        assert_eq!(i, 1);
        assert!(definitive);
        assert_eq!(witness.len(), 12);
        let w = f.witness_unbounded(8).unwrap();
        let mut fact = BigRational::one();
        for (j, t) in w.terms.iter().enumerate() {
            fact *= BigRational::from_integer((j + 1).into());
            assert_eq!(t.point, Rat::new(1, j as i64 + 2));
            assert_eq!(t.exact_value(&t.point).unwrap().0, fact);
            let x = t.point.to_f64();
            let got = t.expr.eval(&[x]).unwrap();
            assert!((got / fact.to_string().parse::<f64>().unwrap() - 1.0).abs() < 1e-9, "{got}");
        }
        assert_eq!(w.partial_sum(8, &w.terms[7].point).unwrap().0, fact);
    }

    #[test]
    fn powers_of_x_are_standard() {
        let f = PolyFiltration::power(unit(), vec![rm(Rat::zero(), 1)], vec![]).unwrap();
        let FormVerdict::Ok { zero_set, indices, definitive, .. } = f.necessary_form_check(12).unwrap() else { panic!() };
        assert!(definitive);
        assert_eq!(zero_set, vec![Rat::zero()]);
        for ix in indices {
            assert_eq!((ix.k, ix.d), (Some(ix.j), ix.j));
        }
        let g = PolyFiltration::power(unit(), vec![rm(Rat::zero(), 1)], vec![rm(Rat::zero(), 2)]).unwrap();
        let FormVerdict::Ok { indices, .. } = g.necessary_form_check(6).unwrap() else { panic!() };
        for ix in indices {
            assert_eq!((ix.k, ix.d), (Some(ix.j), ix.j));
        }
    }

    #[test]
    fn coefficient_levels_match_roots() {
        let json = r#"{"window":[0,1],"levels":[
            {"coeffs":[0,1]},
            {"roots":[{"root":0,"mult":2}],"coeffs":[0,0,3]}
        ]}"#;
        let f: PolyFiltration = serde_json::from_str(json).unwrap();
        assert_eq!(f.ord_at(2, &Rat::zero()).unwrap(), Order::Finite(2));
        let bad = r#"{"window":[0,1],"levels":[{"roots":[{"root":0,"mult":1}],"coeffs":[0,0,1]}]}"#;
        assert!(serde_json::from_str::<PolyFiltration>(bad).is_err());
        let irr = r#"{"window":[0,2],"levels":[{"coeffs":[-2,0,1]}]}"#;
        assert!(serde_json::from_str::<PolyFiltration>(irr).is_err());
        let unknown = r#"{"window":[0,1],"rule":{"kind":"power","roots":[],"extra":1}}"#;
        assert!(serde_json::from_str::<PolyFiltration>(unknown).is_err());
    }

    #[test]
    fn non_nested_levels_are_rejected() {
        let r = PolyFiltration::from_levels(unit(), vec![vec![rm(Rat::zero(), 2)], vec![rm(Rat::zero(), 1)]]);
        assert!(matches!(r, Err(FiltrationError::NotNested { .. })));
    }

    #[test]
    fn explicit_stabilizing_is_not_definitive() {
        let h = Rat::new(1, 2);
        let levels = (1..=6).map(|j| vec![rm(Rat::zero(), j), rm(h.clone(), 1)]).collect();
        let f = PolyFiltration::from_levels(unit(), levels).unwrap();
        let v = f.necessary_form_check(6).unwrap();
        let FormVerdict::Ok { definitive, zero_set, .. } = v else { panic!("{v:?}") };
        assert!(!definitive);
        assert_eq!(zero_set, vec![Rat::zero(), h]);
        assert!(f.witness_unbounded(3).is_err());
    }
}
