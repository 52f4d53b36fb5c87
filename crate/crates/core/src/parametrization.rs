//! Parametrizations of an initial marginal: nested families `(ν^α)` with
//! `mass(ν^α) = α`, interpolating from the zero measure to `µ₀`.
//!
//! Built-in kinds: left-curtain (quantile restriction), sunset
//! (proportional scaling), middle-curtain (barycenter-preserving central
//! restriction), right-curtain (the decreasing mirror, kept as a negative
//! control), nested-interval families, and explicit grids.

use crate::error::{Error, Result};
use crate::measure::{check_cs_order, check_positive_order, Measure};
use crate::tol;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Kind {
    #[serde(rename = "left-curtain")]
    LeftCurtain,
    #[serde(rename = "sunset")]
    Sunset,
    #[serde(rename = "middle-curtain")]
    MiddleCurtain,
    #[serde(rename = "right-curtain")]
    RightCurtain,
    #[serde(rename = "intervals")]
    Intervals { intervals: Vec<IntervalStop> },
    #[serde(rename = "grid")]
    Grid { alphas: Vec<f64>, measures: Vec<Measure> },
}

/// One stop of a nested interval family: at level `alpha`, `µ₀` restricted
/// to `[lo, hi]` must have mass `alpha` (up to boundary-atom splitting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStop {
    pub alpha: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParametrizationJson", into = "ParametrizationJson")]
pub struct Parametrization {
    base: Measure,
    kind: Kind,
}

#[derive(Serialize, Deserialize)]
struct ParametrizationJson {
    base: Measure,
    #[serde(flatten)]
    kind: Kind,
}

impl From<Parametrization> for ParametrizationJson {
    fn from(p: Parametrization) -> Self {
        ParametrizationJson {
            base: p.base,
            kind: p.kind,
        }
    }
}

impl TryFrom<ParametrizationJson> for Parametrization {
    type Error = String;
    fn try_from(j: ParametrizationJson) -> std::result::Result<Self, String> {
        Parametrization::new(j.base, j.kind).map_err(|e| e.to_string())
    }
}

impl Parametrization {
    pub fn new(base: Measure, kind: Kind) -> Result<Self> {
        if !tol::eq(base.mass(), 1.0) {
            return Err(Error::InvalidParametrization(format!(
                "base must be a probability measure, mass = {}",
                base.mass()
            )));
        }
        match &kind {
            Kind::Intervals { intervals } => {
                if intervals.is_empty()
                    || intervals.windows(2).any(|w| {
                        w[1].alpha <= w[0].alpha
                            || w[1].lo > w[0].lo + tol::POSITION_MERGE
                            || w[1].hi < w[0].hi - tol::POSITION_MERGE
                    })
                {
                    return Err(Error::InvalidParametrization(
                        "interval stops must be nested with increasing alpha".to_string(),
                    ));
                }
                if intervals.first().map(|s| s.alpha) != Some(0.0)
                    || intervals.last().map(|s| s.alpha) != Some(1.0)
                {
                    return Err(Error::InvalidParametrization(
                        "interval stops must cover alpha = 0 and alpha = 1".to_string(),
                    ));
                }
                for stop in intervals {
                    // the restriction must reach mass alpha with at most a
                    // boundary atom absorbing the remainder
                    let inner = base.restrict(stop.lo, stop.hi);
                    let boundary: f64 = base.weight_at(stop.lo) + base.weight_at(stop.hi);
                    if inner.mass() + tol::tolerance() < stop.alpha
                        || inner.mass() - boundary > stop.alpha + tol::tolerance()
                    {
                        return Err(Error::MassMismatch {
                            left: inner.mass(),
                            right: stop.alpha,
                        });
                    }
                }
            }
            Kind::Grid { alphas, measures } => {
                if alphas.len() != measures.len()
                    || alphas.len() < 2
                    || alphas.first() != Some(&0.0)
                    || alphas.last() != Some(&1.0)
                    || alphas.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err(Error::InvalidParametrization(
                        "grid must run from alpha 0 to 1 with one measure per point".to_string(),
                    ));
                }
                for (a, m) in alphas.iter().zip(measures) {
                    if !tol::eq(m.mass(), *a) {
                        return Err(Error::InvalidParametrization(format!(
                            "grid measure at alpha {a} has mass {}",
                            m.mass()
                        )));
                    }
                }
                for w in measures.windows(2) {
                    if !check_positive_order(&w[0], &w[1]) {
                        return Err(Error::InvalidParametrization(
                            "grid measures must be nested in positive order".to_string(),
                        ));
                    }
                }
                if !measures.last().unwrap().approx_eq(&base) {
                    return Err(Error::InvalidParametrization(
                        "grid measure at alpha 1 must equal the base".to_string(),
                    ));
                }
            }
            _ => {}
        }
        Ok(Parametrization { base, kind })
    }

    pub fn left_curtain(base: Measure) -> Result<Self> {
        Self::new(base, Kind::LeftCurtain)
    }

    pub fn sunset(base: Measure) -> Result<Self> {
        Self::new(base, Kind::Sunset)
    }

    pub fn middle_curtain(base: Measure) -> Result<Self> {
        Self::new(base, Kind::MiddleCurtain)
    }

    pub fn right_curtain(base: Measure) -> Result<Self> {
        Self::new(base, Kind::RightCurtain)
    }

    pub fn from_intervals(base: Measure, intervals: Vec<IntervalStop>) -> Result<Self> {
        Self::new(base, Kind::Intervals { intervals })
    }

    pub fn from_grid(base: Measure, alphas: Vec<f64>, measures: Vec<Measure>) -> Result<Self> {
        Self::new(base, Kind::Grid { alphas, measures })
    }

    pub fn base(&self) -> &Measure {
        &self.base
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    /// The sub-measure `ν^α` for any `α ∈ [0,1]`.
    pub fn at_alpha(&self, alpha: f64) -> Result<Measure> {
        if !(0.0..=1.0 + tol::tolerance()).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        let alpha = alpha.min(1.0);
        if alpha <= 0.0 {
            return Ok(Measure::zero());
        }
        match &self.kind {
            Kind::Sunset => Ok(self.base.scale(alpha)),
            Kind::LeftCurtain => Ok(lower_restriction(&self.base, alpha)),
            Kind::RightCurtain => Ok(upper_restriction(&self.base, alpha)),
            Kind::MiddleCurtain => middle_restriction(&self.base, alpha),
            Kind::Intervals { intervals } => {
                let (lo_stop, hi_stop) = bracket(intervals, alpha, |s| s.alpha);
                let nu_lo = restrict_to_mass(&self.base, &intervals[lo_stop], intervals[lo_stop].alpha);
                let nu_hi = restrict_to_mass(&self.base, &intervals[hi_stop], intervals[hi_stop].alpha);
                interpolate(
                    &nu_lo,
                    &nu_hi,
                    intervals[lo_stop].alpha,
                    intervals[hi_stop].alpha,
                    alpha,
                )
            }
            Kind::Grid { alphas, measures } => {
                let (lo, hi) = bracket(alphas, alpha, |&a| a);
                interpolate(&measures[lo], &measures[hi], alphas[lo], alphas[hi], alpha)
            }
        }
    }
}

/// Index pair bracketing `alpha` in a sorted list of stops.
fn bracket<T>(stops: &[T], alpha: f64, key: impl Fn(&T) -> f64) -> (usize, usize) {
    let mut hi = stops.len() - 1;
    for (i, s) in stops.iter().enumerate() {
        if key(s) >= alpha {
            hi = i;
            break;
        }
    }
    if key(&stops[hi]) <= alpha || hi == 0 {
        (hi, hi)
    } else {
        (hi - 1, hi)
    }
}

/// Linear interpolation between nested measures of masses `a_lo <= a_hi`.
fn interpolate(
    nu_lo: &Measure,
    nu_hi: &Measure,
    a_lo: f64,
    a_hi: f64,
    alpha: f64,
) -> Result<Measure> {
    if a_hi <= a_lo {
        return Ok(nu_lo.clone());
    }
    let t = (alpha - a_lo) / (a_hi - a_lo);
    let diff = nu_hi.subtract(nu_lo)?;
    Ok(nu_lo.add(&diff.scale(t)))
}

/// Restriction below the α-quantile plus a fractional atom at the quantile.
fn lower_restriction(base: &Measure, alpha: f64) -> Measure {
    let mut atoms = Vec::new();
    let mut remaining = alpha;
    for &(x, w) in base.atoms() {
        if remaining <= 0.0 {
            break;
        }
        let take = w.min(remaining);
        atoms.push((x, take));
        remaining -= take;
    }
    Measure::from_atoms(atoms)
}

/// Mirror of [`lower_restriction`]: mass above the (1-α)-quantile.
fn upper_restriction(base: &Measure, alpha: f64) -> Measure {
    let mut atoms = Vec::new();
    let mut remaining = alpha;
    for &(x, w) in base.atoms().iter().rev() {
        if remaining <= 0.0 {
            break;
        }
        let take = w.min(remaining);
        atoms.push((x, take));
        remaining -= take;
    }
    Measure::from_atoms(atoms)
}

/// Central restriction of mass `alpha` with the barycenter of the base:
/// interior atoms taken in full, the two boundary fractions solved from the
/// 2×2 mass/moment system. Candidate intervals are scanned smallest first.
fn middle_restriction(base: &Measure, alpha: f64) -> Result<Measure> {
    let atoms = base.atoms();
    let n = atoms.len();
    let target_moment = alpha * base.first_moment() / base.mass();
    let slack = tol::tolerance();

    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .collect();
    candidates.sort_by(|a, b| {
        let wa = atoms[a.1].0 - atoms[a.0].0;
        let wb = atoms[b.1].0 - atoms[b.0].0;
        wa.total_cmp(&wb).then(atoms[a.0].0.total_cmp(&atoms[b.0].0))
    });

    for (i, j) in candidates {
        let interior: &[(f64, f64)] = if i < j { &atoms[i + 1..j] } else { &[] };
        let interior_mass: f64 = interior.iter().map(|a| a.1).sum();
        let interior_moment: f64 = interior.iter().map(|a| a.0 * a.1).sum();
        let need_mass = alpha - interior_mass;
        let need_moment = target_moment - interior_moment;
        if need_mass < -slack {
            continue;
        }
        let (xi, wi) = atoms[i];
        let (xj, wj) = atoms[j];
        let (c_lo, c_hi) = if i == j {
            // single atom: moment is forced by the mass
            if (need_moment - need_mass * xi).abs() > slack {
                continue;
            }
            (need_mass, 0.0)
        } else {
            // c_lo + c_hi = need_mass, c_lo·xi + c_hi·xj = need_moment
            let det = xj - xi;
            let c_hi = (need_moment - need_mass * xi) / det;
            (need_mass - c_hi, c_hi)
        };
        let fits = |c: f64, w: f64| c >= -slack && c <= w + slack;
        if fits(c_lo, wi) && (i == j || fits(c_hi, wj)) {
            let mut out: Vec<(f64, f64)> = interior.to_vec();
            if c_lo > 0.0 {
                out.push((xi, c_lo.min(wi)));
            }
            if i != j && c_hi > 0.0 {
                out.push((xj, c_hi.min(wj)));
            }
            return Ok(Measure::from_atoms(out));
        }
    }
    Err(Error::NoSolution(format!(
        "no central interval of mass {alpha} matches the barycenter"
    )))
}

/// Witness of a failed secant-monotonicity check: the grid triple and the
/// two difference quotients that are not in convex-stochastic order.
#[derive(Debug, Clone)]
pub struct CsConvexWitness {
    pub triple: (f64, f64, f64),
    pub left_quotient: Measure,
    pub right_quotient: Measure,
}

/// Check `(ν^{α₂}-ν^{α₁})/(α₂-α₁) <=_{c,s} (ν^{α₃}-ν^{α₂})/(α₃-α₂)` over all
/// consecutive grid triples. Consecutive triples suffice: secant slopes along
/// a grid increase globally iff they increase locally.
pub fn check_cs_convex(
    param: &Parametrization,
    grid: &[f64],
) -> Result<(bool, Option<CsConvexWitness>)> {
    if grid.len() < 3 {
        return Err(Error::InvalidParametrization(
            "cs-convexity needs at least 3 grid points".to_string(),
        ));
    }
    for w in grid.windows(3) {
        let (a1, a2, a3) = (w[0], w[1], w[2]);
        let nu1 = param.at_alpha(a1)?;
        let nu2 = param.at_alpha(a2)?;
        let nu3 = param.at_alpha(a3)?;
        let left = nu2.subtract(&nu1)?.scale(1.0 / (a2 - a1));
        let right = nu3.subtract(&nu2)?.scale(1.0 / (a3 - a2));
        if !check_cs_order(&left, &right) {
            return Ok((
                false,
                Some(CsConvexWitness {
                    triple: (a1, a2, a3),
                    left_quotient: left,
                    right_quotient: right,
                }),
            ));
        }
    }
    Ok((true, None))
}

/// Restriction of the base to an interval stop, with boundary atoms split
/// fractionally so the mass is exactly the stop's alpha. When both
/// endpoints carry atoms the split preserving `moment = α·barycenter(base)`
/// is preferred (clamped to feasibility), so that symmetric interval
/// families reproduce the middle curtain.
fn restrict_to_mass(base: &Measure, stop: &IntervalStop, target: f64) -> Measure {
    let inner = base.restrict(stop.lo, stop.hi);
    let excess = inner.mass() - target;
    if excess <= 0.0 {
        return inner;
    }
    let mut atoms: Vec<(f64, f64)> = inner.atoms().to_vec();
    let w_lo = inner.weight_at(stop.lo);
    let w_hi = if tol::same_position(stop.lo, stop.hi) {
        0.0
    } else {
        inner.weight_at(stop.hi)
    };
    let (r_lo, r_hi) = if w_hi == 0.0 {
        (excess.min(w_lo), (excess - w_lo).max(0.0))
    } else if w_lo == 0.0 {
        (0.0, excess.min(w_hi))
    } else {
        let bary = base.first_moment() / base.mass();
        let moment_to_remove = inner.first_moment() - target * bary;
        let r_hi = (moment_to_remove - excess * stop.lo) / (stop.hi - stop.lo);
        let r_hi = r_hi.clamp((excess - w_lo).max(0.0), w_hi.min(excess));
        (excess - r_hi, r_hi)
    };
    for a in atoms.iter_mut() {
        if tol::same_position(a.0, stop.lo) {
            a.1 -= r_lo.min(a.1);
        } else if tol::same_position(a.0, stop.hi) {
            a.1 -= r_hi.min(a.1);
        }
    }
    Measure::from_atoms(atoms)
}
