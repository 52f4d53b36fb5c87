//! Finite nonnegative atomic measures on the real line and the four order
//! relations used throughout the crate: positive (`<=_+`), convex (`<=_c`),
//! convex-positive (`<=_{c,+}`) and convex-stochastic (`<=_{c,s}`).
//!
//! All orders are decided exactly for atomic measures: the test-function
//! cones are generated by `(y-k)^+`, `(k-y)^+` and constants, and the
//! resulting integral inequalities are piecewise linear in `k` with kinks
//! only at support points, so checking the merged support suffices.

use crate::error::{Error, Result};
use crate::tol;
use serde::{Deserialize, Serialize};

/// A finite nonnegative measure on ℝ with finite atomic support.
///
/// Atoms are kept sorted by position with strictly positive weights.
/// Positions closer than [`tol::POSITION_MERGE`] are merged on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct Measure {
    atoms: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    atoms: Vec<AtomJson>,
}

#[derive(Serialize, Deserialize)]
struct AtomJson {
    x: f64,
    w: f64,
}

impl From<Measure> for MeasureJson {
    fn from(m: Measure) -> Self {
        MeasureJson {
            atoms: m.atoms.into_iter().map(|(x, w)| AtomJson { x, w }).collect(),
        }
    }
}

impl TryFrom<MeasureJson> for Measure {
    type Error = String;
    fn try_from(j: MeasureJson) -> std::result::Result<Self, String> {
        for a in &j.atoms {
            if !a.x.is_finite() || !a.w.is_finite() {
                return Err("non-finite atom".to_string());
            }
            if a.w < -tol::tolerance() {
                return Err(format!("negative weight {} at {}", a.w, a.x));
            }
        }
        Ok(Measure::from_atoms(
            j.atoms.into_iter().map(|a| (a.x, a.w)).collect(),
        ))
    }
}

impl Measure {
    /// The zero measure.
    pub fn zero() -> Self {
        Measure { atoms: Vec::new() }
    }

    /// Single atom `w δ_x`.
    pub fn dirac(x: f64, w: f64) -> Self {
        Measure::from_atoms(vec![(x, w)])
    }

    /// Build from arbitrary (position, weight) pairs: sorts, merges
    /// positions closer than the merge scale, drops nonpositive weights.
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.retain(|&(_, w)| w > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if tol::same_position(last.0, x) => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        Measure { atoms: merged }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Support positions (weights are all positive).
    pub fn support(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.0).collect()
    }

    /// Total mass.
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// First moment `Σ w·x` (unnormalized).
    pub fn first_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.0 * a.1).sum()
    }

    /// Normalized barycenter; `None` for (numerically) zero mass.
    pub fn barycenter(&self) -> Option<f64> {
        let m = self.mass();
        if m <= tol::tolerance() {
            None
        } else {
            Some(self.first_moment() / m)
        }
    }

    /// Weight at position `x` (0 if `x` is not a support point).
    pub fn weight_at(&self, x: f64) -> f64 {
        match self
            .atoms
            .binary_search_by(|a| a.0.total_cmp(&x))
        {
            Ok(i) => self.atoms[i].1,
            Err(i) => {
                // positions within the merge scale count as equal
                if i < self.atoms.len() && tol::same_position(self.atoms[i].0, x) {
                    self.atoms[i].1
                } else if i > 0 && tol::same_position(self.atoms[i - 1].0, x) {
                    self.atoms[i - 1].1
                } else {
                    0.0
                }
            }
        }
    }

    /// Right-continuous cumulative distribution function `F(x) = m((-∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.0 <= x || tol::same_position(a.0, x))
            .map(|a| a.1)
            .sum()
    }

    /// Generalized inverse `inf { x : F(x) >= level }` for `0 < level <= mass`.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        let m = self.mass();
        if !(level > 0.0 && level <= m + tol::tolerance()) {
            return Err(Error::QuantileOutOfRange { level, mass: m });
        }
        let mut cum = 0.0;
        for &(x, w) in &self.atoms {
            cum += w;
            if cum >= level - tol::tolerance() {
                return Ok(x);
            }
        }
        // level within tolerance above total mass: last atom
        Ok(self.atoms.last().expect("mass > 0 implies atoms").0)
    }

    /// `∫ (y-k)^+ dm` — the "call" integral, exact.
    pub fn call_integral(&self, k: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(x, w)| w * (x - k).max(0.0))
            .sum()
    }

    /// `∫ (k-y)^+ dm` — the "put" integral, exact.
    pub fn put_integral(&self, k: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(x, w)| w * (k - x).max(0.0))
            .sum()
    }

    /// `∫ |y-k| dm`, the potential function value at `k`.
    pub fn potential_at(&self, k: f64) -> f64 {
        self.atoms.iter().map(|&(x, w)| w * (x - k).abs()).sum()
    }

    /// Sum of two measures.
    pub fn add(&self, other: &Measure) -> Measure {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        Measure::from_atoms(atoms)
    }

    /// Scale by `c >= 0`.
    pub fn scale(&self, c: f64) -> Measure {
        assert!(c >= 0.0, "scale factor must be nonnegative");
        if c == 0.0 {
            return Measure::zero();
        }
        Measure {
            atoms: self.atoms.iter().map(|&(x, w)| (x, w * c)).collect(),
        }
    }

    /// `self - other`, requiring `other <=_+ self` up to tolerance.
    /// Weights in `(-tol, dust]` are clamped to zero; anything below `-tol`
    /// is an error reporting the worst offending position.
    pub fn subtract(&self, other: &Measure) -> Result<Measure> {
        let support = merged_support(self, other);
        let mut atoms = Vec::with_capacity(support.len());
        let mut worst: Option<(f64, f64)> = None;
        for x in support {
            let w = self.weight_at(x) - other.weight_at(x);
            if w < -tol::tolerance() {
                let deficit = -w;
                if worst.is_none_or(|(_, d)| deficit > d) {
                    worst = Some((x, deficit));
                }
            } else if w > tol::WEIGHT_DUST {
                atoms.push((x, w));
            }
        }
        if let Some((position, deficit)) = worst {
            return Err(Error::NotASubmeasure { position, deficit });
        }
        Ok(Measure::from_atoms(atoms))
    }

    /// Normalize to a probability measure (no-op on zero measures).
    pub fn normalize(&self) -> Measure {
        match self.mass() {
            m if m > 0.0 => self.scale(1.0 / m),
            _ => self.clone(),
        }
    }

    /// Restriction to the closed interval `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Measure {
        Measure {
            atoms: self
                .atoms
                .iter()
                .filter(|&&(x, _)| {
                    (x >= lo || tol::same_position(x, lo)) && (x <= hi || tol::same_position(x, hi))
                })
                .copied()
                .collect(),
        }
    }

    /// Largest atomwise deviation on the merged support.
    pub fn max_deviation(&self, other: &Measure) -> f64 {
        merged_support(self, other)
            .into_iter()
            .map(|x| (self.weight_at(x) - other.weight_at(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Atomwise equality up to the global tolerance.
    pub fn approx_eq(&self, other: &Measure) -> bool {
        self.max_deviation(other) <= tol::tolerance()
    }
}

/// Union of both supports with near-identical positions collapsed.
pub fn merged_support(a: &Measure, b: &Measure) -> Vec<f64> {
    let mut xs: Vec<f64> = a
        .atoms
        .iter()
        .chain(b.atoms.iter())
        .map(|&(x, _)| x)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|x, y| tol::same_position(*x, *y));
    xs
}

/// `∫ (y-k)^+ dm` at every point of a sorted query grid, in one suffix
/// sweep.
pub(crate) fn call_integrals_sorted(m: &Measure, ks: &[f64]) -> Vec<f64> {
    let n = m.atoms.len();
    let mut suff_w = vec![0.0; n + 1];
    let mut suff_s = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suff_w[i] = suff_w[i + 1] + m.atoms[i].1;
        suff_s[i] = suff_s[i + 1] + m.atoms[i].0 * m.atoms[i].1;
    }
    let mut idx = 0usize; // first atom with x > k
    ks.iter()
        .map(|&k| {
            while idx < n && m.atoms[idx].0 <= k {
                idx += 1;
            }
            suff_s[idx] - k * suff_w[idx]
        })
        .collect()
}

/// `∫ (k-y)^+ dm` at every point of a sorted query grid.
pub(crate) fn put_integrals_sorted(m: &Measure, ks: &[f64]) -> Vec<f64> {
    let n = m.atoms.len();
    let mut pref_w = vec![0.0; n + 1];
    let mut pref_s = vec![0.0; n + 1];
    for i in 0..n {
        pref_w[i + 1] = pref_w[i] + m.atoms[i].1;
        pref_s[i + 1] = pref_s[i] + m.atoms[i].0 * m.atoms[i].1;
    }
    let mut idx = 0usize; // count of atoms with x < k
    ks.iter()
        .map(|&k| {
            while idx < n && m.atoms[idx].0 < k {
                idx += 1;
            }
            k * pref_w[idx] - pref_s[idx]
        })
        .collect()
}

/// Positive order `ν <=_+ µ`: atomwise domination.
pub fn check_positive_order(nu: &Measure, mu: &Measure) -> bool {
    nu.atoms
        .iter()
        .all(|&(x, w)| w <= mu.weight_at(x) + tol::tolerance())
}

/// Convex order `ν <=_c µ`: equal mass and first moment, and the potential
/// of ν below the potential of µ on the merged support. With equal mass and
/// moment the potential comparison reduces to the call integrals.
pub fn check_convex_order(nu: &Measure, mu: &Measure) -> bool {
    if !tol::eq(nu.mass(), mu.mass()) || !tol::eq(nu.first_moment(), mu.first_moment()) {
        return false;
    }
    let ks = merged_support(nu, mu);
    let cn = call_integrals_sorted(nu, &ks);
    let cm = call_integrals_sorted(mu, &ks);
    cn.iter().zip(&cm).all(|(a, b)| *a <= *b + tol::tolerance())
}

/// Convex-stochastic order `ν <=_{c,s} µ`: integral inequality for
/// increasing convex test functions. Equal masses (constants are increasing
/// convex in both signs), call integrals dominated at every merged support
/// point, and the `k → -∞` limit, i.e. first moment of ν at most that of µ.
pub fn check_cs_order(nu: &Measure, mu: &Measure) -> bool {
    if !tol::eq(nu.mass(), mu.mass()) {
        return false;
    }
    if nu.first_moment() > mu.first_moment() + tol::tolerance() {
        return false;
    }
    let ks = merged_support(nu, mu);
    let cn = call_integrals_sorted(nu, &ks);
    let cm = call_integrals_sorted(mu, &ks);
    cn.iter().zip(&cm).all(|(a, b)| *a <= *b + tol::tolerance())
}

/// Convex-positive order `ν <=_{c,+} µ`: integral inequality for nonnegative
/// convex test functions. Mass at most, and both call and put integrals
/// dominated on the merged support.
pub fn check_c_plus_order(nu: &Measure, mu: &Measure) -> bool {
    if nu.mass() > mu.mass() + tol::tolerance() {
        return false;
    }
    let ks = merged_support(nu, mu);
    let cn = call_integrals_sorted(nu, &ks);
    let cm = call_integrals_sorted(mu, &ks);
    if !cn.iter().zip(&cm).all(|(a, b)| *a <= *b + tol::tolerance()) {
        return false;
    }
    let pn = put_integrals_sorted(nu, &ks);
    let pm = put_integrals_sorted(mu, &ks);
    pn.iter().zip(&pm).all(|(a, b)| *a <= *b + tol::tolerance())
}

/// Wasserstein-1 distance between measures of equal mass, computed exactly
/// as `∫ |F_a - F_b| dx` over the merged breakpoint grid.
pub fn w1_distance(a: &Measure, b: &Measure) -> Result<f64> {
    if !tol::eq(a.mass(), b.mass()) {
        return Err(Error::MassMismatch {
            left: a.mass(),
            right: b.mass(),
        });
    }
    let xs = merged_support(a, b);
    if xs.len() < 2 {
        return Ok(0.0);
    }
    let mut fa = 0.0;
    let mut fb = 0.0;
    let mut total = 0.0;
    for i in 0..xs.len() - 1 {
        fa += a.weight_at(xs[i]);
        fb += b.weight_at(xs[i]);
        total += (fa - fb).abs() * (xs[i + 1] - xs[i]);
    }
    Ok(total)
}
