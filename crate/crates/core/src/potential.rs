//! Piecewise-linear function algebra: potential functions of atomic
//! measures, their inversion back to measures, lower convex envelopes, and
//! pointwise suprema / convex infima.
//!
//! A potential function `U(µ)(x) = ∫ |y-x| dµ(y)` of an atomic measure is
//! piecewise linear and convex with a kink of slope jump `2w` at every atom
//! `w δ_x`, and asymptotic slopes `∓mass`. Every operation here is exact on
//! breakpoints, which is what makes the shadow computation exact.

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::tol;

/// Slope changes below this are treated as collinear and removed.
const COLLINEAR_EPS: f64 = 1e-13;

/// A piecewise-linear function on ℝ: finitely many breakpoints plus affine
/// rays on both sides. No convexity assumed.
#[derive(Debug, Clone, PartialEq)]
pub struct PlFunction {
    /// Sorted breakpoints `(x, value)`.
    pub points: Vec<(f64, f64)>,
    /// Slope on `(-∞, x_first]`.
    pub left_slope: f64,
    /// Slope on `[x_last, ∞)`.
    pub right_slope: f64,
}

/// A convex piecewise-linear function (non-decreasing segment slopes,
/// including the outer rays). Produced only through validated constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialFn {
    inner: PlFunction,
}

impl PlFunction {
    pub fn eval(&self, x: f64) -> f64 {
        if self.points.is_empty() {
            // affine-free degenerate case: identically zero
            return 0.0;
        }
        let first = self.points[0];
        let last = *self.points.last().unwrap();
        if x <= first.0 {
            return first.1 + self.left_slope * (x - first.0);
        }
        if x >= last.0 {
            return last.1 + self.right_slope * (x - last.0);
        }
        let i = self.points.partition_point(|p| p.0 <= x);
        let (x0, y0) = self.points[i - 1];
        let (x1, y1) = self.points[i];
        y0 + (y1 - y0) / (x1 - x0) * (x - x0)
    }

    /// Slopes of all segments from left ray to right ray.
    fn slopes(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.points.len() + 1);
        s.push(self.left_slope);
        for w in self.points.windows(2) {
            s.push((w[1].1 - w[0].1) / (w[1].0 - w[0].0));
        }
        s.push(self.right_slope);
        s
    }

    /// Drop breakpoints that do not change the slope.
    fn dedup_collinear(&mut self) {
        if self.points.len() < 2 {
            return;
        }
        let mut kept: Vec<(f64, f64)> = Vec::with_capacity(self.points.len());
        for &p in &self.points {
            while kept.len() >= 2 {
                let a = kept[kept.len() - 2];
                let b = kept[kept.len() - 1];
                let s0 = (b.1 - a.1) / (b.0 - a.0);
                let s1 = (p.1 - b.1) / (p.0 - b.0);
                if (s1 - s0).abs() < COLLINEAR_EPS {
                    kept.pop();
                } else {
                    break;
                }
            }
            kept.push(p);
        }
        // outer points collinear with the rays are also redundant
        while kept.len() >= 2 {
            let a = kept[0];
            let b = kept[1];
            if ((b.1 - a.1) / (b.0 - a.0) - self.left_slope).abs() < COLLINEAR_EPS {
                kept.remove(0);
            } else {
                break;
            }
        }
        while kept.len() >= 2 {
            let a = kept[kept.len() - 2];
            let b = kept[kept.len() - 1];
            if ((b.1 - a.1) / (b.0 - a.0) - self.right_slope).abs() < COLLINEAR_EPS {
                kept.pop();
            } else {
                break;
            }
        }
        self.points = kept;
    }

    /// Breakpoints as `x,value` CSV lines (debug aid).
    pub fn breakpoints_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (x, v) in &self.points {
            out.push_str(&format!("{x},{v}\n"));
        }
        out
    }
}

impl PotentialFn {
    /// Validate convexity and wrap. Tiny slope decreases (rounding noise)
    /// are tolerated; anything beyond the global tolerance is rejected.
    pub fn try_new(f: PlFunction) -> Result<Self> {
        let slopes = f.slopes();
        for w in slopes.windows(2) {
            if w[1] < w[0] - tol::tolerance() {
                return Err(Error::NotAPotential(format!(
                    "slope decreases from {} to {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(PotentialFn { inner: f })
    }

    pub fn as_pl(&self) -> &PlFunction {
        &self.inner
    }

    pub fn into_pl(self) -> PlFunction {
        self.inner
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    pub fn left_slope(&self) -> f64 {
        self.inner.left_slope
    }

    pub fn right_slope(&self) -> f64 {
        self.inner.right_slope
    }

    pub fn kinks(&self) -> &[(f64, f64)] {
        &self.inner.points
    }

    pub fn breakpoints_csv(&self) -> String {
        self.inner.breakpoints_csv()
    }
}

/// Exact potential function of an atomic measure: kinks at the support,
/// slope jump `2w` per atom, asymptotic slopes `∓mass`. Values come from a
/// single prefix-sum sweep.
pub fn potential_of(m: &Measure) -> PotentialFn {
    let mass = m.mass();
    let moment = m.first_moment();
    let mut points = Vec::with_capacity(m.atoms().len());
    let mut w_below = 0.0;
    let mut s_below = 0.0;
    for &(x, w) in m.atoms() {
        let w_above = mass - w_below - w;
        let s_above = moment - s_below - x * w;
        points.push((x, (x * w_below - s_below) + (s_above - x * w_above)));
        w_below += w;
        s_below += x * w;
    }
    PotentialFn {
        inner: PlFunction {
            points,
            left_slope: -mass,
            right_slope: mass,
        },
    }
}

/// Invert a potential function: an atom of weight `jump/2` at every kink.
///
/// Requires the asymptotics of a potential: `left_slope = -right_slope <= 0`
/// and the two asymptote rays meeting the same absolute-value cone, i.e.
/// `u(x_first) + m·x_first = m·x_last - u(x_last)` (both equal the first
/// moment).
pub fn measure_of(u: &PotentialFn) -> Result<Measure> {
    let f = &u.inner;
    let m = f.right_slope;
    if m < -tol::tolerance() {
        return Err(Error::NotAPotential(format!("right slope {m} < 0")));
    }
    if (f.left_slope + m).abs() > tol::tolerance() {
        return Err(Error::NotAPotential(format!(
            "asymptotic slopes {} and {} are not opposite",
            f.left_slope, f.right_slope
        )));
    }
    if f.points.is_empty() {
        if m.abs() > tol::tolerance() {
            return Err(Error::NotAPotential(
                "nonzero mass with no kinks".to_string(),
            ));
        }
        return Ok(Measure::zero());
    }
    let (x1, u1) = f.points[0];
    let (xn, un) = *f.points.last().unwrap();
    // first-moment identity of the two asymptote rays
    if ((u1 + m * x1) - (m * xn - un)).abs() > tol::tolerance() * (1.0 + m + xn.abs() + x1.abs()) {
        return Err(Error::NotAPotential(format!(
            "asymptote rays disagree: {} vs {}",
            u1 + m * x1,
            m * xn - un
        )));
    }
    for &(_, v) in &f.points {
        if v < -tol::tolerance() {
            return Err(Error::NotAPotential(format!("negative value {v}")));
        }
    }
    let slopes = f.slopes();
    let mut atoms = Vec::with_capacity(f.points.len());
    for (i, &(x, _)) in f.points.iter().enumerate() {
        let jump = slopes[i + 1] - slopes[i];
        if jump < -tol::tolerance() {
            return Err(Error::NotAPotential(format!(
                "slope decreases by {jump} at {x}"
            )));
        }
        let w = jump / 2.0;
        if w > tol::WEIGHT_DROP {
            atoms.push((x, w));
        }
    }
    Ok(Measure::from_atoms(atoms))
}

/// Difference `a - b` on the merged breakpoint grid.
pub fn pl_sub(a: &PlFunction, b: &PlFunction) -> PlFunction {
    let xs = merged_xs(a, b);
    let points = xs.iter().map(|&x| (x, a.eval(x) - b.eval(x))).collect();
    let mut out = PlFunction {
        points,
        left_slope: a.left_slope - b.left_slope,
        right_slope: a.right_slope - b.right_slope,
    };
    out.dedup_collinear();
    out
}

fn merged_xs(a: &PlFunction, b: &PlFunction) -> Vec<f64> {
    let mut xs: Vec<f64> = a
        .points
        .iter()
        .chain(b.points.iter())
        .map(|p| p.0)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|x, y| tol::same_position(*x, *y));
    xs
}

/// Greatest convex function below `f` with the same asymptotic slopes.
///
/// Any affine minorant of `f` has slope in `[left_slope, right_slope]` and
/// is constrained only at the breakpoints, so the envelope is the lower
/// convex hull of the breakpoints with the outer slopes re-imposed: vertices
/// left of the touch point of the `left_slope` ray (the argmin of
/// `value - left_slope·x`) are cut away, symmetrically on the right.
pub fn lower_convex_envelope(f: &PlFunction) -> Result<PlFunction> {
    if f.left_slope > f.right_slope + tol::tolerance() {
        return Err(Error::NoConvexMinorant {
            left: f.left_slope,
            right: f.right_slope,
        });
    }
    // slopes may cross by rounding when the input masses agree; reorder
    let (s_left, s_right) = if f.left_slope <= f.right_slope {
        (f.left_slope, f.right_slope)
    } else {
        (f.right_slope, f.left_slope)
    };
    if f.points.is_empty() {
        return Ok(PlFunction {
            points: Vec::new(),
            left_slope: s_left,
            right_slope: s_right,
        });
    }

    // lower hull, monotone chain
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(f.points.len());
    for &p in &f.points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // pop b unless it makes a strict convex turn
            if (b.1 - a.1) * (p.0 - b.0) >= (p.1 - b.1) * (b.0 - a.0) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    // leftmost minimizer of value - sL·x: entry vertex of the left ray
    let mut j = 0;
    for (i, &(x, v)) in hull.iter().enumerate() {
        if v - s_left * x < hull[j].1 - s_left * hull[j].0 {
            j = i;
        }
    }
    // rightmost minimizer of value - sR·x: exit vertex of the right ray
    let mut k = 0;
    for (i, &(x, v)) in hull.iter().enumerate() {
        if v - s_right * x <= hull[k].1 - s_right * hull[k].0 {
            k = i;
        }
    }
    let k = k.max(j);

    let mut out = PlFunction {
        points: hull[j..=k].to_vec(),
        left_slope: s_left,
        right_slope: s_right,
    };
    out.dedup_collinear();
    Ok(out)
}

fn combine(a: &PlFunction, b: &PlFunction, take_max: bool) -> PlFunction {
    let xs = merged_xs(a, b);
    let pick = |x: f64| {
        let (fa, fb) = (a.eval(x), b.eval(x));
        if take_max {
            fa.max(fb)
        } else {
            fa.min(fb)
        }
    };
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(xs.len() + 4);
    for i in 0..xs.len() {
        let x = xs[i];
        points.push((x, pick(x)));
        if i + 1 < xs.len() {
            // insert the crossing of the two graphs if they swap order
            let x1 = xs[i + 1];
            let d0 = a.eval(x) - b.eval(x);
            let d1 = a.eval(x1) - b.eval(x1);
            if d0 * d1 < 0.0 {
                let xc = x + (x1 - x) * d0 / (d0 - d1);
                if !tol::same_position(xc, x) && !tol::same_position(xc, x1) {
                    points.push((xc, pick(xc)));
                }
            }
        }
    }
    let mut out = PlFunction {
        points,
        left_slope: a.left_slope,
        right_slope: a.right_slope,
    };
    out.dedup_collinear();
    out
}

fn check_common_asymptotics(measures: &[Measure]) -> Result<(f64, f64)> {
    let first = measures
        .first()
        .ok_or_else(|| Error::BadSpec("empty measure list".to_string()))?;
    let (mass, moment) = (first.mass(), first.first_moment());
    for m in measures {
        if !tol::eq(m.mass(), mass) || !tol::eq(m.first_moment(), moment) {
            return Err(Error::AsymptoticMismatch);
        }
    }
    Ok((mass, moment))
}

/// Pointwise supremum of potential functions sharing asymptotics.
pub fn pointwise_sup(us: &[PotentialFn]) -> Result<PotentialFn> {
    let first = us
        .first()
        .ok_or_else(|| Error::BadSpec("empty potential list".to_string()))?;
    for u in us {
        if !tol::eq(u.left_slope(), first.left_slope())
            || !tol::eq(u.right_slope(), first.right_slope())
        {
            return Err(Error::AsymptoticMismatch);
        }
    }
    let folded = us[1..]
        .iter()
        .fold(first.inner.clone(), |acc, u| combine(&acc, &u.inner, true));
    PotentialFn::try_new(folded)
}

/// Convex hull of the pointwise infimum of potential functions sharing
/// asymptotics.
pub fn pointwise_inf_then_envelope(us: &[PotentialFn]) -> Result<PotentialFn> {
    let first = us
        .first()
        .ok_or_else(|| Error::BadSpec("empty potential list".to_string()))?;
    for u in us {
        if !tol::eq(u.left_slope(), first.left_slope())
            || !tol::eq(u.right_slope(), first.right_slope())
        {
            return Err(Error::AsymptoticMismatch);
        }
    }
    let folded = us[1..]
        .iter()
        .fold(first.inner.clone(), |acc, u| combine(&acc, &u.inner, false));
    PotentialFn::try_new(lower_convex_envelope(&folded)?)
}

/// Convex supremum of measures with equal mass and first moment.
pub fn csup(measures: &[Measure]) -> Result<Measure> {
    check_common_asymptotics(measures)?;
    let us: Vec<PotentialFn> = measures.iter().map(potential_of).collect();
    measure_of(&pointwise_sup(&us)?)
}

/// Convex infimum of measures with equal mass and first moment.
pub fn cinf(measures: &[Measure]) -> Result<Measure> {
    check_common_asymptotics(measures)?;
    let us: Vec<PotentialFn> = measures.iter().map(potential_of).collect();
    measure_of(&pointwise_inf_then_envelope(&us)?)
}
