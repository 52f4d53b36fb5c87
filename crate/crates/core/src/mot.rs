//! Brute-force oracles built on the LP solver: the shadow LP, one-step and
//! multi-step martingale optimal transport, MSM cost functions, and the
//! representation-identity check.

use crate::error::{Error, Result};
use crate::lp::{enumerate_vertices, lp_solve, LpProblem};
use crate::measure::{check_c_plus_order, check_convex_order, merged_support, Measure};
use crate::shadow::simple_shadow;
use crate::tol;
use serde::{Deserialize, Serialize};

/// A coupling of two atomic measures: weights on `xs × ys`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coupling {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

impl Coupling {
    pub fn row_sums(&self) -> Vec<f64> {
        self.w.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.ys.len())
            .map(|j| self.w.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// Max conditional-barycenter error `|Σ_j w_ij (y_j - x_i)|` over rows.
    pub fn martingale_error(&self) -> f64 {
        self.xs
            .iter()
            .zip(&self.w)
            .map(|(&x, row)| {
                row.iter()
                    .zip(&self.ys)
                    .map(|(&w, &y)| w * (y - x))
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_martingale(&self) -> bool {
        self.martingale_error() <= tol::tolerance()
    }

    pub fn cost_expectation(&self, cost: impl Fn(f64, f64) -> f64) -> f64 {
        self.xs
            .iter()
            .zip(&self.w)
            .map(|(&x, row)| {
                row.iter()
                    .zip(&self.ys)
                    .map(|(&w, &y)| w * cost(x, y))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// `E[ 1_{X₀ <= u} (v - X_t)^+ ]` under a coupling.
pub fn c_uv_expectation(cpl: &Coupling, u: f64, v: f64) -> f64 {
    cpl.cost_expectation(|x, y| if x <= u { (v - y).max(0.0) } else { 0.0 })
}

/// LP oracle for the shadow: minimize the strictly convex integral
/// `∫ √(1+y²) dη` over `{ η : ν <=_c η <=_+ µ }` on the support of `µ`.
/// Convex-order minimality pins the optimum to the shadow, and strict
/// convexity makes the minimizer unique.
pub fn brute_force_shadow(nu: &Measure, mu: &Measure) -> Result<Measure> {
    if nu.is_zero() {
        return Ok(Measure::zero());
    }
    if !check_c_plus_order(nu, mu) {
        return Err(Error::OrderViolation {
            relation: "nu <=_{c,+} mu",
            chain_index: None,
        });
    }
    let ys: Vec<f64> = mu.support();
    let n = ys.len();
    let objective: Vec<f64> = ys.iter().map(|&y| (1.0 + y * y).sqrt()).collect();
    let mut p = LpProblem::new(objective);
    // 0 <= η <= µ atomwise
    for (j, &(_, w)) in mu.atoms().iter().enumerate() {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        p.le.push((row, w));
    }
    // mass and first moment pinned to ν
    p.eq.push((vec![1.0; n], nu.mass()));
    p.eq.push((ys.clone(), nu.first_moment()));
    // U(η)(k) >= U(ν)(k) on the merged support
    for k in merged_support(nu, mu) {
        let row: Vec<f64> = ys.iter().map(|&y| (y - k).abs()).collect();
        p.ge.push((row, nu.potential_at(k)));
    }
    let sol = lp_solve(&p)?;
    Ok(Measure::from_atoms(
        ys.into_iter().zip(sol.x).filter(|&(_, w)| w > 1e-12).collect(),
    ))
}

/// Catalogue of cost functions for martingale optimal transport.
///
/// `Cubic` and `TanhSqrt` are martingale Spence-Mirrlees costs
/// (`∂₁₂₂c < 0`); `ExpDiff` has `∂₁₂₂c > 0` and serves as the sign-flipped
/// negative control. `Grid` evaluates a tabulated cost bilinearly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MsmCost {
    Cubic,
    TanhSqrt,
    ExpDiff,
    Grid {
        xs: Vec<f64>,
        ys: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl MsmCost {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            MsmCost::Cubic => (y - x).powi(3),
            MsmCost::TanhSqrt => (-x).tanh() * (1.0 + y * y).sqrt(),
            MsmCost::ExpDiff => (x - y).exp(),
            MsmCost::Grid { xs, ys, values } => bilinear(xs, ys, values, x, y),
        }
    }

    /// The catalogue entries that satisfy the MSM sign condition.
    pub fn is_msm(&self) -> bool {
        matches!(self, MsmCost::Cubic | MsmCost::TanhSqrt)
    }
}

fn bilinear(xs: &[f64], ys: &[f64], values: &[Vec<f64>], x: f64, y: f64) -> f64 {
    let clamp_idx = |g: &[f64], v: f64| -> (usize, f64) {
        if v <= g[0] {
            return (0, 0.0);
        }
        if v >= g[g.len() - 1] {
            return (g.len() - 2, 1.0);
        }
        let i = g.partition_point(|&p| p <= v).min(g.len() - 1) - 1;
        (i, (v - g[i]) / (g[i + 1] - g[i]))
    };
    let (i, s) = clamp_idx(xs, x);
    let (j, t) = clamp_idx(ys, y);
    let f00 = values[i][j];
    let f01 = values[i][j + 1];
    let f10 = values[i + 1][j];
    let f11 = values[i + 1][j + 1];
    f00 * (1.0 - s) * (1.0 - t) + f10 * s * (1.0 - t) + f01 * (1.0 - s) * t + f11 * s * t
}

/// Discrete MSM probe: the mixed difference `Δ_x Δ²_y c` on every cell of a
/// grid over `[-b, b]²`; returns the largest value (MSM costs stay < 0).
pub fn mixed_difference_max(cost: &MsmCost, b: f64, n: usize) -> f64 {
    let h = 2.0 * b / n as f64;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 1..n {
            let u = -b + i as f64 * h;
            let v = -b + j as f64 * h;
            let d2 = |x: f64| cost.eval(x, v + h) - 2.0 * cost.eval(x, v) + cost.eval(x, v - h);
            worst = worst.max(d2(u + h) - d2(u));
        }
    }
    worst
}

/// Two-marginal martingale optimal transport by LP: minimize
/// `E[c(X₀, X₁)]` over couplings with the given marginals and conditional
/// barycenters. Infeasibility is equivalent to failure of the convex order.
pub fn mot_lp(mu0: &Measure, mu1: &Measure, cost: &MsmCost) -> Result<(f64, Coupling)> {
    mot_lp_with(mu0, mu1, |x, y| cost.eval(x, y))
}

/// As [`mot_lp`] with an arbitrary cost function.
pub fn mot_lp_with(
    mu0: &Measure,
    mu1: &Measure,
    cost: impl Fn(f64, f64) -> f64,
) -> Result<(f64, Coupling)> {
    let (a, b) = (mot_constraints(mu0, mu1), mot_rhs(mu0, mu1));
    let xs = mu0.support();
    let ys = mu1.support();
    let (n0, n1) = (xs.len(), ys.len());
    let mut objective = Vec::with_capacity(n0 * n1);
    for &x in &xs {
        for &y in &ys {
            objective.push(cost(x, y));
        }
    }
    let mut p = LpProblem::new(objective);
    p.eq = a.into_iter().zip(b).collect();
    let sol = lp_solve(&p)?;
    let w: Vec<Vec<f64>> = (0..n0)
        .map(|i| sol.x[i * n1..(i + 1) * n1].to_vec())
        .collect();
    Ok((sol.value, Coupling { xs, ys, w }))
}

/// Equality rows of the two-marginal martingale polytope, in the variable
/// order `w[i][j] -> i * n1 + j`.
fn mot_constraints(mu0: &Measure, mu1: &Measure) -> Vec<Vec<f64>> {
    let xs = mu0.support();
    let ys = mu1.support();
    let (n0, n1) = (xs.len(), ys.len());
    let nv = n0 * n1;
    let mut rows = Vec::with_capacity(2 * n0 + n1);
    for i in 0..n0 {
        let mut row = vec![0.0; nv];
        for j in 0..n1 {
            row[i * n1 + j] = 1.0;
        }
        rows.push(row);
    }
    for j in 0..n1 {
        let mut row = vec![0.0; nv];
        for i in 0..n0 {
            row[i * n1 + j] = 1.0;
        }
        rows.push(row);
    }
    for (i, &x) in xs.iter().enumerate() {
        let mut row = vec![0.0; nv];
        for (j, &y) in ys.iter().enumerate() {
            row[i * n1 + j] = y - x;
        }
        rows.push(row);
    }
    rows
}

fn mot_rhs(mu0: &Measure, mu1: &Measure) -> Vec<f64> {
    let mut rhs: Vec<f64> = mu0.atoms().iter().map(|a| a.1).collect();
    rhs.extend(mu1.atoms().iter().map(|a| a.1));
    rhs.extend(std::iter::repeat_n(0.0, mu0.atoms().len()));
    rhs
}

/// All vertices of the two-marginal martingale polytope (tiny supports).
pub fn martingale_polytope_vertices(mu0: &Measure, mu1: &Measure) -> Result<Vec<Coupling>> {
    let a = mot_constraints(mu0, mu1);
    let b = mot_rhs(mu0, mu1);
    let xs = mu0.support();
    let ys = mu1.support();
    let n1 = ys.len();
    let vertices = enumerate_vertices(&a, &b)?;
    Ok(vertices
        .into_iter()
        .map(|x| Coupling {
            xs: xs.clone(),
            ys: ys.clone(),
            w: (0..xs.len())
                .map(|i| x[i * n1..(i + 1) * n1].to_vec())
                .collect(),
        })
        .collect())
}

/// The left-curtain shadow coupling of two marginals: quantile slices of
/// `µ₀` transported onto their incremental shadows in `µ₁`.
pub fn left_curtain_coupling(mu0: &Measure, mu1: &Measure) -> Result<Coupling> {
    if !check_convex_order(mu0, mu1) {
        return Err(Error::OrderViolation {
            relation: "mu0 <=_c mu1",
            chain_index: None,
        });
    }
    let xs = mu0.support();
    let ys = mu1.support();
    let mut w = vec![vec![0.0; ys.len()]; xs.len()];
    let mut lower = Measure::zero();
    let mut prev_shadow = Measure::zero();
    for (i, &(x, wx)) in mu0.atoms().iter().enumerate() {
        lower = lower.add(&Measure::dirac(x, wx));
        let shadow = simple_shadow(&lower, mu1)?;
        let slice = shadow.subtract(&prev_shadow)?;
        for &(y, wy) in slice.atoms() {
            if let Some(j) = ys.iter().position(|&p| tol::same_position(p, y)) {
                w[i][j] += wy;
            }
        }
        prev_shadow = shadow;
    }
    Ok(Coupling { xs, ys, w })
}

/// A path law on the product of the marginal supports of a peacock.
#[derive(Debug, Clone)]
pub struct PathLaw {
    /// Support of each marginal, in time order.
    pub supports: Vec<Vec<f64>>,
    /// Weight per path, indexed like a mixed-radix counter over `supports`.
    pub weights: Vec<f64>,
}

impl PathLaw {
    pub fn path(&self, mut flat: usize) -> Vec<f64> {
        let mut idx = vec![0usize; self.supports.len()];
        for (k, s) in self.supports.iter().enumerate().rev() {
            idx[k] = flat % s.len();
            flat /= s.len();
        }
        idx.iter()
            .zip(&self.supports)
            .map(|(&i, s)| s[i])
            .collect()
    }

    /// Expectation of a functional of `(X₀, X_t)` for marginal index `t`.
    pub fn pair_expectation(&self, t: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let path = self.path(i);
                w * f(path[0], path[t])
            })
            .sum()
    }
}

const MULTISTEP_VAR_LIMIT: usize = 20_000;

/// Multi-step martingale optimal transport over full path measures:
/// minimize `E[c(X₀, X_{target})]` subject to all marginals and the
/// conditional martingale constraints given every prefix.
pub fn mot_lp_multistep(
    p: &crate::shadow::Peacock,
    cost: &MsmCost,
    target: usize,
) -> Result<(f64, PathLaw)> {
    let supports: Vec<Vec<f64>> = p.marginals().iter().map(Measure::support).collect();
    let sizes: Vec<usize> = supports.iter().map(Vec::len).collect();
    let nv: usize = sizes.iter().product();
    if nv > MULTISTEP_VAR_LIMIT {
        return Err(Error::SizeLimit {
            size: nv,
            limit: MULTISTEP_VAR_LIMIT,
        });
    }
    assert!(target < sizes.len(), "target time index out of range");

    let strides: Vec<usize> = {
        let mut s = vec![1usize; sizes.len()];
        for k in (0..sizes.len() - 1).rev() {
            s[k] = s[k + 1] * sizes[k + 1];
        }
        s
    };
    let coord = |flat: usize, k: usize| (flat / strides[k]) % sizes[k];

    let mut eq: Vec<(Vec<f64>, f64)> = Vec::new();
    // marginal constraints at every time
    for (k, marginal) in p.marginals().iter().enumerate() {
        for (a, &(_, wa)) in marginal.atoms().iter().enumerate() {
            let mut row = vec![0.0; nv];
            for (flat, r) in row.iter_mut().enumerate() {
                if coord(flat, k) == a {
                    *r = 1.0;
                }
            }
            eq.push((row, wa));
        }
    }
    // conditional martingale constraints per prefix cell
    for k in 0..sizes.len() - 1 {
        let prefix_count: usize = sizes[..=k].iter().product();
        for pc in 0..prefix_count {
            let mut row = vec![0.0; nv];
            let mut any = false;
            for (flat, r) in row.iter_mut().enumerate() {
                // prefix index of this path
                let mut pidx = 0usize;
                for (t, &sz) in sizes[..=k].iter().enumerate() {
                    pidx = pidx * sz + coord(flat, t);
                }
                if pidx == pc {
                    let x_k = supports[k][coord(flat, k)];
                    let x_next = supports[k + 1][coord(flat, k + 1)];
                    *r = x_next - x_k;
                    any = true;
                }
            }
            if any {
                eq.push((row, 0.0));
            }
        }
    }

    let mut objective = vec![0.0; nv];
    for (flat, o) in objective.iter_mut().enumerate() {
        let x0 = supports[0][coord(flat, 0)];
        let xt = supports[target][coord(flat, target)];
        *o = cost.eval(x0, xt);
    }

    let mut lp = LpProblem::new(objective);
    lp.eq = eq;
    let sol = lp_solve(&lp)?;
    Ok((
        sol.value,
        PathLaw {
            supports,
            weights: sol.x,
        },
    ))
}

/// Numerically verify the MSM representation identity: for probe points
/// `(x, y)` in `(-b, b)²`, compare `c(x, y)` against the boundary terms at
/// `(M, N) = (b, b)` plus the double integral of
/// `1_{x <= u} (v-y)^+ (-∂₁₂₂c(u,v))` over the box `[-b, M] × [-b, N]`.
///
/// Quadrature is midpoint on the fixed `n × n` box grid: `u`-cells are
/// clipped exactly at `x`, while the `(v-y)^+` kink stays inside its cell,
/// so the residual is a genuine O(h²) for every cost in the catalogue.
/// Derivatives use central finite differences with step tied to the grid.
/// Returns the largest absolute residual over the probe points.
pub fn msm_representation_check(cost: &MsmCost, b: f64, n: usize, probes: usize) -> f64 {
    let m_up = b;
    let n_up = b;
    let h = 2.0 * b / n as f64;
    let fd = h.max(1e-4);
    let d122 = |u: f64, v: f64| {
        let d2 = |x: f64| {
            (cost.eval(x, v + fd) - 2.0 * cost.eval(x, v) + cost.eval(x, v - fd)) / (fd * fd)
        };
        (d2(u + fd) - d2(u - fd)) / (2.0 * fd)
    };
    let mut worst = 0.0f64;
    for pi in 0..probes {
        for pj in 0..probes {
            let x = -b + (2.0 * b) * (pi as f64 + 0.5) / probes as f64;
            let y = -b + (2.0 * b) * (pj as f64 + 0.5) / probes as f64;
            let delta = |yy: f64| cost.eval(m_up, yy) - cost.eval(x, yy);
            let delta_prime = (delta(n_up + fd) - delta(n_up - fd)) / (2.0 * fd);
            let boundary = cost.eval(m_up, y) - delta(n_up) - (y - n_up) * delta_prime;

            let mut integral = 0.0;
            for iu in 0..n {
                let c0 = -b + iu as f64 * h;
                let c1 = c0 + h;
                let lo = c0.max(x);
                if lo >= c1 {
                    continue;
                }
                let width = c1 - lo;
                let u = (lo + c1) / 2.0;
                let mut col = 0.0;
                for iv in 0..n {
                    let v = -b + (iv as f64 + 0.5) * h;
                    let weight = (v - y).max(0.0);
                    if weight > 0.0 {
                        col += weight * (-d122(u, v));
                    }
                }
                integral += col * width * h;
            }
            let residual = (cost.eval(x, y) - boundary - integral).abs();
            worst = worst.max(residual);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(atoms: &[(f64, f64)]) -> Measure {
        Measure::from_atoms(atoms.to_vec())
    }

    #[test]
    fn shadow_oracle_submeasure() {
        let nu = Measure::dirac(0.0, 0.5);
        let mu = m(&[(0.0, 0.5), (-2.0, 0.25), (2.0, 0.25)]);
        assert!(brute_force_shadow(&nu, &mu).unwrap().approx_eq(&nu));
    }

    #[test]
    fn shadow_oracle_forced() {
        let nu = Measure::dirac(0.0, 0.5);
        let mu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let s = brute_force_shadow(&nu, &mu).unwrap();
        assert!(s.approx_eq(&m(&[(-1.0, 0.25), (1.0, 0.25)])));
    }

    #[test]
    fn shadow_oracle_matches_closed_form() {
        let nu = Measure::dirac(0.0, 0.75);
        let mu = m(&[(0.0, 0.5), (-2.0, 0.25), (2.0, 0.25)]);
        let lp = brute_force_shadow(&nu, &mu).unwrap();
        let closed = simple_shadow(&nu, &mu).unwrap();
        assert!(lp.max_deviation(&closed) < 1e-7);
    }

    #[test]
    fn mot_point_polytope() {
        // µ0 = δ0, µ1 = ½(δ₋₁+δ₁): the only coupling splits evenly
        let mu0 = Measure::dirac(0.0, 1.0);
        let mu1 = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let (v, cpl) = mot_lp(&mu0, &mu1, &MsmCost::Cubic).unwrap();
        let expected = 0.5 * (-1.0f64).powi(3) + 0.5 * 1.0f64.powi(3);
        assert!((v - expected).abs() < 1e-9);
        assert!(cpl.is_martingale());
    }

    #[test]
    fn mot_forced_2x2() {
        let mu0 = m(&[(-0.5, 0.5), (0.5, 0.5)]);
        let mu1 = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let (_, cpl) = mot_lp(&mu0, &mu1, &MsmCost::Cubic).unwrap();
        let expected = [[0.375, 0.125], [0.125, 0.375]];
        for (row, want) in cpl.w.iter().zip(&expected) {
            for (got, want) in row.iter().zip(want) {
                assert!((got - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mot_infeasible_iff_not_convex_order() {
        let mu0 = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let mu1 = Measure::dirac(0.0, 1.0);
        assert!(matches!(
            mot_lp(&mu0, &mu1, &MsmCost::Cubic),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn left_curtain_matches_lp_value() {
        let mu0 = m(&[(-0.5, 0.5), (0.5, 0.5)]);
        let mu1 = m(&[(-1.0, 1.0 / 3.0), (0.0, 1.0 / 3.0), (1.0, 1.0 / 3.0)]);
        let (v, _) = mot_lp(&mu0, &mu1, &MsmCost::Cubic).unwrap();
        let lc = left_curtain_coupling(&mu0, &mu1).unwrap();
        let lc_cost = lc.cost_expectation(|x, y| MsmCost::Cubic.eval(x, y));
        assert!((v - lc_cost).abs() < 1e-7, "{v} vs {lc_cost}");
    }

    #[test]
    fn c_uv_values() {
        let cpl = Coupling {
            xs: vec![0.0],
            ys: vec![0.0],
            w: vec![vec![1.0]],
        };
        assert_eq!(c_uv_expectation(&cpl, -1.0, 5.0), 0.0);
        assert_eq!(c_uv_expectation(&cpl, 0.0, -1.0), 0.0);
        assert_eq!(c_uv_expectation(&cpl, 0.0, 1.0), 1.0);
    }

    #[test]
    fn vertices_of_point_polytope() {
        let mu0 = Measure::dirac(0.0, 1.0);
        let mu1 = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let verts = martingale_polytope_vertices(&mu0, &mu1).unwrap();
        assert_eq!(verts.len(), 1);
        assert!(verts[0].is_martingale());
    }

    #[test]
    fn msm_sign_probes() {
        assert!(mixed_difference_max(&MsmCost::Cubic, 2.0, 20) < 0.0);
        assert!(mixed_difference_max(&MsmCost::TanhSqrt, 2.0, 20) < 0.0);
        // the negative control has the opposite sign
        assert!(mixed_difference_max(&MsmCost::ExpDiff, 2.0, 20) > 0.0);
    }

    #[test]
    fn multistep_matches_two_marginal_on_chain() {
        let p = crate::shadow::Peacock::new(
            vec![0.0, 1.0],
            vec![
                m(&[(-0.5, 0.5), (0.5, 0.5)]),
                m(&[(-1.0, 0.5), (1.0, 0.5)]),
            ],
        )
        .unwrap();
        let (v2, _) = mot_lp(&p.marginals()[0], &p.marginals()[1], &MsmCost::Cubic).unwrap();
        let (vm, law) = mot_lp_multistep(&p, &MsmCost::Cubic, 1).unwrap();
        assert!((v2 - vm).abs() < 1e-8);
        let mass: f64 = law.weights.iter().sum();
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn representation_identity_affine_cost() {
        // cost affine in y: the integrand vanishes, boundary terms carry it
        let cost = MsmCost::Grid {
            xs: vec![-3.0, 3.0],
            ys: vec![-3.0, 3.0],
            values: vec![vec![0.0, 6.0], vec![0.0, 6.0]],
        };
        // c(x, y) = y + 3 (independent of x): residual should be ~0
        let r = msm_representation_check(&cost, 2.0, 64, 5);
        assert!(r < 1e-6, "residual {r}");
    }

    #[test]
    fn representation_identity_cubic() {
        let r = msm_representation_check(&MsmCost::Cubic, 2.0, 200, 5);
        assert!(r < 1e-3, "residual {r}");
    }
}
