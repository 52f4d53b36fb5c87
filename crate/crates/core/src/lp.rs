//! Dense linear programming at desk scale: two-phase primal simplex with
//! Bland's rule (no scaling, no presolve) plus basic-solution enumeration
//! for tiny polytopes. Bland's rule trades speed for a cycling-free
//! guarantee, which is the right trade for oracle workloads.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-7;

/// `min c·x` subject to `eq`, `le`, `ge` rows and `x >= lower_bounds`
/// (zero by default).
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub le: Vec<(Vec<f64>, f64)>,
    pub ge: Vec<(Vec<f64>, f64)>,
    pub lower_bounds: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        LpProblem {
            objective,
            ..Default::default()
        }
    }

    fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        self.rhs[row] /= p;
        let pivot_row = self.rows[row].clone();
        let pivot_rhs = self.rhs[row];
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let f = self.rows[i][col];
            if f != 0.0 {
                for (v, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        self.basis[row] = col;
    }

    /// Primal simplex on the given objective. Pivots by Dantzig's rule
    /// while the objective makes progress and switches to Bland's rule
    /// under degenerate stalling, which keeps the anti-cycling guarantee
    /// without Bland's slow tail. Returns the objective value.
    fn optimize(&mut self, cost: &[f64], max_iters: usize) -> Result<f64> {
        let mut bland = false;
        let mut stall = 0usize;
        let mut last_value = f64::INFINITY;
        for _ in 0..max_iters {
            // clamp pivot-drift on the basic solution
            for r in self.rhs.iter_mut() {
                if *r < 0.0 && *r > -1e-11 {
                    *r = 0.0;
                }
            }
            // reduced costs r_j = c_j - c_B · B^{-1} A_j
            let mut reduced = cost.to_vec();
            let mut value = 0.0;
            for (i, &b) in self.basis.iter().enumerate() {
                let cb = cost[b];
                value += cb * self.rhs[i];
                if cb != 0.0 {
                    for (r, a) in reduced.iter_mut().zip(&self.rows[i]) {
                        *r -= cb * a;
                    }
                }
            }
            if value < last_value - 1e-12 {
                last_value = value;
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall > 40 {
                    bland = true;
                }
            }
            let enter = if bland {
                (0..self.ncols).find(|&j| reduced[j] < -PIVOT_EPS)
            } else {
                (0..self.ncols)
                    .filter(|&j| reduced[j] < -PIVOT_EPS)
                    .min_by(|&a, &b| reduced[a].total_cmp(&reduced[b]))
            };
            let Some(enter) = enter else {
                return Ok(value);
            };
            // leaving: min ratio, ties by smallest basis variable (Bland)
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > PIVOT_EPS {
                    let ratio = self.rhs[i].max(0.0) / a;
                    let better = ratio < best - PIVOT_EPS
                        || (ratio < best + PIVOT_EPS
                            && leave.is_none_or(|l| self.basis[i] < self.basis[l]));
                    if better {
                        best = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(leave) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(leave, enter);
        }
        Err(Error::IterationLimit)
    }
}

/// Solve the LP. Errors: [`Error::Infeasible`], [`Error::Unbounded`],
/// [`Error::IterationLimit`].
pub fn lp_solve(p: &LpProblem) -> Result<LpSolution> {
    let n = p.num_vars();
    let lb = p
        .lower_bounds
        .clone()
        .unwrap_or_else(|| vec![0.0; n]);
    assert_eq!(lb.len(), n, "lower bound length mismatch");

    // shift x = x' + lb, collect all rows as (coeffs, rhs, kind)
    #[derive(Clone, Copy, PartialEq)]
    enum Kind {
        Eq,
        Le,
        Ge,
    }
    let mut rows: Vec<(Vec<f64>, f64, Kind)> = Vec::new();
    let shift = |a: &[f64], b: f64| -> f64 { b - a.iter().zip(&lb).map(|(c, l)| c * l).sum::<f64>() };
    for (a, b) in &p.eq {
        rows.push((a.clone(), shift(a, *b), Kind::Eq));
    }
    for (a, b) in &p.le {
        rows.push((a.clone(), shift(a, *b), Kind::Le));
    }
    for (a, b) in &p.ge {
        rows.push((a.clone(), shift(a, *b), Kind::Ge));
    }
    let m = rows.len();

    let num_slack = rows
        .iter()
        .filter(|r| matches!(r.2, Kind::Le | Kind::Ge))
        .count();
    let ncols = n + num_slack + m; // artificials for every row, most unused
    let mut tab = Tableau {
        rows: vec![vec![0.0; ncols]; m],
        rhs: vec![0.0; m],
        basis: vec![usize::MAX; m],
        ncols,
    };

    let mut slack_idx = n;
    let mut art_cols: Vec<usize> = Vec::new();
    for (i, (a, b, kind)) in rows.iter().enumerate() {
        let neg = *b < 0.0;
        let sign = if neg { -1.0 } else { 1.0 };
        for (j, &c) in a.iter().enumerate() {
            tab.rows[i][j] = sign * c;
        }
        tab.rhs[i] = sign * b;
        match kind {
            Kind::Le | Kind::Ge => {
                let s = if matches!(kind, Kind::Le) { 1.0 } else { -1.0 };
                tab.rows[i][slack_idx] = sign * s;
                // a positive slack can serve as the initial basis directly
                if sign * s > 0.0 {
                    tab.basis[i] = slack_idx;
                }
                slack_idx += 1;
            }
            Kind::Eq => {}
        }
        if tab.basis[i] == usize::MAX {
            let art = n + num_slack + art_cols.len();
            tab.rows[i][art] = 1.0;
            tab.basis[i] = art;
            art_cols.push(art);
        }
    }
    let used_cols = n + num_slack + art_cols.len();
    for row in tab.rows.iter_mut() {
        row.truncate(used_cols);
    }
    tab.ncols = used_cols;

    let max_iters = 2000 + 200 * (used_cols + m);

    // phase 1: drive artificials to zero
    if !art_cols.is_empty() {
        let mut cost1 = vec![0.0; used_cols];
        for &a in &art_cols {
            cost1[a] = 1.0;
        }
        let v1 = tab.optimize(&cost1, max_iters)?;
        if v1 > FEAS_EPS {
            return Err(Error::Infeasible);
        }
        // pivot basic artificials out, drop redundant rows
        let first_art = n + num_slack;
        let mut drop_rows: Vec<usize> = Vec::new();
        for i in 0..tab.rows.len() {
            if tab.basis[i] >= first_art {
                if let Some(col) = (0..first_art).find(|&j| tab.rows[i][j].abs() > PIVOT_EPS) {
                    tab.pivot(i, col);
                } else {
                    drop_rows.push(i);
                }
            }
        }
        for &i in drop_rows.iter().rev() {
            tab.rows.remove(i);
            tab.rhs.remove(i);
            tab.basis.remove(i);
        }
        // freeze artificial columns at zero
        for row in tab.rows.iter_mut() {
            row.truncate(first_art);
        }
        tab.ncols = first_art;
    }

    // phase 2
    let mut cost2 = vec![0.0; tab.ncols];
    cost2[..n].copy_from_slice(&p.objective);
    let value_shifted = tab.optimize(&cost2, max_iters)?;

    let mut x = lb.clone();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = lb[b] + tab.rhs[i];
        }
    }
    let constant: f64 = p.objective.iter().zip(&lb).map(|(c, l)| c * l).sum();
    Ok(LpSolution {
        value: value_shifted + constant,
        x,
    })
}

/// All vertices of `{ x >= 0 : A x = b }` for tiny systems, by enumerating
/// basic solutions. Intended for polytopes with at most ~10 variables.
pub fn enumerate_vertices(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    if n > 16 {
        return Err(Error::SizeLimit { size: n, limit: 16 });
    }
    let rank = matrix_rank(a);
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    enumerate_rec(a, b, n, rank, 0, &mut chosen, &mut vertices);
    Ok(vertices)
}

fn enumerate_rec(
    a: &[Vec<f64>],
    b: &[f64],
    n: usize,
    rank: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<f64>>,
) {
    if chosen.len() == rank {
        if let Some(x) = solve_basic(a, b, n, chosen) {
            if x.iter().all(|&v| v >= -FEAS_EPS)
                && !out.iter().any(|y| {
                    y.iter()
                        .zip(&x)
                        .all(|(p, q)| (p - q).abs() < 1e-7)
                })
            {
                out.push(x.iter().map(|v| v.max(0.0)).collect());
            }
        }
        return;
    }
    for j in start..n {
        chosen.push(j);
        enumerate_rec(a, b, n, rank, j + 1, chosen, out);
        chosen.pop();
    }
}

/// Solve for the basic variables in `cols`, zeros elsewhere; `None` if the
/// basis matrix is singular.
fn solve_basic(a: &[Vec<f64>], b: &[f64], n: usize, cols: &[usize]) -> Option<Vec<f64>> {
    let m = a.len();
    let k = cols.len();
    let mut mat: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = cols.iter().map(|&j| a[i][j]).collect();
            row.push(b[i]);
            row
        })
        .collect();
    // gaussian elimination with partial pivoting
    let mut row = 0;
    for col in 0..k {
        let piv = (row..m).max_by(|&p, &q| mat[p][col].abs().total_cmp(&mat[q][col].abs()))?;
        if mat[piv][col].abs() < 1e-11 {
            return None;
        }
        mat.swap(row, piv);
        let d = mat[row][col];
        for v in mat[row].iter_mut() {
            *v /= d;
        }
        let pivot_row: Vec<f64> = mat[row][..=k].to_vec();
        for (i, r) in mat.iter_mut().enumerate() {
            if i != row && r[col] != 0.0 {
                let f = r[col];
                for (v, p) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        row += 1;
        if row == m {
            break;
        }
    }
    // remaining rows must be consistent
    for r in mat.iter().skip(row) {
        if r[k].abs() > FEAS_EPS {
            return None;
        }
    }
    let mut x = vec![0.0; n];
    for (i, &j) in cols.iter().enumerate() {
        x[j] = mat[i][k];
    }
    Some(x)
}

fn matrix_rank(a: &[Vec<f64>]) -> usize {
    if a.is_empty() {
        return 0;
    }
    let mut mat: Vec<Vec<f64>> = a.to_vec();
    let (m, n) = (mat.len(), mat[0].len());
    let mut rank = 0;
    for col in 0..n {
        let Some(piv) = (rank..m).find(|&i| mat[i][col].abs() > 1e-11) else {
            continue;
        };
        mat.swap(rank, piv);
        let d = mat[rank][col];
        for v in mat[rank].iter_mut() {
            *v /= d;
        }
        for i in 0..m {
            if i != rank && mat[i][col].abs() > 0.0 {
                let f = mat[i][col];
                let pivot_row = mat[rank].clone();
                for (v, pv) in mat[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        rank += 1;
        if rank == m {
            break;
        }
    }
    rank
}
