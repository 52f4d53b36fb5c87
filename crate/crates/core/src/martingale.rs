//! The shadow martingale on a finite time grid, realized as a mixture of
//! per-slice Kellerer-dilation chains.
//!
//! Consecutive rows of the shadow table differ by slice marginals; each
//! slice carries the dilation kernels onto the supports of its successive
//! marginals. Partial sums over slices telescope back to the table exactly,
//! which is the marginal identity the `verify_*` audits check. Whether a
//! slice chain is genuinely binomial (each link a dilation image) is audited
//! per link and reported, not assumed.

use crate::dilation::DilationKernel;
use crate::error::{Error, Result};
use crate::measure::{check_convex_order, check_cs_order, w1_distance, Measure};
use crate::parametrization::{Kind, Parametrization};
use crate::rng::Stream;
use crate::shadow::{prefix_shadows, simple_shadow, Peacock, ShadowTable};
use crate::tol;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// One α-slice of the mixture: a chain of marginals of mass `a_hi - a_lo`
/// linked by Kellerer dilations onto the next marginal's support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceChain {
    pub a_lo: f64,
    pub a_hi: f64,
    pub marginals: Vec<Measure>,
    /// Dilation target sets, one per consecutive time pair.
    pub kernels: Vec<Vec<f64>>,
    /// Whether the dilation image of each marginal reproduces the next.
    pub binomial_ok: Vec<bool>,
}

impl SliceChain {
    pub fn width(&self) -> f64 {
        self.a_hi - self.a_lo
    }

    /// Marginals rescaled to probability measures.
    pub fn normalized_marginals(&self) -> Vec<Measure> {
        let w = self.width();
        self.marginals.iter().map(|m| m.scale(1.0 / w)).collect()
    }

    fn kernel(&self, link: usize) -> Result<DilationKernel> {
        DilationKernel::new(self.kernels[link].clone())
    }
}

/// Provenance of a built mixture: enough to recompute its shadow table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub peacock: Peacock,
    pub parametrization: Parametrization,
    pub alphas: Vec<f64>,
}

/// The shadow martingale as an α-mixture of slice chains.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartingaleMixture {
    pub times: Vec<f64>,
    pub slices: Vec<SliceChain>,
    pub provenance: Provenance,
}

/// One sampled path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub slice: usize,
    pub values: Vec<f64>,
}

/// Build the mixture from the shadow table of `(p, param, alphas)`:
/// slice marginals are column differences of consecutive table rows,
/// kernels are the supports of the next slice marginal.
pub fn build(p: &Peacock, param: &Parametrization, alphas: &[f64]) -> Result<MartingaleMixture> {
    let table = ShadowTable::build(p, param, alphas)?;
    build_from_table(p, param, &table)
}

/// As [`build`], returning the table alongside.
pub fn build_with_table(
    p: &Peacock,
    param: &Parametrization,
    alphas: &[f64],
) -> Result<(MartingaleMixture, ShadowTable)> {
    let table = ShadowTable::build(p, param, alphas)?;
    let mixture = build_from_table(p, param, &table)?;
    Ok((mixture, table))
}

fn build_from_table(
    p: &Peacock,
    param: &Parametrization,
    table: &ShadowTable,
) -> Result<MartingaleMixture> {
    let mut slices = Vec::with_capacity(table.alphas.len() - 1);
    for k in 0..table.alphas.len() - 1 {
        let mut marginals = Vec::with_capacity(table.times.len());
        for i in 0..table.times.len() {
            let diff = table.entries[k + 1][i]
                .subtract(&table.entries[k][i])
                .map_err(|e| match e {
                    Error::NotASubmeasure { position, deficit } => Error::NegativeSlice {
                        slice: k,
                        position,
                        weight: -deficit,
                    },
                    other => other,
                })?;
            marginals.push(diff);
        }
        let mut kernels = Vec::with_capacity(marginals.len().saturating_sub(1));
        let mut binomial_ok = Vec::with_capacity(kernels.capacity());
        for i in 0..marginals.len() - 1 {
            let kernel = DilationKernel::from_support(&marginals[i + 1])?;
            // a source atom outside the target hull also fails the audit
            let ok = match kernel.push_forward(&marginals[i]) {
                Ok(image) => image.approx_eq(&marginals[i + 1]),
                Err(Error::OutOfHull { .. }) => false,
                Err(other) => return Err(other),
            };
            binomial_ok.push(ok);
            kernels.push(kernel.targets().to_vec());
        }
        slices.push(SliceChain {
            a_lo: table.alphas[k],
            a_hi: table.alphas[k + 1],
            marginals,
            kernels,
            binomial_ok,
        });
    }
    Ok(MartingaleMixture {
        times: table.times.clone(),
        slices,
        provenance: Provenance {
            peacock: p.clone(),
            parametrization: param.clone(),
            alphas: table.alphas.clone(),
        },
    })
}

impl MartingaleMixture {
    pub fn num_links(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    /// Links failing the binomial audit, as `(slice, link)` pairs.
    pub fn non_binomial_links(&self) -> Vec<(usize, usize)> {
        self.slices
            .iter()
            .enumerate()
            .flat_map(|(k, s)| {
                s.binomial_ok
                    .iter()
                    .enumerate()
                    .filter(|(_, &ok)| !ok)
                    .map(move |(i, _)| (k, i))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Partial sum of slice marginals at time index `i` over slices with
    /// `a_hi <= alpha + tol`.
    pub fn partial_sum(&self, alpha: f64, i: usize) -> Measure {
        let mut acc = Measure::zero();
        for s in &self.slices {
            if s.a_hi <= alpha + tol::tolerance() {
                acc = acc.add(&s.marginals[i]);
            }
        }
        acc
    }

    /// Joint law of `(X₀, X_{t_i})` under the mixture. Slices whose initial
    /// marginal is a single atom contribute exactly (conditioning on X₀ is
    /// trivial there); multi-atom slices are composed through their
    /// dilation kernels, which is exact precisely on binomial links.
    pub fn pair_coupling(&self, i: usize) -> Result<crate::mot::Coupling> {
        let mu0 = self.provenance.peacock.initial();
        let xs = mu0.support();
        let mut target_atoms: Vec<(f64, f64)> = Vec::new();
        let mut rows: Vec<Vec<(f64, f64)>> = vec![Vec::new(); xs.len()];
        for s in &self.slices {
            if s.marginals[0].atoms().len() == 1 {
                let x = s.marginals[0].atoms()[0].0;
                let row = find_row(&xs, x)?;
                for &(y, wy) in s.marginals[i].atoms() {
                    rows[row].push((y, wy));
                }
            } else {
                for &(x, wx) in s.marginals[0].atoms() {
                    let row = find_row(&xs, x)?;
                    let mut dist = Measure::dirac(x, wx);
                    for link in 0..i {
                        dist = s.kernel(link)?.push_forward(&dist)?;
                    }
                    for &(y, wy) in dist.atoms() {
                        rows[row].push((y, wy));
                    }
                }
            }
        }
        for row in &rows {
            target_atoms.extend_from_slice(row);
        }
        let ys = Measure::from_atoms(target_atoms).support();
        let mut w = vec![vec![0.0; ys.len()]; xs.len()];
        for (r, row) in rows.iter().enumerate() {
            for &(y, wy) in row {
                let j = ys
                    .iter()
                    .position(|&p| tol::same_position(p, y))
                    .expect("y collected above");
                w[r][j] += wy;
            }
        }
        Ok(crate::mot::Coupling { xs, ys, w })
    }

    /// `E[c(X₀, X_{t_i})]` under the mixture.
    pub fn pair_cost(&self, i: usize, cost: impl Fn(f64, f64) -> f64) -> Result<f64> {
        Ok(self.pair_coupling(i)?.cost_expectation(cost))
    }
}

fn find_row(xs: &[f64], x: f64) -> Result<usize> {
    xs.iter()
        .position(|&p| tol::same_position(p, x))
        .ok_or_else(|| {
            Error::InvalidParametrization(format!(
                "slice initial atom {x} is not in the initial marginal support"
            ))
        })
}

/// Max `W₁` deviation between mixture partial sums and the shadow table,
/// over all grid α and times. Telescoping makes this float-rounding small.
pub fn verify_marginals(m: &MartingaleMixture, table: &ShadowTable) -> Result<f64> {
    if table.times != m.times || table.alphas.len() != m.slices.len() + 1 {
        return Err(Error::InvalidPeacock(
            "mixture and table grids differ".to_string(),
        ));
    }
    let mut worst = 0.0f64;
    for (k, &alpha) in table.alphas.iter().enumerate() {
        for i in 0..table.times.len() {
            let partial = m.partial_sum(alpha, i);
            let d = w1_distance(&partial, &table.entries[k][i])?;
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Martingale audit of a mixture.
#[derive(Debug, Clone)]
pub struct MartingaleAudit {
    /// Max `|barycenter(P_F(x,·)) - x|` over slices, links, source atoms.
    pub max_kernel_barycenter_error: f64,
    /// Max `W₁(push_forward(η_i), η_{i+1})` per link.
    pub max_link_w1: f64,
    /// Links failing the binomial audit.
    pub non_binomial: Vec<(usize, usize)>,
}

/// Kernel barycenter errors (zero by construction, up to rounding) and the
/// per-link binomial audit.
pub fn verify_martingale(m: &MartingaleMixture) -> Result<MartingaleAudit> {
    let mut bary_err = 0.0f64;
    let mut link_w1 = 0.0f64;
    for s in &m.slices {
        for link in 0..s.kernels.len() {
            let kernel = s.kernel(link)?;
            for &(x, _) in s.marginals[link].atoms() {
                match kernel.kernel(x) {
                    Ok(k) => bary_err = bary_err.max((k.first_moment() - x).abs()),
                    Err(Error::OutOfHull { .. }) => {} // already a flagged link
                    Err(other) => return Err(other),
                }
            }
            match kernel.push_forward(&s.marginals[link]) {
                Ok(image) => {
                    link_w1 = link_w1.max(w1_distance(&image, &s.marginals[link + 1])?)
                }
                Err(Error::OutOfHull { .. }) => {}
                Err(other) => return Err(other),
            }
        }
    }
    Ok(MartingaleAudit {
        max_kernel_barycenter_error: bary_err,
        max_link_w1: link_w1,
        non_binomial: m.non_binomial_links(),
    })
}

/// Sample `n` trajectories. Deterministic in `(seed, path index)`; paths
/// can therefore be drawn in any order or in parallel. Errors with
/// [`Error::NonBinomialMixture`] unless `force` is set when some link
/// failed the binomial audit.
pub fn sample(
    m: &MartingaleMixture,
    n: usize,
    seed: u64,
    force: bool,
) -> Result<Vec<Trajectory>> {
    sample_range(m, 0, n, seed, force)
}

/// Trajectories for path indices `lo..hi`. Because paths are keyed by
/// `(seed, index)`, disjoint ranges drawn on different threads concatenate
/// to exactly `sample(m, n, seed, force)`.
pub fn sample_range(
    m: &MartingaleMixture,
    lo: usize,
    hi: usize,
    seed: u64,
    force: bool,
) -> Result<Vec<Trajectory>> {
    let bad = m.non_binomial_links().len();
    if bad > 0 && !force {
        return Err(Error::NonBinomialMixture(bad));
    }
    (lo..hi).map(|i| sample_one(m, seed, i as u64)).collect()
}

fn sample_one(m: &MartingaleMixture, seed: u64, index: u64) -> Result<Trajectory> {
    let mut rng = Stream::new(seed, index);
    let u = rng.next_f64();
    let slice_idx = m
        .slices
        .iter()
        .position(|s| u < s.a_hi)
        .unwrap_or(m.slices.len() - 1);
    let slice = &m.slices[slice_idx];

    // X₀ by inverse cdf of the normalized initial slice marginal
    let init = &slice.marginals[0];
    let v = rng.next_f64() * init.mass();
    let mut cum = 0.0;
    let mut x = init.atoms()[0].0;
    for &(pos, w) in init.atoms() {
        cum += w;
        x = pos;
        if cum >= v {
            break;
        }
    }

    let mut values = Vec::with_capacity(m.times.len());
    values.push(x);
    for link in 0..slice.kernels.len() {
        let kernel = slice.kernel(link)?.kernel(x)?;
        let atoms = kernel.atoms();
        x = if atoms.len() == 1 {
            atoms[0].0
        } else {
            // two-point dilation: pick the upper branch with its weight
            let (lower, upper) = (atoms[0], atoms[1]);
            if rng.next_f64() < upper.1 {
                upper.0
            } else {
                lower.0
            }
        };
        values.push(x);
    }
    Ok(Trajectory {
        slice: slice_idx,
        values,
    })
}

/// The auxiliary slice cost `c_t(a, θ) = (1-a) ∫ x + √(1+x²) dθ_t`.
pub fn aux_cost(a: f64, slice_marginal: &Measure) -> f64 {
    (1.0 - a)
        * slice_marginal
            .atoms()
            .iter()
            .map(|&(x, w)| w * (x + (1.0 + x * x).sqrt()))
            .sum::<f64>()
}

/// Witness of a slice-ordering violation.
#[derive(Debug, Clone)]
pub struct SliceOrderWitness {
    pub lower_slice: usize,
    pub time_index: usize,
    pub lhs: Measure,
    pub rhs: Measure,
}

/// Check the slice-ordering consequence of optimality: for consecutive
/// slices `a < a'` (normalized to probability peacocks θ, θ') and every
/// time `t`,
/// `2θ_t - S^{(2θ_s)_{s<=t}}(θ₀)  <=_{c,s}  S^{(2θ'_s)_{s<=t}}(θ'₀)`.
pub fn check_slice_ordering(
    m: &MartingaleMixture,
) -> Result<(bool, Option<SliceOrderWitness>)> {
    for k in 0..m.slices.len().saturating_sub(1) {
        let theta = m.slices[k].normalized_marginals();
        let theta_next = m.slices[k + 1].normalized_marginals();
        let doubled: Vec<Measure> = theta.iter().map(|x| x.scale(2.0)).collect();
        let doubled_next: Vec<Measure> = theta_next.iter().map(|x| x.scale(2.0)).collect();
        let shadows = prefix_shadows(&theta[0], &doubled)?;
        let shadows_next = prefix_shadows(&theta_next[0], &doubled_next)?;
        for t in 0..m.times.len() {
            let lhs = theta[t].scale(2.0).subtract(&shadows[t])?;
            let rhs = shadows_next[t].clone();
            if !check_cs_order(&lhs, &rhs) {
                return Ok((
                    false,
                    Some(SliceOrderWitness {
                        lower_slice: k,
                        time_index: t,
                        lhs,
                        rhs,
                    }),
                ));
            }
        }
    }
    Ok((true, None))
}

/// Distribution descriptor for the quantile discretizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, var: f64 },
    Atomic { measure: Measure },
}

/// `m` atoms at the conditional means of equal-mass quantile buckets.
/// Mass 1 and the first moment are exact; the result is below the
/// continuous law in convex order (conditional-expectation contraction).
pub fn discretize(spec: &DistributionSpec, m: usize) -> Result<Measure> {
    if m == 0 {
        return Err(Error::BadSpec("bucket count must be positive".to_string()));
    }
    match spec {
        DistributionSpec::Uniform { lo, hi } => {
            if hi <= lo {
                return Err(Error::BadSpec(format!("empty interval [{lo}, {hi}]")));
            }
            let w = 1.0 / m as f64;
            Ok(Measure::from_atoms(
                (0..m)
                    .map(|k| (lo + (hi - lo) * (2 * k + 1) as f64 / (2 * m) as f64, w))
                    .collect(),
            ))
        }
        DistributionSpec::Gaussian { mean, var } => {
            if *var <= 0.0 {
                return Err(Error::BadSpec(format!("variance {var} must be positive")));
            }
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            let sd = var.sqrt();
            let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let w = 1.0 / m as f64;
            let mut atoms = Vec::with_capacity(m);
            let mut prev_z = f64::NEG_INFINITY;
            for k in 1..=m {
                let z = if k == m {
                    f64::INFINITY
                } else {
                    normal.inverse_cdf(k as f64 / m as f64)
                };
                // conditional mean of N(0,1) on [prev_z, z]
                let lo_pdf = if prev_z.is_finite() { pdf(prev_z) } else { 0.0 };
                let hi_pdf = if z.is_finite() { pdf(z) } else { 0.0 };
                let cond_mean = (lo_pdf - hi_pdf) * m as f64;
                atoms.push((mean + sd * cond_mean, w));
                prev_z = z;
            }
            Ok(Measure::from_atoms(atoms))
        }
        DistributionSpec::Atomic { measure } => Ok(measure.clone()),
    }
}

/// Non-obstructed check: simple shadows `S^{µ_t}(ν)` increase in convex
/// order along the grid (equivalently the obstructed shadow equals the
/// simple one at every time).
pub fn non_obstructed_check(p: &Peacock, nu: &Measure) -> Result<bool> {
    let mut prev: Option<Measure> = None;
    for mu in p.marginals() {
        let s = simple_shadow(nu, mu)?;
        if let Some(ref q) = prev {
            if !check_convex_order(q, &s) {
                return Ok(false);
            }
        }
        prev = Some(s);
    }
    Ok(true)
}

/// Default α-grid: the cumulative-mass breakpoints of the base marginal
/// (where curtain-type slice derivatives change), each gap subdivided
/// `subdivisions` times. Sunset-style parametrizations have no natural
/// breakpoints and get a uniform grid.
pub fn default_alpha_grid(param: &Parametrization, subdivisions: usize) -> Vec<f64> {
    let u = subdivisions.max(1);
    let breakpoints: Vec<f64> = match param.kind() {
        Kind::LeftCurtain | Kind::MiddleCurtain | Kind::RightCurtain => {
            let mut cum = 0.0;
            let mut b = vec![0.0];
            for &(_, w) in param.base().atoms() {
                cum += w;
                b.push(cum.min(1.0));
            }
            b
        }
        Kind::Intervals { intervals } => intervals.iter().map(|s| s.alpha).collect(),
        Kind::Grid { alphas, .. } => alphas.clone(),
        Kind::Sunset => vec![0.0, 1.0],
    };
    let mut grid = Vec::new();
    for w in breakpoints.windows(2) {
        for i in 0..u {
            grid.push(w[0] + (w[1] - w[0]) * i as f64 / u as f64);
        }
    }
    grid.push(1.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if grid.first() != Some(&0.0) {
        grid.insert(0, 0.0);
    }
    *grid.last_mut().unwrap() = 1.0;
    grid
}
