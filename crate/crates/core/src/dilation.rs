//! Kellerer dilations and the non-self-improvable (NSI) property.
//!
//! For a finite target set `F`, the Kellerer dilation sends `x` to the two
//! neighboring points of `F`, with weights fixed by the barycenter
//! constraint; points of `F` stay put. A one-step peacock `(µ₀, µ₁)` is NSI
//! iff `µ₁ = µ₀ P_{supp(µ₁)}`; a finite peacock is NSI iff the shadow of
//! `µ₀` through the doubled prefix marginals reproduces every marginal.

use crate::error::{Error, Result};
use crate::measure::{check_convex_order, Measure};
use crate::shadow::Peacock;
use crate::tol;

/// Atoms below this weight are ignored when extracting a support set.
const SUPPORT_EPS: f64 = 1e-9;

/// A sorted finite target set for the Kellerer dilation kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationKernel {
    targets: Vec<f64>,
}

impl DilationKernel {
    pub fn new(mut targets: Vec<f64>) -> Result<Self> {
        targets.sort_by(f64::total_cmp);
        targets.dedup_by(|a, b| tol::same_position(*a, *b));
        if targets.is_empty() {
            return Err(Error::BadSpec("empty dilation target set".to_string()));
        }
        Ok(DilationKernel { targets })
    }

    /// Target set of all atoms of `m` above the support threshold.
    pub fn from_support(m: &Measure) -> Result<Self> {
        Self::new(
            m.atoms()
                .iter()
                .filter(|a| a.1 > SUPPORT_EPS)
                .map(|a| a.0)
                .collect(),
        )
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn min(&self) -> f64 {
        self.targets[0]
    }

    pub fn max(&self) -> f64 {
        *self.targets.last().unwrap()
    }

    /// `P_F(x, ·)`: `δ_x` for `x ∈ F`, otherwise the two-point measure on
    /// the neighbors `x⁻ ≤ x ≤ x⁺` with barycenter exactly `x`.
    pub fn kernel(&self, x: f64) -> Result<Measure> {
        let (lo, hi) = (self.min(), self.max());
        if x < lo - tol::tolerance() || x > hi + tol::tolerance() {
            return Err(Error::OutOfHull { x, lo, hi });
        }
        let i = self.targets.partition_point(|&f| f < x);
        // x within tolerance of a target point counts as a member
        if i < self.targets.len() && (self.targets[i] - x).abs() <= tol::tolerance() {
            return Ok(Measure::dirac(self.targets[i], 1.0));
        }
        if i > 0 && (self.targets[i - 1] - x).abs() <= tol::tolerance() {
            return Ok(Measure::dirac(self.targets[i - 1], 1.0));
        }
        let x_minus = self.targets[i - 1];
        let x_plus = self.targets[i];
        let gap = x_plus - x_minus;
        Ok(Measure::from_atoms(vec![
            (x_plus, (x - x_minus) / gap),
            (x_minus, (x_plus - x) / gap),
        ]))
    }

    /// Push a measure through the kernel: `µP_F = ∫ P_F(x,·) µ(dx)`.
    pub fn push_forward(&self, mu: &Measure) -> Result<Measure> {
        let mut atoms = Vec::new();
        for &(x, w) in mu.atoms() {
            for &(y, p) in self.kernel(x)?.atoms() {
                atoms.push((y, w * p));
            }
        }
        Ok(Measure::from_atoms(atoms))
    }
}

/// Convenience wrapper: dilation of `x` onto the set `F`.
pub fn kellerer_dilation(targets: &[f64], x: f64) -> Result<Measure> {
    DilationKernel::new(targets.to_vec())?.kernel(x)
}

/// Push `µ` forward onto the set `F`.
pub fn push_forward(mu: &Measure, targets: &[f64]) -> Result<Measure> {
    DilationKernel::new(targets.to_vec())?.push_forward(mu)
}

/// One-step NSI: `µ₁ = µ₀ P_{supp(µ₁)}` (requires `µ₀ <=_c µ₁`).
pub fn one_step_nsi(mu0: &Measure, mu1: &Measure) -> Result<bool> {
    if !check_convex_order(mu0, mu1) {
        return Err(Error::OrderViolation {
            relation: "mu0 <=_c mu1",
            chain_index: None,
        });
    }
    let kernel = DilationKernel::from_support(mu1)?;
    Ok(kernel.push_forward(mu0)?.approx_eq(mu1))
}

/// Per-time outcome of the finite NSI check.
#[derive(Debug, Clone)]
pub struct NsiReport {
    pub times: Vec<f64>,
    /// Shadow of `µ₀` through the doubled prefix chain at each time.
    pub doubled_shadows: Vec<Measure>,
    /// Atomwise deviation from the marginal at each time.
    pub deviations: Vec<f64>,
}

impl NsiReport {
    pub fn is_nsi(&self) -> bool {
        self.deviations.iter().all(|&d| d <= tol::tolerance())
    }

    /// Times where the NSI identity fails.
    pub fn failing_times(&self) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.deviations)
            .filter(|(_, &d)| d > tol::tolerance())
            .map(|(&t, _)| t)
            .collect()
    }
}

/// Finite NSI: for every time `t`, `S^{(2µ_s)_{s <= t}}(µ₀) = µ_t`.
pub fn finite_nsi(p: &Peacock) -> Result<(bool, NsiReport)> {
    let doubled: Vec<Measure> = p.marginals().iter().map(|m| m.scale(2.0)).collect();
    let mut doubled_shadows = Vec::with_capacity(p.len());
    let mut deviations = Vec::with_capacity(p.len());
    let mut current = p.initial().clone();
    for (i, mu2) in doubled.iter().enumerate() {
        current = crate::shadow::simple_shadow(&current, mu2)?;
        deviations.push(current.max_deviation(&p.marginals()[i]));
        doubled_shadows.push(current.clone());
    }
    let report = NsiReport {
        times: p.times().to_vec(),
        doubled_shadows,
        deviations,
    };
    Ok((report.is_nsi(), report))
}
