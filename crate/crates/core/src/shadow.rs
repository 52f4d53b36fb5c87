//! Simple and obstructed shadows and their calculus.
//!
//! The shadow of `ν` in `µ` is the convex-order minimum among submeasures of
//! `µ` dominating `ν` in convex order. For atomic measures it is computed
//! exactly through potential functions:
//! `U(S^µ(ν)) = U(µ) - conv(U(µ) - U(ν))`.
//! Obstructed shadows through a finite chain iterate this link by link.

use crate::error::{Error, Result};
use crate::measure::{
    check_c_plus_order, check_convex_order, check_positive_order, Measure,
};
use crate::potential::{lower_convex_envelope, measure_of, pl_sub, potential_of, PotentialFn};
use crate::tol;
use serde::{Deserialize, Serialize};

/// The shadow `S^µ(ν)`: the `<=_c`-minimal `η` with `ν <=_c η <=_+ µ`.
pub fn simple_shadow(nu: &Measure, mu: &Measure) -> Result<Measure> {
    if nu.is_zero() {
        return Ok(Measure::zero());
    }
    if !check_c_plus_order(nu, mu) {
        return Err(Error::OrderViolation {
            relation: "nu <=_{c,+} mu",
            chain_index: None,
        });
    }
    let u_mu = potential_of(mu);
    let u_nu = potential_of(nu);
    let diff = pl_sub(u_mu.as_pl(), u_nu.as_pl());
    let env = lower_convex_envelope(&diff)?;
    let shadow_pot = PotentialFn::try_new(pl_sub(u_mu.as_pl(), &env))?;
    measure_of(&shadow_pot)
}

/// Iterated shadow `S^{µ_1,…,µ_n}(ν)` through a finite chain, left to right.
/// The convex-positive precondition is checked at every link; a failure
/// reports the offending chain index.
pub fn obstructed_shadow(nu: &Measure, chain: &[Measure]) -> Result<Measure> {
    let mut current = nu.clone();
    for (i, mu) in chain.iter().enumerate() {
        current = simple_shadow(&current, mu).map_err(|e| match e {
            Error::OrderViolation { relation, .. } => Error::OrderViolation {
                relation,
                chain_index: Some(i),
            },
            other => other,
        })?;
    }
    Ok(current)
}

/// All prefix shadows `S^{µ_1,…,µ_i}(ν)` for `i = 1..=n`.
pub fn prefix_shadows(nu: &Measure, chain: &[Measure]) -> Result<Vec<Measure>> {
    let mut out = Vec::with_capacity(chain.len());
    let mut current = nu.clone();
    for (i, mu) in chain.iter().enumerate() {
        current = simple_shadow(&current, mu).map_err(|e| match e {
            Error::OrderViolation { relation, .. } => Error::OrderViolation {
                relation,
                chain_index: Some(i),
            },
            other => other,
        })?;
        out.push(current.clone());
    }
    Ok(out)
}

/// Outcome of a two-sided identity check.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub lhs: Measure,
    pub rhs: Measure,
    pub max_deviation: f64,
}

impl IdentityReport {
    pub fn holds(&self) -> bool {
        self.max_deviation <= tol::tolerance()
    }
}

/// Shadow associativity: `S(ν₁+ν₂) = S(ν₁) + S_residual(ν₂)` where the
/// residual chain is `(µ_i - S^{prefix_i}(ν₁))_i`.
pub fn shadow_associativity_check(
    nu1: &Measure,
    nu2: &Measure,
    chain: &[Measure],
) -> Result<IdentityReport> {
    let lhs = obstructed_shadow(&nu1.add(nu2), chain)?;
    let prefixes = prefix_shadows(nu1, chain)?;
    let residual_chain: Vec<Measure> = chain
        .iter()
        .zip(&prefixes)
        .map(|(mu, s)| mu.subtract(s))
        .collect::<Result<_>>()?;
    let s1 = prefixes.last().cloned().unwrap_or_else(|| nu1.clone());
    let rhs = s1.add(&obstructed_shadow(nu2, &residual_chain)?);
    let max_deviation = lhs.max_deviation(&rhs);
    Ok(IdentityReport {
        lhs,
        rhs,
        max_deviation,
    })
}

/// Shadow homogeneity: `S^{cµ}(cν) = c·S^µ(ν)` for `c > 0`.
pub fn shadow_homogeneity_check(
    nu: &Measure,
    chain: &[Measure],
    c: f64,
) -> Result<IdentityReport> {
    assert!(c > 0.0, "scale factor must be positive");
    let scaled_chain: Vec<Measure> = chain.iter().map(|m| m.scale(c)).collect();
    let lhs = obstructed_shadow(&nu.scale(c), &scaled_chain)?;
    let rhs = obstructed_shadow(nu, chain)?.scale(c);
    let max_deviation = lhs.max_deviation(&rhs);
    Ok(IdentityReport {
        lhs,
        rhs,
        max_deviation,
    })
}

/// A finite time grid with marginals increasing in convex order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PeacockJson", into = "PeacockJson")]
pub struct Peacock {
    times: Vec<f64>,
    marginals: Vec<Measure>,
}

#[derive(Serialize, Deserialize)]
struct PeacockJson {
    times: Vec<f64>,
    marginals: Vec<Measure>,
}

impl From<Peacock> for PeacockJson {
    fn from(p: Peacock) -> Self {
        PeacockJson {
            times: p.times,
            marginals: p.marginals,
        }
    }
}

impl TryFrom<PeacockJson> for Peacock {
    type Error = String;
    fn try_from(j: PeacockJson) -> std::result::Result<Self, String> {
        Peacock::new(j.times, j.marginals).map_err(|e| e.to_string())
    }
}

impl Peacock {
    /// Validates: `times[0] = 0`, strictly increasing times, one marginal
    /// per time, equal masses and first moments, and consecutive marginals
    /// increasing in convex order.
    pub fn new(times: Vec<f64>, marginals: Vec<Measure>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidPeacock("empty time grid".to_string()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPeacock(format!(
                "first time must be 0, got {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPeacock(
                "times must be strictly increasing".to_string(),
            ));
        }
        if times.len() != marginals.len() {
            return Err(Error::InvalidPeacock(format!(
                "{} times but {} marginals",
                times.len(),
                marginals.len()
            )));
        }
        for (i, w) in marginals.windows(2).enumerate() {
            if !check_convex_order(&w[0], &w[1]) {
                return Err(Error::InvalidPeacock(format!(
                    "marginals at times {} and {} are not in convex order",
                    times[i],
                    times[i + 1]
                )));
            }
        }
        Ok(Peacock { times, marginals })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn marginals(&self) -> &[Measure] {
        &self.marginals
    }

    pub fn initial(&self) -> &Measure {
        &self.marginals[0]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Marginals scaled by a common factor.
    pub fn scale(&self, c: f64) -> Peacock {
        Peacock {
            times: self.times.clone(),
            marginals: self.marginals.iter().map(|m| m.scale(c)).collect(),
        }
    }
}

/// Residual family `(µ_i - S^{prefix_i}(ν))_i` over the grid of `p`.
/// With `rescale` the result is renormalized by `1/(1 - mass(ν))` so the
/// marginals are probabilities again.
pub fn residual_peacock(p: &Peacock, nu: &Measure, rescale: bool) -> Result<Peacock> {
    let prefixes = prefix_shadows(nu, &p.marginals[1..])?;
    let mut marginals = Vec::with_capacity(p.len());
    marginals.push(p.marginals[0].subtract(nu)?);
    for (mu, s) in p.marginals[1..].iter().zip(&prefixes) {
        marginals.push(mu.subtract(s)?);
    }
    for (i, w) in marginals.windows(2).enumerate() {
        if !check_convex_order(&w[0], &w[1]) {
            return Err(Error::ResidualNotPeacock(i + 1));
        }
    }
    let factor = 1.0 - nu.mass();
    let marginals = if rescale && factor > tol::tolerance() {
        marginals.iter().map(|m| m.scale(1.0 / factor)).collect()
    } else {
        marginals
    };
    Ok(Peacock {
        times: p.times.clone(),
        marginals,
    })
}

/// Obstructed shadows `S^{µ_{T_{t_i}}}(ν^{α_k})` on an α × time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShadowTable {
    pub alphas: Vec<f64>,
    pub times: Vec<f64>,
    /// `entries[k][i]` is the shadow of `ν^{α_k}` through the prefix chain
    /// up to `times[i]` (the chain includes the initial marginal).
    pub entries: Vec<Vec<Measure>>,
}

impl ShadowTable {
    /// Validate the α grid: sorted, within [0,1], endpoints exactly 0 and 1.
    pub fn check_grid(alphas: &[f64]) -> Result<()> {
        if alphas.len() < 2
            || alphas.first() != Some(&0.0)
            || alphas.last() != Some(&1.0)
            || alphas.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParametrization(
                "alpha grid must increase strictly from 0 to 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Compute the table for a peacock and a parametrization of its initial
    /// marginal, and verify the structural invariants: row convex-order
    /// monotonicity in time, column positive-order monotonicity in α, and
    /// every entry a submeasure of its marginal.
    pub fn build(
        p: &Peacock,
        param: &crate::parametrization::Parametrization,
        alphas: &[f64],
    ) -> Result<ShadowTable> {
        Self::check_grid(alphas)?;
        if !param.base().approx_eq(p.initial()) {
            return Err(Error::InvalidParametrization(
                "parametrization base differs from the initial marginal".to_string(),
            ));
        }
        let mut entries = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            let nu = param.at_alpha(alpha)?;
            let mut row = Vec::with_capacity(p.len());
            let mut current = nu;
            for mu in p.marginals() {
                current = simple_shadow(&current, mu)?;
                row.push(current.clone());
            }
            entries.push(row);
        }
        let table = ShadowTable {
            alphas: alphas.to_vec(),
            times: p.times().to_vec(),
            entries,
        };
        table.validate(p)?;
        Ok(table)
    }

    fn validate(&self, p: &Peacock) -> Result<()> {
        for (k, row) in self.entries.iter().enumerate() {
            for (i, entry) in row.iter().enumerate() {
                if !check_positive_order(entry, &p.marginals()[i]) {
                    return Err(Error::OrderViolation {
                        relation: "table entry <=_+ marginal",
                        chain_index: Some(i),
                    });
                }
                if i + 1 < row.len() && !check_convex_order(entry, &row[i + 1]) {
                    return Err(Error::OrderViolation {
                        relation: "table row <=_c in time",
                        chain_index: Some(i),
                    });
                }
                if k + 1 < self.entries.len()
                    && !check_positive_order(entry, &self.entries[k + 1][i])
                {
                    return Err(Error::OrderViolation {
                        relation: "table column <=_+ in alpha",
                        chain_index: Some(k),
                    });
                }
            }
        }
        Ok(())
    }
}
