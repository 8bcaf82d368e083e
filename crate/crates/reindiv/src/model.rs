//! Market model: claim law, premium rate, solvency coefficient and the
//! minimal retention level.
//!
//! The claim-size model is the proportional family `f(x, y) = rho * x * y`
//! with a finite discrete claim law. For a claim `y` the insurer covers
//! `y ∧ u` (retention `u`) and the reinsurer the excess `(y - u)⁺`.

use thiserror::Error;

/// Claim probabilities must sum to one within this tolerance.
const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("claim law must contain at least one atom")]
    EmptyClaimLaw,
    #[error("claim atom {index}: size {size} must be strictly positive")]
    NonPositiveClaim { index: usize, size: f64 },
    #[error("claim atom {index}: probability {prob} must be strictly positive")]
    NonPositiveProb { index: usize, prob: f64 },
    #[error("claim atoms must be strictly increasing in size")]
    UnsortedClaims,
    #[error("claim probabilities sum to {sum}, expected 1 within 1e-12")]
    ProbSum { sum: f64 },
    #[error("parameter {name} = {value} out of range: {constraint}")]
    ParamRange {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("retention {u} below the minimal admissible level {u_min}")]
    RetentionTooLow { u: f64, u_min: f64 },
}

/// One claim-size atom of the discrete law `G = Σ p_i δ_{y_i}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimAtom {
    pub size: f64,
    pub prob: f64,
}

/// Finite discrete claim-size law on `(0, ∞)`.
///
/// Represents the probability measure `G(dy)`; the claim intensity measure is
/// `π(dy) = β G(dy)`. Atoms are strictly increasing in size, probabilities
/// strictly positive and normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimLaw {
    atoms: Vec<ClaimAtom>,
}

impl ClaimLaw {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        if atoms.is_empty() {
            return Err(ModelError::EmptyClaimLaw);
        }
        let mut sum = 0.0;
        for (i, &(y, p)) in atoms.iter().enumerate() {
            if !(y > 0.0) {
                return Err(ModelError::NonPositiveClaim { index: i, size: y });
            }
            if !(p > 0.0) {
                return Err(ModelError::NonPositiveProb { index: i, prob: p });
            }
            if i > 0 && atoms[i - 1].0 >= y {
                return Err(ModelError::UnsortedClaims);
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ModelError::ProbSum { sum });
        }
        Ok(Self {
            atoms: atoms
                .into_iter()
                .map(|(size, prob)| ClaimAtom { size, prob })
                .collect(),
        })
    }

    /// Single-atom (Dirac) law with all mass at `size`.
    pub fn dirac(size: f64) -> Result<Self, ModelError> {
        Self::new(vec![(size, 1.0)])
    }

    pub fn atoms(&self) -> &[ClaimAtom] {
        &self.atoms
    }

    /// Largest claim size.
    pub fn max_claim(&self) -> f64 {
        self.atoms.last().unwrap().size
    }

    /// `E[Y]`
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.size).sum()
    }

    /// `E[(Y - u)⁺]` — the reinsured part per unit exposure.
    pub fn mean_excess(&self, u: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.prob * (a.size - u).max(0.0))
            .sum()
    }

    /// `E[Y ∧ u]` — the retained part per unit exposure.
    pub fn mean_capped(&self, u: f64) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.size.min(u)).sum()
    }

    /// Inverse-CDF sampling from a uniform draw in `(0, 1]`.
    pub fn sample(&self, unit: f64) -> f64 {
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.prob;
            if unit <= acc {
                return a.size;
            }
        }
        self.max_claim()
    }
}

/// Report of the model assumptions for a given parameter set.
///
/// `a1_ok` covers the structural conditions on `f`; for the built-in
/// proportional family they hold whenever `rho ∈ (0, 1]`. `a2_ok` is the
/// discounting condition `r > 2 (1 + k1) β / ζ0`. `lipschitz_scale_ok` is
/// `a · rho · max_i y_i ≤ 1`, under which a single claim can never overshoot
/// the reserve; parameter sets violating it are still usable — a claim that
/// exceeds the reserve simply triggers ruin.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub a2_threshold: f64,
    pub lipschitz_scale_ok: bool,
    pub messages: Vec<String>,
}

/// All market constants plus the derived quantities `ν`, `a` and `ū`.
///
/// Immutable after construction; all operations are pure.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Insurer safety loading.
    pub k1: f64,
    /// Reinsurer safety loading.
    pub k2: f64,
    /// Claim arrival intensity (1/time).
    pub beta: f64,
    /// Solvency factor.
    pub zeta0: f64,
    /// Discount rate (1/time).
    pub r: f64,
    /// Exposed fraction of the portfolio, `rho ∈ (0, 1]`.
    pub rho: f64,
    pub claims: ClaimLaw,
    nu: f64,
    a: f64,
    u_min: f64,
    raw_retention_root: f64,
    loadings_ordered: bool,
}

impl ModelParams {
    pub fn new(
        k1: f64,
        k2: f64,
        beta: f64,
        zeta0: f64,
        r: f64,
        rho: f64,
        claims: ClaimLaw,
    ) -> Result<Self, ModelError> {
        let check = |name, value: f64, ok: bool, constraint| {
            if ok {
                Ok(())
            } else {
                Err(ModelError::ParamRange {
                    name,
                    value,
                    constraint,
                })
            }
        };
        check("k1", k1, k1 >= 0.0, "k1 >= 0")?;
        check("beta", beta, beta >= 0.0 && beta.is_finite(), "beta >= 0")?;
        check("zeta0", zeta0, zeta0 > 0.0, "zeta0 > 0")?;
        check("r", r, r > 0.0, "r > 0")?;
        check("rho", rho, rho > 0.0 && rho <= 1.0, "rho in (0, 1]")?;
        let nu = rho * claims.mean();
        let a = 1.0 / (zeta0 * nu);
        let (u_min, raw_retention_root) = min_retention(k1, k2, beta, &claims);
        Ok(Self {
            k1,
            k2,
            beta,
            zeta0,
            r,
            rho,
            claims,
            nu,
            a,
            u_min,
            raw_retention_root,
            loadings_ordered: k1 < k2,
        })
    }

    /// `ν = E[f(1, Y)] = rho · E[Y]`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Solvency coefficient `a = 1 / (ζ0 ν)`; the maximum contract count at
    /// reserve `x` is `a·x`.
    pub fn solvency_coefficient(&self) -> f64 {
        self.a
    }

    /// Minimal admissible retention `ū` (clamped at 0).
    pub fn u_min(&self) -> f64 {
        self.u_min
    }

    /// Upper end of the control interval; retention above the largest claim
    /// is equivalent to full retention.
    pub fn u_max(&self) -> f64 {
        self.claims.max_claim()
    }

    /// Unclamped root of `p(u) = β E[f(1, Y ∧ u)]` (negative when the
    /// reinsurer is cheaper than the insurer).
    pub fn raw_retention_root(&self) -> f64 {
        self.raw_retention_root
    }

    /// Whether the general model's ordering `k1 < k2` holds. The solver and
    /// simulator accept either ordering.
    pub fn loadings_ordered(&self) -> bool {
        self.loadings_ordered
    }

    /// Premium rate per contract:
    /// `p(u) = (1 + k1) β ν − (1 + k2) β E[f(1, (Y − u)⁺)]`.
    ///
    /// Rejects inadmissible retention `u < ū`.
    pub fn premium_rate(&self, u: f64) -> Result<f64, ModelError> {
        if u < self.u_min - PROB_SUM_TOL {
            return Err(ModelError::RetentionTooLow {
                u,
                u_min: self.u_min,
            });
        }
        Ok(self.premium_rate_unchecked(u))
    }

    pub(crate) fn premium_rate_unchecked(&self, u: f64) -> f64 {
        (1.0 + self.k1) * self.beta * self.nu
            - (1.0 + self.k2) * self.beta * self.rho * self.claims.mean_excess(u)
    }

    /// Reserve growth-rate bound `(1 + k1) β / ζ0`; `a·p(u)` attains it
    /// exactly at full retention.
    pub fn max_drift(&self) -> f64 {
        (1.0 + self.k1) * self.beta / self.zeta0
    }

    /// Fraction of the reserve lost to a claim of size `claim` at retention
    /// `u`: `c = a · rho · (claim ∧ u)`. A claim with `c ≥ 1` wipes out the
    /// reserve (ruin).
    pub fn jump_fraction(&self, u: f64, claim: f64) -> f64 {
        self.a * self.rho * claim.min(u)
    }

    pub fn validate_assumptions(&self) -> AssumptionReport {
        let mut messages = Vec::new();
        // A1 is analytic for f(x, y) = rho * x * y: convex non-decreasing in
        // x, f(0, .) = 0, increasing in y, Lipschitz in x uniformly on the
        // bounded claim support.
        let a1_ok = self.rho > 0.0 && self.rho <= 1.0;
        let a2_threshold = 2.0 * self.max_drift();
        let a2_ok = self.r > a2_threshold;
        if !a2_ok {
            messages.push(format!(
                "discounting assumption fails: r = {} <= 2(1+k1)beta/zeta0 = {}",
                self.r, a2_threshold
            ));
        }
        let scale = self.a * self.rho * self.claims.max_claim();
        let lipschitz_scale_ok = scale <= 1.0;
        if !lipschitz_scale_ok {
            messages.push(format!(
                "a*rho*max_claim = {scale} > 1: a single claim can exceed the reserve \
                 (treated as ruin by solver and simulator)"
            ));
        }
        if !self.loadings_ordered {
            messages.push(format!(
                "loadings not ordered: k1 = {} >= k2 = {} (full cession is self-financing)",
                self.k1, self.k2
            ));
        }
        AssumptionReport {
            a1_ok,
            a2_ok,
            a2_threshold,
            lipschitz_scale_ok,
            messages,
        }
    }
}

/// Smallest retention `ū ≥ 0` with `p(u) ≥ β E[f(1, Y ∧ u)]`, found by
/// bisection on `[0, max claim]`; both sides are continuous and monotone in
/// `u`. Returns `(clamped, raw_root)`: when the inequality already holds at
/// `u = 0` the clamp applies and `raw_root` records the (non-positive)
/// crossing point of the affine extension.
pub fn min_retention(k1: f64, k2: f64, beta: f64, claims: &ClaimLaw) -> (f64, f64) {
    // gap(u) = [p(u) - beta E[f(1, Y ∧ u)]] / (beta rho); beta rho > 0 cancels.
    let gap = |u: f64| {
        (1.0 + k1) * claims.mean() - (1.0 + k2) * claims.mean_excess(u) - claims.mean_capped(u)
    };
    if beta == 0.0 {
        return (0.0, 0.0);
    }
    if gap(0.0) >= 0.0 {
        // For u <= 0 the gap extends affinely as (k1 - k2) E[Y] + k2 u.
        let raw = if k2 > 0.0 {
            (k2 - k1) * claims.mean() / k2
        } else {
            0.0
        };
        return (0.0, raw.min(0.0));
    }
    let mut lo = 0.0;
    let mut hi = claims.max_claim();
    debug_assert!(gap(hi) >= 0.0, "gap(max claim) = k1 E[Y] must be >= 0");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            break;
        }
    }
    (hi, hi)
}
