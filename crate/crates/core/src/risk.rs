//! VaR, CVaR and EVaR of discrete loss distributions, plus the normal closed
//! forms.
//!
//! All three sample measures share one descending sort of the losses with ties
//! merged. The EVaR is the infimum over `t > 0` of
//! `t ln(sum_j p_j exp(x_j / t)) - t ln(alpha)`, a convex function of `t`
//! minimized by a logarithmic grid scan followed by golden-section refinement.
//! Two limits of that problem are reported explicitly instead of as a
//! degenerate `t`: `t -> 0`, where the value is the largest loss, and
//! `t -> inf`, where the value is the mean (only when `alpha = 1`).
//!
//! A population Student-t law has no moment generating function, so its EVaR is
//! infinite; everything here works on finite samples, where it is always finite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::model::{LossSample, RiskLevel};
use crate::normal;

/// Where the minimizing `t` of the EVaR problem lies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", content = "t", rename_all = "snake_case")]
pub enum TStar {
    /// Attained at a finite positive `t`.
    Interior(f64),
    /// Infimum approached as `t -> 0`; the value is the largest loss.
    Esssup,
    /// Infimum approached as `t -> inf`; the value is the mean loss.
    Mean,
}

impl TStar {
    pub fn value(self) -> Option<f64> {
        match self {
            TStar::Interior(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub var: f64,
    pub cvar: f64,
    pub evar: f64,
    pub alpha: RiskLevel,
    pub evar_t_star: TStar,
}

/// Tail-mass comparisons allow this much accumulated round-off.
const TAIL_TOL: f64 = 1e-12;

/// Distinct loss values in descending order with their merged probabilities.
fn descending_atoms(sample: &LossSample) -> Vec<(f64, f64)> {
    let mut idx: Vec<usize> = (0..sample.len()).collect();
    let x = sample.losses();
    let p = sample.probs();
    idx.sort_unstable_by(|&a, &b| x[b].total_cmp(&x[a]));
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(idx.len());
    for i in idx {
        match atoms.last_mut() {
            Some((v, mass)) if *v == x[i] => *mass += p[i],
            _ => atoms.push((x[i], p[i])),
        }
    }
    atoms
}

fn var_cvar_from_atoms(atoms: &[(f64, f64)], alpha: f64) -> (f64, f64) {
    // VaR is the smallest atom whose strictly-greater mass is at most alpha.
    let mut tail = 0.0;
    let mut q = atoms[0].0;
    let mut k = 0;
    for (i, &(v, mass)) in atoms.iter().enumerate() {
        if tail > alpha + TAIL_TOL {
            break;
        }
        q = v;
        k = i;
        tail += mass;
    }
    let excess: f64 = atoms[..k].iter().map(|&(v, mass)| mass * (v - q)).sum();
    (q, q + excess / alpha)
}

/// Value-at-risk: `inf { t : P(X <= t) >= 1 - alpha }`.
pub fn var_sample(sample: &LossSample, alpha: RiskLevel) -> f64 {
    var_cvar_from_atoms(&descending_atoms(sample), alpha.value()).0
}

/// Conditional value-at-risk via the exact tail formula
/// `q + (1/alpha) sum_{x_j > q} p_j (x_j - q)` with `q` the VaR.
pub fn cvar_sample(sample: &LossSample, alpha: RiskLevel) -> f64 {
    var_cvar_from_atoms(&descending_atoms(sample), alpha.value()).1
}

/// `t ln(sum_j p_j e^{x_j/t}) - t ln(alpha)`, evaluated with the largest loss
/// factored out so that no exponential overflows.
pub fn evar_objective_1d(t: f64, sample: &LossSample, alpha: RiskLevel) -> Result<f64, ValidationError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(ValidationError::Domain(format!(
            "t must be positive and finite, got {t}"
        )));
    }
    let max = sample.max();
    Ok(objective_shifted(
        t,
        sample.losses(),
        sample.probs(),
        max,
        alpha.value().ln(),
    ))
}

fn objective_shifted(t: f64, x: &[f64], p: &[f64], max: f64, ln_alpha: f64) -> f64 {
    let s: f64 = x.iter().zip(p).map(|(&xj, &pj)| pj * ((xj - max) / t).exp()).sum();
    max + t * s.ln() - t * ln_alpha
}

const GRID_DECADES: f64 = 16.0;
const GRID_POINTS_PER_DECADE: usize = 4;
const GOLDEN_REL_TOL: f64 = 1e-10;

/// Entropic value-at-risk and the location of its minimizing `t`.
pub fn evar_sample(sample: &LossSample, alpha: RiskLevel) -> (f64, TStar) {
    let x = sample.losses();
    let p = sample.probs();
    let max = sample.max();
    let min = sample.min();
    if max == min {
        return (max, TStar::Esssup);
    }
    if alpha.value() == 1.0 {
        return (sample.mean(), TStar::Mean);
    }
    let ln_alpha = alpha.value().ln();
    let f = |t: f64| objective_shifted(t, x, p, max, ln_alpha);

    let spread = (max - min).max(1.0);
    let k_max = GRID_DECADES as usize * GRID_POINTS_PER_DECADE;
    let t_at = |k: usize| spread * 10f64.powf(-8.0 + k as f64 / GRID_POINTS_PER_DECADE as f64);
    let mut best = (0, f64::INFINITY);
    for k in 0..=k_max {
        let v = f(t_at(k));
        if v < best.1 {
            best = (k, v);
        }
    }
    let lo = t_at(best.0.saturating_sub(1));
    let hi = t_at((best.0 + 1).min(k_max));
    let (t_star, value) = golden_section(f, lo, hi);

    if value >= max {
        (max, TStar::Esssup)
    } else {
        (value, TStar::Interior(t_star))
    }
}

/// Minimizes a unimodal `f` on `[a, b]` until the bracket is relatively
/// narrower than [`GOLDEN_REL_TOL`].
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > GOLDEN_REL_TOL * (a.abs() + b.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let (fa, fb) = (f(a), f(b));
    [(a, fa), (c, fc), (d, fd), (b, fb)]
        .into_iter()
        .min_by(|l, r| l.1.total_cmp(&r.1))
        .expect("nonempty")
}

/// All three measures from one sort.
pub fn risk_report(sample: &LossSample, alpha: RiskLevel) -> RiskReport {
    let (var, cvar) = var_cvar_from_atoms(&descending_atoms(sample), alpha.value());
    let (evar, evar_t_star) = evar_sample(sample, alpha);
    RiskReport {
        var,
        cvar,
        evar,
        alpha,
        evar_t_star,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    VaR,
    CVaR,
    EVaR,
}

/// VaR, CVaR or EVaR of a normal loss `N(mu, sigma^2)`.
pub fn risk_normal_closed_form(
    mu: f64,
    sigma: f64,
    alpha: RiskLevel,
    measure: Measure,
) -> Result<f64, ValidationError> {
    if !(sigma >= 0.0) {
        return Err(ValidationError::Domain(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    let a = alpha.value();
    if measure != Measure::EVaR && a >= 1.0 {
        return Err(ValidationError::Domain(format!(
            "{measure:?} closed form needs alpha in (0, 1), got {a}"
        )));
    }
    let scale = match measure {
        Measure::VaR => normal::upper_quantile(a),
        Measure::CVaR => normal::pdf(normal::upper_quantile(a)) / a,
        Measure::EVaR => (-2.0 * a.ln()).sqrt(),
    };
    Ok(mu + scale * sigma)
}

/// Builds the pair `(X, Y_M)` showing that VaR and CVaR ignore how the mass
/// below the VaR is distributed: `X` is a normal sample with distinct values
/// and `Y_M` shifts every value strictly below the sample VaR of `X` down by
/// `m`. Returns losses with uniform weights.
pub fn monotonicity_counterexample(
    mu: f64,
    sigma: f64,
    alpha: RiskLevel,
    m: f64,
    n: usize,
    seed: u64,
) -> Result<(LossSample, LossSample), ValidationError> {
    if !(m > 0.0) {
        return Err(ValidationError::Domain(format!("shift M must be positive, got {m}")));
    }
    if n == 0 {
        return Err(ValidationError::EmptyMatrix);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha20Rng| mu + sigma * rng.sample::<f64, _>(StandardNormal);
    let mut x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
    // Redraw duplicates so the VaR atom is a single sample.
    loop {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]));
        let dups: Vec<usize> = order.windows(2).filter(|w| x[w[0]] == x[w[1]]).map(|w| w[1]).collect();
        if dups.is_empty() || sigma == 0.0 {
            break;
        }
        for i in dups {
            x[i] = draw(&mut rng);
        }
    }
    let xs = LossSample::uniform(x)?;
    let q = var_sample(&xs, alpha);
    let y = xs.losses().iter().map(|&v| if v < q { v - m } else { v }).collect();
    let ys = xs.with_losses(y)?;
    Ok((xs, ys))
}
