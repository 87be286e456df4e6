// SPDX-License-Identifier: Apache-2.0

//! Primitives of the patient model: parameters, the anticipation curve,
//! posterior lotteries and the payoff functions `P`, `V`, `V0` and `Vbar`.
//!
//! A patient who tests and learns θ=0 ends with health probability
//! `v2 = max(p_bar - c, p_lower(mu))`; the anticipatory part of his utility is
//! `phi(v2)`. Both are folded into [`payoff_v`] rather than exposed as types.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking that lottery weights sum to one.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Tolerance used for Bayes plausibility of a lottery.
pub const MEAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("anticipation curve: {0}")]
    Curve(String),
    #[error("knot {index}: {reason}")]
    Knot { index: usize, reason: String },
    #[error("value {0} is outside [0, 1]")]
    Domain(f64),
    #[error("lottery: {0}")]
    Lottery(String),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParam {
        field,
        reason: reason.into(),
    }
}

/// Primitive parameters of the main model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Probability that the patient is initially healthy (θ=1).
    pub alpha: f64,
    /// Health probability when sick and treated.
    pub p_bar: f64,
    /// Untreated health probability in the good state.
    pub p_high: f64,
    /// Untreated health probability in the bad state.
    pub p_low: f64,
    /// Treatment cost in health-probability units.
    pub c: f64,
    /// Prior probability of the good state.
    pub mu0: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [
            ("alpha", self.alpha),
            ("p_bar", self.p_bar),
            ("p_high", self.p_high),
            ("p_low", self.p_low),
            ("c", self.c),
            ("mu0", self.mu0),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1)"));
        }
        if !(self.mu0 > 0.0 && self.mu0 < 1.0) {
            return Err(invalid("mu0", "must lie in (0, 1)"));
        }
        if self.p_low < 0.0 {
            return Err(invalid("p_low", "must be nonnegative"));
        }
        if self.p_high <= self.p_low {
            return Err(invalid("p_high", "must exceed p_low"));
        }
        if self.p_bar <= self.p_high || self.p_bar > 1.0 {
            return Err(invalid("p_bar", "must lie in (p_high, 1]"));
        }
        if self.c <= 0.0 {
            return Err(invalid("c", "must be positive"));
        }
        let net = self.p_bar - self.c;
        if !(net > self.p_low && net < self.p_high) {
            return Err(invalid(
                "c",
                format!("p_bar - c = {net} must lie strictly between p_low and p_high"),
            ));
        }
        Ok(())
    }

    /// Same parameters with a different prior.
    pub fn with_mu0(&self, mu0: f64) -> Self {
        ModelParams { mu0, ..*self }
    }
}

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Belief(f64);

impl Belief {
    pub fn new(value: f64) -> Result<Self, ModelError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Belief(value))
        } else {
            Err(ModelError::Domain(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Belief {
    type Error = ModelError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Belief::new(v)
    }
}

impl From<Belief> for f64 {
    fn from(b: Belief) -> f64 {
        b.0
    }
}

/// Distortion applied to continuation health probabilities.
///
/// Every family is normalized so that `phi(0) = 0` and `phi(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AnticipationCurve {
    Linear,
    /// `v^gamma`, `gamma` in (0, 1].
    Power {
        gamma: f64,
    },
    /// `(1 - exp(-k v)) / (1 - exp(-k))`.
    Exponential {
        k: f64,
    },
    /// Concave below `kink`, convex above it. `shape > 1` controls curvature;
    /// `shape = 1` is linear.
    InverseS {
        kink: f64,
        #[serde(default = "default_shape")]
        shape: f64,
    },
    /// Monotone piecewise-linear interpolation through `(v, phi)` knots.
    Tabulated {
        knots: Vec<(f64, f64)>,
    },
}

fn default_shape() -> f64 {
    2.0
}

impl AnticipationCurve {
    /// Checks parameter ranges. Tabulated curves must start at `v = 0`, end at
    /// `v = 1` and be strictly increasing in both coordinates.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            AnticipationCurve::Linear => Ok(()),
            AnticipationCurve::Power { gamma } => {
                if gamma.is_finite() && *gamma > 0.0 && *gamma <= 1.0 {
                    Ok(())
                } else {
                    Err(ModelError::Curve(format!(
                        "power exponent {gamma} not in (0, 1]"
                    )))
                }
            }
            AnticipationCurve::Exponential { k } => {
                if k.is_finite() && *k > 0.0 && *k < 500.0 {
                    Ok(())
                } else {
                    Err(ModelError::Curve(format!(
                        "exponential rate {k} not in (0, 500)"
                    )))
                }
            }
            AnticipationCurve::InverseS { kink, shape } => {
                if !(kink.is_finite() && *kink > 0.0 && *kink < 1.0) {
                    return Err(ModelError::Curve(format!(
                        "inverse-S kink {kink} not in (0, 1)"
                    )));
                }
                if !(shape.is_finite() && *shape >= 1.0) {
                    return Err(ModelError::Curve(format!(
                        "inverse-S shape {shape} below 1"
                    )));
                }
                Ok(())
            }
            AnticipationCurve::Tabulated { knots } => validate_knots(knots),
        }
    }

    /// Evaluates the curve. Arguments are clamped to `[0, 1]`.
    pub fn eval(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        match self {
            AnticipationCurve::Linear => v,
            AnticipationCurve::Power { gamma } => v.powf(*gamma),
            AnticipationCurve::Exponential { k } => (-(-k * v).exp_m1()) / (-(-k).exp_m1()),
            AnticipationCurve::InverseS { kink, shape } => {
                let (t, s) = (*kink, *shape);
                if v <= t {
                    t * (1.0 - (1.0 - v / t).powf(s))
                } else {
                    t + (1.0 - t) * ((v - t) / (1.0 - t)).powf(s)
                }
            }
            AnticipationCurve::Tabulated { knots } => tabulated_eval(knots, v),
        }
    }

    /// Analytic derivative. At kinks of tabulated curves the right derivative
    /// is returned (left derivative at `v = 1`).
    pub fn derivative(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        match self {
            AnticipationCurve::Linear => 1.0,
            AnticipationCurve::Power { gamma } => {
                if v == 0.0 && *gamma < 1.0 {
                    f64::INFINITY
                } else {
                    gamma * v.powf(gamma - 1.0)
                }
            }
            AnticipationCurve::Exponential { k } => k * (-k * v).exp() / (-(-k).exp_m1()),
            AnticipationCurve::InverseS { kink, shape } => {
                let (t, s) = (*kink, *shape);
                if v <= t {
                    s * (1.0 - v / t).powf(s - 1.0)
                } else {
                    s * ((v - t) / (1.0 - t)).powf(s - 1.0)
                }
            }
            AnticipationCurve::Tabulated { knots } => {
                let (lo, hi) = (norm_lo(knots), norm_hi(knots));
                let i = segment_index(knots, v);
                let (x0, y0) = knots[i];
                let (x1, y1) = knots[i + 1];
                (y1 - y0) / (x1 - x0) / (hi - lo)
            }
        }
    }

    /// Numeric inverse on `[0, 1]` by bisection; `|phi(result) - w| <= 1e-10`.
    pub fn inverse(&self, w: f64) -> Result<f64, ModelError> {
        phi_inverse(w, self)
    }

    /// True when the curve is concave on the whole unit interval.
    pub fn is_concave(&self) -> bool {
        match self {
            AnticipationCurve::Linear
            | AnticipationCurve::Power { .. }
            | AnticipationCurve::Exponential { .. } => true,
            AnticipationCurve::InverseS { shape, .. } => *shape == 1.0,
            AnticipationCurve::Tabulated { knots } => knots.windows(3).all(|w| {
                let s0 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let s1 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
                s1 <= s0 * (1.0 + 1e-12)
            }),
        }
    }

    /// Short family name used in reports.
    pub fn family_name(&self) -> &'static str {
        match self {
            AnticipationCurve::Linear => "linear",
            AnticipationCurve::Power { .. } => "power",
            AnticipationCurve::Exponential { .. } => "exponential",
            AnticipationCurve::InverseS { .. } => "inverse-s",
            AnticipationCurve::Tabulated { .. } => "tabulated",
        }
    }
}

fn validate_knots(knots: &[(f64, f64)]) -> Result<(), ModelError> {
    if knots.len() < 2 {
        return Err(ModelError::Knot {
            index: knots.len(),
            reason: "at least two knots are required".into(),
        });
    }
    for (i, &(x, y)) in knots.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(ModelError::Knot {
                index: i,
                reason: "coordinates must be finite".into(),
            });
        }
        if i > 0 {
            let (px, py) = knots[i - 1];
            if x <= px {
                return Err(ModelError::Knot {
                    index: i,
                    reason: format!("v = {x} does not exceed previous v = {px}"),
                });
            }
            if y <= py {
                return Err(ModelError::Knot {
                    index: i,
                    reason: format!("phi = {y} does not exceed previous phi = {py}"),
                });
            }
        }
    }
    if knots[0].0 != 0.0 {
        return Err(ModelError::Knot {
            index: 0,
            reason: "first knot must sit at v = 0".into(),
        });
    }
    let last = knots.len() - 1;
    if knots[last].0 != 1.0 {
        return Err(ModelError::Knot {
            index: last,
            reason: "last knot must sit at v = 1".into(),
        });
    }
    Ok(())
}

fn norm_lo(knots: &[(f64, f64)]) -> f64 {
    knots[0].1
}

fn norm_hi(knots: &[(f64, f64)]) -> f64 {
    knots[knots.len() - 1].1
}

fn segment_index(knots: &[(f64, f64)], v: f64) -> usize {
    let n = knots.len();
    match knots.partition_point(|k| k.0 <= v) {
        0 => 0,
        p if p >= n => n - 2,
        p => p - 1,
    }
}

// Knot values are rescaled affinely so the curve runs from 0 to 1.
fn tabulated_eval(knots: &[(f64, f64)], v: f64) -> f64 {
    let (lo, hi) = (norm_lo(knots), norm_hi(knots));
    let i = segment_index(knots, v);
    let (x0, y0) = knots[i];
    let (x1, y1) = knots[i + 1];
    let y = y0 + (y1 - y0) * (v - x0) / (x1 - x0);
    ((y - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Inverse of `phi` by bisection.
pub fn phi_inverse(w: f64, phi: &AnticipationCurve) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&w) {
        return Err(ModelError::Domain(w));
    }
    if w == 0.0 {
        return Ok(0.0);
    }
    if w == 1.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = phi.eval(mid);
        if f == w {
            return Ok(mid);
        }
        if f < w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (phi.eval(lo), phi.eval(hi));
    Ok(if (w - flo).abs() <= (fhi - w).abs() {
        lo
    } else {
        hi
    })
}

/// One support point of a posterior lottery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub posterior: f64,
    pub weight: f64,
}

/// A Bayes-plausible distribution over posteriors with at most three atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorLottery {
    pub prior: f64,
    pub atoms: Vec<Atom>,
}

impl PosteriorLottery {
    /// No information: all mass on the prior.
    pub fn degenerate(prior: f64) -> Self {
        PosteriorLottery {
            prior,
            atoms: vec![Atom {
                posterior: prior,
                weight: 1.0,
            }],
        }
    }

    /// Two-point split of `prior` into `lo <= prior <= hi`, weights from
    /// Bayes plausibility. Collapses to a single atom when either weight
    /// vanishes.
    pub fn binary(prior: f64, lo: f64, hi: f64) -> Self {
        if !(lo < prior && prior < hi) {
            return PosteriorLottery::degenerate(prior);
        }
        let w_hi = (prior - lo) / (hi - lo);
        PosteriorLottery {
            prior,
            atoms: vec![
                Atom {
                    posterior: lo,
                    weight: 1.0 - w_hi,
                },
                Atom {
                    posterior: hi,
                    weight: w_hi,
                },
            ],
        }
    }

    /// Builds a lottery from raw atoms: zero-weight atoms are dropped,
    /// coincident posteriors merged and the result checked.
    pub fn from_atoms(prior: f64, atoms: &[Atom]) -> Result<Self, ModelError> {
        let mut kept: Vec<Atom> = atoms.iter().copied().filter(|a| a.weight > 0.0).collect();
        if kept.is_empty() {
            return Err(ModelError::Lottery("no atom with positive weight".into()));
        }
        kept.sort_by(|a, b| a.posterior.total_cmp(&b.posterior));
        let mut merged: Vec<Atom> = Vec::with_capacity(kept.len());
        for a in kept {
            match merged.last_mut() {
                Some(last) if last.posterior == a.posterior => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        let lottery = PosteriorLottery {
            prior,
            atoms: merged,
        };
        lottery.validate()?;
        Ok(lottery)
    }

    /// Checks weights, plausibility and ordering.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.atoms.is_empty() || self.atoms.len() > 3 {
            return Err(ModelError::Lottery(format!(
                "{} atoms, expected 1 to 3",
                self.atoms.len()
            )));
        }
        let mut total = 0.0;
        let mut mean = 0.0;
        for (i, a) in self.atoms.iter().enumerate() {
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(ModelError::Lottery(format!(
                    "atom {i} has weight {}",
                    a.weight
                )));
            }
            if !(0.0..=1.0).contains(&a.posterior) {
                return Err(ModelError::Lottery(format!(
                    "atom {i} posterior {} outside [0, 1]",
                    a.posterior
                )));
            }
            if i > 0 && a.posterior <= self.atoms[i - 1].posterior {
                return Err(ModelError::Lottery(format!("atom {i} out of order")));
            }
            total += a.weight;
            mean += a.weight * a.posterior;
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(ModelError::Lottery(format!("weights sum to {total}")));
        }
        if (mean - self.prior).abs() > MEAN_TOL {
            return Err(ModelError::Lottery(format!(
                "mean {mean} differs from prior {}",
                self.prior
            )));
        }
        Ok(())
    }

    /// Expectation of `f` under the lottery.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(a.posterior)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn is_degenerate(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn lowest(&self) -> f64 {
        self.atoms[0].posterior
    }

    pub fn highest(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].posterior
    }

    pub fn posteriors(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.posterior).collect()
    }
}

/// A critical belief that may be undefined.
pub type Threshold = Option<f64>;

/// All critical beliefs of the main model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Thresholds {
    pub mu_e: f64,
    pub mu_v: Threshold,
    pub mu_v_degenerate: bool,
    pub mu_f: Threshold,
    pub mu_d: Threshold,
    pub mu_m_low: Threshold,
    pub mu_m_high: Threshold,
    pub mu_n: Threshold,
    pub mu_t: Threshold,
    pub mu_cal_v: Threshold,
    pub reacts_to_fear: bool,
}

/// Named policy regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    NoDisclosureNeeded,
    PreemptiveWarning,
    CommittedComfort,
    PreemptiveComfort,
    UnableToPersuade,
}

/// Where an interim belief falls relative to the motivation sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InterimRegion {
    InF,
    InDNotF,
    InMNotD,
    OutsideM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub label: RegimeLabel,
    pub region: InterimRegion,
}

/// Signals used at one ex ante posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePolicy {
    pub posterior: f64,
    /// Signal after the patient tests and θ=0.
    pub accept: PosteriorLottery,
    /// Signal after the patient refuses the test.
    pub reject: PosteriorLottery,
}

/// A fully specified two-stage policy together with its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub ex_ante: PosteriorLottery,
    pub stages: Vec<StagePolicy>,
    pub regime: Regime,
    /// Unconditional health probability.
    pub doctor_value: f64,
    /// Patient's ex ante expected utility.
    pub patient_value: f64,
    pub constraint_residuals: Vec<(String, f64)>,
    /// Whether the patient may walk away before the ex ante signal.
    pub ex_ante_participation: bool,
}

impl PolicyReport {
    /// Structural checks: every interim lottery is plausible for its atom and
    /// the stages line up with the ex ante atoms.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.ex_ante.validate()?;
        if self.stages.len() != self.ex_ante.atoms.len() {
            return Err(ModelError::Lottery(format!(
                "{} stages for {} ex ante atoms",
                self.stages.len(),
                self.ex_ante.atoms.len()
            )));
        }
        for (stage, atom) in self.stages.iter().zip(&self.ex_ante.atoms) {
            if stage.posterior != atom.posterior {
                return Err(ModelError::Lottery("stage posterior mismatch".into()));
            }
            for l in [&stage.accept, &stage.reject] {
                l.validate()?;
                if (l.prior - stage.posterior).abs() > MEAN_TOL {
                    return Err(ModelError::Lottery("interim prior mismatch".into()));
                }
            }
        }
        Ok(())
    }
}

/// `mu * p_high + (1 - mu) * p_low`.
pub fn p_lower(mu: f64, params: &ModelParams) -> f64 {
    mu * params.p_high + (1.0 - mu) * params.p_low
}

/// Belief at which a tested sick patient is indifferent about treatment.
pub fn mu_e(params: &ModelParams) -> Result<f64, ModelError> {
    let m = (params.p_bar - params.c - params.p_low) / (params.p_high - params.p_low);
    if m > 0.0 && m < 1.0 {
        Ok(m)
    } else {
        Err(invalid(
            "c",
            format!("indifference belief {m} outside (0, 1)"),
        ))
    }
}

fn mu_e_raw(params: &ModelParams) -> f64 {
    (params.p_bar - params.c - params.p_low) / (params.p_high - params.p_low)
}

/// Doctor's payoff conditional on θ=0: `p_bar` when the patient treats.
pub fn payoff_p(mu: f64, params: &ModelParams) -> f64 {
    if mu <= mu_e_raw(params) {
        params.p_bar
    } else {
        p_lower(mu, params)
    }
}

/// Patient's utility from testing with posterior `mu` about the bad-news state.
pub fn payoff_v(mu: f64, params: &ModelParams, phi: &AnticipationCurve) -> f64 {
    let a = params.alpha;
    if mu <= mu_e_raw(params) {
        a + (1.0 - a) * phi.eval(params.p_bar - params.c)
    } else {
        a + (1.0 - a) * phi.eval(p_lower(mu, params))
    }
}

/// Patient's utility from skipping the test.
pub fn payoff_v0(mu: f64, params: &ModelParams, phi: &AnticipationCurve) -> f64 {
    let a = params.alpha;
    phi.eval(a + (1.0 - a) * p_lower(mu, params))
}

/// Chord of `V0` between 0 and 1: the refusal payoff under full disclosure.
pub fn payoff_vbar(mu: f64, params: &ModelParams, phi: &AnticipationCurve) -> f64 {
    mu * payoff_v0(1.0, params, phi) + (1.0 - mu) * payoff_v0(0.0, params, phi)
}

/// True when the patient tests even at the most pessimistic belief.
pub fn reacts_to_fear(params: &ModelParams, phi: &AnticipationCurve) -> bool {
    payoff_v(0.0, params, phi) >= payoff_v0(0.0, params, phi)
}

/// Parameters and curve bundled with the cached indifference belief.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub phi: AnticipationCurve,
    pub mu_e: f64,
}

impl Model {
    pub fn new(params: ModelParams, phi: AnticipationCurve) -> Result<Self, ModelError> {
        params.validate()?;
        phi.validate()?;
        let mu_e = mu_e(&params)?;
        Ok(Model { params, phi, mu_e })
    }

    pub fn with_mu0(&self, mu0: f64) -> Self {
        Model {
            params: self.params.with_mu0(mu0),
            ..self.clone()
        }
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn p_lower(&self, mu: f64) -> f64 {
        p_lower(mu, &self.params)
    }

    pub fn p(&self, mu: f64) -> f64 {
        if mu <= self.mu_e {
            self.params.p_bar
        } else {
            self.p_lower(mu)
        }
    }

    /// Unconditional health probability when the patient tests at `mu`.
    pub fn health(&self, mu: f64) -> f64 {
        self.alpha() + (1.0 - self.alpha()) * self.p(mu)
    }

    /// Unconditional health probability when the patient skips the test.
    pub fn health_untested(&self, mu: f64) -> f64 {
        self.alpha() + (1.0 - self.alpha()) * self.p_lower(mu)
    }

    pub fn v(&self, mu: f64) -> f64 {
        let a = self.alpha();
        if mu <= self.mu_e {
            a + (1.0 - a) * self.phi.eval(self.params.p_bar - self.params.c)
        } else {
            a + (1.0 - a) * self.phi.eval(self.p_lower(mu))
        }
    }

    pub fn v0(&self, mu: f64) -> f64 {
        payoff_v0(mu, &self.params, &self.phi)
    }

    pub fn vbar(&self, mu: f64) -> f64 {
        payoff_vbar(mu, &self.params, &self.phi)
    }

    pub fn reacts_to_fear(&self) -> bool {
        self.v(0.0) >= self.v0(0.0)
    }

    /// Utility level of a patient who tests and treats for sure.
    pub fn treated_utility(&self) -> f64 {
        self.v(0.0)
    }
}
