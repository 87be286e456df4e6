// SPDX-License-Identifier: Apache-2.0

//! Interim disclosure: what the doctor reveals after the patient has tested
//! and turned out sick, given interim belief `mu1`.
//!
//! The doctor maximizes `E P` subject to the patient preferring the test,
//! `E V >= Vbar(mu1)`. The solution has the same shape across all variants
//! handled here, so a single [`SplitKernel`] computes it from a cutoff, a
//! reward curve and an outside option.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{
    self, boundary, feasible_run, tangent_from_point, ConvexMinorant, Direction, EnvelopeError,
    LocalConcavification,
};
use crate::model::{Atom, InterimRegion, Model, ModelError, PosteriorLottery, Thresholds};

/// Slack below which a region test still counts as satisfied.
pub const REGION_TOL: f64 = 1e-12;
/// Patients treat utility gaps smaller than this as indifference.
pub const INDIFFERENCE_TOL: f64 = 1e-10;
/// Grid used to locate thresholds before bisection.
pub const SCAN_GRID: usize = 2001;
/// A split is needed when the concavified reward exceeds the raw one by more.
pub const SPLIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

type Curve = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type BoxCurve = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// The constrained split problem
/// `max E[payoff] s.t. E[reward] >= outside(mu)` where the doctor's payoff
/// is high exactly on `[0, cutoff]`.
#[derive(Clone)]
pub struct SplitKernel {
    pub cutoff: f64,
    reward: Curve,
    outside: Curve,
    /// Reward constant on `[0, cutoff]`; enables the closed-form lower atom.
    pub flat_below: bool,
    /// Touch point of the tangent from `(0, reward(0))` over `[cutoff, 1]`.
    pub tangent: f64,
    pub tangent_slope: f64,
    pub degenerate: bool,
    pub f_end: Option<f64>,
    pub d_end: Option<f64>,
    pub m_run: Option<(f64, f64)>,
    pub fear: bool,
}

impl std::fmt::Debug for SplitKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitKernel")
            .field("cutoff", &self.cutoff)
            .field("tangent", &self.tangent)
            .field("f_end", &self.f_end)
            .field("d_end", &self.d_end)
            .field("m_run", &self.m_run)
            .finish()
    }
}

impl SplitKernel {
    pub fn new(
        cutoff: f64,
        reward: Curve,
        outside: Curve,
        flat_below: bool,
    ) -> Result<Self, SolveError> {
        let k = cutoff;
        let (r0, r1, rk) = (reward(0.0), reward(1.0), reward(k));
        let degenerate = r1 - rk < 1e-12;
        let (tangent, tangent_slope) = if degenerate {
            (k, if k > 0.0 { (rk - r0) / k } else { 0.0 })
        } else {
            let t = tangent_from_point(|x| reward(x), (0.0, r0), (k, 1.0), Direction::MaxSlope)?;
            (t.touch_point, t.slope)
        };
        let mut kernel = SplitKernel {
            cutoff,
            reward,
            outside,
            flat_below,
            tangent,
            tangent_slope,
            degenerate,
            f_end: None,
            d_end: None,
            m_run: None,
            fear: false,
        };
        kernel.fear = kernel.reward_at(0.0) >= kernel.outside_at(0.0);
        let knots = [k, tangent];
        let initial = |g: &dyn Fn(f64) -> f64| -> Option<f64> {
            if g(0.0) < -REGION_TOL {
                return None;
            }
            feasible_run(g, 0.0, 1.0, SCAN_GRID, &knots, REGION_TOL).map(|r| r.1)
        };
        kernel.f_end = initial(&|m| kernel.guiding_value(m) - kernel.outside_at(m));
        kernel.d_end = initial(&|m| kernel.disclosure_value(m) - kernel.outside_at(m));
        kernel.m_run = feasible_run(
            |m| kernel.rewarding_value(m) - kernel.outside_at(m),
            0.0,
            1.0,
            SCAN_GRID,
            &knots,
            REGION_TOL,
        );
        Ok(kernel)
    }

    pub fn reward_at(&self, x: f64) -> f64 {
        (self.reward)(x)
    }

    pub fn outside_at(&self, x: f64) -> f64 {
        (self.outside)(x)
    }

    /// Patient value of the signal that only steers treatment.
    pub fn guiding_value(&self, mu: f64) -> f64 {
        let k = self.cutoff;
        if mu <= k {
            self.reward_at(mu)
        } else {
            let w = (mu - k) / (1.0 - k);
            (1.0 - w) * self.reward_at(k) + w * self.reward_at(1.0)
        }
    }

    pub fn disclosure_value(&self, mu: f64) -> f64 {
        mu * self.reward_at(1.0) + (1.0 - mu) * self.reward_at(0.0)
    }

    /// Highest patient value attainable at `mu`.
    pub fn rewarding_value(&self, mu: f64) -> f64 {
        if mu < self.tangent {
            self.split_value(mu, 0.0, self.tangent)
        } else {
            self.reward_at(mu)
        }
    }

    fn split_value(&self, mu: f64, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return self.reward_at(mu);
        }
        let w = (mu - lo) / (hi - lo);
        (1.0 - w) * self.reward_at(lo) + w * self.reward_at(hi)
    }

    pub fn region(&self, mu: f64) -> InterimRegion {
        // With a nonlinear outside option the guiding and disclosure sets
        // need not start at zero, so membership is also checked pointwise.
        let o = self.outside_at(mu);
        if self.f_end.is_some_and(|e| mu <= e) || self.guiding_value(mu) - o >= -REGION_TOL {
            InterimRegion::InF
        } else if self.d_end.is_some_and(|e| mu <= e)
            || self.disclosure_value(mu) - o >= -REGION_TOL
        {
            InterimRegion::InDNotF
        } else if self.m_run.is_some_and(|(a, b)| a <= mu && mu <= b) {
            InterimRegion::InMNotD
        } else {
            InterimRegion::OutsideM
        }
    }

    /// Lower atom of the perfect-good-news signal `{l, 1}` that leaves the
    /// patient indifferent.
    pub fn lower_atom(&self, mu: f64) -> Result<f64, SolveError> {
        let top = self.cutoff.min(mu);
        let o = self.outside_at(mu);
        if self.flat_below {
            let (r0, r1) = (self.reward_at(0.0), self.reward_at(1.0));
            let l = 1.0 - (1.0 - mu) * (r1 - r0) / (r1 - o);
            if l < -1e-9 {
                return Err(SolveError::Inconsistent(format!(
                    "lower atom {l} below zero at {mu}"
                )));
            }
            return Ok(l.clamp(0.0, top));
        }
        let r1 = self.reward_at(1.0);
        let ok = |y: f64| {
            let w = (mu - y) / (1.0 - y);
            (1.0 - w) * self.reward_at(y) + w * r1 - o >= 0.0
        };
        if ok(top) {
            return Ok(top);
        }
        let n = SCAN_GRID;
        for i in 1..n {
            let y = top * (1.0 - i as f64 / (n - 1) as f64);
            if ok(y) {
                let prev = top * (1.0 - (i - 1) as f64 / (n - 1) as f64);
                return Ok(boundary(ok, y, prev));
            }
        }
        let w = mu;
        if (1.0 - w) * self.reward_at(0.0) + w * r1 - o >= -1e-9 {
            return Ok(0.0);
        }
        Err(SolveError::Inconsistent(format!(
            "no binding lower atom at {mu}"
        )))
    }

    /// Upper atom of the perfect-bad-news signal `{0, h}` that leaves the
    /// patient indifferent, largest such `h`.
    pub fn upper_atom(&self, mu: f64) -> Result<f64, SolveError> {
        let lo = self.tangent.max(mu);
        let o = self.outside_at(mu);
        let g = |h: f64| self.split_value(mu, 0.0, h) - o;
        if g(1.0) >= 0.0 {
            return Ok(1.0);
        }
        if g(lo) < 0.0 {
            if g(lo) >= -1e-9 {
                return Ok(lo);
            }
            return Err(SolveError::Inconsistent(format!(
                "upper atom not bracketed on [{lo}, 1] at {mu}"
            )));
        }
        let h = boundary(|h| g(h) >= 0.0, lo, 1.0);
        // A bad-news atom within rounding of the belief carries no news.
        Ok(if h - mu <= 1e-9 { mu } else { h })
    }

    /// Optimal signal at `mu` before any Carathéodory splitting.
    pub fn signal(&self, mu: f64) -> Result<(InterimRegion, PosteriorLottery), SolveError> {
        let region = self.region(mu);
        let lottery = match region {
            InterimRegion::InF => guiding_future_signal(mu, self.cutoff),
            InterimRegion::InDNotF => PosteriorLottery::binary(mu, self.lower_atom(mu)?, 1.0),
            InterimRegion::InMNotD => PosteriorLottery::binary(mu, 0.0, self.upper_atom(mu)?),
            InterimRegion::OutsideM => PosteriorLottery::degenerate(mu),
        };
        Ok((region, lottery))
    }
}

/// `{cutoff, 1}` above the cutoff, no information below it.
pub fn guiding_future_signal(mu1: f64, mu_e: f64) -> PosteriorLottery {
    if mu1 <= mu_e {
        PosteriorLottery::degenerate(mu1)
    } else {
        PosteriorLottery::binary(mu1, mu_e, 1.0)
    }
}

/// `{0, mu_v}` below `mu_v`, no information above it.
pub fn rewarding_past_signal(mu1: f64, mu_v: f64) -> PosteriorLottery {
    if mu1 >= mu_v {
        PosteriorLottery::degenerate(mu1)
    } else {
        PosteriorLottery::binary(mu1, 0.0, mu_v)
    }
}

/// Tangent point from `(0, V(0))` to `V` on `[mu_e, 1]`, with a flag for a
/// flat right branch.
pub fn mu_v(model: &Model) -> Result<(f64, bool), SolveError> {
    let (v1, ve) = (model.v(1.0), model.v(model.mu_e));
    if v1 - ve < 1e-12 {
        return Ok((model.mu_e, true));
    }
    let t = tangent_from_point(
        |x| model.v(x),
        (0.0, model.v(0.0)),
        (model.mu_e, 1.0),
        Direction::MaxSlope,
    )?;
    Ok((t.touch_point, false))
}

/// Solved interim disclosure at one belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterimSolution {
    pub mu1: f64,
    pub accept_signal: PosteriorLottery,
    pub reject_signal: PosteriorLottery,
    pub region: InterimRegion,
    /// Whether the patient tests under these signals.
    pub accepts: bool,
    /// Unconditional health probability.
    pub doctor_value: f64,
    pub patient_value: f64,
    /// `E_accept V - E_reject V0`.
    pub pc_slack: f64,
}

#[derive(Clone)]
enum Variant {
    Concave,
    General {
        hull: Arc<LocalConcavification<BoxCurve>>,
        minorant: Arc<ConvexMinorant<BoxCurve>>,
    },
    Unconditional {
        hull: Arc<LocalConcavification<BoxCurve>>,
    },
}

/// Interim solver with thresholds computed once.
#[derive(Clone)]
pub struct InterimSolver {
    pub model: Model,
    pub kernel: SplitKernel,
    variant: Variant,
}

impl std::fmt::Debug for InterimSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InterimSolver")
            .field("model", &self.model)
            .field("kernel", &self.kernel)
            .finish()
    }
}

fn v_curve(model: &Model) -> Curve {
    let m = model.clone();
    Arc::new(move |x| m.v(x))
}

impl InterimSolver {
    /// Solver for a concave curve: reward `V`, outside option `Vbar`.
    pub fn new(model: &Model) -> Result<Self, SolveError> {
        let m = model.clone();
        let outside: Curve = Arc::new(move |x| m.vbar(x));
        let kernel = SplitKernel::new(model.mu_e, v_curve(model), outside, true)?;
        Ok(InterimSolver {
            model: model.clone(),
            kernel,
            variant: Variant::Concave,
        })
    }

    /// Solver for an arbitrary increasing curve: `V` is replaced by its
    /// concavification on each side of `mu_e` and `Vbar` by the convex
    /// minorant of `V0`.
    pub fn general(model: &Model, grid_n: usize) -> Result<Self, SolveError> {
        let m = model.clone();
        let v: BoxCurve = Box::new(move |x| m.v(x));
        let hull = Arc::new(envelope::local_concavification(v, model.mu_e, grid_n)?);
        let m = model.clone();
        let v0: BoxCurve = Box::new(move |x| m.v0(x));
        let minorant = Arc::new(ConvexMinorant::new(v0, grid_n)?);
        let (h, mn) = (hull.clone(), minorant.clone());
        let kernel = SplitKernel::new(
            model.mu_e,
            Arc::new(move |x| h.eval(x)),
            Arc::new(move |x| mn.eval(x)),
            true,
        )?;
        Ok(InterimSolver {
            model: model.clone(),
            kernel,
            variant: Variant::General { hull, minorant },
        })
    }

    /// Solver when the same signal is shown whether or not the patient tests:
    /// the constraint becomes `E (V - V0) >= 0`.
    pub fn unconditional(model: &Model, grid_n: usize) -> Result<Self, SolveError> {
        let m = model.clone();
        let gain: BoxCurve = Box::new(move |x| m.v(x) - m.v0(x));
        let hull = Arc::new(envelope::local_concavification(gain, model.mu_e, grid_n)?);
        let h = hull.clone();
        let kernel = SplitKernel::new(
            model.mu_e,
            Arc::new(move |x| h.eval(x)),
            Arc::new(|_| 0.0),
            false,
        )?;
        Ok(InterimSolver {
            model: model.clone(),
            kernel,
            variant: Variant::Unconditional { hull },
        })
    }

    pub fn thresholds(&self) -> Thresholds {
        let k = &self.kernel;
        Thresholds {
            mu_e: self.model.mu_e,
            mu_v: Some(k.tangent),
            mu_v_degenerate: k.degenerate,
            mu_f: k.f_end,
            mu_d: k.d_end,
            mu_m_low: k.m_run.map(|r| r.0),
            mu_m_high: k.m_run.map(|r| r.1),
            reacts_to_fear: self.model.reacts_to_fear(),
            ..Thresholds::default()
        }
    }

    /// The closed-form lower atom `1 - (1 - mu1)(V(1) - V(0)) / (V(1) - Vbar(mu1))`
    /// evaluated without clamping.
    pub fn lower_atom_formula(&self, mu1: f64) -> f64 {
        let m = &self.model;
        let (v0, v1) = (m.v(0.0), m.v(1.0));
        1.0 - (1.0 - mu1) * (v1 - v0) / (v1 - m.vbar(mu1))
    }

    pub fn lower_atom(&self, mu1: f64) -> Result<f64, SolveError> {
        self.kernel.lower_atom(mu1)
    }

    pub fn upper_atom(&self, mu1: f64) -> Result<f64, SolveError> {
        self.kernel.upper_atom(mu1)
    }

    fn refusal_signal(&self, mu1: f64, accept: &PosteriorLottery) -> PosteriorLottery {
        match &self.variant {
            Variant::Concave => PosteriorLottery::binary(mu1, 0.0, 1.0),
            Variant::General { minorant, .. } => {
                let (l, r) = minorant.bracket(mu1);
                PosteriorLottery::binary(mu1, l, r)
            }
            Variant::Unconditional { .. } => accept.clone(),
        }
    }

    fn split_atoms(&self, lottery: PosteriorLottery) -> Result<PosteriorLottery, SolveError> {
        let hull = match &self.variant {
            Variant::Concave => return Ok(lottery),
            Variant::General { hull, .. } | Variant::Unconditional { hull } => hull,
        };
        let mut atoms: Vec<Atom> = Vec::with_capacity(3);
        for a in &lottery.atoms {
            let x = a.posterior;
            if hull.eval(x) > hull.base(x) + SPLIT_TOL {
                let (l, r) = hull.segment_containing(x).ok_or_else(|| {
                    SolveError::Inconsistent(format!("no lifted segment contains {x}"))
                })?;
                let rho = (x - l) / (r - l);
                atoms.push(Atom {
                    posterior: l,
                    weight: a.weight * (1.0 - rho),
                });
                atoms.push(Atom {
                    posterior: r,
                    weight: a.weight * rho,
                });
            } else {
                atoms.push(*a);
            }
        }
        if atoms.len() > 3 {
            return Err(SolveError::Inconsistent(format!(
                "split produced {} atoms",
                atoms.len()
            )));
        }
        Ok(PosteriorLottery::from_atoms(lottery.prior, &atoms)?)
    }

    /// Optimal interim signals at `mu1`.
    pub fn solve(&self, mu1: f64) -> Result<InterimSolution, SolveError> {
        let (region, raw) = self.kernel.signal(mu1)?;
        let reject = self.refusal_signal(mu1, &raw);
        let plain = self.evaluate(mu1, region, raw.clone(), reject);
        if plain.accepts || region == InterimRegion::OutsideM {
            return Ok(plain);
        }
        let accept = self.split_atoms(raw)?;
        let reject = self.refusal_signal(mu1, &accept);
        Ok(self.evaluate(mu1, region, accept, reject))
    }

    /// Evaluates given signals at `mu1` with the patient best-responding.
    pub fn evaluate(
        &self,
        mu1: f64,
        region: InterimRegion,
        accept: PosteriorLottery,
        reject: PosteriorLottery,
    ) -> InterimSolution {
        let m = &self.model;
        let test_value = accept.expect(|x| m.v(x));
        let skip_value = reject.expect(|x| m.v0(x));
        let pc_slack = test_value - skip_value;
        let accepts = pc_slack >= -INDIFFERENCE_TOL;
        let (doctor_value, patient_value) = if accepts {
            (
                m.alpha() + (1.0 - m.alpha()) * accept.expect(|x| m.p(x)),
                test_value,
            )
        } else {
            (m.health_untested(mu1), skip_value)
        };
        InterimSolution {
            mu1,
            accept_signal: accept,
            reject_signal: reject,
            region,
            accepts,
            doctor_value,
            patient_value,
            pc_slack,
        }
    }

    /// Health probability under the optimal interim policy and no ex ante
    /// information.
    pub fn p_star(&self, mu1: f64) -> Result<f64, SolveError> {
        Ok(self.solve(mu1)?.doctor_value)
    }
}

/// Violations of monotone lower and upper atoms across a belief grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub checked_lower: usize,
    pub checked_upper: usize,
    pub lower_violations: Vec<(f64, f64)>,
    pub upper_violations: Vec<(f64, f64)>,
}

impl MonotonicityReport {
    pub fn ok(&self) -> bool {
        self.lower_violations.is_empty() && self.upper_violations.is_empty()
    }
}

/// Checks that `l` falls on the good-news region and `h` on the bad-news
/// region as `mu1` rises, using `n` points per region.
pub fn interim_monotonicity_check(
    solver: &InterimSolver,
    n: usize,
) -> Result<MonotonicityReport, SolveError> {
    let k = &solver.kernel;
    let mut report = MonotonicityReport::default();
    let f = k.f_end.unwrap_or(0.0);
    if let Some(d) = k.d_end {
        if d > f {
            let mut prev: Option<(f64, f64)> = None;
            for i in 1..=n {
                let mu = f + (d - f) * (i as f64 - 0.5) / n as f64;
                let l = k.lower_atom(mu)?;
                if let Some((pm, pl)) = prev {
                    if l > pl + 1e-12 {
                        report.lower_violations.push((pm, mu));
                    }
                }
                prev = Some((mu, l));
                report.checked_lower += 1;
            }
        }
    }
    if let Some((a, b)) = k.m_run {
        let start = k.d_end.unwrap_or(a).max(a);
        if b > start {
            let mut prev: Option<(f64, f64)> = None;
            for i in 1..=n {
                let mu = start + (b - start) * (i as f64 - 0.5) / n as f64;
                let h = k.upper_atom(mu)?;
                if let Some((pm, ph)) = prev {
                    if h > ph + 1e-12 {
                        report.upper_violations.push((pm, mu));
                    }
                }
                prev = Some((mu, h));
                report.checked_upper += 1;
            }
        }
    }
    Ok(report)
}

/// Convenience wrapper around [`InterimSolver::solve`].
pub fn optimal_interim(model: &Model, mu1: f64) -> Result<InterimSolution, SolveError> {
    InterimSolver::new(model)?.solve(mu1)
}

pub fn optimal_interim_unconditional(
    model: &Model,
    mu1: f64,
) -> Result<InterimSolution, SolveError> {
    InterimSolver::unconditional(model, envelope::DEFAULT_GRID)?.solve(mu1)
}

pub fn optimal_interim_general(model: &Model, mu1: f64) -> Result<InterimSolution, SolveError> {
    InterimSolver::general(model, envelope::DEFAULT_GRID)?.solve(mu1)
}

/// Region thresholds of the main program.
pub fn region_sets(model: &Model) -> Result<Thresholds, SolveError> {
    Ok(InterimSolver::new(model)?.thresholds())
}

pub fn p_star(model: &Model, mu1: f64) -> Result<f64, SolveError> {
    InterimSolver::new(model)?.p_star(mu1)
}
