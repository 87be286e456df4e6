// SPDX-License-Identifier: Apache-2.0

//! Three variants of the disclosure problem: a test that carries a fee but
//! no anticipatory utility, a doctor who designs the test itself, and a
//! sender persuading a receiver about an uncertain action cost.

use serde::{Deserialize, Serialize};

use crate::envelope::{bisect_root, golden_max, tangent_from_point, Direction};
use crate::exante::{assemble, ExAnteSolution};
use crate::interim::{InterimSolution, SolveError, INDIFFERENCE_TOL};
use crate::model::{
    AnticipationCurve, InterimRegion, Model, ModelError, ModelParams, PosteriorLottery, Regime,
    RegimeLabel, Thresholds,
};

fn invalid(field: &'static str, reason: impl Into<String>) -> SolveError {
    SolveError::Model(ModelError::InvalidParam {
        field,
        reason: reason.into(),
    })
}

// ---------------------------------------------------------------------------
// Test fee with linear anticipation

/// Main-model parameters plus a test fee. Anticipation is linear.
///
/// `psi` is measured in health-probability units of the sick state, so the
/// patient pays `(1 - alpha) * psi` in utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalCostParams {
    pub base: ModelParams,
    pub psi: f64,
}

impl PhysicalCostParams {
    /// Like the main model, except that treatment may be worthless
    /// (`p_bar - c <= p_low`); then nobody ever tests.
    pub fn validate(&self) -> Result<(), ModelError> {
        let b = &self.base;
        let mid = b.p_bar - 0.5 * (b.p_high + b.p_low);
        ModelParams { c: mid, ..*b }.validate()?;
        if !(b.c > 0.0 && b.p_bar - b.c < b.p_high) {
            return Err(ModelError::InvalidParam {
                field: "c",
                reason: format!(
                    "p_bar - c = {} must be positive and below p_high",
                    b.p_bar - b.c
                ),
            });
        }
        if !(self.psi.is_finite() && self.psi >= 0.0) {
            return Err(ModelError::InvalidParam {
                field: "psi",
                reason: format!("{} is not a nonnegative number", self.psi),
            });
        }
        Ok(())
    }
}

/// Solver for the fee variant. Everything is in closed form.
#[derive(Debug, Clone)]
pub struct PhysicalCostSolver {
    pub model: Model,
    pub psi: f64,
    /// Largest belief at which the patient tests with no information. May be
    /// negative, in which case nobody tests uninformed.
    pub mu_f: f64,
    /// Largest belief at which full disclosure gets the patient to test.
    pub mu_m: f64,
}

impl PhysicalCostSolver {
    pub fn new(params: &PhysicalCostParams) -> Result<Self, SolveError> {
        params.validate()?;
        let b = &params.base;
        let gap = b.p_bar - b.c - b.p_low;
        let model = Model {
            params: *b,
            phi: AnticipationCurve::Linear,
            mu_e: gap / (b.p_high - b.p_low),
        };
        let mu_f = (gap - params.psi) / (b.p_high - b.p_low);
        let mu_m = if gap > 0.0 {
            (gap - params.psi) / gap
        } else {
            f64::NEG_INFINITY
        };
        Ok(PhysicalCostSolver {
            model,
            psi: params.psi,
            mu_f,
            mu_m,
        })
    }

    /// Utility cost of the test.
    pub fn fee(&self) -> f64 {
        (1.0 - self.model.alpha()) * self.psi
    }

    /// `E V - fee - V0(mu)` for a signal shown to a tester.
    pub fn slack(&self, lottery: &PosteriorLottery) -> f64 {
        lottery.expect(|x| self.model.v(x)) - self.fee() - self.model.v0(lottery.prior)
    }

    /// True when nobody can be brought to test.
    pub fn hopeless(&self) -> bool {
        self.mu_f < 0.0
    }

    /// Lower atom of the perfect-good-news signal that makes the patient
    /// exactly willing to test.
    pub fn lower_atom(&self, mu1: f64) -> f64 {
        let b = &self.model.params;
        let q = 1.0 - mu1;
        let num = q * (b.p_bar - b.c - b.p_low) - self.psi;
        let den = q * (b.p_high - b.p_low) - self.psi;
        (num / den).clamp(0.0, mu1)
    }

    pub fn region(&self, mu1: f64) -> InterimRegion {
        if mu1 <= self.mu_f {
            InterimRegion::InF
        } else if mu1 <= self.mu_m {
            InterimRegion::InDNotF
        } else {
            InterimRegion::OutsideM
        }
    }

    pub fn interim(&self, mu1: f64) -> InterimSolution {
        let region = self.region(mu1);
        let accept = match region {
            InterimRegion::InDNotF if mu1 < 1.0 => {
                PosteriorLottery::binary(mu1, self.lower_atom(mu1), 1.0)
            }
            _ => PosteriorLottery::degenerate(mu1),
        };
        let m = &self.model;
        let pc_slack = self.slack(&accept);
        let accepts = pc_slack >= -INDIFFERENCE_TOL;
        let (doctor_value, patient_value) = if accepts {
            (
                m.alpha() + (1.0 - m.alpha()) * accept.expect(|x| m.p(x)),
                accept.expect(|x| m.v(x)) - self.fee(),
            )
        } else {
            (m.health_untested(mu1), m.v0(mu1))
        };
        InterimSolution {
            mu1,
            accept_signal: accept,
            reject_signal: PosteriorLottery::degenerate(mu1),
            region,
            accepts,
            doctor_value,
            patient_value,
            pc_slack,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        let clip = |x: f64| (x >= 0.0).then_some(x.min(1.0));
        Thresholds {
            mu_e: self.model.mu_e,
            mu_f: clip(self.mu_f),
            mu_d: clip(self.mu_m),
            mu_m_low: clip(self.mu_m).map(|_| 0.0),
            mu_m_high: clip(self.mu_m),
            reacts_to_fear: !self.hopeless(),
            ..Thresholds::default()
        }
    }

    pub fn lottery(&self, mu0: f64) -> (PosteriorLottery, RegimeLabel) {
        if self.hopeless() {
            (
                PosteriorLottery::degenerate(mu0),
                RegimeLabel::UnableToPersuade,
            )
        } else if mu0 <= self.mu_f {
            (
                PosteriorLottery::degenerate(mu0),
                RegimeLabel::NoDisclosureNeeded,
            )
        } else {
            (
                PosteriorLottery::binary(mu0, self.mu_f, 1.0),
                RegimeLabel::PreemptiveWarning,
            )
        }
    }

    pub fn solve(&self, mu0: f64) -> ExAnteSolution {
        let (lottery, label) = self.lottery(mu0);
        let interim = lottery
            .atoms
            .iter()
            .map(|a| self.interim(a.posterior))
            .collect();
        let regime = Regime {
            label,
            region: self.region(mu0),
        };
        assemble(
            lottery,
            interim,
            regime,
            self.thresholds(),
            false,
            &self.model,
        )
    }
}

/// Optimal two-stage policy with a test fee, at the prior in `params.base`.
pub fn physical_cost_policy(params: &PhysicalCostParams) -> Result<ExAnteSolution, SolveError> {
    Ok(PhysicalCostSolver::new(params)?.solve(params.base.mu0))
}

// ---------------------------------------------------------------------------
// Test design

/// The doctor chooses what the test reveals about the initial health state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestModelParams {
    /// Prior probability of being healthy.
    pub alpha0: f64,
    /// Health probability when sick and treated.
    pub p_bar: f64,
    /// Health probability when sick and untreated.
    pub p_under: f64,
    pub c: f64,
    pub phi: AnticipationCurve,
}

impl TestModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field, reason: String| Err(ModelError::InvalidParam { field, reason });
        for (field, x) in [
            ("alpha0", self.alpha0),
            ("p_bar", self.p_bar),
            ("p_under", self.p_under),
            ("c", self.c),
        ] {
            if !x.is_finite() {
                return bad(field, format!("{x} is not finite"));
            }
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return bad("alpha0", format!("{} not in (0, 1)", self.alpha0));
        }
        if !(0.0..=1.0).contains(&self.p_bar) || !(0.0..=1.0).contains(&self.p_under) {
            return bad("p_bar", "health probabilities must lie in [0, 1]".into());
        }
        if self.c <= 0.0 {
            return bad("c", format!("{} is not positive", self.c));
        }
        if self.p_bar - self.p_under < self.c {
            return bad(
                "c",
                format!(
                    "treatment gain {} is below its cost {}",
                    self.p_bar - self.p_under,
                    self.c
                ),
            );
        }
        self.phi.validate()
    }

    /// Belief below which a tested patient treats.
    pub fn alpha_e(&self) -> f64 {
        1.0 - self.c / (self.p_bar - self.p_under)
    }

    fn treated_arg(&self, a: f64) -> f64 {
        a + (1.0 - a) * self.p_bar - self.c
    }

    fn untreated_arg(&self, a: f64) -> f64 {
        a + (1.0 - a) * self.p_under
    }

    /// Patient's utility after the test at belief `a`.
    pub fn v(&self, a: f64) -> f64 {
        if a <= self.alpha_e() {
            self.phi.eval(self.treated_arg(a))
        } else {
            self.phi.eval(self.untreated_arg(a))
        }
    }

    /// Derivative of the treated branch.
    pub fn v_left_prime(&self, a: f64) -> f64 {
        self.phi.derivative(self.treated_arg(a)) * (1.0 - self.p_bar)
    }

    /// Derivative of the untreated branch.
    pub fn v_right_prime(&self, a: f64) -> f64 {
        self.phi.derivative(self.untreated_arg(a)) * (1.0 - self.p_under)
    }

    /// Doctor's payoff at belief `a`.
    pub fn p(&self, a: f64) -> f64 {
        if a <= self.alpha_e() {
            self.p_bar
        } else {
            self.p_under
        }
    }

    /// Utility of skipping the test at prior `a0`.
    pub fn outside(&self, a0: f64) -> f64 {
        self.phi.eval(self.untreated_arg(a0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestThresholds {
    pub alpha_e: f64,
    /// Right contact point of the bridge in the concave envelope of `V`.
    pub alpha_v: f64,
    /// Largest prior at which `{l(1), 1}` still gets the patient to test.
    pub alpha_g: f64,
    /// Set when the bridge reaches 1, so full disclosure rewards best.
    pub alpha_v_degenerate: bool,
}

/// Tangent point on the treated branch of the supporting line through
/// `(alpha, V(alpha))`. Ties go to the largest point.
pub fn l_alpha(alpha: f64, params: &TestModelParams) -> Result<f64, SolveError> {
    let ae = params.alpha_e();
    if alpha <= ae {
        return Ok(alpha);
    }
    let va = params.v(alpha);
    if params.phi.is_concave() {
        // Sign of the derivative of the chord slope; nondecreasing in x.
        let h = |x: f64| va - params.v(x) - params.v_left_prime(x) * (alpha - x);
        if h(ae) <= 0.0 {
            return Ok(ae);
        }
        if h(0.0) >= 0.0 {
            return Ok(0.0);
        }
        return bisect_root(h, 0.0, ae)
            .ok_or_else(|| SolveError::Inconsistent(format!("no tangent point at {alpha}")));
    }
    let t = tangent_from_point(|x| params.v(x), (alpha, va), (0.0, ae), Direction::MinSlope)?;
    Ok(t.touch_point)
}

fn bridge_slope(alpha: f64, l: f64, params: &TestModelParams) -> f64 {
    if alpha - l < 1e-14 {
        params.v_left_prime(alpha)
    } else {
        (params.v(alpha) - params.v(l)) / (alpha - l)
    }
}

pub fn test_thresholds(params: &TestModelParams) -> Result<TestThresholds, SolveError> {
    params.validate()?;
    let ae = params.alpha_e();
    let gap = |a: f64| -> f64 {
        match l_alpha(a, params) {
            Ok(l) => params.v_right_prime(a) - bridge_slope(a, l, params),
            Err(_) => f64::NAN,
        }
    };
    let at_one = gap(1.0);
    if at_one.is_nan() {
        return Err(SolveError::Inconsistent("tangent from 1 failed".into()));
    }
    if at_one >= 0.0 || ae >= 1.0 {
        return Ok(TestThresholds {
            alpha_e: ae,
            alpha_v: 1.0,
            alpha_g: 1.0,
            alpha_v_degenerate: true,
        });
    }
    // The bridge slope exceeds the treated-branch slope just right of alpha_e.
    let lo = ae + 1e-9 * (1.0 - ae);
    let alpha_v = bisect_root(gap, lo, 1.0).unwrap_or(lo);

    let l1 = l_alpha(1.0, params)?;
    let (v_l1, s1) = (params.v(l1), bridge_slope(1.0, l1, params));
    let g = |a: f64| v_l1 + s1 * (a - l1) - params.v(a);
    let alpha_g = if g(ae) <= 0.0 {
        ae
    } else {
        let m = golden_max(&|a| -g(a), ae, 1.0);
        if g(m) >= 0.0 {
            1.0
        } else {
            bisect_root(g, ae, m).unwrap_or(m)
        }
    };
    Ok(TestThresholds {
        alpha_e: ae,
        alpha_v,
        alpha_g,
        alpha_v_degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestRegion {
    /// The patient tests and treats without any information.
    Pessimistic,
    /// The unconstrained optimum `{l(1), 1}` is accepted.
    GuidingSuffices,
    /// The participation constraint binds.
    Binding,
    /// Only the uninformative test is accepted.
    Optimistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDesign {
    pub alpha0: f64,
    pub signal: PosteriorLottery,
    pub region: TestRegion,
    pub upper: f64,
    pub lower: f64,
    pub bad_news_prob: f64,
    /// Expected doctor payoff `E P`.
    pub doctor_value: f64,
    pub patient_value: f64,
    pub pc_slack: f64,
    /// The prior sits exactly on `alpha_v`.
    pub at_alpha_v: bool,
}

/// Solver for the test-design variant with thresholds computed once.
#[derive(Debug, Clone)]
pub struct TestDesignSolver {
    pub params: TestModelParams,
    pub thresholds: TestThresholds,
}

impl TestDesignSolver {
    pub fn new(params: &TestModelParams) -> Result<Self, SolveError> {
        Ok(TestDesignSolver {
            thresholds: test_thresholds(params)?,
            params: params.clone(),
        })
    }

    pub fn solve(&self, alpha0: f64) -> Result<TestDesign, SolveError> {
        let (p, t) = (&self.params, &self.thresholds);
        if !(alpha0 > 0.0 && alpha0 < 1.0) {
            return Err(invalid("alpha0", format!("{alpha0} not in (0, 1)")));
        }
        let at_alpha_v = (alpha0 - t.alpha_v).abs() <= 1e-12;
        let (signal, region) = if alpha0 <= t.alpha_e {
            (
                PosteriorLottery::degenerate(alpha0),
                TestRegion::Pessimistic,
            )
        } else if alpha0 >= t.alpha_v {
            (PosteriorLottery::degenerate(alpha0), TestRegion::Optimistic)
        } else if alpha0 <= t.alpha_g {
            let l1 = l_alpha(1.0, p)?;
            (
                PosteriorLottery::binary(alpha0, l1, 1.0),
                TestRegion::GuidingSuffices,
            )
        } else {
            let l = l_alpha(alpha0, p)?;
            let (va, vl) = (p.v(alpha0), p.v(l));
            let slope = (va - vl) / (alpha0 - l);
            let d = |a: f64| va + slope * (a - alpha0) - p.v(a);
            let m = golden_max(&|a| -d(a), alpha0, 1.0);
            let upper = if d(1.0) >= 0.0 && d(m) < 0.0 {
                bisect_root(d, m, 1.0)
            } else {
                None
            }
            .ok_or_else(|| {
                SolveError::Inconsistent(format!("no upper belief for prior {alpha0}"))
            })?;
            (
                PosteriorLottery::binary(alpha0, l, upper),
                TestRegion::Binding,
            )
        };
        let test_value = signal.expect(|a| p.v(a));
        let pc_slack = test_value - p.outside(alpha0);
        Ok(TestDesign {
            alpha0,
            upper: signal.highest(),
            lower: signal.lowest(),
            bad_news_prob: if signal.is_degenerate() {
                0.0
            } else {
                signal.atoms[0].weight
            },
            doctor_value: signal.expect(|a| p.p(a)),
            patient_value: test_value,
            pc_slack,
            at_alpha_v,
            signal,
            region,
        })
    }
}

/// Optimal test at prior `alpha0`.
pub fn optimal_test(alpha0: f64, params: &TestModelParams) -> Result<TestDesign, SolveError> {
    TestDesignSolver::new(params)?.solve(alpha0)
}

// ---------------------------------------------------------------------------
// Persuasion about an action cost

/// A receiver takes an action worth 1 at cost `c_high` or `c_low` and pays
/// `psi` to see the sender's signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostExampleParams {
    pub c_high: f64,
    pub c_low: f64,
    /// Prior probability of the high cost.
    pub upsilon0: f64,
    pub psi: f64,
    /// Sender payoff when the receiver acts.
    pub p_bar: f64,
    /// Sender payoff when the receiver does not act.
    pub p_under: f64,
}

impl CostExampleParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field, reason: String| Err(ModelError::InvalidParam { field, reason });
        if !(self.c_low >= 0.0 && self.c_low < 1.0 && self.c_high > 1.0 && self.c_high.is_finite())
        {
            return bad(
                "c_high",
                "costs must satisfy c_high > 1 > c_low >= 0".into(),
            );
        }
        if !(self.upsilon0 > 0.0 && self.upsilon0 < 1.0) {
            return bad("upsilon0", format!("{} not in (0, 1)", self.upsilon0));
        }
        if !(self.psi.is_finite() && self.psi >= 0.0) {
            return bad("psi", format!("{} is not a nonnegative number", self.psi));
        }
        if !(self.p_bar.is_finite() && self.p_under.is_finite() && self.p_bar >= self.p_under) {
            return bad(
                "p_bar",
                "sender payoffs must satisfy p_bar >= p_under".into(),
            );
        }
        if self.upsilon0 < self.upsilon_e() {
            return bad(
                "upsilon0",
                format!("prior {} is below the action threshold", self.upsilon0),
            );
        }
        Ok(())
    }

    /// Belief at which the receiver is indifferent about acting.
    pub fn upsilon_e(&self) -> f64 {
        (1.0 - self.c_low) / (self.c_high - self.c_low)
    }

    pub fn sender_payoff(&self, u: f64) -> f64 {
        if u <= self.upsilon_e() {
            self.p_bar
        } else {
            self.p_under
        }
    }

    /// Receiver's net value of the action at belief `u`, or 0 if he abstains.
    pub fn receiver_payoff(&self, u: f64) -> f64 {
        (1.0 - u * self.c_high - (1.0 - u) * self.c_low).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostDisclosure {
    pub signal: PosteriorLottery,
    pub upsilon_e: f64,
    /// False when the fee exceeds the value of full disclosure.
    pub persuadable: bool,
    pub sender_value: f64,
    /// `E[receiver payoff] - psi`.
    pub pc_slack: f64,
}

pub fn cost_disclosure_signal(params: &CostExampleParams) -> Result<CostDisclosure, SolveError> {
    params.validate()?;
    let u0 = params.upsilon0;
    let q = 1.0 - u0;
    let num = q * (1.0 - params.c_low) - params.psi;
    let den = q * (params.c_high - params.c_low) - params.psi;
    let persuadable = num >= 0.0 && den > 0.0;
    let signal = if persuadable {
        PosteriorLottery::binary(u0, (num / den).max(0.0), 1.0)
    } else {
        PosteriorLottery::degenerate(u0)
    };
    let pc_slack = signal.expect(|u| params.receiver_payoff(u)) - params.psi;
    let sender_value = if persuadable {
        signal.expect(|u| params.sender_payoff(u))
    } else {
        params.p_under
    };
    Ok(CostDisclosure {
        signal,
        upsilon_e: params.upsilon_e(),
        persuadable,
        sender_value,
        pc_slack,
    })
}
