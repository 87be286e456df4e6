// SPDX-License-Identifier: Apache-2.0

//! Ex ante disclosure, before the patient decides whether to test.
//!
//! Without a participation constraint the doctor solves the interim problem
//! at every posterior and concavifies the resulting health probability. With
//! one, the patient may walk away and the doctor only speaks ex ante.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envelope::{bisect_root, boundary, golden_max, tangent_from_point, Direction};
use crate::interim::{
    guiding_future_signal, InterimSolution, InterimSolver, SolveError, SplitKernel,
    INDIFFERENCE_TOL,
};
use crate::model::{
    Atom, Model, ModelError, PolicyReport, PosteriorLottery, Regime, RegimeLabel, StagePolicy,
    Thresholds,
};

/// The value of listening with no further information: the patient tests
/// when that beats staying untested.
#[derive(Debug, Clone)]
pub struct ScriptV {
    model: Model,
    treated: f64,
}

impl ScriptV {
    pub fn new(model: &Model) -> Self {
        ScriptV {
            model: model.clone(),
            treated: model.treated_utility(),
        }
    }

    pub fn eval(&self, mu: f64) -> f64 {
        self.model.v0(mu).max(self.treated)
    }
}

/// An ex ante lottery with the interim signals used at each of its atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub ex_ante: PosteriorLottery,
    pub stages: Vec<StagePolicy>,
}

/// A policy evaluated against a best-responding patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub doctor_value: f64,
    pub patient_value: f64,
    /// Test decision at each ex ante atom.
    pub tests: Vec<bool>,
    pub participates: bool,
    /// Ex ante value of listening minus the value of walking away.
    pub participation_slack: f64,
}

impl Policy {
    /// Same signal after either decision: no interim information.
    pub fn silent(ex_ante: PosteriorLottery) -> Self {
        let stages = ex_ante
            .atoms
            .iter()
            .map(|a| StagePolicy {
                posterior: a.posterior,
                accept: PosteriorLottery::degenerate(a.posterior),
                reject: PosteriorLottery::degenerate(a.posterior),
            })
            .collect();
        Policy { ex_ante, stages }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.ex_ante.validate()?;
        if self.stages.len() != self.ex_ante.atoms.len() {
            return Err(ModelError::Lottery("stage count mismatch".into()));
        }
        for (s, a) in self.stages.iter().zip(&self.ex_ante.atoms) {
            if s.posterior != a.posterior {
                return Err(ModelError::Lottery("stage posterior mismatch".into()));
            }
            s.accept.validate()?;
            s.reject.validate()?;
        }
        Ok(())
    }

    /// Patient decisions and payoffs. Indifference resolves toward testing
    /// and toward listening.
    pub fn evaluate(&self, model: &Model, with_participation: bool) -> PolicyOutcome {
        let a = model.alpha();
        let mut doctor = 0.0;
        let mut patient = 0.0;
        let mut tests = Vec::with_capacity(self.stages.len());
        for (s, atom) in self.stages.iter().zip(&self.ex_ante.atoms) {
            let test = s.accept.expect(|x| model.v(x));
            let skip = s.reject.expect(|x| model.v0(x));
            let t = test - skip >= -INDIFFERENCE_TOL;
            tests.push(t);
            if t {
                doctor += atom.weight * (a + (1.0 - a) * s.accept.expect(|x| model.p(x)));
                patient += atom.weight * test;
            } else {
                doctor += atom.weight * model.health_untested(atom.posterior);
                patient += atom.weight * skip;
            }
        }
        let mu0 = self.ex_ante.prior;
        let slack = patient - model.v0(mu0);
        let participates = !with_participation || slack >= -INDIFFERENCE_TOL;
        if participates {
            PolicyOutcome {
                doctor_value: doctor,
                patient_value: patient,
                tests,
                participates,
                participation_slack: slack,
            }
        } else {
            PolicyOutcome {
                doctor_value: model.health_untested(mu0),
                patient_value: model.v0(mu0),
                tests,
                participates,
                participation_slack: slack,
            }
        }
    }
}

/// Solved ex ante policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExAnteSolution {
    pub lottery: PosteriorLottery,
    /// Interim outcome at each atom of `lottery`.
    pub interim: Vec<InterimSolution>,
    pub regime: Regime,
    pub doctor_value: f64,
    pub patient_value: f64,
    pub ex_ante_pc_slack: Option<f64>,
    pub thresholds: Thresholds,
}

impl ExAnteSolution {
    pub fn policy(&self) -> Policy {
        Policy {
            ex_ante: self.lottery.clone(),
            stages: self
                .lottery
                .atoms
                .iter()
                .zip(&self.interim)
                .map(|(a, s)| StagePolicy {
                    posterior: a.posterior,
                    accept: s.accept_signal.clone(),
                    reject: s.reject_signal.clone(),
                })
                .collect(),
        }
    }

    pub fn report(&self) -> PolicyReport {
        let mut residuals: Vec<(String, f64)> = self
            .lottery
            .atoms
            .iter()
            .zip(&self.interim)
            .map(|(a, s)| {
                // At a refusing atom the binding incentive is the one to refuse.
                if s.accepts {
                    (format!("test@{:.6}", a.posterior), s.pc_slack)
                } else {
                    (format!("refuse@{:.6}", a.posterior), -s.pc_slack)
                }
            })
            .collect();
        if let Some(s) = self.ex_ante_pc_slack {
            residuals.push(("ex_ante".into(), s));
        }
        let policy = self.policy();
        PolicyReport {
            ex_ante: policy.ex_ante,
            stages: policy.stages,
            regime: self.regime,
            doctor_value: self.doctor_value,
            patient_value: self.patient_value,
            constraint_residuals: residuals,
            ex_ante_participation: self.ex_ante_pc_slack.is_some(),
        }
    }
}

pub(crate) fn assemble(
    lottery: PosteriorLottery,
    interim: Vec<InterimSolution>,
    regime: Regime,
    thresholds: Thresholds,
    pc: bool,
    model: &Model,
) -> ExAnteSolution {
    let doctor_value = lottery
        .atoms
        .iter()
        .zip(&interim)
        .map(|(a, s)| a.weight * s.doctor_value)
        .sum();
    let patient_value: f64 = lottery
        .atoms
        .iter()
        .zip(&interim)
        .map(|(a, s)| a.weight * s.patient_value)
        .sum();
    let ex_ante_pc_slack = pc.then(|| patient_value - model.v0(lottery.prior));
    ExAnteSolution {
        lottery,
        interim,
        regime,
        doctor_value,
        patient_value,
        ex_ante_pc_slack,
        thresholds,
    }
}

/// Ex ante solver for mandatory listening.
#[derive(Debug, Clone)]
pub struct ExAnteSolver {
    pub interim: InterimSolver,
    /// `(lower, upper)` contact points bracketing the comfort stretch when
    /// the patient does not react to fear.
    pub comfort_bounds: Option<(f64, f64)>,
}

impl ExAnteSolver {
    pub fn new(model: &Model) -> Result<Self, SolveError> {
        let interim = InterimSolver::new(model)?;
        let comfort_bounds = if model.reacts_to_fear() {
            None
        } else if let Some((lo, hi)) = interim.kernel.m_run {
            let p = |x: f64| interim.p_star(x).unwrap_or(f64::NAN);
            let left = tangent_from_point(p, (0.0, p(0.0)), (lo, hi), Direction::MaxSlope)?;
            let right = tangent_from_point(p, (1.0, p(1.0)), (lo, hi), Direction::MinSlope)?;
            Some((left.touch_point, right.touch_point))
        } else {
            None
        };
        Ok(ExAnteSolver {
            interim,
            comfort_bounds,
        })
    }

    pub fn model(&self) -> &Model {
        &self.interim.model
    }

    /// Optimal ex ante lottery at `mu0` and its regime label.
    pub fn lottery(&self, mu0: f64) -> (PosteriorLottery, RegimeLabel) {
        let m = self.model();
        if m.reacts_to_fear() {
            let low = self.interim.kernel.f_end.unwrap_or(0.0).min(m.mu_e);
            if mu0 > low {
                (
                    PosteriorLottery::binary(mu0, low, 1.0),
                    RegimeLabel::PreemptiveWarning,
                )
            } else {
                (
                    PosteriorLottery::degenerate(mu0),
                    RegimeLabel::NoDisclosureNeeded,
                )
            }
        } else if let Some((l, h)) = self.comfort_bounds {
            let lottery = if mu0 < l {
                PosteriorLottery::binary(mu0, 0.0, l)
            } else if mu0 > h {
                PosteriorLottery::binary(mu0, h, 1.0)
            } else {
                PosteriorLottery::degenerate(mu0)
            };
            (lottery, RegimeLabel::CommittedComfort)
        } else {
            (
                PosteriorLottery::degenerate(mu0),
                RegimeLabel::UnableToPersuade,
            )
        }
    }

    pub fn solve(&self, mu0: f64) -> Result<ExAnteSolution, SolveError> {
        let (lottery, label) = self.lottery(mu0);
        let interim = lottery
            .atoms
            .iter()
            .map(|a| self.interim.solve(a.posterior))
            .collect::<Result<Vec<_>, _>>()?;
        let regime = Regime {
            label,
            region: self.interim.kernel.region(mu0),
        };
        Ok(assemble(
            lottery,
            interim,
            regime,
            self.interim.thresholds(),
            false,
            self.model(),
        ))
    }
}

/// Policy with no ex ante information and the given interim solver at
/// `mu0`. Used where only the interim stage is optimized.
pub fn interim_only(solver: &InterimSolver, mu0: f64) -> Result<ExAnteSolution, SolveError> {
    let s = solver.solve(mu0)?;
    let label = if s.accepts {
        RegimeLabel::NoDisclosureNeeded
    } else {
        RegimeLabel::UnableToPersuade
    };
    let regime = Regime {
        label,
        region: s.region,
    };
    Ok(assemble(
        PosteriorLottery::degenerate(mu0),
        vec![s],
        regime,
        solver.thresholds(),
        false,
        &solver.model,
    ))
}

/// Optimal policy when listening is mandatory, at the model's prior.
pub fn optimal_exante(model: &Model) -> Result<ExAnteSolution, SolveError> {
    ExAnteSolver::new(model)?.solve(model.params.mu0)
}

/// Thresholds of the participation-constrained problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcThresholds {
    /// Below this belief the patient tests without any information.
    pub mu_n: f64,
    /// Upper end of the beliefs where full disclosure keeps him listening.
    pub mu_t: f64,
    /// Above this belief no disclosure keeps him listening and testing.
    pub mu_v: f64,
}

/// `None` when the patient does not react to fear.
pub fn thresholds_pc(model: &Model) -> Result<Option<PcThresholds>, SolveError> {
    if !model.reacts_to_fear() {
        return Ok(None);
    }
    let treated = model.treated_utility();
    let mu_n = if model.v0(1.0) <= treated {
        1.0
    } else {
        bisect_root(|x| model.v0(x) - treated, 0.0, 1.0).ok_or_else(|| {
            SolveError::Inconsistent("no belief equates testing and not testing".into())
        })?
    };
    // Keep a root that lands on the cutoff from rounding above it, where the
    // doctor's payoff jumps down.
    let mu_n = if model.v0(model.mu_e) >= treated - 1e-12 {
        mu_n.min(model.mu_e)
    } else {
        mu_n
    };
    if mu_n >= 1.0 {
        return Ok(Some(PcThresholds {
            mu_n: 1.0,
            mu_t: 1.0,
            mu_v: 1.0,
        }));
    }
    let sv = ScriptV::new(model);
    let (s0, s1) = (sv.eval(0.0), sv.eval(1.0));
    let gap = |x: f64| x * s1 + (1.0 - x) * s0 - sv.eval(x);
    let dip = golden_max(&|x| -gap(x), mu_n, 1.0);
    let mu_t = if gap(dip) >= 0.0 {
        1.0
    } else {
        bisect_root(gap, mu_n, dip).ok_or_else(|| {
            SolveError::Inconsistent("full-disclosure crossing not bracketed".into())
        })?
    };
    let t = tangent_from_point(|x| sv.eval(x), (0.0, s0), (mu_n, 1.0), Direction::MaxSlope)?;
    let mu_v = t.touch_point.max(mu_t);
    Ok(Some(PcThresholds { mu_n, mu_t, mu_v }))
}

/// The participation problem written as an interim split problem: cutoff
/// `mu_N`, reward the listening value, outside option `V0`.
pub fn pc_kernel(model: &Model) -> Result<SplitKernel, SolveError> {
    let pc = thresholds_pc(model)?.ok_or_else(|| {
        SolveError::Inconsistent("no participation thresholds without fear".into())
    })?;
    let sv = ScriptV::new(model);
    let m = model.clone();
    SplitKernel::new(
        pc.mu_n,
        Arc::new(move |x| sv.eval(x)),
        Arc::new(move |x| m.v0(x)),
        true,
    )
}

/// Solver for the problem where the patient may skip the consultation.
#[derive(Debug, Clone)]
pub struct PcSolver {
    pub interim: InterimSolver,
    pub thresholds: Option<PcThresholds>,
    script: ScriptV,
}

impl PcSolver {
    pub fn new(model: &Model) -> Result<Self, SolveError> {
        Ok(PcSolver {
            interim: InterimSolver::new(model)?,
            thresholds: thresholds_pc(model)?,
            script: ScriptV::new(model),
        })
    }

    /// Lower atom of `{lower, 1}` leaving the patient indifferent to
    /// listening.
    pub fn lower_atom(&self, mu0: f64) -> f64 {
        let s = &self.script;
        let (s0, s1) = (s.eval(0.0), s.eval(1.0));
        1.0 - (1.0 - mu0) * (s1 - s0) / (s1 - s.eval(mu0))
    }

    /// Largest `h` with `{0, h}` keeping the patient willing to listen.
    pub fn upper_atom(&self, mu0: f64) -> Result<f64, SolveError> {
        let pc = self
            .thresholds
            .ok_or_else(|| SolveError::Inconsistent("no participation thresholds".into()))?;
        let s = &self.script;
        let (s0, target) = (s.eval(0.0), s.eval(mu0));
        let g = |h: f64| (1.0 - mu0 / h) * s0 + (mu0 / h) * s.eval(h) - target;
        let lo = pc.mu_v.max(mu0);
        if g(1.0) >= 0.0 {
            return Ok(1.0);
        }
        if g(lo) < 0.0 {
            if g(lo) >= -1e-9 {
                return Ok(lo);
            }
            return Err(SolveError::Inconsistent(format!(
                "bad-news atom not bracketed on [{lo}, 1] at {mu0}"
            )));
        }
        let h = boundary(|h| g(h) >= 0.0, lo, 1.0);
        Ok(if h - mu0 <= 1e-9 { mu0 } else { h })
    }

    pub fn lottery(&self, mu0: f64) -> Result<(PosteriorLottery, RegimeLabel), SolveError> {
        let Some(pc) = self.thresholds else {
            return Ok((
                PosteriorLottery::degenerate(mu0),
                RegimeLabel::UnableToPersuade,
            ));
        };
        Ok(if mu0 <= pc.mu_n {
            (
                PosteriorLottery::degenerate(mu0),
                RegimeLabel::NoDisclosureNeeded,
            )
        } else if mu0 <= pc.mu_t {
            let l = self.lower_atom(mu0).clamp(0.0, pc.mu_n);
            (
                PosteriorLottery::binary(mu0, l, 1.0),
                RegimeLabel::PreemptiveWarning,
            )
        } else if mu0 < pc.mu_v {
            let h = self.upper_atom(mu0)?;
            (
                PosteriorLottery::binary(mu0, 0.0, h),
                RegimeLabel::PreemptiveComfort,
            )
        } else {
            (
                PosteriorLottery::degenerate(mu0),
                RegimeLabel::UnableToPersuade,
            )
        })
    }

    pub fn solve(&self, mu0: f64) -> Result<ExAnteSolution, SolveError> {
        let (lottery, label) = self.lottery(mu0)?;
        let interim = lottery
            .atoms
            .iter()
            .map(|a| {
                let x = a.posterior;
                let region = self.interim.kernel.region(x);
                self.interim.evaluate(
                    x,
                    region,
                    PosteriorLottery::degenerate(x),
                    PosteriorLottery::degenerate(x),
                )
            })
            .collect();
        let mut thresholds = self.interim.thresholds();
        if let Some(pc) = self.thresholds {
            thresholds.mu_n = Some(pc.mu_n);
            thresholds.mu_t = Some(pc.mu_t);
            thresholds.mu_cal_v = Some(pc.mu_v);
        }
        let regime = Regime {
            label,
            region: self.interim.kernel.region(mu0),
        };
        Ok(assemble(
            lottery,
            interim,
            regime,
            thresholds,
            true,
            &self.interim.model,
        ))
    }
}

/// Optimal policy when the patient may skip the consultation.
pub fn optimal_policy_with_pc(model: &Model) -> Result<ExAnteSolution, SolveError> {
    PcSolver::new(model)?.solve(model.params.mu0)
}

pub fn classify_regime(model: &Model, with_pc: bool) -> Result<Regime, SolveError> {
    Ok(if with_pc {
        optimal_policy_with_pc(model)?.regime
    } else {
        optimal_exante(model)?.regime
    })
}

/// Pools the atoms where the patient tests into one atom and those where he
/// does not into another. Requires a concave curve. Returns the policy
/// unchanged and `false` when nobody tests.
pub fn simple_recommendation_reduction(
    model: &Model,
    policy: &Policy,
) -> Result<(Policy, bool), SolveError> {
    policy.validate()?;
    let outcome = policy.evaluate(model, false);
    if !outcome.tests.iter().any(|&t| t) {
        return Ok((policy.clone(), false));
    }
    let mu0 = policy.ex_ante.prior;
    let mut pooled: Vec<(Atom, StagePolicy)> = Vec::with_capacity(2);
    for accept in [true, false] {
        let idx: Vec<usize> = (0..outcome.tests.len())
            .filter(|&i| outcome.tests[i] == accept)
            .collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() == 1 {
            let i = idx[0];
            pooled.push((policy.ex_ante.atoms[i], policy.stages[i].clone()));
            continue;
        }
        let w: f64 = idx.iter().map(|&i| policy.ex_ante.atoms[i].weight).sum();
        let mean = idx
            .iter()
            .map(|&i| policy.ex_ante.atoms[i].weight * policy.ex_ante.atoms[i].posterior)
            .sum::<f64>()
            / w;
        let stage = if accept {
            StagePolicy {
                posterior: mean,
                accept: pool_accept(model, policy, &idx, w, mean)?,
                reject: PosteriorLottery::binary(mean, 0.0, 1.0),
            }
        } else {
            StagePolicy {
                posterior: mean,
                accept: guiding_future_signal(mean, model.mu_e),
                reject: PosteriorLottery::degenerate(mean),
            }
        };
        pooled.push((
            Atom {
                posterior: mean,
                weight: w,
            },
            stage,
        ));
    }
    pooled.sort_by(|a, b| a.0.posterior.total_cmp(&b.0.posterior));
    let atoms: Vec<Atom> = pooled.iter().map(|p| p.0).collect();
    let ex_ante = PosteriorLottery::from_atoms(mu0, &atoms)?;
    if ex_ante.atoms.len() != pooled.len() {
        return Err(SolveError::Inconsistent("pooled atoms coincide".into()));
    }
    let stages = pooled.into_iter().map(|p| p.1).collect();
    Ok((Policy { ex_ante, stages }, true))
}

// Mixture of the accept signals, with atoms on each side of the cutoff
// merged to their conditional mean.
fn pool_accept(
    model: &Model,
    policy: &Policy,
    idx: &[usize],
    total: f64,
    mean: f64,
) -> Result<PosteriorLottery, SolveError> {
    let (mut wl, mut ml, mut wr, mut mr) = (0.0, 0.0, 0.0, 0.0);
    for &i in idx {
        let outer = policy.ex_ante.atoms[i].weight / total;
        for a in &policy.stages[i].accept.atoms {
            let w = outer * a.weight;
            if a.posterior <= model.mu_e {
                wl += w;
                ml += w * a.posterior;
            } else {
                wr += w;
                mr += w * a.posterior;
            }
        }
    }
    let mut atoms = Vec::with_capacity(2);
    if wl > 0.0 {
        atoms.push(Atom {
            posterior: (ml / wl).min(model.mu_e),
            weight: wl,
        });
    }
    if wr > 0.0 {
        atoms.push(Atom {
            posterior: mr / wr,
            weight: wr,
        });
    }
    Ok(PosteriorLottery::from_atoms(mean, &atoms)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{concave_envelope_on, grid_with_knots};
    use crate::interim::tests::comfort;
    use crate::model::tests::baseline;
    use crate::model::{AnticipationCurve as Phi, ModelParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(phi: Phi) -> Model {
        Model::new(baseline(), phi).unwrap()
    }

    /// Does not react to fear but can be motivated by comfort.
    pub(crate) fn committed() -> Model {
        let p = ModelParams {
            alpha: 0.3,
            p_bar: 0.95,
            p_high: 0.85,
            p_low: 0.2,
            c: 0.55,
            mu0: 0.5,
        };
        Model::new(p, Phi::Exponential { k: 10.0 }).unwrap()
    }

    fn grid(n: usize) -> impl Iterator<Item = f64> {
        (0..=n).map(move |i| i as f64 / n as f64)
    }

    #[test]
    fn fear_no_disclosure_below_cutoff() {
        let m = model(Phi::Power { gamma: 0.5 });
        let s = ExAnteSolver::new(&m).unwrap();
        let low = s.interim.kernel.f_end.unwrap().min(m.mu_e);
        for mu in grid(20).map(|x| x * low) {
            let r = s.solve(mu).unwrap();
            assert!(r.lottery.is_degenerate());
            assert_eq!(r.regime.label, RegimeLabel::NoDisclosureNeeded);
            assert!(
                (r.doctor_value - (m.alpha() + (1.0 - m.alpha()) * m.params.p_bar)).abs() < 1e-15
            );
        }
    }

    #[test]
    fn fear_preemptive_warning_weights() {
        let p = ModelParams {
            c: 0.4,
            ..baseline()
        };
        let m = Model::new(p, Phi::Linear).unwrap();
        assert!((m.mu_e - 0.6).abs() < 1e-12);
        let r = ExAnteSolver::new(&m).unwrap().solve(0.9).unwrap();
        assert_eq!(r.regime.label, RegimeLabel::PreemptiveWarning);
        assert_eq!(r.lottery.atoms.len(), 2);
        assert!((r.lottery.atoms[0].posterior - 0.6).abs() < 1e-12);
        assert!((r.lottery.atoms[0].weight - 0.25).abs() < 1e-12);
        assert!((r.lottery.atoms[1].weight - 0.75).abs() < 1e-12);
        let a = m.alpha();
        let want = 0.25 * (a + (1.0 - a) * 0.9) + 0.75 * (a + (1.0 - a) * 0.7);
        assert!((r.doctor_value - want).abs() < 1e-12);
        let low = &r.interim[0];
        assert!(low.accept_signal.is_degenerate());
        assert_eq!(low.reject_signal.posteriors(), vec![0.0, 1.0]);
        assert!(low.accepts);
    }

    #[test]
    fn doctor_value_sums_interim_values() {
        for m in [model(Phi::Power { gamma: 0.5 }), committed(), comfort()] {
            let s = ExAnteSolver::new(&m).unwrap();
            for mu in grid(40) {
                let r = s.solve(mu).unwrap();
                let sum: f64 = r
                    .lottery
                    .atoms
                    .iter()
                    .map(|a| a.weight * s.interim.p_star(a.posterior).unwrap())
                    .sum();
                assert!((r.doctor_value - sum).abs() < 1e-10);
                r.report().validate().unwrap();
                let eval = r.policy().evaluate(&m, false);
                assert!((eval.doctor_value - r.doctor_value).abs() < 1e-10, "{mu}");
            }
        }
    }

    #[test]
    fn committed_comfort_matches_envelope() {
        let m = committed();
        assert!(!m.reacts_to_fear());
        let s = ExAnteSolver::new(&m).unwrap();
        let (lo, hi) = s.interim.kernel.m_run.unwrap();
        let (l, h) = s.comfort_bounds.unwrap();
        assert!(lo <= l && l <= h && h <= hi);
        let knots = [lo, hi, m.mu_e];
        let env = concave_envelope_on(
            |x| s.interim.p_star(x).unwrap(),
            grid_with_knots(0.0, 1.0, 32001, &knots),
            &[lo, hi],
        )
        .unwrap();
        for mu in grid(50) {
            let r = s.solve(mu).unwrap();
            assert_eq!(r.regime.label, RegimeLabel::CommittedComfort);
            assert!(
                (r.doctor_value - env.eval(mu)).abs() < 1e-5,
                "{mu}: {} {}",
                r.doctor_value,
                env.eval(mu)
            );
            assert!(r.doctor_value >= env.eval(mu) - 1e-9);
        }
    }

    #[test]
    fn warning_chord_dominates_p_star() {
        for m in [
            model(Phi::Power { gamma: 0.5 }),
            model(Phi::Exponential { k: 3.0 }),
            comfort(),
        ] {
            let s = ExAnteSolver::new(&m).unwrap();
            let low = s.interim.kernel.f_end.unwrap().min(m.mu_e);
            let a = m.alpha();
            let (top, bottom) = (
                a + (1.0 - a) * m.params.p_bar,
                a + (1.0 - a) * m.params.p_high,
            );
            for mu in grid(400).filter(|&x| x >= low) {
                let chord = top + (bottom - top) * (mu - low) / (1.0 - low);
                assert!(chord >= s.interim.p_star(mu).unwrap() - 1e-8, "{mu}");
            }
        }
    }

    #[test]
    fn beats_random_binary_policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [model(Phi::Power { gamma: 0.5 }), committed(), comfort()] {
            let s = ExAnteSolver::new(&m).unwrap();
            for _ in 0..20 {
                let mu0: f64 = rng.gen_range(0.01..0.99);
                let best = s.solve(mu0).unwrap().doctor_value;
                for _ in 0..50 {
                    let lo = rng.gen_range(0.0..mu0);
                    let hi = rng.gen_range(mu0..=1.0);
                    let t = PosteriorLottery::binary(mu0, lo, hi);
                    let v = t.expect(|x| s.interim.p_star(x).unwrap());
                    assert!(best >= v - 1e-8);
                }
            }
        }
    }

    #[test]
    fn labels_by_case() {
        let fear = model(Phi::Power { gamma: 0.5 }).with_mu0(0.9);
        assert_eq!(
            classify_regime(&fear, false).unwrap().label,
            RegimeLabel::PreemptiveWarning
        );
        assert_eq!(
            classify_regime(&committed(), false).unwrap().label,
            RegimeLabel::CommittedComfort
        );
        assert_eq!(
            classify_regime(&committed(), true).unwrap().label,
            RegimeLabel::UnableToPersuade
        );
        let p = ModelParams {
            alpha: 0.9,
            c: 0.69,
            ..baseline()
        };
        let hopeless = Model::new(p, Phi::Power { gamma: 0.5 }).unwrap();
        assert_eq!(
            classify_regime(&hopeless, false).unwrap().label,
            RegimeLabel::UnableToPersuade
        );
    }

    #[test]
    fn pc_thresholds() {
        let m = model(Phi::Linear);
        let t = thresholds_pc(&m).unwrap().unwrap();
        assert!((t.mu_n - m.mu_e).abs() < 1e-10);
        for phi in [Phi::Power { gamma: 0.5 }, Phi::Exponential { k: 3.0 }] {
            let m = model(phi);
            let s = InterimSolver::new(&m).unwrap();
            let t = thresholds_pc(&m).unwrap().unwrap();
            assert!(t.mu_n < s.kernel.f_end.unwrap().min(m.mu_e));
            assert!(t.mu_n <= t.mu_t && t.mu_t <= t.mu_v);
        }
        let m = comfort();
        let t = thresholds_pc(&m).unwrap().unwrap();
        assert!(t.mu_v < 1.0 && t.mu_t < t.mu_v);
        let sv = ScriptV::new(&m);
        let h = 1e-6;
        let slope = (sv.eval(t.mu_v + h) - sv.eval(t.mu_v - h)) / (2.0 * h);
        assert!((sv.eval(t.mu_v) - sv.eval(0.0) - t.mu_v * slope).abs() < 1e-8);
        assert!(thresholds_pc(&committed()).unwrap().is_none());
    }

    #[test]
    fn pc_branches() {
        let m = comfort();
        let s = PcSolver::new(&m).unwrap();
        let t = s.thresholds.unwrap();
        let sv = ScriptV::new(&m);
        let mut seen = std::collections::HashSet::new();
        for mu in grid(400) {
            let r = s.solve(mu).unwrap();
            seen.insert(r.regime.label);
            let slack = r.ex_ante_pc_slack.unwrap();
            assert!(slack >= -1e-8);
            assert!(r.interim.iter().all(|i| i.accept_signal.is_degenerate()));
            if mu <= t.mu_n {
                assert!((r.patient_value - sv.eval(mu)).abs() < 1e-15);
            }
            if mu > t.mu_n && mu < t.mu_v {
                assert!(slack.abs() < 1e-8, "{mu} {slack}");
            }
            let eval = r.policy().evaluate(&m, true);
            assert!(eval.participates);
            assert!((eval.doctor_value - r.doctor_value).abs() < 1e-12);
        }
        assert_eq!(seen.len(), 4, "{seen:?}");
    }

    #[test]
    fn pc_matches_shared_kernel() {
        for m in [
            comfort(),
            model(Phi::Power { gamma: 0.5 }),
            model(Phi::Exponential { k: 3.0 }),
        ] {
            let s = PcSolver::new(&m).unwrap();
            let t = s.thresholds.unwrap();
            let k = pc_kernel(&m).unwrap();
            assert!((k.tangent - t.mu_v).abs() < 1e-9 || t.mu_v == t.mu_t);
            for mu in grid(500) {
                if [t.mu_n, t.mu_t, t.mu_v]
                    .iter()
                    .any(|x| (x - mu).abs() < 1e-6)
                {
                    continue;
                }
                let (direct, _) = s.lottery(mu).unwrap();
                let (_, mapped) = k.signal(mu).unwrap();
                let (a, b) = (direct.posteriors(), mapped.posteriors());
                assert_eq!(a.len(), b.len(), "{mu}: {a:?} {b:?}");
                assert!(
                    a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10),
                    "{mu}: {a:?} {b:?}"
                );
            }
        }
    }

    #[test]
    fn reduction_identity_on_binary() {
        let m = model(Phi::Power { gamma: 0.5 });
        let r = ExAnteSolver::new(&m).unwrap().solve(0.9).unwrap();
        let p = r.policy();
        let (q, ok) = simple_recommendation_reduction(&m, &p).unwrap();
        assert!(ok);
        assert_eq!(p, q);
    }

    #[test]
    fn reduction_preserves_doctor_and_helps_patient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pooled = 0;
        for m in [
            model(Phi::Power { gamma: 0.5 }),
            comfort(),
            committed(),
            model(Phi::Linear),
        ] {
            for _ in 0..300 {
                let mu0 = rng.gen_range(0.05..0.95);
                let p = crate::oracle::random_policy(&mut rng, mu0, 3);
                let before = p.evaluate(&m, false);
                let (q, ok) = simple_recommendation_reduction(&m, &p).unwrap();
                q.validate().unwrap();
                if !ok {
                    assert_eq!(p, q);
                    continue;
                }
                assert!(q.ex_ante.atoms.len() <= 2);
                let after = q.evaluate(&m, false);
                assert!((after.doctor_value - before.doctor_value).abs() < 1e-12);
                assert!(after.patient_value >= before.patient_value - 1e-12);
                if p.ex_ante.atoms.len() > q.ex_ante.atoms.len() {
                    pooled += 1;
                    let accepts = after.tests.iter().filter(|&&t| t).count();
                    assert_eq!(accepts, 1);
                }
            }
        }
        assert!(pooled > 50);
    }

    use crate::model::tests::params_strategy;
    use proptest::prelude::*;

    fn concave_strategy() -> impl Strategy<Value = Phi> {
        prop_oneof![
            Just(Phi::Linear),
            (0.05f64..1.0).prop_map(|gamma| Phi::Power { gamma }),
            (0.1f64..12.0).prop_map(|k| Phi::Exponential { k }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pc_feasible_and_binding(p in params_strategy(), phi in concave_strategy()) {
            let m = Model::new(p, phi).unwrap();
            let s = PcSolver::new(&m).unwrap();
            let r = s.solve(p.mu0).unwrap();
            prop_assert!(r.patient_value >= m.v0(p.mu0) - 1e-8);
            if let Some(t) = s.thresholds {
                prop_assert!(t.mu_n <= t.mu_t && t.mu_t <= t.mu_v);
                if p.mu0 > t.mu_n && p.mu0 < t.mu_v {
                    prop_assert!(r.ex_ante_pc_slack.unwrap().abs() < 1e-8);
                }
            } else {
                prop_assert_eq!(r.regime.label, RegimeLabel::UnableToPersuade);
            }
        }

        #[test]
        fn exante_at_least_interim_only(p in params_strategy(), phi in concave_strategy()) {
            let m = Model::new(p, phi).unwrap();
            let s = ExAnteSolver::new(&m).unwrap();
            let r = s.solve(p.mu0).unwrap();
            prop_assert!(r.doctor_value >= s.interim.p_star(p.mu0).unwrap() - 1e-10);
            prop_assert!((r.lottery.mean() - p.mu0).abs() < 1e-10);
        }
    }
}
