// SPDX-License-Identifier: Apache-2.0

//! Self-checks for the configured instance.

use serde::Serialize;

use persuasion::envelope::{concave_envelope_on, grid_with_knots};
use persuasion::extensions::{cost_disclosure_signal, TestDesignSolver, TestRegion};
use persuasion::interim::{interim_monotonicity_check, InterimSolver, SolveError};
use persuasion::oracle::{
    best_good_news_criterion, binding_lower_belief, grid_signal_oracle, lipschitz_bound,
    monte_carlo_health, x_star_search, Payoffs,
};
use persuasion::{InterimRegion, Model, PosteriorLottery};

use crate::config::{RunConfig, Variant};
use crate::run::MainSolver;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed residual, in the units of `tolerance`.
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, residual: f64, tolerance: f64, detail: String) -> Self {
        Check {
            name,
            passed: residual <= tolerance,
            residual,
            tolerance,
            detail,
        }
    }

    fn skipped(name: &'static str, why: &str) -> Self {
        Check {
            name,
            passed: true,
            residual: 0.0,
            tolerance: 0.0,
            detail: format!("skipped: {why}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub variant: &'static str,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn beliefs(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| (i as f64 + 0.5) / n as f64)
}

pub fn verify(cfg: &RunConfig) -> Result<VerifyReport, SolveError> {
    let checks = match cfg.variant {
        Variant::TestDesign => test_design_checks(cfg)?,
        Variant::CostExample => cost_checks(cfg)?,
        _ => main_checks(cfg)?,
    };
    Ok(VerifyReport {
        variant: cfg.variant.name(),
        seed: cfg.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Interim solver underlying a main-model variant, if the variant has one.
fn interim_of(s: &MainSolver) -> Option<&InterimSolver> {
    match s {
        MainSolver::Mandatory(x) => Some(&x.interim),
        MainSolver::Participation(x) => Some(&x.interim),
        MainSolver::InterimOnly(x) => Some(x),
        MainSolver::Fee(_) => None,
    }
}

fn main_checks(cfg: &RunConfig) -> Result<Vec<Check>, SolveError> {
    let solver = MainSolver::new(cfg)?;
    let m = solver.model();
    let tol = cfg.solver.check_tol;
    let mut out = Vec::new();

    out.push(oracle_sandwich(cfg, &solver)?);
    out.push(pc_binding(cfg, &solver, tol)?);

    out.push(match interim_of(&solver) {
        Some(s) if s.kernel.fear => {
            let r = interim_monotonicity_check(s, 100)?;
            let bad = r.lower_violations.len() + r.upper_violations.len();
            Check::new(
                "monotonicity",
                bad as f64,
                0.0,
                format!(
                    "{} lower and {} upper points",
                    r.checked_lower, r.checked_upper
                ),
            )
        }
        Some(_) => Check::skipped("monotonicity", "the patient does not react to fear"),
        None => Check::skipped("monotonicity", "closed-form fee variant"),
    });

    out.push(envelope_idempotence(cfg, m)?);

    out.push(match solver {
        MainSolver::Fee(_) => Check::skipped("monte_carlo", "the simulator has no test fee"),
        _ => {
            let sol = solver.solve(m.params.mu0)?;
            let est = monte_carlo_health(&sol.report(), m, cfg.solver.mc_draws as u64, cfg.seed)?;
            let z = (est.estimate - sol.doctor_value).abs() / est.std_error.max(f64::MIN_POSITIVE);
            let z = if est.estimate == sol.doctor_value {
                0.0
            } else {
                z
            };
            Check::new(
                "monte_carlo",
                z,
                4.0,
                format!(
                    "estimate {} +- {} vs {} over {} draws",
                    est.estimate, est.std_error, sol.doctor_value, est.draws
                ),
            )
        }
    });
    Ok(out)
}

type Curve<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

fn oracle_sandwich(cfg: &RunConfig, solver: &MainSolver) -> Result<Check, SolveError> {
    let m = solver.model();
    let sender = |x: f64| m.health(x);
    let knots = [m.mu_e];
    let mut worst: f64 = 0.0;
    let (grid, atoms, reward, rhs): (usize, usize, Curve, Curve) = match solver {
        MainSolver::Fee(s) => {
            let fee = s.fee();
            (
                cfg.solver.oracle_grid,
                2,
                Box::new(move |x| m.v(x) - fee),
                Box::new(|x| m.v0(x)),
            )
        }
        MainSolver::InterimOnly(s) if cfg.variant == Variant::Unconditional => (
            cfg.solver.oracle_grid.min(201),
            3,
            Box::new(|x| m.v(x) - m.v0(x)),
            Box::new(|_| 0.0),
        ),
        MainSolver::InterimOnly(s) => (
            cfg.solver.oracle_grid.min(201),
            3,
            Box::new(|x| m.v(x)),
            Box::new(move |x| s.kernel.outside_at(x)),
        ),
        _ => (
            cfg.solver.oracle_grid,
            2,
            Box::new(|x| m.v(x)),
            Box::new(|x| m.vbar(x)),
        ),
    };
    let eps = 1e-4 + lipschitz_bound(m) / grid as f64;
    for mu1 in beliefs(20) {
        let closed = match solver {
            MainSolver::Fee(s) => s.interim(mu1).doctor_value,
            _ => {
                interim_of(solver)
                    .expect("interim solver")
                    .solve(mu1)?
                    .doctor_value
            }
        };
        let pay = Payoffs {
            sender: &sender,
            constraint: Some((&*reward, rhs(mu1))),
            knots: &knots,
        };
        let r = grid_signal_oracle(mu1, &pay, grid, atoms);
        let oracle = r.best_value.max(m.health_untested(mu1));
        worst = worst.max((closed - oracle).abs());
    }
    Ok(Check::new(
        "oracle_sandwich",
        worst,
        eps,
        format!("20 beliefs, {grid}-point grid, {atoms} atoms"),
    ))
}

fn pc_binding(cfg: &RunConfig, solver: &MainSolver, tol: f64) -> Result<Check, SolveError> {
    let off = cfg.debug.l_offset;
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for mu1 in beliefs(200) {
        let residual = match solver {
            MainSolver::Fee(s) => {
                if s.region(mu1) != InterimRegion::InDNotF {
                    continue;
                }
                let l = (s.lower_atom(mu1) + off).min(mu1);
                s.slack(&PosteriorLottery::binary(mu1, l, 1.0))
            }
            _ => {
                let k = &interim_of(solver).expect("interim solver").kernel;
                let signal = match k.region(mu1) {
                    InterimRegion::InDNotF => {
                        let l = (k.lower_atom(mu1)? + off).min(mu1);
                        PosteriorLottery::binary(mu1, l, 1.0)
                    }
                    InterimRegion::InMNotD => {
                        PosteriorLottery::binary(mu1, 0.0, k.upper_atom(mu1)?)
                    }
                    _ => continue,
                };
                signal.expect(|x| k.reward_at(x)) - k.outside_at(mu1)
            }
        };
        worst = worst.max(residual.abs());
        n += 1;
    }
    Ok(Check::new(
        "pc_binding",
        worst,
        tol,
        format!("{n} beliefs with a binding constraint"),
    ))
}

fn envelope_idempotence(cfg: &RunConfig, m: &Model) -> Result<Check, SolveError> {
    let grid = grid_with_knots(0.0, 1.0, cfg.solver.grid_n, &[m.mu_e]);
    let f = |x: f64| m.health(x);
    let env = concave_envelope_on(f, grid.clone(), &[m.mu_e])?;
    let again = concave_envelope_on(|x| env.eval(x), grid, &[])?;
    let gap = env
        .values
        .iter()
        .zip(&again.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Check::new(
        "envelope_idempotence",
        gap,
        1e-9,
        format!("{} grid points", env.grid.len()),
    ))
}

fn test_design_checks(cfg: &RunConfig) -> Result<Vec<Check>, SolveError> {
    let s = TestDesignSolver::new(cfg.test_design.as_ref().expect("validated"))?;
    let t = s.thresholds;
    let tol = cfg.solver.check_tol;
    let (mut worst, mut binding) = (0.0f64, 0usize);
    let mut negative: f64 = 0.0;
    for a in beliefs(200) {
        let d = s.solve(a)?;
        negative = negative.max(-d.pc_slack);
        if d.region == TestRegion::Binding {
            worst = worst.max(d.pc_slack.abs());
            binding += 1;
        }
    }
    let mut out = vec![
        Check::new("pc_feasible", negative.max(0.0), tol, "200 priors".into()),
        Check::new(
            "pc_binding",
            worst,
            tol,
            format!("{binding} binding priors"),
        ),
    ];
    if t.alpha_v_degenerate || t.alpha_v <= t.alpha_g {
        out.push(Check::skipped("monotonicity", "empty binding interval"));
    } else {
        let mut bad = 0;
        let mut prev: Option<(f64, f64, f64)> = None;
        for i in 1..=100 {
            let a = t.alpha_g + (t.alpha_v - t.alpha_g) * i as f64 / 101.0;
            let d = s.solve(a)?;
            if let Some((u, l, b)) = prev {
                if d.upper > u || d.lower > l || d.bad_news_prob > b {
                    bad += 1;
                }
            }
            prev = Some((d.upper, d.lower, d.bad_news_prob));
        }
        out.push(Check::new(
            "monotonicity",
            bad as f64,
            0.0,
            "100 priors in the binding interval".into(),
        ));
    }
    Ok(out)
}

fn cost_checks(cfg: &RunConfig) -> Result<Vec<Check>, SolveError> {
    let p = *cfg.cost_example.as_ref().expect("validated");
    let closed = cost_disclosure_signal(&p)?;
    let ue = p.upsilon_e();
    let sender = |u: f64| p.sender_payoff(u);
    let receiver = |u: f64| p.receiver_payoff(u);
    let mut out = Vec::new();
    let (mut fails, mut evaluated) = (0, 0);
    for j in 1..=50 {
        let x = p.upsilon0 + (1.0 - p.upsilon0) * j as f64 / 50.0;
        let d = binding_lower_belief(x, p.upsilon0, &receiver, p.psi, ue);
        if d.is_none() {
            continue;
        }
        evaluated += 1;
        if best_good_news_criterion(x, &sender, &receiver, d, &[ue]).holds != Some(true) {
            fails += 1;
        }
    }
    out.push(Check::new(
        "best_good_news",
        fails as f64,
        0.0,
        format!("{evaluated} upper beliefs"),
    ));
    if closed.persuadable {
        let star = x_star_search(
            |x| binding_lower_belief(x, p.upsilon0, &receiver, p.psi, ue).is_some(),
            p.upsilon0,
        );
        let gap = star.map_or(f64::INFINITY, |s| (s - closed.signal.highest()).abs());
        out.push(Check::new(
            "x_star",
            gap,
            1e-8,
            format!("search gives {star:?}"),
        ));
        out.push(Check::new(
            "pc_binding",
            closed.pc_slack.abs(),
            cfg.solver.check_tol,
            "closed-form signal".into(),
        ));
    } else {
        out.push(Check::skipped(
            "x_star",
            "fee exceeds the value of full disclosure",
        ));
        out.push(Check::skipped(
            "pc_binding",
            "fee exceeds the value of full disclosure",
        ));
    }
    Ok(out)
}
