// SPDX-License-Identifier: Apache-2.0

//! Solving, sweeping and threshold reports.

use serde::Serialize;
use serde_json::{json, Value};

use persuasion::exante::{interim_only, thresholds_pc, ExAnteSolution, ExAnteSolver, PcSolver};
use persuasion::extensions::{
    cost_disclosure_signal, test_thresholds, CostExampleParams, PhysicalCostParams,
    PhysicalCostSolver, TestDesignSolver,
};
use persuasion::interim::{InterimSolver, SolveError};
use persuasion::{Model, PosteriorLottery, Thresholds};

use crate::config::{RunConfig, SweepVariable, Variant};

/// Solver for one of the variants built on the main model.
pub enum MainSolver {
    Mandatory(ExAnteSolver),
    Participation(PcSolver),
    InterimOnly(InterimSolver),
    Fee(PhysicalCostSolver),
}

impl MainSolver {
    pub fn new(cfg: &RunConfig) -> Result<Self, SolveError> {
        let grid = cfg.solver.grid_n;
        let model = || -> Result<Model, SolveError> {
            let params = cfg.model.expect("validated config has model parameters");
            Ok(Model::new(params, cfg.phi.clone())?)
        };
        Ok(match cfg.variant {
            Variant::Main if cfg.phi.is_concave() => {
                MainSolver::Mandatory(ExAnteSolver::new(&model()?)?)
            }
            Variant::Main => MainSolver::InterimOnly(InterimSolver::general(&model()?, grid)?),
            Variant::MainWithPc => MainSolver::Participation(PcSolver::new(&model()?)?),
            Variant::Unconditional => {
                MainSolver::InterimOnly(InterimSolver::unconditional(&model()?, grid)?)
            }
            Variant::PhysicalCost => {
                let params = PhysicalCostParams {
                    base: cfg.model.expect("validated config has model parameters"),
                    psi: cfg.psi.expect("validated config has a fee"),
                };
                MainSolver::Fee(PhysicalCostSolver::new(&params)?)
            }
            Variant::TestDesign | Variant::CostExample => {
                unreachable!("variant {} has no main model", cfg.variant.name())
            }
        })
    }

    pub fn model(&self) -> &Model {
        match self {
            MainSolver::Mandatory(s) => s.model(),
            MainSolver::Participation(s) => &s.interim.model,
            MainSolver::InterimOnly(s) => &s.model,
            MainSolver::Fee(s) => &s.model,
        }
    }

    pub fn solve(&self, mu0: f64) -> Result<ExAnteSolution, SolveError> {
        match self {
            MainSolver::Mandatory(s) => s.solve(mu0),
            MainSolver::Participation(s) => s.solve(mu0),
            MainSolver::InterimOnly(s) => interim_only(s, mu0),
            MainSolver::Fee(s) => Ok(s.solve(mu0)),
        }
    }

    pub fn thresholds(&self) -> Result<Thresholds, SolveError> {
        let mut t = match self {
            MainSolver::Mandatory(s) => s.interim.thresholds(),
            MainSolver::Participation(s) => s.interim.thresholds(),
            MainSolver::InterimOnly(s) => s.thresholds(),
            MainSolver::Fee(s) => return Ok(s.thresholds()),
        };
        if matches!(
            self,
            MainSolver::Mandatory(_) | MainSolver::Participation(_)
        ) {
            if let Some(pc) = thresholds_pc(self.model())? {
                t.mu_n = Some(pc.mu_n);
                t.mu_t = Some(pc.mu_t);
                t.mu_cal_v = Some(pc.mu_v);
            }
        }
        Ok(t)
    }
}

/// Shortest round-trip text for a number; empty for an undefined value.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Clamps a probability to `[0, 1]` after checking it is within rounding of
/// that range.
pub fn prob(name: &str, x: f64) -> Result<f64, SolveError> {
    if x.is_finite() && (-1e-12..=1.0 + 1e-12).contains(&x) {
        Ok(x.clamp(0.0, 1.0))
    } else {
        Err(SolveError::Inconsistent(format!(
            "{name} = {x} is not a probability"
        )))
    }
}

fn atoms(l: &PosteriorLottery) -> String {
    l.atoms
        .iter()
        .map(|a| format!("{}:{}", a.posterior, a.weight))
        .collect::<Vec<_>>()
        .join(";")
}

pub const MAIN_COLUMNS: [&str; 15] = [
    "x",
    "mu_e",
    "mu_v",
    "mu_f",
    "mu_d",
    "mu_m_low",
    "mu_m_high",
    "mu_n",
    "mu_t",
    "mu_cal_v",
    "p_star",
    "patient_value",
    "regime",
    "region",
    "atoms",
];
pub const TEST_DESIGN_COLUMNS: [&str; 11] = [
    "x",
    "alpha_e",
    "alpha_g",
    "alpha_v",
    "region",
    "upper",
    "lower",
    "bad_news_prob",
    "doctor_value",
    "patient_value",
    "pc_slack",
];
pub const COST_COLUMNS: [&str; 7] = [
    "x",
    "upsilon_e",
    "persuadable",
    "lower",
    "upper",
    "sender_value",
    "pc_slack",
];

pub fn columns(variant: Variant) -> &'static [&'static str] {
    match variant {
        Variant::TestDesign => &TEST_DESIGN_COLUMNS,
        Variant::CostExample => &COST_COLUMNS,
        _ => &MAIN_COLUMNS,
    }
}

/// A sweep: CSV rows in the documented column order and the same rows as
/// JSON objects.
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
    pub records: Vec<Value>,
}

fn main_row(
    x: f64,
    t: &Thresholds,
    s: &ExAnteSolution,
) -> Result<(Vec<String>, Value), SolveError> {
    let p_star = prob("p_star", s.doctor_value)?;
    let row = vec![
        num(x),
        num(t.mu_e),
        opt(t.mu_v),
        opt(t.mu_f),
        opt(t.mu_d),
        opt(t.mu_m_low),
        opt(t.mu_m_high),
        opt(t.mu_n),
        opt(t.mu_t),
        opt(t.mu_cal_v),
        num(p_star),
        num(s.patient_value),
        format!("{:?}", s.regime.label),
        format!("{:?}", s.regime.region),
        atoms(&s.lottery),
    ];
    let rec = json!({
        "x": x,
        "thresholds": t,
        "p_star": p_star,
        "patient_value": s.patient_value,
        "regime": s.regime,
        "lottery": s.lottery,
    });
    Ok((row, rec))
}

fn cost_params(cfg: &RunConfig, var: SweepVariable, x: f64) -> CostExampleParams {
    let mut p = *cfg
        .cost_example
        .as_ref()
        .expect("validated config has cost parameters");
    match var {
        SweepVariable::Psi => p.psi = x,
        _ => p.upsilon0 = x,
    }
    p
}

fn cost_row(x: f64, p: &CostExampleParams) -> Result<(Vec<String>, Value), SolveError> {
    let d = cost_disclosure_signal(p)?;
    let row = vec![
        num(x),
        num(d.upsilon_e),
        d.persuadable.to_string(),
        num(d.signal.lowest()),
        num(d.signal.highest()),
        num(d.sender_value),
        num(d.pc_slack),
    ];
    Ok((row, json!({ "x": x, "disclosure": d })))
}

pub fn sweep(cfg: &RunConfig) -> Result<Table, SolveError> {
    let sw = cfg.sweep.expect("validated sweep");
    let header = columns(cfg.variant);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let points = sw.points();
    let mut push = |(row, rec): (Vec<String>, Value)| {
        rows.push(row);
        records.push(rec);
    };
    match cfg.variant {
        Variant::TestDesign => {
            let s = TestDesignSolver::new(cfg.test_design.as_ref().expect("validated"))?;
            let t = s.thresholds;
            for x in points {
                let d = s.solve(x)?;
                push((
                    vec![
                        num(x),
                        num(t.alpha_e),
                        num(t.alpha_g),
                        num(t.alpha_v),
                        format!("{:?}", d.region),
                        num(d.upper),
                        num(d.lower),
                        num(prob("bad_news_prob", d.bad_news_prob)?),
                        num(prob("doctor_value", d.doctor_value)?),
                        num(d.patient_value),
                        num(d.pc_slack),
                    ],
                    json!({ "x": x, "thresholds": t, "design": d }),
                ));
            }
        }
        Variant::CostExample => {
            for x in points {
                push(cost_row(x, &cost_params(cfg, sw.variable, x))?);
            }
        }
        _ if sw.variable == SweepVariable::Psi => {
            for x in points {
                let c = RunConfig {
                    psi: Some(x),
                    ..cfg.clone()
                };
                let s = MainSolver::new(&c)?;
                let mu0 = s.model().params.mu0;
                push(main_row(x, &s.thresholds()?, &s.solve(mu0)?)?);
            }
        }
        _ => {
            let s = MainSolver::new(cfg)?;
            let t = s.thresholds()?;
            for x in points {
                push(main_row(x, &t, &s.solve(x)?)?);
            }
        }
    }
    Ok(Table {
        header,
        rows,
        records,
    })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    variant: &'static str,
    seed: u64,
    #[serde(flatten)]
    body: &'a T,
}

fn wrap<T: Serialize>(cfg: &RunConfig, body: &T) -> Value {
    serde_json::to_value(Envelope {
        variant: cfg.variant.name(),
        seed: cfg.seed,
        body,
    })
    .expect("reports serialize")
}

pub fn solve(cfg: &RunConfig) -> Result<Value, SolveError> {
    let body = match cfg.variant {
        Variant::TestDesign => {
            let p = cfg.test_design.as_ref().expect("validated");
            let s = TestDesignSolver::new(p)?;
            json!({ "thresholds": s.thresholds, "design": s.solve(p.alpha0)? })
        }
        Variant::CostExample => {
            let p = cfg.cost_example.as_ref().expect("validated");
            json!({ "disclosure": cost_disclosure_signal(p)? })
        }
        _ => {
            let s = MainSolver::new(cfg)?;
            let sol = s.solve(s.model().params.mu0)?;
            prob("doctor_value", sol.doctor_value)?;
            json!({
                "regime": sol.regime,
                "doctor_value": sol.doctor_value,
                "patient_value": sol.patient_value,
                "ex_ante_pc_slack": sol.ex_ante_pc_slack,
                "thresholds": s.thresholds()?,
                "report": sol.report(),
            })
        }
    };
    Ok(wrap(cfg, &body))
}

pub fn thresholds(cfg: &RunConfig) -> Result<Value, SolveError> {
    let body = match cfg.variant {
        Variant::TestDesign => {
            json!({ "thresholds": test_thresholds(cfg.test_design.as_ref().expect("validated"))? })
        }
        Variant::CostExample => {
            let p = cfg.cost_example.as_ref().expect("validated");
            let d = cost_disclosure_signal(p)?;
            json!({ "thresholds": {
                "upsilon_e": d.upsilon_e,
                "persuadable": d.persuadable,
                "lower": d.signal.lowest(),
            }})
        }
        _ => json!({ "thresholds": MainSolver::new(cfg)?.thresholds()? }),
    };
    Ok(wrap(cfg, &body))
}
