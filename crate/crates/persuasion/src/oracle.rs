// SPDX-License-Identifier: Apache-2.0

//! Brute-force checks of the solvers: enumeration of grid lotteries,
//! simulation of the full game, and the slope test behind the rule that a
//! binding signal should make its good news as good as possible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envelope::{bisect_root, boundary};
use crate::exante::Policy;
use crate::extensions::{CostExampleParams, TestModelParams};
use crate::interim::INDIFFERENCE_TOL;
use crate::model::{
    AnticipationCurve, Atom, Model, ModelError, ModelParams, PolicyReport, PosteriorLottery,
};

/// Slack below which a grid lottery still counts as acceptable.
pub const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Best sender payoff; `-inf` when nothing is feasible.
    pub best_value: f64,
    pub best_signal: Option<PosteriorLottery>,
    pub feasible_count: usize,
    pub grid_n: usize,
}

/// Payoffs of a single persuasion problem.
pub struct Payoffs<'a> {
    /// Sender payoff at a posterior.
    pub sender: &'a dyn Fn(f64) -> f64,
    /// Receiver reward and required expected reward. `None` means the
    /// problem is unconstrained.
    pub constraint: Option<(&'a dyn Fn(f64) -> f64, f64)>,
    /// Points added to the uniform grid, e.g. kinks of the payoffs.
    pub knots: &'a [f64],
}

fn oracle_grid(prior: f64, grid_n: usize, knots: &[f64]) -> Vec<f64> {
    let n = grid_n.max(2);
    let mut g: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    g.push(prior);
    g.extend(knots.iter().copied().filter(|k| (0.0..=1.0).contains(k)));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Best Bayes-plausible lottery with at most `max_atoms` atoms on the grid.
pub fn grid_signal_oracle(
    prior: f64,
    payoffs: &Payoffs,
    grid_n: usize,
    max_atoms: usize,
) -> OracleResult {
    let g = oracle_grid(prior, grid_n, payoffs.knots);
    let s: Vec<f64> = g.iter().map(|&x| (payoffs.sender)(x)).collect();
    let (r, rhs) = match payoffs.constraint {
        Some((f, rhs)) => (g.iter().map(|&x| f(x)).collect::<Vec<_>>(), rhs),
        None => (vec![0.0; g.len()], f64::NEG_INFINITY),
    };
    let mut best = OracleResult {
        best_value: f64::NEG_INFINITY,
        best_signal: None,
        feasible_count: 0,
        grid_n,
    };
    let mut best_atoms: Vec<(usize, f64)> = Vec::new();
    let mut offer = |value: f64, atoms: &[(usize, f64)], best: &mut OracleResult| {
        best.feasible_count += 1;
        if value > best.best_value {
            best.best_value = value;
            best_atoms.clear();
            best_atoms.extend_from_slice(atoms);
        }
    };

    let ip = g
        .iter()
        .position(|&x| x == prior)
        .expect("prior is on the grid");
    if max_atoms >= 1 && r[ip] >= rhs - FEASIBILITY_TOL {
        offer(s[ip], &[(ip, 1.0)], &mut best);
    }
    let below = 0..ip;
    let above = ip + 1..g.len();
    if max_atoms >= 2 {
        for a in below.clone() {
            for c in above.clone() {
                let span = g[c] - g[a];
                let wa = (g[c] - prior) / span;
                let wc = 1.0 - wa;
                if wa * r[a] + wc * r[c] >= rhs - FEASIBILITY_TOL {
                    offer(wa * s[a] + wc * s[c], &[(a, wa), (c, wc)], &mut best);
                }
            }
        }
    }
    if max_atoms >= 3 {
        for a in below {
            for c in above.clone() {
                let (xa, xc) = (g[a], g[c]);
                let span = xc - xa;
                let wa0 = (xc - prior) / span;
                let wc0 = 1.0 - wa0;
                let (s0, r0) = (wa0 * s[a] + wc0 * s[c], wa0 * r[a] + wc0 * r[c]);
                for b in a + 1..c {
                    if b == ip {
                        continue;
                    }
                    let xb = g[b];
                    // Moving weight u*span onto b keeps the mean fixed.
                    let umax = (wa0 / (xc - xb)).min(wc0 / (xb - xa));
                    let ds = span * s[b] - (xc - xb) * s[a] - (xb - xa) * s[c];
                    let dr = span * r[b] - (xc - xb) * r[a] - (xb - xa) * r[c];
                    let ok = |u: f64| r0 + u * dr >= rhs - FEASIBILITY_TOL;
                    let mut cands = [umax, f64::NAN];
                    if dr != 0.0 {
                        cands[1] = ((rhs - r0) / dr).clamp(0.0, umax);
                    }
                    let mut top: Option<(f64, f64)> = None;
                    for u in cands {
                        if !(u > 0.0) || !ok(u) {
                            continue;
                        }
                        let v = s0 + u * ds;
                        if top.is_none_or(|(bv, _)| v > bv) {
                            top = Some((v, u));
                        }
                    }
                    if let Some((v, u)) = top {
                        let atoms = [
                            (a, wa0 - u * (xc - xb)),
                            (b, u * span),
                            (c, wc0 - u * (xb - xa)),
                        ];
                        offer(v, &atoms, &mut best);
                    }
                }
            }
        }
    }
    if !best_atoms.is_empty() {
        let atoms: Vec<Atom> = best_atoms
            .iter()
            .filter(|&&(_, w)| w > 0.0)
            .map(|&(i, w)| Atom {
                posterior: g[i],
                weight: w,
            })
            .collect();
        let lottery = if atoms.len() == 1 {
            PosteriorLottery::degenerate(prior)
        } else {
            rebalance(prior, &atoms)
        };
        best.best_value = lottery.expect(|x| (payoffs.sender)(x));
        best.best_signal = Some(lottery);
    }
    best
}

/// Builds a lottery from grid atoms, absorbing rounding in the weights.
fn rebalance(prior: f64, atoms: &[Atom]) -> PosteriorLottery {
    PosteriorLottery::from_atoms(prior, atoms).unwrap_or_else(|_| {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        let scaled: Vec<Atom> = atoms
            .iter()
            .map(|a| Atom {
                posterior: a.posterior,
                weight: a.weight / total,
            })
            .collect();
        PosteriorLottery {
            prior,
            atoms: scaled,
        }
    })
}

/// Lipschitz bound, in the belief of a single atom, of the tested health
/// probability along the binding signals of the interim problem.
pub fn lipschitz_bound(model: &Model) -> f64 {
    let p = &model.params;
    let me = model.mu_e;
    (1.0 - p.alpha) * ((p.p_bar - p.p_low) / me.min(1.0 - me) + (p.p_high - p.p_low))
}

// ---------------------------------------------------------------------------
// Monte Carlo

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub draws: u64,
}

const BLOCK: u64 = 1 << 16;

/// Draws an atom of `lottery` given the true state (`high` for the good
/// state) using the conditional probabilities implied by Bayes' rule.
fn draw_posterior(rng: &mut ChaCha8Rng, lottery: &PosteriorLottery, high: bool) -> f64 {
    let x = lottery.prior;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for a in &lottery.atoms {
        acc += if high {
            a.weight * a.posterior / x
        } else {
            a.weight * (1.0 - a.posterior) / (1.0 - x)
        };
        if u < acc {
            return a.posterior;
        }
    }
    lottery.atoms.last().map_or(x, |a| a.posterior)
}

/// Simulates the game under `report` and returns the frequency of good
/// health. Identical seeds give identical estimates.
pub fn monte_carlo_health(
    report: &PolicyReport,
    model: &Model,
    n_draws: u64,
    seed: u64,
) -> Result<McEstimate, ModelError> {
    report.validate()?;
    if n_draws == 0 {
        return Err(ModelError::InvalidParam {
            field: "n_draws",
            reason: "must be positive".into(),
        });
    }
    let p = &model.params;
    let mu0 = report.ex_ante.prior;
    // Patient decisions do not depend on the draw, so they are fixed here.
    let tests: Vec<bool> = report
        .stages
        .iter()
        .map(|s| {
            s.accept.expect(|x| model.v(x)) - s.reject.expect(|x| model.v0(x)) >= -INDIFFERENCE_TOL
        })
        .collect();
    let participates = !report.ex_ante_participation || {
        let listen: f64 = report
            .ex_ante
            .atoms
            .iter()
            .zip(&report.stages)
            .zip(&tests)
            .map(|((a, s), &t)| {
                a.weight
                    * if t {
                        s.accept.expect(|x| model.v(x))
                    } else {
                        s.reject.expect(|x| model.v0(x))
                    }
            })
            .sum();
        listen >= model.v0(mu0) - INDIFFERENCE_TOL
    };

    let mut healthy: u64 = 0;
    let blocks = n_draws.div_ceil(BLOCK);
    for block in 0..blocks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let n = BLOCK.min(n_draws - block * BLOCK);
        for _ in 0..n {
            let high = rng.gen::<f64>() < mu0;
            let untreated = if high { p.p_high } else { p.p_low };
            let mut prob = untreated;
            if participates {
                let x = draw_posterior(&mut rng, &report.ex_ante, high);
                let i = report
                    .stages
                    .iter()
                    .position(|s| s.posterior == x)
                    .expect("validated report has a stage per atom");
                let stage = &report.stages[i];
                if tests[i] {
                    let sick = rng.gen::<f64>() >= p.alpha;
                    let y = draw_posterior(&mut rng, &stage.accept, high);
                    if !sick {
                        healthy += 1;
                        continue;
                    }
                    if y <= model.mu_e {
                        prob = p.p_bar;
                    }
                } else {
                    let _ = draw_posterior(&mut rng, &stage.reject, high);
                    if rng.gen::<f64>() < p.alpha {
                        healthy += 1;
                        continue;
                    }
                }
            } else if rng.gen::<f64>() < p.alpha {
                healthy += 1;
                continue;
            }
            if rng.gen::<f64>() < prob {
                healthy += 1;
            }
        }
    }
    let est = healthy as f64 / n_draws as f64;
    Ok(McEstimate {
        estimate: est,
        std_error: (est * (1.0 - est) / n_draws as f64).sqrt(),
        draws: n_draws,
    })
}

// ---------------------------------------------------------------------------
// Best-good-news rule

const FD_STEP: f64 = 1e-6;
const KINK_ZONE: f64 = 1e-4;

/// Finite-difference derivative that never straddles a kink: within
/// `1e-4` of a kink it uses the side the point belongs to, where a point on
/// a kink belongs to the piece on its left.
pub fn derivative(f: &dyn Fn(f64) -> f64, x: f64, kinks: &[f64]) -> f64 {
    let h = FD_STEP;
    let backward = || (f(x) - f(x - h)) / h;
    let forward = || (f(x + h) - f(x)) / h;
    if x - h < 0.0 {
        return forward();
    }
    if x + h > 1.0 {
        return backward();
    }
    for &k in kinks {
        if x <= k && k - x < KINK_ZONE {
            return backward();
        }
        if x > k && x - k < KINK_ZONE {
            return forward();
        }
    }
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    /// `None` when there is no binding lower belief at `x`.
    pub holds: Option<bool>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Tolerance of the criterion comparison.
pub const CRITERION_TOL: f64 = 1e-9;

/// Slope condition under which raising the upper belief `x` (with the best
/// binding lower belief `d`) raises the sender's payoff.
pub fn best_good_news_criterion(
    x: f64,
    sender: &dyn Fn(f64) -> f64,
    receiver: &dyn Fn(f64) -> f64,
    d: Option<f64>,
    kinks: &[f64],
) -> CriterionValue {
    let Some(d) = d else {
        return CriterionValue {
            holds: None,
            lhs: f64::NAN,
            rhs: f64::NAN,
        };
    };
    let s_p = (sender(x) - sender(d)) / (x - d);
    let s_v = (receiver(x) - receiver(d)) / (x - d);
    let (p_x, p_d) = (derivative(sender, x, kinks), derivative(sender, d, kinks));
    let (v_x, v_d) = (
        derivative(receiver, x, kinks),
        derivative(receiver, d, kinks),
    );
    let lhs = s_p - p_x;
    let rhs = (s_v - v_x) / (s_v - v_d) * (s_p - p_d);
    CriterionValue {
        holds: Some(lhs <= rhs + CRITERION_TOL * (1.0 + lhs.abs().max(rhs.abs()))),
        lhs,
        rhs,
    }
}

/// Largest lower belief in `[0, y_max]` that makes the binary signal
/// `{y, x}` at `prior` meet the constraint with equality.
pub fn binding_lower_belief(
    x: f64,
    prior: f64,
    receiver: &dyn Fn(f64) -> f64,
    rhs: f64,
    y_max: f64,
) -> Option<f64> {
    let vx = receiver(x);
    let f = |y: f64| {
        if x - y <= 0.0 {
            return vx - rhs;
        }
        ((x - prior) * receiver(y) + (prior - y) * vx) / (x - y) - rhs
    };
    const N: usize = 400;
    let mut hi = y_max;
    let mut fh = f(hi);
    if fh == 0.0 {
        return Some(hi);
    }
    for i in (0..N).rev() {
        let lo = y_max * i as f64 / N as f64;
        let fl = f(lo);
        if fl == 0.0 || fl.signum() != fh.signum() {
            return bisect_root(f, lo, hi);
        }
        hi = lo;
        fh = fl;
    }
    None
}

/// Largest upper belief in `[lo, 1]` passing `feasible`, assuming the
/// feasible set is an interval. The last feasible point of a scan is pushed
/// to the boundary by bisection.
pub fn x_star_search(feasible: impl Fn(f64) -> bool, lo: f64) -> Option<f64> {
    if feasible(1.0) {
        return Some(1.0);
    }
    const N: usize = 1000;
    let at = |i: usize| lo + (1.0 - lo) * i as f64 / N as f64;
    let last = (0..N).rev().find(|&i| feasible(at(i)))?;
    Some(boundary(feasible, at(last), at(last + 1)))
}

// ---------------------------------------------------------------------------
// Random instances and policies

/// Seeded generator of model instances.
pub struct InstanceGenerator {
    pub rng: ChaCha8Rng,
}

impl InstanceGenerator {
    pub fn new(seed: u64) -> Self {
        InstanceGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn params(&mut self) -> ModelParams {
        let r = &mut self.rng;
        let alpha = r.gen_range(0.05..0.95);
        let p_low = r.gen_range(0.0..0.5);
        let p_high = r.gen_range(p_low + 0.1..0.9);
        let p_bar = r.gen_range(p_high + 0.05..=1.0);
        let mu_e = r.gen_range(0.1..0.9);
        let c = p_bar - p_low - mu_e * (p_high - p_low);
        ModelParams {
            alpha,
            p_bar,
            p_high,
            p_low,
            c,
            mu0: r.gen_range(0.05..0.95),
        }
    }

    /// A concave curve from one of the concave families, chosen uniformly.
    pub fn concave_curve(&mut self) -> AnticipationCurve {
        let r = &mut self.rng;
        match r.gen_range(0..4) {
            0 => AnticipationCurve::Linear,
            1 => AnticipationCurve::Power {
                gamma: r.gen_range(0.2..0.95),
            },
            2 => AnticipationCurve::Exponential {
                k: r.gen_range(0.5..12.0),
            },
            _ => {
                let mut slopes: Vec<f64> = (0..4).map(|_| r.gen_range(0.1..3.0)).collect();
                slopes.sort_by(|a, b| b.total_cmp(a));
                let mut knots = vec![(0.0, 0.0)];
                for (i, s) in slopes.iter().enumerate() {
                    let (x0, y0) = knots[i];
                    let x1 = (i + 1) as f64 / 4.0;
                    knots.push((x1, y0 + s * (x1 - x0)));
                }
                AnticipationCurve::Tabulated { knots }
            }
        }
    }

    pub fn inverse_s_curve(&mut self) -> AnticipationCurve {
        AnticipationCurve::InverseS {
            kink: self.rng.gen_range(0.2..0.8),
            shape: self.rng.gen_range(1.5..4.0),
        }
    }

    pub fn test_params(&mut self) -> TestModelParams {
        let r = &mut self.rng;
        let p_under = r.gen_range(0.0..0.5);
        let p_bar = r.gen_range(p_under + 0.2..=1.0);
        let c = r.gen_range(0.2..0.8) * (p_bar - p_under);
        let phi = if r.gen_bool(0.5) {
            AnticipationCurve::Exponential {
                k: r.gen_range(2.0..20.0),
            }
        } else {
            AnticipationCurve::Power {
                gamma: r.gen_range(0.2..0.8),
            }
        };
        TestModelParams {
            alpha0: r.gen_range(0.05..0.95),
            p_bar,
            p_under,
            c,
            phi,
        }
    }

    pub fn cost_params(&mut self) -> CostExampleParams {
        let r = &mut self.rng;
        let c_low = r.gen_range(0.0..0.9);
        let c_high = r.gen_range(1.1..3.0);
        let ue = (1.0 - c_low) / (c_high - c_low);
        let upsilon0 = r.gen_range(ue..0.99);
        let psi = r.gen_range(0.0..0.9) * (1.0 - upsilon0) * (1.0 - c_low);
        let p_under = r.gen_range(0.0..0.5);
        CostExampleParams {
            c_high,
            c_low,
            upsilon0,
            psi,
            p_bar: r.gen_range(p_under..=1.0),
            p_under,
        }
    }

    pub fn concave_model(&mut self) -> Model {
        let params = self.params();
        let phi = self.concave_curve();
        Model::new(params, phi).expect("generated parameters are valid")
    }
}

/// A lottery with mean `prior` and up to three atoms.
pub fn random_lottery(rng: &mut impl Rng, prior: f64, max_atoms: usize) -> PosteriorLottery {
    if max_atoms < 2 || prior <= 0.0 || prior >= 1.0 {
        return PosteriorLottery::degenerate(prior);
    }
    let lo = rng.gen_range(0.0..prior);
    let hi = rng.gen_range(prior..=1.0);
    let base = PosteriorLottery::binary(prior, lo, hi);
    if max_atoms < 3 || base.is_degenerate() {
        return base;
    }
    let mid = rng.gen_range(lo..hi);
    let (wl, wh) = (base.atoms[0].weight, base.atoms[1].weight);
    let span = hi - lo;
    let t = rng.gen::<f64>() * (wl * span / (hi - mid)).min(wh * span / (mid - lo));
    let atoms = [
        Atom {
            posterior: lo,
            weight: wl - t * (hi - mid) / span,
        },
        Atom {
            posterior: mid,
            weight: t,
        },
        Atom {
            posterior: hi,
            weight: wh - t * (mid - lo) / span,
        },
    ];
    match PosteriorLottery::from_atoms(prior, &atoms) {
        Ok(l) if atoms.iter().all(|a| a.weight > 1e-9) => l,
        _ => base,
    }
}

/// A random two-stage policy at `mu0`, with binary interim signals.
pub fn random_policy(rng: &mut impl Rng, mu0: f64, max_atoms: usize) -> Policy {
    let ex_ante = random_lottery(rng, mu0, max_atoms);
    let stages = ex_ante
        .atoms
        .iter()
        .map(|a| crate::model::StagePolicy {
            posterior: a.posterior,
            accept: random_lottery(rng, a.posterior, 2),
            reject: random_lottery(rng, a.posterior, 2),
        })
        .collect();
    Policy { ex_ante, stages }
}
