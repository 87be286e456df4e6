// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the
//! process exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use persuasion::envelope::concave_envelope_on;
use persuasion::exante::{pc_kernel, ExAnteSolver, PcSolver};
use persuasion::extensions::{
    cost_disclosure_signal, PhysicalCostParams, PhysicalCostSolver, TestDesignSolver,
};
use persuasion::interim::{interim_monotonicity_check, mu_v, InterimSolver};
use persuasion::oracle::{
    best_good_news_criterion, binding_lower_belief, grid_signal_oracle, lipschitz_bound,
    monte_carlo_health, random_policy, x_star_search, InstanceGenerator, Payoffs,
};
use persuasion::{AnticipationCurve, InterimRegion, Model, ModelParams, PosteriorLottery};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fear_models(seed: u64, n: usize) -> Vec<Model> {
    let mut g = InstanceGenerator::new(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let m = g.concave_model();
        if m.reacts_to_fear() && !matches!(m.phi, AnticipationCurve::Linear) {
            out.push(m);
        }
    }
    out
}

fn interim_value_and_oracle(m: &Model, s: &InterimSolver, mu1: f64, grid: usize) -> (f64, f64) {
    let closed = s.solve(mu1).expect("interim solve").doctor_value;
    let sender = |x: f64| m.health(x);
    let reward = |x: f64| m.v(x);
    let knots = [m.mu_e];
    let pay = Payoffs {
        sender: &sender,
        constraint: Some((&reward, m.vbar(mu1))),
        knots: &knots,
    };
    let r = grid_signal_oracle(mu1, &pay, grid, 2);
    let oracle = if r.feasible_count > 0 {
        r.best_value.max(m.health_untested(mu1))
    } else {
        m.health_untested(mu1)
    };
    (closed, oracle)
}

fn oracle_sandwich() -> Check {
    let start = Instant::now();
    let mut g = InstanceGenerator::new(1);
    let mut worst: f64 = f64::NEG_INFINITY;
    for inst in 0..200 {
        let m = g.concave_model();
        let s = InterimSolver::new(&m).map_err(|e| format!("instance {inst}: {e}"))?;
        let eps = 1e-4 + lipschitz_bound(&m) / 801.0;
        for i in 0..20 {
            let mu1 = (i as f64 + 0.5) / 20.0;
            let (closed, oracle) = interim_value_and_oracle(&m, &s, mu1, 801);
            let gap = (closed - oracle).abs();
            worst = worst.max(gap / eps);
            ensure(gap <= eps, || {
                format!("instance {inst} mu1={mu1}: closed {closed} oracle {oracle} eps {eps}")
            })?;
        }
    }
    let t = start.elapsed();
    ensure(t <= Duration::from_secs(60), || format!("took {t:?}"))?;
    Ok(format!("4000 beliefs, worst gap/eps {worst:.3}, {t:.1?}"))
}

fn pc_binding() -> Check {
    let mut g = InstanceGenerator::new(2);
    let (mut n, mut worst) = (0usize, 0.0f64);
    for inst in 0..200 {
        let m = g.concave_model();
        let s = InterimSolver::new(&m).map_err(|e| e.to_string())?;
        for i in 0..200 {
            let mu1 = (i as f64 + 0.5) / 200.0;
            let sol = s.solve(mu1).map_err(|e| e.to_string())?;
            if matches!(sol.region, InterimRegion::InDNotF | InterimRegion::InMNotD) {
                let gap = sol.accept_signal.expect(|x| m.v(x)) - m.vbar(mu1);
                worst = worst.max(gap.abs());
                n += 1;
                ensure(gap.abs() <= 1e-8, || {
                    format!("instance {inst} mu1={mu1}: {gap:e}")
                })?;
            }
        }
    }
    ensure(n > 1000, || format!("only {n} binding beliefs"))?;
    Ok(format!("{n} binding beliefs, max |E V - Vbar| {worst:.1e}"))
}

fn linear_identity() -> Check {
    let mut g = InstanceGenerator::new(3);
    let mut worst: f64 = 0.0;
    for inst in 0..50 {
        let m = Model::new(g.params(), AnticipationCurve::Linear).unwrap();
        let (v, _) = mu_v(&m).map_err(|e| e.to_string())?;
        ensure(v == 1.0, || format!("instance {inst}: mu_v = {v}"))?;
        let s = InterimSolver::new(&m).map_err(|e| e.to_string())?;
        for i in 0..50 {
            let mu1 = m.mu_e + (1.0 - m.mu_e) * (i as f64 + 0.5) / 50.0;
            let l = s.lower_atom(mu1).map_err(|e| e.to_string())?;
            worst = worst.max((l - m.mu_e).abs());
            ensure((l - m.mu_e).abs() <= 1e-10, || {
                format!("instance {inst} mu1={mu1}: l={l}")
            })?;
        }
    }
    Ok(format!("2500 beliefs, max |l - mu_e| {worst:.1e}"))
}

fn monotonicity() -> Check {
    let (mut lower, mut upper) = (0usize, 0usize);
    for (inst, m) in fear_models(4, 50).iter().enumerate() {
        let s = InterimSolver::new(m).map_err(|e| e.to_string())?;
        let r = interim_monotonicity_check(&s, 100).map_err(|e| e.to_string())?;
        ensure(r.ok(), || format!("instance {inst}: {r:?}"))?;
        lower += r.checked_lower;
        upper += r.checked_upper;
    }
    ensure(lower > 0 && upper > 0, || {
        format!("checked {lower} / {upper}")
    })?;

    let mut g = InstanceGenerator::new(40);
    let (mut designs, mut tries) = (0usize, 0usize);
    while designs < 50 {
        tries += 1;
        ensure(tries < 5000, || "too few nondegenerate test designs".into())?;
        let p = g.test_params();
        let s = TestDesignSolver::new(&p).map_err(|e| e.to_string())?;
        let t = s.thresholds;
        if t.alpha_v_degenerate || t.alpha_v - t.alpha_g < 1e-6 {
            continue;
        }
        designs += 1;
        let mut prev: Option<(f64, f64, f64)> = None;
        for i in 1..=100 {
            let a0 = t.alpha_g + (t.alpha_v - t.alpha_g) * i as f64 / 101.0;
            let d = s.solve(a0).map_err(|e| e.to_string())?;
            if let Some((u, l, b)) = prev {
                ensure(d.upper <= u && d.lower <= l && d.bad_news_prob <= b, || {
                    format!(
                        "design {designs} at {a0}: ({u}, {l}, {b}) -> {:?}",
                        (d.upper, d.lower, d.bad_news_prob)
                    )
                })?;
            }
            prev = Some((d.upper, d.lower, d.bad_news_prob));
        }
    }
    Ok(format!(
        "{lower} lower and {upper} upper checks on 50 instances; 50 test designs x 100 priors"
    ))
}

fn general_equivalence() -> Check {
    let mut g = InstanceGenerator::new(5);
    let mut three = 0usize;
    let (mut worst_split, mut worst_oracle) = (0.0f64, 0.0f64);
    let mut instances = 0;
    // A known three-atom configuration leads the random ones.
    let lead = Model::new(
        ModelParams {
            alpha: 0.1,
            p_bar: 1.0,
            p_high: 0.8,
            p_low: 0.2,
            c: 0.77,
            mu0: 0.5,
        },
        AnticipationCurve::InverseS {
            kink: 0.7,
            shape: 3.0,
        },
    )
    .unwrap();
    let mut models = vec![lead];
    while models.len() < 50 {
        let params = g.params();
        let phi = g.inverse_s_curve();
        models.push(Model::new(params, phi).unwrap());
    }
    for (inst, m) in models.iter().enumerate() {
        let s = InterimSolver::general(m, 2001).map_err(|e| format!("instance {inst}: {e}"))?;
        instances += 1;
        let beliefs: Vec<f64> = (0..4)
            .map(|i| 0.1 + 0.8 * (i as f64 + g.rng.gen::<f64>()) / 4.0)
            .collect();
        for mu1 in beliefs {
            let sol = s.solve(mu1).map_err(|e| e.to_string())?;
            let (region, raw) = s.kernel.signal(mu1).map_err(|e| e.to_string())?;
            let hat = if region == InterimRegion::OutsideM {
                m.health_untested(mu1)
            } else {
                raw.expect(|x| m.health(x))
            };
            let d = (sol.doctor_value - hat).abs();
            worst_split = worst_split.max(d);
            ensure(d <= 1e-10, || {
                format!(
                    "instance {inst} mu1={mu1}: split {} vs {hat}",
                    sol.doctor_value
                )
            })?;
            if sol.accepts && sol.accept_signal.atoms.len() == 3 {
                three += 1;
            }
            let sender = |x: f64| m.health(x);
            let reward = |x: f64| m.v(x);
            let knots = [m.mu_e];
            let pay = Payoffs {
                sender: &sender,
                constraint: Some((&reward, s.kernel.outside_at(mu1))),
                knots: &knots,
            };
            let r = grid_signal_oracle(mu1, &pay, 201, 3);
            let oracle = if r.feasible_count > 0 {
                r.best_value.max(m.health_untested(mu1))
            } else {
                m.health_untested(mu1)
            };
            let d = (sol.doctor_value - oracle).abs();
            worst_oracle = worst_oracle.max(d);
            ensure(d <= 1e-3, || {
                format!(
                    "instance {inst} mu1={mu1}: {} vs oracle {oracle}",
                    sol.doctor_value
                )
            })?;
        }
        if inst == 0 {
            // The lead instance has its three-atom optimum near 0.65.
            let sol = s.solve(0.65).map_err(|e| e.to_string())?;
            if sol.accept_signal.atoms.len() == 3 {
                three += 1;
            }
        }
    }
    ensure(three > 0, || "no three-atom optimum".into())?;
    Ok(format!(
        "{instances} instances, max split gap {worst_split:.1e}, max oracle gap {worst_oracle:.1e}, {three} three-atom optima"
    ))
}

fn exante_dominance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let models = fear_models(6, 20);
    let mut beaten = 0usize;
    for (inst, m) in models.iter().enumerate() {
        let s = ExAnteSolver::new(m).map_err(|e| e.to_string())?;
        for i in 0..=100 {
            let mu = i as f64 / 100.0;
            let v = s.solve(mu).map_err(|e| e.to_string())?.doctor_value;
            let p = s.interim.p_star(mu).map_err(|e| e.to_string())?;
            ensure(v >= p - 1e-8, || {
                format!("instance {inst} mu={mu}: {v} < P* {p}")
            })?;
        }
        for _ in 0..500 {
            let mu0 = rng.gen_range(0.02..0.98);
            let policy = random_policy(&mut rng, mu0, 3);
            let other = policy.evaluate(m, false).doctor_value;
            let best = s.solve(mu0).map_err(|e| e.to_string())?.doctor_value;
            ensure(best >= other - 1e-8, || {
                format!("instance {inst} mu0={mu0}: {best} < {other}")
            })?;
            beaten += 1;
        }
    }
    Ok(format!(
        "20 fear instances, 101 priors and {beaten} random policies"
    ))
}

fn pc_variant() -> Check {
    let mut g = InstanceGenerator::new(7);
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let (mut instances, mut binding, mut compared, mut dominated) = (0, 0, 0, 0);
    while instances < 20 {
        let m = g.concave_model();
        if !m.reacts_to_fear() {
            continue;
        }
        instances += 1;
        let s = PcSolver::new(&m).map_err(|e| e.to_string())?;
        let t = s.thresholds.ok_or("missing thresholds")?;
        let k = pc_kernel(&m).map_err(|e| e.to_string())?;
        for i in 1..400 {
            let mu = i as f64 / 400.0;
            let r = s.solve(mu).map_err(|e| e.to_string())?;
            let slack = r.patient_value - m.v0(mu);
            ensure(slack >= -1e-8, || {
                format!("instance {instances} mu={mu}: slack {slack}")
            })?;
            if mu > t.mu_n && mu < t.mu_v {
                binding += 1;
                ensure(slack.abs() <= 1e-8, || {
                    format!("instance {instances} mu={mu}: slack {slack}")
                })?;
            }
            if [t.mu_n, t.mu_t, t.mu_v]
                .iter()
                .all(|x| (x - mu).abs() >= 1e-6)
            {
                let (direct, _) = s.lottery(mu).map_err(|e| e.to_string())?;
                let (_, mapped) = k.signal(mu).map_err(|e| e.to_string())?;
                let (a, b) = (direct.posteriors(), mapped.posteriors());
                ensure(
                    a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-10),
                    || format!("instance {instances} mu={mu}: {a:?} vs {b:?}"),
                )?;
                compared += 1;
            }
        }
        let mut kept = 0;
        let mut tries = 0;
        while kept < 500 && tries < 200_000 {
            tries += 1;
            let mu0 = rng.gen_range(0.02..0.98);
            let policy = random_policy(&mut rng, mu0, 3);
            let out = policy.evaluate(&m, true);
            if !out.participates {
                continue;
            }
            kept += 1;
            let best = s.solve(mu0).map_err(|e| e.to_string())?.doctor_value;
            ensure(best >= out.doctor_value - 1e-8, || {
                format!(
                    "instance {instances} mu0={mu0}: {best} < {}",
                    out.doctor_value
                )
            })?;
        }
        ensure(kept == 500, || {
            format!("instance {instances}: only {kept} feasible policies")
        })?;
        dominated += kept;
    }
    Ok(format!(
        "20 instances: {binding} binding priors, {compared} kernel comparisons, {dominated} feasible policies"
    ))
}

fn physical_cost() -> Check {
    let mut g = InstanceGenerator::new(8);
    let mut worst: f64 = 0.0;
    for inst in 0..100 {
        let base = g.params();
        let gap = base.p_bar - base.c - base.p_low;
        let psi = g.rng.gen_range(0.0..0.9) * gap;
        let s = PhysicalCostSolver::new(&PhysicalCostParams { base, psi })
            .map_err(|e| e.to_string())?;
        let f = s.slack(&PosteriorLottery::degenerate(s.mu_f));
        let d = s.slack(&PosteriorLottery::binary(s.mu_m, 0.0, 1.0));
        worst = worst.max(f.abs()).max(d.abs());
        ensure(f.abs() <= 1e-12 && d.abs() <= 1e-12, || {
            format!("instance {inst}: {f:e} {d:e}")
        })?;

        let s0 = PhysicalCostSolver::new(&PhysicalCostParams { base, psi: 1e-14 })
            .map_err(|e| e.to_string())?;
        let lin = Model::new(base, AnticipationCurve::Linear).unwrap();
        let main = InterimSolver::new(&lin).map_err(|e| e.to_string())?;
        let th = main.thresholds();
        let warn = ExAnteSolver::new(&lin).map_err(|e| e.to_string())?;
        let (lot, _) = warn.lottery(0.999);
        ensure((s0.mu_f - lot.lowest()).abs() <= 1e-10, || {
            format!("instance {inst}: {} vs {}", s0.mu_f, lot.lowest())
        })?;
        ensure(
            (s0.mu_m - th.mu_m_high.unwrap_or(f64::NAN)).abs() <= 1e-10,
            || format!("instance {inst}: mu_m {}", s0.mu_m),
        )?;
        for i in 0..20 {
            let mu1 = lin.mu_e + (1.0 - lin.mu_e) * (i as f64 + 0.5) / 20.0;
            let a = s0.lower_atom(mu1);
            let b = main.lower_atom(mu1).map_err(|e| e.to_string())?;
            ensure((a - b).abs() <= 1e-10, || {
                format!("instance {inst} mu1={mu1}: {a} vs {b}")
            })?;
        }
    }
    Ok(format!(
        "100 instances, max indifference residual {worst:.1e}"
    ))
}

fn best_good_news() -> Check {
    let mut g = InstanceGenerator::new(9);
    let (mut evaluated, mut searches) = (0usize, 0usize);
    for inst in 0..50 {
        let m = g.concave_model();
        let s = InterimSolver::new(&m).map_err(|e| e.to_string())?;
        let sender = |x: f64| m.health(x);
        let v = |x: f64| m.v(x);
        let kinks = [m.mu_e];
        for i in 0..20 {
            let mu1 = (i as f64 + 0.5) / 20.0;
            let region = s.kernel.region(mu1);
            if !matches!(region, InterimRegion::InDNotF | InterimRegion::InMNotD) {
                continue;
            }
            let (rhs, y_max, lo) = (m.vbar(mu1), mu1.min(m.mu_e), mu1.max(m.mu_e));
            for j in 1..=50 {
                let x = lo + (1.0 - lo) * j as f64 / 50.0;
                let d = binding_lower_belief(x, mu1, &v, rhs, y_max);
                if d.is_none() {
                    continue;
                }
                let c = best_good_news_criterion(x, &sender, &v, d, &kinks);
                evaluated += 1;
                ensure(c.holds == Some(true), || {
                    format!("instance {inst} mu1={mu1} x={x}: {c:?}")
                })?;
            }
            let star = x_star_search(
                |x| binding_lower_belief(x, mu1, &v, rhs, y_max).is_some(),
                lo,
            )
            .ok_or_else(|| format!("instance {inst} mu1={mu1}: no feasible upper belief"))?;
            let h = s.upper_atom(mu1).map_err(|e| e.to_string())?;
            let h = if region == InterimRegion::InDNotF {
                1.0
            } else {
                h
            };
            ensure((star - h).abs() <= 1e-8, || {
                format!("instance {inst} mu1={mu1}: x* {star} vs {h}")
            })?;
            searches += 1;
        }
    }
    for inst in 0..50 {
        let p = g.cost_params();
        let ue = p.upsilon_e();
        let sender = |u: f64| p.sender_payoff(u);
        let receiver = |u: f64| p.receiver_payoff(u);
        for j in 1..=50 {
            let x = p.upsilon0 + (1.0 - p.upsilon0) * j as f64 / 50.0;
            let d = binding_lower_belief(x, p.upsilon0, &receiver, p.psi, ue);
            if d.is_none() {
                continue;
            }
            let c = best_good_news_criterion(x, &sender, &receiver, d, &[ue]);
            evaluated += 1;
            ensure(c.holds == Some(true), || {
                format!("cost instance {inst} x={x}: {c:?}")
            })?;
        }
        let closed = cost_disclosure_signal(&p).map_err(|e| e.to_string())?;
        let star = x_star_search(
            |x| binding_lower_belief(x, p.upsilon0, &receiver, p.psi, ue).is_some(),
            p.upsilon0,
        )
        .ok_or_else(|| format!("cost instance {inst}: no feasible upper belief"))?;
        ensure((star - closed.signal.highest()).abs() <= 1e-8, || {
            format!("cost instance {inst}: x* {star}")
        })?;
        searches += 1;
    }
    ensure(evaluated > 1000, || {
        format!("only {evaluated} criterion evaluations")
    })?;
    Ok(format!(
        "{evaluated} criterion evaluations, {searches} upper-belief searches"
    ))
}

fn monte_carlo() -> Check {
    let start = Instant::now();
    let mut g = InstanceGenerator::new(10);
    let mut worst: f64 = 0.0;
    for inst in 0..20u64 {
        let m = g.concave_model();
        let sol = if inst % 2 == 1 && m.reacts_to_fear() {
            PcSolver::new(&m).and_then(|s| s.solve(m.params.mu0))
        } else {
            ExAnteSolver::new(&m).and_then(|s| s.solve(m.params.mu0))
        }
        .map_err(|e| e.to_string())?;
        let est = monte_carlo_health(&sol.report(), &m, 1_000_000, 1000 + inst)
            .map_err(|e| e.to_string())?;
        let z = (est.estimate - sol.doctor_value) / est.std_error;
        worst = worst.max(z.abs());
        ensure(z.abs() <= 4.0, || format!("instance {inst}: z = {z:.2}"))?;
    }
    let t = start.elapsed();
    ensure(t <= Duration::from_secs(120), || format!("took {t:?}"))?;
    Ok(format!(
        "20 instances x 1e6 draws, max |z| {worst:.2}, {t:.1?}"
    ))
}

fn random_piecewise(rng: &mut ChaCha8Rng) -> (Vec<(f64, f64)>, f64) {
    let k = rng.gen_range(2..12);
    let mut xs: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
    xs.push(0.0);
    xs.push(1.0);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, rng.gen_range(-1.0..1.0))).collect();
    let lip = pts
        .windows(2)
        .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
        .fold(0.0, f64::max);
    (pts, lip)
}

fn piecewise_eval(pts: &[(f64, f64)], x: f64) -> f64 {
    let i = pts.partition_point(|p| p.0 <= x).clamp(1, pts.len() - 1);
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn envelope_engine() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 401;
    let (mut worst_idem, mut worst_ratio) = (0.0f64, 0.0f64);
    for inst in 0..100 {
        let (pts, lip) = random_piecewise(&mut rng);
        let f = |x: f64| piecewise_eval(&pts, x);
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let env = concave_envelope_on(f, grid.clone(), &[]).map_err(|e| e.to_string())?;
        let again =
            concave_envelope_on(|x| env.eval(x), grid.clone(), &[]).map_err(|e| e.to_string())?;
        let idem = env
            .values
            .iter()
            .zip(&again.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_idem = worst_idem.max(idem);
        ensure(idem <= 1e-9, || {
            format!("instance {inst}: idempotence gap {idem:e}")
        })?;

        let fine_grid: Vec<f64> = (0..2 * n - 1)
            .map(|i| i as f64 / (2 * n - 2) as f64)
            .collect();
        let fine = concave_envelope_on(f, fine_grid, &[]).map_err(|e| e.to_string())?;
        let change = grid
            .iter()
            .map(|&x| (fine.eval(x) - env.eval(x)).abs())
            .fold(0.0, f64::max);
        let bound = 10.0 * lip / (n - 1) as f64;
        worst_ratio = worst_ratio.max(change / bound);
        ensure(change < bound, || {
            format!("instance {inst}: refinement change {change:e} vs {bound:e}")
        })?;
    }
    Ok(format!(
        "100 functions, max idempotence gap {worst_idem:.1e}, max refinement change/bound {worst_ratio:.2e}"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("oracle sandwich", oracle_sandwich),
        ("participation binds", pc_binding),
        ("linear identity", linear_identity),
        ("monotonicity", monotonicity),
        ("general curve equivalence", general_equivalence),
        ("ex ante dominance", exante_dominance),
        ("participation variant", pc_variant),
        ("test fee closed forms", physical_cost),
        ("best good news", best_good_news),
        ("monte carlo", monte_carlo),
        ("envelope engine", envelope_engine),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let t = start.elapsed();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{t:.1?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{t:.1?}]", i + 1);
            }
        }
    }
    if failed == 0 {
        println!("all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
