//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

#![allow(clippy::type_complexity)]

use std::collections::BTreeMap;
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{array, Array1, Array2};
use pdmd::algorithm::{
    agent_round, run, DynamicMapping, InvariantKind, RoundInput, RunOptions, StepsizeSchedule,
    Stepsizes, ViolationPolicy,
};
use pdmd::experiment::{execute, replay, run_experiment, ExperimentConfig};
use pdmd::geometry::{BregmanGeometry, Domain, RegularizerSpec};
use pdmd::metrics::{
    accumulated_variation, constraint_violation, dynamic_optimum, estimate_constants, regret,
    static_optimum, theoretical_bounds, BoundInputs, ComparatorKind, ComparatorSequence,
    OracleOptions, TheoreticalConstants,
};
use pdmd::network::{check_assumption1, generate_graph_sequence, CommGraphSequence};
use pdmd::problem::{
    generate_instance, load_trace, trace_to_string, OnlineProblem, QuadraticAffineProblem,
    QuadraticTerm, Subgradients, TargetDynamics, TrackingInstance, TrackingParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn e<T, E: Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|err| err.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_config(name: &str) -> Result<ExperimentConfig, String> {
    e(ExperimentConfig::load(configs_dir().join(format!("{name}.toml"))))
}

fn euclidean(inst: &impl OnlineProblem, scale: f64) -> Vec<BregmanGeometry> {
    (0..inst.agents())
        .map(|i| BregmanGeometry::scaled_euclidean(scale, inst.domain(i).clone()).unwrap())
        .collect()
}

fn reference(inst: &TrackingInstance) -> ComparatorSequence {
    ComparatorSequence {
        kind: ComparatorKind::Reference,
        points: (1..=inst.horizon())
            .map(|t| inst.reference_optimum(t).unwrap())
            .collect(),
    }
}

// 1 ------------------------------------------------------------------------

fn dual_boundedness() -> Check {
    let mut runs = 0;
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let params = TrackingParams {
            horizon: 2000,
            seed,
            ..TrackingParams::default()
        };
        let inst = e(generate_instance(&params))?;
        let graphs = e(generate_graph_sequence(10, 0.2, 2000, seed))?;
        let geoms = euclidean(&inst, 10.0);
        let f = e(estimate_constants(&inst, &geoms, &graphs))?.f;
        let phi = e(DynamicMapping::true_dynamics(&inst))?;
        let cases = [
            (StepsizeSchedule::General { c: 0.7, kappa: 0.3 }, 0.3, &phi),
            (StepsizeSchedule::Slater { kappa: 0.5 }, 0.5, &DynamicMapping::Identity),
            (StepsizeSchedule::StronglyConvex { kappa: 0.6 }, 0.6, &phi),
        ];
        for (schedule, kappa, mapping) in cases {
            let options = RunOptions {
                dual_bound: Some(f),
                policy: ViolationPolicy::Record,
                ..RunOptions::default()
            };
            let trace = e(run(&inst, &graphs, &schedule, mapping, &geoms, &options))?;
            let flagged = trace
                .violations
                .iter()
                .filter(|v| v.kind == InvariantKind::DualBound)
                .count();
            ensure(flagged == 0, || format!("seed {seed} {schedule:?}: {flagged} flagged rounds"))?;
            for (k, round) in trace.rounds.iter().enumerate() {
                let beta = ((k + 1) as f64).powf(-kappa);
                for (i, a) in round.iter().enumerate() {
                    for q in [&a.q, &a.q_mix] {
                        let ratio = norm(q) * beta / f;
                        ensure(norm(q) <= f / beta, || {
                            format!("seed {seed} {schedule:?}: ||q|| / (F / beta) = {ratio} at t={} i={i}", k + 1)
                        })?;
                        worst = worst.max(ratio);
                        checked += 1;
                    }
                }
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs, {checked} dual norms, max ||q|| beta / F = {worst:.2e}"))
}

// 2 ------------------------------------------------------------------------

struct StepCase {
    geom: BregmanGeometry,
    x_prev: Array1<f64>,
    a: Array1<f64>,
    reg: RegularizerSpec,
    alpha: f64,
    kl: bool,
}

fn random_case(rng: &mut ChaCha8Rng) -> StepCase {
    let p = rng.random_range(1..=6);
    let reg = RegularizerSpec::new(
        if rng.random_bool(0.5) { rng.random_range(0.0..3.0) } else { 0.0 },
        if rng.random_bool(0.5) { rng.random_range(0.0..30.0) } else { 0.0 },
    )
    .unwrap();
    let alpha = rng.random_range(0.01..2.0);
    if rng.random_bool(0.2) {
        let p = p.max(2);
        let w: Array1<f64> = (0..p).map(|_| rng.random_range(0.05..1.0)).collect();
        let sum = w.sum();
        StepCase {
            geom: BregmanGeometry::kl_simplex(p).unwrap(),
            x_prev: w / sum,
            a: (0..p).map(|_| rng.random_range(-5.0..5.0)).collect(),
            reg,
            alpha,
            kl: true,
        }
    } else {
        let lower: Array1<f64> = (0..p).map(|_| rng.random_range(-3.0..1.0)).collect();
        let upper: Array1<f64> = lower.mapv(|l| l + rng.random_range(0.5..5.0));
        let x_prev = Array1::from_shape_fn(p, |j| rng.random_range(lower[j]..=upper[j]));
        let domain = Domain::new_box(lower, upper).unwrap();
        StepCase {
            geom: BregmanGeometry::scaled_euclidean(rng.random_range(0.1..20.0), domain).unwrap(),
            x_prev,
            a: (0..p).map(|_| rng.random_range(-50.0..50.0)).collect(),
            reg,
            alpha,
            kl: false,
        }
    }
}

fn sample_point(domain: &Domain, rng: &mut ChaCha8Rng) -> Array1<f64> {
    match domain {
        Domain::Box { lower, upper } => {
            Array1::from_shape_fn(lower.len(), |j| rng.random_range(lower[j]..=upper[j]))
        }
        Domain::Simplex { dim } => {
            // exponential spacings give a uniform point; sometimes drop a coordinate
            let mut w: Array1<f64> = (0..*dim).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            if rng.random_bool(0.2) {
                let k = rng.random_range(0..*dim);
                w[k] = 0.0;
            }
            let s = w.sum();
            w / s
        }
    }
}

/// `alpha <a, z> + alpha r(z) + D(z, x_prev)`, written out per geometry.
fn step_objective(c: &StepCase, z: &Array1<f64>, scale: f64) -> f64 {
    let lin = c.alpha * z.dot(&c.a);
    let reg = c.alpha * (c.reg.l1 * z.mapv(f64::abs).sum() + c.reg.l2 * z.dot(z));
    let div = if c.kl {
        z.iter()
            .zip(c.x_prev.iter())
            .map(|(&zj, &pj)| if zj > 0.0 { zj * (zj / pj).ln() } else { 0.0 })
            .sum::<f64>()
    } else {
        let d = z - &c.x_prev;
        scale * d.dot(&d)
    };
    lin + reg + div
}

fn mirror_step_contracts() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_dev = 0.0f64;
    let mut worst_agree = 0.0f64;
    for k in 0..10_000 {
        let c = random_case(&mut rng);
        let x = e(c.geom.mirror_step(c.x_prev.view(), c.a.view(), &c.reg, c.alpha))?;
        ensure(c.geom.domain().contains(x.view()), || format!("case {k}: step left the domain"))?;
        let (scale, sigma) = match c.geom.mirror() {
            pdmd::Mirror::ScaledEuclidean { scale } => (scale, 2.0 * scale),
            pdmd::Mirror::Kl => (0.0, 1.0),
        };
        let fx = step_objective(&c, &x, scale);
        for _ in 0..1000 {
            let z = sample_point(c.geom.domain(), &mut rng);
            let gap = fx - step_objective(&c, &z, scale);
            worst_gap = worst_gap.max(gap);
            ensure(gap <= 1e-9, || format!("case {k}: a random point beats the step by {gap:e}"))?;
        }
        let sup_norm = match c.geom.domain() {
            Domain::Box { lower, upper } => lower
                .iter()
                .zip(upper.iter())
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            Domain::Simplex { .. } => 1.0,
        };
        let p = c.x_prev.len() as f64;
        let g_h = c.alpha * norm(&c.a) + c.alpha * (c.reg.l1 * p.sqrt() + 2.0 * c.reg.l2 * sup_norm);
        let dev = norm(&(&x - &c.x_prev));
        worst_dev = worst_dev.max(dev * sigma / g_h.max(f64::MIN_POSITIVE));
        ensure(dev <= g_h / sigma * (1.0 + 1e-12), || format!("case {k}: step {dev} exceeds G_h / sigma = {}", g_h / sigma))?;
        let inner = e(c.geom.mirror_step_iterative(c.x_prev.view(), c.a.view(), &c.reg, c.alpha))?;
        let agree = (&inner.point - &x).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
        worst_agree = worst_agree.max(agree);
        ensure(agree <= 1e-8, || format!("case {k}: closed form and inner solve differ by {agree:e}"))?;
    }
    Ok(format!(
        "10^4 steps x 10^3 points: worst gap {worst_gap:.1e}, deviation ratio {worst_dev:.3}, solver disagreement {worst_agree:.1e}"
    ))
}

// 3 ------------------------------------------------------------------------

fn connected(w: &Array2<f64>) -> bool {
    let n = w.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let edge = if forward { w[[v, u]] } else { w[[u, v]] };
                if edge > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.iter().all(|s| *s)
    };
    reach(true) && reach(false)
}

fn network_contracts() -> Check {
    let mut sequences = 0;
    let mut matrices = 0;
    for n in [3usize, 10, 50] {
        let floor = 1.0 / n as f64;
        for rho in [0.0, 0.2, 1.0] {
            for seed in 0..100u64 {
                let seq = e(generate_graph_sequence(n, rho, 20, seed))?;
                for (k, w) in seq.all_weights().iter().enumerate() {
                    for i in 0..n {
                        let row: f64 = w.row(i).sum();
                        let col: f64 = w.column(i).sum();
                        ensure((row - 1.0).abs() <= 1e-12 && (col - 1.0).abs() <= 1e-12, || {
                            format!("n={n} rho={rho} seed={seed} round {k}: sums {row}, {col}")
                        })?;
                    }
                    ensure(w.iter().all(|v| *v == 0.0 || *v >= floor), || {
                        format!("n={n} rho={rho} seed={seed} round {k}: weight below 1/n")
                    })?;
                    ensure((0..n).all(|i| w[[i, i]] >= floor), || {
                        format!("n={n} rho={rho} seed={seed} round {k}: small self weight")
                    })?;
                    ensure(connected(w), || {
                        format!("n={n} rho={rho} seed={seed} round {k}: not strongly connected")
                    })?;
                    matrices += 1;
                }
                let report = check_assumption1(&seq, 1, floor);
                ensure(report.passed(), || format!("n={n} rho={rho} seed={seed}: {:?}", report.violation))?;
                sequences += 1;
            }
        }
    }
    Ok(format!("{sequences} sequences, {matrices} matrices"))
}

// 4 ------------------------------------------------------------------------

fn golden_round() -> Check {
    let geom = e(BregmanGeometry::scaled_euclidean(1.0, e(Domain::cube(1, 0.0, 5.0))?))?;
    let input = RoundInput {
        t: 2,
        agent: 0,
        steps: Stepsizes {
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.5,
        },
        geometry: &geom,
        regularizer: RegularizerSpec::ZERO,
        mapping: &DynamicMapping::Identity,
    };
    let revealed = |g: f64| Subgradients {
        cost_grad: array![2.0],
        reg_grad: array![0.0],
        constraint_jacobian: array![[1.0]],
        constraint_value: array![g],
    };
    let close = |a: &Array1<f64>, b: f64| (a[0] - b).abs() <= 1e-12;
    let s = e(agent_round(array![1.0].view(), &revealed(0.0), array![0.0].view(), &input))?;
    ensure(
        close(&s.direction, 2.0) && close(&s.x_mirror, 0.5) && close(&s.b, -0.5) && close(&s.q, 0.0) && close(&s.x, 0.5),
        || format!("slack example gave {s:?}"),
    )?;
    let s = e(agent_round(array![1.0].view(), &revealed(1.0), array![0.0].view(), &input))?;
    ensure(close(&s.b, 0.5) && close(&s.q, 0.25), || format!("active example gave {s:?}"))?;
    let s = e(agent_round(array![2.5].view(), &Subgradients::zero(1, 1), array![0.0].view(), &input))?;
    ensure(close(&s.x_mirror, 2.5) && close(&s.q, 0.0) && close(&s.x, 2.5), || format!("inert round gave {s:?}"))?;

    // 100 rounds of one agent against a scalar transcription of the updates
    let horizon = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (l1, l2, scale) = (0.3, 0.7, 1.5);
    let terms: Vec<Vec<QuadraticTerm>> = (0..horizon)
        .map(|_| {
            vec![QuadraticTerm {
                curvature: rng.random_range(0.5..3.0),
                center: array![rng.random_range(0.0..5.0)],
                linear: array![rng.random_range(-2.0..2.0)],
                constraint_matrix: array![[rng.random_range(-2.0..2.0)]],
                offset: array![rng.random_range(-1.0..3.0)],
            }]
        })
        .collect();
    let problem = e(QuadraticAffineProblem::new(
        vec![e(Domain::cube(1, 0.0, 5.0))?],
        1,
        vec![e(RegularizerSpec::new(l1, l2))?],
        terms.clone(),
    ))?;
    let graphs = e(CommGraphSequence::from_edges(1, vec![vec![]; horizon], 1))?;
    let geoms = euclidean(&problem, scale);
    let (c, kappa) = (0.6, 0.4);
    let schedule = StepsizeSchedule::General { c, kappa };
    let shrink = DynamicMapping::custom(|_, _, x| x.mapv(|v| 0.5 * v + 1.0));
    let mut worst = 0.0f64;
    for (mapping, phi) in [
        (&DynamicMapping::Identity, (|v: f64| v) as fn(f64) -> f64),
        (&shrink, |v: f64| 0.5 * v + 1.0),
    ] {
        let trace = e(run(&problem, &graphs, &schedule, mapping, &geoms, &RunOptions::default()))?;
        let (mut x, mut q) = (2.5f64, 0.0f64);
        for t in 1..=horizon {
            let tf = t as f64;
            let (alpha, beta, gamma) = (tf.powf(-c), tf.powf(-kappa), tf.powf(-(1.0 - kappa)));
            let (grad, jac, g, r1, r2) = if t == 1 {
                (0.0, 0.0, 0.0, 0.0, 0.0)
            } else {
                let term = &terms[t - 2][0];
                let grad = 2.0 * term.curvature * (x - term.center[0]) + term.linear[0];
                let d = term.constraint_matrix[[0, 0]];
                (grad, d, d * x - term.offset[0], l1, l2)
            };
            let qm = q;
            let a = grad + jac * qm;
            let v = 2.0 * scale * x - alpha * a;
            let shrunk = v.signum() * (v.abs() - alpha * r1).max(0.0);
            let xt = (shrunk / (2.0 * scale + 2.0 * alpha * r2)).clamp(0.0, 5.0);
            let b = jac * (xt - x) + g;
            q = (qm + gamma * (b - beta * qm)).max(0.0);
            x = phi(xt);
            let step = trace.step(t, 0);
            for (got, want) in [(step.x_mirror[0], xt), (step.q[0], q), (step.x[0], x)] {
                let d = (got - want).abs();
                worst = worst.max(d);
                ensure(d <= 1e-12, || format!("round {t}: engine {got} vs scalar {want}"))?;
            }
        }
    }
    Ok(format!("3 hand rounds exact, 2 x 100 scalar rounds within {worst:.1e}"))
}

// 5 ------------------------------------------------------------------------

fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(t, v)| ((*t as f64).ln(), v.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn sublinearity() -> Check {
    let config = load_config("phi-true-dynamics")?;
    ensure(config.instance.horizon == 2000, || "config horizon is not 2000".into())?;
    let r = e(execute(&config))?;
    let per = |v: &[f64], t: usize| v[t - 1] / t as f64;
    let (r200, r2000) = (per(&r.cumulative_regret, 200), per(&r.cumulative_regret, 2000));
    let (v200, v2000) = (per(&r.cumulative_violation, 200), per(&r.cumulative_violation, 2000));
    ensure(r2000 < r200, || format!("Reg/T {r200} at 200, {r2000} at 2000"))?;
    ensure(v2000 < v200, || format!("Viol/T {v200} at 200, {v2000} at 2000"))?;
    let reg: Vec<_> = r.metrics.iter().map(|m| (m.t, m.dynamic_regret)).collect();
    let vio: Vec<_> = r.metrics.iter().map(|m| (m.t, m.violation)).collect();
    let (sr, sv) = (loglog_slope(&reg), loglog_slope(&vio));
    ensure(sr < 0.95 && sv < 0.95, || format!("slopes {sr}, {sv}"))?;
    Ok(format!(
        "Reg/T {r200:.2} -> {r2000:.2}, Viol/T {v200:.4} -> {v2000:.4}, slopes {sr:.3} / {sv:.3}"
    ))
}

// 6 ------------------------------------------------------------------------

/// The general bounds written out from the primitive constants.
fn general_bounds(k: &TheoreticalConstants, c: f64, kappa: f64, t: f64, v: f64) -> (f64, f64) {
    let n = k.agents as f64;
    let shrink = 1.0 - k.weight_floor / (2.0 * n * n);
    let tau = shrink.powi(-2);
    let lambda = shrink.powf(1.0 / k.window as f64);
    let b1 = 2.0 * k.f + k.g * k.diameter;
    let c11 = 3.0 * n * n * tau * b1 * k.f / (1.0 - lambda) + n * b1 * b1 / 2.0;
    let c12 = 4.0 * n * k.g * k.g / k.sigma_min;
    let c1 = c11 / kappa + c12 / (1.0 - c) + 2.0 * n * k.diameter * k.k;
    let c21 = 2.0 * n * (2.0 * k.g * k.g / ((1.0 - c) * k.sigma_min) + 1.0 / (1.0 - kappa) + 2.0);
    let c2 = c21 * (2.0 * n * k.f + c1);
    let regret = c1 * t.powf((1.0 - c).max(c).max(kappa)) + 2.0 * k.k * t.powf(c) * v;
    let violation = (c2 * t.powf((2.0 - c).max(2.0 - kappa)) + k.k * c21 * t.powf(1f64.max(1.0 + c - kappa)) * v).sqrt();
    (regret, violation)
}

fn slater_violation_bound(k: &TheoreticalConstants, kappa: f64, eps: f64, t: f64) -> f64 {
    let n = k.agents as f64;
    let shrink = 1.0 - k.weight_floor / (2.0 * n * n);
    let lambda = shrink.powf(1.0 / k.window as f64);
    let b1 = 2.0 * k.f + k.g * k.diameter;
    let c11 = 3.0 * n * n * shrink.powi(-2) * b1 * k.f / (1.0 - lambda) + n * b1 * b1 / 2.0;
    let b3 = 2.0 * k.f + c11;
    let b2 = (2.0 * eps + 2.0 * (eps * eps + n * k.diameter * k.k).sqrt()).max(2.0 * b3 / eps);
    let m = k.constraints as f64;
    let c3 = n * (2.0 * b2 + b2 / (1.0 - kappa) + k.g * k.g * (b2 + 2.0) * m.sqrt() / (k.sigma_min * kappa));
    c3 * t.powf(kappa.max(1.0 - kappa))
}

/// Sampled values and gradients never exceed `F` and `G`.
fn audit_constants(inst: &TrackingInstance, k: &TheoreticalConstants, rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..10_000 {
        let i = rng.random_range(0..inst.agents());
        let t = rng.random_range(1..=inst.horizon());
        let x = sample_point(inst.domain(i), rng);
        let (f, grad) = e(inst.cost(i, t, x.view()))?;
        let reg = inst.regularizer(i, t);
        let (g, jac) = e(inst.constraint(i, t, x.view()))?;
        let r = reg.value(x.view());
        let rg = reg.subgradient(x.view());
        let values = [f.abs(), r, norm(&g)];
        let grads = [norm(&grad), norm(&rg), jac.iter().map(|v| v * v).sum::<f64>().sqrt()];
        ensure(values.iter().all(|v| *v <= k.f), || format!("value {values:?} above F = {}", k.f))?;
        ensure(grads.iter().all(|v| *v <= k.g), || format!("gradient {grads:?} above G = {}", k.g))?;
    }
    Ok(())
}

fn bound_domination() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tightest = 0.0f64;
    let mut runs = 0;
    for seed in 1..=5u64 {
        let tiny = TrackingParams {
            agents: 3,
            constraints: 2,
            dimension: 2,
            horizon: 500,
            seed,
            ..TrackingParams::default()
        };
        let slater = TrackingParams {
            slack: 0.5,
            dynamics: TargetDynamics::Frozen,
            ..tiny.clone()
        };
        for params in [tiny, slater] {
            let inst = e(generate_instance(&params))?;
            let graphs = e(generate_graph_sequence(3, 0.2, 500, seed))?;
            let geoms = euclidean(&inst, 10.0);
            let k = e(estimate_constants(&inst, &geoms, &graphs))?;
            audit_constants(&inst, &k, &mut rng)?;
            let comp = reference(&inst);
            let phi = e(DynamicMapping::true_dynamics(&inst))?;
            let mut cases: Vec<(StepsizeSchedule, &DynamicMapping)> = vec![
                (StepsizeSchedule::General { c: 0.5, kappa: 0.5 }, &phi),
                (StepsizeSchedule::General { c: 0.3, kappa: 0.7 }, &DynamicMapping::Identity),
            ];
            let eps = params.slack * params.agents as f64;
            if params.slack > 0.0 {
                // the reference point is strictly feasible by n * slack in every round
                for t in 1..=inst.horizon() {
                    let g = pdmd::problem::global_constraint(&inst, t, &comp.points[0]).unwrap();
                    ensure(g.iter().all(|v| *v <= -eps + 1e-9), || format!("round {t}: margin {g}"))?;
                }
                cases.push((StepsizeSchedule::Slater { kappa: 0.5 }, &DynamicMapping::Identity));
            }
            for (schedule, mapping) in cases {
                let trace = e(run(&inst, &graphs, &schedule, mapping, &geoms, &RunOptions {
                    dual_bound: Some(k.f),
                    ..RunOptions::default()
                }))?;
                let decisions: Vec<_> = (1..=500).map(|t| trace.decisions(t)).collect();
                let reg = e(regret(&inst, &decisions, &comp))?;
                let vio = e(constraint_violation(&inst, &decisions))?;
                let v = e(accumulated_variation(&comp, mapping))?;
                let lib = e(theoretical_bounds(&k, &schedule, &BoundInputs {
                    slater_margin: Some(eps),
                    ..BoundInputs::new(500, v)
                }))?;
                let (rb, vb) = match schedule {
                    StepsizeSchedule::General { c, kappa } => general_bounds(&k, c, kappa, 500.0, v),
                    StepsizeSchedule::Slater { kappa } => (
                        general_bounds(&k, 1.0 - kappa, kappa, 500.0, v).0,
                        slater_violation_bound(&k, kappa, eps, 500.0),
                    ),
                    _ => unreachable!(),
                };
                ensure((lib.regret - rb).abs() <= 1e-9 * rb && (lib.violation - vb).abs() <= 1e-9 * vb, || {
                    format!("library bounds {lib:?} differ from ({rb}, {vb})")
                })?;
                ensure(reg <= rb, || format!("seed {seed} {schedule:?}: regret {reg} above {rb}"))?;
                ensure(vio <= vb, || format!("seed {seed} {schedule:?}: violation {vio} above {vb}"))?;
                tightest = tightest.max(reg / rb).max(vio / vb);
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs, constants audited on 10^4 samples each, largest empirical/bound {tightest:.1e}"))
}

// 7, 8, 9 ------------------------------------------------------------------

fn seed_means(name: &str, horizon: usize, edit: impl Fn(&mut ExperimentConfig)) -> Result<(f64, f64), String> {
    let mut config = load_config(name)?;
    config.instance.horizon = horizon;
    config.sweep = None;
    edit(&mut config);
    let (mut reg, mut vio) = (0.0, 0.0);
    for seed in 1..=5 {
        config.instance.seed = seed;
        let last = e(execute(&config))?.summary.last;
        reg += last.dynamic_regret / horizon as f64 / 5.0;
        vio += last.violation / horizon as f64 / 5.0;
    }
    Ok((reg, vio))
}

fn phi_knowledge() -> Check {
    let (rt, vt) = seed_means("phi-true-dynamics", 1000, |_| {})?;
    let (ri, vi) = seed_means("phi-identity", 1000, |_| {})?;
    ensure(rt < ri, || format!("Reg/T {rt} with A, {ri} with identity"))?;
    ensure(vt < vi, || format!("Viol/T {vt} with A, {vi} with identity"))?;
    Ok(format!("Reg/T {rt:.3} vs {ri:.3}, Viol/T {vt:.4} vs {vi:.4}"))
}

fn regularization_placement() -> Check {
    let (re, ve) = seed_means("reg-explicit", 1000, |_| {})?;
    let (rf, vf) = seed_means("reg-folded", 1000, |_| {})?;
    ensure(re <= rf, || format!("Reg/T {re} explicit, {rf} folded"))?;
    Ok(format!("Reg/T {re:.3} explicit vs {rf:.3} folded (Viol/T {ve:.4} vs {vf:.4})"))
}

fn kappa_insensitivity() -> Check {
    let mut means = BTreeMap::new();
    for kappa in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let (r, _) = seed_means("kappa-sweep", 1000, |c| c.algorithm.kappa = kappa)?;
        means.insert((kappa * 10.0) as u32, r);
    }
    let vals: Vec<f64> = means.values().copied().collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let spread = vals.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)) - vals.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    ensure(spread <= 0.25 * mean, || format!("spread {spread} of mean {mean}: {vals:?}"))?;
    Ok(format!("Reg/T {vals:.2?}, spread {:.1}% of mean", 100.0 * spread / mean))
}

// 10 -----------------------------------------------------------------------

fn tiny_problem(seed: u64) -> QuadraticAffineProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = (0..4)
        .map(|_| {
            (0..2)
                .map(|_| QuadraticTerm {
                    curvature: rng.random_range(0.5..2.0),
                    center: array![rng.random_range(0.0..3.0)],
                    linear: array![rng.random_range(-1.0..1.0)],
                    constraint_matrix: array![[rng.random_range(1..=3) as f64]],
                    offset: array![rng.random_range(0.5..2.0)],
                })
                .collect()
        })
        .collect();
    QuadraticAffineProblem::new(
        vec![Domain::cube(1, 0.0, 2.0).unwrap(); 2],
        1,
        vec![RegularizerSpec::new(0.2, 0.1).unwrap(), RegularizerSpec::new(0.0, 0.3).unwrap()],
        terms,
    )
    .unwrap()
}

/// Best feasible point of `sum_{t in rounds} f_t` on the 10^-3 lattice of [0, 2]^2.
fn lattice_argmin(p: &QuadraticAffineProblem, rounds: &[usize]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for a in 0..=2000 {
        for b in 0..=2000 {
            let x = [a as f64 * 1e-3, b as f64 * 1e-3];
            let mut value = 0.0;
            let mut feasible = true;
            for &t in rounds {
                let mut g = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    let term = p.term(i, t);
                    let reg = p.regularizer(i, t);
                    value += term.curvature * (xi - term.center[0]).powi(2)
                        + term.linear[0] * xi
                        + reg.l1 * xi.abs()
                        + reg.l2 * xi * xi;
                    g += term.constraint_matrix[[0, 0]] * xi - term.offset[0];
                }
                feasible &= g <= 0.0;
            }
            if feasible && value < best.0 {
                best = (value, x[0], x[1]);
            }
        }
    }
    (best.1, best.2)
}

fn comparator_oracles() -> Check {
    let opts = OracleOptions {
        feasibility: 1e-9,
        ..OracleOptions::default()
    };
    let mut worst = 0.0f64;
    let mut active = 0;
    for seed in 0..3u64 {
        let p = tiny_problem(seed);
        let dist = |pts: &[Array1<f64>], (a, b): (f64, f64)| ((pts[0][0] - a).powi(2) + (pts[1][0] - b).powi(2)).sqrt();
        let mut dynamic = Vec::new();
        for t in 1..=4 {
            let opt = e(dynamic_optimum(&p, t, &opts)).map_err(|m| format!("seed {seed} round {t}: {m}"))?;
            let d = dist(&opt.points, lattice_argmin(&p, &[t]));
            worst = worst.max(d);
            ensure(d <= 2e-3, || format!("seed {seed} round {t}: dynamic optimum {d:e} from the lattice"))?;
            let g = e(pdmd::problem::global_constraint(&p, t, &opt.points))?;
            if g[0] > -1e-6 {
                active += 1;
            }
            dynamic.push(opt.points);
        }
        let stat = e(static_optimum(&p, 4, &opts)).map_err(|m| format!("seed {seed} static: {m}"))?;
        let d = dist(&stat.points, lattice_argmin(&p, &[1, 2, 3, 4]));
        worst = worst.max(d);
        ensure(d <= 2e-3, || format!("seed {seed}: static optimum {d:e} from the lattice"))?;

        // random feasible static points never do better
        let total = |x: &[Array1<f64>]| -> f64 {
            (1..=4).map(|t| pdmd::problem::global_objective(&p, t, x).unwrap()).sum()
        };
        let best = total(&stat.points);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut sampled = 0;
        while sampled < 1000 {
            let x = vec![array![rng.random_range(0.0..=2.0)], array![rng.random_range(0.0..=2.0)]];
            if (1..=4).all(|t| pdmd::problem::global_constraint(&p, t, &x).unwrap()[0] <= 0.0) {
                ensure(best <= total(&x) + 1e-9, || format!("seed {seed}: sampled point beats the static optimum"))?;
                sampled += 1;
            }
        }

        // static regret never exceeds dynamic regret
        let graphs = e(CommGraphSequence::from_edges(2, vec![vec![(0, 1), (1, 0)]; 4], 1))?;
        let trace = e(run(&p, &graphs, &StepsizeSchedule::General { c: 0.5, kappa: 0.5 }, &DynamicMapping::Identity, &euclidean(&p, 1.0), &RunOptions::default()))?;
        let decisions: Vec<_> = (1..=4).map(|t| trace.decisions(t)).collect();
        let rd = e(regret(&p, &decisions, &ComparatorSequence { kind: ComparatorKind::DynamicOptimal, points: dynamic }))?;
        let rs = e(regret(&p, &decisions, &ComparatorSequence::constant(ComparatorKind::StaticOptimal, stat.points, 4)))?;
        ensure(rs <= rd + 1e-9 * best.abs().max(1.0), || format!("seed {seed}: static regret {rs} above dynamic {rd}"))?;
    }
    let run = e(execute(&load_config("slater-static")?))?;
    for m in &run.metrics {
        let rs = m.static_regret.ok_or("static regret missing")?;
        let scale = run.comparator_objective[..m.t].iter().map(|v| v.abs()).sum::<f64>();
        ensure(rs <= m.dynamic_regret + 1e-12 * scale, || format!("t={}: static {rs} above dynamic {}", m.t, m.dynamic_regret))?;
    }
    Ok(format!(
        "3 tiny instances ({active} of 12 rounds constrained), worst lattice distance {worst:.1e}; ordering holds on {} checkpoints of a tracking run",
        run.metrics.len()
    ))
}

// 11 -----------------------------------------------------------------------

fn read_dir(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in e(std::fs::read_dir(dir))? {
        let path = e(entry)?.path();
        out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), e(std::fs::read(&path))?);
    }
    Ok(out)
}

fn determinism_and_replay() -> Check {
    let tmp = e(tempfile::tempdir())?;
    let mut config = load_config("phi-true-dynamics")?;
    config.instance.horizon = 500;
    config.output.dir = tmp.path().join("run");
    let first = e(run_experiment(&config))?;
    let before = read_dir(&config.output.dir)?;
    e(std::fs::remove_dir_all(&config.output.dir))?;
    e(run_experiment(&config))?;
    let after = read_dir(&config.output.dir)?;
    ensure(before.len() == 7, || format!("{} files written", before.len()))?;
    ensure(before == after, || "repeated run wrote different bytes".into())?;

    let report = e(replay(config.output.dir.join("rounds.csv"), &config))?;
    ensure(report.passed(), || format!("replay: {:?}", report.mismatch))?;

    let inst = e(load_trace(config.output.dir.join("instance.trace")))?;
    ensure(inst == first.simulation.instance, || "instance trace does not round-trip".into())?;
    ensure(trace_to_string(&inst).as_bytes() == before["instance.trace"].as_slice(), || "re-saved trace differs".into())?;
    let graphs = e(CommGraphSequence::from_text(&String::from_utf8_lossy(&before["graphs.txt"])))?;
    ensure(graphs == first.simulation.graphs, || "graph file does not round-trip".into())?;

    // every decision in rounds.csv parses back to the same bits
    let text = String::from_utf8_lossy(&before["rounds.csv"]).into_owned();
    let p = config.instance.dimension;
    for (row, line) in text.lines().skip(1).enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let (t, i) = (row / config.instance.agents + 1, row % config.instance.agents);
        let x = &first.simulation.trace.step(t, i).x;
        for j in 0..p {
            let v: f64 = e(fields[5 + j].parse())?;
            ensure(v.to_bits() == x[j].to_bits(), || format!("round {t} agent {i}: {v} vs {}", x[j]))?;
        }
    }
    Ok(format!("{} files byte-identical, replay of {} rows passed, traces round-trip", before.len(), report.rows_checked))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("dual boundedness", dual_boundedness),
        ("mirror-step contracts", mirror_step_contracts),
        ("network contracts", network_contracts),
        ("golden rounds", golden_round),
        ("sublinear regret and violation", sublinearity),
        ("empirical values below the bounds", bound_domination),
        ("knowing the dynamics helps", phi_knowledge),
        ("explicit regularization helps", regularization_placement),
        ("kappa barely matters at T=1000", kappa_insensitivity),
        ("comparator oracles", comparator_oracles),
        ("determinism and replay", determinism_and_replay),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(panic) => Err(panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
