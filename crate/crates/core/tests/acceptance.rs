//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line
//! straight to stdout (bypassing the test harness capture) before asserting.
//!
//! The learning smoke test is `#[ignore]`d because it trains for hours:
//! `cargo test --release -p gatepilot --test acceptance -- --ignored`.

use std::f64::consts::PI;
use std::io::Write;

use gatepilot::gateworld::{
    classify, dense_reward, final_reward, EnvConfig, EpisodeOutcome, GateEnv, SpawnConfig, WorldSpec,
};
use gatepilot::lagsim::{AxisLag, VehicleState};
use gatepilot::netcore::{init_actor, init_critic, Activation, ForwardCache, Mlp};
use gatepilot::pilot::commands::train;
use gatepilot::pilot::{evaluate, ActorPolicy, RunConfig};
use gatepilot::td3core::{
    actor_gradient, concat_state_action, critic_gradient, Batch, OuProcess, TargetEvent, Td3Config, TrainObserver,
    Trainer, UpdateEvent,
};
use gatepilot::{seeded_rng, Rng};
use rand::Rng as _;

fn report(id: &str, pass: bool, detail: String) {
    let line = format!("{id} {}: {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stdout(), "{line}");
    assert!(pass, "{line}");
}

#[test]
fn a1_lag_model_fidelity() {
    let (tau, ts) = (0.4, 0.02);
    let lag = AxisLag::new(tau, ts).unwrap();
    let mut v = vec![0.0];
    for _ in 0..2000 {
        let prev = *v.last().unwrap();
        v.push(lag.step(prev, 1.0, 1.0));
    }
    let exact = |k: usize| 1.0 - (-(k as f64) * ts / tau).exp();
    let v20 = v[20];
    let vf = v[2000];
    let max_dev = (0..=100).map(|k| (v[k] - exact(k)).abs()).fold(0.0, f64::max);
    report(
        "A1",
        (v20 - 0.632).abs() <= 0.01 && (vf - 1.0).abs() <= 1e-6 && max_dev < 1e-3,
        format!("v[20] = {v20:.6} (0.632 +/- 0.01), v[2000] = {vf:.9} (1 +/- 1e-6), max dev over 5 tau = {max_dev:.2e} (< 1e-3)"),
    );
}

/// Straight-line transcription of the reward algorithm. The drone
/// is "in the gate" for the two gate outcomes and the success region for
/// `Success`; ground and boundary use the simulation box directly.
fn reward_oracle(x: f64, y: f64, z: f64, yaw: f64, vx: f64, outcome: EpisodeOutcome) -> f64 {
    let mut r = 3e-4 * (PI / 4.0 - yaw.abs());
    if x < 0.0 && vx > 0.0 {
        r += 4e-2 * (1.0 - (x * x + y * y + z * z) / 15.0);
    } else if x > 0.0 {
        r -= 5e-2;
    } else {
        r -= 1e-2;
    }
    let gate_contains = matches!(outcome, EpisodeOutcome::Success | EpisodeOutcome::GateCrash);
    let success_region = outcome == EpisodeOutcome::Success;
    if gate_contains {
        if success_region {
            r += 100.0;
            r += 200.0 * 100f64.powf(-(y * y + z * z));
            if yaw.abs() < PI / 6.0 {
                r += 100.0 * (1.0 - 3.0 * yaw.abs() / PI);
            }
        } else {
            r -= 20.0;
        }
    }
    if z < -1.5 {
        r -= 20.0;
    }
    let inside = (-10.0..=2.0).contains(&x) && (-3.0..=3.0).contains(&y) && (-1.5..=2.5).contains(&z);
    if !inside {
        r -= 5.0;
    }
    r
}

#[test]
fn a2_reward_oracle_equivalence() {
    let cfg = EnvConfig::default();
    let mut rng = seeded_rng(2);
    let mut worst = 0.0f64;
    let mut seen = [0usize; 6];
    for k in 0..100_000 {
        let mut s = VehicleState::at_rest(
            [
                rng.gen_range(-11.0..3.0),
                rng.gen_range(-3.5..3.5),
                rng.gen_range(-2.0..3.0),
            ],
            rng.gen_range(-PI..PI),
        );
        s.vel = [
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-1.0..1.0),
        ];
        if k % 4 == 0 {
            s.pos[0] = rng.gen_range(-0.5..0.5);
            s.pos[1] = rng.gen_range(-1.0..1.0);
            s.pos[2] = rng.gen_range(-0.7..0.7);
        }
        let outcome = if k % 2 == 0 {
            classify(&s, &cfg.world, &cfg.gate, &cfg.drone, rng.gen_range(0..2500))
        } else {
            EpisodeOutcome::ALL[rng.gen_range(0..6)]
        };
        seen[outcome as usize] += 1;
        let lib = dense_reward(&s) + final_reward(outcome, &s, &cfg.world);
        let oracle = reward_oracle(s.pos[0], s.pos[1], s.pos[2], s.yaw, s.vel[0], outcome);
        worst = worst.max((lib - oracle).abs());
    }
    report(
        "A2",
        worst <= 1e-12 && seen.iter().all(|&c| c > 0),
        format!("max |library - transcription| over 1e5 samples = {worst:.2e} (<= 1e-12), outcome counts {seen:?}"),
    );
}

/// Dense-reward sum for the centered full-throttle pass from a continuous
/// model: `x(t) = x0 + v (t - tau (1 - exp(-t / tau)))`, summed at the sample
/// instants until the drone first overlaps the gate slab.
fn perfect_pass_oracle(world: &WorldSpec) -> (f64, usize) {
    let (tau, ts, x0, v) = (0.4, 0.02, -4.0, world.vel_limits[0]);
    let slab = 0.075 + 0.3;
    let mut total = 0.0;
    let mut k = 0;
    loop {
        k += 1;
        // the discrete lag starts from a zero previous command, half a sample behind
        let t = (k as f64 - 0.5) * ts;
        let x = x0 + v * (t - tau * (1.0 - (-t / tau).exp()));
        total += 3e-4 * PI / 4.0 + 0.04 * (1.0 - x * x / 15.0);
        if x.abs() <= slab {
            return (total + 400.0, k);
        }
    }
}

#[test]
fn a3_perfect_pass_score() {
    let mut cfg = EnvConfig::default();
    cfg.spawn = SpawnConfig::fixed([-4.0, 0.0, 0.0], 0.0);
    let mut env = GateEnv::new(cfg, 0).unwrap();
    env.reset();
    let mut ret = 0.0;
    let outcome = loop {
        let r = env.step([1.0, 0.0, 0.0, 0.0]).unwrap();
        ret += r.reward;
        if r.outcome.is_done() {
            break r.outcome;
        }
    };
    let bonus = final_reward(outcome, env.state(), &cfg.world);
    let (oracle, oracle_steps) = perfect_pass_oracle(&cfg.world);
    report(
        "A3",
        outcome == EpisodeOutcome::Success
            && bonus == 400.0
            && (395.0..=405.0).contains(&ret)
            && (ret - oracle).abs() < 0.1,
        format!(
            "{outcome} after {} steps, final bonus {bonus}, return {ret:.4} in [395, 405], continuous oracle {oracle:.4} ({oracle_steps} steps)",
            env.steps()
        ),
    );
}

fn rel_error(analytic: f64, fd: f64) -> f64 {
    let scale = analytic.abs().max(fd.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - fd).abs() / scale
    }
}

/// Indices to probe: every bias of the last layer plus a random sample.
fn probe_indices(net: &Mlp, n: usize, rng: &mut Rng) -> Vec<usize> {
    let total = net.param_count();
    let last = net.layers().last().unwrap();
    let mut idx: Vec<usize> = (total - last.outputs()..total).collect();
    idx.extend((0..n).map(|_| rng.gen_range(0..total)));
    idx
}

/// Scalar objective of one network's parameters, with the on/off pattern of
/// every ReLU it passed through.
type Objective<'a> = dyn Fn(&Mlp) -> (f64, Vec<bool>) + 'a;

fn relu_mask(net: &Mlp, cache: &ForwardCache, mask: &mut Vec<bool>) {
    for (i, layer) in net.layers().iter().enumerate() {
        if layer.activation() == Activation::Relu {
            mask.extend(cache.activation(i + 1).iter().map(|v| *v > 0.0));
        }
    }
}

/// Central difference at step `h`, or `None` when a ReLU switches inside the
/// stencil.
fn central(net: &mut Mlp, i: usize, h: f64, f: &Objective<'_>) -> Option<f64> {
    let p = net.param(i);
    net.set_param(i, p + h);
    let (up, mask_up) = f(net);
    net.set_param(i, p - h);
    let (down, mask_down) = f(net);
    net.set_param(i, p);
    (mask_up == mask_down).then(|| (up - down) / (2.0 * h))
}

/// Richardson-extrapolated central difference. The step is sized so that the
/// objective moves far above its round-off level, and shrunk whenever the
/// stencil straddles a ReLU switch.
fn fd_derivative(net: &mut Mlp, i: usize, magnitude: f64, f: &Objective<'_>) -> Option<f64> {
    let f0 = f(net).0.abs().max(1e-3);
    let mut h = (1e-8 * f0 / magnitude.max(1e-300)).clamp(1e-6, 0.5);
    for _ in 0..30 {
        if let (Some(d1), Some(d2)) = (central(net, i, h, f), central(net, i, h / 2.0, f)) {
            return Some((4.0 * d2 - d1) / 3.0);
        }
        h /= 4.0;
    }
    None
}

/// Worst relative error over `idx`, and how many probes found no
/// switch-free stencil.
fn fd_check(net: &mut Mlp, analytic: &[f64], idx: &[usize], f: &Objective<'_>) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut unresolved = 0;
    for &i in idx {
        match fd_derivative(net, i, analytic[i].abs(), f) {
            Some(fd) => worst = worst.max(rel_error(analytic[i], fd)),
            None => unresolved += 1,
        }
    }
    (worst, unresolved)
}

fn random_batch(n: usize, rng: &mut Rng) -> Batch {
    let mut v = |len: usize, lo: f64, hi: f64| (0..len).map(|_| rng.gen_range(lo..hi)).collect::<Vec<_>>();
    Batch {
        len: n,
        states: v(n * 8, -2.0, 2.0),
        actions: v(n * 4, -1.0, 1.0),
        rewards: v(n, -1.0, 1.0),
        next_states: v(n * 8, -2.0, 2.0),
        dones: vec![0.0; n],
    }
}

#[test]
fn a4_gradient_correctness() {
    let mut rng = seeded_rng(4);
    let mut actor = init_actor(&mut rng);
    let mut critic = init_critic(&mut rng);
    let n = 8;
    let batch = random_batch(n, &mut rng);
    let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let probes = 1500;

    let w: Vec<f64> = (0..n * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let weighted = |net: &Mlp| {
        let cache = net.forward(&batch.states, n).unwrap();
        let mut mask = Vec::new();
        relu_mask(net, &cache, &mut mask);
        (cache.output().iter().zip(&w).map(|(o, w)| o * w).sum(), mask)
    };
    let cache = actor.forward(&batch.states, n).unwrap();
    let (g_actor, g_input) = actor.backward(&cache, &w).unwrap();
    let idx = probe_indices(&actor, probes, &mut rng);
    let (e_actor, u_actor) = fd_check(&mut actor, &g_actor.flat(), &idx, &weighted);

    let h = 1e-6;
    let mut e_input = 0.0f64;
    for i in 0..n * 8 {
        let mut s = batch.states.clone();
        s[i] += h;
        let up: f64 = actor.predict(&s, n).unwrap().iter().zip(&w).map(|(o, w)| o * w).sum();
        s[i] -= 2.0 * h;
        let down: f64 = actor.predict(&s, n).unwrap().iter().zip(&w).map(|(o, w)| o * w).sum();
        e_input = e_input.max(rel_error(g_input[i], (up - down) / (2.0 * h)));
    }

    let (g_critic, _) = critic_gradient(&batch, &targets, &critic).unwrap();
    let idx = probe_indices(&critic, probes, &mut rng);
    let loss = |c: &Mlp| {
        let cache = c
            .forward(&concat_state_action(&batch.states, &batch.actions, n), n)
            .unwrap();
        let mut mask = Vec::new();
        relu_mask(c, &cache, &mut mask);
        let l = cache
            .output()
            .iter()
            .zip(&targets)
            .map(|(q, y)| (q - y).powi(2))
            .sum::<f64>()
            / n as f64;
        (l, mask)
    };
    let (e_critic, u_critic) = fd_check(&mut critic, &g_critic.flat(), &idx, &loss);

    let (g_composed, _) = actor_gradient(&batch, &actor, &critic).unwrap();
    let idx = probe_indices(&actor, probes, &mut rng);
    let neg_objective = |a: &Mlp| {
        let ac = a.forward(&batch.states, n).unwrap();
        let cc = critic
            .forward(&concat_state_action(&batch.states, ac.output(), n), n)
            .unwrap();
        let mut mask = Vec::new();
        relu_mask(a, &ac, &mut mask);
        relu_mask(&critic, &cc, &mut mask);
        (-cc.output().iter().sum::<f64>() / n as f64, mask)
    };
    let (e_composed, u_composed) = fd_check(&mut actor, &g_composed.flat(), &idx, &neg_objective);

    let worst = e_actor.max(e_input).max(e_critic).max(e_composed);
    let unresolved = u_actor + u_critic + u_composed;
    report(
        "A4",
        worst < 1e-5 && unresolved == 0,
        format!(
            "max relative error: actor {e_actor:.2e}, actor input {e_input:.2e}, critic loss {e_critic:.2e}, \
             actor through critic {e_composed:.2e} (< 1e-5), {} probes per network, {unresolved} unresolved",
            probes + 4
        ),
    );
}

/// Replays the target blend offline and checks every target bound.
struct Instrument {
    rho: f64,
    offline: [Vec<f64>; 3],
    update_steps: Vec<u64>,
    actor_updates: Vec<u64>,
    last_target_update: u64,
    blend_mismatches: usize,
    frozen_violations: usize,
    bound_checks: usize,
    bound_violations: usize,
}

impl TrainObserver for Instrument {
    fn on_targets(&mut self, e: &TargetEvent<'_>) {
        self.last_target_update = e.update;
        let b = e.batch;
        let input = concat_state_action(&b.next_states, e.target_actions, b.len);
        for critic in [&e.nets.target_critic1, &e.nets.target_critic2] {
            let q = critic.predict(&input, b.len).unwrap();
            for i in 0..b.len {
                self.bound_checks += 1;
                if e.targets[i] > b.rewards[i] + e.gamma * (1.0 - b.dones[i]) * q[i] {
                    self.bound_violations += 1;
                }
            }
        }
    }

    fn on_update(&mut self, e: &UpdateEvent<'_>) {
        assert_eq!(e.update, self.last_target_update);
        self.update_steps.push(e.env_step);
        let pairs = [
            (&e.nets.target_critic1, &e.nets.critic1),
            (&e.nets.target_critic2, &e.nets.critic2),
            (&e.nets.target_actor, &e.nets.actor),
        ];
        if e.actor_objective.is_some() {
            self.actor_updates.push(e.update);
        }
        for (k, (target, main)) in pairs.into_iter().enumerate() {
            let t = target.flat_params();
            if e.actor_objective.is_some() {
                let m = main.flat_params();
                for (o, m) in self.offline[k].iter_mut().zip(&m) {
                    *o = self.rho * *o + (1.0 - self.rho) * m;
                }
                self.blend_mismatches += t
                    .iter()
                    .zip(&self.offline[k])
                    .filter(|(a, b)| a.to_bits() != b.to_bits())
                    .count();
            } else {
                self.frozen_violations += t
                    .iter()
                    .zip(&self.offline[k])
                    .filter(|(a, b)| a.to_bits() != b.to_bits())
                    .count();
            }
        }
    }
}

#[test]
fn a5_td3_mechanics() {
    let cfg = Td3Config::default();
    let mut trainer = Trainer::new(cfg, 5).unwrap();
    let n = &trainer.nets;
    let init_equal = n.target_actor.flat_params() == n.actor.flat_params()
        && n.target_critic1.flat_params() == n.critic1.flat_params()
        && n.target_critic2.flat_params() == n.critic2.flat_params();
    let mut obs = Instrument {
        rho: cfg.polyak,
        offline: [
            n.target_critic1.flat_params(),
            n.target_critic2.flat_params(),
            n.target_actor.flat_params(),
        ],
        update_steps: Vec::new(),
        actor_updates: Vec::new(),
        last_target_update: 0,
        blend_mismatches: 0,
        frozen_violations: 0,
        bound_checks: 0,
        bound_violations: 0,
    };
    let mut env = GateEnv::new(EnvConfig::default(), 55).unwrap();
    trainer.run(&mut env, 10_000, &mut obs).unwrap();

    let first = cfg.update_threshold() as u64;
    let expected_steps: Vec<u64> = (first..=10_000).collect();
    let cadence_ok = obs.update_steps == expected_steps;
    let expected_actor: Vec<u64> = (1..=obs.update_steps.len() as u64).filter(|j| j % 2 == 0).collect();
    let actor_ok = obs.actor_updates == expected_actor;
    report(
        "A5",
        init_equal
            && cadence_ok
            && actor_ok
            && obs.blend_mismatches == 0
            && obs.frozen_violations == 0
            && obs.bound_violations == 0,
        format!(
            "{} critic updates on env steps {first}..=10000 (one per step: {cadence_ok}), {} actor updates on even updates only: {actor_ok}, \
             target blend mismatches {}, targets moved between actor updates {}, target bound violations {}/{}",
            obs.update_steps.len(),
            obs.actor_updates.len(),
            obs.blend_mismatches,
            obs.frozen_violations,
            obs.bound_violations,
            obs.bound_checks
        ),
    );
}

#[test]
fn a6_ou_statistics() {
    let (theta, sigma) = (0.2, 0.15);
    let oracle = (sigma * sigma / (1.0 - (1.0 - theta) * (1.0f64 - theta))).sqrt();
    let mut ou = OuProcess::new(theta, sigma).unwrap();
    let mut rng = seeded_rng(6);
    for _ in 0..1000 {
        ou.sample(&mut rng);
    }
    let steps = 1_000_000;
    let mut sum = [0.0; 4];
    let mut sq = [0.0; 4];
    for _ in 0..steps {
        let x = ou.sample(&mut rng);
        for i in 0..4 {
            sum[i] += x[i];
            sq[i] += x[i] * x[i];
        }
    }
    let stds: Vec<f64> = (0..4)
        .map(|i| {
            let m = sum[i] / steps as f64;
            (sq[i] / steps as f64 - m * m).sqrt()
        })
        .collect();
    let worst = stds.iter().map(|s| (s - oracle).abs() / oracle).fold(0.0, f64::max);
    report(
        "A6",
        (oracle - 0.25).abs() < 1e-12 && worst <= 0.05,
        format!(
            "per-axis std {stds:.4?} vs stationary {oracle:.4}, worst relative deviation {:.2}% (<= 5%)",
            worst * 100.0
        ),
    );
}

#[test]
#[ignore = "trains three seeds for 300k steps each"]
fn a7_learning_smoke_test() {
    let steps = 300_000;
    let episodes = 50;
    let env_cfg = EnvConfig::default();
    let results: Vec<(u64, f64, f64, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = [1u64, 2, 3]
            .into_iter()
            .map(|seed| {
                s.spawn(move || {
                    let mut trainer = Trainer::new(Td3Config::default(), seed).unwrap();
                    let eval_seed = 10_000 + seed;
                    let untrained = evaluate(
                        &env_cfg,
                        &mut ActorPolicy::new(trainer.nets.actor.clone()),
                        episodes,
                        eval_seed,
                    )
                    .unwrap();
                    let mut env = GateEnv::new(env_cfg, gatepilot::derive_seed(seed, 2)).unwrap();
                    for chunk in 0..steps / 50_000 {
                        trainer
                            .run(&mut env, 50_000, &mut gatepilot::td3core::NoObserver)
                            .unwrap();
                        let _ = writeln!(
                            std::io::stdout(),
                            "A7 seed {seed}: {} steps, {} episodes",
                            (chunk + 1) * 50_000,
                            trainer.episodes()
                        );
                    }
                    let trained = evaluate(
                        &env_cfg,
                        &mut ActorPolicy::new(trainer.nets.actor.clone()),
                        episodes,
                        eval_seed,
                    )
                    .unwrap();
                    let _ = writeln!(
                        std::io::stdout(),
                        "A7 seed {seed}: success {:.2}, mean return {:.3} (untrained {:.3}), outcomes {:?}",
                        trained.success_rate,
                        trained.mean_return,
                        untrained.mean_return,
                        trained.dominant_outcome()
                    );
                    (seed, trained.success_rate, trained.mean_return, untrained.mean_return)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let best = results
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)))
        .unwrap();
    report(
        "A7",
        best.1 >= 0.6 && best.2 > best.3,
        format!(
            "best seed {}: success rate {:.2} over {episodes} episodes (>= 0.6), mean return {:.3} vs untrained {:.3}",
            best.0, best.1, best.2, best.3
        ),
    );
}

#[test]
fn a8_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.seed = 8;
    cfg.total_steps = 10_000;
    let a = train(&cfg, &dir.path().join("a")).unwrap();
    let b = train(&cfg, &dir.path().join("b")).unwrap();
    let read = |p: std::path::PathBuf| std::fs::read(p).unwrap();
    let metrics_a = read(a.run_dir.join("metrics.csv"));
    let metrics_b = read(b.run_dir.join("metrics.csv"));
    let ck_a = read(a.final_checkpoint.clone());
    let ck_b = read(b.final_checkpoint.clone());
    let rows = String::from_utf8_lossy(&metrics_a).lines().count() - 1;
    report(
        "A8",
        metrics_a == metrics_b && ck_a == ck_b && rows >= 1,
        format!(
            "metrics identical: {} ({rows} episodes, {} bytes), final checkpoints identical: {} ({} bytes)",
            metrics_a == metrics_b,
            metrics_a.len(),
            ck_a == ck_b,
            ck_a.len()
        ),
    );
}
