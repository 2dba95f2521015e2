//! Backpropagated gradients of a freshly initialized actor and critic against
//! central finite differences on a sample of parameters.

use gatepilot::netcore::{init_actor, init_critic, Mlp};
use gatepilot::seeded_rng;
use rand::Rng;

/// Scalar loss `sum(output * weights)` so every output contributes.
fn loss(net: &Mlp, input: &[f64], batch: usize, w: &[f64]) -> f64 {
    let out = net.predict(input, batch).unwrap();
    out.iter().zip(w).map(|(o, w)| o * w).sum()
}

fn check(name: &str, mut net: Mlp, rng: &mut gatepilot::Rng) {
    let batch = 4;
    let input: Vec<f64> = (0..batch * net.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..batch * net.output_dim())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let cache = net.forward(&input, batch).unwrap();
    let (grads, _) = net.backward(&cache, &w).unwrap();
    let analytic = grads.flat();

    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let i = rng.gen_range(0..net.param_count());
        let p = net.param(i);
        net.set_param(i, p + h);
        let up = loss(&net, &input, batch, &w);
        net.set_param(i, p - h);
        let down = loss(&net, &input, batch, &w);
        net.set_param(i, p);
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-8);
        worst = worst.max(rel);
    }
    println!(
        "{name}: {} parameters, worst relative error over 200 samples {worst:.2e}",
        net.param_count()
    );
}

fn main() {
    let mut rng = seeded_rng(11);
    let actor = init_actor(&mut rng);
    let critic = init_critic(&mut rng);
    check("actor", actor, &mut rng);
    check("critic", critic, &mut rng);
}
