//! Step response of the discrete velocity lag against the continuous
//! first-order response, for the horizontal and vertical time constants.

use gatepilot::lagsim::{AxisLag, DEFAULT_TS};

fn main() -> gatepilot::error::Result<()> {
    for tau in [0.4, 0.1] {
        let lag = AxisLag::new(tau, DEFAULT_TS)?;
        println!(
            "tau {tau} s: a = {:.7}, b = {:.7}, dc gain = {}",
            lag.a(),
            lag.b(),
            lag.dc_gain()
        );
        println!("{:>6} {:>10} {:>10} {:>10}", "t", "discrete", "continuous", "error");
        let mut v = 0.0;
        for k in 1..=(5.0 * tau / DEFAULT_TS) as usize {
            v = lag.step(v, 1.0, 1.0);
            let t = k as f64 * DEFAULT_TS;
            if k % 5 == 0 {
                let exact = 1.0 - (-t / tau).exp();
                println!("{t:>6.2} {v:>10.6} {exact:>10.6} {:>10.2e}", v - exact);
            }
        }
        println!();
    }
    Ok(())
}
