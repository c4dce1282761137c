use alpha_sqg::ansatz::{construct_experiment_flow, v_theta_radial};

fn main() {
    let flow = construct_experiment_flow([1.0, 0.0, 1.0]).unwrap();
    println!("coefficients {:?}", flow.coefficients);
    println!("shaping      {:?}", flow.shaping);
    println!("measured     {:?}", flow.measured);
    println!("slope_excess {:?}", flow.slope_excess);
    let g = &flow.profile;
    let mut max_abs = 0.0f64;
    let mut argmax = 0.0;
    for i in 0..4096 {
        let r = 16.0 * (i as f64) / 4096.0;
        let v = g.eval(r).abs();
        if v > max_abs {
            max_abs = v;
            argmax = r;
        }
    }
    println!("max |g| = {max_abs:.4e} at r = {argmax}");
    for r in [0.5, 0.8, 1.0, 1.2, 2.0, 4.0] {
        println!(
            "r={r}: g={:.4e}  v_theta/r={:.4e}",
            g.eval(r),
            v_theta_radial(g, r).unwrap() / r
        );
    }
}
