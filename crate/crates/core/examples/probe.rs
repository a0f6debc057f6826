use bubblewalk_core::analysis::*;
use bubblewalk_core::scaling::ScalingRule;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "bound" => {
            let rule = ScalingRule::canonical();
            let n_list: Vec<u64> = vec![1_000, 10_000, 100_000, 1_000_000, 10_000_000];
            let grid = default_m_grid(10_000_000);
            for k in [2.0f64, 3.0, 4.0, 5.0, 6.0] {
                let c = CountingConstants::from_k(k);
                let t = bound_pipeline(&rule, &n_list, &grid, &c).unwrap();
                let doubled = CountingConstants { k, c_path: 2.0 * c.c_path, c_deep: 2.0 * c.c_deep };
                let t2 = bound_pipeline(&rule, &n_list, &grid, &doubled).unwrap();
                let ms: Vec<u32> = t.rows.iter().map(|r| r.m_opt).collect();
                println!("K={k}: exp {:.4} (doubled c: {:.4}, diff {:.5}) m_scal {:.4} m_opts {:?}",
                    t.fitted_exponent, t2.fitted_exponent,
                    (t.fitted_exponent - t2.fitted_exponent).abs(), t.m_scaling_exponent, ms);
            }
        }
        "green" => {
            for (name, rule, n, reps) in [
                ("canonical", ScalingRule::canonical(), 1_000_000u64, 200u64),
                ("constant3", ScalingRule::constant(3).unwrap(), 1_000_000, 200),
                ("geometric4", ScalingRule::geometric(4.0).unwrap(), 1_000_000, 200),
                ("geometric8", ScalingRule::geometric(8.0).unwrap(), 1_000_000, 200),
            ] {
                let est = green_function_estimate(&rule, n, reps, 42).unwrap();
                let g: Vec<f64> = est.points.iter().map(|p| p.1).collect();
                println!("{name}: G_n/4={:.3} G_n/2={:.3} G_n={:.3}  (G_n-G_n/2)/G_n/2={:.4} G_n/G_n/2={:.4}",
                    g[0], g[1], g[2], (g[2]-g[1])/g[1], g[2]/g[1]);
            }
        }
        _ => eprintln!("usage: probe bound|green"),
    }
}
