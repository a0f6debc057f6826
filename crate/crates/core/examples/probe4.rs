use bubblewalk_core::orbit::*;
use bubblewalk_core::scaling::ScalingRule;
use std::time::Instant;

fn main() {
    let rule = ScalingRule::canonical();
    let m = 5u32;
    for (n, reps) in [(500usize, 30_000u64), (1000, 200), (2000, 200)] {
        let t0 = Instant::now();
        let cfg = CondConfig::new(n, m, reps, 2024);
        let (report, samples) = conditioned_orbit_stats(&rule, &cfg).unwrap();
        println!(
            "n={n} mode={:?} accepted={} K={:.3} radius/m={:.3} disp/m={:.3} logP={:.2} full_ok={} [{:.1}s]",
            report.mode, report.accepted, report.empirical_k, report.max_orbit_radius_over_m,
            report.max_displacement_over_m, report.log_acceptance_prob, report.full_set_check,
            t0.elapsed().as_secs_f64()
        );
        let max_subword: i64 = samples.iter().map(|s| s.orbit_radius).max().unwrap();
        println!("   max radius {max_subword}, mean distinct {:.1}",
            samples.iter().map(|s| s.distinct_count as f64).sum::<f64>() / samples.len() as f64);
    }
}
