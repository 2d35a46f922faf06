use ssma::evaluate::{run_experiment, Method, RunConfig, SyntheticSpec, DeformationSetting};
use std::time::Instant;

fn main() {
    // probe2 relies on lib presets; loop settings at full protocol
    for setting in [DeformationSetting::S, DeformationSetting::Sr, DeformationSetting::Srt] {
        let config = RunConfig {
            dataset_path: None,
            synthetic: Some(SyntheticSpec { setting, n_per_class: 667, classes: 3, noise_sd: 0.05, seed: 42 }),
            leading_domain: "spiral1".into(),
            leading_labeled_per_class: 20,
            budgets: vec![5, 10, 15, 20],
            unlabeled_per_domain: 300,
            methods: vec![Method::Ssma, Method::None],
            seeds: vec![1, 2, 3, 4, 5],
            test_fraction: 0.5,
            mu: 1.0,
            k: 9,
            standardize: true,
            dims: None,
        };
        let t = Instant::now();
        let rows = run_experiment(&config).unwrap();
        println!("== {setting:?} ({:.0}s) ==", t.elapsed().as_secs_f64());
        let mean = |method: Method, budget: usize, target: &str| -> f64 {
            let v: Vec<f64> = rows.iter()
                .filter(|r| r.method == method && r.budget == budget && r.target_domain == target)
                .map(|r| r.kappa).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        for &b in &[5usize, 10, 15, 20] {
            println!("  b={b:2}  ssma src={:.3} tgt={:.3} | none src={:.3} tgt={:.3}  margin tgt={:+.3}",
                mean(Method::Ssma, b, "spiral1"), mean(Method::Ssma, b, "spiral2"),
                mean(Method::None, b, "spiral1"), mean(Method::None, b, "spiral2"),
                mean(Method::Ssma, b, "spiral2") - mean(Method::None, b, "spiral2"));
        }
        let ssma_src: Vec<f64> = [5,10,15,20].iter().map(|&b| mean(Method::Ssma, b, "spiral1")).collect();
        let none_src: Vec<f64> = [5,10,15,20].iter().map(|&b| mean(Method::None, b, "spiral1")).collect();
        let range = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("  ssma src range = {:.3}, none src range = {:.3}", range(&ssma_src), range(&none_src));
    }
}
