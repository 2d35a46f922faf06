// Diagnose dims selection and per-seed variance under the S setting.
use ssma::evaluate::{run_experiment, Method, RunConfig, SyntheticSpec, DeformationSetting};

fn main() {
    let mut config = RunConfig {
        dataset_path: None,
        synthetic: Some(SyntheticSpec { setting: DeformationSetting::S, n_per_class: 667, classes: 3, noise_sd: 0.05, seed: 42 }),
        leading_domain: "spiral1".into(),
        leading_labeled_per_class: 20,
        budgets: vec![5, 10, 15, 20],
        unlabeled_per_domain: 300,
        methods: vec![Method::Ssma],
        seeds: vec![1, 2, 3, 4, 5],
        test_fraction: 0.5,
        mu: 1.0,
        k: 9,
        standardize: true,
        dims: None,
    };
    for fixed in [None, Some(2), Some(3)] {
        config.dims = fixed;
        let rows = run_experiment(&config).unwrap();
        println!("== dims = {fixed:?} ==");
        for &b in &[5usize, 10, 15, 20] {
            let src: Vec<(u64, f64, usize)> = rows.iter()
                .filter(|r| r.budget == b && r.target_domain == "spiral1")
                .map(|r| (r.seed, r.kappa, r.dims)).collect();
            let mean = src.iter().map(|x| x.1).sum::<f64>() / src.len() as f64;
            let per: Vec<String> = src.iter().map(|(s, k, d)| format!("s{s}:k={k:.2}/r={d}")).collect();
            println!("  b={b:2} src mean={mean:.3}  [{}]", per.join(" "));
        }
        let means: Vec<f64> = [5usize,10,15,20].iter().map(|&b| {
            let v: Vec<f64> = rows.iter().filter(|r| r.budget == b && r.target_domain == "spiral1").map(|r| r.kappa).collect();
            v.iter().sum::<f64>() / v.len() as f64
        }).collect();
        let range = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - means.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("  src range over budgets = {range:.3}");
        let tgt_means: Vec<f64> = [5usize,10,15,20].iter().map(|&b| {
            let v: Vec<f64> = rows.iter().filter(|r| r.budget == b && r.target_domain == "spiral2").map(|r| r.kappa).collect();
            v.iter().sum::<f64>() / v.len() as f64
        }).collect();
        println!("  tgt means = {tgt_means:.3?}");
    }
}
