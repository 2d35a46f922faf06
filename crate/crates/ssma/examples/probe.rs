use ndarray::Array2;
use ssma::alignment::{fit, select_dims, AlignmentParams};
use ssma::dataset::{split_train_test, subsample_labeled, MultiDomainDataset};
use ssma::evaluate::{
    cohen_kappa, train_linear, ConfusionMatrix, Predictor, DEFAULT_C_GRID,
};
use ssma::synth::{make_spiral_pair_with, Deformation, SpiralParams};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

fn pooled_labeled(ds: &MultiDomainDataset) -> Vec<(usize, Array2<f64>, Vec<u32>)> {
    ds.domains()
        .iter()
        .enumerate()
        .map(|(m, dom)| {
            let idx: Vec<usize> = (0..dom.len()).filter(|&j| dom.labels()[j].is_some()).collect();
            let mut f = Array2::<f64>::zeros((dom.dim(), idx.len()));
            let mut y = Vec::new();
            for (o, &j) in idx.iter().enumerate() {
                f.column_mut(o).assign(&dom.features().column(j));
                y.push(dom.labels()[j].unwrap());
            }
            (m, f, y)
        })
        .collect()
}

fn main() {
    let deforms = [
        ("S  ", Deformation::new(2.5, 0.0, [0.0, 0.0])),
        ("SR ", Deformation::new(2.0, 90.0, [0.0, 0.0])),
    ];
    for turns in [1.5f64, 1.75, 2.0, 2.25] {
        let params = SpiralParams {
            radius_base: 0.5,
            radius_growth: 0.4,
            angle_range: (0.0, turns * 2.0 * PI),
        };
        println!("=== turns = {turns} ===");
        for (name, deform) in &deforms {
            let t = Instant::now();
            let mut by_budget: BTreeMap<(usize, &str, &str), Vec<f64>> = BTreeMap::new();
            for seed in 1..=3u64 {
                let ds = make_spiral_pair_with(&params, 667, 3, 0.05, deform, 42).unwrap();
                let (train, test) = split_train_test(&ds, 0.5, seed).unwrap();
                for &budget in &[5usize, 20] {
                    let counts = BTreeMap::from([
                        ("spiral1".to_string(), 20usize),
                        ("spiral2".to_string(), budget),
                    ]);
                    let sub = subsample_labeled(&train, &counts, seed).unwrap();
                    // build fit set: labeled + kmeans centroids
                    let fit_ds = {
                        use ssma::sampling::bisecting_kmeans;
                        use ssma::dataset::DomainDataset;
                        let mut doms = Vec::new();
                        for dom in sub.domains() {
                            let lab: Vec<usize> = (0..dom.len())
                                .filter(|&j| dom.labels()[j].is_some())
                                .collect();
                            let pool: Vec<usize> = (0..dom.len())
                                .filter(|&j| dom.labels()[j].is_none())
                                .collect();
                            let mut pf = Array2::<f64>::zeros((2, pool.len()));
                            for (o, &j) in pool.iter().enumerate() {
                                pf.column_mut(o).assign(&dom.features().column(j));
                            }
                            let cent = bisecting_kmeans(pf.view(), 300, seed).unwrap();
                            let n = lab.len() + 300;
                            let mut f = Array2::<f64>::zeros((2, n));
                            let mut y = Vec::new();
                            for (o, &j) in lab.iter().enumerate() {
                                f.column_mut(o).assign(&dom.features().column(j));
                                y.push(dom.labels()[j]);
                            }
                            for c in 0..300 {
                                f.column_mut(lab.len() + c).assign(&cent.points().column(c));
                                y.push(None);
                            }
                            doms.push(DomainDataset::new(dom.id(), f, y, dom.id()).unwrap());
                        }
                        MultiDomainDataset::new(doms, 3).unwrap()
                    };
                    // ssma
                    let mut model = fit(&fit_ds, &AlignmentParams::default()).unwrap();
                    let pools = pooled_labeled(&fit_ds);
                    let d = model.d_total();
                    let mut z = Array2::<f64>::zeros((d, pools.iter().map(|p| p.2.len()).sum()));
                    let mut y_all = Vec::new();
                    let mut at = 0;
                    for (m, f, y) in &pools {
                        let zp = model
                            .project(fit_ds.domains()[*m].id(), f, d)
                            .unwrap();
                        z.slice_mut(ndarray::s![.., at..at + y.len()]).assign(&zp);
                        y_all.extend_from_slice(y);
                        at += y.len();
                    }
                    let factory = |z: &Array2<f64>, y: &[u32]| -> ssma::Result<Box<dyn Predictor>> {
                        Ok(Box::new(train_linear(z, y, &DEFAULT_C_GRID)?))
                    };
                    select_dims(&mut model, &z, &y_all, 5, &factory).unwrap();
                    let r = model.dims();
                    let mut zr = Array2::<f64>::zeros((r, y_all.len()));
                    zr.assign(&z.slice(ndarray::s![..r, ..]));
                    let clf = train_linear(&zr, &y_all, &DEFAULT_C_GRID).unwrap();
                    for dom in test.domains() {
                        let zt = model.project(dom.id(), dom.features(), r).unwrap();
                        let truth: Vec<u32> =
                            dom.labels().iter().map(|l| l.unwrap()).collect();
                        let pred = clf.predict(&zt);
                        let cm = ConfusionMatrix::from_pairs(&truth, &pred, 3).unwrap();
                        let kappa = cohen_kappa(&cm).unwrap();
                        by_budget
                            .entry((budget, "ssma", if dom.id() == "spiral1" { "src" } else { "tgt" }))
                            .or_default()
                            .push(kappa);
                    }
                    // none (raw pooled)
                    let total: usize = pools.iter().map(|p| p.2.len()).sum();
                    let mut zn = Array2::<f64>::zeros((2, total));
                    let mut yn = Vec::new();
                    let mut at = 0;
                    for (_, f, y) in &pools {
                        zn.slice_mut(ndarray::s![.., at..at + y.len()]).assign(f);
                        yn.extend_from_slice(y);
                        at += y.len();
                    }
                    let clf = train_linear(&zn, &yn, &DEFAULT_C_GRID).unwrap();
                    for dom in test.domains() {
                        let truth: Vec<u32> =
                            dom.labels().iter().map(|l| l.unwrap()).collect();
                        let pred = clf.predict(dom.features());
                        let cm = ConfusionMatrix::from_pairs(&truth, &pred, 3).unwrap();
                        let kappa = cohen_kappa(&cm).unwrap();
                        by_budget
                            .entry((budget, "none", if dom.id() == "spiral1" { "src" } else { "tgt" }))
                            .or_default()
                            .push(kappa);
                    }
                }
            }
            print!("{name} ({:.0}s) ", t.elapsed().as_secs_f64());
            for ((budget, method, side), v) in &by_budget {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                print!("{method}/{side}@{budget}={mean:.2} ");
            }
            println!();
        }
    }
}
