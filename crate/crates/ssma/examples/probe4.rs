// Dissect failing cells: eigenvalues, latent scales, per-r train/test kappa.
use ndarray::Array2;
use ssma::alignment::{fit, AlignmentParams};
use ssma::dataset::{split_train_test, subsample_labeled, DomainDataset, MultiDomainDataset};
use ssma::evaluate::{cohen_kappa, train_linear, ConfusionMatrix, Predictor, DEFAULT_C_GRID, DeformationSetting};
use ssma::sampling::bisecting_kmeans;
use ssma::seeding::derive_seed;
use ssma::synth::make_spiral_pair;
use std::collections::BTreeMap;

fn main() {
    for (seed, budget) in [(2u64, 15usize), (3, 15), (5, 15), (1, 15), (4, 10)] {
        let ds = make_spiral_pair(667, 3, 0.05, &DeformationSetting::S.deformation(), 42).unwrap();
        let (train, test) = split_train_test(&ds, 0.5, seed).unwrap();
        let counts = BTreeMap::from([("spiral1".to_string(), 20usize), ("spiral2".to_string(), budget)]);
        let sub = subsample_labeled(&train, &counts, seed).unwrap();
        let mut doms = Vec::new();
        for dom in sub.domains() {
            let lab: Vec<usize> = (0..dom.len()).filter(|&j| dom.labels()[j].is_some()).collect();
            let pool: Vec<usize> = (0..dom.len()).filter(|&j| dom.labels()[j].is_none()).collect();
            let mut pf = Array2::<f64>::zeros((2, pool.len()));
            for (o, &j) in pool.iter().enumerate() { pf.column_mut(o).assign(&dom.features().column(j)); }
            let cent = bisecting_kmeans(pf.view(), 300, derive_seed(seed, &["unlabeled", dom.id()])).unwrap();
            let n = lab.len() + 300;
            let mut f = Array2::<f64>::zeros((2, n));
            let mut y = Vec::new();
            for (o, &j) in lab.iter().enumerate() { f.column_mut(o).assign(&dom.features().column(j)); y.push(dom.labels()[j]); }
            for c in 0..300 { f.column_mut(lab.len() + c).assign(&cent.points().column(c)); y.push(None); }
            doms.push(DomainDataset::new(dom.id(), f, y, dom.id()).unwrap());
        }
        let fit_ds = MultiDomainDataset::new(doms, 3).unwrap();
        let model = fit(&fit_ds, &AlignmentParams::default()).unwrap();
        println!("== seed {seed} budget {budget}: ridge={:.2e} eigs={:?}", model.ridge_used(),
            model.eigenvalues().iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>());
        // pooled labeled latent at full d
        let mut zs = Vec::new(); let mut ys = Vec::new();
        for dom in fit_ds.domains() {
            let lab: Vec<usize> = (0..dom.len()).filter(|&j| dom.labels()[j].is_some()).collect();
            let mut f = Array2::<f64>::zeros((2, lab.len()));
            for (o, &j) in lab.iter().enumerate() { f.column_mut(o).assign(&dom.features().column(j)); ys.push(dom.labels()[j].unwrap()); }
            zs.push(model.project(dom.id(), &f, 4).unwrap());
        }
        let total: usize = zs.iter().map(|z| z.ncols()).sum();
        let mut z = Array2::<f64>::zeros((4, total));
        let mut at = 0;
        for part in &zs { z.slice_mut(ndarray::s![.., at..at+part.ncols()]).assign(part); at += part.ncols(); }
        for r in 1..=4usize {
            let zr = z.slice(ndarray::s![..r, ..]).to_owned();
            let clf = train_linear(&zr, &ys, &DEFAULT_C_GRID).unwrap();
            let train_pred = clf.predict(&zr);
            let cm = ConfusionMatrix::from_pairs(&ys, &train_pred, 3).unwrap();
            let ktrain = cohen_kappa(&cm).unwrap();
            // test on source domain
            let dom = &test.domains()[0];
            let zt = model.project("spiral1", dom.features(), r).unwrap();
            let truth: Vec<u32> = dom.labels().iter().map(|l| l.unwrap()).collect();
            let cm = ConfusionMatrix::from_pairs(&truth, &clf.predict(&zt), 3).unwrap();
            let ktest = cohen_kappa(&cm).unwrap();
            let row_norm: Vec<String> = (0..r).map(|i| format!("{:.1e}", zr.row(i).iter().map(|v| v*v).sum::<f64>().sqrt())).collect();
            println!("   r={r}: C={} train k={ktrain:.2} src-test k={ktest:.2} row norms={row_norm:?}", clf.chosen_c());
        }
    }
}
