//! `ssma` command line: toy data generation, model fitting, projection,
//! cross-domain synthesis, experiment grids, and kappa evaluation.
//!
//! Exit codes: 0 success, 2 usage, 3 data/configuration error, 4 numerical
//! failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use ssma::alignment::{self, AlignmentParams};
use ssma::dataset::MultiDomainDataset;
use ssma::error::{Error, Result};
use ssma::evaluate::{
    cohen_kappa, train_linear, ConfusionMatrix, DeformationSetting, Predictor,
    DEFAULT_C_GRID,
};
use ssma::io;
use ssma::synth::{make_spiral_pair, Deformation};

#[derive(Parser)]
#[command(
    name = "ssma",
    version,
    about = "Semisupervised manifold alignment: fit per-domain linear projectors into a shared latent space and evaluate joint classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a two-spiral toy dataset under a named deformation
    Toy(ToyArgs),
    /// Fit an alignment model on a dataset file
    Align(AlignArgs),
    /// Project a dataset's samples into the latent space
    Project(ProjectArgs),
    /// Synthesize one domain's features from another domain's samples
    Synthesize(SynthesizeArgs),
    /// Run an experiment grid described by a TOML config
    Experiment(ExperimentArgs),
    /// Compute Cohen's kappa from a `true,predicted` pairs file
    EvalKappa(EvalKappaArgs),
}

#[derive(Args)]
struct ToyArgs {
    /// Deformation preset applied to the second spiral: s, sr, or srt
    #[arg(long, default_value = "sr")]
    setting: String,
    /// Override the preset's scale factor
    #[arg(long)]
    scale: Option<f64>,
    /// Override the preset's rotation (degrees)
    #[arg(long)]
    rotation: Option<f64>,
    /// Override the preset's x-translation
    #[arg(long)]
    tx: Option<f64>,
    /// Override the preset's y-translation
    #[arg(long)]
    ty: Option<f64>,
    /// Contiguous class bands along the spiral
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(2..))]
    classes: u32,
    /// Samples per class per domain
    #[arg(long, default_value_t = 667, value_parser = clap::value_parser!(usize))]
    n_per_class: usize,
    /// Gaussian noise (template units) added to each coordinate
    #[arg(long, default_value_t = 0.05)]
    noise_sd: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output dataset file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlignArgs {
    /// Input dataset file
    #[arg(long)]
    dataset: PathBuf,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
    /// Tradeoff between geometry preservation and class pull
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Neighbors in the per-domain geometry graphs
    #[arg(long, default_value_t = 9)]
    k: usize,
    /// Fixed latent dimension (default: cross-validate)
    #[arg(long)]
    dims: Option<usize>,
    /// Standardize each domain's features before fitting
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    standardize: bool,
}

#[derive(Args)]
struct ProjectArgs {
    /// Fitted model file
    #[arg(long)]
    model: PathBuf,
    /// Dataset whose samples to project
    #[arg(long)]
    dataset: PathBuf,
    /// Latent dimensions to emit (default: the model's chosen dimension)
    #[arg(long)]
    dims: Option<usize>,
    /// Output file: sample,domain,label,c1..cr
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Fitted model file
    #[arg(long)]
    model: PathBuf,
    /// Dataset providing the source samples
    #[arg(long)]
    dataset: PathBuf,
    /// Source domain id
    #[arg(long)]
    src: String,
    /// Destination domain id
    #[arg(long)]
    dst: String,
    /// Output file: sample,domain,label,g1..g_dst (+ recon_error when src = dst)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output results table
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalKappaArgs {
    /// File of `true,predicted` label pairs
    #[arg(long)]
    pairs: PathBuf,
    /// Optional file to write the summary to
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Toy(args) => cmd_toy(args),
        Command::Align(args) => cmd_align(args),
        Command::Project(args) => cmd_project(args),
        Command::Synthesize(args) => cmd_synthesize(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::EvalKappa(args) => cmd_eval_kappa(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn cmd_toy(args: ToyArgs) -> Result<()> {
    let preset: DeformationSetting = args.setting.parse()?;
    let base = preset.deformation();
    let deform = Deformation::new(
        args.scale.unwrap_or(base.scale()),
        args.rotation.unwrap_or(base.rotation_deg()),
        [
            args.tx.unwrap_or(base.translation()[0]),
            args.ty.unwrap_or(base.translation()[1]),
        ],
    );
    if args.n_per_class == 0 {
        return Err(Error::Parameter("n-per-class must be at least 1".into()));
    }
    let ds = make_spiral_pair(args.n_per_class, args.classes, args.noise_sd, &deform, args.seed)?;
    io::write_dataset_file(&args.out, &ds)?;

    println!(
        "wrote {} (N = {}, classes = {})",
        args.out.display(),
        ds.n_total(),
        ds.class_count()
    );
    for dom in ds.domains() {
        println!(
            "  domain {}: d = {}, n = {} ({} labeled)",
            dom.id(),
            dom.dim(),
            dom.len(),
            dom.labeled_count()
        );
    }
    Ok(())
}

/// Pools every labeled sample's full-dimensional latent coordinates, in
/// dataset order, for dimension selection.
fn pooled_latent(
    model: &alignment::AlignmentModel,
    ds: &MultiDomainDataset,
) -> Result<(Array2<f64>, Vec<u32>)> {
    let d = model.d_total();
    let mut blocks = Vec::new();
    let mut labels = Vec::new();
    for dom in ds.domains() {
        let idx: Vec<usize> = (0..dom.len()).filter(|&j| dom.labels()[j].is_some()).collect();
        if idx.is_empty() {
            continue;
        }
        let mut feats = Array2::<f64>::zeros((dom.dim(), idx.len()));
        for (out, &j) in idx.iter().enumerate() {
            feats.column_mut(out).assign(&dom.features().column(j));
            labels.push(dom.labels()[j].expect("labeled"));
        }
        blocks.push(model.project(dom.id(), &feats, d)?);
    }
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut z = Array2::<f64>::zeros((d, total));
    let mut at = 0;
    for block in blocks {
        z.slice_mut(ndarray::s![.., at..at + block.ncols()]).assign(&block);
        at += block.ncols();
    }
    Ok((z, labels))
}

fn cmd_align(args: AlignArgs) -> Result<()> {
    let ds = io::read_dataset_file(&args.dataset)?;
    let params = AlignmentParams {
        mu: args.mu,
        k: args.k,
        standardize: args.standardize,
        dims: args.dims,
        ..AlignmentParams::default()
    };
    let mut model = alignment::fit(&ds, &params)?;

    if args.dims.is_none() {
        let (z, y) = pooled_latent(&model, &ds)?;
        let min_class = {
            let mut counts = std::collections::BTreeMap::<u32, usize>::new();
            for &v in &y {
                *counts.entry(v).or_insert(0) += 1;
            }
            counts.values().copied().min().unwrap_or(0)
        };
        let folds = 5usize.min(min_class);
        if folds >= 2 {
            let factory = |z: &Array2<f64>, y: &[u32]| -> Result<Box<dyn Predictor>> {
                Ok(Box::new(train_linear(z, y, &DEFAULT_C_GRID)?))
            };
            alignment::select_dims(&mut model, &z, &y, folds, &factory)?;
        }
    }

    io::write_model_file(&args.out, &model)?;

    let eig = model.eigenvalues();
    println!(
        "fitted alignment over {} domains (d = {}), ridge = {:.3e}, dims = {}",
        model.domain_ids().len(),
        model.d_total(),
        model.ridge_used(),
        model.dims()
    );
    println!(
        "eigenvalues: min = {:.6e}, max = {:.6e}",
        eig.first().copied().unwrap_or(f64::NAN),
        eig.last().copied().unwrap_or(f64::NAN)
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn label_field(label: Option<u32>) -> String {
    label.map(|c| c.to_string()).unwrap_or_default()
}

fn cmd_project(args: ProjectArgs) -> Result<()> {
    let model = io::read_model_file(&args.model)?;
    let ds = io::read_dataset_file(&args.dataset)?;
    let r = args.dims.unwrap_or_else(|| model.dims());

    let mut out = String::new();
    writeln!(out, "#ssma-projection v1; dims={r}").expect("string write");
    let mut rows = 0usize;
    for dom in ds.domains() {
        let z = model.project(dom.id(), dom.features(), r)?;
        for j in 0..dom.len() {
            let coords: Vec<String> = z.column(j).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{},{}", j, dom.id(), label_field(dom.labels()[j]), coords.join(","))
                .expect("string write");
            rows += 1;
        }
    }
    std::fs::write(&args.out, out)?;
    println!("projected {rows} samples to {} latent dims -> {}", r, args.out.display());
    Ok(())
}

fn cmd_synthesize(args: SynthesizeArgs) -> Result<()> {
    let model = io::read_model_file(&args.model)?;
    let ds = io::read_dataset_file(&args.dataset)?;
    let src = ds
        .domain_index(&args.src)
        .ok_or_else(|| Error::Validation(format!("domain '{}' not in dataset", args.src)))?;
    let dom = &ds.domains()[src];
    let synthesized = model.synthesize(&args.src, &args.dst, dom.features())?;

    let round_trip = args.src == args.dst;
    let mut out = String::new();
    writeln!(
        out,
        "#ssma-synthesis v1; src={}; dst={}{}",
        args.src,
        args.dst,
        if round_trip { "; recon_error=last" } else { "" }
    )
    .expect("string write");
    for j in 0..dom.len() {
        let feats: Vec<String> = synthesized.column(j).iter().map(|v| v.to_string()).collect();
        if round_trip {
            let err: f64 = dom
                .features()
                .column(j)
                .iter()
                .zip(synthesized.column(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            writeln!(
                out,
                "{},{},{},{},{}",
                j,
                args.dst,
                label_field(dom.labels()[j]),
                feats.join(","),
                err
            )
            .expect("string write");
        } else {
            writeln!(out, "{},{},{},{}", j, args.dst, label_field(dom.labels()[j]), feats.join(","))
                .expect("string write");
        }
    }
    std::fs::write(&args.out, out)?;
    println!(
        "synthesized {} samples from '{}' into '{}' -> {}",
        dom.len(),
        args.src,
        args.dst,
        args.out.display()
    );
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let config = io::read_config_file(&args.config)?;
    let started = std::time::Instant::now();
    let rows = ssma::evaluate::run_experiment(&config)?;
    let elapsed = started.elapsed().as_secs_f64();
    io::write_results_file(&args.out, &rows)?;

    println!("wrote {} rows to {} in {elapsed:.1}s", rows.len(), args.out.display());
    for &method in &config.methods {
        let kappas: Vec<f64> =
            rows.iter().filter(|r| r.method == method).map(|r| r.kappa).collect();
        if !kappas.is_empty() {
            let mean = kappas.iter().sum::<f64>() / kappas.len() as f64;
            println!("  {method}: mean kappa = {mean:.4} over {} rows", kappas.len());
        }
    }
    Ok(())
}

fn cmd_eval_kappa(args: EvalKappaArgs) -> Result<()> {
    let (truth, predicted) = io::read_label_pairs(&args.pairs)?;
    let class_count = truth
        .iter()
        .chain(predicted.iter())
        .copied()
        .max()
        .ok_or_else(|| Error::Validation("no label pairs".into()))?;
    let cm = ConfusionMatrix::from_pairs(&truth, &predicted, class_count)?;
    let kappa = cohen_kappa(&cm)?;
    let summary = format!(
        "kappa = {kappa}\naccuracy = {}\nsamples = {}\nclasses = {class_count}\n",
        cm.accuracy(),
        cm.total()
    );
    print!("{summary}");
    if let Some(path) = args.out {
        std::fs::write(path, summary)?;
    }
    Ok(())
}
