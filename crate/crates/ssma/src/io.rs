//! Text file formats: datasets, fitted models, experiment configs, result
//! tables, and label-pair files.
//!
//! Datasets and result tables are comma-delimited with a `#ssma-…` header
//! line; model files are key-value lines plus row-major matrix blocks with
//! 17 significant digits so doubles survive a round trip bit-exactly;
//! configs are TOML. Every format satisfies `parse(write(x)) = x`.
//!
//! The dataset format identifies domains by id only; the free-text domain
//! name is in-memory metadata and comes back as the id after a reload.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::alignment::{AlignmentModel, AlignmentParams, DomainStats};
use crate::dataset::{DomainDataset, MultiDomainDataset};
use crate::eigen::RidgePolicy;
use crate::error::{Error, Result};
use crate::evaluate::{ExperimentRow, RunConfig};

const DATASET_MAGIC: &str = "#ssma-dataset v";
const MODEL_MAGIC: &str = "#ssma-model v";
const RESULTS_MAGIC: &str = "#ssma-results v";
const MODEL_MAJOR: u32 = 1;
const MODEL_MINOR: u32 = 0;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// 17 significant digits; parses back to the identical f64.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| parse_err(line, format!("invalid number '{s}'")))
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| parse_err(line, format!("invalid integer '{s}'")))
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(',') || id.contains('\n') || id.contains(';') {
        return Err(Error::Validation(format!(
            "domain id '{id}' must be non-empty and free of commas, semicolons, and newlines"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

/// Serializes a dataset: header, then one `domain_id,label_or_empty,f…` row
/// per sample, domain-major in dataset order.
pub fn dataset_to_string(ds: &MultiDomainDataset) -> Result<String> {
    let mut out = String::new();
    let dims: Vec<String> = ds.domain_dims().iter().map(|d| d.to_string()).collect();
    writeln!(
        out,
        "{DATASET_MAGIC}1; domains={}; dims={}; classes={}",
        ds.domains().len(),
        dims.join(","),
        ds.class_count()
    )
    .expect("string write");
    for dom in ds.domains() {
        check_id(dom.id())?;
        for j in 0..dom.len() {
            let label = match dom.labels()[j] {
                Some(c) => c.to_string(),
                None => String::new(),
            };
            let feats: Vec<String> =
                dom.features().column(j).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{}", dom.id(), label, feats.join(",")).expect("string write");
        }
    }
    Ok(out)
}

/// Parses the dataset format; errors carry 1-based line numbers.
pub fn parse_dataset(text: &str) -> Result<MultiDomainDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let rest = header
        .strip_prefix(DATASET_MAGIC)
        .ok_or_else(|| parse_err(1, format!("expected header starting with '{DATASET_MAGIC}'")))?;
    let fields: Vec<&str> = rest.split(';').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(parse_err(1, "header needs version; domains=; dims=; classes="));
    }
    let version = parse_usize(fields[0], 1)?;
    if version != 1 {
        return Err(parse_err(1, format!("unsupported dataset format version {version}")));
    }
    let domains_n = parse_usize(
        fields[1].strip_prefix("domains=").ok_or_else(|| parse_err(1, "missing domains="))?,
        1,
    )?;
    let dims: Vec<usize> = fields[2]
        .strip_prefix("dims=")
        .ok_or_else(|| parse_err(1, "missing dims="))?
        .split(',')
        .map(|s| parse_usize(s, 1))
        .collect::<Result<_>>()?;
    let classes = parse_usize(
        fields[3].strip_prefix("classes=").ok_or_else(|| parse_err(1, "missing classes="))?,
        1,
    )? as u32;
    if dims.len() != domains_n {
        return Err(parse_err(1, format!("{} dims for {domains_n} domains", dims.len())));
    }

    struct Pending {
        dim: usize,
        columns: Vec<f64>,
        labels: Vec<Option<u32>>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut pending: std::collections::BTreeMap<String, Pending> = Default::default();

    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let id = parts.next().unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(parse_err(lineno, "missing domain id"));
        }
        if !pending.contains_key(&id) {
            if order.len() == domains_n {
                return Err(parse_err(
                    lineno,
                    format!("unexpected domain '{id}': header declared {domains_n} domains"),
                ));
            }
            let dim = dims[order.len()];
            order.push(id.clone());
            pending.insert(id.clone(), Pending { dim, columns: Vec::new(), labels: Vec::new() });
        }
        let entry = pending.get_mut(&id).expect("inserted above");
        let label_field = parts
            .next()
            .ok_or_else(|| parse_err(lineno, "missing label field"))?
            .trim();
        let label = if label_field.is_empty() {
            None
        } else {
            let value: u32 = label_field
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid label '{label_field}'")))?;
            Some(value)
        };
        let feats: Vec<f64> =
            parts.map(|s| parse_f64(s, lineno)).collect::<Result<Vec<f64>>>()?;
        if feats.len() != entry.dim {
            return Err(parse_err(
                lineno,
                format!("domain '{id}' expects {} features, got {}", entry.dim, feats.len()),
            ));
        }
        entry.columns.extend_from_slice(&feats);
        entry.labels.push(label);
    }

    if order.len() != domains_n {
        return Err(Error::Validation(format!(
            "header declared {domains_n} domains but rows cover {}",
            order.len()
        )));
    }
    let mut domains = Vec::with_capacity(domains_n);
    for id in order {
        let p = pending.remove(&id).expect("collected");
        let n = p.labels.len();
        let mut features = Array2::<f64>::zeros((p.dim, n));
        for j in 0..n {
            for i in 0..p.dim {
                features[[i, j]] = p.columns[j * p.dim + i];
            }
        }
        domains.push(DomainDataset::new(id.clone(), features, p.labels, id)?);
    }
    MultiDomainDataset::new(domains, classes)
}

pub fn write_dataset_file(path: &Path, ds: &MultiDomainDataset) -> Result<()> {
    std::fs::write(path, dataset_to_string(ds)?)?;
    Ok(())
}

pub fn read_dataset_file(path: &Path) -> Result<MultiDomainDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// Serializes a fitted model. Matrix entries carry 17 significant digits,
/// so loading reproduces the projector bit-exactly.
pub fn model_to_string(model: &AlignmentModel) -> Result<String> {
    for id in model.domain_ids() {
        check_id(id)?;
    }
    let mut out = String::new();
    let p = model.params();
    writeln!(out, "{MODEL_MAGIC}{MODEL_MAJOR}.{MODEL_MINOR}").expect("string write");
    writeln!(out, "mu = {}", fmt_f64(p.mu)).expect("string write");
    writeln!(out, "k = {}", p.k).expect("string write");
    let ridge_policy = match p.ridge {
        RidgePolicy::Auto => "auto".to_string(),
        RidgePolicy::Fixed(eps) => format!("fixed:{}", fmt_f64(eps)),
    };
    writeln!(out, "ridge_policy = {ridge_policy}").expect("string write");
    writeln!(out, "ridge_used = {}", fmt_f64(model.ridge_used())).expect("string write");
    writeln!(out, "standardize = {}", p.standardize).expect("string write");
    let dims_policy = match p.dims {
        None => "auto".to_string(),
        Some(r) => format!("fixed:{r}"),
    };
    writeln!(out, "dims_policy = {dims_policy}").expect("string write");
    writeln!(out, "chosen_dims = {}", model.dims()).expect("string write");
    writeln!(out, "class_count = {}", model.class_count()).expect("string write");
    writeln!(out, "domains = {}", model.domain_ids().join(",")).expect("string write");
    let dims: Vec<String> = model.domain_dims().iter().map(|d| d.to_string()).collect();
    writeln!(out, "domain_dims = {}", dims.join(",")).expect("string write");
    let eig: Vec<String> = model.eigenvalues().iter().map(|v| fmt_f64(*v)).collect();
    writeln!(out, "eigenvalues = {}", eig.join(" ")).expect("string write");

    let d = model.d_total();
    writeln!(out, "projector rows={d} cols={d}").expect("string write");
    for i in 0..d {
        let row: Vec<String> = model.projector().row(i).iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", row.join(" ")).expect("string write");
    }

    match model.standardization() {
        None => writeln!(out, "standardization = absent").expect("string write"),
        Some(stats) => {
            writeln!(out, "standardization = present").expect("string write");
            for (m, st) in stats.iter().enumerate() {
                let mean: Vec<String> = st.mean.iter().map(|v| fmt_f64(*v)).collect();
                let std: Vec<String> = st.std.iter().map(|v| fmt_f64(*v)).collect();
                writeln!(out, "mean {m} = {}", mean.join(" ")).expect("string write");
                writeln!(out, "std {m} = {}", std.join(" ")).expect("string write");
            }
        }
    }
    Ok(out)
}

struct ModelLines<'a> {
    lines: Vec<&'a str>,
    at: usize,
}

impl<'a> ModelLines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        while self.at < self.lines.len() {
            let lineno = self.at + 1;
            let line = self.lines[self.at];
            self.at += 1;
            if !line.trim().is_empty() {
                return Ok((lineno, line));
            }
        }
        Err(parse_err(self.lines.len(), "unexpected end of model file"))
    }

    /// Next line, which must read `key = value`; returns the value.
    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (lineno, line) = self.next()?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(lineno, format!("expected '{key} = …'")))?;
        if k.trim() != key {
            return Err(parse_err(lineno, format!("expected key '{key}', found '{}'", k.trim())));
        }
        Ok((lineno, v.trim()))
    }
}

/// Parses the model format. Files written by a newer major version are
/// rejected loudly.
pub fn parse_model(text: &str) -> Result<AlignmentModel> {
    let mut reader = ModelLines { lines: text.lines().collect(), at: 0 };

    let (lineno, header) = reader.next()?;
    let version = header
        .strip_prefix(MODEL_MAGIC)
        .ok_or_else(|| parse_err(lineno, format!("expected header starting with '{MODEL_MAGIC}'")))?;
    let (major_s, _minor_s) = version
        .split_once('.')
        .ok_or_else(|| parse_err(lineno, "expected version 'major.minor'"))?;
    let major: u32 = major_s
        .parse()
        .map_err(|_| parse_err(lineno, format!("invalid major version '{major_s}'")))?;
    if major > MODEL_MAJOR {
        return Err(Error::Validation(format!(
            "model format version {version} is newer than supported major {MODEL_MAJOR}; refusing to load"
        )));
    }

    let (lineno, v) = reader.keyed("mu")?;
    let mu = parse_f64(v, lineno)?;
    let (lineno, v) = reader.keyed("k")?;
    let k = parse_usize(v, lineno)?;
    let (lineno, v) = reader.keyed("ridge_policy")?;
    let ridge = if v == "auto" {
        RidgePolicy::Auto
    } else if let Some(eps) = v.strip_prefix("fixed:") {
        RidgePolicy::Fixed(parse_f64(eps, lineno)?)
    } else {
        return Err(parse_err(lineno, format!("invalid ridge policy '{v}'")));
    };
    let (lineno, v) = reader.keyed("ridge_used")?;
    let ridge_used = parse_f64(v, lineno)?;
    let (lineno, v) = reader.keyed("standardize")?;
    let standardize = match v {
        "true" => true,
        "false" => false,
        other => return Err(parse_err(lineno, format!("invalid standardize flag '{other}'"))),
    };
    let (lineno, v) = reader.keyed("dims_policy")?;
    let dims = if v == "auto" {
        None
    } else if let Some(r) = v.strip_prefix("fixed:") {
        Some(parse_usize(r, lineno)?)
    } else {
        return Err(parse_err(lineno, format!("invalid dims policy '{v}'")));
    };
    let (lineno, v) = reader.keyed("chosen_dims")?;
    let chosen_dims = parse_usize(v, lineno)?;
    let (lineno, v) = reader.keyed("class_count")?;
    let class_count = parse_usize(v, lineno)? as u32;
    let (_, v) = reader.keyed("domains")?;
    let domain_ids: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
    let (lineno, v) = reader.keyed("domain_dims")?;
    let domain_dims: Vec<usize> =
        v.split(',').map(|s| parse_usize(s, lineno)).collect::<Result<_>>()?;
    let (lineno, v) = reader.keyed("eigenvalues")?;
    let eigenvalues: Vec<f64> =
        v.split_whitespace().map(|s| parse_f64(s, lineno)).collect::<Result<_>>()?;

    let (lineno, line) = reader.next()?;
    let spec = line
        .strip_prefix("projector rows=")
        .ok_or_else(|| parse_err(lineno, "expected 'projector rows=… cols=…'"))?;
    let (rows_s, cols_s) = spec
        .split_once(" cols=")
        .ok_or_else(|| parse_err(lineno, "expected 'projector rows=… cols=…'"))?;
    let rows = parse_usize(rows_s, lineno)?;
    let cols = parse_usize(cols_s, lineno)?;
    let mut projector = Array2::<f64>::zeros((rows, cols));
    for i in 0..rows {
        let (lineno, line) = reader.next()?;
        let entries: Vec<f64> =
            line.split_whitespace().map(|s| parse_f64(s, lineno)).collect::<Result<_>>()?;
        if entries.len() != cols {
            return Err(parse_err(lineno, format!("expected {cols} entries, got {}", entries.len())));
        }
        for (j, value) in entries.into_iter().enumerate() {
            projector[[i, j]] = value;
        }
    }

    let (lineno, v) = reader.keyed("standardization")?;
    let standardization = match v {
        "absent" => None,
        "present" => {
            let mut stats = Vec::with_capacity(domain_ids.len());
            for m in 0..domain_ids.len() {
                let (lineno, v) = reader.keyed(&format!("mean {m}"))?;
                let mean: Vec<f64> =
                    v.split_whitespace().map(|s| parse_f64(s, lineno)).collect::<Result<_>>()?;
                let (lineno, v) = reader.keyed(&format!("std {m}"))?;
                let std: Vec<f64> =
                    v.split_whitespace().map(|s| parse_f64(s, lineno)).collect::<Result<_>>()?;
                stats.push(DomainStats { mean, std });
            }
            Some(stats)
        }
        other => return Err(parse_err(lineno, format!("invalid standardization marker '{other}'"))),
    };

    let params = AlignmentParams { mu, k, ridge, standardize, dims };
    AlignmentModel::from_parts(
        domain_ids,
        domain_dims,
        class_count,
        eigenvalues,
        projector,
        standardization,
        params,
        ridge_used,
        chosen_dims,
    )
}

pub fn write_model_file(path: &Path, model: &AlignmentModel) -> Result<()> {
    std::fs::write(path, model_to_string(model)?)?;
    Ok(())
}

pub fn read_model_file(path: &Path) -> Result<AlignmentModel> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}

// ---------------------------------------------------------------------------
// Experiment configs (TOML)
// ---------------------------------------------------------------------------

pub fn config_to_string(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn read_config_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

/// Fixed column order. Timing is deliberately not written: result files are
/// byte-identical across reruns of the same config and seed.
pub fn results_to_string(rows: &[ExperimentRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{RESULTS_MAGIC}1").expect("string write");
    writeln!(out, "leading_domain,target_domain,budget,method,seed,kappa,accuracy,dims")
        .expect("string write");
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.leading_domain,
            row.target_domain,
            row.budget,
            row.method,
            row.seed,
            row.kappa,
            row.accuracy,
            row.dims
        )
        .expect("string write");
    }
    out
}

pub fn write_results_file(path: &Path, rows: &[ExperimentRow]) -> Result<()> {
    std::fs::write(path, results_to_string(rows))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Label-pair files (true,predicted)
// ---------------------------------------------------------------------------

/// Reads `true_label,predicted_label` rows; `#` lines and blanks are skipped.
pub fn parse_label_pairs(text: &str) -> Result<(Vec<u32>, Vec<u32>)> {
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (t, p) = trimmed
            .split_once(',')
            .ok_or_else(|| parse_err(lineno, "expected 'true,predicted'"))?;
        let t: u32 = t
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid true label '{t}'")))?;
        let p: u32 = p
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid predicted label '{p}'")))?;
        truth.push(t);
        predicted.push(p);
    }
    if truth.is_empty() {
        return Err(Error::Validation("no label pairs found".into()));
    }
    Ok((truth, predicted))
}

pub fn read_label_pairs(path: &Path) -> Result<(Vec<u32>, Vec<u32>)> {
    let text = std::fs::read_to_string(path)?;
    parse_label_pairs(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{fit, AlignmentParams};
    use crate::evaluate::{DeformationSetting, Method, SyntheticSpec};
    use crate::synth::{make_spiral_pair, Deformation};

    fn sample_dataset() -> MultiDomainDataset {
        make_spiral_pair(8, 3, 0.02, &Deformation::new(1.5, 45.0, [0.5, -1.0]), 4).unwrap()
    }

    #[test]
    fn dataset_round_trips_exactly() {
        let ds = sample_dataset();
        let text = dataset_to_string(&ds).unwrap();
        let back = parse_dataset(&text).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn dataset_parse_reports_line_numbers() {
        let ds = sample_dataset();
        let mut text = dataset_to_string(&ds).unwrap();
        text.push_str("spiral1,1,not-a-number,0.5\n");
        let err = parse_dataset(&text).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 50), // header + 48 rows + bad row
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn dataset_header_mismatch_rejected() {
        assert!(parse_dataset("#ssma-dataset v2; domains=1; dims=2; classes=2\n").is_err());
        assert!(parse_dataset("not a dataset\n").is_err());
    }

    #[test]
    fn model_round_trips_bit_exactly() {
        let ds = sample_dataset();
        let model = fit(&ds, &AlignmentParams { k: 5, ..AlignmentParams::default() }).unwrap();
        let text = model_to_string(&model).unwrap();
        let back = parse_model(&text).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn model_without_standardization_round_trips() {
        let ds = sample_dataset();
        let params = AlignmentParams { k: 5, standardize: false, ..AlignmentParams::default() };
        let model = fit(&ds, &params).unwrap();
        let back = parse_model(&model_to_string(&model).unwrap()).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn newer_major_version_fails_loudly() {
        let ds = sample_dataset();
        let model = fit(&ds, &AlignmentParams { k: 5, ..AlignmentParams::default() }).unwrap();
        let text = model_to_string(&model).unwrap();
        let bumped = text.replacen("#ssma-model v1.0", "#ssma-model v2.3", 1);
        let err = parse_model(&bumped).unwrap_err();
        assert!(err.to_string().contains("newer"), "{err}");
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config = RunConfig {
            dataset_path: None,
            synthetic: Some(SyntheticSpec {
                setting: DeformationSetting::Sr,
                n_per_class: 667,
                classes: 3,
                noise_sd: 0.05,
                seed: 42,
            }),
            leading_domain: "spiral1".into(),
            leading_labeled_per_class: 20,
            budgets: vec![0, 5, 10, 15, 20],
            unlabeled_per_domain: 300,
            methods: vec![Method::Ssma, Method::None],
            seeds: vec![1, 2, 3, 4, 5],
            test_fraction: 0.5,
            mu: 1.0,
            k: 9,
            standardize: true,
            dims: None,
        };
        let text = config_to_string(&config).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn config_unknown_field_is_rejected() {
        let text = r#"
            leading_domain = "a"
            leading_labeled_per_class = 5
            budgets = [1]
            unlabeled_per_domain = 5
            methods = ["ssma"]
            seeds = [1]
            dataset_path = "x.csv"
            surprise = true
        "#;
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn results_have_fixed_columns_and_no_timing() {
        let rows = vec![ExperimentRow {
            leading_domain: "a".into(),
            target_domain: "b".into(),
            budget: 5,
            method: Method::Ssma,
            seed: 1,
            kappa: 0.75,
            accuracy: 0.8,
            dims: 3,
            seconds: 1.25,
        }];
        let text = results_to_string(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("#ssma-results v1"));
        assert_eq!(
            lines.next(),
            Some("leading_domain,target_domain,budget,method,seed,kappa,accuracy,dims")
        );
        assert_eq!(lines.next(), Some("a,b,5,ssma,1,0.75,0.8,3"));
    }

    #[test]
    fn label_pairs_parse_and_reject_garbage() {
        let (t, p) = parse_label_pairs("1,1\n2,1\n# comment\n\n3,3\n").unwrap();
        assert_eq!(t, vec![1, 2, 3]);
        assert_eq!(p, vec![1, 1, 3]);
        assert!(parse_label_pairs("1;2\n").is_err());
        assert!(parse_label_pairs("").is_err());
    }
}
