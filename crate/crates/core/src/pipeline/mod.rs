//! End-to-end runs: load, decompose, substructure features, per-property
//! contrastive training, fusion and probe evaluation.
//!
//! Every output lands under `cfg.out` with fixed names:
//!
//! | file                   | contents                                     |
//! |------------------------|----------------------------------------------|
//! | `metrics.csv`          | `fold,repeat,accuracy,precision,recall`      |
//! | `embeddings.csv`       | `graph,d0,d1,...` fused embeddings           |
//! | `labels.csv`           | `graph,label` with the dataset's raw labels  |
//! | `losses.csv`           | `property,epoch,loss`                        |
//! | `state.<property>.bin` | encoder state, see [`crate::encoder::io`]    |
//! | `manifest.txt`         | resolved config plus run status as comments  |
//!
//! The manifest is itself a valid config file; running it again reproduces
//! every other output byte for byte, whatever the worker count.

mod config;
mod synthetic;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use config::{
    dataset_default_eps, dataset_default_eta, AugmentConfig, DatasetConfig, Featurization,
    PipelineConfig,
};
pub use synthetic::{generate_synthetic, SyntheticKind};

use crate::cohesion::{node_levels, Property};
use crate::encoder::{
    embed_dataset, fuse_embeddings, io::save_state, train, Embedding, TrainOptions,
};
use crate::error::{Error, Result};
use crate::eval::{embedding_matrix, evaluate, ProbeSummary};
use crate::graph::{featurize, FeatureMode, GraphDataset};
use crate::substructure::{default_cache_dir, ogsn_features};
use crate::tu::load_tu_dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub summary: ProbeSummary,
    /// Mean loss per epoch, one entry per trained property.
    pub losses: Vec<(Property, Vec<f64>)>,
    pub embeddings: Vec<Embedding>,
    pub out: PathBuf,
}

pub fn load_dataset(cfg: &PipelineConfig) -> Result<GraphDataset> {
    let d = &cfg.dataset;
    let mut ds = match (&d.path, d.synthetic) {
        (_, Some(kind)) => generate_synthetic(kind, d.graphs, cfg.seed)?,
        (Some(path), None) => load_tu_dataset(path, d.name.as_deref().unwrap_or_default())?,
        (None, None) => return Err(Error::Argument("no dataset source".into())),
    };
    let mode = match d.features {
        Featurization::Constant => FeatureMode::Constant,
        Featurization::Degree => FeatureMode::DegreeOneHot {
            max_degree: d.max_degree,
        },
    };
    featurize(&mut ds, mode);
    Ok(ds)
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn staged<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

fn embeddings_csv(emb: &[Embedding]) -> String {
    let d = emb.first().map_or(0, |e| e.len());
    let mut out = String::from("graph");
    for j in 0..d {
        let _ = write!(out, ",d{j}");
    }
    out.push('\n');
    for (i, e) in emb.iter().enumerate() {
        let _ = write!(out, "{i}");
        for x in e.iter() {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

fn labels_csv(ds: &GraphDataset) -> String {
    let mut out = String::from("graph,label\n");
    for (i, &l) in ds.labels.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", ds.label_map[l]);
    }
    out
}

fn run_stages(
    cfg: &PipelineConfig,
    out: &mut Outputs,
    notes: &mut Vec<String>,
) -> Result<PipelineReport> {
    let ds = staged("load", load_dataset(cfg))?;
    notes.push(format!("graphs = {}", ds.len()));
    notes.push(format!("classes = {}", ds.class_count));

    for &p in &cfg.augment.properties {
        let k: Vec<usize> = ds.graphs.iter().map(|g| node_levels(g, p).1).collect();
        let mean = k.iter().sum::<usize>() as f64 / k.len().max(1) as f64;
        notes.push(format!("mean_k_max_{p} = {mean:.4}"));
    }

    let substructure = if cfg.encoder.use_ogsn {
        let cache = default_cache_dir();
        Some(staged(
            "features",
            ogsn_features(&ds, &cfg.substructure, cache.as_deref()),
        )?)
    } else {
        None
    };

    let opts = TrainOptions {
        properties: cfg.augment.properties.clone(),
        p_dr: cfg.augment.p_dr,
        eps: cfg.eps(),
        f_kind: cfg.augment.f_kind,
        jobs: cfg.jobs,
    };
    let report = staged(
        "train",
        train(&ds, substructure.as_deref(), &cfg.encoder, &opts),
    )?;
    let mut losses_csv = String::from("property,epoch,loss\n");
    for run in &report.runs {
        staged(
            "train",
            save_state(
                &run.state,
                &out.dir.join(format!("state.{}.bin", run.property)),
            ),
        )?;
        out.written.push(format!("state.{}.bin", run.property));
        for (e, l) in run.epoch_losses.iter().enumerate() {
            let _ = writeln!(losses_csv, "{},{e},{l}", run.property);
        }
    }
    staged("train", out.write("losses.csv", &losses_csv))?;

    let pool = staged("embed", crate::encoder::thread_pool(cfg.jobs))?;
    let fused = pool.install(|| -> Result<Vec<Embedding>> {
        let per_property = report
            .runs
            .iter()
            .map(|run| embed_dataset(&ds, substructure.as_deref(), &run.state, &cfg.encoder))
            .collect::<Result<Vec<_>>>()?;
        (0..ds.len())
            .map(|i| {
                fuse_embeddings(
                    &per_property
                        .iter()
                        .map(|e| e[i].clone())
                        .collect::<Vec<_>>(),
                )
            })
            .collect()
    });
    let fused = staged("embed", fused)?;
    staged("embed", out.write("embeddings.csv", embeddings_csv(&fused)))?;
    staged("embed", out.write("labels.csv", labels_csv(&ds)))?;

    let summary = staged(
        "evaluate",
        pool.install(|| {
            evaluate(
                &embedding_matrix(&fused)?,
                &ds.labels,
                ds.class_count,
                &cfg.eval,
            )
        }),
    )?;
    staged("evaluate", out.write("metrics.csv", summary.to_csv()))?;
    notes.push(format!("mean_accuracy = {:.6}", summary.mean_accuracy));
    notes.push(format!("std_accuracy = {:.6}", summary.std_accuracy));
    notes.push(format!("probe_sanity = {}", summary.sanity_ok));

    Ok(PipelineReport {
        summary,
        losses: report
            .runs
            .iter()
            .map(|r| (r.property, r.epoch_losses.clone()))
            .collect(),
        embeddings: fused,
        out: out.dir.clone(),
    })
}

fn manifest(
    cfg: &PipelineConfig,
    result: &Result<PipelineReport>,
    out: &Outputs,
    notes: &[String],
) -> String {
    let mut m = String::new();
    let _ = writeln!(
        m,
        "# {} {} run manifest",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    );
    match result {
        Ok(_) => {
            let _ = writeln!(m, "# status = ok");
        }
        Err(e) => {
            let stage = match e {
                Error::Stage { stage, .. } => stage,
                _ => "setup",
            };
            let _ = writeln!(m, "# status = failed");
            let _ = writeln!(m, "# failed_stage = {stage}");
            let _ = writeln!(m, "# error = {}", e.to_string().replace('\n', " "));
            let _ = writeln!(m, "# partial_outputs = {}", !out.written.is_empty());
        }
    }
    let _ = writeln!(m, "# outputs = {}", out.written.join(" "));
    for n in notes {
        let _ = writeln!(m, "# {n}");
    }
    m.push('\n');
    m.push_str(&cfg.to_toml());
    m
}

/// Runs every stage and writes the outputs listed in the module docs. On
/// failure the manifest is still written, naming the failed stage and any
/// partial outputs, and the stage-tagged error is returned.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let dir = cfg.out.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e).in_stage("setup"))?;
    let mut out = Outputs {
        dir,
        written: Vec::new(),
    };
    let mut notes = Vec::new();
    let result = run_stages(cfg, &mut out, &mut notes);
    let text = manifest(cfg, &result, &out, &notes);
    let path = out.dir.join("manifest.txt");
    fs::write(&path, text).map_err(|e| Error::io(&path, e).in_stage("manifest"))?;
    result
}

/// Reads `manifest.txt` (or any config) and reruns it into `out`.
pub fn rerun_manifest(manifest: &Path, out: &Path) -> Result<PipelineReport> {
    let mut cfg = PipelineConfig::load(manifest)?;
    cfg.out = out.to_path_buf();
    run_pipeline(&cfg)
}
