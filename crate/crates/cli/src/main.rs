//! `kgalign` command line: synthetic benchmark generation, each pipeline
//! stage over plain-text files, and end-to-end runs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kgalign::align::{augment_seeds, augmentation_precision, evaluate, fuse_channels, infer_alignment};
use kgalign::graph::{KnowledgeGraph, SeedAlignment, SeedKind};
use kgalign::io;
use kgalign::partition::{batch_partitions, edge_cut_rate, expand_overlap, seed_colocation_rate};
use kgalign::pipeline::{self, PipelineConfig};
use kgalign::synth::{generate_synthetic_benchmark, SyntheticSpec};
use kgalign::{Error, TopKSimilarityMatrix};

#[derive(Parser)]
#[command(name = "kgalign", version, about = "Entity alignment between two knowledge graphs")]
struct Cli {
    #[command(flatten)]
    tuning: Tuning,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Vps,
    MetisCps,
}

#[derive(Clone, Copy, ValueEnum)]
enum AblateArg {
    None,
    Name,
    Structure,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum EmbedderArg {
    /// Character-trigram hashing, no external files.
    Hash,
    /// Token vectors from `--embeddings`.
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Tanh,
    Identity,
}

/// Settings shared by every subcommand. A `--config` file is read first and
/// flags override it.
#[derive(Args)]
struct Tuning {
    /// Flat `key = value` file using the flag names below as keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of mini-batches.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Share of the ground truth used for training when no train file is given.
    #[arg(long, global = true)]
    seed_ratio: Option<f64>,
    #[arg(long, global = true, value_enum)]
    strategy: Option<StrategyArg>,
    /// Edge weight inside a seed cluster.
    #[arg(long, global = true)]
    w_prime: Option<f64>,
    /// Hubs per seed cluster.
    #[arg(long, global = true)]
    q: Option<usize>,
    #[arg(long, global = true)]
    imbalance: Option<f64>,
    #[arg(long, global = true)]
    layers: Option<usize>,
    /// Structural embedding dimension.
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true, value_enum)]
    activation: Option<ActivationArg>,
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// Negatives per training pair.
    #[arg(long, global = true)]
    negatives: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Epochs between negative resampling.
    #[arg(long, global = true)]
    resample_every: Option<usize>,
    /// Minimum estimated Jaccard for string candidates.
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Candidates kept per row in the name channel.
    #[arg(long, global = true)]
    phi: Option<usize>,
    /// Weight of string similarity in the name channel.
    #[arg(long, global = true)]
    gamma_fusion: Option<f64>,
    /// Target slices for the semantic top-k search.
    #[arg(long, global = true)]
    segments: Option<usize>,
    #[arg(long, global = true)]
    minhash_perms: Option<usize>,
    #[arg(long, global = true, value_enum)]
    embedder: Option<EmbedderArg>,
    /// Token vector file (`token<TAB>v1 v2 ...`) for `--embedder file`.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Dimension of the hashing name embedder.
    #[arg(long, global = true)]
    name_dim: Option<usize>,
    /// Batches merged per batch (1 = no overlap).
    #[arg(long, global = true)]
    d_ov: Option<usize>,
    /// Candidates kept per row of the structural matrix.
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// Ignore training seeds and rely on name-based pseudo seeds only.
    #[arg(long, global = true)]
    unsupervised: bool,
    /// Drop one channel from the final matrix.
    #[arg(long, global = true, value_enum)]
    ablate: Option<AblateArg>,
    /// Worker thread cap (default: all cores, or the KGALIGN_WORKERS variable).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

impl Tuning {
    fn overrides(&self) -> Vec<(&'static str, Option<String>)> {
        let strategy = self.strategy.map(|s| match s {
            StrategyArg::Vps => "vps",
            StrategyArg::MetisCps => "metis-cps",
        });
        let ablate = self.ablate.map(|a| match a {
            AblateArg::None => "none",
            AblateArg::Name => "name",
            AblateArg::Structure => "structure",
        });
        let activation = self.activation.map(|a| match a {
            ActivationArg::Tanh => "tanh",
            ActivationArg::Identity => "identity",
        });
        vec![
            ("k", opt(&self.k)),
            ("seed-ratio", opt(&self.seed_ratio)),
            ("strategy", opt(&strategy)),
            ("w-prime", opt(&self.w_prime)),
            ("q", opt(&self.q)),
            ("imbalance", opt(&self.imbalance)),
            ("layers", opt(&self.layers)),
            ("dim", opt(&self.dim)),
            ("activation", opt(&activation)),
            ("margin", opt(&self.margin)),
            ("negatives", opt(&self.negatives)),
            ("epochs", opt(&self.epochs)),
            ("lr", opt(&self.lr)),
            ("resample-every", opt(&self.resample_every)),
            ("theta", opt(&self.theta)),
            ("phi", opt(&self.phi)),
            ("gamma-fusion", opt(&self.gamma_fusion)),
            ("segments", opt(&self.segments)),
            ("minhash-perms", opt(&self.minhash_perms)),
            ("name-dim", opt(&self.name_dim)),
            ("embeddings", self.embeddings.as_ref().map(|p| p.display().to_string())),
            ("d-ov", opt(&self.d_ov)),
            ("top-k", opt(&self.top_k)),
            ("unsupervised", self.unsupervised.then(|| "true".to_string())),
            ("ablate", opt(&ablate)),
            ("workers", opt(&self.workers)),
            ("seed", opt(&self.seed)),
        ]
    }

    fn config(&self) -> Result<PipelineConfig, Error> {
        let tag = |e: Error| e.in_stage("config");
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p).map_err(tag)?,
            None => PipelineConfig::default(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                cfg.set(key, &v).map_err(tag)?;
            }
        }
        match self.embedder {
            Some(EmbedderArg::File) if !matches!(cfg.embedder, pipeline::EmbedderSource::TokenFile(_)) => {
                return Err(tag(Error::InvalidConfig("`--embedder file` needs `--embeddings <file>`".into())));
            }
            Some(EmbedderArg::Hash) if self.embeddings.is_some() => {
                return Err(tag(Error::InvalidConfig("`--embeddings` conflicts with `--embedder hash`".into())));
            }
            Some(EmbedderArg::Hash) if matches!(cfg.embedder, pipeline::EmbedderSource::TokenFile(_)) => {
                cfg.set("embedder", "hash").map_err(tag)?
            }
            _ => {}
        }
        cfg.validate().map_err(tag)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct Graphs {
    /// Source triples (`head<TAB>relation<TAB>tail`).
    #[arg(long)]
    source: PathBuf,
    /// Target triples.
    #[arg(long)]
    target: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic source/target pair with its planted alignment.
    GenBench {
        /// Output directory for source.tsv, target.tsv, truth.tsv, train.tsv and test.tsv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        entities: usize,
        #[arg(long, default_value_t = 6.0)]
        degree: f64,
        #[arg(long, default_value_t = 25)]
        communities: usize,
        /// Share of target names perturbed by random edits.
        #[arg(long, default_value_t = 0.0)]
        name_noise: f64,
        /// Share of target edges rewired.
        #[arg(long, default_value_t = 0.1)]
        structure_noise: f64,
        /// Extra target entities without a counterpart, relative to the source size.
        #[arg(long, default_value_t = 0.0)]
        unknown_ratio: f64,
        /// Known entities each unknown entity is linked to.
        #[arg(long, default_value_t = 5)]
        min_anchors: usize,
    },
    /// Split both graphs into mini-batches and write the assignment.
    Partition {
        #[command(flatten)]
        graphs: Graphs,
        /// Seed files (train seeds, pseudo seeds); earlier files win on conflict.
        #[arg(long = "seeds")]
        seeds: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Report co-location of these pairs.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Compute the name-channel similarity matrix.
    NameSim {
        #[command(flatten)]
        graphs: Graphs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive pseudo seeds from a name-channel matrix.
    Augment {
        #[command(flatten)]
        graphs: Graphs,
        #[arg(long)]
        name_matrix: PathBuf,
        /// Existing seeds; pseudo seeds never reuse their entities.
        #[arg(long = "seeds")]
        seeds: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Report the precision of the pseudo seeds against these pairs.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Train every batch of an assignment and write the structural matrix.
    Train {
        #[command(flatten)]
        graphs: Graphs,
        #[arg(long)]
        batches: PathBuf,
        #[arg(long = "seeds")]
        seeds: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add the structural and name matrices (either may be omitted).
    Fuse {
        #[command(flatten)]
        graphs: Graphs,
        #[arg(long)]
        structure: Option<PathBuf>,
        #[arg(long)]
        name: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the row-wise best match per source entity.
        #[arg(long)]
        alignment: Option<PathBuf>,
    },
    /// Score a similarity matrix against reference pairs.
    Eval {
        #[command(flatten)]
        graphs: Graphs,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long = "hits", value_delimiter = ',', default_value = "1,5,10")]
        hits: Vec<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every stage end to end.
    Run {
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        /// Reference pairs; split at `--seed-ratio` when no train file is given.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        train_seeds: Option<PathBuf>,
        /// Directory for alignment, report, pseudo seeds, fused matrix and batches.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn staged<T>(stage: &'static str, r: kgalign::Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage).into())
}

fn load_graphs(g: &Graphs) -> Result<(KnowledgeGraph, KnowledgeGraph)> {
    Ok((staged("load", io::read_triples(&g.source))?, staged("load", io::read_triples(&g.target))?))
}

fn load_seeds(paths: &[PathBuf], g_s: &KnowledgeGraph, g_t: &KnowledgeGraph, kind: SeedKind) -> Result<SeedAlignment> {
    let mut all = SeedAlignment::empty(kind);
    for p in paths {
        all = all.merged_with(&staged("load", io::read_seeds(p, g_s, g_t, kind))?);
    }
    Ok(all)
}

/// Reads a matrix keeping every stored entry.
fn load_matrix(path: &Path, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<TopKSimilarityMatrix> {
    staged("load", io::read_matrix(path, g_s, g_t, g_t.entity_count().max(1)))
}

fn gen_bench(out: &Path, spec: &SyntheticSpec, seed_ratio: f64) -> Result<()> {
    let (g_s, g_t, truth) = staged("generate", generate_synthetic_benchmark(spec))?;
    let (train, test) = truth.split(seed_ratio, spec.rng_seed);
    let write = || -> kgalign::Result<()> {
        std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.into(), source: e })?;
        io::write_triples(&out.join("source.tsv"), &g_s)?;
        io::write_triples(&out.join("target.tsv"), &g_t)?;
        io::write_seeds(&out.join("truth.tsv"), &truth, &g_s, &g_t)?;
        io::write_seeds(&out.join("train.tsv"), &train, &g_s, &g_t)?;
        io::write_seeds(&out.join("test.tsv"), &test, &g_s, &g_t)
    };
    staged("write", write())?;
    println!("source_entities = {}", g_s.entity_count());
    println!("target_entities = {}", g_t.entity_count());
    println!("truth_pairs = {}", truth.len());
    println!("train_pairs = {}", train.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let t = &cli.tuning;
    let mut cfg = t.config()?;
    if let Some(n) = cfg.worker_cap() {
        // a second global init only happens in tests; the first cap wins
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::GenBench { out, entities, degree, communities, name_noise, structure_noise, unknown_ratio, min_anchors } => {
            let spec = SyntheticSpec {
                entities_per_side: entities,
                avg_degree: degree,
                community_count: communities,
                name_noise,
                structure_noise,
                unknown_entity_ratio: unknown_ratio,
                min_anchors,
                rng_seed: cfg.rng_seed,
                ..Default::default()
            };
            gen_bench(&out, &spec, cfg.seed_ratio)
        }
        Command::Partition { graphs, seeds, out, truth } => {
            let (g_s, g_t) = load_graphs(&graphs)?;
            let seeds = load_seeds(&seeds, &g_s, &g_t, SeedKind::TrainSeed)?;
            let batches = staged("partition", pipeline::make_batches(&g_s, &g_t, &seeds, &cfg))?;
            let (ps, pt) = batch_partitions(&batches, g_s.entity_count(), g_t.entity_count(), cfg.cps.imbalance);
            let expanded = staged("partition", expand_overlap(&g_s, &g_t, &batches, &seeds, &cfg.overlap))?;
            staged("write", io::write_batches(&out, &expanded, &g_s, &g_t))?;
            println!("batches = {}", expanded.len());
            println!("source_edge_cut_rate = {}", staged("partition", edge_cut_rate(&g_s, &ps))?);
            println!("target_edge_cut_rate = {}", staged("partition", edge_cut_rate(&g_t, &pt))?);
            if let Some(p) = truth {
                let truth = staged("load", io::read_seeds(&p, &g_s, &g_t, SeedKind::GroundTruth))?;
                println!("co_location_rate = {}", staged("partition", seed_colocation_rate(&expanded, &truth))?);
            }
            Ok(())
        }
        Command::NameSim { graphs, out } => {
            let (g_s, g_t) = load_graphs(&graphs)?;
            let embedder = staged("name", pipeline::load_embedder(&cfg.embedder))?;
            let m_n = staged("name", pipeline::name_channel(&g_s, &g_t, &embedder, &cfg.nff))?;
            staged("write", io::write_matrix(&out, &m_n, &g_s, &g_t))?;
            println!("entries = {}", m_n.nnz());
            Ok(())
        }
        Command::Augment { graphs, name_matrix, seeds, out, truth } => {
            let (g_s, g_t) = load_graphs(&graphs)?;
            let m_n = load_matrix(&name_matrix, &g_s, &g_t)?;
            let existing = load_seeds(&seeds, &g_s, &g_t, SeedKind::TrainSeed)?;
            let pseudo = augment_seeds(&m_n, &existing);
            staged("write", io::write_seeds(&out, &pseudo, &g_s, &g_t))?;
            println!("pseudo_seeds = {}", pseudo.len());
            if let Some(p) = truth {
                let truth = staged("load", io::read_seeds(&p, &g_s, &g_t, SeedKind::GroundTruth))?;
                println!("augmentation_precision = {}", staged("augment", augmentation_precision(&pseudo, &truth))?);
            }
            Ok(())
        }
        Command::Train { graphs, batches, seeds, out } => {
            let (g_s, g_t) = load_graphs(&graphs)?;
            let seeds = load_seeds(&seeds, &g_s, &g_t, SeedKind::TrainSeed)?;
            let members = staged("load", io::read_batches(&batches, &g_s, &g_t))?;
            let batches = io::batches_from_members(members, &g_s, &g_t, &seeds);
            let m_s =
                staged("train", pipeline::structure_channel(&batches, &cfg, g_s.entity_count(), g_t.entity_count()))?;
            staged("write", io::write_matrix(&out, &m_s, &g_s, &g_t))?;
            println!("entries = {}", m_s.nnz());
            Ok(())
        }
        Command::Fuse { graphs, structure, name, out, alignment } => {
            let (g_s, g_t) = load_graphs(&graphs)?;
            let fused = match (structure, name) {
                (Some(s), Some(n)) => {
                    staged("fuse", fuse_channels(&load_matrix(&s, &g_s, &g_t)?, &load_matrix(&n, &g_s, &g_t)?))?
                }
                (Some(p), None) | (None, Some(p)) => load_matrix(&p, &g_s, &g_t)?,
                (None, None) => bail!("fuse: give --structure, --name or both"),
            };
            staged("write", io::write_matrix(&out, &fused, &g_s, &g_t))?;
            if let Some(p) = alignment {
                staged("write", io::write_alignment(&p, &infer_alignment(&fused), &g_s, &g_t))?;
            }
            Ok(())
        }
        Command::Eval { graphs, matrix, truth, hits, report } => {
            let (g_s, g_t) = load_graphs(&graphs)?;
            let m = load_matrix(&matrix, &g_s, &g_t)?;
            let truth = staged("load", io::read_seeds(&truth, &g_s, &g_t, SeedKind::GroundTruth))?;
            let r = staged("evaluate", evaluate(&m, &truth, &hits))?;
            print!("{}", io::render_report(&r, &[]));
            if let Some(p) = report {
                staged("write", io::write_report(&p, &r, &[]))?;
            }
            Ok(())
        }
        Command::Run { source, target, truth, train_seeds, out } => {
            let tag = |e: Error| e.in_stage("config");
            for (key, value) in [("source", source), ("target", target), ("truth", truth), ("train-seeds", train_seeds), ("output", out)] {
                if let Some(v) = value {
                    cfg.set(key, &v.display().to_string()).map_err(tag)?;
                }
            }
            for (key, path) in [("source", &cfg.source_triples), ("target", &cfg.target_triples), ("truth", &cfg.truth)] {
                if path.as_os_str().is_empty() {
                    return Err(tag(Error::InvalidConfig(format!("missing `{key}` path"))).into());
                }
            }
            let g_s = staged("load", io::read_triples(&cfg.source_triples))?;
            let g_t = staged("load", io::read_triples(&cfg.target_triples))?;
            let (train, test) = staged("load", pipeline::load_seeds(&cfg, &g_s, &g_t))?;
            let output = pipeline::run_on_graphs(&g_s, &g_t, &train, &test, &cfg)?;
            if let Some(dir) = &cfg.output_dir {
                staged("write", pipeline::write_outputs(dir, &output, &g_s, &g_t))?;
            }
            print!("{}", io::render_report(&output.report, &output.extras));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgalign: error: {e}");
            ExitCode::FAILURE
        }
    }
}
