//! End-to-end orchestration: name channel, augmentation, partitioning,
//! per-batch structural training, fusion and evaluation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::align::{augment_seeds, augmentation_precision, evaluate, fuse_channels, infer_alignment, EvaluationReport};
use crate::error::{Error, Result};
use crate::graph::{AlignmentMapping, KnowledgeGraph, SeedAlignment, SeedKind};
use crate::io;
use crate::name::{embed_names, lsh_candidates, nff_fuse, semantic_topk, string_similarity_matrix, NameEmbedder, NffConfig};
use crate::partition::{
    batch_partitions, edge_cut_rate, expand_overlap, metis_cps, seed_colocation_rate, vps, CpsConfig, MiniBatch,
    OverlapConfig,
};
use crate::sparse::TopKSimilarityMatrix;
use crate::structure::{
    check_block_diagonal, structure_similarity, train_all, Activation, GnnConfig, MeanAggregationModel, TripletConfig,
};

/// Environment variable that caps worker threads when no explicit cap is set.
pub const WORKERS_ENV: &str = "KGALIGN_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Vps,
    MetisCps,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vps" => Ok(Strategy::Vps),
            "metis-cps" | "cps" => Ok(Strategy::MetisCps),
            _ => Err(Error::InvalidConfig(format!("unknown strategy `{s}` (vps | metis-cps)"))),
        }
    }
}

/// Channel removed from the final matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    None,
    /// Structure channel only; no name similarity and no augmentation.
    Name,
    /// Name channel only.
    Structure,
}

impl FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "name" => Ok(Ablation::Name),
            "structure" => Ok(Ablation::Structure),
            _ => Err(Error::InvalidConfig(format!("unknown ablation `{s}` (none | name | structure)"))),
        }
    }
}

/// Where name embeddings come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbedderSource {
    Hashing { dim: usize },
    TokenFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub source_triples: PathBuf,
    pub target_triples: PathBuf,
    /// When absent, train seeds are split off `truth` at `seed_ratio`.
    pub train_seeds: Option<PathBuf>,
    pub truth: PathBuf,
    pub output_dir: Option<PathBuf>,
    pub k: usize,
    pub seed_ratio: f64,
    pub strategy: Strategy,
    pub cps: CpsConfig,
    pub gnn: GnnConfig,
    pub triplet: TripletConfig,
    pub nff: NffConfig,
    pub overlap: OverlapConfig,
    pub embedder: EmbedderSource,
    /// Candidates kept per row of the structural matrix.
    pub top_k: usize,
    pub unsupervised: bool,
    pub ablation: Ablation,
    pub workers: Option<usize>,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            source_triples: PathBuf::new(),
            target_triples: PathBuf::new(),
            train_seeds: None,
            truth: PathBuf::new(),
            output_dir: None,
            k: 5,
            seed_ratio: 0.2,
            strategy: Strategy::MetisCps,
            cps: CpsConfig::default(),
            gnn: GnnConfig::default(),
            triplet: TripletConfig::default(),
            nff: NffConfig::default(),
            overlap: OverlapConfig::default(),
            embedder: EmbedderSource::Hashing { dim: 256 },
            top_k: 50,
            unsupervised: false,
            ablation: Ablation::None,
            workers: None,
            rng_seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("bad boolean `{value}` for `{key}`"))),
    }
}

impl PipelineConfig {
    /// Sets one option by its config-file key (the CLI flag name without dashes).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('_', "-");
        let v = value;
        match key.as_str() {
            "source" => self.source_triples = v.into(),
            "target" => self.target_triples = v.into(),
            "train-seeds" => self.train_seeds = Some(v.into()),
            "truth" => self.truth = v.into(),
            "output" => self.output_dir = Some(v.into()),
            "k" => {
                self.k = parse(&key, v)?;
                self.cps.k = self.k;
            }
            "seed-ratio" => self.seed_ratio = parse(&key, v)?,
            "strategy" => self.strategy = v.parse()?,
            "w-prime" => self.cps.w_prime = parse(&key, v)?,
            "q" => self.cps.q = parse(&key, v)?,
            "imbalance" => self.cps.imbalance = parse(&key, v)?,
            "layers" => self.gnn.layers = parse(&key, v)?,
            "dim" => self.gnn.dim = parse(&key, v)?,
            "activation" => {
                self.gnn.activation = match v {
                    "tanh" => Activation::Tanh,
                    "identity" => Activation::Identity,
                    _ => return Err(Error::InvalidConfig(format!("unknown activation `{v}`"))),
                }
            }
            "margin" => self.triplet.margin = parse(&key, v)?,
            "negatives" => self.triplet.negatives_per_pair = parse(&key, v)?,
            "epochs" => self.triplet.epochs = parse(&key, v)?,
            "learning-rate" | "lr" => self.triplet.learning_rate = parse(&key, v)?,
            "resample-every" => self.triplet.resample_every = parse(&key, v)?,
            "theta" => self.nff.theta = parse(&key, v)?,
            "phi" => self.nff.phi = parse(&key, v)?,
            "gamma-fusion" => self.nff.gamma_fusion = parse(&key, v)?,
            "segments" => self.nff.segments = parse(&key, v)?,
            "minhash-perms" => self.nff.minhash_perms = parse(&key, v)?,
            "embedder" => {
                self.embedder = match v {
                    "hash" => EmbedderSource::Hashing { dim: 256 },
                    _ => return Err(Error::InvalidConfig("use `embeddings = <file>` for file-backed names".into())),
                }
            }
            "name-dim" => self.embedder = EmbedderSource::Hashing { dim: parse(&key, v)? },
            "embeddings" => self.embedder = EmbedderSource::TokenFile(v.into()),
            "d-ov" => self.overlap.d_ov = parse(&key, v)?,
            "top-k" => self.top_k = parse(&key, v)?,
            "unsupervised" => self.unsupervised = parse_bool(&key, v)?,
            "ablate" => self.ablation = v.parse()?,
            "workers" => self.workers = Some(parse(&key, v)?),
            "seed" | "rng-seed" => self.rng_seed = parse(&key, v)?,
            _ => return Err(Error::InvalidConfig(format!("unknown option `{key}`"))),
        }
        Ok(())
    }

    /// Defaults overridden by a flat `key = value` file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in io::read_key_values(path)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.seed_ratio > 0.0 && self.seed_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!("seed_ratio must be in (0, 1), got {}", self.seed_ratio)));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        CpsConfig { k: self.k, ..self.cps.clone() }.validate()?;
        self.triplet.validate()?;
        self.nff.validate()?;
        if self.overlap.d_ov == 0 || self.overlap.d_ov > self.k {
            return Err(Error::InvalidOverlap { d_ov: self.overlap.d_ov, k: self.k });
        }
        Ok(())
    }

    /// Explicit cap, else the environment override.
    pub fn worker_cap(&self) -> Option<usize> {
        self.workers.or_else(|| std::env::var(WORKERS_ENV).ok()?.parse().ok().filter(|&n| n > 0))
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub mapping: AlignmentMapping,
    pub report: EvaluationReport,
    /// Extra report lines (channel-wise scores, augmentation statistics).
    pub extras: Vec<(String, String)>,
    pub pseudo_seeds: SeedAlignment,
    /// Batches before overlap expansion; empty when the structure channel is ablated.
    pub batches: Vec<MiniBatch>,
    pub m_s: Option<TopKSimilarityMatrix>,
    pub m_n: Option<TopKSimilarityMatrix>,
    pub fused: TopKSimilarityMatrix,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

pub fn load_embedder(src: &EmbedderSource) -> Result<NameEmbedder> {
    match src {
        EmbedderSource::Hashing { dim } if *dim > 0 => Ok(NameEmbedder::hashing(*dim)),
        EmbedderSource::Hashing { .. } => Err(Error::InvalidConfig("name embedding dimension must be >= 1".into())),
        EmbedderSource::TokenFile(p) => NameEmbedder::from_token_file(p),
    }
}

fn labels(g: &KnowledgeGraph) -> &[String] {
    g.entities().labels()
}

/// Name-channel matrix `M_n` over entity labels.
pub fn name_channel(
    g_s: &KnowledgeGraph,
    g_t: &KnowledgeGraph,
    embedder: &NameEmbedder,
    nff: &NffConfig,
) -> Result<TopKSimilarityMatrix> {
    nff.validate()?;
    let (src, tgt) = (labels(g_s), labels(g_t));
    let m_se = semantic_topk(&embed_names(src, embedder, nff.epsilon), &embed_names(tgt, embedder, nff.epsilon), nff)?;
    let candidates = lsh_candidates(src, tgt, nff);
    log::info!("name channel: {} string candidates", candidates.len());
    let m_st = string_similarity_matrix(&candidates, src, tgt, nff.phi)?;
    nff_fuse(&m_se, &m_st, nff)
}

/// Disjoint batches for the chosen strategy.
pub fn make_batches(
    g_s: &KnowledgeGraph,
    g_t: &KnowledgeGraph,
    seeds: &SeedAlignment,
    cfg: &PipelineConfig,
) -> Result<Vec<MiniBatch>> {
    match cfg.strategy {
        Strategy::Vps => vps(g_s, g_t, seeds, cfg.k, cfg.rng_seed),
        Strategy::MetisCps => metis_cps(g_s, g_t, seeds, &CpsConfig { k: cfg.k, ..cfg.cps.clone() }, cfg.rng_seed),
    }
}

/// Trains every batch and assembles the block-diagonal `M_s`, checking the
/// same-batch and storage invariants.
pub fn structure_channel(
    batches: &[MiniBatch],
    cfg: &PipelineConfig,
    n_source: usize,
    n_target: usize,
) -> Result<TopKSimilarityMatrix> {
    let model = MeanAggregationModel { gnn: cfg.gnn.clone(), triplet: cfg.triplet.clone() };
    let trained = train_all(&model, batches, cfg.rng_seed)?;
    let embs: Vec<_> = trained.into_iter().map(|t| t.embeddings).collect();
    let m_s = structure_similarity(batches, &embs, cfg.top_k, n_source, n_target)?;
    check_block_diagonal(&m_s, batches)?;
    Ok(m_s)
}

/// Edge-cut rate over both graphs together.
fn joint_edge_cut(g_s: &KnowledgeGraph, g_t: &KnowledgeGraph, batches: &[MiniBatch], imbalance: f64) -> Result<f64> {
    let (ps, pt) = batch_partitions(batches, g_s.entity_count(), g_t.entity_count(), imbalance);
    let (es, et) = (g_s.edge_count() as f64, g_t.edge_count() as f64);
    if es + et == 0.0 {
        return Ok(0.0);
    }
    Ok((edge_cut_rate(g_s, &ps)? * es + edge_cut_rate(g_t, &pt)? * et) / (es + et))
}

/// Runs all stages on in-memory inputs. `train` is ignored in unsupervised mode.
pub fn run_on_graphs(
    g_s: &KnowledgeGraph,
    g_t: &KnowledgeGraph,
    train: &SeedAlignment,
    test: &SeedAlignment,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    stage("config", cfg.validate())?;
    let run = || run_stages(g_s, g_t, train, test, cfg);
    match cfg.worker_cap() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")).in_stage("config"))?;
            pool.install(run)
        }
        None => run(),
    }
}

fn run_stages(
    g_s: &KnowledgeGraph,
    g_t: &KnowledgeGraph,
    train: &SeedAlignment,
    test: &SeedAlignment,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    let (ns, nt) = (g_s.entity_count(), g_t.entity_count());
    stage("seeds", train.validate(g_s, g_t).and_then(|_| test.validate(g_s, g_t)))?;
    // precision is always judged against every known pair, even the discarded ones
    let full_truth = train.merged_with(test);
    let train = if cfg.unsupervised { SeedAlignment::empty(SeedKind::TrainSeed) } else { train.clone() };
    let mut extras: Vec<(String, String)> = Vec::new();

    let m_n = if cfg.ablation == Ablation::Name {
        None
    } else {
        let embedder = stage("name", load_embedder(&cfg.embedder))?;
        Some(stage("name", name_channel(g_s, g_t, &embedder, &cfg.nff))?)
    };

    let pseudo = match &m_n {
        Some(m) => augment_seeds(m, &train),
        None => SeedAlignment::empty(SeedKind::PseudoSeed),
    };
    extras.push(("pseudo_seeds".into(), pseudo.len().to_string()));
    if !pseudo.is_empty() {
        let p = stage("augment", augmentation_precision(&pseudo, &full_truth))?;
        extras.push(("augmentation_precision".into(), p.to_string()));
    }
    let seeds = train.merged_with(&pseudo.clone().with_kind(SeedKind::TrainSeed));
    if seeds.is_empty() && cfg.ablation != Ablation::Structure {
        log::warn!("no training seeds: structural embeddings stay untrained");
    }

    let (batches, m_s) = if cfg.ablation == Ablation::Structure {
        (Vec::new(), None)
    } else {
        let batches = stage("partition", make_batches(g_s, g_t, &seeds, cfg))?;
        let expanded = stage("partition", expand_overlap(g_s, g_t, &batches, &seeds, &cfg.overlap))?;
        let m_s = stage("train", structure_channel(&expanded, cfg, ns, nt))?;
        (batches, Some(m_s))
    };

    let fused = stage(
        "fuse",
        match (&m_s, &m_n) {
            (Some(a), Some(b)) => fuse_channels(a, b),
            (Some(a), None) => Ok(a.clone()),
            (None, Some(b)) => Ok(b.clone()),
            (None, None) => unreachable!("at most one channel is ablated"),
        },
    )?;

    let ns_eval = [1, 5];
    let mut report = stage("evaluate", evaluate(&fused, test, &ns_eval))?;
    if !batches.is_empty() {
        report.co_location_rate = Some(stage("evaluate", seed_colocation_rate(&batches, test))?);
        report.edge_cut_rate = Some(stage("evaluate", joint_edge_cut(g_s, g_t, &batches, cfg.cps.imbalance))?);
    }
    for (tag, m) in [("structure", &m_s), ("name", &m_n)] {
        if let Some(m) = m {
            let r = stage("evaluate", evaluate(m, test, &ns_eval))?;
            extras.push((format!("{tag}_hits@1"), r.hits(1).unwrap_or(0.0).to_string()));
            extras.push((format!("{tag}_mrr"), r.mrr.to_string()));
        }
    }
    Ok(PipelineOutput {
        mapping: infer_alignment(&fused),
        report,
        extras,
        pseudo_seeds: pseudo,
        batches,
        m_s,
        m_n,
        fused,
    })
}

/// Train/test seeds from the configured files.
pub fn load_seeds(cfg: &PipelineConfig, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<(SeedAlignment, SeedAlignment)> {
    let truth = io::read_seeds(&cfg.truth, g_s, g_t, SeedKind::GroundTruth)?;
    match &cfg.train_seeds {
        Some(p) => Ok((io::read_seeds(p, g_s, g_t, SeedKind::TrainSeed)?, truth)),
        None => Ok(truth.split(cfg.seed_ratio, cfg.rng_seed)),
    }
}

/// Loads the configured files, runs every stage and writes outputs when an
/// output directory is set.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(AlignmentMapping, EvaluationReport)> {
    stage("config", cfg.validate())?;
    let g_s = stage("load", io::read_triples(&cfg.source_triples))?;
    let g_t = stage("load", io::read_triples(&cfg.target_triples))?;
    let (train, test) = stage("load", load_seeds(cfg, &g_s, &g_t))?;
    let out = run_on_graphs(&g_s, &g_t, &train, &test, cfg)?;
    if let Some(dir) = &cfg.output_dir {
        stage("write", write_outputs(dir, &out, &g_s, &g_t))?;
    }
    Ok((out.mapping, out.report))
}

pub fn write_outputs(dir: &Path, out: &PipelineOutput, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_alignment(&dir.join("alignment.tsv"), &out.mapping, g_s, g_t)?;
    io::write_report(&dir.join("report.txt"), &out.report, &out.extras)?;
    io::write_seeds(&dir.join("pseudo_seeds.tsv"), &out.pseudo_seeds, g_s, g_t)?;
    io::write_matrix(&dir.join("fused.tsv"), &out.fused, g_s, g_t)?;
    if !out.batches.is_empty() {
        io::write_batches(&dir.join("batches.tsv"), &out.batches, g_s, g_t)?;
    }
    Ok(())
}

/// Parses `key=value` overrides on top of a config.
pub fn apply_overrides(cfg: &mut PipelineConfig, overrides: &BTreeMap<String, String>) -> Result<()> {
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    Ok(())
}
