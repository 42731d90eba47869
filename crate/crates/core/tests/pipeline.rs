mod common;

use std::collections::BTreeMap;

use common::checks::*;
use kgalign::graph::{SeedAlignment, SeedKind};
use kgalign::io::{read_alignment, read_report, read_triples, render_report, write_seeds, write_triples};
use kgalign::partition::MiniBatch;
use kgalign::pipeline::*;
use kgalign::structure::{check_block_diagonal, GnnConfig, TripletConfig};
use kgalign::synth::{generate_synthetic_benchmark, SyntheticSpec};
use kgalign::Error;

fn small(seed: u64) -> SyntheticSpec {
    SyntheticSpec { entities_per_side: 400, community_count: 5, rng_seed: seed, ..Default::default() }
}

fn quick(cfg: &mut PipelineConfig) {
    cfg.gnn = GnnConfig { dim: 32, ..Default::default() };
    cfg.triplet = TripletConfig { epochs: 30, ..Default::default() };
    cfg.k = 3;
}

fn stage_of(e: &Error) -> Option<&'static str> {
    match e {
        Error::Stage { stage, .. } => Some(stage),
        _ => None,
    }
}

#[test]
fn noise_free_benchmark_is_solved() {
    let spec = SyntheticSpec { structure_noise: 0.0, ..small(1) };
    let out = run_benchmark(&spec, quick);
    assert!(out.report.hits(1).unwrap() >= 0.99, "{:?}", out.report);
    assert!(out.report.mrr >= out.report.hits(1).unwrap());
    assert!(out.report.co_location_rate.is_some() && out.report.edge_cut_rate.is_some());
}

#[test]
fn reruns_are_byte_identical() {
    let spec = SyntheticSpec { name_noise: 0.3, ..small(2) };
    let a = run_benchmark(&spec, quick);
    let b = run_benchmark(&spec, quick);
    assert_eq!(render_report(&a.report, &a.extras), render_report(&b.report, &b.extras));
    assert_eq!(a.fused, b.fused);
}

#[test]
fn single_worker_matches_default_pool() {
    let spec = SyntheticSpec { name_noise: 0.3, ..small(3) };
    let a = run_benchmark(&spec, quick);
    let b = run_benchmark(&spec, |c| {
        quick(c);
        c.workers = Some(1);
    });
    assert_eq!(a.fused, b.fused);
}

#[test]
fn one_part_equals_whole_graph_training() {
    let spec = SyntheticSpec { name_noise: 0.3, ..small(4) };
    let (gs, gt, truth) = generate_synthetic_benchmark(&spec).unwrap();
    let (train, test) = truth.split(0.2, 4);
    let mut cfg = PipelineConfig { rng_seed: 4, ..Default::default() };
    quick(&mut cfg);
    cfg.k = 1;
    let out = run_on_graphs(&gs, &gt, &train, &test, &cfg).unwrap();
    let seeds = train.merged_with(&out.pseudo_seeds.clone().with_kind(SeedKind::TrainSeed));
    let whole = vec![MiniBatch::whole(&gs, &gt, &seeds)];
    assert_eq!(out.batches, whole);
    let m_s = structure_channel(&whole, &cfg, gs.entity_count(), gt.entity_count()).unwrap();
    assert_eq!(out.m_s.as_ref(), Some(&m_s));
    assert_eq!(out.report.co_location_rate, Some(1.0));
    assert_eq!(out.report.edge_cut_rate, Some(0.0));
}

#[test]
fn structure_matrix_is_block_diagonal() {
    let spec = SyntheticSpec { name_noise: 0.3, ..small(5) };
    let out = run_benchmark(&spec, quick);
    let m_s = out.m_s.unwrap();
    assert!(m_s.nnz() > 0 && m_s.nnz() <= m_s.k() * m_s.n_source());
    check_block_diagonal(&m_s, &out.batches).unwrap();
    // a single foreign entry breaks the invariant
    let mut rows = m_s.rows().to_vec();
    let s = out.batches[0].source.entities[0];
    let t = out.batches[1].target.entities[0];
    rows[s as usize].push((t, 0.5));
    let broken = kgalign::TopKSimilarityMatrix::from_rows(m_s.n_source(), m_s.n_target(), m_s.k() + 1, rows).unwrap();
    assert!(check_block_diagonal(&broken, &out.batches).is_err());
}

#[test]
fn ablations_drop_the_right_channel() {
    let spec = SyntheticSpec { name_noise: 0.3, ..small(6) };
    let no_name = run_benchmark(&spec, |c| {
        quick(c);
        c.ablation = Ablation::Name;
    });
    assert!(no_name.m_n.is_none() && no_name.pseudo_seeds.is_empty());
    assert_eq!(no_name.m_s.as_ref(), Some(&no_name.fused));
    let no_structure = run_benchmark(&spec, |c| {
        quick(c);
        c.ablation = Ablation::Structure;
    });
    assert!(no_structure.m_s.is_none() && no_structure.batches.is_empty());
    assert_eq!(no_structure.m_n.as_ref(), Some(&no_structure.fused));
    assert!(no_structure.report.co_location_rate.is_none());
}

#[test]
fn unsupervised_mode_runs_on_pseudo_seeds() {
    let spec = SyntheticSpec { name_noise: 0.2, ..small(7) };
    let out = run_benchmark(&spec, |c| {
        quick(c);
        c.unsupervised = true;
    });
    assert!(!out.pseudo_seeds.is_empty());
    assert!(extra(&out, "augmentation_precision") > 0.8);
    assert!(out.report.hits(1).unwrap() > 0.5);
}

#[test]
fn errors_carry_their_stage() {
    let spec = small(8);
    let (gs, gt, truth) = generate_synthetic_benchmark(&spec).unwrap();
    let (train, test) = truth.split(0.2, 8);

    let bad = PipelineConfig { seed_ratio: 1.5, ..Default::default() };
    assert_eq!(stage_of(&run_on_graphs(&gs, &gt, &train, &test, &bad).unwrap_err()), Some("config"));

    let cfg = PipelineConfig { k: 5000, ..Default::default() };
    assert_eq!(stage_of(&run_on_graphs(&gs, &gt, &train, &test, &cfg).unwrap_err()), Some("partition"));

    let empty = SeedAlignment::empty(SeedKind::GroundTruth);
    let cfg = PipelineConfig::default();
    assert_eq!(stage_of(&run_on_graphs(&gs, &gt, &train, &empty, &cfg).unwrap_err()), Some("evaluate"));

    let cfg = PipelineConfig { source_triples: "/nonexistent/s.tsv".into(), ..Default::default() };
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(stage_of(&err), Some("load"));
    assert!(err.to_string().starts_with("load: "));

    let missing = PipelineConfig { embedder: EmbedderSource::TokenFile("/nonexistent/e.txt".into()), ..Default::default() };
    assert_eq!(stage_of(&run_on_graphs(&gs, &gt, &train, &test, &missing).unwrap_err()), Some("name"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(
        &path,
        "# run settings\nsource = a.tsv\ntarget = b.tsv\ntruth = t.tsv\nk = 7\nstrategy = vps\ngamma_fusion = 0.2\n\
         minhash-perms = 64\nunsupervised = true\nablate = name\nd_ov = 2\nname-dim = 32\nworkers = 2\nseed = 9\n",
    )
    .unwrap();
    let cfg = PipelineConfig::from_file(&path).unwrap();
    assert_eq!(cfg.k, 7);
    assert_eq!(cfg.cps.k, 7);
    assert_eq!(cfg.strategy, Strategy::Vps);
    assert_eq!(cfg.nff.gamma_fusion, 0.2);
    assert_eq!(cfg.nff.minhash_perms, 64);
    assert!(cfg.unsupervised);
    assert_eq!(cfg.ablation, Ablation::Name);
    assert_eq!(cfg.overlap.d_ov, 2);
    assert_eq!(cfg.embedder, EmbedderSource::Hashing { dim: 32 });
    assert_eq!(cfg.worker_cap(), Some(2));
    assert_eq!(cfg.rng_seed, 9);
    assert_eq!(cfg.source_triples.to_str(), Some("a.tsv"));

    let mut cfg = cfg;
    let overrides: BTreeMap<String, String> = [("theta".into(), "0.7".into()), ("phi".into(), "20".into())].into();
    apply_overrides(&mut cfg, &overrides).unwrap();
    assert_eq!((cfg.nff.theta, cfg.nff.phi), (0.7, 20));

    std::fs::write(&path, "colour = blue\n").unwrap();
    assert!(PipelineConfig::from_file(&path).is_err());
    std::fs::write(&path, "k = many\n").unwrap();
    assert!(PipelineConfig::from_file(&path).is_err());
}

#[test]
fn file_run_writes_readable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (gs, gt, truth) = generate_synthetic_benchmark(&SyntheticSpec { name_noise: 0.2, ..small(9) }).unwrap();
    let p = |n: &str| dir.path().join(n);
    write_triples(&p("s.tsv"), &gs).unwrap();
    write_triples(&p("t.tsv"), &gt).unwrap();
    write_seeds(&p("truth.tsv"), &truth, &gs, &gt).unwrap();
    let mut cfg = PipelineConfig {
        source_triples: p("s.tsv"),
        target_triples: p("t.tsv"),
        truth: p("truth.tsv"),
        output_dir: Some(p("out")),
        rng_seed: 9,
        ..Default::default()
    };
    quick(&mut cfg);
    let (mapping, report) = run_pipeline(&cfg).unwrap();
    let (gs2, gt2) = (read_triples(&p("s.tsv")).unwrap(), read_triples(&p("t.tsv")).unwrap());
    let (back, extras) = read_report(&p("out/report.txt")).unwrap();
    assert_eq!(back, report);
    assert!(extras.contains_key("pseudo_seeds") && extras.contains_key("structure_hits@1"));
    assert_eq!(read_alignment(&p("out/alignment.tsv"), &gs2, &gt2).unwrap(), mapping);
    for f in ["pseudo_seeds.tsv", "fused.tsv", "batches.tsv"] {
        assert!(p("out").join(f).exists(), "{f}");
    }
    assert!(report.hits(1).unwrap() > 0.5);
}
