//! Plain-text readers and writers for graphs, seeds, batch assignments,
//! similarity matrices, alignments and reports. All files are UTF-8,
//! tab-separated, one record per line; blank lines and `#` comments are
//! skipped on input.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::align::EvaluationReport;
use crate::error::{Error, Result};
use crate::graph::{AlignmentMapping, EntityId, GraphBuilder, KnowledgeGraph, SeedAlignment, SeedKind};
use crate::partition::MiniBatch;
use crate::sparse::TopKSimilarityMatrix;

fn records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push((i + 1, line.split('\t').map(str::to_owned).collect()));
    }
    Ok(out)
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.into(), line, msg: msg.into() }
}

fn fields<'a>(path: &Path, line: usize, rec: &'a [String], n: usize) -> Result<&'a [String]> {
    if rec.len() != n {
        return Err(parse_err(path, line, format!("expected {n} tab-separated fields, got {}", rec.len())));
    }
    Ok(rec)
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn lookup(g: &KnowledgeGraph, label: &str, path: &Path, line: usize) -> Result<EntityId> {
    g.entity_id(label)
        .ok_or_else(|| parse_err(path, line, Error::UnknownLabel(label.to_owned()).to_string()))
}

/// `head<TAB>relation<TAB>tail`. A single-field line declares an entity
/// without triples.
pub fn read_triples(path: &Path) -> Result<KnowledgeGraph> {
    let mut b = GraphBuilder::new();
    for (line, rec) in records(path)? {
        match rec.as_slice() {
            [e] if !e.trim().is_empty() => {
                b.add_entity(e);
            }
            [h, r, t] if ![h, r, t].iter().any(|x| x.trim().is_empty()) => {
                b.add_triple(h, r, t);
            }
            _ => return Err(parse_err(path, line, "expected `head<TAB>relation<TAB>tail`")),
        }
    }
    b.build().map_err(|e| match e {
        Error::EmptyGraph => parse_err(path, 0, "no triples"),
        e => e,
    })
}

/// Writes triples in stored order, then entities that occur in no triple.
pub fn write_triples(path: &Path, g: &KnowledgeGraph) -> Result<()> {
    let mut w = writer(path)?;
    let mut covered = vec![false; g.entity_count()];
    for t in g.triples() {
        covered[t.head as usize] = true;
        covered[t.tail as usize] = true;
        let (h, r, tl) = g.triple_labels(t);
        writeln!(w, "{h}\t{r}\t{tl}").map_err(|e| Error::io(path, e))?;
    }
    for (e, _) in covered.iter().enumerate().filter(|(_, c)| !**c) {
        writeln!(w, "{}", g.entity_label(e as EntityId)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `source_label<TAB>target_label`.
pub fn read_seeds(path: &Path, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph, kind: SeedKind) -> Result<SeedAlignment> {
    let mut pairs = Vec::new();
    for (line, rec) in records(path)? {
        let f = fields(path, line, &rec, 2)?;
        pairs.push((lookup(g_s, &f[0], path, line)?, lookup(g_t, &f[1], path, line)?));
    }
    SeedAlignment::new(pairs, kind)
}

pub fn write_seeds(path: &Path, seeds: &SeedAlignment, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<()> {
    let mut w = writer(path)?;
    for (s, t) in seeds.iter() {
        writeln!(w, "{}\t{}", g_s.entity_label(s), g_t.entity_label(t)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Entity lists of one batch, as read back from an assignment file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchMembers {
    pub source: Vec<EntityId>,
    pub target: Vec<EntityId>,
}

/// `label<TAB>S|T<TAB>batch`; entities in several batches get several lines.
pub fn write_batches(path: &Path, batches: &[MiniBatch], g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<()> {
    let mut w = writer(path)?;
    for (i, b) in batches.iter().enumerate() {
        for &e in &b.source.entities {
            writeln!(w, "{}\tS\t{i}", g_s.entity_label(e)).map_err(|e| Error::io(path, e))?;
        }
        for &e in &b.target.entities {
            writeln!(w, "{}\tT\t{i}", g_t.entity_label(e)).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Members are returned sorted by id, indexed by batch number.
pub fn read_batches(path: &Path, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<Vec<BatchMembers>> {
    let mut out: Vec<BatchMembers> = Vec::new();
    for (line, rec) in records(path)? {
        let f = fields(path, line, &rec, 3)?;
        let batch: usize = f[2].parse().map_err(|_| parse_err(path, line, format!("bad batch index `{}`", f[2])))?;
        if out.len() <= batch {
            out.resize_with(batch + 1, BatchMembers::default);
        }
        match f[1].as_str() {
            "S" => out[batch].source.push(lookup(g_s, &f[0], path, line)?),
            "T" => out[batch].target.push(lookup(g_t, &f[0], path, line)?),
            side => return Err(parse_err(path, line, format!("side must be S or T, got `{side}`"))),
        }
    }
    for b in &mut out {
        b.source.sort_unstable();
        b.target.sort_unstable();
    }
    Ok(out)
}

/// Rebuilds mini-batches (with local seeds) from an assignment file.
pub fn batches_from_members(
    members: Vec<BatchMembers>,
    g_s: &KnowledgeGraph,
    g_t: &KnowledgeGraph,
    seeds: &SeedAlignment,
) -> Vec<MiniBatch> {
    members
        .into_iter()
        .enumerate()
        .map(|(i, m)| MiniBatch::assemble(i, g_s, g_t, m.source, m.target, seeds))
        .collect()
}

fn write_scored(path: &Path, rows: impl Iterator<Item = (EntityId, EntityId, f64)>, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<()> {
    let mut w = writer(path)?;
    for (s, t, v) in rows {
        writeln!(w, "{}\t{}\t{v}", g_s.entity_label(s), g_t.entity_label(t)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_scored(path: &Path, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<Vec<(EntityId, EntityId, f64)>> {
    records(path)?
        .into_iter()
        .map(|(line, rec)| {
            let f = fields(path, line, &rec, 3)?;
            let v: f64 = f[2].parse().map_err(|_| parse_err(path, line, format!("bad score `{}`", f[2])))?;
            Ok((lookup(g_s, &f[0], path, line)?, lookup(g_t, &f[1], path, line)?, v))
        })
        .collect()
}

/// `source_label<TAB>target_label<TAB>score`, rows in order.
pub fn write_matrix(path: &Path, m: &TopKSimilarityMatrix, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<()> {
    write_scored(path, m.entries(), g_s, g_t)
}

pub fn read_matrix(path: &Path, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph, k: usize) -> Result<TopKSimilarityMatrix> {
    let mut rows = vec![Vec::new(); g_s.entity_count()];
    for (s, t, v) in read_scored(path, g_s, g_t)? {
        rows[s as usize].push((t, v));
    }
    TopKSimilarityMatrix::from_rows(g_s.entity_count(), g_t.entity_count(), k, rows)
}

pub fn write_alignment(path: &Path, a: &AlignmentMapping, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<()> {
    write_scored(path, a.matches.iter().copied(), g_s, g_t)
}

pub fn read_alignment(path: &Path, g_s: &KnowledgeGraph, g_t: &KnowledgeGraph) -> Result<AlignmentMapping> {
    Ok(AlignmentMapping { matches: read_scored(path, g_s, g_t)? })
}

/// Renders a report as `key = value` lines. `extra` entries follow the
/// standard metrics in the given order.
pub fn render_report(r: &EvaluationReport, extra: &[(String, String)]) -> String {
    let mut s = String::new();
    for (n, v) in &r.hits_at {
        s.push_str(&format!("hits@{n} = {v}\n"));
    }
    s.push_str(&format!("mrr = {}\n", r.mrr));
    s.push_str(&format!("evaluated_pairs = {}\n", r.evaluated_pairs));
    if let Some(v) = r.co_location_rate {
        s.push_str(&format!("co_location_rate = {v}\n"));
    }
    if let Some(v) = r.edge_cut_rate {
        s.push_str(&format!("edge_cut_rate = {v}\n"));
    }
    for (k, v) in extra {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}

pub fn write_report(path: &Path, r: &EvaluationReport, extra: &[(String, String)]) -> Result<()> {
    std::fs::write(path, render_report(r, extra)).map_err(|e| Error::io(path, e))
}

/// Flat `key = value` file. Later keys override earlier ones.
pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| parse_err(path, i + 1, "expected `key = value`"))?;
        out.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(out)
}

/// Reads a report back; unknown keys are returned alongside.
pub fn read_report(path: &Path) -> Result<(EvaluationReport, BTreeMap<String, String>)> {
    let mut kv = read_key_values(path)?;
    let num = |v: &str| -> Result<f64> { v.parse().map_err(|_| parse_err(path, 0, format!("bad number `{v}`"))) };
    let mut hits_at = BTreeMap::new();
    for key in kv.keys().filter(|k| k.starts_with("hits@")).cloned().collect::<Vec<_>>() {
        let n: usize = key[5..].parse().map_err(|_| parse_err(path, 0, format!("bad key `{key}`")))?;
        hits_at.insert(n, num(&kv.remove(&key).unwrap_or_default())?);
    }
    let mrr = num(&kv.remove("mrr").ok_or_else(|| parse_err(path, 0, "missing mrr"))?)?;
    let evaluated_pairs = kv
        .remove("evaluated_pairs")
        .ok_or_else(|| parse_err(path, 0, "missing evaluated_pairs"))?
        .parse()
        .map_err(|_| parse_err(path, 0, "bad evaluated_pairs"))?;
    let co_location_rate = kv.remove("co_location_rate").map(|v| num(&v)).transpose()?;
    let edge_cut_rate = kv.remove("edge_cut_rate").map(|v| num(&v)).transpose()?;
    Ok((EvaluationReport { hits_at, mrr, evaluated_pairs, co_location_rate, edge_cut_rate }, kv))
}
