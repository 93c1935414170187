//! Intrinsic evaluation: word similarity (Spearman), proportional analogy
//! (PairDiff accuracy) and concept categorization (k-means cluster purity).
//!
//! Benchmark words are looked up exactly first and lowercased second. Items with
//! an out-of-vocabulary word are skipped and show up in the coverage column.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{AnalogyBenchmark, Benchmark, BenchmarkKind, CategorizationBenchmark, EmbeddingSet, SimilarityBenchmark};

pub const KMEANS_MAX_ITERS: usize = 300;
pub const KMEANS_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub dataset: String,
    pub task: BenchmarkKind,
    /// Spearman ρ×100, accuracy % or purity %.
    pub score: f64,
    /// Fraction of benchmark items whose words are all in the vocabulary.
    pub coverage: f64,
    /// Items actually scored.
    pub n_items: usize,
    pub total_items: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
}

impl EvalReport {
    pub const TSV_HEADER: &'static str = "dataset\ttask\tscore\tcoverage\tn_items";

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{}\n", Self::TSV_HEADER);
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{}",
                r.dataset,
                r.task.as_str(),
                r.score,
                r.coverage,
                r.n_items
            );
        }
        out
    }
}

/// Aligned text table, one row per dataset and one score column per labelled report.
pub fn format_table(columns: &[(String, EvalReport)]) -> String {
    let mut rows: Vec<(&str, &str)> = Vec::new();
    for (_, report) in columns {
        for r in &report.records {
            if !rows.iter().any(|(d, _)| *d == r.dataset) {
                rows.push((&r.dataset, r.task.as_str()));
            }
        }
    }
    let name_width = rows.iter().map(|r| r.0.len()).chain(["dataset".len()]).max().unwrap_or(7);
    let col_width = columns.iter().map(|c| c.0.len()).chain([8]).max().unwrap_or(8);
    let mut out = String::new();
    let _ = write!(out, "{:<name_width$}  {:<14}", "dataset", "task");
    for (label, _) in columns {
        let _ = write!(out, "  {label:>col_width$}");
    }
    out.push('\n');
    for (dataset, task) in rows {
        let _ = write!(out, "{dataset:<name_width$}  {task:<14}");
        for (_, report) in columns {
            match report.records.iter().find(|r| r.dataset == dataset) {
                Some(r) => {
                    let _ = write!(out, "  {:>col_width$.1}", r.score);
                }
                None => {
                    let _ = write!(out, "  {:>col_width$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Exact match first, lowercase fallback second.
pub fn resolve(set: &EmbeddingSet, word: &str) -> Option<usize> {
    set.position(word).or_else(|| {
        let lower = word.to_lowercase();
        (lower != word).then(|| set.position(&lower)).flatten()
    })
}

/// Ranks starting at 1, ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(pred: &[f64], gold: &[f64]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::arg(format!("length mismatch: {} vs {}", pred.len(), gold.len())));
    }
    if pred.len() < 2 {
        return Err(Error::arg("spearman needs at least two observations"));
    }
    pearson(&average_ranks(pred), &average_ranks(gold))
        .ok_or_else(|| Error::Eval("correlation undefined for constant input".into()))
}

/// z-score for the difference of two correlations measured on `n` items each.
pub fn fisher_z(r1: f64, r2: f64, n: usize) -> Result<f64> {
    if n <= 3 {
        return Err(Error::arg("Fisher transformation needs more than 3 items"));
    }
    if r1.abs() >= 1.0 || r2.abs() >= 1.0 {
        return Err(Error::arg("correlations must lie strictly inside (-1, 1)"));
    }
    Ok((r1.atanh() - r2.atanh()) / (2.0 / (n as f64 - 3.0)).sqrt())
}

fn cosine(a: DVectorView<'_, f64>, b: DVectorView<'_, f64>) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        a.dot(&b) / denom
    }
}

pub fn eval_similarity(set: &EmbeddingSet, name: &str, bench: &SimilarityBenchmark) -> Result<EvalRecord> {
    let scored: Vec<Option<(f64, f64)>> = bench
        .pairs
        .par_iter()
        .map(|pair| {
            let i = resolve(set, &pair.first)?;
            let j = resolve(set, &pair.second)?;
            Some((cosine(set.matrix().column(i), set.matrix().column(j)), pair.score))
        })
        .collect();
    let (pred, gold): (Vec<f64>, Vec<f64>) = scored.into_iter().flatten().unzip();
    if pred.len() < 2 {
        return Err(Error::Eval(format!(
            "{name}: only {} in-vocabulary pairs, need at least 2",
            pred.len()
        )));
    }
    let rho = spearman(&pred, &gold).map_err(|e| match e {
        Error::Eval(msg) => Error::Eval(format!("{name}: {msg}")),
        other => other,
    })?;
    Ok(EvalRecord {
        dataset: name.to_owned(),
        task: BenchmarkKind::Similarity,
        score: 100.0 * rho,
        coverage: pred.len() as f64 / bench.pairs.len() as f64,
        n_items: pred.len(),
        total_items: bench.pairs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalogyOptions {
    /// Remove `a`, `b` and `c` from the candidate set.
    pub exclude_query: bool,
}

impl Default for AnalogyOptions {
    fn default() -> Self {
        Self { exclude_query: true }
    }
}

/// PairDiff: `argmax_w cos(x_b - x_a, x_w - x_c)` over the vocabulary. Candidates
/// with `x_w = x_c` are skipped. Returns `None` for an empty candidate set.
pub fn pairdiff_predict(set: &EmbeddingSet, a: usize, b: usize, c: usize, options: AnalogyOptions) -> Option<usize> {
    let m = set.matrix();
    let target = m.column(b) - m.column(a);
    let target_norm = target.norm();
    let xc = m.column(c);
    let mut best: Option<(usize, f64)> = None;
    let mut diff = DVector::zeros(m.nrows());
    for w in 0..set.len() {
        if options.exclude_query && (w == a || w == b || w == c) {
            continue;
        }
        diff.copy_from(&m.column(w));
        diff -= &xc;
        let dn = diff.norm();
        if dn == 0.0 {
            continue;
        }
        let score = if target_norm == 0.0 { 0.0 } else { target.dot(&diff) / (target_norm * dn) };
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((w, score));
        }
    }
    best.map(|(w, _)| w)
}

/// Per-question predictions in benchmark order; `None` when a word is out of vocabulary
/// or no candidate remains.
pub fn pairdiff_predictions(set: &EmbeddingSet, bench: &AnalogyBenchmark, options: AnalogyOptions) -> Vec<Option<usize>> {
    bench
        .questions
        .par_iter()
        .map(|q| {
            let a = resolve(set, &q.a)?;
            let b = resolve(set, &q.b)?;
            let c = resolve(set, &q.c)?;
            resolve(set, &q.d)?;
            pairdiff_predict(set, a, b, c, options)
        })
        .collect()
}

pub fn eval_analogy_pairdiff(
    set: &EmbeddingSet,
    name: &str,
    bench: &AnalogyBenchmark,
    options: AnalogyOptions,
) -> Result<EvalRecord> {
    let outcomes: Vec<Option<Option<bool>>> = bench
        .questions
        .par_iter()
        .map(|q| {
            let a = resolve(set, &q.a)?;
            let b = resolve(set, &q.b)?;
            let c = resolve(set, &q.c)?;
            let d = resolve(set, &q.d)?;
            Some(pairdiff_predict(set, a, b, c, options).map(|w| w == d))
        })
        .collect();
    let evaluated: Vec<Option<bool>> = outcomes.into_iter().flatten().collect();
    if evaluated.iter().any(Option::is_none) {
        return Err(Error::Eval(format!("{name}: empty effective vocabulary for analogy candidates")));
    }
    let total = bench.questions.len();
    let correct = evaluated.iter().filter(|o| **o == Some(true)).count();
    let score = if evaluated.is_empty() {
        0.0
    } else {
        100.0 * correct as f64 / evaluated.len() as f64
    };
    Ok(EvalRecord {
        dataset: name.to_owned(),
        task: BenchmarkKind::Analogy,
        score,
        coverage: if total == 0 { 0.0 } else { evaluated.len() as f64 / total as f64 },
        n_items: evaluated.len(),
        total_items: total,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub wcss: f64,
    /// WCSS after each Lloyd iteration of the winning restart.
    pub history: Vec<f64>,
}

fn sq_dist(a: DVectorView<'_, f64>, b: DVectorView<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seeds<R: Rng>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> Vec<usize> {
    let count = points.ncols();
    let mut chosen = vec![rng.random_range(0..count)];
    let mut d2: Vec<f64> = (0..count)
        .map(|i| sq_dist(points.column(i), points.column(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            let rest: Vec<usize> = (0..count).filter(|i| !chosen.contains(i)).collect();
            rest[rng.random_range(0..rest.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.column(i), points.column(next)));
        }
    }
    chosen
}

fn centroids_of(points: &DMatrix<f64>, assignments: &[usize], k: usize) -> (DMatrix<f64>, Vec<usize>) {
    let mut sums = DMatrix::zeros(points.nrows(), k);
    let mut sizes = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        let mut col = sums.column_mut(c);
        col += points.column(i);
        sizes[c] += 1;
    }
    for (c, &s) in sizes.iter().enumerate() {
        if s > 0 {
            sums.column_mut(c).scale_mut(1.0 / s as f64);
        }
    }
    (sums, sizes)
}

fn wcss(points: &DMatrix<f64>, centroids: &DMatrix<f64>, assignments: &[usize]) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(points.column(i), centroids.column(c)))
        .sum()
}

/// Nearest centroid; a point stays in `current` when that is among the nearest.
fn nearest(points: &DMatrix<f64>, centroids: &DMatrix<f64>, i: usize, current: Option<usize>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..centroids.ncols() {
        let d = sq_dist(points.column(i), centroids.column(c));
        if d < best_d || (d == best_d && Some(c) == current) {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Centroids after moving the point farthest from its own centroid into each empty cluster.
fn repaired_centroids(points: &DMatrix<f64>, assignments: &mut [usize], k: usize) -> DMatrix<f64> {
    let (mut centroids, mut sizes) = centroids_of(points, assignments, k);
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let donor = (0..points.ncols())
            .filter(|&i| sizes[assignments[i]] > 1)
            .max_by(|&i, &j| {
                let di = sq_dist(points.column(i), centroids.column(assignments[i]));
                let dj = sq_dist(points.column(j), centroids.column(assignments[j]));
                di.total_cmp(&dj).then(j.cmp(&i))
            })
            .expect("k <= number of points");
        assignments[donor] = empty;
        (centroids, sizes) = centroids_of(points, assignments, k);
    }
    centroids
}

fn lloyd<R: Rng>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> KMeansResult {
    let count = points.ncols();
    let seeds = plus_plus_seeds(points, k, rng);
    let mut centroids = points.select_columns(&seeds);
    let mut assignments: Vec<usize> = (0..count).map(|i| nearest(points, &centroids, i, None)).collect();
    let mut history = Vec::new();
    for _ in 0..KMEANS_MAX_ITERS {
        centroids = repaired_centroids(points, &mut assignments, k);
        history.push(wcss(points, &centroids, &assignments));
        let updated: Vec<usize> = (0..count)
            .map(|i| nearest(points, &centroids, i, Some(assignments[i])))
            .collect();
        if updated == assignments {
            break;
        }
        assignments = updated;
    }
    let centroids = repaired_centroids(points, &mut assignments, k);
    KMeansResult {
        wcss: wcss(points, &centroids, &assignments),
        assignments,
        history,
    }
}

/// k-means++ seeding, Lloyd iterations to a fixed point (at most 300), best of
/// 10 restarts by within-cluster sum of squares. `points` holds one point per column.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    let count = points.ncols();
    if k == 0 || k > count {
        return Err(Error::arg(format!("k-means needs 1 <= k <= {count}, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// `(1/N) Σ_clusters max_class |cluster ∩ class|`.
pub fn purity(assignments: &[usize], gold: &[usize]) -> Result<f64> {
    if assignments.len() != gold.len() || assignments.is_empty() {
        return Err(Error::arg("purity needs equal, non-zero lengths"));
    }
    let mut counts: HashMap<usize, HashMap<usize, usize>> = HashMap::new();
    for (&c, &g) in assignments.iter().zip(gold) {
        *counts.entry(c).or_default().entry(g).or_default() += 1;
    }
    let majority: usize = counts.values().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    Ok(majority as f64 / assignments.len() as f64)
}

pub fn eval_categorization(set: &EmbeddingSet, name: &str, bench: &CategorizationBenchmark, seed: u64) -> Result<EvalRecord> {
    let mut columns = Vec::new();
    let mut label_ids: Vec<&str> = Vec::new();
    let mut gold = Vec::new();
    for (word, label) in &bench.items {
        if let Some(i) = resolve(set, word) {
            columns.push(i);
            let id = match label_ids.iter().position(|l| l == label) {
                Some(id) => id,
                None => {
                    label_ids.push(label);
                    label_ids.len() - 1
                }
            };
            gold.push(id);
        }
    }
    let k = label_ids.len();
    if columns.is_empty() || columns.len() < k {
        return Err(Error::Eval(format!(
            "{name}: {} in-vocabulary items for {k} categories",
            columns.len()
        )));
    }
    let points = set.matrix().select_columns(&columns);
    let clusters = kmeans(&points, k, seed)?;
    let score = 100.0 * purity(&clusters.assignments, &gold)?;
    Ok(EvalRecord {
        dataset: name.to_owned(),
        task: BenchmarkKind::Categorization,
        score,
        coverage: columns.len() as f64 / bench.items.len() as f64,
        n_items: columns.len(),
        total_items: bench.items.len(),
    })
}

pub fn evaluate(set: &EmbeddingSet, name: &str, bench: &Benchmark, seed: u64, options: AnalogyOptions) -> Result<EvalRecord> {
    match bench {
        Benchmark::Similarity(b) => eval_similarity(set, name, b),
        Benchmark::Analogy(b) => eval_analogy_pairdiff(set, name, b, options),
        Benchmark::Categorization(b) => eval_categorization(set, name, b, seed),
    }
}
