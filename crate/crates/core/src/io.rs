//! Word-embedding files and benchmark datasets.
//!
//! Two text layouts are supported for embeddings. `word2vec-text` starts with a
//! `N n` header line followed by `N` rows of `token v1 ... vn`; `glove-text` is
//! the same rows without the header. Tokens are whitespace-delimited, so a token
//! can never contain a space.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVectorView};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Word2VecText,
    GloveText,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word2vec" | "word2vec-text" | "w2v" => Ok(EmbeddingFormat::Word2VecText),
            "glove" | "glove-text" => Ok(EmbeddingFormat::GloveText),
            other => Err(Error::arg(format!("unknown embedding format {other:?}"))),
        }
    }
}

impl EmbeddingFormat {
    /// Guesses the layout from the first line: a two-integer line is a word2vec header.
    pub fn detect(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut first = String::new();
        BufReader::new(file)
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = first.split_whitespace().collect();
        let is_header = fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok());
        Ok(if is_header {
            EmbeddingFormat::Word2VecText
        } else {
            EmbeddingFormat::GloveText
        })
    }
}

/// A vocabulary and its `n x N` embedding matrix; column `i` embeds `words[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: DMatrix<f64>,
    origin: String,
}

impl EmbeddingSet {
    pub fn new(words: Vec<String>, matrix: DMatrix<f64>, origin: impl Into<String>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Format("embedding set must contain at least one word".into()));
        }
        if matrix.ncols() != words.len() {
            return Err(Error::Format(format!(
                "{} words but {} embedding columns",
                words.len(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::Format("embedding dimension must be positive".into()));
        }
        if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
            let col = pos / matrix.nrows();
            return Err(Error::Format(format!(
                "non-finite value in the embedding of {:?}",
                words[col]
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    word: w.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Self {
            words,
            index,
            matrix,
            origin: origin.into(),
        })
    }

    /// Builds a set from `(word, vector)` rows. Handy for small fixtures.
    pub fn from_rows<S: AsRef<str>>(rows: &[(S, Vec<f64>)]) -> Result<Self> {
        let dim = rows.first().map(|r| r.1.len()).unwrap_or(0);
        if rows.iter().any(|r| r.1.len() != dim) {
            return Err(Error::Format("rows have differing dimensions".into()));
        }
        let words = rows.iter().map(|r| r.0.as_ref().to_owned()).collect();
        let matrix = DMatrix::from_fn(dim, rows.len(), |i, j| rows[j].1[i]);
        Self::new(words, matrix, "inline")
    }

    /// Same vocabulary, new vectors (the dimension may change).
    pub fn with_matrix(&self, matrix: DMatrix<f64>, origin: impl Into<String>) -> Result<Self> {
        Self::new(self.words.clone(), matrix, origin)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    /// Embedding dimension `n`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Vocabulary size `N`.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn lookup(&self, word: &str) -> Option<DVectorView<'_, f64>> {
        self.position(word).map(|i| self.matrix.column(i))
    }
}

fn parse_row(line: &str, lineno: usize, dim: Option<usize>) -> Result<(String, Vec<f64>)> {
    let mut fields = line.split_whitespace();
    let word = fields.next().ok_or_else(|| Error::Parse {
        line: lineno,
        msg: "empty line".into(),
    })?;
    let values = fields
        .map(|f| {
            f.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric value {f:?}"),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("token {word:?} has no vector"),
        });
    }
    if let Some(d) = dim {
        if values.len() != d {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {d} values, found {}", values.len()),
            });
        }
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("non-finite value {v}"),
        });
    }
    Ok((word.to_owned(), values))
}

pub fn read_embeddings<R: BufRead>(reader: R, format: EmbeddingFormat, origin: &str) -> Result<EmbeddingSet> {
    let mut lines = reader.lines().enumerate();
    let mut header: Option<(usize, usize)> = None;
    if format == EmbeddingFormat::Word2VecText {
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Format("missing word2vec header line".into()))?;
        let first = first.map_err(|e| Error::io(origin, e))?;
        let fields: Vec<&str> = first.split_whitespace().collect();
        let parsed = match fields.as_slice() {
            [a, b] => a.parse::<usize>().ok().zip(b.parse::<usize>().ok()),
            _ => None,
        };
        match parsed {
            Some((count, dim)) if dim > 0 => header = Some((count, dim)),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header \"N n\", found {first:?}"),
                })
            }
        }
    }

    let mut dim = header.map(|h| h.1);
    let mut words = Vec::new();
    let mut values = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (word, row) = parse_row(&line, lineno, dim)?;
        dim.get_or_insert(row.len());
        if seen.insert(word.clone(), lineno).is_some() {
            return Err(Error::Duplicate { word, line: lineno });
        }
        words.push(word);
        values.extend(row);
    }

    if let Some((count, _)) = header {
        if count != words.len() {
            return Err(Error::Format(format!(
                "header announces {count} words but {} rows were read",
                words.len()
            )));
        }
    }
    let dim = dim.ok_or_else(|| Error::Format("no embeddings found".into()))?;
    let n_words = words.len();
    // Rows are stored word-major, which is exactly column-major for an n x N matrix.
    let matrix = DMatrix::from_vec(dim, n_words, values);
    EmbeddingSet::new(words, matrix, origin)
}

pub fn load_embeddings(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), format, &path.display().to_string())
}

/// Shortest representation that parses back to the identical `f64`.
pub(crate) fn format_value(out: &mut String, v: f64) {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        let _ = write!(out, "{v}");
    } else {
        let _ = write!(out, "{v:e}");
    }
}

pub fn write_embeddings<W: Write>(set: &EmbeddingSet, mut writer: W, format: EmbeddingFormat) -> std::io::Result<()> {
    if format == EmbeddingFormat::Word2VecText {
        writeln!(writer, "{} {}", set.len(), set.dim())?;
    }
    let mut line = String::new();
    for (word, col) in set.words.iter().zip(set.matrix.column_iter()) {
        line.clear();
        line.push_str(word);
        for &v in col.iter() {
            line.push(' ');
            format_value(&mut line, v);
        }
        line.push('\n');
        writer.write_all(line.as_bytes())?;
    }
    writer.flush()
}

pub fn save_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_embeddings(set, BufWriter::new(file), format).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    Similarity,
    Analogy,
    Categorization,
}

impl BenchmarkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkKind::Similarity => "similarity",
            BenchmarkKind::Analogy => "analogy",
            BenchmarkKind::Categorization => "categorization",
        }
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "similarity" | "sim" => Ok(BenchmarkKind::Similarity),
            "analogy" => Ok(BenchmarkKind::Analogy),
            "categorization" | "categorisation" | "cat" => Ok(BenchmarkKind::Categorization),
            other => Err(Error::arg(format!("unknown benchmark kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPair {
    pub first: String,
    pub second: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityBenchmark {
    pub pairs: Vec<SimilarityPair>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    pub section: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyBenchmark {
    pub questions: Vec<AnalogyQuestion>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorizationBenchmark {
    pub items: Vec<(String, String)>,
}

impl CategorizationBenchmark {
    /// Distinct labels in first-seen order.
    pub fn labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (_, label) in &self.items {
            if !out.contains(&label.as_str()) {
                out.push(label);
            }
        }
        out
    }

    pub fn k(&self) -> usize {
        self.labels().len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark {
    Similarity(SimilarityBenchmark),
    Analogy(AnalogyBenchmark),
    Categorization(CategorizationBenchmark),
}

impl Benchmark {
    pub fn kind(&self) -> BenchmarkKind {
        match self {
            Benchmark::Similarity(_) => BenchmarkKind::Similarity,
            Benchmark::Analogy(_) => BenchmarkKind::Analogy,
            Benchmark::Categorization(_) => BenchmarkKind::Categorization,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Benchmark::Similarity(b) => b.pairs.len(),
            Benchmark::Analogy(b) => b.questions.len(),
            Benchmark::Categorization(b) => b.items.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn parse_benchmark(text: &str, kind: BenchmarkKind) -> Result<Benchmark> {
    let mut pairs = Vec::new();
    let mut questions = Vec::new();
    let mut items = Vec::new();
    let mut section: Option<String> = None;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match kind {
            BenchmarkKind::Similarity => {
                let [first, second, score] = fields.as_slice() else {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected \"word1 word2 score\", found {} fields", fields.len()),
                    });
                };
                let score = score
                    .parse::<f64>()
                    .ok()
                    .filter(|s| s.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: lineno,
                        msg: format!("non-numeric score {score:?}"),
                    })?;
                pairs.push(SimilarityPair {
                    first: (*first).to_owned(),
                    second: (*second).to_owned(),
                    score,
                });
            }
            BenchmarkKind::Analogy => {
                if let Some(label) = line.strip_prefix(':') {
                    section = Some(label.trim().to_owned());
                    continue;
                }
                let [a, b, c, d] = fields.as_slice() else {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected 4 tokens, found {}", fields.len()),
                    });
                };
                questions.push(AnalogyQuestion {
                    a: (*a).to_owned(),
                    b: (*b).to_owned(),
                    c: (*c).to_owned(),
                    d: (*d).to_owned(),
                    section: section.clone(),
                });
            }
            BenchmarkKind::Categorization => {
                let [word, label] = fields.as_slice() else {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected \"word label\", found {} fields", fields.len()),
                    });
                };
                items.push(((*word).to_owned(), (*label).to_owned()));
            }
        }
    }

    let bench = match kind {
        BenchmarkKind::Similarity => {
            if pairs.len() < 2 {
                return Err(Error::Format(format!(
                    "similarity benchmark needs at least 2 pairs, found {}",
                    pairs.len()
                )));
            }
            Benchmark::Similarity(SimilarityBenchmark { pairs })
        }
        BenchmarkKind::Analogy => Benchmark::Analogy(AnalogyBenchmark { questions }),
        BenchmarkKind::Categorization => {
            let bench = CategorizationBenchmark { items };
            if bench.k() < 2 {
                return Err(Error::Format(format!(
                    "categorization benchmark needs at least 2 labels, found {}",
                    bench.k()
                )));
            }
            Benchmark::Categorization(bench)
        }
    };
    Ok(bench)
}

pub fn load_benchmark(path: impl AsRef<Path>, kind: BenchmarkKind) -> Result<Benchmark> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_benchmark(&text, kind)
}
