//! Lexicon-based daily sentiment scores and term-frequency tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::dataio::{format_day, parse_iso_date};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconKind {
    /// Polarity only; entries are +1 or -1.
    Binary,
    /// Integer scores in [-5, 5].
    Scored,
}

impl LexiconKind {
    fn name(self) -> &'static str {
        match self {
            LexiconKind::Binary => "binary",
            LexiconKind::Scored => "scored",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub kind: LexiconKind,
    entries: HashMap<String, i32>,
}

impl Lexicon {
    pub fn new(kind: LexiconKind, entries: impl IntoIterator<Item = (String, i32)>) -> Result<Lexicon> {
        let mut map = HashMap::new();
        for (w, s) in entries {
            if w.is_empty() || w != w.to_lowercase() {
                return Err(Error::Argument(format!("lexicon word '{w}' must be non-empty lowercase")));
            }
            let ok = match kind {
                LexiconKind::Binary => s == 1 || s == -1,
                LexiconKind::Scored => (-5..=5).contains(&s),
            };
            if !ok {
                return Err(Error::Argument(format!("score {s} for '{w}' invalid in a {} lexicon", kind.name())));
            }
            if map.insert(w.clone(), s).is_some() {
                return Err(Error::Argument(format!("lexicon word '{w}' listed twice")));
            }
        }
        Ok(Lexicon { kind, entries: map })
    }

    /// Parse `word<TAB>score` lines; blank lines and `#` comments are skipped.
    pub fn from_tsv(text: &str, kind: LexiconKind) -> Result<Lexicon> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (w, s) = line.split_once('\t').ok_or_else(|| Error::Ingest {
                row: i + 1,
                column: "word".into(),
                message: "expected word<TAB>score".into(),
            })?;
            let score = s.trim().parse::<i32>().map_err(|_| Error::Ingest {
                row: i + 1,
                column: "score".into(),
                message: format!("score '{}' is not an integer", s.trim()),
            })?;
            entries.push((w.trim().to_string(), score));
        }
        Lexicon::new(kind, entries)
    }

    pub fn load(path: &Path, kind: LexiconKind) -> Result<Lexicon> {
        Lexicon::from_tsv(&std::fs::read_to_string(path)?, kind)
    }

    pub fn get(&self, word: &str) -> Option<i32> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The same entries viewed as a scored lexicon.
    pub fn as_scored(&self) -> Lexicon {
        Lexicon {
            kind: LexiconKind::Scored,
            entries: self.entries.clone(),
        }
    }

    fn expect(&self, kind: LexiconKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: kind.name(),
                found: self.kind.name(),
            })
        }
    }
}

/// Positive minus negative token count.
pub fn score_binary<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Result<i64> {
    lexicon.expect(LexiconKind::Binary)?;
    Ok(tokens.iter().filter_map(|t| lexicon.get(t.as_ref())).map(i64::from).sum())
}

/// Sum over matched words of score times occurrence count.
pub fn score_weighted<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Result<i64> {
    lexicon.expect(LexiconKind::Scored)?;
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .filter_map(|(w, n)| lexicon.get(w).map(|s| i64::from(s) * n))
        .sum())
}

pub fn score<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Result<i64> {
    match lexicon.kind {
        LexiconKind::Binary => score_binary(tokens, lexicon),
        LexiconKind::Scored => score_weighted(tokens, lexicon),
    }
}

/// Lowercase, split on anything but letters, digits and apostrophes, then
/// trim apostrophes from token ends.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentBatch {
    /// Days since 1970-01-01.
    pub date: i64,
    pub documents: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyScore {
    pub date: i64,
    /// `None` on days without documents.
    pub score: Option<f64>,
    pub count: usize,
}

pub fn daily_scores(batches: &[DocumentBatch], lexicon: &Lexicon, aggregation: Aggregation) -> Result<Vec<DailyScore>> {
    if let Some(w) = batches.windows(2).find(|w| w[1].date <= w[0].date) {
        return Err(Error::Argument(format!(
            "document batches must be date-sorted without repeats ({} after {})",
            format_day(w[1].date),
            format_day(w[0].date)
        )));
    }
    batches
        .iter()
        .map(|b| {
            let scores: Vec<i64> = b.documents.iter().map(|d| score(d, lexicon)).collect::<Result<_>>()?;
            let total: i64 = scores.iter().sum();
            let n = scores.len();
            let score = match (n, aggregation) {
                (0, _) => None,
                (_, Aggregation::Sum) => Some(total as f64),
                (_, Aggregation::Mean) => Some(total as f64 / n as f64),
            };
            Ok(DailyScore {
                date: b.date,
                score,
                count: n,
            })
        })
        .collect()
}

/// Non-stopword token counts, most frequent first, ties in lexicographic order.
pub fn term_frequencies(batches: &[DocumentBatch], stopwords: &HashSet<String>, stem: bool) -> Vec<(String, usize)> {
    let stemmer = stem.then(|| Stemmer::create(Algorithm::English));
    let mut counts: HashMap<String, usize> = HashMap::new();
    for tok in batches.iter().flat_map(|b| b.documents.iter().flatten()) {
        if stopwords.contains(tok) {
            continue;
        }
        let key = match &stemmer {
            Some(s) => s.stem(tok).into_owned(),
            None => tok.clone(),
        };
        *counts.entry(key).or_default() += 1;
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    Ok(parse_stopwords(&std::fs::read_to_string(path)?))
}

/// Read a `date,text` CSV corpus into per-day batches. With `fill_days`,
/// calendar days between the first and last date get empty batches.
pub fn read_corpus<R: Read>(reader: R, fill_days: bool) -> Result<Vec<DocumentBatch>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("corpus lacks a `{name}` column")))
    };
    let (di, ti) = (col("date")?, col("text")?);
    let mut by_day: BTreeMap<i64, Vec<Vec<String>>> = BTreeMap::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let raw = rec.get(di).unwrap_or("");
        let day = parse_iso_date(raw).map_err(|e| Error::Ingest {
            row: r + 1,
            column: "date".into(),
            message: e.to_string(),
        })?;
        by_day.entry(day).or_default().push(tokenize(rec.get(ti).unwrap_or("")));
    }
    if fill_days {
        if let (Some(&first), Some(&last)) = (by_day.keys().next(), by_day.keys().next_back()) {
            for d in first..=last {
                by_day.entry(d).or_default();
            }
        }
    }
    Ok(by_day
        .into_iter()
        .map(|(date, documents)| DocumentBatch { date, documents })
        .collect())
}

pub fn load_corpus(path: &Path, fill_days: bool) -> Result<Vec<DocumentBatch>> {
    read_corpus(std::fs::File::open(path)?, fill_days)
}

/// CSV `date,score,count`; missing scores are written as `NA`.
pub fn write_daily_csv<W: Write>(w: W, scores: &[DailyScore]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["date", "score", "count"])?;
    for s in scores {
        let score = s.score.map_or_else(|| "NA".to_string(), |x| format!("{x}"));
        wr.write_record([format_day(s.date), score, s.count.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// CSV `word,count`.
pub fn write_frequencies_csv<W: Write>(w: W, table: &[(String, usize)]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["word", "count"])?;
    for (word, n) in table {
        wr.write_record([word.as_str(), &n.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}
