//! Artwork triplets (image, comment, metadata), CSV ingestion and splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Columns every metadata CSV must carry, in canonical output order.
pub const COLUMNS: [&str; 10] = [
    "ID",
    "IMAGE",
    "COMMENT",
    "AUTHOR",
    "TITLE",
    "DATE",
    "TECHNIQUE",
    "TYPE",
    "SCHOOL",
    "TIMEFRAME",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSet {
    pub author: String,
    pub title: String,
    pub date: String,
    pub technique: String,
    pub type_: String,
    pub school: String,
    pub timeframe: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtworkTriplet {
    pub id: String,
    /// File stem of the painting image.
    pub image_ref: String,
    pub comment: String,
    pub attributes: AttributeSet,
}

/// Categorical attributes that can drive the metadata classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attribute {
    Type,
    School,
    Timeframe,
    Author,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [
        Attribute::Type,
        Attribute::School,
        Attribute::Timeframe,
        Attribute::Author,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Type => "type",
            Attribute::School => "school",
            Attribute::Timeframe => "timeframe",
            Attribute::Author => "author",
        }
    }

    pub fn value_of(self, attrs: &AttributeSet) -> &str {
        match self {
            Attribute::Type => &attrs.type_,
            Attribute::School => &attrs.school,
            Attribute::Timeframe => &attrs.timeframe,
            Attribute::Author => &attrs.author,
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type" => Ok(Attribute::Type),
            "school" => Ok(Attribute::School),
            "timeframe" => Ok(Attribute::Timeframe),
            "author" => Ok(Attribute::Author),
            other => Err(Error::Argument(format!(
                "unknown attribute `{other}` (expected type, school, timeframe or author)"
            ))),
        }
    }
}

/// Categorical value to class index, assigned in sorted value order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub attribute: Attribute,
    values: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelMap {
    fn from_values(attribute: Attribute, values: BTreeSet<String>) -> Self {
        let values: Vec<String> = values.into_iter().collect();
        let index = values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        LabelMap {
            attribute,
            values,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, value: &str) -> Option<usize> {
        self.index.get(value).copied()
    }

    pub fn value(&self, class: usize) -> Option<&str> {
        self.values.get(class).map(String::as_str)
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// An immutable, ordered collection of triplets with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    samples: Vec<ArtworkTriplet>,
    split: Option<Split>,
    label_maps: BTreeMap<Attribute, LabelMap>,
}

/// Rows dropped while parsing, with 1-based CSV row numbers (header is row 1).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub rejected: Vec<(usize, String)>,
}

impl ParseReport {
    pub fn rejected_count(&self) -> usize {
        self.rejected.len()
    }
}

impl Corpus {
    /// Builds a corpus, checking id uniqueness and non-empty comments and titles.
    pub fn new(samples: Vec<ArtworkTriplet>) -> Result<Self> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, s) in samples.iter().enumerate() {
            if s.id.is_empty() {
                return Err(Error::Schema(format!("sample {i} has an empty id")));
            }
            if s.comment.trim().is_empty() {
                return Err(Error::Schema(format!("sample `{}` has an empty comment", s.id)));
            }
            if s.attributes.title.trim().is_empty() {
                return Err(Error::Schema(format!("sample `{}` has an empty title", s.id)));
            }
            if let Some(prev) = seen.insert(&s.id, i) {
                return Err(Error::Conflict(format!(
                    "duplicate id `{}` at samples {prev} and {i}",
                    s.id
                )));
            }
        }
        let mut corpus = Corpus {
            samples,
            split: None,
            label_maps: BTreeMap::new(),
        };
        for attr in [Attribute::Type, Attribute::School, Attribute::Timeframe] {
            let map = corpus.build_label_map(attr);
            corpus.label_maps.insert(attr, map);
        }
        Ok(corpus)
    }

    pub fn samples(&self) -> &[ArtworkTriplet] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self) -> Option<Split> {
        self.split
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    pub fn label_map(&self, attribute: Attribute) -> Option<&LabelMap> {
        self.label_maps.get(&attribute)
    }

    /// Attaches a label map (e.g. one built from the training split).
    pub fn with_label_map(mut self, map: LabelMap) -> Self {
        self.label_maps.insert(map.attribute, map);
        self
    }

    /// Sorted-by-value class assignment over the values present in this corpus.
    pub fn build_label_map(&self, attribute: Attribute) -> LabelMap {
        let values = self
            .samples
            .iter()
            .map(|s| attribute.value_of(&s.attributes).to_string())
            .collect();
        LabelMap::from_values(attribute, values)
    }

    /// Class index of every sample under `attribute`, `None` where the value
    /// is missing from the attached label map.
    pub fn labels(&self, attribute: Attribute) -> Result<Vec<Option<usize>>> {
        let map = self.label_map(attribute).ok_or_else(|| {
            Error::Argument(format!("no label map for attribute `{attribute}`"))
        })?;
        Ok(self
            .samples
            .iter()
            .map(|s| map.get(attribute.value_of(&s.attributes)))
            .collect())
    }

    /// The samples named in `ids`, in manifest order.
    pub fn subset(&self, ids: &[String], split: Split) -> Result<Corpus> {
        let by_id: HashMap<&str, &ArtworkTriplet> =
            self.samples.iter().map(|s| (s.id.as_str(), s)).collect();
        let mut out = Vec::with_capacity(ids.len());
        let mut seen = BTreeSet::new();
        for id in ids {
            let sample = by_id.get(id.as_str()).ok_or_else(|| {
                Error::Schema(format!("{} manifest names unknown id `{id}`", split.name()))
            })?;
            if !seen.insert(id.as_str()) {
                return Err(Error::Conflict(format!(
                    "{} manifest lists id `{id}` twice",
                    split.name()
                )));
            }
            out.push((*sample).clone());
        }
        Ok(Corpus {
            samples: out,
            split: Some(split),
            label_maps: self.label_maps.clone(),
        })
    }
}

fn header_index(headers: &csv::StringRecord) -> Result<[usize; 10]> {
    let mut positions = [usize::MAX; 10];
    for (pos, name) in headers.iter().enumerate() {
        let name = name.trim().trim_start_matches('\u{feff}').to_ascii_uppercase();
        if let Some(col) = COLUMNS.iter().position(|c| *c == name) {
            positions[col] = pos;
        }
    }
    if let Some(missing) = positions.iter().position(|&p| p == usize::MAX) {
        return Err(Error::Schema(format!(
            "missing required column `{}`",
            COLUMNS[missing]
        )));
    }
    Ok(positions)
}

/// Parses a metadata CSV into a corpus.
///
/// Rows with an empty COMMENT or TITLE are dropped and listed in the report.
/// A duplicate ID aborts the parse with both row numbers.
pub fn parse_metadata<R: Read>(reader: R) -> Result<(Corpus, ParseReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let cols = header_index(rdr.headers()?)?;

    let mut report = ParseReport::default();
    let mut first_row: HashMap<String, usize> = HashMap::new();
    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let field = |c: usize| record.get(cols[c]).unwrap_or("").to_string();
        let id = field(0);
        if id.trim().is_empty() {
            return Err(Error::Schema(format!("row {row}: empty ID")));
        }
        if let Some(prev) = first_row.insert(id.clone(), row) {
            return Err(Error::Conflict(format!(
                "duplicate ID `{id}` in rows {prev} and {row}"
            )));
        }
        let comment = field(2);
        let title = field(4);
        if comment.trim().is_empty() {
            report.rejected.push((row, "empty COMMENT".into()));
            continue;
        }
        if title.trim().is_empty() {
            report.rejected.push((row, "empty TITLE".into()));
            continue;
        }
        samples.push(ArtworkTriplet {
            id,
            image_ref: field(1),
            comment,
            attributes: AttributeSet {
                author: field(3),
                title,
                date: field(5),
                technique: field(6),
                type_: field(7),
                school: field(8),
                timeframe: field(9),
            },
        });
    }
    Ok((Corpus::new(samples)?, report))
}

pub fn load_metadata(path: &Path) -> Result<(Corpus, ParseReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_metadata(BufReader::new(file))
}

/// Writes the corpus back out in the canonical column order.
pub fn write_metadata<W: Write>(corpus: &Corpus, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for s in corpus.samples() {
        let a = &s.attributes;
        w.write_record([
            &s.id,
            &s.image_ref,
            &s.comment,
            &a.author,
            &a.title,
            &a.date,
            &a.technique,
            &a.type_,
            &a.school,
            &a.timeframe,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Split sizes: `floor(n * f)` for validation and test, remainder to train.
pub fn split_sizes(n: usize, fractions: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (ft, fv, fs) = fractions;
    for f in [ft, fv, fs] {
        if !f.is_finite() || f < 0.0 {
            return Err(Error::Argument(format!("split fraction {f} must be non-negative")));
        }
    }
    if ((ft + fv + fs) - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "split fractions sum to {}, expected 1",
            ft + fv + fs
        )));
    }
    // The small bias keeps products such as 100 * 0.29 from flooring one short.
    let count = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
    let val = count(fv);
    let test = count(fs);
    Ok((n - val - test, val, test))
}

/// Seeded random partition into train/val/test. Within each split the
/// original sample order is kept.
pub fn split_corpus(
    corpus: &Corpus,
    seed: u64,
    fractions: (f64, f64, f64),
) -> Result<(Corpus, Corpus, Corpus)> {
    if corpus.is_empty() {
        return Err(Error::Argument("cannot split an empty corpus".into()));
    }
    let (n_train, n_val, _) = split_sizes(corpus.len(), fractions)?;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    let take = |idx: &mut Vec<usize>, split| {
        idx.sort_unstable();
        Corpus {
            samples: idx.iter().map(|&i| corpus.samples[i].clone()).collect(),
            split: Some(split),
            label_maps: corpus.label_maps.clone(),
        }
    };
    Ok((
        take(&mut train, Split::Train),
        take(&mut val, Split::Val),
        take(&mut test, Split::Test),
    ))
}

/// Split manifest: one id per line.
pub fn write_manifest(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut out = String::new();
    for id in corpus.ids() {
        out.push_str(id);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let id = line.trim();
        if !id.is_empty() {
            ids.push(id.to_string());
        }
    }
    Ok(ids)
}
