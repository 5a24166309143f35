//! Bag-of-words text encodings: tokenizer, vocabularies and tf-idf vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Default document-frequency floor for the comment vocabulary.
pub const COMMENT_MIN_COUNT: usize = 10;

/// Lowercased maximal runs of alphabetic characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from `(term, doc_freq)` pairs; terms are stored sorted.
    pub fn from_counts(counts: BTreeMap<String, usize>, n_docs: usize) -> Result<Self> {
        if n_docs == 0 {
            return Err(Error::Argument("vocabulary needs at least one document".into()));
        }
        let mut terms = Vec::with_capacity(counts.len());
        let mut doc_freq = Vec::with_capacity(counts.len());
        for (term, df) in counts {
            if term.is_empty() || !term.chars().all(char::is_alphabetic) {
                return Err(Error::Format(format!("term `{term}` is not purely alphabetic")));
            }
            if df == 0 || df > n_docs {
                return Err(Error::Format(format!(
                    "term `{term}` has document frequency {df} outside 1..={n_docs}"
                )));
            }
            terms.push(term);
            doc_freq.push(df);
        }
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary {
            terms,
            index,
            doc_freq,
            n_docs,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }

    pub fn idf(&self, index: usize) -> f64 {
        (self.n_docs as f64 / self.doc_freq[index] as f64).ln()
    }

    /// Writes `#ndocs=<N>` then one `term<TAB>doc_freq` line per term.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#ndocs={}", self.n_docs)?;
        for (t, df) in self.terms.iter().zip(&self.doc_freq) {
            writeln!(w, "{t}\t{df}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty vocabulary file".into()))??;
        let n_docs = header
            .strip_prefix("#ndocs=")
            .and_then(|n| n.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Format(format!("bad vocabulary header `{header}`")))?;
        let mut counts = BTreeMap::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (term, df) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("line {}: expected term<TAB>count", lineno + 2)))?;
            let df = df
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("line {}: bad count `{df}`", lineno + 2)))?;
            if counts.insert(term.to_string(), df).is_some() {
                return Err(Error::Format(format!("line {}: duplicate term `{term}`", lineno + 2)));
            }
        }
        Vocabulary::from_counts(counts, n_docs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::read(BufReader::new(file))
    }
}

/// Document frequencies of every token over `docs`.
fn document_frequencies<'a>(docs: impl Iterator<Item = &'a str>) -> (BTreeMap<String, usize>, usize) {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut n = 0;
    for doc in docs {
        n += 1;
        let unique: BTreeSet<String> = tokenize(doc).into_iter().collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    (df, n)
}

/// Comment vocabulary: terms whose document frequency is at least `min_count`,
/// optionally truncated to the `cap` most frequent (ties broken lexicographically).
pub fn build_comment_vocab(train: &Corpus, min_count: usize, cap: Option<usize>) -> Result<Vocabulary> {
    if train.is_empty() {
        return Err(Error::Argument("cannot build a vocabulary from an empty corpus".into()));
    }
    let (df, n_docs) = document_frequencies(train.samples().iter().map(|s| s.comment.as_str()));
    let mut kept: Vec<(String, usize)> = df.into_iter().filter(|(_, c)| *c >= min_count).collect();
    if let Some(cap) = cap {
        if kept.len() > cap {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            kept.truncate(cap);
        }
    }
    Vocabulary::from_counts(kept.into_iter().collect(), n_docs)
}

/// Title vocabulary: every alphabetic word of the training titles.
pub fn build_title_vocab(train: &Corpus) -> Result<Vocabulary> {
    if train.is_empty() {
        return Err(Error::Argument("cannot build a vocabulary from an empty corpus".into()));
    }
    let (df, n_docs) =
        document_frequencies(train.samples().iter().map(|s| s.attributes.title.as_str()));
    Vocabulary::from_counts(df, n_docs)
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTextVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseTextVector {
    pub fn new(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Argument(format!("duplicate sparse index {}", w[0].0)));
            }
        }
        if let Some(&(i, _)) = entries.last() {
            if i >= dim {
                return Err(Error::Argument(format!("sparse index {i} out of range for dim {dim}")));
            }
        }
        Ok(SparseTextVector { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        SparseTextVector {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            v[i] = w;
        }
        v
    }
}

/// tf-idf weights `count * ln(n_docs / df)`, ℓ2-normalized.
/// Out-of-vocabulary tokens are ignored; an all-OOV text gives the zero vector.
pub fn tfidf_encode(text: &str, vocab: &Vocabulary) -> SparseTextVector {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for tok in tokenize(text) {
        if let Some(i) = vocab.index_of(&tok) {
            *counts.entry(i).or_default() += 1;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(i, tf)| (i, tf as f64 * vocab.idf(i)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for e in &mut entries {
            e.1 /= norm;
        }
    }
    SparseTextVector {
        dim: vocab.len(),
        entries,
    }
}

/// Concatenation `c ⊕ a`; entries of `a` are shifted by `dim(c)`.
pub fn concat_text(c: &SparseTextVector, a: &SparseTextVector) -> SparseTextVector {
    let mut entries = c.entries.clone();
    entries.extend(a.entries.iter().map(|&(i, w)| (i + c.dim, w)));
    SparseTextVector {
        dim: c.dim + a.dim,
        entries,
    }
}

/// Comment and title vocabularies used together to encode a sample's text.
#[derive(Debug, Clone)]
pub struct TextEncoder {
    pub comments: Vocabulary,
    pub titles: Vocabulary,
}

/// Comment, title and joint encodings of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedText {
    pub comment: SparseTextVector,
    pub title: SparseTextVector,
}

impl EncodedText {
    pub fn joint(&self) -> SparseTextVector {
        concat_text(&self.comment, &self.title)
    }
}

impl TextEncoder {
    pub fn fit(train: &Corpus, min_count: usize, cap: Option<usize>) -> Result<Self> {
        Ok(TextEncoder {
            comments: build_comment_vocab(train, min_count, cap)?,
            titles: build_title_vocab(train)?,
        })
    }

    pub fn joint_dim(&self) -> usize {
        self.comments.len() + self.titles.len()
    }

    /// Encodes a comment/title pair. A title with no alphabetic word at all
    /// is rejected; one whose words are merely out of vocabulary is not.
    pub fn encode(&self, comment: &str, title: &str) -> Result<EncodedText> {
        if tokenize(title).is_empty() {
            return Err(Error::Degenerate(format!("title `{title}` contains no words")));
        }
        Ok(EncodedText {
            comment: tfidf_encode(comment, &self.comments),
            title: tfidf_encode(title, &self.titles),
        })
    }

    pub fn encode_corpus(&self, corpus: &Corpus) -> Result<Vec<EncodedText>> {
        corpus
            .samples()
            .iter()
            .map(|s| {
                self.encode(&s.comment, &s.attributes.title)
                    .map_err(|e| Error::Degenerate(format!("sample `{}`: {e}", s.id)))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ArtworkTriplet, AttributeSet};

    pub(crate) fn corpus_of(comments: &[&str], titles: &[&str]) -> Corpus {
        let samples = comments
            .iter()
            .zip(titles)
            .enumerate()
            .map(|(i, (c, t))| ArtworkTriplet {
                id: format!("id{i}"),
                image_ref: format!("im{i}"),
                comment: c.to_string(),
                attributes: AttributeSet {
                    author: String::new(),
                    title: t.to_string(),
                    date: String::new(),
                    technique: String::new(),
                    type_: "genre".into(),
                    school: "Dutch".into(),
                    timeframe: "1601-1650".into(),
                },
            })
            .collect();
        Corpus::new(samples).unwrap()
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Still-Life, 1890!"), vec!["still", "life"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Van Gogh's Portrait"), vec!["van", "gogh", "s", "portrait"]);
        assert_eq!(tokenize("Gemäldegalerie Dresden"), vec!["gemäldegalerie", "dresden"]);
    }

    #[test]
    fn min_count_boundary() {
        let comments: Vec<&str> = (0..12).map(|_| "saint").collect();
        let titles: Vec<&str> = (0..12).map(|_| "x").collect();
        let v = build_comment_vocab(&corpus_of(&comments, &titles), 10, None).unwrap();
        assert_eq!(v.terms(), ["saint"]);

        let mut comments: Vec<&str> = (0..9).map(|_| "angel").collect();
        comments.extend(["other"; 3]);
        let v = build_comment_vocab(&corpus_of(&comments, &titles), 10, None).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn cap_keeps_most_frequent_with_lexicographic_ties() {
        let comments = ["b a", "b a c", "c d", "b e", "d"];
        let titles = ["t"; 5];
        let v = build_comment_vocab(&corpus_of(&comments, &titles), 1, Some(3)).unwrap();
        // df: a=2 b=3 c=2 d=2 e=1 -> b, then a/c/d tie -> a, c
        assert_eq!(v.terms(), ["a", "b", "c"]);
    }

    #[test]
    fn title_vocab_is_word_union() {
        let v = build_title_vocab(&corpus_of(&["c", "c"], &["Portrait", "Portrait of a Girl"])).unwrap();
        assert_eq!(v.terms(), ["a", "girl", "of", "portrait"]);
        assert_eq!(v.doc_freq("portrait"), Some(2));
    }

    #[test]
    fn empty_corpus_errors() {
        let empty = Corpus::new(vec![]).unwrap();
        assert!(build_comment_vocab(&empty, 10, None).is_err());
        assert!(build_title_vocab(&empty).is_err());
    }

    #[test]
    fn untokenizable_title_fails_at_encode_time() {
        let train = corpus_of(&["a b", "a c"], &["Portrait", "1890"]);
        let enc = TextEncoder::fit(&train, 1, None).unwrap();
        assert!(enc.encode("a", "1890").is_err());
        assert!(enc.encode_corpus(&train).is_err());
        assert!(enc.encode("a", "unknownword").is_ok());
    }

    #[test]
    fn tfidf_edge_cases() {
        let train = corpus_of(&["apple pear", "apple fig", "plum"], &["t", "t", "t"]);
        let v = build_comment_vocab(&train, 1, None).unwrap();
        let oov = tfidf_encode("banana kiwi", &v);
        assert!(oov.is_zero());
        assert_eq!(oov.dim(), v.len());
        let one = tfidf_encode("pear", &v);
        assert_eq!(one.entries(), &[(v.index_of("pear").unwrap(), 1.0)]);
    }

    #[test]
    fn tfidf_matches_hand_computation() {
        // df: apple=2, pear=1, fig=1, plum=1; N=3.
        let train = corpus_of(&["apple pear", "apple fig", "plum"], &["t", "t", "t"]);
        let v = build_comment_vocab(&train, 1, None).unwrap();
        let enc = tfidf_encode("apple apple pear plum", &v);
        let raw_apple = 2.0 * (3.0f64 / 2.0).ln();
        let raw_pear = (3.0f64).ln();
        let raw_plum = (3.0f64).ln();
        let norm = (raw_apple * raw_apple + raw_pear * raw_pear + raw_plum * raw_plum).sqrt();
        let dense = enc.to_dense();
        assert!((dense[v.index_of("apple").unwrap()] - raw_apple / norm).abs() < 1e-12);
        assert!((dense[v.index_of("pear").unwrap()] - raw_pear / norm).abs() < 1e-12);
        assert!((dense[v.index_of("plum").unwrap()] - raw_plum / norm).abs() < 1e-12);
        assert_eq!(dense[v.index_of("fig").unwrap()], 0.0);
    }

    #[test]
    fn ubiquitous_term_never_encoded() {
        let train = corpus_of(&["the cat", "the dog", "the"], &["t", "t", "t"]);
        let v = build_comment_vocab(&train, 1, None).unwrap();
        let e = tfidf_encode("the the the cat", &v);
        assert_eq!(e.entries().len(), 1);
        assert!(tfidf_encode("the", &v).is_zero());
    }

    #[test]
    fn concatenation() {
        let c = SparseTextVector::new(3, vec![(0, 0.6), (2, 0.8)]).unwrap();
        let a = SparseTextVector::new(2, vec![(1, 1.0)]).unwrap();
        let t = concat_text(&c, &a);
        assert_eq!(t.dim(), 5);
        let mut brute = c.to_dense();
        brute.extend(a.to_dense());
        assert_eq!(t.to_dense(), brute);
        let z = concat_text(&SparseTextVector::zeros(3), &SparseTextVector::zeros(2));
        assert_eq!(z.dim(), 5);
        assert!(z.is_zero());
    }

    #[test]
    fn vocab_file_roundtrip() {
        let train = corpus_of(&["apple pear", "apple fig"], &["t", "t"]);
        let v = build_comment_vocab(&train, 1, None).unwrap();
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#ndocs=2\napple\t2\n"));
        assert_eq!(Vocabulary::read(buf.as_slice()).unwrap(), v);
        assert!(Vocabulary::read("apple\t2\n".as_bytes()).is_err());
    }
}
