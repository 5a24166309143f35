//! Resolves corpus samples into model-ready (text, image) pairs.

use crate::corpus::{Attribute, Corpus};
use crate::error::{Error, Result};
use crate::text::{EncodedText, SparseTextVector, TextEncoder};
use crate::visual::FeatureStore;

/// One sample with its encodings: `c_k`, `a_k`, `t_k = c_k ⊕ a_k` and `i_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    pub id: String,
    pub text: EncodedText,
    pub joint: SparseTextVector,
    pub image: Vec<f64>,
    /// Class index under the attribute chosen for metadata supervision.
    pub label: Option<usize>,
}

impl EncodedPair {
    pub fn new(id: impl Into<String>, text: EncodedText, image: Vec<f64>, label: Option<usize>) -> Self {
        let joint = text.joint();
        EncodedPair {
            id: id.into(),
            text,
            joint,
            image,
            label,
        }
    }
}

/// Encodes every sample of `corpus`. Image features are looked up by sample
/// id first and by image reference second. When `attribute` is given, labels
/// come from the corpus' label map for it.
pub fn encode_pairs(
    corpus: &Corpus,
    encoder: &TextEncoder,
    features: &FeatureStore,
    attribute: Option<Attribute>,
) -> Result<Vec<EncodedPair>> {
    let texts = encoder.encode_corpus(corpus)?;
    let labels = match attribute {
        Some(a) => corpus.labels(a)?,
        None => vec![None; corpus.len()],
    };
    corpus
        .samples()
        .iter()
        .zip(texts)
        .zip(labels)
        .map(|((s, text), label)| {
            let image = features
                .get(&s.id)
                .or_else(|| features.get(&s.image_ref))
                .ok_or_else(|| {
                    Error::Schema(format!(
                        "no visual features for sample `{}` (image `{}`)",
                        s.id, s.image_ref
                    ))
                })?;
            Ok(EncodedPair::new(s.id.clone(), text, image.values().to_vec(), label))
        })
        .collect()
}
