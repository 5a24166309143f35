//! Seeded synthetic corpora with known cross-modal structure.
//!
//! Every sample belongs to one of `n_classes` classes (its `TYPE`) and carries
//! a set of detail words. The comment and title mention the class word and the
//! detail words; the image feature is the class centroid plus the detail
//! vectors plus Gaussian noise. Text and image therefore share everything a
//! model needs to tell two samples apart.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{split_corpus, ArtworkTriplet, Attribute, AttributeSet, Corpus};
use crate::dataset::{encode_pairs, EncodedPair};
use crate::error::{Error, Result};
use crate::text::TextEncoder;
use crate::visual::{DenseFeatureVector, FeatureStore};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub n_classes: usize,
    pub n_details: usize,
    pub details_per_sample: usize,
    pub visual_dim: usize,
    pub noise_sigma: f64,
    /// Size of the filler vocabulary and filler words per comment.
    pub filler_vocab: usize,
    pub filler_per_comment: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_samples: 256,
            n_classes: 8,
            n_details: 32,
            details_per_sample: 4,
            visual_dim: 64,
            noise_sigma: 0.05,
            filler_vocab: 200,
            filler_per_comment: 6,
            seed: 7,
        }
    }
}

/// Lowercase alphabetic word for index `i`, e.g. `word("det", 27) == "detbb"`.
fn word(prefix: &str, mut i: usize) -> String {
    let mut letters = Vec::new();
    loop {
        letters.push(b'a' + (i % 26) as u8);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    if letters.len() == 1 {
        letters.push(b'a');
    }
    letters.reverse();
    format!("{prefix}{}", String::from_utf8(letters).unwrap())
}

pub fn class_name(c: usize) -> String {
    word("kind", c)
}

fn unit_gaussian(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    /// Keyed by image reference.
    pub features: FeatureStore,
    /// Detail indices per sample, in corpus order.
    pub details: Vec<Vec<usize>>,
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.n_classes == 0 || cfg.visual_dim == 0 || cfg.n_samples == 0 {
        return Err(Error::Argument("synthetic corpus needs samples, classes and a visual dimension".into()));
    }
    if cfg.details_per_sample == 0 || cfg.details_per_sample > cfg.n_details {
        return Err(Error::Argument(format!(
            "cannot draw {} of {} details",
            cfg.details_per_sample, cfg.n_details
        )));
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(Error::Argument(format!("noise sigma {} is invalid", cfg.noise_sigma)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centroids: Vec<Vec<f64>> = (0..cfg.n_classes)
        .map(|_| unit_gaussian(cfg.visual_dim, &mut rng))
        .collect();
    let detail_vecs: Vec<Vec<f64>> = (0..cfg.n_details)
        .map(|_| unit_gaussian(cfg.visual_dim, &mut rng))
        .collect();
    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();

    let mut seen = BTreeSet::new();
    let mut samples = Vec::with_capacity(cfg.n_samples);
    let mut details = Vec::with_capacity(cfg.n_samples);
    let mut features = FeatureStore::new(cfg.visual_dim);
    let mut attempts = 0usize;
    while samples.len() < cfg.n_samples {
        attempts += 1;
        if attempts > 100 * cfg.n_samples + 1000 {
            return Err(Error::Argument(
                "not enough distinct (class, detail) combinations for the requested sample count".into(),
            ));
        }
        let class = rng.random_range(0..cfg.n_classes);
        let mut d = sample(&mut rng, cfg.n_details, cfg.details_per_sample).into_vec();
        d.sort_unstable();
        if !seen.insert((class, d.clone())) {
            continue;
        }
        let k = samples.len();

        let mut words: Vec<String> = vec![class_name(class)];
        words.extend(d.iter().map(|&i| word("det", i)));
        for _ in 0..cfg.filler_per_comment {
            words.push(word("fill", rng.random_range(0..cfg.filler_vocab.max(1))));
        }
        let comment = format!("{}.", words.join(" "));
        let title = format!(
            "{} with {}",
            class_name(class),
            d.iter().map(|&i| word("det", i)).collect::<Vec<_>>().join(" and ")
        );

        let mut image = centroids[class].clone();
        for &i in &d {
            for (x, y) in image.iter_mut().zip(&detail_vecs[i]) {
                *x += y;
            }
        }
        if cfg.noise_sigma > 0.0 {
            for x in image.iter_mut() {
                *x += noise.sample(&mut rng);
            }
        }

        let image_ref = format!("img-{k:05}");
        features.insert(image_ref.clone(), DenseFeatureVector::new(image)?)?;
        samples.push(ArtworkTriplet {
            id: format!("s{k:05}"),
            image_ref,
            comment,
            attributes: AttributeSet {
                author: word("painter", class * 3 + k % 3),
                title,
                date: format!("{}", 1450 + 5 * (k % 80)),
                technique: "Oil on canvas".into(),
                type_: class_name(class),
                school: word("school", class % 3),
                timeframe: format!("{}-{}", 1451 + 50 * (class % 4), 1500 + 50 * (class % 4)),
            },
        });
        details.push(d);
    }
    Ok(SyntheticData {
        corpus: Corpus::new(samples)?,
        features,
        details,
    })
}

/// Encoded 80/10/10 splits of a synthetic corpus, labelled by `TYPE`.
#[derive(Debug, Clone)]
pub struct EncodedSplits {
    pub train: Vec<EncodedPair>,
    pub val: Vec<EncodedPair>,
    pub test: Vec<EncodedPair>,
    pub n_classes: usize,
    pub encoder: TextEncoder,
}

pub fn encoded_splits(data: &SyntheticData, split_seed: u64, min_count: usize) -> Result<EncodedSplits> {
    let (train, val, test) = split_corpus(&data.corpus, split_seed, (0.8, 0.1, 0.1))?;
    let encoder = TextEncoder::fit(&train, min_count, None)?;
    let enc = |c: &Corpus| encode_pairs(c, &encoder, &data.features, Some(Attribute::Type));
    Ok(EncodedSplits {
        train: enc(&train)?,
        val: enc(&val)?,
        test: enc(&test)?,
        n_classes: data.corpus.label_map(Attribute::Type).map_or(0, |m| m.len()),
        encoder,
    })
}
