use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use artret_core::corpus::{
    load_metadata, read_manifest, split_corpus, write_manifest, write_metadata, Attribute, Corpus,
    Split,
};
use artret_core::dataset::{encode_pairs, EncodedPair};
use artret_core::evaluation::{
    evaluate as eval_pairs, format_table, pool_eval, random_baseline, write_report_csv,
    Direction, EvalReport, PoolLevel, PoolTask, ReportRow, RECALL_KS,
};
use artret_core::models::{
    fit_cca_pairs, load_checkpoint, save_checkpoint, train_amd, train_cml, JointModel,
    ModelSelection, TextArch, TrainConfig, DEFAULT_ALPHA, DEFAULT_DIM, DEFAULT_MARGIN,
    DEFAULT_RIDGE,
};
use artret_core::synthetic::{generate, SyntheticConfig};
use artret_core::text::{tfidf_encode, EncodedText, SparseTextVector, TextEncoder, Vocabulary};
use artret_core::visual::{load_feature_file, FeatureStore};
use artret_core::Exec;

use crate::settings::{pick, pick_opt, Settings};
use crate::{usage, DataArgs, EvalArgs, Failure, RetrieveArgs, SplitArgs, SynthArgs, TrainArgs, VocabArgs};

type CmdResult = Result<(), Failure>;

const COMMENT_VOCAB: &str = "comments.vocab";
const TITLE_VOCAB: &str = "titles.vocab";
const SPLITS: [(Split, &str); 3] = [
    (Split::Train, "train.txt"),
    (Split::Val, "val.txt"),
    (Split::Test, "test.txt"),
];

fn required(flag: &str, value: Option<PathBuf>) -> Result<PathBuf, Failure> {
    value.ok_or_else(|| usage(format!("--{flag} is required (flag or config file)")))
}

fn existing(flag: &str, value: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let path = required(flag, value)?;
    if !path.exists() {
        return Err(usage(format!("--{flag}: no such file or directory: {}", path.display())));
    }
    Ok(path)
}

fn out_dir(value: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = required("out", value)?;
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn parse<T: std::str::FromStr<Err = artret_core::Error>>(flag: &str, value: &str) -> Result<T, Failure> {
    value.parse().map_err(|e| usage(format!("--{flag}: {e}")))
}

/// Inputs shared by train, evaluate and retrieve.
struct Data {
    corpus: Corpus,
    features: FeatureStore,
    splits: PathBuf,
    encoder: TextEncoder,
}

impl Data {
    fn resolve(args: DataArgs, cfg: &Settings) -> Result<Self, Failure> {
        let metadata = existing("metadata", pick_opt(args.metadata, &cfg.metadata))?;
        let features = existing("features", pick_opt(args.features, &cfg.features))?;
        let splits = existing("splits", pick_opt(args.splits, &cfg.splits))?;
        let vocab = pick_opt(args.vocab, &cfg.vocab).unwrap_or_else(|| splits.clone());
        let vocab_files = [vocab.join(COMMENT_VOCAB), vocab.join(TITLE_VOCAB)];
        for f in &vocab_files {
            if !f.exists() {
                return Err(usage(format!("vocabulary file not found: {} (run build-vocab)", f.display())));
            }
        }
        let (corpus, report) = load_metadata(&metadata)?;
        if report.rejected_count() > 0 {
            eprintln!("note: {} metadata rows rejected", report.rejected_count());
        }
        let corpus = corpus.clone().with_label_map(corpus.build_label_map(Attribute::Author));
        Ok(Data {
            corpus,
            features: load_feature_file(&features)?,
            splits,
            encoder: TextEncoder {
                comments: Vocabulary::load(&vocab_files[0])?,
                titles: Vocabulary::load(&vocab_files[1])?,
            },
        })
    }

    fn split(&self, split: Split) -> Result<Corpus, Failure> {
        let (_, file) = SPLITS.iter().find(|(s, _)| *s == split).expect("known split");
        let path = self.splits.join(file);
        if !path.exists() {
            return Err(usage(format!("split manifest not found: {} (run split)", path.display())));
        }
        Ok(self.corpus.subset(&read_manifest(&path)?, split)?)
    }

    fn pairs(&self, corpus: &Corpus, attribute: Option<Attribute>) -> Result<Vec<EncodedPair>, Failure> {
        Ok(encode_pairs(corpus, &self.encoder, &self.features, attribute)?)
    }

    fn gallery(&self, name: &str) -> Result<Corpus, Failure> {
        match name {
            "all" => Ok(self.corpus.clone()),
            "train" => self.split(Split::Train),
            "val" => self.split(Split::Val),
            "test" => self.split(Split::Test),
            other => Err(usage(format!("--gallery: unknown collection `{other}` (train, val, test, all)"))),
        }
    }
}

pub fn synth(args: SynthArgs, cfg: &Settings) -> CmdResult {
    let out = out_dir(pick_opt(args.out, &cfg.out))?;
    let data = generate(&SyntheticConfig {
        n_samples: args.samples,
        seed: pick(args.seed, &cfg.seed, SyntheticConfig::default().seed),
        ..SyntheticConfig::default()
    })
    .map_err(usage)?;
    let meta = out.join("metadata.csv");
    let file = File::create(&meta).with_context(|| meta.display().to_string())?;
    write_metadata(&data.corpus, BufWriter::new(file))?;
    let feats = out.join("features.semf");
    data.features.save(&feats)?;
    println!("wrote {} samples to {} and {}", data.corpus.len(), meta.display(), feats.display());
    Ok(())
}

pub fn split(args: SplitArgs, cfg: &Settings) -> CmdResult {
    let metadata = existing("metadata", pick_opt(args.metadata, &cfg.metadata))?;
    let out = out_dir(pick_opt(args.out, &cfg.out).or_else(|| cfg.splits.clone()))?;
    let seed = pick(args.seed, &cfg.seed, 0);
    let fractions = (1.0 - args.val_fraction - args.test_fraction, args.val_fraction, args.test_fraction);
    let (corpus, report) = load_metadata(&metadata)?;
    let (train, val, test) = split_corpus(&corpus, seed, fractions).map_err(|e| match e {
        artret_core::Error::Argument(_) => usage(e),
        other => other.into(),
    })?;
    for ((_, file), part) in SPLITS.iter().zip([&train, &val, &test]) {
        write_manifest(&out.join(file), part)?;
    }
    println!(
        "train {}, val {}, test {} ({} rows rejected) -> {}",
        train.len(),
        val.len(),
        test.len(),
        report.rejected_count(),
        out.display()
    );
    Ok(())
}

pub fn build_vocab(args: VocabArgs, cfg: &Settings) -> CmdResult {
    let metadata = existing("metadata", pick_opt(args.metadata, &cfg.metadata))?;
    let splits = existing("splits", pick_opt(args.splits, &cfg.splits))?;
    let out = out_dir(pick_opt(args.out, &cfg.vocab).or(Some(splits.clone())))?;
    let cap = pick(args.vocab_cap, &cfg.vocab_cap, 3000);
    let min_count = pick(args.min_count, &cfg.min_count, 10);
    let manifest = splits.join("train.txt");
    if !manifest.exists() {
        return Err(usage(format!("split manifest not found: {} (run split)", manifest.display())));
    }
    let (corpus, _) = load_metadata(&metadata)?;
    let train = corpus.subset(&read_manifest(&manifest)?, Split::Train)?;
    let encoder = TextEncoder::fit(&train, min_count, Some(cap))?;
    encoder.comments.save(&out.join(COMMENT_VOCAB))?;
    encoder.titles.save(&out.join(TITLE_VOCAB))?;
    println!(
        "comment vocabulary {} terms, title vocabulary {} terms -> {}",
        encoder.comments.len(),
        encoder.titles.len(),
        out.display()
    );
    Ok(())
}

fn model_label(model: &JointModel) -> String {
    match model {
        JointModel::Cca(_) => "CCA".into(),
        JointModel::Cml(m) => format!("CML {}", m.network.arch().name()),
        JointModel::Amd(m) => format!("AMD-{} {}", m.attribute.name(), m.base.network.arch().name()),
    }
}

pub fn train(args: TrainArgs, cfg: &Settings) -> CmdResult {
    let kind = pick(args.model, &cfg.model, "cml".into());
    if !["cca", "cml", "amd"].contains(&kind.as_str()) {
        return Err(usage(format!("--model: unknown model `{kind}` (cca, cml, amd)")));
    }
    let arch: TextArch = parse("arch", &pick(args.arch, &cfg.arch, "bow".into()))?;
    let attribute: Attribute = parse("attribute", &pick(args.attribute, &cfg.attribute, "type".into()))?;
    let patience = pick(args.patience, &cfg.patience, 20);
    let tc = TrainConfig {
        batch_size: pick(args.batch, &cfg.batch, 32),
        lr: pick(args.lr, &cfg.lr, 1e-4),
        epochs: pick(args.epochs, &cfg.epochs, 500),
        seed: pick(args.seed, &cfg.seed, 0),
        patience: (patience > 0).then_some(patience),
        model_selection: ModelSelection::ValMedianRank,
        dim: pick(args.dim, &cfg.dim, DEFAULT_DIM),
        margin: pick(args.margin, &cfg.margin, DEFAULT_MARGIN),
        alpha: pick(args.alpha, &cfg.alpha, DEFAULT_ALPHA),
        arch,
        mlp_dim: DEFAULT_DIM,
        negatives_per_positive: 1,
    };
    let mut problems = tc.validate();
    let ridge = pick(args.ridge, &cfg.ridge, DEFAULT_RIDGE);
    if !(ridge >= 0.0) {
        problems.push(format!("ridge {ridge} must be non-negative"));
    }
    if !problems.is_empty() {
        return Err(usage(format!("invalid configuration:\n  {}", problems.join("\n  "))));
    }
    let out = out_dir(pick_opt(args.out, &cfg.out))?;
    let data = Data::resolve(args.data, cfg)?;

    let label_attr = (kind == "amd").then_some(attribute);
    let train = data.pairs(&data.split(Split::Train)?, label_attr)?;
    let exec = Exec::default();
    let model = match kind.as_str() {
        "cca" => JointModel::Cca(fit_cca_pairs(&train, tc.dim, ridge)?),
        _ => {
            let val = data.pairs(&data.split(Split::Val)?, label_attr)?;
            let (model, history) = if kind == "cml" {
                let (m, h) = train_cml(&train, &val, &tc, exec)?;
                (JointModel::Cml(m), h)
            } else {
                let n_classes = data.corpus.label_map(attribute).map_or(0, |m| m.len());
                let (m, h) = train_amd(&train, &val, &tc, attribute, n_classes, exec)?;
                (JointModel::Amd(m), h)
            };
            let path = out.join("history.csv");
            let file = File::create(&path).with_context(|| path.display().to_string())?;
            history.write_csv(BufWriter::new(file))?;
            if let Some(best) = history.records.iter().find(|r| r.epoch == history.best_epoch) {
                println!(
                    "ran {} epochs; best epoch {} (val MR t2i {}, i2t {})",
                    history.records.len(),
                    best.epoch,
                    best.val_mr_t2i,
                    best.val_mr_i2t
                );
            }
            model
        }
    };
    let path = out.join("model.ckpt");
    save_checkpoint(&model, &path)?;
    println!("{} checkpoint -> {}", model_label(&model), path.display());
    Ok(())
}

fn write_reports(out: Option<&Path>, rows: &[ReportRow]) -> CmdResult {
    let table = format_table(rows);
    print!("{table}");
    if let Some(dir) = out {
        let reports: Vec<EvalReport> = rows.iter().flat_map(|r| [r.t2i.clone(), r.i2t.clone()]).collect();
        let csv = dir.join("report.csv");
        write_report_csv(BufWriter::new(File::create(&csv).with_context(|| csv.display().to_string())?), &reports)?;
        fs::write(dir.join("report.txt"), table).with_context(|| dir.display().to_string())?;
    }
    Ok(())
}

pub fn evaluate(args: EvalArgs, cfg: &Settings) -> CmdResult {
    let out = match pick_opt(args.out, &cfg.out) {
        Some(d) => Some(out_dir(Some(d))?),
        None => None,
    };
    let seed = pick(args.seed, &cfg.seed, 0);
    let pool: Option<PoolLevel> = pick_opt(args.pool, &cfg.pool).map(|p| parse("pool", &p)).transpose()?;

    if args.random_baseline {
        if pool.is_some() {
            return Err(usage("--pool needs a checkpoint, not --random-baseline"));
        }
        let n = match args.n {
            Some(n) => n,
            None if args.data.metadata.is_some() || cfg.metadata.is_some() => {
                Data::resolve(args.data, cfg)?.split(Split::Test)?.len()
            }
            None => 1069,
        };
        if n == 0 || args.trials == 0 {
            return Err(usage("--n and --trials must be positive"));
        }
        let b = random_baseline(n, args.trials, seed, Exec::default())?;
        let report = |d: Direction| EvalReport {
            direction: d,
            recall: RECALL_KS.iter().map(|&k| (k, b.r_at(d, k))).collect(),
            median_rank: b.median_rank[d as usize],
            n_queries: n,
        };
        println!("random scorer, n = {n}, {} trials, seed {seed}", args.trials);
        return write_reports(
            out.as_deref(),
            &[ReportRow {
                label: "Random".into(),
                t2i: report(Direction::TextToImage),
                i2t: report(Direction::ImageToText),
            }],
        );
    }

    let checkpoint = existing("checkpoint", pick_opt(args.checkpoint, &cfg.checkpoint))?;
    let data = Data::resolve(args.data, cfg)?;
    let model = load_checkpoint(&checkpoint)?;
    let test_corpus = data.split(Split::Test)?;
    let test = data.pairs(&test_corpus, None)?;
    let (text, vis) = model.embed(&test, Exec::default())?;
    let [t2i, i2t] = eval_pairs(&text, &vis, Exec::default())?;
    println!("{} on {} test pairs", model_label(&model), test.len());
    write_reports(
        out.as_deref(),
        &[ReportRow {
            label: model_label(&model),
            t2i,
            i2t,
        }],
    )?;

    if let Some(level) = pool {
        let types: Vec<String> = test_corpus.samples().iter().map(|s| s.attributes.type_.clone()).collect();
        let score = |q: usize, i: usize| text[q].iter().zip(&vis[i]).map(|(a, b)| a * b).sum::<f64>();
        let report = pool_eval(score, &types, PoolTask::new(level, seed))?;
        let level_name = format!("{level:?}").to_lowercase();
        println!(
            "pool task ({level_name}, seed {seed}): accuracy {:.3} ({} of {}, {} skipped)",
            report.accuracy,
            report.correct,
            report.answered,
            report.skipped.len()
        );
        if let Some((_, reason)) = report.skipped.first() {
            println!("  skipped queries, e.g.: {reason}");
        }
        let mut csv = String::from("level,seed,type,correct,total,accuracy\n");
        for (ty, t) in &report.per_type {
            let acc = t.correct as f64 / t.total.max(1) as f64;
            println!("  {ty}: {acc:.3} ({} of {})", t.correct, t.total);
            csv.push_str(&format!("{level_name},{seed},{ty},{},{},{acc}\n", t.correct, t.total));
        }
        csv.push_str(&format!(
            "{level_name},{seed},all,{},{},{}\n",
            report.correct, report.answered, report.accuracy
        ));
        if let Some(dir) = &out {
            fs::write(dir.join("pool.csv"), csv).with_context(|| dir.display().to_string())?;
        }
    }
    Ok(())
}

fn top_k(scores: Vec<(String, f64)>, k: usize) {
    let mut ranked: Vec<(usize, (String, f64))> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1 .1.total_cmp(&a.1 .1).then(a.0.cmp(&b.0)));
    println!("id,score");
    for (_, (id, s)) in ranked.into_iter().take(k) {
        println!("{id},{s:.6}");
    }
}

pub fn retrieve(args: RetrieveArgs, cfg: &Settings) -> CmdResult {
    if args.k == 0 {
        return Err(usage("--k must be positive"));
    }
    let query = args.query.as_deref().map(str::trim);
    if query.is_none() && args.image.is_none() {
        return Err(usage("give --query TEXT or --image ID"));
    }
    if query.is_some_and(str::is_empty) {
        return Err(usage("--query is empty"));
    }
    let checkpoint = existing("checkpoint", pick_opt(args.checkpoint, &cfg.checkpoint))?;
    let data = Data::resolve(args.data, cfg)?;
    let model = load_checkpoint(&checkpoint)?;
    let gallery = data.pairs(&data.gallery(&args.gallery)?, None)?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    if let Some(q) = query {
        let comment = tfidf_encode(q, &data.encoder.comments);
        if comment.is_zero() {
            eprintln!(
                "warning: no query term is in the vocabulary; the query encodes as an all-zero text vector"
            );
        }
        let text = EncodedText {
            comment,
            title: SparseTextVector::zeros(data.encoder.titles.len()),
        };
        let p = model.project_text(&EncodedPair::new("query", text, Vec::new(), None))?;
        let scores = gallery
            .iter()
            .map(|g| Ok((g.id.clone(), dot(&p, &model.project_image(&g.image)?))))
            .collect::<Result<Vec<_>, artret_core::Error>>()?;
        top_k(scores, args.k);
    } else if let Some(id) = args.image {
        let image = data
            .features
            .get(&id)
            .or_else(|| {
                data.corpus
                    .samples()
                    .iter()
                    .find(|s| s.id == id)
                    .and_then(|s| data.features.get(&s.image_ref))
            })
            .ok_or_else(|| usage(format!("--image: no features for `{id}`")))?;
        let p = model.project_image(image.values())?;
        let scores = gallery
            .iter()
            .map(|g| Ok((g.id.clone(), dot(&p, &model.project_text(g)?))))
            .collect::<Result<Vec<_>, artret_core::Error>>()?;
        top_k(scores, args.k);
    }
    Ok(())
}
