//! Labeled datasets, negative sampling, cross-validation and model-set training.
//!
//! A training corpus is a JSON-lines file with one article per line:
//!
//! ```json
//! {"source_id": "Mumbai", "text": "...", "positives": [{"first_sentence": 2, "last_sentence": 3}]}
//! ```
//!
//! Positive ranges refer to sentence indices produced by
//! [`crate::textseg::analyze`].

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::excerpt::{extract_candidates, ranges_overlap, Excerpt, DEFAULT_MAX_DISTANCE};
use crate::features::{build_index, ordered_pairs, FeatureIndex};
use crate::pipeline::ModelSet;
use crate::svm::{label_for, train_smo, DistanceTag, Label, Model, ModelFileError, ModelMetadata, SvmError, TrainConfig};
use crate::textseg::{analyze_with, Lexicon};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("reading corpus")]
    Io(#[from] io::Error),
    #[error("corpus line {line}")]
    CorpusRecord { line: usize, source: serde_json::Error },
    #[error("article `{source_id}`: positive {first}..={last} is invalid ({reason})")]
    InvalidPositive {
        source_id: String,
        first: usize,
        last: usize,
        reason: String,
    },
    #[error("no eligible negative excerpts of distance {distance} for {positives} positives")]
    NoNegatives { distance: usize, positives: usize },
    #[error("cannot stratify {positives} positives / {negatives} negatives into {k} folds")]
    Stratification { k: usize, positives: usize, negatives: usize },
    #[error("training {tag} model")]
    Train { tag: DistanceTag, source: SvmError },
    #[error("dataset {0} is missing from the model set input")]
    MissingDataset(DistanceTag),
    #[error("building {tag} model")]
    Model { tag: DistanceTag, source: ModelFileError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositiveSpan {
    pub first_sentence: usize,
    pub last_sentence: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusArticle {
    pub source_id: String,
    pub text: String,
    #[serde(default)]
    pub positives: Vec<PositiveSpan>,
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusArticle>, TrainingError> {
    parse_corpus(BufReader::new(File::open(path)?))
}

pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<CorpusArticle>, TrainingError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let article = serde_json::from_str(&line).map_err(|source| TrainingError::CorpusRecord { line: n + 1, source })?;
        out.push(article);
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(mut writer: W, corpus: &[CorpusArticle]) -> io::Result<()> {
    for article in corpus {
        serde_json::to_writer(&mut writer, article)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExcerpt {
    pub source_id: String,
    pub first_sentence: usize,
    pub last_sentence: usize,
    pub distance: usize,
    pub generalized: Vec<String>,
    pub label: Label,
}

impl LabeledExcerpt {
    fn from_excerpt(e: &Excerpt, label: Label) -> Self {
        Self {
            source_id: e.source_id.clone(),
            first_sentence: e.first_sentence,
            last_sentence: e.last_sentence,
            distance: e.distance,
            generalized: e.generalized.clone(),
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub tag: DistanceTag,
    pub items: Vec<LabeledExcerpt>,
}

impl Dataset {
    pub fn count(&self, label: Label) -> usize {
        self.items.iter().filter(|i| i.label == label).count()
    }

    /// Both classes present.
    pub fn is_trainable(&self) -> bool {
        self.count(Label::Positive) > 0 && self.count(Label::Negative) > 0
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// The three per-distance datasets and their union.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSet {
    pub by_distance: [Dataset; 3],
    pub all: Dataset,
}

impl DatasetSet {
    pub fn get(&self, tag: DistanceTag) -> &Dataset {
        match tag.distance() {
            Some(d) => &self.by_distance[d],
            None => &self.all,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dataset> {
        self.by_distance.iter().chain(std::iter::once(&self.all))
    }

    /// Tags whose dataset lacks one of the two classes.
    pub fn untrainable(&self) -> Vec<DistanceTag> {
        self.iter().filter(|d| !d.is_trainable()).map(|d| d.tag).collect()
    }

    fn from_parts(by_distance: [Vec<LabeledExcerpt>; 3]) -> Self {
        let all_items: Vec<LabeledExcerpt> = by_distance.iter().flatten().cloned().collect();
        let [d0, d1, d2] = by_distance;
        DatasetSet {
            by_distance: [
                Dataset { tag: DistanceTag::D0, items: d0 },
                Dataset { tag: DistanceTag::D1, items: d1 },
                Dataset { tag: DistanceTag::D2, items: d2 },
            ],
            all: Dataset {
                tag: DistanceTag::All,
                items: all_items,
            },
        }
    }
}

/// Builds the four datasets with the bundled lexicon.
///
/// `ratio` is the number of negatives drawn per positive of the same
/// distance. Negatives are sampled without replacement from the candidate
/// excerpts of all corpus articles, skipping any window that shares a
/// sentence with a positive of its article. When fewer candidates exist than
/// requested, all of them are used.
pub fn build_datasets(corpus: &[CorpusArticle], ratio: f64, seed: u64) -> Result<DatasetSet, TrainingError> {
    build_datasets_with(corpus, ratio, seed, Lexicon::bundled())
}

pub fn build_datasets_with(
    corpus: &[CorpusArticle],
    ratio: f64,
    seed: u64,
    lexicon: &Lexicon,
) -> Result<DatasetSet, TrainingError> {
    let mut positives: [Vec<LabeledExcerpt>; 3] = Default::default();
    let mut pools: [Vec<LabeledExcerpt>; 3] = Default::default();

    for article in corpus {
        let doc = analyze_with(&article.text, &article.source_id, lexicon);
        let mut spans = Vec::with_capacity(article.positives.len());
        for p in &article.positives {
            let invalid = |reason: &str| TrainingError::InvalidPositive {
                source_id: article.source_id.clone(),
                first: p.first_sentence,
                last: p.last_sentence,
                reason: reason.to_string(),
            };
            if p.first_sentence > p.last_sentence {
                return Err(invalid("first sentence after last"));
            }
            if p.last_sentence >= doc.len() {
                return Err(invalid(&format!("article has {} sentences", doc.len())));
            }
            if p.last_sentence - p.first_sentence > DEFAULT_MAX_DISTANCE {
                return Err(invalid("distance above 2"));
            }
            let e = Excerpt::from_window(&doc, p.first_sentence, p.last_sentence);
            if e.generalized.is_empty() {
                return Err(invalid("no words"));
            }
            positives[e.distance].push(LabeledExcerpt::from_excerpt(&e, Label::Positive));
            spans.push((p.first_sentence, p.last_sentence));
        }
        for c in extract_candidates(&doc, DEFAULT_MAX_DISTANCE) {
            let window = (c.first_sentence, c.last_sentence);
            if spans.iter().any(|&s| ranges_overlap(s, window)) {
                continue;
            }
            pools[c.distance].push(LabeledExcerpt::from_excerpt(&c, Label::Negative));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_distance: [Vec<LabeledExcerpt>; 3] = Default::default();
    for distance in 0..3 {
        let pos = std::mem::take(&mut positives[distance]);
        let pool = std::mem::take(&mut pools[distance]);
        let wanted = (ratio * pos.len() as f64).round() as usize;
        let mut items = pos;
        if wanted > 0 {
            if pool.is_empty() {
                return Err(TrainingError::NoNegatives {
                    distance,
                    positives: items.len(),
                });
            }
            if pool.len() < wanted {
                tracing::warn!(distance, wanted, available = pool.len(), "fewer negative candidates than requested");
            }
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.shuffle(&mut rng);
            order.truncate(wanted.min(pool.len()));
            order.sort_unstable();
            items.extend(order.into_iter().map(|i| pool[i].clone()));
        }
        by_distance[distance] = items;
    }
    Ok(DatasetSet::from_parts(by_distance))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Negative, Label::Positive) => self.fp += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
            (Label::Positive, Label::Negative) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let predicted = self.tp + self.fp;
        (predicted > 0).then(|| self.tp as f64 / predicted as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let actual = self.tp + self.fn_;
        (actual > 0).then(|| self.tp as f64 / actual as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub confusion: Confusion,
    pub accuracy: f64,
    /// Size of the feature index built from this fold's training part.
    pub feature_count: usize,
    pub test_items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub tag: DistanceTag,
    pub k: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub folds: Vec<FoldResult>,
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, TrainingError> {
    let pos: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.items[i].label == Label::Positive).collect();
    let neg: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.items[i].label == Label::Negative).collect();
    if k < 2 || pos.len() < k || neg.len() < k {
        return Err(TrainingError::Stratification {
            k,
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    for mut class in [pos, neg] {
        class.shuffle(&mut rng);
        for (j, item) in class.into_iter().enumerate() {
            folds[j % k].push(item);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Index, training vectors and trained model for a set of labeled excerpts.
pub fn train_on<'a, I>(items: I, tag: DistanceTag, config: &TrainConfig, trained_on: &str) -> Result<Model, TrainingError>
where
    I: IntoIterator<Item = &'a LabeledExcerpt>,
{
    let items: Vec<&LabeledExcerpt> = items.into_iter().collect();
    let streams: Vec<&[String]> = items.iter().map(|i| i.generalized.as_slice()).collect();
    let index = build_index(&streams.iter().map(|s| s.to_vec()).collect::<Vec<_>>());
    let examples: Vec<_> = items
        .iter()
        .map(|i| (index.lookup(ordered_pairs(&i.generalized)), i.label))
        .collect();
    let solution = train_smo(&examples, config).map_err(|source| TrainingError::Train { tag, source })?;
    if !solution.converged {
        tracing::warn!(%tag, sweeps = solution.sweeps, "SMO stopped before all KKT conditions were met");
    }
    let metadata = ModelMetadata {
        positives: items.iter().filter(|i| i.label == Label::Positive).count(),
        negatives: items.iter().filter(|i| i.label == Label::Negative).count(),
        trained_on: trained_on.to_string(),
    };
    Model::new(&solution, index, tag, *config, metadata).map_err(|source| TrainingError::Model { tag, source })
}

fn evaluate(model: &Model, index: &FeatureIndex, items: &[&LabeledExcerpt]) -> Confusion {
    let mut confusion = Confusion::default();
    for item in items {
        let v = index.lookup(ordered_pairs(&item.generalized));
        confusion.record(item.label, label_for(model.decision(&v)));
    }
    confusion
}

/// Stratified k-fold cross-validation. Each fold builds its own feature
/// index from its training part only.
pub fn cross_validate(dataset: &Dataset, k: usize, config: &TrainConfig, seed: u64) -> Result<CvReport, TrainingError> {
    let folds = stratified_folds(dataset, k, seed)?;
    let results: Result<Vec<FoldResult>, TrainingError> = (0..k)
        .into_par_iter()
        .map(|f| {
            let test: Vec<&LabeledExcerpt> = folds[f].iter().map(|&i| &dataset.items[i]).collect();
            let train = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, fold)| fold.iter().map(|&i| &dataset.items[i]));
            let model = train_on(train, dataset.tag, config, "")?;
            let confusion = evaluate(&model, model.index(), &test);
            Ok(FoldResult {
                accuracy: confusion.accuracy(),
                confusion,
                feature_count: model.index().len(),
                test_items: test.len(),
            })
        })
        .collect();
    let folds = results?;
    let fold_accuracies: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
    Ok(CvReport {
        tag: dataset.tag,
        k,
        fold_accuracies,
        mean_accuracy,
        folds,
    })
}

/// Trains one model per dataset. Fails on the first dataset that lacks a class.
pub fn train_model_set(datasets: &DatasetSet, config: &TrainConfig, trained_on: &str) -> Result<ModelSet, TrainingError> {
    let results: Vec<Result<Model, TrainingError>> = DistanceTag::ALL_TAGS
        .par_iter()
        .map(|&tag| train_on(&datasets.get(tag).items, tag, config, trained_on))
        .collect();
    let models = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let [d0, d1, d2, all]: [Model; 4] = models.try_into().expect("four tags");
    Ok(ModelSet::new(d0, d1, d2, all).expect("tags assigned in order"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn renaming_article(i: usize) -> CorpusArticle {
        CorpusArticle {
            source_id: format!("town-{i}"),
            text: format!(
                "The town of Alder{i} was renamed Birch{i} in 1901. \
                 Visitors from Cedar{i} met traders from Dover{i} in 1950. \
                 Later the market of Elm{i} hosted merchants from Fir{i} in 1960."
            ),
            positives: vec![PositiveSpan {
                first_sentence: 0,
                last_sentence: 0,
            }],
        }
    }

    #[test]
    fn ratio_arithmetic() {
        let corpus: Vec<_> = (0..10).map(renaming_article).collect();
        let sets = build_datasets(&corpus, 1.0, 7).unwrap();
        let d0 = sets.get(DistanceTag::D0);
        assert_eq!(d0.count(Label::Positive), 10);
        assert_eq!(d0.count(Label::Negative), 10);
        assert_eq!(sets.all.len(), sets.by_distance.iter().map(Dataset::len).sum::<usize>());
        assert_eq!(sets.untrainable(), vec![DistanceTag::D1, DistanceTag::D2]);
        assert_eq!(sets, build_datasets(&corpus, 1.0, 7).unwrap());
    }

    #[test]
    fn negatives_never_overlap_positives() {
        let corpus: Vec<_> = (0..5).map(renaming_article).collect();
        let sets = build_datasets(&corpus, 3.0, 1).unwrap();
        for article in &corpus {
            for item in sets.all.items.iter().filter(|i| i.label == Label::Negative && i.source_id == article.source_id) {
                for p in &article.positives {
                    assert!(!ranges_overlap((p.first_sentence, p.last_sentence), (item.first_sentence, item.last_sentence)));
                }
            }
        }
    }

    #[test]
    fn invalid_positive_and_missing_negatives() {
        let mut a = renaming_article(0);
        a.positives[0].last_sentence = 9;
        assert!(matches!(build_datasets(&[a], 1.0, 0), Err(TrainingError::InvalidPositive { .. })));

        let lonely = CorpusArticle {
            source_id: "x".into(),
            text: "Alder was renamed Birch in 1901.".into(),
            positives: vec![PositiveSpan {
                first_sentence: 0,
                last_sentence: 0,
            }],
        };
        assert!(matches!(
            build_datasets(&[lonely], 1.0, 0),
            Err(TrainingError::NoNegatives { distance: 0, .. })
        ));
    }

    #[test]
    fn corpus_parse_reports_line() {
        let text = "{\"source_id\":\"a\",\"text\":\"x\"}\n\nnot json\n";
        match parse_corpus(text.as_bytes()) {
            Err(TrainingError::CorpusRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let ok = parse_corpus("{\"source_id\":\"a\",\"text\":\"x\"}\n".as_bytes()).unwrap();
        assert!(ok[0].positives.is_empty());
    }

    fn item(stream: &str, label: Label) -> LabeledExcerpt {
        LabeledExcerpt {
            source_id: "s".into(),
            first_sentence: 0,
            last_sentence: 0,
            distance: 0,
            generalized: stream.split(' ').map(String::from).collect(),
            label,
        }
    }

    #[test]
    fn duplicates_are_memorized() {
        let ds = Dataset {
            tag: DistanceTag::D0,
            items: vec![
                item("N was renamed N in Y", Label::Positive),
                item("N was renamed N in Y", Label::Positive),
                item("N visited N in Y", Label::Negative),
                item("N visited N in Y", Label::Negative),
            ],
        };
        let report = cross_validate(&ds, 2, &TrainConfig::default(), 3).unwrap();
        assert_eq!(report.fold_accuracies, vec![1.0, 1.0]);
        assert_eq!(report.mean_accuracy, 1.0);
        for f in &report.folds {
            assert_eq!(f.accuracy, f.confusion.accuracy());
        }
    }

    #[test]
    fn folds_partition_items() {
        let items: Vec<_> = (0..23)
            .map(|i| item(&format!("w{i} N Y"), if i % 3 == 0 { Label::Positive } else { Label::Negative }))
            .collect();
        let ds = Dataset { tag: DistanceTag::All, items };
        for seed in [1, 2] {
            let folds = stratified_folds(&ds, 4, seed).unwrap();
            let mut all: Vec<usize> = folds.concat();
            all.sort_unstable();
            assert_eq!(all, (0..23).collect::<Vec<_>>());
            for f in &folds {
                let pos = f.iter().filter(|&&i| ds.items[i].label == Label::Positive).count();
                assert!((1..=2).contains(&pos));
            }
        }
        assert!(matches!(stratified_folds(&ds, 10, 1), Err(TrainingError::Stratification { .. })));
    }

    #[test]
    fn single_class_dataset_names_its_tag() {
        let corpus: Vec<_> = (0..4).map(renaming_article).collect();
        let sets = build_datasets(&corpus, 1.0, 0).unwrap();
        match train_model_set(&sets, &TrainConfig::default(), "2026-01-01") {
            Err(TrainingError::Train { tag, source }) => {
                assert_eq!(tag, DistanceTag::D1);
                assert!(matches!(source, SvmError::Empty));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
