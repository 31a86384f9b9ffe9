//! The three evaluation protocols: patch verification, image matching and
//! patch retrieval, plus the per-task summary.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptors::DescriptorTable;
use crate::error::{Error, Result};
use crate::geometry::NoiseLevel;
use crate::metrics::{average_precision, mean_ap, sort_by_score};
use crate::patch::{variant_index, PatchCorpus, PatchId, PatchIndex, VARIANTS};
use crate::rng::{self, tag};
use crate::synthesis::{SequenceKind, TARGETS};

/// Positives per retrieval collection: one per non-query image.
pub const RETRIEVAL_POSITIVES: usize = TARGETS;
const IMAGES: usize = TARGETS + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Verification,
    Matching,
    Retrieval,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Verification, Task::Matching, Task::Retrieval];

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Verification => "verification",
            Task::Matching => "matching",
            Task::Retrieval => "retrieval",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "verification" | "verif" => Ok(Task::Verification),
            "matching" | "match" => Ok(Task::Matching),
            "retrieval" | "retr" => Ok(Task::Retrieval),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

/// Source of negative verification pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NegSource {
    SameSeq,
    DiffSeq,
}

impl NegSource {
    pub const ALL: [NegSource; 2] = [NegSource::SameSeq, NegSource::DiffSeq];

    pub fn as_str(&self) -> &'static str {
        match self {
            NegSource::SameSeq => "sameseq",
            NegSource::DiffSeq => "diffseq",
        }
    }
}

/// Produces a confidence that two patches correspond.
pub trait Scorer: Sync {
    fn score(&self, a: PatchId, b: PatchId) -> f64;
}

/// Negated descriptor distance.
pub struct DescriptorScorer<'a> {
    pub table: &'a DescriptorTable,
    pub index: &'a PatchIndex,
}

impl Scorer for DescriptorScorer<'_> {
    #[inline]
    fn score(&self, a: PatchId, b: PatchId) -> f64 {
        -self.table.distance(self.index.slot(a), self.index.slot(b))
    }
}

/// Ground truth: 1 for corresponding patches, 0 otherwise.
pub struct OracleScorer;

impl Scorer for OracleScorer {
    fn score(&self, a: PatchId, b: PatchId) -> f64 {
        if a.corresponds(&b) {
            1.0
        } else {
            0.0
        }
    }
}

/// Scores uniform in `[0, 1)`, a deterministic hash of the seed and the pair.
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn score(&self, a: PatchId, b: PatchId) -> f64 {
        let key = |p: PatchId| ((p.seq as u64) << 40) | ((p.region as u64) << 8) | ((p.variant as u64) << 4) | p.image as u64;
        let h = rng::derive_seed(self.seed, &[key(a), key(b)]);
        (h >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Maps a uniform region draw to `(sequence, region)`.
struct RegionSampler<'a> {
    index: &'a PatchIndex,
    cumulative: Vec<usize>,
}

impl<'a> RegionSampler<'a> {
    fn new(index: &'a PatchIndex) -> Self {
        let mut cumulative = Vec::with_capacity(index.sequences() + 1);
        let mut acc = 0;
        cumulative.push(0);
        for s in 0..index.sequences() {
            acc += index.regions(s);
            cumulative.push(acc);
        }
        RegionSampler { index, cumulative }
    }

    fn total(&self) -> usize {
        *self.cumulative.last().unwrap()
    }

    fn locate(&self, g: usize) -> (usize, usize) {
        let s = self.cumulative.partition_point(|&c| c <= g) - 1;
        (s, g - self.cumulative[s])
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        self.locate(rng.gen_range(0..self.total()))
    }

    /// A region outside sequence `seq`.
    fn draw_outside<R: Rng>(&self, rng: &mut R, seq: usize) -> (usize, usize) {
        let skip = self.index.regions(seq);
        let mut g = rng.gen_range(0..self.total() - skip);
        if g >= self.cumulative[seq] {
            g += skip;
        }
        self.locate(g)
    }
}

/// Labeled pairs of one verification set.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationSet {
    pub variant: NoiseLevel,
    pub neg_source: NegSource,
    pub pairs: Vec<(PatchId, PatchId, i8)>,
}

fn check_variant(variant: NoiseLevel) -> Result<usize> {
    variant_index(variant)
        .ok_or_else(|| Error::InvalidParameter(format!("{variant} is not an evaluated variant")))
}

/// Draws `n` distinct unordered pairs by rejection.
fn sample_distinct<R: Rng>(
    rng: &mut R,
    n: usize,
    capacity: usize,
    what: &str,
    index: &PatchIndex,
    mut draw: impl FnMut(&mut R) -> (PatchId, PatchId),
) -> Result<Vec<(PatchId, PatchId)>> {
    if n > capacity {
        return Err(Error::Corpus(format!(
            "corpus holds only {capacity} distinct {what} pairs, {n} requested"
        )));
    }
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let budget = 64 * n + 1024;
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Corpus(format!("could not draw {n} distinct {what} pairs")));
        }
        let (a, b) = draw(rng);
        let (sa, sb) = (index.slot(a), index.slot(b));
        if seen.insert((sa.min(sb), sa.max(sb))) {
            out.push((a, b));
        }
    }
    Ok(out)
}

/// Samples positives (two images of the same region) and negatives (two
/// different regions, within one sequence or across sequences). Positives
/// depend only on the seed and variant, so both negative sources share them.
pub fn build_verification(
    index: &PatchIndex,
    variant: NoiseLevel,
    neg_source: NegSource,
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<VerificationSet> {
    let v = check_variant(variant)?;
    let sampler = RegionSampler::new(index);
    if sampler.total() == 0 {
        return Err(Error::Corpus("empty corpus".into()));
    }
    let image_pairs: Vec<(usize, usize)> =
        (0..IMAGES).flat_map(|i| (i + 1..IMAGES).map(move |j| (i, j))).collect();
    let mut pos_rng = rng::substream(seed, &[tag::VERIFICATION, v as u64, 0]);
    let positives = sample_distinct(&mut pos_rng, n_pos, sampler.total() * image_pairs.len(), "positive", index, |r| {
        let (s, g) = sampler.draw(r);
        let (i, j) = image_pairs[r.gen_range(0..image_pairs.len())];
        (PatchId::new(s, g, v, i), PatchId::new(s, g, v, j))
    })?;

    let mut neg_rng = rng::substream(seed, &[tag::VERIFICATION, v as u64, 1 + neg_source as u64]);
    let sizes: Vec<usize> = (0..index.sequences()).map(|s| index.regions(s)).collect();
    let total = sampler.total();
    let capacity = match neg_source {
        NegSource::SameSeq => sizes.iter().map(|&n| n * n.saturating_sub(1) / 2).sum::<usize>() * IMAGES * IMAGES,
        NegSource::DiffSeq => sizes.iter().map(|&n| n * (total - n)).sum::<usize>() / 2 * IMAGES * IMAGES,
    };
    let negatives = sample_distinct(&mut neg_rng, n_neg, capacity, "negative", index, |r| {
        let (s, a) = loop {
            let (s, a) = sampler.draw(r);
            if neg_source == NegSource::DiffSeq || sizes[s] > 1 {
                break (s, a);
            }
        };
        let (t, b) = match neg_source {
            NegSource::SameSeq => {
                let b = r.gen_range(0..sizes[s] - 1);
                (s, if b >= a { b + 1 } else { b })
            }
            NegSource::DiffSeq => sampler.draw_outside(r, s),
        };
        (
            PatchId::new(s, a, v, r.gen_range(0..IMAGES)),
            PatchId::new(t, b, v, r.gen_range(0..IMAGES)),
        )
    })?;

    let mut pairs: Vec<(PatchId, PatchId, i8)> = positives
        .into_iter()
        .map(|(a, b)| (a, b, 1))
        .chain(negatives.into_iter().map(|(a, b)| (a, b, -1)))
        .collect();
    pairs.shuffle(&mut neg_rng);
    Ok(VerificationSet {
        variant,
        neg_source,
        pairs,
    })
}

pub fn run_verification(set: &VerificationSet, scorer: &dyn Scorer) -> Result<f64> {
    let scores: Vec<f64> = set.pairs.par_iter().map(|&(a, b, _)| scorer.score(a, b)).collect();
    let labels: Vec<i8> = set.pairs.iter().map(|p| p.2).collect();
    sort_by_score(&scores, &labels)?.average_precision()
}

/// Reference image of one sequence against target `target` (1-based) under
/// one variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchingPair {
    pub seq: usize,
    pub kind: SequenceKind,
    pub variant: NoiseLevel,
    pub target: usize,
}

pub fn matching_pairs(corpus: &PatchCorpus) -> Vec<MatchingPair> {
    let mut out = Vec::new();
    for variant in VARIANTS {
        for (seq, sp) in corpus.sequences.iter().enumerate() {
            for target in 1..=TARGETS {
                out.push(MatchingPair {
                    seq,
                    kind: sp.kind,
                    variant,
                    target,
                });
            }
        }
    }
    out
}

/// Nearest-neighbour assignment of every reference patch among the target
/// patches (ties go to the lowest index), ranked by score, with K = N.
pub fn run_matching(pair: &MatchingPair, index: &PatchIndex, scorer: &dyn Scorer) -> Result<f64> {
    let v = check_variant(pair.variant)?;
    let n = index.regions(pair.seq);
    if n == 0 {
        return Err(Error::Corpus("matching needs non-empty lists".into()));
    }
    let mut scores = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let a = PatchId::new(pair.seq, i, v, 0);
        let mut best = (0usize, f64::NEG_INFINITY);
        for j in 0..n {
            let s = scorer.score(a, PatchId::new(pair.seq, j, v, pair.target));
            if s > best.1 {
                best = (j, s);
            }
        }
        scores.push(best.1);
        labels.push(if best.0 == i { 1 } else { -1 });
    }
    sort_by_score(&scores, &labels)?.with_k(n)?.average_precision()
}

/// Query regions and the recipe for their pools; collections are generated
/// on demand so memory stays bounded by one pool per worker.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalPlan {
    pub queries: Vec<(usize, usize)>,
    pub n_distractors: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalCollection {
    pub query: PatchId,
    pub pool: Vec<(PatchId, i8)>,
}

/// Draws `n_queries` distinct query regions, shared by all variants.
pub fn build_retrieval(index: &PatchIndex, n_queries: usize, n_distractors: usize, seed: u64) -> Result<RetrievalPlan> {
    let sampler = RegionSampler::new(index);
    if index.sequences() < 2 {
        return Err(Error::Corpus("retrieval needs at least two sequences".into()));
    }
    if n_queries > sampler.total() {
        return Err(Error::Corpus(format!(
            "{n_queries} queries requested from {} regions",
            sampler.total()
        )));
    }
    let smallest_outside = (0..index.sequences())
        .map(|s| (sampler.total() - index.regions(s)) * IMAGES)
        .min()
        .unwrap_or(0);
    if n_distractors > smallest_outside {
        return Err(Error::Corpus(format!(
            "{n_distractors} distractors requested, some sequence has only {smallest_outside} outside patches"
        )));
    }
    let mut r = rng::substream(seed, &[tag::RETRIEVAL]);
    let mut picks = rand::seq::index::sample(&mut r, sampler.total(), n_queries).into_vec();
    picks.sort_unstable();
    Ok(RetrievalPlan {
        queries: picks.into_iter().map(|g| sampler.locate(g)).collect(),
        n_distractors,
        seed,
    })
}

impl RetrievalPlan {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Collection `q` under `variant`: the reference patch as query, its five
    /// target patches (+1), distractors from other sequences (-1) and
    /// same-sequence non-corresponding patches (0) in the proportion they
    /// would have under a draw from all sequences.
    pub fn collection(&self, index: &PatchIndex, q: usize, variant: NoiseLevel) -> Result<RetrievalCollection> {
        let v = check_variant(variant)?;
        let (s, g) = self.queries[q];
        let sampler = RegionSampler::new(index);
        let mut r = rng::substream(self.seed, &[tag::RETRIEVAL, v as u64 + 1, q as u64]);
        let own = index.regions(s);
        let outside = sampler.total() - own;
        let n_ignored = if own > 1 {
            ((self.n_distractors as f64 * own as f64 / outside as f64).round() as usize)
                .min((own - 1) * IMAGES)
        } else {
            0
        };
        let mut pool: Vec<(PatchId, i8)> = (1..=TARGETS).map(|k| (PatchId::new(s, g, v, k), 1)).collect();
        pool.reserve(self.n_distractors + n_ignored);
        let mut seen = HashSet::with_capacity(self.n_distractors + n_ignored);
        while pool.len() < RETRIEVAL_POSITIVES + self.n_distractors {
            let (t, b) = sampler.draw_outside(&mut r, s);
            let id = PatchId::new(t, b, v, r.gen_range(0..IMAGES));
            if seen.insert(index.slot(id)) {
                pool.push((id, -1));
            }
        }
        while pool.len() < RETRIEVAL_POSITIVES + self.n_distractors + n_ignored {
            let b = r.gen_range(0..own - 1);
            let b = if b >= g { b + 1 } else { b };
            let id = PatchId::new(s, b, v, r.gen_range(0..IMAGES));
            if seen.insert(index.slot(id)) {
                pool.push((id, 0));
            }
        }
        pool.shuffle(&mut r);
        Ok(RetrievalCollection {
            query: PatchId::new(s, g, v, 0),
            pool,
        })
    }
}

pub fn run_retrieval(coll: &RetrievalCollection, scorer: &dyn Scorer) -> Result<f64> {
    let scores: Vec<f64> = coll.pool.iter().map(|&(p, _)| scorer.score(coll.query, p)).collect();
    let labels: Vec<i8> = coll.pool.iter().map(|p| p.1).collect();
    average_precision(sort_by_score(&scores, &labels)?.labels(), Some(RETRIEVAL_POSITIVES))
}

/// One AP entry of the detailed results.
#[derive(Debug, Clone, PartialEq)]
pub struct ApRecord {
    pub task: Task,
    pub variant: NoiseLevel,
    pub subvariant: String,
    pub id: String,
    pub ap: f64,
}

/// Set sizes of the protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSizes {
    pub verification_positives: usize,
    pub verification_negatives: usize,
    pub retrieval_queries: usize,
    pub retrieval_distractors: usize,
}

impl ProtocolSizes {
    pub const DESK: ProtocolSizes = ProtocolSizes {
        verification_positives: 2_000,
        verification_negatives: 10_000,
        retrieval_queries: 200,
        retrieval_distractors: 2_000,
    };
    pub const PAPER: ProtocolSizes = ProtocolSizes {
        verification_positives: 200_000,
        verification_negatives: 1_000_000,
        retrieval_queries: 10_000,
        retrieval_distractors: 20_000,
    };
}

/// Sets and collections shared by every descriptor of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocols {
    pub verification: Vec<VerificationSet>,
    pub matching: Vec<MatchingPair>,
    pub retrieval: RetrievalPlan,
}

impl Protocols {
    pub fn build(corpus: &PatchCorpus, index: &PatchIndex, sizes: &ProtocolSizes, tasks: &[Task], seed: u64) -> Result<Self> {
        let mut verification = Vec::new();
        if tasks.contains(&Task::Verification) {
            for variant in VARIANTS {
                for src in NegSource::ALL {
                    verification.push(build_verification(
                        index,
                        variant,
                        src,
                        sizes.verification_positives,
                        sizes.verification_negatives,
                        seed,
                    )?);
                }
            }
        }
        let matching = if tasks.contains(&Task::Matching) {
            matching_pairs(corpus)
        } else {
            Vec::new()
        };
        let retrieval = if tasks.contains(&Task::Retrieval) {
            build_retrieval(index, sizes.retrieval_queries, sizes.retrieval_distractors, seed)?
        } else {
            RetrievalPlan {
                queries: Vec::new(),
                n_distractors: 0,
                seed,
            }
        };
        Ok(Protocols {
            verification,
            matching,
            retrieval,
        })
    }

    pub fn run(&self, task: Task, corpus: &PatchCorpus, index: &PatchIndex, scorer: &dyn Scorer) -> Result<Vec<ApRecord>> {
        match task {
            Task::Verification => self
                .verification
                .iter()
                .map(|set| {
                    Ok(ApRecord {
                        task,
                        variant: set.variant,
                        subvariant: set.neg_source.as_str().into(),
                        id: "all".into(),
                        ap: run_verification(set, scorer)?,
                    })
                })
                .collect(),
            Task::Matching => self
                .matching
                .par_iter()
                .map(|pair| {
                    Ok(ApRecord {
                        task,
                        variant: pair.variant,
                        subvariant: pair.kind.as_str().into(),
                        id: format!("{}:{}", corpus.sequences[pair.seq].id, pair.target),
                        ap: run_matching(pair, index, scorer)?,
                    })
                })
                .collect(),
            Task::Retrieval => {
                let jobs: Vec<(NoiseLevel, usize)> = VARIANTS
                    .iter()
                    .flat_map(|&v| (0..self.retrieval.len()).map(move |q| (v, q)))
                    .collect();
                jobs.par_iter()
                    .map(|&(variant, q)| {
                        let coll = self.retrieval.collection(index, q, variant)?;
                        let (s, g) = self.retrieval.queries[q];
                        Ok(ApRecord {
                            task,
                            variant,
                            subvariant: "all".into(),
                            id: format!("{}:{}", corpus.sequences[s].id, g),
                            ap: run_retrieval(&coll, scorer)?,
                        })
                    })
                    .collect()
            }
        }
    }
}

/// Subvariants expected in the summary of `task` on `corpus`.
pub fn expected_subvariants(task: Task, corpus: &PatchCorpus) -> Vec<String> {
    match task {
        Task::Verification => NegSource::ALL.iter().map(|s| s.as_str().to_string()).collect(),
        Task::Matching => [SequenceKind::Viewpoint, SequenceKind::Illumination]
            .iter()
            .filter(|k| corpus.sequences.iter().any(|s| s.kind == **k))
            .map(|k| k.as_str().to_string())
            .collect(),
        Task::Retrieval => vec!["all".into()],
    }
}

/// Mean AP of one (variant, subvariant) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub variant: NoiseLevel,
    pub subvariant: String,
    pub map: f64,
}

/// One row of the report: the task bar and its per-variant breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub descriptor: String,
    pub task: Task,
    /// Mean of the markers.
    pub map: f64,
    /// Mean of the markers of Easy, Hard and Tough.
    pub by_variant: [f64; 3],
    pub markers: Vec<Marker>,
}

pub fn summarize(descriptor: &str, task: Task, records: &[ApRecord], subvariants: &[String]) -> Result<SummaryRow> {
    let mut markers = Vec::new();
    for variant in VARIANTS {
        for sub in subvariants {
            let aps: Vec<f64> = records
                .iter()
                .filter(|r| r.task == task && r.variant == variant && &r.subvariant == sub)
                .map(|r| r.ap)
                .collect();
            if aps.is_empty() {
                return Err(Error::Metric(format!("{descriptor}: no {task} results for {variant}/{sub}")));
            }
            markers.push(Marker {
                variant,
                subvariant: sub.clone(),
                map: mean_ap(&aps)?,
            });
        }
    }
    let by_variant = std::array::from_fn(|v| {
        let m: Vec<f64> = markers.iter().filter(|m| m.variant == VARIANTS[v]).map(|m| m.map).collect();
        m.iter().sum::<f64>() / m.len() as f64
    });
    Ok(SummaryRow {
        descriptor: descriptor.into(),
        task,
        map: mean_ap(&markers.iter().map(|m| m.map).collect::<Vec<_>>())?,
        by_variant,
        markers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(sizes: &[usize]) -> PatchIndex {
        PatchIndex::from_sizes(sizes.to_vec())
    }

    #[test]
    fn verification_sets_are_well_formed() {
        let idx = index(&[30, 40, 25]);
        for src in NegSource::ALL {
            let set = build_verification(&idx, NoiseLevel::Hard, src, 100, 500, 7).unwrap();
            assert_eq!(set.pairs.iter().filter(|p| p.2 == 1).count(), 100);
            assert_eq!(set.pairs.iter().filter(|p| p.2 == -1).count(), 500);
            for (a, b, y) in &set.pairs {
                assert_eq!(*y == 1, a.corresponds(b));
                if *y == 1 {
                    assert_ne!(a.image, b.image);
                }
                match (y, src) {
                    (-1, NegSource::SameSeq) => assert_eq!(a.seq, b.seq),
                    (-1, NegSource::DiffSeq) => assert_ne!(a.seq, b.seq),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn positives_are_shared_between_negative_sources() {
        let idx = index(&[30, 40]);
        let pos = |src| {
            let mut p: Vec<_> = build_verification(&idx, NoiseLevel::Easy, src, 50, 60, 1)
                .unwrap()
                .pairs
                .into_iter()
                .filter(|p| p.2 == 1)
                .collect();
            p.sort();
            p
        };
        assert_eq!(pos(NegSource::SameSeq), pos(NegSource::DiffSeq));
    }

    #[test]
    fn verification_needs_enough_pairs() {
        let idx = index(&[2, 2]);
        assert!(build_verification(&idx, NoiseLevel::Easy, NegSource::DiffSeq, 61, 10, 1).is_err());
        assert!(build_verification(&idx, NoiseLevel::Easy, NegSource::DiffSeq, 60, 10, 1).is_ok());
        assert!(build_verification(&idx, NoiseLevel::None, NegSource::DiffSeq, 1, 1, 1).is_err());
    }

    #[test]
    fn perfect_and_anti_perfect_scorers() {
        let idx = index(&[20, 20]);
        let set = build_verification(&idx, NoiseLevel::Tough, NegSource::SameSeq, 50, 200, 3).unwrap();
        assert_eq!(run_verification(&set, &OracleScorer).unwrap(), 1.0);
        struct Anti;
        impl Scorer for Anti {
            fn score(&self, a: PatchId, b: PatchId) -> f64 {
                if a.corresponds(&b) { 0.0 } else { 1.0 }
            }
        }
        let a = PatchId::new(0, 0, 0, 0);
        let tiny = VerificationSet {
            variant: NoiseLevel::Easy,
            neg_source: NegSource::SameSeq,
            pairs: (0..6)
                .map(|k| if k < 3 { (a, PatchId::new(0, 0, 0, k + 1), 1) } else { (a, PatchId::new(0, k, 0, 1), -1) })
                .collect(),
        };
        let ap = run_verification(&tiny, &Anti).unwrap();
        assert!((ap - (1.0 / 4.0 + 2.0 / 5.0 + 3.0 / 6.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_scorer_is_near_chance() {
        let idx = index(&[40, 40, 40]);
        let set = build_verification(&idx, NoiseLevel::Easy, NegSource::DiffSeq, 200, 1000, 5).unwrap();
        let aps: Vec<f64> = (0..50).map(|t| run_verification(&set, &RandomScorer { seed: t }).unwrap()).collect();
        let mean = aps.iter().sum::<f64>() / 50.0;
        let sd = (aps.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 49.0).sqrt();
        let chance = 200.0 / 1200.0;
        assert!((mean - chance).abs() < 3.0 * sd.max(1e-3), "mean {mean} sd {sd}");
    }

    #[test]
    fn verification_is_order_invariant_without_ties() {
        let idx = index(&[20, 20]);
        let mut set = build_verification(&idx, NoiseLevel::Hard, NegSource::DiffSeq, 40, 100, 9).unwrap();
        let scorer = RandomScorer { seed: 4 };
        let ap = run_verification(&set, &scorer).unwrap();
        set.pairs.reverse();
        assert_eq!(run_verification(&set, &scorer).unwrap(), ap);
    }

    #[test]
    fn oracle_matching_is_perfect() {
        let idx = index(&[15]);
        let pair = MatchingPair { seq: 0, kind: SequenceKind::Viewpoint, variant: NoiseLevel::Tough, target: 3 };
        assert_eq!(run_matching(&pair, &idx, &OracleScorer).unwrap(), 1.0);
    }

    #[test]
    fn constant_scorer_matches_everything_to_the_first_patch() {
        struct Constant;
        impl Scorer for Constant {
            fn score(&self, _: PatchId, _: PatchId) -> f64 {
                0.0
            }
        }
        let n = 10;
        let idx = index(&[n]);
        let pair = MatchingPair { seq: 0, kind: SequenceKind::Viewpoint, variant: NoiseLevel::Easy, target: 1 };
        let ap = run_matching(&pair, &idx, &Constant).unwrap();
        // Only reference 0 is assigned correctly; with equal scores it keeps rank 1.
        let mut y = vec![-1i8; n];
        y[0] = 1;
        assert_eq!(ap, average_precision(&y, Some(n)).unwrap());
        assert_eq!(ap, 1.0 / n as f64);
    }

    #[test]
    fn half_correct_matching_scores_about_half() {
        struct Half;
        impl Scorer for Half {
            fn score(&self, a: PatchId, b: PatchId) -> f64 {
                if a.region < 10 {
                    if a.region == b.region { 1.0 } else { 0.0 }
                } else if b.region == 0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
        let idx = index(&[20]);
        let pair = MatchingPair { seq: 0, kind: SequenceKind::Viewpoint, variant: NoiseLevel::Easy, target: 1 };
        assert_eq!(run_matching(&pair, &idx, &Half).unwrap(), 0.5);
    }

    #[test]
    fn retrieval_collections_are_well_formed() {
        let idx = index(&[30, 20, 50]);
        let plan = build_retrieval(&idx, 25, 80, 11).unwrap();
        assert_eq!(plan.len(), 25);
        for q in 0..plan.len() {
            let c = plan.collection(&idx, q, NoiseLevel::Hard).unwrap();
            assert_eq!(c.pool.iter().filter(|p| p.1 == 1).count(), 5);
            assert_eq!(c.pool.iter().filter(|p| p.1 == -1).count(), 80);
            assert!(c.pool.iter().all(|p| p.0 != c.query));
            for (p, y) in &c.pool {
                match y {
                    1 => assert!(p.corresponds(&c.query)),
                    0 => assert!(p.seq == c.query.seq && !p.corresponds(&c.query)),
                    _ => assert_ne!(p.seq, c.query.seq),
                }
            }
            assert!(c.pool.iter().any(|p| p.1 == 0));
            assert_eq!(run_retrieval(&c, &OracleScorer).unwrap(), 1.0);
        }
        assert!(build_retrieval(&index(&[30]), 5, 10, 1).is_err());
        assert!(build_retrieval(&idx, 101, 10, 1).is_err());
    }

    #[test]
    fn retrieval_ignores_zero_labels() {
        let idx = index(&[30, 20, 50]);
        let plan = build_retrieval(&idx, 5, 40, 2).unwrap();
        let scorer = RandomScorer { seed: 8 };
        for q in 0..5 {
            let c = plan.collection(&idx, q, NoiseLevel::Easy).unwrap();
            let stripped = RetrievalCollection {
                query: c.query,
                pool: c.pool.iter().copied().filter(|p| p.1 != 0).collect(),
            };
            assert_eq!(run_retrieval(&c, &scorer).unwrap(), run_retrieval(&stripped, &scorer).unwrap());
        }
    }

    #[test]
    fn one_positive_at_the_bottom() {
        struct Sink;
        impl Scorer for Sink {
            fn score(&self, a: PatchId, b: PatchId) -> f64 {
                match (a.corresponds(&b), b.image) {
                    (true, 5) => -1.0,
                    (true, _) => 1.0,
                    _ => 0.0,
                }
            }
        }
        let idx = index(&[30, 20]);
        let plan = build_retrieval(&idx, 3, 30, 4).unwrap();
        let c = plan.collection(&idx, 0, NoiseLevel::Easy).unwrap();
        let negatives = c.pool.iter().filter(|p| p.1 == -1).count();
        let ap = run_retrieval(&c, &Sink).unwrap();
        let expected = (1.0 + 1.0 + 1.0 + 1.0 + 5.0 / (5 + negatives) as f64) / 5.0;
        assert!((ap - expected).abs() < 1e-12);
    }

    #[test]
    fn summary_bar_is_the_mean_of_markers() {
        let mut records = Vec::new();
        for (v, variant) in VARIANTS.iter().enumerate() {
            for (s, sub) in ["sameseq", "diffseq"].iter().enumerate() {
                records.push(ApRecord {
                    task: Task::Verification,
                    variant: *variant,
                    subvariant: sub.to_string(),
                    id: "all".into(),
                    ap: 0.1 * (v * 2 + s) as f64,
                });
            }
        }
        let subs = vec!["sameseq".to_string(), "diffseq".to_string()];
        let row = summarize("sift", Task::Verification, &records, &subs).unwrap();
        assert_eq!(row.markers.len(), 6);
        assert!((row.map - 0.25).abs() < 1e-12);
        assert!((row.by_variant[0] - 0.05).abs() < 1e-12);
        records.pop();
        assert!(summarize("sift", Task::Verification, &records, &subs).is_err());
    }

    #[test]
    fn sets_are_deterministic() {
        let idx = index(&[30, 40]);
        let a = build_verification(&idx, NoiseLevel::Hard, NegSource::SameSeq, 50, 80, 3).unwrap();
        let b = build_verification(&idx, NoiseLevel::Hard, NegSource::SameSeq, 50, 80, 3).unwrap();
        assert_eq!(a, b);
        let p = build_retrieval(&idx, 10, 20, 3).unwrap();
        assert_eq!(p.collection(&idx, 4, NoiseLevel::Tough).unwrap(), p.collection(&idx, 4, NoiseLevel::Tough).unwrap());
    }
}
