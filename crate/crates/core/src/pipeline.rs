//! The batch commands: corpus synthesis, evaluation, the measurement-region
//! sweep and report regeneration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::descriptors::{root_of_sift, DescriptorSpec, DescriptorTable, Extractor, Family};
use crate::error::{Error, Result};
use crate::geometry::RegionDetection;
use crate::io::{self, CorpusManifest};
use crate::metrics::mean_ap;
use crate::patch::{
    build_corpus, build_corpus_tagged, contained_regions, orient_regions, variant_index, ExtractionParams, PatchCorpus,
    PatchIndex, SequencePatches, Split,
};
use crate::postproc::{apply_post, fit_zca, select_clip_threshold, ClipSelection, ZcaModel};
use crate::rng::{self, tag};
use crate::synthesis::{detect_regions, duplicate_clusters, gen_sequence, Sequence, SequenceKind, SequenceSpec, TARGETS};
use crate::tasks::{
    expected_subvariants, run_matching, summarize, ApRecord, DescriptorScorer, MatchingPair, Protocols, SummaryRow,
    Task,
};

pub const FAILED_SENTINEL: &str = "FAILED";
pub const RHO_SWEEP_FILE: &str = "rho_sweep.csv";
pub const REPORT_FILE: &str = "report.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Eval,
    RhoSweep,
    Report,
}

/// Process exit status for a failed command: 1 configuration, 2 generation,
/// 3 I/O, 4 missing corpus or results, 5 evaluation.
pub fn exit_code(cmd: Command, e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => 1,
        Error::Io(_) | Error::Json(_) | Error::Format { .. } => 3,
        Error::MissingFile(_) => {
            if cmd == Command::Synth {
                3
            } else {
                4
            }
        }
        _ => {
            if cmd == Command::Synth {
                2
            } else {
                5
            }
        }
    }
}

/// Runs `f` on a pool of `threads` workers (0 = all cores).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Marks `out` as failed, or clears a stale marker after success.
pub fn record_outcome<T>(out: &Path, result: &Result<T>) {
    let sentinel = out.join(FAILED_SENTINEL);
    match result {
        Ok(_) => {
            let _ = fs::remove_file(sentinel);
        }
        Err(e) => {
            let _ = fs::create_dir_all(out);
            let _ = fs::write(sentinel, format!("{e}\n"));
        }
    }
}

/// Sequence `i` is an illumination sequence when the running count of
/// `fraction * (i + 1)` crosses an integer, which interleaves the kinds.
pub fn sequence_kind(i: usize, illum_fraction: f64) -> SequenceKind {
    let f = illum_fraction;
    if ((i + 1) as f64 * f).floor() > (i as f64 * f).floor() {
        SequenceKind::Illumination
    } else {
        SequenceKind::Viewpoint
    }
}

pub fn sequence_id(i: usize, kind: SequenceKind) -> String {
    format!("{}_{:03}", kind.prefix(), i)
}

/// One synthesized sequence with its oriented detections and patches.
#[derive(Debug, Clone)]
pub struct SynthesizedSequence {
    pub sequence: Sequence,
    pub regions: Vec<RegionDetection>,
    pub patches: SequencePatches,
}

pub fn extraction_params(cfg: &RunConfig, seq_index: usize) -> ExtractionParams {
    ExtractionParams {
        rho: cfg.rho,
        master_seed: cfg.seed,
        seq_index: seq_index as u64,
        profiles: cfg.noise,
    }
}

pub fn synthesize_sequence(cfg: &RunConfig, i: usize) -> Result<SynthesizedSequence> {
    let kind = sequence_kind(i, cfg.illum_fraction);
    let mut spec = SequenceSpec::new(sequence_id(i, kind), rng::derive_seed(cfg.seed, &[tag::SEQUENCE, i as u64]), kind);
    spec.width = cfg.image_size;
    spec.height = cfg.image_size;
    let sequence = gen_sequence(&spec)?;
    let mut det = rng::substream(cfg.seed, &[tag::DETECT, i as u64]);
    let detected = detect_regions(&sequence.reference, &mut det, cfg.regions)?;
    let regions = orient_regions(&sequence.reference, &detected);
    let mut patches = build_corpus(&sequence, &regions, &extraction_params(cfg, i))?;
    patches.split = io::default_split(i);
    Ok(SynthesizedSequence {
        sequence,
        regions,
        patches,
    })
}

/// Generates every sequence of the configured corpus in memory.
pub fn synthesize(cfg: &RunConfig) -> Result<Vec<SynthesizedSequence>> {
    cfg.validate()?;
    (0..cfg.scenes)
        .into_par_iter()
        .map(|i| synthesize_sequence(cfg, i))
        .collect()
}

pub fn corpus_of(seqs: &[SynthesizedSequence]) -> PatchCorpus {
    PatchCorpus {
        sequences: seqs.iter().map(|s| s.patches.clone()).collect(),
    }
}

pub fn corpus_manifest(cfg: &RunConfig, corpus: &PatchCorpus) -> CorpusManifest {
    CorpusManifest::describe(corpus, cfg.seed, &cfg.noise, cfg.to_map())
}

/// Writes a synthesized corpus: strips, manifest, images and detections.
pub fn save_synthesized(cfg: &RunConfig, seqs: &[SynthesizedSequence], dir: &Path) -> Result<PatchCorpus> {
    let corpus = corpus_of(seqs);
    io::save_corpus(&corpus, dir, &corpus_manifest(cfg, &corpus))?;
    for s in seqs {
        let d = dir.join(&s.sequence.id);
        io::write_sequence_images(&d, &s.sequence)?;
        io::write_regions(&d.join(io::REGIONS_FILE), &s.regions, &s.patches.region_ids)?;
    }
    Ok(corpus)
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<PatchCorpus> {
    let seqs = synthesize(cfg)?;
    let dir = cfg.corpus_dir();
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    save_synthesized(cfg, &seqs, &dir)
}

/// Raw descriptor tables of one corpus, computed on demand. RootSIFT is
/// derived from SIFT when SIFT is already available.
struct TableCache<'a> {
    corpus: &'a PatchCorpus,
    index: &'a PatchIndex,
    brief_seed: u64,
    tables: BTreeMap<Family, DescriptorTable>,
}

impl<'a> TableCache<'a> {
    fn new(corpus: &'a PatchCorpus, index: &'a PatchIndex, brief_seed: u64) -> Self {
        TableCache {
            corpus,
            index,
            brief_seed,
            tables: BTreeMap::new(),
        }
    }

    fn get(&mut self, family: Family) -> Result<&DescriptorTable> {
        if !self.tables.contains_key(&family) {
            let table = match (family, self.tables.get(&Family::Sift)) {
                (Family::RootSift, Some(sift)) => sift.map_rows(|r| root_of_sift(r.to_vec()))?,
                _ => DescriptorTable::compute(self.corpus, self.index, &Extractor::new(family, self.brief_seed)),
            };
            self.tables.insert(family, table);
        }
        Ok(&self.tables[&family])
    }
}

pub fn post_table(table: &DescriptorTable, model: &ZcaModel) -> Result<DescriptorTable> {
    if table.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: table.dim(),
        });
    }
    table.map_rows(|r| apply_post(r, model).expect("dimension checked"))
}

fn table_rows(table: &DescriptorTable) -> Result<Vec<&[f64]>> {
    (0..table.len())
        .map(|i| table.row(i).ok_or_else(|| Error::Fit("whitening needs real descriptors".into())))
        .collect()
}

/// Mean matching AP over every pair of a corpus.
pub fn matching_map(corpus: &PatchCorpus, index: &PatchIndex, table: &DescriptorTable) -> Result<f64> {
    let protocols = Protocols::build(corpus, index, &crate::tasks::ProtocolSizes::DESK, &[Task::Matching], 0)?;
    let scorer = DescriptorScorer { table, index };
    let records = protocols.run(Task::Matching, corpus, index, &scorer)?;
    Ok(summarize("fit", Task::Matching, &records, &expected_subvariants(Task::Matching, corpus))?.map)
}

/// Fits whitening on the fitting split, choosing the clip fraction that
/// maximizes matching mAP there.
pub fn fit_post(
    fit_corpus: &PatchCorpus,
    fit_index: &PatchIndex,
    fit_table: &DescriptorTable,
    candidates: &[f64],
    alpha: f64,
) -> Result<(ZcaModel, ClipSelection)> {
    let rows = table_rows(fit_table)?;
    let dim = fit_table.dim();
    let mut models = BTreeMap::new();
    let selection = select_clip_threshold(candidates, |c| {
        let model = fit_zca(&rows, dim, c, alpha)?;
        let score = matching_map(fit_corpus, fit_index, &post_table(fit_table, &model)?)?;
        models.insert(c.to_bits(), model);
        Ok(score)
    })?;
    let model = models.remove(&selection.clip_fraction.to_bits()).expect("selected model");
    Ok((model, selection))
}

/// Results of one descriptor.
#[derive(Debug, Clone)]
pub struct DescriptorResults {
    pub spec: DescriptorSpec,
    pub records: BTreeMap<Task, Vec<ApRecord>>,
    pub summaries: Vec<SummaryRow>,
    pub post: Option<(ZcaModel, ClipSelection)>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub descriptors: Vec<DescriptorResults>,
}

impl Evaluation {
    pub fn rows(&self) -> Vec<SummaryRow> {
        self.descriptors.iter().flat_map(|d| d.summaries.iter().cloned()).collect()
    }

    pub fn row(&self, descriptor: &str, task: Task) -> Option<&SummaryRow> {
        self.descriptors
            .iter()
            .flat_map(|d| d.summaries.iter())
            .find(|r| r.descriptor == descriptor && r.task == task)
    }
}

/// Evaluates every configured descriptor on the evaluation split. Whitening
/// is fitted on the fitting split.
pub fn evaluate(corpus: &PatchCorpus, cfg: &RunConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let eval = corpus.subset(Split::Eval);
    if eval.is_empty() {
        return Err(Error::Corpus("the evaluation split is empty".into()));
    }
    let eval_index = PatchIndex::new(&eval);
    let fit = corpus.subset(Split::Fit);
    let fit_index = PatchIndex::new(&fit);
    let protocols = Protocols::build(&eval, &eval_index, &cfg.sizes, &cfg.tasks, cfg.seed)?;
    let mut eval_tables = TableCache::new(&eval, &eval_index, cfg.brief_seed);
    let mut fit_tables = TableCache::new(&fit, &fit_index, cfg.brief_seed);

    let mut order: Vec<DescriptorSpec> = cfg.descriptors.clone();
    order.sort();
    order.dedup();
    let mut results: BTreeMap<DescriptorSpec, DescriptorResults> = BTreeMap::new();
    for spec in order {
        let (table, post) = if spec.post {
            if fit.is_empty() {
                return Err(Error::Fit(format!("{spec}: the corpus has no fitting split")));
            }
            let (model, selection) =
                fit_post(&fit, &fit_index, fit_tables.get(spec.family)?, &cfg.clip_candidates, cfg.alpha)?;
            (post_table(eval_tables.get(spec.family)?, &model)?, Some((model, selection)))
        } else {
            (eval_tables.get(spec.family)?.clone(), None)
        };
        let scorer = DescriptorScorer {
            table: &table,
            index: &eval_index,
        };
        let mut records = BTreeMap::new();
        let mut summaries = Vec::new();
        for &task in &cfg.tasks {
            let recs = protocols.run(task, &eval, &eval_index, &scorer)?;
            summaries.push(summarize(&spec.name(), task, &recs, &expected_subvariants(task, &eval))?);
            records.insert(task, recs);
        }
        results.insert(
            spec,
            DescriptorResults {
                spec,
                records,
                summaries,
                post,
            },
        );
    }
    let mut seen = std::collections::HashSet::new();
    let descriptors = cfg
        .descriptors
        .iter()
        .filter(|s| seen.insert(**s))
        .map(|s| results.remove(s).expect("evaluated"))
        .collect();
    Ok(Evaluation { descriptors })
}

#[derive(Debug, Serialize)]
struct ClipReport {
    clip_fraction: f64,
    candidates: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize)]
struct ResultsManifest {
    format_version: u32,
    corpus_sequences: Vec<io::SequenceEntry>,
    config: BTreeMap<String, String>,
    clip_selection: BTreeMap<String, ClipReport>,
}

/// Writes detail CSVs, whitening models, summary, plot data and a manifest.
pub fn write_evaluation(cfg: &RunConfig, corpus: &PatchCorpus, evaluation: &Evaluation) -> Result<()> {
    let dir = cfg.results_dir();
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    let mut clip_selection = BTreeMap::new();
    for d in &evaluation.descriptors {
        let name = d.spec.name();
        for (task, recs) in &d.records {
            io::write_detail_results(&dir, &name, task.as_str(), recs)?;
        }
        if let Some((model, sel)) = &d.post {
            io::write_zca(&dir.join(&name).join("zca.txt"), model)?;
            clip_selection.insert(
                name.clone(),
                ClipReport {
                    clip_fraction: sel.clip_fraction,
                    candidates: sel.scores.clone(),
                },
            );
        }
    }
    io::write_results(&dir, &evaluation.rows())?;
    if cfg.export_descriptors {
        export_descriptors(cfg, corpus, evaluation, &dir)?;
    }
    let manifest = ResultsManifest {
        format_version: io::FORMAT_VERSION,
        corpus_sequences: CorpusManifest::describe(corpus, cfg.seed, &cfg.noise, BTreeMap::new()).sequences,
        config: cfg.to_map(),
        clip_selection,
    };
    io::write_json(&dir.join(io::MANIFEST_FILE), &manifest)
}

fn export_descriptors(cfg: &RunConfig, corpus: &PatchCorpus, evaluation: &Evaluation, dir: &Path) -> Result<()> {
    let eval = corpus.subset(Split::Eval);
    let index = PatchIndex::new(&eval);
    let mut cache = TableCache::new(&eval, &index, cfg.brief_seed);
    for d in &evaluation.descriptors {
        let raw = cache.get(d.spec.family)?;
        let table = match &d.post {
            Some((model, _)) => post_table(raw, model)?,
            None => raw.clone(),
        };
        let sub = dir.join(d.spec.name());
        fs::create_dir_all(&sub)?;
        io::write_descriptor_csv(&sub.join("descriptors.csv"), &eval, &index, &table)?;
        io::write_descriptor_binary(&sub.join("descriptors.bin"), d.spec.family.as_str(), &table)?;
    }
    Ok(())
}

/// Loads the corpus to evaluate: a synthesized corpus (with manifest) or an
/// external one in the strip layout.
pub fn load_any_corpus(dir: &Path) -> Result<PatchCorpus> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    if dir.join(io::MANIFEST_FILE).exists() {
        Ok(io::load_corpus(dir)?.0)
    } else {
        io::ingest_external(dir)
    }
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let corpus = load_any_corpus(&cfg.corpus_dir())?;
    let evaluation = evaluate(&corpus, cfg)?;
    write_evaluation(cfg, &corpus, &evaluation)?;
    Ok(evaluation)
}

/// Matching mAP per measurement-region scale (rows) and target image
/// (columns 1|2 .. 1|6).
#[derive(Debug, Clone, PartialEq)]
pub struct RhoTable {
    pub rows: Vec<(f64, [f64; TARGETS])>,
    /// Sequences averaged in every row.
    pub sequences: Vec<String>,
    /// Regions evaluated at each scale, summed over sequences.
    pub regions: Vec<(f64, usize)>,
}

impl RhoTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho");
        for k in 2..=TARGETS + 1 {
            write!(s, ",1|{k}").expect("string write");
        }
        s.push('\n');
        for (rho, vals) in &self.rows {
            s.push_str(&rho.to_string());
            for v in vals {
                write!(s, ",{}", io::format_sig6(*v)).expect("string write");
            }
            s.push('\n');
        }
        s
    }
}

/// A viewpoint sequence prepared for the sweep: images, its index in the
/// corpus and every detection tagged with its id.
pub struct SweepSequence {
    pub index: usize,
    pub sequence: Sequence,
    pub regions: Vec<(u32, RegionDetection)>,
}

/// The detections among `ids` that stay distinct at measurement scale
/// `rho`: near-duplicates (IoU > 0.5 between measurement regions) are
/// clustered and one random member of each cluster is kept, the rule used
/// at detection time. At the detection scale this keeps every region.
pub fn distinct_at(cfg: &RunConfig, s: &SweepSequence, ids: &[u32], rho: f64) -> Vec<(u32, RegionDetection)> {
    let tagged: Vec<(u32, RegionDetection)> = s.regions.iter().filter(|r| ids.contains(&r.0)).copied().collect();
    let regions: Vec<RegionDetection> = tagged.iter().map(|r| r.1).collect();
    let mut rng = rng::substream(cfg.seed, &[tag::SWEEP, s.index as u64, rho.to_bits()]);
    let mut keep: Vec<usize> = duplicate_clusters(&regions, rho)
        .into_iter()
        .map(|c| *c.choose(&mut rng).expect("non-empty cluster"))
        .collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| tagged[i]).collect()
}

/// Matching AP of one sequence at scale `rho` for each target image, over
/// the distinct detections contained at that scale, and their number.
pub fn sweep_point(cfg: &RunConfig, s: &SweepSequence, rho: f64) -> Result<([f64; TARGETS], usize)> {
    let mut params = extraction_params(cfg, s.index);
    params.rho = rho;
    let contained = build_corpus_tagged(&s.sequence, &s.regions, &params)?;
    let kept = distinct_at(cfg, s, &contained.region_ids, rho);
    let corpus = PatchCorpus {
        sequences: vec![if kept.len() == contained.len() {
            contained
        } else {
            build_corpus_tagged(&s.sequence, &kept, &params)?
        }],
    };
    let index = PatchIndex::new(&corpus);
    let table = DescriptorTable::compute(&corpus, &index, &Extractor::new(cfg.sweep_descriptor, cfg.brief_seed));
    let scorer = DescriptorScorer { table: &table, index: &index };
    let mut out = [0.0; TARGETS];
    for (k, slot) in out.iter_mut().enumerate() {
        let pair = MatchingPair {
            seq: 0,
            kind: SequenceKind::Viewpoint,
            variant: cfg.sweep_variant,
            target: k + 1,
        };
        *slot = run_matching(&pair, &index, &scorer)?;
    }
    Ok((out, corpus.total_regions()))
}

/// Minimum detections a sequence needs at the largest scale to enter the
/// sweep, so every row averages the same sequences.
pub const SWEEP_MIN_REGIONS: usize = 8;

pub fn rho_sweep(cfg: &RunConfig, seqs: &[SweepSequence]) -> Result<RhoTable> {
    variant_index(cfg.sweep_variant)
        .ok_or_else(|| Error::Config("sweep_variant must be easy, hard or tough".into()))?;
    let max_rho = cfg.rho_list.iter().copied().fold(0.0, f64::max);
    let used: Vec<&SweepSequence> = seqs
        .iter()
        .filter(|s| {
            let regions: Vec<RegionDetection> = s.regions.iter().map(|r| r.1).collect();
            contained_regions(&s.sequence, &regions, max_rho, &cfg.noise).len() >= SWEEP_MIN_REGIONS
        })
        .collect();
    if used.is_empty() {
        return Err(Error::Corpus("no viewpoint sequence has enough regions at the largest scale".into()));
    }
    let mut rows = Vec::with_capacity(cfg.rho_list.len());
    let mut counts = Vec::with_capacity(cfg.rho_list.len());
    for &rho in &cfg.rho_list {
        let per_seq: Vec<([f64; TARGETS], usize)> =
            used.par_iter().map(|s| sweep_point(cfg, s, rho)).collect::<Result<_>>()?;
        let mut vals = [0.0; TARGETS];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = mean_ap(&per_seq.iter().map(|p| p.0[k]).collect::<Vec<_>>())?;
        }
        rows.push((rho, vals));
        counts.push((rho, per_seq.iter().map(|p| p.1).sum()));
    }
    Ok(RhoTable {
        rows,
        sequences: used.iter().map(|s| s.sequence.id.clone()).collect(),
        regions: counts,
    })
}

/// Viewpoint sequences of the evaluation split, read from a synthesized
/// corpus directory.
pub fn load_sweep_sequences(dir: &Path) -> Result<Vec<SweepSequence>> {
    let manifest = io::read_manifest(dir)?;
    manifest
        .sequences
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == SequenceKind::Viewpoint.as_str() && e.split == Split::Eval)
        .map(|(i, e)| {
            let d = dir.join(&e.id);
            let sequence = io::read_sequence(&d, &e.id, SequenceKind::Viewpoint)?;
            let (regions, _) = io::read_regions(&d.join(io::REGIONS_FILE))?;
            Ok(SweepSequence {
                index: i,
                regions: regions.into_iter().enumerate().map(|(id, r)| (id as u32, r)).collect(),
                sequence,
            })
        })
        .collect()
}

pub fn cmd_rho_sweep(cfg: &RunConfig) -> Result<RhoTable> {
    cfg.validate()?;
    let dir = cfg.corpus_dir();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir));
    }
    let seqs = load_sweep_sequences(&dir)?;
    let table = rho_sweep(cfg, &seqs)?;
    let out = cfg.results_dir();
    fs::create_dir_all(&out)?;
    fs::write(out.join(RHO_SWEEP_FILE), table.to_csv())?;
    Ok(table)
}

/// Recomputes the summary from the detail CSVs under `<out>/results` and
/// renders it as a text table, also written to `report.txt`.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let dir = cfg.results_dir();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir));
    }
    let summary_path = dir.join(io::SUMMARY_FILE);
    let summary = fs::read_to_string(&summary_path).map_err(|_| Error::MissingFile(summary_path.clone()))?;
    let mut text = format!("{:<12} {:<13} {:>9} {:>9} {:>9} {:>9}\n", "descriptor", "task", "mAP", "easy", "hard", "tough");
    for line in summary.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::format(&summary_path, format!("malformed row {line:?}")));
        }
        let task: Task = f[1].parse()?;
        let records = io::parse_detail_csv(&dir.join(f[0]).join(format!("{task}.csv")))?;
        let subs: Vec<String> = {
            let mut s: Vec<String> = Vec::new();
            for r in &records {
                if !s.contains(&r.subvariant) {
                    s.push(r.subvariant.clone());
                }
            }
            s
        };
        let row = summarize(f[0], task, &records, &subs)?;
        writeln!(
            text,
            "{:<12} {:<13} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            row.descriptor, task.as_str(), row.map, row.by_variant[0], row.by_variant[1], row.by_variant[2]
        )
        .expect("string write");
    }
    let sweep = dir.join(RHO_SWEEP_FILE);
    if let Ok(s) = fs::read_to_string(&sweep) {
        text.push_str("\nmatching mAP by measurement-region scale\n");
        for line in s.lines() {
            text.push_str(&line.replace(',', "\t"));
            text.push('\n');
        }
    }
    fs::write(dir.join(REPORT_FILE), &text)?;
    Ok(text)
}
