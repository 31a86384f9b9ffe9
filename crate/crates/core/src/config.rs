//! Run configuration: built-in defaults, `PATCHBENCH_SEED`, a flat
//! `key = value` file and command-line flags, applied in that order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::descriptors::{DescriptorSpec, Family, DEFAULT_BRIEF_SEED};
use crate::error::{Error, Result};
use crate::geometry::{NoiseLevel, NoiseProfile, DEFAULT_RHO};
use crate::postproc::{DEFAULT_ALPHA, DEFAULT_CLIP_CANDIDATES};
use crate::synthesis::DEFAULT_IMAGE_SIDE;
use crate::tasks::{ProtocolSizes, Task};

pub const SEED_ENV: &str = "PATCHBENCH_SEED";
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_SCENES: usize = 16;
pub const DEFAULT_ILLUM_FRACTION: f64 = 0.5;
pub const DESK_REGIONS: usize = 200;
pub const PAPER_REGIONS: usize = 1300;
pub const DEFAULT_RHO_LIST: [f64; 4] = [1.0, 4.0, 12.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        }
    }

    pub fn regions(&self) -> usize {
        match self {
            Scale::Desk => DESK_REGIONS,
            Scale::Paper => PAPER_REGIONS,
        }
    }

    pub fn sizes(&self) -> ProtocolSizes {
        match self {
            Scale::Desk => ProtocolSizes::DESK,
            Scale::Paper => ProtocolSizes::PAPER,
        }
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::Config(format!("unknown scale {other:?}"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Every setting of a run. Serialized as flat `key = value` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub scenes: usize,
    /// Fraction of sequences that are illumination sequences.
    pub illum_fraction: f64,
    pub image_size: usize,
    pub regions: usize,
    pub rho: f64,
    pub noise: [NoiseProfile; 3],
    pub descriptors: Vec<DescriptorSpec>,
    pub tasks: Vec<Task>,
    pub scale: Scale,
    pub sizes: ProtocolSizes,
    pub clip_candidates: Vec<f64>,
    pub alpha: f64,
    pub brief_seed: u64,
    pub rho_list: Vec<f64>,
    pub sweep_variant: NoiseLevel,
    pub sweep_descriptor: Family,
    pub threads: usize,
    pub out: PathBuf,
    /// Corpus to evaluate; defaults to `<out>/corpus`.
    pub corpus: Option<PathBuf>,
    pub export_descriptors: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            scenes: DEFAULT_SCENES,
            illum_fraction: DEFAULT_ILLUM_FRACTION,
            image_size: DEFAULT_IMAGE_SIDE,
            regions: DESK_REGIONS,
            rho: DEFAULT_RHO,
            noise: [NoiseProfile::EASY, NoiseProfile::HARD, NoiseProfile::TOUGH],
            descriptors: ["mstd", "resz", "sift", "rootsift", "brief", "+sift", "+rootsift"]
                .iter()
                .map(|s| s.parse().expect("built-in descriptor"))
                .collect(),
            tasks: Task::ALL.to_vec(),
            scale: Scale::Desk,
            sizes: ProtocolSizes::DESK,
            clip_candidates: DEFAULT_CLIP_CANDIDATES.to_vec(),
            alpha: DEFAULT_ALPHA,
            brief_seed: DEFAULT_BRIEF_SEED,
            rho_list: DEFAULT_RHO_LIST.to_vec(),
            sweep_variant: NoiseLevel::Tough,
            sweep_descriptor: Family::Sift,
            threads: 1,
            out: PathBuf::from("out"),
            corpus: None,
            export_descriptors: false,
        }
    }
}

fn parse_list<T: FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}"))))
        .collect()
}

fn parse_one<T: FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_profile(value: &str, key: &str, name: NoiseLevel) -> Result<NoiseProfile> {
    let v: Vec<f64> = parse_list(value, key)?;
    if v.len() != 4 {
        return Err(Error::Config(format!("{key}: expected theta_max,t_max,s_max,a_max")));
    }
    let p = NoiseProfile {
        name,
        theta_max: v[0],
        t_max: v[1],
        s_max: v[2],
        a_max: v[3],
    };
    p.validate().map_err(|e| Error::Config(format!("{key}: {e}")))?;
    Ok(p)
}

impl RunConfig {
    /// Keys accepted by [`RunConfig::set`], in serialization order.
    pub const KEYS: [&'static str; 24] = [
        "seed",
        "scenes",
        "illum_fraction",
        "image_size",
        "regions",
        "rho",
        "noise_easy",
        "noise_hard",
        "noise_tough",
        "descriptors",
        "tasks",
        "scale",
        "verification_positives",
        "verification_negatives",
        "retrieval_queries",
        "retrieval_distractors",
        "clip_candidates",
        "alpha",
        "brief_seed",
        "rho_list",
        "sweep_variant",
        "sweep_descriptor",
        "threads",
        "export_descriptors",
    ];

    /// Switches region cap and protocol sizes to the preset of `scale`.
    pub fn apply_scale(&mut self, scale: Scale) {
        self.scale = scale;
        self.regions = scale.regions();
        self.sizes = scale.sizes();
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_one(value, key)?,
            "scenes" => self.scenes = parse_one(value, key)?,
            "illum_fraction" => self.illum_fraction = parse_one(value, key)?,
            "image_size" => self.image_size = parse_one(value, key)?,
            "regions" => self.regions = parse_one(value, key)?,
            "rho" => self.rho = parse_one(value, key)?,
            "noise_easy" => self.noise[0] = parse_profile(value, key, NoiseLevel::Easy)?,
            "noise_hard" => self.noise[1] = parse_profile(value, key, NoiseLevel::Hard)?,
            "noise_tough" => self.noise[2] = parse_profile(value, key, NoiseLevel::Tough)?,
            "descriptors" => self.descriptors = parse_list(value, key)?,
            "tasks" => self.tasks = parse_list(value, key)?,
            "scale" => self.apply_scale(parse_one(value, key)?),
            "verification_positives" => self.sizes.verification_positives = parse_one(value, key)?,
            "verification_negatives" => self.sizes.verification_negatives = parse_one(value, key)?,
            "retrieval_queries" => self.sizes.retrieval_queries = parse_one(value, key)?,
            "retrieval_distractors" => self.sizes.retrieval_distractors = parse_one(value, key)?,
            "clip_candidates" => self.clip_candidates = parse_list(value, key)?,
            "alpha" => self.alpha = parse_one(value, key)?,
            "brief_seed" => self.brief_seed = parse_one(value, key)?,
            "rho_list" => self.rho_list = parse_list(value, key)?,
            "sweep_variant" => self.sweep_variant = parse_one(value, key)?,
            "sweep_descriptor" => self.sweep_descriptor = parse_one(value, key)?,
            "threads" => self.threads = parse_one(value, key)?,
            "export_descriptors" => self.export_descriptors = parse_one(value, key)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "corpus" => self.corpus = Some(PathBuf::from(value.trim())),
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "seed" => self.seed.to_string(),
            "scenes" => self.scenes.to_string(),
            "illum_fraction" => self.illum_fraction.to_string(),
            "image_size" => self.image_size.to_string(),
            "regions" => self.regions.to_string(),
            "rho" => self.rho.to_string(),
            "noise_easy" | "noise_hard" | "noise_tough" => {
                let p = &self.noise[match key {
                    "noise_easy" => 0,
                    "noise_hard" => 1,
                    _ => 2,
                }];
                join(&[p.theta_max, p.t_max, p.s_max, p.a_max])
            }
            "descriptors" => join(&self.descriptors),
            "tasks" => join(&self.tasks),
            "scale" => self.scale.to_string(),
            "verification_positives" => self.sizes.verification_positives.to_string(),
            "verification_negatives" => self.sizes.verification_negatives.to_string(),
            "retrieval_queries" => self.sizes.retrieval_queries.to_string(),
            "retrieval_distractors" => self.sizes.retrieval_distractors.to_string(),
            "clip_candidates" => join(&self.clip_candidates),
            "alpha" => self.alpha.to_string(),
            "brief_seed" => self.brief_seed.to_string(),
            "rho_list" => join(&self.rho_list),
            "sweep_variant" => self.sweep_variant.to_string(),
            "sweep_descriptor" => self.sweep_descriptor.to_string(),
            "threads" => self.threads.to_string(),
            "export_descriptors" => self.export_descriptors.to_string(),
            _ => return None,
        })
    }

    /// Every key with its current value. Paths and the thread count are
    /// omitted so that the echo does not depend on where or how a run
    /// executes.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        Self::KEYS
            .iter()
            .filter(|&&k| k != "threads")
            .map(|k| (k.to_string(), self.get(k).expect("known key")))
            .collect()
    }

    /// The same pairs in `key = value` file form.
    pub fn to_file_text(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    /// Parses `key = value` lines; `#` starts a comment. A `scale` line is
    /// applied before all other keys so that explicit sizes override it.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some((_, v)) = pairs.iter().rev().find(|(k, _)| k == "scale") {
            self.apply_scale(parse_one(v, "scale")?);
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "scale") {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Reads the default seed from `PATCHBENCH_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        match std::env::var(SEED_ENV) {
            Ok(v) => self.seed = parse_one(&v, SEED_ENV)?,
            Err(std::env::VarError::NotPresent) => {}
            Err(e) => return Err(Error::Config(format!("{SEED_ENV}: {e}"))),
        }
        Ok(())
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus.clone().unwrap_or_else(|| self.out.join("corpus"))
    }

    pub fn results_dir(&self) -> PathBuf {
        self.out.join("results")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.scenes < 2 {
            return fail("at least two scenes are needed".into());
        }
        if !(0.0..=1.0).contains(&self.illum_fraction) {
            return fail("illum_fraction must lie in [0, 1]".into());
        }
        if self.regions < crate::synthesis::MIN_REGIONS {
            return fail(format!("regions must be at least {}", crate::synthesis::MIN_REGIONS));
        }
        if !(self.rho > 0.0) {
            return fail("rho must be positive".into());
        }
        if self.rho_list.is_empty() || self.rho_list.iter().any(|r| !(*r > 0.0)) {
            return fail("rho_list must hold positive values".into());
        }
        if self.descriptors.is_empty() || self.tasks.is_empty() {
            return fail("descriptors and tasks must be non-empty".into());
        }
        if self.clip_candidates.is_empty() || self.clip_candidates.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
            return fail("clip_candidates must lie in (0, 1]".into());
        }
        if !(self.alpha > 0.0) {
            return fail("alpha must be positive".into());
        }
        if crate::patch::variant_index(self.sweep_variant).is_none() {
            return fail("sweep_variant must be easy, hard or tough".into());
        }
        for p in &self.noise {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}
