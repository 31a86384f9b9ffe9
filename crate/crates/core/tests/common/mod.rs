#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use patchbench::config::RunConfig;
use patchbench::tasks::ProtocolSizes;

/// A corpus small enough for quick tests that still has a fitting split.
pub fn small_config(out: &Path) -> RunConfig {
    RunConfig {
        scenes: 8,
        image_size: 256,
        regions: 80,
        sizes: ProtocolSizes {
            verification_positives: 200,
            verification_negatives: 1000,
            retrieval_queries: 20,
            retrieval_distractors: 100,
        },
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

/// Command-line flags reproducing [`small_config`].
pub fn small_flags(out: &Path) -> Vec<String> {
    [
        "--scenes",
        "8",
        "--image-size",
        "256",
        "--regions",
        "80",
        "--verification-positives",
        "200",
        "--verification-negatives",
        "1000",
        "--retrieval-queries",
        "20",
        "--retrieval-distractors",
        "100",
        "--out",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([out.display().to_string()])
    .collect()
}

pub fn patchbench(args: &[String], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_patchbench"));
    cmd.args(args).env_remove(patchbench::config::SEED_ENV);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("run patchbench")
}

pub fn args(sub: &str, rest: &[String]) -> Vec<String> {
    std::iter::once(sub.to_string()).chain(rest.iter().cloned()).collect()
}

/// Every file under `dir` with its contents, keyed by relative path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).expect("read dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).expect("read file")));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
