//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line to
//! the real stdout (not the captured test output) and then asserts.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use common::{args, patchbench, snapshot};
use patchbench::geometry::{sample_noise, NoiseLevel, NoiseProfile};
use patchbench::io;
use patchbench::metrics::average_precision;
use patchbench::patch::{PatchIndex, Split, VARIANTS};
use patchbench::pipeline::RHO_SWEEP_FILE;
use patchbench::postproc::fit_zca;
use patchbench::rng;
use patchbench::tasks::{
    build_retrieval, build_verification, run_retrieval, run_verification, ApRecord, NegSource, OracleScorer,
    Protocols, ProtocolSizes, RandomScorer, Task,
};

fn verdict(n: u32, title: &str, ok: bool, detail: &str) {
    let line = format!("criterion {n:>2}: {} {title}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "criterion {n} failed: {detail}");
}

/// Step-wise precision-recall integration over the list with ignored
/// entries removed: sum of `P(i) * (R(i) - R(i - 1))`.
fn step_pr_ap(y: &[i8], k: usize) -> f64 {
    let kept: Vec<i8> = y.iter().copied().filter(|&v| v != 0).collect();
    let (mut area, mut prev_recall, mut tp) = (0.0, 0.0, 0usize);
    for (i, &v) in kept.iter().enumerate() {
        if v > 0 {
            tp += 1;
        }
        let precision = tp as f64 / (i + 1) as f64;
        let recall = tp as f64 / k as f64;
        area += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    area
}

fn check_against_oracle(y: &[i8]) -> Option<String> {
    let p = y.iter().filter(|&&v| v > 0).count();
    if p == 0 {
        return None;
    }
    for k in [None, Some(p), Some(p + 1), Some(p + 3)] {
        let got = average_precision(y, k).unwrap();
        let want = step_pr_ap(y, k.unwrap_or(p));
        if (got - want).abs() > 1e-12 {
            return Some(format!("{y:?} K={k:?}: {got} vs {want}"));
        }
    }
    None
}

#[test]
fn criterion_01_metric_matches_step_integration() {
    let mut checked = 0usize;
    let mut failure = None;
    for len in 1..=12u32 {
        for code in 0..3usize.pow(len) {
            let mut c = code;
            let y: Vec<i8> = (0..len)
                .map(|_| {
                    let v = (c % 3) as i8 - 1;
                    c /= 3;
                    v
                })
                .collect();
            if failure.is_none() {
                failure = check_against_oracle(&y);
            }
            checked += 1;
        }
    }
    let mut r = rng::stream(101);
    for _ in 0..10_000 {
        let len = r.gen_range(1..=300);
        let y: Vec<i8> = (0..len).map(|_| r.gen_range(-1..=1)).collect();
        if failure.is_none() {
            failure = check_against_oracle(&y);
        }
        checked += 1;
    }
    let ok = failure.is_none();
    verdict(
        1,
        "AP equals step-PR integration",
        ok,
        &failure.unwrap_or_else(|| format!("{checked} label sequences, tolerance 1e-12")),
    );
}

#[test]
fn criterion_02_worked_values_and_ignore_invariance() {
    let a = average_precision(&[1, -1, 1], None).unwrap();
    let b = average_precision(&[1, 0, -1, 1], Some(3)).unwrap();
    let worked = (a - 5.0 / 6.0).abs() < 1e-15 && (b - 5.0 / 9.0).abs() < 1e-15;
    let mut r = rng::stream(102);
    let mut violations = 0;
    for _ in 0..1000 {
        let len = r.gen_range(1..=40);
        let mut y: Vec<i8> = (0..len).map(|_| if r.gen_bool(0.4) { 1 } else { -1 }).collect();
        y[r.gen_range(0..len)] = 1;
        let k = y.iter().filter(|&&v| v > 0).count() + r.gen_range(0..3);
        let before = average_precision(&y, Some(k)).unwrap();
        for _ in 0..r.gen_range(1..=5) {
            let at = r.gen_range(0..=y.len());
            y.insert(at, 0);
        }
        if (average_precision(&y, Some(k)).unwrap() - before).abs() > 1e-15 {
            violations += 1;
        }
    }
    verdict(
        2,
        "worked AP values and ignore invariance",
        worked && violations == 0,
        &format!("AP(+,-,+) = {a:.6}, AP(+,0,-,+; K=3) = {b:.6}, {violations} of 1000 insertions changed AP"),
    );
}

#[test]
fn criterion_03_noise_samples_respect_the_presets() {
    let n = 100_000;
    let mut failures = Vec::new();
    for (i, profile) in [NoiseProfile::EASY, NoiseProfile::HARD, NoiseProfile::TOUGH].iter().enumerate() {
        let mut r = rng::stream(103 + i as u64);
        let bounds = [
            profile.theta_max.to_radians(),
            profile.t_max,
            profile.t_max,
            profile.s_max,
            profile.a_max,
        ];
        let mut sums = [0.0; 5];
        for _ in 0..n {
            let t = sample_noise(profile, &mut r);
            let v = [t.theta, t.tx, t.ty, t.s.log2(), t.a.log2()];
            for (j, (&x, &b)) in v.iter().zip(&bounds).enumerate() {
                if x.abs() > b + 1e-12 {
                    failures.push(format!("{}: parameter {j} = {x} outside ±{b}", profile.name));
                }
                sums[j] += x;
            }
        }
        for (j, &b) in bounds.iter().enumerate() {
            // Each parameter is uniform on [-b, b]: standard error b / sqrt(3n).
            let sigma = b / (3.0 * n as f64).sqrt();
            let mean = sums[j] / n as f64;
            if mean.abs() > 3.0 * sigma {
                failures.push(format!("{}: parameter {j} mean {mean} beyond 3 sigma {sigma}", profile.name));
            }
        }
    }
    let ok = failures.is_empty();
    verdict(
        3,
        "noise samples inside the presets",
        ok,
        &if ok { format!("3 presets x {n} samples") } else { failures[..failures.len().min(3)].join("; ") },
    );
}

/// Output of one full `synth`, `eval`, `rho-sweep` run at default settings.
fn default_run(name: &str, threads: usize) -> PathBuf {
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    if out.exists() {
        fs::remove_dir_all(&out).unwrap();
    }
    let flags = vec![
        "--out".to_string(),
        out.display().to_string(),
        "--threads".into(),
        threads.to_string(),
    ];
    for sub in ["synth", "eval", "rho-sweep"] {
        let o = patchbench(&args(sub, &flags), &[]);
        assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
    }
    out
}

fn shared_run() -> &'static Path {
    static RUN: OnceLock<PathBuf> = OnceLock::new();
    RUN.get_or_init(|| default_run("threads1", 1))
}

/// Summary rows keyed by (descriptor, task): `[map, easy, hard, tough]`.
fn summary(run: &Path) -> BTreeMap<(String, String), [f64; 4]> {
    let text = fs::read_to_string(run.join("results").join(io::SUMMARY_FILE)).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let v: Vec<f64> = f[2..6].iter().map(|s| s.parse().unwrap()).collect();
            ((f[0].to_string(), f[1].to_string()), [v[0], v[1], v[2], v[3]])
        })
        .collect()
}

fn detail(run: &Path, descriptor: &str, task: Task) -> Vec<ApRecord> {
    io::parse_detail_csv(&run.join("results").join(descriptor).join(format!("{task}.csv"))).unwrap()
}

#[test]
fn criterion_04_oracle_and_random_scorers() {
    let run = shared_run();
    let (corpus, manifest) = io::load_corpus(&run.join("corpus")).unwrap();
    let eval = corpus.subset(Split::Eval);
    let index = PatchIndex::new(&eval);
    let protocols = Protocols::build(&eval, &index, &ProtocolSizes::DESK, &Task::ALL, manifest.master_seed).unwrap();

    let matching = protocols.run(Task::Matching, &eval, &index, &OracleScorer).unwrap();
    let retrieval = protocols.run(Task::Retrieval, &eval, &index, &OracleScorer).unwrap();
    let oracle_perfect = matching.iter().chain(&retrieval).all(|r| r.ap == 1.0);

    // Spread of AP under random scores, measured over independent scorers.
    let mut worst = 0.0f64;
    for set in &protocols.verification {
        let n_pos = set.pairs.iter().filter(|p| p.2 > 0).count() as f64;
        let prior = n_pos / set.pairs.len() as f64;
        let aps: Vec<f64> = (0..40)
            .into_par_iter()
            .map(|s| run_verification(set, &RandomScorer { seed: 1000 + s }).unwrap())
            .collect();
        let mean = aps.iter().sum::<f64>() / aps.len() as f64;
        let sd = (aps.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (aps.len() - 1) as f64).sqrt();
        let ap = run_verification(set, &RandomScorer { seed: manifest.master_seed }).unwrap();
        worst = worst.max((ap - prior).abs() / sd);
    }
    verdict(
        4,
        "oracle scorer is perfect, random scorer is at chance",
        oracle_perfect && worst <= 3.0,
        &format!(
            "oracle AP = 1 on {} matching and {} retrieval lists; random verification within {worst:.2} sigma of the prior",
            matching.len(),
            retrieval.len()
        ),
    );
}

#[test]
fn criterion_05_sift_degrades_with_noise() {
    let s = summary(shared_run());
    let mut lines = Vec::new();
    let mut ok = true;
    for task in Task::ALL {
        let v = s[&("sift".to_string(), task.as_str().to_string())];
        ok &= v[1] > v[2] && v[2] > v[3];
        lines.push(format!("{task} {:.4}>{:.4}>{:.4}", v[1], v[2], v[3]));
    }
    verdict(5, "SIFT mAP easy > hard > tough", ok, &lines.join(", "));
}

#[test]
fn criterion_06_matching_improves_with_measurement_scale() {
    let text = fs::read_to_string(shared_run().join("results").join(RHO_SWEEP_FILE)).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let rhos: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let increasing = (1..rows[0].len()).all(|k| rows.windows(2).all(|w| w[1][k] > w[0][k]));
    let ok = rhos == [1.0, 4.0, 12.0, 20.0] && increasing;
    let cols: Vec<String> = (1..rows[0].len())
        .map(|k| format!("1|{}: {}", k + 1, rows.iter().map(|r| format!("{:.3}", r[k])).collect::<Vec<_>>().join("<")))
        .collect();
    verdict(6, "matching mAP strictly increasing in rho", ok, &cols.join(", "));
}

#[test]
fn criterion_07_mstd_verifies_but_cannot_match() {
    let s = summary(shared_run());
    let get = |d: &str, t: Task| s[&(d.to_string(), t.as_str().to_string())][0];
    let (ver, mat, sift) = (get("mstd", Task::Verification), get("mstd", Task::Matching), get("sift", Task::Matching));
    verdict(
        7,
        "MStd verification >= 2x its matching, matching < 0.5x SIFT",
        ver >= 2.0 * mat && mat < 0.5 * sift,
        &format!("verification {ver:.4}, matching {mat:.4}, SIFT matching {sift:.4}"),
    );
}

#[test]
fn criterion_08_same_sequence_negatives_are_harder() {
    let run = shared_run();
    let mut ok = true;
    let mut parts = Vec::new();
    for d in ["sift", "rootsift"] {
        let records = detail(run, d, Task::Verification);
        for v in VARIANTS {
            let ap = |src: NegSource| {
                records
                    .iter()
                    .find(|r| r.variant == v && r.subvariant == src.as_str())
                    .map(|r| r.ap)
                    .unwrap()
            };
            let (same, diff) = (ap(NegSource::SameSeq), ap(NegSource::DiffSeq));
            ok &= same < diff;
            parts.push(format!("{d}/{v} {same:.4}<{diff:.4}"));
        }
    }
    verdict(8, "verification AP SameSeq < DiffSeq", ok, &parts.join(", "));
}

#[test]
fn criterion_09_normalization_helps_matching() {
    let s = summary(shared_run());
    let get = |d: &str| s[&(d.to_string(), "matching".to_string())][0];
    let (sift, post, root) = (get("sift"), get("+sift"), get("rootsift"));
    verdict(
        9,
        "+SIFT >= SIFT and RootSIFT >= SIFT on matching",
        post >= sift && root >= sift,
        &format!("SIFT {sift:.4}, +SIFT {post:.4}, RootSIFT {root:.4}"),
    );
}

#[test]
fn criterion_10_runs_are_byte_identical_across_thread_counts() {
    let first = shared_run();
    let second = default_run("threads2", 2);
    let compare = |sub: &str| {
        let (a, b) = (snapshot(&first.join(sub)), snapshot(&second.join(sub)));
        let differing: Vec<String> = a
            .iter()
            .zip(&b)
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.0.clone())
            .collect();
        (a.len(), a.len() == b.len() && differing.is_empty(), differing)
    };
    let (nc, corpus_ok, dc) = compare("corpus");
    let (nr, results_ok, dr) = compare("results");
    verdict(
        10,
        "identical corpora and results with 1 and 2 threads",
        corpus_ok && results_ok,
        &if corpus_ok && results_ok {
            format!("{nc} corpus files and {nr} result files match")
        } else {
            format!("differing: {:?}", dc.iter().chain(&dr).take(5).collect::<Vec<_>>())
        },
    );
}

#[test]
fn criterion_11_whitening_gives_identity_covariance() {
    let (dim, n) = (8, 10_000);
    let mut r = rng::stream(111);
    // Random orthogonal basis with a spread of variances; the last one falls
    // below the clip floor.
    let q = DMatrix::<f64>::from_fn(dim, dim, |_, _| r.sample(StandardNormal)).qr().q();
    let sd = DVector::from_vec(vec![3.0, 2.0, 1.5, 1.0, 0.7, 0.5, 0.3, 0.01]);
    let mix = &q * DMatrix::from_diagonal(&sd);
    let mean = DVector::from_fn(dim, |i, _| i as f64 - 3.0);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let z = DVector::<f64>::from_fn(dim, |_, _| r.sample(StandardNormal));
            (&mix * z + &mean).iter().copied().collect()
        })
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
    let clip = 1e-3;
    let model = fit_zca(&refs, dim, clip, 0.5).unwrap();

    let whitened: Vec<DVector<f64>> = rows
        .iter()
        .map(|v| &model.whitener * (DVector::from_column_slice(v) - &model.mean))
        .collect();
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for w in &whitened {
        cov += w * w.transpose();
    }
    cov /= (n - 1) as f64;

    // Directions kept by the clip: eigenvectors of the sample covariance
    // whose eigenvalue lies above the floor.
    let mut sample = DMatrix::<f64>::zeros(dim, dim);
    for v in &rows {
        let c = DVector::from_column_slice(v) - &model.mean;
        sample += &c * c.transpose();
    }
    sample /= (n - 1) as f64;
    let eig = SymmetricEigen::new(sample);
    let floor = clip * eig.eigenvalues.max();
    let kept: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > floor).collect();
    let basis = DMatrix::from_columns(&kept.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    let projected = basis.transpose() * &cov * &basis;
    let err = (projected - DMatrix::<f64>::identity(kept.len(), kept.len())).norm();
    verdict(
        11,
        "whitened covariance is the identity on kept directions",
        err <= 0.05 && kept.len() == dim - 1,
        &format!("{} of {dim} directions kept, Frobenius error {err:.2e}", kept.len()),
    );
}

/// Peak resident memory of this process in bytes, when the platform reports it.
fn peak_rss() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

#[test]
#[ignore = "paper-scale protocol sizes take minutes"]
fn criterion_12_paper_scale_protocols_stream() {
    let sizes = ProtocolSizes::PAPER;
    let index = PatchIndex::from_sizes(vec![1300; 116]);
    let scorer = RandomScorer { seed: 12 };
    let mut verification_aps = Vec::new();
    for src in NegSource::ALL {
        let set = build_verification(
            &index,
            NoiseLevel::Tough,
            src,
            sizes.verification_positives,
            sizes.verification_negatives,
            7,
        )
        .unwrap();
        assert_eq!(set.pairs.len(), sizes.verification_positives + sizes.verification_negatives);
        verification_aps.push(run_verification(&set, &scorer).unwrap());
    }
    let plan = build_retrieval(&index, sizes.retrieval_queries, sizes.retrieval_distractors, 7).unwrap();
    let retrieval_aps: Vec<f64> = (0..plan.len())
        .into_par_iter()
        .map(|q| run_retrieval(&plan.collection(&index, q, NoiseLevel::Tough).unwrap(), &scorer).unwrap())
        .collect();
    let finite = verification_aps.iter().chain(&retrieval_aps).all(|a| a.is_finite() && (0.0..=1.0).contains(a));
    const MEMORY_BOUND: u64 = 2 << 30;
    let peak = peak_rss();
    let within = peak.is_none_or(|p| p <= MEMORY_BOUND);
    verdict(
        12,
        "paper-scale verification and retrieval complete within memory bounds",
        finite && within && retrieval_aps.len() == sizes.retrieval_queries,
        &format!(
            "{} verification sets, {} retrieval APs, peak RSS {}",
            verification_aps.len(),
            retrieval_aps.len(),
            peak.map_or("unknown".into(), |p| format!("{} MiB", p >> 20))
        ),
    );
}
