//! On-disk formats: PGM strips and images, corpus directories, manifests,
//! result CSVs, descriptor dumps and whitening models.
//!
//! Corpus layout, one directory per sequence under the corpus root:
//!
//! ```text
//! manifest.json
//! <seq>/ref.pgm  e1.pgm..e5.pgm  h1.pgm..h5.pgm  t1.pgm..t5.pgm
//! <seq>/homographies.txt          5 lines of 9 row-major decimals
//! <seq>/regions.txt               oriented detections (synthesized corpora)
//! <seq>/image_0.pgm..image_5.pgm  sequence images (synthesized corpora)
//! ```
//!
//! Each strip is an 8-bit binary PGM of width 65 holding N patches stacked
//! vertically, patch j at rows `[65 j, 65 j + 65)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::descriptors::{DescriptorTable, BRIEF_BITS};
use crate::error::{Error, Result};
use crate::geometry::{Homography, NoiseProfile, RegionDetection};
use crate::image::{dequantize, quantize, Image};
use crate::patch::{PatchCorpus, PatchIndex, PatchStrip, SequencePatches, Split, PATCH_SIZE, VARIANTS};
use crate::postproc::ZcaModel;
use crate::synthesis::{Sequence, SequenceKind, TARGETS};
use crate::tasks::{ApRecord, SummaryRow};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const HOMOGRAPHY_FILE: &str = "homographies.txt";
pub const REGIONS_FILE: &str = "regions.txt";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_DATA_FILE: &str = "plot_data.csv";
pub const DETAIL_HEADER: &str = "task,variant,subvariant,id,ap";
pub const SUMMARY_HEADER: &str = "descriptor,task,map,easy,hard,tough";
pub const PLOT_HEADER: &str = "descriptor,task,variant,subvariant,map";

/// Strip file prefixes of the three variants.
pub const VARIANT_PREFIXES: [&str; 3] = ["e", "h", "t"];

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read(path)?).map_err(|_| Error::format(path, "not UTF-8 text"))
}

/// Writes an 8-bit binary PGM (P5, maxval 255).
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            found: pixels.len(),
        });
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

/// Reads an 8-bit binary PGM, returning `(width, height, pixels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = read(path)?;
    let bad = |reason: &str| Error::format(path, reason);
    let mut pos = 0;
    let mut token = || -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token().as_deref() != Some("P5") {
        return Err(bad("not a binary PGM (P5)"));
    }
    let mut number = |what: &str| -> Result<usize> {
        token()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(&format!("malformed {what}")))
    };
    let (w, h, maxval) = (number("width")?, number("height")?, number("maxval")?);
    if maxval != 255 {
        return Err(bad("only 8-bit PGM (maxval 255) is supported"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    if start + w * h != bytes.len() {
        return Err(bad(&format!(
            "raster holds {} bytes, header declares {w}x{h}",
            bytes.len().saturating_sub(start)
        )));
    }
    Ok((w, h, bytes[start..].to_vec()))
}

pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    let px: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    write_pgm(path, img.width(), img.height(), &px)
}

pub fn read_image(path: &Path) -> Result<Image> {
    let (w, h, px) = read_pgm(path)?;
    Image::new(w, h, px.into_iter().map(dequantize).collect())
}

pub fn write_strip(path: &Path, strip: &PatchStrip) -> Result<()> {
    write_pgm(path, PATCH_SIZE, PATCH_SIZE * strip.len(), strip.bytes())
}

pub fn read_strip(path: &Path) -> Result<PatchStrip> {
    let (w, h, px) = read_pgm(path)?;
    if w != PATCH_SIZE {
        return Err(Error::format(path, format!("strip width {w}, expected {PATCH_SIZE}")));
    }
    if h % PATCH_SIZE != 0 {
        return Err(Error::format(path, format!("strip height {h} is not a multiple of {PATCH_SIZE}")));
    }
    PatchStrip::from_bytes(px)
}

pub fn strip_name(variant: usize, target: usize) -> String {
    format!("{}{}.pgm", VARIANT_PREFIXES[variant], target)
}

pub fn write_homographies(path: &Path, hs: &[Homography]) -> Result<()> {
    let mut s = String::new();
    for h in hs {
        s.push_str(&h.to_line());
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_homographies(path: &Path) -> Result<[Homography; TARGETS]> {
    let text = read_text(path)?;
    let hs: Vec<Homography> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(Homography::parse_line)
        .collect::<Result<_>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    hs.try_into()
        .map_err(|v: Vec<Homography>| Error::format(path, format!("{} homographies, expected {TARGETS}", v.len())))
}

/// Oriented detections of a reference image with their retention flag.
pub fn write_regions(path: &Path, regions: &[RegionDetection], retained: &[u32]) -> Result<()> {
    let mut s = String::from("# id cx cy m theta retained\n");
    let mut keep = retained.iter().peekable();
    for (i, r) in regions.iter().enumerate() {
        let flag = keep.next_if(|&&k| k as usize == i).is_some();
        writeln!(s, "{i} {} {} {} {} {}", r.cx, r.cy, r.m, r.theta, flag as u8).expect("string write");
    }
    fs::write(path, s)?;
    Ok(())
}

/// Reads detections written by [`write_regions`]; ids must be `0..n`.
pub fn read_regions(path: &Path) -> Result<(Vec<RegionDetection>, Vec<u32>)> {
    let text = read_text(path)?;
    let mut regions = Vec::new();
    let mut retained = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<f64> {
            f.get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::format(path, format!("malformed line {line:?}")))
        };
        if f.len() != 6 || num(0)? as usize != regions.len() {
            return Err(Error::format(path, format!("malformed line {line:?}")));
        }
        let r = RegionDetection {
            cx: num(1)?,
            cy: num(2)?,
            m: num(3)?,
            theta: num(4)?,
        };
        if num(5)? != 0.0 {
            retained.push(regions.len() as u32);
        }
        regions.push(r);
    }
    Ok((regions, retained))
}

pub fn write_sequence_images(dir: &Path, seq: &Sequence) -> Result<()> {
    for i in 0..=TARGETS {
        write_image(&dir.join(format!("image_{i}.pgm")), seq.image(i))?;
    }
    Ok(())
}

/// Reads the six sequence images and homographies of a synthesized corpus.
pub fn read_sequence(dir: &Path, id: &str, kind: SequenceKind) -> Result<Sequence> {
    let reference = read_image(&dir.join("image_0.pgm"))?;
    let targets = (1..=TARGETS)
        .map(|i| read_image(&dir.join(format!("image_{i}.pgm"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sequence {
        id: id.to_string(),
        kind,
        reference,
        targets,
        homographies: read_homographies(&dir.join(HOMOGRAPHY_FILE))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub id: String,
    pub kind: String,
    pub split: Split,
    pub regions: usize,
}

/// Corpus-level metadata written next to the sequence directories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub master_seed: u64,
    pub patch_size: usize,
    pub noise_profiles: Vec<NoiseProfile>,
    pub sequences: Vec<SequenceEntry>,
    pub config: BTreeMap<String, String>,
}

impl CorpusManifest {
    pub fn describe(corpus: &PatchCorpus, master_seed: u64, profiles: &[NoiseProfile], config: BTreeMap<String, String>) -> Self {
        CorpusManifest {
            format_version: FORMAT_VERSION,
            master_seed,
            patch_size: PATCH_SIZE,
            noise_profiles: profiles.to_vec(),
            sequences: corpus
                .sequences
                .iter()
                .map(|s| SequenceEntry {
                    id: s.id.clone(),
                    kind: s.kind.as_str().into(),
                    split: s.split,
                    regions: s.len(),
                })
                .collect(),
            config,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<CorpusManifest> {
    let path = dir.join(MANIFEST_FILE);
    serde_json::from_str(&read_text(&path)?).map_err(|e| Error::format(&path, e.to_string()))
}

fn parse_kind(s: &str, path: &Path) -> Result<SequenceKind> {
    match s {
        "viewpt" => Ok(SequenceKind::Viewpoint),
        "illum" => Ok(SequenceKind::Illumination),
        other => Err(Error::format(path, format!("unknown sequence kind {other:?}"))),
    }
}

/// Writes the strips (and homographies when known) of one sequence.
pub fn save_sequence_patches(dir: &Path, sp: &SequencePatches) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_strip(&dir.join("ref.pgm"), &sp.reference)?;
    for v in 0..VARIANTS.len() {
        for k in 0..TARGETS {
            write_strip(&dir.join(strip_name(v, k + 1)), &sp.targets[v][k])?;
        }
    }
    if let Some(hs) = &sp.homographies {
        write_homographies(&dir.join(HOMOGRAPHY_FILE), hs)?;
    }
    Ok(())
}

/// Reads the 16 strips of one sequence and checks that they are aligned.
pub fn load_sequence_patches(dir: &Path, id: &str, kind: SequenceKind, split: Split) -> Result<SequencePatches> {
    let reference = read_strip(&dir.join("ref.pgm"))?;
    let n = reference.len();
    let mut targets: [[PatchStrip; TARGETS]; 3] = Default::default();
    for (v, row) in targets.iter_mut().enumerate() {
        for (k, slot) in row.iter_mut().enumerate() {
            let path = dir.join(strip_name(v, k + 1));
            let strip = read_strip(&path)?;
            if strip.len() != n {
                return Err(Error::Corpus(format!(
                    "{id}: {} holds {} patches but ref.pgm holds {n}",
                    path.file_name().unwrap_or_default().to_string_lossy(),
                    strip.len()
                )));
            }
            *slot = strip;
        }
    }
    if n == 0 {
        return Err(Error::Corpus(format!("{id}: empty sequence")));
    }
    let hpath = dir.join(HOMOGRAPHY_FILE);
    let homographies = if hpath.exists() { Some(read_homographies(&hpath)?) } else { None };
    let region_ids = match read_regions(&dir.join(REGIONS_FILE)) {
        Ok((_, retained)) if retained.len() == n => retained,
        Ok(_) => return Err(Error::Corpus(format!("{id}: regions.txt disagrees with the strips"))),
        Err(Error::MissingFile(_)) => (0..n as u32).collect(),
        Err(e) => return Err(e),
    };
    Ok(SequencePatches {
        id: id.to_string(),
        kind,
        split,
        homographies,
        region_ids,
        reference,
        targets,
    })
}

/// Writes the corpus strips and manifest. Sequence images and detections
/// are written separately by the synthesis command.
pub fn save_corpus(corpus: &PatchCorpus, dir: &Path, manifest: &CorpusManifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    for sp in &corpus.sequences {
        save_sequence_patches(&dir.join(&sp.id), sp)?;
    }
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

/// Loads a corpus written by [`save_corpus`], in manifest order.
pub fn load_corpus(dir: &Path) -> Result<(PatchCorpus, CorpusManifest)> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let manifest = read_manifest(dir)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(
            dir.join(MANIFEST_FILE),
            format!("unsupported format version {}", manifest.format_version),
        ));
    }
    let mpath = dir.join(MANIFEST_FILE);
    let sequences = manifest
        .sequences
        .iter()
        .map(|e| load_sequence_patches(&dir.join(&e.id), &e.id, parse_kind(&e.kind, &mpath)?, e.split))
        .collect::<Result<Vec<_>>>()?;
    Ok((PatchCorpus { sequences }, manifest))
}

/// Split rule shared by synthesized and ingested corpora: pairs of
/// consecutive sequences rotate through four slots, the last of which fits
/// post-processing.
pub fn default_split(index: usize) -> Split {
    if (index / 2) % 4 == 3 {
        Split::Fit
    } else {
        Split::Eval
    }
}

/// Loads an external corpus in the strip layout. Geometry is treated as
/// unknown. Sequence order and splits come from `manifest.json` when
/// present; otherwise sequence directories are taken in name order, the kind
/// is read from the `v_` / `i_` prefix and splits follow [`default_split`].
pub fn ingest_external(dir: &Path) -> Result<PatchCorpus> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let entries: Vec<(String, SequenceKind, Split)> = if dir.join(MANIFEST_FILE).exists() {
        let m = read_manifest(dir)?;
        let mpath = dir.join(MANIFEST_FILE);
        m.sequences
            .iter()
            .map(|e| Ok((e.id.clone(), parse_kind(&e.kind, &mpath)?, e.split)))
            .collect::<Result<_>>()?
    } else {
        let mut names: Vec<String> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("ref.pgm").is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                let kind = SequenceKind::from_sequence_id(&n)
                    .ok_or_else(|| Error::Corpus(format!("{n}: name must start with v_ or i_")))?;
                Ok((n, kind, default_split(i)))
            })
            .collect::<Result<_>>()?
    };
    if entries.is_empty() {
        return Err(Error::Corpus(format!("{}: no sequences found", dir.display())));
    }
    let sequences = entries
        .iter()
        .map(|(id, kind, split)| {
            let mut sp = load_sequence_patches(&dir.join(id), id, *kind, *split)?;
            sp.homographies = None;
            sp.region_ids = (0..sp.len() as u32).collect();
            Ok(sp)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PatchCorpus { sequences })
}

/// Six significant digits in plain decimal notation.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn detail_csv(records: &[ApRecord]) -> String {
    let mut s = String::from(DETAIL_HEADER);
    s.push('\n');
    for r in records {
        writeln!(s, "{},{},{},{},{}", r.task, r.variant, r.subvariant, r.id, format_sig6(r.ap)).expect("string write");
    }
    s
}

/// Parses a detail CSV back into records.
pub fn parse_detail_csv(path: &Path) -> Result<Vec<ApRecord>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(DETAIL_HEADER) {
        return Err(Error::format(path, "unexpected header"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::format(path, format!("malformed row {l:?}"));
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(ApRecord {
                task: f[0].parse().map_err(|_| bad())?,
                variant: f[1].parse().map_err(|_| bad())?,
                subvariant: f[2].into(),
                id: f[3].into(),
                ap: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.descriptor,
            r.task,
            format_sig6(r.map),
            format_sig6(r.by_variant[0]),
            format_sig6(r.by_variant[1]),
            format_sig6(r.by_variant[2])
        )
        .expect("string write");
    }
    s
}

pub fn plot_data_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(PLOT_HEADER);
    s.push('\n');
    for r in rows {
        for m in &r.markers {
            writeln!(s, "{},{},{},{},{}", r.descriptor, r.task, m.variant, m.subvariant, format_sig6(m.map))
                .expect("string write");
        }
    }
    s
}

/// Writes `<dir>/<descriptor>/<task>.csv` for every task of one descriptor.
pub fn write_detail_results(dir: &Path, descriptor: &str, task: &str, records: &[ApRecord]) -> Result<PathBuf> {
    let d = dir.join(descriptor);
    fs::create_dir_all(&d)?;
    let path = d.join(format!("{task}.csv"));
    fs::write(&path, detail_csv(records))?;
    Ok(path)
}

/// Writes the summary and plot-data files.
pub fn write_results(dir: &Path, rows: &[SummaryRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SUMMARY_FILE), summary_csv(rows))?;
    fs::write(dir.join(PLOT_DATA_FILE), plot_data_csv(rows))?;
    Ok(())
}

/// Name of a patch in descriptor dumps: `<sequence>/<strip>/<row>`.
pub fn patch_label(corpus: &PatchCorpus, id: crate::patch::PatchId) -> String {
    let strip = if id.image == 0 {
        "ref".to_string()
    } else {
        format!("{}{}", VARIANT_PREFIXES[id.variant as usize], id.image)
    };
    format!("{}/{}/{}", corpus.sequences[id.seq as usize].id, strip, id.region)
}

/// One descriptor per row, the patch label first. Binary descriptors are
/// written as 64 hexadecimal digits, least significant word first.
pub fn write_descriptor_csv(path: &Path, corpus: &PatchCorpus, index: &PatchIndex, table: &DescriptorTable) -> Result<()> {
    let mut s = String::new();
    for (slot, id) in index.ids().enumerate() {
        s.push_str(&patch_label(corpus, id));
        match table {
            DescriptorTable::Real { .. } => {
                for v in table.row(slot).expect("real row") {
                    write!(s, ",{v}").expect("string write");
                }
            }
            DescriptorTable::Binary(words) => {
                s.push(',');
                for w in &words[slot] {
                    write!(s, "{w:016x}").expect("string write");
                }
            }
        }
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

/// Raw dump: a text line `<family> <D> <count>` followed by little-endian
/// f32 values or packed 32-byte bitstrings.
pub fn write_descriptor_binary(path: &Path, family: &str, table: &DescriptorTable) -> Result<()> {
    let mut out = format!("{family} {} {}\n", table.dim(), table.len()).into_bytes();
    match table {
        DescriptorTable::Real { data, .. } => {
            for v in data {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        DescriptorTable::Binary(words) => {
            for w in words.iter().flatten() {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a dump written by [`write_descriptor_binary`]. Real values come
/// back at f32 precision.
pub fn read_descriptor_binary(path: &Path) -> Result<(String, DescriptorTable)> {
    let bytes = read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, "missing header"))?;
    let header = String::from_utf8_lossy(&bytes[..nl]).into_owned();
    let f: Vec<&str> = header.split_whitespace().collect();
    let bad = || Error::format(path, format!("malformed header {header:?}"));
    if f.len() != 3 {
        return Err(bad());
    }
    let dim: usize = f[1].parse().map_err(|_| bad())?;
    let count: usize = f[2].parse().map_err(|_| bad())?;
    let body = &bytes[nl + 1..];
    let table = if f[0] == "brief" {
        if dim != BRIEF_BITS || body.len() != count * 32 {
            return Err(bad());
        }
        DescriptorTable::Binary(
            body.chunks_exact(32)
                .map(|c| std::array::from_fn(|w| u64::from_le_bytes(c[w * 8..w * 8 + 8].try_into().expect("8 bytes"))))
                .collect(),
        )
    } else {
        if body.len() != count * dim * 4 {
            return Err(bad());
        }
        DescriptorTable::Real {
            dim,
            data: body
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect(),
        }
    };
    Ok((f[0].to_string(), table))
}

pub fn write_zca(path: &Path, model: &ZcaModel) -> Result<()> {
    fs::write(path, model.to_text())?;
    Ok(())
}

pub fn read_zca(path: &Path) -> Result<ZcaModel> {
    ZcaModel::from_text(&read_text(path)?)
}
