//! Dataset manifests: WAV tree to MFCC image files plus a line-per-example
//! index with a seeded per-class train/test split.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frontend::{extract, format_layout, imgfile, load_clip, parse_layout, FrontendConfig};
use crate::rng;

const HEADER: &str = "# raven manifest v1; rows = dct coefficients, columns = frames";
const COLUMNS: &str = "path\tlabel\tsplit\twidth\theight\tlayout";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    /// Image path relative to the manifest's directory.
    pub path: PathBuf,
    pub label: String,
    pub split: Split,
    pub width: usize,
    pub height: usize,
    pub layout: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub records: Vec<Record>,
}

impl Manifest {
    /// Sorted distinct labels; a label's index is its class id.
    pub fn classes(&self) -> Vec<String> {
        let mut c: Vec<String> = self.records.iter().map(|r| r.label.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    pub fn count(&self, label: &str, split: Split) -> usize {
        self.records.iter().filter(|r| r.label == label && r.split == split).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\n{COLUMNS}\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.path.display(),
                r.label,
                r.split.as_str(),
                r.width,
                r.height,
                format_layout(&r.layout)
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        if lines.next() != Some(COLUMNS) {
            return Err(Error::Format("manifest lacks its column header".into()));
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::Format(format!("manifest record {}: {what}", n + 1));
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let split = match f[2] {
                "train" => Split::Train,
                "test" => Split::Test,
                _ => return Err(bad("split must be train or test")),
            };
            let dim = |s: &str| s.parse::<usize>().map_err(|_| bad("bad dimension"));
            let layout = parse_layout(f[5]).map_err(|_| bad("bad layout"))?;
            records.push(Record {
                path: PathBuf::from(f[0]),
                label: f[1].to_string(),
                split,
                width: dim(f[3])?,
                height: dim(f[4])?,
                layout,
            });
        }
        Ok(Self { records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Loads `(pixels, class)` pairs of one split; paths resolve against
    /// `root`.
    pub fn load(&self, root: &Path, split: Split) -> Result<Vec<(Vec<f64>, usize)>> {
        let classes = self.classes();
        self.records
            .par_iter()
            .filter(|r| r.split == split)
            .map(|r| {
                let img = imgfile::read_composite(&root.join(&r.path), &r.layout)?;
                let class = classes.binary_search(&r.label).expect("label comes from this manifest");
                Ok((img.pixels, class))
            })
            .collect()
    }
}

/// Per-class WAV lists, sorted by class name and file name.
fn scan(audio_dir: &Path) -> Result<Vec<(String, Vec<PathBuf>)>> {
    let rd = fs::read_dir(audio_dir).map_err(|e| Error::io(audio_dir, e))?;
    let mut classes = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(audio_dir, e))?;
        let path = entry.path();
        if !path.is_dir() || entry.file_name().to_string_lossy().starts_with('_') {
            continue;
        }
        let mut wavs: Vec<PathBuf> = fs::read_dir(&path)
            .map_err(|e| Error::io(&path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        wavs.sort();
        classes.push((entry.file_name().to_string_lossy().into_owned(), wavs));
    }
    classes.sort();
    Ok(classes)
}

/// One audio file assigned to a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitFile {
    pub label: String,
    pub wav: PathBuf,
    pub split: Split,
}

/// Shuffles each class of `audio_dir/<label>/*.wav` with the seed and
/// keeps at most `train` + `test` files. Classes too small for both splits
/// are reported together.
pub fn split_audio(audio_dir: &Path, train: usize, test: usize, seed: u64) -> Result<Vec<SplitFile>> {
    let classes = scan(audio_dir)?;
    if classes.is_empty() {
        return Err(Error::Parameter(format!("{} holds no class folders", audio_dir.display())));
    }
    let mut problems = Vec::new();
    let mut out = Vec::new();
    for (k, (label, wavs)) in classes.into_iter().enumerate() {
        let mut order = wavs;
        order.shuffle(&mut rng::stream(seed, 0x5EED_0000 + k as u64));
        let n_train = train.min(order.len());
        let n_test = test.min(order.len() - n_train);
        if n_train == 0 || n_test == 0 {
            problems.push(format!("class {label}: {} files cannot fill both splits", order.len()));
            continue;
        }
        for (i, wav) in order.into_iter().take(n_train + n_test).enumerate() {
            let split = if i < n_train { Split::Train } else { Split::Test };
            out.push(SplitFile { label: label.clone(), wav, split });
        }
    }
    if !problems.is_empty() {
        return Err(Error::Parameter(problems.join("; ")));
    }
    Ok(out)
}

/// Converts `audio_dir/<label>/*.wav` into image files under `out_dir`
/// and writes `out_dir/manifest.tsv`. Every file that fails to convert is
/// listed in one error.
pub fn preprocess(
    audio_dir: &Path,
    out_dir: &Path,
    cfg: &FrontendConfig,
    train: usize,
    test: usize,
    seed: u64,
) -> Result<Manifest> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let files = split_audio(audio_dir, train, test, seed)?;
    let mut labels: Vec<&String> = files.iter().map(|f| &f.label).collect();
    labels.dedup();
    for label in labels {
        let dir = out_dir.join("images").join(label);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let results: Vec<Result<Record>> = files
        .par_iter()
        .map(|f| {
            let stem = f.wav.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let rel = PathBuf::from("images").join(&f.label).join(format!("{stem}.mfcc"));
            let img = extract(&load_clip(&f.wav)?, cfg)?;
            imgfile::write_composite(&out_dir.join(&rel), &img)?;
            let (width, height) = imgfile::header_dims(&img);
            Ok(Record {
                path: rel,
                label: f.label.clone(),
                split: f.split,
                width,
                height,
                layout: layout.clone(),
            })
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut problems = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                problems.push(e.to_string());
                first_err.get_or_insert(e);
            }
        }
    }
    if !problems.is_empty() {
        let summary = format!("{} problem(s):\n  {}", problems.len(), problems.join("\n  "));
        return Err(match first_err {
            Some(Error::Io { path, source }) => Error::Io {
                path,
                source: io::Error::new(source.kind(), summary),
            },
            Some(Error::Format(_)) => Error::Format(summary),
            _ => Error::Parameter(summary),
        });
    }
    let manifest = Manifest { records };
    manifest.write(&out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = Manifest {
            records: vec![Record {
                path: "images/up/0001.mfcc".into(),
                label: "up".into(),
                split: Split::Test,
                width: 24,
                height: 16,
                layout: vec![(16, 16), (8, 16)],
            }],
        };
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn malformed_records_rejected() {
        assert!(Manifest::parse("x\n").is_err());
        let bad = format!("{COLUMNS}\na\tup\tvalid\t1\t1\t1x1\n");
        assert!(matches!(Manifest::parse(&bad), Err(Error::Format(_))));
    }
}
