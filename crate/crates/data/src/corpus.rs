//! On-disk corpus: PNG rasters plus a JSON-lines manifest, and batching.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mrugan_augment::{io as png_io, DistanceField, RgbImage};
use mrugan_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::schedule::Source;
use crate::synth::{corpus_sample, ShapeClass};
use crate::{invalid, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One manifest record. Paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub label: usize,
    pub split: Split,
    pub photo: String,
    pub edge: String,
    pub sketch: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

impl Manifest {
    /// Reads `path`, or `path/manifest.jsonl` when `path` is a directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut path = path.as_ref().to_path_buf();
        if path.is_dir() {
            path.push(MANIFEST_FILE);
        }
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line).map_err(|source| Error::Manifest {
                path: path.clone(),
                line: i + 1,
                source,
            })?;
            entries.push(entry);
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Manifest { root, entries };
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        for e in &self.entries {
            let line = serde_json::to_string(e).expect("manifest entries serialize");
            writeln!(w, "{line}").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return invalid("manifest", format!("duplicate id {:?}", e.id));
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.entries.iter().map(|e| e.label + 1).max().unwrap_or(0)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn get(&self, id: &str) -> Result<&ManifestEntry> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

/// Renders `classes * n_per_class` samples into `out`, holding out the
/// last tenth of each class (at least one sample) as the test split.
pub fn build_corpus(out: impl AsRef<Path>, classes: usize, n_per_class: usize, resolution: usize, seed: u64) -> Result<Manifest> {
    let out = out.as_ref();
    if classes == 0 || classes > ShapeClass::ALL.len() {
        return invalid("corpus", format!("{classes} classes (1..={} supported)", ShapeClass::ALL.len()));
    }
    if n_per_class < 2 {
        return invalid("corpus", format!("{n_per_class} samples per class (at least 2 needed)"));
    }
    for sub in ["photo", "edge", "sketch"] {
        let dir = out.join(sub);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let n_test = ((n_per_class as f64 / 10.0).round() as usize).clamp(1, n_per_class - 1);
    let mut entries = Vec::with_capacity(classes * n_per_class);
    for class in 0..classes {
        let name = ShapeClass::from_index(class)?.name();
        for index in 0..n_per_class {
            let sample = corpus_sample(seed, class, index, resolution)?;
            let id = format!("{name}-{index:04}");
            let entry = ManifestEntry {
                photo: format!("photo/{id}.png"),
                edge: format!("edge/{id}.png"),
                sketch: format!("sketch/{id}.png"),
                id,
                label: class,
                split: if index < n_per_class - n_test { Split::Train } else { Split::Test },
            };
            png_io::write_rgb(out.join(&entry.photo), &sample.photo)?;
            png_io::write_field(out.join(&entry.edge), &sample.edge)?;
            png_io::write_field(out.join(&entry.sketch), &sample.sketch)?;
            entries.push(entry);
        }
    }
    let manifest = Manifest { root: out.to_path_buf(), entries };
    manifest.save(out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Batched rasters: fields (N, 1, R, R) in [0, 1], photos (N, 3, R, R) in
/// [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub fields: Tensor<f32>,
    pub photos: Tensor<f32>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Mirrors the selected samples left-right, field and photo together.
    pub fn flip_horizontal(&mut self, which: &[bool]) {
        for t in [&mut self.fields, &mut self.photos] {
            let s = t.shape();
            let (c, h, w) = (s.c(), s.h(), s.w());
            let data = t.data_mut();
            for (n, _) in which.iter().enumerate().filter(|(_, &f)| f) {
                for row in data[n * c * h * w..(n + 1) * c * h * w].chunks_exact_mut(w) {
                    row.reverse();
                }
            }
        }
    }
}

/// One sample's rasters in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedSample {
    pub id: String,
    pub label: usize,
    pub split: Split,
    pub photo: RgbImage,
    pub edge: DistanceField,
    pub sketch: DistanceField,
}

fn load_entry(m: &Manifest, e: &ManifestEntry) -> Result<LoadedSample> {
    let photo = png_io::read_rgb(m.resolve(&e.photo))?;
    let edge = png_io::read_field(m.resolve(&e.edge))?;
    let sketch = png_io::read_field(m.resolve(&e.sketch))?;
    let (w, h) = (photo.width, photo.height);
    if (edge.width, edge.height) != (w, h) || (sketch.width, sketch.height) != (w, h) || w != h {
        return invalid("corpus", format!("sample {:?}: rasters are not one common square size", e.id));
    }
    Ok(LoadedSample {
        id: e.id.clone(),
        label: e.label,
        split: e.split,
        photo,
        edge,
        sketch,
    })
}

fn assemble(samples: &[&LoadedSample], sources: &[Source]) -> Result<Batch> {
    if samples.len() != sources.len() {
        return invalid("batch", format!("{} samples but {} source flags", samples.len(), sources.len()));
    }
    let r = samples.first().map_or(0, |s| s.photo.width);
    if samples.iter().any(|s| s.photo.width != r) {
        return invalid("batch", "samples have different resolutions");
    }
    let n = samples.len();
    let mut fields = Vec::with_capacity(n * r * r);
    let mut photos = Vec::with_capacity(n * 3 * r * r);
    for (s, src) in samples.iter().zip(sources) {
        let f = match src {
            Source::Sketch => &s.sketch,
            Source::Edge => &s.edge,
        };
        fields.extend_from_slice(&f.data);
        for c in 0..3 {
            photos.extend(s.photo.data.iter().map(|px| px[c] * 2.0 - 1.0));
        }
    }
    Ok(Batch {
        fields: Tensor::from_vec([n, 1, r, r], fields)?,
        photos: Tensor::from_vec([n, 3, r, r], photos)?,
        labels: samples.iter().map(|s| s.label).collect(),
    })
}

/// Reads the named samples from disk and batches them; `sources` picks the
/// sketch or edge field per slot.
pub fn load_batch(manifest: &Manifest, ids: &[&str], sources: &[Source]) -> Result<Batch> {
    let loaded = ids
        .iter()
        .map(|id| load_entry(manifest, manifest.get(id)?))
        .collect::<Result<Vec<_>>>()?;
    assemble(&loaded.iter().collect::<Vec<_>>(), sources)
}

/// Entire corpus held in memory for training.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub samples: Vec<LoadedSample>,
    pub classes: usize,
    pub resolution: usize,
}

impl Corpus {
    pub fn load(manifest: &Manifest) -> Result<Self> {
        let samples = manifest
            .entries
            .iter()
            .map(|e| load_entry(manifest, e))
            .collect::<Result<Vec<_>>>()?;
        let resolution = samples.first().map_or(0, |s| s.photo.width);
        if samples.iter().any(|s| s.photo.width != resolution) {
            return invalid("corpus", "samples have different resolutions");
        }
        Ok(Corpus {
            classes: manifest.classes(),
            resolution,
            samples,
        })
    }

    /// Indices of the samples in `split`, in manifest order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.samples.len()).filter(|&i| self.samples[i].split == split).collect()
    }

    pub fn batch(&self, indices: &[usize], sources: &[Source]) -> Result<Batch> {
        let picked = indices
            .iter()
            .map(|&i| {
                self.samples
                    .get(i)
                    .ok_or_else(|| Error::UnknownId(format!("#{i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        assemble(&picked, sources)
    }
}
