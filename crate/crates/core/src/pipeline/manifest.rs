use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::candidate::{Candidate, ImageRef};
use super::PipelineError;

/// A manifest image: either a bare path or a path with its pixel extent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ManifestImage {
    Path(String),
    Sized {
        path: String,
        width: u32,
        height: u32,
    },
}

impl ManifestImage {
    pub fn path(&self) -> &str {
        match self {
            ManifestImage::Path(p) | ManifestImage::Sized { path: p, .. } => p,
        }
    }

    fn to_ref(&self) -> ImageRef {
        match self {
            ManifestImage::Path(p) => ImageRef {
                path: p.clone(),
                width: None,
                height: None,
            },
            ManifestImage::Sized {
                path,
                width,
                height,
            } => ImageRef {
                path: path.clone(),
                width: Some(*width).filter(|w| *w > 0),
                height: Some(*height).filter(|h| *h > 0),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductEntry {
    pub id: String,
    pub images: Vec<ManifestImage>,
    pub description: String,
}

/// A manifest line that parsed but did not make a usable entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub line: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ingested {
    pub entries: Vec<ProductEntry>,
    pub skipped: Vec<Skipped>,
}

/// Reads a line-delimited JSON manifest of `{id, images, description}` records.
///
/// Blank lines are ignored. Entries without images or with a blank
/// description go to the skip report; unparsable lines and repeated ids are
/// errors.
pub fn ingest<R: BufRead>(reader: R) -> Result<Ingested, PipelineError> {
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| PipelineError::Manifest {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ProductEntry =
            serde_json::from_str(&line).map_err(|e| PipelineError::Manifest {
                line: line_no,
                message: e.to_string(),
            })?;
        if entry.id.trim().is_empty() {
            return Err(PipelineError::Manifest {
                line: line_no,
                message: "empty product id".into(),
            });
        }
        if !seen.insert(entry.id.clone()) {
            return Err(PipelineError::DuplicateProduct(entry.id));
        }
        let reason = if entry.description.trim().is_empty() {
            Some("empty description")
        } else if entry.images.is_empty() {
            Some("no images")
        } else if entry.images.iter().any(|im| im.path().trim().is_empty()) {
            Some("empty image path")
        } else {
            None
        };
        match reason {
            Some(r) => out.skipped.push(Skipped {
                line: line_no,
                id: entry.id,
                reason: r.into(),
            }),
            None => out.entries.push(entry),
        }
    }
    Ok(out)
}

pub fn ingest_file(path: &Path) -> Result<Ingested, PipelineError> {
    let f = std::fs::File::open(path)
        .map_err(|e| PipelineError::io(format!("opening {}", path.display()), e))?;
    ingest(std::io::BufReader::new(f))
}

/// One candidate per image of every entry, in manifest order.
pub fn candidates_for(entries: &[ProductEntry]) -> Vec<Candidate> {
    entries
        .iter()
        .flat_map(|e| {
            e.images
                .iter()
                .enumerate()
                .map(move |(i, im)| Candidate::new(&e.id, i, &e.description, im.to_ref()))
        })
        .collect()
}
