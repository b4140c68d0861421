//! Hierarchical schema of one scientific data file.
//!
//! A [`SchemaIndex`] lists every group and dataset of a file together with
//! short attribute previews. It can be built from an HDF5 container
//! ([`extract_schema`], behind the `hdf5` feature) or from a JSON schema
//! manifest ([`load_manifest`]), which is how non-HDF5 formats and tests get
//! in without a binary reader.

#[cfg(feature = "hdf5")]
mod hdf5;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[cfg(feature = "hdf5")]
pub use self::hdf5::extract_schema;

/// Maximum length, in characters, of an attribute preview.
pub const MAX_PREVIEW_CHARS: usize = 120;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("not an HDF5 container: {0}")]
    NotAnHdf5Container(PathBuf),
    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },
    #[error("manifest parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema invariant violated: {0}")]
    InvariantViolation(String),
    #[error("HDF5 support not compiled in; use a JSON schema manifest for {0}")]
    Hdf5Unsupported(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub preview: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    path: String,
    shape: Vec<u64>,
    dtype: String,
    attributes: Vec<Attribute>,
}

impl DatasetEntry {
    pub fn new(
        path: impl Into<String>,
        shape: Vec<u64>,
        dtype: impl Into<String>,
        attributes: Vec<Attribute>,
    ) -> Result<Self, SchemaError> {
        let path = normalize_path(&path.into())?;
        if path == "/" {
            return Err(SchemaError::InvariantViolation(
                "the root group cannot be a dataset".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        let mut attrs = Vec::with_capacity(attributes.len());
        for attr in attributes {
            if !seen.insert(attr.name.clone()) {
                return Err(SchemaError::InvariantViolation(format!(
                    "duplicate attribute {:?} on {path}",
                    attr.name
                )));
            }
            attrs.push(Attribute {
                name: attr.name,
                preview: truncate_preview(&attr.preview),
            });
        }
        Ok(Self {
            path,
            shape,
            dtype: dtype.into(),
            attributes: attrs,
        })
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    /// Final path component.
    pub fn leaf(&self) -> &str {
        self.path.rsplit('/').next().unwrap_or_default()
    }

    pub fn parent(&self) -> &str {
        parent_of(&self.path)
    }

    pub fn shape(&self) -> &[u64] {
        &self.shape
    }

    pub fn dtype(&self) -> &str {
        &self.dtype
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    /// Path components below the root, in order.
    pub fn components(&self) -> impl Iterator<Item = &str> {
        components(&self.path)
    }
}

/// Immutable index of a file's groups and datasets.
///
/// Datasets and groups are kept sorted by path so that two indexes of the same
/// hierarchy compare equal regardless of discovery order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaIndex {
    source_id: String,
    groups: Vec<String>,
    datasets: Vec<DatasetEntry>,
}

impl SchemaIndex {
    /// Builds an index, adding the root and any missing ancestor groups.
    pub fn new(
        source_id: impl Into<String>,
        groups: impl IntoIterator<Item = String>,
        datasets: Vec<DatasetEntry>,
    ) -> Result<Self, SchemaError> {
        let mut group_set = BTreeSet::new();
        group_set.insert("/".to_string());
        for g in groups {
            let g = normalize_path(&g)?;
            if !group_set.insert(g.clone()) && g != "/" {
                return Err(SchemaError::InvariantViolation(format!(
                    "duplicate group path {g}"
                )));
            }
        }
        let mut datasets = datasets;
        datasets.sort_by(|a, b| a.path.cmp(&b.path));
        for pair in datasets.windows(2) {
            if pair[0].path == pair[1].path {
                return Err(SchemaError::InvariantViolation(format!(
                    "duplicate dataset path {}",
                    pair[0].path
                )));
            }
        }
        let listed = group_set.clone();
        for ds in &datasets {
            let mut parent = ds.parent();
            while parent != "/" {
                group_set.insert(parent.to_string());
                parent = parent_of(parent);
            }
        }
        let implied: Vec<String> = group_set
            .iter()
            .flat_map(|g| ancestors(g))
            .filter(|a| !group_set.contains(a))
            .collect();
        group_set.extend(implied);
        if let Some(ds) = datasets.iter().find(|d| listed.contains(&d.path)) {
            return Err(SchemaError::InvariantViolation(format!(
                "{} is listed both as a group and as a dataset",
                ds.path
            )));
        }
        if let Some(ds) = datasets
            .iter()
            .find(|d| group_set.contains(&d.path) || group_set.iter().any(|g| g.starts_with(&format!("{}/", d.path))))
        {
            return Err(SchemaError::InvariantViolation(format!(
                "dataset {} has children",
                ds.path
            )));
        }
        Ok(Self {
            source_id: source_id.into(),
            groups: group_set.into_iter().collect(),
            datasets,
        })
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// All group paths, sorted, root included.
    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn datasets(&self) -> &[DatasetEntry] {
        &self.datasets
    }

    pub fn dataset(&self, path: &str) -> Option<&DatasetEntry> {
        self.datasets
            .binary_search_by(|d| d.path.as_str().cmp(path))
            .ok()
            .map(|i| &self.datasets[i])
    }

    pub fn is_group(&self, path: &str) -> bool {
        self.groups.binary_search_by(|g| g.as_str().cmp(path)).is_ok()
    }

    /// Datasets located anywhere below `group`.
    pub fn datasets_under<'a>(&'a self, group: &str) -> impl Iterator<Item = &'a DatasetEntry> {
        let prefix = if group == "/" {
            "/".to_string()
        } else {
            format!("{group}/")
        };
        self.datasets
            .iter()
            .filter(move |d| d.path.starts_with(&prefix))
    }

    /// True when the index has nothing to match against.
    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty() && self.groups.iter().all(|g| g == "/")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    source_id: String,
    #[serde(default)]
    groups: Vec<String>,
    #[serde(default)]
    datasets: Vec<ManifestDataset>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDataset {
    path: String,
    #[serde(default)]
    shape: Vec<u64>,
    dtype: String,
    #[serde(default)]
    attributes: Vec<Attribute>,
}

/// Parses a JSON schema manifest.
pub fn load_manifest(doc: &str) -> Result<SchemaIndex, SchemaError> {
    let parsed: ManifestDoc = serde_json::from_str(doc).map_err(|e| SchemaError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let datasets = parsed
        .datasets
        .into_iter()
        .map(|d| DatasetEntry::new(d.path, d.shape, d.dtype, d.attributes))
        .collect::<Result<Vec<_>, _>>()?;
    SchemaIndex::new(parsed.source_id, parsed.groups, datasets)
}

/// Renders an index as a schema manifest; the inverse of [`load_manifest`].
pub fn dump_manifest(index: &SchemaIndex) -> String {
    let doc = ManifestDoc {
        source_id: index.source_id.clone(),
        groups: index.groups.clone(),
        datasets: index
            .datasets
            .iter()
            .map(|d| ManifestDataset {
                path: d.path.clone(),
                shape: d.shape.clone(),
                dtype: d.dtype.clone(),
                attributes: d.attributes.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("manifest serialization is infallible")
}

/// Loads a schema from either a JSON manifest (`.json`) or an HDF5 file.
pub fn load_schema(path: &Path) -> Result<SchemaIndex, SchemaError> {
    if !path.exists() {
        return Err(SchemaError::FileNotFound(path.to_path_buf()));
    }
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        return load_manifest(&text);
    }
    #[cfg(feature = "hdf5")]
    {
        extract_schema(path)
    }
    #[cfg(not(feature = "hdf5"))]
    {
        Err(SchemaError::Hdf5Unsupported(path.to_path_buf()))
    }
}

/// Truncates a preview to [`MAX_PREVIEW_CHARS`], marking the cut with `...`.
pub fn truncate_preview(s: &str) -> String {
    let clean: String = s
        .chars()
        .map(|c| if c.is_control() { ' ' } else { c })
        .collect();
    if clean.chars().count() <= MAX_PREVIEW_CHARS {
        return clean;
    }
    let mut out: String = clean.chars().take(MAX_PREVIEW_CHARS - 3).collect();
    out.push_str("...");
    out
}

fn normalize_path(raw: &str) -> Result<String, SchemaError> {
    let nfc: String = raw.nfc().collect();
    if !nfc.starts_with('/') {
        return Err(SchemaError::InvariantViolation(format!(
            "path {raw:?} is not absolute"
        )));
    }
    if nfc == "/" {
        return Ok(nfc);
    }
    if nfc[1..].split('/').any(str::is_empty) {
        return Err(SchemaError::InvariantViolation(format!(
            "path {raw:?} has an empty component"
        )));
    }
    Ok(nfc)
}

fn parent_of(path: &str) -> &str {
    match path.rfind('/') {
        Some(0) | None => "/",
        Some(i) => &path[..i],
    }
}

fn ancestors(path: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut p = path;
    while p != "/" {
        p = parent_of(p);
        out.push(p.to_string());
    }
    out
}

pub(crate) fn components(path: &str) -> impl Iterator<Item = &str> {
    path.split('/').filter(|c| !c.is_empty())
}
