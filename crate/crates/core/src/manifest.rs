//! Dataset manifest: one CSV row per image, paths relative to the manifest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Eye {
    L,
    R,
}

impl Eye {
    pub const BOTH: [Eye; 2] = [Eye::L, Eye::R];

    pub fn index(self) -> u64 {
        match self {
            Eye::L => 0,
            Eye::R => 1,
        }
    }
}

impl fmt::Display for Eye {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Eye::L => "L",
            Eye::R => "R",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    Real,
    Fake,
}

impl ImageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ImageKind::Real => "real",
            ImageKind::Fake => "fake",
        }
    }
}

impl fmt::Display for ImageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A (user, eye) pair; each eye counts as its own identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Subject {
    pub user: u32,
    pub eye: Eye,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}{}", self.user, self.eye)
    }
}

impl FromStr for Subject {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.strip_prefix('u').ok_or_else(|| format!("bad subject '{s}'"))?;
        let (num, eye) = body.split_at(body.len().saturating_sub(1));
        let eye = match eye {
            "L" => Eye::L,
            "R" => Eye::R,
            _ => return Err(format!("bad subject '{s}'")),
        };
        let user = num.parse().map_err(|_| format!("bad subject '{s}'"))?;
        Ok(Subject { user, eye })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub user_id: u32,
    pub eye: Eye,
    pub session: u8,
    pub idx: u32,
    pub kind: ImageKind,
    /// Relative to the manifest's directory.
    pub path: String,
}

impl ManifestEntry {
    pub fn subject(&self) -> Subject {
        Subject { user: self.user_id, eye: self.eye }
    }

    /// `u<user>/<eye>/<kind>/s<session>_<idx>.pgm`
    pub fn layout_path(user_id: u32, eye: Eye, kind: ImageKind, session: u8, idx: u32) -> String {
        format!("u{user_id}/{eye}/{kind}/s{session}_{idx}.pgm")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn count(&self, kind: ImageKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Parses manifest text; relative paths resolve against `root`.
    pub fn parse(text: &[u8], root: &Path) -> Result<Self, ManifestError> {
        let mut reader = csv::Reader::from_reader(text);
        let headers = reader.headers().map_err(|e| ManifestError::Invalid(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["user_id", "eye", "session", "idx", "kind", "path"] {
            return Err(ManifestError::Invalid(format!("unexpected header {:?}", headers)));
        }
        let mut entries = Vec::new();
        for row in reader.deserialize::<ManifestEntry>() {
            let e = row.map_err(|e| ManifestError::Invalid(e.to_string()))?;
            if !(1..=2).contains(&e.session) {
                return Err(ManifestError::Invalid(format!("session {} not in {{1,2}}", e.session)));
            }
            entries.push(e);
        }
        if entries.is_empty() {
            return Err(ManifestError::Invalid("no entries".into()));
        }
        Ok(Self { root: root.to_path_buf(), entries })
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &root)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}
