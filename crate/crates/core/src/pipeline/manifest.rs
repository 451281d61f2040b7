use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "tif", "tiff"];
const MASK_SUFFIXES: &[&str] = &["_mask", "_segmentation"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    /// Relative to the dataset root.
    pub image_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
}

/// Images (and optional masks) of one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Read a manifest file. A relative `dataset_root` is resolved against
    /// the directory holding the manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
        if manifest.dataset_root.is_relative() {
            let base = path.parent().unwrap_or(Path::new(""));
            manifest.dataset_root = base.join(&manifest.dataset_root);
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Load a manifest file, or scan a directory.
    pub fn open(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Self::scan_dir(path)
        } else {
            Self::load(path)
        }
    }

    /// Build a manifest from the image files directly inside `root`.
    ///
    /// The image id is the file stem. A file named `<id>_mask.*` or
    /// `<id>_segmentation.*` is taken as the mask of `<id>`.
    pub fn scan_dir(root: &Path) -> Result<Self> {
        let files = image_files(root)?;

        let stem = |p: &Path| p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let mut masks = std::collections::HashMap::new();
        let mut images = Vec::new();
        for f in &files {
            let s = stem(f);
            match MASK_SUFFIXES.iter().find_map(|suf| s.strip_suffix(suf)) {
                Some(owner) => {
                    masks.insert(owner.to_string(), f.clone());
                }
                None => images.push(f.clone()),
            }
        }
        let rel = |p: &Path| PathBuf::from(p.file_name().unwrap_or_default());
        let entries = images
            .iter()
            .map(|f| {
                let id = stem(f);
                ManifestEntry {
                    mask_path: masks.get(&id).map(|m| rel(m)),
                    image_path: rel(f),
                    image_id: id,
                }
            })
            .collect();
        let manifest = Self {
            dataset_root: root.to_path_buf(),
            entries,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    /// Ids unique and every referenced file present.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.image_id.as_str()) {
                return Err(Error::DuplicateId(e.image_id.clone()));
            }
            let img = self.image_path(e);
            if !img.is_file() {
                return Err(Error::MissingFile(img));
            }
            if let Some(m) = self.mask_path(e) {
                if !m.is_file() {
                    return Err(Error::MissingFile(m));
                }
            }
        }
        Ok(())
    }

    pub fn image_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.dataset_root.join(&entry.image_path)
    }

    pub fn mask_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        entry.mask_path.as_ref().map(|m| self.dataset_root.join(m))
    }

    /// Entries ordered by image id.
    pub fn sorted_entries(&self) -> Vec<&ManifestEntry> {
        let mut v: Vec<_> = self.entries.iter().collect();
        v.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        v
    }
}

/// Image files directly inside `dir`, sorted by path.
pub fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_file(p))
        .collect();
    files.sort();
    Ok(files)
}

fn is_image_file(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}
