//! Directory ingestion for the `root/{train,test}/<CLASS>/*` layout.

use std::path::{Path, PathBuf};

use crate::data::{SampleRecord, SampleSource};
use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "png"];

#[derive(Debug, Clone)]
pub struct DatasetScan {
    /// Class names sorted lexicographically; index in this list is the label.
    pub class_names: Vec<String>,
    pub train: Vec<SampleRecord>,
    /// Empty when the dataset has no `test/` directory.
    pub test: Vec<SampleRecord>,
    /// Non-image files ignored during the scan.
    pub skipped_files: usize,
}

/// Scan `root/train/<CLASS>/*` (required) and `root/test/<CLASS>/*`
/// (optional). Class names come from the train subdirectories, sorted; files
/// are sorted within each class so a rescan of an unchanged tree yields an
/// identical record list.
pub fn scan_dataset_dir(root: impl AsRef<Path>) -> Result<DatasetScan> {
    let root = root.as_ref();
    let train_dir = root.join("train");
    if !train_dir.is_dir() {
        return Err(Error::Dataset(format!(
            "missing train/ directory under {}",
            root.display()
        )));
    }

    let class_names = sorted_subdirs(&train_dir)?;
    if class_names.is_empty() {
        return Err(Error::Dataset(format!(
            "no class subdirectories under {}",
            train_dir.display()
        )));
    }

    let mut skipped = 0usize;
    let train = scan_split(&train_dir, &class_names, true, &mut skipped)?;
    let test_dir = root.join("test");
    let test = if test_dir.is_dir() {
        scan_split(&test_dir, &class_names, false, &mut skipped)?
    } else {
        Vec::new()
    };

    Ok(DatasetScan {
        class_names,
        train,
        test,
        skipped_files: skipped,
    })
}

fn scan_split(
    dir: &Path,
    class_names: &[String],
    require_nonempty: bool,
    skipped: &mut usize,
) -> Result<Vec<SampleRecord>> {
    let mut records = Vec::new();
    for (class_index, name) in class_names.iter().enumerate() {
        let class_dir = dir.join(name);
        if !class_dir.is_dir() {
            if require_nonempty {
                return Err(Error::Dataset(format!(
                    "class folder `{name}` missing under {}",
                    dir.display()
                )));
            }
            continue;
        }
        let mut files: Vec<PathBuf> = Vec::new();
        for entry in std::fs::read_dir(&class_dir)? {
            let path = entry?.path();
            if !path.is_file() {
                continue;
            }
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| e.to_ascii_lowercase());
            match ext.as_deref() {
                Some(e) if IMAGE_EXTENSIONS.contains(&e) => files.push(path),
                _ => *skipped += 1,
            }
        }
        if require_nonempty && files.is_empty() {
            return Err(Error::Dataset(format!(
                "class folder `{name}` under {} contains no images",
                dir.display()
            )));
        }
        files.sort();
        records.extend(files.into_iter().map(|path| SampleRecord {
            source: SampleSource::Path(path),
            class_index,
            class_name: name.clone(),
        }));
    }
    Ok(records)
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if entry.path().is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}
