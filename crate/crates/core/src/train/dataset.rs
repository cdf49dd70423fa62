//! Paired dataset directories: `<root>/rain/<name>` and `<root>/norain/<name>`.

use std::path::{Path, PathBuf};

use super::patches::Pair;
use crate::error::{Error, Result};
use crate::io::{list_images, read_image};

#[derive(Clone, Debug)]
pub struct NamedPair {
    pub name: String,
    pub pair: Pair,
}

fn names(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    if !dir.is_dir() {
        return Err(Error::Dataset(format!("missing directory {}", dir.display())));
    }
    Ok(list_images(dir)?
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            (name, p)
        })
        .collect())
}

/// Loads every filename-matched pair; any unmatched file is an error.
pub fn load_dataset(root: &Path) -> Result<Vec<NamedPair>> {
    let rain = names(&root.join("rain"))?;
    let clean = names(&root.join("norain"))?;
    let rain_names: Vec<&String> = rain.iter().map(|(n, _)| n).collect();
    let clean_names: Vec<&String> = clean.iter().map(|(n, _)| n).collect();
    if let Some(n) = rain_names.iter().find(|n| !clean_names.contains(n)) {
        return Err(Error::Dataset(format!("rain/{n} has no match in norain/")));
    }
    if let Some(n) = clean_names.iter().find(|n| !rain_names.contains(n)) {
        return Err(Error::Dataset(format!("norain/{n} has no match in rain/")));
    }
    if rain.is_empty() {
        return Err(Error::Dataset(format!("no images under {}", root.display())));
    }
    rain.into_iter()
        .zip(clean)
        .map(|((name, rp), (_, cp))| {
            let rainy = read_image(&rp)?;
            let clean = read_image(&cp)?;
            if rainy.shape() != clean.shape() {
                return Err(Error::Dataset(format!(
                    "{name}: rain {} and norain {} differ in size",
                    rainy.shape(),
                    clean.shape()
                )));
            }
            Ok(NamedPair {
                name,
                pair: Pair { rainy, clean },
            })
        })
        .collect()
}
