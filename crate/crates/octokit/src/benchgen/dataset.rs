//! Line-delimited episode datasets.
//!
//! One JSON record per line, schema-versioned. Records carry the scene
//! seed and generation parameters, so a dataset is self-contained: scenes
//! are regenerated deterministically on load.

use super::Episode;
use crate::env::{gen_scene, EnvError, Scene, SceneParams};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

pub const DATASET_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: schema {found} does not match expected {expected}")]
    SchemaMismatch {
        path: String,
        line: usize,
        found: u32,
        expected: u32,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// One dataset row: an episode plus everything needed to rebuild its scene.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub scene_seed: u64,
    pub scene_params: SceneParams,
    pub episode: Episode,
}

#[derive(Serialize, Deserialize)]
struct EpisodeRecord {
    schema: u32,
    scene_seed: u64,
    scene_params: SceneParamsRecord,
    episode: Episode,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
struct SceneParamsRecord {
    width: usize,
    height: usize,
    resolution: f64,
    rooms: usize,
    objects: usize,
}

impl From<SceneParams> for SceneParamsRecord {
    fn from(p: SceneParams) -> Self {
        SceneParamsRecord {
            width: p.width,
            height: p.height,
            resolution: p.resolution,
            rooms: p.rooms,
            objects: p.objects,
        }
    }
}

impl From<SceneParamsRecord> for SceneParams {
    fn from(r: SceneParamsRecord) -> Self {
        SceneParams {
            width: r.width,
            height: r.height,
            resolution: r.resolution,
            rooms: r.rooms,
            objects: r.objects,
        }
    }
}

pub fn write_dataset(path: &Path, items: &[DatasetItem]) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = std::io::BufWriter::new(file);
    for item in items {
        let record = EpisodeRecord {
            schema: DATASET_SCHEMA,
            scene_seed: item.scene_seed,
            scene_params: item.scene_params.into(),
            episode: item.episode.clone(),
        };
        let line = serde_json::to_string(&record).expect("episode serializes");
        out.write_all(line.as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetItem>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EpisodeRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
                path: path.display().to_string(),
                line: line_no,
                message: e.to_string(),
            })?;
        if record.schema != DATASET_SCHEMA {
            return Err(DatasetError::SchemaMismatch {
                path: path.display().to_string(),
                line: line_no,
                found: record.schema,
                expected: DATASET_SCHEMA,
            });
        }
        items.push(DatasetItem {
            scene_seed: record.scene_seed,
            scene_params: record.scene_params.into(),
            episode: record.episode,
        });
    }
    Ok(items)
}

/// Regenerates and caches scenes referenced by dataset items.
#[derive(Default)]
pub struct SceneCache {
    scenes: HashMap<u64, Scene>,
}

impl SceneCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scene_for(&mut self, item: &DatasetItem) -> Result<&Scene, EnvError> {
        if !self.scenes.contains_key(&item.scene_seed) {
            let scene = gen_scene(item.scene_seed, &item.scene_params)?;
            self.scenes.insert(item.scene_seed, scene);
        }
        Ok(&self.scenes[&item.scene_seed])
    }

    /// Eagerly builds every distinct scene (handy before parallel loops).
    pub fn warm(&mut self, items: &[DatasetItem]) -> Result<(), EnvError> {
        for item in items {
            self.scene_for(item)?;
        }
        Ok(())
    }

    pub fn get(&self, scene_seed: u64) -> Option<&Scene> {
        self.scenes.get(&scene_seed)
    }
}
