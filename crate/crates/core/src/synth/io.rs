use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{validate_segments, Corpus, GenConfig, LanguageBundle, Segment, VideoRecord};
use crate::blob;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    config: GenConfig,
    videos: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    frames: usize,
    dim: usize,
    gt: Vec<Segment>,
    aligned: bool,
    #[serde(default)]
    donor: Option<String>,
    blobs: BlobNames,
}

#[derive(Serialize, Deserialize)]
struct BlobNames {
    vis: String,
    cls: String,
    loc: String,
    adv: String,
}

/// Writes `manifest.json` plus four `.avlm` blobs per video; returns the
/// manifest path.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(corpus.len());
    for v in &corpus.videos {
        let names = BlobNames {
            vis: format!("{}.vis.avlm", v.id),
            cls: format!("{}.cls.avlm", v.id),
            loc: format!("{}.loc.avlm", v.id),
            adv: format!("{}.adv.avlm", v.id),
        };
        for (name, m) in [
            (&names.vis, &v.vis),
            (&names.cls, &v.lang.cls_stream),
            (&names.loc, &v.lang.loc_stream),
            (&names.adv, &v.lang.adv_stream),
        ] {
            blob::write_file(&dir.join(name), &blob::encode_matrix(m))?;
        }
        entries.push(ManifestEntry {
            id: v.id.clone(),
            frames: v.vis.rows(),
            dim: v.vis.cols(),
            gt: v.gt.clone(),
            aligned: v.lang.aligned,
            donor: v.lang.donor.clone(),
            blobs: names,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        config: corpus.config.clone(),
        videos: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("manifest", e))?;
    let path = dir.join(MANIFEST_FILE);
    blob::write_file(&path, format!("{text}\n").as_bytes())?;
    Ok(path)
}

pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let path = dir.join(MANIFEST_FILE);
    let text = blob::read_file(&path)?;
    let manifest: Manifest =
        serde_json::from_slice(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::invalid("manifest version", format!("{} (expected {MANIFEST_VERSION})", manifest.version)));
    }
    let cfg = manifest.config;
    let mut videos = Vec::with_capacity(manifest.videos.len());
    for e in manifest.videos {
        validate_segments(&e.gt, e.frames, cfg.num_classes)?;
        let load = |name: &str| -> Result<_> {
            let p = dir.join(name);
            if !p.is_file() {
                return Err(Error::MissingBlob { id: e.id.clone(), path: p });
            }
            let m = blob::decode_matrix(&blob::read_file(&p)?, &p)?;
            if m.shape() != (e.frames, e.dim) {
                return Err(Error::Format {
                    path: p,
                    offset: 8,
                    reason: format!("shape {:?} does not match manifest ({}, {})", m.shape(), e.frames, e.dim),
                });
            }
            Ok(m)
        };
        let vis = load(&e.blobs.vis)?;
        let lang = LanguageBundle {
            cls_stream: load(&e.blobs.cls)?,
            loc_stream: load(&e.blobs.loc)?,
            adv_stream: load(&e.blobs.adv)?,
            aligned: e.aligned,
            donor: e.donor.clone(),
        };
        videos.push(VideoRecord {
            id: e.id,
            vis,
            lang,
            gt: e.gt,
        });
    }
    Ok(Corpus { config: cfg, videos })
}
