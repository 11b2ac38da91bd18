//! On-disk video bundles.
//!
//! A bundle is a directory:
//!
//! ```text
//! manifest.json   {"id": "..."}
//! probs.bin       lexical probabilities, channels = vocabulary size
//! feats.bin       region features, channels = feature dimension
//! vocab.txt       optional, one word per line
//! captions.json   optional, [{"id": "...", "text": "..."}]
//! scores.json     optional category score table
//! ```

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::format::{decode_featmap, decode_probmap, encode, Tensor};
use super::rank::CategoryScoreTable;
use crate::lexmodel::Vocabulary;
use crate::selector::SentenceLexicalSet;
use crate::submodular::{LexicalProbMap, RegionFeatureMap};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const PROBS: &str = "probs.bin";
pub const FEATS: &str = "feats.bin";
pub const VOCAB: &str = "vocab.txt";
pub const CAPTIONS: &str = "captions.json";
pub const SCORES: &str = "scores.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub id: String,
    pub text: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoBundle {
    pub id: String,
    pub probmap: LexicalProbMap,
    pub featmap: RegionFeatureMap,
    pub vocabulary: Option<Vocabulary>,
    pub captions: Option<Vec<Caption>>,
    pub scores: Option<CategoryScoreTable>,
}

impl VideoBundle {
    pub fn validate(&self) -> Result<()> {
        if self.probmap.frames() != self.featmap.frames() || self.probmap.grid() != self.featmap.grid() {
            return Err(Error::Shape(format!(
                "probabilities cover {} frames of a {:?} grid, features {} frames of a {:?} grid",
                self.probmap.frames(),
                self.probmap.grid(),
                self.featmap.frames(),
                self.featmap.grid()
            )));
        }
        if let Some(v) = &self.vocabulary {
            if v.len() != self.probmap.vocab_size() {
                return Err(Error::Vocabulary(format!(
                    "{} vocabulary words for {} probability channels",
                    v.len(),
                    self.probmap.vocab_size()
                )));
            }
        }
        if let Some(captions) = &self.captions {
            let mut seen = HashSet::new();
            if let Some(c) = captions.iter().find(|c| !seen.insert(c.id.as_str())) {
                return Err(Error::Precondition(format!("duplicate caption id {:?}", c.id)));
            }
        }
        if let Some(t) = &self.scores {
            t.validate()?;
        }
        Ok(())
    }

    /// Caption word sets; requires both captions and a vocabulary.
    pub fn sentences(&self) -> Result<Vec<SentenceLexicalSet>> {
        let captions = self
            .captions
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("bundle {} has no captions", self.id)))?;
        let vocab = self.vocabulary()?;
        Ok(captions
            .iter()
            .map(|c| SentenceLexicalSet::from_text(c.id.clone(), &c.text, vocab))
            .collect())
    }

    pub fn vocabulary(&self) -> Result<&Vocabulary> {
        self.vocabulary
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("bundle {} has no vocabulary", self.id)))
    }
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    std::fs::read(dir.join(name)).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.join(name).display())))
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<Option<T>> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    let bytes = read(dir, name)?;
    serde_json::from_slice(&bytes).map(Some).map_err(|e| Error::Format {
        field: name.to_string(),
        offset: 0,
        message: format!("line {} column {}: {e}", e.line(), e.column()),
    })
}

/// Loads and validates a bundle directory. Nothing is returned unless
/// every file parses and all cross-file invariants hold.
pub fn load_bundle(dir: &Path) -> Result<VideoBundle> {
    let manifest: Manifest = read_json(dir, MANIFEST)?
        .ok_or_else(|| Error::Precondition(format!("{} has no {MANIFEST}", dir.display())))?;
    let probmap = decode_probmap(&read(dir, PROBS)?, PROBS)?;
    let featmap = decode_featmap(&read(dir, FEATS)?, FEATS)?;
    let vocabulary = if dir.join(VOCAB).exists() {
        let text = String::from_utf8(read(dir, VOCAB)?).map_err(|e| Error::Format {
            field: VOCAB.into(),
            offset: e.utf8_error().valid_up_to() as u64,
            message: "invalid UTF-8".into(),
        })?;
        Some(Vocabulary::new(text.lines().map(str::to_string))?)
    } else {
        None
    };
    let bundle = VideoBundle {
        id: manifest.id,
        probmap,
        featmap,
        vocabulary,
        captions: read_json(dir, CAPTIONS)?,
        scores: read_json(dir, SCORES)?,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Writes a bundle directory (created if missing).
pub fn save_bundle(dir: &Path, bundle: &VideoBundle) -> Result<()> {
    bundle.validate()?;
    std::fs::create_dir_all(dir)?;
    let probs = encode(&Tensor::from_probmap(&bundle.probmap), PROBS)?;
    let feats = encode(&Tensor::from_featmap(&bundle.featmap), FEATS)?;
    write_json(&dir.join(MANIFEST), &Manifest { id: bundle.id.clone() })?;
    std::fs::write(dir.join(PROBS), probs)?;
    std::fs::write(dir.join(FEATS), feats)?;
    if let Some(v) = &bundle.vocabulary {
        let mut text = v.words().join("\n");
        text.push('\n');
        std::fs::write(dir.join(VOCAB), text)?;
    }
    if let Some(c) = &bundle.captions {
        write_json(&dir.join(CAPTIONS), c)?;
    }
    if let Some(s) = &bundle.scores {
        write_json(&dir.join(SCORES), s)?;
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes a results document.
pub fn save_results<T: Serialize + ?Sized>(path: &Path, results: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_json(path, results)
}
