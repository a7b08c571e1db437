//! Checkpoint directory: `manifest.json`, one little-endian f32 file per
//! parameter tensor, and the vocabulary and tagset the model was built on.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CnnClassifier, CnnConfig, CnnModel, LABEL_ORDER};
use crate::corpus::ClauseType;
use crate::error::{Error, Result};
use crate::features::{EmbeddingTable, Featurizer, PosTagset, Vocabulary};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const VOCAB_FILE: &str = "vocab.txt";
const TAGSET_FILE: &str = "tagset.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    file: String,
    sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: CnnConfig,
    label_order: Vec<ClauseType>,
    tagset_version: String,
    vocab_hash: String,
    vocab_size: usize,
    seed: u64,
    use_pos: bool,
    embedding_trainable: bool,
    parameters: Vec<TensorEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn save_checkpoint(classifier: &CnnClassifier, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let model = &classifier.model;
    let mut parameters = Vec::new();
    for (name, shape, data) in model.tensors() {
        let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
        let file = format!("{name}.f32");
        let path = dir.join(&file);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        parameters.push(TensorEntry {
            name,
            shape,
            file,
            sha256: sha256_hex(&bytes),
        });
    }
    let featurizer = &classifier.featurizer;
    featurizer.vocab.save(dir.join(VOCAB_FILE))?;
    let tagset_path = dir.join(TAGSET_FILE);
    fs::write(&tagset_path, featurizer.tagset.to_file_contents())
        .map_err(|e| Error::io(&tagset_path, e))?;
    let manifest = Manifest {
        format_version: CHECKPOINT_FORMAT_VERSION,
        config: model.config.clone(),
        label_order: LABEL_ORDER.to_vec(),
        tagset_version: featurizer.tagset.version().to_string(),
        vocab_hash: featurizer.vocab.hash(),
        vocab_size: featurizer.vocab.len(),
        seed: classifier.seed,
        use_pos: featurizer.use_pos,
        embedding_trainable: model.embedding.trainable,
        parameters,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

/// Loads a checkpoint with the vocabulary stored alongside it.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<CnnClassifier> {
    let dir = dir.as_ref();
    let vocab = Vocabulary::load(dir.join(VOCAB_FILE))?;
    load_checkpoint_with_vocab(dir, vocab)
}

/// Loads a checkpoint, refusing it unless `vocab` hashes to the value in the
/// manifest.
pub fn load_checkpoint_with_vocab(dir: impl AsRef<Path>, vocab: Vocabulary) -> Result<CnnClassifier> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let version = raw.get("format_version").and_then(|v| v.as_u64());
    if version != Some(u64::from(CHECKPOINT_FORMAT_VERSION)) {
        return Err(Error::Incompatible(format!(
            "checkpoint format {version:?}, this build reads {CHECKPOINT_FORMAT_VERSION}"
        )));
    }
    let manifest: Manifest = serde_json::from_value(raw)?;
    if manifest.label_order != LABEL_ORDER {
        return Err(Error::Incompatible(format!(
            "label order {:?} differs from {:?}",
            manifest.label_order, LABEL_ORDER
        )));
    }
    if vocab.hash() != manifest.vocab_hash {
        return Err(Error::Incompatible(format!(
            "vocabulary hash {} does not match checkpoint {}",
            vocab.hash(),
            manifest.vocab_hash
        )));
    }
    let tagset = PosTagset::from_file(dir.join(TAGSET_FILE))?;
    if tagset.version() != manifest.tagset_version {
        return Err(Error::Incompatible(format!(
            "tagset version {} does not match checkpoint {}",
            tagset.version(),
            manifest.tagset_version
        )));
    }
    manifest.config.validate()?;

    let mut tensors = Vec::with_capacity(manifest.parameters.len());
    for entry in &manifest.parameters {
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Integrity(format!("checksum mismatch in {}", entry.file)));
        }
        let expected: usize = entry.shape.iter().product();
        if bytes.len() != expected * 4 {
            return Err(Error::Integrity(format!(
                "{} holds {} bytes, shape {:?} needs {}",
                entry.file,
                bytes.len(),
                entry.shape,
                expected * 4
            )));
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push((entry, values));
    }

    let mut iter = tensors.into_iter();
    let (emb_entry, emb_data) = iter
        .next()
        .ok_or_else(|| Error::Integrity("manifest lists no parameters".into()))?;
    if emb_entry.name != "embedding" || emb_entry.shape.len() != 2 {
        return Err(Error::Integrity("first parameter must be the embedding table".into()));
    }
    if emb_entry.shape[0] != vocab.len() {
        return Err(Error::Integrity(format!(
            "embedding has {} rows, vocabulary {} entries",
            emb_entry.shape[0],
            vocab.len()
        )));
    }
    let mut table = EmbeddingTable::from_data(emb_entry.shape[0], emb_entry.shape[1], emb_data)?;
    table.trainable = manifest.embedding_trainable;
    let mut model = CnnModel::new(manifest.config.clone(), table, manifest.seed)?;

    let expected: Vec<(String, Vec<usize>)> =
        model.tensors().into_iter().skip(1).map(|(n, s, _)| (n, s)).collect();
    let rest: Vec<_> = iter.collect();
    if rest.len() != expected.len() {
        return Err(Error::Integrity(format!(
            "manifest lists {} tensors, model has {}",
            rest.len() + 1,
            expected.len() + 1
        )));
    }
    for ((entry, _), (name, shape)) in rest.iter().zip(&expected) {
        if &entry.name != name || &entry.shape != shape {
            return Err(Error::Integrity(format!(
                "tensor {} {:?} does not match model tensor {name} {shape:?}",
                entry.name, entry.shape
            )));
        }
    }
    for (dst, (_, values)) in model.tensors_mut().into_iter().skip(1).zip(rest) {
        dst.copy_from_slice(&values);
    }

    Ok(CnnClassifier {
        model,
        featurizer: Featurizer::new(vocab, tagset, manifest.use_pos),
        seed: manifest.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ClauseClassifier;
    use crate::corpus::{Clause, Story, Token};
    use crate::features::{build_vocab, FeatureConfig, PENN_TAGS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_clauses(n: usize, seed: u64) -> Vec<Clause> {
        let words = ["i", "went", "home", "it", "was", "great", "the", "day"];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let len = rng.gen_range(1..8);
                let tokens = (0..len)
                    .map(|_| {
                        let w = words[rng.gen_range(0..words.len())];
                        let t = PENN_TAGS[rng.gen_range(0..PENN_TAGS.len())];
                        Token::new(w, Some(t.to_string()))
                    })
                    .collect();
                Clause::new("r", i, tokens)
            })
            .collect()
    }

    fn classifier() -> CnnClassifier {
        let story = Story::from_texts("s", &["i went home", "it was great", "i went home"]);
        let vocab = build_vocab(&story.clauses, 1, true).unwrap();
        let cfg = CnnConfig::default();
        let table = EmbeddingTable::random(&vocab, FeatureConfig::default().embedding_dim, 2);
        CnnClassifier {
            model: CnnModel::new(cfg, table, 2).unwrap(),
            featurizer: Featurizer::new(vocab, PosTagset::penn(), true),
            seed: 2,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let original = classifier();
        save_checkpoint(&original, dir.path()).unwrap();
        let loaded = load_checkpoint(dir.path()).unwrap();
        assert_eq!(loaded.model, original.model);
        let clauses = random_clauses(100, 8);
        let refs: Vec<&Clause> = clauses.iter().collect();
        assert_eq!(loaded.predict(&refs).unwrap(), original.predict(&refs).unwrap());
        for c in &refs {
            assert_eq!(loaded.probabilities(c).unwrap(), original.probabilities(c).unwrap());
        }
    }

    #[test]
    fn corrupted_weights_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&classifier(), dir.path()).unwrap();
        let path = dir.path().join("fc2.bias.f32");
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] ^= 0xff;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn foreign_vocabulary_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&classifier(), dir.path()).unwrap();
        let other = build_vocab(&Story::from_texts("o", &["x y z"]).clauses, 0, true).unwrap();
        assert!(matches!(
            load_checkpoint_with_vocab(dir.path(), other),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn version_skew_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&classifier(), dir.path()).unwrap();
        let path = dir.path().join(MANIFEST);
        let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        m["format_version"] = serde_json::json!(99);
        fs::write(&path, m.to_string()).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Incompatible(_))));
    }
}
