use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const POS_DIM: usize = 45;

pub const PENN_TAGSET_VERSION: &str = "ptb45-v1";

/// The 36 word-level Penn Treebank tags followed by the 9 punctuation tags.
/// This order is the one-hot index contract.
pub const PENN_TAGS: [&str; POS_DIM] = [
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP",
    "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB",
    "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB", "#", "$", "``", "''", "-LRB-",
    "-RRB-", ",", ".", ":",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosTagset {
    tags: Vec<String>,
    index: HashMap<String, usize>,
    version: String,
}

impl Default for PosTagset {
    fn default() -> Self {
        PosTagset::penn()
    }
}

impl PosTagset {
    pub fn penn() -> Self {
        Self::build(
            PENN_TAGS.iter().map(|t| t.to_string()).collect(),
            PENN_TAGSET_VERSION.to_string(),
        )
        .expect("built-in tagset is valid")
    }

    fn build(tags: Vec<String>, version: String) -> Result<Self> {
        if tags.len() != POS_DIM {
            return Err(Error::Dimension {
                expected: POS_DIM,
                found: tags.len(),
                context: "tagset size".into(),
            });
        }
        let mut index = HashMap::new();
        for (i, t) in tags.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("tag `{t}` listed twice")));
            }
        }
        Ok(PosTagset { tags, index, version })
    }

    /// Reads a tagset file: exactly 45 non-empty lines, one tag each.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tags: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        let version = if tags.iter().map(String::as_str).eq(PENN_TAGS.iter().copied()) {
            PENN_TAGSET_VERSION.to_string()
        } else {
            let digest = Sha256::digest(tags.join("\n").as_bytes());
            format!("custom-{}", &hex::encode(digest)[..12])
        };
        Self::build(tags, version)
    }

    pub fn to_file_contents(&self) -> String {
        let mut s = self.tags.join("\n");
        s.push('\n');
        s
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn version(&self) -> &str {
        &self.version
    }
}
