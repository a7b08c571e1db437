use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{parse_bracketed, ParseNode};
use crate::error::{Error, Result};

/// The parsed sentences of one story, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeStory {
    pub story_id: String,
    pub trees: Vec<ParseNode>,
}

#[derive(Deserialize)]
struct TreeRecord {
    story_id: String,
    trees: Vec<String>,
}

/// Reads a tree file in either layout: one bracketed tree per line with blank
/// lines between stories (ids `story-0000`, ...), or JSON lines of
/// `{"story_id": .., "trees": [..]}`. The layout is chosen by the first
/// non-blank character.
pub fn read_tree_file(path: impl AsRef<Path>) -> Result<Vec<TreeStory>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tree_text(&text)
}

pub fn parse_tree_text(text: &str) -> Result<Vec<TreeStory>> {
    if text.trim_start().starts_with('{') {
        parse_jsonl(text)
    } else {
        parse_lines(text)
    }
}

fn tree_error(line: usize, err: Error) -> Error {
    Error::schema(line, "tree", err.to_string())
}

fn parse_lines(text: &str) -> Result<Vec<TreeStory>> {
    let mut stories = Vec::new();
    let mut current: Vec<ParseNode> = Vec::new();
    let flush = |current: &mut Vec<ParseNode>, stories: &mut Vec<TreeStory>| {
        if !current.is_empty() {
            stories.push(TreeStory {
                story_id: format!("story-{:04}", stories.len()),
                trees: std::mem::take(current),
            });
        }
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            flush(&mut current, &mut stories);
            continue;
        }
        current.push(parse_bracketed(line).map_err(|e| tree_error(i + 1, e))?);
    }
    flush(&mut current, &mut stories);
    Ok(stories)
}

fn parse_jsonl(text: &str) -> Result<Vec<TreeStory>> {
    let mut stories = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TreeRecord =
            serde_json::from_str(line).map_err(|e| Error::schema(i + 1, "<record>", e.to_string()))?;
        let trees = record
            .trees
            .iter()
            .map(|t| parse_bracketed(t).map_err(|e| tree_error(i + 1, e)))
            .collect::<Result<Vec<_>>>()?;
        stories.push(TreeStory {
            story_id: record.story_id,
            trees,
        });
    }
    Ok(stories)
}
