use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{is_valid_token, tokenize, Annotation, AnnotationSet, Clause, ClauseType, Story, Token};
use crate::error::{Error, Result};

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryRecord {
    pub story_id: String,
    pub speaker_gender: Option<String>,
    pub clauses: Vec<ClauseRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseRecord {
    pub text: String,
    pub tokens: Option<Vec<String>>,
    pub pos: Option<Vec<String>>,
    pub annotations: Vec<Annotation>,
    /// Derived fields; written for inspection, ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<ClauseType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<ClauseType>,
}

impl From<&Story> for StoryRecord {
    fn from(story: &Story) -> Self {
        StoryRecord {
            story_id: story.story_id.clone(),
            speaker_gender: story.speaker_gender.clone(),
            clauses: story
                .clauses
                .iter()
                .map(|c| {
                    let has_pos = c.has_pos();
                    ClauseRecord {
                        text: c.text(),
                        tokens: Some(c.tokens.iter().map(|t| t.text.clone()).collect()),
                        pos: has_pos.then(|| {
                            c.tokens.iter().map(|t| t.pos.clone().unwrap_or_default()).collect()
                        }),
                        annotations: c.annotations.iter().cloned().collect(),
                        gold: c.gold,
                        agreement: c.agreement,
                        predicted: c.predicted,
                    }
                })
                .collect(),
        }
    }
}

/// Loads a JSON-lines corpus file. Blank lines are skipped.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Story>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_corpus(reader: impl BufRead) -> Result<Vec<Story>> {
    let mut stories = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::schema(line_no, "<record>", e.to_string()))?;
        let story = parse_story(&value, line_no)?;
        if !seen.insert(story.story_id.clone()) {
            return Err(Error::DuplicateStory(story.story_id));
        }
        stories.push(story);
    }
    Ok(stories)
}

pub fn write_corpus(path: impl AsRef<Path>, corpus: &[Story]) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for story in corpus {
        serde_json::to_writer(&mut out, &StoryRecord::from(story))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn parse_story(value: &Value, line: usize) -> Result<Story> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::schema(line, "<record>", "expected a JSON object"))?;
    let story_id = required_str(obj, "story_id", line, "story_id")?;
    if story_id.is_empty() {
        return Err(Error::schema(line, "story_id", "must not be empty"));
    }
    let speaker_gender = optional_str(obj, "speaker_gender", line, "speaker_gender")?;
    let transcript = optional_str(obj, "transcript", line, "transcript")?;
    let duration_seconds = match obj.get("duration_seconds") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_f64()
                .ok_or_else(|| Error::schema(line, "duration_seconds", "expected a number"))?,
        ),
    };
    let raw_clauses = obj
        .get("clauses")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::schema(line, "clauses", "expected an array"))?;

    let clauses = raw_clauses
        .iter()
        .enumerate()
        .map(|(index, raw)| parse_clause(raw, &story_id, index, line))
        .collect::<Result<Vec<_>>>()?;

    Ok(Story {
        story_id,
        clauses,
        speaker_gender,
        transcript,
        duration_seconds,
    })
}

fn parse_clause(value: &Value, story_id: &str, index: usize, line: usize) -> Result<Clause> {
    let field = |name: &str| format!("clauses[{index}].{name}");
    let obj = value
        .as_object()
        .ok_or_else(|| Error::schema(line, format!("clauses[{index}]"), "expected an object"))?;
    let text = required_str(obj, "text", line, &field("text"))?;

    let words = match obj.get("tokens") {
        None | Some(Value::Null) => tokenize(&text),
        Some(v) => string_array(v, line, &field("tokens"))?,
    };
    if words.is_empty() {
        return Err(Error::schema(line, field("tokens"), "clause has no tokens"));
    }
    if let Some(bad) = words.iter().position(|w| !is_valid_token(w)) {
        return Err(Error::schema(
            line,
            format!("{}[{bad}]", field("tokens")),
            "token is empty or contains whitespace",
        ));
    }

    let tags = match obj.get("pos") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let tags = string_array(v, line, &field("pos"))?;
            if tags.len() != words.len() {
                return Err(Error::schema(
                    line,
                    field("pos"),
                    format!("{} tags for {} tokens", tags.len(), words.len()),
                ));
            }
            Some(tags)
        }
    };

    let annotations = match obj.get("annotations") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(j, item)| parse_annotation(item, line, &format!("{}[{j}]", field("annotations"))))
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(Error::schema(line, field("annotations"), "expected an array")),
    };
    let annotations = AnnotationSet::new(annotations)
        .map_err(|e| Error::schema(line, field("annotations"), e.to_string()))?;

    let predicted = match obj.get("predicted") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(
            s.parse::<ClauseType>()
                .map_err(|e| Error::schema(line, field("predicted"), e.to_string()))?,
        ),
        Some(_) => return Err(Error::schema(line, field("predicted"), "expected a string")),
    };

    let tokens = match tags {
        Some(tags) => words
            .into_iter()
            .zip(tags)
            .map(|(w, t)| Token::new(w, Some(t)))
            .collect(),
        None => words.into_iter().map(|w| Token::new(w, None)).collect(),
    };

    let mut clause = Clause::new(story_id, index, tokens);
    clause.annotations = annotations;
    clause.predicted = predicted;
    Ok(clause)
}

fn parse_annotation(value: &Value, line: usize, field: &str) -> Result<Annotation> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::schema(line, field, "expected an object"))?;
    let annotator = required_str(obj, "annotator", line, &format!("{field}.annotator"))?;
    let label = required_str(obj, "label", line, &format!("{field}.label"))?;
    let label = match label.as_str() {
        "action" => ClauseType::Action,
        "orientation" => ClauseType::Orientation,
        "evaluation" => ClauseType::Evaluation,
        "not_story" => ClauseType::NotStory,
        other => {
            return Err(Error::schema(
                line,
                format!("{field}.label"),
                format!("unknown label `{other}`"),
            ))
        }
    };
    Ok(Annotation { annotator, label })
}

fn required_str(obj: &Map<String, Value>, key: &str, line: usize, field: &str) -> Result<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(Error::schema(line, field, "expected a string")),
        None => Err(Error::schema(line, field, "missing")),
    }
}

fn optional_str(obj: &Map<String, Value>, key: &str, line: usize, field: &str) -> Result<Option<String>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(Error::schema(line, field, "expected a string or null")),
    }
}

fn string_array(value: &Value, line: usize, field: &str) -> Result<Vec<String>> {
    let items = value
        .as_array()
        .ok_or_else(|| Error::schema(line, field, "expected an array of strings"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::schema(line, format!("{field}[{i}]"), "expected a string"))
        })
        .collect()
}
