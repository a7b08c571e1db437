use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Penn Treebank constituency tree. Preterminals are leaves: they carry the
/// POS tag as their label and the word as their text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseNode {
    Leaf { tag: String, word: String },
    Phrase { label: String, children: Vec<ParseNode> },
}

impl ParseNode {
    pub fn leaf(tag: impl Into<String>, word: impl Into<String>) -> Self {
        ParseNode::Leaf {
            tag: tag.into(),
            word: word.into(),
        }
    }

    pub fn phrase(label: impl Into<String>, children: Vec<ParseNode>) -> Self {
        ParseNode::Phrase {
            label: label.into(),
            children,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            ParseNode::Leaf { tag, .. } => tag,
            ParseNode::Phrase { label, .. } => label,
        }
    }

    pub fn children(&self) -> &[ParseNode] {
        match self {
            ParseNode::Leaf { .. } => &[],
            ParseNode::Phrase { children, .. } => children,
        }
    }

    pub fn leaf_text(&self) -> Option<&str> {
        match self {
            ParseNode::Leaf { word, .. } => Some(word),
            ParseNode::Phrase { .. } => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, ParseNode::Leaf { .. })
    }

    /// (word, tag) pairs in left-to-right order.
    pub fn leaves(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<(&'a str, &'a str)>) {
        match self {
            ParseNode::Leaf { tag, word } => out.push((word, tag)),
            ParseNode::Phrase { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Label without function tags or coindexation ("S-TPC-1" -> "S").
    pub fn base_label(&self) -> &str {
        base_label(self.label())
    }

    /// Single-line bracketed rendering.
    pub fn to_bracketed(&self) -> String {
        self.to_string()
    }
}

pub(crate) fn base_label(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    label.split(['-', '=']).next().unwrap_or(label)
}

impl fmt::Display for ParseNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseNode::Leaf { tag, word } => write!(f, "({tag} {word})"),
            ParseNode::Phrase { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Lexeme<'a> {
    Open(usize),
    Close(usize),
    Atom(usize, &'a str),
}

fn lex(text: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        let boundary = ch == '(' || ch == ')' || ch.is_whitespace();
        if boundary {
            if let Some(s) = start.take() {
                out.push(Lexeme::Atom(s, &text[s..i]));
            }
            match ch {
                '(' => out.push(Lexeme::Open(i)),
                ')' => out.push(Lexeme::Close(i)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Lexeme::Atom(s, &text[s..]));
    }
    out
}

struct Frame {
    open_at: usize,
    label: Option<String>,
    children: Vec<ParseNode>,
    word: Option<String>,
}

fn parse_error(position: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        position,
        message: message.into(),
    }
}

/// Parses one or more bracketed trees. Several top-level expressions, or a
/// label-less outer bracket as in `((S ...))`, are wrapped in a `ROOT` node.
pub fn parse_bracketed(text: &str) -> Result<ParseNode> {
    let lexemes = lex(text);
    if lexemes.is_empty() {
        return Err(Error::Empty("bracketed tree".into()));
    }
    let mut stack: Vec<Frame> = Vec::new();
    let mut top: Vec<ParseNode> = Vec::new();
    let mut i = 0;
    while i < lexemes.len() {
        match lexemes[i] {
            Lexeme::Open(pos) => {
                if let Some(parent) = stack.last() {
                    if parent.word.is_some() {
                        return Err(parse_error(pos, "constituent follows a word inside a preterminal"));
                    }
                }
                let label = match lexemes.get(i + 1) {
                    Some(Lexeme::Atom(_, atom)) => {
                        i += 1;
                        Some(atom.to_string())
                    }
                    _ => None,
                };
                stack.push(Frame {
                    open_at: pos,
                    label,
                    children: Vec::new(),
                    word: None,
                });
            }
            Lexeme::Atom(pos, atom) => {
                let frame = stack
                    .last_mut()
                    .ok_or_else(|| parse_error(pos, format!("word `{atom}` outside brackets")))?;
                if frame.label.is_none() {
                    return Err(parse_error(pos, "label-less node"));
                }
                if frame.word.is_some() || !frame.children.is_empty() {
                    return Err(parse_error(pos, format!("unexpected word `{atom}`")));
                }
                frame.word = Some(atom.to_string());
            }
            Lexeme::Close(pos) => {
                let frame = stack
                    .pop()
                    .ok_or_else(|| parse_error(pos, "unbalanced `)`"))?;
                let is_outer = stack.is_empty();
                let node = match (frame.label, frame.word) {
                    (Some(tag), Some(word)) => ParseNode::Leaf { tag, word },
                    (label, None) => {
                        if frame.children.is_empty() {
                            return Err(parse_error(frame.open_at, "empty constituent"));
                        }
                        let label = match label {
                            Some(l) => l,
                            None if is_outer => "ROOT".to_string(),
                            None => return Err(parse_error(frame.open_at, "label-less node")),
                        };
                        ParseNode::Phrase {
                            label,
                            children: frame.children,
                        }
                    }
                    (None, Some(_)) => unreachable!("words require a label"),
                };
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None => top.push(node),
                }
            }
        }
        i += 1;
    }
    if let Some(frame) = stack.last() {
        return Err(parse_error(frame.open_at, "unbalanced `(`"));
    }
    Ok(if top.len() == 1 {
        top.pop().unwrap()
    } else {
        ParseNode::phrase("ROOT", top)
    })
}
