//! Penn Treebank bracketed trees and top-level clause segmentation.

mod io;
mod segment;
mod tree;

pub use io::{parse_tree_text, read_tree_file, TreeStory};
pub use segment::{
    segment_sentence, segment_story, spans_to_story, ClauseSpan, CLAUSAL_LABELS, CLAUSE_LABELS,
};
pub use tree::{parse_bracketed, ParseNode};
