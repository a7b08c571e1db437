use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::ClauseType;
use crate::error::{Error, Result};

/// Which slot the matched story was shown in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Presentation {
    /// Matched story shown as A, random story as B.
    AB,
    BA,
}

/// One forced-choice judgment: which of two candidate stories is closer to
/// the main story.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    #[serde(rename = "main")]
    pub main_story: String,
    #[serde(rename = "matched")]
    pub matched_story: String,
    #[serde(rename = "random")]
    pub random_story: String,
    #[serde(rename = "aspect")]
    pub matched_aspect: ClauseType,
    #[serde(rename = "order")]
    pub presentation_order: Presentation,
    pub chosen: String,
    #[serde(rename = "reason", default)]
    pub free_text_reason: Option<String>,
    #[serde(default)]
    pub mapped_aspects: Option<Vec<ClauseType>>,
}

impl ChoiceRecord {
    pub fn validate(&self) -> Result<()> {
        if self.chosen != self.matched_story && self.chosen != self.random_story {
            return Err(Error::InvalidArgument(format!(
                "chosen story `{}` is neither `{}` nor `{}`",
                self.chosen, self.matched_story, self.random_story
            )));
        }
        let narrative = |t: &ClauseType| t.is_narrative();
        if !narrative(&self.matched_aspect)
            || self.mapped_aspects.as_ref().is_some_and(|m| !m.iter().all(narrative))
        {
            return Err(Error::InvalidArgument("aspects must be narrative clause types".into()));
        }
        Ok(())
    }

    pub fn detected(&self) -> bool {
        self.chosen == self.matched_story
    }
}

pub fn read_choice_records(reader: impl BufRead) -> Result<Vec<ChoiceRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<choice records>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ChoiceRecord =
            serde_json::from_str(&line).map_err(|e| Error::schema(i + 1, "record", e.to_string()))?;
        rec.validate()
            .map_err(|e| Error::schema(i + 1, "record", e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_choice_records(path: impl AsRef<Path>) -> Result<Vec<ChoiceRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_choice_records(BufReader::new(file))
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

fn fmt_percent(p: Option<f64>) -> String {
    p.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}%"))
}

fn title(t: ClauseType) -> &'static str {
    match t {
        ClauseType::Action => "Action",
        ClauseType::Evaluation => "Evaluation",
        ClauseType::Orientation => "Orientation",
        ClauseType::NotStory => "Not story",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub aspect: ClauseType,
    pub detected: usize,
    pub total: usize,
    /// `None` when no record was matched at this aspect.
    pub percent: Option<f64>,
}

/// Share of judgments picking the matched story, per matched aspect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub rows: Vec<DetectionRow>,
}

pub fn detection_report(records: &[ChoiceRecord]) -> Result<DetectionReport> {
    if records.is_empty() {
        return Err(Error::Empty("choice records".into()));
    }
    for r in records {
        r.validate()?;
    }
    let rows = ClauseType::NARRATIVE
        .iter()
        .map(|&aspect| {
            let of: Vec<&ChoiceRecord> = records.iter().filter(|r| r.matched_aspect == aspect).collect();
            let detected = of.iter().filter(|r| r.detected()).count();
            DetectionRow {
                aspect,
                detected,
                total: of.len(),
                percent: percent(detected, of.len()),
            }
        })
        .collect();
    Ok(DetectionReport { rows })
}

impl DetectionReport {
    pub fn row(&self, aspect: ClauseType) -> Option<&DetectionRow> {
        self.rows.iter().find(|r| r.aspect == aspect)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("match_only_at,detected,total,percent_detected\n");
        for r in &self.rows {
            let p = r.percent.map_or_else(String::new, |v| format!("{v:.1}"));
            out.push_str(&format!("{},{},{},{}\n", r.aspect, r.detected, r.total, p));
        }
        out
    }
}

impl fmt::Display for DetectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14}| {:>20} | {:>5}", "Match only at", "% of times detected", "n")?;
        writeln!(f, "{}", "-".repeat(14 + 2 + 20 + 3 + 5))?;
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{:<14}| {:>20} | {:>5}", title(r.aspect), fmt_percent(r.percent), r.total)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionRow {
    pub matched_aspect: ClauseType,
    /// Distinct (main, matched) story pairs in this row.
    pub pairs: usize,
    /// Per mentioned aspect, share of pairs with at least one explanation
    /// mapped to it; columns in action, evaluation, orientation order.
    pub percent: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectMentionReport {
    pub rows: Vec<MentionRow>,
}

/// Rows are matched aspects, columns mentioned aspects. Several explanations
/// of the same story pair count once.
pub fn aspect_mention_report(records: &[ChoiceRecord]) -> Result<AspectMentionReport> {
    if records.is_empty() {
        return Err(Error::Empty("choice records".into()));
    }
    let mut pairs: BTreeMap<(ClauseType, &str, &str), [bool; 3]> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        r.validate()?;
        let mapped = r.mapped_aspects.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("record {} has no mapped aspects", i + 1))
        })?;
        let entry = pairs
            .entry((r.matched_aspect, r.main_story.as_str(), r.matched_story.as_str()))
            .or_default();
        for m in mapped {
            if let Some(k) = ClauseType::NARRATIVE.iter().position(|t| t == m) {
                entry[k] = true;
            }
        }
    }
    let rows = ClauseType::NARRATIVE
        .iter()
        .map(|&aspect| {
            let of: Vec<&[bool; 3]> = pairs
                .iter()
                .filter(|((a, _, _), _)| *a == aspect)
                .map(|(_, v)| v)
                .collect();
            let mut pct = [None; 3];
            for (k, p) in pct.iter_mut().enumerate() {
                *p = percent(of.iter().filter(|v| v[k]).count(), of.len());
            }
            MentionRow {
                matched_aspect: aspect,
                pairs: of.len(),
                percent: pct,
            }
        })
        .collect();
    Ok(AspectMentionReport { rows })
}

impl AspectMentionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("match_at,pairs,action,evaluation,orientation\n");
        for r in &self.rows {
            let cells: Vec<String> = r
                .percent
                .iter()
                .map(|p| p.map_or_else(String::new, |v| format!("{v:.1}")))
                .collect();
            out.push_str(&format!("{},{},{}\n", r.matched_aspect, r.pairs, cells.join(",")));
        }
        out
    }
}

impl fmt::Display for AspectMentionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<12}|", "Match at")?;
        for t in ClauseType::NARRATIVE {
            write!(f, " {:>11}", title(t))?;
        }
        writeln!(f, " | {:>5}", "pairs")?;
        write!(f, "{}", "-".repeat(12 + 1 + 36 + 3 + 5))?;
        for r in &self.rows {
            write!(f, "\n{:<12}|", title(r.matched_aspect))?;
            for p in r.percent {
                write!(f, " {:>11}", fmt_percent(p))?;
            }
            write!(f, " | {:>5}", r.pairs)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClauseType::*;

    fn rec(main: &str, aspect: ClauseType, detected: bool, mapped: Option<Vec<ClauseType>>) -> ChoiceRecord {
        ChoiceRecord {
            main_story: main.into(),
            matched_story: format!("{main}-m"),
            random_story: format!("{main}-r"),
            matched_aspect: aspect,
            presentation_order: Presentation::AB,
            chosen: if detected { format!("{main}-m") } else { format!("{main}-r") },
            free_text_reason: None,
            mapped_aspects: mapped,
        }
    }

    #[test]
    fn detection_percentages() {
        let mut records: Vec<_> = (0..10).map(|i| rec(&format!("s{i}"), Action, true, None)).collect();
        records.extend((0..4).map(|i| rec(&format!("e{i}"), Evaluation, i < 2, None)));
        let r = detection_report(&records).unwrap();
        assert_eq!(r.row(Action).unwrap().percent, Some(100.0));
        assert_eq!(r.row(Evaluation).unwrap().percent, Some(50.0));
        assert_eq!(r.row(Orientation).unwrap().percent, None);
        assert!(detection_report(&[]).is_err());
    }

    #[test]
    fn mention_matrix_identity_pattern() {
        let records: Vec<_> = ClauseType::NARRATIVE
            .iter()
            .map(|&t| rec(t.as_str(), t, true, Some(vec![t])))
            .collect();
        let r = aspect_mention_report(&records).unwrap();
        for (i, row) in r.rows.iter().enumerate() {
            for k in 0..3 {
                assert_eq!(row.percent[k], Some(if i == k { 100.0 } else { 0.0 }));
            }
        }
        let missing = vec![rec("x", Action, true, None)];
        assert!(aspect_mention_report(&missing).is_err());
    }

    #[test]
    fn jsonl_schema() {
        let line = r#"{"main": "m", "matched": "a", "random": "b", "aspect": "action", "order": "BA", "chosen": "a", "reason": null, "mapped_aspects": ["evaluation"]}"#;
        let recs = read_choice_records(line.as_bytes()).unwrap();
        assert_eq!(recs[0].presentation_order, Presentation::BA);
        assert!(recs[0].detected());
        let bad = line.replace(r#""chosen": "a""#, r#""chosen": "z""#);
        assert!(matches!(read_choice_records(bad.as_bytes()), Err(Error::Schema { line: 1, .. })));
    }
}
