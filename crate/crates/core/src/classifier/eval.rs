use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{label_index, ClauseClassifier, LABEL_ORDER};
use crate::corpus::{Clause, ClauseType};
use crate::error::{Error, Result};

/// Which test clauses take part, by number of annotators agreeing with gold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementFilter {
    All,
    AtLeast(u8),
    Exactly(u8),
}

impl AgreementFilter {
    pub fn accepts(self, clause: &Clause) -> bool {
        match self {
            AgreementFilter::All => true,
            AgreementFilter::AtLeast(k) => clause.agreement.is_some_and(|a| a >= k),
            AgreementFilter::Exactly(k) => clause.agreement == Some(k),
        }
    }
}

impl fmt::Display for AgreementFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgreementFilter::All => f.write_str("all"),
            AgreementFilter::AtLeast(k) => write!(f, ">={k}"),
            AgreementFilter::Exactly(k) => write!(f, "={k}"),
        }
    }
}

/// `all`, `N` or `>=N` (at least N), `=N` (exactly N).
impl FromStr for AgreementFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(AgreementFilter::All);
        }
        let (exact, num) = match s.strip_prefix(">=") {
            Some(rest) => (false, rest),
            None => match s.strip_prefix('=') {
                Some(rest) => (true, rest),
                None => (false, s),
            },
        };
        let k: u8 = num
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad agreement filter `{s}`")))?;
        if k > 3 {
            return Err(Error::InvalidArgument(format!("agreement {k} exceeds annotator count")));
        }
        Ok(if exact { AgreementFilter::Exactly(k) } else { AgreementFilter::AtLeast(k) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: ClauseType,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classifier: String,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are gold labels, columns predictions, both in label order.
    pub confusion: [[usize; 3]; 3],
    pub n_examples: usize,
    pub agreement_filter: AgreementFilter,
    /// Clauses that passed the filter but carry a not-story gold label.
    pub excluded_not_story: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores predictions against gold labels; both must be narrative types.
pub fn evaluate_predictions(gold: &[ClauseType], predicted: &[ClauseType]) -> Result<EvalReport> {
    if gold.len() != predicted.len() {
        return Err(Error::Dimension {
            expected: gold.len(),
            found: predicted.len(),
            context: "prediction count".into(),
        });
    }
    if gold.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let mut confusion = [[0usize; 3]; 3];
    for (&g, &p) in gold.iter().zip(predicted) {
        let gi = label_index(g)
            .ok_or_else(|| Error::InvalidArgument(format!("gold label {g} is not narrative")))?;
        let pi = label_index(p)
            .ok_or_else(|| Error::InvalidArgument(format!("predicted label {p} is not narrative")))?;
        confusion[gi][pi] += 1;
    }
    let per_class: Vec<ClassMetrics> = LABEL_ORDER
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let tp = confusion[i][i];
            let support: usize = confusion[i].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[i]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let trace: usize = (0..3).map(|i| confusion[i][i]).sum();
    Ok(EvalReport {
        classifier: String::new(),
        micro_f1: ratio(trace, gold.len()),
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / 3.0,
        per_class,
        confusion,
        n_examples: gold.len(),
        agreement_filter: AgreementFilter::All,
        excluded_not_story: 0,
    })
}

/// Runs `classifier` over the clauses passing `filter` and scores it.
pub fn evaluate(
    classifier: &dyn ClauseClassifier,
    clauses: &[&Clause],
    filter: AgreementFilter,
) -> Result<EvalReport> {
    let mut kept = Vec::new();
    let mut excluded = 0;
    for &clause in clauses {
        let gold = clause.gold.ok_or_else(|| Error::MissingGold(clause.clause_id.clone()))?;
        if !filter.accepts(clause) {
            continue;
        }
        if gold.is_narrative() {
            kept.push(clause);
        } else {
            excluded += 1;
        }
    }
    if kept.is_empty() {
        return Err(Error::Empty(format!("evaluation set after agreement filter {filter}")));
    }
    let predicted = classifier.predict(&kept)?;
    let gold: Vec<ClauseType> = kept.iter().map(|c| c.gold.unwrap()).collect();
    let mut report = evaluate_predictions(&gold, &predicted)?;
    report.classifier = classifier.name();
    report.agreement_filter = filter;
    report.excluded_not_story = excluded;
    Ok(report)
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}  n={}  agreement {}  micro-F1 {:.2}%  macro-F1 {:.2}%",
            self.classifier,
            self.n_examples,
            self.agreement_filter,
            100.0 * self.micro_f1,
            100.0 * self.macro_f1
        )?;
        writeln!(f, "{:<12} {:>9} {:>9} {:>9} {:>8}", "label", "precision", "recall", "f1", "support")?;
        for c in &self.per_class {
            writeln!(
                f,
                "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                c.label.as_str(),
                c.precision,
                c.recall,
                c.f1,
                c.support
            )?;
        }
        write!(f, "confusion (rows gold, cols predicted):")?;
        for (i, row) in self.confusion.iter().enumerate() {
            write!(f, "\n{:<12}", LABEL_ORDER[i].as_str())?;
            for v in row {
                write!(f, " {v:>7}")?;
            }
        }
        Ok(())
    }
}
