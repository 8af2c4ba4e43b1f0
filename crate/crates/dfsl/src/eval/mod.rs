//! Answer selection over multi-query candidates (largest set and first
//! set), the F1 evaluation protocol, report aggregation, and triple-flip
//! diagnostics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endpoint::ExecutionFailure;
use crate::kg::Term;
use crate::sparql::{flip_triples, normalize, parse_with_prefixes, AnswerSet, PrefixMap};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("selection requires at least one candidate")]
    EmptyCandidates,
}

/// One executed beam hypothesis.
#[derive(Debug, Clone)]
pub struct CandidateAnswer {
    pub query: String,
    /// 1 is the best beam.
    pub beam_rank: usize,
    pub answer: Result<AnswerSet, ExecutionFailure>,
}

impl CandidateAnswer {
    /// Execution failures count as empty; booleans count as one element.
    pub fn cardinality(&self) -> usize {
        match &self.answer {
            Ok(answer) => answer.cardinality(),
            Err(_) => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub answer: AnswerSet,
    pub rank: usize,
}

/// Largest Set: the candidate with the maximum answer cardinality, the
/// first one on ties. When every candidate is empty, the rank-1
/// candidate's empty set is returned.
pub fn select_ls(candidates: &[CandidateAnswer]) -> Result<Selection, EvalError> {
    if candidates.is_empty() {
        return Err(EvalError::EmptyCandidates);
    }
    let mut ordered: Vec<&CandidateAnswer> = candidates.iter().collect();
    ordered.sort_by_key(|c| c.beam_rank);
    let best = ordered
        .iter()
        .max_by(|a, b| {
            a.cardinality()
                .cmp(&b.cardinality())
                .then(b.beam_rank.cmp(&a.beam_rank))
        })
        .expect("non-empty");
    if best.cardinality() == 0 {
        let first = ordered[0];
        let answer = match &first.answer {
            Ok(a) => a.clone(),
            Err(_) => AnswerSet::empty(),
        };
        return Ok(Selection {
            answer,
            rank: first.beam_rank,
        });
    }
    Ok(Selection {
        answer: best.answer.clone().expect("non-zero cardinality"),
        rank: best.beam_rank,
    })
}

/// First Set: executes queries lazily in beam order and selects the
/// first non-empty answer (booleans count as non-empty). Executor
/// failures are treated as empty and skipped. Queries after the
/// selected one are never executed.
pub fn select_fs(
    ranked_queries: &[String],
    mut executor: impl FnMut(&str) -> Result<AnswerSet, ExecutionFailure>,
) -> Result<Selection, EvalError> {
    if ranked_queries.is_empty() {
        return Err(EvalError::EmptyCandidates);
    }
    for (i, query) in ranked_queries.iter().enumerate() {
        if let Ok(answer) = executor(query) {
            if !answer.is_empty() {
                return Ok(Selection {
                    answer,
                    rank: i + 1,
                });
            }
        }
    }
    Ok(Selection {
        answer: AnswerSet::empty(),
        rank: 1,
    })
}

/// Canonical comparison key for one term: numeric literals compare by
/// value, other literals by lexical form, IRIs exactly.
fn term_key(term: &Term) -> String {
    if let Some(number) = term.numeric_value() {
        let number = if number == 0.0 { 0.0 } else { number };
        return format!("num:{}", number.to_bits());
    }
    match term {
        Term::Iri(v) => format!("iri:{v}"),
        Term::Literal { value, .. } => format!("lit:{value}"),
        Term::Variable(v) => format!("var:{v}"),
    }
}

/// Rows compare by the multiset of their term values; the variable names
/// a query happens to project do not matter.
fn row_keys(answer: &AnswerSet) -> BTreeSet<String> {
    match answer {
        AnswerSet::Boolean(_) => BTreeSet::new(),
        AnswerSet::Bindings(rows) => rows
            .iter()
            .map(|row| {
                let mut keys: Vec<String> = row.0.values().map(term_key).collect();
                keys.sort();
                keys.join("\u{1f}")
            })
            .collect(),
    }
}

/// Per-question F1 between the predicted and gold answer sets. Both
/// empty scores 1.0; exactly one empty scores 0.0; booleans compare as
/// singletons.
pub fn f1(predicted: &AnswerSet, gold: &AnswerSet) -> f64 {
    match (predicted, gold) {
        (AnswerSet::Boolean(a), AnswerSet::Boolean(b)) => {
            if a == b {
                1.0
            } else {
                0.0
            }
        }
        (AnswerSet::Boolean(_), AnswerSet::Bindings(_))
        | (AnswerSet::Bindings(_), AnswerSet::Boolean(_)) => {
            // a boolean is never empty, so this is either one-empty or
            // a kind mismatch; both score 0 unless the bindings side is
            // compared against nothing at all
            if predicted.is_empty() && gold.is_empty() {
                1.0
            } else {
                0.0
            }
        }
        (AnswerSet::Bindings(_), AnswerSet::Bindings(_)) => {
            match (predicted.is_empty(), gold.is_empty()) {
                (true, true) => return 1.0,
                (true, false) | (false, true) => return 0.0,
                (false, false) => {}
            }
            let p = row_keys(predicted);
            let g = row_keys(gold);
            let overlap = p.intersection(&g).count() as f64;
            if overlap == 0.0 {
                return 0.0;
            }
            let precision = overlap / p.len() as f64;
            let recall = overlap / g.len() as f64;
            2.0 * precision * recall / (precision + recall)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalFlags {
    pub extraction_failure: bool,
    pub execution_failure: bool,
    pub lenient_extraction: bool,
    pub triple_flip_detected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub f1: f64,
    pub selected_query: Option<String>,
    pub selected_rank: Option<usize>,
    pub flags: EvalFlags,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub extraction_failures: usize,
    pub execution_failures: usize,
    pub lenient_extractions: usize,
    pub triple_flips_detected: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub approach: String,
    pub dataset: String,
    pub count: usize,
    /// Macro-averaged F1 times 100; absent when no records were
    /// evaluated.
    pub mean_f1_x100: Option<f64>,
    pub flag_counts: FlagCounts,
    pub rank_histogram: BTreeMap<usize, usize>,
    pub template_version: String,
    #[serde(default)]
    pub degraded_sampling: bool,
    #[serde(default)]
    pub skipped_records: usize,
}

/// Macro-average and per-flag counts; deterministic regardless of the
/// order records arrive in.
pub fn aggregate(records: &[EvalRecord]) -> EvalReport {
    let mut values: Vec<f64> = records.iter().map(|r| r.f1).collect();
    values.sort_by(f64::total_cmp);
    let mean = if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64 * 100.0)
    };
    let mut flag_counts = FlagCounts::default();
    let mut rank_histogram = BTreeMap::new();
    for record in records {
        if record.flags.extraction_failure {
            flag_counts.extraction_failures += 1;
        }
        if record.flags.execution_failure {
            flag_counts.execution_failures += 1;
        }
        if record.flags.lenient_extraction {
            flag_counts.lenient_extractions += 1;
        }
        if record.flags.triple_flip_detected {
            flag_counts.triple_flips_detected += 1;
        }
        if let Some(rank) = record.selected_rank {
            *rank_histogram.entry(rank).or_insert(0) += 1;
        }
    }
    EvalReport {
        approach: String::new(),
        dataset: String::new(),
        count: records.len(),
        mean_f1_x100: mean,
        flag_counts,
        rank_histogram,
        template_version: String::new(),
        degraded_sampling: false,
        skipped_records: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipDetection {
    Flip,
    NoFlip,
    /// One of the queries does not parse under the subset grammar.
    NotComparable,
}

/// True flip: the queries differ, and swapping subject and object in
/// exactly one of the predicted query's patterns reproduces the gold
/// query (up to canonical renaming).
pub fn detect_triple_flip(predicted: &str, gold: &str, prefixes: &PrefixMap) -> FlipDetection {
    let (Ok(predicted), Ok(gold)) = (
        parse_with_prefixes(predicted, prefixes),
        parse_with_prefixes(gold, prefixes),
    ) else {
        return FlipDetection::NotComparable;
    };
    let gold_canonical = normalize(&gold);
    if normalize(&predicted) == gold_canonical {
        return FlipDetection::NoFlip;
    }
    let hit = flip_triples(&predicted)
        .iter()
        .any(|variant| normalize(variant) == gold_canonical);
    if hit {
        FlipDetection::Flip
    } else {
        FlipDetection::NoFlip
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparql::Row;

    fn bindings(values: &[&str]) -> AnswerSet {
        AnswerSet::from_rows(
            values
                .iter()
                .map(|v| Row::single("x", Term::iri(*v)))
                .collect::<Vec<_>>(),
        )
    }

    fn candidate(rank: usize, answer: Result<AnswerSet, ExecutionFailure>) -> CandidateAnswer {
        CandidateAnswer {
            query: format!("q{rank}"),
            beam_rank: rank,
            answer,
        }
    }

    #[test]
    fn ls_picks_maximum_cardinality() {
        let candidates = vec![
            candidate(1, Ok(AnswerSet::empty())),
            candidate(2, Ok(bindings(&["a"]))),
            candidate(3, Ok(bindings(&["a", "b"]))),
        ];
        let selection = select_ls(&candidates).unwrap();
        assert_eq!(selection.rank, 3);
        assert_eq!(selection.answer.cardinality(), 2);
    }

    #[test]
    fn ls_breaks_ties_toward_the_first_beam() {
        let candidates = vec![
            candidate(1, Ok(bindings(&["a", "b"]))),
            candidate(2, Ok(bindings(&["c", "d"]))),
            candidate(3, Ok(bindings(&["e"]))),
        ];
        let selection = select_ls(&candidates).unwrap();
        assert_eq!(selection.rank, 1);
    }

    #[test]
    fn ls_with_all_empty_returns_rank_one_empty() {
        let candidates = vec![
            candidate(1, Err(ExecutionFailure::Timeout)),
            candidate(2, Ok(AnswerSet::empty())),
        ];
        let selection = select_ls(&candidates).unwrap();
        assert_eq!(selection.rank, 1);
        assert!(selection.answer.is_empty());
    }

    #[test]
    fn ls_counts_booleans_as_singletons() {
        let candidates = vec![
            candidate(1, Ok(AnswerSet::empty())),
            candidate(2, Ok(AnswerSet::Boolean(false))),
        ];
        let selection = select_ls(&candidates).unwrap();
        assert_eq!(selection.rank, 2);
        assert_eq!(selection.answer, AnswerSet::Boolean(false));
    }

    #[test]
    fn ls_requires_candidates() {
        assert!(matches!(select_ls(&[]), Err(EvalError::EmptyCandidates)));
    }

    #[test]
    fn fs_selects_first_non_empty() {
        let answers = vec![AnswerSet::empty(), bindings(&["a"]), bindings(&["a", "b"])];
        let queries: Vec<String> = (0..3).map(|i| format!("q{i}")).collect();
        let mut calls = 0;
        let selection = select_fs(&queries, |q| {
            calls += 1;
            let idx: usize = q[1..].parse().unwrap();
            Ok(answers[idx].clone())
        })
        .unwrap();
        assert_eq!(selection.rank, 2);
        assert_eq!(selection.answer, bindings(&["a"]));
        assert_eq!(calls, 2, "the third query is never executed");
    }

    #[test]
    fn fs_stops_after_one_call_when_rank_one_hits() {
        let queries = vec!["q0".to_string(), "q1".to_string()];
        let mut calls = 0;
        let selection = select_fs(&queries, |_| {
            calls += 1;
            Ok(bindings(&["a"]))
        })
        .unwrap();
        assert_eq!(selection.rank, 1);
        assert_eq!(calls, 1);
    }

    #[test]
    fn fs_with_all_empty_or_failing() {
        let queries = vec!["q0".to_string(), "q1".to_string(), "q2".to_string()];
        let selection = select_fs(&queries, |q| {
            if q == "q1" {
                Err(ExecutionFailure::Timeout)
            } else {
                Ok(AnswerSet::empty())
            }
        })
        .unwrap();
        assert_eq!(selection.rank, 1);
        assert!(selection.answer.is_empty());
    }

    #[test]
    fn fs_counts_boolean_false_as_non_empty() {
        let queries = vec!["q0".to_string(), "q1".to_string()];
        let selection = select_fs(&queries, |q| {
            if q == "q0" {
                Ok(AnswerSet::empty())
            } else {
                Ok(AnswerSet::Boolean(false))
            }
        })
        .unwrap();
        assert_eq!(selection.rank, 2);
    }

    #[test]
    fn under_constrained_late_beam_misleads_ls_but_not_fs() {
        // correct singleton at beam 1, an empty beam, then an
        // over-general query returning three instances
        let answers = vec![bindings(&["correct"]), AnswerSet::empty(), bindings(&["i1", "i2", "i3"])];
        let candidates: Vec<CandidateAnswer> = answers
            .iter()
            .enumerate()
            .map(|(i, a)| candidate(i + 1, Ok(a.clone())))
            .collect();
        let ls = select_ls(&candidates).unwrap();
        assert_eq!(ls.rank, 3);
        let queries: Vec<String> = (0..3).map(|i| format!("q{i}")).collect();
        let fs = select_fs(&queries, |q| {
            let idx: usize = q[1..].parse().unwrap();
            Ok(answers[idx].clone())
        })
        .unwrap();
        assert_eq!(fs.rank, 1);
        assert_eq!(fs.answer, bindings(&["correct"]));
    }

    #[test]
    fn f1_tagged_examples() {
        assert_eq!(f1(&AnswerSet::empty(), &AnswerSet::empty()), 1.0);
        assert_eq!(f1(&bindings(&["a", "b"]), &bindings(&["b", "c"])), 0.5);
        assert_eq!(f1(&bindings(&["a"]), &AnswerSet::empty()), 0.0);
        assert_eq!(
            f1(&AnswerSet::Boolean(true), &AnswerSet::Boolean(true)),
            1.0
        );
    }

    #[test]
    fn f1_boolean_conventions() {
        assert_eq!(
            f1(&AnswerSet::Boolean(true), &AnswerSet::Boolean(false)),
            0.0
        );
        assert_eq!(f1(&AnswerSet::Boolean(true), &bindings(&["a"])), 0.0);
        assert_eq!(f1(&AnswerSet::empty(), &AnswerSet::Boolean(false)), 0.0);
    }

    #[test]
    fn f1_ignores_variable_names() {
        let predicted = AnswerSet::from_rows(vec![Row::single("obj", Term::iri("x"))]);
        let gold = AnswerSet::from_rows(vec![Row::single("answer", Term::iri("x"))]);
        assert_eq!(f1(&predicted, &gold), 1.0);
    }

    #[test]
    fn f1_compares_numeric_literals_by_value() {
        let typed = AnswerSet::from_rows(vec![Row::single(
            "x",
            Term::literal_typed("37400", "http://www.w3.org/2001/XMLSchema#integer"),
        )]);
        let plain = AnswerSet::from_rows(vec![Row::single("y", Term::literal("37400"))]);
        assert_eq!(f1(&typed, &plain), 1.0);
        let double = AnswerSet::from_rows(vec![Row::single(
            "x",
            Term::literal_typed("37400.0", "http://www.w3.org/2001/XMLSchema#double"),
        )]);
        assert_eq!(f1(&typed, &double), 1.0);
    }

    #[test]
    fn f1_is_symmetric_and_one_on_self() {
        let a = bindings(&["a", "b", "c"]);
        let b = bindings(&["b", "d"]);
        assert_eq!(f1(&a, &b), f1(&b, &a));
        assert_eq!(f1(&a, &a), 1.0);
        let v = f1(&a, &b);
        assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn aggregate_means_and_order_independence() {
        let record = |id: &str, f1: f64, rank: usize| EvalRecord {
            question_id: id.to_string(),
            f1,
            selected_query: None,
            selected_rank: Some(rank),
            flags: EvalFlags::default(),
        };
        let records = vec![record("a", 1.0, 1), record("b", 0.0, 2)];
        let report = aggregate(&records);
        assert_eq!(report.mean_f1_x100, Some(50.0));
        assert_eq!(report.count, 2);
        assert_eq!(report.rank_histogram[&1], 1);

        let reversed: Vec<EvalRecord> = records.iter().rev().cloned().collect();
        let report2 = aggregate(&reversed);
        assert_eq!(report.mean_f1_x100, report2.mean_f1_x100);
        assert_eq!(report.rank_histogram, report2.rank_histogram);

        let all_ones = vec![record("a", 1.0, 1), record("b", 1.0, 1)];
        assert_eq!(aggregate(&all_ones).mean_f1_x100, Some(100.0));

        let empty = aggregate(&[]);
        assert_eq!(empty.count, 0);
        assert_eq!(empty.mean_f1_x100, None);
    }

    #[test]
    fn aggregate_counts_flags() {
        let mut flags = EvalFlags::default();
        flags.execution_failure = true;
        flags.lenient_extraction = true;
        let records = vec![EvalRecord {
            question_id: "a".into(),
            f1: 0.0,
            selected_query: None,
            selected_rank: None,
            flags,
        }];
        let report = aggregate(&records);
        assert_eq!(report.flag_counts.execution_failures, 1);
        assert_eq!(report.flag_counts.lenient_extractions, 1);
        assert_eq!(report.flag_counts.extraction_failures, 0);
    }

    #[test]
    fn detects_the_flipped_orientation_pair() {
        let prefixes = PrefixMap::default();
        let predicted =
            "select distinct ?obj where { wd:Q340 wdt:P501 ?obj . ?obj wdt:P31 wd:Q171441 }";
        let gold =
            "select distinct ?sbj where { ?sbj wdt:P501 wd:Q340 . ?sbj wdt:P31 wd:Q171441 }";
        assert_eq!(
            detect_triple_flip(predicted, gold, &prefixes),
            FlipDetection::Flip
        );
        assert_eq!(
            detect_triple_flip(gold, gold, &prefixes),
            FlipDetection::NoFlip
        );
        assert_eq!(
            detect_triple_flip("select ?x where { <other> <p> ?x }", gold, &prefixes),
            FlipDetection::NoFlip
        );
        assert_eq!(
            detect_triple_flip("OPTIONAL nonsense", gold, &prefixes),
            FlipDetection::NotComparable
        );
    }
}
