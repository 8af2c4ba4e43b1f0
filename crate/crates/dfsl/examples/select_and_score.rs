//! Answer selection over multi-query candidates (largest set vs first
//! set) and the F1 protocol, including the case where an over-general
//! late beam misleads LS but not FS.
//!
//! ```text
//! cargo run -p dfsl --example select_and_score
//! ```

use dfsl::endpoint::ExecutionFailure;
use dfsl::eval::{aggregate, f1, select_fs, select_ls, CandidateAnswer, EvalFlags, EvalRecord};
use dfsl::kg::Term;
use dfsl::sparql::{AnswerSet, Row};

fn bindings(values: &[&str]) -> AnswerSet {
    AnswerSet::from_rows(
        values
            .iter()
            .map(|v| Row::single("x", Term::iri(*v)))
            .collect::<Vec<_>>(),
    )
}

fn main() {
    // beam 1 is correct (one row), beam 2 empty, beam 3 over-general
    let answers = [
        bindings(&["correct"]),
        AnswerSet::empty(),
        bindings(&["noise1", "noise2", "noise3"]),
    ];
    let candidates: Vec<CandidateAnswer> = answers
        .iter()
        .enumerate()
        .map(|(i, a)| CandidateAnswer {
            query: format!("q{}", i + 1),
            beam_rank: i + 1,
            answer: Ok(a.clone()),
        })
        .collect();

    let ls = select_ls(&candidates).unwrap();
    println!("LS picks beam {} with {} rows (misled by the over-general query)", ls.rank, ls.answer.cardinality());

    let queries: Vec<String> = (1..=3).map(|i| format!("q{i}")).collect();
    let mut executed = Vec::new();
    let fs = select_fs(&queries, |q| {
        executed.push(q.to_string());
        let idx: usize = q[1..].parse::<usize>().unwrap() - 1;
        Ok::<_, ExecutionFailure>(answers[idx].clone())
    })
    .unwrap();
    println!("FS picks beam {} after executing only {:?}", fs.rank, executed);

    let gold = bindings(&["correct"]);
    println!("\nper-question F1 against gold = {{correct}}:");
    println!("  LS answer: {:.2}", f1(&ls.answer, &gold));
    println!("  FS answer: {:.2}", f1(&fs.answer, &gold));
    println!("  both empty: {:.2}", f1(&AnswerSet::empty(), &AnswerSet::empty()));
    println!(
        "  {{a,b}} vs {{b,c}}: {:.2}",
        f1(&bindings(&["a", "b"]), &bindings(&["b", "c"]))
    );

    let records: Vec<EvalRecord> = [1.0, 0.5, 0.0, 1.0]
        .iter()
        .enumerate()
        .map(|(i, score)| EvalRecord {
            question_id: format!("q{i}"),
            f1: *score,
            selected_query: None,
            selected_rank: Some(1),
            flags: EvalFlags::default(),
        })
        .collect();
    let report = aggregate(&records);
    println!(
        "\nmacro-average over {:?}: {:.2}",
        [1.0, 0.5, 0.0, 1.0],
        report.mean_f1_x100.unwrap()
    );
}
