use serde::{Deserialize, Serialize};

use super::{Question, QuestionType};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_questions: usize,
    pub n_factoid: usize,
    pub n_list: usize,
    pub mean_snippets_per_question: f64,
    pub mean_tokens_per_snippet: f64,
    pub extractable_fraction_factoid: f64,
    pub extractable_fraction_list: f64,
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "questions:                 {}", self.n_questions)?;
        writeln!(f, "  factoid:                 {}", self.n_factoid)?;
        writeln!(f, "  list:                    {}", self.n_list)?;
        writeln!(
            f,
            "snippets per question:     {:.2}",
            self.mean_snippets_per_question
        )?;
        writeln!(
            f,
            "tokens per snippet:        {:.2}",
            self.mean_tokens_per_snippet
        )?;
        writeln!(
            f,
            "extractable (factoid):     {:.1}%",
            100.0 * self.extractable_fraction_factoid
        )?;
        write!(
            f,
            "extractable (list):        {:.1}%",
            100.0 * self.extractable_fraction_list
        )
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn dataset_stats(questions: &[Question]) -> Result<DatasetStats> {
    if questions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let count = |t: QuestionType| questions.iter().filter(|q| q.qtype == t).count();
    let extractable = |t: QuestionType| {
        questions
            .iter()
            .filter(|q| q.qtype == t && q.is_extractable())
            .count()
    };
    let n_snippets: usize = questions.iter().map(|q| q.snippets.len()).sum();
    let n_tokens: usize = questions
        .iter()
        .flat_map(|q| &q.snippets)
        .map(|s| s.tokens.len())
        .sum();
    let (n_factoid, n_list) = (count(QuestionType::Factoid), count(QuestionType::List));
    Ok(DatasetStats {
        n_questions: questions.len(),
        n_factoid,
        n_list,
        mean_snippets_per_question: ratio(n_snippets, questions.len()),
        mean_tokens_per_snippet: ratio(n_tokens, n_snippets),
        extractable_fraction_factoid: ratio(extractable(QuestionType::Factoid), n_factoid),
        extractable_fraction_list: ratio(extractable(QuestionType::List), n_list),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Snippet;

    fn q(id: &str, qtype: QuestionType, answers: &[&str]) -> Question {
        Question::annotated(
            id,
            qtype,
            "q?",
            vec![Snippet::new("s", "alpha beta gamma")],
            answers.iter().map(|a| vec![a.to_string()]).collect(),
        )
    }

    #[test]
    fn counts_and_fractions() {
        let qs = vec![
            q("f1", QuestionType::Factoid, &["alpha"]),
            q("f2", QuestionType::Factoid, &["delta"]),
            q("l1", QuestionType::List, &["beta", "delta"]),
            q("l2", QuestionType::List, &["gamma"]),
        ];
        let s = dataset_stats(&qs).unwrap();
        assert_eq!((s.n_questions, s.n_factoid, s.n_list), (4, 2, 2));
        assert_eq!(s.extractable_fraction_factoid, 0.5);
        assert_eq!(s.extractable_fraction_list, 1.0);
    }

    #[test]
    fn means() {
        let question = Question::annotated(
            "q",
            QuestionType::Factoid,
            "q?",
            vec![
                Snippet::new("a", "one two"),
                Snippet::new("b", "one two three four"),
                Snippet::new("c", "a b c d e f"),
            ],
            vec![vec!["one".into()]],
        );
        let s = dataset_stats(&[question]).unwrap();
        assert_eq!(s.mean_snippets_per_question, 3.0);
        assert_eq!(s.mean_tokens_per_snippet, 4.0);
    }

    #[test]
    fn empty_dataset() {
        assert!(matches!(dataset_stats(&[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn disjoint_union_adds_counts() {
        let a = vec![q("f1", QuestionType::Factoid, &["alpha"])];
        let b = vec![
            q("l1", QuestionType::List, &["beta"]),
            q("l2", QuestionType::List, &["x"]),
        ];
        let both: Vec<_> = a.iter().chain(&b).cloned().collect();
        let (sa, sb, sab) = (
            dataset_stats(&a).unwrap(),
            dataset_stats(&b).unwrap(),
            dataset_stats(&both).unwrap(),
        );
        assert_eq!(sab.n_questions, sa.n_questions + sb.n_questions);
        assert_eq!(sab.n_factoid + sab.n_list, sab.n_questions);
    }
}
