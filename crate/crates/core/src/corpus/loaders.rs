//! Readers for the public SQuAD v1.1 and BioASQ Task B training formats.

use std::fs;
use std::path::Path;

use serde_json::Value;

use super::{Question, QuestionType, Snippet};
use crate::error::{Error, Result};

pub fn load_squad(path: impl AsRef<Path>) -> Result<Vec<Question>> {
    parse_squad(&read_json(path.as_ref())?)
}

pub fn load_bioasq(path: impl AsRef<Path>) -> Result<Vec<Question>> {
    parse_bioasq(&read_json(path.as_ref())?)
}

fn read_json(path: &Path) -> Result<Value> {
    let raw = fs::read_to_string(path)?;
    serde_json::from_str(&raw)
        .map_err(|e| Error::malformed(path.display().to_string(), e.to_string()))
}

fn field<'a>(value: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    value
        .get(key)
        .ok_or_else(|| Error::malformed(path, format!("missing key `{key}`")))
}

fn string<'a>(value: &'a Value, key: &str, path: &str) -> Result<&'a str> {
    field(value, key, path)?
        .as_str()
        .ok_or_else(|| Error::malformed(format!("{path}.{key}"), "expected a string"))
}

fn array<'a>(value: &'a Value, key: &str, path: &str) -> Result<&'a Vec<Value>> {
    field(value, key, path)?
        .as_array()
        .ok_or_else(|| Error::malformed(format!("{path}.{key}"), "expected an array"))
}

/// Every SQuAD question becomes a factoid with its paragraph as the only
/// snippet. Distinct answer texts form the synonym group.
pub fn parse_squad(root: &Value) -> Result<Vec<Question>> {
    let mut questions = Vec::new();
    for (a, article) in array(root, "data", "$")?.iter().enumerate() {
        let apath = format!("data[{a}]");
        for (p, paragraph) in array(article, "paragraphs", &apath)?.iter().enumerate() {
            let ppath = format!("{apath}.paragraphs[{p}]");
            let context = string(paragraph, "context", &ppath)?;
            let snippet = Snippet::new(format!("{a}.{p}"), context);
            for (k, qa) in array(paragraph, "qas", &ppath)?.iter().enumerate() {
                let qpath = format!("{ppath}.qas[{k}]");
                let id = string(qa, "id", &qpath)?;
                let text = string(qa, "question", &qpath)?;
                let mut synonyms: Vec<String> = Vec::new();
                for (n, answer) in array(qa, "answers", &qpath)?.iter().enumerate() {
                    let answer_path = format!("{qpath}.answers[{n}]");
                    let answer_text = string(answer, "text", &answer_path)?.trim();
                    field(answer, "answer_start", &answer_path)?
                        .as_u64()
                        .ok_or_else(|| {
                            Error::malformed(
                                format!("{answer_path}.answer_start"),
                                "expected an integer",
                            )
                        })?;
                    if !answer_text.is_empty() && !synonyms.iter().any(|s| s == answer_text) {
                        synonyms.push(answer_text.to_string());
                    }
                }
                if synonyms.is_empty() {
                    return Err(Error::malformed(
                        format!("{qpath}.answers"),
                        "no answer text",
                    ));
                }
                questions.push(Question::annotated(
                    id,
                    QuestionType::Factoid,
                    text,
                    vec![snippet.clone()],
                    vec![synonyms],
                ));
            }
        }
    }
    Ok(questions)
}

/// Loads factoid and list questions; every other type is skipped.
pub fn parse_bioasq(root: &Value) -> Result<Vec<Question>> {
    let mut questions = Vec::new();
    for (n, entry) in array(root, "questions", "$")?.iter().enumerate() {
        let path = format!("questions[{n}]");
        let qtype = match string(entry, "type", &path)? {
            "factoid" => QuestionType::Factoid,
            "list" => QuestionType::List,
            _ => continue,
        };
        let id = string(entry, "id", &path)?;
        let body = string(entry, "body", &path)?;
        let snippets = array(entry, "snippets", &path)?
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let text = string(s, "text", &format!("{path}.snippets[{k}]"))?;
                Ok(Snippet::new(format!("{id}/{k}"), text))
            })
            .collect::<Result<Vec<_>>>()?;
        let answer = field(entry, "exact_answer", &path)?;
        let groups = answer_groups(answer, qtype, &format!("{path}.exact_answer"))?;
        if groups.is_empty() {
            return Err(Error::malformed(
                format!("{path}.exact_answer"),
                "no answer text",
            ));
        }
        questions.push(Question::annotated(id, qtype, body, snippets, groups));
    }
    Ok(questions)
}

/// A factoid answer is a single synonym group given as a string, a list of
/// strings, or a nested list. A list answer holds one group per element.
fn answer_groups(answer: &Value, qtype: QuestionType, path: &str) -> Result<Vec<Vec<String>>> {
    let groups = match (qtype, answer) {
        (_, Value::String(s)) => vec![vec![s.clone()]],
        (QuestionType::Factoid, Value::Array(items)) => {
            let mut flat = Vec::new();
            collect_strings(answer, path, &mut flat)?;
            if items.is_empty() {
                Vec::new()
            } else {
                vec![flat]
            }
        }
        (QuestionType::List, Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(k, item)| {
                let mut group = Vec::new();
                collect_strings(item, &format!("{path}[{k}]"), &mut group)?;
                Ok(group)
            })
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::malformed(path, "expected a string or an array")),
    };
    Ok(groups
        .into_iter()
        .map(|g| {
            let mut out: Vec<String> = Vec::new();
            for s in g {
                let s = s.trim();
                if !s.is_empty() && !out.iter().any(|o| o == s) {
                    out.push(s.to_string());
                }
            }
            out
        })
        .filter(|g| !g.is_empty())
        .collect())
}

fn collect_strings(value: &Value, path: &str, out: &mut Vec<String>) -> Result<()> {
    match value {
        Value::String(s) => out.push(s.clone()),
        Value::Array(items) => {
            for (k, item) in items.iter().enumerate() {
                collect_strings(item, &format!("{path}[{k}]"), out)?;
            }
        }
        _ => {
            return Err(Error::malformed(
                path,
                "expected a string or an array of strings",
            ))
        }
    }
    Ok(())
}
