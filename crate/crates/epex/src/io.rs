//! JSON-lines corpus files and atomic output writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use epex_core::corpus::AnnotatedSentence;
use serde::Serialize;

use crate::FormatError;

/// A corpus file: sentences plus the non-fatal annotation warnings found
/// while validating them.
#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub sentences: Vec<AnnotatedSentence>,
    /// `(line number, message)`, 1-based.
    pub warnings: Vec<(usize, String)>,
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses and validates one sentence per non-blank line.
pub fn parse_corpus(text: &str, path: &Path) -> Result<LoadedCorpus, FormatError> {
    let mut out = LoadedCorpus::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let at = |message: String| FormatError::Line {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let sentence = parse_sentence(line).map_err(at)?;
        out.warnings
            .extend(sentence.1.into_iter().map(|w| (line_no, w)));
        out.sentences.push(sentence.0);
    }
    Ok(out)
}

/// Parses one canonical sentence object and validates its annotations.
pub fn parse_sentence(line: &str) -> Result<(AnnotatedSentence, Vec<String>), String> {
    let sentence: AnnotatedSentence = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let warnings = sentence.validate().map_err(|e| e.to_string())?;
    Ok((sentence, warnings.iter().map(ToString::to_string).collect()))
}

pub fn load_corpus(path: &Path) -> Result<LoadedCorpus, FormatError> {
    parse_corpus(&read_text(path)?, path)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String, FormatError> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    Ok(text)
}

pub fn save_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), FormatError> {
    write_atomic(path, to_jsonl(items)?.as_bytes())
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes through a temporary sibling and renames it into place, so a
/// failed write never leaves a truncated file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let io = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_line_numbers() {
        let text = "{\"tokens\":[\"a\"]}\n\n{\"tokens\":[\"a\"],\"entities\":[{\"start\":0,\"end\":3,\"type\":\"X\"}]}\n";
        let err = parse_corpus(text, Path::new("c.jsonl")).unwrap_err();
        assert!(err.to_string().contains("c.jsonl:3"), "{err}");
    }

    #[test]
    fn relations_are_optional() {
        let c = parse_corpus("{\"tokens\":[\"a\",\"b\"]}\n", Path::new("x")).unwrap();
        assert_eq!(c.sentences.len(), 1);
        assert!(c.sentences[0].relations.is_empty());
    }
}
