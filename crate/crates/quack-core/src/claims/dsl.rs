//! The `@claim{key=value;...}` annotation grammar embedded in utterances.
//!
//! Grammar (EBNF):
//!   annotation := "@claim{" pair (";" pair)* "}"
//!   pair       := key "=" value
//!   key        := [a-z_]+
//!   value      := any characters except ";" and "}"
//!
//! Values cannot contain `;` or `}`; room lists use commas.

use std::collections::BTreeMap;

use thiserror::Error;

pub const MARKER: &str = "@claim{";

#[derive(Debug, Error, PartialEq)]
pub enum DslError {
    #[error("annotation at byte {position}: missing closing `}}`")]
    Unterminated { position: usize },
    #[error("annotation at byte {position}: `{pair}` is not a key=value pair")]
    BadPair { position: usize, pair: String },
    #[error("annotation at byte {position}: duplicate key `{key}`")]
    DuplicateKey { position: usize, key: String },
}

/// One parsed annotation with its byte offset in the utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub position: usize,
    pub fields: BTreeMap<String, String>,
}

/// Strict pass: every annotation must parse.
pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>, DslError> {
    let mut out = Vec::new();
    let mut cursor = 0;
    while let Some(found) = text[cursor..].find(MARKER) {
        let position = cursor + found;
        let body_start = position + MARKER.len();
        let body_end = text[body_start..]
            .find('}')
            .map(|i| body_start + i)
            .ok_or(DslError::Unterminated { position })?;
        let body = &text[body_start..body_end];
        let mut fields = BTreeMap::new();
        for pair in body.split(';').filter(|p| !p.trim().is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| DslError::BadPair { position, pair: pair.trim().to_string() })?;
            let key = key.trim().to_string();
            if fields.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(DslError::DuplicateKey { position, key });
            }
        }
        out.push(Annotation { position, fields });
        cursor = body_end + 1;
    }
    Ok(out)
}

/// Lenient pass used by heuristics: malformed annotations are skipped.
pub fn scan_annotations(text: &str) -> Vec<BTreeMap<String, String>> {
    parse_annotations(text).map(|anns| anns.into_iter().map(|a| a.fields).collect()).unwrap_or_else(
        |_| {
            // Fall back to collecting whatever prefixes parse.
            let mut out = Vec::new();
            let mut cursor = 0;
            while let Some(found) = text[cursor..].find(MARKER) {
                let position = cursor + found;
                let body_start = position + MARKER.len();
                match text[body_start..].find('}') {
                    None => break,
                    Some(i) => {
                        let body = &text[body_start..body_start + i];
                        let mut fields = BTreeMap::new();
                        for pair in body.split(';') {
                            if let Some((k, v)) = pair.split_once('=') {
                                fields.insert(k.trim().to_string(), v.trim().to_string());
                            }
                        }
                        if !fields.is_empty() {
                            out.push(fields);
                        }
                        cursor = body_start + i + 1;
                    }
                }
            }
            out
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_annotation() {
        let anns =
            parse_annotations("hello @claim{type=location;subject=Alice;room=medbay;temporal=this round} bye")
                .unwrap();
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].fields["type"], "location");
        assert_eq!(anns[0].fields["temporal"], "this round");
    }

    #[test]
    fn parses_multiple_and_reports_positions() {
        let text = "@claim{type=location;subject=A;room=x;temporal=now} and @claim{type=accusation;accuser=A;target=B;confidence=weak}";
        let anns = parse_annotations(text).unwrap();
        assert_eq!(anns.len(), 2);
        assert_eq!(anns[0].position, 0);
        assert!(anns[1].position > 0);
    }

    #[test]
    fn reports_malformed_with_position() {
        let err = parse_annotations("xx @claim{type=location").unwrap_err();
        assert_eq!(err, DslError::Unterminated { position: 3 });
        let err = parse_annotations("@claim{nonsense}").unwrap_err();
        assert!(matches!(err, DslError::BadPair { .. }));
    }

    #[test]
    fn lenient_scan_skips_garbage() {
        let found = scan_annotations("@claim{broken @claim{type=location;subject=A;room=x;temporal=t}");
        assert!(found.len() <= 1);
    }
}
