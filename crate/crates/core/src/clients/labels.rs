use super::ClientError;
use crate::label::GestureLabel;

/// What to do with a reply that names no candidate (or several).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnmatchedLabel {
    #[default]
    Error,
    /// Keep the trimmed reply as `GestureLabel::Other`.
    Other,
}

/// Maps a free-text model reply onto one of `candidates`.
///
/// A reply that is exactly a candidate name or its base verb (ignoring case,
/// surrounding punctuation and a `gesture:` prefix) is taken as is. Otherwise
/// the reply is searched for whole-word mentions; exactly one distinct
/// candidate wins. `none` (or `no gesture`) means no gesture and yields
/// `Ok(None)`.
pub fn parse_gesture_reply(
    reply: &str,
    candidates: &[GestureLabel],
    unmatched: UnmatchedLabel,
) -> Result<Option<GestureLabel>, ClientError> {
    let words = words(reply);
    let stripped: Vec<&str> = words
        .iter()
        .map(String::as_str)
        .filter(|w| *w != "gesture")
        .collect();

    if words.is_empty() {
        return Err(ClientError::EmptyResponse);
    }
    if stripped == ["none"] || stripped == ["no"] {
        return Ok(None);
    }
    if stripped.len() == 1 {
        if let Some(label) = candidates
            .iter()
            .find(|c| names(c).contains(&stripped[0].to_string()))
        {
            return Ok(Some(label.clone()));
        }
    }

    let mut found: Vec<&GestureLabel> = Vec::new();
    for c in candidates {
        let forms = names(c);
        if words.iter().any(|w| forms.contains(w)) && !found.contains(&c) {
            found.push(c);
        }
    }
    match found.as_slice() {
        [one] => Ok(Some((*one).clone())),
        [] if mentions_none(&words) => Ok(None),
        _ => match unmatched {
            UnmatchedLabel::Error => Err(ClientError::UnparseableLabel(reply.to_string())),
            UnmatchedLabel::Other => {
                let raw = reply
                    .trim()
                    .trim_matches(|c: char| c.is_ascii_punctuation())
                    .trim();
                if raw.is_empty() {
                    Err(ClientError::UnparseableLabel(reply.to_string()))
                } else {
                    Ok(Some(GestureLabel::Other(raw.to_lowercase())))
                }
            }
        },
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn names(label: &GestureLabel) -> Vec<String> {
    let name = label.as_str().to_lowercase();
    let verb = label.verb().to_lowercase();
    if name == verb {
        vec![name]
    } else {
        vec![name, verb]
    }
}

fn mentions_none(words: &[String]) -> bool {
    words.iter().any(|w| w == "none")
        || words
            .windows(2)
            .any(|w| w[0] == "no" && w[1].starts_with("gesture"))
}
