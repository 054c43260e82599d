use super::{Token, TranscriptFile, Utterance};
use std::fmt::Write;

/// Writes the canonical form: one space between tokens, a tab after every
/// tier prefix, headers verbatim at their original positions.
///
/// A gesture's own time bullet is written right after its group. When such a
/// gesture is the last token of an utterance without terminator or span, the
/// bullet would read back as the utterance span; the parser never produces
/// that shape.
pub fn serialize(file: &TranscriptFile) -> String {
    let mut out = String::new();
    let mut headers = file.headers.iter().peekable();
    for idx in 0..=file.utterances.len() {
        while let Some(h) = headers.next_if(|h| h.position <= idx) {
            match &h.value {
                Some(v) => writeln!(out, "@{}:\t{}", h.key, v),
                None => writeln!(out, "@{}", h.key),
            }
            .expect("writing to a String cannot fail");
        }
        if let Some(utt) = file.utterances.get(idx) {
            write_utterance(&mut out, utt);
        }
    }
    out
}

fn write_utterance(out: &mut String, utt: &Utterance) {
    out.push('*');
    out.push_str(&utt.speaker);
    out.push_str(":\t");
    let body: Vec<String> = utt.tokens.iter().map(Token::to_string).collect();
    out.push_str(&body.join(" "));
    if let Some(span) = utt.span {
        let _ = write!(out, " \u{15}{span}\u{15}");
    }
    out.push('\n');
    for tier in &utt.dependent_tiers {
        let _ = writeln!(out, "%{}:\t{}", tier.name, tier.value);
    }
}
