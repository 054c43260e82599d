use super::{
    is_valid_speaker_code, DependentTier, Header, ParseError, ParticipantInfo, Token,
    TranscriptFile, Utterance, FILLERS,
};
use crate::label::GestureLabel;
use crate::span::TimeSpan;
use std::collections::BTreeMap;

const BULLET: char = '\u{15}';
const TRAILING_PUNCT: &[char] = &['.', ',', '?', '!', ';', ':'];
const ID_FIELDS: [&str; 10] = [
    "language",
    "corpus",
    "code",
    "age",
    "sex",
    "group",
    "ses",
    "role",
    "education",
    "custom",
];

/// Parses raw bytes, rejecting anything that is not UTF-8.
pub fn parse_bytes(path: &str, bytes: &[u8]) -> Result<TranscriptFile, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Encoding {
        valid_up_to: e.valid_up_to(),
    })?;
    parse_named(path, text)
}

pub fn parse_file(source: &str) -> Result<TranscriptFile, ParseError> {
    parse_named("", source)
}

pub fn parse_named(path: &str, source: &str) -> Result<TranscriptFile, ParseError> {
    let source = source.strip_prefix('\u{feff}').unwrap_or(source);
    let mut headers = Vec::new();
    let mut utterances: Vec<Utterance> = Vec::new();
    let mut utterance_lines = Vec::new();
    let mut header_lines = Vec::new();

    for (line_no, line) in logical_lines(source) {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('@') {
            let (key, value) = match rest.split_once(':') {
                Some((k, v)) => (k, Some(v.trim_start_matches([' ', '\t']).to_string())),
                None => (rest.trim_end(), None),
            };
            if key.is_empty() {
                return Err(syntax(line_no, 2, "empty header key"));
            }
            headers.push(Header {
                key: key.to_string(),
                value,
                position: utterances.len(),
            });
            header_lines.push(line_no);
        } else if let Some(rest) = line.strip_prefix('*') {
            let Some((code, body)) = rest.split_once(':') else {
                return Err(syntax(
                    line_no,
                    1,
                    "main tier is missing ':' after the speaker code",
                ));
            };
            if !is_valid_speaker_code(code) {
                return Err(syntax(
                    line_no,
                    2,
                    format!("invalid speaker code {code:?}, expected uppercase ASCII letters"),
                ));
            }
            // '*' + code + ':'
            let offset = code.chars().count() + 2;
            let (tokens, span) = parse_body(body, line_no, offset)?;
            utterances.push(Utterance {
                speaker: code.to_string(),
                tokens,
                span,
                dependent_tiers: Vec::new(),
            });
            utterance_lines.push(line_no);
        } else if let Some(rest) = line.strip_prefix('%') {
            let Some((name, value)) = rest.split_once(':') else {
                return Err(syntax(line_no, 1, "dependent tier is missing ':'"));
            };
            let Some(last) = utterances.last_mut() else {
                return Err(syntax(line_no, 1, "dependent tier before any main tier"));
            };
            last.dependent_tiers.push(DependentTier {
                name: name.to_string(),
                value: value.trim_start_matches([' ', '\t']).to_string(),
            });
        } else {
            return Err(syntax(
                line_no,
                1,
                "line is not a header, main tier or dependent tier",
            ));
        }
    }

    let participants =
        collect_participants(&headers, &header_lines, &utterances, &utterance_lines)?;
    Ok(TranscriptFile {
        path: path.to_string(),
        headers,
        participants,
        utterances,
    })
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Joins tab-led continuation lines onto their parent, keeping the parent's
/// 1-based line number.
fn logical_lines(source: &str) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.starts_with('\t') {
            if let Some((_, prev)) = out.last_mut() {
                prev.push(' ');
                prev.push_str(line.trim_start_matches('\t'));
                continue;
            }
        }
        out.push((idx + 1, line.to_string()));
    }
    out
}

enum Lexeme<'a> {
    Bracket(&'a str),
    Bullet(TimeSpan),
    Bare(&'a str),
}

fn lex(body: &str, line: usize, offset: usize) -> Result<Vec<(usize, Lexeme<'_>)>, ParseError> {
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let col = |i: usize| offset + i + 1;
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (byte, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '[' {
            let close = chars[i + 1..]
                .iter()
                .position(|&(_, c)| c == ']')
                .ok_or_else(|| syntax(line, col(i), "unclosed '['"))?;
            let end = i + 1 + close;
            out.push((col(i), Lexeme::Bracket(&body[byte + 1..chars[end].0])));
            i = end + 1;
        } else if c == BULLET {
            let close = chars[i + 1..]
                .iter()
                .position(|&(_, c)| c == BULLET)
                .ok_or_else(|| syntax(line, col(i), "unterminated time bullet"))?;
            let end = i + 1 + close;
            let inner = &body[byte + c.len_utf8()..chars[end].0];
            let span = parse_bullet(inner)
                .ok_or_else(|| syntax(line, col(i), format!("malformed time bullet {inner:?}")))?;
            out.push((col(i), Lexeme::Bullet(span)));
            i = end + 1;
        } else {
            let start = i;
            while i < chars.len() {
                let c = chars[i].1;
                if c.is_whitespace() || c == '[' || c == BULLET {
                    break;
                }
                i += 1;
            }
            let end_byte = chars.get(i).map_or(body.len(), |&(b, _)| b);
            out.push((col(start), Lexeme::Bare(&body[byte..end_byte])));
        }
    }
    Ok(out)
}

fn parse_bullet(inner: &str) -> Option<TimeSpan> {
    let (a, b) = inner.split_once('_')?;
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit());
    if !digits(a) || !digits(b) {
        return None;
    }
    TimeSpan::new(a.parse().ok()?, b.parse().ok()?).ok()
}

fn parse_body(
    body: &str,
    line: usize,
    offset: usize,
) -> Result<(Vec<Token>, Option<TimeSpan>), ParseError> {
    let mut lexemes = lex(body, line, offset)?;
    let span = match lexemes.last() {
        Some((_, Lexeme::Bullet(span))) => {
            let span = *span;
            lexemes.pop();
            Some(span)
        }
        _ => None,
    };

    let mut tokens = Vec::new();
    for (column, lexeme) in lexemes {
        match lexeme {
            Lexeme::Bracket(inner) => tokens.push(bracket_token(inner, line, column)?),
            Lexeme::Bullet(s) => match tokens.last_mut() {
                Some(Token::Gesture {
                    span: own @ None, ..
                }) => *own = Some(s),
                _ => {
                    return Err(syntax(
                        line,
                        column,
                        "time bullet must follow a gesture group or end the utterance",
                    ))
                }
            },
            Lexeme::Bare(text) => bare_tokens(text, line, column, &mut tokens)?,
        }
    }
    if tokens.is_empty() {
        return Err(syntax(line, offset + 1, "utterance has no tokens"));
    }
    Ok((tokens, span))
}

fn bracket_token(inner: &str, line: usize, column: usize) -> Result<Token, ParseError> {
    let Some(rest) = inner.strip_prefix("gesture:") else {
        return Ok(Token::Code {
            text: format!("[{inner}]"),
        });
    };
    // "gesture::opening" is a typographic variant of the single-colon form.
    let raw = rest.strip_prefix(':').unwrap_or(rest);
    if raw.is_empty() || !raw.bytes().all(|b| b.is_ascii_lowercase()) {
        return Err(syntax(
            line,
            column,
            format!("gesture label {raw:?} must be lowercase letters"),
        ));
    }
    Ok(Token::gesture(GestureLabel::parse(raw)))
}

fn bare_tokens(
    text: &str,
    line: usize,
    column: usize,
    out: &mut Vec<Token>,
) -> Result<(), ParseError> {
    let mut rest = text;
    while let Some(r) = rest.strip_prefix('<') {
        out.push(Token::Code { text: "<".into() });
        rest = r;
    }
    if rest.is_empty() {
        return Ok(());
    }
    if !rest.contains(['<', '>']) && !rest.chars().any(char::is_alphanumeric) {
        out.push(Token::punct(rest));
        return Ok(());
    }

    let core_len = rest
        .trim_end_matches(|c: char| c == '>' || TRAILING_PUNCT.contains(&c))
        .len();
    let (core, suffix) = rest.split_at(core_len);
    if !core.is_empty() {
        if core.contains(['<', '>', ']']) {
            return Err(syntax(
                line,
                column,
                format!("bracket character inside word {core:?}"),
            ));
        }
        out.push(classify_word(core));
    }
    let mut punct = String::new();
    for c in suffix.chars() {
        if c == '>' {
            if !punct.is_empty() {
                out.push(Token::punct(std::mem::take(&mut punct)));
            }
            out.push(Token::Code { text: ">".into() });
        } else {
            punct.push(c);
        }
    }
    if !punct.is_empty() {
        out.push(Token::punct(punct));
    }
    Ok(())
}

fn classify_word(word: &str) -> Token {
    if FILLERS.contains(&word) {
        return Token::filler(word);
    }
    if let Some((stem, marker)) = word.split_once('@') {
        if !stem.is_empty() && !marker.is_empty() {
            return Token::Fragment {
                text: word.to_string(),
                marker: Some(marker.to_string()),
            };
        }
    }
    if is_stranded_letter(word) {
        return Token::Fragment {
            text: word.to_string(),
            marker: None,
        };
    }
    Token::word(word)
}

/// A lone lowercase letter that is not one of the single-letter words.
pub(crate) fn is_stranded_letter(word: &str) -> bool {
    let mut chars = word.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_ascii_lowercase() && c != 'a' && c != 'i')
}

fn collect_participants(
    headers: &[Header],
    header_lines: &[usize],
    utterances: &[Utterance],
    utterance_lines: &[usize],
) -> Result<Vec<ParticipantInfo>, ParseError> {
    let mut participants: Vec<ParticipantInfo> = Vec::new();
    let mut declared = false;
    for (h, &line) in headers.iter().zip(header_lines) {
        if h.key != "Participants" {
            continue;
        }
        declared = true;
        for entry in h.value.as_deref().unwrap_or("").split(',') {
            let parts: Vec<&str> = entry.split_whitespace().collect();
            let Some(code) = parts.first() else { continue };
            if !is_valid_speaker_code(code) {
                return Err(syntax(
                    line,
                    1,
                    format!("invalid participant code {code:?}"),
                ));
            }
            let role = if parts.len() > 1 {
                parts[parts.len() - 1]
            } else {
                ""
            };
            if participants.iter().all(|p| p.code != *code) {
                participants.push(ParticipantInfo {
                    code: code.to_string(),
                    role: role.to_string(),
                    demographics: BTreeMap::new(),
                });
            }
        }
    }

    for h in headers.iter().filter(|h| h.key == "ID") {
        let value = h.value.as_deref().unwrap_or("");
        let fields: Vec<&str> = value.split('|').collect();
        let Some(code) = fields.get(2).map(|c| c.trim()) else {
            continue;
        };
        if !is_valid_speaker_code(code) {
            continue;
        }
        let demographics: BTreeMap<String, String> = ID_FIELDS
            .iter()
            .zip(&fields)
            .filter(|(name, v)| **name != "code" && !v.trim().is_empty())
            .map(|(name, v)| (name.to_string(), v.trim().to_string()))
            .collect();
        match participants.iter_mut().find(|p| p.code == code) {
            Some(p) => p.demographics.extend(demographics),
            None => participants.push(ParticipantInfo {
                code: code.to_string(),
                role: demographics.get("role").cloned().unwrap_or_default(),
                demographics,
            }),
        }
    }

    for (utt, &line) in utterances.iter().zip(utterance_lines) {
        if participants.iter().any(|p| p.code == utt.speaker) {
            continue;
        }
        if declared {
            return Err(syntax(
                line,
                2,
                format!("speaker {} is not declared in @Participants", utt.speaker),
            ));
        }
        participants.push(ParticipantInfo {
            code: utt.speaker.clone(),
            role: String::new(),
            demographics: BTreeMap::new(),
        });
    }
    Ok(participants)
}
