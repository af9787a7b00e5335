//! The dataset text format.
//!
//! A file is a sequence of utterance blocks separated by exactly one blank
//! line (none after the last). Each block is `T` lines of `<token> <slot>`
//! (single ASCII space) followed by one line of intent labels joined by `#`:
//!
//! ```text
//! play O
//! jazz B-music
//! PlayMusic#GetWeather
//! ```

use std::fs;
use std::path::Path;

use super::{CorpusError, Utterance};

/// Parse a dataset file. Errors carry 1-based line numbers.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Vec<Utterance>, CorpusError> {
    parse_dataset_str(&fs::read_to_string(path)?)
}

pub fn parse_dataset_str(text: &str) -> Result<Vec<Utterance>, CorpusError> {
    let mut utterances = Vec::new();
    let mut block: Vec<(usize, &str)> = Vec::new();
    let mut line_no = 0;
    for raw in text.lines() {
        line_no += 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            if block.is_empty() {
                // tolerate extra blank lines between blocks and at EOF
                continue;
            }
            utterances.push(parse_block(&block)?);
            block.clear();
        } else {
            block.push((line_no, line));
        }
    }
    if !block.is_empty() {
        utterances.push(parse_block(&block)?);
    }
    Ok(utterances)
}

fn parse_block(lines: &[(usize, &str)]) -> Result<Utterance, CorpusError> {
    let (intent_line_no, intent_line) = *lines.last().expect("caller guarantees non-empty block");
    if intent_line.contains(' ') {
        return Err(CorpusError::MissingIntentLine {
            line: intent_line_no,
        });
    }
    if lines.len() == 1 {
        return Err(CorpusError::EmptyBlock {
            line: intent_line_no,
        });
    }
    let mut tokens = Vec::with_capacity(lines.len() - 1);
    let mut slots = Vec::with_capacity(lines.len() - 1);
    for &(no, line) in &lines[..lines.len() - 1] {
        let mut fields = line.split(' ');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(tok), Some(slot), None) if !tok.is_empty() && !slot.is_empty() => {
                tokens.push(tok.to_string());
                slots.push(slot.to_string());
            }
            _ => {
                return Err(CorpusError::BadTokenLine {
                    line: no,
                    text: line.to_string(),
                })
            }
        }
    }
    let mut intents = Vec::new();
    for label in intent_line.split('#') {
        if label.is_empty() {
            return Err(CorpusError::BadIntentLine {
                line: intent_line_no,
            });
        }
        if !intents.iter().any(|l| l == label) {
            intents.push(label.to_string());
        }
    }
    Utterance::new(tokens, slots, intents)
}

/// Render utterances in canonical form: every line `\n`-terminated, one
/// blank line between blocks, no trailing blank line.
pub fn format_dataset(utterances: &[Utterance]) -> String {
    let mut out = String::new();
    for (i, u) in utterances.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (tok, slot) in u.tokens.iter().zip(&u.slots) {
            out.push_str(tok);
            out.push(' ');
            out.push_str(slot);
            out.push('\n');
        }
        out.push_str(&u.intents.join("#"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(utterances: &[Utterance], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    for u in utterances {
        u.validate()?;
    }
    fs::write(path, format_dataset(utterances))?;
    Ok(())
}
