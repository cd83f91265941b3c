use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no JSON value found in model output")]
pub struct NoJsonFound;

/// First JSON object or array embedded in `text`, tolerating prose and
/// code fences around it.
pub fn extract_json_payload(text: &str) -> Result<Value, NoJsonFound> {
    for (i, c) in text.char_indices() {
        if c != '{' && c != '[' {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(value)) = stream.next() {
            return Ok(value);
        }
    }
    Err(NoJsonFound)
}

/// Code inside fenced blocks, concatenated; the whole text when there are none.
pub fn extract_code_payload(text: &str) -> String {
    let mut blocks: Vec<String> = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let fence = line.trim_start().starts_with("```");
        match (&mut current, fence) {
            (None, true) => current = Some(Vec::new()),
            (Some(lines), true) => {
                blocks.push(lines.join("\n"));
                current = None;
            }
            (Some(lines), false) => lines.push(line),
            (None, false) => {}
        }
    }
    // An unterminated fence still counts.
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    if blocks.is_empty() {
        text.trim().to_owned()
    } else {
        blocks.join("\n\n").trim().to_owned()
    }
}
