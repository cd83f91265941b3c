//! Line-oriented unified diffs.
//!
//! Diffs are computed over LF-normalized text. Each diff line keeps its
//! terminator, so a final line without a trailing newline is a different
//! line from the same content followed by `\n`, and applying a diff is
//! byte-exact.

use std::fmt;

use serde::{Deserialize, Serialize};
use similar::{capture_diff_slices, group_diff_ops, Algorithm, DiffOp};
use thiserror::Error;

/// Number of unchanged lines kept around each change.
pub const CONTEXT_WIDTH: usize = 3;

const NO_NEWLINE_MARKER: &str = "\\ No newline at end of file";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineTag {
    Context,
    Removed,
    Added,
}

impl LineTag {
    fn prefix(self) -> char {
        match self {
            LineTag::Context => ' ',
            LineTag::Removed => '-',
            LineTag::Added => '+',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffLine {
    pub tag: LineTag,
    /// Line content including its `\n` terminator when it has one.
    pub text: String,
}

impl DiffLine {
    /// Content without the line terminator.
    pub fn content(&self) -> &str {
        self.text.strip_suffix('\n').unwrap_or(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    /// 1-based first old line; for an empty old range, the line after
    /// which the hunk applies (0 = start of file).
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub lines: Vec<DiffLine>,
}

impl Hunk {
    /// 0-based index into the old line list where this hunk begins.
    fn old_index(&self) -> usize {
        if self.old_len == 0 {
            self.old_start
        } else {
            self.old_start - 1
        }
    }

    fn header(&self) -> String {
        fn range(start: usize, len: usize) -> String {
            if len == 1 {
                start.to_string()
            } else {
                format!("{start},{len}")
            }
        }
        format!(
            "@@ -{} +{} @@",
            range(self.old_start, self.old_len),
            range(self.new_start, self.new_len)
        )
    }

    /// Whether the per-hunk line counts agree with the header ranges.
    pub fn is_consistent(&self) -> bool {
        let count = |tag| self.lines.iter().filter(|l| l.tag == tag).count();
        let context = count(LineTag::Context);
        context + count(LineTag::Removed) == self.old_len
            && context + count(LineTag::Added) == self.new_len
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedDiff {
    pub hunks: Vec<Hunk>,
    pub context_width: usize,
}

impl Default for UnifiedDiff {
    fn default() -> Self {
        Self {
            hunks: Vec::new(),
            context_width: CONTEXT_WIDTH,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("hunk {hunk} does not match the original text at line {line}")]
    HunkMismatch { hunk: usize, line: usize },
    #[error("hunk {hunk} lies outside the original text ({old_lines} lines)")]
    HunkOutOfRange { hunk: usize, old_lines: usize },
    #[error("malformed diff at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Replaces CRLF and lone CR line endings with LF.
pub fn normalize_line_endings(text: &str) -> String {
    if !text.contains('\r') {
        return text.to_owned();
    }
    text.replace("\r\n", "\n").replace('\r', "\n")
}

fn split_lines(text: &str) -> Vec<&str> {
    text.split_inclusive('\n').collect()
}

/// Computes a unified diff from `old` to `new` with three lines of context.
pub fn compute_unified_diff(old: &str, new: &str) -> UnifiedDiff {
    let old = normalize_line_endings(old);
    let new = normalize_line_endings(new);
    let old_lines = split_lines(&old);
    let new_lines = split_lines(&new);

    let ops = capture_diff_slices(Algorithm::Myers, &old_lines, &new_lines);
    let mut offset: isize = 0;
    let hunks = group_diff_ops(ops, CONTEXT_WIDTH)
        .into_iter()
        .map(|group| {
            let hunk = hunk_from_ops(&group, &old_lines, &new_lines, offset);
            offset += hunk.new_len as isize - hunk.old_len as isize;
            hunk
        })
        .collect();

    UnifiedDiff {
        hunks,
        context_width: CONTEXT_WIDTH,
    }
}

/// `offset` is the net line count added by earlier hunks. The new-side
/// indices reported on delete ops are not reliable, so new positions are
/// derived from the old side.
fn hunk_from_ops(ops: &[DiffOp], old_lines: &[&str], new_lines: &[&str], offset: isize) -> Hunk {
    let first = ops.first().expect("grouped ops are never empty");

    let mut lines = Vec::new();
    for op in ops {
        let (tag, old, new) = op.as_tag_tuple();
        match tag {
            similar::DiffTag::Equal => lines.extend(old.map(|i| DiffLine {
                tag: LineTag::Context,
                text: old_lines[i].to_owned(),
            })),
            similar::DiffTag::Delete => lines.extend(old.map(|i| DiffLine {
                tag: LineTag::Removed,
                text: old_lines[i].to_owned(),
            })),
            similar::DiffTag::Insert => lines.extend(new.map(|i| DiffLine {
                tag: LineTag::Added,
                text: new_lines[i].to_owned(),
            })),
            similar::DiffTag::Replace => {
                lines.extend(old.map(|i| DiffLine {
                    tag: LineTag::Removed,
                    text: old_lines[i].to_owned(),
                }));
                lines.extend(new.map(|i| DiffLine {
                    tag: LineTag::Added,
                    text: new_lines[i].to_owned(),
                }));
            }
        }
    }

    let count = |tag| lines.iter().filter(|l| l.tag == tag).count();
    let context = count(LineTag::Context);
    let old_len = context + count(LineTag::Removed);
    let new_len = context + count(LineTag::Added);
    let old_index = first.old_range().start;
    let new_index = old_index.checked_add_signed(offset).expect("offset stays within the new text");
    let start = |index: usize, len: usize| if len == 0 { index } else { index + 1 };
    Hunk {
        old_start: start(old_index, old_len),
        old_len,
        new_start: start(new_index, new_len),
        new_len,
        lines,
    }
}

/// Applies `diff` to `old`, returning the new text.
pub fn apply_diff(diff: &UnifiedDiff, old: &str) -> Result<String, DiffError> {
    let old = normalize_line_endings(old);
    let old_lines = split_lines(&old);
    let mut out = String::with_capacity(old.len());
    let mut cursor = 0;

    for (index, hunk) in diff.hunks.iter().enumerate() {
        let start = hunk.old_index();
        if start < cursor || start + hunk.old_len > old_lines.len() {
            return Err(DiffError::HunkOutOfRange {
                hunk: index,
                old_lines: old_lines.len(),
            });
        }
        for line in &old_lines[cursor..start] {
            out.push_str(line);
        }
        cursor = start;
        for line in &hunk.lines {
            match line.tag {
                LineTag::Context | LineTag::Removed => {
                    if old_lines.get(cursor) != Some(&line.text.as_str()) {
                        return Err(DiffError::HunkMismatch {
                            hunk: index,
                            line: cursor + 1,
                        });
                    }
                    if line.tag == LineTag::Context {
                        out.push_str(&line.text);
                    }
                    cursor += 1;
                }
                LineTag::Added => out.push_str(&line.text),
            }
        }
    }
    for line in &old_lines[cursor..] {
        out.push_str(line);
    }
    Ok(out)
}

impl UnifiedDiff {
    pub fn is_empty(&self) -> bool {
        self.hunks.is_empty()
    }

    /// Hunk bodies only, without file headers.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for hunk in &self.hunks {
            out.push_str(&hunk.header());
            out.push('\n');
            for line in &hunk.lines {
                out.push(line.tag.prefix());
                out.push_str(&line.text);
                if !line.text.ends_with('\n') {
                    out.push('\n');
                    out.push_str(NO_NEWLINE_MARKER);
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Full patch text with `---`/`+++` headers.
    pub fn render_patch(&self, old_label: &str, new_label: &str) -> String {
        if self.is_empty() {
            return String::new();
        }
        format!("--- {old_label}\n+++ {new_label}\n{}", self.render())
    }

    /// Parses unified diff text. File headers and anything before the
    /// first hunk are skipped.
    pub fn parse(text: &str) -> Result<Self, DiffError> {
        let mut hunks: Vec<Hunk> = Vec::new();
        let lines: Vec<&str> = text.split_inclusive('\n').collect();
        let mut i = 0;
        while i < lines.len() {
            let line = lines[i];
            if !line.starts_with("@@ ") {
                i += 1;
                continue;
            }
            let (old_start, old_len, new_start, new_len) =
                parse_header(line.trim_end()).ok_or_else(|| DiffError::Malformed {
                    line: i + 1,
                    reason: "bad hunk header".into(),
                })?;
            i += 1;
            let mut body = Vec::new();
            let (mut old_seen, mut new_seen) = (0, 0);
            while (old_seen < old_len || new_seen < new_len) && i < lines.len() {
                let raw = lines[i];
                let (tag, rest) = match raw.chars().next() {
                    Some(' ') => (LineTag::Context, &raw[1..]),
                    Some('-') => (LineTag::Removed, &raw[1..]),
                    Some('+') => (LineTag::Added, &raw[1..]),
                    // Some tools drop the space on empty context lines.
                    Some('\n') => (LineTag::Context, raw),
                    _ => {
                        return Err(DiffError::Malformed {
                            line: i + 1,
                            reason: format!("unexpected line {raw:?}"),
                        })
                    }
                };
                match tag {
                    LineTag::Context => {
                        old_seen += 1;
                        new_seen += 1;
                    }
                    LineTag::Removed => old_seen += 1,
                    LineTag::Added => new_seen += 1,
                }
                let mut text = rest.to_owned();
                if !text.ends_with('\n') {
                    text.push('\n');
                }
                i += 1;
                if lines
                    .get(i)
                    .is_some_and(|next| next.trim_end() == NO_NEWLINE_MARKER)
                {
                    text.pop();
                    i += 1;
                }
                body.push(DiffLine { tag, text });
            }
            // A marker may follow the last line of a hunk.
            if lines
                .get(i)
                .is_some_and(|next| next.trim_end() == NO_NEWLINE_MARKER)
            {
                if let Some(last) = body.last_mut() {
                    if last.text.ends_with('\n') {
                        last.text.pop();
                    }
                }
                i += 1;
            }
            let hunk = Hunk {
                old_start,
                old_len,
                new_start,
                new_len,
                lines: body,
            };
            if !hunk.is_consistent() {
                return Err(DiffError::Malformed {
                    line: i,
                    reason: "hunk line counts disagree with header".into(),
                });
            }
            hunks.push(hunk);
        }
        Ok(UnifiedDiff {
            hunks,
            context_width: CONTEXT_WIDTH,
        })
    }
}

fn parse_header(line: &str) -> Option<(usize, usize, usize, usize)> {
    let inner = line.strip_prefix("@@ -")?;
    let end = inner.find(" @@")?;
    let (old, new) = inner[..end].split_once(" +")?;
    let range = |s: &str| -> Option<(usize, usize)> {
        match s.split_once(',') {
            Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
            None => Some((s.parse().ok()?, 1)),
        }
    };
    let (a, b) = range(old)?;
    let (c, d) = range(new)?;
    Some((a, b, c, d))
}

impl fmt::Display for UnifiedDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
