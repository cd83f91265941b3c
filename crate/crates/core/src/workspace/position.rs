use serde::{Deserialize, Serialize};

/// 0-based line and UTF-16 column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineCol {
    pub line: u32,
    pub character: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextRange {
    pub start: LineCol,
    pub end: LineCol,
}

impl From<lsp_types::Position> for LineCol {
    fn from(p: lsp_types::Position) -> Self {
        Self {
            line: p.line,
            character: p.character,
        }
    }
}

impl From<LineCol> for lsp_types::Position {
    fn from(p: LineCol) -> Self {
        Self::new(p.line, p.character)
    }
}

impl From<lsp_types::Range> for TextRange {
    fn from(r: lsp_types::Range) -> Self {
        Self {
            start: r.start.into(),
            end: r.end.into(),
        }
    }
}

impl From<TextRange> for lsp_types::Range {
    fn from(r: TextRange) -> Self {
        Self::new(r.start.into(), r.end.into())
    }
}

/// Byte offset of a line/UTF-16 position, or `None` past the end of text.
pub fn byte_offset(text: &str, pos: LineCol) -> Option<usize> {
    let start = crate::java::line_start(text, pos.line as usize)?;
    let line = &text[start..];
    let line = &line[..line.find('\n').unwrap_or(line.len())];
    let mut units = 0u32;
    for (i, ch) in line.char_indices() {
        if units >= pos.character {
            return Some(start + i);
        }
        units += ch.len_utf16() as u32;
    }
    (units >= pos.character).then_some(start + line.len())
}

/// Line/UTF-16 position of a byte offset.
pub fn lsp_position(text: &str, offset: usize) -> LineCol {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line_start = before.rfind('\n').map_or(0, |p| p + 1);
    LineCol {
        line: before.matches('\n').count() as u32,
        character: before[line_start..].encode_utf16().count() as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utf16_columns_roundtrip() {
        let text = "a\nπ𝄞x\n";
        let x = text.find('x').unwrap();
        let pos = lsp_position(text, x);
        assert_eq!(pos, LineCol { line: 1, character: 3 });
        assert_eq!(byte_offset(text, pos), Some(x));
        assert_eq!(byte_offset(text, LineCol { line: 5, character: 0 }), None);
        assert_eq!(byte_offset(text, LineCol { line: 0, character: 9 }), None);
    }
}
