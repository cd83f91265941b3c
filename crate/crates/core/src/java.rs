//! Lightweight structural scanner for Java source.
//!
//! The scanner blanks out comments and literal contents, then walks the
//! remaining text with brace/paren matching to recover package, import,
//! type, method and field declarations with exact byte spans. It is not a
//! parser: it only needs to find declaration boundaries reliably.

use std::ops::Range;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemberKind {
    Package,
    Import,
    Type,
    Method,
    Field,
    Initializer,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub kind: MemberKind,
    pub name: String,
    /// From the first annotation or modifier through the closing `}` or `;`.
    pub span: Range<usize>,
    pub name_offset: usize,
    /// Contents between the braces, for types and methods with a body.
    pub body: Option<Range<usize>>,
    /// Parameter count, for methods.
    pub arity: Option<usize>,
    /// Nested declarations, for types.
    pub children: Vec<Member>,
}

impl Member {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.span.clone()]
    }

    /// Declaration header up to the body or terminator, whitespace collapsed.
    pub fn signature(&self, src: &str) -> String {
        let end = self.body.as_ref().map_or(self.span.end, |b| b.start - 1);
        collapse_whitespace(&src[self.span.start..end])
    }

    fn walk<'a>(&'a self, out: &mut Vec<&'a Member>) {
        out.push(self);
        for child in &self.children {
            child.walk(out);
        }
    }
}

/// A scanned compilation unit or fragment.
#[derive(Debug, Clone)]
pub struct JavaSource {
    text: String,
    masked: Vec<u8>,
    pub members: Vec<Member>,
}

impl JavaSource {
    pub fn parse(text: &str) -> Self {
        let masked = mask(text);
        let members = segment(&masked, 0..masked.len());
        Self {
            text: text.to_owned(),
            masked,
            members,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Source with comments and literal contents replaced by spaces.
    pub fn masked(&self) -> &[u8] {
        &self.masked
    }

    pub fn package(&self) -> Option<&Member> {
        self.members.iter().find(|m| m.kind == MemberKind::Package)
    }

    pub fn imports(&self) -> impl Iterator<Item = &Member> {
        self.members.iter().filter(|m| m.kind == MemberKind::Import)
    }

    /// Normalized import statements in file order.
    pub fn import_statements(&self) -> Vec<String> {
        self.imports().map(|m| collapse_whitespace(m.text(&self.text))).collect()
    }

    pub fn top_level_type(&self) -> Option<&Member> {
        self.members.iter().find(|m| m.kind == MemberKind::Type)
    }

    /// Every declaration, depth first.
    pub fn all_members(&self) -> Vec<&Member> {
        let mut out = Vec::new();
        for m in &self.members {
            m.walk(&mut out);
        }
        out
    }

    /// Methods named `name`, wherever they are declared. Top-level method
    /// fragments (no enclosing class) are included.
    pub fn methods_named(&self, name: &str) -> Vec<&Member> {
        self.all_members()
            .into_iter()
            .filter(|m| m.kind == MemberKind::Method && m.name == name)
            .collect()
    }

    pub fn methods(&self) -> Vec<&Member> {
        self.all_members()
            .into_iter()
            .filter(|m| m.kind == MemberKind::Method)
            .collect()
    }

    /// Smallest type or method declaration whose span contains `offset`.
    pub fn innermost_declaration(&self, offset: usize) -> Option<&Member> {
        self.all_members()
            .into_iter()
            .filter(|m| matches!(m.kind, MemberKind::Type | MemberKind::Method | MemberKind::Field))
            .filter(|m| m.span.contains(&offset))
            .min_by_key(|m| m.span.len())
    }

    /// Member starting exactly at `offset`.
    pub fn member_at(&self, offset: usize) -> Option<&Member> {
        self.all_members().into_iter().find(|m| m.span.start == offset)
    }

    /// Span of the statement containing `offset`, delimited by `;`, `{` or
    /// `}` at the same nesting level. Trailing `;` included.
    pub fn statement_at(&self, offset: usize) -> Option<Range<usize>> {
        let m = &self.masked;
        if offset >= m.len() {
            return None;
        }
        // Walk left to the nearest unbalanced delimiter.
        let mut depth = 0i32;
        let mut start = 0;
        let mut i = offset;
        while i > 0 {
            i -= 1;
            match m[i] {
                b')' | b']' => depth += 1,
                b'(' | b'[' => {
                    if depth == 0 {
                        // Inside an argument list; keep walking outward.
                    } else {
                        depth -= 1;
                    }
                }
                b';' | b'{' | b'}' if depth == 0 => {
                    start = i + 1;
                    break;
                }
                _ => {}
            }
        }
        let mut depth = 0i32;
        let mut end = None;
        for (j, &c) in m.iter().enumerate().skip(start) {
            match c {
                b'(' | b'[' | b'{' => depth += 1,
                b')' | b']' | b'}' => {
                    if depth == 0 {
                        end = Some(j);
                        break;
                    }
                    depth -= 1;
                }
                b';' if depth == 0 => {
                    end = Some(j + 1);
                    break;
                }
                _ => {}
            }
        }
        let end = end?;
        while start < end && m[start].is_ascii_whitespace() {
            start += 1;
        }
        (start < end).then_some(start..end)
    }
}

/// Collapses runs of whitespace into single spaces and trims.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b >= 0x80
}

/// Replaces comments and the contents of string, text-block and char
/// literals with spaces. Newlines are kept so offsets and line numbers
/// are unchanged.
pub fn mask(text: &str) -> Vec<u8> {
    let src = text.as_bytes();
    let mut out = src.to_vec();
    let mut i = 0;
    let blank = |out: &mut Vec<u8>, range: Range<usize>| {
        for b in &mut out[range] {
            if *b != b'\n' && *b != b'\r' {
                *b = b' ';
            }
        }
    };
    while i < src.len() {
        match src[i] {
            b'/' if src.get(i + 1) == Some(&b'/') => {
                let end = src[i..].iter().position(|&b| b == b'\n').map_or(src.len(), |p| i + p);
                blank(&mut out, i..end);
                i = end;
            }
            b'/' if src.get(i + 1) == Some(&b'*') => {
                let end = find(src, i + 2, b"*/").map_or(src.len(), |p| p + 2);
                blank(&mut out, i..end);
                i = end;
            }
            b'"' if src[i..].starts_with(b"\"\"\"") => {
                let mut j = i + 3;
                let mut end = src.len();
                while j < src.len() {
                    if src[j] == b'\\' {
                        j += 2;
                        continue;
                    }
                    if src[j..].starts_with(b"\"\"\"") {
                        end = j;
                        break;
                    }
                    j += 1;
                }
                blank(&mut out, (i + 3)..end);
                i = (end + 3).min(src.len());
            }
            quote @ (b'"' | b'\'') => {
                let mut j = i + 1;
                while j < src.len() && src[j] != quote && src[j] != b'\n' {
                    if src[j] == b'\\' {
                        j += 1;
                    }
                    j += 1;
                }
                let end = j.min(src.len());
                blank(&mut out, (i + 1)..end);
                i = end + 1;
            }
            _ => i += 1,
        }
    }
    out
}

fn find(haystack: &[u8], from: usize, needle: &[u8]) -> Option<usize> {
    haystack
        .get(from..)?
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

/// Index of the brace closing the one at `open`.
pub fn matching_brace(masked: &[u8], open: usize) -> Option<usize> {
    let (opener, closer) = match masked.get(open)? {
        b'{' => (b'{', b'}'),
        b'(' => (b'(', b')'),
        b'[' => (b'[', b']'),
        _ => return None,
    };
    let mut depth = 0usize;
    for (i, &c) in masked.iter().enumerate().skip(open) {
        if c == opener {
            depth += 1;
        } else if c == closer {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn skip_ws(m: &[u8], mut i: usize, end: usize) -> usize {
    while i < end && m[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

/// Splits `range` into member declarations at nesting depth zero.
fn segment(m: &[u8], range: Range<usize>) -> Vec<Member> {
    let mut members = Vec::new();
    let end = range.end;
    let mut i = range.start;
    loop {
        i = skip_ws(m, i, end);
        if i >= end {
            break;
        }
        // Stray separators between members (`;` after a class body, enum commas).
        if matches!(m[i], b';' | b',' | b'}' | b')') {
            i += 1;
            continue;
        }
        let start = i;
        let mut paren = 0usize;
        let mut saw_assign = false;
        let mut seg_end = end;
        let mut block: Option<Range<usize>> = None;
        while i < end {
            match m[i] {
                b'(' => paren += 1,
                b')' => paren = paren.saturating_sub(1),
                b'=' if paren == 0 => saw_assign = true,
                b';' if paren == 0 => {
                    seg_end = i + 1;
                    break;
                }
                b'{' if paren == 0 => {
                    let close = matching_brace(m, i).unwrap_or(end - 1).min(end - 1);
                    if block.is_none() && !saw_assign {
                        block = Some(i..close + 1);
                        seg_end = close + 1;
                        i = close + 1;
                        break;
                    }
                    i = close;
                }
                _ => {}
            }
            i += 1;
        }
        if i >= end && seg_end == end && block.is_none() {
            seg_end = end;
        }
        i = seg_end;
        if let Some(member) = classify(m, start..seg_end, block) {
            members.push(member);
        }
    }
    members
}

/// Word tokens (identifiers/keywords) in `range`, with offsets.
fn words(m: &[u8], range: Range<usize>) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut i = range.start;
    while i < range.end {
        if is_ident_byte(m[i]) {
            let s = i;
            while i < range.end && is_ident_byte(m[i]) {
                i += 1;
            }
            out.push((s, String::from_utf8_lossy(&m[s..i]).into_owned()));
        } else {
            i += 1;
        }
    }
    out
}

/// Skips leading annotations (`@Foo`, `@a.b.Foo(...)`), not `@interface`.
fn skip_annotations(m: &[u8], mut i: usize, end: usize) -> usize {
    loop {
        i = skip_ws(m, i, end);
        if i >= end || m[i] != b'@' || m[i + 1..end].starts_with(b"interface") {
            return i;
        }
        i += 1;
        while i < end && (is_ident_byte(m[i]) || m[i] == b'.' || m[i].is_ascii_whitespace()) {
            // Stop at whitespace that is followed by something other than a dot.
            if m[i].is_ascii_whitespace() {
                let next = skip_ws(m, i, end);
                if next < end && m[next] == b'.' {
                    i = next;
                    continue;
                }
                break;
            }
            i += 1;
        }
        let next = skip_ws(m, i, end);
        if next < end && m[next] == b'(' {
            i = matching_brace(m, next).map_or(end, |c| c + 1);
        }
    }
}

fn classify(m: &[u8], span: Range<usize>, block: Option<Range<usize>>) -> Option<Member> {
    let head_start = skip_annotations(m, span.start, span.end);
    // Header ends at the first top-level `(`, `=`, `;` or `{`.
    let mut delim = None;
    let mut i = head_start;
    while i < span.end {
        if matches!(m[i], b'(' | b'=' | b';' | b'{') {
            delim = Some((i, m[i]));
            break;
        }
        i += 1;
    }
    let head_end = delim.map_or(span.end, |(p, _)| p);
    let head = words(m, head_start..head_end);
    let first = head.first().map(|(_, w)| w.as_str());

    let base = |kind, name: String, name_offset| Member {
        kind,
        name,
        span: span.clone(),
        name_offset,
        body: None,
        arity: None,
        children: Vec::new(),
    };

    if first == Some("package") || first == Some("import") {
        let kind = if first == Some("package") {
            MemberKind::Package
        } else {
            MemberKind::Import
        };
        let name = String::from_utf8_lossy(&m[head_start..span.end])
            .trim_end_matches(';')
            .split_whitespace()
            .last()
            .unwrap_or_default()
            .to_owned();
        return Some(base(kind, name, head_start));
    }

    // Type declarations: keyword followed by a name before the body.
    for pair in head.windows(2) {
        if matches!(pair[0].1.as_str(), "class" | "interface" | "enum" | "record") {
            let (name_offset, name) = pair[1].clone();
            let mut member = base(MemberKind::Type, name, name_offset);
            if let Some(b) = block {
                let inner = b.start + 1..b.end - 1;
                member.children = segment(m, inner.clone());
                member.body = Some(inner);
            }
            return Some(member);
        }
    }

    match delim {
        Some((p, b'(')) => {
            let (name_offset, name) = head.last().cloned()?;
            let close = matching_brace(m, p).unwrap_or(span.end);
            let mut member = base(MemberKind::Method, name, name_offset);
            member.arity = Some(count_params(m, p + 1..close));
            member.body = block.map(|b| b.start + 1..b.end - 1);
            Some(member)
        }
        Some((_, b'=')) | Some((_, b';')) => {
            let (name_offset, name) = head.last().cloned().unwrap_or((head_start, String::new()));
            Some(base(MemberKind::Field, name, name_offset))
        }
        Some((_, b'{')) => Some(base(MemberKind::Initializer, String::new(), head_start)),
        _ => Some(base(MemberKind::Unknown, String::new(), head_start)),
    }
}

fn count_params(m: &[u8], range: Range<usize>) -> usize {
    if m[range.clone()].iter().all(u8::is_ascii_whitespace) {
        return 0;
    }
    let mut commas = 0;
    let mut paren = 0i32;
    let mut angle = 0i32;
    for &c in &m[range] {
        match c {
            b'(' => paren += 1,
            b')' => paren -= 1,
            b'<' => angle += 1,
            b'>' => angle -= 1,
            b',' if paren == 0 && angle == 0 => commas += 1,
            _ => {}
        }
    }
    commas + 1
}

/// Finds the first whole-word occurrence of `word` in masked code.
pub fn find_word(masked: &[u8], word: &str, from: usize) -> Option<usize> {
    let w = word.as_bytes();
    if w.is_empty() {
        return None;
    }
    let mut i = from;
    while let Some(p) = find(masked, i, w) {
        let before_ok = p == 0 || !is_ident_byte(masked[p - 1]);
        let after_ok = masked.get(p + w.len()).is_none_or(|&b| !is_ident_byte(b));
        if before_ok && after_ok {
            return Some(p);
        }
        i = p + 1;
    }
    None
}

/// 0-based (line, byte column) of `offset`.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count();
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1);
    (line, col)
}

/// Byte offset of the start of 0-based `line`.
pub fn line_start(text: &str, line: usize) -> Option<usize> {
    if line == 0 {
        return Some(0);
    }
    text.match_indices('\n').nth(line - 1).map(|(p, _)| p + 1)
}

/// Leading whitespace of the line containing `offset`, up to `offset`.
pub fn indent_at(text: &str, offset: usize) -> &str {
    let start = text[..offset].rfind('\n').map_or(0, |p| p + 1);
    let prefix = &text[start..offset];
    let len = prefix.len() - prefix.trim_start().len();
    &prefix[..len]
}
