//! Random text pairs for diff checks.

use proptest::prelude::*;

const LINES: [&str; 8] = ["a", "b", "c", "{", "}", "", "int x = 1;", "return y;"];

pub fn text() -> impl Strategy<Value = String> {
    (
        proptest::collection::vec(proptest::sample::select(LINES.to_vec()), 0..30),
        any::<bool>(),
    )
        .prop_map(|(lines, trailing)| {
            let mut t = lines.join("\n");
            if trailing && !lines.is_empty() {
                t.push('\n');
            }
            t
        })
}

/// An edited copy of `old`, so pairs share most of their lines.
pub fn edited(old: String) -> impl Strategy<Value = (String, String)> {
    let n = old.lines().count();
    proptest::collection::vec((0..=n, 0u8..3, proptest::sample::select(LINES.to_vec())), 0..6).prop_map(
        move |edits| {
            let mut lines: Vec<String> = old.lines().map(str::to_owned).collect();
            for (at, op, line) in edits {
                let at = at.min(lines.len());
                match op {
                    0 => lines.insert(at, line.to_owned()),
                    1 if at < lines.len() => {
                        lines.remove(at);
                    }
                    _ if at < lines.len() => lines[at] = line.to_owned(),
                    _ => lines.push(line.to_owned()),
                }
            }
            let mut new = lines.join("\n");
            if old.ends_with('\n') && !new.is_empty() {
                new.push('\n');
            }
            (old.clone(), new)
        },
    )
}

pub fn pair() -> impl Strategy<Value = (String, String)> {
    prop_oneof![(text(), text()), text().prop_flat_map(edited)]
}
