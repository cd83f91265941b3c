//! Independent checks of a splice result against a generated skeleton.

use std::collections::HashSet;

use testmend_core::generate::{retarget, splice_test_file, GeneratedUpdate, Origin};
use testmend_core::java::JavaSource;
use testmend_core::model::TestTarget;

use super::skeleton::{Reply, Skeleton};

/// Byte range of `name` in the skeleton, from its annotation to its closing brace.
fn method_range(s: &Skeleton, name: &str) -> (usize, usize) {
    let head = format!("@Test{}    public void {name}()", s.eol);
    let start = s.text.find(&head).expect("method present");
    let close = format!("{}    }}", s.eol);
    let end = s.text[start..].find(&close).expect("method closes") + start + close.len();
    (start, end)
}

/// End of the last import line, else of the package line, else 0.
fn insertion_point(text: &str) -> usize {
    let mut offset = 0;
    let mut last_import = None;
    let mut package = None;
    for line in text.split_inclusive('\n') {
        let content = line.trim_end();
        if content.starts_with("import ") {
            last_import = Some(offset + content.len());
        } else if content.starts_with("package ") {
            package = Some(offset + content.len());
        }
        offset += line.len();
    }
    last_import.or(package).unwrap_or(0)
}

fn import_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| l.starts_with("import "))
        .map(str::to_owned)
        .collect()
}

pub fn update_for(reply: &Reply) -> GeneratedUpdate {
    GeneratedUpdate {
        new_imports: reply.imports.clone(),
        updated_method: reply.method.clone(),
        raw_response: String::new(),
        origin: Origin::Initial,
    }
}

/// Locality, import uniqueness, idempotence and method-name uniqueness.
pub fn check_splice(s: &Skeleton, reply: &Reply) -> Result<(), String> {
    let target = TestTarget::locate("GenTest.java", &s.text, &s.target, None).map_err(|e| e.to_string())?;
    let (a, b) = method_range(s, &s.target);
    if target.method_span != (a..b) {
        return Err(format!("located span {:?}, expected {a}..{b}", target.method_span));
    }
    let update = update_for(reply);
    let out = splice_test_file(&s.text, &target, &update).map_err(|e| e.to_string())?;

    let present = import_lines(&s.text);
    let mut expected_new: Vec<String> = Vec::new();
    for i in &reply.imports {
        if !present.contains(i) && !expected_new.contains(i) {
            expected_new.push(i.clone());
        }
    }
    let mut sorted = expected_new.clone();
    sorted.sort_by_key(|i| i.starts_with("import static "));
    if out.inserted_imports != sorted {
        return Err(format!("inserted {:?}, expected {sorted:?}", out.inserted_imports));
    }

    let ms = out.method_span.clone();
    let in_wo = format!("{}{}", &s.text[..a], &s.text[b..]);
    let out_wo = format!("{}{}", &out.text[..ms.start], &out.text[ms.end..]);
    let q = insertion_point(&s.text);
    let q = if q <= a { q } else { q - (b - a) };
    let k = out_wo
        .len()
        .checked_sub(in_wo.len())
        .ok_or("output lost bytes outside the method")?;
    if out_wo.get(..q) != in_wo.get(..q) || out_wo.get(q + k..) != in_wo.get(q..) {
        return Err("bytes changed outside the method span and import insertion point".into());
    }
    let block_imports: Vec<String> = out_wo[q..q + k]
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect();
    if block_imports != out.inserted_imports {
        return Err(format!("insertion block holds {block_imports:?}"));
    }
    if k > 0 && s.eol == "\r\n" && out_wo[q..q + k].replace("\r\n", "").contains('\n') {
        return Err("inserted block mixes line endings".into());
    }

    let method = &out.text[ms.clone()];
    let want: Vec<&str> = reply.method.lines().map(str::trim).collect();
    let got: Vec<&str> = method.lines().map(str::trim).collect();
    if want != got {
        return Err(format!("method text {got:?} differs from reply {want:?}"));
    }

    let imports = import_lines(&out.text);
    let unique: HashSet<&String> = imports.iter().collect();
    if unique.len() != imports.len() {
        return Err(format!("duplicate imports: {imports:?}"));
    }

    let mut names: Vec<String> = JavaSource::parse(&out.text)
        .methods()
        .iter()
        .map(|m| m.name.clone())
        .collect();
    names.sort();
    let mut expected = s.methods.clone();
    expected.sort();
    if names != expected {
        return Err(format!("methods after splice {names:?}, expected {expected:?}"));
    }

    let again = splice_test_file(&out.text, &retarget(&target, &out), &update).map_err(|e| e.to_string())?;
    if again.text != out.text {
        return Err("second splice of the same reply changed the file".into());
    }
    Ok(())
}
