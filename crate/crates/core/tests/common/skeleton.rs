//! Generated Java test-file skeletons and update replies.

use proptest::prelude::*;
use proptest::sample::subsequence;

pub const IMPORT_POOL: [&str; 6] = [
    "import java.util.List;",
    "import java.util.Map;",
    "import org.junit.Test;",
    "import io.x.Helper;",
    "import static org.junit.Assert.assertEquals;",
    "import static org.mockito.Mockito.when;",
];

#[derive(Debug, Clone)]
pub struct Skeleton {
    pub text: String,
    pub target: String,
    pub methods: Vec<String>,
    /// Class-level field declarations in source order.
    pub fields: Vec<String>,
    /// Declarations that live inside method bodies.
    pub locals: Vec<String>,
    pub eol: &'static str,
}

#[derive(Debug, Clone)]
pub struct Reply {
    pub imports: Vec<String>,
    pub method: String,
}

fn field(i: usize, mock: bool) -> String {
    if mock {
        format!("@Mock\n    private Service{i} service{i};")
    } else {
        format!("private int field{i} = {i};")
    }
}

fn body(seed: &[u8], method: usize, locals: &mut Vec<String>) -> Vec<String> {
    let mut lines = Vec::new();
    for (j, b) in seed.iter().enumerate() {
        match b % 3 {
            0 => {
                let decl = format!("int local{method}x{j} = {b};");
                locals.push(decl.clone());
                lines.push(decl);
            }
            1 => lines.push(format!("assertEquals({b}, compute({j}));")),
            _ => lines.push("if (flag) { call(\"}\"); }".to_owned()),
        }
    }
    lines
}

prop_compose! {
    pub fn skeleton()(
        package in any::<bool>(),
        imports in subsequence(IMPORT_POOL.to_vec(), 0..=4),
        fields in proptest::collection::vec(any::<bool>(), 0..4),
        bodies in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..4), 1..5),
        target_seed in any::<usize>(),
        crlf in any::<bool>(),
    ) -> Skeleton {
        let nl = "\n";
        let mut text = String::new();
        if package {
            text.push_str("package io.gen;\n\n");
        }
        for import in &imports {
            text.push_str(import);
            text.push_str(nl);
        }
        if !imports.is_empty() {
            text.push_str(nl);
        }
        text.push_str("public class GenTest {\n");
        let field_decls: Vec<String> = fields.iter().enumerate().map(|(i, m)| field(i, *m)).collect();
        for f in &field_decls {
            text.push_str("    ");
            text.push_str(f);
            text.push_str(nl);
        }
        let mut locals = Vec::new();
        let mut methods = Vec::new();
        for (i, seed) in bodies.iter().enumerate() {
            let name = format!("check{i}");
            text.push_str(nl);
            text.push_str("    @Test\n");
            text.push_str(&format!("    public void {name}() {{\n"));
            for line in body(seed, i, &mut locals) {
                text.push_str("        ");
                text.push_str(&line);
                text.push_str(nl);
            }
            text.push_str("    }\n");
            methods.push(name);
        }
        text.push_str("}\n");
        let eol = if crlf { "\r\n" } else { "\n" };
        if crlf {
            text = text.replace('\n', "\r\n");
        }
        Skeleton {
            target: methods[target_seed % methods.len()].clone(),
            text,
            methods,
            fields: field_decls.iter().map(|f| f.replace('\n', eol)).collect(),
            locals,
            eol,
        }
    }
}

/// A reply for `method`: some imports (possibly already present or
/// repeated) and a new body.
pub fn reply(method: String) -> impl Strategy<Value = Reply> {
    (
        proptest::collection::vec(proptest::sample::select(IMPORT_POOL.to_vec()), 0..5),
        proptest::collection::vec(0u8..40, 1..4),
        "[ ]{0,8}",
    )
        .prop_map(move |(imports, values, indent)| {
            let mut text = format!("{indent}@Test\n{indent}public void {method}() {{\n");
            for v in values {
                text.push_str(&format!("{indent}    assertEquals({v}, compute({v}));\n"));
            }
            text.push_str(&format!("{indent}}}"));
            Reply {
                imports: imports.into_iter().map(str::to_owned).collect(),
                method: text,
            }
        })
}

pub fn skeleton_with_reply() -> impl Strategy<Value = (Skeleton, Reply)> {
    skeleton().prop_flat_map(|s| {
        let target = s.target.clone();
        (Just(s), reply(target))
    })
}
