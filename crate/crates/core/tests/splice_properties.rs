mod common;

use common::skeleton::{skeleton, skeleton_with_reply};
use common::splice_check::check_splice;
use proptest::prelude::*;
use testmend_core::java::{JavaSource, MemberKind};
use testmend_core::workspace::{
    collect_test_class_fields_in, lsp_position, scan_declaration, SymbolKind, SymbolLocation, TextRange,
    TRUNCATION_MARKER,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn splice_is_local_unique_and_idempotent((s, reply) in skeleton_with_reply()) {
        if let Err(e) = check_splice(&s, &reply) {
            prop_assert!(false, "{}\n--- file ---\n{}\n--- reply ---\n{:?}", e, s.text, reply);
        }
    }

    #[test]
    fn class_fields_exclude_method_locals(s in skeleton()) {
        let fields = collect_test_class_fields_in(&s.text).unwrap();
        prop_assert_eq!(&fields.declarations, &s.fields);
        for local in &s.locals {
            prop_assert!(!fields.declarations.iter().any(|d| d.contains(local.as_str())));
        }
    }

    #[test]
    fn scanned_declarations_are_file_substrings(s in skeleton(), cap in 20usize..400) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("GenTest.java"), &s.text).unwrap();
        let src = JavaSource::parse(&s.text);
        let declared = src
            .all_members()
            .into_iter()
            .filter(|m| matches!(m.kind, MemberKind::Type | MemberKind::Method | MemberKind::Field));
        for member in declared {
            let start = lsp_position(&s.text, member.name_offset);
            let location = SymbolLocation {
                file: "GenTest.java".into(),
                range: TextRange { start, end: start },
                kind: SymbolKind::Method,
            };
            let decl = scan_declaration(dir.path(), &member.name, &location, cap).unwrap();
            let body = decl.source.strip_suffix(TRUNCATION_MARKER).unwrap_or(&decl.source);
            prop_assert_eq!(decl.truncated, body.len() != decl.source.len());
            prop_assert!(s.text.contains(body), "{:?} not in file", body);
            prop_assert!(body.chars().count() <= cap);
        }
    }
}
