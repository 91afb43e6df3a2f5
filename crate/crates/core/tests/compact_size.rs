//! Packaged forms against their urlencoded equivalents.

use proptest::prelude::*;

use cumulus_core::gateway::{package_form, unpackage_form, CompactMessage};

fn urlencoded_len(fields: &[(String, String)]) -> usize {
    form_urlencoded::Serializer::new(String::new())
        .extend_pairs(fields.iter())
        .finish()
        .len()
}

fn cjk_text() -> impl Strategy<Value = String> {
    (
        "[a-z0-9 ]{0,12}",
        "[\u{4e00}-\u{9fff}\u{3040}-\u{30ff}\u{ac00}-\u{d7af}]{1,8}",
        "[a-z]{0,4}",
    )
        .prop_map(|(a, b, c)| format!("{a}{b}{c}"))
}

proptest! {
    /// Every value carries at least one multi-byte character, so urlencoding pays at least six
    /// extra bytes per field against the packaging's three.
    #[test]
    fn packaged_is_smaller_than_urlencoded(
        fields in prop::collection::vec(("[a-z_]{1,12}", cjk_text()), 1..20)
    ) {
        let packaged = package_form(&fields).unwrap();
        prop_assert!(packaged.len() < urlencoded_len(&fields), "{} vs {}", packaged.len(), urlencoded_len(&fields));
        prop_assert_eq!(unpackage_form(&packaged).unwrap(), fields);
    }

    #[test]
    fn any_text_round_trips(fields in prop::collection::vec(("\\PC{1,20}", "\\PC{0,40}"), 0..10)) {
        let fields: Vec<(String, String)> = fields.into_iter().filter(|(k, _)| k.len() <= 255).collect();
        let packaged = package_form(&fields).unwrap();
        prop_assert_eq!(unpackage_form(&packaged).unwrap(), fields);
    }
}

#[test]
fn sign_up_form() {
    let form = CompactMessage::new()
        .with("user", "李小龙")
        .with("community", "天河区 东圃社区")
        .with("service", "医疗预约")
        .with("note", "周三上午 9:30");
    let packaged = form.package().unwrap();
    let url = urlencoded_len(&form.fields);
    assert_eq!(
        packaged.len(),
        2 + form
            .fields
            .iter()
            .map(|(k, v)| 3 + k.len() + v.len())
            .sum::<usize>()
    );
    assert!(packaged.len() * 2 < url, "{} vs {url}", packaged.len());
}

#[test]
fn ascii_only_forms_can_favour_urlencoding() {
    // One-letter ASCII fields: `a=b` is 3 bytes, the packaging 2 + 5. The size claim is about
    // forms with multi-byte text.
    let fields = [("a", "b")];
    assert!(package_form(&fields).unwrap().len() > urlencoded_len(&[("a".into(), "b".into())]));
}
