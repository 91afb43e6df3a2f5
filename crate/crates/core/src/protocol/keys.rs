//! Key names to keycodes, as a browser client maps them.
//!
//! Letters and digits use the uppercase code point; everything else comes from [`NAMED_KEYS`].

/// Non-character keys, in the order the shared table lists them.
pub const NAMED_KEYS: [(&str, u16); 35] = [
    ("Backspace", 8),
    ("Tab", 9),
    ("Enter", 13),
    ("Shift", 16),
    ("Control", 17),
    ("Alt", 18),
    ("Pause", 19),
    ("CapsLock", 20),
    ("Escape", 27),
    (" ", 32),
    ("PageUp", 33),
    ("PageDown", 34),
    ("End", 35),
    ("Home", 36),
    ("ArrowLeft", 37),
    ("ArrowUp", 38),
    ("ArrowRight", 39),
    ("ArrowDown", 40),
    ("Insert", 45),
    ("Delete", 46),
    ("Meta", 91),
    ("ContextMenu", 93),
    ("F1", 112),
    ("F2", 113),
    ("F3", 114),
    ("F4", 115),
    ("F5", 116),
    ("F6", 117),
    ("F7", 118),
    ("F8", 119),
    ("F9", 120),
    ("F10", 121),
    ("F11", 122),
    ("F12", 123),
    ("NumLock", 144),
];

/// Keycode for a key name, or `None` for keys the protocol does not carry.
pub fn keycode_for(key: &str) -> Option<u16> {
    let mut chars = key.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_ascii_alphanumeric() {
            return Some(c.to_ascii_uppercase() as u16);
        }
    }
    NAMED_KEYS
        .iter()
        .find(|(name, _)| *name == key)
        .map(|&(_, code)| code)
}

/// The full table as `name<TAB>code` lines: letters, digits, then named keys.
pub fn keycode_table() -> String {
    let mut out = String::new();
    for c in ('A'..='Z').chain('0'..='9') {
        out.push_str(&format!("{c}\t{}\n", c as u16));
    }
    for (name, code) in NAMED_KEYS {
        let name = if name == " " { "Space" } else { name };
        out.push_str(&format!("{name}\t{code}\n"));
    }
    out
}
