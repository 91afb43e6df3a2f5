//! Golden vectors shared with the browser viewer: event wire bytes, update streams with the
//! framebuffer digest after each update, and the keycode table.
//!
//! Regenerate with `CUMULUS_BLESS=1 cargo test -p cumulus-core --test golden`.

use std::path::PathBuf;

use cumulus_core::protocol::{
    apply_update_in_place, decode_update, keycode_table, Action, Framebuffer, InputEvent,
};
use cumulus_core::render::{format_action, parse_action, SessionHandle, SessionId};
use cumulus_core::NodeId;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../golden")
}

fn check(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("CUMULUS_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| {
        panic!(
            "{}: {e}; run with CUMULUS_BLESS=1 to create",
            path.display()
        )
    });
    assert!(
        expected == actual,
        "{} differs from the regenerated vectors",
        path.display()
    );
}

fn event_vectors() -> Vec<InputEvent> {
    vec![
        InputEvent::new(7, Action::KeyDown { keycode: 65 }),
        InputEvent::new(8, Action::KeyUp { keycode: 65 }),
        InputEvent::new(1, Action::MouseMove { x: 0, y: 0 }),
        InputEvent::new(
            2,
            Action::MouseDown {
                x: 300,
                y: 17,
                button: 0,
            },
        ),
        InputEvent::new(
            3,
            Action::MouseUp {
                x: 301,
                y: 18,
                button: 2,
            },
        ),
        InputEvent::new(u64::MAX, Action::KeyDown { keycode: u16::MAX }),
        InputEvent::new(
            1 << 40,
            Action::MouseMove {
                x: u16::MAX,
                y: 256,
            },
        ),
        InputEvent::new(
            255,
            Action::MouseDown {
                x: 1,
                y: 2,
                button: u8::MAX,
            },
        ),
    ]
}

fn events_text() -> String {
    let mut out = String::from("# seq action<TAB>wire bytes (hex)\n");
    for e in event_vectors() {
        out.push_str(&format!(
            "{} {}\t{}\n",
            e.seq,
            format_action(&e.action),
            hex::encode(e.encode())
        ));
    }
    out
}

struct Scenario {
    name: &'static str,
    width: usize,
    height: usize,
    tile: usize,
    actions: Vec<&'static str>,
}

fn scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "typing",
            width: 64,
            height: 32,
            tile: 16,
            actions: vec![
                "KEYDOWN 72",
                "KEYUP 72",
                "KEYDOWN 73",
                "KEYDOWN 32",
                "KEYDOWN 65",
                "KEYDOWN 66",
                "KEYDOWN 67",
                "KEYDOWN 68",
                "KEYDOWN 69",
                "KEYDOWN 70",
                "KEYDOWN 71",
            ],
        },
        Scenario {
            name: "drawing",
            width: 128,
            height: 64,
            tile: 16,
            actions: vec![
                "MOUSEMOVE 5 5",
                "MOUSEDOWN 5 5 0",
                "MOUSEMOVE 60 20",
                "MOUSEMOVE 127 63",
                "MOUSEUP 127 63 0",
                "MOUSEMOVE 0 63",
                "MOUSEDOWN 0 63 0",
                "MOUSEMOVE 100 0",
                "MOUSEUP 100 0 0",
            ],
        },
        Scenario {
            name: "mixed-8px-tiles",
            width: 96,
            height: 48,
            tile: 8,
            actions: vec![
                "KEYDOWN 49",
                "MOUSEDOWN 10 40 0",
                "MOUSEMOVE 90 2",
                "KEYDOWN 50",
                "MOUSEUP 90 2 0",
                "KEYDOWN 13",
                "KEYDOWN 255",
                "KEYDOWN 1000",
            ],
        },
    ]
}

/// `E <event hex>` for each input and `U <update hex> <digest>` for each update the host sends,
/// starting with the full frame a viewer gets on subscribe.
fn stream_text(s: &Scenario) -> String {
    let mut h =
        SessionHandle::open(SessionId(1), "golden", NodeId(2), s.width, s.height, s.tile).unwrap();
    let mut out = format!("# width {} height {} tile {}\n", s.width, s.height, s.tile);
    let full = h.resync();
    out.push_str(&format!(
        "U {} {}\n",
        hex::encode(full.encode().unwrap()),
        h.last_frame.digest()
    ));
    for (i, a) in s.actions.iter().enumerate() {
        let e = InputEvent::new(i as u64 + 1, parse_action(a).unwrap());
        out.push_str(&format!("E {}\n", hex::encode(e.encode())));
        let u = h.step(&[e]).unwrap();
        if !u.is_empty() {
            out.push_str(&format!(
                "U {} {}\n",
                hex::encode(u.encode().unwrap()),
                h.last_frame.digest()
            ));
        }
    }
    out
}

#[test]
fn event_wire_vectors() {
    let text = events_text();
    // The one vector fixed by the layout itself.
    assert!(text.contains("7 KEYDOWN 65\t0100000000000000070041\n"));
    check("events.txt", &text);
}

#[test]
fn keycode_table_vectors() {
    let text = keycode_table();
    assert!(text.starts_with("A\t65\n"));
    check("keycodes.tsv", &text);
}

#[test]
fn update_stream_vectors() {
    for s in scenarios() {
        check(&format!("streams/{}.txt", s.name), &stream_text(&s));
    }
}

/// Replays each stored stream the way a viewer does and checks every stored digest.
#[test]
fn stored_streams_replay_to_stored_digests() {
    for s in scenarios() {
        let path = golden_dir().join(format!("streams/{}.txt", s.name));
        let Ok(text) = std::fs::read_to_string(&path) else {
            continue;
        };
        let mut fb = Framebuffer::new(s.width, s.height);
        let mut next_seq = 0;
        for line in text.lines().filter(|l| l.starts_with("U ")) {
            let mut parts = line[2..].split(' ');
            let bytes = hex::decode(parts.next().unwrap()).unwrap();
            let digest = parts.next().unwrap();
            let u = decode_update(&bytes, s.tile).unwrap();
            assert_eq!(
                u.frame_seq, next_seq,
                "{}: frame numbers are contiguous",
                s.name
            );
            next_seq += 1;
            apply_update_in_place(&mut fb, &u).unwrap();
            assert_eq!(fb.digest().to_hex(), digest, "{}", s.name);
        }
    }
}
