//! Line-oriented replay scripts: one event per line, e.g. `KEYDOWN 65` or `MOUSEMOVE 100 200`.

use crate::protocol::{Action, InputEvent};

use super::RenderError;

fn num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T, String> {
    let tok = tok.ok_or_else(|| format!("missing {what}"))?;
    tok.parse().map_err(|_| format!("bad {what} {tok:?}"))
}

/// Parses the action part of a replay line (everything but the seq, which the reader assigns).
pub fn parse_action(line: &str) -> Result<Action, String> {
    let mut toks = line.split_whitespace();
    let verb = toks.next().ok_or("empty event")?;
    let action = match verb.to_ascii_uppercase().as_str() {
        "KEYDOWN" => Action::KeyDown {
            keycode: num(toks.next(), "keycode")?,
        },
        "KEYUP" => Action::KeyUp {
            keycode: num(toks.next(), "keycode")?,
        },
        "MOUSEMOVE" => Action::MouseMove {
            x: num(toks.next(), "x")?,
            y: num(toks.next(), "y")?,
        },
        v @ ("MOUSEDOWN" | "MOUSEUP") => {
            let x = num(toks.next(), "x")?;
            let y = num(toks.next(), "y")?;
            let button = match toks.next() {
                Some(b) => num(Some(b), "button")?,
                None => 0,
            };
            if v == "MOUSEDOWN" {
                Action::MouseDown { x, y, button }
            } else {
                Action::MouseUp { x, y, button }
            }
        }
        other => return Err(format!("unknown event {other:?}")),
    };
    if let Some(extra) = toks.next() {
        return Err(format!("unexpected token {extra:?}"));
    }
    Ok(action)
}

pub fn format_action(action: &Action) -> String {
    match *action {
        Action::KeyDown { keycode } => format!("KEYDOWN {keycode}"),
        Action::KeyUp { keycode } => format!("KEYUP {keycode}"),
        Action::MouseMove { x, y } => format!("MOUSEMOVE {x} {y}"),
        Action::MouseDown { x, y, button } => format!("MOUSEDOWN {x} {y} {button}"),
        Action::MouseUp { x, y, button } => format!("MOUSEUP {x} {y} {button}"),
    }
}

/// Reads a replay script. Blank lines and `#` comments are skipped; seqs count up from 1.
pub fn parse_replay(text: &str) -> Result<Vec<InputEvent>, RenderError> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let action = parse_action(line).map_err(|message| RenderError::Script {
            line: idx + 1,
            message,
        })?;
        events.push(InputEvent::new(events.len() as u64 + 1, action));
    }
    Ok(events)
}
