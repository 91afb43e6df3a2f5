use super::ProtocolError;

/// What the user did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    KeyDown { keycode: u16 },
    KeyUp { keycode: u16 },
    MouseMove { x: u16, y: u16 },
    MouseDown { x: u16, y: u16, button: u8 },
    MouseUp { x: u16, y: u16, button: u8 },
}

/// One client input, numbered by a per-session monotone counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InputEvent {
    pub seq: u64,
    pub action: Action,
}

const KIND_KEY_DOWN: u8 = 0x01;
const KIND_KEY_UP: u8 = 0x02;
const KIND_MOUSE_MOVE: u8 = 0x03;
const KIND_MOUSE_DOWN: u8 = 0x04;
const KIND_MOUSE_UP: u8 = 0x05;

impl Action {
    pub fn kind_byte(&self) -> u8 {
        match self {
            Action::KeyDown { .. } => KIND_KEY_DOWN,
            Action::KeyUp { .. } => KIND_KEY_UP,
            Action::MouseMove { .. } => KIND_MOUSE_MOVE,
            Action::MouseDown { .. } => KIND_MOUSE_DOWN,
            Action::MouseUp { .. } => KIND_MOUSE_UP,
        }
    }

    /// Pointer position for mouse actions.
    pub fn position(&self) -> Option<(u16, u16)> {
        match *self {
            Action::MouseMove { x, y }
            | Action::MouseDown { x, y, .. }
            | Action::MouseUp { x, y, .. } => Some((x, y)),
            Action::KeyDown { .. } | Action::KeyUp { .. } => None,
        }
    }
}

impl InputEvent {
    pub fn new(seq: u64, action: Action) -> Self {
        Self { seq, action }
    }

    pub fn encoded_len(&self) -> usize {
        9 + match self.action {
            Action::KeyDown { .. } | Action::KeyUp { .. } => 2,
            Action::MouseMove { .. } => 4,
            Action::MouseDown { .. } | Action::MouseUp { .. } => 5,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(self.action.kind_byte());
        out.extend_from_slice(&self.seq.to_be_bytes());
        match self.action {
            Action::KeyDown { keycode } | Action::KeyUp { keycode } => {
                out.extend_from_slice(&keycode.to_be_bytes());
            }
            Action::MouseMove { x, y } => {
                out.extend_from_slice(&x.to_be_bytes());
                out.extend_from_slice(&y.to_be_bytes());
            }
            Action::MouseDown { x, y, button } | Action::MouseUp { x, y, button } => {
                out.extend_from_slice(&x.to_be_bytes());
                out.extend_from_slice(&y.to_be_bytes());
                out.push(button);
            }
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, ProtocolError> {
        let malformed = |msg: &str| ProtocolError::MalformedEvent(msg.to_string());
        let (&kind, rest) = buf.split_first().ok_or_else(|| malformed("empty buffer"))?;
        let payload_len = match kind {
            KIND_KEY_DOWN | KIND_KEY_UP => 2,
            KIND_MOUSE_MOVE => 4,
            KIND_MOUSE_DOWN | KIND_MOUSE_UP => 5,
            other => {
                return Err(ProtocolError::MalformedEvent(format!(
                    "unknown kind byte 0x{other:02X}"
                )))
            }
        };
        if rest.len() < 8 + payload_len {
            return Err(malformed("truncated"));
        }
        if rest.len() > 8 + payload_len {
            return Err(malformed("trailing bytes"));
        }
        let seq = u64::from_be_bytes(rest[..8].try_into().unwrap());
        let p = &rest[8..];
        let u16_at = |i: usize| u16::from_be_bytes([p[i], p[i + 1]]);
        let action = match kind {
            KIND_KEY_DOWN => Action::KeyDown { keycode: u16_at(0) },
            KIND_KEY_UP => Action::KeyUp { keycode: u16_at(0) },
            KIND_MOUSE_MOVE => Action::MouseMove {
                x: u16_at(0),
                y: u16_at(2),
            },
            KIND_MOUSE_DOWN => Action::MouseDown {
                x: u16_at(0),
                y: u16_at(2),
                button: p[4],
            },
            _ => Action::MouseUp {
                x: u16_at(0),
                y: u16_at(2),
                button: p[4],
            },
        };
        Ok(InputEvent { seq, action })
    }

    /// Whether any pointer coordinate falls inside a `width`×`height` screen.
    pub fn within(&self, width: usize, height: usize) -> bool {
        match self.action.position() {
            Some((x, y)) => (x as usize) < width && (y as usize) < height,
            None => true,
        }
    }
}

pub fn encode_input_event(e: &InputEvent) -> Vec<u8> {
    e.encode()
}

pub fn decode_input_event(buf: &[u8]) -> Result<InputEvent, ProtocolError> {
    InputEvent::decode(buf)
}
