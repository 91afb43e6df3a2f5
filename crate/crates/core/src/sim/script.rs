//! Workload scripts: `AT <tick> <directive>` lines, ticks non-decreasing.
//!
//! ```text
//! AT 0     PUT media/intro.bin 10485760
//! AT 0     OPEN desk alice 640 480
//! AT 1000  EVENT desk KEYDOWN 65
//! AT 1500  GET media/intro.bin 0 65536
//! AT 2000  KILL s2
//! AT 9000  REVIVE s2
//! AT 30000 CLOSE desk
//! AT 60000 END
//! ```

use crate::protocol::Action;
use crate::render::parse_action;
use crate::Tick;

use super::SimError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Directive {
    /// Open a session known to the script as `label`; geometry defaults to the config's.
    Open {
        label: String,
        user: String,
        geometry: Option<(usize, usize)>,
    },
    Event {
        label: String,
        action: Action,
    },
    Close {
        label: String,
    },
    /// Store `size` bytes of seeded pseudo-random content under `path`.
    Put {
        path: String,
        size: u64,
    },
    /// Read a range, or the whole file.
    Get {
        path: String,
        range: Option<(u64, u64)>,
    },
    Kill(String),
    Revive(String),
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptLine {
    pub line: usize,
    pub tick: Tick,
    pub directive: Directive,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Script {
    pub lines: Vec<ScriptLine>,
}

fn err(line: usize, message: impl Into<String>) -> SimError {
    SimError::Script {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T, SimError> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| err(line, format!("bad {what} {tok:?}")))
}

fn word(line: usize, tok: Option<&str>, what: &str) -> Result<String, SimError> {
    tok.map(str::to_string)
        .ok_or_else(|| err(line, format!("missing {what}")))
}

impl Script {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut lines = Vec::new();
        let mut last_tick = 0;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut toks = body.split_whitespace();
            if !toks.next().is_some_and(|t| t.eq_ignore_ascii_case("AT")) {
                return Err(err(n, "expected AT <tick> <directive>"));
            }
            let tick: Tick = num(n, toks.next(), "tick")?;
            if tick < last_tick {
                return Err(err(n, format!("tick {tick} is earlier than {last_tick}")));
            }
            last_tick = tick;
            let verb = toks.next().ok_or_else(|| err(n, "missing directive"))?;
            let directive = match verb.to_ascii_uppercase().as_str() {
                "OPEN" => {
                    let label = word(n, toks.next(), "session label")?;
                    let user = word(n, toks.next(), "user")?;
                    let geometry = match toks.next() {
                        None => None,
                        w => Some((num(n, w, "width")?, num(n, toks.next(), "height")?)),
                    };
                    Directive::Open {
                        label,
                        user,
                        geometry,
                    }
                }
                "EVENT" => {
                    let label = word(n, toks.next(), "session label")?;
                    let rest: Vec<&str> = toks.by_ref().collect();
                    let action = parse_action(&rest.join(" ")).map_err(|m| err(n, m))?;
                    Directive::Event { label, action }
                }
                "CLOSE" => Directive::Close {
                    label: word(n, toks.next(), "session label")?,
                },
                "PUT" => Directive::Put {
                    path: word(n, toks.next(), "path")?,
                    size: num(n, toks.next(), "size")?,
                },
                "GET" => {
                    let path = word(n, toks.next(), "path")?;
                    let range = match toks.next() {
                        None => None,
                        off => Some((num(n, off, "offset")?, num(n, toks.next(), "length")?)),
                    };
                    Directive::Get { path, range }
                }
                "KILL" => Directive::Kill(word(n, toks.next(), "node")?),
                "REVIVE" => Directive::Revive(word(n, toks.next(), "node")?),
                "END" => Directive::End,
                other => return Err(err(n, format!("unknown directive {other:?}"))),
            };
            if let Some(extra) = toks.next() {
                return Err(err(n, format!("unexpected token {extra:?}")));
            }
            lines.push(ScriptLine {
                line: n,
                tick,
                directive,
            });
        }
        Ok(Self { lines })
    }

    pub fn push(&mut self, tick: Tick, directive: Directive) {
        let line = self.lines.len() + 1;
        self.lines.push(ScriptLine {
            line,
            tick,
            directive,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_directive() {
        let s = Script::parse(
            "# header\nAT 0 OPEN a alice\nAT 0 OPEN b bob 320 240\nAT 5 EVENT a KEYDOWN 65\n\
             AT 6 EVENT a MOUSEDOWN 1 2\nAT 7 PUT x 10\nAT 8 GET x\nAT 8 GET x 2 3\nAT 9 KILL s1\n\
             AT 10 REVIVE s1\nAT 11 CLOSE a\nat 12 end\n",
        )
        .unwrap();
        assert_eq!(s.lines.len(), 11);
        assert_eq!(s.lines[0].line, 2);
        assert_eq!(
            s.lines[1].directive,
            Directive::Open {
                label: "b".into(),
                user: "bob".into(),
                geometry: Some((320, 240))
            }
        );
        assert_eq!(
            s.lines[3].directive,
            Directive::Event {
                label: "a".into(),
                action: Action::MouseDown {
                    x: 1,
                    y: 2,
                    button: 0
                }
            }
        );
        assert_eq!(
            s.lines[6].directive,
            Directive::Get {
                path: "x".into(),
                range: Some((2, 3))
            }
        );
        assert_eq!(s.lines[10].directive, Directive::End);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("AT 5 END\nAT 4 END\n", 2),
            ("\n\nAT x END\n", 3),
            ("AT 1 DANCE\n", 1),
            ("OPEN a b\n", 1),
            ("AT 1 EVENT a KEYDOWN\n", 1),
            ("AT 1 PUT p\n", 1),
            ("AT 1 CLOSE a b\n", 1),
        ];
        for (text, line) in cases {
            match Script::parse(text) {
                Err(SimError::Script { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }
}
