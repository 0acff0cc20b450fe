use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Move {
    /// G0 rather than G1.
    pub rapid: bool,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub e: Option<f64>,
    /// mm/min.
    pub f: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisValues {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub e: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CommandKind {
    Move(Move),
    /// M104
    SetTempNoWait {
        s: Option<f64>,
    },
    /// M109
    SetTempWait {
        s: Option<f64>,
    },
    /// G28
    Home,
    /// G90
    AbsoluteMode,
    /// G91
    RelativeMode,
    /// G92
    SetPosition(AxisValues),
    /// M0, M1 or M600: a programmed stop that splits print segments.
    Pause,
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcodeCommand {
    pub kind: CommandKind,
    pub source_line: usize,
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.rapid { "G0" } else { "G1" })?;
        for (letter, v) in [('X', self.x), ('Y', self.y), ('Z', self.z), ('E', self.e), ('F', self.f)] {
            if let Some(v) = v {
                write!(f, " {letter}{v}")?;
            }
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    let line = line.split(';').next().unwrap_or("");
    // RepRap checksum suffix.
    line.split('*').next().unwrap_or("").trim()
}

/// Splits a code line into (letter, numeral text) words. Spaces between
/// words are optional (`G1X10Y5` is accepted).
fn words(line: &str) -> Vec<(char, &str)> {
    let mut out = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i + 1;
        let mut j = start;
        while j < bytes.len() && !(bytes[j] as char).is_ascii_alphabetic() && !(bytes[j] as char).is_ascii_whitespace()
        {
            j += 1;
        }
        out.push((c.to_ascii_uppercase(), &line[start..j]));
        i = j;
    }
    out
}

fn parse_number(text: &str, letter: char, line: usize) -> Result<f64> {
    let ok = !text.is_empty()
        && text.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+'))
        && text.chars().filter(|c| *c == '.').count() <= 1
        && text.chars().skip(1).all(|c| c != '-' && c != '+');
    let value = ok.then(|| text.parse::<f64>().ok()).flatten();
    value.filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
        source_name: "gcode".into(),
        line: Some(line),
        message: format!("malformed parameter {letter}{text}"),
    })
}

fn parse_params(ws: &[(char, &str)], line: usize) -> Result<Vec<(char, f64)>> {
    ws.iter().filter(|(c, _)| *c != 'N').map(|(c, t)| parse_number(t, *c, line).map(|v| (*c, v))).collect()
}

fn get(params: &[(char, f64)], letter: char) -> Option<f64> {
    params.iter().rev().find(|(c, _)| *c == letter).map(|(_, v)| *v)
}

/// Parses G-code text, one command per non-empty, non-comment line.
pub fn parse_gcode(text: &str) -> Result<Vec<GcodeCommand>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let code = strip_comment(raw);
        if code.is_empty() {
            continue;
        }
        let ws = words(code);
        let head = ws.iter().position(|(c, _)| *c == 'G' || *c == 'M');
        let kind = match head {
            None => CommandKind::Other(code.to_string()),
            Some(h) => {
                let (letter, num) = ws[h];
                let rest: Vec<(char, &str)> = ws.iter().enumerate().filter(|(i, _)| *i != h).map(|(_, w)| *w).collect();
                match (letter, num) {
                    ('G', "0" | "00" | "1" | "01") => {
                        let p = parse_params(&rest, line_no)?;
                        CommandKind::Move(Move {
                            rapid: matches!(num, "0" | "00"),
                            x: get(&p, 'X'),
                            y: get(&p, 'Y'),
                            z: get(&p, 'Z'),
                            e: get(&p, 'E'),
                            f: get(&p, 'F'),
                        })
                    }
                    ('G', "2" | "02" | "3" | "03") => {
                        return Err(Error::Parse {
                            source_name: "gcode".into(),
                            line: Some(line_no),
                            message: format!("arc move G{num} is not supported; re-slice without arcs"),
                        })
                    }
                    ('G', "28") => CommandKind::Home,
                    ('G', "90") => CommandKind::AbsoluteMode,
                    ('G', "91") => CommandKind::RelativeMode,
                    ('G', "92") => {
                        let p = parse_params(&rest, line_no)?;
                        CommandKind::SetPosition(AxisValues {
                            x: get(&p, 'X'),
                            y: get(&p, 'Y'),
                            z: get(&p, 'Z'),
                            e: get(&p, 'E'),
                        })
                    }
                    ('M', "104") => CommandKind::SetTempNoWait { s: get(&parse_params(&rest, line_no)?, 'S') },
                    ('M', "109") => CommandKind::SetTempWait { s: get(&parse_params(&rest, line_no)?, 'S') },
                    ('M', "0" | "1" | "600") => CommandKind::Pause,
                    _ => CommandKind::Other(code.to_string()),
                }
            }
        };
        out.push(GcodeCommand { kind, source_line: line_no });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one(text: &str) -> CommandKind {
        let cmds = parse_gcode(text).unwrap();
        assert_eq!(cmds.len(), 1);
        cmds[0].kind.clone()
    }

    #[test]
    fn basic_move() {
        assert_eq!(
            one("G1 X10 Y10 E5 F1200"),
            CommandKind::Move(Move {
                rapid: false,
                x: Some(10.0),
                y: Some(10.0),
                z: None,
                e: Some(5.0),
                f: Some(1200.0),
            })
        );
    }

    #[test]
    fn comment_dropped() {
        assert_eq!(one("G1 X5 ; wall"), CommandKind::Move(Move { x: Some(5.0), ..Move::default() }));
        assert!(parse_gcode("; only a comment\n\n   \n").unwrap().is_empty());
    }

    #[test]
    fn malformed_numeral() {
        let err = parse_gcode("G90\nG1 X1.2.3").unwrap_err();
        assert!(matches!(err, Error::Parse { line: Some(2), .. }), "{err}");
        assert!(parse_gcode("G1 X").is_err());
        assert!(parse_gcode("G1 X1-2").is_err());
    }

    #[test]
    fn case_insensitive_and_packed_words() {
        assert_eq!(one("g1x1.5y-2"), one("G1 X1.5 Y-2"));
        assert_eq!(one("g0 x1"), CommandKind::Move(Move { rapid: true, x: Some(1.0), ..Move::default() }));
    }

    #[test]
    fn recognizes_modes_and_markers() {
        let cmds = parse_gcode("G28\nG90\nG91\nG92 E0\nM104 S200\nM109 S215\nM600\nM82\nT0\nN10 G1 X1*57").unwrap();
        let kinds: Vec<_> = cmds.iter().map(|c| c.kind.clone()).collect();
        assert_eq!(kinds[0], CommandKind::Home);
        assert_eq!(kinds[1], CommandKind::AbsoluteMode);
        assert_eq!(kinds[2], CommandKind::RelativeMode);
        assert_eq!(kinds[3], CommandKind::SetPosition(AxisValues { e: Some(0.0), ..Default::default() }));
        assert_eq!(kinds[4], CommandKind::SetTempNoWait { s: Some(200.0) });
        assert_eq!(kinds[5], CommandKind::SetTempWait { s: Some(215.0) });
        assert_eq!(kinds[6], CommandKind::Pause);
        assert_eq!(kinds[7], CommandKind::Other("M82".into()));
        assert_eq!(kinds[8], CommandKind::Other("T0".into()));
        assert_eq!(kinds[9], CommandKind::Move(Move { x: Some(1.0), ..Move::default() }));
        assert_eq!(cmds[9].source_line, 10);
    }

    #[test]
    fn arcs_rejected() {
        let err = parse_gcode("G2 X1 Y1 I1 J0").unwrap_err();
        assert!(err.to_string().contains("arc"));
    }

    #[test]
    fn other_keeps_raw_text() {
        assert_eq!(one("M117 Printing..."), CommandKind::Other("M117 Printing...".into()));
    }

    fn coord() -> impl Strategy<Value = Option<f64>> {
        prop::option::of(-1000.0f64..1000.0)
    }

    proptest! {
        #[test]
        fn move_round_trip(rapid: bool, x in coord(), y in coord(), z in coord(), e in coord(), f in prop::option::of(1.0f64..20000.0)) {
            let m = Move { rapid, x, y, z, e, f };
            let text = m.to_string();
            prop_assert_eq!(one(&text), CommandKind::Move(m));
        }
    }
}
