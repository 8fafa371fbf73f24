//! Line-oriented SPICE-subset parser.
//!
//! Grammar (case-insensitive keywords, `*` comments, `+` continuation):
//!
//! ```text
//! .model <name> NMOS|PMOS VT0= IS= S= LAMBDA= ETA= GAMMA= PHIF= [W=] [L=] [TREF=] [ITEXP=]
//! M<name> <d> <g> <s> <b> <model> [W=] [L=]
//! V<name> <n+> <n-> DC <volts> | PWL(t1 v1 t2 v2 ...)
//! C<name> <n+> <n-> <farads>
//! .ic <node>=<volts>    .temp <celsius>    .param <name>=<value>    .end
//! ```
//!
//! Unit suffixes: f, p, n, u, m, k, meg. Ground is the literal node `0`.

use std::collections::BTreeMap;

use super::{Netlist, NetlistError, SourceValue};
use crate::device::{DeviceParams, Polarity};

struct Line {
    number: usize,
    text: String,
}

/// Parse a numeric token with an optional unit suffix.
fn parse_value(token: &str, line: usize) -> Result<f64, NetlistError> {
    let bytes = token.as_bytes();
    let mut split = bytes.len();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_digit() || c == '+' || c == '-' || c == '.' {
            i += 1;
        } else if (c == 'e' || c == 'E')
            && i + 1 < bytes.len()
            && {
                let nxt = bytes[i + 1] as char;
                nxt.is_ascii_digit() || nxt == '+' || nxt == '-'
            }
            && i > 0
        {
            i += 1;
        } else {
            split = i;
            break;
        }
        split = i;
    }
    let (num, suffix) = token.split_at(split.min(token.len()));
    let base: f64 = num
        .parse()
        .map_err(|_| NetlistError::Syntax { line, col: 1, msg: format!("bad number '{token}'") })?;
    let mult = match suffix.to_ascii_lowercase().as_str() {
        "" => 1.0,
        "f" => 1e-15,
        "p" => 1e-12,
        "n" => 1e-9,
        "u" => 1e-6,
        "m" => 1e-3,
        "k" => 1e3,
        "meg" => 1e6,
        _ => return Err(NetlistError::BadUnitSuffix { line, token: token.to_string() }),
    };
    Ok(base * mult)
}

fn key_value(token: &str, line: usize) -> Result<(String, String), NetlistError> {
    match token.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => {
            Ok((k.to_ascii_uppercase(), v.to_string()))
        }
        _ => Err(NetlistError::Syntax {
            line,
            col: 1,
            msg: format!("expected key=value, got '{token}'"),
        }),
    }
}

/// Join continuation lines and strip comments/blank lines.
fn logical_lines(text: &str) -> Vec<Line> {
    let mut out: Vec<Line> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('+') {
            if let Some(last) = out.last_mut() {
                last.text.push(' ');
                last.text.push_str(rest.trim());
                continue;
            }
        }
        out.push(Line { number, text: trimmed.to_string() });
    }
    out
}

fn parse_model(n: &mut Netlist, tokens: &[&str], line: usize) -> Result<(), NetlistError> {
    if tokens.len() < 3 {
        return Err(NetlistError::Syntax {
            line,
            col: 1,
            msg: ".model needs a name and a polarity".into(),
        });
    }
    let name = tokens[1].to_string();
    let polarity = match tokens[2].to_ascii_uppercase().as_str() {
        "NMOS" => Polarity::Nmos,
        "PMOS" => Polarity::Pmos,
        other => {
            return Err(NetlistError::Syntax {
                line,
                col: 1,
                msg: format!("polarity must be NMOS or PMOS, got '{other}'"),
            })
        }
    };
    let mut kv = BTreeMap::new();
    for tok in &tokens[3..] {
        let (k, v) = key_value(tok, line)?;
        kv.insert(k, parse_value(&v, line)?);
    }
    let mut need = |key: &str| -> Result<f64, NetlistError> {
        kv.remove(key).ok_or_else(|| NetlistError::Syntax {
            line,
            col: 1,
            msg: format!(".model {name} missing {key}="),
        })
    };
    let params = DeviceParams {
        polarity,
        vt0: need("VT0")?,
        is0: need("IS")?,
        swing: need("S")?,
        lambda: need("LAMBDA")?,
        eta: need("ETA")?,
        gamma: need("GAMMA")?,
        phi_f: need("PHIF")?,
        w: kv.remove("W").unwrap_or(1e-7),
        l: kv.remove("L").unwrap_or(1e-7),
        tref: kv.remove("TREF").unwrap_or(300.0),
        is_temp_exp: kv.remove("ITEXP").unwrap_or(0.0),
    };
    if let Some(extra) = kv.keys().next() {
        return Err(NetlistError::Syntax {
            line,
            col: 1,
            msg: format!(".model {name}: unknown key {extra}="),
        });
    }
    params
        .validate()
        .map_err(|e| NetlistError::Syntax { line, col: 1, msg: e.to_string() })?;
    n.add_model(&name, params);
    Ok(())
}

fn check_duplicate(n: &Netlist, name: &str, line: usize) -> Result<(), NetlistError> {
    if n.instances.iter().any(|i| i.name.eq_ignore_ascii_case(name)) {
        return Err(NetlistError::DuplicateInstance { line, name: name.to_string() });
    }
    Ok(())
}

/// Parse the SPICE-subset text format into a validated [`Netlist`].
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut n = Netlist::new();
    let mut saw_end = false;
    // Models may be declared after the devices that use them, so MOS
    // references are checked after the pass.
    let mut mos_lines: Vec<(usize, String)> = Vec::new();

    for line in logical_lines(text) {
        if saw_end {
            break;
        }
        let tokens: Vec<&str> = line.text.split_whitespace().collect();
        let first = tokens[0];
        let upper = first.to_ascii_uppercase();
        let lno = line.number;
        match upper.as_str() {
            ".MODEL" => parse_model(&mut n, &tokens, lno)?,
            ".END" => saw_end = true,
            ".TEMP" => {
                let v = tokens.get(1).ok_or_else(|| NetlistError::Syntax {
                    line: lno,
                    col: 1,
                    msg: ".temp needs a value".into(),
                })?;
                n.temp_c = parse_value(v, lno)?;
            }
            ".IC" => {
                let kvtok = tokens.get(1).ok_or_else(|| NetlistError::Syntax {
                    line: lno,
                    col: 1,
                    msg: ".ic needs node=value".into(),
                })?;
                let (node, v) = kvtok.split_once('=').ok_or_else(|| NetlistError::Syntax {
                    line: lno,
                    col: 1,
                    msg: ".ic needs node=value".into(),
                })?;
                let volts = parse_value(v, lno)?;
                n.set_ic(node, volts);
            }
            ".PARAM" => {
                let (k, v) = key_value(
                    tokens.get(1).ok_or_else(|| NetlistError::Syntax {
                        line: lno,
                        col: 1,
                        msg: ".param needs name=value".into(),
                    })?,
                    lno,
                )?;
                let value = parse_value(&v, lno)?;
                n.params.insert(k.to_ascii_lowercase(), value);
            }
            _ if upper.starts_with('.') => {
                return Err(NetlistError::Syntax {
                    line: lno,
                    col: 1,
                    msg: format!("unknown directive '{first}'"),
                })
            }
            _ => match upper.chars().next().unwrap() {
                'M' => {
                    if tokens.len() < 6 {
                        return Err(NetlistError::Syntax {
                            line: lno,
                            col: 1,
                            msg: "MOS line needs: name d g s b model".into(),
                        });
                    }
                    check_duplicate(&n, first, lno)?;
                    let mut w = None;
                    let mut l = None;
                    for tok in &tokens[6..] {
                        let (k, v) = key_value(tok, lno)?;
                        let value = parse_value(&v, lno)?;
                        match k.as_str() {
                            "W" => w = Some(value),
                            "L" => l = Some(value),
                            other => {
                                return Err(NetlistError::Syntax {
                                    line: lno,
                                    col: 1,
                                    msg: format!("unknown MOS key {other}="),
                                })
                            }
                        }
                    }
                    n.add_mos(first, tokens[1], tokens[2], tokens[3], tokens[4], tokens[5], w, l)
                        .map_err(|_| NetlistError::DuplicateInstance {
                            line: lno,
                            name: first.to_string(),
                        })?;
                    mos_lines.push((lno, tokens[5].to_string()));
                }
                'V' => {
                    if tokens.len() < 4 {
                        return Err(NetlistError::Syntax {
                            line: lno,
                            col: 1,
                            msg: "source line needs: name n+ n- value".into(),
                        });
                    }
                    check_duplicate(&n, first, lno)?;
                    let spec = tokens[3..].join(" ");
                    let upper_spec = spec.to_ascii_uppercase();
                    let value = if upper_spec.starts_with("DC") {
                        let vtok = spec.split_whitespace().nth(1).ok_or_else(|| {
                            NetlistError::Syntax { line: lno, col: 1, msg: "DC needs a value".into() }
                        })?;
                        SourceValue::Dc(parse_value(vtok, lno)?)
                    } else if upper_spec.starts_with("PWL") {
                        let open = spec.find('(').ok_or_else(|| NetlistError::Syntax {
                            line: lno,
                            col: 1,
                            msg: "PWL needs '('".into(),
                        })?;
                        let close = spec.rfind(')').ok_or_else(|| NetlistError::Syntax {
                            line: lno,
                            col: 1,
                            msg: "PWL missing ')'".into(),
                        })?;
                        let inner = &spec[open + 1..close];
                        let nums: Vec<f64> = inner
                            .split_whitespace()
                            .map(|t| parse_value(t, lno))
                            .collect::<Result<_, _>>()?;
                        if nums.len() < 4 || nums.len() % 2 != 0 {
                            return Err(NetlistError::Syntax {
                                line: lno,
                                col: 1,
                                msg: "PWL needs an even number (>= 4) of values".into(),
                            });
                        }
                        let pts: Vec<(f64, f64)> =
                            nums.chunks(2).map(|c| (c[0], c[1])).collect();
                        if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
                            return Err(NetlistError::Syntax {
                                line: lno,
                                col: 1,
                                msg: "PWL times must be strictly increasing".into(),
                            });
                        }
                        SourceValue::Pwl(pts)
                    } else {
                        return Err(NetlistError::Syntax {
                            line: lno,
                            col: 1,
                            msg: format!("source '{first}' needs DC or PWL"),
                        });
                    };
                    n.add_vsource(first, tokens[1], tokens[2], value).unwrap();
                }
                'C' => {
                    if tokens.len() != 4 {
                        return Err(NetlistError::Syntax {
                            line: lno,
                            col: 1,
                            msg: "capacitor line needs: name n+ n- value".into(),
                        });
                    }
                    check_duplicate(&n, first, lno)?;
                    let c = parse_value(tokens[3], lno)?;
                    if c <= 0.0 {
                        return Err(NetlistError::Syntax {
                            line: lno,
                            col: 1,
                            msg: format!("capacitance must be positive, got {c}"),
                        });
                    }
                    n.add_cap(first, tokens[1], tokens[2], c).unwrap();
                }
                other => {
                    return Err(NetlistError::Syntax {
                        line: lno,
                        col: 1,
                        msg: format!("unknown element letter '{other}'"),
                    })
                }
            },
        }
    }

    if !saw_end {
        return Err(NetlistError::MissingEnd);
    }
    for (line, model) in mos_lines {
        if !n.models.contains_key(&model) {
            return Err(NetlistError::UnknownModel { line, name: model });
        }
    }
    n.validate()?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::InstanceKind;

    #[test]
    fn minimal_program() {
        let n = parse_netlist("V1 a 0 DC 0.5\n.end\n").unwrap();
        assert_eq!(n.instances.len(), 1);
        assert!(n.find_node("a").is_some());
        assert!(n.find_node("0").is_some());
        match &n.instances[0].kind {
            InstanceKind::VSource { value, .. } => assert_eq!(*value, SourceValue::Dc(0.5)),
            _ => panic!("expected source"),
        }
    }

    #[test]
    fn unit_suffixes() {
        let n = parse_netlist("C1 a 0 10f\n.end").unwrap();
        match &n.instances[0].kind {
            InstanceKind::Cap { farads, .. } => {
                assert!((farads - 10e-15).abs() < 1e-12 * 10e-15)
            }
            _ => panic!(),
        }
        for (txt, expect) in [
            ("1p", 1e-12),
            ("2.5n", 2.5e-9),
            ("3u", 3e-6),
            ("4m", 4e-3),
            ("5k", 5e3),
            ("6meg", 6e6),
            ("7e-3", 7e-3),
            ("1.5e2", 150.0),
        ] {
            assert!((parse_value(txt, 1).unwrap() - expect).abs() <= 1e-12 * expect.abs());
        }
        assert!(matches!(
            parse_value("10x", 3),
            Err(NetlistError::BadUnitSuffix { line: 3, .. })
        ));
    }

    #[test]
    fn unknown_model_is_reported_with_name() {
        let err = parse_netlist("M1 d g s b nlp W=0.2u L=0.1u\n.end").unwrap_err();
        match err {
            NetlistError::UnknownModel { name, .. } => assert_eq!(name, "nlp"),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn duplicate_instance_and_missing_end() {
        let err = parse_netlist("V1 a 0 DC 1\nV1 b 0 DC 2\n.end").unwrap_err();
        assert!(matches!(err, NetlistError::DuplicateInstance { line: 2, .. }));
        assert!(matches!(parse_netlist("V1 a 0 DC 1\n"), Err(NetlistError::MissingEnd)));
    }

    #[test]
    fn continuation_and_comments() {
        let text = "* a comment\nV1 a 0 PWL(0 0\n+ 1n 1 2n 0.5)\n.end";
        let n = parse_netlist(text).unwrap();
        match &n.instances[0].kind {
            InstanceKind::VSource { value: SourceValue::Pwl(pts), .. } => {
                assert_eq!(pts.len(), 3);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn model_roundtrip_via_text() {
        let text = "\
.temp 27
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
M1 d g 0 0 n W=0.2u L=0.1u
V1 d 0 DC 1.0
.ic g=0.5
.end";
        let n = parse_netlist(text).unwrap();
        let re = parse_netlist(&n.serialize()).unwrap();
        assert_eq!(n, re);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_netlist("V1 a 0 DC 1\nR1 a 0 100\n.end").unwrap_err();
        match err {
            NetlistError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("wrong error: {other}"),
        }
    }
}
