use super::{normalize_phase, Active, Sequence, SequenceEvent, SpinSet};
use crate::error::{Error, Result};

/// Parses sequence text. Spin numbers are only checked for syntax; use
/// [`parse_sequence_for`] to range-check them against a system.
pub fn parse_sequence(text: &str) -> Result<Sequence> {
    Parser { n: None }.parse(text)
}

/// Parses sequence text and rejects spins outside `1..=n` with the
/// location of the offending token.
pub fn parse_sequence_for(text: &str, n: usize) -> Result<Sequence> {
    Parser { n: Some(n) }.parse(text)
}

/// Like [`parse_sequence`] but accepts raw bytes, reporting invalid UTF-8
/// as a parse error.
pub fn parse_sequence_bytes(bytes: &[u8]) -> Result<Sequence> {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse_sequence(s),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let line = valid.iter().filter(|b| **b == b'\n').count() + 1;
            let start = valid.iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1);
            // valid prefix is UTF-8 by construction
            let column = std::str::from_utf8(&valid[start..]).map_or(1, |s| s.chars().count() + 1);
            Err(Error::parse(line, column, "invalid UTF-8"))
        }
    }
}

#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    /// 1-based character column.
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut col = 0;
    for (byte, ch) in line.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                out.push(Token {
                    text: &line[b..byte],
                    column: c,
                });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        out.push(Token {
            text: &line[b..],
            column: c,
        });
    }
    out
}

struct Parser {
    n: Option<usize>,
}

impl Parser {
    fn parse(&self, text: &str) -> Result<Sequence> {
        let mut seq = Sequence::default();
        let mut acquired = false;
        for (li, raw) in text.lines().enumerate() {
            let line = li + 1;
            let trimmed = raw.trim_start();
            if trimmed.is_empty() {
                continue;
            }
            let indent = raw[..raw.len() - trimmed.len()].chars().count();
            if let Some(rest) = trimmed.strip_prefix('#') {
                seq.events.push(SequenceEvent::Comment(rest.trim().to_string()));
                continue;
            }
            let toks = tokenize(raw);
            let head = toks[0];
            if acquired {
                return Err(Error::parse(line, indent + 1, "no events may follow `acquire`"));
            }
            let ctx = Line { line, toks: &toks, n: self.n };
            match head.text {
                "@name" | "@target" => {
                    let value = trimmed[head.text.len()..].trim();
                    if value.is_empty() {
                        return Err(ctx.err(head, format!("`{}` needs a value", head.text)));
                    }
                    let slot = if head.text == "@name" { &mut seq.name } else { &mut seq.target };
                    if slot.is_some() {
                        return Err(ctx.err(head, format!("duplicate `{}`", head.text)));
                    }
                    *slot = Some(value.to_string());
                }
                "pulse" => {
                    ctx.arity(3, 3)?;
                    let spins = ctx.spin_set(toks[1])?;
                    let flip = ctx.number(toks[2], "flip angle")?;
                    if !(flip > -360.0 && flip <= 360.0) {
                        return Err(ctx.err(toks[2], format!("flip angle {flip} outside (-360, 360]")));
                    }
                    let phase = ctx.phase(toks[3])?;
                    seq.events.push(SequenceEvent::Pulse { spins, flip, phase });
                }
                "delay" => {
                    ctx.arity(1, 2)?;
                    let duration = ctx.duration(toks[1])?;
                    let active = match toks.get(2) {
                        None => Active::All,
                        Some(t) => ctx.active(*t)?,
                    };
                    seq.events.push(SequenceEvent::Delay { duration, active });
                }
                "zrot" => {
                    ctx.arity(2, 2)?;
                    let spin = ctx.spin(toks[1])?;
                    let angle = ctx.number(toks[2], "angle")?;
                    seq.events.push(SequenceEvent::ZRot { spin, angle });
                }
                "grad" => {
                    ctx.arity(0, 0)?;
                    seq.events.push(SequenceEvent::Gradient);
                }
                "acquire" => {
                    ctx.arity(1, 2)?;
                    let spin = ctx.spin(toks[1])?;
                    let decoupled = match toks.get(2) {
                        None => Vec::new(),
                        Some(t) => {
                            let list = t.text.strip_prefix("decouple=").ok_or_else(|| {
                                ctx.err(*t, format!("expected `decouple=`, found `{}`", t.text))
                            })?;
                            let sub = Token {
                                text: list,
                                column: t.column + "decouple=".len(),
                            };
                            let v = ctx.spin_list(sub)?;
                            if v.contains(&spin) {
                                return Err(ctx.err(sub, "observed spin cannot be decoupled"));
                            }
                            v
                        }
                    };
                    seq.events.push(SequenceEvent::Acquire { spin, decoupled });
                    acquired = true;
                }
                other => return Err(ctx.err(head, format!("unknown keyword `{other}`"))),
            }
        }
        Ok(seq)
    }
}

struct Line<'a> {
    line: usize,
    toks: &'a [Token<'a>],
    n: Option<usize>,
}

impl Line<'_> {
    fn err(&self, t: Token<'_>, msg: impl Into<String>) -> Error {
        Error::parse(self.line, t.column, msg)
    }

    fn arity(&self, min: usize, max: usize) -> Result<()> {
        let got = self.toks.len() - 1;
        let head = self.toks[0];
        if got > max {
            return Err(self.err(self.toks[max + 1], format!("unexpected `{}`", self.toks[max + 1].text)));
        }
        if got < min {
            let last = self.toks[got];
            let column = last.column + last.text.chars().count();
            return Err(Error::parse(
                self.line,
                column,
                format!("`{}` expects {min} argument(s), found {got}", head.text),
            ));
        }
        Ok(())
    }

    fn number(&self, t: Token<'_>, what: &str) -> Result<f64> {
        let v: f64 = t
            .text
            .parse()
            .map_err(|_| self.err(t, format!("invalid {what} `{}`", t.text)))?;
        if !v.is_finite() {
            return Err(self.err(t, format!("{what} must be finite")));
        }
        Ok(v)
    }

    fn phase(&self, t: Token<'_>) -> Result<f64> {
        let v = match t.text {
            "x" | "+x" => 0.0,
            "y" | "+y" => 90.0,
            "-x" => 180.0,
            "-y" => 270.0,
            _ => self.number(t, "phase")?,
        };
        Ok(normalize_phase(v))
    }

    fn duration(&self, t: Token<'_>) -> Result<f64> {
        const UNITS: [(&str, f64); 5] = [("ms", 1e3), ("us", 1e6), ("µs", 1e6), ("ns", 1e9), ("s", 1.0)];
        let (num, unit, scale) = UNITS
            .iter()
            .find_map(|(u, scale)| t.text.strip_suffix(u).map(|num| (num, *u, *scale)))
            .ok_or_else(|| self.err(t, format!("duration `{}` needs a unit (s, ms, us, ns)", t.text)))?;
        let value: f64 = num.parse().map_err(|_| {
            let unit_col = t.column + num.chars().count();
            if num.chars().last().is_some_and(|c| c.is_alphabetic()) {
                Error::parse(self.line, unit_col.saturating_sub(1).max(t.column), format!("unknown time unit in `{}`", t.text))
            } else {
                self.err(t, format!("invalid duration `{}` ({unit})", t.text))
            }
        })?;
        let d = if scale == 1.0 { value } else { value / scale };
        if !d.is_finite() || d < 0.0 {
            return Err(self.err(t, "duration must be finite and non-negative"));
        }
        Ok(d)
    }

    fn active(&self, t: Token<'_>) -> Result<Active> {
        let list = t
            .text
            .strip_prefix("active=")
            .ok_or_else(|| self.err(t, format!("expected `active=`, found `{}`", t.text)))?;
        let base = t.column + "active=".len();
        match list {
            "all" => return Ok(Active::All),
            "none" => return Ok(Active::Pairs(Vec::new())),
            _ => {}
        }
        let mut pairs = Vec::new();
        let mut col = base;
        for item in list.split(',') {
            let tok = Token { text: item, column: col };
            col += item.chars().count() + 1;
            let body = item
                .strip_prefix('J')
                .ok_or_else(|| self.err(tok, format!("expected coupling like `J12`, found `{item}`")))?;
            let (k, l) = if let Some((a, b)) = body.split_once('-') {
                (self.spin_number(tok, a)?, self.spin_number(tok, b)?)
            } else if body.len() == 2 && body.chars().all(|c| c.is_ascii_digit()) {
                (self.spin_number(tok, &body[..1])?, self.spin_number(tok, &body[1..])?)
            } else {
                return Err(self.err(tok, format!("cannot read coupling `{item}`; use `J12` or `J1-12`")));
            };
            if k == l {
                return Err(self.err(tok, "coupling needs two distinct spins"));
            }
            let p = (k.min(l), k.max(l));
            if !pairs.contains(&p) {
                pairs.push(p);
            }
        }
        pairs.sort_unstable();
        Ok(Active::Pairs(pairs))
    }

    fn spin_number(&self, t: Token<'_>, digits: &str) -> Result<usize> {
        let k: usize = digits
            .parse()
            .map_err(|_| self.err(t, format!("invalid spin number `{digits}`")))?;
        if k == 0 {
            return Err(self.err(t, "spins are numbered from 1"));
        }
        if let Some(n) = self.n {
            if k > n {
                return Err(self.err(t, format!("spin {k} out of range (system has {n} spins)")));
            }
        }
        Ok(k - 1)
    }

    fn spin(&self, t: Token<'_>) -> Result<usize> {
        let digits = t
            .text
            .strip_prefix('s')
            .ok_or_else(|| self.err(t, format!("expected spin like `s3`, found `{}`", t.text)))?;
        self.spin_number(t, digits)
    }

    fn spin_list(&self, t: Token<'_>) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        let mut col = t.column;
        for item in t.text.split(',') {
            let tok = Token { text: item, column: col };
            col += item.chars().count() + 1;
            out.push(self.spin(tok)?);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn spin_set(&self, t: Token<'_>) -> Result<SpinSet> {
        if t.text == "all" {
            return Ok(SpinSet::All);
        }
        self.spin_list(t).map(SpinSet::List)
    }
}
