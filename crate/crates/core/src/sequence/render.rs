use std::fmt::Write;

use super::{Active, Sequence, SequenceEvent, SpinSet};

/// Renders a sequence in the text form accepted by
/// [`parse_sequence`](super::parse_sequence). Parsing the output yields the
/// same events bit for bit.
pub fn render_sequence(seq: &Sequence) -> String {
    let mut out = String::new();
    if let Some(name) = &seq.name {
        let _ = writeln!(out, "@name {}", one_line(name));
    }
    if let Some(target) = &seq.target {
        let _ = writeln!(out, "@target {}", one_line(target));
    }
    for e in &seq.events {
        match e {
            SequenceEvent::Pulse { spins, flip, phase } => {
                let _ = writeln!(out, "pulse {} {} {}", spin_set(spins), flip, format_phase(*phase));
            }
            SequenceEvent::Delay { duration, active } => {
                let _ = write!(out, "delay {}", format_duration(*duration));
                match active {
                    Active::All => {}
                    Active::Pairs(p) if p.is_empty() => out.push_str(" active=none"),
                    Active::Pairs(p) => {
                        let list: Vec<String> = p.iter().map(|&(k, l)| coupling(k, l)).collect();
                        let _ = write!(out, " active={}", list.join(","));
                    }
                }
                out.push('\n');
            }
            SequenceEvent::Gradient => out.push_str("grad\n"),
            SequenceEvent::ZRot { spin, angle } => {
                let _ = writeln!(out, "zrot s{} {}", spin + 1, angle);
            }
            SequenceEvent::Acquire { spin, decoupled } => {
                let _ = write!(out, "acquire s{}", spin + 1);
                if !decoupled.is_empty() {
                    let list: Vec<String> = decoupled.iter().map(|k| format!("s{}", k + 1)).collect();
                    let _ = write!(out, " decouple={}", list.join(","));
                }
                out.push('\n');
            }
            SequenceEvent::Comment(c) => {
                let c = one_line(c);
                if c.is_empty() {
                    out.push_str("#\n");
                } else {
                    let _ = writeln!(out, "# {c}");
                }
            }
        }
    }
    out
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn spin_set(s: &SpinSet) -> String {
    match s {
        SpinSet::All => "all".into(),
        SpinSet::List(v) => v.iter().map(|k| format!("s{}", k + 1)).collect::<Vec<_>>().join(","),
    }
}

fn coupling(k: usize, l: usize) -> String {
    if k < 9 && l < 9 {
        format!("J{}{}", k + 1, l + 1)
    } else {
        format!("J{}-{}", k + 1, l + 1)
    }
}

/// `x`, `y`, `-x`, `-y` for the cardinal phases, degrees otherwise.
pub fn format_phase(phase: f64) -> String {
    match phase {
        p if p == 0.0 => "x".into(),
        p if p == 90.0 => "y".into(),
        p if p == 180.0 => "-x".into(),
        p if p == 270.0 => "-y".into(),
        p => format!("{p}"),
    }
}

/// Duration with a unit: `us` below 1 ms, `ms` below 1 s, `s` otherwise,
/// using the shortest decimal that parses back to the same value.
pub fn format_duration(seconds: f64) -> String {
    let (unit, scale) = if seconds == 0.0 {
        ("s", 1.0)
    } else if seconds < 1e-3 {
        ("us", 1e6)
    } else if seconds < 1.0 {
        ("ms", 1e3)
    } else {
        ("s", 1.0)
    };
    if scale == 1.0 {
        return format!("{seconds}s");
    }
    let back = |v: f64| v / scale == seconds;
    let guess = seconds * scale;
    let mut best: Option<String> = None;
    // the exact scaled value may not survive the division; nearby doubles can
    let mut cand = guess;
    let mut down = guess;
    for _ in 0..4 {
        for v in [cand, down] {
            if back(v) {
                let s = format!("{v}");
                if best.as_ref().is_none_or(|b| s.len() < b.len()) {
                    best = Some(s);
                }
            }
        }
        cand = next_up(cand);
        down = next_down(down);
    }
    match best {
        Some(s) => format!("{s}{unit}"),
        None => format!("{seconds}s"),
    }
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

fn next_down(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

#[cfg(test)]
mod tests {
    use super::super::parse_sequence;
    use super::*;

    #[test]
    fn durations_pick_units() {
        assert_eq!(format_duration(5.31375e-3), "5.31375ms");
        assert_eq!(format_duration(81.75e-6), "81.75us");
        assert_eq!(format_duration(10e-3), "10ms");
        assert_eq!(format_duration(2.5), "2.5s");
        assert_eq!(format_duration(0.0), "0s");
    }

    #[test]
    fn render_then_parse() {
        let text = "@name t\npulse s1,s3 180 x\npulse all 90 -y\npulse s2 33.3 12.5\n\
                    delay 1.36612ms active=J45\ndelay 81.75us active=none\ndelay 1s\nzrot s4 -90\n\
                    grad\n# note\nacquire s5 decouple=s3,s4\n";
        let s = parse_sequence(text).unwrap();
        assert_eq!(render_sequence(&s), text);
    }
}
