//! Spin-network configuration: resonance frequencies, scalar couplings,
//! transverse relaxation times and r.f. channel grouping.
//!
//! The config is a TOML document where every physical quantity is a string
//! carrying its unit (`"94.1 Hz"`, `"250 ms"`, `"7.51 ppm"`):
//!
//! ```toml
//! name = "two_spin"
//! chain = [1, 2]
//!
//! [[spins]]
//! label = "H"
//! frequency = "400 MHz"
//! t2 = "1 s"
//! channel = "1H"
//!
//! [[spins]]
//! label = "C"
//! frequency = "100 MHz"
//! t2 = "1 s"
//! channel = "13C"
//!
//! [couplings]
//! J12 = "10 Hz"
//! ```
//!
//! Spin numbers in the document are 1-based. `frame_grid` optionally pins the
//! delay grid instead of deriving it from the homonuclear frequency difference.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};

const BUNDLED_GLYCINE_FLUORIDE: &str = include_str!("../data/glycine_fluoride.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    pub name: String,
    pub labels: Vec<String>,
    /// Resonance frequencies (Hz).
    pub nu: Vec<f64>,
    /// Chemical shifts (ppm); informational only.
    pub delta: Vec<Option<f64>>,
    /// Symmetric scalar couplings (Hz), zero diagonal.
    pub j: Vec<Vec<f64>>,
    /// Transverse relaxation times (s).
    pub t2: Vec<f64>,
    /// Channel name per spin; spins sharing a name share an r.f. channel.
    pub channel: Vec<String>,
    /// Ordered linear coupling path (0-based spin indices).
    pub chain: Vec<usize>,
    /// Explicit delay grid (s), overriding the derived one.
    pub grid_override: Option<f64>,
}

/// One edge of the coupling graph (0-based spins, `k < l`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub k: usize,
    pub l: usize,
    pub j: f64,
}

impl SpinSystem {
    /// The five-spin BOC-glycine-fluoride system (H, N, C-alpha, C', F).
    pub fn glycine_fluoride() -> Self {
        load_system(BUNDLED_GLYCINE_FLUORIDE).expect("bundled config is valid")
    }

    pub fn bundled_config_text() -> &'static str {
        BUNDLED_GLYCINE_FLUORIDE
    }

    /// Two heteronuclear spins coupled by `j_hz`.
    pub fn two_spin(j_hz: f64) -> Self {
        SpinSystem {
            name: "two_spin".into(),
            labels: vec!["A".into(), "B".into()],
            nu: vec![400e6, 100e6],
            delta: vec![None, None],
            j: vec![vec![0.0, j_hz], vec![j_hz, 0.0]],
            t2: vec![1.0, 1.0],
            channel: vec!["A".into(), "B".into()],
            chain: vec![0, 1],
            grid_override: None,
        }
    }

    pub fn n(&self) -> usize {
        self.nu.len()
    }

    pub fn coupling(&self, k: usize, l: usize) -> f64 {
        self.j[k][l]
    }

    /// All pairs with nonzero coupling.
    pub fn coupled_pairs(&self) -> Vec<Coupling> {
        coupling_graph(self, 0.0)
    }

    /// Position of spin `k` on the chain.
    pub fn chain_position(&self, k: usize) -> Option<usize> {
        self.chain.iter().position(|&c| c == k)
    }

    pub fn adjacent_on_chain(&self, k: usize, l: usize) -> bool {
        match (self.chain_position(k), self.chain_position(l)) {
            (Some(a), Some(b)) => a.abs_diff(b) == 1,
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::config("spins", "at least one spin is required"));
        }
        for (name, len) in [
            ("labels", self.labels.len()),
            ("delta", self.delta.len()),
            ("t2", self.t2.len()),
            ("channel", self.channel.len()),
            ("j", self.j.len()),
        ] {
            if len != n {
                return Err(Error::config(name, format!("expected {n} entries, found {len}")));
            }
        }
        for (k, row) in self.j.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(format!("j[{k}]"), "row length mismatch"));
            }
            if row[k] != 0.0 {
                return Err(Error::config(
                    format!("couplings.{}", pair_key(k, k)),
                    "a spin cannot couple to itself",
                ));
            }
            for l in 0..n {
                if !row[l].is_finite() {
                    return Err(Error::config(format!("couplings.{}", pair_key(k, l)), "not finite"));
                }
                if row[l] != self.j[l][k] {
                    return Err(Error::config(
                        format!("couplings.{}", pair_key(l, k)),
                        format!(
                            "asymmetric coupling: {} = {} Hz but {} = {} Hz",
                            pair_key(k, l),
                            row[l],
                            pair_key(l, k),
                            self.j[l][k]
                        ),
                    ));
                }
            }
        }
        for (k, t2) in self.t2.iter().enumerate() {
            if !(*t2 > 0.0) || !t2.is_finite() {
                return Err(Error::config(
                    format!("spins[{k}].t2"),
                    format!("T2 must be positive, got {t2} s"),
                ));
            }
        }
        for (k, nu) in self.nu.iter().enumerate() {
            if !nu.is_finite() {
                return Err(Error::config(format!("spins[{k}].frequency"), "not finite"));
            }
        }
        for a in 0..n {
            for b in a + 1..n {
                if self.channel[a] == self.channel[b] && self.nu[a] == self.nu[b] {
                    return Err(Error::config(
                        format!("spins[{b}].frequency"),
                        format!(
                            "duplicate frequency {} Hz on channel `{}` (shared with spin {})",
                            self.nu[b],
                            self.channel[b],
                            a + 1
                        ),
                    ));
                }
            }
        }
        let mut seen = vec![false; n];
        for (i, &c) in self.chain.iter().enumerate() {
            if c >= n {
                return Err(Error::config(format!("chain[{i}]"), format!("spin {} does not exist", c + 1)));
            }
            if seen[c] {
                return Err(Error::config(format!("chain[{i}]"), format!("spin {} repeated", c + 1)));
            }
            seen[c] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::config("chain", format!("spin {} is not on the chain", missing + 1)));
        }
        for (i, w) in self.chain.windows(2).enumerate() {
            if self.j[w[0]][w[1]] == 0.0 {
                return Err(Error::config(
                    format!("chain[{}]", i + 1),
                    format!("spins {} and {} are adjacent but uncoupled", w[0] + 1, w[1] + 1),
                ));
            }
        }
        if let Some(g) = self.grid_override {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::config("frame_grid", "grid must be positive"));
            }
        }
        Ok(())
    }
}

fn pair_key(k: usize, l: usize) -> String {
    if k < 9 && l < 9 {
        format!("J{}{}", k + 1, l + 1)
    } else {
        format!("J{}-{}", k + 1, l + 1)
    }
}

/// Parses `J12` or `J1-12` (1-based) into 0-based indices.
pub(crate) fn parse_pair_key(key: &str) -> Option<(usize, usize)> {
    let body = key.strip_prefix('J')?;
    let (a, b) = if let Some((a, b)) = body.split_once('-') {
        (a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)
    } else if body.len() == 2 && body.bytes().all(|c| c.is_ascii_digit()) {
        ((body.as_bytes()[0] - b'0') as usize, (body.as_bytes()[1] - b'0') as usize)
    } else {
        return None;
    };
    if a == 0 || b == 0 {
        return None;
    }
    Some((a - 1, b - 1))
}

#[derive(Clone, Copy)]
enum Dimension {
    Frequency,
    Time,
    Ppm,
}

fn parse_quantity(path: &str, v: &Value, dim: Dimension) -> Result<f64> {
    let s = v
        .as_str()
        .ok_or_else(|| Error::config(path, "expected a string with a unit, e.g. \"94.1 Hz\""))?;
    let s = s.trim();
    let split = s
        .find(|c: char| c.is_alphabetic() || c == 'µ')
        .ok_or_else(|| Error::config(path, format!("missing unit in `{s}`")))?;
    let (num, unit) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::config(path, format!("bad number `{}`", num.trim())))?;
    // sub-units divide so that decimal inputs stay correctly rounded
    let value = match (dim, unit.trim()) {
        (Dimension::Frequency, "Hz") | (Dimension::Time, "s") | (Dimension::Ppm, "ppm") => value,
        (Dimension::Frequency, "kHz") => value * 1e3,
        (Dimension::Frequency, "MHz") => value * 1e6,
        (Dimension::Time, "ms") => value / 1e3,
        (Dimension::Time, "us" | "µs") => value / 1e6,
        (Dimension::Time, "ns") => value / 1e9,
        (_, u) => return Err(Error::config(path, format!("unit `{u}` not valid here"))),
    };
    if !value.is_finite() {
        return Err(Error::config(path, "not finite"));
    }
    Ok(value)
}

fn get<'a>(t: &'a Table, key: &str, path: &str) -> Result<&'a Value> {
    t.get(key)
        .ok_or_else(|| Error::config(format!("{path}{key}"), "missing required key"))
}

/// Parses and validates a spin-system config document.
pub fn load_system(text: &str) -> Result<SpinSystem> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
    let name = match doc.get("name") {
        Some(v) => v
            .as_str()
            .ok_or_else(|| Error::config("name", "expected a string"))?
            .to_string(),
        None => "unnamed".to_string(),
    };
    let spins = get(&doc, "spins", "")?
        .as_array()
        .ok_or_else(|| Error::config("spins", "expected an array of tables"))?;
    let n = spins.len();
    let mut sys = SpinSystem {
        name,
        labels: Vec::with_capacity(n),
        nu: Vec::with_capacity(n),
        delta: Vec::with_capacity(n),
        j: vec![vec![0.0; n]; n],
        t2: Vec::with_capacity(n),
        channel: Vec::with_capacity(n),
        chain: Vec::new(),
        grid_override: None,
    };
    for (i, spin) in spins.iter().enumerate() {
        let p = format!("spins[{i}].");
        let t = spin
            .as_table()
            .ok_or_else(|| Error::config(format!("spins[{i}]"), "expected a table"))?;
        for key in t.keys() {
            if !["label", "frequency", "shift", "t2", "channel"].contains(&key.as_str()) {
                return Err(Error::config(format!("{p}{key}"), "unknown key"));
            }
        }
        let label = get(t, "label", &p)?
            .as_str()
            .ok_or_else(|| Error::config(format!("{p}label"), "expected a string"))?;
        sys.labels.push(label.to_string());
        sys.nu
            .push(parse_quantity(&format!("{p}frequency"), get(t, "frequency", &p)?, Dimension::Frequency)?);
        sys.delta.push(match t.get("shift") {
            Some(v) => Some(parse_quantity(&format!("{p}shift"), v, Dimension::Ppm)?),
            None => None,
        });
        sys.t2
            .push(parse_quantity(&format!("{p}t2"), get(t, "t2", &p)?, Dimension::Time)?);
        let channel = match t.get("channel") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| Error::config(format!("{p}channel"), "expected a string"))?
                .to_string(),
            None => label.to_string(),
        };
        sys.channel.push(channel);
    }
    let mut given = vec![vec![None::<f64>; n]; n];
    if let Some(c) = doc.get("couplings") {
        let table = c
            .as_table()
            .ok_or_else(|| Error::config("couplings", "expected a table"))?;
        for (key, v) in table {
            let path = format!("couplings.{key}");
            let (k, l) = parse_pair_key(key)
                .ok_or_else(|| Error::config(&path, "expected a key like J12 or J1-12"))?;
            if k >= n || l >= n {
                return Err(Error::config(&path, format!("spin index out of range (n = {n})")));
            }
            if k == l {
                return Err(Error::config(&path, "a spin cannot couple to itself"));
            }
            let j = parse_quantity(&path, v, Dimension::Frequency)?;
            if let Some(other) = given[l][k] {
                if other != j {
                    return Err(Error::config(
                        &path,
                        format!(
                            "asymmetric coupling: {} = {other} Hz but {key} = {j} Hz",
                            pair_key(l, k)
                        ),
                    ));
                }
            }
            given[k][l] = Some(j);
            sys.j[k][l] = j;
            sys.j[l][k] = j;
        }
    }
    sys.chain = match doc.get("chain") {
        Some(v) => v
            .as_array()
            .ok_or_else(|| Error::config("chain", "expected an array of spin numbers"))?
            .iter()
            .enumerate()
            .map(|(i, x)| match x.as_integer() {
                Some(s) if s >= 1 => Ok(s as usize - 1),
                _ => Err(Error::config(format!("chain[{i}]"), "expected a 1-based spin number")),
            })
            .collect::<Result<Vec<_>>>()?,
        None => (0..n).collect(),
    };
    if let Some(v) = doc.get("frame_grid") {
        sys.grid_override = Some(parse_quantity("frame_grid", v, Dimension::Time)?);
    }
    for key in doc.keys() {
        if !["name", "spins", "couplings", "chain", "frame_grid"].contains(&key.as_str()) {
            return Err(Error::config(key.as_str(), "unknown key"));
        }
    }
    sys.validate()?;
    Ok(sys)
}

fn quantity(v: f64, unit: &str) -> String {
    format!("\"{v} {unit}\"")
}

/// Renders a config document that [`load_system`] reads back to an equal system.
pub fn serialize_system(sys: &SpinSystem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name = {:?}", sys.name);
    let chain: Vec<String> = sys.chain.iter().map(|c| (c + 1).to_string()).collect();
    let _ = writeln!(out, "chain = [{}]", chain.join(", "));
    if let Some(g) = sys.grid_override {
        let _ = writeln!(out, "frame_grid = {}", quantity(g, "s"));
    }
    for k in 0..sys.n() {
        let _ = writeln!(out, "\n[[spins]]");
        let _ = writeln!(out, "label = {:?}", sys.labels[k]);
        let _ = writeln!(out, "frequency = {}", quantity(sys.nu[k], "Hz"));
        if let Some(d) = sys.delta[k] {
            let _ = writeln!(out, "shift = {}", quantity(d, "ppm"));
        }
        let _ = writeln!(out, "t2 = {}", quantity(sys.t2[k], "s"));
        let _ = writeln!(out, "channel = {:?}", sys.channel[k]);
    }
    let _ = writeln!(out, "\n[couplings]");
    for c in sys.coupled_pairs() {
        let _ = writeln!(out, "{} = {}", pair_key(c.k, c.l), quantity(c.j, "Hz"));
    }
    out
}

/// Delay grid (s) that keeps the rotating frames of a homonuclear pair
/// aligned: `1 / |nu_a - nu_b|`. `None` when every channel drives one spin.
pub fn frame_grid(sys: &SpinSystem) -> Result<Option<f64>> {
    let n = sys.n();
    let mut shared: Option<(usize, usize)> = None;
    for a in 0..n {
        let group: Vec<usize> = (0..n).filter(|&b| sys.channel[b] == sys.channel[a]).collect();
        if group.len() >= 3 {
            return Err(Error::Unsupported(format!(
                "channel `{}` drives {} spins; frame alignment supports at most two",
                sys.channel[a],
                group.len()
            )));
        }
        if group.len() == 2 && group[0] == a {
            if let Some((p, _)) = shared {
                return Err(Error::Unsupported(format!(
                    "channels `{}` and `{}` both drive two spins",
                    sys.channel[p], sys.channel[a]
                )));
            }
            shared = Some((group[0], group[1]));
        }
    }
    if let Some(g) = sys.grid_override {
        return Ok(Some(g));
    }
    Ok(shared.map(|(a, b)| derived_grid(sys, a, b)))
}

/// `1 / |nu_a - nu_b|` without any override.
pub fn derived_grid(sys: &SpinSystem, a: usize, b: usize) -> f64 {
    1.0 / (sys.nu[a] - sys.nu[b]).abs()
}

/// Undirected edges with `|J| > threshold`, ordered by `(k, l)`.
pub fn coupling_graph(sys: &SpinSystem, threshold_hz: f64) -> Vec<Coupling> {
    let n = sys.n();
    let mut out = Vec::new();
    for k in 0..n {
        for l in k + 1..n {
            let j = sys.j[k][l];
            if j.abs() > threshold_hz {
                out.push(Coupling { k, l, j });
            }
        }
    }
    out
}
