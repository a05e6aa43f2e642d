use std::fmt;
use std::time::Duration;

use rand::Rng;

use super::{AdversarySpec, Behavior, LinkParams, NetError, NodeIndex, SimTime};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatencySpec {
    Fixed(Duration),
    /// Uniform over the closed interval.
    Uniform(Duration, Duration),
}

impl LatencySpec {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Duration {
        match *self {
            LatencySpec::Fixed(d) => d,
            LatencySpec::Uniform(lo, hi) => {
                Duration::from_micros(rng.gen_range(lo.as_micros() as u64..=hi.as_micros() as u64))
            }
        }
    }
}

impl fmt::Display for LatencySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencySpec::Fixed(d) => write!(f, "{}us", d.as_micros()),
            LatencySpec::Uniform(lo, hi) => write!(f, "{}us-{}us", lo.as_micros(), hi.as_micros()),
        }
    }
}

/// Parses `250us`, `10ms`, `2s`, `1h`. A bare number is milliseconds.
pub fn parse_duration(s: &str) -> Result<Duration, NetError> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: u64 = num.parse().map_err(|_| NetError::Scenario(format!("bad duration {s:?}")))?;
    Ok(match unit {
        "us" => Duration::from_micros(n),
        "" | "ms" => Duration::from_millis(n),
        "s" => Duration::from_secs(n),
        "m" => Duration::from_secs(n * 60),
        "h" => Duration::from_secs(n * 3600),
        _ => return Err(NetError::Scenario(format!("bad duration unit in {s:?}"))),
    })
}

fn parse_latency(s: &str) -> Result<LatencySpec, NetError> {
    match s.split_once('-') {
        Some((lo, hi)) => {
            let (lo, hi) = (parse_duration(lo)?, parse_duration(hi)?);
            if lo > hi {
                return Err(NetError::Scenario(format!("latency range {s:?} is inverted")));
            }
            Ok(LatencySpec::Uniform(lo, hi))
        }
        None => Ok(LatencySpec::Fixed(parse_duration(s)?)),
    }
}

fn parse_rate(s: &str) -> Result<f64, NetError> {
    let r: f64 = s.trim().parse().map_err(|_| NetError::Scenario(format!("bad rate {s:?}")))?;
    if !(0.0..=1.0).contains(&r) {
        return Err(NetError::Scenario(format!("rate {r} outside [0, 1]")));
    }
    Ok(r)
}

/// Scenario file: `key = value` lines, `#` comments.
///
/// ```text
/// seed = 7
/// nodes = 64
/// difficulty = 4
/// bootstrap = 4
/// latency = 5ms-15ms
/// bandwidth = 1250
/// drop = 0.01
/// drop.3.4 = 1.0
/// adversary = drop_all:0.25
/// horizon = 1h
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub nodes: usize,
    pub difficulty: u32,
    pub bootstrap: usize,
    pub link: LinkParams,
    pub link_drops: Vec<(NodeIndex, NodeIndex, f64)>,
    pub adversary: Option<AdversarySpec>,
    pub horizon: Option<SimTime>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 0,
            nodes: 1,
            difficulty: 0,
            bootstrap: 1,
            link: LinkParams::default(),
            link_drops: Vec::new(),
            adversary: None,
            horizon: None,
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, NetError> {
        let mut sc = Scenario::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| NetError::Scenario(format!("line {}: {what}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| v.parse::<u64>().map_err(|_| bad(&format!("bad integer {v:?}")));
            match key {
                "seed" => sc.seed = int(value)?,
                "nodes" => {
                    sc.nodes = int(value)? as usize;
                    if sc.nodes == 0 {
                        return Err(bad("nodes must be at least 1"));
                    }
                }
                "difficulty" => sc.difficulty = int(value)? as u32,
                "bootstrap" => sc.bootstrap = int(value)? as usize,
                "latency" => sc.link.latency = parse_latency(value)?,
                "bandwidth" => sc.link.bytes_per_ms = Some(int(value)?).filter(|&b| b > 0),
                "drop" => sc.link.drop_rate = parse_rate(value)?,
                "horizon" => sc.horizon = Some(SimTime::ZERO + parse_duration(value)?),
                "adversary" => {
                    sc.adversary = if value == "none" {
                        None
                    } else {
                        let (b, f) = value.split_once(':').ok_or_else(|| bad("adversary is behavior:fraction"))?;
                        let behavior = Behavior::parse(b.trim()).ok_or_else(|| bad(&format!("unknown behavior {b:?}")))?;
                        Some(AdversarySpec::new(behavior, parse_rate(f)?)?)
                    }
                }
                k if k.starts_with("drop.") => {
                    let mut parts = k["drop.".len()..].split('.');
                    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(bad("per-link drop is drop.FROM.TO"));
                    };
                    sc.link_drops.push((int(a)? as usize, int(b)? as usize, parse_rate(value)?));
                }
                _ => return Err(bad(&format!("unknown key {key:?}"))),
            }
        }
        Ok(sc)
    }

    pub fn apply<N: super::SimNode>(&self, net: &mut super::SimNet<N>) {
        net.set_default_link(self.link);
        for &(a, b, rate) in &self.link_drops {
            net.set_link(a, b, LinkParams { drop_rate: rate, ..self.link });
        }
        net.set_horizon(self.horizon);
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "nodes = {}", self.nodes)?;
        writeln!(f, "difficulty = {}", self.difficulty)?;
        writeln!(f, "bootstrap = {}", self.bootstrap)?;
        writeln!(f, "latency = {}", self.link.latency)?;
        writeln!(f, "bandwidth = {}", self.link.bytes_per_ms.unwrap_or(0))?;
        writeln!(f, "drop = {}", self.link.drop_rate)?;
        for (a, b, r) in &self.link_drops {
            writeln!(f, "drop.{a}.{b} = {r}")?;
        }
        match &self.adversary {
            Some(a) => writeln!(f, "adversary = {}:{}", a.behavior.name(), a.fraction)?,
            None => writeln!(f, "adversary = none")?,
        }
        if let Some(h) = self.horizon {
            writeln!(f, "horizon = {}us", h.as_micros())?;
        }
        Ok(())
    }
}
