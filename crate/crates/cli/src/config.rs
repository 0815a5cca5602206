//! Run configuration: flat `key = value` text with `[section]` headers.
//!
//! ```text
//! [run]
//! mode = eigen
//! out = results
//! [domain]
//! domain = disc:1:4
//! refine = 0
//! [problem]
//! k = 1
//! m = 0.5
//! [solver]
//! restarts = 4
//! seed = 1
//! ```
//!
//! Keys are the long flag names. Keys before the first header may be any
//! key; after a header they must belong to that section. The `[provenance]`
//! section of a run manifest is informational and ignored on input, so a
//! manifest replays as a config.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::error::{config, Result};

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["mode", "out"]),
    ("domain", &["domain", "refine"]),
    ("problem", &["k", "m", "m-grid", "f-const"]),
    (
        "solver",
        &["tol", "restarts", "seed", "bracket", "bracket-tol", "sweep-kind"],
    ),
];

const PROVENANCE: &str = "provenance";

pub const DEFAULT_BRACKET: (f64, f64) = (0.5, 8.0);
pub const DEFAULT_BRACKET_TOL: f64 = 0.01;

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS
        .iter()
        .find(|(_, keys)| keys.contains(&key))
        .map(|(s, _)| *s)
}

/// Raw settings, keyed by flag name; later sources override earlier ones.
pub type Settings = BTreeMap<String, String>;

pub fn parse_settings(text: &str) -> Result<Settings> {
    let mut out = Settings::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| config(format!("line {lineno}: unterminated section header")))?
                .trim();
            if name != PROVENANCE && !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(config(format!("line {lineno}: unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config(format!("line {lineno}: expected key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        if section.as_deref() == Some(PROVENANCE) {
            continue;
        }
        match (section_of(key), section.as_deref()) {
            (None, _) => return Err(config(format!("line {lineno}: unknown key {key:?}"))),
            (Some(s), Some(current)) if s != current => {
                return Err(config(format!(
                    "line {lineno}: key {key:?} belongs in [{s}], not [{current}]"
                )))
            }
            _ => {}
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(config(format!("line {lineno}: duplicate key {key:?}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Energy,
    Eigen,
    Threshold,
    Sweep,
    Concentration,
    TwoComponent,
}

impl Mode {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "energy" => Mode::Energy,
            "eigen" => Mode::Eigen,
            "threshold" => Mode::Threshold,
            "sweep" => Mode::Sweep,
            "concentration" => Mode::Concentration,
            "two-component" => Mode::TwoComponent,
            _ => {
                return Err(config(format!(
                    "unknown mode {s:?} (energy, eigen, threshold, sweep, concentration, two-component)"
                )))
            }
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Energy => "energy",
            Mode::Eigen => "eigen",
            Mode::Threshold => "threshold",
            Mode::Sweep => "sweep",
            Mode::Concentration => "concentration",
            Mode::TwoComponent => "two-component",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Square { n: usize },
    Disc { radius: f64, level: usize },
    TwoDiscs { r1: f64, r2: f64, gap: f64, level: usize },
    File(PathBuf),
}

fn number(what: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| config(format!("{what}: {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(config(format!("{what} must be finite")));
    }
    Ok(v)
}

fn positive(what: &str, s: &str) -> Result<f64> {
    let v = number(what, s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(config(format!("{what} must be positive, got {v}")))
    }
}

fn count(what: &str, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| config(format!("{what}: {s:?} is not a non-negative integer")))
}

impl Domain {
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(config("domain file path is empty"));
            }
            return Ok(Domain::File(PathBuf::from(path)));
        }
        let parts: Vec<&str> = s.split(':').collect();
        let level = |p: &str| count("domain level", p);
        match parts.as_slice() {
            ["square", n] => {
                let n = count("square subdivisions", n)?;
                if n == 0 {
                    return Err(config("square subdivisions must be positive"));
                }
                Ok(Domain::Square { n })
            }
            ["disc", r, l] => Ok(Domain::Disc {
                radius: positive("disc radius", r)?,
                level: level(l)?,
            }),
            ["two-discs", r1, r2, gap, l] => Ok(Domain::TwoDiscs {
                r1: positive("first radius", r1)?,
                r2: positive("second radius", r2)?,
                gap: positive("gap", gap)?,
                level: level(l)?,
            }),
            _ => Err(config(format!(
                "bad domain {s:?} (square:N, disc:R:L, two-discs:R1:R2:GAP:L or file:PATH)"
            ))),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Square { n } => write!(f, "square:{n}"),
            Domain::Disc { radius, level } => write!(f, "disc:{radius}:{level}"),
            Domain::TwoDiscs { r1, r2, gap, level } => write!(f, "two-discs:{r1}:{r2}:{gap}:{level}"),
            Domain::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Geometric grid of `steps` masses from `a` to `b` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassGrid {
    pub a: f64,
    pub b: f64,
    pub steps: usize,
}

impl MassGrid {
    fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, steps] = parts.as_slice() else {
            return Err(config(format!("bad m-grid {s:?} (a:b:steps)")));
        };
        let grid = MassGrid {
            a: positive("m-grid start", a)?,
            b: positive("m-grid end", b)?,
            steps: count("m-grid steps", steps)?,
        };
        if grid.steps < 2 {
            return Err(config("m-grid needs at least 2 steps"));
        }
        if grid.b <= grid.a {
            return Err(config("m-grid end must exceed its start"));
        }
        Ok(grid)
    }

    /// Increasing masses; the endpoints are exact.
    pub fn values(&self) -> Vec<f64> {
        let ratio = (self.b / self.a).ln();
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| match i {
                0 => self.a,
                i if i == last => self.b,
                i => self.a * (ratio * i as f64 / last as f64).exp(),
            })
            .collect()
    }
}

impl fmt::Display for MassGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.a, self.b, self.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    Eigen,
    Energy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub domain: Domain,
    pub refine: usize,
    pub k: f64,
    pub m: Option<f64>,
    pub m_grid: Option<MassGrid>,
    pub f_const: f64,
    /// Outer tolerance of both minimizations; `None` keeps the defaults.
    pub tol: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
    pub bracket: (f64, f64),
    pub bracket_tol: f64,
    pub sweep_kind: SweepTarget,
    pub out: PathBuf,
}

impl RunConfig {
    /// Validates every setting before any solving happens.
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let get = |key: &str| s.get(key).map(String::as_str);
        let mode = Mode::parse(get("mode").ok_or_else(|| config("mode is required"))?)?;
        let domain = Domain::parse(get("domain").ok_or_else(|| config("domain is required"))?)?;
        let m = get("m").map(|v| positive("m", v)).transpose()?;
        let m_grid = get("m-grid").map(MassGrid::parse).transpose()?;
        let bracket = match get("bracket") {
            None => DEFAULT_BRACKET,
            Some(b) => {
                let (lo, hi) = b
                    .split_once(':')
                    .ok_or_else(|| config(format!("bad bracket {b:?} (lo:hi)")))?;
                let (lo, hi) = (positive("bracket start", lo)?, positive("bracket end", hi)?);
                if hi <= lo {
                    return Err(config("bracket end must exceed its start"));
                }
                (lo, hi)
            }
        };
        let sweep_kind = match get("sweep-kind").unwrap_or("eigen") {
            "eigen" => SweepTarget::Eigen,
            "energy" => SweepTarget::Energy,
            other => return Err(config(format!("unknown sweep-kind {other:?} (eigen, energy)"))),
        };
        let restarts = get("restarts").map(|v| count("restarts", v)).transpose()?.unwrap_or(4);
        if restarts == 0 {
            return Err(config("restarts must be positive"));
        }
        let cfg = RunConfig {
            mode,
            domain,
            refine: get("refine").map(|v| count("refine", v)).transpose()?.unwrap_or(0),
            k: get("k").map(|v| positive("k", v)).transpose()?.unwrap_or(1.0),
            m,
            m_grid,
            f_const: get("f-const").map(|v| number("f-const", v)).transpose()?.unwrap_or(1.0),
            tol: get("tol").map(|v| positive("tol", v)).transpose()?,
            restarts,
            seed: get("seed")
                .map(|v| v.parse().map_err(|_| config(format!("seed: {v:?} is not an unsigned integer"))))
                .transpose()?
                .unwrap_or(1),
            bracket,
            bracket_tol: get("bracket-tol")
                .map(|v| positive("bracket-tol", v))
                .transpose()?
                .unwrap_or(DEFAULT_BRACKET_TOL),
            sweep_kind,
            out: PathBuf::from(get("out").ok_or_else(|| config("out is required"))?),
        };
        match cfg.mode {
            Mode::Energy | Mode::Eigen | Mode::TwoComponent if cfg.m.is_none() => {
                Err(config(format!("mode {} needs m", cfg.mode)))
            }
            Mode::Sweep | Mode::Concentration if cfg.m_grid.is_none() => {
                Err(config(format!("mode {} needs m-grid", cfg.mode)))
            }
            _ => Ok(cfg),
        }
    }

    /// Config text that reproduces this run, ordered by section.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut entries: BTreeMap<&str, String> = BTreeMap::new();
        entries.insert("mode", self.mode.to_string());
        entries.insert("out", self.out.display().to_string());
        entries.insert("domain", self.domain.to_string());
        entries.insert("refine", self.refine.to_string());
        entries.insert("k", self.k.to_string());
        if let Some(m) = self.m {
            entries.insert("m", m.to_string());
        }
        if let Some(g) = self.m_grid {
            entries.insert("m-grid", g.to_string());
        }
        entries.insert("f-const", self.f_const.to_string());
        if let Some(t) = self.tol {
            entries.insert("tol", t.to_string());
        }
        entries.insert("restarts", self.restarts.to_string());
        entries.insert("seed", self.seed.to_string());
        entries.insert("bracket", format!("{}:{}", self.bracket.0, self.bracket.1));
        entries.insert("bracket-tol", self.bracket_tol.to_string());
        entries.insert(
            "sweep-kind",
            match self.sweep_kind {
                SweepTarget::Eigen => "eigen",
                SweepTarget::Energy => "energy",
            }
            .to_string(),
        );
        for (section, keys) in SECTIONS {
            out.push_str(&format!("[{section}]\n"));
            for key in *keys {
                if let Some(v) = entries.get(key) {
                    out.push_str(&format!("{key} = {v}\n"));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(pairs: &[(&str, &str)]) -> Settings {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn sections_are_checked() {
        let s = parse_settings("[problem]\nk = 2\n# note\n\nm=0.5 # trailing\n").unwrap();
        assert_eq!(s["k"], "2");
        assert_eq!(s["m"], "0.5");
        assert!(parse_settings("[problem]\nmode = energy\n").is_err());
        assert!(parse_settings("[nope]\n").is_err());
        assert!(parse_settings("k = 1\nk = 2\n").is_err());
        assert!(parse_settings("[provenance]\nversion = 0.1.0\n").unwrap().is_empty());
    }

    #[test]
    fn negative_mass_is_rejected() {
        let s = settings(&[("mode", "energy"), ("domain", "square:4"), ("m", "-1"), ("out", "o")]);
        let err = RunConfig::from_settings(&s).unwrap_err();
        assert!(err.to_string().contains("m must be positive"), "{err}");
    }

    #[test]
    fn domains_round_trip() {
        for d in ["square:8", "disc:1:4", "two-discs:1:0.5:0.25:3", "file:meshes/a.mesh", "disc:0.1:0"] {
            assert_eq!(Domain::parse(d).unwrap().to_string(), d);
        }
        for bad in ["square:0", "disc:-1:3", "disc:1", "hexagon:3", "file:"] {
            assert!(Domain::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn geometric_grid_hits_endpoints() {
        let g = MassGrid::parse("0.05:20:10").unwrap();
        let v = g.values();
        assert_eq!((v[0], v[9]), (0.05, 20.0));
        let r = v[1] / v[0];
        assert!(v.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
        assert!(MassGrid::parse("1:1:3").is_err());
        assert!(MassGrid::parse("1:2:1").is_err());
    }

    #[test]
    fn text_round_trips() {
        let s = settings(&[
            ("mode", "sweep"),
            ("domain", "disc:1:3"),
            ("m-grid", "0.1:10:5"),
            ("tol", "1e-9"),
            ("bracket", "0.25:4"),
            ("out", "dir"),
        ]);
        let cfg = RunConfig::from_settings(&s).unwrap();
        let back = RunConfig::from_settings(&parse_settings(&cfg.to_text()).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn modes_demand_their_masses() {
        let s = settings(&[("mode", "sweep"), ("domain", "square:4"), ("m", "1"), ("out", "o")]);
        assert!(RunConfig::from_settings(&s).is_err());
        let s = settings(&[("mode", "threshold"), ("domain", "disc:1:3"), ("out", "o")]);
        assert!(RunConfig::from_settings(&s).is_ok());
    }
}
