use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rcmlab::environment::{ConductanceLaw, Lattice};
use rcmlab::experiments::{DecayCentering, DecayPath};
use rcmlab::fit::geometric_grid;
use rcmlab::functionals::functional_by_name;
use rcmlab::operators::DENSE_LIMIT;
use rcmlab::walker::WalkerKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Decay,
    Diffusivity,
    Msd,
    Spectrum,
    Contract,
    NashCheck,
    FieldDump,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Simulate,
        Experiment::Decay,
        Experiment::Diffusivity,
        Experiment::Msd,
        Experiment::Spectrum,
        Experiment::Contract,
        Experiment::NashCheck,
        Experiment::FieldDump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Decay => "decay",
            Experiment::Diffusivity => "diffusivity",
            Experiment::Msd => "msd",
            Experiment::Spectrum => "spectrum",
            Experiment::Contract => "contract",
            Experiment::NashCheck => "nash-check",
            Experiment::FieldDump => "field-dump",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}'"))
    }
}

/// Where a setting came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag(String),
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag(name) => write!(f, "--{name}"),
            Origin::Default => f.write_str("default"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub origin: Origin,
    pub message: String,
}

/// Every problem found in one configuration, in source order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", e.origin, e.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Fully validated run description. `to_text` round-trips through `parse_config`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub law: ConductanceLaw,
    pub d: usize,
    pub n: usize,
    pub functional: String,
    pub walker: WalkerKind,
    pub times: Vec<f64>,
    /// Resolvent parameters, strictly decreasing; `None` uses the torus-adapted default.
    pub mu: Option<Vec<f64>>,
    pub realizations: usize,
    pub walks: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub path: DecayPath,
    pub centering: DecayCentering,
    pub target_alpha: Option<f64>,
    pub target_tol: f64,
    pub window: Option<(f64, f64)>,
    pub atom: f64,
    pub samples: usize,
    pub importance: bool,
    pub boxes: Vec<usize>,
    pub time: f64,
    pub horizon: Option<f64>,
    pub predict: bool,
}

const KEYS: &[&str] = &[
    "experiment",
    "law",
    "d",
    "n",
    "functional",
    "walker",
    "times",
    "mu",
    "realizations",
    "walks",
    "seed",
    "out",
    "workers",
    "path",
    "centering",
    "target_alpha",
    "target_tol",
    "window",
    "atom",
    "samples",
    "importance",
    "boxes",
    "time",
    "horizon",
    "predict",
];

fn fmt_list<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn walker_name(k: WalkerKind) -> &'static str {
    match k {
        WalkerKind::Conductance => "conductance",
        WalkerKind::Simple => "simple",
    }
}

fn path_name(p: DecayPath) -> &'static str {
    match p {
        DecayPath::Auto => "auto",
        DecayPath::Exact => "exact",
        DecayPath::MonteCarlo => "mc",
    }
}

fn centering_name(c: DecayCentering) -> &'static str {
    match c {
        DecayCentering::LawMean => "law",
        DecayCentering::Empirical => "empirical",
        DecayCentering::None => "none",
    }
}

impl RunConfig {
    /// `key=value` lines accepted back by [`parse_config`].
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("experiment={}", self.experiment),
            format!("law={}", self.law),
            format!("d={}", self.d),
            format!("n={}", self.n),
            format!("functional={}", self.functional),
            format!("walker={}", walker_name(self.walker)),
            format!("times={}", fmt_list(&self.times)),
        ];
        if let Some(mu) = &self.mu {
            lines.push(format!("mu={}", fmt_list(mu)));
        }
        lines.push(format!("realizations={}", self.realizations));
        lines.push(format!("walks={}", self.walks));
        lines.push(format!("seed={}", self.seed));
        lines.push(format!("out={}", self.out.display()));
        if let Some(w) = self.workers {
            lines.push(format!("workers={w}"));
        }
        lines.push(format!("path={}", path_name(self.path)));
        lines.push(format!("centering={}", centering_name(self.centering)));
        if let Some(a) = self.target_alpha {
            lines.push(format!("target_alpha={a}"));
        }
        lines.push(format!("target_tol={}", self.target_tol));
        if let Some((a, b)) = self.window {
            lines.push(format!("window={a},{b}"));
        }
        lines.push(format!("atom={}", self.atom));
        lines.push(format!("samples={}", self.samples));
        lines.push(format!("importance={}", self.importance));
        lines.push(format!("boxes={}", fmt_list(&self.boxes)));
        lines.push(format!("time={}", self.time));
        if let Some(h) = self.horizon {
            lines.push(format!("horizon={h}"));
        }
        lines.push(format!("predict={}", self.predict));
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.d, self.n).expect("validated lattice")
    }
}

/// Parses a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    load(text, &[])
}

/// Parses a configuration file, then applies `(key, value)` overrides from command-line flags.
pub fn load(text: &str, overrides: &[(String, String)]) -> Result<RunConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let mut raw: BTreeMap<&str, (String, Origin)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let origin = Origin::Line(i + 1);
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            errors.push(ConfigError { origin, message: format!("expected key=value, got '{body}'") });
            continue;
        };
        let k = k.trim();
        match KEYS.iter().find(|&&key| key == k) {
            None => errors.push(ConfigError { origin, message: format!("unknown key '{k}'") }),
            Some(&key) => {
                if let Some((_, first)) = raw.get(key) {
                    errors.push(ConfigError { origin, message: format!("duplicate key '{k}' (first set at {first})") });
                } else {
                    raw.insert(key, (v.trim().to_string(), origin));
                }
            }
        }
    }
    for (k, v) in overrides {
        let origin = Origin::Flag(k.replace('_', "-"));
        match KEYS.iter().find(|&&key| key == k) {
            None => errors.push(ConfigError { origin, message: format!("unknown key '{k}'") }),
            Some(&key) => {
                raw.insert(key, (v.trim().to_string(), origin));
            }
        }
    }
    let mut b = Builder { raw, errors };
    let config = b.build();
    if b.errors.is_empty() {
        Ok(config.expect("no errors implies a config"))
    } else {
        Err(ConfigErrors(b.errors))
    }
}

struct Builder<'a> {
    raw: BTreeMap<&'a str, (String, Origin)>,
    errors: Vec<ConfigError>,
}

impl Builder<'_> {
    fn origin(&self, key: &str) -> Origin {
        self.raw.get(key).map_or(Origin::Default, |(_, o)| o.clone())
    }

    fn fail(&mut self, key: &str, message: impl Into<String>) {
        let origin = self.origin(key);
        self.errors.push(ConfigError { origin, message: message.into() });
    }

    /// Typed value of `key`, or `default` when absent or malformed (the error is recorded).
    fn get<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> T {
        let Some((text, _)) = self.raw.get(key) else {
            return default;
        };
        match parse(text) {
            Ok(v) => v,
            Err(m) => {
                self.fail(key, format!("{key}: {m}"));
                default
            }
        }
    }

    fn has(&self, key: &str) -> bool {
        self.raw.contains_key(key)
    }

    fn build(&mut self) -> Option<RunConfig> {
        let experiment = self.get("experiment", None, |s| s.parse().map(Some));
        if experiment.is_none() && !self.has("experiment") {
            self.errors.push(ConfigError { origin: Origin::Default, message: "experiment is required".into() });
        }
        let exp = experiment.unwrap_or(Experiment::Decay);

        let default_law = match exp {
            Experiment::Contract => ConductanceLaw::pareto(0.25, 0.1, 1e3),
            _ => ConductanceLaw::TwoPoint { p: 0.5, low: 1.0, high: 4.0 },
        };
        let law = self.get("law", None, |s| s.parse::<ConductanceLaw>().map(Some).map_err(|e| e.to_string()));
        let law_ok = law.is_some() || !self.has("law");
        let law = law.unwrap_or(default_law);
        let d = self.get("d", 1, parse_usize);
        let n = self.get("n", 64, parse_usize);
        if d < 1 {
            self.fail("d", "d must be ≥ 1");
        }
        if n < 3 {
            self.fail("n", "n must be ≥ 3");
        }
        let lattice_ok = d >= 1 && n >= 3;
        let sites = n.checked_pow(d as u32);
        if lattice_ok && sites.is_none_or(|s| s > 1 << 26) {
            self.fail("n", format!("torus {n}^{d} is too large"));
        }
        let lattice_ok = lattice_ok && sites.is_some_and(|s| s <= 1 << 26);

        let functional = self.get("functional", "drift".to_string(), |s| Ok(s.to_string()));
        if law_ok && lattice_ok && matches!(exp, Experiment::Decay | Experiment::Spectrum | Experiment::NashCheck) {
            match functional_by_name(&functional, d, &law) {
                Ok(f) => {
                    if let Err(e) = f.check_fits(&Lattice::new(d, n).expect("checked"), 0) {
                        self.fail("functional", format!("functional '{functional}': {e}"));
                    }
                }
                Err(e) => self.fail("functional", e.to_string()),
            }
        }
        let walker = self.get("walker", WalkerKind::Conductance, |s| match s {
            "conductance" => Ok(WalkerKind::Conductance),
            "simple" => Ok(WalkerKind::Simple),
            _ => Err(format!("expected 'conductance' or 'simple', got '{s}'")),
        });

        let default_times = match exp {
            Experiment::Msd | Experiment::Simulate => (0..7).map(|k| 0.5 * 2f64.powi(k)).collect(),
            _ => geometric_grid(1.0, 100.0, 13),
        };
        let times = self.get("times", default_times, parse_times);
        if times.is_empty() {
            self.fail("times", "times must not be empty");
        } else if times.windows(2).any(|w| !(w[0] < w[1])) {
            self.fail("times", "times must be strictly increasing");
        } else if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            self.fail("times", "times must be finite and ≥ 0");
        } else if matches!(exp, Experiment::Msd | Experiment::Simulate) && times[0] <= 0.0 {
            self.fail("times", "sampling times must be > 0");
        }

        let mu = self.get("mu", None, |s| parse_f64_list(s).map(Some));
        if let Some(list) = &mu {
            if list.is_empty() {
                self.fail("mu", "μ list must not be empty");
            } else if list.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
                self.fail("mu", "every μ must be finite and > 0");
            } else if list.windows(2).any(|w| !(w[0] > w[1])) {
                self.fail("mu", "μ list must be strictly decreasing");
            }
        }

        let realizations = self.get("realizations", 16, parse_usize);
        if realizations < 1 {
            self.fail("realizations", "realizations must be ≥ 1");
        }
        let walks = self.get("walks", 2000, parse_usize);
        if walks < 1 {
            self.fail("walks", "walks must be ≥ 1");
        }
        let seed = self.get("seed", 0, |s| s.parse::<u64>().map_err(|_| format!("expected an unsigned integer, got '{s}'")));
        let out = self.get("out", PathBuf::from("out"), |s| {
            if s.is_empty() {
                Err("output directory must not be empty".into())
            } else {
                Ok(PathBuf::from(s))
            }
        });
        let workers = self.get("workers", None, |s| parse_usize(s).map(Some));
        if workers == Some(0) {
            self.fail("workers", "workers must be ≥ 1");
        }
        let path = self.get("path", DecayPath::Auto, |s| match s {
            "auto" => Ok(DecayPath::Auto),
            "exact" => Ok(DecayPath::Exact),
            "mc" => Ok(DecayPath::MonteCarlo),
            _ => Err(format!("expected auto, exact or mc, got '{s}'")),
        });
        if exp == Experiment::Decay && path == DecayPath::Exact && lattice_ok && n.pow(d as u32) > DENSE_LIMIT {
            self.fail("path", format!("exact path needs at most {DENSE_LIMIT} sites, torus has {}", n.pow(d as u32)));
        }
        let centering = self.get("centering", DecayCentering::LawMean, |s| match s {
            "law" => Ok(DecayCentering::LawMean),
            "empirical" => Ok(DecayCentering::Empirical),
            "none" => Ok(DecayCentering::None),
            _ => Err(format!("expected law, empirical or none, got '{s}'")),
        });
        let target_alpha = self.get("target_alpha", None, |s| parse_f64(s).map(Some));
        let target_tol = self.get("target_tol", 0.2, parse_f64);
        if !(target_tol > 0.0) {
            self.fail("target_tol", "target_tol must be > 0");
        }
        let window = self.get("window", None, |s| {
            let v = parse_f64_list(s)?;
            match v[..] {
                [a, b] if 0.0 < a && a < b => Ok(Some((a, b))),
                _ => Err(format!("expected 'lo,hi' with 0 < lo < hi, got '{s}'")),
            }
        });
        let atom = self.get("atom", 0.01, parse_f64);
        if !(atom > 0.0 && atom <= 1.0) {
            self.fail("atom", "atom must lie in (0, 1]");
        }
        let samples = self.get("samples", 2_000_000, parse_usize);
        if samples < 2 {
            self.fail("samples", "samples must be ≥ 2");
        }
        let importance = self.get("importance", true, parse_bool);
        let boxes = self.get("boxes", vec![1, 2, 4], |s| {
            s.split(',').map(|t| parse_usize(t.trim())).collect::<Result<Vec<_>, _>>()
        });
        if exp == Experiment::NashCheck {
            if boxes.is_empty() || boxes.contains(&0) {
                self.fail("boxes", "box radii must be ≥ 1");
            } else if let Some(r) = boxes.iter().find(|&&r| 2 * r + 1 > n) {
                self.fail("boxes", format!("box radius {r} does not fit a torus of period {n}"));
            }
        }
        let time = self.get("time", 0.0, parse_f64);
        if !(time >= 0.0 && time.is_finite()) {
            self.fail("time", "time must be finite and ≥ 0");
        }
        let horizon = self.get("horizon", None, |s| parse_f64(s).map(Some));
        if let Some(h) = horizon {
            if !(h > 0.0 && h.is_finite()) {
                self.fail("horizon", "horizon must be finite and > 0");
            } else if times.last().is_some_and(|&t| t > h) {
                self.fail("horizon", format!("horizon {h} is shorter than the last sampling time"));
            }
        }
        let predict = self.get("predict", false, parse_bool);

        // experiment-specific preconditions
        if law_ok {
            match exp {
                Experiment::Contract if !matches!(law, ConductanceLaw::BoundedPareto { .. }) => {
                    self.fail("law", "contract needs a pareto:p,eps,cap law")
                }
                Experiment::Msd if !law.is_bounded() => self.fail("law", "msd needs a law with bounded support"),
                _ => {}
            }
        }
        if exp == Experiment::Spectrum && lattice_ok && n.pow(d as u32) > DENSE_LIMIT {
            self.fail("n", format!("spectrum needs at most {DENSE_LIMIT} sites, torus has {}", n.pow(d as u32)));
        }
        if exp == Experiment::Diffusivity && realizations < 2 {
            self.fail("realizations", "diffusivity needs at least 2 realizations");
        }

        Some(RunConfig {
            experiment: exp,
            law,
            d,
            n,
            functional,
            walker,
            times,
            mu,
            realizations,
            walks,
            seed,
            out,
            workers,
            path,
            centering,
            target_alpha,
            target_tol,
            window,
            atom,
            samples,
            importance,
            boxes,
            time,
            horizon,
            predict,
        })
    }
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("expected a nonnegative integer, got '{s}'"))
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("expected a number, got '{s}'"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| parse_f64(t.trim())).collect()
}

/// Either `t1,t2,...` or `geom:lo,hi,count`.
fn parse_times(s: &str) -> Result<Vec<f64>, String> {
    if let Some(rest) = s.strip_prefix("geom:") {
        let v = parse_f64_list(rest)?;
        return match v[..] {
            [lo, hi, k] if 0.0 < lo && lo < hi && k >= 2.0 && k.fract() == 0.0 => Ok(geometric_grid(lo, hi, k as usize)),
            _ => Err(format!("expected geom:lo,hi,count with 0 < lo < hi and count ≥ 2, got '{s}'")),
        };
    }
    parse_f64_list(s)
}
