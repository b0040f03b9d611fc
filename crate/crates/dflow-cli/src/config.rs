//! Run configuration: flat key/value config files, mirrored kebab-case
//! command-line flags (flags override the file), and validation with
//! per-key diagnostics.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dflow::manifold::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    LinearLab,
    Flow,
    GaugeProbe,
    EpsilonContinuation,
    Invariants,
}

impl Scenario {
    pub fn parse(s: &str) -> Option<Scenario> {
        match s {
            "linear-lab" => Some(Scenario::LinearLab),
            "flow" => Some(Scenario::Flow),
            "gauge-probe" => Some(Scenario::GaugeProbe),
            "epsilon-continuation" => Some(Scenario::EpsilonContinuation),
            "invariants" => Some(Scenario::Invariants),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::LinearLab => "linear-lab",
            Scenario::Flow => "flow",
            Scenario::GaugeProbe => "gauge-probe",
            Scenario::EpsilonContinuation => "epsilon-continuation",
            Scenario::Invariants => "invariants",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    DaRios,
    FukumotoMiyazaki,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Preset> {
        match s {
            "da-rios" => Some(Preset::DaRios),
            "fukumoto-miyazaki" => Some(Preset::FukumotoMiyazaki),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::DaRios => "da-rios",
            Preset::FukumotoMiyazaki => "fukumoto-miyazaki",
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub target: Target,
    pub preset: Option<Preset>,
    pub n: usize,
    pub period: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub k_gauge: usize,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub k_list: Vec<usize>,
    pub eps_list: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    pub emit_snapshots: bool,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "target",
    "preset",
    "n",
    "period",
    "a",
    "b",
    "eps",
    "k_gauge",
    "dt",
    "t_end",
    "k_list",
    "eps_list",
    "seed",
    "output_dir",
    "emit_svg",
    "emit_snapshots",
];

const BOOL_KEYS: &[&str] = &["emit_svg", "emit_snapshots"];

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Parse a flat `key = value` config file (UTF-8, `#` comments).
pub fn parse_file(content: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            err(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            ))
        })?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(err(format!("unknown key `{key}` (line {})", lineno + 1)));
        }
        pairs.insert(key, value.trim().to_string());
    }
    Ok(pairs)
}

/// Parse command-line arguments into raw pairs plus an optional config path.
pub fn parse_flags(
    args: &[String],
) -> Result<(Option<PathBuf>, BTreeMap<String, String>), ConfigError> {
    let mut pairs = BTreeMap::new();
    let mut config_path = None;
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        let Some(stripped) = arg.strip_prefix("--") else {
            return Err(err(format!(
                "unexpected argument `{arg}` (flags start with --)"
            )));
        };
        let key = stripped.replace('-', "_");
        if key == "config" {
            let v = args
                .get(i + 1)
                .ok_or_else(|| err("--config requires a path".to_string()))?;
            config_path = Some(PathBuf::from(v));
            i += 2;
            continue;
        }
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(err(format!("unknown key `{key}`")));
        }
        if BOOL_KEYS.contains(&key.as_str()) {
            // presence implies true; an explicit true/false may follow
            match args.get(i + 1).map(|s| s.as_str()) {
                Some("true") | Some("false") => {
                    pairs.insert(key, args[i + 1].clone());
                    i += 2;
                }
                _ => {
                    pairs.insert(key, "true".to_string());
                    i += 1;
                }
            }
            continue;
        }
        let v = args
            .get(i + 1)
            .ok_or_else(|| err(format!("flag --{stripped} requires a value")))?;
        pairs.insert(key, v.clone());
        i += 2;
    }
    Ok((config_path, pairs))
}

fn get_parse<T: std::str::FromStr>(
    pairs: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, ConfigError> {
    match pairs.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| err(format!("invalid value `{v}` for key `{key}`"))),
    }
}

fn parse_list<T: std::str::FromStr>(
    pairs: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<Vec<T>>, ConfigError> {
    match pairs.get(key) {
        None => Ok(None),
        Some(v) => v
            .split(',')
            .map(|item| {
                item.trim()
                    .parse::<T>()
                    .map_err(|_| err(format!("invalid entry `{item}` in list key `{key}`")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some),
    }
}

/// Resolve raw pairs into a validated configuration.
pub fn resolve(pairs: &BTreeMap<String, String>) -> Result<RunConfig, ConfigError> {
    let scenario_raw = pairs
        .get("scenario")
        .ok_or_else(|| err("missing required key `scenario`"))?;
    let scenario = Scenario::parse(scenario_raw).ok_or_else(|| {
        err(format!(
            "unknown scenario `{scenario_raw}` (expected linear-lab | flow | gauge-probe | epsilon-continuation | invariants)"
        ))
    })?;
    let target = match pairs.get("target") {
        None => Target::S2,
        Some(v) => Target::parse(v)
            .ok_or_else(|| err(format!("unknown target `{v}` (expected s2 | s6 | flatc)")))?,
    };
    let preset = match pairs.get("preset") {
        None => None,
        Some(v) => Some(Preset::parse(v).ok_or_else(|| {
            err(format!(
                "unknown preset `{v}` (expected da-rios | fukumoto-miyazaki)"
            ))
        })?),
    };

    let n = get_parse::<usize>(pairs, "n")?.unwrap_or(128);
    if n < 16 || n % 2 != 0 {
        return Err(err(format!(
            "key `n` must be even and at least 16, got {n}"
        )));
    }
    let period = match get_parse::<f64>(pairs, "period")? {
        Some(p) => p,
        None => {
            if scenario == Scenario::LinearLab {
                2.0 * std::f64::consts::PI
            } else {
                1.0
            }
        }
    };
    if !(period > 0.0) {
        return Err(err(format!("key `period` must be positive, got {period}")));
    }

    // preset fills only keys the user left unset
    let mut a = get_parse::<f64>(pairs, "a")?;
    let mut b = get_parse::<f64>(pairs, "b")?;
    match preset {
        Some(Preset::DaRios) => {
            a = a.or(Some(0.0));
            b = b.or(Some(0.0));
        }
        Some(Preset::FukumotoMiyazaki) => {
            let a_val = a.unwrap_or(1.0);
            a = Some(a_val);
            b = b.or(Some(a_val / 2.0));
        }
        None => {}
    }
    let a = a.unwrap_or(1.0);
    let b = b.unwrap_or(0.0);

    let eps = get_parse::<f64>(pairs, "eps")?.unwrap_or(0.0);
    if !(eps >= 0.0) {
        return Err(err(format!("key `eps` must be nonnegative, got {eps}")));
    }
    let k_gauge = get_parse::<usize>(pairs, "k_gauge")?.unwrap_or(2);
    if k_gauge < 1 {
        return Err(err("key `k_gauge` must be at least 1".to_string()));
    }
    let dt = get_parse::<f64>(pairs, "dt")?;
    if let Some(dt) = dt {
        if !(dt > 0.0) {
            return Err(err(format!("key `dt` must be positive, got {dt}")));
        }
    }
    let t_end = get_parse::<f64>(pairs, "t_end")?.unwrap_or(0.1);
    if !(t_end >= 0.0) {
        return Err(err(format!("key `t_end` must be nonnegative, got {t_end}")));
    }
    let k_list = parse_list::<usize>(pairs, "k_list")?.unwrap_or_else(|| vec![8, 16, 32]);
    let eps_list =
        parse_list::<f64>(pairs, "eps_list")?.unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4, 0.0]);
    let seed = get_parse::<u64>(pairs, "seed")?.unwrap_or(7);
    let output_dir = PathBuf::from(
        pairs
            .get("output_dir")
            .cloned()
            .unwrap_or_else(|| "out".to_string()),
    );
    let parse_bool = |key: &str| -> Result<bool, ConfigError> {
        match pairs.get(key).map(|s| s.as_str()) {
            None => Ok(false),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(err(format!("invalid value `{v}` for boolean key `{key}`"))),
        }
    };
    let emit_svg = parse_bool("emit_svg")?;
    let emit_snapshots = parse_bool("emit_snapshots")?;

    // scenario-specific validation
    match scenario {
        Scenario::GaugeProbe => {
            if a == 0.0 {
                return Err(err("gauge undefined for a=0"));
            }
            if !target.is_sphere() {
                return Err(err(
                    "key `target`: gauge-probe requires a sphere target (s2 or s6)",
                ));
            }
            for &k in &k_list {
                if k == 0 || k > n / 8 {
                    return Err(err(format!(
                        "key `k_list`: spike frequency {k} outside 1..={} for n = {n}",
                        n / 8
                    )));
                }
            }
        }
        Scenario::EpsilonContinuation => {
            if eps_list.len() < 2 || *eps_list.last().unwrap() != 0.0 {
                return Err(err(
                    "key `eps_list` must contain at least one positive entry and end at 0",
                ));
            }
            for w in eps_list.windows(2) {
                if !(w[0] > w[1]) {
                    return Err(err(format!(
                        "key `eps_list` must decrease strictly, got {} then {}",
                        w[0], w[1]
                    )));
                }
            }
        }
        _ => {}
    }

    Ok(RunConfig {
        scenario,
        target,
        preset,
        n,
        period,
        a,
        b,
        eps,
        k_gauge,
        dt,
        t_end,
        k_list,
        eps_list,
        seed,
        output_dir,
        emit_svg,
        emit_snapshots,
    })
}

/// Parse argv (after the program name): reads `--config` first, then lets
/// the remaining flags override file values.
pub fn from_args(args: &[String]) -> Result<RunConfig, ConfigError> {
    let (config_path, flag_pairs) = parse_flags(args)?;
    let mut pairs = BTreeMap::new();
    if let Some(path) = config_path {
        let content = std::fs::read_to_string(&path)
            .map_err(|e| err(format!("cannot read config file {}: {e}", path.display())))?;
        pairs = parse_file(&content)?;
    }
    pairs.extend(flag_pairs);
    resolve(&pairs)
}

impl RunConfig {
    /// Manifest echo of every resolved key, in stable order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("scenario".into(), self.scenario.name().into()),
            ("target".into(), self.target.name().into()),
            (
                "preset".into(),
                self.preset
                    .map(|p| p.name().to_string())
                    .unwrap_or_else(|| "none".into()),
            ),
            ("n".into(), self.n.to_string()),
            ("period".into(), format!("{}", self.period)),
            ("a".into(), format!("{}", self.a)),
            ("b".into(), format!("{}", self.b)),
            ("eps".into(), format!("{}", self.eps)),
            ("k_gauge".into(), self.k_gauge.to_string()),
            (
                "dt".into(),
                self.dt
                    .map(|d| format!("{d}"))
                    .unwrap_or_else(|| "auto".into()),
            ),
            ("t_end".into(), format!("{}", self.t_end)),
            (
                "k_list".into(),
                self.k_list
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "eps_list".into(),
                self.eps_list
                    .iter()
                    .map(|e| format!("{e}"))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("seed".into(), self.seed.to_string()),
            ("output_dir".into(), self.output_dir.display().to_string()),
            ("emit_svg".into(), self.emit_svg.to_string()),
            ("emit_snapshots".into(), self.emit_snapshots.to_string()),
        ];
        out.sort();
        out
    }
}
