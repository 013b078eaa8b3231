//! Run configuration: a flat TOML file with `[target]`, `[kernel]` and
//! `[experiment]` sections. Validation reports every problem at once.

use std::path::PathBuf;

use serde::Serialize;
use toml::{Table, Value};

use nutslab::theory::check_admissible;

pub const COMMANDS: [&str; 8] =
    ["sample", "verify-constants", "coupling", "energy-scan", "mixing", "tail-probe", "drift-check", "time-law"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Int,
    Float,
    Bool,
    Str(&'static [&'static str]),
    AnyStr,
    FloatList,
    IntList,
    StrList(&'static [&'static str]),
}

const TARGET_KINDS: &[&str] = &["std-gaussian", "diag-gaussian", "power-law", "smooth-laplace", "perturbed-gaussian"];
const KERNELS: &[&str] = &["nuts-mul", "nuts-bps", "hmc", "ideal-mul", "ideal-bps"];

const SCHEMA: &[(&str, &str, Kind)] = &[
    ("", "command", Kind::Str(&COMMANDS)),
    ("", "seed", Kind::Int),
    ("", "out_dir", Kind::AnyStr),
    ("", "formats", Kind::StrList(&["csv", "json"])),
    ("", "allow_inadmissible", Kind::Bool),
    ("target", "kind", Kind::Str(TARGET_KINDS)),
    ("target", "dim", Kind::Int),
    ("target", "scales", Kind::FloatList),
    ("target", "c", Kind::Float),
    ("target", "beta", Kind::Float),
    ("target", "m", Kind::Float),
    ("target", "amplitude", Kind::Float),
    ("target", "frequency", Kind::Float),
    ("kernel", "variant", Kind::Str(KERNELS)),
    ("kernel", "h", Kind::Float),
    ("kernel", "max_depth", Kind::Int),
    ("kernel", "steps", Kind::Int),
    ("kernel", "kstar", Kind::Int),
    ("kernel", "delta", Kind::Float),
    ("kernel", "divergence_threshold", Kind::Float),
    ("kernel", "uturn", Kind::Str(&["recursive", "strict"])),
    ("experiment", "variant", Kind::Str(&["mul", "bps"])),
    ("experiment", "n_steps", Kind::Int),
    ("experiment", "n_chains", Kind::Int),
    ("experiment", "d", Kind::Int),
    ("experiment", "dims", Kind::IntList),
    ("experiment", "n_pairs", Kind::Int),
    ("experiment", "pair_steps", Kind::Int),
    ("experiment", "flow", Kind::Str(&["leapfrog", "exact"])),
    ("experiment", "alpha", Kind::Float),
    ("experiment", "r", Kind::Float),
    ("experiment", "n_samples", Kind::Int),
    ("experiment", "threshold", Kind::Float),
    ("experiment", "max_iterations", Kind::Int),
    ("experiment", "start", Kind::Str(&["axis", "diagonal", "stationary"])),
    ("experiment", "h_scale", Kind::Float),
    ("experiment", "snap_delta", Kind::Float),
    ("experiment", "radii", Kind::FloatList),
    ("experiment", "n_trials", Kind::Int),
    ("experiment", "tail_steps", Kind::Int),
    ("experiment", "a", Kind::Float),
    ("experiment", "n_mc", Kind::Int),
    ("experiment", "spread", Kind::Float),
    ("experiment", "epsilon", Kind::Float),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSpec {
    pub kind: String,
    pub dim: usize,
    pub scales: Option<Vec<f64>>,
    pub c: Option<f64>,
    pub beta: Option<f64>,
    pub m: Option<f64>,
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    pub variant: String,
    pub h: Option<f64>,
    pub max_depth: Option<u32>,
    pub steps: u32,
    pub kstar: Option<u32>,
    /// Angular margin for the step-size admissibility check.
    pub delta: f64,
    pub divergence_threshold: f64,
    pub uturn: String,
}

/// Experiment parameters; unset values fall back to per-command defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ExperimentSpec {
    pub variant: Option<String>,
    pub n_steps: Option<usize>,
    pub n_chains: Option<usize>,
    pub d: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub n_pairs: Option<usize>,
    pub pair_steps: Option<usize>,
    pub flow: Option<String>,
    pub alpha: Option<f64>,
    pub r: Option<f64>,
    pub n_samples: Option<usize>,
    pub threshold: Option<f64>,
    pub max_iterations: Option<usize>,
    pub start: Option<String>,
    pub h_scale: Option<f64>,
    pub snap_delta: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub n_trials: Option<usize>,
    pub tail_steps: Option<usize>,
    pub a: Option<f64>,
    pub n_mc: Option<usize>,
    pub spread: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub formats: Vec<String>,
    pub allow_inadmissible: bool,
    pub target: TargetSpec,
    pub kernel: KernelSpec,
    pub experiment: ExperimentSpec,
}

impl RunConfig {
    pub fn writes_csv(&self) -> bool {
        self.formats.iter().any(|f| f == "csv")
    }

    pub fn writes_json(&self) -> bool {
        self.formats.iter().any(|f| f == "json")
    }
}

/// Step size used by `command` when `kernel.h` is not set.
pub fn default_h(command: &str) -> f64 {
    match command {
        "energy-scan" => 0.05,
        "tail-probe" | "drift-check" => 0.1,
        _ => 0.2,
    }
}

/// Parses TOML text into a table. Duplicate keys and syntax errors surface here.
pub fn parse_table(text: &str) -> Result<Table, Vec<String>> {
    text.parse::<Table>().map_err(|e| vec![format!("config syntax: {}", e.to_string().trim_end().replace('\n', " "))])
}

/// Sets `section.key` (or a top-level key when `section` is empty).
pub fn set(table: &mut Table, section: &str, key: &str, value: Value) {
    if section.is_empty() {
        table.insert(key.to_string(), value);
        return;
    }
    let entry = table.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
    if let Value::Table(t) = entry {
        t.insert(key.to_string(), value);
    }
}

fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Int => "an integer",
        Kind::Float => "a number",
        Kind::Bool => "a boolean",
        Kind::Str(_) | Kind::AnyStr => "a string",
        Kind::FloatList => "a list of numbers",
        Kind::IntList => "a list of integers",
        Kind::StrList(_) => "a list of strings",
    }
}

fn check_value(name: &str, v: &Value, kind: Kind, errors: &mut Vec<String>) {
    let ok = match (kind, v) {
        (Kind::Int, Value::Integer(_)) => true,
        (Kind::Float, Value::Integer(_) | Value::Float(_)) => true,
        (Kind::Bool, Value::Boolean(_)) => true,
        (Kind::AnyStr, Value::String(_)) => true,
        (Kind::Str(opts), Value::String(s)) => {
            if !opts.contains(&s.as_str()) {
                errors.push(format!("{name}: '{s}' is not one of {}", opts.join(", ")));
            }
            true
        }
        (Kind::FloatList, Value::Array(a)) => a.iter().all(|x| matches!(x, Value::Integer(_) | Value::Float(_))),
        (Kind::IntList, Value::Array(a)) => a.iter().all(|x| matches!(x, Value::Integer(_))),
        (Kind::StrList(opts), Value::Array(a)) => {
            for x in a {
                match x {
                    Value::String(s) if !opts.contains(&s.as_str()) => {
                        errors.push(format!("{name}: '{s}' is not one of {}", opts.join(", ")))
                    }
                    Value::String(_) => {}
                    _ => return errors.push(format!("{name}: expected {}", kind_name(kind))),
                }
            }
            true
        }
        _ => false,
    };
    if !ok {
        errors.push(format!("{name}: expected {}, got {}", kind_name(kind), v.type_str()));
    }
}

struct View<'a>(&'a Table);

impl View<'_> {
    fn get(&self, section: &str, key: &str) -> Option<&Value> {
        if section.is_empty() {
            self.0.get(key)
        } else {
            self.0.get(section)?.as_table()?.get(key)
        }
    }

    fn float(&self, section: &str, key: &str) -> Option<f64> {
        match self.get(section, key)? {
            Value::Integer(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    fn int(&self, section: &str, key: &str) -> Option<i64> {
        self.get(section, key)?.as_integer()
    }

    fn string(&self, section: &str, key: &str) -> Option<String> {
        self.get(section, key)?.as_str().map(str::to_string)
    }

    fn floats(&self, section: &str, key: &str) -> Option<Vec<f64>> {
        self.get(section, key)?
            .as_array()?
            .iter()
            .map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
            .collect()
    }

    fn ints(&self, section: &str, key: &str) -> Option<Vec<i64>> {
        self.get(section, key)?.as_array()?.iter().map(Value::as_integer).collect()
    }
}

fn non_negative(name: &str, v: i64, errors: &mut Vec<String>) -> usize {
    if v < 0 {
        errors.push(format!("{name}: must be non-negative, got {v}"));
        0
    } else {
        v as usize
    }
}

/// Validates a merged table into a `RunConfig`, listing every error found.
pub fn validate(table: &Table) -> Result<RunConfig, Vec<String>> {
    let mut errors = Vec::new();
    for (k, v) in table {
        match v {
            Value::Table(t) if ["target", "kernel", "experiment"].contains(&k.as_str()) => {
                for (kk, vv) in t {
                    match SCHEMA.iter().find(|(s, n, _)| s == k && n == kk) {
                        Some(&(_, _, kind)) => check_value(&format!("{k}.{kk}"), vv, kind, &mut errors),
                        None => errors.push(format!("unknown key '{k}.{kk}'")),
                    }
                }
            }
            _ => match SCHEMA.iter().find(|(s, n, _)| s.is_empty() && n == k) {
                Some(&(_, _, kind)) => check_value(k, v, kind, &mut errors),
                None => errors.push(format!("unknown key '{k}'")),
            },
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let t = View(table);
    let command = t.string("", "command").unwrap_or_else(|| {
        errors.push("no command given".into());
        String::new()
    });
    let seed = match t.int("", "seed") {
        Some(s) if s >= 0 => s as u64,
        Some(s) => {
            errors.push(format!("seed: must be non-negative, got {s}"));
            0
        }
        None => {
            errors.push("seed: required (no default seed is used)".into());
            0
        }
    };
    let int_or = |section: &str, key: &str, default: i64, errors: &mut Vec<String>| {
        non_negative(&format!("{section}.{key}"), t.int(section, key).unwrap_or(default), errors)
    };
    let target = TargetSpec {
        kind: t.string("target", "kind").unwrap_or_else(|| "std-gaussian".into()),
        dim: int_or("target", "dim", 1, &mut errors),
        scales: t.floats("target", "scales"),
        c: t.float("target", "c"),
        beta: t.float("target", "beta"),
        m: t.float("target", "m"),
        amplitude: t.float("target", "amplitude").unwrap_or(0.1),
        frequency: t.float("target", "frequency").unwrap_or(1.0),
    };
    let kernel = KernelSpec {
        variant: t.string("kernel", "variant").unwrap_or_else(|| "nuts-mul".into()),
        h: t.float("kernel", "h"),
        max_depth: t.int("kernel", "max_depth").map(|v| non_negative("kernel.max_depth", v, &mut errors) as u32),
        steps: int_or("kernel", "steps", 10, &mut errors) as u32,
        kstar: t.int("kernel", "kstar").map(|v| non_negative("kernel.kstar", v, &mut errors) as u32),
        delta: t.float("kernel", "delta").unwrap_or(0.005),
        divergence_threshold: t
            .float("kernel", "divergence_threshold")
            .unwrap_or(nutslab::DEFAULT_DIVERGENCE_THRESHOLD),
        uturn: t.string("kernel", "uturn").unwrap_or_else(|| "recursive".into()),
    };
    let opt_usize = |key: &str, errors: &mut Vec<String>| {
        t.int("experiment", key).map(|v| non_negative(&format!("experiment.{key}"), v, errors))
    };
    let experiment = ExperimentSpec {
        variant: t.string("experiment", "variant"),
        n_steps: opt_usize("n_steps", &mut errors),
        n_chains: opt_usize("n_chains", &mut errors),
        d: opt_usize("d", &mut errors),
        dims: t
            .ints("experiment", "dims")
            .map(|v| v.into_iter().map(|x| non_negative("experiment.dims", x, &mut errors)).collect()),
        n_pairs: opt_usize("n_pairs", &mut errors),
        pair_steps: opt_usize("pair_steps", &mut errors),
        flow: t.string("experiment", "flow"),
        alpha: t.float("experiment", "alpha"),
        r: t.float("experiment", "r"),
        n_samples: opt_usize("n_samples", &mut errors),
        threshold: t.float("experiment", "threshold"),
        max_iterations: opt_usize("max_iterations", &mut errors),
        start: t.string("experiment", "start"),
        h_scale: t.float("experiment", "h_scale"),
        snap_delta: t.float("experiment", "snap_delta"),
        radii: t.floats("experiment", "radii"),
        n_trials: opt_usize("n_trials", &mut errors),
        tail_steps: opt_usize("tail_steps", &mut errors),
        a: t.float("experiment", "a"),
        n_mc: opt_usize("n_mc", &mut errors),
        spread: t.float("experiment", "spread"),
        epsilon: t.float("experiment", "epsilon"),
    };
    let allow_inadmissible = t.get("", "allow_inadmissible").and_then(Value::as_bool).unwrap_or(false);

    if let Some(h) = kernel.h.filter(|h| !(h.is_finite() && *h > 0.0)) {
        errors.push(format!("kernel.h: must be positive, got {h}"));
    }
    if let Some(k) = kernel.max_depth.filter(|k| !(1..=12).contains(k)) {
        errors.push(format!("kernel.max_depth: must be in 1..=12, got {k}"));
    }
    if target.dim == 0 {
        errors.push("target.dim: must be at least 1".into());
    }
    let gaussian = matches!(target.kind.as_str(), "std-gaussian" | "diag-gaussian");
    let nuts_on_gaussian = kernel.variant.starts_with("nuts") && gaussian && command == "sample";
    let h = kernel.h.unwrap_or(default_h(&command));
    if (nuts_on_gaussian || command == "energy-scan") && !allow_inadmissible && h > 0.0 {
        if let Err(band) = check_admissible(h, kernel.delta) {
            errors.push(format!(
                "kernel.h = {h} is inadmissible at delta = {}: {band} (set allow_inadmissible to override)",
                kernel.delta
            ));
        }
    }

    let out_dir = PathBuf::from(t.string("", "out_dir").unwrap_or_else(|| "nutslab-out".into()));
    let formats = t
        .get("", "formats")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
        .unwrap_or_else(|| vec!["csv".to_string(), "json".to_string()]);

    if errors.is_empty() {
        Ok(RunConfig { command, seed, out_dir, formats, allow_inadmissible, target, kernel, experiment })
    } else {
        Err(errors)
    }
}

/// Parses and validates config text on its own, without command-line overrides.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<String>> {
    validate(&parse_table(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("command = \"time-law\"\nseed = 3\n").unwrap();
        assert_eq!(c.kernel.variant, "nuts-mul");
        assert_eq!(c.target.kind, "std-gaussian");
        assert_eq!(c.formats, vec!["csv", "json"]);
        assert_eq!(c.seed, 3);
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "command = \"sample\"\nseed = 1\nbogus = 2\n[kernel]\nh = \"big\"\nmax_depth = 1.5\n[target]\nkind = \"cauchy\"\n";
        let errs = parse_config(text).unwrap_err();
        assert_eq!(errs.len(), 4, "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("bogus")));
        assert!(errs.iter().any(|e| e.contains("kernel.h")));
        assert!(errs.iter().any(|e| e.contains("kernel.max_depth")));
        assert!(errs.iter().any(|e| e.contains("cauchy")));
    }

    #[test]
    fn seed_is_mandatory() {
        let errs = parse_config("command = \"sample\"\n").unwrap_err();
        assert!(errs.iter().any(|e| e.contains("seed")));
    }

    #[test]
    fn duplicate_key_is_named() {
        let errs = parse_config("seed = 1\nseed = 2\n").unwrap_err();
        assert!(errs[0].contains("seed"), "{errs:?}");
    }

    #[test]
    fn forbidden_band_is_reported() {
        // 15 h = π puts the span h(2^4 − 1) on the band around π.
        let h = std::f64::consts::PI / 15.0;
        let text = format!("command = \"sample\"\nseed = 1\n[kernel]\nh = {h}\n");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs[0].contains("2^4 - 1"), "{errs:?}");
        let ok = format!("command = \"sample\"\nseed = 1\nallow_inadmissible = true\n[kernel]\nh = {h}\n");
        assert!(parse_config(&ok).is_ok());
    }
}
