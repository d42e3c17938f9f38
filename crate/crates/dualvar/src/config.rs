//! Run configuration files.
//!
//! The format is a flat key-value file split into sections:
//!
//! ```text
//! [problem]
//! family = heat        # heat | burgers | hj | ns-dual | ns-mixed
//! k = 0.1
//!
//! [grid]
//! nx = 64
//! nt = 64
//! x_max = 1.0
//! t_max = 0.1
//! ```
//!
//! `#` starts a comment. Every section except `[grid]` may be omitted, in
//! which case family defaults apply. Unknown sections and keys are errors so
//! that typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dualvar_core::grid::{Boundary, SpaceTimeGrid};
use dualvar_core::legendre::{PotentialSpec, Quadratic, Quartic};
use dualvar_core::optimizer::{AscentConfig, Method};
use dualvar_core::problems::Sign;
use dualvar_core::rng::DEFAULT_SEED;

use crate::error::{CliError, Result};

const SECTIONS: [&str; 5] = ["problem", "grid", "potential", "optimizer", "output"];

const KEYS: [(&str, &[&str]); 5] = [
    (
        "problem",
        &[
            "family",
            "k",
            "c",
            "nu_hat",
            "rho0",
            "margin",
            "sign",
            "initial_offset",
            "initial_amplitude",
            "initial_wavenumber",
            "expect_singular_l",
        ],
    ),
    ("grid", &["nx", "nt", "x_min", "x_max", "t_max", "boundary"]),
    ("potential", &["kind", "scale", "a", "b", "preset"]),
    (
        "optimizer",
        &[
            "method",
            "step0",
            "max_iter",
            "grad_tol",
            "backtrack_factor",
            "max_backtracks",
            "seed",
            "initial_state",
            "initial_state_amplitude",
        ],
    ),
    ("output", &["dir", "snapshot_every"]),
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but untyped configuration: section -> key -> value, with the line
/// each key came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Ini> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::config(line, "unterminated section header"))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(CliError::config(line, format!("unknown section `{name}`")));
                }
                if ini.sections.contains_key(name) {
                    return Err(CliError::config(
                        line,
                        format!("duplicate section `{name}`"),
                    ));
                }
                ini.sections.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::config(
                    line,
                    "expected `key = value` or `[section]`",
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(section) = current.as_deref() else {
                return Err(CliError::config(
                    line,
                    format!("key `{key}` outside any section"),
                ));
            };
            if !allowed(section, key) {
                return Err(CliError::config(
                    line,
                    format!("unknown key `{key}` in [{section}]"),
                ));
            }
            if value.is_empty() {
                return Err(CliError::config(line, format!("empty value for `{key}`")));
            }
            let map = ini
                .sections
                .get_mut(section)
                .expect("section inserted above");
            if map.contains_key(key) {
                return Err(CliError::config(line, format!("duplicate key `{key}`")));
            }
            map.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(ini)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)?
            .get(key)
            .map(|e| e.value.as_str())
    }

    /// Overrides (or adds) a value. `param` is `section.key`, or a bare key
    /// that names exactly one allowed key across all sections.
    pub fn set(&mut self, param: &str, value: &str) -> Result<()> {
        let (section, key) = resolve_param(param)?;
        let entry = Entry {
            value: value.to_string(),
            line: 0,
        };
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), entry);
        Ok(())
    }

    fn typed<T: FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>> {
        let Some(e) = self.sections.get(section).and_then(|s| s.get(key)) else {
            return Ok(None);
        };
        e.value.parse::<T>().map(Some).map_err(|_| {
            CliError::config(
                e.line,
                format!("[{section}] {key}: expected {what}, found `{}`", e.value),
            )
        })
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.typed(section, key, "a number")?.unwrap_or(default))
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        Ok(self
            .typed(section, key, "a non-negative integer")?
            .unwrap_or(default))
    }

    fn required_usize(&self, section: &str, key: &str) -> Result<usize> {
        self.typed(section, key, "a non-negative integer")?
            .ok_or_else(|| CliError::Invalid(format!("missing key {key} in section {section}")))
    }

    fn required_f64(&self, section: &str, key: &str) -> Result<f64> {
        self.typed(section, key, "a number")?
            .ok_or_else(|| CliError::Invalid(format!("missing key {key} in section {section}")))
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map_or(0, |e| e.line)
    }
}

fn allowed(section: &str, key: &str) -> bool {
    KEYS.iter()
        .any(|(s, keys)| *s == section && keys.contains(&key))
}

/// `section.key` for a sweep parameter name.
pub fn resolve_param(param: &str) -> Result<(&'static str, &'static str)> {
    let (section, key) = match param.split_once('.') {
        Some((s, k)) => (Some(s), k),
        None => (None, param),
    };
    let hits: Vec<(&'static str, &'static str)> = KEYS
        .iter()
        .filter(|(s, _)| section.is_none_or(|want| want == *s))
        .flat_map(|(s, keys)| keys.iter().filter(|k| **k == key).map(move |k| (*s, *k)))
        .collect();
    match hits.as_slice() {
        [one] => Ok(*one),
        [] => Err(CliError::Invalid(format!("unknown parameter `{param}`"))),
        _ => Err(CliError::Invalid(format!(
            "parameter `{param}` is ambiguous; qualify it as section.key"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Heat,
    Burgers,
    Hj,
    NsDual,
    NsMixed,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Heat => "heat",
            Family::Burgers => "burgers",
            Family::Hj => "hj",
            Family::NsDual => "ns-dual",
            Family::NsMixed => "ns-mixed",
        }
    }

    fn space_dim(self) -> usize {
        match self {
            Family::NsDual | Family::NsMixed => 2,
            _ => 1,
        }
    }

    /// Dimension of the potential's argument.
    fn potential_dim(self) -> usize {
        match self {
            Family::Hj | Family::NsMixed => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "heat" => Ok(Family::Heat),
            "burgers" => Ok(Family::Burgers),
            "hj" => Ok(Family::Hj),
            "ns-dual" => Ok(Family::NsDual),
            "ns-mixed" => Ok(Family::NsMixed),
            other => Err(format!("unknown family `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialConfig {
    Quadratic { scale: f64 },
    Quartic { a: f64, b: f64 },
}

impl PotentialConfig {
    /// Named presets accepted by `kind = preset`.
    pub fn preset(name: &str) -> Option<PotentialConfig> {
        match name {
            "unit-quadratic" => Some(PotentialConfig::Quadratic { scale: 1.0 }),
            "unit-quartic" => Some(PotentialConfig::Quartic { a: 1.0, b: 1.0 }),
            "soft-quartic" => Some(PotentialConfig::Quartic { a: 1.0, b: 0.1 }),
            _ => None,
        }
    }

    /// The potential over `dim` components, multiplied by `factor`.
    pub fn build(&self, dim: usize, factor: f64) -> dualvar_core::Result<PotentialSpec> {
        match *self {
            PotentialConfig::Quadratic { scale } => PotentialSpec::new(Quadratic {
                dim,
                scale: scale * factor,
            }),
            PotentialConfig::Quartic { a, b } => PotentialSpec::new(Quartic {
                dim,
                a: a * factor,
                b: b * factor,
            }),
        }
    }
}

/// `offset + amplitude * sin(wavenumber * pi * s)` with `s` the position
/// scaled to `[0, 1]`. In two dimensions both velocity components use the
/// product of the profile over the two axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialProfile {
    pub offset: f64,
    pub amplitude: f64,
    pub wavenumber: f64,
}

impl InitialProfile {
    pub fn eval(&self, s: f64) -> f64 {
        self.offset + self.amplitude * (self.wavenumber * std::f64::consts::PI * s).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Zero,
    /// Seeded smooth random dual fields of the given amplitude.
    Random {
        amplitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: Family,
    pub grid: SpaceTimeGrid,
    pub k: f64,
    pub c: f64,
    pub nu_hat: f64,
    pub rho0: f64,
    pub margin: Option<f64>,
    pub sign: Sign,
    pub initial: InitialProfile,
    pub expect_singular_l: bool,
    pub potential: PotentialConfig,
    pub ascent: AscentConfig,
    pub seed: u64,
    pub initial_state: InitialState,
    pub output_dir: PathBuf,
    pub snapshot_every: usize,
}

impl RunConfig {
    /// Reads and validates `path`. A relative output directory is taken
    /// relative to the config file.
    pub fn load(path: &Path) -> Result<(Ini, RunConfig)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        let ini = Ini::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = RunConfig::from_ini(&ini, base)?;
        Ok((ini, cfg))
    }

    pub fn from_ini(ini: &Ini, base: &Path) -> Result<RunConfig> {
        if !ini.has_section("grid") {
            return Err(CliError::Invalid("missing section grid".into()));
        }
        let family = match ini.get("problem", "family") {
            Some(s) => s
                .parse::<Family>()
                .map_err(|e| CliError::config(ini.line_of("problem", "family"), e))?,
            None => Family::Heat,
        };

        let default_boundary = match family {
            Family::Burgers | Family::Hj => "periodic",
            _ => "dirichlet",
        };
        let boundary = match ini.get("grid", "boundary").unwrap_or(default_boundary) {
            "dirichlet" => Boundary::Dirichlet,
            "periodic" => Boundary::Periodic,
            other => {
                return Err(CliError::config(
                    ini.line_of("grid", "boundary"),
                    format!("boundary must be dirichlet or periodic, found `{other}`"),
                ))
            }
        };
        let grid = SpaceTimeGrid::new(
            family.space_dim(),
            ini.required_usize("grid", "nx")?,
            ini.required_usize("grid", "nt")?,
            ini.f64_or("grid", "x_min", 0.0)?,
            ini.required_f64("grid", "x_max")?,
            ini.required_f64("grid", "t_max")?,
            boundary,
        )?;

        let (offset, amplitude, wavenumber) = match family {
            Family::Heat => (0.0, 1.0, 1.0),
            Family::Burgers => (0.5, 0.25, 2.0),
            Family::Hj => (0.0, 0.2, 2.0),
            Family::NsDual | Family::NsMixed => (0.0, 0.0, 1.0),
        };
        let initial = InitialProfile {
            offset: ini.f64_or("problem", "initial_offset", offset)?,
            amplitude: ini.f64_or("problem", "initial_amplitude", amplitude)?,
            wavenumber: ini.f64_or("problem", "initial_wavenumber", wavenumber)?,
        };
        let default_margin = match family {
            Family::Burgers => Some(0.5),
            Family::Hj => Some(0.2),
            _ => None,
        };
        let margin = match ini.typed::<f64>("problem", "margin", "a number")? {
            Some(m) if m > 0.0 => Some(m),
            Some(_) => None,
            None => default_margin,
        };
        let sign = match ini.get("problem", "sign") {
            Some(s) => s
                .parse::<Sign>()
                .map_err(|e| CliError::config(ini.line_of("problem", "sign"), e.to_string()))?,
            None => Sign::Upper,
        };
        let expect_singular_l = match ini.get("problem", "expect_singular_l") {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => {
                return Err(CliError::config(
                    ini.line_of("problem", "expect_singular_l"),
                    format!("expected true or false, found `{other}`"),
                ))
            }
        };

        let potential = match ini.get("potential", "kind").unwrap_or("quadratic") {
            "quadratic" => PotentialConfig::Quadratic {
                scale: ini.f64_or("potential", "scale", 1.0)?,
            },
            "quartic" => PotentialConfig::Quartic {
                a: ini.f64_or("potential", "a", 1.0)?,
                b: ini.f64_or("potential", "b", 1.0)?,
            },
            "preset" => {
                let name = ini.get("potential", "preset").unwrap_or("");
                PotentialConfig::preset(name).ok_or_else(|| {
                    CliError::config(
                        ini.line_of("potential", "preset"),
                        format!("unknown potential preset `{name}`"),
                    )
                })?
            }
            other => {
                return Err(CliError::config(
                    ini.line_of("potential", "kind"),
                    format!("potential kind must be quadratic, quartic or preset, found `{other}`"),
                ))
            }
        };

        let defaults = AscentConfig {
            method: Method::Cg,
            ..AscentConfig::default()
        };
        let method = match ini.get("optimizer", "method") {
            Some(s) => s
                .parse::<Method>()
                .map_err(|e| CliError::config(ini.line_of("optimizer", "method"), e.to_string()))?,
            None => defaults.method,
        };
        let ascent = AscentConfig {
            step0: ini.f64_or("optimizer", "step0", defaults.step0)?,
            max_iter: ini.usize_or("optimizer", "max_iter", defaults.max_iter)?,
            grad_tol: ini.f64_or("optimizer", "grad_tol", defaults.grad_tol)?,
            backtrack_factor: ini.f64_or(
                "optimizer",
                "backtrack_factor",
                defaults.backtrack_factor,
            )?,
            max_backtracks: ini.usize_or("optimizer", "max_backtracks", defaults.max_backtracks)?,
            method,
        };
        ascent.validate()?;
        let seed = ini
            .typed::<u64>("optimizer", "seed", "an unsigned integer")?
            .unwrap_or(DEFAULT_SEED);
        let initial_state = match ini.get("optimizer", "initial_state").unwrap_or("zero") {
            "zero" => InitialState::Zero,
            "random" => InitialState::Random {
                amplitude: ini.f64_or("optimizer", "initial_state_amplitude", 0.05)?,
            },
            other => {
                return Err(CliError::config(
                    ini.line_of("optimizer", "initial_state"),
                    format!("initial_state must be zero or random, found `{other}`"),
                ))
            }
        };

        let dir = PathBuf::from(ini.get("output", "dir").unwrap_or("out"));
        let output_dir = if dir.is_absolute() {
            dir
        } else {
            base.join(dir)
        };

        let cfg = RunConfig {
            family,
            grid,
            k: ini.f64_or("problem", "k", 0.1)?,
            c: ini.f64_or(
                "problem",
                "c",
                if family == Family::Burgers { 2.0 } else { 4.0 },
            )?,
            nu_hat: ini.f64_or(
                "problem",
                "nu_hat",
                if family == Family::Hj { 0.05 } else { 0.1 },
            )?,
            rho0: ini.f64_or("problem", "rho0", 1.0)?,
            margin,
            sign,
            initial,
            expect_singular_l,
            potential,
            ascent,
            seed,
            initial_state,
            output_dir,
            snapshot_every: ini.usize_or("output", "snapshot_every", 0)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.family == Family::Burgers {
            let margin = self.margin.unwrap_or(0.0);
            if !(self.c > margin) {
                return Err(CliError::Invalid(format!(
                    "c = {} does not exceed the invertibility margin {margin}: \
                     c - d_x lambda must stay above the margin for the dual to be defined",
                    self.c
                )));
            }
        }
        if self.family == Family::Heat && !(self.k > 0.0) {
            return Err(CliError::Invalid(format!(
                "k must be positive, found {}",
                self.k
            )));
        }
        Ok(())
    }

    pub fn potential_dim(&self) -> usize {
        self.family.potential_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAT: &str = "\
[problem]
family = heat   # the default anyway
k = 0.2

[grid]
nx = 16
nt = 12
x_max = 1.0
t_max = 0.1
";

    #[test]
    fn parses_with_defaults() {
        let ini = Ini::parse(HEAT).unwrap();
        let cfg = RunConfig::from_ini(&ini, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.family, Family::Heat);
        assert_eq!(cfg.k, 0.2);
        assert_eq!(cfg.grid.nx(), 16);
        assert_eq!(cfg.grid.nt(), 12);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.ascent.method, Method::Cg);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/out"));
        assert_eq!(cfg.potential, PotentialConfig::Quadratic { scale: 1.0 });
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = HEAT.replace("k = 0.2", "k = fast");
        let err = Ini::parse(&bad)
            .and_then(|i| RunConfig::from_ini(&i, Path::new(".")))
            .unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "{err}");
        let err = Ini::parse("[grid]\nnx 16\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
        let err = Ini::parse("[grid]\nnx = 16\nnx = 17\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        let err = Ini::parse("[grid]\nspeed = 1\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
    }

    #[test]
    fn missing_grid_section() {
        let ini = Ini::parse("[problem]\nfamily = heat\n").unwrap();
        let err = RunConfig::from_ini(&ini, Path::new(".")).unwrap_err();
        assert_eq!(err.to_string(), "missing section grid");
    }

    #[test]
    fn burgers_c_below_margin() {
        let text =
            "[problem]\nfamily = burgers\nc = 0\n[grid]\nnx = 8\nnt = 8\nx_max = 1\nt_max = 0.1\n";
        let err = RunConfig::from_ini(&Ini::parse(text).unwrap(), Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("invertibility margin"), "{err}");
    }

    #[test]
    fn overrides_resolve_bare_and_qualified_keys() {
        let mut ini = Ini::parse(HEAT).unwrap();
        ini.set("k", "0.3").unwrap();
        ini.set("potential.scale", "2").unwrap();
        assert_eq!(ini.get("problem", "k"), Some("0.3"));
        assert_eq!(ini.get("potential", "scale"), Some("2"));
        assert!(ini.set("nonsense", "1").is_err());
        assert_eq!(
            resolve_param("optimizer.seed").unwrap(),
            ("optimizer", "seed")
        );
    }

    #[test]
    fn presets_and_quartic() {
        let text = format!("{HEAT}[potential]\nkind = preset\npreset = unit-quartic\n");
        let cfg = RunConfig::from_ini(&Ini::parse(&text).unwrap(), Path::new(".")).unwrap();
        assert_eq!(cfg.potential, PotentialConfig::Quartic { a: 1.0, b: 1.0 });
        let text = format!("{HEAT}[potential]\nkind = preset\npreset = nope\n");
        assert!(RunConfig::from_ini(&Ini::parse(&text).unwrap(), Path::new(".")).is_err());
    }
}
