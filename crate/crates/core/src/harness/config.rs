use serde::Deserialize;

use super::scenario::{InitialFamily, KernelChoice, Scenario};
use crate::error::{Error, Result};
use crate::sim::Scheme;

/// Keys accepted in a scenario section (or at top level, where they apply to
/// every section).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Overrides {
    base: Option<String>,
    dim: Option<usize>,
    kernel: Option<String>,
    sign: Option<String>,
    initial: Option<String>,
    mass_amplitude: Option<f64>,
    arctan_slope: Option<f64>,
    affine: Option<Vec<f64>>,
    epsilon: Option<f64>,
    pair_positions: Option<[f64; 2]>,
    pair_masses: Option<[f64; 2]>,
    singleton_position: Option<f64>,
    random_mass_spread: Option<f64>,
    horizon: Option<f64>,
    dt: Option<f64>,
    scheme: Option<String>,
    record_every: Option<usize>,
    collision_floor: Option<f64>,
    sample_interval: Option<f64>,
    levels: Option<Vec<usize>>,
    reference_resolution: Option<usize>,
    mass_tol: Option<f64>,
    envelope_tol: Option<f64>,
    position_tol: Option<f64>,
    separation_tol: Option<f64>,
    cross_tol: Option<f64>,
    picard: Option<bool>,
    w1: Option<bool>,
    bench_sizes: Option<Vec<usize>>,
    bench_repeats: Option<usize>,
    seed: Option<u64>,
}

/// A block of the file: top-level keys (`name == None`) or one section.
struct Block<'a> {
    name: Option<String>,
    first_line: usize,
    text: String,
    lines: Vec<&'a str>,
}

impl Block<'_> {
    /// 1-based file line of `key = ...` inside this block.
    fn line_of(&self, key: &str) -> Option<usize> {
        self.lines
            .iter()
            .position(|l| {
                let t = l.trim_start();
                t.strip_prefix(key)
                    .is_some_and(|rest| rest.trim_start().starts_with('='))
            })
            .map(|i| self.first_line + i)
    }

    fn parse(&self) -> Result<Overrides> {
        toml::from_str(&self.text).map_err(|e| {
            let line = e
                .span()
                .map(|s| self.first_line + line_offset(&self.text, s.start));
            Error::config(line, e.message().to_string())
        })
    }
}

fn split_blocks(text: &str) -> Result<Vec<Block<'_>>> {
    let mut blocks = vec![Block {
        name: None,
        first_line: 1,
        text: String::new(),
        lines: Vec::new(),
    }];
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            let name = t
                .strip_prefix('[')
                .and_then(|r| r.split('#').next())
                .map(str::trim_end)
                .and_then(|r| r.strip_suffix(']'))
                .filter(|n| !n.starts_with('[') && !n.contains('.') && !n.is_empty())
                .ok_or_else(|| {
                    Error::config(
                        Some(i + 1),
                        format!("malformed or nested section header '{t}'"),
                    )
                })?;
            let name = name.trim().trim_matches('"').to_string();
            if blocks.iter().any(|b| b.name.as_deref() == Some(&name)) {
                return Err(Error::config(
                    Some(i + 1),
                    format!("duplicate section [{name}]"),
                ));
            }
            blocks.push(Block {
                name: Some(name),
                first_line: i + 2,
                text: String::new(),
                lines: Vec::new(),
            });
        } else {
            let b = blocks.last_mut().expect("non-empty");
            b.text.push_str(line);
            b.text.push('\n');
            b.lines.push(line);
        }
    }
    Ok(blocks)
}

/// Parses a configuration file into scenarios, one per section. Section
/// names select a built-in scenario unless `base` names one explicitly;
/// top-level keys apply to every section. A file without sections must set
/// `base` at top level.
pub fn parse_config(text: &str) -> Result<Vec<Scenario>> {
    // Whole-document syntax check first, for accurate positions.
    if let Err(e) = text.parse::<toml::Table>() {
        let line = e.span().map(|s| 1 + line_offset(text, s.start));
        return Err(Error::config(line, e.message().to_string()));
    }
    let blocks = split_blocks(text)?;
    let globals = &blocks[0];
    let global = globals.parse()?;
    let sections: Vec<&Block> = if blocks.len() == 1 {
        vec![globals]
    } else {
        blocks[1..].iter().collect()
    };
    sections
        .into_iter()
        .map(|block| {
            let own = if block.name.is_none() {
                Overrides::default()
            } else {
                block.parse()?
            };
            resolve(block, globals, &own, &global)
        })
        .collect()
}

fn resolve(
    block: &Block,
    globals: &Block,
    own: &Overrides,
    global: &Overrides,
) -> Result<Scenario> {
    // Line of a key, preferring the section over the top level.
    let line = |key: &str| block.line_of(key).or_else(|| globals.line_of(key));
    let err = |key: &str, msg: String| Error::config(line(key), msg);
    macro_rules! pick {
        ($field:ident) => {
            own.$field.clone().or_else(|| global.$field.clone())
        };
    }
    let base_name = pick!(base).or_else(|| block.name.clone()).ok_or_else(|| {
        Error::config(
            None,
            "no scenario selected: add a [section] or a top-level `base = \"...\"`",
        )
    })?;
    let mut s = Scenario::builtin(&base_name).ok_or_else(|| {
        err(
            "base",
            format!(
                "unknown scenario '{base_name}' (known: {})",
                super::REGISTRY.join(", ")
            ),
        )
    })?;
    if let Some(name) = &block.name {
        s.name = name.clone();
    }
    if let Some(v) = pick!(dim) {
        s.dim = v;
    }
    if let Some(v) = pick!(kernel) {
        s.kernel = match v.as_str() {
            "linear" => KernelChoice::Linear,
            "saturating" => KernelChoice::Saturating,
            other => {
                return Err(err(
                    "kernel",
                    format!("unknown kernel '{other}' (linear, saturating)"),
                ))
            }
        };
    }
    if let Some(v) = pick!(sign) {
        if v != "projection" {
            return Err(err("sign", format!("unknown sign map '{v}' (projection)")));
        }
    }
    let amplitude = pick!(mass_amplitude);
    if let Some(v) = pick!(initial) {
        let amp = amplitude.unwrap_or(0.5);
        s.initial = match v.as_str() {
            "pair" => InitialFamily::Pair {
                positions: [-1.0, 1.0],
                masses: [1.0, 1.0],
            },
            "singleton" => InitialFamily::Singleton { position: 0.5 },
            "ramp" => InitialFamily::Ramp {
                mass_amplitude: amp,
            },
            "arctan" => InitialFamily::Arctan {
                slope: 4.0,
                mass_amplitude: amp,
            },
            "affine" => InitialFamily::Affine {
                matrix: identity(s.dim),
                epsilon: 0.1,
                mass_amplitude: amp,
            },
            "random" => InitialFamily::Random { mass_spread: 0.5 },
            other => return Err(err("initial", format!("unknown initial family '{other}'"))),
        };
    }
    match &mut s.initial {
        InitialFamily::Pair { positions, masses } => {
            if let Some(v) = pick!(pair_positions) {
                *positions = v;
            }
            if let Some(v) = pick!(pair_masses) {
                *masses = v;
            }
        }
        InitialFamily::Singleton { position } => {
            if let Some(v) = pick!(singleton_position) {
                *position = v;
            }
        }
        InitialFamily::Ramp { mass_amplitude } => {
            if let Some(v) = amplitude {
                *mass_amplitude = v;
            }
        }
        InitialFamily::Arctan {
            slope,
            mass_amplitude,
        } => {
            if let Some(v) = pick!(arctan_slope) {
                *slope = v;
            }
            if let Some(v) = amplitude {
                *mass_amplitude = v;
            }
        }
        InitialFamily::Affine {
            matrix,
            epsilon,
            mass_amplitude,
        } => {
            if let Some(v) = pick!(affine) {
                *matrix = v;
            }
            if let Some(v) = pick!(epsilon) {
                *epsilon = v;
            }
            if let Some(v) = amplitude {
                *mass_amplitude = v;
            }
        }
        InitialFamily::Random { mass_spread } => {
            if let Some(v) = pick!(random_mass_spread) {
                *mass_spread = v;
            }
        }
    }
    if let Some(v) = pick!(horizon) {
        s.horizon = v;
    }
    if let Some(v) = pick!(dt) {
        s.integrator.dt = v;
    }
    if let Some(v) = pick!(scheme) {
        s.integrator.scheme = match v.as_str() {
            "rk4" | "rk4-fixed" => Scheme::Rk4Fixed,
            "euler" => Scheme::Euler,
            other => {
                return Err(err(
                    "scheme",
                    format!("unknown scheme '{other}' (rk4, euler)"),
                ))
            }
        };
    }
    if let Some(v) = pick!(record_every) {
        s.integrator.record_every = v;
    }
    if let Some(v) = pick!(collision_floor) {
        s.integrator.collision_floor = v;
    }
    if let Some(v) = pick!(sample_interval) {
        s.sample_interval = v;
    }
    if let Some(v) = pick!(levels) {
        s.levels = v;
    }
    if let Some(v) = pick!(reference_resolution) {
        s.reference_resolution = v;
    }
    if let Some(v) = pick!(mass_tol) {
        s.tolerances.mass = v;
    }
    if let Some(v) = pick!(envelope_tol) {
        s.tolerances.envelope = v;
    }
    if let Some(v) = pick!(position_tol) {
        s.tolerances.position = v;
    }
    if let Some(v) = pick!(separation_tol) {
        s.tolerances.separation = v;
    }
    if let Some(v) = pick!(cross_tol) {
        s.cross_tolerance = v;
    }
    if let Some(v) = pick!(picard) {
        s.picard = v;
    }
    if let Some(v) = pick!(w1) {
        s.w1 = v;
    }
    if let Some(v) = pick!(bench_sizes) {
        s.bench_sizes = v;
    }
    if let Some(v) = pick!(bench_repeats) {
        s.bench_repeats = v;
    }
    if let Some(v) = pick!(seed) {
        s.seed = v;
    }
    s.validate()
        .map_err(|(keys, msg)| Error::config(keys.iter().find_map(|k| line(k)), msg))?;
    Ok(s)
}

/// Zero-based line of byte `pos`; positions in trailing whitespace map to
/// the last line with content.
fn line_offset(text: &str, pos: usize) -> usize {
    let pos = pos.min(text.trim_end().len());
    text[..pos].matches('\n').count()
}

fn identity(dim: usize) -> Vec<f64> {
    (0..dim * dim)
        .map(|k| if k % (dim + 1) == 0 { 1.0 } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(e: Error) -> Option<usize> {
        match e {
            Error::Config { line, .. } => line,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn sections_override_registry() {
        let text = "seed = 3\n\n[canonical-1d]\nlevels = [8, 16]\nreference_resolution = 64\n\n[fast]\nbase = \"pair-asymmetric\"\nhorizon = 0.5\n";
        let s = parse_config(text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].name, "canonical-1d");
        assert_eq!(s[0].levels, vec![8, 16]);
        assert_eq!(s[0].seed, 3);
        assert_eq!(s[1].name, "fast");
        assert_eq!(s[1].horizon, 0.5);
        assert_eq!(
            s[1].initial,
            InitialFamily::Pair {
                positions: [-1.0, 1.0],
                masses: [1.5, 0.5]
            }
        );
    }

    #[test]
    fn top_level_only() {
        let s = parse_config("base = \"canonical-2d\"\nepsilon = 0.05\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].name, "canonical-2d");
        assert!(parse_config("horizon = 1.0\n").is_err());
    }

    #[test]
    fn diagnostics_carry_lines() {
        assert_eq!(
            line_of(parse_config("[canonical-1d]\nlevels = [8, 16\n").unwrap_err()),
            Some(2)
        );
        assert_eq!(
            line_of(parse_config("[canonical-1d]\n\nbogus = 1\n").unwrap_err()),
            Some(3)
        );
        assert_eq!(
            line_of(parse_config("[canonical-1d]\nhorizon = \"long\"\n").unwrap_err()),
            Some(2)
        );
        assert_eq!(
            line_of(parse_config("[canonical-1d]\nreference_resolution = 100\n").unwrap_err()),
            Some(2)
        );
        assert_eq!(
            line_of(parse_config("[canonical-1d]\nkernel = \"cubic\"\n").unwrap_err()),
            Some(2)
        );
        assert_eq!(
            line_of(parse_config("[mystery]\ndt = 0.1\n").unwrap_err()),
            None
        );
        assert_eq!(
            line_of(parse_config("[canonical-1d.inner]\n").unwrap_err()),
            Some(1)
        );
        assert_eq!(
            line_of(parse_config("[a]\nbase = \"singleton\"\n[a]\n").unwrap_err()),
            Some(3)
        );
    }

    #[test]
    fn family_switch() {
        let text = "[c]\nbase = \"canonical-1d\"\ninitial = \"arctan\"\narctan_slope = 2.0\nmass_amplitude = 0.25\n";
        let s = parse_config(text).unwrap();
        assert_eq!(
            s[0].initial,
            InitialFamily::Arctan {
                slope: 2.0,
                mass_amplitude: 0.25
            }
        );
    }
}
