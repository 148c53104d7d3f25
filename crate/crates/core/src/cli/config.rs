//! Experiment configuration: a plain `key = value` file merged with
//! command-line overrides (flags win), then validated and defaulted.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use crate::error::{Error, Result};
use crate::field::GridShape;
use crate::io::{peek_image_shape, PhantomKind, PhantomSpec};
use crate::operator::MaskSpec;
use crate::spectral::{SpectralMode, DENSE_MAX_PIXELS, POWER_DEFAULT_ITERS};

/// Flags shared by every subcommand. Each maps onto a config-file key of the
/// same name (dashes become underscores).
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Config file with `key = value` lines
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// synthetic-real | file-real | synthetic-complex
    #[arg(long, value_name = "KIND")]
    pub phantom: Option<String>,
    /// Graymap for file-real, or magnitude source for synthetic-complex
    #[arg(long, value_name = "PATH")]
    pub image: Option<PathBuf>,
    /// Grid size, e.g. 32x32
    #[arg(long, value_name = "N1xN2")]
    pub size: Option<String>,
    /// One shift (real phantoms) or two (complex phantoms)
    #[arg(long, value_name = "d1[,d2]", allow_hyphen_values = true)]
    pub shifts: Option<String>,
    #[arg(long, value_name = "LIST")]
    pub beta: Option<String>,
    /// SNR levels in dB; omit for noiseless data
    #[arg(long, value_name = "LIST")]
    pub snr: Option<String>,
    /// Phase shifts for the shift sweep
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    pub dshift: Option<String>,
    #[arg(long, value_name = "N")]
    pub iters: Option<String>,
    /// Relative-error stopping threshold (inf disables early stopping)
    #[arg(long, value_name = "X")]
    pub tol: Option<String>,
    /// Noise seeds
    #[arg(long, value_name = "LIST")]
    pub seeds: Option<String>,
    /// Seed for the random phase of complex phantoms
    #[arg(long, value_name = "N")]
    pub phantom_seed: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Spectral analysis by dense SVD (grids up to 8x8)
    #[arg(long, conflicts_with = "power")]
    pub dense: bool,
    /// Spectral analysis by deflated power iteration
    #[arg(long)]
    pub power: bool,
    #[arg(long, value_name = "N")]
    pub power_iters: Option<String>,
}

const KEYS: &[&str] = &[
    "phantom",
    "image",
    "size",
    "shifts",
    "beta",
    "snr",
    "dshift",
    "iters",
    "tol",
    "seeds",
    "phantom_seed",
    "out",
    "mode",
    "power_iters",
];

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "line {}: unknown key '{key}'",
                lineno + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub phantom: PhantomKind,
    pub size: GridShape,
    pub phantom_seed: u64,
    pub shifts: Vec<f64>,
    pub betas: Vec<f64>,
    /// Empty means noiseless.
    pub snrs: Vec<f64>,
    pub dshifts: Vec<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub spectral: SpectralMode,
}

impl ExperimentConfig {
    pub fn resolve(flags: &Overrides) -> Result<Self> {
        let mut map = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let mut set = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(key.to_string(), v);
            }
        };
        set("phantom", flags.phantom.clone());
        set(
            "image",
            flags.image.as_ref().map(|p| p.display().to_string()),
        );
        set("size", flags.size.clone());
        set("shifts", flags.shifts.clone());
        set("beta", flags.beta.clone());
        set("snr", flags.snr.clone());
        set("dshift", flags.dshift.clone());
        set("iters", flags.iters.clone());
        set("tol", flags.tol.clone());
        set("seeds", flags.seeds.clone());
        set("phantom_seed", flags.phantom_seed.clone());
        set("out", flags.out.as_ref().map(|p| p.display().to_string()));
        set("power_iters", flags.power_iters.clone());
        if flags.dense {
            set("mode", Some("dense".into()));
        }
        if flags.power {
            set("mode", Some("power".into()));
        }
        Self::from_map(&map)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);

        let image = get("image").map(PathBuf::from);
        let phantom = match get("phantom").unwrap_or("synthetic-real") {
            "synthetic-real" => PhantomKind::SyntheticReal,
            "file-real" => PhantomKind::FileReal(image.clone().ok_or_else(|| {
                Error::InvalidConfig("phantom file-real needs an image path".into())
            })?),
            "synthetic-complex" => PhantomKind::SyntheticComplex {
                magnitude: image.clone(),
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown phantom kind '{other}' (synthetic-real, file-real, synthetic-complex)"
                )))
            }
        };
        let complex = phantom.is_complex();

        let size = match (get("size"), &image) {
            (Some(s), _) => parse_size(s)?,
            (None, Some(p)) if !matches!(phantom, PhantomKind::SyntheticReal) => {
                peek_image_shape(p)?
            }
            _ => GridShape::new(32, 32)?,
        };

        let shifts = match get("shifts") {
            Some(s) => parse_list::<f64>("shifts", s)?,
            None if complex => vec![3.0, -3.0],
            None => vec![3.0],
        };
        MaskSpec::new(shifts.clone())?;
        if shifts.len() == 1 && complex {
            return Err(Error::InvalidConfig(
                "one-pattern case requires a real phantom (real-line constraint); \
                 complex phantoms need two phase shifts (two-pattern case, full-complex constraint)"
                    .into(),
            ));
        }

        let betas = match get("beta") {
            Some(s) => parse_list::<f64>("beta", s)?,
            None if complex => vec![0.9],
            None => vec![0.8],
        };
        if let Some(b) = betas.iter().find(|b| !(0.5..=1.0).contains(*b)) {
            return Err(Error::InvalidConfig(format!("beta {b} outside [0.5, 1]")));
        }

        let snrs = match get("snr") {
            Some(s) if !s.trim().is_empty() && s.trim() != "none" => parse_list::<f64>("snr", s)?,
            _ => Vec::new(),
        };
        if let Some(s) = snrs.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("snr {s} must be finite")));
        }

        let dshifts = match get("dshift") {
            Some(s) => parse_list::<f64>("dshift", s)?,
            None => vec![1.0, 2.0, 3.0, 4.0, 6.0],
        };
        if dshifts
            .iter()
            .any(|d| !d.is_finite() || (shifts.len() == 2 && *d == 0.0))
        {
            return Err(Error::InvalidConfig(
                "dshift values must be finite (and nonzero for two-pattern sweeps)".into(),
            ));
        }

        let max_iter = match get("iters") {
            Some(s) => parse_one::<usize>("iters", s)?,
            None if complex => 300,
            None => 150,
        };
        if max_iter == 0 {
            return Err(Error::InvalidConfig("iters must be at least 1".into()));
        }

        let tol = match get("tol") {
            Some(s) => parse_one::<f64>("tol", s)?,
            None => f64::INFINITY,
        };
        if tol.is_nan() || tol < 0.0 {
            return Err(Error::InvalidConfig(format!("tol {tol} must be >= 0")));
        }

        let seeds = match get("seeds") {
            Some(s) => parse_list::<u64>("seeds", s)?,
            None => vec![1, 2, 3, 4, 5],
        };
        let phantom_seed = match get("phantom_seed") {
            Some(s) => parse_one::<u64>("phantom_seed", s)?,
            None => 7,
        };
        let out = PathBuf::from(get("out").unwrap_or("out"));

        let power_iters = match get("power_iters") {
            Some(s) => parse_one::<usize>("power_iters", s)?,
            None => POWER_DEFAULT_ITERS,
        };
        let power = SpectralMode::Power {
            iters: power_iters,
            seed: phantom_seed,
        };
        let spectral = match get("mode") {
            Some("dense") => {
                if size.spatial_len() > DENSE_MAX_PIXELS {
                    return Err(Error::InvalidConfig(format!(
                        "dense spectral mode supports grids up to 8x8, got {size}"
                    )));
                }
                SpectralMode::Dense
            }
            Some("power") => power,
            Some(other) => return Err(Error::InvalidConfig(format!("unknown mode '{other}'"))),
            None if size.spatial_len() <= DENSE_MAX_PIXELS => SpectralMode::Dense,
            None => power,
        };

        Ok(ExperimentConfig {
            phantom,
            size,
            phantom_seed,
            shifts,
            betas,
            snrs,
            dshifts,
            max_iter,
            tol,
            seeds,
            out,
            spectral,
        })
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        PhantomSpec {
            kind: self.phantom.clone(),
            shape: self.size,
            seed: self.phantom_seed,
        }
    }

    /// Effective configuration in the config-file format.
    pub fn to_key_value(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let (phantom, image) = match &self.phantom {
            PhantomKind::SyntheticReal => ("synthetic-real", None),
            PhantomKind::FileReal(p) => ("file-real", Some(p)),
            PhantomKind::SyntheticComplex { magnitude } => {
                ("synthetic-complex", magnitude.as_ref())
            }
        };
        let mut s = format!("phantom = {phantom}\n");
        if let Some(p) = image {
            s.push_str(&format!("image = {}\n", p.display()));
        }
        s.push_str(&format!("size = {}\n", self.size));
        s.push_str(&format!("shifts = {}\n", join(&self.shifts)));
        s.push_str(&format!("beta = {}\n", join(&self.betas)));
        s.push_str(&format!(
            "snr = {}\n",
            if self.snrs.is_empty() {
                "none".to_string()
            } else {
                join(&self.snrs)
            }
        ));
        s.push_str(&format!("dshift = {}\n", join(&self.dshifts)));
        s.push_str(&format!("iters = {}\n", self.max_iter));
        s.push_str(&format!("tol = {}\n", self.tol));
        s.push_str(&format!(
            "seeds = {}\n",
            self.seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ));
        s.push_str(&format!("phantom_seed = {}\n", self.phantom_seed));
        s.push_str(&format!("out = {}\n", self.out.display()));
        match self.spectral {
            SpectralMode::Dense => s.push_str("mode = dense\n"),
            SpectralMode::Power { iters, .. } => {
                s.push_str(&format!("mode = power\npower_iters = {iters}\n"))
            }
        }
        s
    }
}

fn parse_one<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{s}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    let items = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_one(key, t))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::InvalidConfig(format!("{key}: empty list")));
    }
    Ok(items)
}

fn parse_size(s: &str) -> Result<GridShape> {
    let (a, b) = match s.split_once(['x', 'X']) {
        Some((a, b)) => (a, b),
        None => (s, s),
    };
    GridShape::new(parse_one("size", a)?, parse_one("size", b)?)
}

pub(crate) fn write_effective(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    crate::io::write_file(dir.join("config.txt"), config.to_key_value().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults_follow_case() {
        let real = ExperimentConfig::from_map(&map(&[])).unwrap();
        assert_eq!(
            (real.betas.clone(), real.max_iter, real.shifts.clone()),
            (vec![0.8], 150, vec![3.0])
        );
        assert!(real.snrs.is_empty());
        assert_eq!(real.spectral.name(), "power");
        let cx = ExperimentConfig::from_map(&map(&[("phantom", "synthetic-complex")])).unwrap();
        assert_eq!(
            (cx.betas.clone(), cx.max_iter, cx.shifts.clone()),
            (vec![0.9], 300, vec![3.0, -3.0])
        );
    }

    #[test]
    fn contradictory_case_rejected() {
        let err =
            ExperimentConfig::from_map(&map(&[("phantom", "synthetic-complex"), ("shifts", "3")]))
                .unwrap_err();
        assert!(err
            .to_string()
            .contains("one-pattern case requires a real phantom"));
    }

    #[test]
    fn parses_file_text() {
        let m = parse_config_text("# comment\nsize = 8x6\nbeta=0.8, 0.9 # trailing\n\n").unwrap();
        let cfg = ExperimentConfig::from_map(&m).unwrap();
        assert_eq!(cfg.size, GridShape::new(8, 6).unwrap());
        assert_eq!(cfg.betas, vec![0.8, 0.9]);
        assert!(parse_config_text("bogus = 1").is_err());
        assert!(parse_config_text("no equals sign").is_err());
    }

    #[test]
    fn validation_errors() {
        for bad in [
            &[("beta", "0.3")][..],
            &[("iters", "0")],
            &[("tol", "-1")],
            &[("shifts", "3,3")],
            &[("size", "1x4")],
            &[("size", "16"), ("mode", "dense")],
            &[("phantom", "file-real")],
            &[("phantom", "colour")],
        ] {
            assert!(ExperimentConfig::from_map(&map(bad)).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn infinite_tol_and_echo_round_trip() {
        let cfg =
            ExperimentConfig::from_map(&map(&[("tol", "inf"), ("snr", "30,40"), ("size", "4")]))
                .unwrap();
        assert!(cfg.tol.is_infinite());
        assert_eq!(cfg.spectral, SpectralMode::Dense);
        let again =
            ExperimentConfig::from_map(&parse_config_text(&cfg.to_key_value()).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
