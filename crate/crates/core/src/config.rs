//! Flat key=value run configuration shared by the CLI and test harnesses.
//!
//! A config file is a sequence of `key = value` lines; `#` starts a comment
//! and blank lines are skipped. Every key is validated when it is set, so a
//! malformed file is rejected before any computation starts, and command-line
//! flags reuse [`RunConfig::set`] so they win by being applied last.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{LabError, Result};
use crate::limitscan::ScheduleKind;
use crate::numberline::{CFExpansion, Filler};
use crate::veech;

/// Digit family driving a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Cf4,
    Cf3,
    Explicit,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Cf4 => "cf4",
            Family::Cf3 => "cf3",
            Family::Explicit => "explicit",
        }
    }
}

impl FromStr for Family {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cf4" => Ok(Family::Cf4),
            "cf3" => Ok(Family::Cf3),
            "explicit" => Ok(Family::Explicit),
            other => Err(LabError::Config {
                detail: format!("unknown family '{other}' (expected cf4, cf3, or explicit)"),
            }),
        }
    }
}

/// Orbit seed selection: a sheet-paired grid or an explicit rational list.
#[derive(Clone, Debug, PartialEq)]
pub enum SeedSpec {
    Grid(usize),
    /// Rational seeds in [0, 1) with a starting sheet each.
    List(Vec<(BigRational, u8)>),
}

impl SeedSpec {
    /// Materialize the seed list in declaration order.
    pub fn resolve(&self) -> Vec<(BigRational, u8)> {
        match self {
            SeedSpec::Grid(n) => veech::grid_seeds(*n),
            SeedSpec::List(list) => list.clone(),
        }
    }
}

impl fmt::Display for SeedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedSpec::Grid(n) => write!(f, "grid:{n}"),
            SeedSpec::List(list) => {
                write!(f, "list:")?;
                for (i, (r, sheet)) in list.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}/{}@{}", r.numer(), r.denom(), sheet)?;
                }
                Ok(())
            }
        }
    }
}

fn parse_seed_entry(entry: &str) -> Result<(BigRational, u8)> {
    let bad = |detail: String| LabError::Config { detail };
    let (frac, sheet_str) = match entry.split_once('@') {
        Some((f, s)) => (f, Some(s)),
        None => (entry, None),
    };
    let sheet: u8 = match sheet_str {
        None => 0,
        Some("0") => 0,
        Some("1") => 1,
        Some(other) => {
            return Err(bad(format!("seed sheet must be 0 or 1, got '{other}'")));
        }
    };
    let (num_str, den_str) = frac.split_once('/').unwrap_or((frac, "1"));
    let numer = BigInt::from_str(num_str.trim())
        .map_err(|_| bad(format!("seed numerator '{num_str}' is not an integer")))?;
    let denom = BigInt::from_str(den_str.trim())
        .map_err(|_| bad(format!("seed denominator '{den_str}' is not an integer")))?;
    if denom.is_zero() {
        return Err(bad(format!("seed '{entry}' has a zero denominator")));
    }
    let r = BigRational::new(numer, denom);
    if r.is_negative() || r >= BigRational::one() {
        return Err(bad(format!("seed '{entry}' must lie in [0, 1)")));
    }
    Ok((r, sheet))
}

impl FromStr for SeedSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("grid:") {
            let n: usize = rest.parse().map_err(|_| LabError::Config {
                detail: format!("grid seed count '{rest}' is not a positive integer"),
            })?;
            if n == 0 {
                return Err(LabError::Config {
                    detail: "grid seed count must be >= 1".into(),
                });
            }
            return Ok(SeedSpec::Grid(n));
        }
        if let Some(rest) = s.strip_prefix("list:") {
            let mut list = Vec::new();
            for entry in rest.split(',') {
                let entry = entry.trim();
                if entry.is_empty() {
                    continue;
                }
                list.push(parse_seed_entry(entry)?);
            }
            if list.is_empty() {
                return Err(LabError::Config {
                    detail: "seed list is empty".into(),
                });
            }
            return Ok(SeedSpec::List(list));
        }
        Err(LabError::Config {
            detail: format!("seeds must be 'grid:<n>' or 'list:<p/q[@sheet],...>', got '{s}'"),
        })
    }
}

fn parse_filler(s: &str) -> Result<Filler> {
    if s == "dexp" {
        return Ok(Filler::DExp);
    }
    if let Some(rest) = s.strip_prefix("const:") {
        let d: u64 = rest.parse().map_err(|_| LabError::Config {
            detail: format!("const filler digit '{rest}' is not a positive integer"),
        })?;
        if d == 0 {
            return Err(LabError::Config {
                detail: "const filler digit must be >= 1".into(),
            });
        }
        return Ok(Filler::Const(d));
    }
    Err(LabError::Config {
        detail: format!("filler must be 'dexp' or 'const:<d>', got '{s}'"),
    })
}

fn filler_str(f: &Filler) -> String {
    match f {
        Filler::DExp => "dexp".into(),
        Filler::Const(d) => format!("const:{d}"),
    }
}

fn parse_schedule(s: &str) -> Result<ScheduleKind> {
    match s {
        "both" => Ok(ScheduleKind::Cf3TwoRegime),
        "tk" => Ok(ScheduleKind::ConvergentTimes),
        "classification" => Ok(ScheduleKind::Cf4Classification),
        "diagnostic" => Ok(ScheduleKind::Cf4Diagnostic),
        other => Err(LabError::Config {
            detail: format!(
                "unknown schedule '{other}' (expected both, tk, classification, or diagnostic)"
            ),
        }),
    }
}

fn schedule_str(k: ScheduleKind) -> &'static str {
    match k {
        ScheduleKind::Cf3TwoRegime => "both",
        ScheduleKind::ConvergentTimes => "tk",
        ScheduleKind::Cf4Classification => "classification",
        ScheduleKind::Cf4Diagnostic => "diagnostic",
    }
}

/// Largest cf3 block index the DExp filler is allowed to reach: the free
/// digit at block k holds 2^k bits, so 24 keeps every convergent under a few
/// megabytes while still dwarfing the growth conditions under test.
const CF3_BLOCK_CAP: usize = 24;

/// One run's worth of knobs, shared by every subcommand.
///
/// Defaults describe the cf4 classification scan; family-dependent defaults
/// (cf3's k range and schedule) are applied by the caller before overrides,
/// see [`RunConfig::family_defaults`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub family: Family,
    /// Explicit-family digit prefix; ignored for cf3/cf4.
    pub digits: Vec<u64>,
    pub filler: Filler,
    pub c: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub n_orbit: u64,
    /// Slit stage for orbit simulation; kept separate from the scan range
    /// because the exact u64 engine caps the usable digit depth.
    pub stage: usize,
    pub seeds: SeedSpec,
    pub out: Option<PathBuf>,
    pub precision_cap: u32,
    pub tol_factor: f64,
    /// Scan schedule; `None` defers to the family default.
    pub schedule: Option<ScheduleKind>,
    pub oversample: usize,
    pub eps: f64,
    pub tail_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: Family::Cf4,
            digits: Vec::new(),
            filler: Filler::DExp,
            c: 1.0,
            k_min: 4,
            k_max: 12,
            n_orbit: 1_000_000,
            stage: 8,
            seeds: SeedSpec::Grid(8),
            out: None,
            precision_cap: 4096,
            tol_factor: 4.0,
            schedule: None,
            oversample: 3,
            eps: 0.05,
            tail_fraction: 0.3,
        }
    }
}

impl RunConfig {
    /// Set one key. Both the file parser and the flag layer funnel through
    /// here so every value gets the same validation.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |detail: String| LabError::Config { detail };
        match key {
            "family" => self.family = value.parse()?,
            "digits" => {
                let mut ds = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    let d: u64 = part
                        .parse()
                        .map_err(|_| bad(format!("digit '{part}' is not a positive integer")))?;
                    if d == 0 {
                        return Err(bad("continued-fraction digits must be >= 1".into()));
                    }
                    ds.push(d);
                }
                if ds.is_empty() {
                    return Err(bad("digit list is empty".into()));
                }
                self.digits = ds;
            }
            "filler" => self.filler = parse_filler(value)?,
            "c" => {
                let c: f64 = value
                    .parse()
                    .map_err(|_| bad(format!("c '{value}' is not a number")))?;
                if !c.is_finite() || !(-1.0..=1.0).contains(&c) {
                    return Err(bad(format!("c must lie in [-1, 1], got {value}")));
                }
                self.c = c;
            }
            "kmin" => {
                self.k_min = value
                    .parse()
                    .map_err(|_| bad(format!("kmin '{value}' is not a positive integer")))?;
            }
            "kmax" => {
                self.k_max = value
                    .parse()
                    .map_err(|_| bad(format!("kmax '{value}' is not a positive integer")))?;
            }
            "n" => {
                self.n_orbit = value
                    .parse()
                    .map_err(|_| bad(format!("n '{value}' is not a non-negative integer")))?;
            }
            "stage" => {
                let s: usize = value
                    .parse()
                    .map_err(|_| bad(format!("stage '{value}' is not a positive integer")))?;
                if s == 0 {
                    return Err(bad("stage must be >= 1".into()));
                }
                self.stage = s;
            }
            "seeds" => self.seeds = value.parse()?,
            "out" => self.out = Some(PathBuf::from(value)),
            "precision_cap" => {
                let p: u32 = value
                    .parse()
                    .map_err(|_| bad(format!("precision_cap '{value}' is not an integer")))?;
                if p < 64 {
                    return Err(bad("precision_cap must be at least 64 bits".into()));
                }
                self.precision_cap = p;
            }
            "tol_factor" => {
                let t: f64 = value
                    .parse()
                    .map_err(|_| bad(format!("tol_factor '{value}' is not a number")))?;
                if !t.is_finite() || t <= 0.0 {
                    return Err(bad("tol_factor must be a positive number".into()));
                }
                self.tol_factor = t;
            }
            "schedule" => self.schedule = Some(parse_schedule(value)?),
            "oversample" => {
                let o: usize = value
                    .parse()
                    .map_err(|_| bad(format!("oversample '{value}' is not an integer")))?;
                if o == 0 {
                    return Err(bad("oversample must be >= 1".into()));
                }
                self.oversample = o;
            }
            "eps" => {
                let e: f64 = value
                    .parse()
                    .map_err(|_| bad(format!("eps '{value}' is not a number")))?;
                if !e.is_finite() || e <= 0.0 || e > 0.5 {
                    return Err(bad("eps must lie in (0, 0.5]".into()));
                }
                self.eps = e;
            }
            "tail_fraction" => {
                let t: f64 = value
                    .parse()
                    .map_err(|_| bad(format!("tail_fraction '{value}' is not a number")))?;
                if !t.is_finite() || t <= 0.0 || t > 1.0 {
                    return Err(bad("tail_fraction must lie in (0, 1]".into()));
                }
                self.tail_fraction = t;
            }
            other => {
                return Err(bad(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Parse a config file body on top of `self`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| LabError::Config {
                detail: format!("line {}: expected 'key = value', got '{line}'", lineno + 1),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                LabError::Config { detail } => LabError::Config {
                    detail: format!("line {}: {detail}", lineno + 1),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Defaults then file contents.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::Config {
            detail: format!("cannot read config file {}: {e}", path.display()),
        })?;
        let mut cfg = RunConfig::default();
        cfg.apply_str(&text)?;
        Ok(cfg)
    }

    /// Family-appropriate k range and schedule for keys the user left alone.
    /// Call between `family` being known and overrides being applied.
    pub fn family_defaults(&mut self) {
        let d = RunConfig::default();
        let (fam_min, fam_max) = match self.family {
            Family::Cf4 => (d.k_min, d.k_max),
            Family::Cf3 => (2, 8),
            Family::Explicit => (1, d.k_max),
        };
        if self.k_min == d.k_min {
            self.k_min = fam_min;
        }
        if self.k_max == d.k_max {
            self.k_max = fam_max;
        }
        // The two-regime schedule interleaves both time families along the
        // whole geodesic; its verdict reads the full window, not a tail.
        if self.family == Family::Cf3 && self.tail_fraction == d.tail_fraction {
            self.tail_fraction = 1.0;
        }
    }

    /// Cross-field validation; every subcommand calls this once after merging.
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| LabError::Config { detail };
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(bad(format!(
                "k range invalid: need 1 <= kmin <= kmax, got {}..={}",
                self.k_min, self.k_max
            )));
        }
        match self.family {
            Family::Explicit => {
                if self.digits.is_empty() {
                    return Err(bad("family explicit requires a digits list".into()));
                }
                if self.k_max > self.digits.len() {
                    return Err(bad(format!(
                        "kmax {} exceeds the {} explicit digits provided",
                        self.k_max,
                        self.digits.len()
                    )));
                }
            }
            Family::Cf3 => {
                if matches!(self.filler, Filler::DExp) && self.k_max + 2 > CF3_BLOCK_CAP {
                    return Err(bad(format!(
                        "cf3 with the dexp filler supports kmax <= {} (block digits double \
                         in bit length per stage)",
                        CF3_BLOCK_CAP - 2
                    )));
                }
            }
            Family::Cf4 => {
                if self.k_max > 64 {
                    return Err(bad("cf4 supports kmax <= 64".into()));
                }
            }
        }
        if let Some(sched) = self.schedule {
            let ok = match sched {
                ScheduleKind::Cf4Classification | ScheduleKind::Cf4Diagnostic => {
                    self.family == Family::Cf4
                }
                ScheduleKind::Cf3TwoRegime => self.family == Family::Cf3,
                ScheduleKind::ConvergentTimes => true,
            };
            if !ok {
                return Err(bad(format!(
                    "schedule '{}' is not defined for family {}",
                    schedule_str(sched),
                    self.family.as_str()
                )));
            }
        }
        Ok(())
    }

    /// Scan schedule after family defaulting.
    pub fn schedule_kind(&self) -> ScheduleKind {
        self.schedule.unwrap_or(match self.family {
            Family::Cf4 => ScheduleKind::Cf4Classification,
            Family::Cf3 => ScheduleKind::Cf3TwoRegime,
            Family::Explicit => ScheduleKind::ConvergentTimes,
        })
    }

    /// Build the digit expansion with enough margin beyond `kmax` that every
    /// stage in range is pinned and the tail ball leaves the strict
    /// Diophantine inequalities decidable at the last checked index.
    pub fn build_expansion(&self) -> Result<CFExpansion> {
        match self.family {
            Family::Cf4 => CFExpansion::family_cf4(self.k_max + 3),
            Family::Cf3 => CFExpansion::family_cf3(self.k_max + 2, &self.filler),
            Family::Explicit => CFExpansion::from_digits_u64(&self.digits, false),
        }
    }

    /// Shorter prefix for exact orbit arithmetic: just enough digits to pin
    /// the stage-`stage` slit, so the surrogate denominator stays small.
    pub fn build_orbit_expansion(&self) -> Result<CFExpansion> {
        match self.family {
            Family::Cf4 => CFExpansion::family_cf4(self.stage + 1),
            Family::Cf3 => CFExpansion::family_cf3(self.stage + 1, &self.filler),
            Family::Explicit => CFExpansion::from_digits_u64(&self.digits, false),
        }
    }

    /// Key=value echo in fixed order; reports embed this so a run can be
    /// reproduced byte for byte.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut kv = vec![("family".into(), self.family.as_str().to_string())];
        if self.family == Family::Explicit {
            let ds: Vec<String> = self.digits.iter().map(|d| d.to_string()).collect();
            kv.push(("digits".into(), ds.join(",")));
        }
        if self.family == Family::Cf3 {
            kv.push(("filler".into(), filler_str(&self.filler)));
        }
        kv.push(("c".into(), format!("{}", self.c)));
        kv.push(("kmin".into(), self.k_min.to_string()));
        kv.push(("kmax".into(), self.k_max.to_string()));
        kv.push(("n".into(), self.n_orbit.to_string()));
        kv.push(("stage".into(), self.stage.to_string()));
        kv.push(("seeds".into(), self.seeds.to_string()));
        if let Some(out) = &self.out {
            kv.push(("out".into(), out.display().to_string()));
        }
        kv.push(("precision_cap".into(), self.precision_cap.to_string()));
        kv.push(("tol_factor".into(), format!("{}", self.tol_factor)));
        kv.push(("schedule".into(), schedule_str(self.schedule_kind()).into()));
        kv.push(("oversample".into(), self.oversample.to_string()));
        kv.push(("eps".into(), format!("{}", self.eps)));
        kv.push(("tail_fraction".into(), format!("{}", self.tail_fraction)));
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.schedule_kind(), ScheduleKind::Cf4Classification);
    }

    #[test]
    fn file_parse_and_override() {
        let mut cfg = RunConfig::default();
        cfg.apply_str(
            "# scan setup\n\
             family = cf3\n\
             filler = const:7\n\
             c = 0.5   # deformation\n\
             kmax = 6\n",
        )
        .unwrap();
        assert_eq!(cfg.family, Family::Cf3);
        assert_eq!(cfg.filler, Filler::Const(7));
        assert_eq!(cfg.c, 0.5);
        assert_eq!(cfg.k_max, 6);
        // Flags win by being applied after the file.
        cfg.set("c", "0.25").unwrap();
        assert_eq!(cfg.c, 0.25);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_str("famly = cf4\n").unwrap_err();
        assert!(matches!(err, LabError::Config { .. }));
        assert!(err.to_string().contains("famly"));
    }

    #[test]
    fn malformed_values_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("c", "2.0").is_err());
        assert!(cfg.set("c", "nan").is_err());
        assert!(cfg.set("eps", "0").is_err());
        assert!(cfg.set("seeds", "grid:0").is_err());
        assert!(cfg.set("seeds", "1/3").is_err());
        assert!(cfg.set("digits", "1,0,1").is_err());
        assert!(cfg.set("schedule", "fast").is_err());
    }

    #[test]
    fn seed_list_parsing() {
        let spec: SeedSpec = "list:1/3, 2/7@1, 0".parse().unwrap();
        match &spec {
            SeedSpec::List(list) => {
                assert_eq!(list.len(), 3);
                assert_eq!(list[0].1, 0);
                assert_eq!(list[1].1, 1);
                assert_eq!(
                    list[1].0,
                    BigRational::new(BigInt::from(2), BigInt::from(7))
                );
            }
            _ => panic!("expected list"),
        }
        assert_eq!(spec.to_string(), "list:1/3@0,2/7@1,0/1@0");
        assert!("list:3/2".parse::<SeedSpec>().is_err());
        assert!("list:1/0".parse::<SeedSpec>().is_err());
    }

    #[test]
    fn family_cross_checks() {
        let mut cfg = RunConfig::default();
        cfg.set("family", "explicit").unwrap();
        assert!(cfg.validate().is_err());
        cfg.set("digits", "1,1,1").unwrap();
        cfg.set("kmax", "2").unwrap();
        cfg.set("kmin", "1").unwrap();
        assert!(cfg.validate().is_ok());
        cfg.set("schedule", "classification").unwrap();
        assert!(cfg.validate().is_err());
        cfg.set("schedule", "tk").unwrap();
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn cf3_defaults_and_caps() {
        let mut cfg = RunConfig::default();
        cfg.set("family", "cf3").unwrap();
        cfg.family_defaults();
        assert_eq!((cfg.k_min, cfg.k_max), (2, 8));
        assert_eq!(cfg.schedule_kind(), ScheduleKind::Cf3TwoRegime);
        cfg.set("kmax", "23").unwrap();
        assert!(cfg.validate().is_err());
        cfg.set("filler", "const:2").unwrap();
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn echo_is_deterministic_and_reparsable() {
        let mut cfg = RunConfig::default();
        cfg.set("family", "cf3").unwrap();
        cfg.family_defaults();
        cfg.set("seeds", "list:1/3@1").unwrap();
        cfg.set("out", "/tmp/run").unwrap();
        let echo = cfg.echo();
        let text: String = echo
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let mut reparsed = RunConfig::default();
        reparsed.apply_str(&text).unwrap();
        // The echo pins the resolved schedule, so the reparse fixes what the
        // original left to the family default; everything else round-trips.
        assert_eq!(reparsed.schedule, Some(ScheduleKind::Cf3TwoRegime));
        assert_eq!(reparsed.seeds, cfg.seeds);
        assert_eq!(reparsed.out, cfg.out);
        assert_eq!((reparsed.k_min, reparsed.k_max), (cfg.k_min, cfg.k_max));
        let e2: String = reparsed
            .echo()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        assert_eq!(text, e2);
    }

    #[test]
    fn expansion_margins_cover_requested_stages() {
        let mut cfg = RunConfig::default();
        cfg.set("kmax", "8").unwrap();
        let cf = cfg.build_expansion().unwrap();
        assert_eq!(cf.len(), 11);
        assert_eq!(cf.n_k(8).unwrap(), 8);

        let mut cfg3 = RunConfig::default();
        cfg3.set("family", "cf3").unwrap();
        cfg3.family_defaults();
        let cf3 = cfg3.build_expansion().unwrap();
        // Stage k+2 digits exist for every k in range.
        assert!(cf3.subsequence().len() >= cfg3.k_max + 2);
    }
}
