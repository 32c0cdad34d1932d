//! Synthetic day series for PV generation, residential load, grid price and
//! grid carbon intensity.
//!
//! Every value is built inside `[0, 1]` and clamped after noise is added, so a
//! noiseless configuration reproduces its closed-form base profile exactly.
//! Noise is Gaussian, drawn with the Box-Muller transform from a seeded
//! `ChaCha8Rng`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::HouseholdScenario;
use crate::error::{Error, Result};
use crate::seed::{self, stream};
use crate::STEPS_PER_DAY;

/// Gaussian sampler using the Box-Muller transform. The second variate of
/// each pair is cached and returned by the next call.
pub struct BoxMuller<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> BoxMuller<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    /// One standard normal variate.
    pub fn standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn sample(&mut self, mean: f64, std: f64) -> f64 {
        if std == 0.0 {
            return mean;
        }
        mean + std * self.standard()
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

fn check_noise(name: &str, mean: f64, std: f64) -> Result<()> {
    if !mean.is_finite() || !std.is_finite() || std < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "{name} noise needs finite mean and std >= 0 (got mean {mean}, std {std})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvConfig {
    pub peak: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
}

impl Default for PvConfig {
    fn default() -> Self {
        Self { peak: 0.6, noise_mean: 0.0, noise_std: 0.1 }
    }
}

impl PvConfig {
    pub fn noiseless(peak: f64) -> Self {
        Self { peak, noise_mean: 0.0, noise_std: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("pv.peak", self.peak)?;
        check_noise("pv", self.noise_mean, self.noise_std)
    }

    /// Noiseless PV at step `t`: rectified half-sine over the day, peaking at
    /// step 12.
    pub fn base(&self, t: usize) -> f64 {
        let hour = (t % STEPS_PER_DAY) as f64;
        self.peak * (PI * hour / STEPS_PER_DAY as f64).sin().max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadProfile {
    Family,
    Teenagers,
    HomeBusiness,
}

impl LoadProfile {
    pub const ALL: [LoadProfile; 3] = [LoadProfile::Family, LoadProfile::Teenagers, LoadProfile::HomeBusiness];

    /// Hourly base shape, each table spanning exactly `[0, 1]`.
    pub fn table(self) -> &'static [f64; STEPS_PER_DAY] {
        match self {
            // Morning peak at 7, evening peak at 19.
            LoadProfile::Family => &[
                0.10, 0.05, 0.00, 0.00, 0.05, 0.25, 0.65, 1.00, 0.70, 0.35, 0.25, 0.25, //
                0.30, 0.25, 0.20, 0.25, 0.40, 0.60, 0.85, 1.00, 0.80, 0.55, 0.35, 0.20,
            ],
            // Late afternoon through night, flat top 16..=23.
            LoadProfile::Teenagers => &[
                0.60, 0.40, 0.20, 0.05, 0.00, 0.00, 0.05, 0.15, 0.20, 0.15, 0.10, 0.15, //
                0.30, 0.30, 0.35, 0.55, 0.90, 0.95, 1.00, 1.00, 0.95, 1.00, 0.95, 0.85,
            ],
            // Working hours 9..=17.
            LoadProfile::HomeBusiness => &[
                0.10, 0.05, 0.00, 0.00, 0.00, 0.05, 0.20, 0.40, 0.65, 0.90, 1.00, 1.00, //
                0.85, 0.95, 1.00, 1.00, 0.95, 0.90, 0.60, 0.45, 0.35, 0.30, 0.20, 0.15,
            ],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LoadProfile::Family => "family",
            LoadProfile::Teenagers => "teenagers",
            LoadProfile::HomeBusiness => "home_business",
        }
    }
}

impl FromStr for LoadProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "family" => Ok(LoadProfile::Family),
            "teenagers" => Ok(LoadProfile::Teenagers),
            "home_business" => Ok(LoadProfile::HomeBusiness),
            other => Err(Error::InvalidConfig(format!("unknown load profile '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadConfig {
    pub profile: LoadProfile,
    pub peak: f64,
    pub constant_fraction: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self { profile: LoadProfile::Family, peak: 0.8, constant_fraction: 0.2, noise_mean: 0.0, noise_std: 0.01 }
    }
}

impl LoadConfig {
    pub fn noiseless(profile: LoadProfile, peak: f64) -> Self {
        Self { profile, peak, noise_std: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("load.peak", self.peak)?;
        check_unit("load.constant_fraction", self.constant_fraction)?;
        check_noise("load", self.noise_mean, self.noise_std)
    }

    /// Noiseless load at step `t`.
    ///
    /// The shipped table is rescaled by `1 - constant_fraction` so the
    /// constant floor plus the profile peaks exactly at `peak`:
    /// `peak * ((1 - cf) * table[h] + cf)`.
    pub fn base(&self, t: usize) -> f64 {
        let shape = self.profile.table()[t % STEPS_PER_DAY];
        let cf = self.constant_fraction;
        self.peak * ((1.0 - cf) * shape + cf)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nuclear_rate: f64,
    pub nuclear_emission: f64,
    pub gas_rate: f64,
    pub gas_emission: f64,
    pub nuclear_ratio: f64,
    pub gas_profile: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nuclear_rate: 0.3,
            nuclear_emission: 0.05,
            gas_rate: 0.9,
            gas_emission: 0.9,
            nuclear_ratio: 0.4,
            gas_profile: default_gas_profile().to_vec(),
        }
    }
}

/// Trapezoid: 0.2 overnight, ramp to 0.8 over steps 6..=10, flat until 20,
/// then back down towards 0.2 at midnight.
pub fn default_gas_profile() -> [f64; STEPS_PER_DAY] {
    let mut p = [0.0; STEPS_PER_DAY];
    for (h, v) in p.iter_mut().enumerate() {
        *v = match h {
            0..=5 => 0.2,
            6..=10 => 0.2 + 0.15 * (h - 6) as f64,
            11..=20 => 0.8,
            _ => 0.8 - 0.15 * (h - 20) as f64,
        };
    }
    p
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit("grid.nuclear_rate", self.nuclear_rate)?;
        check_unit("grid.nuclear_emission", self.nuclear_emission)?;
        check_unit("grid.gas_rate", self.gas_rate)?;
        check_unit("grid.gas_emission", self.gas_emission)?;
        check_unit("grid.nuclear_ratio", self.nuclear_ratio)?;
        if self.gas_profile.len() != STEPS_PER_DAY {
            return Err(Error::InvalidConfig(format!(
                "grid.gas_profile needs {STEPS_PER_DAY} entries, got {}",
                self.gas_profile.len()
            )));
        }
        for (h, &g) in self.gas_profile.iter().enumerate() {
            check_unit("grid.gas_profile", g)?;
            if self.nuclear_ratio + g <= 0.0 {
                return Err(Error::InvalidConfig(format!("zero total generation at hour {h}")));
            }
        }
        Ok(())
    }

    /// Nuclear share of total generation at step `t`.
    pub fn nuclear_share(&self, t: usize) -> f64 {
        let gas = self.gas_profile[t % STEPS_PER_DAY];
        self.nuclear_ratio / (self.nuclear_ratio + gas)
    }
}

pub fn generate_pv<R: Rng>(cfg: &PvConfig, steps: usize, rng: R) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_steps(steps)?;
    let mut noise = BoxMuller::new(rng);
    Ok((0..steps).map(|t| (cfg.base(t) + noise.sample(cfg.noise_mean, cfg.noise_std)).clamp(0.0, 1.0)).collect())
}

pub fn generate_load<R: Rng>(cfg: &LoadConfig, steps: usize, rng: R) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_steps(steps)?;
    let mut noise = BoxMuller::new(rng);
    Ok((0..steps).map(|t| (cfg.base(t) + noise.sample(cfg.noise_mean, cfg.noise_std)).clamp(0.0, 1.0)).collect())
}

/// Price and carbon intensity of the nuclear/gas mix. Both are convex
/// combinations of unit-range values, so no rescaling is needed.
pub fn generate_grid(cfg: &GridConfig, steps: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    check_steps(steps)?;
    let (price, carbon) = (0..steps)
        .map(|t| {
            let s = cfg.nuclear_share(t);
            (s * cfg.nuclear_rate + (1.0 - s) * cfg.gas_rate, s * cfg.nuclear_emission + (1.0 - s) * cfg.gas_emission)
        })
        .unzip();
    Ok((price, carbon))
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    Ok(())
}

/// One household's view of a generated horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayData {
    pub pv: Vec<f64>,
    pub load: Vec<f64>,
    pub price: Vec<f64>,
    pub carbon: Vec<f64>,
}

/// CSV header for [`DayData::to_csv`].
pub const DAY_CSV_HEADER: &str = "t,pv,load,price,carbon";

impl DayData {
    pub fn new(pv: Vec<f64>, load: Vec<f64>, price: Vec<f64>, carbon: Vec<f64>) -> Result<Self> {
        let day = Self { pv, load, price, carbon };
        day.validate()?;
        Ok(day)
    }

    pub fn len(&self) -> usize {
        self.pv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pv.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.pv.len();
        if n == 0 || self.load.len() != n || self.price.len() != n || self.carbon.len() != n {
            return Err(Error::InvalidArgument(format!(
                "day series must be non-empty and aligned (pv {}, load {}, price {}, carbon {})",
                n,
                self.load.len(),
                self.price.len(),
                self.carbon.len()
            )));
        }
        let all = self.pv.iter().chain(&self.load).chain(&self.price).chain(&self.carbon);
        if let Some(v) = all.copied().find(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!("day value {v} outside [0, 1]")));
        }
        Ok(())
    }

    /// Identifies a realization; two reports can only be compared when their
    /// fingerprints agree.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.pv.iter().chain(&self.load).chain(&self.price).chain(&self.carbon) {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(40 * (self.len() + 1));
        out.push_str(DAY_CSV_HEADER);
        out.push('\n');
        for t in 0..self.len() {
            let _ =
                writeln!(out, "{t},{:.6},{:.6},{:.6},{:.6}", self.pv[t], self.load[t], self.price[t], self.carbon[t]);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == DAY_CSV_HEADER => {}
            other => return Err(Error::Parse(format!("expected header '{DAY_CSV_HEADER}', got {other:?}"))),
        }
        let (mut pv, mut load, mut price, mut carbon) = (vec![], vec![], vec![], vec![]);
        for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!("row {row}: expected 5 fields")));
            }
            let t: usize = fields[0].trim().parse().map_err(|_| Error::Parse(format!("row {row}: bad t")))?;
            if t != row {
                return Err(Error::Parse(format!("row {row}: out-of-order step {t}")));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i].trim().parse().map_err(|_| Error::Parse(format!("row {row}: bad number '{}'", fields[i])))
            };
            pv.push(num(1)?);
            load.push(num(2)?);
            price.push(num(3)?);
            carbon.push(num(4)?);
        }
        DayData::new(pv, load, price, carbon)
    }
}

/// Composes the three generators for one household. Identical inputs give
/// bit-identical output; PV and load noise come from separate streams
/// derived from `seed`.
pub fn generate_day(scenario: &HouseholdScenario, grid: &GridConfig, steps: usize, seed: u64) -> Result<DayData> {
    let pv = generate_pv(&scenario.pv, steps, seed::rng(seed::derive(seed, &[stream::PV])))?;
    let load = generate_load(&scenario.load, steps, seed::rng(seed::derive(seed, &[stream::LOAD])))?;
    let (price, carbon) = generate_grid(grid, steps)?;
    Ok(DayData { pv, load, price, carbon })
}
