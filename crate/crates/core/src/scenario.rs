//! System configuration, seeded channel generation and the JSON scenario
//! format.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`. Uniforms use the top 53 bits of each `u64`; circular
//! complex Gaussians with unit variance use Box–Muller on two uniforms
//! `(u₁, u₂)`: `√(−ln(1−u₁)) · e^{i2πu₂}`. Channel entries are drawn group by
//! group, user by user, antenna by antenna. For pathloss channels all
//! distances are drawn first in the same user order.

use std::f64::consts::PI;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::hstack;
use crate::numerics::{CMat, CVec, C64};

/// Inner radius of the annulus users are dropped in (cell edge at 1).
pub const MIN_DISTANCE: f64 = 0.1;
/// Cell-edge average SNR of a single antenna at unit power, in dB.
pub const EDGE_SNR_DB: f64 = -5.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n: usize,
    /// Users per group.
    pub k: Vec<usize>,
    /// Linear SINR targets, grouped like the users.
    pub gamma: Vec<Vec<f64>>,
    pub sigma2: f64,
    /// Power budget (max-min-fair problems only).
    pub p: f64,
}

impl SystemConfig {
    /// `G` groups of `K` users, common target `gamma_db`.
    pub fn uniform(g: usize, k: usize, n: usize, gamma_db: f64) -> Self {
        Self {
            n,
            k: vec![k; g],
            gamma: vec![vec![db_to_linear(gamma_db); k]; g],
            sigma2: 1.0,
            p: 10.0,
        }
    }

    pub fn groups(&self) -> usize {
        self.k.len()
    }

    pub fn k_tot(&self) -> usize {
        self.k.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.k.is_empty() {
            return bad("at least one group is required");
        }
        if self.k.contains(&0) {
            return bad("every group needs at least one user");
        }
        if self.n == 0 {
            return bad("at least one antenna is required");
        }
        if self.gamma.len() != self.k.len()
            || self.gamma.iter().zip(&self.k).any(|(g, &k)| g.len() != k)
        {
            return bad("SINR targets do not match the group sizes");
        }
        if self.gamma.iter().flatten().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return bad("SINR targets must be positive");
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return bad("noise power must be positive");
        }
        if !(self.p > 0.0) || !self.p.is_finite() {
            return bad("power budget must be positive");
        }
        Ok(())
    }

    /// Common target when all targets are equal.
    pub fn common_gamma(&self) -> Option<f64> {
        let first = self.gamma[0][0];
        self.gamma
            .iter()
            .flatten()
            .all(|&g| g == first)
            .then_some(first)
    }

    /// Same configuration with targets multiplied by `t`.
    pub fn with_scaled_targets(&self, t: f64) -> Self {
        let mut c = self.clone();
        for g in c.gamma.iter_mut().flatten() {
            *g *= t;
        }
        c
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::uniform(3, 5, 100, 10.0)
    }
}

/// Per-group channel matrices (`h_ik` as columns) and large-scale variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<CMat>,
    pub beta: Vec<Vec<f64>>,
}

impl ChannelSet {
    pub fn new(h: Vec<CMat>, beta: Vec<Vec<f64>>) -> Result<Self> {
        let cs = Self { h, beta };
        cs.validate()?;
        Ok(cs)
    }

    fn validate(&self) -> Result<()> {
        if self.h.is_empty() {
            return Err(Error::InvalidConfig("channel set has no groups".into()));
        }
        let n = self.h[0].nrows();
        if self.h.len() != self.beta.len() {
            return Err(Error::DimensionMismatch("channel groups vs beta groups".into()));
        }
        for (i, (h, b)) in self.h.iter().zip(&self.beta).enumerate() {
            if h.nrows() != n || h.ncols() != b.len() || h.ncols() == 0 {
                return Err(Error::DimensionMismatch(format!("group {i} channel shape")));
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidConfig(format!("group {i} has non-finite channels")));
            }
            if b.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::InvalidConfig(format!("group {i} has nonpositive beta")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.h[0].nrows()
    }

    pub fn groups(&self) -> usize {
        self.h.len()
    }

    pub fn k(&self) -> Vec<usize> {
        self.h.iter().map(|h| h.ncols()).collect()
    }

    pub fn k_tot(&self) -> usize {
        self.h.iter().map(|h| h.ncols()).sum()
    }

    pub fn user(&self, i: usize, k: usize) -> CVec {
        self.h[i].column(k).into_owned()
    }

    /// All channels side by side, `N × K_tot`, group-major.
    pub fn stacked(&self) -> CMat {
        let refs: Vec<&CMat> = self.h.iter().collect();
        hstack(&refs)
    }

    /// `(group, user)` pairs in storage order.
    pub fn users(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.h
            .iter()
            .enumerate()
            .flat_map(|(i, h)| (0..h.ncols()).map(move |k| (i, k)))
    }

    /// Check that the shapes agree with `cfg`.
    pub fn check(&self, cfg: &SystemConfig) -> Result<()> {
        if self.n() != cfg.n || self.k() != cfg.k {
            return Err(Error::DimensionMismatch(format!(
                "channels are N={} K={:?}, configuration N={} K={:?}",
                self.n(),
                self.k(),
                cfg.n,
                cfg.k
            )));
        }
        Ok(())
    }
}

/// Seeded source of the uniforms and Gaussians documented at module level.
pub struct ChannelRng(ChaCha20Rng);

impl ChannelRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Circular complex Gaussian with `E|z|² = 1`.
    pub fn complex_gaussian(&mut self) -> C64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-(1.0 - u1).ln()).sqrt();
        C64::from_polar(r, 2.0 * PI * u2)
    }
}

/// I.i.d. `CN(0, 1)` channels (`β = 1` for all users).
pub fn gen_normalized_channels(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    let mut rng = ChannelRng::new(seed);
    let h = cfg
        .k
        .iter()
        .map(|&k| gaussian_matrix(&mut rng, cfg.n, k))
        .collect();
    let beta = cfg.k.iter().map(|&k| vec![1.0; k]).collect();
    ChannelSet::new(h, beta)
}

/// Pathloss channels `h = √β g` with `β = ξ d⁻³`; users uniform in area over
/// the annulus `d ∈ [0.1, 1]` and `ξ` set so that `β/σ² = −5 dB` at `d = 1`.
pub fn gen_pathloss_channels(cfg: &SystemConfig, seed: u64) -> Result<(ChannelSet, Vec<Vec<f64>>)> {
    cfg.validate()?;
    let mut rng = ChannelRng::new(seed);
    let xi = pathloss_constant(cfg.sigma2);
    let d0 = MIN_DISTANCE * MIN_DISTANCE;
    let distances: Vec<Vec<f64>> = cfg
        .k
        .iter()
        .map(|&k| {
            (0..k)
                .map(|_| (d0 + rng.uniform() * (1.0 - d0)).sqrt())
                .collect()
        })
        .collect();
    let beta: Vec<Vec<f64>> = distances
        .iter()
        .map(|ds| ds.iter().map(|d| xi * d.powi(-3)).collect())
        .collect();
    let h = cfg
        .k
        .iter()
        .zip(&beta)
        .map(|(&k, b)| {
            let mut g = gaussian_matrix(&mut rng, cfg.n, k);
            for (c, bk) in b.iter().enumerate() {
                g.column_mut(c).scale_mut(bk.sqrt());
            }
            g
        })
        .collect();
    Ok((ChannelSet::new(h, beta)?, distances))
}

/// `ξ` with `ξ / σ² = 10^{−0.5}`.
pub fn pathloss_constant(sigma2: f64) -> f64 {
    sigma2 * db_to_linear(EDGE_SNR_DB)
}

fn gaussian_matrix(rng: &mut ChannelRng, n: usize, k: usize) -> CMat {
    let mut m = CMat::zeros(n, k);
    for c in 0..k {
        for r in 0..n {
            m[(r, c)] = rng.complex_gaussian();
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    #[default]
    Normalized,
    Pathloss,
}

/// SINR targets as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaDb {
    Common(f64),
    PerUser(Vec<f64>),
    Grouped(Vec<Vec<f64>>),
}

impl GammaDb {
    fn to_linear(&self, k: &[usize]) -> Result<Vec<Vec<f64>>> {
        match self {
            GammaDb::Common(db) => Ok(k.iter().map(|&n| vec![db_to_linear(*db); n]).collect()),
            GammaDb::PerUser(v) => {
                if v.len() != k.iter().sum::<usize>() {
                    return Err(Error::InvalidConfig(format!(
                        "gamma_db lists {} values for {} users",
                        v.len(),
                        k.iter().sum::<usize>()
                    )));
                }
                let mut it = v.iter();
                Ok(k.iter()
                    .map(|&n| it.by_ref().take(n).map(|d| db_to_linear(*d)).collect())
                    .collect())
            }
            GammaDb::Grouped(v) => {
                if v.len() != k.len() || v.iter().zip(k).any(|(g, &n)| g.len() != n) {
                    return Err(Error::InvalidConfig("gamma_db groups do not match K".into()));
                }
                Ok(v.iter()
                    .map(|g| g.iter().map(|d| db_to_linear(*d)).collect())
                    .collect())
            }
        }
    }
}

/// Channels as stored in a scenario file: per group, per user, antenna
/// entries interleaved `[re₀, im₀, re₁, im₁, …]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelsFile {
    #[serde(rename = "H")]
    pub h: Vec<Vec<Vec<f64>>>,
    pub beta: Vec<Vec<f64>>,
}

impl ChannelsFile {
    pub fn from_channels(ch: &ChannelSet) -> Self {
        let h = ch
            .h
            .iter()
            .map(|m| {
                (0..m.ncols())
                    .map(|c| interleave(&m.column(c).into_owned()))
                    .collect()
            })
            .collect();
        Self {
            h,
            beta: ch.beta.clone(),
        }
    }

    pub fn to_channels(&self) -> Result<ChannelSet> {
        let mut mats = Vec::with_capacity(self.h.len());
        for (i, group) in self.h.iter().enumerate() {
            let n = group.first().map_or(0, |u| u.len() / 2);
            let mut m = CMat::zeros(n, group.len());
            for (c, user) in group.iter().enumerate() {
                if user.len() != 2 * n {
                    return Err(Error::InvalidConfig(format!(
                        "group {i} user {c}: expected {} interleaved values, got {}",
                        2 * n,
                        user.len()
                    )));
                }
                m.set_column(c, &deinterleave(user));
            }
            mats.push(m);
        }
        ChannelSet::new(mats, self.beta.clone())
    }
}

pub fn interleave(v: &CVec) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn deinterleave(x: &[f64]) -> CVec {
    CVec::from_iterator(x.len() / 2, x.chunks(2).map(|p| C64::new(p[0], p[1])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(rename = "G")]
    pub g: usize,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    #[serde(rename = "N")]
    pub n: usize,
    pub gamma_db: GammaDb,
    pub sigma2: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub channel_model: ChannelModel,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<ChannelsFile>,
}

/// A configuration plus either explicit channels or the recipe to generate
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub config: SystemConfig,
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        if file.g != file.k.len() {
            return Err(Error::InvalidConfig(format!(
                "G = {} but K lists {} groups",
                file.g,
                file.k.len()
            )));
        }
        let config = SystemConfig {
            n: file.n,
            k: file.k.clone(),
            gamma: file.gamma_db.to_linear(&file.k)?,
            sigma2: file.sigma2,
            p: file.p,
        };
        config.validate()?;
        if let Some(ch) = &file.channels {
            ch.to_channels()?.check(&config)?;
        }
        Ok(Self { file, config })
    }

    /// Default desk-scale scenario: G = 3, K = 5, γ = 10 dB, σ² = 1,
    /// P/σ² = 10 dB, normalized channels.
    pub fn default_with(n: usize, seed: u64) -> Self {
        Self::from_file(ScenarioFile {
            g: 3,
            k: vec![5; 3],
            n,
            gamma_db: GammaDb::Common(10.0),
            sigma2: 1.0,
            p: 10.0,
            channel_model: ChannelModel::Normalized,
            seed,
            channels: None,
        })
        .expect("default scenario is valid")
    }

    /// Explicit channels when present, otherwise channels generated from
    /// `seed` (overriding the file's seed).
    pub fn channels_with_seed(&self, seed: u64) -> Result<ChannelSet> {
        if let Some(ch) = &self.file.channels {
            return ch.to_channels();
        }
        match self.file.channel_model {
            ChannelModel::Normalized => gen_normalized_channels(&self.config, seed),
            ChannelModel::Pathloss => Ok(gen_pathloss_channels(&self.config, seed)?.0),
        }
    }

    pub fn channels(&self) -> Result<ChannelSet> {
        self.channels_with_seed(self.file.seed)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("scenario serializes")
    }
}

pub fn save_scenario(path: impl AsRef<Path>, sc: &Scenario) -> Result<()> {
    std::fs::write(path, sc.to_json())?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    Scenario::from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SystemConfig::uniform(3, 5, 16, 10.0);
        assert_eq!(
            gen_normalized_channels(&cfg, 9).unwrap(),
            gen_normalized_channels(&cfg, 9).unwrap()
        );
        assert_ne!(
            gen_normalized_channels(&cfg, 9).unwrap(),
            gen_normalized_channels(&cfg, 10).unwrap()
        );
    }

    #[test]
    fn default_shapes() {
        let cfg = SystemConfig::uniform(3, 5, 40, 10.0);
        let ch = gen_normalized_channels(&cfg, 1).unwrap();
        assert_eq!(ch.h.len(), 3);
        assert!(ch.h.iter().all(|h| h.shape() == (40, 5)));
    }

    #[test]
    fn cell_edge_snr() {
        let xi = pathloss_constant(1.0);
        assert!((xi - 10f64.powf(-0.5)).abs() < 1e-15);
        assert!((xi * 0.5f64.powi(-3) / xi - 8.0).abs() < 1e-12);
    }

    #[test]
    fn missing_field_is_named() {
        let text = r#"{"G": 1, "K": [1], "N": 4, "gamma_db": 10, "P": 1,
            "channel_model": "normalized", "seed": 3}"#;
        match Scenario::from_json(text) {
            Err(Error::Parse { message, line, .. }) => {
                assert!(message.contains("sigma2"), "{message}");
                assert!(line >= 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gamma_forms() {
        let k = [2, 1];
        let common = GammaDb::Common(10.0).to_linear(&k).unwrap();
        assert_eq!(common, vec![vec![10.0, 10.0], vec![10.0]]);
        let flat = GammaDb::PerUser(vec![0.0, 10.0, 20.0]).to_linear(&k).unwrap();
        assert!((flat[1][0] - 100.0).abs() < 1e-9);
        assert!(GammaDb::PerUser(vec![0.0]).to_linear(&k).is_err());
    }
}
