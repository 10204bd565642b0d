//! Recovery configuration and its text format.
//!
//! The format is flat `key = value` lines, optionally grouped under `[recovery]`,
//! `[rank]` and `[cv]` section headers. `#` starts a comment. Each key belongs to
//! one section; outside any section every key is accepted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bases::Family;
use crate::error::{Error, Result};
use crate::lasso::CvConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    /// Microstep name, see [`super::MICROSTEPS`].
    pub algorithm: String,
    pub basis: Family,
    /// Univariate basis dimension `d`.
    pub dimension: usize,
    /// Gramian rule name for the restricted microsteps, see [`crate::bases::GRAMIAN_RULES`].
    pub gramian: String,
    pub initial_rank: usize,
    pub max_rank: usize,
    pub max_sweeps: usize,
    /// Relative validation improvement that resets the patience counter.
    pub tolerance: f64,
    pub patience: usize,
    /// Stable singular values satisfy `σ ≥ θ σ_1`.
    pub theta: f64,
    pub buffer: usize,
    pub validation_fraction: f64,
    pub cv_folds: usize,
    pub lambda_grid_decades: f64,
    pub lambda_grid_points: usize,
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            algorithm: "r2als".into(),
            basis: Family::Legendre,
            dimension: 8,
            gramian: "diag_sup".into(),
            initial_rank: 1,
            max_rank: 8,
            max_sweeps: 50,
            tolerance: 1e-4,
            patience: 5,
            theta: 0.05,
            buffer: 1,
            validation_fraction: 0.2,
            cv_folds: 10,
            lambda_grid_decades: 8.0,
            lambda_grid_points: 33,
            seed: 0,
        }
    }
}

const KEYS: &[(&str, &str)] = &[
    ("recovery", "algorithm"),
    ("recovery", "basis"),
    ("recovery", "dimension"),
    ("recovery", "gramian"),
    ("recovery", "max_sweeps"),
    ("recovery", "tolerance"),
    ("recovery", "patience"),
    ("recovery", "validation_fraction"),
    ("recovery", "seed"),
    ("rank", "initial_rank"),
    ("rank", "max_rank"),
    ("rank", "theta"),
    ("rank", "buffer"),
    ("cv", "cv_folds"),
    ("cv", "lambda_grid_decades"),
    ("cv", "lambda_grid_points"),
];

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse { line, message: format!("invalid value {value:?} for {key}") })
}

impl RecoveryConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(Error::Parse { line, message: format!("unknown section [{name}]") });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse { line, message: format!("expected key = value, got {content:?}") })?;
            let home = KEYS
                .iter()
                .find(|(_, k)| *k == key)
                .map(|(s, _)| *s)
                .ok_or_else(|| Error::Parse { line, message: format!("unknown key {key:?}") })?;
            if let Some(sec) = &section {
                if sec != home {
                    return Err(Error::Parse { line, message: format!("key {key} belongs in [{home}], not [{sec}]") });
                }
            }
            cfg.set(line, key, value)?;
        }
        cfg.validate().map_err(|e| match e {
            Error::InvalidArgument(message) => Error::Parse { line: 0, message },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "algorithm" => self.algorithm = value.to_string(),
            "basis" => {
                self.basis = Family::from_name(value).map_err(|e| Error::Parse { line, message: e.to_string() })?
            }
            "dimension" => self.dimension = parse_num(line, key, value)?,
            "gramian" => self.gramian = value.to_string(),
            "max_sweeps" => self.max_sweeps = parse_num(line, key, value)?,
            "tolerance" => self.tolerance = parse_num(line, key, value)?,
            "patience" => self.patience = parse_num(line, key, value)?,
            "validation_fraction" => self.validation_fraction = parse_num(line, key, value)?,
            "seed" => self.seed = parse_num(line, key, value)?,
            "initial_rank" => self.initial_rank = parse_num(line, key, value)?,
            "max_rank" => self.max_rank = parse_num(line, key, value)?,
            "theta" => self.theta = parse_num(line, key, value)?,
            "buffer" => self.buffer = parse_num(line, key, value)?,
            "cv_folds" => self.cv_folds = parse_num(line, key, value)?,
            "lambda_grid_decades" => self.lambda_grid_decades = parse_num(line, key, value)?,
            "lambda_grid_points" => self.lambda_grid_points = parse_num(line, key, value)?,
            _ => unreachable!("key table and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Renders the config in the format accepted by [`RecoveryConfig::parse`].
    pub fn to_text(&self) -> String {
        format!(
            "[recovery]\nalgorithm = {}\nbasis = {}\ndimension = {}\ngramian = {}\nmax_sweeps = {}\n\
             tolerance = {:e}\npatience = {}\nvalidation_fraction = {}\nseed = {}\n\n\
             [rank]\ninitial_rank = {}\nmax_rank = {}\ntheta = {}\nbuffer = {}\n\n\
             [cv]\ncv_folds = {}\nlambda_grid_decades = {}\nlambda_grid_points = {}\n",
            self.algorithm,
            self.basis,
            self.dimension,
            self.gramian,
            self.max_sweeps,
            self.tolerance,
            self.patience,
            self.validation_fraction,
            self.seed,
            self.initial_rank,
            self.max_rank,
            self.theta,
            self.buffer,
            self.cv_folds,
            self.lambda_grid_decades,
            self.lambda_grid_points,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.dimension == 0 {
            return bad("dimension must be >= 1".into());
        }
        if self.initial_rank == 0 || self.max_rank == 0 {
            return bad("ranks must be >= 1".into());
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta = {} must lie in (0, 1)", self.theta));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation_fraction = {} must lie in [0, 1)", self.validation_fraction));
        }
        if self.cv_folds < 2 || self.lambda_grid_points == 0 || !(self.lambda_grid_decades >= 0.0) {
            return bad("need cv_folds >= 2, lambda_grid_points >= 1, lambda_grid_decades >= 0".into());
        }
        if self.max_sweeps == 0 || self.patience == 0 || !(self.tolerance >= 0.0) {
            return bad("need max_sweeps >= 1, patience >= 1, tolerance >= 0".into());
        }
        super::microstep_by_name(&self.algorithm)?;
        crate::bases::gramian_rule(&self.gramian)?;
        Ok(())
    }

    pub fn cv(&self) -> CvConfig {
        CvConfig {
            folds: self.cv_folds,
            decades: self.lambda_grid_decades,
            points: self.lambda_grid_points,
            seed: self.seed,
            ..CvConfig::default()
        }
    }
}
