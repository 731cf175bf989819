use std::path::Path;

use serde::{Deserialize, Serialize};

use super::read_json;
use crate::error::{Error, Result};
use crate::maskgen::MaskConfig;
use crate::phantom::{PhantomRecipe, TissueParams};
use crate::pipeline::{B1Config, EstimateConfig};
use crate::seqsim::{RfConfig, ScanConfig, SequenceTiming};
use crate::t1fit::T1Config;
use crate::t2fit::T2Config;
use crate::waterfat::WfConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomConfig {
    Bottles {
        width: usize,
        height: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b1_scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d_omega0: Option<f64>,
    },
    Uniform {
        width: usize,
        height: usize,
        params: TissueParams,
    },
    Recipe {
        recipe: PhantomRecipe,
    },
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig::Bottles {
            width: 64,
            height: 64,
            b1_scale: None,
            d_omega0: None,
        }
    }
}

/// Either a full timing layout or the default layout at a given saturation delay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub t_sat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<SequenceTiming>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { t_sat: 1.2, layout: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Everything the command-line tool reads from a JSON config file.
/// Omitted sections take their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub phantom: PhantomConfig,
    pub timing: TimingConfig,
    pub rf: RfConfig,
    pub scan: ScanSection,
    pub mask: MaskConfig,
    pub b1: B1Config,
    pub t2: T2Config,
    pub wf: WfConfig,
    pub t1: T1Config,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Config = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn timing(&self) -> SequenceTiming {
        self.timing
            .layout
            .clone()
            .unwrap_or_else(|| SequenceTiming::with_t_sat(self.timing.t_sat))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scan.noise_sigma >= 0.0 && self.scan.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be finite and non-negative".into()));
        }
        self.timing().validate()?;
        self.rf.validate()?;
        self.wf.clone().with_times(&self.timing()).validate()
    }

    pub fn recipe(&self) -> Result<PhantomRecipe> {
        match &self.phantom {
            PhantomConfig::Bottles {
                width,
                height,
                b1_scale,
                d_omega0,
            } => {
                let mut r = PhantomRecipe::bottles(*width, *height)?;
                if let Some(k) = b1_scale {
                    r = r.with_b1_scale(*k);
                }
                if let Some(d) = d_omega0 {
                    r = r.with_d_omega0(*d);
                }
                Ok(r)
            }
            PhantomConfig::Uniform { width, height, params } => PhantomRecipe::uniform_disc(*width, *height, *params),
            PhantomConfig::Recipe { recipe } => Ok(recipe.clone()),
        }
    }

    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig {
            timing: self.timing(),
            rf: self.rf,
            noise_sigma: self.scan.noise_sigma,
            seed: self.scan.seed,
            omega_fat: self.wf.omega_cs,
        }
    }

    pub fn estimate_config(&self) -> EstimateConfig {
        EstimateConfig {
            rf: self.rf,
            b1: self.b1,
            t2: self.t2,
            wf: self.wf.clone(),
            t1: self.t1.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: Config = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.scan_config(), ScanConfig::default());
        assert_eq!(cfg.estimate_config(), EstimateConfig::default());
    }

    #[test]
    fn phantom_variants_parse() {
        let text = r#"{"phantom": {"kind": "bottles", "width": 32, "height": 32, "b1_scale": 1.1},
                       "timing": {"t_sat": 0.4}, "scan": {"noise_sigma": 1e-4, "seed": 9}}"#;
        let cfg: Config = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        let map = cfg.recipe().unwrap().build().unwrap();
        assert_eq!(map.width(), 32);
        let p = map.region_pixels(1)[0];
        assert_eq!(map.params_at(p.0, p.1).unwrap().b1_scale, 1.1);
        assert_eq!(cfg.scan_config().timing, SequenceTiming::with_t_sat(0.4));
        assert_eq!(cfg.scan_config().seed, 9);
    }

    #[test]
    fn typos_are_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{"scan": {"noise": 1.0}}"#).is_err());
        assert!(serde_json::from_str::<Config>(r#"{"phantom": {"kind": "cube"}}"#).is_err());
    }

    #[test]
    fn negative_noise_is_a_config_error() {
        let mut cfg = Config::default();
        cfg.scan.noise_sigma = -1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
