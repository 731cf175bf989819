//! Digital phantoms: per-pixel ground-truth tissue parameters.
//!
//! A phantom is described by a [`PhantomRecipe`] (a list of discs on an empty
//! background) and rasterized into a [`PhantomMap`]. Pixel membership uses the
//! pixel center: a pixel belongs to a disc when the distance from
//! `(x + 0.5, y + 0.5)` to the disc center is at most the radius. Later discs
//! overwrite earlier ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Grid;

/// Ground-truth parameters of one voxel.
///
/// `water_amp` and `fat_amp` are equilibrium magnetizations, so the proton
/// density seen by the T1 model is their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TissueParams {
    pub water_amp: f64,
    pub fat_amp: f64,
    /// Seconds.
    pub t1: f64,
    /// Seconds.
    pub t2: f64,
    /// Seconds.
    pub t2s_water: f64,
    /// Seconds.
    pub t2s_fat: f64,
    /// Off-resonance frequency in rad/s.
    pub d_omega0: f64,
    /// Transmit field scale (actual flip / nominal flip).
    pub b1_scale: f64,
}

impl TissueParams {
    pub const BACKGROUND: TissueParams = TissueParams {
        water_amp: 0.0,
        fat_amp: 0.0,
        t1: 1.0,
        t2: 0.1,
        t2s_water: 0.05,
        t2s_fat: 0.05,
        d_omega0: 0.0,
        b1_scale: 1.0,
    };

    pub fn m0(&self) -> f64 {
        self.water_amp + self.fat_amp
    }

    /// F / (W + F); zero when the voxel holds no signal.
    pub fn fat_fraction(&self) -> f64 {
        let total = self.m0();
        if total > 0.0 {
            self.fat_amp / total
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.water_amp,
            self.fat_amp,
            self.t1,
            self.t2,
            self.t2s_water,
            self.t2s_fat,
            self.d_omega0,
            self.b1_scale,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation("non-finite tissue parameter".into()));
        }
        if self.water_amp < 0.0 || self.fat_amp < 0.0 {
            return Err(Error::Validation("negative water or fat amplitude".into()));
        }
        if self.t1 <= 0.0 || self.t2 <= 0.0 || self.t2s_water <= 0.0 || self.t2s_fat <= 0.0 {
            return Err(Error::Validation("time constants must be positive".into()));
        }
        if self.t2s_water > self.t2 || self.t2s_fat > self.t2 {
            return Err(Error::Validation(format!(
                "T2* ({}, {}) exceeds T2 ({})",
                self.t2s_water, self.t2s_fat, self.t2
            )));
        }
        if self.b1_scale <= 0.0 {
            return Err(Error::Validation("b1_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub label: u8,
    #[serde(default)]
    pub name: String,
    /// Disc center in pixel units (pixel (0,0) spans [0,1)x[0,1)).
    pub center: [f64; 2],
    pub radius: f64,
    pub params: TissueParams,
}

/// Serializable phantom description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomRecipe {
    pub width: usize,
    pub height: usize,
    pub regions: Vec<Region>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomMap {
    params: Grid<TissueParams>,
    label: Grid<u8>,
}

#[derive(Deserialize)]
struct BottleFile {
    bottles: Vec<BottleEntry>,
}

#[derive(Deserialize)]
struct BottleEntry {
    label: u8,
    name: String,
    #[serde(flatten)]
    params: TissueParams,
}

const BOTTLE_RECIPE: &str = include_str!("../recipes/bottles.json");

/// Tissue parameters of bottles 1-6, in label order.
pub fn bottle_params() -> Vec<(u8, String, TissueParams)> {
    let file: BottleFile =
        serde_json::from_str(BOTTLE_RECIPE).expect("embedded bottle recipe is valid JSON");
    file.bottles
        .into_iter()
        .map(|b| (b.label, b.name, b.params))
        .collect()
}

impl PhantomRecipe {
    /// Six equal discs in two rows of three, radius `0.12 * min(width, height)`,
    /// labeled 1-3 on the top row and 4-6 on the bottom row.
    pub fn bottles(width: usize, height: usize) -> Result<Self> {
        if width < 32 || height < 32 {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} is too small for six bottles (need at least 32x32)"
            )));
        }
        let (w, h) = (width as f64, height as f64);
        let radius = 0.12 * w.min(h);
        let xs = [w / 6.0, w / 2.0, 5.0 * w / 6.0];
        let ys = [0.3 * h, 0.7 * h];
        let regions = bottle_params()
            .into_iter()
            .enumerate()
            .map(|(i, (label, name, params))| Region {
                label,
                name,
                center: [xs[i % 3], ys[i / 3]],
                radius,
                params,
            })
            .collect();
        Ok(Self {
            width,
            height,
            regions,
        })
    }

    /// A single centered disc of radius `0.35 * min(width, height)`.
    pub fn uniform_disc(width: usize, height: usize, params: TissueParams) -> Result<Self> {
        if width < 8 || height < 8 {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} is too small for a disc phantom"
            )));
        }
        let (w, h) = (width as f64, height as f64);
        Ok(Self {
            width,
            height,
            regions: vec![Region {
                label: 1,
                name: "disc".into(),
                center: [w / 2.0, h / 2.0],
                radius: 0.35 * w.min(h),
                params,
            }],
        })
    }

    /// Replaces the transmit scale of every region.
    pub fn with_b1_scale(mut self, k: f64) -> Self {
        for r in &mut self.regions {
            r.params.b1_scale = k;
        }
        self
    }

    /// Replaces the off-resonance of every region.
    pub fn with_d_omega0(mut self, d_omega0: f64) -> Self {
        for r in &mut self.regions {
            r.params.d_omega0 = d_omega0;
        }
        self
    }

    pub fn build(&self) -> Result<PhantomMap> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("empty phantom".into()));
        }
        let mut params = Grid::filled(self.width, self.height, TissueParams::BACKGROUND);
        let mut label = Grid::filled(self.width, self.height, 0u8);
        for region in &self.regions {
            if region.label == 0 {
                return Err(Error::Validation("region label 0 is reserved for background".into()));
            }
            region.params.validate()?;
            if region.params.m0() <= 0.0 {
                return Err(Error::Validation(format!(
                    "region {} has no signal (W + F = 0)",
                    region.label
                )));
            }
            let mut hits = 0usize;
            for y in 0..self.height {
                for x in 0..self.width {
                    let dx = x as f64 + 0.5 - region.center[0];
                    let dy = y as f64 + 0.5 - region.center[1];
                    if dx.hypot(dy) <= region.radius {
                        params[(x, y)] = region.params;
                        label[(x, y)] = region.label;
                        hits += 1;
                    }
                }
            }
            if hits == 0 {
                return Err(Error::InvalidArgument(format!(
                    "region {} covers no pixels",
                    region.label
                )));
            }
        }
        let map = PhantomMap { params, label };
        map.validate()?;
        Ok(map)
    }
}

/// Six-bottle phantom; see [`PhantomRecipe::bottles`].
pub fn make_bottle_phantom(width: usize, height: usize) -> Result<PhantomMap> {
    PhantomRecipe::bottles(width, height)?.build()
}

impl PhantomMap {
    pub fn width(&self) -> usize {
        self.params.width()
    }

    pub fn height(&self) -> usize {
        self.params.height()
    }

    pub fn params(&self) -> &Grid<TissueParams> {
        &self.params
    }

    pub fn labels(&self) -> &Grid<u8> {
        &self.label
    }

    pub fn label_at(&self, x: usize, y: usize) -> Result<u8> {
        let i = self.label.check_bounds(x, y)?;
        Ok(self.label.as_slice()[i])
    }

    pub fn params_at(&self, x: usize, y: usize) -> Result<TissueParams> {
        let i = self.params.check_bounds(x, y)?;
        Ok(self.params.as_slice()[i])
    }

    /// Checks every pixel against the tissue invariants.
    pub fn validate(&self) -> Result<()> {
        for (p, &l) in self.params.as_slice().iter().zip(self.label.as_slice()) {
            p.validate()?;
            if l == 0 && (p.water_amp != 0.0 || p.fat_amp != 0.0) {
                return Err(Error::Validation("background pixel carries signal".into()));
            }
            if l != 0 && p.m0() <= 0.0 {
                return Err(Error::Validation(format!("pixel in region {l} has W + F = 0")));
            }
        }
        Ok(())
    }

    /// Pixel coordinates with the given region label.
    pub fn region_pixels(&self, label: u8) -> Vec<(usize, usize)> {
        let w = self.width();
        self.label
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| (i % w, i / w))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn center_of(map: &PhantomMap, label: u8) -> (usize, usize) {
        let px = map.region_pixels(label);
        let n = px.len() as f64;
        let cx = px.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let cy = px.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        (cx.round() as usize, cy.round() as usize)
    }

    #[test]
    fn bottle_fat_fractions() {
        let map = make_bottle_phantom(64, 64).unwrap();
        let expected = [(3u8, 0.47), (4, 0.29), (5, 0.11), (6, 0.0)];
        for (label, ff) in expected {
            let (x, y) = center_of(&map, label);
            assert_eq!(map.label_at(x, y).unwrap(), label);
            let p = map.params_at(x, y).unwrap();
            assert!((p.fat_fraction() - ff).abs() < 1e-12, "bottle {label}");
        }
        for label in [1u8, 2] {
            let (x, y) = center_of(&map, label);
            assert_eq!(map.params_at(x, y).unwrap().fat_amp, 0.0);
        }
        let p1 = map.params_at(center_of(&map, 1).0, center_of(&map, 1).1).unwrap();
        let p2 = map.params_at(center_of(&map, 2).0, center_of(&map, 2).1).unwrap();
        assert!(p1.t1 != p2.t1 && p1.t2 != p2.t2);
    }

    #[test]
    fn background_and_corner() {
        let map = make_bottle_phantom(64, 48).unwrap();
        assert_eq!(map.params_at(0, 0).unwrap(), TissueParams::BACKGROUND);
        assert_eq!(map.label_at(0, 0).unwrap(), 0);
        for (p, &l) in map.params().as_slice().iter().zip(map.labels().as_slice()) {
            if l == 0 {
                assert_eq!((p.water_amp, p.fat_amp), (0.0, 0.0));
            }
        }
        for label in 1..=6 {
            assert!(map.region_pixels(label).len() > 20);
        }
    }

    #[test]
    fn center_of_bottle_one() {
        let map = make_bottle_phantom(64, 64).unwrap();
        let (x, y) = center_of(&map, 1);
        let expected = bottle_params()[0].2;
        assert_eq!(map.params_at(x, y).unwrap(), expected);
    }

    #[test]
    fn out_of_bounds() {
        let map = make_bottle_phantom(32, 32).unwrap();
        assert!(matches!(
            map.params_at(32, 0),
            Err(Error::OutOfBounds { x: 32, .. })
        ));
        assert!(map.params_at(0, 99).is_err());
    }

    #[test]
    fn too_small() {
        assert!(make_bottle_phantom(31, 64).is_err());
        assert!(make_bottle_phantom(64, 16).is_err());
    }

    #[test]
    fn deterministic_and_valid() {
        let a = make_bottle_phantom(50, 40).unwrap();
        let b = make_bottle_phantom(50, 40).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
    }

    #[test]
    fn discs_do_not_overlap() {
        for (w, h) in [(32, 32), (64, 32), (32, 80), (128, 128)] {
            let recipe = PhantomRecipe::bottles(w, h).unwrap();
            let map = recipe.build().unwrap();
            for r in &recipe.regions {
                let n = map.region_pixels(r.label).len() as f64;
                let area = std::f64::consts::PI * r.radius * r.radius;
                assert!((n - area).abs() < 0.35 * area, "{w}x{h} region {}", r.label);
            }
        }
    }

    #[test]
    fn recipe_json_round_trip() {
        let recipe = PhantomRecipe::bottles(40, 40).unwrap().with_b1_scale(1.2);
        let json = serde_json::to_string(&recipe).unwrap();
        let back: PhantomRecipe = serde_json::from_str(&json).unwrap();
        assert_eq!(back, recipe);
        assert_eq!(back.build().unwrap(), recipe.build().unwrap());
    }

    #[test]
    fn t2_star_invariant_rejected() {
        let mut p = bottle_params()[0].2;
        p.t2s_water = p.t2 * 1.5;
        assert!(p.validate().is_err());
    }
}
