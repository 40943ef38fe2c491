//! Equirectangular feature-grid.
//!
//! Grid point `(n, m)` sits at latitude `π(n/N_lat − ½)` and longitude
//! `2π m/N_lon`, for `0 ≤ n ≤ N_lat` and `0 ≤ m ≤ N_lon`. Points that coincide
//! on the sphere share one parameter: every point of row 0 is the South pole,
//! every point of row `N_lat` is the North pole, and column `N_lon` is column 0.
//!
//! Canonical ids: 0 is the South pole, 1 the North pole, and interior point
//! `(n, m)` is `2 + (n − 1)·N_lon + m`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::interp::{Corner, Neighborhood};
use crate::sphere::SphericalPoint;
use crate::{Error, Real, Result};

pub const SOUTH_POLE_ID: usize = 0;
pub const NORTH_POLE_ID: usize = 1;

/// Half-width of the uniform distribution used to initialize grid parameters.
pub const INIT_RANGE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquirectLevelSpec {
    level: u32,
    n_lat: usize,
    n_lon: usize,
}

/// Resolution `(⌊γ^(ℓ−1)·N_lat⌋, ⌊γ^(ℓ−1)·N_lon⌋)` of level `ℓ`.
pub fn level_resolution(base_lat: usize, base_lon: usize, gamma: f64, level: u32) -> Result<(usize, usize)> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidConfig(format!("scaling factor {gamma} must exceed 1")));
    }
    if base_lat < 1 || base_lon < 1 {
        return Err(Error::InvalidConfig("base resolutions must be at least 1".into()));
    }
    if level < 1 {
        return Err(Error::InvalidConfig("levels are numbered from 1".into()));
    }
    let scale = gamma.powi(level as i32 - 1);
    Ok((scaled_floor(scale, base_lat), scaled_floor(scale, base_lon)))
}

// Floor with a relative guard so that e.g. 1.1^2 * 100 lands on 121, not 120.
fn scaled_floor(scale: f64, base: usize) -> usize {
    let x = scale * base as f64;
    (x * (1.0 + 1e-12)).floor() as usize
}

impl EquirectLevelSpec {
    pub fn new(level: u32, n_lat: usize, n_lon: usize) -> Result<Self> {
        if n_lat < 1 {
            return Err(Error::InvalidConfig("n_lat must be at least 1".into()));
        }
        if n_lon < 2 {
            return Err(Error::InvalidConfig(format!("n_lon must be at least 2, got {n_lon}")));
        }
        Ok(Self { level, n_lat, n_lon })
    }

    /// Level specs `1..=levels` following the geometric schedule.
    pub fn schedule(base_lat: usize, base_lon: usize, gamma: f64, levels: u32) -> Result<Vec<Self>> {
        if levels < 1 {
            return Err(Error::InvalidConfig("at least one grid level is required".into()));
        }
        (1..=levels)
            .map(|l| {
                let (n_lat, n_lon) = level_resolution(base_lat, base_lon, gamma, l)?;
                Self::new(l, n_lat, n_lon)
            })
            .collect()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn n_lat(&self) -> usize {
        self.n_lat
    }

    pub fn n_lon(&self) -> usize {
        self.n_lon
    }

    /// `(N_lat − 1)·N_lon` interior parameters plus one per pole.
    pub fn param_count(&self) -> usize {
        (self.n_lat - 1) * self.n_lon + 2
    }

    #[inline]
    fn row_lat(&self, n: usize) -> f64 {
        PI * (n as f64 / self.n_lat as f64 - 0.5)
    }

    #[inline]
    fn col_lon(&self, m: usize) -> f64 {
        TAU * (m % self.n_lon) as f64 / self.n_lon as f64
    }

    pub fn grid_point_position(&self, n: usize, m: usize) -> Result<SphericalPoint> {
        if n > self.n_lat || m >= self.n_lon {
            return Err(Error::Index(format!(
                "grid point ({n}, {m}) outside {}x{} grid",
                self.n_lat, self.n_lon
            )));
        }
        SphericalPoint::new(self.row_lat(n), self.col_lon(m))
    }

    /// Lower-left corner `(n, m)` of the cell containing `p`.
    pub fn cell_index(&self, p: &SphericalPoint) -> (usize, usize) {
        let n = ((p.lat() / PI + 0.5) * self.n_lat as f64).floor();
        let m = (p.lon() / TAU * self.n_lon as f64).floor();
        let n = (n.max(0.0) as usize).min(self.n_lat - 1);
        let m = (m.max(0.0) as usize).min(self.n_lon - 1);
        (n, m)
    }

    pub fn canonical_param_id(&self, n: usize, m: usize) -> Result<usize> {
        if n > self.n_lat || m > self.n_lon {
            return Err(Error::Index(format!(
                "grid index ({n}, {m}) outside {}x{} grid",
                self.n_lat, self.n_lon
            )));
        }
        Ok(self.id_unchecked(n, m))
    }

    #[inline]
    fn id_unchecked(&self, n: usize, m: usize) -> usize {
        if n == 0 {
            SOUTH_POLE_ID
        } else if n == self.n_lat {
            NORTH_POLE_ID
        } else {
            2 + (n - 1) * self.n_lon + m % self.n_lon
        }
    }

    /// Corners `(n,m), (n,m+1), (n+1,m), (n+1,m+1)` of the cell enclosing `p`.
    pub fn neighborhood(&self, p: &SphericalPoint) -> Neighborhood {
        let (n, m) = self.cell_index(p);
        let m1 = (m + 1) % self.n_lon;
        let corner = |row: usize, col: usize| Corner {
            id: self.id_unchecked(row, col),
            lat: self.row_lat(row),
            lon: self.col_lon(col),
        };
        Neighborhood {
            corners: [corner(n, m), corner(n, m1), corner(n + 1, m), corner(n + 1, m1)],
        }
    }
}

/// One level of learnable `D`-vectors on an equirectangular lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectGrid<F> {
    spec: EquirectLevelSpec,
    feature_dim: usize,
    params: Vec<F>,
}

impl<F: Real> EquirectGrid<F> {
    pub fn zeros(spec: EquirectLevelSpec, feature_dim: usize) -> Result<Self> {
        if feature_dim < 1 {
            return Err(Error::InvalidConfig("feature_dim must be at least 1".into()));
        }
        Ok(Self {
            spec,
            feature_dim,
            params: vec![F::zero(); spec.param_count() * feature_dim],
        })
    }

    /// Parameters drawn from `U(−1e−4, 1e−4)`.
    pub fn init<R: Rng + ?Sized>(spec: EquirectLevelSpec, feature_dim: usize, rng: &mut R) -> Result<Self> {
        let mut grid = Self::zeros(spec, feature_dim)?;
        let dist = Uniform::new(-INIT_RANGE, INIT_RANGE).expect("valid range");
        for p in grid.params.iter_mut() {
            *p = F::of(dist.sample(rng));
        }
        Ok(grid)
    }

    pub fn from_params(spec: EquirectLevelSpec, feature_dim: usize, params: Vec<F>) -> Result<Self> {
        let expected = spec.param_count() * feature_dim;
        if params.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: params.len(),
            });
        }
        Ok(Self {
            spec,
            feature_dim,
            params,
        })
    }

    pub fn spec(&self) -> &EquirectLevelSpec {
        &self.spec
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn param_vector(&self, id: usize) -> &[F] {
        &self.params[id * self.feature_dim..(id + 1) * self.feature_dim]
    }
}
