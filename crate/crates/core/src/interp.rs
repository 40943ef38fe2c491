//! Bilinear spherical interpolation and the multi-level grid encoder.
//!
//! A neighborhood is two isolatitude pairs. Each pair is first interpolated
//! along its ring by longitude, then the two results are blended by latitude.
//! Corner weights are
//!
//! ```text
//! w1 = (1−λ₁)(1−μ)   w2 = λ₁(1−μ)   w3 = (1−λ₂)μ   w4 = λ₂μ
//! λⱼ = d(φⱼ₁, φ) / d(φⱼ₁, φⱼ₂)      μ = (ψ − ψ₁) / (ψ₂ − ψ₁)
//! ```
//!
//! with `d` the eastward (wrapping) longitude distance, so each corner has
//! weight one at its own position. A degenerate latitude interval gives
//! `μ = 0`.

use std::f64::consts::TAU;

use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::equirect::{EquirectGrid, EquirectLevelSpec};
use crate::healpix::{HealpixGrid, HealpixSpec};
use crate::sphere::{lon_distance_on_interval, lon_offset, SphericalPoint};
use crate::{Error, Real, Result};

// Slack for points sitting on an interval end after rounding.
const CONTRACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    /// Canonical parameter id within the level.
    pub id: usize,
    pub lat: f64,
    pub lon: f64,
}

impl Corner {
    pub fn position(&self) -> SphericalPoint {
        SphericalPoint::new(self.lat, self.lon).expect("grid corners are valid points")
    }
}

/// Four corners: `corners[0..2]` share latitude `ψ₁`, `corners[2..4]` share `ψ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighborhood {
    pub corners: [Corner; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationWeights {
    pub lambda_upper: f64,
    pub lambda_lower: f64,
    pub mu: f64,
    pub w: [f64; 4],
}

fn ring_fraction(a: &Corner, b: &Corner, lon: f64) -> Result<f64> {
    if a.lon == b.lon {
        // single-pixel ring or pole pair collapsed onto one longitude
        return Ok(0.0);
    }
    let span = lon_distance_on_interval(a.lon, b.lon)?;
    let mut off = lon_offset(a.lon, lon);
    if off > TAU - CONTRACT_TOL {
        off = 0.0;
    }
    if off > span + CONTRACT_TOL {
        return Err(Error::NeighborhoodContract(format!(
            "longitude {lon} outside interval [{}, {}]",
            a.lon, b.lon
        )));
    }
    Ok((off / span).clamp(0.0, 1.0))
}

pub fn bilinear_weights(p: &SphericalPoint, nb: &Neighborhood) -> Result<InterpolationWeights> {
    let [c1, c2, c3, c4] = &nb.corners;
    if c1.lat != c2.lat || c3.lat != c4.lat {
        return Err(Error::NeighborhoodContract("corner pairs are not isolatitude".into()));
    }
    let lambda_upper = ring_fraction(c1, c2, p.lon())?;
    let lambda_lower = ring_fraction(c3, c4, p.lon())?;
    let (psi1, psi2) = (c1.lat, c3.lat);
    let mu = if psi1 == psi2 {
        0.0
    } else {
        let mu = (p.lat() - psi1) / (psi2 - psi1);
        if !(-CONTRACT_TOL..=1.0 + CONTRACT_TOL).contains(&mu) {
            return Err(Error::NeighborhoodContract(format!(
                "latitude {} outside [{psi1}, {psi2}]",
                p.lat()
            )));
        }
        mu.clamp(0.0, 1.0)
    };
    Ok(InterpolationWeights {
        lambda_upper,
        lambda_lower,
        mu,
        w: [
            (1.0 - lambda_upper) * (1.0 - mu),
            lambda_upper * (1.0 - mu),
            (1.0 - lambda_lower) * mu,
            lambda_lower * mu,
        ],
    })
}

/// One level of the encoder.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid<F> {
    Equirect(EquirectGrid<F>),
    Healpix(HealpixGrid<F>),
}

impl<F: Real> Grid<F> {
    pub fn feature_dim(&self) -> usize {
        match self {
            Grid::Equirect(g) => g.feature_dim(),
            Grid::Healpix(g) => g.feature_dim(),
        }
    }

    pub fn params(&self) -> &[F] {
        match self {
            Grid::Equirect(g) => g.params(),
            Grid::Healpix(g) => g.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        match self {
            Grid::Equirect(g) => g.params_mut(),
            Grid::Healpix(g) => g.params_mut(),
        }
    }

    pub fn neighborhood(&self, p: &SphericalPoint) -> Neighborhood {
        match self {
            Grid::Equirect(g) => g.spec().neighborhood(p),
            Grid::Healpix(g) => g.spec().neighborhood(p),
        }
    }

    /// Corner ids and weights for one query.
    pub fn lookup(&self, p: &SphericalPoint) -> Result<([usize; 4], [f64; 4])> {
        if let Grid::Healpix(g) = self {
            return crate::healpix::lookup(g.spec(), p);
        }
        let nb = self.neighborhood(p);
        let w = bilinear_weights(p, &nb)?;
        Ok((nb.corners.map(|c| c.id), w.w))
    }
}

/// Corner ids and weights of every level for a fixed set of queries.
///
/// Geometry does not change during training, so the lookups are computed once.
#[derive(Debug, Clone)]
pub struct EncodingPlan {
    n_points: usize,
    n_levels: usize,
    ids: Vec<[u32; 4]>,
    weights: Vec<[f64; 4]>,
    times: Option<Vec<f64>>,
}

impl EncodingPlan {
    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }
}

/// Ordered stack of feature-grids; output is the concatenation of every
/// level's interpolated `D`-vector, coarsest first.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEncoder<F> {
    levels: Vec<Grid<F>>,
    feature_dim: usize,
}

impl<F: Real> GridEncoder<F> {
    pub fn new(levels: Vec<Grid<F>>) -> Result<Self> {
        let Some(first) = levels.first() else {
            return Err(Error::InvalidConfig("encoder needs at least one level".into()));
        };
        let feature_dim = first.feature_dim();
        if levels.iter().any(|g| g.feature_dim() != feature_dim) {
            return Err(Error::InvalidConfig("all levels must share one feature_dim".into()));
        }
        Ok(Self { levels, feature_dim })
    }

    pub fn equirect<R: rand::Rng + ?Sized>(
        specs: &[EquirectLevelSpec],
        feature_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let levels = specs
            .iter()
            .map(|s| EquirectGrid::init(*s, feature_dim, rng).map(Grid::Equirect))
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }

    pub fn healpix<R: rand::Rng + ?Sized>(specs: &[HealpixSpec], feature_dim: usize, rng: &mut R) -> Result<Self> {
        let levels = specs
            .iter()
            .map(|s| HealpixGrid::init(*s, feature_dim, rng).map(Grid::Healpix))
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }

    pub fn levels(&self) -> &[Grid<F>] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut [Grid<F>] {
        &mut self.levels
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Length of the spatial feature, `D·L`.
    pub fn output_dim(&self) -> usize {
        self.feature_dim * self.levels.len()
    }

    pub fn param_count(&self) -> usize {
        self.levels.iter().map(|g| g.params().len()).sum()
    }

    pub fn encode(&self, p: &SphericalPoint) -> Result<Vec<F>> {
        let mut out = vec![F::zero(); self.output_dim()];
        self.encode_into(p, &mut out)?;
        Ok(out)
    }

    pub fn encode_into(&self, p: &SphericalPoint, out: &mut [F]) -> Result<()> {
        let d = self.feature_dim;
        if out.len() < self.output_dim() {
            return Err(Error::Shape {
                expected: self.output_dim(),
                actual: out.len(),
            });
        }
        for (level, grid) in self.levels.iter().enumerate() {
            let (ids, w) = grid.lookup(p)?;
            let params = grid.params();
            let slice = &mut out[level * d..(level + 1) * d];
            slice.fill(F::zero());
            for k in 0..4 {
                let wk = F::of(w[k]);
                let z = &params[ids[k] * d..(ids[k] + 1) * d];
                for (o, &v) in slice.iter_mut().zip(z) {
                    *o += wk * v;
                }
            }
        }
        Ok(())
    }

    /// `encode(p)` followed by the normalized timestep.
    pub fn encode_with_time(&self, p: &SphericalPoint, t_norm: f64) -> Result<Vec<F>> {
        check_time(t_norm)?;
        let mut out = vec![F::zero(); self.output_dim() + 1];
        self.encode_into(p, &mut out)?;
        out[self.output_dim()] = F::of(t_norm);
        Ok(out)
    }

    /// Adds `w_k · upstream` into each corner's gradient slot. `accum[level]`
    /// is shaped like that level's parameter table.
    pub fn encode_backward(&self, p: &SphericalPoint, upstream: &[F], accum: &mut [Vec<F>]) -> Result<()> {
        let d = self.feature_dim;
        if upstream.len() != self.output_dim() && upstream.len() != self.output_dim() + 1 {
            return Err(Error::Shape {
                expected: self.output_dim(),
                actual: upstream.len(),
            });
        }
        self.check_accum(accum)?;
        for (level, grid) in self.levels.iter().enumerate() {
            let (ids, w) = grid.lookup(p)?;
            let g = &upstream[level * d..(level + 1) * d];
            let acc = &mut accum[level];
            for k in 0..4 {
                let wk = F::of(w[k]);
                for (a, &gv) in acc[ids[k] * d..(ids[k] + 1) * d].iter_mut().zip(g) {
                    *a += wk * gv;
                }
            }
        }
        Ok(())
    }

    /// Zeroed gradient tables shaped like the parameters.
    pub fn zero_grads(&self) -> Vec<Vec<F>> {
        self.levels.iter().map(|g| vec![F::zero(); g.params().len()]).collect()
    }

    fn check_accum(&self, accum: &[Vec<F>]) -> Result<()> {
        if accum.len() != self.levels.len() {
            return Err(Error::Shape {
                expected: self.levels.len(),
                actual: accum.len(),
            });
        }
        for (a, g) in accum.iter().zip(&self.levels) {
            if a.len() != g.params().len() {
                return Err(Error::Shape {
                    expected: g.params().len(),
                    actual: a.len(),
                });
            }
        }
        Ok(())
    }

    /// Precomputes lookups for `points`; `times` (normalized) appends a
    /// trailing time column to every gathered feature.
    pub fn plan(&self, points: &[SphericalPoint], times: Option<&[f64]>) -> Result<EncodingPlan> {
        if let Some(t) = times {
            if t.len() != points.len() {
                return Err(Error::Shape {
                    expected: points.len(),
                    actual: t.len(),
                });
            }
            for &v in t {
                check_time(v)?;
            }
        }
        let n_levels = self.levels.len();
        let mut ids = Vec::with_capacity(points.len() * n_levels);
        let mut weights = Vec::with_capacity(points.len() * n_levels);
        for p in points {
            for grid in &self.levels {
                let (i, w) = grid.lookup(p)?;
                ids.push(i.map(|v| v as u32));
                weights.push(w);
            }
        }
        Ok(EncodingPlan {
            n_points: points.len(),
            n_levels,
            ids,
            weights,
            times: times.map(|t| t.to_vec()),
        })
    }

    fn plan_width(&self, plan: &EncodingPlan) -> usize {
        self.output_dim() + usize::from(plan.times.is_some())
    }

    /// Gathers features of `rows` (indices into the plan) into a batch matrix.
    pub fn gather(&self, plan: &EncodingPlan, rows: &[usize]) -> Result<Array2<F>> {
        if plan.n_levels != self.levels.len() {
            return Err(Error::Shape {
                expected: self.levels.len(),
                actual: plan.n_levels,
            });
        }
        let d = self.feature_dim;
        let width = self.plan_width(plan);
        let mut out = Array2::<F>::zeros((rows.len(), width));
        for (r, &row) in rows.iter().enumerate() {
            let mut o = out.row_mut(r);
            let o = o.as_slice_mut().expect("contiguous row");
            for (level, grid) in self.levels.iter().enumerate() {
                let idx = row * plan.n_levels + level;
                let ids = plan.ids[idx];
                let w = plan.weights[idx];
                let params = grid.params();
                let slice = &mut o[level * d..(level + 1) * d];
                for k in 0..4 {
                    let wk = F::of(w[k]);
                    let base = ids[k] as usize * d;
                    for (s, &v) in slice.iter_mut().zip(&params[base..base + d]) {
                        *s += wk * v;
                    }
                }
            }
            if let Some(t) = &plan.times {
                o[width - 1] = F::of(t[row]);
            }
        }
        Ok(out)
    }

    /// Scatters feature gradients of a gathered batch back into `accum`.
    pub fn scatter_grads(
        &self,
        plan: &EncodingPlan,
        rows: &[usize],
        feature_grads: ArrayView2<F>,
        accum: &mut [Vec<F>],
    ) -> Result<()> {
        self.check_accum(accum)?;
        if feature_grads.nrows() != rows.len() || feature_grads.ncols() != self.plan_width(plan) {
            return Err(Error::Shape {
                expected: rows.len() * self.plan_width(plan),
                actual: feature_grads.len(),
            });
        }
        let d = self.feature_dim;
        for (r, &row) in rows.iter().enumerate() {
            let g = feature_grads.row(r);
            for (level, acc) in accum.iter_mut().enumerate() {
                let idx = row * plan.n_levels + level;
                let ids = plan.ids[idx];
                let w = plan.weights[idx];
                for k in 0..4 {
                    let wk = F::of(w[k]);
                    let base = ids[k] as usize * d;
                    for j in 0..d {
                        acc[base + j] += wk * g[level * d + j];
                    }
                }
            }
        }
        Ok(())
    }

    /// Encodes many points into the rows of `out`.
    pub fn encode_batch(
        &self,
        points: &[SphericalPoint],
        times: Option<&[f64]>,
        mut out: ArrayViewMut2<F>,
    ) -> Result<()> {
        for (i, p) in points.iter().enumerate() {
            let mut row = out.row_mut(i);
            let row = row.as_slice_mut().expect("contiguous row");
            self.encode_into(p, row)?;
            if let Some(t) = times {
                check_time(t[i])?;
                row[self.output_dim()] = F::of(t[i]);
            }
        }
        Ok(())
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("normalized timestep {t} outside [0, 1]")));
    }
    Ok(())
}
