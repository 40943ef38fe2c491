use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::healpix;
use crate::metrics::latitude_weights;
use crate::{Error, Result, SphericalPoint};

/// Sampling layout of a stored field.
///
/// Equirect rows run north to south with `lat_i = π/2 − π·i/(n_lat_pts − 1)`
/// (a single row sits on the equator); columns run east from the prime
/// meridian with `lon_j = 2π·j/n_lon_pts`. HEALPix fields hold one value per
/// pixel center in ring order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Equirect { n_lat_pts: usize, n_lon_pts: usize },
    Healpix { n_side: usize },
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Geometry::Equirect { n_lat_pts, n_lon_pts } => {
                if n_lat_pts < 1 || n_lon_pts < 1 {
                    return Err(Error::InvalidInput(format!(
                        "equirect field needs at least one row and column, got {n_lat_pts}x{n_lon_pts}"
                    )));
                }
                Ok(())
            }
            Geometry::Healpix { n_side } => healpix::check_n_side(n_side),
        }
    }

    pub fn n_points(&self) -> usize {
        match *self {
            Geometry::Equirect { n_lat_pts, n_lon_pts } => n_lat_pts * n_lon_pts,
            Geometry::Healpix { n_side } => 12 * n_side * n_side,
        }
    }

    pub fn is_equal_area(&self) -> bool {
        matches!(self, Geometry::Healpix { .. })
    }

    pub fn row_lat(n_lat_pts: usize, i: usize) -> f64 {
        if n_lat_pts == 1 {
            0.0
        } else if i == n_lat_pts - 1 {
            -FRAC_PI_2
        } else {
            FRAC_PI_2 - PI * i as f64 / (n_lat_pts - 1) as f64
        }
    }

    pub fn col_lon(n_lon_pts: usize, j: usize) -> f64 {
        2.0 * PI * j as f64 / n_lon_pts as f64
    }

    /// Sample positions in storage order.
    pub fn points(&self) -> Result<Vec<SphericalPoint>> {
        self.validate()?;
        match *self {
            Geometry::Equirect { n_lat_pts, n_lon_pts } => {
                let mut out = Vec::with_capacity(n_lat_pts * n_lon_pts);
                for i in 0..n_lat_pts {
                    let lat = Self::row_lat(n_lat_pts, i);
                    for j in 0..n_lon_pts {
                        out.push(SphericalPoint::new(lat, Self::col_lon(n_lon_pts, j))?);
                    }
                }
                Ok(out)
            }
            Geometry::Healpix { n_side } => healpix::pixel_centers(n_side),
        }
    }

    /// Per-point loss and metric weights: normalized `cos ψ` for equirect,
    /// uniform for HEALPix.
    pub fn weights_for(&self, points: &[SphericalPoint]) -> Result<Vec<f64>> {
        if self.is_equal_area() {
            Ok(vec![1.0; points.len()])
        } else {
            latitude_weights(points)
        }
    }
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Geometry::Equirect { n_lat_pts, n_lon_pts } => write!(f, "equirect {n_lat_pts}x{n_lon_pts}"),
            Geometry::Healpix { n_side } => write!(f, "healpix n_side={n_side}"),
        }
    }
}

/// A gridded field, possibly multi-channel and time-resolved.
///
/// `values` is snapshot-major, then point (storage order), then channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDataset {
    geometry: Geometry,
    channels: usize,
    snapshots: usize,
    values: Vec<f32>,
}

impl FieldDataset {
    pub fn new(geometry: Geometry, channels: usize, snapshots: usize, values: Vec<f32>) -> Result<Self> {
        geometry.validate()?;
        if channels < 1 || snapshots < 1 {
            return Err(Error::InvalidInput(
                "a field needs at least one channel and one snapshot".into(),
            ));
        }
        let expected = geometry.n_points() * channels * snapshots;
        if values.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            geometry,
            channels,
            snapshots,
            values,
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn n_points(&self) -> usize {
        self.geometry.n_points()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn value(&self, snapshot: usize, point: usize, channel: usize) -> f32 {
        self.values[(snapshot * self.n_points() + point) * self.channels + channel]
    }

    /// Values of a single snapshot, point-major.
    pub fn snapshot(&self, s: usize) -> &[f32] {
        let len = self.n_points() * self.channels;
        &self.values[s * len..(s + 1) * len]
    }

    /// Normalized time of snapshot `s`, spanning `[0, 1]` across the series.
    pub fn time_of(&self, s: usize) -> f64 {
        if self.snapshots == 1 {
            0.0
        } else {
            s as f64 / (self.snapshots - 1) as f64
        }
    }

    /// Every (point, snapshot) sample. Times are attached only for
    /// multi-snapshot fields.
    pub fn samples(&self) -> Result<SampleSet> {
        let all: Vec<(usize, usize)> = (0..self.snapshots)
            .flat_map(|s| (0..self.n_points()).map(move |i| (s, i)))
            .collect();
        self.select(&all, self.snapshots > 1)
    }

    /// Gathers `(snapshot, point)` pairs into a training or evaluation set.
    pub fn select(&self, which: &[(usize, usize)], with_time: bool) -> Result<SampleSet> {
        let positions = self.geometry.points()?;
        let mut points = Vec::with_capacity(which.len());
        let mut times = Vec::with_capacity(which.len());
        let mut targets = Vec::with_capacity(which.len() * self.channels);
        for &(s, i) in which {
            if s >= self.snapshots || i >= self.n_points() {
                return Err(Error::Index(format!("sample ({s}, {i}) outside the field")));
            }
            points.push(positions[i]);
            times.push(self.time_of(s));
            let start = (s * self.n_points() + i) * self.channels;
            targets.extend(self.values[start..start + self.channels].iter().map(|&v| v as f64));
        }
        SampleSet::new(
            self.geometry,
            points,
            with_time.then_some(times),
            targets,
            self.channels,
        )
    }
}

/// Flattened samples used by training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub geometry: Geometry,
    pub points: Vec<SphericalPoint>,
    pub times: Option<Vec<f64>>,
    /// Row-major `len × channels`.
    pub targets: Vec<f64>,
    pub channels: usize,
    pub weights: Vec<f64>,
}

impl SampleSet {
    pub fn new(
        geometry: Geometry,
        points: Vec<SphericalPoint>,
        times: Option<Vec<f64>>,
        targets: Vec<f64>,
        channels: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty sample set".into()));
        }
        if targets.len() != points.len() * channels {
            return Err(Error::Shape {
                expected: points.len() * channels,
                actual: targets.len(),
            });
        }
        if let Some(t) = &times {
            if t.len() != points.len() {
                return Err(Error::Shape {
                    expected: points.len(),
                    actual: t.len(),
                });
            }
        }
        let weights = geometry.weights_for(&points)?;
        Ok(Self {
            geometry,
            points,
            times,
            targets,
            channels,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn equirect_positions() {
        let g = Geometry::Equirect {
            n_lat_pts: 3,
            n_lon_pts: 4,
        };
        let pts = g.points().unwrap();
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[0].lat(), FRAC_PI_2);
        assert_eq!(pts[5].lat(), 0.0);
        assert_abs_diff_eq!(pts[5].lon(), FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(pts[11].lat(), -FRAC_PI_2);
        let single = Geometry::Equirect {
            n_lat_pts: 1,
            n_lon_pts: 2,
        };
        assert_eq!(single.points().unwrap()[1].lat(), 0.0);
    }

    #[test]
    fn healpix_counts() {
        assert_eq!(Geometry::Healpix { n_side: 2 }.n_points(), 48);
        assert!(Geometry::Healpix { n_side: 3 }.validate().is_err());
    }

    #[test]
    fn dataset_shape_checked() {
        let g = Geometry::Equirect {
            n_lat_pts: 1,
            n_lon_pts: 4,
        };
        assert!(FieldDataset::new(g, 1, 1, vec![0.0; 3]).is_err());
        let ds = FieldDataset::new(g, 2, 2, (0..16).map(|v| v as f32).collect()).unwrap();
        assert_eq!(ds.value(1, 2, 1), 13.0);
        let s = ds.samples().unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s.times.as_ref().unwrap()[7], 1.0);
        assert_eq!(&s.targets[14..], &[14.0, 15.0]);
    }
}
