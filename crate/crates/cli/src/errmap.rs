//! Error-map images.
//!
//! Binary PGM (P5), 8-bit grayscale, linear ramp: a pixel is
//! `round(255 · e / e_max)` where `e` is the Euclidean norm over channels of
//! `prediction − target` and `e_max` the largest `e` in the map (all black
//! when the prediction is exact). Equirect fields map row `i`, column `j` of
//! the data layout to image row `i`, column `j` (north at the top).
//! HEALPix fields are resampled onto a `4·n_side × 8·n_side` equirect raster
//! whose cell centers take the error of the pixel containing them.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use spherefield::healpix;
use spherefield::tasks::{FieldDataset, FieldModel, Geometry};
use spherefield::{Result, SphericalPoint};

pub struct ErrorImage {
    pub width: usize,
    pub height: usize,
    pub max_abs: f64,
    pub pixels: Vec<u8>,
}

impl ErrorImage {
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

fn point_errors(model: &FieldModel, ds: &FieldDataset, snapshot: usize, threads: usize) -> Result<Vec<f64>> {
    let points = ds.geometry().points()?;
    let times = model.with_time.then(|| vec![ds.time_of(snapshot); points.len()]);
    let pred = model.predict_parallel(&points, times.as_deref(), threads)?;
    let c = ds.channels();
    Ok(pred
        .chunks_exact(c)
        .zip(ds.snapshot(snapshot).chunks_exact(c))
        .map(|(p, t)| {
            p.iter()
                .zip(t)
                .map(|(a, &b)| (a - b as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

pub fn render(model: &FieldModel, ds: &FieldDataset, snapshot: usize, threads: usize) -> Result<ErrorImage> {
    let errors = point_errors(model, ds, snapshot, threads)?;
    let (width, height, values) = match ds.geometry() {
        Geometry::Equirect { n_lat_pts, n_lon_pts } => (n_lon_pts, n_lat_pts, errors),
        Geometry::Healpix { n_side } => {
            let (w, h) = (8 * n_side, 4 * n_side);
            let mut v = Vec::with_capacity(w * h);
            for i in 0..h {
                let lat = FRAC_PI_2 - PI * (i as f64 + 0.5) / h as f64;
                for j in 0..w {
                    let lon = TAU * (j as f64 + 0.5) / w as f64;
                    let pix = healpix::ang2pix(n_side, &SphericalPoint::new(lat, lon)?)?;
                    v.push(errors[pix]);
                }
            }
            (w, h, v)
        }
    };
    let max_abs = values.iter().fold(0.0f64, |m, &e| m.max(e));
    let pixels = values
        .iter()
        .map(|&e| {
            if max_abs > 0.0 {
                (255.0 * e / max_abs).round() as u8
            } else {
                0
            }
        })
        .collect();
    Ok(ErrorImage {
        width,
        height,
        max_abs,
        pixels,
    })
}
