use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{FieldDataset, Geometry, SampleSet};
use crate::healpix::{self, parent_pixel};
use crate::{Error, Result};

/// Uniform random point-wise split; `round(ratio·n)` samples go to train.
pub fn split_regression(ds: &FieldDataset, ratio: f64, seed: u64) -> Result<(SampleSet, SampleSet)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let mut all: Vec<(usize, usize)> = (0..ds.snapshots())
        .flat_map(|s| (0..ds.n_points()).map(move |i| (s, i)))
        .collect();
    let n = all.len();
    let n_train = (ratio * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidInput(format!(
            "{n} samples cannot be split at ratio {ratio}"
        )));
    }
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = all.split_at(n_train);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    let with_time = ds.snapshots() > 1;
    Ok((ds.select(&train, with_time)?, ds.select(&test, with_time)?))
}

/// Coarse training field and the untouched full-resolution field.
///
/// Equirect training data keeps every `factor`-th row and column, so it
/// shares grid positions with the full field. HEALPix training data averages
/// the `factor²` children of each coarse pixel.
pub fn make_superres_split(full: &FieldDataset, factor: usize) -> Result<(FieldDataset, FieldDataset)> {
    if factor < 1 {
        return Err(Error::InvalidConfig("super-resolution factor must be positive".into()));
    }
    let channels = full.channels();
    let coarse = match full.geometry() {
        Geometry::Equirect { n_lat_pts, n_lon_pts } => {
            if (n_lat_pts - 1) % factor != 0 || n_lon_pts % factor != 0 {
                return Err(Error::InvalidConfig(format!(
                    "{n_lat_pts}x{n_lon_pts} grid is not divisible by factor {factor}"
                )));
            }
            let (cl, cn) = ((n_lat_pts - 1) / factor + 1, n_lon_pts / factor);
            let mut values = Vec::with_capacity(cl * cn * channels * full.snapshots());
            for s in 0..full.snapshots() {
                for i in 0..cl {
                    for j in 0..cn {
                        let p = i * factor * n_lon_pts + j * factor;
                        values.extend((0..channels).map(|c| full.value(s, p, c)));
                    }
                }
            }
            FieldDataset::new(
                Geometry::Equirect {
                    n_lat_pts: cl,
                    n_lon_pts: cn,
                },
                channels,
                full.snapshots(),
                values,
            )?
        }
        Geometry::Healpix { n_side } => {
            if n_side % factor != 0 || healpix::check_n_side(n_side / factor).is_err() {
                return Err(Error::InvalidConfig(format!(
                    "n_side {n_side} is not divisible by factor {factor}"
                )));
            }
            let coarse_side = n_side / factor;
            let n_coarse = 12 * coarse_side * coarse_side;
            let mut sums = vec![0.0f64; n_coarse * channels * full.snapshots()];
            for fine in 0..full.n_points() {
                let parent = parent_pixel(n_side, fine, coarse_side)?;
                for s in 0..full.snapshots() {
                    for c in 0..channels {
                        sums[(s * n_coarse + parent) * channels + c] += full.value(s, fine, c) as f64;
                    }
                }
            }
            let k = (factor * factor) as f64;
            FieldDataset::new(
                Geometry::Healpix { n_side: coarse_side },
                channels,
                full.snapshots(),
                sums.into_iter().map(|v| (v / k) as f32).collect(),
            )?
        }
    };
    Ok((coarse, full.clone()))
}

/// Even snapshots train, odd snapshots test. Times are normalized across the
/// full series and attached to both sets.
pub fn make_temporal_split(ds: &FieldDataset) -> Result<(SampleSet, SampleSet)> {
    if ds.snapshots() < 2 {
        return Err(Error::InvalidConfig(
            "temporal split needs at least two snapshots".into(),
        ));
    }
    let pick = |parity: usize| -> Vec<(usize, usize)> {
        (0..ds.snapshots())
            .filter(|s| s % 2 == parity)
            .flat_map(|s| (0..ds.n_points()).map(move |i| (s, i)))
            .collect()
    };
    Ok((ds.select(&pick(0), true)?, ds.select(&pick(1), true)?))
}

/// Snapshot indices that land in the train and test halves of
/// [`make_temporal_split`].
pub fn temporal_indices(snapshots: usize) -> (Vec<usize>, Vec<usize>) {
    (0..snapshots).partition(|s| s % 2 == 0)
}
