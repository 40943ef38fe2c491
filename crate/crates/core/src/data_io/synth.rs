use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::baseline::normalized_legendre;
use crate::tasks::{FieldDataset, Geometry};
use crate::{Result, SphericalPoint};

/// Harmonic coefficients `a_lm ~ N(0, 1)·(1 + l)^(−α)`, ordered by `l` then
/// `m = −l..=l` (see [`sh_index`](crate::baseline::sh_index)). Draws `sets`
/// independent vectors from one seeded stream.
pub fn synth_coefficients(seed: u64, l_max: usize, alpha: f64, sets: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sets)
        .map(|_| {
            let mut a = Vec::with_capacity((l_max + 1) * (l_max + 1));
            for l in 0..=l_max {
                let scale = (1.0 + l as f64).powf(-alpha);
                for _ in 0..(2 * l + 1) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    a.push(z * scale);
                }
            }
            a
        })
        .collect()
}

/// `Σ a_lm Y_l^m(p)` at every point. Consecutive points on one latitude
/// share the Legendre work.
pub fn evaluate_harmonic_sum(coeffs: &[f64], l_max: usize, points: &[SphericalPoint]) -> Vec<f64> {
    assert_eq!(coeffs.len(), (l_max + 1) * (l_max + 1), "coefficient count");
    let mut cached_lat = f64::NAN;
    // per-order sums over degree for cos(mφ) and sin(mφ)
    let mut c = vec![0.0; l_max + 1];
    let mut s = vec![0.0; l_max + 1];
    points
        .iter()
        .map(|p| {
            if p.lat().to_bits() != cached_lat.to_bits() {
                cached_lat = p.lat();
                let leg = normalized_legendre(p.lat().sin(), p.lat().cos().max(0.0), l_max);
                c.fill(0.0);
                s.fill(0.0);
                for l in 0..=l_max {
                    let base = l * l + l;
                    let row = l * (l + 1) / 2;
                    c[0] += coeffs[base] * leg[row];
                    for m in 1..=l {
                        c[m] += SQRT_2 * coeffs[base + m] * leg[row + m];
                        s[m] += SQRT_2 * coeffs[base - m] * leg[row + m];
                    }
                }
            }
            let mut v = c[0];
            for m in 1..=l_max {
                let (sn, cs) = (m as f64 * p.lon()).sin_cos();
                v += c[m] * cs + s[m] * sn;
            }
            v
        })
        .collect()
}

/// Seeded band-limited random field on `geometry`.
pub fn synth_field(geometry: Geometry, seed: u64, l_max: usize, alpha: f64) -> Result<FieldDataset> {
    synth_series(geometry, seed, l_max, alpha, 1)
}

/// Time series of band-limited fields. Snapshot `s` at normalized time
/// `t = s/(S−1)` uses coefficients `A·cos(πt) + B·sin(πt)`, so the first
/// snapshot equals [`synth_field`] with the same arguments.
pub fn synth_series(geometry: Geometry, seed: u64, l_max: usize, alpha: f64, snapshots: usize) -> Result<FieldDataset> {
    let points = geometry.points()?;
    let sets = synth_coefficients(seed, l_max, alpha, if snapshots > 1 { 2 } else { 1 });
    let mut values = Vec::with_capacity(points.len() * snapshots);
    for k in 0..snapshots {
        let coeffs: Vec<f64> = if k == 0 {
            sets[0].clone()
        } else {
            let t = k as f64 / (snapshots - 1) as f64;
            let (sn, cs) = (PI * t).sin_cos();
            sets[0].iter().zip(&sets[1]).map(|(a, b)| a * cs + b * sn).collect()
        };
        values.extend(
            evaluate_harmonic_sum(&coeffs, l_max, &points)
                .into_iter()
                .map(|v| v as f32),
        );
    }
    FieldDataset::new(geometry, 1, snapshots, values)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::baseline::real_spherical_harmonics;

    #[test]
    fn degree_zero_is_constant() {
        let g = Geometry::Equirect {
            n_lat_pts: 5,
            n_lon_pts: 8,
        };
        let f = synth_field(g, 1, 0, 2.0).unwrap();
        let a00 = synth_coefficients(1, 0, 2.0, 1)[0][0];
        let expect = (a00 / (4.0 * PI).sqrt()) as f32;
        assert!(f.values().iter().all(|&v| v == expect));
    }

    #[test]
    fn deterministic() {
        let g = Geometry::Healpix { n_side: 4 };
        assert_eq!(synth_field(g, 7, 6, 1.0).unwrap(), synth_field(g, 7, 6, 1.0).unwrap());
        assert_ne!(synth_field(g, 7, 6, 1.0).unwrap(), synth_field(g, 8, 6, 1.0).unwrap());
    }

    #[test]
    fn cached_rows_match_pointwise_sum() {
        let coeffs = synth_coefficients(3, 8, 0.5, 1).remove(0);
        let pts = Geometry::Healpix { n_side: 2 }.points().unwrap();
        let fast = evaluate_harmonic_sum(&coeffs, 8, &pts);
        for (p, v) in pts.iter().zip(fast) {
            let y = real_spherical_harmonics(p, 8);
            let direct: f64 = y.iter().zip(&coeffs).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(v, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn series_starts_at_single_field() {
        let g = Geometry::Equirect {
            n_lat_pts: 3,
            n_lon_pts: 4,
        };
        let one = synth_field(g, 2, 4, 1.0).unwrap();
        let many = synth_series(g, 2, 4, 1.0, 4).unwrap();
        assert_eq!(many.snapshot(0), one.values());
        assert_ne!(many.snapshot(1), one.values());
    }
}
