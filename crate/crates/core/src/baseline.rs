//! Closed-form coordinate encodings used as comparison baselines.
//!
//! Positional and Fourier encodings consume the 3-D unit vector of a point,
//! which keeps them continuous across the prime meridian. Spherical
//! harmonics are real, orthonormal on the unit sphere and carry the
//! Condon–Shortley phase:
//!
//! ```text
//! Y_l^0  = N_l^0 P_l^0(cos θ)
//! Y_l^m  = √2 N_l^m P_l^m(cos θ) cos(mφ)     m > 0
//! Y_l^-m = √2 N_l^m P_l^m(cos θ) sin(mφ)     m > 0
//! ```

use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::sphere::SphericalPoint;
use crate::{Error, Result};

/// Largest harmonic degree accepted by [`spherical_harmonics_encoding`].
pub const MAX_SH_DEGREE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncodingConfig {
    Positional { levels: usize },
    Fourier { features: usize, sigma: f64, seed: u64 },
    SphericalHarmonics { degree: usize },
}

impl EncodingConfig {
    pub fn output_dim(&self) -> usize {
        match *self {
            EncodingConfig::Positional { levels } => 2 * levels * 3,
            EncodingConfig::Fourier { features, .. } => 2 * features,
            EncodingConfig::SphericalHarmonics { degree } => (degree + 1) * (degree + 1),
        }
    }
}

/// `(sin 2⁰πx, cos 2⁰πx, …, sin 2^(L−1)πx, cos 2^(L−1)πx)` per component.
pub fn positional_encoding(x: &[f64], levels: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * levels * x.len());
    for &xi in x {
        let mut freq = PI;
        for _ in 0..levels {
            let (s, c) = (freq * xi).sin_cos();
            out.push(s);
            out.push(c);
            freq *= 2.0;
        }
    }
    out
}

/// Random Fourier features `(cos 2πBx, sin 2πBx)` with `B ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierFeatures {
    b: Array2<f64>,
}

impl FourierFeatures {
    pub fn sample(features: usize, input_dim: usize, sigma: f64, seed: u64) -> Result<Self> {
        let normal =
            Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(format!("fourier sigma {sigma}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Array2::from_shape_simple_fn((features, input_dim), || normal.sample(&mut rng));
        Ok(Self { b })
    }

    pub fn from_matrix(b: Array2<f64>) -> Self {
        Self { b }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.b
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.b.ncols() {
            return Err(Error::Shape {
                expected: self.b.ncols(),
                actual: x.len(),
            });
        }
        let m = self.b.nrows();
        let mut out = vec![0.0; 2 * m];
        for (i, row) in self.b.rows().into_iter().enumerate() {
            let proj: f64 = row.iter().zip(x).map(|(b, x)| b * x).sum();
            let (s, c) = (2.0 * PI * proj).sin_cos();
            out[i] = c;
            out[m + i] = s;
        }
        Ok(out)
    }
}

/// Position of `Y_l^m` in the harmonic vectors.
#[inline]
pub fn sh_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Normalized associated Legendre values `N_l^m P_l^m(cos θ)` for
/// `0 ≤ m ≤ l ≤ l_max`, stored at `l(l+1)/2 + m`.
pub(crate) fn normalized_legendre(cos_t: f64, sin_t: f64, l_max: usize) -> Vec<f64> {
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut p = vec![0.0; (l_max + 1) * (l_max + 2) / 2];
    p[0] = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..=l_max {
        let mf = m as f64;
        p[idx(m, m)] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t * p[idx(m - 1, m - 1)];
    }
    for m in 0..l_max {
        p[idx(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * cos_t * p[idx(m, m)];
    }
    for m in 0..=l_max {
        for l in (m + 2)..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[idx(l, m)] = a * (cos_t * p[idx(l - 1, m)] - b * p[idx(l - 2, m)]);
        }
    }
    p
}

/// Real orthonormal harmonics of every degree `0..=l_max`, ordered by
/// `l` then `m = −l..=l`.
pub fn real_spherical_harmonics(p: &SphericalPoint, l_max: usize) -> Vec<f64> {
    // colatitude θ: cos θ = sin(lat), sin θ = cos(lat)
    let cos_t = p.lat().sin();
    let sin_t = p.lat().cos().max(0.0);
    let leg = normalized_legendre(cos_t, sin_t, l_max);
    let mut out = vec![0.0; (l_max + 1) * (l_max + 1)];
    let sqrt2 = std::f64::consts::SQRT_2;
    for l in 0..=l_max {
        let base = l * l + l;
        out[base] = leg[l * (l + 1) / 2];
        for m in 1..=l {
            let v = sqrt2 * leg[l * (l + 1) / 2 + m];
            let (s, c) = (m as f64 * p.lon()).sin_cos();
            out[base + m] = v * c;
            out[base - m] = v * s;
        }
    }
    out
}

pub fn spherical_harmonics_encoding(p: &SphericalPoint, degree: usize) -> Result<Vec<f64>> {
    if degree > MAX_SH_DEGREE {
        return Err(Error::InvalidConfig(format!(
            "spherical harmonic degree {degree} exceeds {MAX_SH_DEGREE}"
        )));
    }
    Ok(real_spherical_harmonics(p, degree))
}

/// A configured baseline encoding, with its Fourier matrix sampled once.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEncoder {
    config: EncodingConfig,
    fourier: Option<FourierFeatures>,
}

impl BaselineEncoder {
    pub fn new(config: EncodingConfig) -> Result<Self> {
        let fourier = match config {
            EncodingConfig::Positional { levels } if levels < 1 => {
                return Err(Error::InvalidConfig("positional levels must be at least 1".into()))
            }
            EncodingConfig::Fourier { features, sigma, seed } => {
                if features < 1 {
                    return Err(Error::InvalidConfig("fourier features must be at least 1".into()));
                }
                Some(FourierFeatures::sample(features, 3, sigma, seed)?)
            }
            EncodingConfig::SphericalHarmonics { degree } if degree > MAX_SH_DEGREE => {
                return Err(Error::InvalidConfig(format!(
                    "spherical harmonic degree {degree} exceeds {MAX_SH_DEGREE}"
                )))
            }
            _ => None,
        };
        Ok(Self { config, fourier })
    }

    pub fn config(&self) -> &EncodingConfig {
        &self.config
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    pub fn encode(&self, p: &SphericalPoint) -> Vec<f64> {
        match self.config {
            EncodingConfig::Positional { levels } => positional_encoding(&p.to_unit_vector(), levels),
            EncodingConfig::Fourier { .. } => self
                .fourier
                .as_ref()
                .expect("fourier matrix sampled at construction")
                .apply(&p.to_unit_vector())
                .expect("unit vectors are 3-D"),
            EncodingConfig::SphericalHarmonics { degree } => real_spherical_harmonics(p, degree),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, TAU};

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;

    #[test]
    fn positional_examples() {
        let v = positional_encoding(&[0.0], 2);
        assert_eq!(v, vec![0.0, 1.0, 0.0, 1.0]);
        let v = positional_encoding(&[1.0], 1);
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], -1.0);
        let v = positional_encoding(&[0.5], 2);
        let expect = [1.0, 0.0, 0.0, -1.0];
        for (a, b) in v.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(positional_encoding(&[0.1, 0.2, 0.3], 5).len(), 30);
    }

    #[test]
    fn fourier_examples() {
        let ff = FourierFeatures::sample(4, 3, 5.0, 11).unwrap();
        assert_eq!(
            ff.apply(&[0.0; 3]).unwrap(),
            vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]
        );
        let zero = FourierFeatures::from_matrix(Array2::zeros((3, 2)));
        assert_eq!(zero.apply(&[0.3, -2.0]).unwrap(), zero.apply(&[5.0, 1.0]).unwrap());
        let again = FourierFeatures::sample(4, 3, 5.0, 11).unwrap();
        assert_eq!(ff, again);
        assert_eq!(
            ff.apply(&[0.1, 0.2, 0.3]).unwrap(),
            again.apply(&[0.1, 0.2, 0.3]).unwrap()
        );
        assert!(matches!(ff.apply(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn harmonic_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let p = SphericalPoint::new(rng.random_range(-FRAC_PI_2..FRAC_PI_2), rng.random_range(0.0..TAU)).unwrap();
            let y = spherical_harmonics_encoding(&p, 3).unwrap();
            assert_eq!(y.len(), 16);
            assert_abs_diff_eq!(y[0], 0.5 / PI.sqrt(), epsilon = 1e-15);
            assert_abs_diff_eq!(y[0], 0.28209, epsilon = 1e-5);
        }
        let pole = SphericalPoint::new(FRAC_PI_2, 1.1).unwrap();
        let y = spherical_harmonics_encoding(&pole, 4).unwrap();
        for l in 0..=4usize {
            for m in -(l as i64)..=(l as i64) {
                if m != 0 {
                    assert_abs_diff_eq!(y[sh_index(l, m)], 0.0, epsilon = 1e-15);
                }
            }
        }
        assert!(matches!(
            spherical_harmonics_encoding(&pole, 11),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn low_degree_closed_forms() {
        // Y_1^0 = sqrt(3/4pi) cos t; Y_1^1 = -sqrt(3/4pi) sin t cos p
        // Y_2^2 = (1/4) sqrt(15/pi) sin^2 t cos 2p (CS phase squares away)
        let p = SphericalPoint::new(0.4, 2.2).unwrap();
        let (ct, st) = (p.lat().sin(), p.lat().cos());
        let y = real_spherical_harmonics(&p, 2);
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        assert_abs_diff_eq!(y[2], c1 * ct, epsilon = 1e-14);
        assert_abs_diff_eq!(y[3], -c1 * st * p.lon().cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(y[1], -c1 * st * p.lon().sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            y[8],
            0.25 * (15.0 / PI).sqrt() * st * st * (2.0 * p.lon()).cos(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(y[6], 0.25 * (5.0 / PI).sqrt() * (3.0 * ct * ct - 1.0), epsilon = 1e-14);
    }

    #[test]
    fn encoder_dims() {
        let cases = [
            (EncodingConfig::Positional { levels: 7 }, 42),
            (
                EncodingConfig::Fourier {
                    features: 16,
                    sigma: 2.0,
                    seed: 0,
                },
                32,
            ),
            (EncodingConfig::SphericalHarmonics { degree: 4 }, 25),
        ];
        let p = SphericalPoint::new(0.1, 0.2).unwrap();
        for (cfg, dim) in cases {
            let enc = BaselineEncoder::new(cfg).unwrap();
            assert_eq!(enc.output_dim(), dim);
            assert_eq!(enc.encode(&p).len(), dim);
        }
        assert!(BaselineEncoder::new(EncodingConfig::SphericalHarmonics { degree: 12 }).is_err());
        assert!(BaselineEncoder::new(EncodingConfig::Positional { levels: 0 }).is_err());
    }

    proptest! {
        #[test]
        fn bounded_components(lat in -FRAC_PI_2..=FRAC_PI_2, lon in 0.0..TAU, sigma in 0.5f64..10.0) {
            let p = SphericalPoint::new(lat, lon).unwrap();
            for cfg in [EncodingConfig::Positional { levels: 5 }, EncodingConfig::Fourier { features: 8, sigma, seed: 4 }] {
                let v = BaselineEncoder::new(cfg).unwrap().encode(&p);
                prop_assert!(v.iter().all(|x| x.abs() <= 1.0));
            }
        }

        #[test]
        fn harmonics_ignore_longitude_wrap(lat in -FRAC_PI_2..=FRAC_PI_2, lon in 0.0..TAU) {
            let a = SphericalPoint::new(lat, lon).unwrap();
            let b = SphericalPoint::new(lat, lon + TAU).unwrap();
            let ya = spherical_harmonics_encoding(&a, 6).unwrap();
            let yb = spherical_harmonics_encoding(&b, 6).unwrap();
            for (x, y) in ya.iter().zip(&yb) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
