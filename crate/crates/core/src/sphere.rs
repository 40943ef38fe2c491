//! Spherical coordinates on the unit sphere.
//!
//! Latitude is geodetic: 0 on the equator, +π/2 at the North pole.
//! Longitude lives in `[0, 2π)`.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::{Error, Result};

/// A point on the unit sphere, `(lat, lon)` in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    lat: f64,
    lon: f64,
}

impl SphericalPoint {
    /// Builds a point, wrapping any finite longitude into `[0, 2π)`.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-FRAC_PI_2..=FRAC_PI_2).contains(&lat) {
            return Err(Error::InvalidCoordinate(format!(
                "latitude {lat} outside [-pi/2, pi/2]"
            )));
        }
        Ok(Self {
            lat,
            lon: wrap_longitude(lon)?,
        })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        if !lat_deg.is_finite() || !(-90.0..=90.0).contains(&lat_deg) {
            return Err(Error::InvalidCoordinate(format!(
                "latitude {lat_deg} deg outside [-90, 90]"
            )));
        }
        Self::new(lat_deg.to_radians().clamp(-FRAC_PI_2, FRAC_PI_2), lon_deg.to_radians())
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Cosine of the colatitude, `sin(lat)`.
    #[inline]
    pub fn z(&self) -> f64 {
        self.lat.sin()
    }

    pub fn to_unit_vector(&self) -> [f64; 3] {
        to_unit_vector(self)
    }

    /// Great-circle angle between two points, in radians.
    pub fn angular_distance(&self, other: &SphericalPoint) -> f64 {
        let a = self.to_unit_vector();
        let b = other.to_unit_vector();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos)
    }
}

/// Reduces a finite longitude into `[0, 2π)`.
pub fn wrap_longitude(lon_raw: f64) -> Result<f64> {
    if !lon_raw.is_finite() {
        return Err(Error::InvalidCoordinate(format!("longitude {lon_raw} is not finite")));
    }
    Ok(wrap_unchecked(lon_raw))
}

#[inline]
pub(crate) fn wrap_unchecked(lon: f64) -> f64 {
    let w = lon.rem_euclid(TAU);
    // rem_euclid rounds tiny negatives up to exactly TAU
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub fn to_unit_vector(p: &SphericalPoint) -> [f64; 3] {
    let (sin_lat, cos_lat) = p.lat.sin_cos();
    let (sin_lon, cos_lon) = p.lon.sin_cos();
    [cos_lat * cos_lon, cos_lat * sin_lon, sin_lat]
}

/// Eastward length of the longitude interval running from `lon_a` to
/// `lon_b`, crossing the prime meridian when `lon_b <= lon_a`.
pub fn lon_distance_on_interval(lon_a: f64, lon_b: f64) -> Result<f64> {
    if lon_a == lon_b {
        return Err(Error::DegenerateInterval(lon_a));
    }
    if lon_b > lon_a {
        Ok(lon_b - lon_a)
    } else {
        Ok(lon_b - lon_a + TAU)
    }
}

/// Eastward offset of `lon` from `start`, in `[0, 2π)`.
#[inline]
pub(crate) fn lon_offset(start: f64, lon: f64) -> f64 {
    wrap_unchecked(lon - start)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_longitude(0.0).unwrap(), 0.0);
        assert_eq!(wrap_longitude(TAU).unwrap(), 0.0);
        assert_abs_diff_eq!(wrap_longitude(-FRAC_PI_2).unwrap(), 1.5 * PI, epsilon = 1e-15);
        assert_eq!(wrap_longitude(-1e-18).unwrap(), 0.0);
        assert!(matches!(wrap_longitude(f64::NAN), Err(Error::InvalidCoordinate(_))));
        assert!(wrap_longitude(f64::INFINITY).is_err());
    }

    #[test]
    fn unit_vector_examples() {
        let v = SphericalPoint::new(0.0, 0.0).unwrap().to_unit_vector();
        assert_abs_diff_eq!(v[0], 1.0);
        let v = SphericalPoint::new(FRAC_PI_2, 1.3).unwrap().to_unit_vector();
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 1.0);
        let v = SphericalPoint::new(0.0, FRAC_PI_2).unwrap().to_unit_vector();
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1.0);
    }

    #[test]
    fn interval_examples() {
        assert_abs_diff_eq!(lon_distance_on_interval(0.0, PI).unwrap(), PI);
        assert_abs_diff_eq!(
            lon_distance_on_interval(1.5 * PI, FRAC_PI_2).unwrap(),
            PI,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(lon_distance_on_interval(PI / 4.0, FRAC_PI_2).unwrap(), PI / 4.0);
        assert!(matches!(
            lon_distance_on_interval(1.0, 1.0),
            Err(Error::DegenerateInterval(_))
        ));
    }

    #[test]
    fn rejects_bad_latitude() {
        assert!(SphericalPoint::new(2.0, 0.0).is_err());
        assert!(SphericalPoint::from_degrees(91.0, 0.0).is_err());
        assert!(SphericalPoint::new(f64::NAN, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent(x in -1e6f64..1e6) {
            let w = wrap_longitude(x).unwrap();
            prop_assert!((0.0..TAU).contains(&w));
            prop_assert_eq!(wrap_longitude(w).unwrap(), w);
        }

        #[test]
        fn intervals_complement(a in 0.0..TAU, b in 0.0..TAU) {
            prop_assume!(a != b);
            let s = lon_distance_on_interval(a, b).unwrap() + lon_distance_on_interval(b, a).unwrap();
            prop_assert!((s - TAU).abs() < 1e-12);
        }

        #[test]
        fn unit_vectors_are_unit(lat in -FRAC_PI_2..=FRAC_PI_2, lon in 0.0..TAU) {
            let v = SphericalPoint::new(lat, lon).unwrap().to_unit_vector();
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            prop_assert!((n - 1.0).abs() < 1e-12);
        }

        #[test]
        fn distance_symmetric(
            la in -FRAC_PI_2..=FRAC_PI_2, lo in 0.0..TAU,
            lb in -FRAC_PI_2..=FRAC_PI_2, lp in 0.0..TAU,
        ) {
            let a = SphericalPoint::new(la, lo).unwrap();
            let b = SphericalPoint::new(lb, lp).unwrap();
            prop_assert!((a.angular_distance(&b) - b.angular_distance(&a)).abs() < 1e-14);
            prop_assert_eq!(a.angular_distance(&a), 0.0);
        }
    }
}
