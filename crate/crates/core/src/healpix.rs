//! HEALPix ring-scheme pixelization and the HEALPix feature-grid.
//!
//! Rings are numbered `1..=4·N_side−1` from the North pole. Polar-cap ring
//! `i < N_side` holds `4i` pixels at `z = 1 − i²/(3N_side²)`; belt rings
//! `N_side ≤ i ≤ 3N_side` hold `4N_side` pixels at `z = 4/3 − 2i/(3N_side)`;
//! the southern cap mirrors the northern one. Pixels are indexed ring by ring
//! from the north, and within a ring by increasing center longitude.
//!
//! `ang2pix` here returns the pixel with the *nearest center*, which is the
//! notion the feature-grid needs when gathering parameters around a query.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::interp::{bilinear_weights, Corner, Neighborhood};
use crate::sphere::{lon_offset, SphericalPoint};
use crate::{Error, Real, Result};

/// Standard deviation of the normal distribution used to initialize parameters.
pub const INIT_STD: f64 = 1e-4;

/// Largest supported grid level (`N_side = 2^13`).
pub const MAX_LEVEL: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HealpixSpec {
    n_side: usize,
    level: u32,
}

impl HealpixSpec {
    /// Level `ℓ` has `N_side = 2^(ℓ−1)`.
    pub fn from_level(level: u32) -> Result<Self> {
        if !(1..=MAX_LEVEL).contains(&level) {
            return Err(Error::InvalidConfig(format!(
                "HEALPix level {level} outside 1..={MAX_LEVEL}"
            )));
        }
        Ok(Self {
            n_side: 1 << (level - 1),
            level,
        })
    }

    pub fn from_n_side(n_side: usize) -> Result<Self> {
        check_n_side(n_side)?;
        Self::from_level(n_side.trailing_zeros() + 1)
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn n_pix(&self) -> usize {
        12 * self.n_side * self.n_side
    }

    pub fn n_rings(&self) -> usize {
        4 * self.n_side - 1
    }

    pub fn neighborhood(&self, p: &SphericalPoint) -> Neighborhood {
        neighborhood(self, p)
    }
}

pub fn check_n_side(n_side: usize) -> Result<()> {
    if n_side == 0 || !n_side.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "n_side must be a power of two, got {n_side}"
        )));
    }
    if n_side > 1 << (MAX_LEVEL - 1) {
        return Err(Error::InvalidConfig(format!("n_side {n_side} too large")));
    }
    Ok(())
}

pub fn n_pix(n_side: usize) -> Result<usize> {
    check_n_side(n_side)?;
    Ok(12 * n_side * n_side)
}

/// One isolatitude ring of pixel centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingLayout {
    pub ring: usize,
    pub count: usize,
    /// `cos(colatitude) = sin(latitude)` of the ring.
    pub z: f64,
    /// Center longitude of the ring's pixel 0.
    pub first_lon: f64,
    /// Global index of the ring's pixel 0.
    pub offset: usize,
}

impl RingLayout {
    pub fn lat(&self) -> f64 {
        self.z.asin()
    }

    pub fn center_lon(&self, k: usize) -> f64 {
        self.first_lon + TAU * k as f64 / self.count as f64
    }
}

pub fn ring_layout(n_side: usize, ring: usize) -> Result<RingLayout> {
    check_n_side(n_side)?;
    if ring < 1 || ring > 4 * n_side - 1 {
        return Err(Error::Index(format!(
            "ring {ring} outside 1..={} for n_side {n_side}",
            4 * n_side - 1
        )));
    }
    Ok(layout(n_side, ring))
}

fn layout(ns: usize, ring: usize) -> RingLayout {
    let nsf = ns as f64;
    let npix = 12 * ns * ns;
    if ring < ns {
        let count = 4 * ring;
        RingLayout {
            ring,
            count,
            z: 1.0 - (ring * ring) as f64 / (3.0 * nsf * nsf),
            first_lon: PI / count as f64,
            offset: 2 * ring * (ring - 1),
        }
    } else if ring <= 3 * ns {
        let count = 4 * ns;
        let shifted = (ring - ns + 1) % 2 == 1;
        RingLayout {
            ring,
            count,
            z: 4.0 / 3.0 - 2.0 * ring as f64 / (3.0 * nsf),
            first_lon: if shifted { PI / count as f64 } else { 0.0 },
            offset: 2 * ns * (ns - 1) + (ring - ns) * count,
        }
    } else {
        let mirror = 4 * ns - ring;
        let count = 4 * mirror;
        RingLayout {
            ring,
            count,
            z: -(1.0 - (mirror * mirror) as f64 / (3.0 * nsf * nsf)),
            first_lon: PI / count as f64,
            offset: npix - 2 * mirror * (mirror + 1),
        }
    }
}

/// Ring number and ring-local index of a pixel.
fn locate(ns: usize, pix: usize) -> (usize, usize) {
    let ncap = 2 * ns * (ns - 1);
    let npix = 12 * ns * ns;
    if pix < ncap {
        let ring = (1 + (1 + 2 * pix as u64).isqrt() as usize) >> 1;
        (ring, pix - 2 * ring * (ring - 1))
    } else if pix < npix - ncap {
        let ip = pix - ncap;
        (ip / (4 * ns) + ns, ip % (4 * ns))
    } else {
        let ip = (npix - pix) as u64;
        let mirror = ((1 + (2 * ip - 1).isqrt()) >> 1) as usize;
        let offset = npix - 2 * mirror * (mirror + 1);
        (4 * ns - mirror, pix - offset)
    }
}

pub fn pixel_center(n_side: usize, pix: usize) -> Result<SphericalPoint> {
    let npix = n_pix(n_side)?;
    if pix >= npix {
        return Err(Error::Index(format!("pixel {pix} outside 0..{npix}")));
    }
    Ok(center_unchecked(n_side, pix))
}

fn center_unchecked(ns: usize, pix: usize) -> SphericalPoint {
    let (ring, k) = locate(ns, pix);
    let l = layout(ns, ring);
    SphericalPoint::new(l.lat(), l.center_lon(k)).expect("ring centers are valid points")
}

/// All pixel centers in ring order.
pub fn pixel_centers(n_side: usize) -> Result<Vec<SphericalPoint>> {
    let npix = n_pix(n_side)?;
    Ok((0..npix).map(|p| center_unchecked(n_side, p)).collect())
}

/// Index of the last ring whose latitude is at or above `z`, 0 if none.
fn ring_above(ns: usize, z: f64) -> usize {
    let nsf = ns as f64;
    let n_rings = 4 * ns - 1;
    let t = if z > 2.0 / 3.0 {
        nsf * (3.0 * (1.0 - z)).sqrt()
    } else if z >= -2.0 / 3.0 {
        nsf * (2.0 - 1.5 * z)
    } else {
        4.0 * nsf - nsf * (3.0 * (1.0 + z)).sqrt()
    };
    let mut ring = (t.floor().max(0.0) as usize).min(n_rings);
    while ring >= 1 && layout(ns, ring).z < z {
        ring -= 1;
    }
    while ring < n_rings && layout(ns, ring + 1).z >= z {
        ring += 1;
    }
    ring
}

/// Two ring-local indices whose centers bracket `lon` eastward.
fn bracket(l: &RingLayout, lon: f64) -> (usize, usize) {
    let n = l.count;
    let t = lon_offset(l.first_lon, lon) * n as f64 / TAU;
    let mut k = (t.floor() as usize).min(n - 1);
    let span = TAU / n as f64;
    // floor() can land one pixel off when `lon` sits on a center
    let off = lon_offset(l.center_lon(k), lon);
    if off > PI {
        k = (k + n - 1) % n;
    } else if off >= span {
        k = (k + 1) % n;
    }
    (k, (k + 1) % n)
}

/// The (one or two) rings bracketing `z`; both equal at the poles.
fn bracketing_rings(ns: usize, z: f64) -> (RingLayout, RingLayout) {
    let n_rings = 4 * ns - 1;
    let upper = ring_above(ns, z);
    if upper == 0 {
        let l = layout(ns, 1);
        (l, l)
    } else if upper == n_rings {
        let l = layout(ns, n_rings);
        (l, l)
    } else {
        (layout(ns, upper), layout(ns, upper + 1))
    }
}

/// Nearest pixel center to `p`. Candidates are the two longitude-bracketing
/// centers on each of the four rings around `p`: the half-pixel stagger
/// between neighboring rings can put the nearest center one ring beyond
/// the bracketing pair.
pub fn ang2pix(n_side: usize, p: &SphericalPoint) -> Result<usize> {
    check_n_side(n_side)?;
    Ok(ang2pix_unchecked(n_side, p))
}

pub(crate) fn ang2pix_unchecked(ns: usize, p: &SphericalPoint) -> usize {
    let n_rings = 4 * ns - 1;
    let upper = ring_above(ns, p.z());
    let first = upper.saturating_sub(1).max(1);
    let last = (upper + 2).min(n_rings);
    let v = p.to_unit_vector();
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for ring in first..=last {
        let l = layout(ns, ring);
        let (a, b) = bracket(&l, p.lon());
        for k in [a, b] {
            let c = SphericalPoint::new(l.lat(), l.center_lon(k)).expect("valid center");
            let u = c.to_unit_vector();
            let dot = v[0] * u[0] + v[1] * u[1] + v[2] * u[2];
            let pix = l.offset + k;
            if dot > best.0 || (dot == best.0 && pix < best.1) {
                best = (dot, pix);
            }
        }
    }
    best.1
}

/// Two centers on the ring at or above `p`, two on the ring below, each pair
/// bracketing `p`'s longitude. Poleward of the outermost ring both pairs come
/// from that ring.
pub fn neighborhood(spec: &HealpixSpec, p: &SphericalPoint) -> Neighborhood {
    let (upper, lower) = bracketing_rings(spec.n_side, p.z());
    let pair = |l: &RingLayout| {
        let (a, b) = bracket(l, p.lon());
        let lat = l.lat();
        [
            Corner {
                id: l.offset + a,
                lat,
                lon: l.center_lon(a),
            },
            Corner {
                id: l.offset + b,
                lat,
                lon: l.center_lon(b),
            },
        ]
    };
    let [c0, c1] = pair(&upper);
    let [c2, c3] = pair(&lower);
    Neighborhood {
        corners: [c0, c1, c2, c3],
    }
}

/// Corner ids and interpolation weights for `p`.
///
/// Inside the ring band this is the bilinear rule on [`neighborhood`].
/// Poleward of the outermost ring the longitudinal interpolation along that
/// ring is blended with the mean of its four pixels, reaching the mean at the
/// pole so the feature is continuous there:
///
/// ```text
/// w = (1−μ)·w_ring + μ/4,   μ = (|ψ| − |ψ_ring|) / (π/2 − |ψ_ring|)
/// ```
pub fn lookup(spec: &HealpixSpec, p: &SphericalPoint) -> Result<([usize; 4], [f64; 4])> {
    let nb = neighborhood(spec, p);
    let w = bilinear_weights(p, &nb)?;
    let [a, b, c, _] = nb.corners;
    let npix = spec.n_pix();
    let outer = a.id < 4 || a.id >= npix - 4;
    let ring_lat = a.lat.abs();
    if !(outer && a.lat == c.lat && p.lat().abs() > ring_lat && a.lat.signum() == p.lat().signum()) {
        return Ok((nb.corners.map(|k| k.id), w.w));
    }
    let mu = ((p.lat().abs() - ring_lat) / (std::f64::consts::FRAC_PI_2 - ring_lat)).clamp(0.0, 1.0);
    let base = if a.id < 4 { 0 } else { npix - 4 };
    let mut rest = (base..base + 4).filter(|&id| id != a.id && id != b.id);
    let (r0, r1) = (rest.next().expect("ring of four"), rest.next().expect("ring of four"));
    let lambda = w.lambda_upper;
    let q = mu / 4.0;
    Ok((
        [a.id, b.id, r0, r1],
        [(1.0 - mu) * (1.0 - lambda) + q, (1.0 - mu) * lambda + q, q, q],
    ))
}

// Base-face tables of the HEALPix hierarchy: ring offset and longitude offset.
const JRLL: [i64; 12] = [2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4];
const JPLL: [i64; 12] = [1, 3, 5, 7, 0, 2, 4, 6, 1, 3, 5, 7];

/// Ring pixel to `(x, y, face)` coordinates in the nested hierarchy.
pub(crate) fn ring_to_xyf(ns: usize, pix: usize) -> (i64, i64, usize) {
    let nsi = ns as i64;
    let nl2 = 2 * nsi;
    let ncap = 2 * nsi * (nsi - 1);
    let npix = 12 * nsi * nsi;
    let pix = pix as i64;
    let (iring, iphi, kshift, nr, face);
    if pix < ncap {
        let r = (1 + (1 + 2 * pix as u64).isqrt() as i64) >> 1;
        iring = r;
        iphi = pix + 1 - 2 * r * (r - 1);
        kshift = 0;
        nr = r;
        face = (iphi - 1) / nr;
    } else if pix < npix - ncap {
        let ip = pix - ncap;
        let tmp = ip / (4 * nsi);
        iring = tmp + nsi;
        iphi = ip - tmp * 4 * nsi + 1;
        kshift = (iring + nsi) & 1;
        nr = nsi;
        let ire = tmp + 1;
        let irm = nl2 + 1 - tmp;
        let ifm = (iphi - (ire >> 1) + nsi - 1) / nsi;
        let ifp = (iphi - (irm >> 1) + nsi - 1) / nsi;
        face = if ifp == ifm {
            ifp | 4
        } else if ifp < ifm {
            ifp
        } else {
            ifm + 8
        };
    } else {
        let ip = npix - pix;
        let r = (1 + (2 * ip as u64 - 1).isqrt() as i64) >> 1;
        iphi = 4 * r + 1 - (ip - 2 * r * (r - 1));
        kshift = 0;
        nr = r;
        iring = 2 * nl2 - r;
        face = (iphi - 1) / nr + 8;
    }
    let face = face as usize;
    let irt = iring - (2 + (face as i64 >> 2)) * nsi + 1;
    let mut ipt = 2 * iphi - JPLL[face] * nr - kshift - 1;
    if ipt >= nl2 {
        ipt -= 8 * nsi;
    }
    ((ipt - irt) >> 1, (-ipt - irt) >> 1, face)
}

pub(crate) fn xyf_to_ring(ns: usize, ix: i64, iy: i64, face: usize) -> usize {
    let nsi = ns as i64;
    let nl4 = 4 * nsi;
    let jr = JRLL[face] * nsi - ix - iy - 1;
    let l = layout(ns, jr as usize);
    let nr = (l.count / 4) as i64;
    let kshift = if l.first_lon == 0.0 { 1 } else { 0 };
    let mut jp = (JPLL[face] * nr + ix - iy + 1 + kshift) / 2;
    if jp < 1 {
        jp += nl4;
    }
    l.offset + (jp - 1) as usize
}

/// Ring index at `coarse_n_side` of the pixel containing fine pixel `pix`.
pub fn parent_pixel(fine_n_side: usize, pix: usize, coarse_n_side: usize) -> Result<usize> {
    check_n_side(fine_n_side)?;
    check_n_side(coarse_n_side)?;
    if coarse_n_side > fine_n_side {
        return Err(Error::InvalidConfig(format!(
            "coarse n_side {coarse_n_side} exceeds fine n_side {fine_n_side}"
        )));
    }
    if pix >= 12 * fine_n_side * fine_n_side {
        return Err(Error::Index(format!("pixel {pix} outside n_side {fine_n_side} map")));
    }
    let factor = (fine_n_side / coarse_n_side) as i64;
    let (x, y, f) = ring_to_xyf(fine_n_side, pix);
    Ok(xyf_to_ring(coarse_n_side, x / factor, y / factor, f))
}

/// One level of learnable `D`-vectors at HEALPix pixel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct HealpixGrid<F> {
    spec: HealpixSpec,
    feature_dim: usize,
    params: Vec<F>,
}

impl<F: Real> HealpixGrid<F> {
    pub fn zeros(spec: HealpixSpec, feature_dim: usize) -> Result<Self> {
        if feature_dim < 1 {
            return Err(Error::InvalidConfig("feature_dim must be at least 1".into()));
        }
        Ok(Self {
            spec,
            feature_dim,
            params: vec![F::zero(); spec.n_pix() * feature_dim],
        })
    }

    /// Parameters drawn from `N(0, 1e−4)`.
    pub fn init<R: Rng + ?Sized>(spec: HealpixSpec, feature_dim: usize, rng: &mut R) -> Result<Self> {
        let mut grid = Self::zeros(spec, feature_dim)?;
        let dist = Normal::new(0.0, INIT_STD).expect("valid std");
        for p in grid.params.iter_mut() {
            *p = F::of(dist.sample(rng));
        }
        Ok(grid)
    }

    pub fn from_params(spec: HealpixSpec, feature_dim: usize, params: Vec<F>) -> Result<Self> {
        let expected = spec.n_pix() * feature_dim;
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

    pub fn spec(&self) -> &HealpixSpec {
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
