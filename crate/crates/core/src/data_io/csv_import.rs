use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use crate::healpix::{ang2pix, pixel_center};
use crate::tasks::{FieldDataset, Geometry};
use crate::{Error, Result, SphericalPoint};

/// Positions must coincide with grid positions to within this many radians.
pub const SNAP_TOL: f64 = 1e-9;

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Storage index of the grid position at `p`, if there is one.
fn slot_of(geometry: &Geometry, p: &SphericalPoint) -> Result<Option<usize>> {
    match *geometry {
        Geometry::Equirect { n_lat_pts, n_lon_pts } => {
            let i = if n_lat_pts == 1 {
                0
            } else {
                ((std::f64::consts::FRAC_PI_2 - p.lat()) / PI * (n_lat_pts - 1) as f64).round() as usize
            };
            let i = i.min(n_lat_pts - 1);
            let j = (p.lon() / (2.0 * PI) * n_lon_pts as f64).round() as usize % n_lon_pts;
            let on_grid = (Geometry::row_lat(n_lat_pts, i) - p.lat()).abs() <= SNAP_TOL
                && angle_gap(Geometry::col_lon(n_lon_pts, j), p.lon()) <= SNAP_TOL;
            Ok(on_grid.then_some(i * n_lon_pts + j))
        }
        Geometry::Healpix { n_side } => {
            let pix = ang2pix(n_side, p)?;
            let c = pixel_center(n_side, pix)?;
            let on_grid = (c.lat() - p.lat()).abs() <= SNAP_TOL && angle_gap(c.lon(), p.lon()) <= SNAP_TOL;
            Ok(on_grid.then_some(pix))
        }
    }
}

/// Reads `lat_deg,lon_deg,value[,snapshot]` rows onto `geometry`. A first
/// row whose latitude is not a number is treated as a header.
pub fn import_csv(path: impl AsRef<Path>, geometry: Geometry) -> Result<FieldDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    import_csv_reader(file, geometry)
}

pub fn import_csv_reader<R: std::io::Read>(reader: R, geometry: Geometry) -> Result<FieldDataset> {
    geometry.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut seen: HashMap<(usize, usize), (u64, f32)> = HashMap::new();
    let mut n_snapshots = 0usize;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        let field = |i: usize, name: &str| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| Error::InvalidInput(format!("line {line}: missing {name}")))
        };
        let num = |i: usize, name: &str| -> Result<f64> {
            let s = field(i, name)?;
            s.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("line {line}: cannot parse {name} {s:?}")))
        };
        if k == 0 && rec.get(0).is_some_and(|s| s.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() < 3 || rec.len() > 4 {
            return Err(Error::InvalidInput(format!(
                "line {line}: expected 3 or 4 columns, found {}",
                rec.len()
            )));
        }
        let (lat, lon, value) = (num(0, "latitude")?, num(1, "longitude")?, num(2, "value")?);
        let snapshot = match rec.get(3) {
            Some(s) => s
                .parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("line {line}: cannot parse snapshot {s:?}")))?,
            None => 0,
        };
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidCoordinate(format!(
                "line {line}: latitude {lat} out of range [-90, 90]"
            )));
        }
        let p = SphericalPoint::from_degrees(lat, lon)
            .map_err(|e| Error::InvalidCoordinate(format!("line {line}: {e}")))?;
        let slot = slot_of(&geometry, &p)?.ok_or_else(|| {
            Error::InvalidInput(format!("line {line}: ({lat}, {lon}) is not a {geometry} grid position"))
        })?;
        if let Some((first, _)) = seen.insert((snapshot, slot), (line, value as f32)) {
            return Err(Error::InvalidInput(format!(
                "duplicate slot: lines {first} and {line} both give point {slot} of snapshot {snapshot}"
            )));
        }
        n_snapshots = n_snapshots.max(snapshot + 1);
    }
    if seen.is_empty() {
        return Err(Error::InvalidInput("csv has no data rows".into()));
    }
    let n = geometry.n_points();
    let mut values = vec![0.0f32; n * n_snapshots];
    let mut missing = Vec::new();
    for s in 0..n_snapshots {
        for i in 0..n {
            match seen.get(&(s, i)) {
                Some(&(_, v)) => values[s * n + i] = v,
                None => missing.push((s, i)),
            }
        }
    }
    if !missing.is_empty() {
        let shown: Vec<String> = missing
            .iter()
            .take(10)
            .map(|(s, i)| format!("snapshot {s} point {i}"))
            .collect();
        return Err(Error::InvalidInput(format!(
            "{} missing grid slots: {}{}",
            missing.len(),
            shown.join(", "),
            if missing.len() > 10 { ", ..." } else { "" }
        )));
    }
    FieldDataset::new(geometry, 1, n_snapshots, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, g: Geometry) -> Result<FieldDataset> {
        import_csv_reader(text.as_bytes(), g)
    }

    const ROW: Geometry = Geometry::Equirect {
        n_lat_pts: 1,
        n_lon_pts: 2,
    };

    #[test]
    fn toy_grid() {
        let ds = load("lat,lon,value\n0,180,2.5\n0,0,1.5\n", ROW).unwrap();
        assert_eq!(ds.values(), &[1.5, 2.5]);
        // 360 wraps onto the prime meridian
        let ds = load("0,360,1\n0,180,2\n", ROW).unwrap();
        assert_eq!(ds.values(), &[1.0, 2.0]);
    }

    #[test]
    fn errors() {
        let err = load("0,0,1\n0,180,2\n0,0,3\n", ROW).unwrap_err().to_string();
        assert!(err.contains("lines 1 and 3"), "{err}");
        let err = load("91,0,1.0\n", ROW).unwrap_err().to_string();
        assert!(err.contains("out of range"), "{err}");
        let err = load("0,0,1\n", ROW).unwrap_err().to_string();
        assert!(err.contains("1 missing"), "{err}");
        let err = load("0,0,1\n0,90,2\n", ROW).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("not a"), "{err}");
        let err = load("0,0,x\n", ROW).unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("value"), "{err}");
    }

    #[test]
    fn snapshots_and_healpix() {
        let g = Geometry::Healpix { n_side: 1 };
        let pts = g.points().unwrap();
        let mut text = String::new();
        for s in 0..2 {
            for (i, p) in pts.iter().enumerate() {
                text += &format!(
                    "{},{},{},{s}\n",
                    p.lat().to_degrees(),
                    p.lon().to_degrees(),
                    i + 100 * s
                );
            }
        }
        let ds = load(&text, g).unwrap();
        assert_eq!(ds.snapshots(), 2);
        assert_eq!(ds.value(1, 5, 0), 105.0);
    }
}
