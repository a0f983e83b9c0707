//! Deterministic point-set constructions on `S^2` and the CSV loader for
//! externally supplied node files (spherical designs in particular).

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{GeometryError, PointSet, SpherePoint};
use crate::scalar::Real;

/// Built-in generators. All are deterministic constructions on `S^2`;
/// external files cover everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// Generalized spiral points (Rakhmanov-Saff-Zhou construction).
    Spiral,
    /// Fibonacci (golden-angle) lattice; the quasi-uniform fallback when no
    /// spherical design file is available.
    Fibonacci,
    /// Centers of the recursive zonal equal-area partition regions.
    EqualAreaCenters,
}

impl FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spiral" => Ok(Self::Spiral),
            "fibonacci" => Ok(Self::Fibonacci),
            "equal-area-centers" | "equal_area_centers" => Ok(Self::EqualAreaCenters),
            other => Err(format!(
                "unknown generator '{other}' (expected spiral, fibonacci, or equal-area-centers)"
            )),
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Spiral => "spiral",
            Self::Fibonacci => "fibonacci",
            Self::EqualAreaCenters => "equal-area-centers",
        })
    }
}

pub fn generate<T: Real>(kind: GeneratorKind, n: usize) -> Result<PointSet<T>, GeometryError> {
    match kind {
        GeneratorKind::Spiral => spiral_points(n),
        GeneratorKind::Fibonacci => fibonacci_points(n),
        GeneratorKind::EqualAreaCenters => equal_area_centers(n),
    }
}

/// Fibonacci lattice on `S^2`: heights at uniform midpoints, longitudes at
/// golden-angle increments.
pub fn fibonacci_points<T: Real>(n: usize) -> Result<PointSet<T>, GeometryError> {
    if n == 0 {
        return Err(GeometryError::BadCount(0));
    }
    let points = raw_fibonacci::<T>(n)
        .into_iter()
        .map(|coords| SpherePoint { coords })
        .collect();
    Ok(PointSet::new_unchecked(points, Some(format!("fibonacci-{n}"))))
}

/// Unit coordinate vectors of the Fibonacci lattice, without the
/// `PointSet` validation overhead (used for dense probe grids).
pub(crate) fn raw_fibonacci<T: Real>(n: usize) -> Vec<Vec<T>> {
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * ((i as f64 / golden) % 1.0);
            vec![T::of(r * phi.cos()), T::of(r * phi.sin()), T::of(z)]
        })
        .collect()
}

/// Generalized spiral points on `S^2`.
///
/// Heights are uniform on `[-1, 1]`; the azimuth advances by
/// `3.6 / sqrt(n (1 - h^2))` between consecutive points, with both poles
/// assigned azimuth zero.
pub fn spiral_points<T: Real>(n: usize) -> Result<PointSet<T>, GeometryError> {
    if n == 0 {
        return Err(GeometryError::BadCount(0));
    }
    if n == 1 {
        return Ok(PointSet::new_unchecked(
            vec![SpherePoint::north_pole(2)],
            Some("spiral-1".into()),
        ));
    }
    let mut points = Vec::with_capacity(n);
    let mut phi = 0.0f64;
    for k in 0..n {
        let h = -1.0 + 2.0 * k as f64 / (n as f64 - 1.0);
        let sin_theta_sq = (1.0 - h * h).max(0.0);
        if k == 0 || k == n - 1 {
            phi = 0.0;
        } else {
            phi = (phi + 3.6 / (n as f64 * sin_theta_sq).sqrt()) % (2.0 * std::f64::consts::PI);
        }
        let r = sin_theta_sq.sqrt();
        points.push(SpherePoint {
            coords: vec![T::of(r * phi.cos()), T::of(r * phi.sin()), T::of(h)],
        });
    }
    Ok(PointSet::new_unchecked(points, Some(format!("spiral-{n}"))))
}

/// Centers of the `n` regions of the recursive zonal equal-area partition
/// of `S^2`: polar caps keep their poles, collar regions get the midpoint
/// in colatitude and longitude.
pub fn equal_area_centers<T: Real>(n: usize) -> Result<PointSet<T>, GeometryError> {
    if n == 0 {
        return Err(GeometryError::BadCount(0));
    }
    let label = Some(format!("equal-area-centers-{n}"));
    if n == 1 {
        return Ok(PointSet::new_unchecked(vec![SpherePoint::north_pole(2)], label));
    }
    let mut points: Vec<SpherePoint<T>> = Vec::with_capacity(n);
    points.push(SpherePoint::north_pole(2));
    if n > 2 {
        // polar cap colatitude: cap area = 4 pi / n
        let theta_c = (1.0 - 2.0 / n as f64).acos();
        let ideal_angle = (4.0 * std::f64::consts::PI / n as f64).sqrt();
        let span = std::f64::consts::PI - 2.0 * theta_c;
        let n_collars = ((span / ideal_angle).round() as usize).max(1);
        let fitting = span / n_collars as f64;
        let mut carry = 0.0f64;
        for i in 0..n_collars {
            let top = theta_c + i as f64 * fitting;
            let bottom = theta_c + (i + 1) as f64 * fitting;
            // regions in this collar: collar area / region area
            let ideal = n as f64 * (top.cos() - bottom.cos()) / 2.0;
            let m = (ideal + carry).round().max(0.0) as usize;
            carry += ideal - m as f64;
            let colat = T::of((top + bottom) / 2.0);
            // stagger consecutive collars by half a region width so regions
            // (and their centers) interlock instead of stacking in longitude
            let stagger = 0.5 * i as f64;
            for j in 0..m {
                let lon = T::of(
                    (j as f64 + 0.5 + stagger) * 2.0 * std::f64::consts::PI / m as f64
                        % (2.0 * std::f64::consts::PI),
                );
                points.push(SpherePoint::from_spherical(colat, lon));
            }
        }
    }
    let mut south = SpherePoint::north_pole(2);
    south.coords[2] = -T::one();
    points.push(south);
    debug_assert_eq!(points.len(), n, "equal-area region count mismatch");
    PointSet::new(points, label)
}

/// `n` independent uniform points on `S^2`, deterministic in `seed`.
pub fn random_points<T: Real>(n: usize, seed: u64) -> Result<PointSet<T>, GeometryError> {
    if n == 0 {
        return Err(GeometryError::BadCount(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            loop {
                let v: Vec<f64> =
                    (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-8 {
                    return SpherePoint {
                        coords: v.into_iter().map(|x| T::of(x / norm)).collect(),
                    };
                }
            }
        })
        .collect();
    PointSet::new(points, Some(format!("random-{n}-seed{seed}")))
}

/// Loads a point set from CSV with header `x0,x1,...,xd`.
///
/// Rows are normalized to unit length; rows whose pre-normalization norm
/// deviates from 1 by more than 1e-6 are rejected unless `lenient` is set.
pub fn load_point_set<T: Real>(path: &Path, lenient: bool) -> Result<PointSet<T>, GeometryError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or(GeometryError::Parse { line: 1, reason: "empty file".into() })??;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if cols.len() < 2 || cols.iter().enumerate().any(|(i, c)| *c != format!("x{i}")) {
        return Err(GeometryError::Parse {
            line: 1,
            reason: format!("expected header x0,x1,...,xd, got '{header}'"),
        });
    }
    let width = cols.len();
    let mut points = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != width {
            return Err(GeometryError::Parse {
                line: line_no,
                reason: format!("expected {width} fields, got {}", fields.len()),
            });
        }
        let mut coords = Vec::with_capacity(width);
        for f in &fields {
            let v: f64 = f.parse().map_err(|e| GeometryError::Parse {
                line: line_no,
                reason: format!("bad float '{f}': {e}"),
            })?;
            coords.push(v);
        }
        let norm: f64 = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !lenient && (norm - 1.0).abs() > 1e-6 {
            return Err(GeometryError::NormOutOfTolerance { line: line_no, norm });
        }
        points.push(
            SpherePoint::new(coords.into_iter().map(T::of).collect())
                .map_err(|_| GeometryError::Parse { line: line_no, reason: "degenerate row".into() })?,
        );
    }
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    PointSet::new(points, label)
}

/// Writes a point set in the CSV format understood by [`load_point_set`].
pub fn save_point_set<T: Real>(pts: &PointSet<T>, path: &Path) -> Result<(), GeometryError> {
    let mut out = BufWriter::new(File::create(path)?);
    let d = pts.dim();
    let header: Vec<String> = (0..=d).map(|i| format!("x{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in pts.points() {
        let row: Vec<String> = p.coords().iter().map(|c| format!("{c}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}
