//! Planar point processes: homogeneous Poisson and Matérn type-II hardcore.
//!
//! Patterns are generated on a disk of radius `radius + guard` around the
//! origin. Statistics are collected on the inner disk only, so that the
//! thinning of every counted point sees all parents that could remove it.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid hardcore parameters: {0}")]
    InvalidParams(String),
    #[error("density {lambda_u} m^-2 cannot be reached with hardcore distance {d} m (needs λπd² < 1)")]
    UnreachableDensity { lambda_u: f64, d: f64 },
    #[error("separation {v} m outside [0, 2d] with d = {d} m")]
    SeparationOutOfRange { v: f64, d: f64 },
    #[error("no point patterns supplied")]
    EmptyPatternSet,
    #[error("invalid histogram bins: {0}")]
    InvalidBins(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Disk window centred at the origin with an outer guard ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub radius: f64,
    pub guard: f64,
}

impl Window {
    pub fn new(radius: f64, guard: f64) -> Result<Self, GeometryError> {
        let w = Window { radius, guard };
        w.validate()?;
        Ok(w)
    }

    /// Window whose guard is `max(5d, 500 m)`.
    pub fn with_default_guard(radius: f64, d: f64) -> Result<Self, GeometryError> {
        Window::new(radius, (5.0 * d).max(500.0))
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(GeometryError::InvalidWindow(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.guard >= 0.0 && self.guard.is_finite()) {
            return Err(GeometryError::InvalidWindow(format!("guard must be non-negative, got {}", self.guard)));
        }
        Ok(())
    }

    pub fn outer_radius(&self) -> f64 {
        self.radius + self.guard
    }

    /// Area of the inner (statistics) disk.
    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn outer_area(&self) -> f64 {
        PI * self.outer_radius() * self.outer_radius()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    #[inline]
    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    Uav,
    Bs,
}

impl Tier {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Uav => "uav",
            Tier::Bs => "bs",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Tier {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "uav" => Ok(Tier::Uav),
            "bs" => Ok(Tier::Bs),
            other => Err(GeometryError::Csv(format!("unknown tier {other:?}"))),
        }
    }
}

/// Finite set of planar node positions of one tier.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub points: Vec<Point>,
    pub tier: Tier,
    /// 0 for base stations, h for the UAV tier.
    pub altitude: f64,
    pub window: Window,
}

impl PointPattern {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points inside the statistics disk.
    pub fn count_inside(&self) -> usize {
        let r2 = self.window.radius * self.window.radius;
        self.points.iter().filter(|p| p.norm_sq() <= r2).count()
    }

    /// Smallest planar distance between two distinct points, or `None` for
    /// fewer than two points.
    pub fn min_pairwise_distance(&self) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        // Grid sized for about one point per cell; grow the search ring until
        // a neighbour is certain to have been seen.
        let extent = self.window.outer_radius();
        let cell = (2.0 * extent / (self.points.len() as f64).sqrt()).max(f64::MIN_POSITIVE);
        let grid = NeighborGrid::new(&self.points, extent, cell);
        let mut best = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let mut ring = 1;
            loop {
                let mut local = f64::INFINITY;
                grid.for_each_in_ring(p, ring, |j| {
                    if j != i {
                        local = local.min(p.distance_sq(&self.points[j]));
                    }
                });
                if local.is_finite() && local.sqrt() < (ring as f64) * grid.cell {
                    best = best.min(local);
                    break;
                }
                if ring > grid.side {
                    best = best.min(local);
                    break;
                }
                ring += 1;
            }
        }
        Some(best.sqrt())
    }

    /// CSV with columns `x_m,y_m,tier`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x_m,y_m,tier")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.x, p.y, self.tier)?;
        }
        Ok(())
    }
}

/// Reads rows written by [`PointPattern::write_csv`].
pub fn read_points_csv<R: BufRead>(input: R) -> Result<Vec<(Point, Tier)>, GeometryError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| GeometryError::Csv("missing header".into()))?
        .map_err(|e| GeometryError::Csv(e.to_string()))?;
    if header.trim() != "x_m,y_m,tier" {
        return Err(GeometryError::Csv(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| GeometryError::Csv(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(GeometryError::Csv(format!("line {}: expected 3 fields", n + 2)));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| GeometryError::Csv(format!("line {}: {e}", n + 2)))
        };
        rows.push((Point::new(parse(fields[0])?, parse(fields[1])?), fields[2].parse()?));
    }
    Ok(rows)
}

/// Uniform bucket grid over the square [-extent, extent]².
pub(crate) struct NeighborGrid {
    extent: f64,
    cell: f64,
    side: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl NeighborGrid {
    pub(crate) fn new(points: &[Point], extent: f64, cell: f64) -> Self {
        let side = ((2.0 * extent / cell).ceil() as usize).clamp(1, 1 << 12);
        let cell = 2.0 * extent / side as f64;
        let mut grid = NeighborGrid {
            extent,
            cell,
            side,
            starts: vec![0; side * side + 1],
            items: vec![0; points.len()],
        };
        let keys: Vec<usize> = points.iter().map(|p| grid.key(p)).collect();
        for &k in &keys {
            grid.starts[k + 1] += 1;
        }
        for k in 0..side * side {
            grid.starts[k + 1] += grid.starts[k];
        }
        let mut fill = grid.starts.clone();
        for (i, &k) in keys.iter().enumerate() {
            grid.items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        grid
    }

    #[inline]
    fn coord(&self, v: f64) -> usize {
        (((v + self.extent) / self.cell).floor().max(0.0) as usize).min(self.side - 1)
    }

    #[inline]
    fn key(&self, p: &Point) -> usize {
        self.coord(p.y) * self.side + self.coord(p.x)
    }

    /// Calls `f` on every point whose cell lies within `ring` cells of the
    /// cell containing `p` (Chebyshev distance).
    pub(crate) fn for_each_in_ring<F: FnMut(usize)>(&self, p: &Point, ring: usize, mut f: F) {
        let cx = self.coord(p.x) as isize;
        let cy = self.coord(p.y) as isize;
        let r = ring as isize;
        let max = self.side as isize - 1;
        for gy in (cy - r).max(0)..=(cy + r).min(max) {
            for gx in (cx - r).max(0)..=(cx + r).min(max) {
                let k = gy as usize * self.side + gx as usize;
                for &j in &self.items[self.starts[k] as usize..self.starts[k + 1] as usize] {
                    f(j as usize);
                }
            }
        }
    }

    /// Calls `f(j, dist²)` on every point within `radius` of `p`.
    pub(crate) fn for_each_within<F: FnMut(usize, f64)>(&self, points: &[Point], p: &Point, radius: f64, mut f: F) {
        let ring = (radius / self.cell).ceil() as usize;
        let r2 = radius * radius;
        self.for_each_in_ring(p, ring.max(1), |j| {
            let d2 = p.distance_sq(&points[j]);
            if d2 <= r2 {
                f(j, d2);
            }
        });
    }
}

/// Matérn type-II parameters: parent density, hardcore distance and the
/// resulting retained density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhpParams {
    pub lambda_p: f64,
    pub d: f64,
    pub lambda_u: f64,
}

impl MhpParams {
    pub fn from_parent(lambda_p: f64, d: f64) -> Result<Self, GeometryError> {
        if !(lambda_p >= 0.0 && lambda_p.is_finite()) || !(d >= 0.0 && d.is_finite()) {
            return Err(GeometryError::InvalidParams(format!("lambda_p = {lambda_p}, d = {d}")));
        }
        Ok(MhpParams {
            lambda_p,
            d,
            lambda_u: mhp_density(lambda_p, d),
        })
    }

    pub fn from_density(lambda_u: f64, d: f64) -> Result<Self, GeometryError> {
        if !(lambda_u >= 0.0 && lambda_u.is_finite()) || !(d >= 0.0 && d.is_finite()) {
            return Err(GeometryError::InvalidParams(format!("lambda_u = {lambda_u}, d = {d}")));
        }
        Ok(MhpParams {
            lambda_p: parent_density(lambda_u, d)?,
            d,
            lambda_u,
        })
    }

    /// Probability that a parent point survives the thinning.
    pub fn retention(&self) -> f64 {
        if self.lambda_p == 0.0 {
            1.0
        } else {
            self.lambda_u / self.lambda_p
        }
    }
}

/// Retained density (1 − exp(−λ_p π d²)) / (π d²); λ_p at d = 0.
pub fn mhp_density(lambda_p: f64, d: f64) -> f64 {
    let area = PI * d * d;
    let x = lambda_p * area;
    if x == 0.0 {
        return lambda_p;
    }
    -(-x).exp_m1() / area
}

/// Parent density that thins to `lambda_u` at hardcore distance `d`.
pub fn parent_density(lambda_u: f64, d: f64) -> Result<f64, GeometryError> {
    let area = PI * d * d;
    let x = lambda_u * area;
    if x >= 1.0 {
        return Err(GeometryError::UnreachableDensity { lambda_u, d });
    }
    if x == 0.0 {
        return Ok(lambda_u);
    }
    Ok(-(-x).ln_1p() / area)
}

/// Area of the union of two radius-d disks whose centres are v apart.
pub fn union_area(v: f64, d: f64) -> Result<f64, GeometryError> {
    if !(v >= 0.0 && v <= 2.0 * d) {
        return Err(GeometryError::SeparationOutOfRange { v, d });
    }
    Ok(union_area_unchecked(v, d))
}

#[inline]
fn union_area_unchecked(v: f64, d: f64) -> f64 {
    let ratio = (v / (2.0 * d)).min(1.0);
    2.0 * PI * d * d - 2.0 * d * d * ratio.acos() + v * (d * d - v * v / 4.0).max(0.0).sqrt()
}

/// Second-order product density of the Matérn type-II process at separation v.
pub fn product_density(v: f64, params: &MhpParams) -> f64 {
    let d = params.d;
    if v >= 2.0 * d {
        return params.lambda_u * params.lambda_u;
    }
    if v < d {
        return 0.0;
    }
    let disk = PI * d * d;
    let union = union_area_unchecked(v, d);
    let retained_disk = -(-params.lambda_p * disk).exp_m1();
    let retained_union = -(-params.lambda_p * union).exp_m1();
    (2.0 * union * retained_disk - 2.0 * disk * retained_union) / (disk * union * (union - disk))
}

fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point::new(r * theta.cos(), r * theta.sin())
}

fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite Poisson mean");
    dist.sample(rng) as usize
}

/// Homogeneous PPP of the given density on the window including its guard.
pub fn sample_ppp<R: Rng + ?Sized>(density: f64, window: &Window, tier: Tier, altitude: f64, rng: &mut R) -> PointPattern {
    let n = poisson_count(rng, density * window.outer_area());
    let outer = window.outer_radius();
    let points = (0..n).map(|_| uniform_in_disk(rng, outer)).collect();
    PointPattern {
        points,
        tier,
        altitude,
        window: *window,
    }
}

/// Matérn type-II hardcore pattern.
///
/// Parents are drawn from a PPP of density λ_p, each with an independent
/// uniform mark; a parent is kept iff no other parent within distance d has
/// a smaller mark. With d = 0 the parent pattern is returned unchanged.
pub fn sample_mhp<R: Rng + ?Sized>(params: &MhpParams, window: &Window, altitude: f64, rng: &mut R) -> PointPattern {
    let parents = sample_ppp(params.lambda_p, window, Tier::Uav, altitude, rng);
    if params.d == 0.0 || parents.points.len() < 2 {
        return parents;
    }
    let marks: Vec<f64> = (0..parents.points.len()).map(|_| rng.random::<f64>()).collect();
    let extent = window.outer_radius();
    let cell = params.d.max(2.0 * extent / (parents.points.len() as f64).sqrt());
    let grid = NeighborGrid::new(&parents.points, extent, cell);
    let d2 = params.d * params.d;
    let points = parents
        .points
        .iter()
        .enumerate()
        .filter(|&(i, p)| {
            let mut keep = true;
            grid.for_each_in_ring(p, 1, |j| {
                if keep && j != i && marks[j] < marks[i] && p.distance_sq(&parents.points[j]) < d2 {
                    keep = false;
                }
            });
            keep
        })
        .map(|(_, p)| *p)
        .collect();
    PointPattern { points, ..parents }
}

/// Histogram estimate of the second-order product density.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDensityEstimate {
    pub bin_edges: Vec<f64>,
    /// Mean over realizations, per bin, in m⁻⁴.
    pub density: Vec<f64>,
    /// Standard error of the mean across realizations, per bin.
    pub std_error: Vec<f64>,
    /// Ordered pair counts per bin summed over realizations.
    pub pair_counts: Vec<u64>,
}

/// Pairwise-distance estimator of χ⁽²⁾ on the given bins.
///
/// Reference points are those inside the window radius; their partners may
/// lie anywhere in the pattern, so the guard must be at least the largest
/// bin edge. Each bin is normalized by |W| · π(b² − a²).
pub fn estimate_product_density(patterns: &[PointPattern], bin_edges: &[f64]) -> Result<ProductDensityEstimate, GeometryError> {
    if patterns.is_empty() {
        return Err(GeometryError::EmptyPatternSet);
    }
    if bin_edges.len() < 2 {
        return Err(GeometryError::InvalidBins("need at least two edges".into()));
    }
    if bin_edges[0] < 0.0 || bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GeometryError::InvalidBins("edges must be non-negative and strictly increasing".into()));
    }
    let max_edge = *bin_edges.last().unwrap();
    let nbins = bin_edges.len() - 1;
    let mut sums = vec![0.0; nbins];
    let mut sums_sq = vec![0.0; nbins];
    let mut pair_counts = vec![0u64; nbins];

    for pattern in patterns {
        let window = pattern.window;
        if window.guard < max_edge {
            return Err(GeometryError::InvalidBins(format!(
                "largest edge {max_edge} m exceeds the window guard {} m",
                window.guard
            )));
        }
        let mut counts = vec![0u64; nbins];
        let extent = window.outer_radius();
        let grid = NeighborGrid::new(&pattern.points, extent, max_edge.max(extent / 256.0));
        let inner2 = window.radius * window.radius;
        for (i, p) in pattern.points.iter().enumerate() {
            if p.norm_sq() > inner2 {
                continue;
            }
            grid.for_each_within(&pattern.points, p, max_edge, |j, d2| {
                if j == i {
                    return;
                }
                let dist = d2.sqrt();
                // Bins are half-open [a, b).
                let k = bin_edges.partition_point(|&e| e <= dist);
                if k >= 1 && k <= nbins {
                    counts[k - 1] += 1;
                }
            });
        }
        for k in 0..nbins {
            let annulus = PI * (bin_edges[k + 1].powi(2) - bin_edges[k].powi(2));
            let est = counts[k] as f64 / (window.area() * annulus);
            sums[k] += est;
            sums_sq[k] += est * est;
            pair_counts[k] += counts[k];
        }
    }

    let n = patterns.len() as f64;
    let density: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let std_error = sums_sq
        .iter()
        .zip(&density)
        .map(|(sq, mean)| {
            if patterns.len() < 2 {
                0.0
            } else {
                ((sq / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt()
            }
        })
        .collect();
    Ok(ProductDensityEstimate {
        bin_edges: bin_edges.to_vec(),
        density,
        std_error,
        pair_counts,
    })
}

/// Mean number of points per unit area inside the statistics disk.
pub fn empirical_intensity(patterns: &[PointPattern]) -> Result<f64, GeometryError> {
    if patterns.is_empty() {
        return Err(GeometryError::EmptyPatternSet);
    }
    let total: usize = patterns.iter().map(|p| p.count_inside()).sum();
    let area: f64 = patterns.iter().map(|p| p.window.area()).sum();
    Ok(total as f64 / area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PER_KM2: f64 = 1e-6;

    fn brute_min_distance(points: &[Point]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                best = best.min(points[i].distance_sq(&points[j]));
            }
        }
        best.sqrt()
    }

    #[test]
    fn density_limits() {
        assert_eq!(mhp_density(3e-5, 0.0), 3e-5);
        let d = 50.0;
        let saturated = mhp_density(1.0, d);
        assert_relative_eq!(saturated, 1.0 / (PI * d * d), max_relative = 1e-12);
        let lambda_u = mhp_density(12.0 * PER_KM2, 100.0);
        assert!((lambda_u / (10.0 * PER_KM2) - 1.0).abs() < 3e-3, "{lambda_u}");
    }

    #[test]
    fn parent_density_inverts() {
        let lambda_p = parent_density(10.0 * PER_KM2, 100.0).unwrap();
        assert!((lambda_p / PER_KM2 - 12.0).abs() < 0.01, "{}", lambda_p / PER_KM2);
        assert_relative_eq!(mhp_density(lambda_p, 100.0), 10.0 * PER_KM2, max_relative = 1e-14);
        assert_eq!(parent_density(10.0 * PER_KM2, 0.0).unwrap(), 10.0 * PER_KM2);
        let d = 100.0;
        assert!(matches!(
            parent_density(1.0 / (PI * d * d), d),
            Err(GeometryError::UnreachableDensity { .. })
        ));
    }

    #[test]
    fn union_area_examples() {
        let d = 100.0;
        assert_relative_eq!(union_area(0.0, d).unwrap(), PI * d * d, max_relative = 1e-14);
        assert_relative_eq!(union_area(2.0 * d, d).unwrap(), 2.0 * PI * d * d, max_relative = 1e-14);
        let expected = d * d * (4.0 * PI / 3.0 + 3f64.sqrt() / 2.0);
        assert_relative_eq!(union_area(d, d).unwrap(), expected, max_relative = 1e-14);
        assert!(union_area(2.5 * d, d).is_err());
        assert!(union_area(-1.0, d).is_err());
    }

    /// Hit-or-miss area of two unit disks at separation 1 on a lattice.
    #[test]
    fn union_area_matches_lattice_count() {
        let n = 2000;
        let (xmin, xmax, ymin, ymax) = (-1.0, 2.0, -1.0, 1.0);
        let dx = (xmax - xmin) / n as f64;
        let dy = (ymax - ymin) / n as f64;
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                let x = xmin + (i as f64 + 0.5) * dx;
                let y = ymin + (j as f64 + 0.5) * dy;
                if x * x + y * y <= 1.0 || (x - 1.0).powi(2) + y * y <= 1.0 {
                    hits += 1;
                }
            }
        }
        let lattice = hits as f64 * dx * dy;
        assert!((lattice - union_area(1.0, 1.0).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn product_density_pieces() {
        let params = MhpParams::from_density(10.0 * PER_KM2, 100.0).unwrap();
        let lu2 = params.lambda_u * params.lambda_u;
        assert_eq!(product_density(50.0, &params), 0.0);
        assert_eq!(product_density(300.0, &params), lu2);
        let left = product_density(200.0 * (1.0 - 1e-13), &params);
        assert!((left / lu2 - 1.0).abs() < 1e-9, "{}", left / lu2);
        // Type-II pairs just beyond d are slightly over-represented; the
        // density decreases monotonically to λ_u² at 2d.
        let mut last = f64::INFINITY;
        for k in 0..100 {
            let v = 100.0 + k as f64;
            let chi = product_density(v, &params);
            assert!(chi > lu2 && chi < last, "v = {v}: {chi}");
            last = chi;
        }
    }

    #[test]
    fn ppp_empty_and_deterministic() {
        let window = Window::new(1000.0, 200.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_ppp(0.0, &window, Tier::Bs, 0.0, &mut rng).is_empty());
        let a = sample_ppp(1e-5, &window, Tier::Bs, 0.0, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_ppp(1e-5, &window, Tier::Bs, 0.0, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let outer = window.outer_radius();
        assert!(a.points.iter().all(|p| p.norm() <= outer));
    }

    #[test]
    fn ppp_mean_count() {
        let window = Window::new(1000.0, 0.0).unwrap();
        let density = 2e-5;
        let mean = density * window.outer_area();
        let n = 1000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let total: usize = (0..n)
            .map(|_| sample_ppp(density, &window, Tier::Bs, 0.0, &mut rng).len())
            .sum();
        let avg = total as f64 / n as f64;
        let se = (mean / n as f64).sqrt();
        assert!((avg - mean).abs() < 3.0 * se, "{avg} vs {mean}");
    }

    #[test]
    fn mhp_is_hardcore_and_matches_brute_force() {
        let params = MhpParams::from_density(10.0 * PER_KM2, 100.0).unwrap();
        let window = Window::with_default_guard(1500.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let pattern = sample_mhp(&params, &window, 100.0, &mut rng);
            let brute = brute_min_distance(&pattern.points);
            let fast = pattern.min_pairwise_distance().unwrap();
            assert!(brute >= 100.0);
            assert_eq!(fast, brute);
        }
    }

    #[test]
    fn mhp_thinning_agrees_with_quadratic_rule() {
        // Re-run the thinning with an O(n²) loop on the same parents and marks.
        let params = MhpParams::from_density(10.0 * PER_KM2, 150.0).unwrap();
        let window = Window::new(1200.0, 750.0).unwrap();
        let seed = 77;
        let fast = sample_mhp(&params, &window, 0.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parents = sample_ppp(params.lambda_p, &window, Tier::Uav, 0.0, &mut rng);
        let marks: Vec<f64> = (0..parents.len()).map(|_| rng.random::<f64>()).collect();
        let slow: Vec<Point> = (0..parents.len())
            .filter(|&i| {
                (0..parents.len()).all(|j| {
                    j == i || marks[j] >= marks[i] || parents.points[i].distance_sq(&parents.points[j]) >= 150.0 * 150.0
                })
            })
            .map(|i| parents.points[i])
            .collect();
        assert_eq!(fast.points, slow);
    }

    #[test]
    fn huge_hardcore_keeps_one_point() {
        let params = MhpParams::from_parent(1e-4, 10_000.0).unwrap();
        let window = Window::new(1000.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            assert!(sample_mhp(&params, &window, 50.0, &mut rng).len() <= 1);
        }
    }

    #[test]
    fn zero_hardcore_is_parent_ppp() {
        let params = MhpParams::from_density(10.0 * PER_KM2, 0.0).unwrap();
        assert_eq!(params.lambda_p, params.lambda_u);
        let window = Window::new(1000.0, 0.0).unwrap();
        let a = sample_mhp(&params, &window, 10.0, &mut ChaCha8Rng::seed_from_u64(2));
        let b = sample_ppp(params.lambda_p, &window, Tier::Uav, 10.0, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn ppp_product_density_is_lambda_squared() {
        let density = 30.0 * PER_KM2;
        let window = Window::new(1500.0, 400.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let patterns: Vec<_> = (0..200).map(|_| sample_ppp(density, &window, Tier::Bs, 0.0, &mut rng)).collect();
        let edges: Vec<f64> = (0..=8).map(|k| 50.0 * k as f64).collect();
        let est = estimate_product_density(&patterns, &edges).unwrap();
        for (k, (&chi, &se)) in est.density.iter().zip(&est.std_error).enumerate() {
            assert!((chi - density * density).abs() < 3.5 * se, "bin {k}: {chi} ± {se}");
        }
    }

    #[test]
    fn product_density_estimator_errors() {
        assert!(matches!(estimate_product_density(&[], &[0.0, 1.0]), Err(GeometryError::EmptyPatternSet)));
        let window = Window::new(100.0, 10.0).unwrap();
        let p = sample_ppp(1e-3, &window, Tier::Bs, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(estimate_product_density(std::slice::from_ref(&p), &[0.0, 5.0, 5.0]).is_err());
        assert!(estimate_product_density(std::slice::from_ref(&p), &[0.0, 50.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let window = Window::new(500.0, 0.0).unwrap();
        let p = sample_ppp(1e-4, &window, Tier::Bs, 0.0, &mut ChaCha8Rng::seed_from_u64(3));
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x_m,y_m,tier\n"));
        let rows = read_points_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), p.len());
        for ((q, tier), orig) in rows.iter().zip(&p.points) {
            assert_eq!(q, orig);
            assert_eq!(*tier, Tier::Bs);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn density_inverse_round_trip(lambda_km2 in 0.01f64..30.0, d in 0.0f64..150.0) {
                let lambda_u = lambda_km2 * PER_KM2;
                prop_assume!(lambda_u * PI * d * d < 0.99);
                let lambda_p = parent_density(lambda_u, d).unwrap();
                let back = mhp_density(lambda_p, d);
                prop_assert!((back / lambda_u - 1.0).abs() < 1e-12);
                prop_assert!(lambda_p >= lambda_u);
            }

            #[test]
            fn hardcore_holds_for_any_seed(seed in any::<u64>(), d in 20.0f64..200.0, lambda_km2 in 1.0f64..40.0) {
                let params = MhpParams::from_parent(lambda_km2 * PER_KM2, d).unwrap();
                let window = Window::new(800.0, d).unwrap();
                let p = sample_mhp(&params, &window, 0.0, &mut ChaCha8Rng::seed_from_u64(seed));
                if let Some(min) = p.min_pairwise_distance() {
                    prop_assert!(min >= d);
                }
            }
        }
    }
}
