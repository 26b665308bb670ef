//! Floor fields: arrival times of a wave front that starts at a target and
//! travels across the walkable area with local speed `f`.
//!
//! The speed field is sampled at cell centers (a cell belongs to an obstacle
//! iff its center does, so obstacles thinner than a cell may leak). The
//! eikonal equation `|grad u| f = 1` is solved with the first-order Godunov
//! upwind scheme by fast marching over a binary-heap narrow band.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::format_significant;
use crate::geometry::{Point2, Shape, Vec2};
use crate::scenario::{Bounds, EntityId, Topography};

#[derive(Debug, Error, PartialEq)]
pub enum FloorFieldError {
    #[error("cell size must be positive and finite, got {0}")]
    BadCellSize(f64),
    #[error("grid of {cells} cells exceeds the budget of {max} cells")]
    GridTooLarge { cells: u64, max: u64 },
    #[error("no target cell of target {0} is reachable")]
    NoReachableTarget(EntityId),
    #[error("point {0} lies outside the grid")]
    OutOfBounds(Point2),
    #[error("gradient stencil at {0} touches an unreachable cell")]
    InvalidGradient(Point2),
    #[error("density grid does not match the speed grid")]
    GridMismatch,
}

/// Geometry of a cell-centered grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Point2,
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Smallest grid with spacing `h` covering `bounds`.
    pub fn covering(bounds: &Bounds, h: f64, max_cells: u64) -> Result<GridSpec, FloorFieldError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(FloorFieldError::BadCellSize(h));
        }
        // tolerate round-off when the extent is an exact multiple of h
        let count = |extent: f64| ((extent / h) - 1e-9).ceil().max(1.0);
        let (nx, ny) = (count(bounds.width), count(bounds.height));
        let cells = nx * ny;
        if cells > max_cells as f64 {
            return Err(FloorFieldError::GridTooLarge {
                cells: cells as u64,
                max: max_cells,
            });
        }
        Ok(GridSpec {
            origin: bounds.origin,
            cell_size: h,
            nx: nx as usize,
            ny: ny as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    pub fn center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.cell_size,
            self.origin.y + (j as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn extent_contains(&self, p: Point2) -> bool {
        let tol = 1e-9 * self.cell_size;
        p.x >= self.origin.x - tol
            && p.y >= self.origin.y - tol
            && p.x <= self.origin.x + self.nx as f64 * self.cell_size + tol
            && p.y <= self.origin.y + self.ny as f64 * self.cell_size + tol
    }

    /// Cell containing `p`, clamped to the grid.
    /// The up to eight cells around `(i, j)`.
    pub fn ring(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (-1isize..=1)
            .flat_map(|dj| (-1isize..=1).map(move |di| (di, dj)))
            .filter(|&d| d != (0, 0))
            .filter_map(move |(di, dj)| {
                let (x, y) = (i as isize + di, j as isize + dj);
                (x >= 0 && y >= 0 && (x as usize) < self.nx && (y as usize) < self.ny).then_some((x as usize, y as usize))
            })
    }

    pub fn cell_of(&self, p: Point2) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.cell_size).floor();
        let fy = ((p.y - self.origin.y) / self.cell_size).floor();
        (
            fx.clamp(0.0, (self.nx - 1) as f64) as usize,
            fy.clamp(0.0, (self.ny - 1) as f64) as usize,
        )
    }

    /// Range of cell indices along one axis whose centers may lie in `[lo, hi]`.
    fn span(&self, lo: f64, hi: f64, origin: f64, n: usize) -> std::ops::Range<usize> {
        let a = ((lo - origin) / self.cell_size - 0.5).floor().max(0.0) as usize;
        let b = (((hi - origin) / self.cell_size - 0.5).ceil() + 1.0).max(0.0) as usize;
        a.min(n)..b.min(n)
    }

    /// Indices of cells whose centers lie inside `shape`.
    pub fn cells_in(&self, shape: &Shape) -> Vec<(usize, usize)> {
        let bb = shape.bounding_box();
        let mut out = Vec::new();
        for j in self.span(bb.min.y, bb.max.y, self.origin.y, self.ny) {
            for i in self.span(bb.min.x, bb.max.x, self.origin.x, self.nx) {
                if shape.contains_point(self.center(i, j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Bilinear stencil at `p`: four (cell index, weight) pairs over cell
    /// centers, with `p` clamped into the hull of the centers.
    fn stencil(&self, p: Point2) -> Result<[(usize, f64); 4], FloorFieldError> {
        if !p.is_finite() || !self.extent_contains(p) {
            return Err(FloorFieldError::OutOfBounds(p));
        }
        let axis = |v: f64, origin: f64, n: usize| -> (usize, usize, f64) {
            let g = ((v - origin) / self.cell_size - 0.5).clamp(0.0, (n - 1) as f64);
            if n == 1 {
                return (0, 0, 0.0);
            }
            let i0 = (g.floor() as usize).min(n - 2);
            (i0, i0 + 1, g - i0 as f64)
        };
        let (i0, i1, tx) = axis(p.x, self.origin.x, self.nx);
        let (j0, j1, ty) = axis(p.y, self.origin.y, self.ny);
        Ok([
            (self.index(i0, j0), (1.0 - tx) * (1.0 - ty)),
            (self.index(i1, j0), tx * (1.0 - ty)),
            (self.index(i0, j1), (1.0 - tx) * ty),
            (self.index(i1, j1), tx * ty),
        ])
    }
}

/// Values at cell centers, row-major (`index = j * nx + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn filled(spec: GridSpec, value: f64) -> Self {
        ScalarGrid {
            spec,
            values: vec![value; spec.len()],
        }
    }

    /// Grid with values `f(center)`.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(Point2) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                values.push(f(spec.center(i, j)));
            }
        }
        ScalarGrid { spec, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    /// Bilinear interpolation of the cell-center values. Any corner with a
    /// non-zero weight that is infinite makes the result infinite.
    pub fn sample(&self, p: Point2) -> Result<f64, FloorFieldError> {
        let mut acc = 0.0;
        for (index, w) in self.spec.stencil(p)? {
            if w == 0.0 {
                continue;
            }
            let v = self.values[index];
            if v.is_infinite() {
                return Ok(f64::INFINITY);
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Sum of all values times the cell area.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_size * self.spec.cell_size
    }

    /// CSV export with `x,y,value` rows, infinite values as `inf`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,value")?;
        for j in 0..self.spec.ny {
            for i in 0..self.spec.nx {
                let c = self.spec.center(i, j);
                writeln!(
                    out,
                    "{},{},{}",
                    format_significant(c.x, 12),
                    format_significant(c.y, 12),
                    format_significant(self.get(i, j), 12)
                )?;
            }
        }
        Ok(())
    }
}

/// Wave propagation speed per cell; zero inside obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedField(pub ScalarGrid);

/// Parameters of the density-dependent speed `f = max(fMin, 1 - c * rho)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct DynamicSpeedParams {
    pub f_min: f64,
    /// `c`, in m^2 per person.
    pub density_weight: f64,
    /// Simulated seconds between two floor field recomputations.
    pub recompute_interval: f64,
    /// Standard deviation of the Gaussian density kernel, in meters.
    pub kernel_radius: f64,
}

impl Default for DynamicSpeedParams {
    fn default() -> Self {
        DynamicSpeedParams {
            f_min: 0.2,
            density_weight: 0.4,
            recompute_interval: 0.4,
            kernel_radius: 0.5,
        }
    }
}

impl DynamicSpeedParams {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.f_min > 0.0 && self.f_min <= 1.0) {
            out.push("fMin must lie in (0, 1]".to_owned());
        }
        if !(self.density_weight >= 0.0) {
            out.push("densityWeight must not be negative".to_owned());
        }
        if !(self.recompute_interval > 0.0) {
            out.push("recomputeInterval must be positive".to_owned());
        }
        if !(self.kernel_radius > 0.0) {
            out.push("kernelRadius must be positive".to_owned());
        }
        out
    }
}

/// Static speed field (1 on free cells) or, with a density grid, the
/// density-dependent one.
pub fn rasterize_speed(
    topo: &Topography,
    h: f64,
    max_cells: u64,
    density: Option<(&ScalarGrid, &DynamicSpeedParams)>,
) -> Result<SpeedField, FloorFieldError> {
    let spec = GridSpec::covering(&topo.bounds, h, max_cells)?;
    let mut grid = match density {
        None => ScalarGrid::filled(spec, 1.0),
        Some((rho, params)) => {
            if rho.spec != spec {
                return Err(FloorFieldError::GridMismatch);
            }
            ScalarGrid {
                spec,
                values: rho
                    .values
                    .iter()
                    .map(|&r| (1.0 - params.density_weight * r).max(params.f_min))
                    .collect(),
            }
        }
    };
    for obstacle in &topo.obstacles {
        for (i, j) in spec.cells_in(obstacle) {
            grid.values[spec.index(i, j)] = 0.0;
        }
    }
    Ok(SpeedField(grid))
}

/// Gaussian kernel density estimate in persons per square meter. Each
/// agent's kernel is renormalized over the cells it touches so that it
/// integrates to exactly one on the grid.
pub fn compute_density(positions: &[Point2], spec: GridSpec, kernel_radius: f64) -> ScalarGrid {
    let mut grid = ScalarGrid::filled(spec, 0.0);
    let sigma = kernel_radius;
    let cutoff = 3.0 * sigma;
    let area = spec.cell_size * spec.cell_size;
    let mut weights = Vec::new();
    for &p in positions {
        let xs = spec.span(p.x - cutoff, p.x + cutoff, spec.origin.x, spec.nx);
        let ys = spec.span(p.y - cutoff, p.y + cutoff, spec.origin.y, spec.ny);
        weights.clear();
        let mut total = 0.0;
        for j in ys {
            for i in xs.clone() {
                let d2 = (spec.center(i, j) - p).norm_squared();
                if d2 <= cutoff * cutoff {
                    let w = (-d2 / (2.0 * sigma * sigma)).exp();
                    total += w;
                    weights.push((spec.index(i, j), w));
                }
            }
        }
        if total <= 0.0 {
            continue;
        }
        let scale = 1.0 / (total * area);
        for &(index, w) in &weights {
            grid.values[index] += w * scale;
        }
    }
    grid
}

/// Solution of the Godunov upwind equation for one cell, given the smallest
/// accepted neighbor value along each axis (infinite if none).
pub fn upwind_update(a: f64, b: f64, h: f64, f: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if lo.is_infinite() || f <= 0.0 {
        return f64::INFINITY;
    }
    let t = h / f;
    if hi.is_infinite() || hi - lo >= t {
        return lo + t;
    }
    let diff = hi - lo;
    (lo + hi + (2.0 * t * t - diff * diff).sqrt()) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Trial {
    value: f64,
    index: usize,
}

impl Eq for Trial {}

impl Ord for Trial {
    // min-heap on (value, index)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Arrival times plus the order in which cells were accepted.
#[derive(Debug, Clone)]
pub struct MarchResult {
    pub values: ScalarGrid,
    pub accepted: Vec<usize>,
    /// Cells initialized from the exact distance to the target.
    pub seeds: Vec<usize>,
}

/// Fast marching from the given target shapes.
///
/// Cells whose center lies in a target get `u = 0`; free cells within one
/// cell size of a target are seeded with their exact distance divided by
/// the local speed, which also makes targets smaller than a cell usable.
pub fn march(speed: &SpeedField, targets: &[Shape]) -> MarchResult {
    let grid = &speed.0;
    let spec = grid.spec;
    let h = spec.cell_size;
    let mut u = ScalarGrid::filled(spec, f64::INFINITY);
    let mut accepted = vec![false; spec.len()];
    let mut heap = BinaryHeap::new();
    let mut seeds = Vec::new();

    for shape in targets {
        let mut grown = shape.bounding_box();
        grown.min = grown.min - Point2::new(h, h);
        grown.max = grown.max + Point2::new(h, h);
        for j in spec.span(grown.min.y, grown.max.y, spec.origin.y, spec.ny) {
            for i in spec.span(grown.min.x, grown.max.x, spec.origin.x, spec.nx) {
                let index = spec.index(i, j);
                let f = grid.values[index];
                if f <= 0.0 {
                    continue;
                }
                let d = shape.distance_to(spec.center(i, j));
                if d <= h {
                    let value = d / f;
                    if value < u.values[index] {
                        u.values[index] = value;
                        heap.push(Trial { value, index });
                    }
                }
            }
        }
    }
    seeds.extend(heap.iter().map(|t| t.index));
    seeds.sort_unstable();
    seeds.dedup();

    let mut order = Vec::new();
    while let Some(Trial { value, index }) = heap.pop() {
        if accepted[index] || value > u.values[index] {
            continue;
        }
        accepted[index] = true;
        order.push(index);
        let (i, j) = spec.coords(index);
        for (ni, nj) in spec.ring(i, j) {
            let n = spec.index(ni, nj);
            let f = grid.values[n];
            if accepted[n] || f <= 0.0 {
                continue;
            }
            let candidate = stencil_update(&u.values, &accepted, grid, ni, nj);
            if candidate < u.values[n] {
                u.values[n] = candidate;
                heap.push(Trial {
                    value: candidate,
                    index: n,
                });
            }
        }
    }
    MarchResult {
        values: u,
        accepted: order,
        seeds,
    }
}

/// Smallest of the axis stencil update and the update on the stencil
/// rotated by 45 degrees (spacing `h * sqrt 2`). A diagonal neighbor is used
/// only if one of the two cells beside the diagonal is walkable.
fn stencil_update(u: &[f64], accepted: &[bool], grid: &ScalarGrid, i: usize, j: usize) -> f64 {
    let spec = grid.spec;
    let h = spec.cell_size;
    let f = grid.values[spec.index(i, j)];
    let at = |di: isize, dj: isize| -> Option<usize> {
        let (x, y) = (i as isize + di, j as isize + dj);
        (x >= 0 && y >= 0 && (x as usize) < spec.nx && (y as usize) < spec.ny)
            .then(|| spec.index(x as usize, y as usize))
    };
    let value = |k: Option<usize>| k.filter(|&k| accepted[k]).map_or(f64::INFINITY, |k| u[k]);
    let diagonal = |di: isize, dj: isize| {
        let walkable = |k: Option<usize>| k.is_some_and(|k| grid.values[k] > 0.0);
        if walkable(at(di, 0)) || walkable(at(0, dj)) {
            value(at(di, dj))
        } else {
            f64::INFINITY
        }
    };
    let axis = upwind_update(
        value(at(-1, 0)).min(value(at(1, 0))),
        value(at(0, -1)).min(value(at(0, 1))),
        h,
        f,
    );
    let rotated = upwind_update(
        diagonal(-1, -1).min(diagonal(1, 1)),
        diagonal(1, -1).min(diagonal(-1, 1)),
        h * std::f64::consts::SQRT_2,
        f,
    );
    axis.min(rotated)
}

/// Arrival-time field toward one target.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorField {
    pub u: ScalarGrid,
    pub target_id: EntityId,
}

/// Solves the eikonal equation toward `targets` (the shapes of one target).
pub fn solve_eikonal(
    speed: &SpeedField,
    targets: &[Shape],
    target_id: EntityId,
) -> Result<FloorField, FloorFieldError> {
    let result = march(speed, targets);
    if result.seeds.is_empty() {
        return Err(FloorFieldError::NoReachableTarget(target_id));
    }
    Ok(FloorField {
        u: result.values,
        target_id,
    })
}

impl FloorField {
    pub fn from_grid(u: ScalarGrid, target_id: EntityId) -> Self {
        FloorField { u, target_id }
    }

    pub fn spec(&self) -> GridSpec {
        self.u.spec
    }

    /// Interpolated arrival time at `p`.
    pub fn sample_u(&self, p: Point2) -> Result<f64, FloorFieldError> {
        self.u.sample(p)
    }

    /// Finite-difference gradient of cell `(i, j)`: central inside the
    /// grid, one-sided on its border. `None` if a used value is infinite.
    fn cell_gradient(&self, i: usize, j: usize) -> Option<Vec2> {
        let spec = self.u.spec;
        let h = spec.cell_size;
        let axis = |lo: Option<f64>, mid: f64, hi: Option<f64>| -> Option<f64> {
            let d = match (lo, hi) {
                (Some(l), Some(r)) => (r - l) / (2.0 * h),
                (Some(l), None) => (mid - l) / h,
                (None, Some(r)) => (r - mid) / h,
                (None, None) => 0.0,
            };
            d.is_finite().then_some(d)
        };
        let mid = self.u.get(i, j);
        if mid.is_infinite() {
            return None;
        }
        let gx = axis(
            (i > 0).then(|| self.u.get(i - 1, j)),
            mid,
            (i + 1 < spec.nx).then(|| self.u.get(i + 1, j)),
        )?;
        let gy = axis(
            (j > 0).then(|| self.u.get(i, j - 1)),
            mid,
            (j + 1 < spec.ny).then(|| self.u.get(i, j + 1)),
        )?;
        Some(Point2::new(gx, gy))
    }

    /// Per-cell central differences, bilinearly interpolated to `p`.
    pub fn sample_gradient(&self, p: Point2) -> Result<Vec2, FloorFieldError> {
        let spec = self.u.spec;
        let mut acc = Point2::ZERO;
        for (index, w) in spec.stencil(p)? {
            if w == 0.0 {
                continue;
            }
            let (i, j) = spec.coords(index);
            let g = self
                .cell_gradient(i, j)
                .ok_or(FloorFieldError::InvalidGradient(p))?;
            acc += g * w;
        }
        Ok(acc)
    }

    /// Unit vector of steepest descent at `p`, or zero on a plateau (e.g.
    /// inside the target) and where no neighboring cell is lower.
    ///
    /// When the gradient stencil touches an unreachable cell, the direction
    /// points from the cell containing `p` toward its lowest finite
    /// neighbor among the eight surrounding cells.
    pub fn descent_direction(&self, p: Point2) -> Result<Vec2, FloorFieldError> {
        match self.sample_gradient(p) {
            Ok(g) => {
                if g.norm() < 1e-12 {
                    Ok(Point2::ZERO)
                } else {
                    Ok(-g / g.norm())
                }
            }
            Err(FloorFieldError::InvalidGradient(_)) => Ok(self.fallback_direction(p)),
            Err(e) => Err(e),
        }
    }

    fn fallback_direction(&self, p: Point2) -> Vec2 {
        let spec = self.u.spec;
        let (i, j) = spec.cell_of(p);
        let here = self.u.get(i, j);
        let mut best: Option<((usize, usize), f64)> = None;
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= spec.nx as i64 || nj >= spec.ny as i64 {
                    continue;
                }
                let v = self.u.get(ni as usize, nj as usize);
                if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
                    best = Some(((ni as usize, nj as usize), v));
                }
            }
        }
        match best {
            Some(((ni, nj), v)) if v < here => (spec.center(ni, nj) - spec.center(i, j))
                .normalized()
                .unwrap_or(Point2::ZERO),
            _ => Point2::ZERO,
        }
    }
}

/// Floor fields for every target of the topography.
pub fn solve_all(
    topo: &Topography,
    speed: &SpeedField,
) -> Result<Vec<FloorField>, FloorFieldError> {
    topo.targets
        .iter()
        .map(|t| solve_eikonal(speed, std::slice::from_ref(&t.shape), t.id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Bounds;

    fn topo(w: f64, h: f64) -> Topography {
        Topography::empty(Bounds::new(0.0, 0.0, w, h))
    }

    #[test]
    fn empty_topography_is_all_free() {
        let speed = rasterize_speed(&topo(10.0, 10.0), 0.5, u64::MAX, None).unwrap();
        assert_eq!((speed.0.spec.nx, speed.0.spec.ny), (20, 20));
        assert!(speed.0.values.iter().all(|&f| f == 1.0));
    }

    #[test]
    fn obstacle_covers_exactly_its_cells() {
        let mut t = topo(10.0, 10.0);
        t.obstacles.push(Shape::aabb_rect(4.0, 4.0, 6.0, 6.0).unwrap());
        let speed = rasterize_speed(&t, 0.5, u64::MAX, None).unwrap();
        assert_eq!(speed.0.values.iter().filter(|&&f| f == 0.0).count(), 16);
        assert_eq!(speed.0.get(8, 8), 0.0);
        assert_eq!(speed.0.get(7, 8), 1.0);
    }

    #[test]
    fn zero_density_gives_static_field() {
        let mut t = topo(10.0, 10.0);
        t.obstacles.push(Shape::aabb_rect(4.0, 4.0, 6.0, 6.0).unwrap());
        let stat = rasterize_speed(&t, 0.5, u64::MAX, None).unwrap();
        let rho = ScalarGrid::filled(stat.0.spec, 0.0);
        let params = DynamicSpeedParams::default();
        let dynamic = rasterize_speed(&t, 0.5, u64::MAX, Some((&rho, &params))).unwrap();
        assert_eq!(stat, dynamic);
        let crowded = ScalarGrid::filled(stat.0.spec, 1.0);
        let slow = rasterize_speed(&t, 0.5, u64::MAX, Some((&crowded, &params))).unwrap();
        assert!((slow.0.get(0, 0) - 0.6).abs() < 1e-12);
        let jammed = ScalarGrid::filled(stat.0.spec, 10.0);
        let slow = rasterize_speed(&t, 0.5, u64::MAX, Some((&jammed, &params))).unwrap();
        assert_eq!(slow.0.get(0, 0), 0.2);
    }

    #[test]
    fn cell_budget() {
        let err = rasterize_speed(&topo(10.0, 10.0), 0.01, 1000, None).unwrap_err();
        assert!(matches!(err, FloorFieldError::GridTooLarge { .. }));
    }

    #[test]
    fn planar_wave() {
        let speed = rasterize_speed(&topo(10.0, 10.0), 0.1, u64::MAX, None).unwrap();
        let target = Shape::aabb_rect(0.0, 0.0, 0.05, 10.0).unwrap();
        let ff = solve_eikonal(&speed, &[target], 1).unwrap();
        for k in 0..50 {
            let p = Point2::new(0.2 * k as f64 + 0.05, (k * 7 % 50) as f64 * 0.2 + 0.05);
            let u = ff.sample_u(p).unwrap();
            assert!((u - p.x).abs() <= 0.2, "u({p}) = {u}");
        }
    }

    #[test]
    fn radial_wave() {
        let speed = rasterize_speed(&topo(10.0, 10.0), 0.1, u64::MAX, None).unwrap();
        let target = Shape::circle(Point2::new(0.0, 0.0), 0.01).unwrap();
        let ff = solve_eikonal(&speed, &[target], 1).unwrap();
        let u = ff.sample_u(Point2::new(3.0, 4.0)).unwrap();
        assert!((u - 5.0).abs() <= 0.2 + 0.1 * 5.0 * 0.1, "u = {u}");
    }

    #[test]
    fn obstacle_cells_are_unreachable() {
        let mut t = topo(10.0, 10.0);
        t.obstacles.push(Shape::aabb_rect(4.0, 4.0, 6.0, 6.0).unwrap());
        let speed = rasterize_speed(&t, 0.1, u64::MAX, None).unwrap();
        let target = Shape::aabb_rect(0.0, 0.0, 0.05, 10.0).unwrap();
        let ff = solve_eikonal(&speed, &[target], 1).unwrap();
        assert!(ff.sample_u(Point2::new(5.0, 5.0)).unwrap().is_infinite());
        // centers at 3.95 and 4.05: the second one is an obstacle cell
        assert!(ff.sample_u(Point2::new(4.0, 5.0)).unwrap().is_infinite());
        assert!(ff.sample_u(Point2::new(3.95, 5.0)).unwrap().is_finite());
        // shadow behind the obstacle takes longer than the straight line
        assert!(ff.sample_u(Point2::new(6.5, 5.0)).unwrap() > 6.5 + 0.3);
    }

    #[test]
    fn target_inside_obstacle_is_unreachable() {
        let mut t = topo(10.0, 10.0);
        t.obstacles.push(Shape::aabb_rect(4.0, 4.0, 6.0, 6.0).unwrap());
        let speed = rasterize_speed(&t, 0.1, u64::MAX, None).unwrap();
        let target = Shape::circle(Point2::new(5.0, 5.0), 0.3).unwrap();
        assert_eq!(
            solve_eikonal(&speed, &[target], 4),
            Err(FloorFieldError::NoReachableTarget(4))
        );
    }

    fn linear_field(fx: f64, fy: f64) -> FloorField {
        let spec = GridSpec::covering(&Bounds::new(0.0, 0.0, 5.0, 4.0), 0.25, u64::MAX).unwrap();
        FloorField::from_grid(ScalarGrid::from_fn(spec, |c| fx * c.x + fy * c.y), 0)
    }

    #[test]
    fn sampling_reproduces_linear_fields() {
        let ff = linear_field(1.0, 0.0);
        let spec = ff.spec();
        assert_eq!(ff.sample_u(spec.center(3, 2)).unwrap(), ff.u.get(3, 2));
        for p in [Point2::new(1.3, 2.7), Point2::new(0.9, 0.4), Point2::new(4.6, 3.1)] {
            assert!((ff.sample_u(p).unwrap() - p.x).abs() < 1e-12);
            let g = ff.sample_gradient(p).unwrap();
            assert!((g.x - 1.0).abs() < 1e-12 && g.y.abs() < 1e-12);
        }
        let ff = linear_field(0.0, 1.0);
        let g = ff.sample_gradient(Point2::new(2.2, 1.9)).unwrap();
        assert!(g.x.abs() < 1e-12 && (g.y - 1.0).abs() < 1e-12);
        assert!(matches!(
            ff.sample_u(Point2::new(6.0, 1.0)),
            Err(FloorFieldError::OutOfBounds(_))
        ));
    }

    #[test]
    fn infinite_corner_makes_sample_infinite() {
        let mut ff = linear_field(1.0, 0.0);
        let idx = ff.spec().index(4, 4);
        ff.u.values[idx] = f64::INFINITY;
        let c = ff.spec().center(4, 4);
        assert!(ff.sample_u(c + Point2::new(0.1, 0.1)).unwrap().is_infinite());
        assert!(ff.sample_u(ff.spec().center(3, 4)).unwrap().is_finite());
        assert!(matches!(
            ff.sample_gradient(ff.spec().center(3, 4) + Point2::new(0.01, 0.0)),
            Err(FloorFieldError::InvalidGradient(_))
        ));
        // fallback still points downhill
        let d = ff.descent_direction(ff.spec().center(5, 4)).unwrap();
        assert!(d.x < -0.5, "{d}");
    }

    #[test]
    fn plateau_has_no_direction() {
        let spec = GridSpec::covering(&Bounds::new(0.0, 0.0, 2.0, 2.0), 0.1, u64::MAX).unwrap();
        let ff = FloorField::from_grid(ScalarGrid::filled(spec, 0.0), 0);
        assert_eq!(ff.descent_direction(Point2::new(1.0, 1.0)).unwrap(), Point2::ZERO);
    }

    #[test]
    fn density_normalization_and_linearity() {
        let spec = GridSpec::covering(&Bounds::new(0.0, 0.0, 10.0, 10.0), 0.1, u64::MAX).unwrap();
        let zero = compute_density(&[], spec, 0.5);
        assert!(zero.values.iter().all(|&v| v == 0.0));
        let p = Point2::new(3.33, 0.2);
        let one = compute_density(&[p], spec, 0.5);
        assert!((one.integral() - 1.0).abs() <= 0.01);
        let two = compute_density(&[p, p], spec, 0.5);
        for (a, b) in one.values.iter().zip(&two.values) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn csv_export() {
        let mut t = topo(1.0, 0.5);
        t.obstacles.push(Shape::aabb_rect(0.5, 0.0, 1.0, 0.5).unwrap());
        let speed = rasterize_speed(&t, 0.25, u64::MAX, None).unwrap();
        let ff = solve_eikonal(&speed, &[Shape::aabb_rect(0.0, 0.0, 0.125, 0.5).unwrap()], 1).unwrap();
        let mut out = Vec::new();
        ff.u.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "x,y,value\n0.125,0.125,0\n0.375,0.125,0.25\n0.625,0.125,inf\n0.875,0.125,inf\n\
             0.125,0.375,0\n0.375,0.375,0.25\n0.625,0.375,inf\n0.875,0.375,inf\n"
        );
    }
}
