//! Lattice domain types shared by both models: slopes and planar
//! references, planar regions with their outer boundary, monotone height
//! fields, SOS paths and the SOS wall profile.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// A point of the planar lattice `Z^2`.
pub type Point = (i64, i64);

/// Unit normal `n` of a plane with all three components strictly positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeVector {
    n: [f64; 3],
}

impl SlopeVector {
    pub fn new(n: [f64; 3]) -> Result<Self> {
        let norm = math::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
        if !norm.is_finite() || math::abs(norm - 1.0) > 1e-12 {
            return Err(Error::InvalidSlope("not a unit vector"));
        }
        if n.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidSlope("components must be strictly positive"));
        }
        Ok(Self { n })
    }

    /// Normalizes `v` first; still rejects non-positive components.
    pub fn from_direction(v: [f64; 3]) -> Result<Self> {
        let norm = math::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if !(norm > 0.0) {
            return Err(Error::InvalidSlope("zero direction"));
        }
        Self::new([v[0] / norm, v[1] / norm, v[2] / norm])
    }

    /// `(1,1,1)/sqrt(3)`, the symmetric lozenge-tiling slope.
    pub fn diagonal() -> Self {
        let c = 1.0 / math::sqrt(3.0);
        Self { n: [c, c, c] }
    }

    pub fn components(&self) -> [f64; 3] {
        self.n
    }

    /// Real height of the plane `n . p = offset_along_vertical * n3` above
    /// the horizontal point `x`, i.e. the plane through the origin
    /// translated vertically by `shift`.
    pub fn plane_height(&self, x: (f64, f64), shift: f64) -> f64 {
        -(x.0 * self.n[0] + x.1 * self.n[1]) / self.n[2] + shift
    }
}

/// `max{z in Z : x1 n1 + x2 n2 + z n3 <= 0}`.
///
/// Points lying on the plane up to relative rounding `1e-9` count as on it,
/// so rational slopes such as `(1,1,1)/sqrt(3)` give exact integers.
pub fn planar_reference(n: &SlopeVector, x: Point) -> i64 {
    let q = n.plane_height((x.0 as f64, x.1 as f64), 0.0);
    let tol = 1e-9 * (1.0 + math::abs(q));
    math::floor(q + tol) as i64
}

/// Outcome of [`check_good_planar`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoodPlanarReport {
    pub good: bool,
    /// Largest `|eta_x - phibar_x| / (C log(|x|+1))` over the tested sites.
    pub worst_ratio: f64,
    pub worst_site: Option<Point>,
    pub sites_tested: usize,
}

/// Checks `|eta_x - phibar^n_x| <= C log(|x|+1)` on the outer boundary of
/// `region`, plus any outside site within sup-distance `halo + 1` of it.
pub fn check_good_planar<F>(
    eta: F,
    n: &SlopeVector,
    c: f64,
    region: &Region,
    halo: usize,
) -> Result<GoodPlanarReport>
where
    F: Fn(Point) -> Option<i64>,
{
    if !(c > 0.0) {
        return Err(Error::InvalidParameters("C must be positive"));
    }
    let mut tested: Vec<Point> = region.boundary().to_vec();
    if halo > 0 {
        let r = halo as i64 + 1;
        let (lo, hi) = region.bounding_box();
        for y in lo.1 - r..=hi.1 + r {
            for x in lo.0 - r..=hi.0 + r {
                let p = (x, y);
                if region.contains(p) || region.is_boundary(p) {
                    continue;
                }
                if region.sup_distance(p) <= r {
                    tested.push(p);
                }
            }
        }
    }
    let mut report = GoodPlanarReport {
        good: true,
        worst_ratio: 0.0,
        worst_site: None,
        sites_tested: tested.len(),
    };
    for &p in &tested {
        let value = eta(p).ok_or(Error::IncompleteBoundary(p.0, p.1))?;
        let dev = math::abs((value - planar_reference(n, p)) as f64);
        let norm = math::sqrt((p.0 * p.0 + p.1 * p.1) as f64);
        let bound = c * math::ln(norm + 1.0);
        let ratio = if dev == 0.0 {
            0.0
        } else if bound == 0.0 {
            f64::INFINITY
        } else {
            dev / bound
        };
        if dev > bound * (1.0 + 1e-12) {
            report.good = false;
        }
        if report.worst_site.is_none() || ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst_site = Some(p);
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CellKind {
    Outside,
    Interior,
    Boundary,
}

/// A finite connected set of lattice sites containing the origin, stored as
/// a bitmap over its bounding box enlarged by one cell on every side so
/// that every neighbor of an interior site has a cell index.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    origin: Point,
    width: usize,
    height: usize,
    kind: Vec<CellKind>,
    sites: Vec<Point>,
    site_cell: Vec<usize>,
    cell_site: Vec<u32>,
    boundary: Vec<Point>,
    diameter: f64,
}

const NO_SITE: u32 = u32::MAX;

impl Region {
    pub fn from_sites<I: IntoIterator<Item = Point>>(sites: I) -> Result<Self> {
        let mut pts: Vec<Point> = sites.into_iter().collect();
        if pts.is_empty() {
            return Err(Error::InvalidParameters("region must be nonempty"));
        }
        // lexicographic in (x2, x1): west and south neighbors come first
        pts.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        pts.dedup();
        if !pts.contains(&(0, 0)) {
            return Err(Error::InvalidParameters("region must contain the origin"));
        }
        let min_x = pts.iter().map(|p| p.0).min().unwrap() - 1;
        let max_x = pts.iter().map(|p| p.0).max().unwrap() + 1;
        let min_y = pts.iter().map(|p| p.1).min().unwrap() - 1;
        let max_y = pts.iter().map(|p| p.1).max().unwrap() + 1;
        let width = (max_x - min_x + 1) as usize;
        let height = (max_y - min_y + 1) as usize;
        let mut kind = vec![CellKind::Outside; width * height];
        let mut cell_site = vec![NO_SITE; width * height];
        let mut site_cell = Vec::with_capacity(pts.len());
        let origin = (min_x, min_y);
        let idx = |p: Point| ((p.1 - min_y) as usize) * width + (p.0 - min_x) as usize;
        for (s, &p) in pts.iter().enumerate() {
            let c = idx(p);
            kind[c] = CellKind::Interior;
            cell_site[c] = s as u32;
            site_cell.push(c);
        }
        let mut boundary = Vec::new();
        for y in min_y..=max_y {
            for x in min_x..=max_x {
                let c = idx((x, y));
                if kind[c] == CellKind::Interior {
                    continue;
                }
                let touches = [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
                    .iter()
                    .any(|&q| {
                        q.0 >= min_x
                            && q.0 <= max_x
                            && q.1 >= min_y
                            && q.1 <= max_y
                            && kind[idx(q)] == CellKind::Interior
                    });
                if touches {
                    kind[c] = CellKind::Boundary;
                    boundary.push((x, y));
                }
            }
        }
        let mut diameter2 = 0i64;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                let d = (a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1);
                diameter2 = diameter2.max(d);
            }
        }
        let region = Self {
            origin,
            width,
            height,
            kind,
            sites: pts,
            site_cell,
            cell_site,
            boundary,
            diameter: math::sqrt(diameter2 as f64),
        };
        if !region.is_connected() {
            return Err(Error::InvalidParameters("region must be connected"));
        }
        Ok(region)
    }

    /// The `w x h` rectangle with lower-left corner `corner`.
    pub fn rectangle(corner: Point, w: usize, h: usize) -> Result<Self> {
        let mut pts = Vec::with_capacity(w * h);
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                pts.push((corner.0 + x, corner.1 + y));
            }
        }
        Self::from_sites(pts)
    }

    /// The square `{0..n-1}^2`.
    pub fn square(n: usize) -> Result<Self> {
        Self::rectangle((0, 0), n, n)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.sites.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(s) = stack.pop() {
            let c = self.site_cell[s];
            for nc in [c - 1, c + 1, c - self.width, c + self.width] {
                let t = self.cell_site[nc];
                if t != NO_SITE && !seen[t as usize] {
                    seen[t as usize] = true;
                    count += 1;
                    stack.push(t as usize);
                }
            }
        }
        count == self.sites.len()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Interior sites in lexicographic `(x2, x1)` order.
    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    /// The outer boundary: outside points at distance one from the region.
    pub fn boundary(&self) -> &[Point] {
        &self.boundary
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Inclusive corners of the bounding box of the interior.
    pub fn bounding_box(&self) -> (Point, Point) {
        (
            (self.origin.0 + 1, self.origin.1 + 1),
            (
                self.origin.0 + self.width as i64 - 2,
                self.origin.1 + self.height as i64 - 2,
            ),
        )
    }

    pub fn center(&self) -> (f64, f64) {
        let n = self.sites.len() as f64;
        let sx: i64 = self.sites.iter().map(|p| p.0).sum();
        let sy: i64 = self.sites.iter().map(|p| p.1).sum();
        (sx as f64 / n, sy as f64 / n)
    }

    pub(crate) fn cell(&self, p: Point) -> Option<usize> {
        let dx = p.0 - self.origin.0;
        let dy = p.1 - self.origin.1;
        if dx < 0 || dy < 0 || dx >= self.width as i64 || dy >= self.height as i64 {
            return None;
        }
        Some(dy as usize * self.width + dx as usize)
    }

    pub(crate) fn cell_count(&self) -> usize {
        self.kind.len()
    }

    pub(crate) fn width(&self) -> usize {
        self.width
    }

    pub(crate) fn cell_point(&self, c: usize) -> Point {
        (
            self.origin.0 + (c % self.width) as i64,
            self.origin.1 + (c / self.width) as i64,
        )
    }

    pub(crate) fn cell_kind(&self, c: usize) -> CellKind {
        self.kind[c]
    }

    pub(crate) fn site_cell(&self, s: usize) -> usize {
        self.site_cell[s]
    }

    pub fn site_index(&self, p: Point) -> Option<usize> {
        let c = self.cell(p)?;
        let s = self.cell_site[c];
        (s != NO_SITE).then_some(s as usize)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.site_index(p).is_some()
    }

    pub fn is_boundary(&self, p: Point) -> bool {
        self.cell(p)
            .map(|c| self.kind[c] == CellKind::Boundary)
            .unwrap_or(false)
    }

    fn sup_distance(&self, p: Point) -> i64 {
        self.sites
            .iter()
            .map(|q| (p.0 - q.0).abs().max((p.1 - q.1).abs()))
            .min()
            .unwrap_or(i64::MAX)
    }
}

/// Pointwise order on configurations of the same shape.
pub trait Configuration {
    fn values(&self) -> &[i64];
    fn compatible(&self, other: &Self) -> bool;
}

/// `a <= b` at every interior site.
pub fn partial_order_leq<C: Configuration>(a: &C, b: &C) -> Result<bool> {
    if !a.compatible(b) {
        return Err(Error::IncompatibleConfigurations("different shapes or boundaries"));
    }
    Ok(slice_leq(a.values(), b.values()))
}

pub(crate) fn slice_leq(a: &[i64], b: &[i64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// A monotone surface restricted to a region: interior heights plus frozen
/// boundary heights, with optional floor and ceiling fields.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightField {
    region: Arc<Region>,
    /// one entry per cell of the enlarged bounding box
    grid: Vec<i64>,
    heights: Vec<i64>,
    floor: Option<Arc<Vec<i64>>>,
    ceiling: Option<Arc<Vec<i64>>>,
}

impl HeightField {
    /// Builds a field from boundary values on the outer boundary and
    /// interior values; fails unless the result is monotone.
    pub fn new<B, I>(region: Arc<Region>, boundary: B, interior: I) -> Result<Self>
    where
        B: Fn(Point) -> i64,
        I: Fn(Point) -> i64,
    {
        let mut grid = vec![0i64; region.cell_count()];
        for &p in region.boundary() {
            grid[region.cell(p).unwrap()] = boundary(p);
        }
        let heights: Vec<i64> = region.sites().iter().map(|&p| interior(p)).collect();
        for (s, &v) in heights.iter().enumerate() {
            grid[region.site_cell(s)] = v;
        }
        let field = Self { region, grid, heights, floor: None, ceiling: None };
        if !field.is_monotone() {
            return Err(Error::InvalidParameters("height field is not monotone"));
        }
        Ok(field)
    }

    /// Wraps a full cell grid without validation.
    pub(crate) fn from_grid(region: Arc<Region>, grid: Vec<i64>) -> Self {
        let heights = (0..region.len()).map(|s| grid[region.site_cell(s)]).collect();
        Self { region, grid, heights, floor: None, ceiling: None }
    }

    pub(crate) fn grid(&self) -> &[i64] {
        &self.grid
    }

    /// The field equal to the planar reference everywhere.
    pub fn planar(region: Arc<Region>, n: &SlopeVector) -> Self {
        let n = *n;
        Self::new(region, |p| planar_reference(&n, p), |p| planar_reference(&n, p))
            .expect("planar reference is monotone")
    }

    /// Attaches floor and ceiling (interior site order). Fails when they are
    /// not monotone-ordered around the current state.
    pub fn with_constraints(mut self, floor: Option<Vec<i64>>, ceiling: Option<Vec<i64>>) -> Result<Self> {
        let n = self.heights.len();
        if floor.as_ref().is_some_and(|f| f.len() != n) || ceiling.as_ref().is_some_and(|c| c.len() != n) {
            return Err(Error::IncompatibleConfigurations("constraint length"));
        }
        if let Some(f) = &floor {
            if !slice_leq(f, &self.heights) {
                return Err(Error::InvalidParameters("state below floor"));
            }
        }
        if let Some(c) = &ceiling {
            if !slice_leq(&self.heights, c) {
                return Err(Error::InvalidParameters("state above ceiling"));
            }
        }
        self.floor = floor.map(Arc::new);
        self.ceiling = ceiling.map(Arc::new);
        Ok(self)
    }

    pub fn region(&self) -> &Arc<Region> {
        &self.region
    }

    pub fn heights(&self) -> &[i64] {
        &self.heights
    }

    pub fn floor(&self) -> Option<&[i64]> {
        self.floor.as_deref().map(|v| v.as_slice())
    }

    pub fn ceiling(&self) -> Option<&[i64]> {
        self.ceiling.as_deref().map(|v| v.as_slice())
    }

    /// Height at an interior or boundary point.
    pub fn at(&self, p: Point) -> Option<i64> {
        let c = self.region.cell(p)?;
        (self.region.cell_kind(c) != CellKind::Outside).then(|| self.grid[c])
    }

    pub(crate) fn cell_value(&self, c: usize) -> i64 {
        self.grid[c]
    }

    pub(crate) fn set_site(&mut self, s: usize, v: i64) {
        self.heights[s] = v;
        let c = self.region.site_cell(s);
        self.grid[c] = v;
    }

    /// Nearest-neighbor monotonicity on every edge touching the region,
    /// plus floor/ceiling when present.
    pub fn is_monotone(&self) -> bool {
        let w = self.region.width();
        for s in 0..self.heights.len() {
            let c = self.region.site_cell(s);
            let v = self.grid[c];
            if v > self.grid[c - 1] || v > self.grid[c - w] || v < self.grid[c + 1] || v < self.grid[c + w] {
                return false;
            }
        }
        if let Some(f) = &self.floor {
            if !slice_leq(f, &self.heights) {
                return false;
            }
        }
        if let Some(cl) = &self.ceiling {
            if !slice_leq(&self.heights, cl) {
                return false;
            }
        }
        true
    }

    pub fn same_boundary(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.region, &other.region) || self.region == other.region)
            && self.region.boundary().iter().all(|&p| self.at(p) == other.at(p))
    }
}

impl Configuration for HeightField {
    fn values(&self) -> &[i64] {
        &self.heights
    }

    fn compatible(&self, other: &Self) -> bool {
        self.same_boundary(other)
    }
}

/// Parameters of a bounded SOS model: `L` sites, boundary heights `0` and
/// `h`, window `[-M, M+h]` and optional per-site floor/ceiling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SosParams {
    len: usize,
    h: i64,
    lo: i64,
    hi: i64,
    floor: Option<Vec<i64>>,
    ceiling: Option<Vec<i64>>,
}

impl SosParams {
    /// The bounded model `Omega_{L,h}` with window `[-L, L+h]`.
    pub fn bounded(len: usize, h: i64) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidParameters("L must be positive"));
        }
        if h < 0 || h > len as i64 {
            return Err(Error::InvalidParameters("need 0 <= h <= L"));
        }
        Ok(Self { len, h, lo: -(len as i64), hi: len as i64 + h, floor: None, ceiling: None })
    }

    /// Window `[-M, M+h]` with `M` independent of `L` (no `h <= L` check).
    pub fn with_window(len: usize, h: i64, m: i64) -> Result<Self> {
        if len == 0 || m < 0 || h < 0 {
            return Err(Error::InvalidParameters("need L > 0, M >= 0, h >= 0"));
        }
        Ok(Self { len, h, lo: -m, hi: m + h, floor: None, ceiling: None })
    }

    /// Arbitrary window `[lo, hi]` (used for rectangles of the block
    /// recursion, where heights live in `{0..H}`).
    pub fn with_bounds(len: usize, h: i64, lo: i64, hi: i64) -> Result<Self> {
        if len == 0 || lo > hi {
            return Err(Error::InvalidParameters("need L > 0 and lo <= hi"));
        }
        Ok(Self { len, h, lo, hi, floor: None, ceiling: None })
    }

    pub fn floor(mut self, floor: Vec<i64>) -> Result<Self> {
        if floor.len() != self.len {
            return Err(Error::IncompatibleConfigurations("floor length"));
        }
        self.floor = Some(floor);
        self.check_feasible()?;
        Ok(self)
    }

    pub fn ceiling(mut self, ceiling: Vec<i64>) -> Result<Self> {
        if ceiling.len() != self.len {
            return Err(Error::IncompatibleConfigurations("ceiling length"));
        }
        self.ceiling = Some(ceiling);
        self.check_feasible()?;
        Ok(self)
    }

    /// Floor at the wall profile, the "interface above the wall" model.
    pub fn above_wall(self) -> Result<Self> {
        let w = wall_profile(self.len, self.h)?;
        self.floor(w.values)
    }

    fn check_feasible(&self) -> Result<()> {
        for i in 0..self.len {
            let (lo, hi) = self.site_bounds(i);
            if lo > hi {
                return Err(Error::EmptySupport("floor above ceiling"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn h(&self) -> i64 {
        self.h
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn floor_values(&self) -> Option<&[i64]> {
        self.floor.as_deref()
    }

    pub fn ceiling_values(&self) -> Option<&[i64]> {
        self.ceiling.as_deref()
    }

    /// Allowed heights at 0-based site `i`: window intersected with walls.
    #[inline]
    pub fn site_bounds(&self, i: usize) -> (i64, i64) {
        let mut lo = self.lo;
        let mut hi = self.hi;
        if let Some(f) = &self.floor {
            lo = lo.max(f[i]);
        }
        if let Some(c) = &self.ceiling {
            hi = hi.min(c[i]);
        }
        (lo, hi)
    }

    /// Neighbor heights of 0-based site `i`, reading the pinned boundary
    /// values `0` and `h` at the ends.
    #[inline]
    pub fn neighbors(&self, heights: &[i64], i: usize) -> (i64, i64) {
        let left = if i == 0 { 0 } else { heights[i - 1] };
        let right = if i + 1 == self.len { self.h } else { heights[i + 1] };
        (left, right)
    }

    /// Maximal configuration (each site at its upper bound).
    pub fn top(&self) -> Vec<i64> {
        (0..self.len).map(|i| self.site_bounds(i).1).collect()
    }

    /// Minimal configuration.
    pub fn bottom(&self) -> Vec<i64> {
        (0..self.len).map(|i| self.site_bounds(i).0).collect()
    }

    pub fn admits(&self, heights: &[i64]) -> bool {
        heights.len() == self.len
            && heights.iter().enumerate().all(|(i, &v)| {
                let (lo, hi) = self.site_bounds(i);
                lo <= v && v <= hi
            })
    }
}

/// An SOS configuration together with its model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SosPath {
    params: Arc<SosParams>,
    heights: Vec<i64>,
}

impl SosPath {
    pub fn new(params: Arc<SosParams>, heights: Vec<i64>) -> Result<Self> {
        if heights.len() != params.len() {
            return Err(Error::IncompatibleConfigurations("path length"));
        }
        if !params.admits(&heights) {
            return Err(Error::InvalidParameters("height outside window or walls"));
        }
        Ok(Self { params, heights })
    }

    pub fn top(params: Arc<SosParams>) -> Self {
        let heights = params.top();
        Self { params, heights }
    }

    pub fn bottom(params: Arc<SosParams>) -> Self {
        let heights = params.bottom();
        Self { params, heights }
    }

    pub fn params(&self) -> &Arc<SosParams> {
        &self.params
    }

    pub fn heights(&self) -> &[i64] {
        &self.heights
    }

    pub(crate) fn heights_mut(&mut self) -> &mut [i64] {
        &mut self.heights
    }
}

impl Configuration for SosPath {
    fn values(&self) -> &[i64] {
        &self.heights
    }

    fn compatible(&self, other: &Self) -> bool {
        self.params.len() == other.params.len() && self.params.h() == other.params.h()
    }
}

/// `sum_{i=0}^{L} |eta_{i+1} - eta_i|` with `eta_0 = 0`, `eta_{L+1} = h`.
pub fn sos_energy(path: &SosPath) -> i64 {
    energy_of(path.heights(), path.params().h())
}

pub(crate) fn energy_of(heights: &[i64], h: i64) -> i64 {
    let mut prev = 0i64;
    let mut e = 0i64;
    for &v in heights {
        e += (v - prev).abs();
        prev = v;
    }
    e + (h - prev).abs()
}

/// `floor(i h / (L+1))` for `i = 1..L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WallProfile {
    pub values: Vec<i64>,
}

pub fn wall_profile(len: usize, h: i64) -> Result<WallProfile> {
    if h < 0 || h > len as i64 {
        return Err(Error::InvalidParameters("need 0 <= h <= L"));
    }
    let l1 = len as i64 + 1;
    Ok(WallProfile { values: (1..=len as i64).map(|i| (i * h).div_euclid(l1)).collect() })
}
