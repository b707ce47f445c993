//! Heat-bath dynamics on monotone surfaces with frozen boundary heights.
//!
//! Each interior site carries a rate-1 clock; on a ring a fair coin picks
//! an up or a down move:
//!
//! * up: `phi_x <- min(phi_x + 1, phi_west, phi_south)` (and the ceiling),
//! * down: `phi_x <- max(phi_x - 1, phi_east, phi_north)` (and the floor).
//!
//! Every allowed move has rate 1/2 in both directions, so the uniform
//! measure on the constrained state space is reversible.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::coupling::MonotoneDynamics;
use crate::error::{Error, Result};
use crate::events::{Event, EventStream};
use crate::lattice::{CellKind, HeightField, Point, Region};

/// Checkpointed states of a run, interior heights in site order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<i64>>,
    /// events consumed during the run
    pub events: u64,
}

impl Trajectory {
    pub fn state_at(&self, t: f64) -> Option<&[i64]> {
        self.times.iter().position(|&s| s == t).map(|i| self.states[i].as_slice())
    }
}

#[inline]
fn up_value(grid: &[i64], w: usize, c: usize, ceiling: Option<i64>) -> i64 {
    let mut v = (grid[c] + 1).min(grid[c - 1]).min(grid[c - w]);
    if let Some(top) = ceiling {
        v = v.min(top);
    }
    v.max(grid[c])
}

#[inline]
fn down_value(grid: &[i64], w: usize, c: usize, floor: Option<i64>) -> i64 {
    let mut v = (grid[c] - 1).max(grid[c + 1]).max(grid[c + w]);
    if let Some(bottom) = floor {
        v = v.max(bottom);
    }
    v.min(grid[c])
}

fn site_of(phi: &HeightField, x: Point) -> Result<usize> {
    phi.region().site_index(x).ok_or(Error::NotUpdatable(x.0, x.1))
}

/// Up move at interior site `x`, returned as a new field.
pub fn up_move(phi: &HeightField, x: Point) -> Result<HeightField> {
    let s = site_of(phi, x)?;
    let mut out = phi.clone();
    apply(&mut out, s, true);
    Ok(out)
}

/// Down move at interior site `x`, returned as a new field.
pub fn down_move(phi: &HeightField, x: Point) -> Result<HeightField> {
    let s = site_of(phi, x)?;
    let mut out = phi.clone();
    apply(&mut out, s, false);
    Ok(out)
}

/// In-place move at site index `s`; returns whether the height changed.
pub fn apply(phi: &mut HeightField, s: usize, up: bool) -> bool {
    let region = phi.region().clone();
    let c = region.site_cell(s);
    let w = region.width();
    let old = phi.cell_value(c);
    let new = if up {
        up_value(phi.grid(), w, c, phi.ceiling().map(|v| v[s]))
    } else {
        down_value(phi.grid(), w, c, phi.floor().map(|v| v[s]))
    };
    if new != old {
        phi.set_site(s, new);
    }
    new != old
}

/// A heat-bath chain: state, clock and event counter.
#[derive(Clone, Debug)]
pub struct SurfaceChain {
    state: HeightField,
    time: f64,
    events: u64,
}

impl SurfaceChain {
    pub fn new(state: HeightField) -> Self {
        Self { state, time: 0.0, events: 0 }
    }

    pub fn state(&self) -> &HeightField {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Applies one event (up on `u < 1/2`); blocked moves still count.
    pub fn step(&mut self, ev: &Event) -> bool {
        self.events += 1;
        self.time = self.time.max(ev.time);
        apply(&mut self.state, ev.site, ev.is_up())
    }

    /// Runs until `horizon`, recording the state at each requested time.
    pub fn run(&mut self, horizon: f64, stream: &mut EventStream, checkpoints: &[f64]) -> Trajectory {
        let mut traj = Trajectory::default();
        let mut cps = checkpoints.iter().copied().filter(|&t| t <= horizon).peekable();
        let start = self.events;
        loop {
            let next_t = stream.peek().time;
            while let Some(&t) = cps.peek() {
                if t >= next_t {
                    break;
                }
                traj.times.push(t);
                traj.states.push(self.state.heights().to_vec());
                cps.next();
            }
            if next_t > horizon {
                break;
            }
            let ev = stream.next();
            self.step(&ev);
        }
        self.time = self.time.max(horizon);
        traj.events = self.events - start;
        traj
    }
}

fn sweep_field(
    region: Arc<Region>,
    boundary: &dyn Fn(Point) -> i64,
    constraint: Option<&[i64]>,
    top: bool,
) -> Result<HeightField> {
    let mut grid = alloc::vec![0i64; region.cell_count()];
    for c in 0..region.cell_count() {
        if region.cell_kind(c) == CellKind::Boundary {
            grid[c] = boundary(region.cell_point(c));
        }
    }
    let w = region.width();
    let n = region.len();
    let order: Vec<usize> = if top { (0..n).collect() } else { (0..n).rev().collect() };
    for s in order {
        let c = region.site_cell(s);
        // outside cells never bound the sweep: treat as +-infinity
        let pick = |cell: usize| match region.cell_kind(cell) {
            CellKind::Outside => None,
            _ => Some(grid[cell]),
        };
        let v = if top {
            let mut v = [pick(c - 1), pick(c - w)].into_iter().flatten().min();
            if let Some(cap) = constraint.map(|x| x[s]) {
                v = Some(v.map_or(cap, |v| v.min(cap)));
            }
            v.ok_or(Error::EmptySupport("site has no upper bound"))?
        } else {
            let mut v = [pick(c + 1), pick(c + w)].into_iter().flatten().max();
            if let Some(cap) = constraint.map(|x| x[s]) {
                v = Some(v.map_or(cap, |v| v.max(cap)));
            }
            v.ok_or(Error::EmptySupport("site has no lower bound"))?
        };
        grid[c] = v;
    }
    Ok(HeightField::from_grid(region, grid))
}

/// The maximal element of the constrained state space, by a west/south
/// sweep in site order: `top_x = min(top_west, top_south, ceiling_x)`.
pub fn maximal_state(
    region: Arc<Region>,
    boundary: impl Fn(Point) -> i64,
    floor: Option<Vec<i64>>,
    ceiling: Option<Vec<i64>>,
) -> Result<HeightField> {
    let f = sweep_field(region, &boundary, ceiling.as_deref(), true)?;
    finish(f, floor, ceiling)
}

/// The minimal element, by an east/north sweep in reverse site order.
pub fn minimal_state(
    region: Arc<Region>,
    boundary: impl Fn(Point) -> i64,
    floor: Option<Vec<i64>>,
    ceiling: Option<Vec<i64>>,
) -> Result<HeightField> {
    let f = sweep_field(region, &boundary, floor.as_deref(), false)?;
    finish(f, floor, ceiling)
}

fn finish(f: HeightField, floor: Option<Vec<i64>>, ceiling: Option<Vec<i64>>) -> Result<HeightField> {
    let f = f
        .with_constraints(floor, ceiling)
        .map_err(|_| Error::EmptySupport("constraints leave no monotone surface"))?;
    if !f.is_monotone() {
        return Err(Error::EmptySupport("boundary admits no monotone surface"));
    }
    Ok(f)
}

/// Surface dynamics as a monotone system for the coupling machinery.
/// States are full cell grids; boundary cells never change.
#[derive(Clone, Debug)]
pub struct SurfaceDynamics {
    region: Arc<Region>,
    floor: Option<Vec<i64>>,
    ceiling: Option<Vec<i64>>,
    top: Vec<i64>,
    bottom: Vec<i64>,
}

impl SurfaceDynamics {
    pub fn new(
        region: Arc<Region>,
        boundary: impl Fn(Point) -> i64,
        floor: Option<Vec<i64>>,
        ceiling: Option<Vec<i64>>,
    ) -> Result<Self> {
        let top = maximal_state(region.clone(), &boundary, floor.clone(), ceiling.clone())?;
        let bottom = minimal_state(region.clone(), &boundary, floor.clone(), ceiling.clone())?;
        Ok(Self {
            region,
            floor,
            ceiling,
            top: top.grid().to_vec(),
            bottom: bottom.grid().to_vec(),
        })
    }

    pub fn region(&self) -> &Arc<Region> {
        &self.region
    }

    pub fn top_field(&self) -> HeightField {
        self.field(self.top.clone())
    }

    pub fn bottom_field(&self) -> HeightField {
        self.field(self.bottom.clone())
    }

    /// Wraps a grid produced by this system as a field with constraints.
    pub fn field(&self, grid: Vec<i64>) -> HeightField {
        HeightField::from_grid(self.region.clone(), grid)
            .with_constraints(self.floor.clone(), self.ceiling.clone())
            .expect("grid produced by the dynamics respects its constraints")
    }

    /// Grid with the given interior heights and this system's boundary.
    pub fn grid_from_heights(&self, heights: &[i64]) -> Vec<i64> {
        let mut g = self.top.clone();
        for (s, &v) in heights.iter().enumerate() {
            g[self.region.site_cell(s)] = v;
        }
        g
    }

    #[inline]
    pub fn move_at(&self, grid: &mut [i64], s: usize, up: bool) -> bool {
        let c = self.region.site_cell(s);
        let w = self.region.width();
        let new = if up {
            up_value(grid, w, c, self.ceiling.as_ref().map(|v| v[s]))
        } else {
            down_value(grid, w, c, self.floor.as_ref().map(|v| v[s]))
        };
        let changed = new != grid[c];
        grid[c] = new;
        changed
    }
}

impl MonotoneDynamics for SurfaceDynamics {
    fn sites(&self) -> usize {
        self.region.len()
    }

    fn top(&self) -> Vec<i64> {
        self.top.clone()
    }

    fn bottom(&self) -> Vec<i64> {
        self.bottom.clone()
    }

    #[inline]
    fn slot(&self, site: usize) -> usize {
        self.region.site_cell(site)
    }

    #[inline]
    fn apply(&self, state: &mut [i64], ev: &Event) {
        self.move_at(state, ev.site, ev.is_up());
    }

    fn interior(&self, state: &[i64]) -> Vec<i64> {
        (0..self.region.len()).map(|s| state[self.region.site_cell(s)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{planar_reference, SlopeVector};
    use alloc::vec;

    fn diag(p: Point) -> i64 {
        planar_reference(&SlopeVector::diagonal(), p)
    }

    /// 1x1 region with chosen west/south and east/north boundary values.
    fn single(ws: i64, en: i64) -> HeightField {
        let region = Arc::new(Region::square(1).unwrap());
        HeightField::new(region, |p| if p.0 < 0 || p.1 < 0 { ws } else { en }, |_| 0).unwrap()
    }

    #[test]
    fn up_move_examples() {
        assert_eq!(up_move(&single(0, 0), (0, 0)).unwrap().at((0, 0)), Some(0));
        assert_eq!(up_move(&single(1, 0), (0, 0)).unwrap().at((0, 0)), Some(1));
        let capped = single(1, 0).with_constraints(None, Some(vec![0])).unwrap();
        assert_eq!(up_move(&capped, (0, 0)).unwrap().at((0, 0)), Some(0));
        assert_eq!(up_move(&single(1, 0), (-1, 0)), Err(Error::NotUpdatable(-1, 0)));
    }

    #[test]
    fn down_move_examples() {
        assert_eq!(down_move(&single(0, 0), (0, 0)).unwrap().at((0, 0)), Some(0));
        assert_eq!(down_move(&single(0, -1), (0, 0)).unwrap().at((0, 0)), Some(-1));
        let floored = single(0, -1).with_constraints(Some(vec![0]), None).unwrap();
        assert_eq!(down_move(&floored, (0, 0)).unwrap().at((0, 0)), Some(0));
    }

    #[test]
    fn extremal_states_for_planar_square() {
        let region = Arc::new(Region::square(4).unwrap());
        let top = maximal_state(region.clone(), diag, None, None).unwrap();
        let bottom = minimal_state(region.clone(), diag, None, None).unwrap();
        for &(x, y) in region.sites() {
            assert_eq!(top.at((x, y)), Some(1 - x.max(y)));
            assert_eq!(bottom.at((x, y)), Some(-4 - x.min(y)));
        }
    }

    #[test]
    fn down_event_lowers_top() {
        let region = Arc::new(Region::square(3).unwrap());
        let top = maximal_state(region, diag, None, None).unwrap();
        let mut chain = SurfaceChain::new(top.clone());
        // top-right corner (2,2): east/north boundary is -5 and top is -1
        let s = chain.state().region().site_index((2, 2)).unwrap();
        let changed = chain.step(&Event { time: 0.1, site: s, u: 0.9 });
        assert!(changed);
        assert_eq!(chain.state().at((2, 2)), Some(-2));
        assert_eq!(chain.events(), 1);
    }

    #[test]
    fn run_is_deterministic_and_checkpoints() {
        let region = Arc::new(Region::square(3).unwrap());
        let top = maximal_state(region, diag, None, None).unwrap();
        let mut a = SurfaceChain::new(top.clone());
        let mut b = SurfaceChain::new(top);
        let ta = a.run(5.0, &mut EventStream::new(9, 9), &[0.0, 1.0, 5.0, 6.0]);
        let tb = b.run(5.0, &mut EventStream::new(9, 9), &[0.0, 1.0, 5.0, 6.0]);
        assert_eq!(ta, tb);
        assert_eq!(ta.times, vec![0.0, 1.0, 5.0]);
        assert_eq!(ta.states[2], a.state().heights());
        assert!(a.state().is_monotone());

        let mut idle = SurfaceChain::new(a.state().clone());
        let mut s = EventStream::starting_at(1, 9, 5.0);
        let t = idle.run(5.0, &mut s, &[]);
        assert_eq!(t.events, 0);
        assert_eq!(s.consumed(), 0);
    }
}
