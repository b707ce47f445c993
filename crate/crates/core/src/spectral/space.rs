use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::coupling::MonotoneDynamics;
use crate::error::{Error, Result};
use crate::lattice::SosParams;
use crate::surface::SurfaceDynamics;

pub const DEFAULT_STATE_CAP: u128 = 5_000_000;

/// A fully enumerated state space. SOS spaces are implicit (mixed-radix
/// index over the per-site bounds); surface spaces are explicit lists.
#[derive(Clone, Debug)]
pub enum StateSpace {
    Sos(SosSpace),
    Surface(SurfaceSpace),
}

#[derive(Clone, Debug)]
pub struct SosSpace {
    params: Arc<SosParams>,
    lo: Vec<i64>,
    radix: Vec<usize>,
    /// last site has stride 1, so indices follow lexicographic order
    stride: Vec<usize>,
    size: usize,
}

#[derive(Clone, Debug)]
pub struct SurfaceSpace {
    dynamics: SurfaceDynamics,
    states: Vec<Vec<i64>>,
    index: BTreeMap<Vec<i64>, u32>,
}

/// Enumerates the SOS space of `params`; fails above `cap` states.
pub fn enumerate_sos(params: Arc<SosParams>, cap: u128) -> Result<StateSpace> {
    let n = params.len();
    let mut lo = Vec::with_capacity(n);
    let mut radix = Vec::with_capacity(n);
    let mut size: u128 = 1;
    for i in 0..n {
        let (a, b) = params.site_bounds(i);
        if a > b {
            return Err(Error::EmptySupport("floor above ceiling"));
        }
        lo.push(a);
        radix.push((b - a + 1) as usize);
        size = size.saturating_mul((b - a + 1) as u128);
    }
    if size > cap {
        return Err(Error::TooLarge { size, cap });
    }
    let mut stride = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * radix[i + 1];
    }
    Ok(StateSpace::Sos(SosSpace { params, lo, radix, stride, size: size as usize }))
}

/// Enumerates all monotone surfaces of `dynamics` (boundary, floor and
/// ceiling) by a depth-first sweep in site order: site `x` ranges over
/// `[bottom_x, min(phi_west, phi_south, ceiling_x)]`, which is never
/// empty because the bottom state is monotone.
pub fn enumerate_surface(dynamics: &SurfaceDynamics, cap: u128) -> Result<StateSpace> {
    let region = dynamics.region().clone();
    let n = region.len();
    let bottom = dynamics.bottom_field();
    let top = dynamics.top_field();
    let lower: Vec<i64> = bottom.heights().to_vec();
    let ceiling: Vec<i64> = top.heights().to_vec();
    let mut grid = dynamics.top();
    let mut states = Vec::new();
    let cells: Vec<usize> = (0..n).map(|s| dynamics.slot(s)).collect();
    let w = region.width();

    fn rec(
        s: usize,
        n: usize,
        cells: &[usize],
        w: usize,
        lower: &[i64],
        ceiling: &[i64],
        grid: &mut [i64],
        states: &mut Vec<Vec<i64>>,
        cap: u128,
    ) -> Result<()> {
        if s == n {
            if states.len() as u128 >= cap {
                return Err(Error::TooLarge { size: cap + 1, cap });
            }
            states.push(cells.iter().map(|&c| grid[c]).collect());
            return Ok(());
        }
        let c = cells[s];
        let hi = grid[c - 1].min(grid[c - w]).min(ceiling[s]);
        for v in lower[s]..=hi {
            grid[c] = v;
            rec(s + 1, n, cells, w, lower, ceiling, grid, states, cap)?;
        }
        Ok(())
    }
    rec(0, n, &cells, w, &lower, &ceiling, &mut grid, &mut states, cap)?;
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
    Ok(StateSpace::Surface(SurfaceSpace { dynamics: dynamics.clone(), states, index }))
}

impl SosSpace {
    pub fn params(&self) -> &Arc<SosParams> {
        &self.params
    }

    #[inline]
    pub fn decode_into(&self, mut idx: usize, out: &mut [i64]) {
        for i in 0..self.lo.len() {
            let q = idx / self.stride[i];
            idx -= q * self.stride[i];
            out[i] = self.lo[i] + q as i64;
        }
    }

    #[inline]
    pub fn encode(&self, state: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for (i, &v) in state.iter().enumerate() {
            let d = v - self.lo[i];
            if d < 0 || d as usize >= self.radix[i] {
                return None;
            }
            idx += d as usize * self.stride[i];
        }
        Some(idx)
    }

    #[inline]
    pub fn stride(&self, i: usize) -> usize {
        self.stride[i]
    }
}

impl SurfaceSpace {
    pub fn dynamics(&self) -> &SurfaceDynamics {
        &self.dynamics
    }
}

impl StateSpace {
    pub fn len(&self) -> usize {
        match self {
            StateSpace::Sos(s) => s.size,
            StateSpace::Surface(s) => s.states.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of sites (`L`, or `|U|`).
    pub fn sites(&self) -> usize {
        match self {
            StateSpace::Sos(s) => s.lo.len(),
            StateSpace::Surface(s) => s.dynamics.sites(),
        }
    }

    pub fn state(&self, i: usize) -> Vec<i64> {
        match self {
            StateSpace::Sos(s) => {
                let mut out = vec![0; s.lo.len()];
                s.decode_into(i, &mut out);
                out
            }
            StateSpace::Surface(s) => s.states[i].clone(),
        }
    }

    pub fn index_of(&self, state: &[i64]) -> Option<usize> {
        match self {
            StateSpace::Sos(s) => {
                if state.len() != s.lo.len() {
                    return None;
                }
                s.encode(state)
            }
            StateSpace::Surface(s) => s.index.get(state).map(|&i| i as usize),
        }
    }

    /// Index of the maximal state.
    pub fn top_index(&self) -> usize {
        match self {
            StateSpace::Sos(s) => s.size - 1,
            StateSpace::Surface(s) => s.states.len() - 1,
        }
    }

    /// Index of the minimal state.
    pub fn bottom_index(&self) -> usize {
        match self {
            StateSpace::Sos(_) => 0,
            StateSpace::Surface(_) => 0,
        }
    }

    /// Image of state `i` under a symmetry of the dynamics, when one is
    /// known: `eta -> h - reversed(eta)` for SOS spaces whose window and
    /// walls are invariant under it.
    pub fn reflection(&self) -> Option<Vec<u32>> {
        let StateSpace::Sos(s) = self else { return None };
        let p = &s.params;
        let n = p.len();
        let h = p.h();
        let ok = (0..n).all(|i| {
            let (a, b) = p.site_bounds(i);
            let (c, d) = p.site_bounds(n - 1 - i);
            a == h - d && b == h - c
        });
        if !ok {
            return None;
        }
        let mut state = vec![0; n];
        let mut image = vec![0; n];
        let map = (0..s.size)
            .map(|idx| {
                s.decode_into(idx, &mut state);
                for i in 0..n {
                    image[i] = h - state[n - 1 - i];
                }
                s.encode(&image).expect("window is reflection invariant") as u32
            })
            .collect();
        Some(map)
    }

    pub fn as_sos(&self) -> Option<&SosSpace> {
        match self {
            StateSpace::Sos(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_surface(&self) -> Option<&SurfaceSpace> {
        match self {
            StateSpace::Surface(s) => Some(s),
            _ => None,
        }
    }
}
