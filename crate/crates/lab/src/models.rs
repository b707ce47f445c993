//! Model setups shared by the experiment runners and the tests.

use std::sync::Arc;

use curvmix_core::coupling::MonotoneDynamics;
use curvmix_core::events::EventStream;
use curvmix_core::lattice::{planar_reference, Region, SlopeVector, SosParams, SosPath};
use curvmix_core::sos::SosChain;
use curvmix_core::spectral::{build_generator, enumerate_sos, enumerate_surface, StateSpace, DEFAULT_STATE_CAP};
use curvmix_core::surface::{SurfaceChain, SurfaceDynamics, Trajectory};
use curvmix_core::sos::SosDynamics;
use curvmix_core::Result;

/// SOS parameters: bounded model `[-L, L+h]` unless `window` is given,
/// floor at the wall profile when `walls`.
pub fn sos_params(l: usize, h: i64, window: Option<i64>, walls: bool) -> Result<Arc<SosParams>> {
    let p = match window {
        Some(m) => SosParams::with_window(l, h, m)?,
        None => SosParams::bounded(l, h)?,
    };
    Ok(Arc::new(if walls { p.above_wall()? } else { p }))
}

/// The straight line from `0` to `h`: `i h / (L+1)` at label `i`.
pub fn sos_reference(l: usize, h: i64) -> Vec<f64> {
    (1..=l).map(|i| i as f64 * h as f64 / (l as f64 + 1.0)).collect()
}

/// Monotone surfaces on the `n x n` square with boundary heights on the
/// integer plane of slope `slope`.
pub fn planar_square(n: usize, slope: &SlopeVector) -> Result<SurfaceDynamics> {
    let region = Arc::new(Region::square(n)?);
    let s = *slope;
    SurfaceDynamics::new(region, move |p| planar_reference(&s, p), None, None)
}

/// `phibar^n` at the interior sites of `dynamics`.
pub fn planar_profile(dynamics: &SurfaceDynamics, slope: &SlopeVector) -> Vec<f64> {
    dynamics.region().sites().iter().map(|&p| planar_reference(slope, p) as f64).collect()
}

/// Runs the SOS chain from the maximal state, recording `checkpoints`.
pub fn sos_from_top(params: Arc<SosParams>, key: u64, horizon: f64, checkpoints: &[f64]) -> Trajectory {
    let sites = params.len();
    let mut chain = SosChain::new(SosPath::top(params));
    chain.run(horizon, &mut EventStream::new(key, sites), checkpoints)
}

/// Runs the surface chain from the maximal state, recording `checkpoints`.
pub fn surface_from_top(dynamics: &SurfaceDynamics, key: u64, horizon: f64, checkpoints: &[f64]) -> Trajectory {
    let mut chain = SurfaceChain::new(dynamics.top_field());
    chain.run(horizon, &mut EventStream::new(key, dynamics.sites()), checkpoints)
}

/// Either model as a monotone system.
pub enum System {
    Sos(SosDynamics),
    Surface(SurfaceDynamics, SlopeVector),
}

impl System {
    pub fn sites(&self) -> usize {
        match self {
            System::Sos(d) => d.sites(),
            System::Surface(d, _) => d.sites(),
        }
    }

    pub fn reference(&self) -> Vec<f64> {
        match self {
            System::Sos(d) => sos_reference(d.params().len(), d.params().h()),
            System::Surface(d, s) => planar_profile(d, s),
        }
    }

    pub fn enumerate(&self) -> Result<StateSpace> {
        match self {
            System::Sos(d) => enumerate_sos(d.params().clone(), DEFAULT_STATE_CAP),
            System::Surface(d, _) => enumerate_surface(d, DEFAULT_STATE_CAP),
        }
    }

    /// Stationary law on the enumerated space.
    pub fn stationary(&self) -> Result<(StateSpace, Vec<f64>)> {
        let space = self.enumerate()?;
        let pi = build_generator(&space)?.pi().to_vec();
        Ok((space, pi))
    }

    pub fn trajectory(&self, key: u64, horizon: f64, checkpoints: &[f64]) -> Trajectory {
        match self {
            System::Sos(d) => sos_from_top(d.params().clone(), key, horizon, checkpoints),
            System::Surface(d, _) => surface_from_top(d, key, horizon, checkpoints),
        }
    }
}
