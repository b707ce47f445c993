use std::sync::Arc;

use curvmix_core::coupling::{cftp_sample, coalescence_time, grand_coupled_step, CftpOptions, CoupledEnsemble, MonotoneDynamics};
use curvmix_core::events::{derive_key, rng_from_key};
use curvmix_core::lattice::{planar_reference, Region, SlopeVector, SosParams};
use curvmix_core::sos::{ExactSampler, SosDynamics};
use curvmix_core::spectral::{build_generator, enumerate_sos, DEFAULT_STATE_CAP};
use curvmix_core::surface::SurfaceDynamics;
use curvmix_core::EventStream;

fn square(n: usize) -> SurfaceDynamics {
    let s = SlopeVector::diagonal();
    SurfaceDynamics::new(Arc::new(Region::square(n).unwrap()), move |p| planar_reference(&s, p), None, None).unwrap()
}

fn ordered_for<D: MonotoneDynamics>(d: &D, key: u64, events: usize) {
    let mut ens = CoupledEnsemble::extremes(d);
    let mut stream = EventStream::new(key, d.sites());
    for _ in 0..events {
        grand_coupled_step(&mut ens, &stream.next()).unwrap();
    }
    assert!(ens.is_ordered());
}

#[test]
fn grand_coupling_keeps_order() {
    let sos = SosDynamics::new(Arc::new(SosParams::bounded(12, 3).unwrap()));
    ordered_for(&sos, 1, 50_000);
    ordered_for(&square(6), 2, 50_000);
}

#[test]
fn coalescence_is_reproducible() {
    let sos = SosDynamics::new(Arc::new(SosParams::bounded(8, 0).unwrap()));
    let a = coalescence_time(&sos, 77, 1e6, (8, 0)).unwrap();
    let b = coalescence_time(&sos, 77, 1e6, (8, 0)).unwrap();
    assert_eq!(a, b);
    assert!(!a.censored && a.time > 0.0);
    let c = coalescence_time(&sos, 78, 1e6, (8, 0)).unwrap();
    assert_ne!(a.time, c.time);
}

#[test]
fn short_horizon_is_censored() {
    let sos = SosDynamics::new(Arc::new(SosParams::bounded(16, 0).unwrap()));
    let r = coalescence_time(&sos, 3, 1.0, (16, 0)).unwrap();
    assert!(r.censored);
    assert_eq!(r.time, 1.0);
}

#[test]
fn cftp_matches_stationary_law_on_a_small_chain() {
    let params = Arc::new(SosParams::with_window(2, 0, 1).unwrap());
    let space = enumerate_sos(params.clone(), DEFAULT_STATE_CAP).unwrap();
    let pi = build_generator(&space).unwrap().pi().to_vec();
    let d = SosDynamics::new(params);
    let n = 20_000;
    let mut counts = vec![0usize; pi.len()];
    for r in 0..n {
        let (s, _) = cftp_sample(&d, derive_key(5, &[r]), CftpOptions::default()).unwrap();
        counts[space.index_of(&s).unwrap()] += 1;
    }
    for (c, p) in counts.iter().zip(&pi) {
        let f = *c as f64 / n as f64;
        // five binomial standard deviations
        assert!((f - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-9, "{f} vs {p}");
    }
}

#[test]
fn exact_sampler_agrees_with_enumeration() {
    let params = Arc::new(SosParams::bounded(3, 1).unwrap());
    let space = enumerate_sos(params.clone(), DEFAULT_STATE_CAP).unwrap();
    let pi = build_generator(&space).unwrap().pi().to_vec();
    let sampler = ExactSampler::new(params).unwrap();
    for i in 0..space.len() {
        let lp = sampler.log_prob(&space.state(i));
        assert!((lp.exp() - pi[i]).abs() < 1e-12);
    }
    let mut rng = rng_from_key(9);
    let path = sampler.sample(&mut rng);
    assert!(space.index_of(path.heights()).is_some());
}
