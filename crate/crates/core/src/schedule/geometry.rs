//! Circular segments (SOS) and spherical caps (surfaces) of height `u`
//! over a fixed base of radius `rho`.

use crate::error::{Error, Result};
use crate::lattice::{Region, SlopeVector};
use crate::math;

/// Radius `R` solving `(2R - u) u = rho^2`.
pub fn segment_radius(u: f64, rho: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::InvalidHeight(u));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameters("base radius must be positive"));
    }
    Ok((rho * rho + u * u) / (2.0 * u))
}

/// The segment `{(x, y): |(x, y) - (center, u - R)| <= R, y >= 0}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentGeometry {
    pub center: f64,
    pub rho: f64,
    pub u: f64,
    pub radius: f64,
}

impl SegmentGeometry {
    pub fn new(center: f64, rho: f64, u: f64) -> Result<Self> {
        let radius = segment_radius(u, rho)?;
        Ok(Self { center, rho, u, radius })
    }

    /// Segment over `[L/2 - rho, L/2 + rho]` for sites labelled `1..=L`.
    pub fn for_sos(len: usize, rho: f64, u: f64) -> Result<Self> {
        Self::new(len as f64 / 2.0, rho, u)
    }

    /// `psi_u(x)`.
    pub fn height(&self, x: f64) -> Result<f64> {
        let d = x - self.center;
        if !(math::abs(d) <= self.rho) {
            return Err(Error::OutsideBase);
        }
        let r = self.radius;
        Ok((self.u - r) + math::sqrt((r * r - d * d).max(0.0)))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let tol = 1e-12 * self.radius;
        let dx = x - self.center;
        let dy = y - (self.u - self.radius);
        y >= -tol && math::sqrt(dx * dx + dy * dy) <= self.radius + tol
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Spherical cap `{p : |p - c| <= R, (p - w0) . n >= 0}` with
/// `c = w0 - (R - u) n`, whose base is the disk of radius `rho` centred at
/// `w0` in the plane through `w0` with normal `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapGeometry {
    pub w0: [f64; 3],
    pub normal: [f64; 3],
    pub rho: f64,
    pub u: f64,
    pub radius: f64,
    pub sphere_center: [f64; 3],
}

impl CapGeometry {
    pub fn new(w0: [f64; 3], slope: &SlopeVector, rho: f64, u: f64) -> Result<Self> {
        let radius = segment_radius(u, rho)?;
        let n = slope.components();
        let k = radius - u;
        let sphere_center = [w0[0] - k * n[0], w0[1] - k * n[1], w0[2] - k * n[2]];
        Ok(Self { w0, normal: n, rho, u, radius, sphere_center })
    }

    /// Base centred above `center` on the plane `Pi^n` shifted up by
    /// `shift` (the `C log L` offset).
    pub fn on_plane(center: (f64, f64), slope: &SlopeVector, shift: f64, rho: f64, u: f64) -> Result<Self> {
        let z = slope.plane_height(center, shift);
        Self::new([center.0, center.1, z], slope, rho, u)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let tol = 1e-12 * self.radius;
        let d = [p[0] - self.sphere_center[0], p[1] - self.sphere_center[1], p[2] - self.sphere_center[2]];
        let off = [p[0] - self.w0[0], p[1] - self.w0[1], p[2] - self.w0[2]];
        math::sqrt(dot(d, d)) <= self.radius + tol && dot(off, self.normal) >= -tol
    }

    /// Height of the base plane above `(x, y)`.
    pub fn base_plane(&self, x: (f64, f64)) -> f64 {
        let n = self.normal;
        self.w0[2] - (n[0] * (x.0 - self.w0[0]) + n[1] * (x.1 - self.w0[1])) / n[2]
    }

    /// `psi_u(x)`: the top of the cap above `x`, `None` when the vertical
    /// line misses it.
    pub fn height(&self, x: (f64, f64)) -> Option<f64> {
        let c = self.sphere_center;
        let (dx, dy) = (x.0 - c[0], x.1 - c[1]);
        let disc = self.radius * self.radius - dx * dx - dy * dy;
        if disc < 0.0 {
            return None;
        }
        let top = c[2] + math::sqrt(disc);
        let plane = self.base_plane(x);
        if top < plane - 1e-12 * self.radius {
            return None;
        }
        Some(top)
    }

    /// `|p - w0| / rho` for the base point above `x`: at most one exactly
    /// when `x` lies in the projection `V` of the base disk.
    pub fn base_norm(&self, x: (f64, f64)) -> f64 {
        let dz = self.base_plane(x) - self.w0[2];
        let (dx, dy) = (x.0 - self.w0[0], x.1 - self.w0[1]);
        math::sqrt(dx * dx + dy * dy + dz * dz) / self.rho
    }

    /// Lower bound on the horizontal distance from the sites of `region`
    /// to the boundary of `V`; negative when some site lies outside.
    pub fn clearance(&self, region: &Region) -> f64 {
        let minor = self.rho * self.normal[2];
        region
            .sites()
            .iter()
            .map(|&(a, b)| (1.0 - self.base_norm((a as f64, b as f64))) * minor)
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_examples() {
        assert_eq!(segment_radius(4.0, 4.0).unwrap(), 4.0);
        let r = segment_radius(2.0, 4.0).unwrap();
        assert_eq!(r, 5.0);
        assert_eq!((2.0 * r - 2.0) * 2.0, 16.0);
        let mut u = 3.0;
        let mut prev = segment_radius(u, 10.0).unwrap();
        for _ in 0..30 {
            u /= 2.0;
            let next = segment_radius(u, 10.0).unwrap();
            assert!(next > prev);
            prev = next;
        }
        assert_eq!(segment_radius(0.0, 1.0), Err(Error::InvalidHeight(0.0)));
        assert!(segment_radius(-1.0, 1.0).is_err());
    }

    #[test]
    fn segment_apex_and_feet() {
        let g = SegmentGeometry::new(32.0, 266.0, 40.0).unwrap();
        assert!((g.height(32.0).unwrap() - 40.0).abs() < 1e-12);
        assert!(g.height(32.0 + 266.0).unwrap().abs() < 1e-9);
        assert!(g.height(32.0 - 266.0).unwrap().abs() < 1e-9);
        assert_eq!(g.height(32.0 + 266.5), Err(Error::OutsideBase));
    }

    #[test]
    fn segment_is_concave_and_consistent() {
        let g = SegmentGeometry::new(0.0, 10.0, 3.0).unwrap();
        for k in 0..40 {
            let a = -10.0 + k as f64 * 0.4;
            let b = a + 3.5;
            if b > 10.0 {
                break;
            }
            let mid = g.height((a + b) / 2.0).unwrap();
            assert!(mid >= (g.height(a).unwrap() + g.height(b).unwrap()) / 2.0);
            let y = g.height(a).unwrap();
            assert!(g.contains(a, y));
            assert!(!g.contains(a, y + 1e-6 * g.radius));
        }
    }

    #[test]
    fn segments_nest_as_u_decreases() {
        let a = SegmentGeometry::new(0.0, 10.0, 3.0).unwrap();
        let b = SegmentGeometry::new(0.0, 10.0, 2.5).unwrap();
        for k in 0..=100 {
            let x = -10.0 + 0.2 * k as f64;
            assert!(b.height(x).unwrap() <= a.height(x).unwrap() + 1e-12);
        }
    }

    #[test]
    fn cap_examples() {
        let n = SlopeVector::diagonal();
        let cap = CapGeometry::on_plane((1.0, -2.0), &n, 3.0, 50.0, 4.0).unwrap();
        let nn = cap.normal;
        let apex = [cap.w0[0] + 4.0 * nn[0], cap.w0[1] + 4.0 * nn[1], cap.w0[2] + 4.0 * nn[2]];
        assert!(cap.contains(apex));
        let d: f64 = (0..3).map(|i| (apex[i] - cap.sphere_center[i]).powi(2)).sum::<f64>().sqrt();
        assert!((d - cap.radius).abs() < 1e-9);
        assert!(cap.contains(cap.w0));
        let eps = 1e-3;
        assert!(!cap.contains([cap.w0[0] - eps * nn[0], cap.w0[1] - eps * nn[1], cap.w0[2] - eps * nn[2]]));
    }

    #[test]
    fn cap_height_is_the_top_member() {
        let n = SlopeVector::from_direction([1.0, 2.0, 3.0]).unwrap();
        let cap = CapGeometry::on_plane((0.0, 0.0), &n, 1.0, 20.0, 3.0).unwrap();
        let mut hits = 0;
        for i in -30..=30 {
            for j in -30..=30 {
                let x = (i as f64, j as f64);
                if let Some(z) = cap.height(x) {
                    hits += 1;
                    assert!(cap.contains([x.0, x.1, z]));
                    assert!(!cap.contains([x.0, x.1, z + 1e-6 * cap.radius]));
                    assert!(z >= cap.base_plane(x) - 1e-9);
                    assert!(cap.base_norm(x) <= 1.0 + 1e-9);
                } else {
                    assert!(cap.base_norm(x) > 1.0 - 1e-9);
                }
            }
        }
        assert!(hits > 100);
    }

    #[test]
    fn clearance_sign() {
        let n = SlopeVector::diagonal();
        let region = Region::square(4).unwrap();
        let (cx, cy) = region.center();
        let big = CapGeometry::on_plane((cx, cy), &n, 0.0, 100.0, 2.0).unwrap();
        assert!(big.clearance(&region) > 0.0);
        let small = CapGeometry::on_plane((cx, cy), &n, 0.0, 1.0, 0.5).unwrap();
        assert!(small.clearance(&region) < 0.0);
    }
}
