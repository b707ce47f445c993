use crate::lattice::SosPath;

/// `e^{-2} / (1 + e^{-2})`.
pub const BETA: f64 = 0.119_202_922_022_117_57;
/// `1 / (1 + e^{-2})`.
pub const GAMMA: f64 = 0.880_797_077_977_882_4;

/// The three possible values of a heat-bath rate, kept symbolic so that
/// comparisons between rates are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rate {
    Low,
    Half,
    High,
}

impl Rate {
    #[inline]
    pub const fn value(self) -> f64 {
        match self {
            Rate::Low => BETA,
            Rate::Half => 0.5,
            Rate::High => GAMMA,
        }
    }
}

/// `(p_minus, p_plus)` at height `x` with neighbors `left`, `right`.
///
/// With `a = min`, `b = max` of the neighbors: moving down costs energy
/// when `x <= a`, is neutral for `a < x <= b` and gains energy above `b`;
/// moving up is the mirror image.
#[inline]
pub fn rates_at(left: i64, x: i64, right: i64) -> (Rate, Rate) {
    let (a, b) = if left <= right { (left, right) } else { (right, left) };
    let down = if x <= a {
        Rate::Low
    } else if x <= b {
        Rate::Half
    } else {
        Rate::High
    };
    let up = if x >= b {
        Rate::Low
    } else if x >= a {
        Rate::Half
    } else {
        Rate::High
    };
    (down, up)
}

/// Rates at 0-based site `i` of `path`, reading the pinned boundary
/// values at the two ends.
pub fn glauber_rates(path: &SosPath, i: usize) -> (Rate, Rate) {
    let (l, r) = path.params().neighbors(path.heights(), i);
    rates_at(l, path.heights()[i], r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Up,
    Hold,
    Down,
}

impl Move {
    /// Shared-uniform layout `up = [0, p+)`, `down = (1 - p-, 1]`; ordered
    /// states receive ordered moves.
    #[inline]
    pub fn choose(u: f64, rates: (Rate, Rate)) -> Move {
        if u < rates.1.value() {
            Move::Up
        } else if u > 1.0 - rates.0.value() {
            Move::Down
        } else {
            Move::Hold
        }
    }
}
