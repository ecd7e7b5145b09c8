//! Six-dimensional Halton points from the first six primes.

/// Bases of the six coordinates.
pub const BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    out
}

/// Point number `index` (starting at 1) of the sequence; every coordinate lies
/// in (0, 1).
pub fn halton_point(index: u64) -> [f64; 6] {
    debug_assert!(index >= 1, "Halton indices start at 1");
    BASES.map(|b| radical_inverse(index, b))
}

/// Iterator over consecutive Halton points, remembering its position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaltonState {
    pub index: u64,
}

impl HaltonState {
    pub fn new() -> Self {
        Self { index: 1 }
    }

    pub fn starting_at(index: u64) -> Self {
        Self {
            index: index.max(1),
        }
    }
}

impl Default for HaltonState {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for HaltonState {
    type Item = (u64, [f64; 6]);

    fn next(&mut self) -> Option<Self::Item> {
        let i = self.index;
        self.index += 1;
        Some((i, halton_point(i)))
    }
}
