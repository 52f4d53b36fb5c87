//! Global comparison tolerances.
//!
//! All weight and integral comparisons in this crate go through a single
//! absolute tolerance. Positions are a separate, much tighter scale: two
//! atom positions closer than [`POSITION_MERGE`] are treated as the same
//! point of the real line.

use std::sync::atomic::{AtomicU64, Ordering};

/// Default absolute tolerance for weight and integral comparisons.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Positions closer than this merge into a single atom.
pub const POSITION_MERGE: f64 = 1e-12;

/// Atoms with weight below this are dropped when extracting a measure from
/// slope jumps. Kept two orders below the comparison tolerance so that
/// legitimate small atoms survive while slope rounding noise does not.
pub const WEIGHT_DROP: f64 = 1e-11;

/// Cancellation residue: weights at or below this after a subtraction are
/// pure rounding noise and are removed.
pub const WEIGHT_DUST: f64 = 1e-12;

static TOLERANCE_BITS: AtomicU64 = AtomicU64::new(0);

fn encode(t: f64) -> u64 {
    t.to_bits()
}

/// Current global tolerance for weight comparisons.
pub fn tolerance() -> f64 {
    let bits = TOLERANCE_BITS.load(Ordering::Relaxed);
    if bits == 0 {
        DEFAULT_TOLERANCE
    } else {
        f64::from_bits(bits)
    }
}

/// Override the global tolerance (e.g. from the `SHADOW_TOL` environment
/// variable). Panics on non-finite or non-positive values.
pub fn set_tolerance(t: f64) {
    assert!(t.is_finite() && t > 0.0, "tolerance must be positive");
    TOLERANCE_BITS.store(encode(t), Ordering::Relaxed);
}

/// `a <= b` up to the global tolerance.
pub fn le(a: f64, b: f64) -> bool {
    a <= b + tolerance()
}

/// `a == b` up to the global tolerance.
pub fn eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= tolerance()
}

/// Two positions denote the same point.
pub fn same_position(a: f64, b: f64) -> bool {
    (a - b).abs() < POSITION_MERGE
}
