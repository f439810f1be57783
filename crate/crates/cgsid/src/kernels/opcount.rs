//! Thread-local multiply-add counter for the evaluation paths.
//!
//! The multilinear-form and matvec implementations report the trip counts of
//! their inner loops here, so tests can assert that hierarchical evaluation
//! touches each parameter O(1) times. Counts accumulate per thread until
//! [`reset`] is called.

use std::cell::Cell;

thread_local! {
    static MULADDS: Cell<u64> = const { Cell::new(0) };
}

/// Zero the counter for the current thread.
pub fn reset() {
    MULADDS.with(|c| c.set(0));
}

/// Multiply-adds recorded on the current thread since the last [`reset`].
pub fn total() -> u64 {
    MULADDS.with(|c| c.get())
}

#[inline]
pub(crate) fn charge(n: u64) {
    MULADDS.with(|c| c.set(c.get() + n));
}
