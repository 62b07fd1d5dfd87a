//! Matvec and vector-operation tallies.
//!
//! Counters are per thread. Solver drivers are single threaded, so a solve
//! sees exactly the work it did even when several solves run side by side
//! (as the test harness does). Operator-internal parallelism does not touch
//! the counters because the count is taken at the call site.

use std::cell::Cell;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

thread_local! {
    static MATVECS: Cell<u64> = const { Cell::new(0) };
    static VECOPS: Cell<u64> = const { Cell::new(0) };
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub matvecs: u64,
    pub vecops: u64,
}

impl Sub for Counts {
    type Output = Counts;

    fn sub(self, rhs: Counts) -> Counts {
        Counts {
            matvecs: self.matvecs - rhs.matvecs,
            vecops: self.vecops - rhs.vecops,
        }
    }
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, rhs: Counts) -> Counts {
        Counts {
            matvecs: self.matvecs + rhs.matvecs,
            vecops: self.vecops + rhs.vecops,
        }
    }
}

#[inline]
pub fn add_matvecs(n: u64) {
    MATVECS.with(|c| c.set(c.get() + n));
}

#[inline]
pub fn add_vecops(n: u64) {
    VECOPS.with(|c| c.set(c.get() + n));
}

pub fn snapshot() -> Counts {
    Counts {
        matvecs: MATVECS.with(Cell::get),
        vecops: VECOPS.with(Cell::get),
    }
}

/// Zero both counters. Only the harness should call this.
pub fn reset() {
    MATVECS.with(|c| c.set(0));
    VECOPS.with(|c| c.set(0));
}

/// Counts accumulated since `start`.
pub fn since(start: Counts) -> Counts {
    snapshot() - start
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_until_reset() {
        reset();
        let a = snapshot();
        add_matvecs(3);
        add_vecops(5);
        let b = snapshot();
        assert!(b.matvecs >= a.matvecs && b.vecops >= a.vecops);
        assert_eq!(since(a), Counts { matvecs: 3, vecops: 5 });
        reset();
        assert_eq!(snapshot(), Counts::default());
    }
}
