//! Per-link bookkeeping as two nested chains: sensing (outer) and
//! transmission outcome (inner), both resolved once per cycle.

use serde::{Deserialize, Serialize};

use super::mode::TransmissionMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OuterState {
    SensingSuccess,
    SensingFailure,
}

impl OuterState {
    pub fn index(self) -> usize {
        match self {
            OuterState::SensingSuccess => 0,
            OuterState::SensingFailure => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InnerState {
    SuccessU2N,
    SuccessU2U,
    SuccessU2D,
    TransmissionFailure,
}

impl InnerState {
    pub const ALL: [InnerState; 4] = [
        InnerState::SuccessU2N,
        InnerState::SuccessU2U,
        InnerState::SuccessU2D,
        InnerState::TransmissionFailure,
    ];

    pub fn index(self) -> usize {
        match self {
            InnerState::SuccessU2N => 0,
            InnerState::SuccessU2U => 1,
            InnerState::SuccessU2D => 2,
            InnerState::TransmissionFailure => 3,
        }
    }

    pub fn success(mode: TransmissionMode) -> Self {
        match mode {
            TransmissionMode::U2N => InnerState::SuccessU2N,
            TransmissionMode::U2U => InnerState::SuccessU2U,
            TransmissionMode::U2D => InnerState::SuccessU2D,
        }
    }

    /// Resolves the cycle's outcome.
    pub fn resolve(mode: Option<TransmissionMode>, transmitted: bool) -> Self {
        match mode {
            Some(m) if transmitted => Self::success(m),
            _ => InnerState::TransmissionFailure,
        }
    }
}

/// Sensing outcomes are independent across cycles at a fixed position, so
/// both rows equal `[p_s, 1 - p_s]`.
pub fn outer_transition(p_sense: f64) -> [[f64; 2]; 2] {
    debug_assert!((0.0..=1.0).contains(&p_sense));
    let row = [p_sense, 1.0 - p_sense];
    [row, row]
}

/// Distribution over (U2N, U2U, U2D, Fail).
pub fn inner_distribution(mode: Option<TransmissionMode>, p_transmit: f64) -> [f64; 4] {
    debug_assert!((0.0..=1.0).contains(&p_transmit));
    let mut d = [0.0; 4];
    match mode {
        Some(m) => {
            d[InnerState::success(m).index()] = p_transmit;
            d[InnerState::TransmissionFailure.index()] = 1.0 - p_transmit;
        }
        None => d[InnerState::TransmissionFailure.index()] = 1.0,
    }
    d
}

/// Counts visits and transitions of both chains for one link.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainTracker {
    pub outer: Option<OuterState>,
    pub inner: Option<InnerState>,
    pub outer_visits: [u64; 2],
    pub inner_visits: [u64; 4],
    pub outer_transitions: [[u64; 2]; 2],
    pub inner_transitions: [[u64; 4]; 4],
}

impl ChainTracker {
    pub fn record(&mut self, sensed: bool, mode: Option<TransmissionMode>, transmitted: bool) {
        let outer = if sensed {
            OuterState::SensingSuccess
        } else {
            OuterState::SensingFailure
        };
        let inner = InnerState::resolve(mode, transmitted);
        if let Some(prev) = self.outer {
            self.outer_transitions[prev.index()][outer.index()] += 1;
        }
        if let Some(prev) = self.inner {
            self.inner_transitions[prev.index()][inner.index()] += 1;
        }
        self.outer_visits[outer.index()] += 1;
        self.inner_visits[inner.index()] += 1;
        self.outer = Some(outer);
        self.inner = Some(inner);
    }

    pub fn cycles(&self) -> u64 {
        self.outer_visits.iter().sum()
    }

    pub fn sensing_frequency(&self) -> f64 {
        self.outer_visits[0] as f64 / self.cycles().max(1) as f64
    }

    pub fn inner_frequencies(&self) -> [f64; 4] {
        let n = self.cycles().max(1) as f64;
        self.inner_visits.map(|v| v as f64 / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{sample_sensing, sensing_success_prob, SensingParams};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn certain_sensing_row() {
        let m = outer_transition(1.0);
        assert_eq!(m[0], [1.0, 0.0]);
        assert_eq!(m[1], [1.0, 0.0]);
    }

    #[test]
    fn inner_u2d_example() {
        let d = inner_distribution(Some(TransmissionMode::U2D), 0.7);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[2], 0.7);
        assert!((d[3] - 0.3).abs() < 1e-15);
        assert_eq!(inner_distribution(None, 0.9), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn stationary_sensing_frequency() {
        let p = sensing_success_prob(125.0, &SensingParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut t = ChainTracker::default();
        for _ in 0..100_000 {
            t.record(sample_sensing(p, &mut rng).unwrap(), None, false);
        }
        assert!((t.sensing_frequency() - p).abs() < 0.01);
        assert_eq!(t.inner_visits[3], 100_000);
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(p in 0.0f64..=1.0, m in 0usize..4) {
            for row in outer_transition(p) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let mode = [Some(TransmissionMode::U2N), Some(TransmissionMode::U2U), Some(TransmissionMode::U2D), None][m];
            let d = inner_distribution(mode, p);
            prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
