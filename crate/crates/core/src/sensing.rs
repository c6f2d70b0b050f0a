//! Distance-based sensing success.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingParams {
    /// Per-meter decay rate of the success probability.
    pub lambda: f64,
}

impl Default for SensingParams {
    fn default() -> Self {
        Self { lambda: 0.008 }
    }
}

/// `exp(-lambda * d)`.
pub fn sensing_success_prob(d: f64, params: &SensingParams) -> f64 {
    debug_assert!(d >= 0.0);
    (-params.lambda * d).exp()
}

/// One Bernoulli draw from the run's generator.
pub fn sample_sensing<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("sensing probability {p} outside [0, 1]")));
    }
    Ok(rng.gen::<f64>() < p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const P: SensingParams = SensingParams { lambda: 0.01 };

    #[test]
    fn examples() {
        assert_eq!(sensing_success_prob(0.0, &P), 1.0);
        assert!((sensing_success_prob(100.0, &P) - (-1f64).exp()).abs() < 1e-15);
        assert!((sensing_success_prob(50.0, &P) - 0.606_530_659_712_633_4).abs() < 1e-12);
        let a = sensing_success_prob(50.0, &P);
        assert!((sensing_success_prob(100.0, &P) - a * a).abs() < 1e-15);
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| sample_sensing(1.0, &mut rng).unwrap()));
        assert!((0..1000).all(|_| !sample_sensing(0.0, &mut rng).unwrap()));
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_sensing(0.5, &mut rng).unwrap()).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
        assert!(sample_sensing(1.2, &mut rng).is_err());
        assert!(sample_sensing(-0.1, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn decreasing_and_memoryless(a in 0.0..2000.0f64, b in 0.0..2000.0f64) {
            let pa = sensing_success_prob(a, &P);
            prop_assert!(pa > 0.0 && pa <= 1.0);
            let joint = sensing_success_prob(a + b, &P);
            let product = pa * sensing_success_prob(b, &P);
            prop_assert!((joint - product).abs() <= 1e-12 * joint.max(f64::MIN_POSITIVE));
            if b > 1e-6 {
                prop_assert!(sensing_success_prob(a + b, &P) < pa);
            }
        }
    }
}
