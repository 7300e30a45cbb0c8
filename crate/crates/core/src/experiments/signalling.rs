use crate::bell::{AnnihilationEvent, AnnihilationWeight, Vec3};
use crate::error::{Error, Result};

/// Annihilation weight `δ_ij (1 + λ α (b·ẑ)) / 4`, under which the left
/// wing's outcome depends on the right wing's setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignallingWeight {
    lambda: f64,
}

impl SignallingWeight {
    /// `lambda` must lie in `[0, 1)` so the weight stays nonnegative.
    pub fn new(lambda: f64) -> Result<Self> {
        if (0.0..1.0).contains(&lambda) {
            Ok(SignallingWeight { lambda })
        } else {
            Err(Error::Input(format!("signalling strength {lambda} must lie in [0, 1)")))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl AnnihilationWeight for SignallingWeight {
    fn weight(&self, ev: &AnnihilationEvent) -> f64 {
        if !ev.same_pair() {
            return 0.0;
        }
        (1.0 + self.lambda * ev.alpha.value() * ev.b_meas.dot(Vec3::Z)) / 4.0
    }

    fn name(&self) -> String {
        format!("signalling({})", self.lambda)
    }
}
