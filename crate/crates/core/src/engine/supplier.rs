use crate::{Arm, Result, Subgroup};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A prospective patient before randomisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub covariates: Vec<f64>,
    /// Known only in simulation.
    pub subgroup: Option<Subgroup>,
}

impl Candidate {
    pub fn true_sensitive(&self) -> Option<bool> {
        self.subgroup.map(|g| g == Subgroup::Sensitive)
    }
}

/// Source of trial candidates and of their outcomes once treated.
pub trait PatientSupplier {
    fn next_candidate(&mut self) -> Result<Candidate>;

    /// Binary response of `candidate` on `arm`.
    fn outcome(&mut self, candidate: &Candidate, arm: Arm) -> Result<bool>;
}

/// 1:1 allocation in permuted blocks of two.
#[derive(Debug, Clone)]
pub struct BlockRandomizer {
    rng: ChaCha8Rng,
    pending: Option<Arm>,
}

impl BlockRandomizer {
    pub fn new(seed: u64) -> Self {
        BlockRandomizer {
            rng: crate::seed::rng(seed),
            pending: None,
        }
    }

    pub fn next_arm(&mut self) -> Arm {
        match self.pending.take() {
            Some(arm) => arm,
            None => {
                let arm = if self.rng.random_bool(0.5) {
                    Arm::Treatment
                } else {
                    Arm::Control
                };
                self.pending = Some(arm.other());
                arm
            }
        }
    }
}
