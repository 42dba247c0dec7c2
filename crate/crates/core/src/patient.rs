use serde::{Deserialize, Serialize};

/// Treatment arm. Control is coded 0 and the experimental arm 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub fn indicator(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }

    pub fn from_indicator(t: u8) -> Option<Arm> {
        match t {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treatment),
            _ => None,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Treatment,
            Arm::Treatment => Arm::Control,
        }
    }
}

/// Latent subgroup of a simulated patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subgroup {
    Sensitive,
    NonSensitive,
    Harmful,
}

/// One trial subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub treatment: Arm,
    pub covariates: Vec<f64>,
    /// `None` before the outcome is observed.
    pub response: Option<bool>,
    /// Simulation truth, when known.
    pub true_sensitive: Option<bool>,
    pub predicted_sensitive: Option<bool>,
}

impl PatientRecord {
    pub fn new(id: impl Into<String>, treatment: Arm, covariates: Vec<f64>) -> Self {
        PatientRecord {
            id: id.into(),
            treatment,
            covariates,
            response: None,
            true_sensitive: None,
            predicted_sensitive: None,
        }
    }

    pub fn with_response(mut self, response: bool) -> Self {
        self.response = Some(response);
        self
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }
}

/// Number of covariates shared by every record, or an error naming the first
/// record that disagrees.
pub(crate) fn common_dimension(patients: &[PatientRecord]) -> crate::Result<usize> {
    let p = patients.first().map_or(0, |r| r.covariates.len());
    for r in patients {
        if r.covariates.len() != p {
            return Err(crate::Error::Dimension(format!(
                "patient '{}' has {} covariates, expected {}",
                r.id,
                r.covariates.len(),
                p
            )));
        }
    }
    Ok(p)
}
