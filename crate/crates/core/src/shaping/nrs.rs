use crate::mdp::EnvState;
use crate::shaping::Potential;
use crate::subgoal::SubgoalSpec;
use crate::Result;

/// Naive subgoal potential: `eta` on any subgoal state, 0 elsewhere, regardless
/// of order or history.
#[derive(Clone, Debug, PartialEq)]
pub struct NrsPotential {
    pub eta: f64,
    pub subgoals: Vec<SubgoalSpec>,
}

impl NrsPotential {
    pub fn new(eta: f64, subgoals: Vec<SubgoalSpec>) -> Self {
        NrsPotential { eta, subgoals }
    }
}

pub fn nrs_potential(p: &NrsPotential, state: &EnvState) -> Result<f64> {
    for sg in &p.subgoals {
        if sg.matches(state)? {
            return Ok(p.eta);
        }
    }
    Ok(0.0)
}

impl Potential for NrsPotential {
    fn potential(&self, state: &EnvState) -> Result<f64> {
        nrs_potential(self, state)
    }
}
