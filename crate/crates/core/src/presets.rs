//! Built-in scenarios and the three association cases compared throughout.

use std::fmt;
use std::str::FromStr;

use crate::association::AssociationPolicy;
use crate::config::{parse_scenario, NoFiles};
use crate::error::{Error, Result};
use crate::scenario::{Scenario, PICO_HP_TX_DBM, PICO_LP_TX_DBM};

pub const TESTBED_MINI: &str = include_str!("../data/testbed-mini.cfg");

/// Built-in scenario by name, if one exists.
pub fn scenario_preset(name: &str) -> Option<Result<Scenario>> {
    match name {
        "testbed-mini" => Some(parse_scenario(TESTBED_MINI, &NoFiles)),
        _ => None,
    }
}

pub fn testbed_mini() -> Scenario {
    parse_scenario(TESTBED_MINI, &NoFiles).expect("built-in scenario is valid")
}

/// Coupled with low-power picos, coupled with high-power picos, decoupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    DlLp,
    DlHp,
    Dude,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::DlLp, Case::DlHp, Case::Dude];

    pub fn policy(&self) -> AssociationPolicy {
        match self {
            Case::DlLp | Case::DlHp => AssociationPolicy::Coupled,
            Case::Dude => AssociationPolicy::Dude,
        }
    }

    /// Pico transmit power. Under `Dude` it only drives the downlink choice.
    pub fn pico_power_dbm(&self) -> f64 {
        match self {
            Case::DlLp => PICO_LP_TX_DBM,
            Case::DlHp | Case::Dude => PICO_HP_TX_DBM,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Case::DlLp => "dl-lp",
            Case::DlHp => "dl-hp",
            Case::Dude => "dude",
        }
    }

    /// The scenario with this case's pico power applied.
    pub fn apply(&self, s: &Scenario) -> Result<Scenario> {
        s.with_pico_power(self.pico_power_dbm())
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid("case", format!("`{s}` is not one of dl-lp, dl-hp, dude")))
    }
}
