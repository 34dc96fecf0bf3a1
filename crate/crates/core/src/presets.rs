//! Bundled scenarios reproducing the four-DG case studies.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Frequency restoration and power sharing, reduced plant, 5 s.
    Case1,
    /// Case 1 set up for the event- vs time-triggered comparison.
    Case2,
    /// Network plant with a load connected at 5 s and removed at 8 s.
    Case3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Case1, Preset::Case2, Preset::Case3];

    pub fn toml(self) -> &'static str {
        match self {
            Preset::Case1 => include_str!("../presets/case1.toml"),
            Preset::Case2 => include_str!("../presets/case2.toml"),
            Preset::Case3 => include_str!("../presets/case3.toml"),
        }
    }

    pub fn scenario(self) -> Result<Scenario> {
        Scenario::from_toml(self.toml())
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Case1 => "case1",
            Preset::Case2 => "case2",
            Preset::Case3 => "case3",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown preset {s:?}")))
    }
}
