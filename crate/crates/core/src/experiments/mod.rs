//! Experiment drivers: coherence-time sweeps, single-pair mass/spread
//! evolution and scaling fits.

pub mod coherence;
pub mod fit;
pub mod single_pair;
pub mod stats;

use serde::{Deserialize, Serialize};

use crate::lattice::{pattern_coordinates, DefectLine, Framing, LatticeSpec};

/// Defect-line layout, independent of the lattice size.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridLayout {
    #[default]
    None,
    /// Lines at `0, g₀, g₀+g₁, …` cycling through `gaps`, in both directions.
    /// `gaps = [1, 2]` alternates the spacing between 1 and 2.
    #[serde(alias = "alternating")]
    Pattern {
        gaps: Vec<usize>,
        #[serde(default)]
        framing: Framing,
    },
    /// Explicit line coordinates.
    Explicit {
        #[serde(default)]
        vertical: Vec<DefectLine>,
        #[serde(default)]
        horizontal: Vec<DefectLine>,
    },
}

/// Charge modulus, multiplier and defect layout; yields a spec per size.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFamily {
    pub n: u32,
    #[serde(default = "unit_multiplier")]
    pub m: u32,
    #[serde(default)]
    pub grid: GridLayout,
}

fn unit_multiplier() -> u32 {
    1
}

impl LatticeFamily {
    pub fn defect_free(n: u32) -> Self {
        Self {
            n,
            m: 1,
            grid: GridLayout::None,
        }
    }

    pub fn pattern(n: u32, m: u32, gaps: &[usize]) -> Self {
        Self {
            n,
            m,
            grid: GridLayout::Pattern {
                gaps: gaps.to_vec(),
                framing: Framing::Plus,
            },
        }
    }

    pub fn spec(&self, l: usize) -> LatticeSpec {
        let (vertical, horizontal) = match &self.grid {
            GridLayout::None => (Vec::new(), Vec::new()),
            GridLayout::Pattern { gaps, framing } => {
                let lines: Vec<DefectLine> = pattern_coordinates(l, gaps)
                    .into_iter()
                    .map(|at| DefectLine {
                        at,
                        framing: *framing,
                    })
                    .collect();
                (lines.clone(), lines)
            }
            GridLayout::Explicit {
                vertical,
                horizontal,
            } => (vertical.clone(), horizontal.clone()),
        };
        let m = if matches!(self.grid, GridLayout::None) { 1 } else { self.m };
        LatticeSpec {
            n: self.n,
            l,
            m,
            vertical,
            horizontal,
        }
    }
}
