//! Label schemas for the two roof attributes.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

pub const ROOF_TYPES: [&str; 4] = ["Gable", "Hip", "Flat", "NoRoof"];
pub const ROOF_MATERIALS: [&str; 5] = ["HealthyMetal", "IrregularMetal", "ConcreteCement", "BlueTarpaulin", "Incomplete"];

/// Roof types and materials that make up the synthetic cross-modality task.
pub const JOINT_TYPES: [usize; 3] = [0, 1, 2];
pub const JOINT_MATERIALS: [usize; 3] = [0, 2, 3];
const JOINT_CLASSES: [&str; 9] = [
    "Gable+HealthyMetal",
    "Gable+ConcreteCement",
    "Gable+BlueTarpaulin",
    "Hip+HealthyMetal",
    "Hip+ConcreteCement",
    "Hip+BlueTarpaulin",
    "Flat+HealthyMetal",
    "Flat+ConcreteCement",
    "Flat+BlueTarpaulin",
];

/// Classification task.
///
/// `Joint` is a synthetic verification task whose label combines a roof type
/// (visible only in height data) with a roof material (visible only in
/// color), so that neither modality alone can solve it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Task {
    RoofType,
    RoofMaterial,
    Joint,
}

impl Task {
    pub fn schema(self) -> LabelSchema {
        LabelSchema { task: self }
    }

    pub fn num_classes(self) -> usize {
        self.classes().len()
    }

    pub fn classes(self) -> &'static [&'static str] {
        match self {
            Task::RoofType => &ROOF_TYPES,
            Task::RoofMaterial => &ROOF_MATERIALS,
            Task::Joint => &JOINT_CLASSES,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::RoofType => "roof_type",
            Task::RoofMaterial => "roof_material",
            Task::Joint => "joint",
        }
    }

    /// Label for this task given a building's type and material labels.
    pub fn label_of(self, roof_type: Option<u8>, roof_material: Option<u8>) -> Option<usize> {
        match self {
            Task::RoofType => roof_type.map(usize::from),
            Task::RoofMaterial => roof_material.map(usize::from),
            Task::Joint => {
                let t = JOINT_TYPES.iter().position(|&t| Some(t) == roof_type.map(usize::from))?;
                let m = JOINT_MATERIALS.iter().position(|&m| Some(m) == roof_material.map(usize::from))?;
                Some(t * JOINT_MATERIALS.len() + m)
            }
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roof_type" | "roof-type" | "type" => Ok(Task::RoofType),
            "roof_material" | "roof-material" | "material" => Ok(Task::RoofMaterial),
            "joint" => Ok(Task::Joint),
            other => Err(Error::InvalidParameter(alloc::format!("unknown task {other:?}"))),
        }
    }
}

/// The ordered class list of a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelSchema {
    pub task: Task,
}

impl LabelSchema {
    pub fn classes(&self) -> &'static [&'static str] {
        self.task.classes()
    }

    pub fn len(&self) -> usize {
        self.classes().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        let norm = normalise(name);
        self.classes().iter().position(|c| normalise(c) == norm)
    }

    pub fn name(&self, index: usize) -> Option<&'static str> {
        self.classes().get(index).copied()
    }

    pub fn check(&self, label: usize) -> Result<()> {
        if label < self.len() {
            Ok(())
        } else {
            Err(Error::LabelOutOfRange { label, classes: self.len() })
        }
    }
}

fn normalise(s: &str) -> Vec<u8> {
    s.bytes().filter(|b| b.is_ascii_alphanumeric() || *b == b'+').map(|b| b.to_ascii_lowercase()).collect()
}

/// Country a building was surveyed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Country {
    Dominica,
    SaintLucia,
    #[default]
    Other,
}

impl Country {
    pub fn as_str(self) -> &'static str {
        match self {
            Country::Dominica => "Dominica",
            Country::SaintLucia => "SaintLucia",
            Country::Other => "Other",
        }
    }

    /// Lenient parse: "Saint Lucia", "saint_lucia" and "SaintLucia" all
    /// match; anything unrecognised is `Other`.
    pub fn parse(s: &str) -> Country {
        match normalise(s).as_slice() {
            b"dominica" | b"dm" | b"dma" => Country::Dominica,
            b"saintlucia" | b"stlucia" | b"lc" | b"lca" => Country::SaintLucia,
            _ => Country::Other,
        }
    }
}

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
