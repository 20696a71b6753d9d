use alloc::string::String;

use crate::{Country, PixelGrid, Task};

/// Partition a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

/// One building's paired patches and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingSample {
    pub building_id: String,
    /// 3-band orthophoto crop.
    pub rgb: PixelGrid,
    /// 1-band nDSM crop in meters.
    pub lidar: PixelGrid,
    pub roof_type: Option<u8>,
    pub roof_material: Option<u8>,
    pub country: Country,
    pub split: Split,
}

impl BuildingSample {
    pub fn label(&self, task: Task) -> Option<usize> {
        task.label_of(self.roof_type, self.roof_material)
    }
}
