//! Closed taxonomies for the four building attributes.
//!
//! Declaration order is significant: it is the tie-break order for
//! consensus voting and the axis order of confusion matrices.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionType {
    Confined,
    Unconfined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Plaster,
    MixOtherUnclear,
    BrickOrConcreteBlock,
    WoodCrudePlank,
    WoodPolished,
    CorrugatedMetal,
    Adobe,
    StoneWithMudAshlarWithLimeOrCement,
    ContainerTrailer,
    PlantMaterial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UseType {
    Residential,
    NonResidential,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Poor,
    Fair,
    Good,
}

macro_rules! taxonomy_impl {
    ($ty:ident, [$(($variant:ident, $name:literal)),+ $(,)?]) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];
            pub const NAMES: &'static [&'static str] = &[$($name),+];

            pub fn name(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }

            /// Position in declaration order.
            pub fn index(self) -> usize {
                Self::ALL.iter().position(|&c| c == self).unwrap()
            }

            pub fn from_name(name: &str) -> Option<Self> {
                match name { $($name => Some($ty::$variant),)+ _ => None }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

taxonomy_impl!(ConstructionType, [(Confined, "confined"), (Unconfined, "unconfined")]);

taxonomy_impl!(
    Material,
    [
        (Plaster, "plaster"),
        (MixOtherUnclear, "mix_other_unclear"),
        (BrickOrConcreteBlock, "brick_or_concrete_block"),
        (WoodCrudePlank, "wood_crude_plank"),
        (WoodPolished, "wood_polished"),
        (CorrugatedMetal, "corrugated_metal"),
        (Adobe, "adobe"),
        (StoneWithMudAshlarWithLimeOrCement, "stone_with_mud_ashlar_with_lime_or_cement"),
        (ContainerTrailer, "container_trailer"),
        (PlantMaterial, "plant_material"),
    ]
);

taxonomy_impl!(
    UseType,
    [(Residential, "residential"), (NonResidential, "non_residential"), (Mixed, "mixed")]
);

taxonomy_impl!(Condition, [(Poor, "poor"), (Fair, "fair"), (Good, "good")]);

/// The four attribute axes every detection and annotation carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttributeKind {
    ConstructionType,
    Material,
    Use,
    Condition,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 4] = [
        AttributeKind::ConstructionType,
        AttributeKind::Material,
        AttributeKind::Use,
        AttributeKind::Condition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttributeKind::ConstructionType => "construction_type",
            AttributeKind::Material => "material",
            AttributeKind::Use => "use",
            AttributeKind::Condition => "condition",
        }
    }

    /// Class names of this attribute, in declaration order.
    pub fn classes(self) -> &'static [&'static str] {
        match self {
            AttributeKind::ConstructionType => ConstructionType::NAMES,
            AttributeKind::Material => Material::NAMES,
            AttributeKind::Use => UseType::NAMES,
            AttributeKind::Condition => Condition::NAMES,
        }
    }

    pub fn class_index(self, class: &str) -> Option<usize> {
        self.classes().iter().position(|&c| c == class)
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
