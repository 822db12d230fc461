use std::fmt;

use serde::{Deserialize, Serialize};

/// The two allelic types of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Type {
    pub fn other(self) -> Type {
        match self {
            Type::Plus => Type::Minus,
            Type::Minus => Type::Plus,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Type::Plus => 0,
            Type::Minus => 1,
        }
    }

    pub const BOTH: [Type; 2] = [Type::Plus, Type::Minus];
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Plus => "+",
            Type::Minus => "-",
        })
    }
}
