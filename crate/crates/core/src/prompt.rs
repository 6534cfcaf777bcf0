//! Versioned prompt templates. The template text lives in `prompts/`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::html::SKELETON;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub version: u32,
    body: &'static str,
}

impl PromptTemplate {
    /// Text with the page skeleton filled in.
    pub fn render(&self) -> String {
        self.body.replace("{{skeleton}}", SKELETON.trim_end())
    }

    /// `name@vN+<first 12 hex of the template digest>`.
    pub fn version_id(&self) -> String {
        let digest = hex::encode(Sha256::digest(self.body.as_bytes()));
        format!("{}@v{}+{}", self.name, self.version, &digest[..12])
    }
}

pub const BLOCK_GENERATION: PromptTemplate =
    PromptTemplate { name: "block-generation", version: 1, body: include_str!("../prompts/block_generation.txt") };

pub const BLOCK_GENERATION_SIMPLIFIED: PromptTemplate = PromptTemplate {
    name: "block-generation-simplified",
    version: 1,
    body: include_str!("../prompts/block_generation_simplified.txt"),
};

pub const ASSEMBLY: PromptTemplate =
    PromptTemplate { name: "assembly", version: 1, body: include_str!("../prompts/assembly.txt") };

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    #[default]
    Full,
    Simplified,
}

impl PromptVariant {
    pub fn generation_template(self) -> PromptTemplate {
        match self {
            PromptVariant::Full => BLOCK_GENERATION,
            PromptVariant::Simplified => BLOCK_GENERATION_SIMPLIFIED,
        }
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "simplified" => Ok(Self::Simplified),
            other => Err(format!("unknown prompt variant {other:?} (expected full or simplified)")),
        }
    }
}
