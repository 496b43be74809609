use std::path::Path;

use litcoref::detector::{TaggerConfig, TaggerTrainConfig};
use litcoref::gender::DEFAULT_NAME_RATIO;
use litcoref::harness::{CapitalizedCorpusConfig, SyntheticCorpusConfig};
use litcoref::model::PipelineConfig;
use litcoref::pairs::PairTrainConfig;
use litcoref::resolver::FRENCH_CONJUNCTIONS;
use serde::{Deserialize, Serialize};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "LITCOREF_CONFIG";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenderSection {
    pub name_ratio_threshold: f64,
}

impl Default for GenderSection {
    fn default() -> Self {
        GenderSection {
            name_ratio_threshold: DEFAULT_NAME_RATIO,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub conjunctions: Vec<String>,
    pub tagger: TaggerConfig,
    pub tagger_train: TaggerTrainConfig,
    pub pair_train: PairTrainConfig,
    pub gender: GenderSection,
    pub synth: SyntheticCorpusConfig,
    pub capitalized: CapitalizedCorpusConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pipeline: PipelineConfig::default(),
            conjunctions: FRENCH_CONJUNCTIONS.iter().map(|s| s.to_string()).collect(),
            tagger: TaggerConfig::default(),
            tagger_train: TaggerTrainConfig::default(),
            pair_train: PairTrainConfig::default(),
            gender: GenderSection::default(),
            synth: SyntheticCorpusConfig::default(),
            capitalized: CapitalizedCorpusConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// The file named on the command line, else the one named by the
    /// environment, else built-in defaults.
    pub fn load(explicit: Option<&Path>) -> Result<(Self, Option<std::path::PathBuf>), String> {
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(Into::into));
        let Some(path) = path else {
            return Ok((RunConfig::default(), None));
        };
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg = Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok((cfg, Some(path)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = RunConfig::from_toml("[pipeline]\nnoun_window = 12\n[synth]\nseed = 4\n").unwrap();
        assert_eq!(cfg.pipeline.noun_window, 12);
        assert_eq!(cfg.pipeline.pronoun_window, 30);
        assert_eq!(cfg.synth.seed, 4);
        assert_eq!(cfg.synth.tokens_per_doc, SyntheticCorpusConfig::default().tokens_per_doc);
        assert!(RunConfig::from_toml("[nope]\n").is_err());
    }
}
