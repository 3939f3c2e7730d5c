//! Token prices and per-call cost.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::component::ComponentId;
use crate::llm::ModelMap;

const BUNDLED: &str = include_str!("../data/pricing.toml");

/// USD per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRate {
    pub input: f64,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingTable {
    pub models: BTreeMap<String, ModelRate>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PricingError {
    #[error("no price for model {model:?} (used by {component})")]
    UnknownModel { component: ComponentId, model: String },
    #[error("negative or non-finite price for model {0:?}")]
    InvalidRate(String),
    #[error("pricing file {path}: {message}")]
    File { path: String, message: String },
}

impl PricingTable {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled pricing parses")
    }

    pub fn parse(text: &str) -> Result<Self, PricingError> {
        let table: PricingTable =
            toml::from_str(text).map_err(|e| PricingError::File { path: "<inline>".into(), message: e.to_string() })?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, PricingError> {
        let file = |message: String| PricingError::File { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| file(e.to_string()))?;
        Self::parse(&text).map_err(|e| match e {
            PricingError::File { message, .. } => file(message),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        for (model, r) in &self.models {
            if !(r.input.is_finite() && r.output.is_finite() && r.input >= 0.0 && r.output >= 0.0) {
                return Err(PricingError::InvalidRate(model.clone()));
            }
        }
        Ok(())
    }

    pub fn rate(&self, model: &str) -> Option<ModelRate> {
        self.models.get(model).copied()
    }

    /// Fails on the first component whose model has no price.
    pub fn covers(&self, models: &ModelMap) -> Result<(), PricingError> {
        for c in ComponentId::ALL {
            let model = models.model_for(c);
            if self.rate(model).is_none() {
                return Err(PricingError::UnknownModel { component: c, model: model.to_string() });
            }
        }
        Ok(())
    }
}

/// Dollar cost of one call by `component` under the model assignment.
pub fn cost_of(
    component: ComponentId,
    input_tokens: u64,
    output_tokens: u64,
    pricing: &PricingTable,
    models: &ModelMap,
) -> Result<f64, PricingError> {
    let model = models.model_for(component);
    let rate =
        pricing.rate(model).ok_or_else(|| PricingError::UnknownModel { component, model: model.to_string() })?;
    Ok(input_tokens as f64 * rate.input / 1e6 + output_tokens as f64 * rate.output / 1e6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_covers_recommended_models() {
        let p = PricingTable::bundled();
        assert!(p.covers(&ModelMap::default()).is_ok());
        assert_eq!(p.rate("gpt-3.5-turbo"), Some(ModelRate { input: 0.5, output: 1.5 }));
    }

    #[test]
    fn unknown_model() {
        let m = ModelMap::parse_pairs("mystery").unwrap();
        let err = cost_of(ComponentId::EndState, 1, 1, &PricingTable::bundled(), &m).unwrap_err();
        assert!(matches!(err, PricingError::UnknownModel { .. }));
    }

    #[test]
    fn rejects_negative() {
        assert!(PricingTable::parse("[models.x]\ninput = -1.0\noutput = 0.0").is_err());
    }
}
