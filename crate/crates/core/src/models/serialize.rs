//! Model persistence as self-describing JSON.

use std::path::Path;

use super::TrainedModel;
use crate::error::Result;

pub fn model_to_json(model: &TrainedModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(model)?)
}

pub fn model_from_json(json: &str) -> Result<TrainedModel> {
    Ok(serde_json::from_str(json)?)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize;
    use crate::models::{train, Family, ModelSpec};

    #[test]
    fn round_trip_preserves_predictions_for_every_family() {
        let data = synthesize(120, 4, 0.5, 0.5, 4, 1).unwrap();
        for family in Family::ALL {
            let spec = match family {
                Family::Ann => ModelSpec::Ann(crate::models::MlpSpec {
                    epochs: 5,
                    ..Default::default()
                }),
                Family::Svm => ModelSpec::Svm(crate::models::SvmSpec {
                    epochs: 10,
                    num_random_features: 32,
                    ..Default::default()
                }),
                Family::Rf => ModelSpec::Rf(crate::models::RfSpec {
                    n_estimators: 5,
                    ..Default::default()
                }),
                Family::Lr => ModelSpec::Lr(crate::models::LrSpec {
                    epochs: 20,
                    ..Default::default()
                }),
                other => ModelSpec::default_for(other),
            };
            let model = train(&spec, &data, 3).unwrap();
            let back = model_from_json(&model_to_json(&model).unwrap()).unwrap();
            assert_eq!(back, model, "{} round trip", family.name());
            for i in 0..10 {
                assert_eq!(
                    back.predict_proba(data.record(i)),
                    model.predict_proba(data.record(i))
                );
            }
        }
    }

    #[test]
    fn json_names_the_family() {
        let data = synthesize(60, 3, 0.5, 0.5, 4, 1).unwrap();
        let model = train(&ModelSpec::default_for(Family::Knn), &data, 1).unwrap();
        let json = model_to_json(&model).unwrap();
        assert!(json.contains("\"family\""));
        assert!(json.contains("\"knn\""));
    }

    #[test]
    fn malformed_json_is_an_error_not_a_panic() {
        for bad in ["", "{", "{\"family\":\"nope\"}", "[1,2,3]", "null"] {
            assert!(model_from_json(bad).is_err(), "input {bad:?}");
        }
    }
}
