//! Scenario documents shipped with the crate.

use crate::error::Result;
use crate::scenario::ScenarioDoc;

const SOURCES: [(&str, &str); 10] = [
    ("scenario-a", include_str!("../fixtures/scenario-a.json")),
    ("scenario-b", include_str!("../fixtures/scenario-b.json")),
    ("scenario-c", include_str!("../fixtures/scenario-c.json")),
    ("tft-perfect-baseline", include_str!("../fixtures/tft-perfect-baseline.json")),
    ("tft-perfect-high-risk", include_str!("../fixtures/tft-perfect-high-risk.json")),
    ("tft-perfect-buyer-power", include_str!("../fixtures/tft-perfect-buyer-power.json")),
    ("tft-imperfect-baseline", include_str!("../fixtures/tft-imperfect-baseline.json")),
    ("tft-imperfect-high-risk", include_str!("../fixtures/tft-imperfect-high-risk.json")),
    ("tft-perfect-full-model", include_str!("../fixtures/tft-perfect-full-model.json")),
    ("tft-perfect-full-model-risk", include_str!("../fixtures/tft-perfect-full-model-risk.json")),
];

pub fn fixture_names() -> Vec<&'static str> {
    SOURCES.iter().map(|(n, _)| *n).collect()
}

pub fn fixture_source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn fixture(name: &str) -> Option<Result<ScenarioDoc>> {
    fixture_source(name).map(ScenarioDoc::parse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_parses_and_is_named_after_its_file() {
        for name in fixture_names() {
            let doc = fixture(name).unwrap().unwrap();
            assert_eq!(doc.name, name);
        }
    }
}
