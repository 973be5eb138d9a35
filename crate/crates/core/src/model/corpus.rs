//! Built-in benchmark models.
//!
//! The DSL sources live under `models/` at the workspace root and are embedded
//! at compile time, so the binary needs no runtime file access for the
//! standard suite. Golden classifications ship alongside each model; entries
//! marked `published` come from the literature on these benchmarks, entries
//! marked `derived` were produced by running both engines of this crate and
//! checking they agree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dsl::parse_model;
use super::types::{ModelError, OdeModel};

/// One embedded benchmark model plus its golden classifications.
pub struct CorpusEntry {
    /// Stable identifier; equals the `name:` header of the DSL source.
    pub id: &'static str,
    /// DSL source text.
    pub source: &'static str,
    golden_group: &'static str,
}

/// Expected classification for one (model, derivative caps) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expectation {
    /// Full rank: every component observable / identifiable.
    Fispo,
    /// Exact set of deficient component names (states, parameters, input jets).
    Deficient { deficient: Vec<String> },
    /// Only aggregate counts are known.
    Counts {
        unobservable_states: usize,
        unidentifiable_parameters: usize,
    },
}

/// One golden test cell: derivative caps per unknown input, plus the verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenCase {
    #[serde(default)]
    pub caps: BTreeMap<String, usize>,
    pub expect: Expectation,
    /// "published" or "derived".
    pub source: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct GoldenFile {
    cases: Vec<GoldenCase>,
}

macro_rules! corpus_files {
    ($(($id:literal, $model:literal, $goldens:literal)),* $(,)?) => {
        const ENTRIES: &[CorpusEntry] = &[
            $(CorpusEntry {
                id: $id,
                source: include_str!($model),
                golden_group: include_str!($goldens),
            }),*
        ];
    };
}

corpus_files![
    (
        "c2m-known-input",
        "../../../../models/c2m/known-input.model",
        "../../../../models/c2m/goldens.json"
    ),
    (
        "c2m-unknown-input-known-b",
        "../../../../models/c2m/unknown-input-known-b.model",
        "../../../../models/c2m/goldens.json"
    ),
    (
        "c2m-unknown-input-known-b-k1e",
        "../../../../models/c2m/unknown-input-known-b-k1e.model",
        "../../../../models/c2m/goldens.json"
    ),
    (
        "hiv3",
        "../../../../models/hiv3/base.model",
        "../../../../models/hiv3/goldens.json"
    ),
    (
        "hiv5",
        "../../../../models/hiv5/base.model",
        "../../../../models/hiv5/goldens.json"
    ),
    (
        "2dof-unknown-f2",
        "../../../../models/2dof/unknown-f2.model",
        "../../../../models/2dof/goldens.json"
    ),
    (
        "2dof-both-unknown",
        "../../../../models/2dof/both-unknown.model",
        "../../../../models/2dof/goldens.json"
    ),
    (
        "pk-known-input",
        "../../../../models/pk/known-input.model",
        "../../../../models/pk/goldens.json"
    ),
    (
        "pk-unknown-input",
        "../../../../models/pk/unknown-input.model",
        "../../../../models/pk/goldens.json"
    ),
    (
        "sirs-forced",
        "../../../../models/sirs/base.model",
        "../../../../models/sirs/goldens.json"
    ),
    (
        "nfkb-29-param",
        "../../../../models/nfkb/29-param.model",
        "../../../../models/nfkb/goldens.json"
    ),
    (
        "nfkb-13-param",
        "../../../../models/nfkb/13-param.model",
        "../../../../models/nfkb/goldens.json"
    ),
    (
        "big-known-input",
        "../../../../models/big/known-input.model",
        "../../../../models/big/goldens.json"
    ),
    (
        "big-unknown-input",
        "../../../../models/big/unknown-input.model",
        "../../../../models/big/goldens.json"
    ),
];

/// All embedded benchmark models, in a fixed order.
pub fn corpus() -> &'static [CorpusEntry] {
    ENTRIES
}

/// Parses the embedded model with the given id.
pub fn builtin_model(id: &str) -> Result<OdeModel, ModelError> {
    let entry = ENTRIES
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| ModelError::UnknownModel(id.to_string()))?;
    let model =
        parse_model(entry.source, entry.id).map_err(|e| ModelError::Dsl(e.to_string()))?;
    debug_assert_eq!(model.name, entry.id, "corpus id must match model name");
    Ok(model)
}

/// Golden classification cells for the given model id.
pub fn goldens(id: &str) -> Vec<GoldenCase> {
    let Some(entry) = ENTRIES.iter().find(|e| e.id == id) else {
        return Vec::new();
    };
    let groups: BTreeMap<String, GoldenFile> =
        serde_json::from_str(entry.golden_group).expect("embedded goldens must parse");
    groups.get(id).map(|g| g.cases.clone()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(id: &str) -> (usize, usize, usize, usize, usize) {
        let m = builtin_model(id).expect(id);
        (
            m.n_states(),
            m.n_parameters(),
            m.n_known_inputs(),
            m.n_unknown_inputs(),
            m.n_outputs(),
        )
    }

    #[test]
    fn every_model_parses_and_validates() {
        for entry in corpus() {
            let model = builtin_model(entry.id).expect(entry.id);
            assert_eq!(model.name, entry.id);
        }
    }

    #[test]
    fn benchmark_dimensions() {
        assert_eq!(counts("c2m-known-input"), (2, 4, 1, 0, 1));
        assert_eq!(counts("c2m-unknown-input-known-b"), (2, 3, 0, 1, 1));
        assert_eq!(counts("c2m-unknown-input-known-b-k1e"), (2, 2, 0, 1, 1));
        assert_eq!(counts("hiv3"), (3, 5, 1, 0, 2));
        assert_eq!(counts("hiv5"), (5, 10, 0, 0, 2));
        assert_eq!(counts("2dof-unknown-f2"), (4, 3, 1, 1, 2));
        assert_eq!(counts("2dof-both-unknown"), (4, 3, 0, 2, 2));
        // The pharmacokinetic benchmark is usually tallied with 10 parameters,
        // but only 9 distinct rate/scale constants appear in its equations.
        assert_eq!(counts("pk-known-input"), (4, 9, 1, 0, 2));
        assert_eq!(counts("pk-unknown-input"), (4, 9, 0, 1, 2));
        // Same story for the forced SIRS model: 6 symbols occur.
        assert_eq!(counts("sirs-forced"), (5, 6, 0, 0, 2));
        assert_eq!(counts("nfkb-29-param"), (15, 29, 1, 0, 6));
        assert_eq!(counts("nfkb-13-param"), (15, 13, 1, 0, 6));
        assert_eq!(counts("big-known-input"), (3, 5, 1, 0, 1));
        assert_eq!(counts("big-unknown-input"), (3, 5, 0, 1, 1));
    }

    #[test]
    fn goldens_parse_and_reference_declared_symbols() {
        let mut with_goldens = 0;
        for entry in corpus() {
            let model = builtin_model(entry.id).unwrap();
            let declared: std::collections::HashSet<&str> = model
                .declared_symbols()
                .iter()
                .map(|&s| model.symbol_name(s))
                .collect();
            for case in goldens(entry.id) {
                with_goldens += 1;
                for input in case.caps.keys() {
                    assert!(
                        model
                            .unknown_inputs
                            .iter()
                            .any(|w| model.symbol_name(w.symbol) == input.as_str()),
                        "{}: cap for unknown input {input}",
                        entry.id
                    );
                }
                if let Expectation::Deficient { deficient } = &case.expect {
                    for name in deficient {
                        // Jet names carry prime suffixes; the base symbol must exist.
                        let base = name.trim_end_matches('\'');
                        assert!(
                            declared.contains(base),
                            "{}: golden names unknown symbol {name}",
                            entry.id
                        );
                    }
                }
            }
        }
        assert!(with_goldens >= 10, "corpus should ship golden cells");
    }

    #[test]
    fn nfkb_variants_share_dynamics_shape() {
        let full = builtin_model("nfkb-29-param").unwrap();
        let fixed = builtin_model("nfkb-13-param").unwrap();
        assert_eq!(full.state_names(), fixed.state_names());
        assert_eq!(full.n_outputs(), fixed.n_outputs());
        assert_eq!(full.n_parameters() - fixed.n_parameters(), 16);
    }

    #[test]
    fn unknown_input_caps_start_unbounded() {
        use super::super::types::DerivativeCap;
        let m = builtin_model("pk-unknown-input").unwrap();
        assert_eq!(m.unknown_inputs.len(), 1);
        assert_eq!(m.unknown_inputs[0].cap, DerivativeCap::Unbounded);
    }
}
