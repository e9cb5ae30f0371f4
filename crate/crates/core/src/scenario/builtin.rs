use super::{parse_scenario, Scenario};
use crate::error::{Error, Result};

/// Built-in scenarios as `(name, source)`.
pub const BUILTINS: &[(&str, &str)] = &[
    ("hermitian-baseline", include_str!("../../scenarios/hermitian-baseline.toml")),
    ("absorber", include_str!("../../scenarios/absorber.toml")),
    ("left-vs-right", include_str!("../../scenarios/left-vs-right.toml")),
    ("gauge-invariance", include_str!("../../scenarios/gauge-invariance.toml")),
    ("commutators", include_str!("../../scenarios/commutators.toml")),
    ("commutators-quaternionic", include_str!("../../scenarios/commutators-quaternionic.toml")),
    ("reduction-chain", include_str!("../../scenarios/reduction-chain.toml")),
    ("lorentz-3d", include_str!("../../scenarios/lorentz-3d.toml")),
    ("virial-harmonic", include_str!("../../scenarios/virial-harmonic.toml")),
    ("virial-deformed", include_str!("../../scenarios/virial-deformed.toml")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses the named built-in scenario.
pub fn builtin(name: &str) -> Result<Scenario> {
    let source = builtin_source(name).ok_or_else(|| {
        let known: Vec<&str> = builtin_names().collect();
        Error::Config(format!("no built-in scenario {name:?}; known: {}", known.join(", ")))
    })?;
    parse_scenario(source)
}
