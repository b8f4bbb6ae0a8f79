//! Shipped example systems.

use super::config::{parse_config_document, SystemConfig};
use super::system::ChiSystem;
use crate::error::{ChiError, Result};

pub const LIN1_TEXT: &str = include_str!("../../configs/lin1.chi");
pub const SAT1_TEXT: &str = include_str!("../../configs/sat1.chi");
pub const COUPLED2_TEXT: &str = include_str!("../../configs/coupled2.chi");
pub const UNSTABLE_BOUNDARY_TEXT: &str = include_str!("../../configs/unstable_boundary.chi");
pub const SINGULAR_GZ_TEXT: &str = include_str!("../../configs/singular_gz.chi");

/// Systems expected to satisfy every standing assumption.
pub const BUILTIN_NAMES: [&str; 3] = ["lin1", "sat1", "coupled2"];

/// Config document of a built-in or control system, by name (case-insensitive).
pub fn builtin_text(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "lin1" => Some(LIN1_TEXT),
        "sat1" => Some(SAT1_TEXT),
        "coupled2" => Some(COUPLED2_TEXT),
        "unstable_boundary" => Some(UNSTABLE_BOUNDARY_TEXT),
        "singular_gz" => Some(SINGULAR_GZ_TEXT),
        _ => None,
    }
}

pub fn builtin_config(name: &str) -> Result<SystemConfig> {
    let text = builtin_text(name)
        .ok_or_else(|| ChiError::InvalidArgument(format!("no built-in system `{name}`")))?;
    parse_config_document(text)
}

pub fn builtin(name: &str) -> Result<ChiSystem> {
    builtin_config(name)?.build()
}

/// `f(w) = -w`, `g(x, z, w) = 0.25 x + 0.5 z + w`.
pub fn lin1() -> ChiSystem {
    builtin("lin1").expect("shipped LIN1 config is valid")
}

/// `f(w) = -w`, `g(x, z, w) = 0.5 tanh(z) + 0.25 x + w`.
pub fn sat1() -> ChiSystem {
    builtin("sat1").expect("shipped SAT1 config is valid")
}

/// Two-dimensional coupled system.
pub fn coupled2() -> ChiSystem {
    builtin("coupled2").expect("shipped COUPLED2 config is valid")
}

/// Control: `g(x, z, w) = 2 z`, an unstable boundary layer.
pub fn unstable_boundary() -> ChiSystem {
    builtin("unstable_boundary").expect("shipped control config is valid")
}

/// Control: `g(x, z, w) = z`, so `dg/dz - I` is singular.
pub fn singular_gz() -> ChiSystem {
    builtin("singular_gz").expect("shipped control config is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_shipped_configs_parse() {
        for name in BUILTIN_NAMES
            .iter()
            .copied()
            .chain(["unstable_boundary", "singular_gz"])
        {
            builtin(name).unwrap();
        }
        assert!(builtin("nope").is_err());
        assert_eq!(lin1().name(), "LIN1");
    }
}
