//! System representation: the expression language, config documents,
//! shipped systems and assumption checks.

pub mod assumptions;
pub mod builtin;
pub mod config;
pub mod expr;
pub mod system;

pub use assumptions::{validate_assumptions, AssumptionReport};
pub use config::{parse_config_document, parse_system_config, AnalysisDefaults, SystemConfig};
pub use expr::{parse_expr, Expr, VarScope};
pub use system::{BoxDomain, ChiSystem, FastMap, SlowMap};
