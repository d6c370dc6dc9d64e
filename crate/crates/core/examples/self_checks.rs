//! The numerical self-checks behind `gnbp validate`.
//!
//! ```bash
//! cargo run -p gnbp --example self_checks
//! ```

use gnbp::cli::{cmd_validate, format_validation, ValidateArgs, ValidateLevel};

fn main() -> gnbp::Result<()> {
    let report = cmd_validate(&ValidateArgs { level: ValidateLevel::Quick, seed: 0 })?;
    print!("{}", format_validation(&report));
    std::process::exit(if report.passed { 0 } else { 1 });
}
