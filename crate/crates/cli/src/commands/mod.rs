pub mod evaluate;
pub mod prepare;
pub mod synth;
pub mod train;

use anyhow::{Context, Result};

use crate::config::{RunConfig, RunPaths};

/// Writes the fully resolved config next to the outputs and echoes it, so a
/// run can be reproduced from its directory alone.
pub fn echo_resolved_config(config: &RunConfig, paths: &RunPaths) -> Result<()> {
    let rendered = config.to_toml();
    std::fs::write(paths.resolved_config(), &rendered)
        .with_context(|| format!("writing {}", paths.resolved_config().display()))?;
    println!("# resolved config\n{rendered}");
    Ok(())
}
