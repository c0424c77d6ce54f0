//! Ingestion, report export and command implementations for the
//! `latentry` binary. The numerical pipeline lives in `latentry-core`.

pub mod commands;
pub mod config;
pub mod ingest;
pub mod output;

use config::ConfigError;
use ingest::IngestError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

fn core_exit_code(e: &latentry_core::Error) -> i32 {
    use latentry_core::Error::*;
    match e {
        DivergedLoss { .. } => EXIT_DIVERGED,
        InvalidConfig(_) | UnknownCondition(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

/// Process exit status for an error returned by one of the commands.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<latentry_core::Error>() {
            return core_exit_code(e);
        }
        if let Some(e) = cause.downcast_ref::<IngestError>() {
            return match e {
                IngestError::Core(inner) => core_exit_code(inner),
                _ => EXIT_DATA,
            };
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let diverged = anyhow::Error::new(latentry_core::Error::DivergedLoss { epoch: 3 });
        assert_eq!(exit_code(&diverged), EXIT_DIVERGED);
        assert_eq!(exit_code(&anyhow::Error::new(ConfigError("x".into()))), EXIT_CONFIG);
        assert_eq!(exit_code(&anyhow::Error::new(IngestError::EmptyDataset)), EXIT_DATA);
        let wrapped = anyhow::Error::new(latentry_core::Error::EmptyBatch).context("while training");
        assert_eq!(exit_code(&wrapped), EXIT_DATA);
        assert_eq!(exit_code(&anyhow::anyhow!("disk full")), 1);
    }
}
