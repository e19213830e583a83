use std::process::ExitCode;

use ralm_core::error::ErrorCategory;
use ralm_core::RalmError;

/// A failed run. Reported as one JSON line on stderr.
#[derive(Debug)]
pub struct Failure {
    pub category: ErrorCategory,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            category: ErrorCategory::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            category: ErrorCategory::Data,
            message: message.into(),
        }
    }

    pub fn backend(message: impl Into<String>) -> Self {
        Failure {
            category: ErrorCategory::Backend,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category {
            ErrorCategory::Usage => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Backend => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self.category {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Data => "data",
            ErrorCategory::Backend => "backend",
        }
    }

    pub fn report(self) -> ExitCode {
        let line = serde_json::json!({
            "error": self.kind(),
            "code": self.exit_code(),
            "message": self.message.replace('\n', " "),
        });
        eprintln!("{line}");
        ExitCode::from(self.exit_code())
    }
}

impl From<RalmError> for Failure {
    fn from(e: RalmError) -> Self {
        Failure {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

impl From<clap::Error> for Failure {
    fn from(e: clap::Error) -> Self {
        let text = e.to_string();
        let first = text.lines().next().unwrap_or("invalid arguments");
        Failure::usage(first.trim_start_matches("error: ").to_string())
    }
}

/// Fails with a usage error naming the missing flag.
pub fn need<T>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::usage(format!("missing required flag {flag}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_map_to_exit_codes() {
        assert_eq!(
            Failure::from(RalmError::InvalidArgument("x".into())).exit_code(),
            2
        );
        assert_eq!(
            Failure::from(RalmError::Corruption("x".into())).exit_code(),
            3
        );
        let overflow = RalmError::ContextOverflow {
            needed: 2000,
            window: 1024,
        };
        assert_eq!(
            Failure::from(RalmError::at_stride(3, overflow)).exit_code(),
            4
        );
    }
}
