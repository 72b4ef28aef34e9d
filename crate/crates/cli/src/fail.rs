use std::fmt;

use periscope::corpus::CorpusError;
use periscope::deepfeat::DeepError;
use periscope::handfeat::FeatureError;
use periscope::protocol::ProtocolError;
use periscope::simeng::ScoreError;
use periscope::sweep::SweepError;
use periscope::verimetrics::MetricsError;

/// An error raised by the driver itself, with its code and exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: &'static str,
    pub message: String,
    pub exit: i32,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: "E_USAGE",
            message: message.into(),
            exit: 2,
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: "E_INPUT",
            message: message.into(),
            exit: 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

/// Error code and exit status for the first recognizable cause.
pub fn classify(err: &anyhow::Error) -> (&'static str, i32) {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return (f.code, f.exit);
        }
        let code = if cause.is::<CorpusError>() {
            "E_CORPUS"
        } else if cause.is::<ProtocolError>() {
            "E_PROTOCOL"
        } else if cause.is::<FeatureError>() {
            "E_FEATURE"
        } else if cause.is::<DeepError>() {
            "E_GRAPH"
        } else if cause.is::<ScoreError>() {
            "E_SCORE"
        } else if cause.is::<MetricsError>() {
            "E_METRICS"
        } else if cause.is::<SweepError>() {
            "E_SWEEP"
        } else if cause.is::<std::io::Error>() {
            "E_IO"
        } else if cause.is::<serde_json::Error>() {
            "E_FORMAT"
        } else {
            continue;
        };
        return (code, 1);
    }
    ("E_RUNTIME", 1)
}

/// `error[CODE]: message` on one line.
pub fn render(err: &anyhow::Error) -> (String, i32) {
    let (code, exit) = classify(err);
    let message = format!("{err:#}").replace(['\n', '\r'], " ");
    (format!("error[{code}]: {message}"), exit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn code_comes_from_the_innermost_typed_cause() {
        let err = Err::<(), _>(ScoreError::ZeroNorm(Some("s1".into())))
            .context("scoring CW-test")
            .unwrap_err();
        let (line, exit) = render(&err);
        assert_eq!(exit, 1);
        assert_eq!(
            line,
            "error[E_SCORE]: scoring CW-test: zero-norm feature vector for sample `s1`"
        );
    }

    #[test]
    fn usage_failures_exit_two_on_one_line() {
        let err = anyhow::Error::new(Failure::usage("bad\nconfig"));
        assert_eq!(render(&err), ("error[E_USAGE]: bad config".to_string(), 2));
    }
}
