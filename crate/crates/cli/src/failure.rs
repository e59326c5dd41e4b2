use std::fmt;

/// Where a command failed. Determines the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Validate,
    Train,
    Serialize,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Validate => "validate",
            Stage::Train => "train",
            Stage::Serialize => "serialize",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config | Stage::Serialize => 1,
            Stage::Load | Stage::Validate => 2,
            Stage::Train => 3,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error [{}]: {}", self.stage.name(), self.message)
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> CliResult<T>;
}

impl<T, E: fmt::Display> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> CliResult<T> {
        self.map_err(|e| Failure {
            stage,
            message: e.to_string(),
        })
    }
}

pub fn fail<T>(stage: Stage, message: impl Into<String>) -> CliResult<T> {
    Err(Failure {
        stage,
        message: message.into(),
    })
}
