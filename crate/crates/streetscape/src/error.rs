use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {message}")]
    Image { path: String, message: String },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown class {class} at pixel ({x}, {y})")]
    UnknownClass { class: u8, x: u32, y: u32 },

    #[error("invalid mask: {0}")]
    Mask(String),

    #[error("invalid indicator config: {0}")]
    IndicatorConfig(String),

    #[error("degenerate center region: rounds to zero pixels")]
    EmptyCenterRegion,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("unmapped accident type {0:?}")]
    UnmappedAccidentType(String),

    #[error("training error: {0}")]
    Train(String),

    #[error("feature count mismatch: model expects {expected}, got {got}")]
    FeatureCount { expected: usize, got: usize },

    #[error("attribution error: {0}")]
    Shap(String),

    #[error("causal estimation error: {0}")]
    Causal(String),

    #[error("logistic regression did not converge after {iterations} iterations (max coefficient {max_coef:.3e}); possible complete separation")]
    NonConvergence { iterations: usize, max_coef: f64 },

    #[error("synthetic generation error: {0}")]
    Synth(String),

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("missing upstream artifact {artifact:?}: run stage {stage:?} first")]
    MissingStage { artifact: String, stage: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
