use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported dimension d={0} (supported: {1})")]
    UnsupportedDimension(usize, &'static str),

    #[error("sampling error: {nodes_per_wavelength:.3} nodes per Fermi wavelength, need at least {required}")]
    Sampling {
        nodes_per_wavelength: f64,
        required: f64,
    },

    #[error("singular Green's function: coincident points in d={0}")]
    Singularity(usize),

    #[error("too few samples: got {got}, need {need} ({what})")]
    TooFewSamples {
        got: usize,
        need: usize,
        what: &'static str,
    },

    #[error("spectrum excursion: eigenvalue {value:e} outside [-{tolerance:e}, 1+{tolerance:e}]")]
    SpectrumExcursion { value: f64, tolerance: f64 },

    #[error("Fermi energy {energy} within {tolerance:e} of an eigenvalue")]
    EnergyTie { energy: f64, tolerance: f64 },

    #[error("buffer error: {0}")]
    Buffer(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error("LAPACK {routine} failed with info={info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("linear algebra: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
