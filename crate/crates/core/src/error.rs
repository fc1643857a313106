use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too small for OAM charge {ell}: {clipped:.3e} relative power beyond the sampled window")]
    ModeClipped { ell: i32, clipped: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Zernike index {0} outside the supported range 1..=66")]
    ZernikeIndex(usize),

    #[error("Fried parameter {r0:.3e} m is not resolvable at pitch {pitch:.3e} m (need r0 >= 2 * pitch)")]
    UnresolvableR0 { r0: f64, pitch: f64 },

    #[error("mean centroid displacement is zero: Fried parameter is unbounded")]
    InfiniteR0,

    #[error("propagation distance {z:.4} m violates the angular-spectrum sampling bound (max safe |z| = {max_z:.4} m)")]
    Aliasing { z: f64, max_z: f64 },

    #[error("no wavefront-sensor subaperture received power above threshold")]
    NoWfsSignal,

    #[error("interaction matrix has no singular value above the truncation threshold")]
    RankCollapse,

    #[error("dimension {0} has no supported complete MUB construction (need a prime or 4)")]
    UnsupportedDimension(usize),

    #[error("input state {0} produced zero detected power")]
    ZeroPower(String),

    #[error("tomography table is incomplete or rank deficient: {0}")]
    RankDeficient(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short category used for process exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::UnsupportedDimension(_) => {
                "validation"
            }
            Error::Io(_) | Error::Serde(_) => "io",
            _ => "runtime",
        }
    }
}
