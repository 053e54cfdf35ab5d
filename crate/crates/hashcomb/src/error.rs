//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Result`]. Variants are
//! grouped by the subsystem that raises them; the CLI maps them onto its exit
//! codes (configuration problems versus training divergence).

/// Errors raised by quantization, encoding, secret sharing, training, and
/// federation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- quantization -----------------------------------------------------
    /// A range bound, width, or probability failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A value fell outside the enlarged quantization range.
    #[error("value {value} outside quantization range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    /// A requested level exceeds the scheme's maximum.
    #[error("level {level} exceeds maximum level {max}")]
    LevelTooDeep { level: u8, max: u8 },

    /// The target mean level cannot be reached by any head probability in
    /// (0, 1).
    #[error("no bias solution: target mean {target} not attainable with {levels} levels")]
    UnreachableMean { target: f64, levels: u8 },

    // --- codec ------------------------------------------------------------
    /// A digest did not match any channel in the lookup table, which means
    /// the sender and receiver disagree on the scheme (salt, range, or
    /// level).
    #[error("unknown digest at level {level}: scheme mismatch between sender and receiver")]
    UnknownDigest { level: u8 },

    /// Two distinct channels produced the same digest while building a
    /// table. With a 256-bit hash this indicates corruption, not chance.
    #[error("digest collision at level {level}: table is corrupt")]
    DigestCollision { level: u8 },

    /// A wire message could not be parsed into digest-chain records.
    #[error("malformed wire record: {0}")]
    MalformedWire(String),

    // --- secret sharing ---------------------------------------------------
    /// The modulus failed the primality check.
    #[error("modulus {0} is not prime")]
    NotPrime(u64),

    /// Sharing or reconstruction inputs violated the (t, n, p) constraints.
    #[error("invalid sharing: {0}")]
    InvalidSharing(String),

    /// A real value overflowed the fixed-point field embedding.
    #[error("fixed-point overflow: |{0}| exceeds the representable range")]
    FixedPointOverflow(f64),

    /// A negotiation party observed a message or transition out of phase
    /// order.
    #[error("negotiation phase violation: {0}")]
    PhaseViolation(String),

    // --- ml core ----------------------------------------------------------
    /// An input vector's length did not match the layer it feeds.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The training loss became NaN or infinite; the run must abort.
    #[error("training diverged: non-finite loss at update {update}")]
    NonFiniteLoss { update: u64 },

    /// A dataset was empty or otherwise unusable for training.
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    // --- federation & privacy analysis ------------------------------------
    /// Aggregation received parameter vectors of unequal length.
    #[error("aggregation length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// The (epsilon, delta, q) combination makes the noise formula
    /// meaningless (the logarithm argument must exceed 1).
    #[error("invalid noise parameters: {0}")]
    InvalidNoiseParameters(String),

    /// Two empirical distributions do not share a support.
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
