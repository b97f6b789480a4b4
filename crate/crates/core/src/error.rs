use thiserror::Error;

/// Errors produced by constraint-system construction and analysis.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A design parameter violates one of its validity rules.
    #[error("invalid parameter {name} = {value}: requires {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// An input contained NaN or infinite entries.
    #[error("non-finite input in {what}")]
    NonFinite { what: &'static str },

    /// An input had the wrong length or shape.
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A configuration that must lie on the variety does not.
    #[error("configuration is off the variety: worst residual {residual:.3e} exceeds {tolerance:.3e}")]
    OffVariety { residual: f64, tolerance: f64 },

    /// The fitted constraint-mixing relation failed, signalling a wrong
    /// representation or constraint set.
    #[error("constraint mixing fit residual {residual:.3e} exceeds {tolerance:.3e} for element {element}")]
    InvarianceViolation {
        element: String,
        residual: f64,
        tolerance: f64,
    },

    /// Two spheres (or circles) do not intersect at the queried parameter.
    #[error("empty intersection: {detail}")]
    EmptyIntersection { detail: String },

    /// A removable singularity could not be continued (vanishing derivative).
    #[error("analytic continuation failed: {detail}")]
    ContinuationFailure { detail: String },

    /// An intersection is tangential or otherwise degenerate where a
    /// transversal one is required.
    #[error("degenerate intersection: {detail}")]
    DegenerateIntersection { detail: String },

    /// A geometric precondition (e.g. a perpendicularity requirement) fails.
    #[error("precondition violated: {detail}")]
    PreconditionViolated { detail: String },

    /// The configuration has no coinciding arm centers, so it is not one of
    /// the catalog singularities.
    #[error("no arm-center coincidence: smallest pairwise distance {min_distance:.3e}")]
    NoCoincidence { min_distance: f64 },

    /// The parameters sit on the excluded locus where the witness-path
    /// construction breaks down for the two-of-three pattern.
    #[error("certificate unavailable: {reason}")]
    CertificateUnavailable { reason: String },

    /// The four tangents failed to span four dimensions.
    #[error("certificate failure: tangent span {span} < 4 (sigma ratio {sigma_ratio:.3e})")]
    CertificateFailure { span: usize, sigma_ratio: f64 },

    /// A witness path left the variety.
    #[error("path invalid: residual {residual:.3e} exceeds {tolerance:.3e} at t = {t}")]
    PathInvalid {
        residual: f64,
        tolerance: f64,
        t: f64,
    },

    /// An argument is outside the domain of the operation.
    #[error("domain error: {detail}")]
    Domain { detail: String },

    /// A catalog or verification step failed on a specific record.
    #[error("verification failed for {label}: {detail}")]
    VerificationFailed { label: String, detail: String },
}
