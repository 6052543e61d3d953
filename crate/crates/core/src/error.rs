use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("cannot parse number `{0}`")]
    Number(String),
    #[error("malformed input: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DskpError {
    #[error("indeterminate form")]
    Indeterminate,
    #[error("singular step: {0}")]
    Singular(String),
    #[error("window too small: no initial value at ({0}, {1})")]
    WindowTooSmall(i32, i32),
    #[error("size guard exceeded: {what} is {size}, limit {limit} (set DSKP_SIZE_GUARD to override)")]
    SizeGuard { what: &'static str, size: usize, limit: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("series truncation too low for a stable leading term")]
    TruncationInsufficient,
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub type Result<T> = std::result::Result<T, DskpError>;

/// Checks `size <= limit`, where the environment variable `DSKP_SIZE_GUARD`
/// may scale every limit by an integer factor or disable guards with `off`.
pub fn size_guard(what: &'static str, size: usize, limit: usize) -> Result<()> {
    let limit = match std::env::var("DSKP_SIZE_GUARD") {
        Ok(v) if v.eq_ignore_ascii_case("off") || v == "0" => return Ok(()),
        Ok(v) => v.parse::<usize>().map(|f| limit.saturating_mul(f)).unwrap_or(limit),
        Err(_) => limit,
    };
    if size > limit {
        Err(DskpError::SizeGuard { what, size, limit })
    } else {
        Ok(())
    }
}
