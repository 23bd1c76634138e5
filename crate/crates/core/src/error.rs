use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A function was evaluated outside of its support.
    Domain {
        what: &'static str,
        value: f64,
    },
    InvalidArgument(&'static str),
    /// Two probabilistic sequences with different discretization steps.
    StepMismatch {
        left: f64,
        right: f64,
    },
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// Charge and discharge power both positive in the same period.
    SimultaneousChargeDischarge {
        period: usize,
    },
    /// The repair projection could not balance a period.
    Unrepairable {
        period: usize,
    },
    /// No candidate in any iteration of the heuristic was feasible.
    NoFeasibleCandidate,
    LpInfeasible,
    LpUnbounded,
    LpIterationLimit {
        iterations: usize,
    },
    SingularSystem,
    /// Shiftable-load bounds cannot hold the shiftable energy.
    InfeasibleBounds,
    EmptyRecords,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what}: {value} is outside the support"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::StepMismatch { left, right } => {
                write!(f, "sequence steps differ ({left} kW vs {right} kW)")
            }
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => {
                write!(f, "{what}: expected length {expected}, found {found}")
            }
            Error::SimultaneousChargeDischarge { period } => {
                write!(f, "period {period}: storage charges and discharges at once")
            }
            Error::Unrepairable { period } => {
                write!(f, "period {period}: power balance cannot be restored")
            }
            Error::NoFeasibleCandidate => {
                f.write_str("no feasible schedule found (over-constrained scenario)")
            }
            Error::LpInfeasible => f.write_str("linear program is infeasible"),
            Error::LpUnbounded => f.write_str("linear program is unbounded"),
            Error::LpIterationLimit { iterations } => {
                write!(
                    f,
                    "interior point method hit the iteration limit ({iterations})"
                )
            }
            Error::SingularSystem => f.write_str("singular linear system"),
            Error::InfeasibleBounds => {
                f.write_str("shiftable-load bounds cannot hold the shiftable energy")
            }
            Error::EmptyRecords => f.write_str("no iteration records to select from"),
        }
    }
}

impl core::error::Error for Error {}
