//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while parsing or validating chain and hardware
/// descriptions, tiling expressions, and explicit candidates.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },

    #[error("unknown axis `{name}` referenced by {context}")]
    UnknownAxis { name: String, context: String },

    #[error("unknown tensor `{name}` referenced by op `{op}`")]
    UnknownTensor { name: String, op: String },

    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },

    #[error("axis `{name}` is declared but indexes no tensor")]
    UnusedAxis { name: String },

    #[error("axis `{name}` has size {size}; sizes must be at least 1")]
    BadAxisSize { name: String, size: u64 },

    #[error("tensor `{name}`: dtype_bytes must be positive")]
    BadDtype { name: String },

    #[error("intermediate tensor `{tensor}` is produced twice (by `{first}` and `{second}`)")]
    IntermediateProducedTwice { tensor: String, first: String, second: String },

    #[error("op `{op}` consumes `{tensor}`, which is produced by a later op — cyclic dependency")]
    CyclicDependency { op: String, tensor: String },

    #[error("tensor `{tensor}` is produced and consumed in-chain but declared `external`; declare it `intermediate`")]
    StorageMismatch { tensor: String },

    #[error("intermediate `{tensor}` is never consumed by a later op")]
    DanglingIntermediate { tensor: String },

    #[error("ops do not form a linear chain: op `{op}` does not consume the previous op's output")]
    NonLinearChain { op: String },

    #[error("op `{op}` has no reduction axis; elementwise epilogues are not fusable here — \
             drop the op or give it a contracted axis")]
    ElementwiseOp { op: String },

    #[error("op `{op}`: output axis `{axis}` appears in no input")]
    OutputAxisNotInInputs { op: String, axis: String },

    #[error("op `{op}`: equation `{equation}` does not match the declared tensors: {msg}")]
    EquationMismatch { op: String, equation: String, msg: String },

    #[error("no tile size given for axis `{axis}`")]
    MissingTile { axis: String },

    #[error("tile {tile} for axis `{axis}` (size {size}) is illegal: {msg}")]
    IllegalTile { axis: String, size: u64, tile: u64, msg: String },

    #[error("invalid tiling expression `{text}`: {msg}")]
    BadExpression { text: String, msg: String },

    #[error("statement {stmt} relates to axes on diverging branches of the expression; \
             no scope contains all of them")]
    UnplaceableStatement { stmt: String },

    #[error("statement {stmt} cannot be sequenced after its producers and before its \
             consumers under this expression")]
    OrderViolation { stmt: String },

    #[error("hardware spec: {msg}")]
    BadHardware { msg: String },

    #[error("{path}: {msg}")]
    Io { path: String, msg: String },

    #[error("the pruned search space is empty")]
    EmptySpace,

    #[error("no feasible candidate was ever measured")]
    NoFeasibleCandidate,

    #[error("schedule is infeasible: {0}")]
    Infeasible(Infeasibility),
}

/// Why the measurement oracle refused to assign a cost. This is a signal,
/// not a cost: infeasible candidates rank behind every feasible one.
#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum Infeasibility {
    #[error("peak shared memory {peak} B exceeds the hard per-block limit {limit} B")]
    SharedMemory { peak: u64, limit: u64 },

    #[error("simulation exceeded the statement-execution budget of {budget}")]
    Budget { budget: u64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
