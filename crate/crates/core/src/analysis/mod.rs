//! Control-flow analysis of a single function: CFG, dominators, natural
//! loops, liveness-derived block signatures, and the order in which the
//! translated definitions are emitted.

pub mod cfg;
pub mod dom;
pub mod liveness;
pub mod loops;
pub mod order;
pub mod report;

pub use cfg::{build_cfg, ControlFlowGraph};
pub use dom::Dominators;
pub use liveness::{compute_block_params, BlockSignature, Liveness};
pub use loops::{detect_loops, ExitCondition, LoopForest, LoopInfo};
pub use order::{order_definitions, Unit};

use crate::ll::{LlvmFunction, Pos};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: in @{function}: {message}")]
pub struct AnalysisError {
    pub function: String,
    pub message: String,
    pub pos: Pos,
}

impl AnalysisError {
    pub fn new(f: &LlvmFunction, pos: Pos, message: impl Into<String>) -> Self {
        AnalysisError {
            function: f.name.clone(),
            message: message.into(),
            pos,
        }
    }
}

/// Everything the translator needs to know about one function.
#[derive(Debug, Clone)]
pub struct FunctionAnalysis {
    pub cfg: ControlFlowGraph,
    pub dominators: Dominators,
    pub signatures: Vec<BlockSignature>,
    pub liveness: Liveness,
    pub loops: LoopForest,
    pub units: Vec<Unit>,
}

pub fn analyze_function(f: &LlvmFunction) -> Result<FunctionAnalysis, AnalysisError> {
    let cfg = build_cfg(f)?;
    let dominators = Dominators::compute(&cfg);
    let loops = detect_loops(f, &cfg, &dominators)?;
    let liveness = Liveness::compute(f, &cfg);
    let signatures = compute_block_params(f, &cfg, &liveness)?;
    let units = order_definitions(&cfg, &loops);
    Ok(FunctionAnalysis {
        cfg,
        dominators,
        signatures,
        liveness,
        loops,
        units,
    })
}
