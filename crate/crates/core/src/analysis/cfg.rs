//! Control-flow graph over block indices.

use std::collections::HashMap;

use super::AnalysisError;
use crate::ll::{LlvmFunction, Terminator};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlFlowGraph {
    /// Block labels in source order; the entry block is index 0.
    pub labels: Vec<String>,
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl ControlFlowGraph {
    pub const ENTRY: usize = 0;

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, b: usize) -> &str {
        &self.labels[b]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succs
            .iter()
            .enumerate()
            .flat_map(|(b, ss)| ss.iter().map(move |&s| (b, s)))
    }

    /// Blocks in reverse post-order from the entry.
    pub fn reverse_postorder(&self) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![(Self::ENTRY, 0usize)];
        seen[Self::ENTRY] = true;
        while let Some((b, i)) = stack.pop() {
            if i < self.succs[b].len() {
                stack.push((b, i + 1));
                let s = self.succs[b][i];
                if !seen[s] {
                    seen[s] = true;
                    stack.push((s, 0));
                }
            } else {
                order.push(b);
            }
        }
        order.reverse();
        order
    }
}

/// Build the CFG and check the structural rules the translation relies on:
/// the entry block has no predecessors, every block is reachable, a
/// conditional branch names two different blocks, and every phi has exactly
/// one incoming value per predecessor.
pub fn build_cfg(f: &LlvmFunction) -> Result<ControlFlowGraph, AnalysisError> {
    let labels: Vec<String> = f.blocks.iter().map(|b| b.label.clone()).collect();
    let index: HashMap<String, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i))
        .collect();
    let mut succs = vec![Vec::new(); labels.len()];
    let mut preds = vec![Vec::new(); labels.len()];
    for (b, block) in f.blocks.iter().enumerate() {
        if let Terminator::CondBr {
            on_true, on_false, ..
        } = &block.terminator
        {
            if on_true == on_false {
                return Err(AnalysisError::new(
                    f,
                    block.term_pos,
                    format!("conditional branch with both targets `%{on_true}` is not supported"),
                ));
            }
        }
        for target in block.terminator.successors() {
            let Some(&s) = index.get(target) else {
                return Err(AnalysisError::new(
                    f,
                    block.term_pos,
                    format!("branch to undefined label `%{target}`"),
                ));
            };
            succs[b].push(s);
            preds[s].push(b);
        }
    }
    let cfg = ControlFlowGraph {
        labels,
        succs,
        preds,
        index,
    };
    if cfg.is_empty() {
        return Ok(cfg);
    }
    if !cfg.preds[ControlFlowGraph::ENTRY].is_empty() {
        return Err(AnalysisError::new(
            f,
            f.blocks[0].pos,
            format!("entry block `{}` has predecessors", cfg.labels[0]),
        ));
    }
    let reachable = cfg.reverse_postorder();
    if reachable.len() != cfg.len() {
        let mut seen = vec![false; cfg.len()];
        for b in reachable {
            seen[b] = true;
        }
        let b = seen.iter().position(|s| !s).unwrap_or(0);
        return Err(AnalysisError::new(
            f,
            f.blocks[b].pos,
            format!("block `{}` is unreachable", cfg.labels[b]),
        ));
    }
    for (b, block) in f.blocks.iter().enumerate() {
        for phi in &block.phis {
            for (_, from) in &phi.incoming {
                let ok = cfg
                    .index_of(from)
                    .is_some_and(|p| cfg.preds[b].contains(&p));
                if !ok {
                    return Err(AnalysisError::new(
                        f,
                        phi.pos,
                        format!(
                            "phi `%{}` names `%{from}`, which is not a predecessor",
                            phi.result
                        ),
                    ));
                }
            }
            for &p in &cfg.preds[b] {
                let count = phi
                    .incoming
                    .iter()
                    .filter(|(_, l)| *l == cfg.labels[p])
                    .count();
                if count != 1 {
                    return Err(AnalysisError::new(
                        f,
                        phi.pos,
                        format!(
                            "phi `%{}` needs exactly one value for predecessor `%{}`, found {count}",
                            phi.result, cfg.labels[p]
                        ),
                    ));
                }
            }
        }
    }
    Ok(cfg)
}
