//! Definition order: every definition is emitted after the definitions it
//! calls, with each loop's clique kept together.

use super::{ControlFlowGraph, LoopForest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    /// A plain block definition.
    Block(usize),
    /// The five definitions generated for loop `N`.
    Clique(usize),
}

/// The unit whose definition a call to block `b` lands in.
pub fn unit_of(loops: &LoopForest, b: usize) -> Unit {
    if let Some(l) = loops.by_header(b) {
        Unit::Clique(l.index)
    } else if let Some(l) = loops.merged_into(b) {
        Unit::Clique(l.index)
    } else {
        Unit::Block(b)
    }
}

/// Units called from block `b`'s code: targets of edges that are neither
/// back edges nor loop exits, which become returns instead of calls.
fn block_callees(cfg: &ControlFlowGraph, loops: &LoopForest, b: usize) -> Vec<Unit> {
    cfg.succs[b]
        .iter()
        .filter(|&&s| !loops.is_back_edge(b, s) && loops.exit_of_edge(b, s).is_none())
        .map(|&s| unit_of(loops, s))
        .collect()
}

fn callees(cfg: &ControlFlowGraph, loops: &LoopForest, unit: Unit) -> Vec<Unit> {
    match unit {
        Unit::Block(b) => block_callees(cfg, loops, b),
        Unit::Clique(n) => {
            let l = &loops.loops[n];
            let mut out = vec![unit_of(loops, l.exit)];
            out.extend(block_callees(cfg, loops, l.header));
            out.retain(|&u| u != unit);
            out
        }
    }
}

/// Post-order over the call graph of units, starting at the entry block's
/// unit. The top-level driver, which calls that unit, comes last and is not
/// listed.
pub fn order_definitions(cfg: &ControlFlowGraph, loops: &LoopForest) -> Vec<Unit> {
    if cfg.is_empty() {
        return Vec::new();
    }
    let mut done: Vec<Unit> = Vec::new();
    let mut on_stack: Vec<Unit> = Vec::new();
    let root = unit_of(loops, ControlFlowGraph::ENTRY);
    let mut stack: Vec<(Unit, Vec<Unit>, usize)> = vec![(root, callees(cfg, loops, root), 0)];
    on_stack.push(root);
    while let Some((unit, next, i)) = stack.last_mut() {
        if *i < next.len() {
            let c = next[*i];
            *i += 1;
            if !done.contains(&c) && !on_stack.contains(&c) {
                on_stack.push(c);
                let cs = callees(cfg, loops, c);
                stack.push((c, cs, 0));
            }
        } else {
            done.push(*unit);
            on_stack.pop();
            stack.pop();
        }
    }
    done
}
