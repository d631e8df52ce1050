//! Register liveness and per-block parameter lists.

use std::collections::BTreeSet;

use super::{AnalysisError, ControlFlowGraph};
use crate::ll::{LlvmFunction, Operand, Terminator};

/// Live registers at block entry. Phi results of a block are not live at
/// its entry; a phi operand is live at the end of the corresponding
/// predecessor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Liveness {
    pub live_in: Vec<BTreeSet<String>>,
    pub live_out: Vec<BTreeSet<String>>,
}

fn reg(op: &Operand) -> Option<&str> {
    op.reg()
}

impl Liveness {
    pub fn compute(f: &LlvmFunction, cfg: &ControlFlowGraph) -> Self {
        let n = cfg.len();
        let mut upward = vec![BTreeSet::new(); n];
        let mut defs = vec![BTreeSet::new(); n];
        for (b, block) in f.blocks.iter().enumerate() {
            let d: &mut BTreeSet<String> = &mut defs[b];
            for phi in &block.phis {
                d.insert(phi.result.clone());
            }
            let u: &mut BTreeSet<String> = &mut upward[b];
            for inst in &block.body {
                for r in inst.op.operands().into_iter().filter_map(reg) {
                    if !d.contains(r) {
                        u.insert(r.to_string());
                    }
                }
                if let Some(r) = &inst.result {
                    d.insert(r.clone());
                }
            }
            let term_uses: Vec<&Operand> = match &block.terminator {
                Terminator::CondBr { cond, .. } => vec![cond],
                Terminator::Ret(Some((_, v))) => vec![v],
                _ => vec![],
            };
            for r in term_uses.into_iter().filter_map(reg) {
                if !d.contains(r) {
                    u.insert(r.to_string());
                }
            }
        }
        // Registers flowing along each edge into the successor's phis.
        let edge_uses = |b: usize, s: usize| -> Vec<String> {
            f.blocks[s]
                .phis
                .iter()
                .filter_map(|phi| {
                    phi.incoming_from(cfg.label(b))
                        .and_then(reg)
                        .map(String::from)
                })
                .collect()
        };

        let mut live_in = vec![BTreeSet::new(); n];
        let mut live_out = vec![BTreeSet::<String>::new(); n];
        let order: Vec<usize> = cfg.reverse_postorder().into_iter().rev().collect();
        let mut changed = true;
        while changed {
            changed = false;
            for &b in &order {
                let mut out = BTreeSet::new();
                for &s in &cfg.succs[b] {
                    out.extend(live_in[s].iter().cloned());
                    out.extend(edge_uses(b, s));
                }
                let mut inn = upward[b].clone();
                inn.extend(out.iter().filter(|r| !defs[b].contains(*r)).cloned());
                if inn != live_in[b] || out != live_out[b] {
                    live_in[b] = inn;
                    live_out[b] = out;
                    changed = true;
                }
            }
        }
        Liveness { live_in, live_out }
    }
}

/// Parameters of a block's definition, before the trailing state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSignature {
    pub label: String,
    /// Results of the block's phis, in phi order.
    pub phi_params: Vec<String>,
    /// Registers live into the block that it does not define, sorted by
    /// name.
    pub flow_params: Vec<String>,
}

impl BlockSignature {
    pub fn params(&self) -> impl Iterator<Item = &String> {
        self.phi_params.iter().chain(self.flow_params.iter())
    }
}

/// Block signatures from liveness. A register live into the entry block
/// that is not a formal parameter is used on some path that does not define
/// it, which is a dominance violation.
pub fn compute_block_params(
    f: &LlvmFunction,
    cfg: &ControlFlowGraph,
    live: &Liveness,
) -> Result<Vec<BlockSignature>, AnalysisError> {
    if let Some(entry) = live.live_in.first() {
        for r in entry {
            if !f.params.iter().any(|p| &p.name == r) {
                let pos = first_use(f, r).unwrap_or(f.pos);
                return Err(AnalysisError::new(
                    f,
                    pos,
                    format!("register `%{r}` is used on a path where it is not defined"),
                ));
            }
        }
    }
    Ok(f.blocks
        .iter()
        .enumerate()
        .map(|(b, block)| BlockSignature {
            label: cfg.label(b).to_string(),
            phi_params: block.phis.iter().map(|p| p.result.clone()).collect(),
            flow_params: live.live_in[b].iter().cloned().collect(),
        })
        .collect())
}

fn first_use(f: &LlvmFunction, r: &str) -> Option<crate::ll::Pos> {
    let is = |op: &Operand| op.reg() == Some(r);
    for b in &f.blocks {
        for phi in &b.phis {
            if phi.incoming.iter().any(|(v, _)| is(v)) {
                return Some(phi.pos);
            }
        }
        for inst in &b.body {
            if inst.op.operands().into_iter().any(is) {
                return Some(inst.pos);
            }
        }
        let used = match &b.terminator {
            Terminator::CondBr { cond, .. } => is(cond),
            Terminator::Ret(Some((_, v))) => is(v),
            _ => false,
        };
        if used {
            return Some(b.term_pos);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::build_cfg;
    use crate::ll::parse_source;

    fn sigs(src: &str) -> Result<Vec<BlockSignature>, AnalysisError> {
        let m = parse_source(src).unwrap();
        let f = &m.functions[0];
        let cfg = build_cfg(f).unwrap();
        let live = Liveness::compute(f, &cfg);
        compute_block_params(f, &cfg, &live)
    }

    #[test]
    fn occurrences_signatures() {
        let s = sigs(include_str!("../../fixtures/occurrences.ll")).unwrap();
        assert!(s[0].phi_params.is_empty());
        assert_eq!(s[0].flow_params, ["array", "n", "val"]);
        assert_eq!(s[1].phi_params, ["num_occur", "j"]);
        assert_eq!(s[1].flow_params, ["array", "n", "val"]);
        assert_eq!(s[2].phi_params, ["num_occur.0.lcssa"]);
        assert!(s[2].flow_params.is_empty());
    }

    #[test]
    fn nested_loop_signatures() {
        let s = sigs(include_str!("../../fixtures/sum2d.ll")).unwrap();
        let by = |l: &str| s.iter().find(|x| x.label == l).unwrap();
        assert_eq!(by("inner.body").phi_params, ["j", "s"]);
        assert_eq!(
            by("inner.body").flow_params,
            ["a", "cols", "i", "row", "rows"]
        );
        assert_eq!(by("outer.latch").flow_params, ["a", "cols", "i", "rows"]);
        assert_eq!(by("exit").flow_params, Vec::<String>::new());
    }

    #[test]
    fn use_without_dominating_definition_is_rejected() {
        let src = "define i64 @f(i1 %c) {\nentry:\n br i1 %c, label %a, label %j\n\
                   a:\n %x = add i64 1, 2\n br label %j\nj:\n ret i64 %x\n}";
        let err = sigs(src).unwrap_err();
        assert!(err.message.contains("%x"), "{err}");
        assert_eq!(err.pos.line, 8);
    }
}
