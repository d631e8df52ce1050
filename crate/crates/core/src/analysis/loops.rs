//! Natural loop detection and the loop-shape restrictions the while-clique
//! translation relies on.

use super::{AnalysisError, ControlFlowGraph, Dominators};
use crate::ll::{LlvmFunction, Operand, Terminator};

/// How the `done` bit is derived from the exiting block's branch:
/// `done = 1` exactly when `cond == exit_when`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExitCondition {
    pub cond: Operand,
    pub exit_when: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopInfo {
    /// Position in the innermost-first order; names the generated clique.
    pub index: usize,
    pub header: usize,
    /// Source of the unique back edge.
    pub latch: usize,
    /// Member blocks in source order, header included.
    pub body: Vec<usize>,
    /// The unique predecessor of the header outside the loop.
    pub preheader: usize,
    /// Source and target of the unique exit edge.
    pub exiting: usize,
    pub exit: usize,
    pub exit_condition: ExitCondition,
    /// The header's phi registers.
    pub carried: Vec<String>,
    pub parent: Option<usize>,
    pub depth: usize,
    /// The preheader is a plain block branching to exactly the header and
    /// the exit, so its code becomes the clique's entry definition.
    pub entry_merged: bool,
}

impl LoopInfo {
    pub fn contains(&self, b: usize) -> bool {
        self.body.binary_search(&b).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoopForest {
    /// Innermost first.
    pub loops: Vec<LoopInfo>,
    /// Innermost loop containing each block.
    pub innermost: Vec<Option<usize>>,
}

impl LoopForest {
    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn by_header(&self, b: usize) -> Option<&LoopInfo> {
        self.loops.iter().find(|l| l.header == b)
    }

    /// The loop whose entry definition absorbs block `b`, if any.
    pub fn merged_into(&self, b: usize) -> Option<&LoopInfo> {
        self.loops
            .iter()
            .find(|l| l.entry_merged && l.preheader == b)
    }

    pub fn is_back_edge(&self, from: usize, to: usize) -> bool {
        self.by_header(to).is_some_and(|l| l.latch == from)
    }

    /// The loop exited by the edge `from -> to`, if it is an exit edge.
    pub fn exit_of_edge(&self, from: usize, to: usize) -> Option<&LoopInfo> {
        self.loops
            .iter()
            .find(|l| l.exiting == from && l.exit == to)
    }
}

/// Find natural loops (an edge `u -> h` is a back edge when `h` dominates
/// `u`), reject irreducible flow and loops outside the supported shape, and
/// return them innermost first.
pub fn detect_loops(
    f: &LlvmFunction,
    cfg: &ControlFlowGraph,
    dom: &Dominators,
) -> Result<LoopForest, AnalysisError> {
    let n = cfg.len();
    let err = |b: usize, msg: String| AnalysisError::new(f, f.blocks[b].pos, msg);

    let mut latches: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, h) in cfg.edges() {
        if dom.dominates(h, u) {
            latches[h].push(u);
        }
    }

    // With back edges removed the graph must be acyclic.
    let mut indegree = vec![0usize; n];
    for (u, v) in cfg.edges() {
        if !latches[v].contains(&u) {
            indegree[v] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&b| indegree[b] == 0).collect();
    let mut visited = 0;
    while let Some(b) = ready.pop() {
        visited += 1;
        for &s in &cfg.succs[b] {
            if !latches[s].contains(&b) {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push(s);
                }
            }
        }
    }
    if visited != n {
        let b = (0..n).find(|&b| indegree[b] > 0).unwrap_or(0);
        return Err(err(
            b,
            format!("irreducible control flow: a cycle through `{}` is entered other than through its header", cfg.label(b)),
        ));
    }

    struct Raw {
        header: usize,
        latch: usize,
        body: Vec<usize>,
    }
    let mut raw = Vec::new();
    for h in 0..n {
        match latches[h].as_slice() {
            [] => continue,
            [latch] => {
                let mut in_body = vec![false; n];
                in_body[h] = true;
                let mut work = vec![*latch];
                while let Some(b) = work.pop() {
                    if !in_body[b] {
                        in_body[b] = true;
                        work.extend(cfg.preds[b].iter().copied());
                    }
                }
                let body = (0..n).filter(|&b| in_body[b]).collect();
                raw.push(Raw {
                    header: h,
                    latch: *latch,
                    body,
                });
            }
            many => {
                let names: Vec<String> = many
                    .iter()
                    .map(|&b| format!("`{}`", cfg.label(b)))
                    .collect();
                return Err(err(
                    h,
                    format!(
                        "loop at `{}` has several back edges (from {}); only single-latch loops are supported",
                        cfg.label(h),
                        names.join(", ")
                    ),
                ));
            }
        }
    }

    // Nesting: a loop's parent is the smallest other loop containing its
    // header.
    let contains = |r: &Raw, b: usize| r.body.binary_search(&b).is_ok();
    let parent_raw: Vec<Option<usize>> = raw
        .iter()
        .enumerate()
        .map(|(i, r)| {
            raw.iter()
                .enumerate()
                .filter(|&(j, o)| j != i && contains(o, r.header))
                .min_by_key(|(_, o)| o.body.len())
                .map(|(j, _)| j)
        })
        .collect();
    let depth_raw: Vec<usize> = (0..raw.len())
        .map(|i| {
            let mut d = 1;
            let mut p = parent_raw[i];
            while let Some(j) = p {
                d += 1;
                p = parent_raw[j];
            }
            d
        })
        .collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(depth_raw[i]), raw[i].header));
    let mut rank = vec![0; raw.len()];
    for (k, &i) in order.iter().enumerate() {
        rank[i] = k;
    }

    let innermost: Vec<Option<usize>> = (0..n)
        .map(|b| {
            (0..raw.len())
                .filter(|&i| contains(&raw[i], b))
                .min_by_key(|&i| raw[i].body.len())
                .map(|i| rank[i])
        })
        .collect();

    let mut loops = Vec::with_capacity(raw.len());
    for &i in &order {
        let r = &raw[i];
        let h = r.header;
        let label = cfg.label(h);
        let parent = parent_raw[i].map(|j| rank[j]);

        let outside: Vec<usize> = cfg.preds[h]
            .iter()
            .copied()
            .filter(|&p| !contains(r, p))
            .collect();
        let preheader = match outside.as_slice() {
            [p] => *p,
            _ => {
                return Err(err(
                    h,
                    format!(
                        "loop at `{label}` is entered from {} blocks; exactly one entering block is supported",
                        outside.len()
                    ),
                ))
            }
        };

        let exits: Vec<(usize, usize)> = r
            .body
            .iter()
            .flat_map(|&b| cfg.succs[b].iter().map(move |&s| (b, s)))
            .filter(|&(_, s)| !contains(r, s))
            .collect();
        let (exiting, exit) = match exits.as_slice() {
            [e] => *e,
            [] => return Err(err(h, format!("loop at `{label}` has no exit"))),
            many => {
                let names: Vec<String> = many
                    .iter()
                    .map(|&(a, b)| format!("`{}` -> `{}`", cfg.label(a), cfg.label(b)))
                    .collect();
                return Err(err(
                    h,
                    format!(
                        "loop at `{label}` has several exits ({}); only single-exit loops are supported",
                        names.join(", ")
                    ),
                ));
            }
        };
        if latches[exit].len() == 1 {
            return Err(err(
                exit,
                format!("loop at `{label}` exits directly into the header of another loop"),
            ));
        }
        if innermost[exit] != parent {
            return Err(err(
                exiting,
                format!("the exit edge of the loop at `{label}` leaves more than one loop level"),
            ));
        }
        let exit_condition = match &f.blocks[exiting].terminator {
            Terminator::CondBr {
                cond,
                on_true,
                on_false: _,
            } => ExitCondition {
                cond: cond.clone(),
                exit_when: cfg.index_of(on_true) == Some(exit),
            },
            _ => {
                return Err(err(
                    exiting,
                    format!("loop at `{label}` exits without a conditional branch"),
                ))
            }
        };

        let is_header = |b: usize| latches[b].len() == 1;
        let entry_merged = !is_header(preheader)
            && match &f.blocks[preheader].terminator {
                Terminator::CondBr {
                    on_true, on_false, ..
                } => {
                    let t = cfg.index_of(on_true);
                    let e = cfg.index_of(on_false);
                    (t == Some(h) && e == Some(exit)) || (t == Some(exit) && e == Some(h))
                }
                _ => false,
            };

        loops.push(LoopInfo {
            index: loops.len(),
            header: h,
            latch: r.latch,
            body: r.body.clone(),
            preheader,
            exiting,
            exit,
            exit_condition,
            carried: f.blocks[h].phis.iter().map(|p| p.result.clone()).collect(),
            parent,
            depth: depth_raw[i],
            entry_merged,
        });
    }
    Ok(LoopForest { loops, innermost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::build_cfg;
    use crate::ll::parse_source;

    fn loops_of(src: &str) -> Result<(ControlFlowGraph, LoopForest), AnalysisError> {
        let m = parse_source(src).unwrap();
        let f = &m.functions[0];
        let cfg = build_cfg(f).unwrap();
        let dom = Dominators::compute(&cfg);
        detect_loops(f, &cfg, &dom).map(|l| (cfg, l))
    }

    #[test]
    fn occurrences_has_one_self_loop() {
        let (cfg, forest) = loops_of(include_str!("../../fixtures/occurrences.ll")).unwrap();
        assert_eq!(forest.len(), 1);
        let l = &forest.loops[0];
        assert_eq!(cfg.label(l.header), ".lr.ph");
        assert_eq!(cfg.label(l.latch), ".lr.ph");
        assert_eq!(cfg.label(l.exit), "._crit_edge");
        assert_eq!(cfg.label(l.preheader), "0");
        assert_eq!(l.carried, ["num_occur", "j"]);
        assert_eq!(
            l.exit_condition,
            ExitCondition {
                cond: Operand::Reg("exitcond".into()),
                exit_when: true
            }
        );
        assert!(l.entry_merged);
    }

    #[test]
    fn loop_free_function() {
        let (_, forest) = loops_of(include_str!("../../fixtures/arith.ll")).unwrap();
        assert!(forest.is_empty());
        assert_eq!(forest.innermost, vec![None]);
    }

    #[test]
    fn nested_loops_inner_first() {
        let (cfg, forest) = loops_of(include_str!("../../fixtures/sum2d.ll")).unwrap();
        assert_eq!(forest.len(), 2);
        let inner = &forest.loops[0];
        let outer = &forest.loops[1];
        assert_eq!(cfg.label(inner.header), "inner.body");
        assert_eq!(cfg.label(outer.header), "outer.header");
        assert_eq!(inner.parent, Some(1));
        assert_eq!(outer.parent, None);
        assert_eq!((inner.depth, outer.depth), (2, 1));
        assert_eq!(cfg.label(inner.exit), "outer.latch");
        assert!(
            !inner.entry_merged,
            "preheader of the inner loop is the outer header"
        );
        assert!(outer.entry_merged);
        assert_eq!(
            forest.innermost[cfg.index_of("outer.latch").unwrap()],
            Some(1)
        );
        assert_eq!(forest.innermost[cfg.index_of("exit").unwrap()], None);
    }

    #[test]
    fn back_edges_removed_leave_a_dag() {
        let (cfg, forest) = loops_of(include_str!("../../fixtures/sum2d.ll")).unwrap();
        let mut indeg = vec![0; cfg.len()];
        for (u, v) in cfg.edges() {
            if !forest.is_back_edge(u, v) {
                indeg[v] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..cfg.len()).filter(|&b| indeg[b] == 0).collect();
        let mut seen = 0;
        while let Some(b) = ready.pop() {
            seen += 1;
            for &s in &cfg.succs[b] {
                if !forest.is_back_edge(b, s) {
                    indeg[s] -= 1;
                    if indeg[s] == 0 {
                        ready.push(s);
                    }
                }
            }
        }
        assert_eq!(seen, cfg.len());
    }

    #[test]
    fn irreducible_flow_is_rejected() {
        let src = "define void @f(i1 %c) {\nentry:\n br i1 %c, label %a, label %b\n\
                   a:\n br i1 %c, label %b, label %out\nb:\n br i1 %c, label %a, label %out\n\
                   out:\n ret void\n}";
        let err = loops_of(src).unwrap_err();
        assert!(err.message.contains("irreducible"), "{err}");
    }

    #[test]
    fn multi_exit_loop_is_rejected() {
        let src = "define i64 @f(i64 %n) {\nentry:\n br label %h\n\
                   h:\n %i = phi i64 [ 0, %entry ], [ %i1, %b ]\n %c = icmp eq i64 %i, %n\n br i1 %c, label %out, label %b\n\
                   b:\n %i1 = add i64 %i, 1\n %d = icmp eq i64 %i1, 7\n br i1 %d, label %out2, label %h\n\
                   out:\n ret i64 0\nout2:\n ret i64 1\n}";
        let err = loops_of(src).unwrap_err();
        assert!(err.message.contains("several exits"), "{err}");
    }

    #[test]
    fn multi_latch_loop_is_rejected() {
        let src = "define i64 @f(i1 %c) {\nentry:\n br label %h\n\
                   h:\n br i1 %c, label %a, label %b\n\
                   a:\n br i1 %c, label %h, label %out\nb:\n br label %h\nout:\n ret i64 0\n}";
        let err = loops_of(src).unwrap_err();
        assert!(err.message.contains("back edges"), "{err}");
    }

    #[test]
    fn header_exit_loop() {
        let src = "define i64 @f(i64 %n) {\nentry:\n br label %h\n\
                   h:\n %i = phi i64 [ 0, %entry ], [ %i1, %b ]\n %c = icmp ult i64 %i, %n\n br i1 %c, label %b, label %out\n\
                   b:\n %i1 = add i64 %i, 1\n br label %h\nout:\n ret i64 %i\n}";
        let (cfg, forest) = loops_of(src).unwrap();
        let l = &forest.loops[0];
        assert_eq!(cfg.label(l.exiting), "h");
        assert_eq!(cfg.label(l.latch), "b");
        assert!(!l.exit_condition.exit_when);
        assert!(!l.entry_merged);
    }
}
