//! Immediate dominators by the iterative algorithm of Cooper, Harvey and
//! Kennedy.

use super::ControlFlowGraph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dominators {
    /// Immediate dominator of each block; the entry is its own.
    pub idom: Vec<usize>,
}

impl Dominators {
    pub fn compute(cfg: &ControlFlowGraph) -> Self {
        let n = cfg.len();
        if n == 0 {
            return Dominators { idom: Vec::new() };
        }
        let rpo = cfg.reverse_postorder();
        let mut rank = vec![usize::MAX; n];
        for (i, &b) in rpo.iter().enumerate() {
            rank[b] = i;
        }
        const UNDEF: usize = usize::MAX;
        let mut idom = vec![UNDEF; n];
        idom[ControlFlowGraph::ENTRY] = ControlFlowGraph::ENTRY;
        let mut changed = true;
        while changed {
            changed = false;
            for &b in rpo.iter().skip(1) {
                let mut new = UNDEF;
                for &p in &cfg.preds[b] {
                    if idom[p] == UNDEF {
                        continue;
                    }
                    new = if new == UNDEF {
                        p
                    } else {
                        let (mut x, mut y) = (p, new);
                        while x != y {
                            while rank[x] > rank[y] {
                                x = idom[x];
                            }
                            while rank[y] > rank[x] {
                                y = idom[y];
                            }
                        }
                        x
                    };
                }
                if idom[b] != new {
                    idom[b] = new;
                    changed = true;
                }
            }
        }
        Dominators { idom }
    }

    /// Whether `a` dominates `b` (reflexively).
    pub fn dominates(&self, a: usize, mut b: usize) -> bool {
        loop {
            if a == b {
                return true;
            }
            let up = self.idom[b];
            if up == b {
                return false;
            }
            b = up;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::build_cfg;
    use crate::ll::parse_source;

    #[test]
    fn diamond() {
        let src = "define i64 @f(i1 %c) {\nentry:\n br i1 %c, label %a, label %b\n\
                   a:\n br label %j\nb:\n br label %j\nj:\n ret i64 0\n}";
        let m = parse_source(src).unwrap();
        let cfg = build_cfg(&m.functions[0]).unwrap();
        let d = Dominators::compute(&cfg);
        assert_eq!(d.idom, vec![0, 0, 0, 0]);
        assert!(d.dominates(0, 3));
        assert!(!d.dominates(1, 3));
        assert!(d.dominates(3, 3));
    }

    #[test]
    fn nested_loops() {
        let m = parse_source(include_str!("../../fixtures/sum2d.ll")).unwrap();
        let cfg = build_cfg(&m.functions[0]).unwrap();
        let d = Dominators::compute(&cfg);
        let ix = |l: &str| cfg.index_of(l).unwrap();
        assert!(d.dominates(ix("outer.header"), ix("inner.body")));
        assert!(d.dominates(ix("outer.header"), ix("outer.latch")));
        assert!(!d.dominates(ix("inner.body"), ix("outer.latch")));
        assert_eq!(d.idom[ix("exit")], ix("entry"));
    }
}
