//! Plain-text dump of an analysed function.
//!
//! ```text
//! function @occurrences
//! block 0 entry succ ._crit_edge .lr.ph
//!   phi-params:
//!   flow-params: array n val
//! ...
//! loop 0 header .lr.ph latch .lr.ph preheader 0 exit ._crit_edge via .lr.ph
//!   body: .lr.ph
//!   carried: num_occur j
//!   done: %exitcond == 1
//!   entry: merged into preheader
//! ```

use std::fmt::Write;

use super::FunctionAnalysis;
use crate::ll::{LlvmFunction, Operand};

pub fn render(f: &LlvmFunction, a: &FunctionAnalysis) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "function @{}", f.name);
    let cfg = &a.cfg;
    for (b, sig) in a.signatures.iter().enumerate() {
        let succ: Vec<&str> = cfg.succs[b].iter().map(|&s| cfg.label(s)).collect();
        let role = if b == 0 { " entry" } else { "" };
        let _ = writeln!(
            out,
            "block {}{role} succ {}",
            cfg.label(b),
            succ.join(" ").trim_end()
        );
        let _ = writeln!(out, "  phi-params: {}", sig.phi_params.join(" "));
        let _ = writeln!(out, "  flow-params: {}", sig.flow_params.join(" "));
    }
    for l in &a.loops.loops {
        let _ = writeln!(
            out,
            "loop {} header {} latch {} preheader {} exit {} via {}",
            l.index,
            cfg.label(l.header),
            cfg.label(l.latch),
            cfg.label(l.preheader),
            cfg.label(l.exit),
            cfg.label(l.exiting)
        );
        let body: Vec<&str> = l.body.iter().map(|&b| cfg.label(b)).collect();
        let _ = writeln!(out, "  body: {}", body.join(" "));
        let _ = writeln!(out, "  carried: {}", l.carried.join(" "));
        if let Some(p) = l.parent {
            let _ = writeln!(out, "  parent: loop {p}");
        }
        let cond = match &l.exit_condition.cond {
            Operand::Reg(r) => format!("%{r}"),
            Operand::Const(c) => c.to_string(),
        };
        let _ = writeln!(
            out,
            "  done: {cond} == {}",
            l.exit_condition.exit_when as u8
        );
        let entry = if l.entry_merged {
            "merged into preheader"
        } else {
            "separate"
        };
        let _ = writeln!(out, "  entry: {entry}");
    }
    out
}
