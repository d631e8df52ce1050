//! Alias elimination: every call through an alias is redirected to the
//! function it ultimately names.

use std::collections::{BTreeMap, HashSet};

use super::ast::{LlvmModule, Op, Pos};
use super::{ParseError, ParseErrorKind};

/// Replace each use of an alias by its final target and empty the alias
/// list. Cycles and aliases naming undefined globals are rejected.
pub fn resolve_aliases(mut module: LlvmModule) -> Result<LlvmModule, ParseError> {
    if module.aliases.is_empty() {
        return Ok(module);
    }
    let direct: BTreeMap<&str, (&str, Pos)> = module
        .aliases
        .iter()
        .map(|a| (a.name.as_str(), (a.target.as_str(), a.pos)))
        .collect();
    let defined: HashSet<&str> = module
        .functions
        .iter()
        .map(|f| f.name.as_str())
        .chain(module.declarations.iter().map(String::as_str))
        .collect();

    let mut resolved: BTreeMap<String, String> = BTreeMap::new();
    for alias in &module.aliases {
        let mut seen = vec![alias.name.as_str()];
        let mut cur = alias.target.as_str();
        while let Some(&(next, _)) = direct.get(cur) {
            if seen.contains(&cur) {
                seen.push(cur);
                return Err(ParseError::new(
                    ParseErrorKind::Malformed,
                    format!(
                        "alias cycle: {}",
                        seen.iter()
                            .map(|s| format!("@{s}"))
                            .collect::<Vec<_>>()
                            .join(" -> ")
                    ),
                    alias.pos,
                ));
            }
            seen.push(cur);
            cur = next;
        }
        if !defined.contains(cur) {
            return Err(ParseError::new(
                ParseErrorKind::Malformed,
                format!(
                    "alias `@{}` refers to undefined global `@{cur}`",
                    alias.name
                ),
                alias.pos,
            ));
        }
        resolved.insert(alias.name.clone(), cur.to_string());
    }

    for f in &mut module.functions {
        for b in &mut f.blocks {
            for inst in &mut b.body {
                if let Op::Call { callee, .. } = &mut inst.op {
                    if let Some(target) = resolved.get(callee.as_str()) {
                        *callee = target.clone();
                    }
                }
            }
        }
    }
    module.aliases.clear();
    Ok(module)
}
