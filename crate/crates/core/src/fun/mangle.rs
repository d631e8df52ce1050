//! Identifier mangling for the functional form.

use std::collections::{BTreeMap, BTreeSet};

/// Variable names the generated code binds itself.
pub const RESERVED_VARS: [&str; 2] = ["st", "done"];

/// `.` becomes `_dot_`, any other character outside `[A-Za-z0-9_]` becomes
/// `_`, and a leading digit gets a `_` prefix.
pub fn mangle_ident(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '.' => out.push_str("_dot_"),
            c if c.is_ascii_alphanumeric() || c == '_' => out.push(c),
            _ => out.push('_'),
        }
    }
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out
}

/// Name of the definition for a block: one leading `.` of the label is
/// dropped, and a label starting with a digit gets a `bb` prefix.
pub fn block_def_name(function: &str, label: &str) -> String {
    let label = label.strip_prefix('.').unwrap_or(label);
    let mut m = mangle_ident(label);
    if label.starts_with(|c: char| c.is_ascii_digit()) {
        m = format!("bb{}", &m[1..]);
    }
    format!("{function}_{m}")
}

/// A collision-free mangling of a function's registers.
#[derive(Debug, Clone, Default)]
pub struct RegisterNames {
    map: BTreeMap<String, String>,
}

impl RegisterNames {
    /// Registers are processed in sorted order; a mangled name already taken
    /// or reserved gets the first free `_k` suffix.
    pub fn new<'a>(registers: impl IntoIterator<Item = &'a str>) -> Self {
        let raw: BTreeSet<&str> = registers.into_iter().collect();
        let mut taken: BTreeSet<String> = RESERVED_VARS.iter().map(|s| s.to_string()).collect();
        let mut map = BTreeMap::new();
        for r in raw {
            let base = mangle_ident(r);
            let mut name = base.clone();
            let mut k = 1;
            while taken.contains(&name) {
                name = format!("{base}_{k}");
                k += 1;
            }
            taken.insert(name.clone());
            map.insert(r.to_string(), name);
        }
        RegisterNames { map }
    }

    pub fn get(&self, raw: &str) -> &str {
        self.map
            .get(raw)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("register `%{raw}` has no mangled name"))
    }

    /// A name based on `base` that is neither a register, reserved, nor in
    /// `avoid`.
    pub fn fresh(&self, base: &str, avoid: &[&str]) -> String {
        let taken = |n: &str| {
            RESERVED_VARS.contains(&n) || avoid.contains(&n) || self.map.values().any(|v| v == n)
        };
        let mut name = base.to_string();
        let mut k = 1;
        while taken(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        name
    }
}
