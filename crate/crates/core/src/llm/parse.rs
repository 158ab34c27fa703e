use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use crate::properties::Property;
use crate::search_space::{validate, Architecture, ArchitectureSpec};

static DECISION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?is)architecture\W{0,4}:\W{0,4}?\[([^\]]*)\][\s,;*`]*operations\W{0,4}:\W{0,4}?\[([^\]]*)\]").unwrap()
});

static WEIGHT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^[\s\-*`#>]*([A-Za-z_]+)[`*\s]*[:=][\s*`]*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)").unwrap()
});

/// Renders an architecture as a decision line.
pub fn decision_line(a: &Architecture) -> String {
    let m = a.macro_pattern().map(|x| x.to_string()).join(", ");
    let o: Vec<String> = a.ops().iter().map(|o| format!("'{}'", o.tag())).collect();
    format!("Architecture: [{m}], Operations: [{}]", o.join(", "))
}

/// Parses the last "Architecture: [..] Operations: [..]" occurrence.
pub fn parse_architecture(text: &str) -> Result<Architecture, String> {
    let caps = DECISION.captures_iter(text).last().ok_or("no 'Architecture: [...] Operations: [...]' line found")?;
    let macro_pattern = caps[1]
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<i64>().map_err(|_| format!("macro entry {s:?} is not an integer")))
        .collect::<Result<Vec<_>, _>>()?;
    let ops = caps[2]
        .split(',')
        .map(|s| s.trim().trim_matches(|c| c == '\'' || c == '"' || c == '`').trim().to_ascii_lowercase())
        .filter(|s| !s.is_empty())
        .collect();
    validate(&ArchitectureSpec { macro_pattern, ops }).map_err(|v| {
        let msg: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        msg.join("; ")
    })
}

/// Lines of the form `property_name: number`, for known property names. Later lines win.
pub fn parse_weights(text: &str) -> BTreeMap<Property, f64> {
    let mut out = BTreeMap::new();
    for c in WEIGHT_LINE.captures_iter(text) {
        let Ok(p) = c[1].to_ascii_lowercase().parse::<Property>() else {
            continue;
        };
        if let Ok(v) = c[2].parse::<f64>() {
            out.insert(p, v);
        }
    }
    out
}
