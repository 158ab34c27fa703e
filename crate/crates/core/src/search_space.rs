//! The four-layer DAG search space: a macro pattern (which earlier stage each layer reads)
//! plus one operation per layer.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The nine admissible macro patterns, in lexicographic order.
pub const MACRO_PATTERNS: [[u8; 4]; 9] = [
    [0, 0, 0, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 1],
    [0, 0, 1, 2],
    [0, 0, 1, 3],
    [0, 1, 1, 1],
    [0, 1, 1, 2],
    [0, 1, 2, 2],
    [0, 1, 2, 3],
];

/// Total raw (macro, ops) encodings: 9 patterns x 9^4 operation tuples.
pub const SPACE_SIZE: usize = 9 * 9 * 9 * 9 * 9;

/// Layer operations. Variant order is alphabetical by tag, which fixes enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Arma,
    Cheb,
    Fc,
    Gat,
    Gcn,
    Gin,
    Graph,
    Sage,
    Skip,
}

impl Op {
    pub const ALL: [Op; 9] = [
        Op::Arma,
        Op::Cheb,
        Op::Fc,
        Op::Gat,
        Op::Gcn,
        Op::Gin,
        Op::Graph,
        Op::Sage,
        Op::Skip,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Op::Arma => "arma",
            Op::Cheb => "cheb",
            Op::Fc => "fc",
            Op::Gat => "gat",
            Op::Gcn => "gcn",
            Op::Gin => "gin",
            Op::Graph => "graph",
            Op::Sage => "sage",
            Op::Skip => "skip",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Op::Arma => "ARMA graph convolution",
            Op::Cheb => "Chebyshev spectral convolution",
            Op::Fc => "fully connected layer (no message passing)",
            Op::Gat => "graph attention",
            Op::Gcn => "graph convolution",
            Op::Gin => "graph isomorphism network layer",
            Op::Graph => "k-GNN (higher-order WL) convolution",
            Op::Sage => "GraphSAGE aggregation",
            Op::Skip => "identity (residual)",
        }
    }

    fn index(self) -> usize {
        Op::ALL.iter().position(|&o| o == self).unwrap()
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Op {
    type Err = Violation;

    fn from_str(s: &str) -> Result<Self, Violation> {
        let t = s.trim().trim_matches(['\'', '"']).trim();
        Op::ALL
            .iter()
            .copied()
            .find(|o| o.tag() == t)
            .ok_or_else(|| Violation::UnknownOp(t.to_string()))
    }
}

impl Serialize for Op {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for Op {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MacroLength(usize),
    MacroPattern(Vec<i64>),
    OpsLength(usize),
    UnknownOp(String),
    Syntax(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MacroLength(n) => write!(f, "macro must have 4 entries, got {n}"),
            Violation::MacroPattern(m) => write!(f, "macro not among 9 patterns: {m:?}"),
            Violation::OpsLength(n) => write!(f, "ops must have 4 entries, got {n}"),
            Violation::UnknownOp(t) => write!(f, "unknown operation {t}"),
            Violation::Syntax(s) => write!(f, "malformed architecture text: {s}"),
        }
    }
}

/// An unchecked architecture as it arrives from files, prompts or the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    #[serde(rename = "macro")]
    pub macro_pattern: Vec<i64>,
    pub ops: Vec<String>,
}

/// Checks a raw architecture, listing every violation found.
pub fn validate(spec: &ArchitectureSpec) -> Result<Architecture, Vec<Violation>> {
    let mut violations = Vec::new();
    let mut macro_pattern = None;
    if spec.macro_pattern.len() != 4 {
        violations.push(Violation::MacroLength(spec.macro_pattern.len()));
    } else {
        let found = MACRO_PATTERNS.iter().find(|p| {
            p.iter()
                .zip(&spec.macro_pattern)
                .all(|(&a, &b)| a as i64 == b)
        });
        match found {
            Some(p) => macro_pattern = Some(*p),
            None => violations.push(Violation::MacroPattern(spec.macro_pattern.clone())),
        }
    }
    if spec.ops.len() != 4 {
        violations.push(Violation::OpsLength(spec.ops.len()));
    }
    let mut ops = [Op::Arma; 4];
    for (i, tag) in spec.ops.iter().enumerate() {
        match tag.parse::<Op>() {
            Ok(op) if i < 4 => ops[i] = op,
            Ok(_) => {}
            Err(v) => violations.push(v),
        }
    }
    match macro_pattern {
        Some(m) if violations.is_empty() => Ok(Architecture { macro_pattern: m, ops }),
        _ => Err(violations),
    }
}

/// A valid point of the search space. Ordering matches the lexicographic order of
/// [`ArchKey`] strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Architecture {
    macro_pattern: [u8; 4],
    ops: [Op; 4],
}

impl Architecture {
    pub fn new(macro_pattern: [u8; 4], ops: [Op; 4]) -> Result<Self> {
        if MACRO_PATTERNS.contains(&macro_pattern) {
            Ok(Self { macro_pattern, ops })
        } else {
            Err(Error::InvalidArchitecture(vec![Violation::MacroPattern(
                macro_pattern.iter().map(|&v| v as i64).collect(),
            )]))
        }
    }

    pub fn macro_pattern(&self) -> [u8; 4] {
        self.macro_pattern
    }

    pub fn ops(&self) -> [Op; 4] {
        self.ops
    }

    pub fn key(&self) -> ArchKey {
        ArchKey(self.to_string())
    }

    pub fn to_spec(&self) -> ArchitectureSpec {
        ArchitectureSpec {
            macro_pattern: self.macro_pattern.iter().map(|&v| v as i64).collect(),
            ops: self.ops.iter().map(|o| o.tag().to_string()).collect(),
        }
    }

    /// Number of differing coordinates among (macro, op0..op3).
    pub fn hamming(&self, other: &Architecture) -> usize {
        usize::from(self.macro_pattern != other.macro_pattern)
            + self.ops.iter().zip(&other.ops).filter(|(a, b)| a != b).count()
    }

    /// All architectures at Hamming distance exactly 1, in lexicographic order.
    pub fn neighbors(&self) -> Vec<Architecture> {
        let mut out = Vec::with_capacity(40);
        for m in MACRO_PATTERNS {
            if m != self.macro_pattern {
                out.push(Architecture { macro_pattern: m, ops: self.ops });
            }
        }
        for slot in 0..4 {
            for op in Op::ALL {
                if op != self.ops[slot] {
                    let mut ops = self.ops;
                    ops[slot] = op;
                    out.push(Architecture { macro_pattern: self.macro_pattern, ops });
                }
            }
        }
        out.sort();
        out
    }

    /// Compact bench form: `("0-0-1-3", "gcn-gat-sage-gin")`.
    pub fn dashed(&self) -> (String, String) {
        let m: Vec<String> = self.macro_pattern.iter().map(u8::to_string).collect();
        let o: Vec<&str> = self.ops.iter().map(|o| o.tag()).collect();
        (m.join("-"), o.join("-"))
    }

    /// Parses the two bench columns. Accepts dashed (`0-0-1-3`) and bracketed
    /// (`[0, 0, 1, 3]`, `['gcn', 'gat', ...]`) forms.
    pub fn from_columns(macro_col: &str, ops_col: &str) -> Result<Self, Vec<Violation>> {
        let split = |s: &str| -> Vec<String> {
            s.trim()
                .trim_start_matches('[')
                .trim_end_matches(']')
                .split(['-', ',', ' '])
                .map(|t| t.trim().trim_matches(|c| c == '\'' || c == '"').to_string())
                .filter(|t| !t.is_empty())
                .collect()
        };
        let mut macro_pattern = Vec::new();
        for t in split(macro_col) {
            match t.parse::<i64>() {
                Ok(v) => macro_pattern.push(v),
                Err(_) => return Err(vec![Violation::Syntax(format!("macro entry {t:?}"))]),
            }
        }
        validate(&ArchitectureSpec { macro_pattern, ops: split(ops_col) })
    }

    fn from_index(mut i: usize) -> Self {
        let mut ops = [Op::Arma; 4];
        for slot in (0..4).rev() {
            ops[slot] = Op::ALL[i % 9];
            i /= 9;
        }
        Self { macro_pattern: MACRO_PATTERNS[i], ops }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.macro_pattern;
        let o = self.ops;
        write!(
            f,
            "macro:[{},{},{},{}]|ops:[{},{},{},{}]",
            m[0], m[1], m[2], m[3], o[0], o[1], o[2], o[3]
        )
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::InvalidArchitecture(vec![Violation::Syntax(s.to_string())]);
        let rest = s.trim().strip_prefix("macro:[").ok_or_else(err)?;
        let (m, rest) = rest.split_once("]|ops:[").ok_or_else(err)?;
        let o = rest.strip_suffix(']').ok_or_else(err)?;
        let mut macro_pattern = Vec::new();
        for t in m.split(',') {
            macro_pattern.push(t.trim().parse::<i64>().map_err(|_| err())?);
        }
        let ops = o.split(',').map(|t| t.trim().to_string()).collect();
        validate(&ArchitectureSpec { macro_pattern, ops }).map_err(Error::InvalidArchitecture)
    }
}

impl Serialize for Architecture {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Architecture {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Canonical string form `macro:[a,b,c,d]|ops:[w,x,y,z]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArchKey(String);

impl ArchKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn parse(&self) -> Result<Architecture> {
        self.0.parse()
    }
}

impl fmt::Display for ArchKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ArchKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(s.parse::<Architecture>()?.key())
    }
}

/// Every raw encoding once, lexicographically: macro pattern first, then ops.
pub fn enumerate_space() -> impl Iterator<Item = Architecture> + Clone {
    (0..SPACE_SIZE).map(Architecture::from_index)
}

/// Recombines two parents: the macro pattern is inherited whole from one parent, each op
/// slot independently from either. Returns up to `n` distinct children, none equal to a
/// parent; fewer when the reachable set is exhausted.
pub fn crossover(a: &Architecture, b: &Architecture, n: usize, seed: u64) -> Vec<Architecture> {
    let macro_choices = if a.macro_pattern == b.macro_pattern { 1 } else { 2 };
    let slot_choices: usize = (0..4).map(|i| if a.ops[i] == b.ops[i] { 1 } else { 2 }).product();
    let reachable = (macro_choices * slot_choices).saturating_sub(if a == b { 1 } else { 2 });
    let target = n.min(reachable);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(target);
    while out.len() < target {
        let macro_pattern = if rng.random_bool(0.5) { a.macro_pattern } else { b.macro_pattern };
        let mut ops = a.ops;
        for (i, op) in ops.iter_mut().enumerate() {
            if rng.random_bool(0.5) {
                *op = b.ops[i];
            }
        }
        let child = Architecture { macro_pattern, ops };
        if child != *a && child != *b && seen.insert(child) {
            out.push(child);
        }
    }
    out
}

/// Changes exactly one coordinate: either the macro pattern or one op slot.
pub fn mutate_one(a: &Architecture, seed: u64) -> Architecture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = *a;
    let coord = rng.random_range(0..5);
    if coord == 0 {
        let cur = MACRO_PATTERNS.iter().position(|&m| m == a.macro_pattern).unwrap();
        let pick = (cur + rng.random_range(1..MACRO_PATTERNS.len())) % MACRO_PATTERNS.len();
        out.macro_pattern = MACRO_PATTERNS[pick];
    } else {
        let slot = coord - 1;
        let cur = a.ops[slot].index();
        let pick = (cur + rng.random_range(1..Op::ALL.len())) % Op::ALL.len();
        out.ops[slot] = Op::ALL[pick];
    }
    out
}

/// Human-readable description of the space, used in prompts.
pub fn describe_space() -> String {
    let patterns: Vec<String> = MACRO_PATTERNS
        .iter()
        .map(|p| format!("[{}, {}, {}, {}]", p[0], p[1], p[2], p[3]))
        .collect();
    let ops: Vec<String> = Op::ALL
        .iter()
        .map(|o| format!("'{}' ({})", o.tag(), o.describe()))
        .collect();
    format!(
        "Each architecture has 4 layers. The macro pattern lists, for layer i, the index of the \
         stage it reads (0 = input, j = output of layer j). Allowed macro patterns: {}.\n\
         Each layer takes one operation from: {}.",
        patterns.join(", "),
        ops.join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arch(m: [u8; 4], ops: [&str; 4]) -> Architecture {
        let spec = ArchitectureSpec {
            macro_pattern: m.iter().map(|&v| v as i64).collect(),
            ops: ops.iter().map(|s| s.to_string()).collect(),
        };
        validate(&spec).unwrap()
    }

    fn arb_arch() -> impl Strategy<Value = Architecture> {
        (0..SPACE_SIZE).prop_map(Architecture::from_index)
    }

    #[test]
    fn validate_examples() {
        let ok = ArchitectureSpec {
            macro_pattern: vec![0, 0, 1, 3],
            ops: vec!["gcn".into(), "gat".into(), "sage".into(), "gin".into()],
        };
        assert!(validate(&ok).is_ok());

        let bad_macro = ArchitectureSpec { macro_pattern: vec![0, 1, 3, 3], ..ok.clone() };
        let v = validate(&bad_macro).unwrap_err();
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("macro not among 9 patterns"));

        let bad_op = ArchitectureSpec {
            ops: vec!["gcn".into(), "gat".into(), "sage".into(), "mlp".into()],
            ..ok.clone()
        };
        let v = validate(&bad_op).unwrap_err();
        assert_eq!(v, vec![Violation::UnknownOp("mlp".into())]);
        assert_eq!(v[0].to_string(), "unknown operation mlp");

        let both = ArchitectureSpec { macro_pattern: vec![9, 9, 9, 9], ops: vec!["x".into()] };
        assert_eq!(validate(&both).unwrap_err().len(), 3);
    }

    #[test]
    fn key_format() {
        let a = arch([0, 0, 1, 3], ["gcn", "gat", "sage", "gin"]);
        assert_eq!(a.key().as_str(), "macro:[0,0,1,3]|ops:[gcn,gat,sage,gin]");
        assert_eq!(a.dashed(), ("0-0-1-3".to_string(), "gcn-gat-sage-gin".to_string()));
        assert_eq!(Architecture::from_columns("[0, 0, 1, 3]", "['gcn', 'gat', 'sage', 'gin']").unwrap(), a);
        assert_eq!(Architecture::from_columns("0-0-1-3", "gcn-gat-sage-gin").unwrap(), a);
        assert!("macro:[0,0,1]|ops:[gcn,gat,sage,gin]".parse::<Architecture>().is_err());
    }

    #[test]
    fn enumeration() {
        let all: Vec<_> = enumerate_space().collect();
        assert_eq!(all.len(), 59049);
        assert_eq!(all[0], arch([0, 0, 0, 0], ["arma", "arma", "arma", "arma"]));
        assert_eq!(*all.last().unwrap(), arch([0, 1, 2, 3], ["skip", "skip", "skip", "skip"]));
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        let keys: BTreeSet<String> = all.iter().map(|a| a.to_string()).collect();
        assert_eq!(keys.len(), all.len());
        assert!(keys.iter().zip(&all).all(|(k, a)| *k == a.to_string()));
    }

    #[test]
    fn crossover_degenerate_parents() {
        let a = arch([0, 0, 1, 3], ["gcn", "gat", "sage", "gin"]);
        assert!(crossover(&a, &a, 10, 3).is_empty());
        let b = arch([0, 0, 1, 3], ["gcn", "gat", "sage", "arma"]);
        assert!(crossover(&a, &b, 10, 3).is_empty());
    }

    #[test]
    fn crossover_membership_and_exhaustion() {
        let a = arch([0, 0, 1, 3], ["gcn", "gat", "sage", "gin"]);
        let b = arch([0, 1, 2, 3], ["arma", "cheb", "fc", "skip"]);
        let kids = crossover(&a, &b, 30, 7);
        assert_eq!(kids.len(), 30, "2 x 2^4 - 2 = 30 reachable children");
        for k in &kids {
            assert!(k.macro_pattern == a.macro_pattern || k.macro_pattern == b.macro_pattern);
            for i in 0..4 {
                assert!(k.ops[i] == a.ops[i] || k.ops[i] == b.ops[i]);
            }
        }
        assert_eq!(crossover(&a, &b, 30, 7), kids);
        assert_eq!(crossover(&a, &b, 100, 7).len(), 30);
    }

    #[test]
    fn crossover_golden() {
        let a = arch([0, 0, 1, 3], ["gcn", "gat", "sage", "gin"]);
        let b = arch([0, 1, 2, 3], ["arma", "cheb", "fc", "skip"]);
        let got: Vec<String> = crossover(&a, &b, 30, 7).iter().map(|k| k.to_string()).collect();
        let golden: Vec<&str> = include_str!("../tests/data/crossover_seed7.txt").lines().collect();
        assert_eq!(got, golden);
    }

    #[test]
    fn mutate_covers_several_coordinates() {
        let a = arch([0, 0, 1, 3], ["gcn", "gat", "sage", "gin"]);
        let mut coords = BTreeSet::new();
        for seed in 0..1000 {
            let m = mutate_one(&a, seed);
            assert_eq!(a.hamming(&m), 1);
            if m.macro_pattern != a.macro_pattern {
                coords.insert(0);
            }
            for i in 0..4 {
                if m.ops[i] != a.ops[i] {
                    coords.insert(i + 1);
                }
            }
        }
        assert!(coords.len() >= 2);
        assert_eq!(mutate_one(&a, 42), mutate_one(&a, 42));
    }

    #[test]
    fn neighbors_are_distance_one() {
        let a = arch([0, 0, 1, 3], ["gcn", "gat", "sage", "gin"]);
        let n = a.neighbors();
        assert_eq!(n.len(), 8 + 4 * 8);
        assert!(n.iter().all(|x| x.hamming(&a) == 1));
    }

    proptest! {
        #[test]
        fn key_round_trip(a in arb_arch()) {
            let k = a.key();
            prop_assert_eq!(k.parse().unwrap(), a);
            prop_assert_eq!(k.as_str().parse::<ArchKey>().unwrap(), k.clone());
            let (m, o) = a.dashed();
            prop_assert_eq!(Architecture::from_columns(&m, &o).unwrap(), a);
        }

        #[test]
        fn children_are_valid(a in arb_arch(), b in arb_arch(), seed in any::<u64>()) {
            for c in crossover(&a, &b, 30, seed) {
                prop_assert!(validate(&c.to_spec()).is_ok());
                prop_assert!(c != a && c != b);
            }
            let m = mutate_one(&a, seed);
            prop_assert!(validate(&m.to_spec()).is_ok());
            prop_assert_eq!(m.hamming(&a), 1);
        }
    }
}
