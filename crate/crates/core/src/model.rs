//! MDP arenas, the `.wmdp` text format and threshold normalization.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{ParseError, SolverError, Violation};
use crate::rational::{format_rational, parse_rational, Rational};

/// Vertex index into an [`Mdp`].
pub type Vertex = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Owner {
    Player,
    Random,
}

impl Owner {
    fn label(self) -> &'static str {
        match self {
            Owner::Player => "player",
            Owner::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub source: Vertex,
    pub target: Vertex,
    pub weight: i64,
    /// Present exactly on edges leaving random vertices.
    pub prob: Option<Rational>,
}

/// A finite bipartite MDP with integer payoffs and exact transition probabilities.
///
/// Instances are immutable; every transformation returns a new model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mdp {
    names: Vec<String>,
    owners: Vec<Owner>,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
    by_name: HashMap<String, Vertex>,
    by_pair: HashMap<(Vertex, Vertex), usize>,
}

#[derive(Debug, Default, Clone)]
pub struct MdpBuilder {
    names: Vec<String>,
    owners: Vec<Owner>,
    edges: Vec<Edge>,
    by_name: HashMap<String, Vertex>,
}

impl MdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `None` when the name is already taken.
    pub fn add_vertex(&mut self, name: impl Into<String>, owner: Owner) -> Option<Vertex> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return None;
        }
        let v = self.names.len();
        self.by_name.insert(name.clone(), v);
        self.names.push(name);
        self.owners.push(owner);
        Some(v)
    }

    pub fn vertex(&self, name: &str) -> Option<Vertex> {
        self.by_name.get(name).copied()
    }

    pub fn owner(&self, v: Vertex) -> Owner {
        self.owners[v]
    }

    pub fn add_edge(&mut self, source: Vertex, target: Vertex, weight: i64, prob: Option<Rational>) {
        self.edges.push(Edge {
            source,
            target,
            weight,
            prob,
        });
    }

    /// Builds without checking any invariant; use [`Mdp::validate`] afterwards.
    pub fn build_unchecked(self) -> Mdp {
        let n = self.names.len();
        let mut out = vec![Vec::new(); n];
        let mut by_pair = HashMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            out[e.source].push(i);
            by_pair.entry((e.source, e.target)).or_insert(i);
        }
        for list in &mut out {
            list.sort_by_key(|&i| self.edges[i].target);
        }
        Mdp {
            names: self.names,
            owners: self.owners,
            edges: self.edges,
            out,
            by_name: self.by_name,
            by_pair,
        }
    }

    pub fn build(self) -> Result<Mdp, ParseError> {
        let mdp = self.build_unchecked();
        let violations = mdp.validate();
        if violations.is_empty() {
            Ok(mdp)
        } else {
            Err(ParseError::Invalid(violations))
        }
    }
}

impl Mdp {
    pub fn num_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn vertices(&self) -> std::ops::Range<Vertex> {
        0..self.names.len()
    }

    pub fn player_vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.vertices().filter(|&v| self.is_player(v))
    }

    pub fn name(&self, v: Vertex) -> &str {
        &self.names[v]
    }

    pub fn owner(&self, v: Vertex) -> Owner {
        self.owners[v]
    }

    pub fn is_player(&self, v: Vertex) -> bool {
        self.owners[v] == Owner::Player
    }

    pub fn vertex(&self, name: &str) -> Option<Vertex> {
        self.by_name.get(name).copied()
    }

    pub fn require_vertex(&self, name: &str) -> Result<Vertex, SolverError> {
        self.vertex(name)
            .ok_or_else(|| SolverError::UnknownVertex(name.to_string()))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Out-edges of `v`, ordered by target index.
    pub fn out_edges(&self, v: Vertex) -> impl Iterator<Item = &Edge> + '_ {
        self.out[v].iter().map(move |&i| &self.edges[i])
    }

    pub fn successors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.out_edges(v).map(|e| e.target)
    }

    pub fn edge(&self, source: Vertex, target: Vertex) -> Option<&Edge> {
        self.by_pair.get(&(source, target)).map(|&i| &self.edges[i])
    }

    pub fn weight(&self, source: Vertex, target: Vertex) -> Option<i64> {
        self.edge(source, target).map(|e| e.weight)
    }

    /// `P(source)(target)`, zero when there is no such edge.
    pub fn prob(&self, source: Vertex, target: Vertex) -> Rational {
        self.edge(source, target)
            .and_then(|e| e.prob.clone())
            .unwrap_or_else(Rational::zero)
    }

    /// Largest absolute edge payoff `W`.
    pub fn max_abs_weight(&self) -> i64 {
        self.edges.iter().map(|e| e.weight.abs()).max().unwrap_or(0)
    }

    /// Predecessor lists, indexed by vertex.
    pub fn predecessors(&self) -> Vec<Vec<Vertex>> {
        let mut pred = vec![Vec::new(); self.num_vertices()];
        for e in &self.edges {
            pred[e.source].push(e.target);
        }
        let mut rev = vec![Vec::new(); self.num_vertices()];
        for (s, targets) in pred.into_iter().enumerate() {
            for t in targets {
                rev[t].push(s);
            }
        }
        rev
    }

    /// Lists every broken invariant; an empty list means the model is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut found = Vec::new();
        let mut seen = HashMap::new();
        for e in &self.edges {
            let (s, t) = (self.name(e.source).to_string(), self.name(e.target).to_string());
            if seen.insert((e.source, e.target), ()).is_some() {
                found.push(Violation::DuplicateEdge(s.clone(), t.clone()));
            }
            let src_owner = self.owner(e.source);
            if src_owner == self.owner(e.target) {
                found.push(Violation::AlternationBroken(s.clone(), t.clone(), src_owner.label()));
            }
            match (src_owner, &e.prob) {
                (Owner::Player, Some(_)) => found.push(Violation::ProbabilityOnPlayerEdge(s, t)),
                (Owner::Random, None) => found.push(Violation::MissingProbability(s, t)),
                (Owner::Random, Some(p)) if !p.is_positive() => {
                    found.push(Violation::NonPositiveProbability(s, t, format_rational(p)))
                }
                _ => {}
            }
        }
        for v in self.vertices() {
            if self.out[v].is_empty() {
                found.push(Violation::NoOutEdge(self.name(v).to_string()));
            } else if self.owner(v) == Owner::Random {
                let sum: Rational = self.out_edges(v).filter_map(|e| e.prob.clone()).sum();
                if !sum.is_one() {
                    found.push(Violation::ProbabilitySum(
                        self.name(v).to_string(),
                        format_rational(&sum),
                    ));
                }
            }
        }
        found
    }

    /// Renders the model in the `.wmdp` format; parsing the result gives back `self`.
    pub fn to_wmdp(&self) -> String {
        let mut text = String::new();
        for v in self.vertices() {
            let _ = writeln!(text, "vertex {} {}", self.name(v), self.owner(v).label());
        }
        for e in &self.edges {
            let _ = write!(
                text,
                "edge {} {} weight {}",
                self.name(e.source),
                self.name(e.target),
                e.weight
            );
            if let Some(p) = &e.prob {
                let _ = write!(text, " prob {}", format_rational(p));
            }
            text.push('\n');
        }
        text
    }

    /// Same arena and probabilities with every payoff replaced by `f(payoff)`.
    pub fn map_weights(&self, f: impl Fn(i64) -> i64) -> Mdp {
        let mut m = self.clone();
        for e in &mut m.edges {
            e.weight = f(e.weight);
        }
        m
    }

    /// Shifts the guarantee threshold `alpha = a/b` to zero.
    ///
    /// Every payoff `w` becomes `b*w - a`; thresholds transform through the
    /// returned [`AffineMap`].
    pub fn normalize_guarantee(&self, alpha: &Rational) -> (Mdp, AffineMap) {
        let map = AffineMap {
            scale: alpha.denom().clone(),
            shift: alpha.numer().clone(),
        };
        let scale = map.scale.to_i64().expect("guarantee denominator fits in i64");
        let shift = map.shift.to_i64().expect("guarantee numerator fits in i64");
        (self.map_weights(|w| scale * w - shift), map)
    }
}

/// The threshold map `γ ↦ scale·γ − shift` induced by guarantee normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineMap {
    pub scale: BigInt,
    pub shift: BigInt,
}

impl AffineMap {
    pub fn identity() -> Self {
        AffineMap {
            scale: BigInt::one(),
            shift: BigInt::zero(),
        }
    }

    pub fn apply(&self, x: &Rational) -> Rational {
        x * Rational::from_integer(self.scale.clone()) - Rational::from_integer(self.shift.clone())
    }

    pub fn invert(&self, y: &Rational) -> Rational {
        (y + Rational::from_integer(self.shift.clone())) / Rational::from_integer(self.scale.clone())
    }
}

/// Parses a `.wmdp` document into a validated model.
///
/// ```text
/// # comment
/// vertex a player
/// vertex b random
/// edge a b weight 0
/// edge b a weight 0 prob 1/1
/// ```
pub fn parse_mdp(text: &str) -> Result<Mdp, ParseError> {
    let mut builder = MdpBuilder::new();
    // Edges are resolved after all vertices are known.
    let mut pending = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        let Some(&(first_col, keyword)) = tokens.first() else {
            continue;
        };
        let syntax = |column: usize, message: String| ParseError::Syntax {
            line: line_no,
            column,
            message,
        };
        match keyword {
            "vertex" => {
                if tokens.len() != 3 {
                    let col = tokens.get(3).map_or(content.len() + 1, |t| t.0);
                    return Err(syntax(col, "expected `vertex <id> player|random`".into()));
                }
                let (ocol, owner) = tokens[2];
                let owner = match owner {
                    "player" => Owner::Player,
                    "random" => Owner::Random,
                    other => return Err(syntax(ocol, format!("unknown owner `{other}`"))),
                };
                let name = tokens[1].1;
                if builder.add_vertex(name, owner).is_none() {
                    return Err(ParseError::DuplicateVertex {
                        line: line_no,
                        name: name.to_string(),
                    });
                }
            }
            "edge" => {
                if !(tokens.len() == 5 || tokens.len() == 7) {
                    return Err(syntax(
                        first_col,
                        "expected `edge <src> <dst> weight <int> [prob <n>/<d>]`".into(),
                    ));
                }
                if tokens[3].1 != "weight" {
                    return Err(syntax(tokens[3].0, format!("expected `weight`, found `{}`", tokens[3].1)));
                }
                let weight: i64 = tokens[4]
                    .1
                    .parse()
                    .map_err(|_| syntax(tokens[4].0, format!("invalid integer `{}`", tokens[4].1)))?;
                let prob = if tokens.len() == 7 {
                    if tokens[5].1 != "prob" {
                        return Err(syntax(tokens[5].0, format!("expected `prob`, found `{}`", tokens[5].1)));
                    }
                    Some(parse_rational(tokens[6].1).map_err(|e| syntax(tokens[6].0, e.to_string()))?)
                } else {
                    None
                };
                pending.push((line_no, tokens[1].1.to_string(), tokens[2].1.to_string(), weight, prob));
            }
            other => return Err(syntax(first_col, format!("unknown keyword `{other}`"))),
        }
    }
    for (line, src, dst, weight, prob) in pending {
        let lookup = |name: &str| {
            builder.vertex(name).ok_or_else(|| ParseError::UnknownVertex {
                line,
                name: name.to_string(),
            })
        };
        let s = lookup(&src)?;
        let t = lookup(&dst)?;
        match (builder.owner(s), &prob) {
            (Owner::Player, Some(_)) => return Err(ParseError::ProbabilityOnPlayerEdge { line, src, dst }),
            (Owner::Random, None) => return Err(ParseError::MissingProbability { line, src, dst }),
            _ => {}
        }
        builder.add_edge(s, t, weight, prob);
    }
    builder.build()
}

/// Whitespace tokens with their 1-based column.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                tokens.push((s + 1, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push((s + 1, &line[s..]));
    }
    tokens
}
