use std::fmt;

use serde::{Deserialize, Serialize};

use super::space::{SearchSpace, SpaceKind, GRAPH_MAX_EDGES, GRAPH_VERTICES};
use super::{NetError, Op};
use crate::numkit::Rng;

/// Maximum rejections before a constrained sampler gives up.
pub const MAX_REJECTIONS: usize = 1000;

/// Probability of each edge beyond the spanning ones in a random graph draw.
pub const GRAPH_EXTRA_EDGE_P: f64 = 0.1;

/// One point of a search space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    /// Operator index per edge, in the space's canonical edge order.
    Cell { ops: Vec<usize> },
    /// Upper-triangular adjacency and operator indices for the five interior
    /// vertices (vertex 0 is the input, vertex 6 the output).
    Graph {
        adjacency: [[bool; GRAPH_VERTICES]; GRAPH_VERTICES],
        ops: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset of the offending character or token.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte offset {}", self.message, self.offset)
    }
}

impl std::error::Error for ParseError {}

fn perr(offset: usize, message: impl Into<String>) -> NetError {
    NetError::Parse(ParseError {
        offset,
        message: message.into(),
    })
}

impl Architecture {
    pub fn cell(ops: Vec<usize>) -> Self {
        Architecture::Cell { ops }
    }

    /// Cell architecture from operator names, in canonical edge order.
    pub fn cell_from_ops(space: &SearchSpace, ops: &[Op]) -> Result<Self, NetError> {
        let idx = ops
            .iter()
            .map(|op| {
                space
                    .op_vocab
                    .iter()
                    .position(|o| o == op)
                    .ok_or_else(|| NetError::UnknownOp(op.cell_name().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let arch = Architecture::Cell { ops: idx };
        arch.validate(space)?;
        Ok(arch)
    }

    /// Cell with the same operator on every edge.
    pub fn uniform_cell(space: &SearchSpace, op: Op) -> Result<Self, NetError> {
        Self::cell_from_ops(space, &vec![op; space.edges.len()])
    }

    pub fn validate(&self, space: &SearchSpace) -> Result<(), NetError> {
        match (self, space.kind) {
            (Architecture::Cell { ops }, SpaceKind::Cell201 | SpaceKind::Toy) => {
                if ops.len() != space.edges.len() {
                    return Err(NetError::InvalidArch(format!(
                        "expected {} edge operators, got {}",
                        space.edges.len(),
                        ops.len()
                    )));
                }
                if let Some(&bad) = ops.iter().find(|&&o| o >= space.op_vocab.len()) {
                    return Err(NetError::InvalidArch(format!(
                        "operator index {bad} out of range"
                    )));
                }
                Ok(())
            }
            (Architecture::Graph { adjacency, ops }, SpaceKind::Graph101) => {
                if ops.len() != GRAPH_VERTICES - 2 {
                    return Err(NetError::InvalidArch(format!(
                        "expected {} vertex operators, got {}",
                        GRAPH_VERTICES - 2,
                        ops.len()
                    )));
                }
                if let Some(&bad) = ops.iter().find(|&&o| o >= space.op_vocab.len()) {
                    return Err(NetError::InvalidArch(format!(
                        "operator index {bad} out of range"
                    )));
                }
                for i in 0..GRAPH_VERTICES {
                    for j in 0..=i {
                        if adjacency[i][j] {
                            return Err(NetError::InvalidArch(
                                "adjacency must be strictly upper triangular".into(),
                            ));
                        }
                    }
                }
                let edges = graph_edge_count(adjacency);
                if edges > GRAPH_MAX_EDGES {
                    return Err(NetError::InvalidArch(format!(
                        "{edges} edges exceeds the limit of {GRAPH_MAX_EDGES}"
                    )));
                }
                let fwd = reachable_from(GRAPH_VERTICES, 0, |i, j| adjacency[i][j]);
                if !fwd[GRAPH_VERTICES - 1] {
                    return Err(NetError::InvalidArch(
                        "output not reachable from input".into(),
                    ));
                }
                let bwd = reaching(GRAPH_VERTICES, GRAPH_VERTICES - 1, |i, j| adjacency[i][j]);
                if let Some(v) = (0..GRAPH_VERTICES).find(|&v| !(fwd[v] && bwd[v])) {
                    return Err(NetError::InvalidArch(format!(
                        "vertex {v} is not on an input-to-output path"
                    )));
                }
                Ok(())
            }
            _ => Err(NetError::InvalidArch(format!(
                "architecture encoding does not belong to the {} space",
                space.kind.name()
            ))),
        }
    }

    /// Flat categorical decisions: edge operators for cells; adjacency bits
    /// (in `space.edges` order) followed by vertex operators for graphs.
    pub fn choices(&self, space: &SearchSpace) -> Vec<usize> {
        match self {
            Architecture::Cell { ops } => ops.clone(),
            Architecture::Graph { adjacency, ops } => space
                .edges
                .iter()
                .map(|&(i, j)| adjacency[i][j] as usize)
                .chain(ops.iter().copied())
                .collect(),
        }
    }

    /// Inverse of [`Architecture::choices`]. Does not validate.
    pub fn from_choices(space: &SearchSpace, choices: &[usize]) -> Architecture {
        match space.kind {
            SpaceKind::Graph101 => {
                let mut adjacency = [[false; GRAPH_VERTICES]; GRAPH_VERTICES];
                let ne = space.edges.len();
                for (k, &(i, j)) in space.edges.iter().enumerate() {
                    adjacency[i][j] = choices[k] != 0;
                }
                Architecture::Graph {
                    adjacency,
                    ops: choices[ne..].to_vec(),
                }
            }
            _ => Architecture::Cell {
                ops: choices.to_vec(),
            },
        }
    }

    /// Concatenated one-hot encoding of [`Architecture::choices`].
    pub fn one_hot(&self, space: &SearchSpace) -> Vec<f64> {
        let choices = self.choices(space);
        let mut out = Vec::new();
        for (i, &c) in choices.iter().enumerate() {
            let arity = space.choice_arity(i);
            out.extend((0..arity).map(|k| if k == c { 1.0 } else { 0.0 }));
        }
        out
    }

    /// Edge operators of a cell architecture, or vertex operators of a graph.
    pub fn ops(&self) -> &[usize] {
        match self {
            Architecture::Cell { ops } | Architecture::Graph { ops, .. } => ops,
        }
    }

    pub fn to_string(&self, space: &SearchSpace) -> String {
        match self {
            Architecture::Cell { ops } => {
                let mut groups = Vec::new();
                for to in 1..space.nodes {
                    let mut g = String::from("|");
                    for (k, &(from, t)) in space.edges.iter().enumerate() {
                        if t == to {
                            g.push_str(space.op_name(ops[k]));
                            g.push('~');
                            g.push_str(&from.to_string());
                            g.push('|');
                        }
                    }
                    groups.push(g);
                }
                groups.join("+")
            }
            Architecture::Graph { adjacency, ops } => {
                let mut s = String::with_capacity(28 + 6 * 12);
                for (i, row) in adjacency.iter().enumerate() {
                    for &bit in &row[i..] {
                        s.push(if bit { '1' } else { '0' });
                    }
                }
                for &o in ops {
                    s.push(':');
                    s.push_str(space.op_name(o));
                }
                s
            }
        }
    }

    pub fn parse(s: &str, space: &SearchSpace) -> Result<Architecture, NetError> {
        let arch = match space.kind {
            SpaceKind::Graph101 => parse_graph(s, space)?,
            _ => parse_cell(s, space)?,
        };
        arch.validate(space)?;
        Ok(arch)
    }
}

struct Token<'a> {
    name: &'a str,
    name_at: usize,
    source: usize,
    source_at: usize,
}

/// `|op~0|+|op~0|op~1|+...`. Syntax is checked in full before any operator
/// name is looked up, so offsets point at the first structural error.
fn parse_cell(s: &str, space: &SearchSpace) -> Result<Architecture, NetError> {
    let bytes = s.as_bytes();
    let mut pos = 0;
    let mut groups: Vec<Vec<Token>> = Vec::new();
    loop {
        if bytes.get(pos) != Some(&b'|') {
            return Err(perr(pos, "expected `|`"));
        }
        pos += 1;
        let mut group = Vec::new();
        loop {
            let name_at = pos;
            while pos < bytes.len() && !matches!(bytes[pos], b'~' | b'|' | b'+') {
                pos += 1;
            }
            if pos == name_at {
                return Err(perr(pos, "expected operator name"));
            }
            if bytes.get(pos) != Some(&b'~') {
                return Err(perr(pos, "expected `~`"));
            }
            let name = &s[name_at..pos];
            pos += 1;
            let source_at = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if pos == source_at {
                return Err(perr(pos, "expected source node index"));
            }
            let source = s[source_at..pos]
                .parse()
                .map_err(|_| perr(source_at, "source node index too large"))?;
            if bytes.get(pos) != Some(&b'|') {
                return Err(perr(pos, "expected `|`"));
            }
            pos += 1;
            group.push(Token {
                name,
                name_at,
                source,
                source_at,
            });
            match bytes.get(pos) {
                None | Some(b'+') => break,
                _ => {}
            }
        }
        groups.push(group);
        match bytes.get(pos) {
            None => break,
            Some(b'+') => pos += 1,
            Some(_) => return Err(perr(pos, "expected `+` or end of input")),
        }
    }

    if groups.len() != space.nodes - 1 {
        return Err(perr(
            s.len(),
            format!(
                "expected {} node groups, found {}",
                space.nodes - 1,
                groups.len()
            ),
        ));
    }
    let mut ops = vec![usize::MAX; space.edges.len()];
    for (g, group) in groups.iter().enumerate() {
        let to = g + 1;
        if group.len() != to {
            let at = group.first().map_or(0, |t| t.name_at);
            return Err(perr(
                at,
                format!("node {to} needs {to} incoming edges, found {}", group.len()),
            ));
        }
        for (k, tok) in group.iter().enumerate() {
            if tok.source != k {
                return Err(perr(tok.source_at, format!("expected source node {k}")));
            }
            let op = space
                .op_index(tok.name)
                .ok_or_else(|| perr(tok.name_at, format!("unknown operator `{}`", tok.name)))?;
            let edge = space
                .edges
                .iter()
                .position(|&e| e == (tok.source, to))
                .expect("complete cell contains every edge");
            ops[edge] = op;
        }
    }
    Ok(Architecture::Cell { ops })
}

/// `<28 upper-triangular bits>:<op>:<op>:<op>:<op>:<op>`.
fn parse_graph(s: &str, space: &SearchSpace) -> Result<Architecture, NetError> {
    let n = GRAPH_VERTICES;
    let nbits = n * (n + 1) / 2;
    let bytes = s.as_bytes();
    let mut adjacency = [[false; GRAPH_VERTICES]; GRAPH_VERTICES];
    let mut pos = 0;
    for i in 0..n {
        for j in i..n {
            let bit = match bytes.get(pos) {
                Some(b'0') => false,
                Some(b'1') => true,
                _ => return Err(perr(pos, "expected adjacency bit `0` or `1`")),
            };
            if bit && i == j {
                return Err(perr(pos, "self-loop on the adjacency diagonal"));
            }
            adjacency[i][j] = bit;
            pos += 1;
        }
    }
    debug_assert_eq!(pos, nbits);
    let mut ops = Vec::new();
    while pos < bytes.len() {
        if bytes[pos] != b':' {
            return Err(perr(pos, "expected `:`"));
        }
        pos += 1;
        let at = pos;
        while pos < bytes.len() && bytes[pos] != b':' {
            pos += 1;
        }
        let name = &s[at..pos];
        let op = space
            .op_index(name)
            .ok_or_else(|| perr(at, format!("unknown operator `{name}`")))?;
        ops.push(op);
    }
    if ops.len() != n - 2 {
        return Err(perr(
            s.len(),
            format!("expected {} vertex operators, found {}", n - 2, ops.len()),
        ));
    }
    Ok(Architecture::Graph { adjacency, ops })
}

pub(crate) fn graph_edge_count(adjacency: &[[bool; GRAPH_VERTICES]; GRAPH_VERTICES]) -> usize {
    adjacency.iter().flatten().filter(|&&b| b).count()
}

/// Nodes reachable from `start` following `edge(i, j)` with `i < j`.
pub(crate) fn reachable_from(
    n: usize,
    start: usize,
    edge: impl Fn(usize, usize) -> bool,
) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[start] = true;
    for j in (start + 1)..n {
        seen[j] = (start..j).any(|i| seen[i] && edge(i, j));
    }
    seen
}

/// Nodes from which `target` is reachable.
pub(crate) fn reaching(n: usize, target: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[target] = true;
    for i in (0..target).rev() {
        seen[i] = ((i + 1)..=target).any(|j| seen[j] && edge(i, j));
    }
    seen
}

/// Random architecture. Cell draws are uniform.
///
/// Graph draws give every interior vertex one random predecessor and one
/// random successor, add each remaining edge with probability
/// [`GRAPH_EXTRA_EDGE_P`], and reject proposals over the edge limit. Every
/// valid graph has positive probability; the draw is not uniform over them.
/// Naive rejection from independent fair bits accepts about 0.2% of proposals.
pub fn random_arch(space: &SearchSpace, rng: &mut Rng) -> Result<Architecture, NetError> {
    match space.kind {
        SpaceKind::Graph101 => {
            let n = GRAPH_VERTICES;
            for _ in 0..MAX_REJECTIONS {
                let mut adjacency = [[false; GRAPH_VERTICES]; GRAPH_VERTICES];
                for v in 1..n - 1 {
                    adjacency[rng.below(v)][v] = true;
                    adjacency[v][v + 1 + rng.below(n - 1 - v)] = true;
                }
                for &(i, j) in &space.edges {
                    if !adjacency[i][j] && rng.bernoulli(GRAPH_EXTRA_EDGE_P) {
                        adjacency[i][j] = true;
                    }
                }
                let ops = (0..n - 2)
                    .map(|_| rng.below(space.op_vocab.len()))
                    .collect();
                let arch = Architecture::Graph { adjacency, ops };
                if arch.validate(space).is_ok() {
                    return Ok(arch);
                }
            }
            Err(NetError::SamplingExhausted(MAX_REJECTIONS))
        }
        _ => Ok(Architecture::Cell {
            ops: (0..space.edges.len())
                .map(|_| rng.below(space.op_vocab.len()))
                .collect(),
        }),
    }
}

/// One-step mutation: a single edge operator is resampled uniformly among the
/// other operators. Graph architectures flip one adjacency bit or change one
/// vertex operator, retrying until the result is valid.
pub fn mutate(
    arch: &Architecture,
    space: &SearchSpace,
    rng: &mut Rng,
) -> Result<Architecture, NetError> {
    match arch {
        Architecture::Cell { ops } => {
            let k = space.op_vocab.len();
            if k < 2 || ops.is_empty() {
                return Err(NetError::InvalidSpace("nothing to mutate".into()));
            }
            let edge = rng.below(ops.len());
            let mut choice = rng.below(k - 1);
            if choice >= ops[edge] {
                choice += 1;
            }
            let mut ops = ops.clone();
            ops[edge] = choice;
            Ok(Architecture::Cell { ops })
        }
        Architecture::Graph { adjacency, ops } => {
            let k = space.op_vocab.len();
            for _ in 0..MAX_REJECTIONS {
                let mut adjacency = *adjacency;
                let mut ops = ops.clone();
                if k < 2 || rng.bernoulli(0.5) {
                    let (i, j) = space.edges[rng.below(space.edges.len())];
                    adjacency[i][j] = !adjacency[i][j];
                } else {
                    let v = rng.below(ops.len());
                    let mut choice = rng.below(k - 1);
                    if choice >= ops[v] {
                        choice += 1;
                    }
                    ops[v] = choice;
                }
                let cand = Architecture::Graph { adjacency, ops };
                if cand.validate(space).is_ok() {
                    return Ok(cand);
                }
            }
            Err(NetError::SamplingExhausted(MAX_REJECTIONS))
        }
    }
}

/// Edges on the longest input-to-output path, ignoring `none` edges.
/// Zero when the output is unreachable.
pub fn cell_depth(arch: &Architecture, space: &SearchSpace) -> usize {
    let n = space.nodes;
    let edge: Box<dyn Fn(usize, usize) -> bool> = match arch {
        Architecture::Cell { ops } => {
            let mut live = vec![vec![false; n]; n];
            for (k, &(i, j)) in space.edges.iter().enumerate() {
                live[i][j] = space.op_vocab[ops[k]] != Op::None;
            }
            Box::new(move |i, j| live[i][j])
        }
        Architecture::Graph { adjacency, .. } => {
            let adjacency = *adjacency;
            Box::new(move |i, j| adjacency[i][j])
        }
    };
    // longest[j] = longest path length from node 0 to j, None if unreachable
    let mut longest: Vec<Option<usize>> = vec![None; n];
    longest[0] = Some(0);
    for j in 1..n {
        longest[j] = (0..j)
            .filter(|&i| edge(i, j))
            .filter_map(|i| longest[i].map(|d| d + 1))
            .max();
    }
    longest[n - 1].unwrap_or(0)
}

/// Every architecture of an enumerable cell space, in lexicographic order of
/// operator indices.
pub fn enumerate_cells(space: &SearchSpace) -> Result<Vec<Architecture>, NetError> {
    let total = space
        .cardinality()
        .ok_or_else(|| NetError::InvalidSpace("space is not enumerable".into()))?;
    if total > 1_000_000 {
        return Err(NetError::InvalidSpace(format!(
            "{total} architectures is too many to enumerate"
        )));
    }
    let k = space.op_vocab.len();
    let e = space.edges.len();
    Ok((0..total as usize)
        .map(|mut code| {
            let mut ops = vec![0; e];
            for slot in ops.iter_mut().rev() {
                *slot = code % k;
                code /= k;
            }
            Architecture::Cell { ops }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL_SKIP: &str = "|skip_connect~0|+|skip_connect~0|skip_connect~1|+|skip_connect~0|skip_connect~1|skip_connect~2|";

    #[test]
    fn all_skip_string_is_canonical() {
        let space = SearchSpace::cell201();
        let arch = Architecture::uniform_cell(&space, Op::Skip).unwrap();
        assert_eq!(arch.to_string(&space), ALL_SKIP);
        assert_eq!(Architecture::parse(ALL_SKIP, &space).unwrap(), arch);
    }

    #[test]
    fn malformed_delimiter_offset() {
        let space = SearchSpace::cell201();
        match Architecture::parse("|conv~0+|", &space) {
            Err(NetError::Parse(e)) => assert_eq!(e.offset, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_point_at_tokens() {
        let space = SearchSpace::toy();
        let err = |s: &str| match Architecture::parse(s, &space) {
            Err(NetError::Parse(e)) => e.offset,
            other => panic!("{s}: {other:?}"),
        };
        assert_eq!(err(""), 0);
        assert_eq!(err("|bogus~0|+|none~0|none~1|"), 1);
        assert_eq!(err("|none~1|+|none~0|none~1|"), 6);
        assert_eq!(err("|none~0|+|none~0|"), 10);
        assert_eq!(err("|none~0|+|none~0|none~1|x"), 25);
    }

    #[test]
    fn toy_round_trip_all() {
        let space = SearchSpace::toy();
        let all = enumerate_cells(&space).unwrap();
        assert_eq!(all.len(), 27);
        let mut strings: Vec<String> = all.iter().map(|a| a.to_string(&space)).collect();
        for (a, s) in all.iter().zip(&strings) {
            assert_eq!(&Architecture::parse(s, &space).unwrap(), a);
        }
        strings.sort();
        strings.dedup();
        assert_eq!(strings.len(), 27);
    }

    #[test]
    fn depth_examples() {
        let space = SearchSpace::cell201();
        let none = Architecture::uniform_cell(&space, Op::None).unwrap();
        assert_eq!(cell_depth(&none, &space), 0);
        let conv = Architecture::uniform_cell(&space, Op::Conv3x3).unwrap();
        assert_eq!(cell_depth(&conv, &space), 3);
        // chain 0->1->2->3 only
        use Op::*;
        let chain =
            Architecture::cell_from_ops(&space, &[Conv3x3, None, Conv3x3, None, None, Conv3x3])
                .unwrap();
        assert_eq!(cell_depth(&chain, &space), 3);
        let shortcut =
            Architecture::cell_from_ops(&space, &[None, None, None, Conv1x1, None, None]).unwrap();
        assert_eq!(cell_depth(&shortcut, &space), 1);
    }

    #[test]
    fn exhaustive_depth_matches_path_enumeration() {
        // brute force: enumerate every subset path 0 -> ... -> n-1
        let space = SearchSpace::cell201();
        let all = enumerate_cells(&space).unwrap();
        for arch in all.iter().step_by(7) {
            let ops = arch.ops();
            let live = |i: usize, j: usize| {
                let k = space.edges.iter().position(|&e| e == (i, j)).unwrap();
                space.op_vocab[ops[k]] != Op::None
            };
            let mut best = 0;
            for mask in 0u32..4 {
                // intermediate nodes {1, 2} included per mask bit
                let mut path = vec![0];
                for node in 1..3 {
                    if mask & (1 << (node - 1)) != 0 {
                        path.push(node);
                    }
                }
                path.push(3);
                if path.windows(2).all(|w| live(w[0], w[1])) {
                    best = best.max(path.len() - 1);
                }
            }
            assert_eq!(cell_depth(arch, &space), best, "{}", arch.to_string(&space));
        }
    }

    #[test]
    fn mutation_changes_exactly_one_edge() {
        let space = SearchSpace::cell201();
        let mut rng = Rng::new(4);
        for _ in 0..200 {
            let a = random_arch(&space, &mut rng).unwrap();
            let b = mutate(&a, &space, &mut rng).unwrap();
            let diff = a.ops().iter().zip(b.ops()).filter(|(x, y)| x != y).count();
            assert_eq!(diff, 1);
        }
    }

    #[test]
    fn none_to_skip_is_a_single_mutation() {
        let space = SearchSpace::cell201();
        use Op::*;
        let a =
            Architecture::cell_from_ops(&space, &[Conv3x3, None, Conv1x1, Skip, Conv3x3, Conv3x3])
                .unwrap();
        let b =
            Architecture::cell_from_ops(&space, &[Conv3x3, Skip, Conv1x1, Skip, Conv3x3, Conv3x3])
                .unwrap();
        let mut rng = Rng::new(0);
        let reached = (0..500).any(|_| mutate(&a, &space, &mut rng).unwrap() == b);
        assert!(reached);
    }

    #[test]
    fn mutation_walk_covers_toy_space() {
        let space = SearchSpace::toy();
        let mut rng = Rng::new(8);
        let mut seen = std::collections::HashSet::new();
        let mut a = random_arch(&space, &mut rng).unwrap();
        seen.insert(a.clone());
        for _ in 0..10_000 {
            a = mutate(&a, &space, &mut rng).unwrap();
            seen.insert(a.clone());
        }
        assert_eq!(seen.len(), 27);
    }

    #[test]
    fn cell201_sampling_is_uniform() {
        // chi-square over the 15625 cells with 1e5 draws; df = 15624
        let space = SearchSpace::cell201();
        let mut rng = Rng::new(2024);
        let mut counts = vec![0u32; 15625];
        let n = 100_000;
        for _ in 0..n {
            let a = random_arch(&space, &mut rng).unwrap();
            let code = a.ops().iter().fold(0, |c, &o| c * 5 + o);
            counts[code] += 1;
        }
        let expected = n as f64 / 15625.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // Wilson-Hilferty: upper 1% critical value of chi2(15624)
        let df = 15624.0f64;
        let z = 2.3263;
        let crit = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
    }

    #[test]
    fn graph_sampling_respects_constraints() {
        let space = SearchSpace::graph101();
        let mut rng = Rng::new(31);
        for _ in 0..10_000 {
            let a = random_arch(&space, &mut rng).unwrap();
            a.validate(&space).unwrap();
            if let Architecture::Graph { adjacency, .. } = &a {
                assert!(graph_edge_count(adjacency) <= GRAPH_MAX_EDGES);
            }
        }
    }

    #[test]
    fn graph_string_round_trip_and_mutation() {
        let space = SearchSpace::graph101();
        let mut rng = Rng::new(5);
        let mut a = random_arch(&space, &mut rng).unwrap();
        for _ in 0..500 {
            let s = a.to_string(&space);
            assert_eq!(s.split(':').next().unwrap().len(), 28);
            assert_eq!(Architecture::parse(&s, &space).unwrap(), a);
            a = mutate(&a, &space, &mut rng).unwrap();
            a.validate(&space).unwrap();
        }
    }

    #[test]
    fn graph_parse_rejects_bad_bits() {
        let space = SearchSpace::graph101();
        let s = "1".to_string() + &"0".repeat(27) + ":conv1x1:conv1x1:conv1x1:conv1x1:conv1x1";
        match Architecture::parse(&s, &space) {
            Err(NetError::Parse(e)) => assert_eq!(e.offset, 0),
            other => panic!("{other:?}"),
        }
    }
}
