//! Tiling expressions and the raw search space.
//!
//! An expression is a tree over the chain's cross-tile loops: `Nest`
//! nodes nest their child, `Seq` nodes run their children one after the
//! other in the same scope. Deep tilings are pure nests; flat tilings
//! contain at least one `Seq`.
//!
//! The canonical text form concatenates axis names for a nest and writes
//! a `Seq` as parenthesized comma-separated children: `mhnk`, `mn(k,h)`.
//! That exact form is used in CLI output, dedup keys, and golden tests.

use std::collections::BTreeSet;

use itertools::Itertools;

use crate::chain::{AxisId, HardwareSpec, OperatorChain};
use crate::error::{Error, Result};

/// One node of a tiling expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Nest { axis: AxisId, body: Box<Node> },
    Seq(Vec<Node>),
    Leaf,
}

/// A tiling expression over a chain's axes. Each chain axis appears
/// exactly once as a `Nest` node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TilingExpr {
    root: Node,
}

impl TilingExpr {
    pub fn new(root: Node) -> Self {
        TilingExpr { root }
    }

    /// A pure nest over the given axes, outermost first.
    pub fn nest(axes: &[AxisId]) -> Self {
        TilingExpr { root: nest_of(axes, Node::Leaf) }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Deep tiling: no `Seq` node anywhere.
    pub fn is_deep(&self) -> bool {
        !has_seq(&self.root)
    }

    /// Axes in first-appearance order.
    pub fn axes(&self) -> Vec<AxisId> {
        let mut out = Vec::new();
        collect_axes(&self.root, &mut out);
        out
    }

    /// Check that the expression covers each chain axis exactly once.
    pub fn validate(&self, chain: &OperatorChain) -> Result<()> {
        let axes = self.axes();
        let distinct: BTreeSet<AxisId> = axes.iter().copied().collect();
        if axes.len() != distinct.len() || distinct.len() != chain.axes().len() {
            return Err(Error::BadExpression {
                text: self.canonical(chain),
                msg: format!(
                    "expression must use each of the {} chain axes exactly once",
                    chain.axes().len()
                ),
            });
        }
        Ok(())
    }

    /// Canonical text form. Axis names are concatenated when every name in
    /// the chain is a single character, otherwise joined with `.`.
    pub fn canonical(&self, chain: &OperatorChain) -> String {
        let names: Vec<&str> = chain.axes().iter().map(|a| a.name.as_str()).collect();
        self.canonical_with_names(&names)
    }

    pub fn canonical_with_names(&self, names: &[&str]) -> String {
        let sep = if names.iter().all(|n| n.chars().count() == 1) { "" } else { "." };
        let mut out = String::new();
        print_node(&self.root, names, sep, &mut out);
        out
    }

    /// Axes whose loop encloses every statement of the fused region: the
    /// `Nest` nodes not under any `Seq`. In a pure nest that is every axis.
    pub fn dominating_axes(&self) -> Vec<AxisId> {
        let mut out = Vec::new();
        let mut node = &self.root;
        while let Node::Nest { axis, body } = node {
            out.push(*axis);
            node = body;
        }
        out
    }

    /// The loops bound to `blockIdx`: spatial axes of the chain's final
    /// output that dominate every statement. These form the kernel grid.
    pub fn block_axes(&self, chain: &OperatorChain) -> Vec<AxisId> {
        let spatial: BTreeSet<AxisId> =
            chain.tensors()[chain.final_output()].axes.iter().copied().collect();
        self.dominating_axes().into_iter().filter(|a| spatial.contains(a)).collect()
    }

    /// Delete the given axes from the tree, splicing their bodies up.
    pub fn without_axes(&self, drop: &BTreeSet<AxisId>) -> TilingExpr {
        TilingExpr { root: strip(&self.root, drop) }
    }

    /// Parse the canonical text form against a chain's axis names.
    pub fn parse(text: &str, chain: &OperatorChain) -> Result<Self> {
        let mut parser = Parser { text, pos: 0, chain };
        let node = parser.parse_text()?;
        parser.skip_ws();
        if parser.pos != text.len() {
            return Err(parser.err("trailing input"));
        }
        let expr = TilingExpr { root: node };
        expr.validate(chain)?;
        Ok(expr)
    }
}

fn nest_of(axes: &[AxisId], tail: Node) -> Node {
    axes.iter().rev().fold(tail, |body, &axis| Node::Nest { axis, body: Box::new(body) })
}

fn has_seq(node: &Node) -> bool {
    match node {
        Node::Nest { body, .. } => has_seq(body),
        Node::Seq(_) => true,
        Node::Leaf => false,
    }
}

fn collect_axes(node: &Node, out: &mut Vec<AxisId>) {
    match node {
        Node::Nest { axis, body } => {
            out.push(*axis);
            collect_axes(body, out);
        }
        Node::Seq(children) => children.iter().for_each(|c| collect_axes(c, out)),
        Node::Leaf => {}
    }
}

fn print_node(node: &Node, names: &[&str], sep: &str, out: &mut String) {
    match node {
        Node::Nest { axis, body } => {
            if !out.is_empty() && !out.ends_with(['(', ',']) {
                out.push_str(sep);
            }
            out.push_str(names[*axis]);
            print_node(body, names, sep, out);
        }
        Node::Seq(children) => {
            out.push('(');
            for (i, child) in children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                print_node(child, names, sep, out);
            }
            out.push(')');
        }
        Node::Leaf => {}
    }
}

fn strip(node: &Node, drop: &BTreeSet<AxisId>) -> Node {
    match node {
        Node::Nest { axis, body } => {
            let body = strip(body, drop);
            if drop.contains(axis) {
                body
            } else {
                Node::Nest { axis: *axis, body: Box::new(body) }
            }
        }
        Node::Seq(children) => Node::Seq(children.iter().map(|c| strip(c, drop)).collect()),
        Node::Leaf => Node::Leaf,
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    chain: &'a OperatorChain,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::BadExpression {
            text: self.text.to_string(),
            msg: format!("{msg} at offset {}", self.pos),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '.' {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    /// text := (axis | group)+ where a group must be the last element.
    fn parse_text(&mut self) -> Result<Node> {
        let mut axes = Vec::new();
        let mut tail = Node::Leaf;
        loop {
            self.skip_ws();
            match self.peek() {
                Some('(') => {
                    tail = self.parse_group()?;
                    break;
                }
                Some(c) if c == ')' || c == ',' => break,
                Some(_) => axes.push(self.parse_axis()?),
                None => break,
            }
        }
        if axes.is_empty() && matches!(tail, Node::Leaf) {
            return Err(self.err("expected an axis name or a parenthesized group"));
        }
        Ok(nest_of(&axes, tail))
    }

    fn parse_group(&mut self) -> Result<Node> {
        self.pos += 1; // consume '('
        let mut children = vec![self.parse_text()?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    children.push(self.parse_text()?);
                }
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err("expected `,` or `)`")),
            }
        }
        self.skip_ws();
        if matches!(self.peek(), Some(c) if c != ')' && c != ',') {
            return Err(self.err("a group must close its nest; nothing may follow `)`"));
        }
        if children.len() < 2 {
            return Err(self.err("a sequential group needs at least two children"));
        }
        Ok(Node::Seq(children))
    }

    /// Longest-match over the chain's axis names.
    fn parse_axis(&mut self) -> Result<AxisId> {
        let rest = &self.text[self.pos..];
        let mut best: Option<(usize, AxisId)> = None;
        for (id, axis) in self.chain.axes().iter().enumerate() {
            if rest.starts_with(axis.name.as_str())
                && best.is_none_or(|(len, _)| axis.name.len() > len)
            {
                best = Some((axis.name.len(), id));
            }
        }
        match best {
            Some((len, id)) => {
                self.pos += len;
                Ok(id)
            }
            None => Err(self.err("no axis name matches here")),
        }
    }
}

// ---------------------------------------------------------------------------
// Enumeration strategies

/// One way of spanning tiling expressions over a chain. Strategies are
/// looked up by name and selectable at the CLI.
pub trait TilingStrategy: Sync + Send {
    fn name(&self) -> &'static str;

    /// All expressions of this family, in a fixed canonical order.
    fn enumerate(&self, chain: &OperatorChain) -> Vec<TilingExpr>;

    /// Closed-form count of `enumerate(chain).len()`.
    fn count(&self, chain: &OperatorChain) -> u128;
}

/// Deep tiling: every pair of loops nests, giving all `J!` permutations.
pub struct DeepTiling;

impl TilingStrategy for DeepTiling {
    fn name(&self) -> &'static str {
        "deep"
    }

    fn enumerate(&self, chain: &OperatorChain) -> Vec<TilingExpr> {
        let ids: Vec<AxisId> = (0..chain.axes().len()).collect();
        let j = ids.len();
        ids.into_iter().permutations(j).map(|perm| TilingExpr::nest(&perm)).collect()
    }

    fn count(&self, chain: &OperatorChain) -> u128 {
        factorial(chain.axes().len())
    }
}

/// Flat tiling: the shared axes form a nested outer prefix (all
/// orderings); each op's exclusive axes become sibling groups under one
/// `Seq`, in op order, each group a pure nest in every internal order.
/// Expressions without a genuine `Seq` (fewer than two non-empty groups)
/// are not produced; those shapes already live in the deep family.
pub struct FlatTiling;

impl FlatTiling {
    fn groups(chain: &OperatorChain) -> (Vec<AxisId>, Vec<Vec<AxisId>>) {
        let shared: Vec<AxisId> = chain.shared_axes().iter().copied().collect();
        let groups: Vec<Vec<AxisId>> = (0..chain.ops().len())
            .map(|op| {
                chain
                    .axes_of_op(op)
                    .into_iter()
                    .filter(|a| !chain.shared_axes().contains(a))
                    .collect::<Vec<_>>()
            })
            .filter(|g: &Vec<AxisId>| !g.is_empty())
            .collect();
        (shared, groups)
    }
}

impl TilingStrategy for FlatTiling {
    fn name(&self) -> &'static str {
        "flat"
    }

    fn enumerate(&self, chain: &OperatorChain) -> Vec<TilingExpr> {
        let (shared, groups) = Self::groups(chain);
        if groups.len() < 2 {
            return Vec::new();
        }
        let group_orders: Vec<Vec<Vec<AxisId>>> = groups
            .iter()
            .map(|g| g.iter().copied().permutations(g.len()).collect())
            .collect();
        let mut out = Vec::new();
        for prefix in shared.iter().copied().permutations(shared.len()) {
            for combo in group_orders.iter().multi_cartesian_product() {
                let seq = Node::Seq(combo.iter().map(|g| nest_of(g, Node::Leaf)).collect());
                out.push(TilingExpr { root: nest_of(&prefix, seq) });
            }
        }
        out
    }

    fn count(&self, chain: &OperatorChain) -> u128 {
        let (shared, groups) = Self::groups(chain);
        if groups.len() < 2 {
            return 0;
        }
        factorial(shared.len()) * groups.iter().map(|g| factorial(g.len())).product::<u128>()
    }
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// The built-in strategies in canonical enumeration order.
pub fn builtin_strategies() -> Vec<Box<dyn TilingStrategy>> {
    vec![Box::new(DeepTiling), Box::new(FlatTiling)]
}

pub fn strategy_by_name(name: &str) -> Option<Box<dyn TilingStrategy>> {
    match name {
        "deep" => Some(Box::new(DeepTiling)),
        "flat" => Some(Box::new(FlatTiling)),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Tile sizes

/// A tile size per chain axis, in elements. Sizes are multiples of the
/// hardware's `min_tile` and never exceed the axis size rounded up to a
/// `min_tile` multiple. The trip count of an axis is `ceil(size / tile)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TileSizes {
    sizes: Vec<u64>,
}

impl TileSizes {
    pub fn new(sizes: Vec<u64>) -> Self {
        TileSizes { sizes }
    }

    /// A representative probe tile for classification: every axis tiled at
    /// `cap`, clamped to the axis size rounded up to a `min_tile` multiple.
    pub fn probe(chain: &OperatorChain, hw: &HardwareSpec, cap: u64) -> Self {
        let base = cap.next_multiple_of(hw.min_tile);
        TileSizes {
            sizes: chain
                .axes()
                .iter()
                .map(|a| base.min(a.size.next_multiple_of(hw.min_tile)))
                .collect(),
        }
    }

    /// Build from `(axis name, tile)` pairs; every axis must be covered.
    pub fn from_pairs(chain: &OperatorChain, pairs: &[(String, u64)]) -> Result<Self> {
        let mut sizes = vec![0u64; chain.axes().len()];
        for (name, tile) in pairs {
            let id = chain.axis_id(name).ok_or_else(|| Error::UnknownAxis {
                name: name.clone(),
                context: "tile list".to_string(),
            })?;
            sizes[id] = *tile;
        }
        for (id, &size) in sizes.iter().enumerate() {
            if size == 0 {
                return Err(Error::MissingTile { axis: chain.axis_name(id).to_string() });
            }
        }
        Ok(TileSizes { sizes })
    }

    pub fn get(&self, axis: AxisId) -> u64 {
        self.sizes[axis]
    }

    pub fn set(&mut self, axis: AxisId, tile: u64) {
        self.sizes[axis] = tile;
    }

    /// Number of tiles along an axis.
    pub fn trip_count(&self, chain: &OperatorChain, axis: AxisId) -> u64 {
        chain.axes()[axis].size.div_ceil(self.sizes[axis])
    }

    /// Check multiples-of-`min_tile` and the padded-size cap.
    pub fn check_legal(&self, chain: &OperatorChain, hw: &HardwareSpec) -> Result<()> {
        for (id, axis) in chain.axes().iter().enumerate() {
            let tile = self.sizes[id];
            let cap = axis.size.next_multiple_of(hw.min_tile);
            if tile == 0 || !tile.is_multiple_of(hw.min_tile) {
                return Err(Error::IllegalTile {
                    axis: axis.name.clone(),
                    size: axis.size,
                    tile,
                    msg: format!("must be a positive multiple of {}", hw.min_tile),
                });
            }
            if tile > cap {
                return Err(Error::IllegalTile {
                    axis: axis.name.clone(),
                    size: axis.size,
                    tile,
                    msg: format!("exceeds the padded dimension {cap}"),
                });
            }
        }
        Ok(())
    }

    pub fn render(&self, chain: &OperatorChain) -> String {
        self.sizes
            .iter()
            .enumerate()
            .map(|(id, t)| format!("{}={}", chain.axis_name(id), t))
            .join(",")
    }
}

/// Legal tile sizes for one axis: `min_tile, 2·min_tile, …` up to the
/// axis size rounded up to a multiple of `min_tile`.
pub fn axis_tile_options(size: u64, min_tile: u64) -> Vec<u64> {
    (1..=size.div_ceil(min_tile)).map(|i| i * min_tile).collect()
}

/// Lazily enumerate the Cartesian product of per-axis tile options. The
/// first axis varies slowest.
pub fn enumerate_tile_sizes<'c>(
    chain: &'c OperatorChain,
    hw: &HardwareSpec,
) -> impl Iterator<Item = TileSizes> + 'c {
    let options: Vec<Vec<u64>> =
        chain.axes().iter().map(|a| axis_tile_options(a.size, hw.min_tile)).collect();
    options.into_iter().multi_cartesian_product().map(TileSizes::new)
}

/// Closed-form count of tile-size vectors.
pub fn tile_vector_count(chain: &OperatorChain, hw: &HardwareSpec) -> u128 {
    chain.axes().iter().map(|a| u128::from(a.size.div_ceil(hw.min_tile))).product()
}

/// One point of the raw search space.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub expr: TilingExpr,
    pub tiles: TileSizes,
}

/// Raw space size: (deep + flat expressions) × tile-size vectors.
pub fn space_size(
    chain: &OperatorChain,
    hw: &HardwareSpec,
    strategies: &[Box<dyn TilingStrategy>],
) -> u128 {
    let exprs: u128 = strategies.iter().map(|s| s.count(chain)).sum();
    exprs * tile_vector_count(chain, hw)
}

/// The raw candidate stream, expression-major. Never materialized; raw
/// spaces reach 10^8 points.
pub fn candidates<'c>(
    chain: &'c OperatorChain,
    hw: &'c HardwareSpec,
    strategies: &[Box<dyn TilingStrategy>],
) -> impl Iterator<Item = Candidate> + 'c {
    let exprs: Vec<TilingExpr> =
        strategies.iter().flat_map(|s| s.enumerate(chain)).collect();
    exprs.into_iter().flat_map(move |expr| {
        enumerate_tile_sizes(chain, hw)
            .map(move |tiles| Candidate { expr: expr.clone(), tiles })
    })
}
