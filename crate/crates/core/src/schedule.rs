//! Candidate expansion and memory-statement placement.
//!
//! A candidate (tiling expression + tile sizes) expands into a loop
//! skeleton holding `Load`, `Compute`, and `Store` statements. Two kinds
//! of dependency govern placement: a *scope* dependency ties a statement
//! to every live loop whose axis indexes its operand tiles, and an
//! *order* dependency sequences producers before consumers. Within those
//! constraints, memory statements sink to their rightmost (innermost)
//! related loop, escaping unrelated loops and their trip counts; loops
//! whose trip count is 1 are dead and removed outright, which lets
//! statements migrate further out.
//!
//! Spatial axes of the chain's final output that enclose every statement
//! are bound to `blockIdx` and launched as the kernel grid; they are
//! normalized to the outermost positions of the skeleton.

use std::collections::BTreeSet;

use crate::chain::{AxisId, OperatorChain, OpId, Storage, TensorId};
use crate::error::{Error, Result};
use crate::expr::{Candidate, Node};

pub type StmtId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StmtKind {
    Load,
    Compute,
    Store,
}

/// One primitive statement. `tile_bytes` is the moved tile in bytes for
/// memory statements; `tile_flops` the work of one compute execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub kind: StmtKind,
    /// The moved tensor for Load/Store; the op's output for Compute.
    pub tensor: TensorId,
    /// The op this statement belongs to.
    pub op: OpId,
    pub tile_bytes: u64,
    pub tile_flops: u64,
    /// Axes indexing this statement's operand tiles.
    pub related: BTreeSet<AxisId>,
    /// Tensors whose tiles this statement touches (for residency tracking).
    pub touched: Vec<TensorId>,
    /// Display label: `L_A`, `C_C`, `S_E`.
    pub label: String,
}

/// Per-tensor data carried with the schedule so later stages need no
/// chain reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorMeta {
    pub name: String,
    /// Tile footprint in bytes: product of tile sizes over the tensor's
    /// axes times the element size.
    pub footprint_bytes: u64,
    pub axes: Vec<AxisId>,
    /// Reduction axes of the op producing this tensor (empty for pure
    /// inputs); a live one enclosing the producer keeps multiple partial
    /// tiles resident.
    pub producer_reductions: Vec<AxisId>,
    pub intermediate: bool,
}

/// A loop's scope: the enclosing live loop axis, or `None` at root.
pub type Scope = Option<AxisId>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Item {
    Loop(AxisId),
    Stmt(StmtId),
}

/// A candidate with every statement placed. Placement maps each statement
/// to the loop body it executes in and a position among its siblings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledCandidate {
    pub candidate: Candidate,
    /// Spatial output axes bound to blockIdx, outermost first.
    pub block_axes: Vec<AxisId>,
    pub statements: Vec<Statement>,
    /// Producer-before-consumer edges between statements.
    pub order_edges: Vec<(StmtId, StmtId)>,
    pub tensor_meta: Vec<TensorMeta>,
    axis_names: Vec<String>,
    /// Trip count per axis (`ceil(size / tile)`), dead loops included.
    extents: Vec<u64>,
    /// Per axis: `Some(scope)` while the loop is live.
    loop_parent: Vec<Option<Scope>>,
    /// Per axis: body of the loop (meaningful only while live).
    bodies: Vec<Vec<Item>>,
    root_body: Vec<Item>,
    /// Per statement: the body it was placed in.
    scopes: Vec<Scope>,
}

/// Expand a candidate: build the loop skeleton (grid axes outermost) and
/// give every statement its default placement — each Compute directly
/// inside its innermost related loop, Loads just before it and the Store
/// just after it at the same scope.
pub fn expand(candidate: &Candidate, chain: &OperatorChain) -> Result<ScheduledCandidate> {
    candidate.expr.validate(chain)?;
    let mut sched = build_statements(candidate, chain)?;
    place(&mut sched, Placement::Default)?;
    Ok(sched)
}

/// Relocate every memory statement to its innermost live related loop,
/// as early (Load) or late (Store) among siblings as order edges allow.
/// Computes migrate out of unrelated live loops the same way. Idempotent;
/// structural trip counts never increase.
pub fn hoist(sched: &ScheduledCandidate) -> ScheduledCandidate {
    let mut out = sched.clone();
    out.rebuild_skeleton();
    place(&mut out, Placement::Hoisted).expect("hoisting an expanded schedule cannot fail");
    out
}

/// Delete every loop with trip count 1, then re-hoist so statements
/// migrate outward through the vacated scopes.
pub fn eliminate_dead_loops(sched: &ScheduledCandidate) -> ScheduledCandidate {
    let mut out = sched.clone();
    for axis in 0..out.extents.len() {
        if out.extents[axis] <= 1 {
            out.loop_parent[axis] = None;
        }
    }
    out.rebuild_skeleton();
    place(&mut out, Placement::Hoisted).expect("elimination keeps every related loop placeable");
    out
}

/// Full pipeline: expand, hoist, eliminate dead loops.
pub fn schedule(candidate: &Candidate, chain: &OperatorChain) -> Result<ScheduledCandidate> {
    Ok(eliminate_dead_loops(&hoist(&expand(candidate, chain)?)))
}

#[derive(Clone, Copy, PartialEq)]
enum Placement {
    /// Memory statements at their compute's scope.
    Default,
    /// Every statement at its own innermost live related loop.
    Hoisted,
}

fn build_statements(candidate: &Candidate, chain: &OperatorChain) -> Result<ScheduledCandidate> {
    let tiles = &candidate.tiles;
    let footprint = |t: TensorId| -> u64 {
        let tensor = &chain.tensors()[t];
        tensor.axes.iter().map(|&a| tiles.get(a)).product::<u64>() * tensor.dtype_bytes
    };

    let tensor_meta: Vec<TensorMeta> = chain
        .tensors()
        .iter()
        .enumerate()
        .map(|(t, tensor)| TensorMeta {
            name: tensor.name.clone(),
            footprint_bytes: footprint(t),
            axes: tensor.axes.clone(),
            producer_reductions: chain
                .producer_of(t)
                .map(|op| chain.reduction_axes(op).into_iter().collect())
                .unwrap_or_default(),
            intermediate: tensor.storage == Storage::Intermediate,
        })
        .collect();

    let mut statements = Vec::new();
    let mut order_edges = Vec::new();
    let mut compute_of: Vec<StmtId> = Vec::new();
    let multi_loaded = |t: TensorId| {
        chain.ops().iter().filter(|op| op.inputs.contains(&t)).count() > 1
            && chain.tensors()[t].storage == Storage::External
    };

    for (op_id, op) in chain.ops().iter().enumerate() {
        let mut load_ids = Vec::new();
        for &input in &op.inputs {
            if chain.tensors()[input].storage == Storage::External {
                let mut label = format!("L_{}", chain.tensors()[input].name);
                if multi_loaded(input) {
                    label.push('@');
                    label.push_str(&op.name);
                }
                load_ids.push(statements.len());
                statements.push(Statement {
                    kind: StmtKind::Load,
                    tensor: input,
                    op: op_id,
                    tile_bytes: footprint(input),
                    tile_flops: 0,
                    related: chain.tensors()[input].axes.iter().copied().collect(),
                    touched: vec![input],
                    label,
                });
            }
        }
        let related = chain.axes_of_op(op_id);
        let tile_flops =
            op.flops_per_point * related.iter().map(|&a| tiles.get(a)).product::<u64>();
        let compute_id = statements.len();
        let mut touched = vec![op.output];
        touched.extend(op.inputs.iter().copied());
        statements.push(Statement {
            kind: StmtKind::Compute,
            tensor: op.output,
            op: op_id,
            tile_bytes: 0,
            tile_flops,
            related,
            touched,
            label: format!("C_{}", chain.tensors()[op.output].name),
        });
        compute_of.push(compute_id);
        for load in load_ids {
            order_edges.push((load, compute_id));
        }
        for &input in &op.inputs {
            if let Some(producer) = chain.producer_of(input) {
                order_edges.push((compute_of[producer], compute_id));
            }
        }
        if chain.tensors()[op.output].storage == Storage::External {
            let store_id = statements.len();
            statements.push(Statement {
                kind: StmtKind::Store,
                tensor: op.output,
                op: op_id,
                tile_bytes: footprint(op.output),
                tile_flops: 0,
                related: chain.tensors()[op.output].axes.iter().copied().collect(),
                touched: vec![op.output],
                label: format!("S_{}", chain.tensors()[op.output].name),
            });
            order_edges.push((compute_id, store_id));
        }
    }

    let n_axes = chain.axes().len();
    let mut sched = ScheduledCandidate {
        block_axes: candidate.expr.block_axes(chain),
        candidate: candidate.clone(),
        statements,
        order_edges,
        tensor_meta,
        axis_names: chain.axes().iter().map(|a| a.name.clone()).collect(),
        extents: (0..n_axes).map(|a| tiles.trip_count(chain, a)).collect(),
        loop_parent: vec![Some(None); n_axes],
        bodies: vec![Vec::new(); n_axes],
        root_body: Vec::new(),
        scopes: Vec::new(),
    };
    sched.rebuild_skeleton();
    Ok(sched)
}

impl ScheduledCandidate {
    /// Rebuild the loop skeleton from the expression: live block axes as
    /// an outermost nest, then the remaining structure with block and
    /// dead axes spliced out. Clears all statement placements.
    fn rebuild_skeleton(&mut self) {
        let live: Vec<bool> = self.loop_parent.iter().map(Option::is_some).collect();
        for body in &mut self.bodies {
            body.clear();
        }
        self.root_body.clear();
        self.scopes.clear();

        let mut scope: Scope = None;
        for axis in self.block_axes.clone() {
            if live[axis] {
                self.open_loop(axis, &mut scope);
            }
        }
        let block: BTreeSet<AxisId> = self.block_axes.iter().copied().collect();
        let in_block = self.candidate.expr.without_axes(&block);
        self.walk_skeleton(in_block.root().clone(), scope, &live);
    }

    fn open_loop(&mut self, axis: AxisId, scope: &mut Scope) {
        self.loop_parent[axis] = Some(*scope);
        self.body_mut(*scope).push(Item::Loop(axis));
        *scope = Some(axis);
    }

    fn walk_skeleton(&mut self, node: Node, scope: Scope, live: &[bool]) {
        match node {
            Node::Nest { axis, body } => {
                let mut inner = scope;
                if live[axis] {
                    self.open_loop(axis, &mut inner);
                } else {
                    self.loop_parent[axis] = None;
                }
                self.walk_skeleton(*body, inner, live);
            }
            Node::Seq(children) => {
                for child in children {
                    self.walk_skeleton(child, scope, live);
                }
            }
            Node::Leaf => {}
        }
    }

    fn body(&self, scope: Scope) -> &Vec<Item> {
        match scope {
            None => &self.root_body,
            Some(axis) => &self.bodies[axis],
        }
    }

    fn body_mut(&mut self, scope: Scope) -> &mut Vec<Item> {
        match scope {
            None => &mut self.root_body,
            Some(axis) => &mut self.bodies[axis],
        }
    }

    pub fn is_live(&self, axis: AxisId) -> bool {
        self.loop_parent[axis].is_some()
    }

    pub fn extent(&self, axis: AxisId) -> u64 {
        self.extents[axis]
    }

    pub fn axis_name(&self, axis: AxisId) -> &str {
        &self.axis_names[axis]
    }

    /// Loop axes from root down to (and including) the given scope.
    pub fn scope_path(&self, scope: Scope) -> Vec<AxisId> {
        let mut path = Vec::new();
        let mut cur = scope;
        while let Some(axis) = cur {
            path.push(axis);
            cur = self.loop_parent[axis].expect("scope paths only visit live loops");
        }
        path.reverse();
        path
    }

    pub fn stmt_scope(&self, stmt: StmtId) -> Scope {
        self.scopes[stmt]
    }

    /// Whether live loop `outer` strictly encloses live loop `inner`.
    pub fn loop_encloses(&self, outer: AxisId, inner: AxisId) -> bool {
        outer != inner
            && self.is_live(outer)
            && self.is_live(inner)
            && self.scope_path(Some(inner)).contains(&outer)
    }

    /// The candidate's expression in canonical text form.
    pub fn expr_string(&self) -> String {
        let names: Vec<&str> = self.axis_names.iter().map(String::as_str).collect();
        self.candidate.expr.canonical_with_names(&names)
    }

    /// The candidate's tile sizes as `axis=tile` pairs.
    pub fn tiles_string(&self) -> String {
        self.axis_names
            .iter()
            .enumerate()
            .map(|(a, name)| format!("{name}={}", self.candidate.tiles.get(a)))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Product of enclosing-loop extents: how often the statement runs.
    pub fn trip_count(&self, stmt: StmtId) -> u128 {
        self.scope_path(self.scopes[stmt])
            .iter()
            .map(|&a| u128::from(self.extents[a]))
            .product()
    }

    /// Grid size: product of blockIdx-bound trip counts.
    pub fn n_blocks(&self) -> u64 {
        self.block_axes.iter().map(|&a| self.extents[a]).product()
    }

    /// The innermost live related loop of a statement, if any.
    fn hoisted_scope(&self, stmt: StmtId) -> Result<Scope> {
        let related: Vec<AxisId> = self.statements[stmt]
            .related
            .iter()
            .copied()
            .filter(|&a| self.is_live(a))
            .collect();
        let Some(&first) = related.first() else {
            return Ok(None);
        };
        let mut deepest = first;
        let mut best_depth = self.scope_path(Some(first)).len();
        for &axis in &related[1..] {
            let depth = self.scope_path(Some(axis)).len();
            if depth > best_depth {
                deepest = axis;
                best_depth = depth;
            }
        }
        let path: BTreeSet<AxisId> = self.scope_path(Some(deepest)).into_iter().collect();
        if related.iter().any(|a| !path.contains(a)) {
            return Err(Error::UnplaceableStatement {
                stmt: self.statements[stmt].label.clone(),
            });
        }
        Ok(Some(deepest))
    }

    /// Canonical one-line rendering: nest chains concatenate axis names,
    /// bodies are parenthesized comma-separated items, statements print
    /// as their labels (`mh(n(k(L_A,L_B,C_C),L_D,C_E),S_E)`).
    pub fn compact_string(&self) -> String {
        let sep = if self.axis_names.iter().all(|n| n.chars().count() == 1) { "" } else { "." };
        self.render_body(&self.root_body, sep)
    }

    fn render_body(&self, body: &[Item], sep: &str) -> String {
        body.iter()
            .map(|item| match item {
                Item::Stmt(s) => self.statements[*s].label.clone(),
                Item::Loop(axis) => {
                    let mut names = self.axis_names[*axis].clone();
                    let mut inner = &self.bodies[*axis];
                    while let [Item::Loop(next)] = inner.as_slice() {
                        names.push_str(sep);
                        names.push_str(&self.axis_names[*next]);
                        inner = &self.bodies[*next];
                    }
                    format!("{names}({})", self.render_body(inner, sep))
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// The scope/order dependency DAG over live loops and statements.
    pub fn dag(&self) -> ScheduleDag {
        let mut loops = Vec::new();
        self.collect_loops(&self.root_body, &mut loops);
        let mut scope_edges = Vec::new();
        for &(axis, _) in &loops {
            for (stmt, s) in self.statements.iter().enumerate() {
                if s.related.contains(&axis) {
                    scope_edges.push((axis, stmt));
                }
            }
        }
        ScheduleDag { loops, scope_edges, order_edges: self.order_edges.clone() }
    }

    fn collect_loops(&self, body: &[Item], out: &mut Vec<(AxisId, u64)>) {
        for item in body {
            if let Item::Loop(axis) = item {
                out.push((*axis, self.extents[*axis]));
                self.collect_loops(&self.bodies[*axis], out);
            }
        }
    }

    fn document_positions(&self, body: &[Item], position: &mut [usize], next: &mut usize) {
        for item in body {
            match item {
                Item::Stmt(s) => {
                    position[*s] = *next;
                    *next += 1;
                }
                Item::Loop(axis) => {
                    self.document_positions(&self.bodies[*axis], position, next);
                }
            }
        }
    }

    /// Line-oriented DAG dump for golden tests.
    pub fn dag_dump(&self) -> String {
        let dag = self.dag();
        let mut out = String::new();
        for (axis, extent) in &dag.loops {
            out.push_str(&format!("node loop {} extent={}\n", self.axis_names[*axis], extent));
        }
        for s in &self.statements {
            out.push_str(&format!("node stmt {}\n", s.label));
        }
        for (axis, stmt) in &dag.scope_edges {
            out.push_str(&format!(
                "scope-edge {} {}\n",
                self.axis_names[*axis], self.statements[*stmt].label
            ));
        }
        for (from, to) in &dag.order_edges {
            out.push_str(&format!(
                "order-edge {} {}\n",
                self.statements[*from].label, self.statements[*to].label
            ));
        }
        out
    }

    /// Lower to a self-contained loop-nest program for the simulator and
    /// the emitter. BlockIdx-bound loops are annotated.
    pub fn lower(&self) -> LoopNest {
        let items = self.lower_body(&self.root_body);
        LoopNest {
            items,
            stmts: self
                .statements
                .iter()
                .map(|s| LoweredStmt {
                    kind: s.kind,
                    label: s.label.clone(),
                    tensor: s.tensor,
                    tile_bytes: s.tile_bytes,
                    tile_flops: s.tile_flops,
                    touched: s.touched.clone(),
                })
                .collect(),
            tensors: self
                .tensor_meta
                .iter()
                .map(|t| LoweredTensor {
                    name: t.name.clone(),
                    footprint_bytes: t.footprint_bytes,
                    axes: t.axes.iter().copied().filter(|&a| self.is_live(a)).collect(),
                    producer_reductions: t
                        .producer_reductions
                        .iter()
                        .copied()
                        .filter(|&a| self.is_live(a))
                        .collect(),
                })
                .collect(),
            axes: self
                .axis_names
                .iter()
                .enumerate()
                .map(|(a, name)| NestAxis {
                    name: name.clone(),
                    extent: self.extents[a],
                    block: self.block_axes.contains(&a),
                })
                .collect(),
            n_blocks: self.n_blocks(),
        }
    }

    fn lower_body(&self, body: &[Item]) -> Vec<NestItem> {
        body.iter()
            .map(|item| match item {
                Item::Stmt(s) => NestItem::Stmt(*s),
                Item::Loop(axis) => NestItem::Loop {
                    axis: *axis,
                    extent: self.extents[*axis],
                    body: self.lower_body(&self.bodies[*axis]),
                },
            })
            .collect()
    }
}

/// Nodes reachable from each node over the given edges.
fn transitive_reach(
    n: usize,
    edges: impl Iterator<Item = (StmtId, StmtId)> + Clone,
) -> Vec<Vec<StmtId>> {
    (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            while let Some(node) = stack.pop() {
                for (from, to) in edges.clone() {
                    if from == node && !seen[to] {
                        seen[to] = true;
                        stack.push(to);
                    }
                }
            }
            (0..n).filter(|&s| seen[s]).collect()
        })
        .collect()
}

/// Scope- and order-dependency view of a schedule.
#[derive(Debug, Clone)]
pub struct ScheduleDag {
    /// Live loops in depth-first order with their extents.
    pub loops: Vec<(AxisId, u64)>,
    /// Loop-to-statement scope dependencies.
    pub scope_edges: Vec<(AxisId, StmtId)>,
    /// Statement-to-statement order dependencies.
    pub order_edges: Vec<(StmtId, StmtId)>,
}

// ---------------------------------------------------------------------------
// Placement

fn place(sched: &mut ScheduledCandidate, mode: Placement) -> Result<()> {
    let n = sched.statements.len();
    // Tentative scopes first: the innermost related live loop, or the
    // compute's for default-mode memory statements.
    let mut scopes: Vec<Scope> = Vec::with_capacity(n);
    for stmt in 0..n {
        let scope = match (mode, sched.statements[stmt].kind) {
            (Placement::Hoisted, _) | (Placement::Default, StmtKind::Compute) => {
                sched.hoisted_scope(stmt)?
            }
            (Placement::Default, _) => {
                let compute = (0..n)
                    .find(|&c| {
                        sched.statements[c].kind == StmtKind::Compute
                            && sched.statements[c].op == sched.statements[stmt].op
                    })
                    .expect("every op has a compute statement");
                sched.hoisted_scope(compute)?
            }
        };
        scopes.push(scope);
    }

    let mut path_sets: Vec<BTreeSet<AxisId>> = (0..n)
        .map(|stmt| sched.scope_path(scopes[stmt]).into_iter().collect())
        .collect();
    // Transitive closures: a statement must sit after everything reachable
    // into it and before everything reachable from it, or chains through
    // yet-unplaced statements would let it drift past a consumer's loop.
    let succs = transitive_reach(n, sched.order_edges.iter().copied());
    let preds = transitive_reach(n, sched.order_edges.iter().map(|&(a, b)| (b, a)));

    // Chain order with compute first anchors every op's group: loads
    // insert just before the item holding their compute, the store just
    // after it.
    let kind_rank = |k: StmtKind| match k {
        StmtKind::Compute => 0,
        StmtKind::Load => 1,
        StmtKind::Store => 2,
    };
    let mut order: Vec<StmtId> = (0..n).collect();
    order.sort_by_key(|&s| (sched.statements[s].op, kind_rank(sched.statements[s].kind), s));
    for stmt in order {
        let mut scope = scopes[stmt];
        let pos = loop {
            // An item holds a (possibly not yet placed) statement `t`
            // when it is `t` itself or a loop on the path to t's scope.
            let holds = |item: &Item, t: StmtId| match item {
                Item::Stmt(s) => *s == t,
                Item::Loop(axis) => path_sets[t].contains(axis),
            };
            let body = sched.body(scope);
            let lo = body
                .iter()
                .rposition(|item| preds[stmt].iter().any(|&t| holds(item, t)))
                .map_or(0, |i| i + 1);
            let hi = body
                .iter()
                .position(|item| succs[stmt].iter().any(|&t| holds(item, t)))
                .unwrap_or(body.len());
            if lo <= hi {
                break match sched.statements[stmt].kind {
                    StmtKind::Store => lo,
                    StmtKind::Load | StmtKind::Compute => hi,
                };
            }
            // Empty window: when one loop subtree holds both a
            // predecessor and a successor, the statement must execute
            // inside it even though the loop is unrelated; sink and
            // retry. Anything else cannot be sequenced.
            match body.get(hi) {
                Some(Item::Loop(axis)) if lo - 1 == hi => scope = Some(*axis),
                _ => {
                    return Err(Error::OrderViolation {
                        stmt: sched.statements[stmt].label.clone(),
                    })
                }
            }
        };
        if scope != scopes[stmt] {
            scopes[stmt] = scope;
            path_sets[stmt] = sched.scope_path(scope).into_iter().collect();
        }
        sched.body_mut(scope).insert(pos, Item::Stmt(stmt));
    }
    sched.scopes = scopes;

    // Execution order must respect every order edge; expressions whose
    // sequential groups run consumers ahead of producers fail here.
    let mut position = vec![usize::MAX; n];
    let mut next = 0usize;
    let root = std::mem::take(&mut sched.root_body);
    sched.document_positions(&root, &mut position, &mut next);
    sched.root_body = root;
    for &(from, to) in &sched.order_edges {
        if position[from] >= position[to] {
            return Err(Error::OrderViolation {
                stmt: sched.statements[to].label.clone(),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Lowered form

/// A concrete, self-contained loop-nest program.
#[derive(Debug, Clone)]
pub struct LoopNest {
    pub items: Vec<NestItem>,
    pub stmts: Vec<LoweredStmt>,
    pub tensors: Vec<LoweredTensor>,
    pub axes: Vec<NestAxis>,
    pub n_blocks: u64,
}

#[derive(Debug, Clone)]
pub enum NestItem {
    Loop { axis: AxisId, extent: u64, body: Vec<NestItem> },
    Stmt(StmtId),
}

#[derive(Debug, Clone)]
pub struct LoweredStmt {
    pub kind: StmtKind,
    pub label: String,
    pub tensor: TensorId,
    pub tile_bytes: u64,
    pub tile_flops: u64,
    pub touched: Vec<TensorId>,
}

#[derive(Debug, Clone)]
pub struct LoweredTensor {
    pub name: String,
    pub footprint_bytes: u64,
    /// Live axes indexing the tensor.
    pub axes: Vec<AxisId>,
    /// Live reduction axes of the producing op.
    pub producer_reductions: Vec<AxisId>,
}

#[derive(Debug, Clone)]
pub struct NestAxis {
    pub name: String,
    pub extent: u64,
    pub block: bool,
}
