//! Operator-chain IR: loop axes, tensors, contraction ops, hardware
//! descriptions, and the compute-to-traffic ratio that decides whether a
//! chain is memory-bound.
//!
//! A chain is a linear sequence of contraction ops connected through
//! intermediate tensors. Everything here is immutable after construction
//! and freely shared across workers.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an axis in [`OperatorChain::axes`].
pub type AxisId = usize;
/// Index of a tensor in [`OperatorChain::tensors`].
pub type TensorId = usize;
/// Index of an op in [`OperatorChain::ops`].
pub type OpId = usize;

/// A cross-tile loop axis. The extent is in elements; whether the axis is
/// spatial or a reduction is a per-op property (an axis indexing an op's
/// output is spatial for it, an axis indexing only inputs is a reduction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimAxis {
    pub name: String,
    pub size: u64,
}

/// Where a tensor lives: `External` tensors are read from / written to
/// global memory, `Intermediate` tensors exist only inside the fused
/// region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Storage {
    External,
    Intermediate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorRef {
    pub name: String,
    pub axes: Vec<AxisId>,
    pub dtype_bytes: u64,
    pub storage: Storage,
}

/// One contraction: `output[spatial axes] += f(inputs)` with an implicit
/// sum over axes that appear only on the input side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionOp {
    pub name: String,
    pub output: TensorId,
    pub inputs: Vec<TensorId>,
    pub flops_per_point: u64,
}

/// A validated chain of contraction ops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorChain {
    axes: Vec<DimAxis>,
    tensors: Vec<TensorRef>,
    ops: Vec<ContractionOp>,
    shared_axes: BTreeSet<AxisId>,
}

/// Hardware description: memory bandwidth `W`, peak throughput `P`, SM
/// count, the per-block shared-memory cap, and the tile-size granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareSpec {
    pub bandwidth_bytes_per_s: f64,
    pub peak_flops_per_s: f64,
    pub num_sm: u64,
    pub shm_max_bytes: u64,
    #[serde(default = "default_min_tile")]
    pub min_tile: u64,
}

fn default_min_tile() -> u64 {
    16
}

impl HardwareSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let hw: HardwareSpec = serde_json::from_str(text).map_err(json_err)?;
        hw.validate()?;
        Ok(hw)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Error::BadHardware { msg: msg.to_string() };
        if self.bandwidth_bytes_per_s <= 0.0 || !self.bandwidth_bytes_per_s.is_finite() {
            return Err(bad("bandwidth_bytes_per_s must be positive"));
        }
        if self.peak_flops_per_s <= 0.0 || !self.peak_flops_per_s.is_finite() {
            return Err(bad("peak_flops_per_s must be positive"));
        }
        if self.num_sm == 0 {
            return Err(bad("num_sm must be positive"));
        }
        if self.shm_max_bytes == 0 {
            return Err(bad("shm_max_bytes must be positive"));
        }
        if self.min_tile == 0 {
            return Err(bad("min_tile must be positive"));
        }
        Ok(())
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Syntax { line: e.line(), column: e.column(), msg: e.to_string() }
}

// ---------------------------------------------------------------------------
// Chain file format

#[derive(Serialize, Deserialize)]
struct ChainFile {
    axes: Vec<AxisDecl>,
    tensors: Vec<TensorDecl>,
    ops: Vec<OpDecl>,
}

#[derive(Serialize, Deserialize)]
struct AxisDecl {
    name: String,
    size: u64,
}

#[derive(Serialize, Deserialize)]
struct TensorDecl {
    name: String,
    axes: Vec<String>,
    dtype_bytes: u64,
    storage: Storage,
}

#[derive(Serialize, Deserialize)]
struct OpDecl {
    name: String,
    output: String,
    inputs: Vec<String>,
    equation: String,
    #[serde(default = "default_fpp")]
    flops_per_point: u64,
}

fn default_fpp() -> u64 {
    2
}

/// Parse and validate a chain-description document.
pub fn parse_chain(text: &str) -> Result<OperatorChain> {
    let file: ChainFile = serde_json::from_str(text).map_err(json_err)?;
    OperatorChain::from_file(file)
}

impl OperatorChain {
    fn from_file(file: ChainFile) -> Result<Self> {
        let mut axis_ids: HashMap<String, AxisId> = HashMap::new();
        let mut axes = Vec::new();
        for decl in file.axes {
            if decl.size == 0 {
                return Err(Error::BadAxisSize { name: decl.name, size: decl.size });
            }
            if axis_ids.insert(decl.name.clone(), axes.len()).is_some() {
                return Err(Error::DuplicateName { kind: "axis", name: decl.name });
            }
            axes.push(DimAxis { name: decl.name, size: decl.size });
        }

        let mut tensor_ids: HashMap<String, TensorId> = HashMap::new();
        let mut tensors = Vec::new();
        for decl in file.tensors {
            if decl.dtype_bytes == 0 {
                return Err(Error::BadDtype { name: decl.name });
            }
            let mut ids = Vec::with_capacity(decl.axes.len());
            for ax in &decl.axes {
                let id = axis_ids.get(ax).copied().ok_or_else(|| Error::UnknownAxis {
                    name: ax.clone(),
                    context: format!("tensor `{}`", decl.name),
                })?;
                ids.push(id);
            }
            if tensor_ids.insert(decl.name.clone(), tensors.len()).is_some() {
                return Err(Error::DuplicateName { kind: "tensor", name: decl.name });
            }
            tensors.push(TensorRef {
                name: decl.name,
                axes: ids,
                dtype_bytes: decl.dtype_bytes,
                storage: decl.storage,
            });
        }

        let mut op_names: BTreeSet<String> = BTreeSet::new();
        let mut ops = Vec::new();
        for decl in &file.ops {
            if !op_names.insert(decl.name.clone()) {
                return Err(Error::DuplicateName { kind: "op", name: decl.name.clone() });
            }
            let output = *tensor_ids.get(&decl.output).ok_or_else(|| Error::UnknownTensor {
                name: decl.output.clone(),
                op: decl.name.clone(),
            })?;
            let mut inputs = Vec::with_capacity(decl.inputs.len());
            for input in &decl.inputs {
                inputs.push(*tensor_ids.get(input).ok_or_else(|| Error::UnknownTensor {
                    name: input.clone(),
                    op: decl.name.clone(),
                })?);
            }
            if decl.flops_per_point == 0 {
                return Err(Error::EquationMismatch {
                    op: decl.name.clone(),
                    equation: decl.equation.clone(),
                    msg: "flops_per_point must be positive".into(),
                });
            }
            ops.push(ContractionOp {
                name: decl.name.clone(),
                output,
                inputs,
                flops_per_point: decl.flops_per_point,
            });
        }

        let chain = OperatorChain { axes, tensors, ops, shared_axes: BTreeSet::new() };
        for (decl, op_id) in file.ops.iter().zip(0..) {
            chain.check_equation(op_id, &decl.equation)?;
        }
        chain.validate()
    }

    /// Cross-check the einsum-style equation against the declared tensors.
    fn check_equation(&self, op: OpId, equation: &str) -> Result<()> {
        let mismatch = |msg: String| Error::EquationMismatch {
            op: self.ops[op].name.clone(),
            equation: equation.to_string(),
            msg,
        };
        let (lhs, rhs) = equation
            .split_once("+=")
            .ok_or_else(|| mismatch("expected `out[...] += in[...] * in[...]`".into()))?;
        let lhs = parse_indexed(lhs).map_err(&mismatch)?;
        let mut rhs_terms = Vec::new();
        for term in rhs.split('*') {
            rhs_terms.push(parse_indexed(term).map_err(&mismatch)?);
        }
        let declared_out = &self.tensors[self.ops[op].output];
        check_term(&lhs, declared_out, self, &mismatch)?;
        if rhs_terms.len() != self.ops[op].inputs.len() {
            return Err(mismatch(format!(
                "equation has {} input terms, op declares {}",
                rhs_terms.len(),
                self.ops[op].inputs.len()
            )));
        }
        for (term, &input) in rhs_terms.iter().zip(&self.ops[op].inputs) {
            check_term(term, &self.tensors[input], self, &mismatch)?;
        }
        Ok(())
    }

    fn validate(mut self) -> Result<Self> {
        // Axis kinds, output-in-input coverage, and the elementwise check.
        for op in &self.ops {
            let out = &self.tensors[op.output];
            let in_axes: BTreeSet<AxisId> =
                op.inputs.iter().flat_map(|&t| self.tensors[t].axes.iter().copied()).collect();
            for &ax in &out.axes {
                if !in_axes.contains(&ax) {
                    return Err(Error::OutputAxisNotInInputs {
                        op: op.name.clone(),
                        axis: self.axes[ax].name.clone(),
                    });
                }
            }
            if in_axes.iter().all(|ax| out.axes.contains(ax)) {
                return Err(Error::ElementwiseOp { op: op.name.clone() });
            }
        }

        // Producer/consumer structure: a linear chain on intermediates.
        let mut producer: HashMap<TensorId, OpId> = HashMap::new();
        for (i, op) in self.ops.iter().enumerate() {
            if let Some(&first) = producer.get(&op.output) {
                return Err(Error::IntermediateProducedTwice {
                    tensor: self.tensors[op.output].name.clone(),
                    first: self.ops[first].name.clone(),
                    second: op.name.clone(),
                });
            }
            for &input in &op.inputs {
                match producer.get(&input) {
                    Some(&p) if p < i => {}
                    Some(_) => unreachable!("producer indices only grow"),
                    None => {
                        // Either external, or produced later (a cycle).
                        if self.ops[i + 1..].iter().any(|later| later.output == input) {
                            return Err(Error::CyclicDependency {
                                op: op.name.clone(),
                                tensor: self.tensors[input].name.clone(),
                            });
                        }
                    }
                }
            }
            if i > 0 {
                let prev_out = self.ops[i - 1].output;
                if !op.inputs.contains(&prev_out) {
                    return Err(Error::NonLinearChain { op: op.name.clone() });
                }
            }
            producer.insert(op.output, i);
        }

        // Storage declarations must match the derived roles.
        for (t, tensor) in self.tensors.iter().enumerate() {
            let produced = producer.contains_key(&t);
            let consumed = self.ops.iter().any(|op| op.inputs.contains(&t));
            match tensor.storage {
                Storage::Intermediate => {
                    if !produced || !consumed {
                        return Err(Error::DanglingIntermediate { tensor: tensor.name.clone() });
                    }
                }
                Storage::External => {
                    if produced && consumed {
                        return Err(Error::StorageMismatch { tensor: tensor.name.clone() });
                    }
                }
            }
        }

        // Every axis must index some tensor.
        for (a, axis) in self.axes.iter().enumerate() {
            if !self.tensors.iter().any(|t| t.axes.contains(&a)) {
                return Err(Error::UnusedAxis { name: axis.name.clone() });
            }
        }

        // Axes participating in two or more ops.
        let mut shared = BTreeSet::new();
        for a in 0..self.axes.len() {
            let uses = self.ops.iter().filter(|op| self.op_axes(op).contains(&a)).count();
            if uses >= 2 {
                shared.insert(a);
            }
        }
        self.shared_axes = shared;
        Ok(self)
    }

    fn op_axes(&self, op: &ContractionOp) -> BTreeSet<AxisId> {
        let mut axes: BTreeSet<AxisId> = self.tensors[op.output].axes.iter().copied().collect();
        for &input in &op.inputs {
            axes.extend(self.tensors[input].axes.iter().copied());
        }
        axes
    }

    pub fn axes(&self) -> &[DimAxis] {
        &self.axes
    }

    pub fn tensors(&self) -> &[TensorRef] {
        &self.tensors
    }

    pub fn ops(&self) -> &[ContractionOp] {
        &self.ops
    }

    /// Axes participating in two or more ops.
    pub fn shared_axes(&self) -> &BTreeSet<AxisId> {
        &self.shared_axes
    }

    pub fn axis_id(&self, name: &str) -> Option<AxisId> {
        self.axes.iter().position(|a| a.name == name)
    }

    pub fn axis_name(&self, id: AxisId) -> &str {
        &self.axes[id].name
    }

    /// All axes an op touches, in ascending id order.
    pub fn axes_of_op(&self, op: OpId) -> BTreeSet<AxisId> {
        self.op_axes(&self.ops[op])
    }

    /// Spatial axes of an op: the axes indexing its output.
    pub fn spatial_axes(&self, op: OpId) -> BTreeSet<AxisId> {
        self.tensors[self.ops[op].output].axes.iter().copied().collect()
    }

    /// Reduction axes of an op: axes indexing only its inputs.
    pub fn reduction_axes(&self, op: OpId) -> BTreeSet<AxisId> {
        let spatial = self.spatial_axes(op);
        self.axes_of_op(op).into_iter().filter(|a| !spatial.contains(a)).collect()
    }

    /// The op producing a tensor, if any.
    pub fn producer_of(&self, tensor: TensorId) -> Option<OpId> {
        self.ops.iter().position(|op| op.output == tensor)
    }

    pub fn is_intermediate(&self, tensor: TensorId) -> bool {
        self.tensors[tensor].storage == Storage::Intermediate
    }

    /// The final op's output tensor; its spatial axes carry the grid.
    pub fn final_output(&self) -> TensorId {
        self.ops.last().expect("chains have at least one op").output
    }

    /// Total flops of the whole chain at declared (unpadded) sizes.
    pub fn total_flops(&self) -> u128 {
        self.ops
            .iter()
            .map(|op| {
                let points: u128 = self
                    .op_axes(op)
                    .iter()
                    .map(|&a| u128::from(self.axes[a].size))
                    .product();
                u128::from(op.flops_per_point) * points
            })
            .sum()
    }

    /// Re-serialize in the chain file format. Parsing the result yields an
    /// identical chain.
    pub fn to_json(&self) -> String {
        let file = ChainFile {
            axes: self
                .axes
                .iter()
                .map(|a| AxisDecl { name: a.name.clone(), size: a.size })
                .collect(),
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorDecl {
                    name: t.name.clone(),
                    axes: t.axes.iter().map(|&a| self.axes[a].name.clone()).collect(),
                    dtype_bytes: t.dtype_bytes,
                    storage: t.storage,
                })
                .collect(),
            ops: self
                .ops
                .iter()
                .map(|op| OpDecl {
                    name: op.name.clone(),
                    output: self.tensors[op.output].name.clone(),
                    inputs: op.inputs.iter().map(|&t| self.tensors[t].name.clone()).collect(),
                    equation: self.equation_of(op),
                    flops_per_point: op.flops_per_point,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("chain serialization cannot fail")
    }

    fn equation_of(&self, op: &ContractionOp) -> String {
        let term = |t: TensorId| {
            let tensor = &self.tensors[t];
            let axes: Vec<&str> =
                tensor.axes.iter().map(|&a| self.axes[a].name.as_str()).collect();
            format!("{}[{}]", tensor.name, axes.join(","))
        };
        let inputs: Vec<String> = op.inputs.iter().map(|&t| term(t)).collect();
        format!("{} += {}", term(op.output), inputs.join(" * "))
    }
}

fn parse_indexed(text: &str) -> std::result::Result<(String, Vec<String>), String> {
    let text = text.trim();
    let open = text.find('[').ok_or_else(|| format!("`{text}` is missing `[`"))?;
    if !text.ends_with(']') {
        return Err(format!("`{text}` is missing `]`"));
    }
    let name = text[..open].trim().to_string();
    let axes = text[open + 1..text.len() - 1]
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    Ok((name, axes))
}

fn check_term(
    term: &(String, Vec<String>),
    declared: &TensorRef,
    chain: &OperatorChain,
    mismatch: &impl Fn(String) -> Error,
) -> Result<()> {
    if term.0 != declared.name {
        return Err(mismatch(format!("expected tensor `{}`, found `{}`", declared.name, term.0)));
    }
    let declared_axes: Vec<&str> =
        declared.axes.iter().map(|&a| chain.axes[a].name.as_str()).collect();
    let term_axes: Vec<&str> = term.1.iter().map(String::as_str).collect();
    if declared_axes != term_axes {
        return Err(mismatch(format!(
            "tensor `{}` indexes [{}] in the equation but declares [{}]",
            declared.name,
            term_axes.join(","),
            declared_axes.join(",")
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Compute-to-traffic ratio and MBCI classification

/// Ratio of compute operations to element moves for one output tile of a
/// GEMM-shaped op: `2·Tm·Tn·k / (2·Tm·Tn + Tm·k + Tn·k)`. The output tile
/// is counted twice (accumulator read + write), inputs once per tile row
/// and column over the whole reduction extent `k`.
pub fn compute_phi(tile_m: u64, tile_n: u64, k: u64) -> f64 {
    assert!(tile_m > 0 && tile_n > 0 && k > 0, "compute_phi arguments must be positive");
    let (m, n, k) = (tile_m as f64, tile_n as f64, k as f64);
    2.0 * m * n * k / (2.0 * m * n + m * k + n * k)
}

/// Variant of [`compute_phi`] that counts the output tile once instead of
/// twice. Some presentations of the ratio use this convention; for 256×256
/// tiles with k = 1024 it yields ≈227.6 where [`compute_phi`] yields 204.8.
pub fn compute_phi_output_once(tile_m: u64, tile_n: u64, k: u64) -> f64 {
    assert!(tile_m > 0 && tile_n > 0 && k > 0, "compute_phi arguments must be positive");
    let (m, n, k) = (tile_m as f64, tile_n as f64, k as f64);
    2.0 * m * n * k / (m * n + m * k + n * k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbciClass {
    MemoryBound,
    ComputeBound,
}

impl fmt::Display for MbciClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MbciClass::MemoryBound => write!(f, "memory_bound"),
            MbciClass::ComputeBound => write!(f, "compute_bound"),
        }
    }
}

/// Per-op classification detail.
#[derive(Debug, Clone)]
pub struct OpClassification {
    pub op: OpId,
    /// Flops per element moved, output counted read+write.
    pub phi: f64,
    /// Same ratio with the output counted once.
    pub phi_output_once: f64,
    /// Flops-per-element threshold: `(P / W) × dtype_bytes`.
    pub threshold: f64,
    pub class: MbciClass,
}

/// Generalized compute-to-traffic ratio for one op: spatial axes
/// contribute their tile size, reduction axes their full extent.
pub fn op_phi(chain: &OperatorChain, op: OpId, tiles: &crate::expr::TileSizes) -> f64 {
    op_phi_impl(chain, op, tiles, 2.0)
}

fn op_phi_impl(
    chain: &OperatorChain,
    op: OpId,
    tiles: &crate::expr::TileSizes,
    output_weight: f64,
) -> f64 {
    let spatial = chain.spatial_axes(op);
    let extent = |a: AxisId| -> f64 {
        if spatial.contains(&a) {
            tiles.get(a) as f64
        } else {
            chain.axes()[a].size as f64
        }
    };
    let contraction = &chain.ops()[op];
    let flops: f64 = chain.axes_of_op(op).iter().map(|&a| extent(a)).product::<f64>()
        * contraction.flops_per_point as f64;
    let out_elems: f64 =
        chain.tensors()[contraction.output].axes.iter().map(|&a| extent(a)).product();
    let mut moves = output_weight * out_elems;
    for &input in &contraction.inputs {
        moves += chain.tensors()[input].axes.iter().map(|&a| extent(a)).product::<f64>();
    }
    flops / moves
}

/// Classify every op of the chain at the given tile sizes. An op is
/// memory-bound iff `phi < (P/W) × dtype_bytes` (strict), putting flops
/// per element on both sides.
pub fn classify_ops(
    chain: &OperatorChain,
    hw: &HardwareSpec,
    tiles: &crate::expr::TileSizes,
) -> Vec<OpClassification> {
    (0..chain.ops().len())
        .map(|op| {
            let dtype = chain.tensors()[chain.ops()[op].output].dtype_bytes as f64;
            let threshold = hw.peak_flops_per_s / hw.bandwidth_bytes_per_s * dtype;
            let phi = op_phi(chain, op, tiles);
            let class = if phi < threshold {
                MbciClass::MemoryBound
            } else {
                MbciClass::ComputeBound
            };
            OpClassification {
                op,
                phi,
                phi_output_once: op_phi_impl(chain, op, tiles, 1.0),
                threshold,
                class,
            }
        })
        .collect()
}

/// Chain-level verdict: the fused region counts as memory-bound when every
/// op in it is memory-bound at the given tiles.
pub fn classify_mbci(
    chain: &OperatorChain,
    hw: &HardwareSpec,
    tiles: &crate::expr::TileSizes,
) -> MbciClass {
    if classify_ops(chain, hw, tiles).iter().all(|c| c.class == MbciClass::MemoryBound) {
        MbciClass::MemoryBound
    } else {
        MbciClass::ComputeBound
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::TileSizes;
    use approx::assert_relative_eq;

    use super::testdata::TWO_GEMM;

    const SINGLE_GEMM: &str = r#"{
        "axes": [
            {"name": "m", "size": 64},
            {"name": "k", "size": 32},
            {"name": "n", "size": 64}
        ],
        "tensors": [
            {"name": "A", "axes": ["m", "k"], "dtype_bytes": 2, "storage": "external"},
            {"name": "B", "axes": ["k", "n"], "dtype_bytes": 2, "storage": "external"},
            {"name": "C", "axes": ["m", "n"], "dtype_bytes": 2, "storage": "external"}
        ],
        "ops": [
            {"name": "gemm", "output": "C", "inputs": ["A", "B"],
             "equation": "C[m,n] += A[m,k] * B[k,n]"}
        ]
    }"#;

    #[test]
    fn parses_two_gemm_chain() {
        let chain = parse_chain(TWO_GEMM).unwrap();
        assert_eq!(chain.axes().len(), 4);
        let shared: Vec<&str> =
            chain.shared_axes().iter().map(|&a| chain.axis_name(a)).collect();
        assert_eq!(shared, vec!["m", "n"]);
        assert_eq!(chain.final_output(), 4);
        assert_eq!(chain.producer_of(2), Some(0));
        assert!(chain.is_intermediate(2));
    }

    #[test]
    fn parses_single_op_chain() {
        let chain = parse_chain(SINGLE_GEMM).unwrap();
        assert_eq!(chain.axes().len(), 3);
        assert!(chain.shared_axes().is_empty());
        let k = chain.axis_id("k").unwrap();
        assert!(chain.reduction_axes(0).contains(&k));
        assert_eq!(chain.spatial_axes(0).len(), 2);
    }

    #[test]
    fn rejects_unknown_axis() {
        let text = TWO_GEMM.replace(r#""axes": ["m", "k"]"#, r#""axes": ["m", "q"]"#);
        match parse_chain(&text) {
            Err(Error::UnknownAxis { name, .. }) => assert_eq!(name, "q"),
            other => panic!("expected unknown-axis error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_elementwise_op() {
        let text = r#"{
            "axes": [{"name": "m", "size": 64}],
            "tensors": [
                {"name": "X", "axes": ["m"], "dtype_bytes": 2, "storage": "external"},
                {"name": "Y", "axes": ["m"], "dtype_bytes": 2, "storage": "external"}
            ],
            "ops": [{"name": "relu", "output": "Y", "inputs": ["X"],
                     "equation": "Y[m] += X[m]"}]
        }"#;
        assert!(matches!(parse_chain(text), Err(Error::ElementwiseOp { .. })));
    }

    #[test]
    fn rejects_double_production() {
        let text = TWO_GEMM.replace(
            r#""output": "E", "inputs": ["C", "D"],
             "equation": "E[m,h] += C[m,n] * D[n,h]""#,
            r#""output": "C", "inputs": ["A", "B"],
             "equation": "C[m,n] += A[m,k] * B[k,n]""#,
        );
        assert!(matches!(parse_chain(&text), Err(Error::IntermediateProducedTwice { .. })));
    }

    #[test]
    fn rejects_syntax_error_with_position() {
        match parse_chain("{\n  \"axes\": [,]\n}") {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_mismatched_equation() {
        let text = TWO_GEMM.replace("E[m,h] += C[m,n] * D[n,h]", "E[m,h] += D[n,h] * C[m,n]");
        assert!(matches!(parse_chain(&text), Err(Error::EquationMismatch { .. })));
    }

    #[test]
    fn round_trips_through_json() {
        let chain = parse_chain(TWO_GEMM).unwrap();
        let reparsed = parse_chain(&chain.to_json()).unwrap();
        assert_eq!(chain, reparsed);
    }

    #[test]
    fn phi_matches_hand_counts() {
        // Oracle: count the element moves of one tile computation directly.
        // A 256×256 output tile over k=1024 reads 256·1024 elements of each
        // input and touches the accumulator tile twice.
        let (tm, tn, k) = (256u64, 256u64, 1024u64);
        let flops = 2.0 * tm as f64 * tn as f64 * k as f64;
        let moves = (2 * tm * tn + tm * k + tn * k) as f64;
        assert_relative_eq!(compute_phi(tm, tn, k), flops / moves, epsilon = 1e-12);
        assert_relative_eq!(compute_phi(tm, tn, k), 204.8, epsilon = 1e-9);

        let moves_k1 = (2 * tm * tn + tm + tn) as f64;
        let flops_k1 = 2.0 * tm as f64 * tn as f64;
        assert_relative_eq!(compute_phi(tm, tn, 1), flops_k1 / moves_k1, epsilon = 1e-12);
        assert_relative_eq!(compute_phi(tm, tn, 1), 0.996_108_949_416_342_4, epsilon = 1e-9);

        assert_relative_eq!(compute_phi(1, 1, 1), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn phi_output_once_matches_alternate_denominator() {
        assert_relative_eq!(
            compute_phi_output_once(256, 256, 1024),
            2.0 * 256.0 * 256.0 * 1024.0 / (256.0 * 256.0 + 256.0 * 1024.0 + 256.0 * 1024.0),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            compute_phi_output_once(256, 256, 1024),
            227.555_555_555_555_55,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            compute_phi_output_once(256, 256, 1),
            1.984_496_124_031_007_7,
            epsilon = 1e-9
        );
    }

    #[test]
    fn classification_uses_strict_inequality() {
        let chain = parse_chain(SINGLE_GEMM).unwrap();
        let tiles = TileSizes::new(vec![64, 32, 64]);
        let phi = op_phi(&chain, 0, &tiles);
        // Pick W and P so the flops-per-element threshold lands exactly on phi.
        let dtype = 2.0;
        let hw = HardwareSpec {
            bandwidth_bytes_per_s: 1e9,
            peak_flops_per_s: phi / dtype * 1e9,
            num_sm: 4,
            shm_max_bytes: 1 << 20,
            min_tile: 16,
        };
        assert_eq!(classify_mbci(&chain, &hw, &tiles), MbciClass::ComputeBound);
        let slightly_faster = HardwareSpec { peak_flops_per_s: hw.peak_flops_per_s * 1.01, ..hw };
        assert_eq!(classify_mbci(&chain, &hw, &tiles), MbciClass::ComputeBound);
        assert_eq!(classify_mbci(&chain, &slightly_faster, &tiles), MbciClass::MemoryBound);
    }

    #[test]
    fn hardware_spec_rejects_nonpositive_fields() {
        assert!(HardwareSpec::parse(
            r#"{"bandwidth_bytes_per_s": 1e12, "peak_flops_per_s": 1e14,
                "num_sm": 108, "shm_max_bytes": 65536}"#
        )
        .is_ok_and(|hw| hw.min_tile == 16));
        for broken in [
            r#"{"bandwidth_bytes_per_s": 0, "peak_flops_per_s": 1e14, "num_sm": 108, "shm_max_bytes": 65536}"#,
            r#"{"bandwidth_bytes_per_s": 1e12, "peak_flops_per_s": 1e14, "num_sm": 0, "shm_max_bytes": 65536}"#,
            r#"{"bandwidth_bytes_per_s": 1e12, "peak_flops_per_s": 1e14, "num_sm": 108, "shm_max_bytes": 65536, "min_tile": 0}"#,
        ] {
            assert!(matches!(HardwareSpec::parse(broken), Err(Error::BadHardware { .. })));
        }
    }

    #[test]
    fn tile_maps_must_cover_every_axis() {
        let chain = parse_chain(SINGLE_GEMM).unwrap();
        let err = TileSizes::from_pairs(&chain, &[("m".into(), 16), ("n".into(), 16)]);
        assert!(matches!(err, Err(Error::MissingTile { axis }) if axis == "k"));
        let err = TileSizes::from_pairs(&chain, &[("q".into(), 16)]);
        assert!(matches!(err, Err(Error::UnknownAxis { .. })));
    }

    #[test]
    fn classify_thresholds_match_spec_examples() {
        // phi 204.8 against a flops-per-element threshold of 100 -> compute
        // bound; phi 0.996 against the same threshold -> memory bound.
        assert!(compute_phi(256, 256, 1024) >= 100.0);
        assert!(compute_phi(256, 256, 1) < 100.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn phi_is_symmetric_in_tiles(m in 1u64..512, n in 1u64..512, k in 1u64..2048) {
                prop_assert!((compute_phi(m, n, k) - compute_phi(n, m, k)).abs() < 1e-9);
            }

            #[test]
            fn phi_increases_with_k(m in 1u64..512, n in 1u64..512, k in 1u64..2048) {
                prop_assert!(compute_phi(m, n, k + 1) > compute_phi(m, n, k));
            }
        }
    }
}
