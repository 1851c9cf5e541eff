//! Network topology and the feasible forward pass.
//!
//! A [`Network`] is an immutable DAG of neurons. Non-input neurons carry an
//! activation kind and an optional bias; biases are weights from a constant-1
//! virtual input, so every non-input neuron obeys the single equation
//! `x_i = act(sum_j w_ij * x_j + b_i)`.
//!
//! Weight layout (the indexing contract shared by every module): one weight
//! per edge, in edge-list order, followed by one bias weight per biased
//! neuron, in neuron-list order. Per-neuron accumulation always iterates
//! parents sorted by id, so the forward pass depends on the topology and not
//! on edge storage order.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::grid::Grid;

pub type NeuronId = usize;

/// One weight per edge plus one per bias, in the crate-wide layout.
pub type WeightBlock = Vec<f64>;

/// Stored outputs of the constrained (non-input) neurons of one example.
pub type NeuralOutputs = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neuron {
    pub id: NeuronId,
    pub act: ActivationKind,
    pub bias: bool,
}

#[derive(Debug, Clone)]
pub struct Network {
    neurons: Vec<Neuron>,
    edges: Vec<(NeuronId, NeuronId)>,
    inputs: Vec<NeuronId>,
    outputs: Vec<NeuronId>,
    topo_order: Vec<NeuronId>,

    // Derived indexing. `index` positions refer to the `neurons` vec.
    index_of: HashMap<NeuronId, usize>,
    topo_indices: Vec<usize>,
    /// Per neuron index: (parent index, weight index), sorted by parent id.
    incoming: Vec<Vec<(usize, usize)>>,
    /// Per neuron index: (child index, weight index of the edge into it),
    /// sorted by child id.
    children: Vec<Vec<(usize, usize)>>,
    /// Per neuron index: weight index of the bias, if any.
    bias_widx: Vec<Option<usize>>,
    /// Neuron indices of non-input neurons, in `neurons` order. This is the
    /// column order of every per-example block (x, lambda, residuals).
    constrained: Vec<usize>,
    /// Neuron index -> constrained column, None for inputs.
    constrained_col: Vec<Option<usize>>,
    /// Neuron index -> position in `inputs`, None for non-inputs.
    input_pos: Vec<Option<usize>>,
    num_weights: usize,
}

impl Network {
    /// Validates the graph and derives the topological order (Kahn's
    /// algorithm with smallest-id-first tie-breaking, so construction is
    /// deterministic).
    pub fn new(
        neurons: Vec<Neuron>,
        edges: Vec<(NeuronId, NeuronId)>,
        inputs: Vec<NeuronId>,
        outputs: Vec<NeuronId>,
    ) -> Result<Self> {
        let fail = |msg: String| Err(Error::InvalidNetwork(msg));

        if neurons.is_empty() {
            return fail("no neurons".into());
        }
        let mut index_of = HashMap::new();
        for (i, n) in neurons.iter().enumerate() {
            if index_of.insert(n.id, i).is_some() {
                return fail(format!("duplicate neuron id {}", n.id));
            }
        }
        let idx = |id: NeuronId, what: &str| -> Result<usize> {
            index_of
                .get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidNetwork(format!("{what} references unknown id {id}")))
        };

        if inputs.is_empty() {
            return fail("no input neurons".into());
        }
        if outputs.is_empty() {
            return fail("no output neurons".into());
        }
        let input_set: HashSet<NeuronId> = inputs.iter().copied().collect();
        if input_set.len() != inputs.len() {
            return fail("duplicate input ids".into());
        }
        let output_set: HashSet<NeuronId> = outputs.iter().copied().collect();
        if output_set.len() != outputs.len() {
            return fail("duplicate output ids".into());
        }
        for &id in inputs.iter().chain(outputs.iter()) {
            idx(id, "input/output list")?;
        }
        if let Some(id) = inputs.iter().find(|id| output_set.contains(id)) {
            return fail(format!("neuron {id} is both input and output"));
        }

        let mut seen_edges = HashSet::new();
        for &(s, d) in &edges {
            idx(s, "edge")?;
            idx(d, "edge")?;
            if s == d {
                return fail(format!("self-loop on neuron {s}"));
            }
            if !seen_edges.insert((s, d)) {
                return fail(format!("duplicate edge ({s}, {d})"));
            }
            if input_set.contains(&d) {
                return fail(format!("input neuron {d} has an incoming edge"));
            }
        }
        for n in &neurons {
            if input_set.contains(&n.id) {
                if n.bias {
                    return fail(format!("input neuron {} cannot have a bias", n.id));
                }
            } else if !edges.iter().any(|&(_, d)| d == n.id) {
                return fail(format!("non-input neuron {} has no incoming edge", n.id));
            }
        }

        // Kahn with a BTreeSet frontier: smallest id first.
        let mut indegree = vec![0usize; neurons.len()];
        for &(_, d) in &edges {
            indegree[index_of[&d]] += 1;
        }
        let mut frontier: BTreeSet<NeuronId> = neurons
            .iter()
            .filter(|n| indegree[index_of[&n.id]] == 0)
            .map(|n| n.id)
            .collect();
        let mut topo_order = Vec::with_capacity(neurons.len());
        while let Some(&id) = frontier.iter().next() {
            frontier.remove(&id);
            topo_order.push(id);
            for &(s, d) in &edges {
                if s == id {
                    let di = index_of[&d];
                    indegree[di] -= 1;
                    if indegree[di] == 0 {
                        frontier.insert(d);
                    }
                }
            }
        }
        if topo_order.len() != neurons.len() {
            return fail("edge graph contains a cycle".into());
        }

        // Weight layout: edges first, then biases.
        let mut incoming = vec![Vec::new(); neurons.len()];
        let mut children = vec![Vec::new(); neurons.len()];
        for (widx, &(s, d)) in edges.iter().enumerate() {
            let (si, di) = (index_of[&s], index_of[&d]);
            incoming[di].push((si, widx));
            children[si].push((di, widx));
        }
        for list in incoming.iter_mut() {
            list.sort_by_key(|&(pi, _)| neurons[pi].id);
        }
        for list in children.iter_mut() {
            list.sort_by_key(|&(ci, _)| neurons[ci].id);
        }
        let mut bias_widx = vec![None; neurons.len()];
        let mut next = edges.len();
        for (i, n) in neurons.iter().enumerate() {
            if n.bias {
                bias_widx[i] = Some(next);
                next += 1;
            }
        }
        let num_weights = next;

        let mut constrained = Vec::new();
        let mut constrained_col = vec![None; neurons.len()];
        let mut input_pos = vec![None; neurons.len()];
        for (pos, &id) in inputs.iter().enumerate() {
            input_pos[index_of[&id]] = Some(pos);
        }
        for (i, n) in neurons.iter().enumerate() {
            if !input_set.contains(&n.id) {
                constrained_col[i] = Some(constrained.len());
                constrained.push(i);
            }
        }

        let topo_indices = topo_order.iter().map(|id| index_of[id]).collect();

        Ok(Network {
            neurons,
            edges,
            inputs,
            outputs,
            topo_order,
            index_of,
            topo_indices,
            incoming,
            children,
            bias_widx,
            constrained,
            constrained_col,
            input_pos,
            num_weights,
        })
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn edges(&self) -> &[(NeuronId, NeuronId)] {
        &self.edges
    }

    pub fn input_ids(&self) -> &[NeuronId] {
        &self.inputs
    }

    pub fn output_ids(&self) -> &[NeuronId] {
        &self.outputs
    }

    pub fn topo_order(&self) -> &[NeuronId] {
        &self.topo_order
    }

    /// Total number of weights: one per edge plus one per bias.
    pub fn num_weights(&self) -> usize {
        self.num_weights
    }

    /// Number of constrained (non-input) neurons; the width of every
    /// per-example block.
    pub fn num_constrained(&self) -> usize {
        self.constrained.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub(crate) fn index_of(&self, id: NeuronId) -> usize {
        self.index_of[&id]
    }

    pub(crate) fn neuron_at(&self, index: usize) -> &Neuron {
        &self.neurons[index]
    }

    pub(crate) fn topo_indices(&self) -> &[usize] {
        &self.topo_indices
    }

    pub(crate) fn incoming(&self, index: usize) -> &[(usize, usize)] {
        &self.incoming[index]
    }

    pub(crate) fn children_of(&self, index: usize) -> &[(usize, usize)] {
        &self.children[index]
    }

    pub(crate) fn bias_widx(&self, index: usize) -> Option<usize> {
        self.bias_widx[index]
    }

    /// Neuron indices of the constrained neurons, in column order.
    pub(crate) fn constrained_indices(&self) -> &[usize] {
        &self.constrained
    }

    pub(crate) fn constrained_col(&self, index: usize) -> Option<usize> {
        self.constrained_col[index]
    }

    /// Column of a constrained neuron id, e.g. for reading multipliers.
    pub fn column_of_id(&self, id: NeuronId) -> Option<usize> {
        self.index_of.get(&id).and_then(|&i| self.constrained_col[i])
    }

    /// Constrained neuron ids in column order.
    pub fn constrained_ids(&self) -> Vec<NeuronId> {
        self.constrained.iter().map(|&i| self.neurons[i].id).collect()
    }

    pub fn is_input(&self, id: NeuronId) -> bool {
        self.input_pos[self.index_of[&id]].is_some()
    }

    pub fn is_output(&self, id: NeuronId) -> bool {
        self.outputs.contains(&id)
    }

    pub fn check_weights(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.num_weights {
            return Err(Error::Shape(format!(
                "weight block has {} entries, network needs {}",
                w.len(),
                self.num_weights
            )));
        }
        Ok(())
    }

    /// Pre-activation of the neuron at `index`, reading parent values from a
    /// per-neuron `values` buffer. Parents are accumulated in sorted-id order
    /// and the bias is added last; the forward pass and the constraint
    /// residual both go through here, so a feasible state yields exactly-zero
    /// residuals.
    pub(crate) fn preactivation(&self, w: &[f64], values: &[f64], index: usize) -> f64 {
        let mut a = 0.0;
        for &(pi, widx) in &self.incoming[index] {
            a += w[widx] * values[pi];
        }
        if let Some(b) = self.bias_widx[index] {
            a += w[b];
        }
        a
    }

    /// Scatter one example into a per-neuron value buffer: inputs from the
    /// example, constrained neurons from `x_row`.
    pub(crate) fn fill_values(&self, input: &[f64], x_row: &[f64], values: &mut [f64]) {
        for (i, pos) in self.input_pos.iter().enumerate() {
            if let Some(p) = *pos {
                values[i] = input[p];
            }
        }
        for (col, &i) in self.constrained.iter().enumerate() {
            values[i] = x_row[col];
        }
    }

    /// Feasible forward pass: outputs computed in topological order. The
    /// returned vector holds the constrained neurons' values in column order.
    pub fn forward(&self, w: &[f64], input: &[f64]) -> Result<NeuralOutputs> {
        self.check_weights(w)?;
        if input.len() != self.inputs.len() {
            return Err(Error::Shape(format!(
                "input has {} values, network has {} input neurons",
                input.len(),
                self.inputs.len()
            )));
        }
        let mut values = vec![0.0; self.neurons.len()];
        for (i, pos) in self.input_pos.iter().enumerate() {
            if let Some(p) = *pos {
                values[i] = input[p];
            }
        }
        for &i in &self.topo_indices {
            if self.input_pos[i].is_some() {
                continue;
            }
            let a = self.preactivation(w, &values, i);
            values[i] = self.neurons[i].act.value(a);
        }
        Ok(self.constrained.iter().map(|&i| values[i]).collect())
    }

    /// Forward pass over a whole input grid; one row per example.
    pub fn forward_batch(&self, w: &[f64], inputs: &Grid) -> Result<Grid> {
        let mut out = Grid::zeros(inputs.rows(), self.num_constrained());
        for e in 0..inputs.rows() {
            let row = self.forward(w, inputs.row(e))?;
            out.row_mut(e).copy_from_slice(&row);
        }
        Ok(out)
    }

    /// Values of the output neurons, extracted from a constrained row.
    pub fn predictions(&self, x_row: &[f64]) -> Vec<f64> {
        self.outputs
            .iter()
            .map(|id| {
                let col = self.constrained_col[self.index_of[id]]
                    .expect("output neurons are never inputs");
                x_row[col]
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let doc = NetworkDoc {
            neurons: self
                .neurons
                .iter()
                .map(|n| NeuronDoc {
                    id: n.id,
                    act: n.act,
                    bias: n.bias,
                })
                .collect(),
            edges: self.edges.iter().map(|&(s, d)| [s, d]).collect(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
        };
        serde_json::to_value(doc).expect("network serialization cannot fail")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_value(v.clone())?;
        Network::new(
            doc.neurons
                .into_iter()
                .map(|n| Neuron {
                    id: n.id,
                    act: n.act,
                    bias: n.bias,
                })
                .collect(),
            doc.edges.into_iter().map(|[s, d]| (s, d)).collect(),
            doc.inputs,
            doc.outputs,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    neurons: Vec<NeuronDoc>,
    edges: Vec<[NeuronId; 2]>,
    inputs: Vec<NeuronId>,
    outputs: Vec<NeuronId>,
}

#[derive(Serialize, Deserialize)]
struct NeuronDoc {
    id: NeuronId,
    act: ActivationKind,
    bias: bool,
}

/// Fully-connected layered network with bias weights on every non-input
/// neuron. Neuron ids are dense and layer-major, so construction is
/// deterministic.
pub fn build_mlp(
    layer_sizes: &[usize],
    activation: ActivationKind,
    output_activation: ActivationKind,
) -> Result<Network> {
    if layer_sizes.len() < 2 {
        return Err(Error::Usage(format!(
            "need at least two layers, got {}",
            layer_sizes.len()
        )));
    }
    if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
        return Err(Error::Usage(format!("layer {pos} has size 0")));
    }

    let mut neurons = Vec::new();
    let mut layer_ids: Vec<Vec<NeuronId>> = Vec::new();
    let mut next_id = 0;
    let last = layer_sizes.len() - 1;
    for (l, &size) in layer_sizes.iter().enumerate() {
        let act = match l {
            0 => ActivationKind::Identity,
            l if l == last => output_activation,
            _ => activation,
        };
        let ids: Vec<NeuronId> = (0..size)
            .map(|_| {
                let id = next_id;
                next_id += 1;
                neurons.push(Neuron {
                    id,
                    act,
                    bias: l > 0,
                });
                id
            })
            .collect();
        layer_ids.push(ids);
    }

    let mut edges = Vec::new();
    for l in 1..layer_ids.len() {
        for &dst in &layer_ids[l] {
            for &src in &layer_ids[l - 1] {
                edges.push((src, dst));
            }
        }
    }

    Network::new(
        neurons,
        edges,
        layer_ids[0].clone(),
        layer_ids[last].clone(),
    )
}
