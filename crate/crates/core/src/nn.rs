//! Neurons, layers, and multilayer perceptrons over engine nodes.
//!
//! A network is wired into a [`GraphStore`] exactly once: [`new_mlp`] creates
//! the parameter leaves, and the first [`MlpSpec::forward`] call builds the
//! full computation graph from a set of input leaves, recording a
//! [`ForwardBinding`] with the evaluation order. Subsequent forward passes
//! reuse the binding: they overwrite the input leaves' data and re-evaluate
//! the recorded nodes in place, creating nothing. Each neuron computes
//! `relu(((w1*x1 + w2*x2) + ...) + b)`, left-to-right, with the ReLU skipped
//! on the final layer.

use crate::engine::{EngineError, GraphStore, NodeId};
use crate::rng::Rng;

use thiserror::Error;

/// Errors from network construction and forward passes.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum NnError {
    #[error("mlp needs at least one layer")]
    EmptyArchitecture,
    #[error("mlp input size must be at least 1")]
    ZeroInputSize,
    #[error("layer sizes must all be at least 1")]
    ZeroLayerSize,
    #[error("expected {expected} input nodes, got {got}")]
    InputArity { expected: usize, got: usize },
    #[error("binding belongs to a different store")]
    ForeignBinding,
    #[error("binding was wired for different input nodes")]
    BindingInputMismatch,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// One neuron: its weight parameters (in input order), bias parameter, and
/// whether a ReLU follows the affine sum.
#[derive(Debug, Clone)]
pub struct NeuronSpec {
    weight_ids: Vec<NodeId>,
    bias_id: NodeId,
    nonlin: bool,
}

impl NeuronSpec {
    pub fn weight_ids(&self) -> &[NodeId] {
        &self.weight_ids
    }
    pub fn bias_id(&self) -> NodeId {
        self.bias_id
    }
    pub fn nonlin(&self) -> bool {
        self.nonlin
    }
}

/// One fully-connected layer.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    neurons: Vec<NeuronSpec>,
    nin: usize,
}

impl LayerSpec {
    pub fn neurons(&self) -> &[NeuronSpec] {
        &self.neurons
    }
    pub fn nin(&self) -> usize {
        self.nin
    }
}

/// A multilayer perceptron's parameter structure. Holds ids only; the values
/// live in the store.
#[derive(Debug, Clone)]
pub struct MlpSpec {
    nin: usize,
    layer_sizes: Vec<usize>,
    layers: Vec<LayerSpec>,
}

/// The wiring record of one forward graph: which input leaves it reads, which
/// nodes form the final layer, and the order in which derived nodes must be
/// re-evaluated (every node appears after all of its operands).
#[derive(Debug, Clone)]
pub struct ForwardBinding {
    store_id: u64,
    input_ids: Vec<NodeId>,
    output_ids: Vec<NodeId>,
    eval_order: Vec<NodeId>,
}

impl ForwardBinding {
    pub fn input_ids(&self) -> &[NodeId] {
        &self.input_ids
    }
    pub fn output_ids(&self) -> &[NodeId] {
        &self.output_ids
    }
    /// The single output node of a size-1 final layer.
    ///
    /// Panics if the binding has more than one output.
    pub fn output(&self) -> NodeId {
        assert!(
            self.output_ids.len() == 1,
            "binding has {} outputs",
            self.output_ids.len()
        );
        self.output_ids[0]
    }
    pub fn eval_order(&self) -> &[NodeId] {
        &self.eval_order
    }

    /// Recomputes every wired node from current leaf data, in wiring order.
    pub fn reevaluate(&self, store: &mut GraphStore) -> Result<(), NnError> {
        if self.store_id != store.store_id() {
            return Err(NnError::ForeignBinding);
        }
        store.recompute(&self.eval_order)?;
        Ok(())
    }
}

/// Creates the parameter nodes of an MLP with `nin` inputs and the given
/// layer sizes (e.g. `[4, 4, 1]`). Weights and biases are drawn i.i.d.
/// uniform on [-1, 1), in canonical order: layer by layer, neuron by neuron,
/// weights in input order, then the bias. The final layer is linear; all
/// earlier layers take a ReLU.
pub fn new_mlp(
    store: &mut GraphStore,
    nin: usize,
    sizes: &[usize],
    rng: &mut Rng,
) -> Result<MlpSpec, NnError> {
    if nin == 0 {
        return Err(NnError::ZeroInputSize);
    }
    if sizes.is_empty() {
        return Err(NnError::EmptyArchitecture);
    }
    if sizes.contains(&0) {
        return Err(NnError::ZeroLayerSize);
    }

    let mut layers = Vec::with_capacity(sizes.len());
    let mut fan_in = nin;
    for (k, &nout) in sizes.iter().enumerate() {
        let nonlin = k + 1 < sizes.len();
        let mut neurons = Vec::with_capacity(nout);
        for _ in 0..nout {
            let weight_ids = (0..fan_in)
                .map(|_| store.create_value(rng.next_range(-1.0, 1.0), true))
                .collect();
            let bias_id = store.create_value(rng.next_range(-1.0, 1.0), true);
            neurons.push(NeuronSpec {
                weight_ids,
                bias_id,
                nonlin,
            });
        }
        layers.push(LayerSpec {
            neurons,
            nin: fan_in,
        });
        fan_in = nout;
    }
    Ok(MlpSpec {
        nin,
        layer_sizes: sizes.to_vec(),
        layers,
    })
}

impl MlpSpec {
    pub fn nin(&self) -> usize {
        self.nin
    }
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }
    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Forward pass. With `binding` empty, wires the graph from the given
    /// input leaves, fills the binding, and returns the final layer's ids.
    /// With a binding present, re-evaluates the wired nodes from current leaf
    /// data instead — no new nodes are created.
    pub fn forward(
        &self,
        store: &mut GraphStore,
        input_ids: &[NodeId],
        binding: &mut Option<ForwardBinding>,
    ) -> Result<Vec<NodeId>, NnError> {
        if input_ids.len() != self.nin {
            return Err(NnError::InputArity {
                expected: self.nin,
                got: input_ids.len(),
            });
        }
        if let Some(b) = binding {
            if b.input_ids != input_ids {
                return Err(NnError::BindingInputMismatch);
            }
            b.reevaluate(store)?;
            return Ok(b.output_ids.clone());
        }

        let mut eval_order = Vec::new();
        let mut xs = input_ids.to_vec();
        for layer in &self.layers {
            let mut outs = Vec::with_capacity(layer.neurons.len());
            for neuron in &layer.neurons {
                // ((((w1*x1) + (w2*x2)) + ...) + b), left to right.
                let mut acc = store.multiply(neuron.weight_ids[0], xs[0])?;
                eval_order.push(acc);
                for (w, x) in neuron.weight_ids.iter().zip(xs.iter()).skip(1) {
                    let prod = store.multiply(*w, *x)?;
                    eval_order.push(prod);
                    acc = store.add(acc, prod)?;
                    eval_order.push(acc);
                }
                acc = store.add(acc, neuron.bias_id)?;
                eval_order.push(acc);
                if neuron.nonlin {
                    acc = store.relu(acc)?;
                    eval_order.push(acc);
                }
                outs.push(acc);
            }
            xs = outs;
        }
        *binding = Some(ForwardBinding {
            store_id: store.store_id(),
            input_ids: input_ids.to_vec(),
            output_ids: xs.clone(),
            eval_order,
        });
        Ok(xs)
    }

    /// All parameter ids in canonical order: layer by layer, neuron by
    /// neuron, weights then bias. Stable across calls.
    pub fn get_parameters(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for neuron in &layer.neurons {
                out.extend_from_slice(&neuron.weight_ids);
                out.push(neuron.bias_id);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Op;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn wire(
        store: &mut GraphStore,
        mlp: &MlpSpec,
        x: f64,
        y: f64,
    ) -> (Vec<NodeId>, ForwardBinding) {
        let ix = store.create_value(x, false);
        let iy = store.create_value(y, false);
        let mut binding = None;
        let outs = mlp.forward(store, &[ix, iy], &mut binding).unwrap();
        (outs, binding.unwrap())
    }

    #[test]
    fn default_architecture_has_37_parameters() {
        let mut s = GraphStore::new();
        let mut rng = Rng::new(42);
        let mlp = new_mlp(&mut s, 2, &[4, 4, 1], &mut rng).unwrap();
        let params = mlp.get_parameters();
        assert_eq!(params.len(), 37); // (2+1)*4 + (4+1)*4 + (4+1)*1
        assert!(params.iter().all(|&p| s.node(p).unwrap().is_param()));
        let mut unique = params.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), 37);
    }

    #[test]
    fn smallest_mlp_is_linear_with_weight_before_bias() {
        let mut s = GraphStore::new();
        let mut rng = Rng::new(1);
        let mlp = new_mlp(&mut s, 1, &[1], &mut rng).unwrap();
        let params = mlp.get_parameters();
        assert_eq!(params.len(), 2);
        assert_eq!(params[0], mlp.layers()[0].neurons()[0].weight_ids()[0]);
        assert_eq!(params[1], mlp.layers()[0].neurons()[0].bias_id());
        assert!(params[0].get() < params[1].get()); // weight drawn first

        let input = s.create_value(0.5, false);
        let mut binding = None;
        let outs = mlp.forward(&mut s, &[input], &mut binding).unwrap();
        // Single linear layer: output node is the bias add, no ReLU on top.
        assert_eq!(s.node(outs[0]).unwrap().op(), Op::Add);
        let w = s.data(params[0]).unwrap();
        let b = s.data(params[1]).unwrap();
        assert_eq!(s.data(outs[0]).unwrap(), w * 0.5 + b);
    }

    #[test]
    fn construction_errors() {
        let mut s = GraphStore::new();
        let mut rng = Rng::new(0);
        assert_eq!(
            new_mlp(&mut s, 0, &[1], &mut rng).unwrap_err(),
            NnError::ZeroInputSize
        );
        assert_eq!(
            new_mlp(&mut s, 2, &[], &mut rng).unwrap_err(),
            NnError::EmptyArchitecture
        );
        assert_eq!(
            new_mlp(&mut s, 2, &[4, 0, 1], &mut rng).unwrap_err(),
            NnError::ZeroLayerSize
        );
    }

    #[test]
    fn same_seed_same_network() {
        let mut s1 = GraphStore::new();
        let mut s2 = GraphStore::new();
        let mlp1 = new_mlp(&mut s1, 2, &[4, 4, 1], &mut Rng::new(9)).unwrap();
        let mlp2 = new_mlp(&mut s2, 2, &[4, 4, 1], &mut Rng::new(9)).unwrap();
        for (a, b) in mlp1.get_parameters().iter().zip(mlp2.get_parameters()) {
            assert_eq!(s1.data(*a).unwrap(), s2.data(b).unwrap());
        }
        let (o1, _) = wire(&mut s1, &mlp1, 0.3, -0.7);
        let (o2, _) = wire(&mut s2, &mlp2, 0.3, -0.7);
        assert_eq!(s1.data(o1[0]).unwrap(), s2.data(o2[0]).unwrap());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut s = GraphStore::new();
        let mut rng = Rng::new(5);
        let mlp = new_mlp(&mut s, 2, &[4, 4, 1], &mut rng).unwrap();
        for p in mlp.get_parameters() {
            s.set_data(p, 0.0).unwrap();
        }
        let ix = s.create_value(0.0, false);
        let iy = s.create_value(0.0, false);
        let mut binding = None;
        let outs = mlp.forward(&mut s, &[ix, iy], &mut binding).unwrap();
        for (x, y) in [(0.9, -0.4), (-1.0, 1.0), (0.0, 0.0), (123.0, -55.5)] {
            s.set_data(ix, x).unwrap();
            s.set_data(iy, y).unwrap();
            mlp.forward(&mut s, &[ix, iy], &mut binding).unwrap();
            assert_eq!(s.data(outs[0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn reforward_matches_fresh_graph_oracle() {
        let seed = 77;
        let (x2, y2) = (-0.25, 0.6);

        // Wire at one input, then move the leaves and re-evaluate.
        let mut s = GraphStore::new();
        let mlp = new_mlp(&mut s, 2, &[4, 4, 1], &mut Rng::new(seed)).unwrap();
        let ix = s.create_value(0.8, false);
        let iy = s.create_value(0.1, false);
        let mut binding = None;
        let outs = mlp.forward(&mut s, &[ix, iy], &mut binding).unwrap();
        s.set_data(ix, x2).unwrap();
        s.set_data(iy, y2).unwrap();
        mlp.forward(&mut s, &[ix, iy], &mut binding).unwrap();
        let revaluated = s.data(outs[0]).unwrap();

        // Oracle: identical weights wired directly at the second input.
        let mut fresh = GraphStore::new();
        let mlp2 = new_mlp(&mut fresh, 2, &[4, 4, 1], &mut Rng::new(seed)).unwrap();
        let (fresh_outs, _) = wire(&mut fresh, &mlp2, x2, y2);
        assert_eq!(revaluated, fresh.data(fresh_outs[0]).unwrap());
    }

    #[test]
    fn reforward_is_idempotent_and_creates_nothing() {
        let mut s = GraphStore::new();
        let mlp = new_mlp(&mut s, 2, &[4, 4, 1], &mut Rng::new(3)).unwrap();
        let (outs, binding) = wire(&mut s, &mlp, 0.2, 0.9);
        let nodes_before = s.node_count();
        let snapshot: Vec<f64> = binding
            .eval_order()
            .iter()
            .map(|&id| s.data(id).unwrap())
            .collect();

        let inputs: Vec<NodeId> = binding.input_ids().to_vec();
        let mut opt = Some(binding);
        mlp.forward(&mut s, &inputs, &mut opt).unwrap();
        assert_eq!(s.node_count(), nodes_before);
        let after: Vec<f64> = opt
            .as_ref()
            .unwrap()
            .eval_order()
            .iter()
            .map(|&id| s.data(id).unwrap())
            .collect();
        assert_eq!(snapshot, after);
        let _ = outs;
    }

    #[test]
    fn hidden_relu_outputs_are_nonnegative() {
        let mut s = GraphStore::new();
        let mlp = new_mlp(&mut s, 2, &[4, 4, 1], &mut Rng::new(8)).unwrap();
        let ix = s.create_value(0.0, false);
        let iy = s.create_value(0.0, false);
        let mut binding = None;
        mlp.forward(&mut s, &[ix, iy], &mut binding).unwrap();
        let binding = binding.unwrap();
        for (x, y) in [(0.5, 0.5), (-0.9, 0.3), (1.0, -1.0)] {
            s.set_data(ix, x).unwrap();
            s.set_data(iy, y).unwrap();
            binding.reevaluate(&mut s).unwrap();
            for &id in binding.eval_order() {
                if s.node(id).unwrap().op() == Op::Relu {
                    assert!(s.data(id).unwrap() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn arity_and_foreign_binding_errors() {
        let mut s = GraphStore::new();
        let mlp = new_mlp(&mut s, 2, &[2, 1], &mut Rng::new(0)).unwrap();
        let ix = s.create_value(0.0, false);
        assert_eq!(
            mlp.forward(&mut s, &[ix], &mut None).unwrap_err(),
            NnError::InputArity {
                expected: 2,
                got: 1
            }
        );

        let iy = s.create_value(0.0, false);
        let mut binding = None;
        mlp.forward(&mut s, &[ix, iy], &mut binding).unwrap();

        // Same binding against an unrelated store is rejected.
        let mut other = GraphStore::new();
        let mlp_other = new_mlp(&mut other, 2, &[2, 1], &mut Rng::new(0)).unwrap();
        let ox = other.create_value(0.0, false);
        let oy = other.create_value(0.0, false);
        let _ = mlp_other;
        assert_eq!(
            binding
                .as_ref()
                .unwrap()
                .reevaluate(&mut other)
                .unwrap_err(),
            NnError::ForeignBinding
        );
        // Mismatched input list is rejected too.
        let mut s2_binding = binding.clone();
        assert_eq!(
            mlp.forward(&mut s, &[iy, ix], &mut s2_binding).unwrap_err(),
            NnError::BindingInputMismatch
        );
        let _ = (ox, oy);
    }

    #[test]
    fn gradient_check_through_whole_mlp() {
        // Derivative route (backward) versus value route (re-forward finite
        // differences) through every parameter.
        let mut s = GraphStore::new();
        let mlp = new_mlp(&mut s, 2, &[4, 4, 1], &mut Rng::new(12)).unwrap();
        let ix = s.create_value(0.35, false);
        let iy = s.create_value(-0.8, false);
        let mut binding = None;
        let outs = mlp.forward(&mut s, &[ix, iy], &mut binding).unwrap();
        let binding = binding.unwrap();
        let out = outs[0];

        s.backward(out).unwrap();
        let grads: Vec<f64> = mlp
            .get_parameters()
            .iter()
            .map(|&p| s.grad(p).unwrap())
            .collect();

        let relu_gates = |s: &GraphStore| -> Vec<bool> {
            binding
                .eval_order()
                .iter()
                .filter(|&&id| s.node(id).unwrap().op() == Op::Relu)
                .map(|&id| s.data(id).unwrap() > 0.0)
                .collect()
        };
        let base_gates = relu_gates(&s);

        let h = 1e-5;
        let mut checked = 0;
        for (k, &p) in mlp.get_parameters().iter().enumerate() {
            let p0 = s.data(p).unwrap();
            let probe = |delta: f64, s: &mut GraphStore| {
                s.set_data(p, p0 + delta).unwrap();
                binding.reevaluate(s).unwrap();
                (s.data(out).unwrap(), relu_gates(s))
            };
            let (f_plus, gates_plus) = probe(h, &mut s);
            let (f_minus, gates_minus) = probe(-h, &mut s);
            s.set_data(p, p0).unwrap();
            binding.reevaluate(&mut s).unwrap();
            if gates_plus != base_gates || gates_minus != base_gates {
                continue; // perturbation crossed a ReLU kink
            }
            let fd = (f_plus - f_minus) / (2.0 * h);
            let tol = 1e-4 * grads[k].abs().max(fd.abs()).max(1.0);
            assert!(
                (grads[k] - fd).abs() <= tol,
                "param {k}: backward {} vs fd {fd}",
                grads[k]
            );
            checked += 1;
        }
        assert!(
            checked >= 30,
            "only {checked} of 37 parameters were kink-free"
        );
    }

    proptest! {
        #[test]
        fn parameter_count_formula(
            nin in 1usize..5,
            sizes in prop::collection::vec(1usize..6, 1..4),
        ) {
            let mut s = GraphStore::new();
            let mut rng = Rng::new(0);
            let mlp = new_mlp(&mut s, nin, &sizes, &mut rng).unwrap();
            let mut expected = 0;
            let mut fan_in = nin;
            for &nout in &sizes {
                expected += (fan_in + 1) * nout;
                fan_in = nout;
            }
            prop_assert_eq!(mlp.get_parameters().len(), expected);

            // Wire it and check the binding covers every derived node after
            // its operands, and that outputs are finite.
            let inputs: Vec<NodeId> = (0..nin).map(|i| s.create_value(i as f64 / 3.0, false)).collect();
            let mut binding = None;
            let outs = mlp.forward(&mut s, &inputs, &mut binding).unwrap();
            prop_assert_eq!(outs.len(), *sizes.last().unwrap());
            for &o in &outs {
                prop_assert!(s.data(o).unwrap().is_finite());
            }
            let binding = binding.unwrap();
            let mut seen: Vec<NodeId> = inputs.clone();
            seen.extend(mlp.get_parameters());
            for &id in binding.eval_order() {
                for &p in s.node(id).unwrap().prev() {
                    prop_assert!(seen.contains(&p), "{} used before ready", p);
                }
                seen.push(id);
            }
        }
    }
}
