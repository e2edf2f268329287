//! Scalar reverse-mode automatic differentiation over an explicit graph arena.
//!
//! Every scalar lives as a [`ValueNode`] inside a [`GraphStore`]; operations
//! (`add`, `multiply`, `relu`) create new nodes wired to their operands, and
//! [`GraphStore::backward`] propagates gradients from a root back to every
//! node it depends on. The store is an arena: nodes are addressed by small
//! integer [`NodeId`]s issued in creation order (starting at 1) and are never
//! deleted, so the graph is static once wired. Forward values of derived
//! nodes are fixed at creation time; after mutating leaf data with
//! [`GraphStore::set_data`], call [`GraphStore::recompute`] with an evaluation
//! order to refresh them.
//!
//! Backward traversal order is a topological sort computed by a breadth-first
//! queue: a node is emitted only once all of its consumers on a path to the
//! root have been processed, tracked by a per-node grad counter. The order is
//! cached per root and reused until the graph's structure changes (node
//! creation bumps a version; `set_data` does not).

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

/// Identifier of a node within one [`GraphStore`]. Ids start at 1, grow by 1
/// per created node, and are never reused. An id is only meaningful for the
/// store that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    /// Numeric value of the id, as printed by `show`.
    pub fn get(self) -> u32 {
        self.0
    }

    fn index(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Operation that produced a node. Leaves carry [`Op::None`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    None,
    Add,
    Mul,
    Relu,
}

impl Op {
    /// Symbol used by `show`: leaves print two ASCII apostrophes.
    fn symbol(self) -> &'static str {
        match self {
            Op::None => "''",
            Op::Add => "+",
            Op::Mul => "*",
            Op::Relu => "relu",
        }
    }
}

/// Errors from graph operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown node id {0}")]
    UnknownId(NodeId),
}

/// One scalar in the computation graph: its value, accumulated gradient,
/// operand links (`prev`), consumer links (`next`), producing operation, and
/// a trainable-parameter flag. Mutation goes through [`GraphStore`] methods.
#[derive(Debug, Clone)]
pub struct ValueNode {
    id: NodeId,
    data: f64,
    grad: f64,
    prev: Vec<NodeId>,
    next: Vec<NodeId>,
    op: Op,
    is_param: bool,
    /// Grad counter: scheduling bookkeeping for the backward-order queue.
    /// Always 0 outside of an order computation.
    gc: u32,
}

impl ValueNode {
    pub fn id(&self) -> NodeId {
        self.id
    }
    pub fn data(&self) -> f64 {
        self.data
    }
    pub fn grad(&self) -> f64 {
        self.grad
    }
    /// Operand ids, in operation order. Duplicates appear when an operation
    /// uses the same node twice (e.g. `add(a, a)`).
    pub fn prev(&self) -> &[NodeId] {
        &self.prev
    }
    /// Consumer ids, in creation order; one entry per operand slot that uses
    /// this node.
    pub fn next(&self) -> &[NodeId] {
        &self.next
    }
    pub fn op(&self) -> Op {
        self.op
    }
    pub fn is_param(&self) -> bool {
        self.is_param
    }
    pub fn grad_counter(&self) -> u32 {
        self.gc
    }
}

#[derive(Debug)]
struct CachedOrder {
    version: u64,
    order: Vec<NodeId>,
}

/// Issues process-unique store identities so bindings can detect being used
/// against a store other than the one they were wired for. Clones of a store
/// keep its identity: a clone is a snapshot on which existing ids stay valid.
static STORE_IDS: AtomicU64 = AtomicU64::new(1);

/// Arena of [`ValueNode`]s plus the cached backward orders.
#[derive(Debug)]
pub struct GraphStore {
    nodes: Vec<ValueNode>,
    /// Bumped on every node creation; cache entries from older versions are
    /// stale. Data mutation does not bump it.
    version: u64,
    topo_cache: HashMap<NodeId, CachedOrder>,
    store_id: u64,
}

impl Clone for GraphStore {
    fn clone(&self) -> Self {
        GraphStore {
            nodes: self.nodes.clone(),
            version: self.version,
            topo_cache: HashMap::new(),
            store_id: self.store_id,
        }
    }
}

impl Default for GraphStore {
    fn default() -> Self {
        Self::new()
    }
}

impl GraphStore {
    pub fn new() -> Self {
        GraphStore {
            nodes: Vec::new(),
            version: 0,
            topo_cache: HashMap::new(),
            store_id: STORE_IDS.fetch_add(1, Ordering::Relaxed),
        }
    }

    /// Number of nodes created so far.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Process-unique identity of this store (shared by its clones).
    pub fn store_id(&self) -> u64 {
        self.store_id
    }

    fn check(&self, id: NodeId) -> Result<usize, EngineError> {
        let i = id.index();
        if id.0 == 0 || i >= self.nodes.len() {
            return Err(EngineError::UnknownId(id));
        }
        Ok(i)
    }

    /// Read-only view of a node.
    pub fn node(&self, id: NodeId) -> Result<&ValueNode, EngineError> {
        self.check(id).map(|i| &self.nodes[i])
    }

    /// Creates a leaf node holding `data`. `is_param` marks it as trainable:
    /// only parameter nodes are moved by [`GraphStore::step`].
    pub fn create_value(&mut self, data: f64, is_param: bool) -> NodeId {
        self.push_node(data, Op::None, &[], is_param)
    }

    /// Creates `a + b`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, EngineError> {
        self.check(a)?;
        self.check(b)?;
        let data = self.forward_value(Op::Add, &[a, b]);
        Ok(self.push_node(data, Op::Add, &[a, b], false))
    }

    /// Creates `a * b`.
    pub fn multiply(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, EngineError> {
        self.check(a)?;
        self.check(b)?;
        let data = self.forward_value(Op::Mul, &[a, b]);
        Ok(self.push_node(data, Op::Mul, &[a, b], false))
    }

    /// Creates `max(0, a)`.
    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, EngineError> {
        self.check(a)?;
        let data = self.forward_value(Op::Relu, &[a]);
        Ok(self.push_node(data, Op::Relu, &[a], false))
    }

    fn push_node(&mut self, data: f64, op: Op, prev: &[NodeId], is_param: bool) -> NodeId {
        let id = NodeId(u32::try_from(self.nodes.len() + 1).expect("node id overflow"));
        for &p in prev {
            self.nodes[p.index()].next.push(id);
        }
        self.nodes.push(ValueNode {
            id,
            data,
            grad: 0.0,
            prev: prev.to_vec(),
            next: Vec::new(),
            op,
            is_param,
            gc: 0,
        });
        self.version += 1;
        id
    }

    /// Forward rule for one operation over already-valid operand data. The
    /// single source of truth shared by node creation and `recompute`.
    fn forward_value(&self, op: Op, prev: &[NodeId]) -> f64 {
        match op {
            Op::None => unreachable!("leaves have no forward rule"),
            Op::Add => self.nodes[prev[0].index()].data + self.nodes[prev[1].index()].data,
            Op::Mul => self.nodes[prev[0].index()].data * self.nodes[prev[1].index()].data,
            Op::Relu => {
                let x = self.nodes[prev[0].index()].data;
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
        }
    }

    pub fn data(&self, id: NodeId) -> Result<f64, EngineError> {
        self.check(id).map(|i| self.nodes[i].data)
    }

    pub fn grad(&self, id: NodeId) -> Result<f64, EngineError> {
        self.check(id).map(|i| self.nodes[i].grad)
    }

    /// Overwrites a node's data. Descendants keep their old data until
    /// [`GraphStore::recompute`] runs; cached backward orders stay valid
    /// because the structure is unchanged.
    pub fn set_data(&mut self, id: NodeId, data: f64) -> Result<(), EngineError> {
        let i = self.check(id)?;
        self.nodes[i].data = data;
        Ok(())
    }

    /// Re-applies the forward rule of each listed node, in list order. Pass
    /// an order in which every node appears after its operands (a wiring's
    /// evaluation order); leaves are left untouched.
    pub fn recompute(&mut self, ids: &[NodeId]) -> Result<(), EngineError> {
        for &id in ids {
            let i = self.check(id)?;
            if self.nodes[i].op == Op::None {
                continue;
            }
            let prev = std::mem::take(&mut self.nodes[i].prev);
            let data = self.forward_value(self.nodes[i].op, &prev);
            self.nodes[i].prev = prev;
            self.nodes[i].data = data;
        }
        Ok(())
    }

    /// Backward topological order from `root`: `root` first, and every node
    /// only after all of its consumers that lie on a path to `root`. Computed
    /// once per graph version and cached per root.
    pub fn backward_order(&mut self, root: NodeId) -> Result<Vec<NodeId>, EngineError> {
        self.check(root)?;
        if let Some(entry) = self.topo_cache.get(&root) {
            if entry.version == self.version {
                return Ok(entry.order.clone());
            }
        }
        let order = self.compute_order(root);
        self.topo_cache.insert(
            root,
            CachedOrder {
                version: self.version,
                order: order.clone(),
            },
        );
        Ok(order)
    }

    /// Breadth-first topological sort. A node reached from the root may have
    /// several consumers that all need processing first; the per-node grad
    /// counter tracks how many have been emitted, and the node joins the
    /// queue only when the count reaches its consumer total. Counters are
    /// reset to 0 afterwards.
    fn compute_order(&mut self, root: NodeId) -> Vec<NodeId> {
        let n = self.nodes.len();

        // Nodes the root depends on, i.e. everything reachable via `prev`.
        let mut in_reach = vec![false; n];
        in_reach[root.index()] = true;
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            for k in 0..self.nodes[id.index()].prev.len() {
                let p = self.nodes[id.index()].prev[k];
                if !in_reach[p.index()] {
                    in_reach[p.index()] = true;
                    stack.push(p);
                }
            }
        }

        // How many consumer slots of each node belong to the reachable set.
        // Counted per slot so `mul(a, a)` holds `a` back twice.
        let mut pending = vec![0u32; n];
        for i in 0..n {
            if in_reach[i] {
                for k in 0..self.nodes[i].prev.len() {
                    pending[self.nodes[i].prev[k].index()] += 1;
                }
            }
        }

        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        queue.push_back(root);
        while let Some(id) = queue.pop_front() {
            order.push(id);
            for k in 0..self.nodes[id.index()].prev.len() {
                let p = self.nodes[id.index()].prev[k];
                self.nodes[p.index()].gc += 1;
                if self.nodes[p.index()].gc == pending[p.index()] {
                    queue.push_back(p);
                }
            }
        }

        for &id in &order {
            self.nodes[id.index()].gc = 0;
        }
        order
    }

    /// Reverse-mode gradient pass. Seeds `grad(root) += 1`, then walks the
    /// backward order applying each node's local rule, accumulating with `+=`
    /// into operand grads: ADD passes its grad to both operands, MUL passes
    /// `grad * data(other operand)`, RELU passes the grad only where the
    /// operand's forward data is positive (gradient 0 at the kink).
    pub fn backward(&mut self, root: NodeId) -> Result<(), EngineError> {
        let order = self.backward_order(root)?;
        self.nodes[root.index()].grad += 1.0;
        for &id in &order {
            let i = id.index();
            let g = self.nodes[i].grad;
            match self.nodes[i].op {
                Op::None => {}
                Op::Add => {
                    let (a, b) = (self.nodes[i].prev[0], self.nodes[i].prev[1]);
                    self.nodes[a.index()].grad += g;
                    self.nodes[b.index()].grad += g;
                }
                Op::Mul => {
                    let (a, b) = (self.nodes[i].prev[0], self.nodes[i].prev[1]);
                    let (da, db) = (self.nodes[a.index()].data, self.nodes[b.index()].data);
                    self.nodes[a.index()].grad += g * db;
                    self.nodes[b.index()].grad += g * da;
                }
                Op::Relu => {
                    let a = self.nodes[i].prev[0];
                    if self.nodes[a.index()].data > 0.0 {
                        self.nodes[a.index()].grad += g;
                    }
                }
            }
        }
        Ok(())
    }

    /// Gradient-descent step: every parameter node reachable from `root`
    /// moves by `data -= lr * grad`. Non-parameter nodes are untouched.
    pub fn step(&mut self, root: NodeId, lr: f64) -> Result<(), EngineError> {
        let order = self.backward_order(root)?;
        for &id in &order {
            let node = &mut self.nodes[id.index()];
            if node.is_param {
                node.data -= lr * node.grad;
            }
        }
        Ok(())
    }

    /// Clears grad (and the grad counter) on every node reachable from
    /// `root`, parameters included.
    pub fn zero_grads(&mut self, root: NodeId) -> Result<(), EngineError> {
        let order = self.backward_order(root)?;
        for &id in &order {
            let node = &mut self.nodes[id.index()];
            node.grad = 0.0;
            node.gc = 0;
        }
        Ok(())
    }

    /// Like [`GraphStore::zero_grads`] but skips parameter nodes, so their
    /// gradients keep accumulating across a batch while intermediate grads
    /// are reset between samples.
    pub fn zero_nonparam_grads(&mut self, root: NodeId) -> Result<(), EngineError> {
        let order = self.backward_order(root)?;
        for &id in &order {
            let node = &mut self.nodes[id.index()];
            if !node.is_param {
                node.grad = 0.0;
                node.gc = 0;
            }
        }
        Ok(())
    }

    /// One-line description of a node. Floats are rendered as the shortest
    /// decimal string that round-trips (keeping a fractional part, so zero
    /// prints `0.0`); the grad counter is displayed float-style.
    pub fn show(&self, id: NodeId) -> Result<String, EngineError> {
        let n = self.node(id)?;
        let join = |ids: &[NodeId]| {
            ids.iter()
                .map(|id| id.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        Ok(format!(
            "Value(self: {}, data: {:?}, grad: {:?}, prev: {}, next: {}, op: {}, isparam: {}, GC: {:?})",
            n.id,
            n.data,
            n.grad,
            join(&n.prev),
            join(&n.next),
            n.op.symbol(),
            n.is_param as u8,
            n.gc as f64,
        ))
    }
}
