//! Boardman-Vogt tensor products of representables, presented through
//! percolation schemes.
//!
//! The tensor `Omega[S] (x) Omega[T]` of two representables is a union of
//! representables `m(T_1) u ... u m(T_N)`, one for each percolation scheme:
//! a planar tree whose edges are labelled by pairs `(a, x)` of an `S`-edge
//! and a `T`-edge, and whose vertices are white copies of `S`-vertices or
//! black copies of `T`-vertices. The initial scheme stacks a black copy of
//! `T` on every leaf of the white tree `S`; the moves percolate black
//! vertices towards the root, one white vertex at a time, and generate the
//! covering relation of a poset with the initial scheme as minimum and the
//! fully percolated scheme as maximum.
//!
//! Dendrices of the union are maps into some scheme, identified along the
//! interchange relation: a map is recorded by the pair colour of every shape
//! edge together with the percolation normal form of the labelled cluster
//! sitting over every shape vertex, so two maps are equal exactly when these
//! records agree. Schemes are deduplicated by their labelled form, not just
//! their shape; the pair labels are the edge names, and trees are stored in
//! preorder, so structural equality is the canonical labelled form.

use std::collections::VecDeque;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::omega::{self, OmegaArrow};
use crate::tree::{Edge, Tree, Vertex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TensorError {
    /// The covering relation admits no linear extension.
    #[error("not-a-poset: {0}")]
    NotAPoset(String),
    /// A labelled cluster percolated to two distinct normal forms. The moves
    /// are locally confluent, so this indicates corrupt scheme data.
    #[error("percolation-diverged: {0}")]
    Diverged(String),
}

/// Render the pair label of a tensor edge as a single edge name.
pub(crate) fn pair_name(a: &str, x: &str) -> Edge {
    format!("({a},{x})")
}

/// One stage of the percolation poset: a planar tree over the pair colours
/// of `s` and `t`. Every vertex is a copy of an `s`-vertex (white) or of a
/// `t`-vertex (black); `whites` records the white ones by their output edge,
/// and `labels` decodes every edge into its `(s-edge, t-edge)` pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PercolationScheme {
    pub s: Tree,
    pub t: Tree,
    pub tree: Tree,
    pub whites: BTreeSet<Edge>,
    pub labels: BTreeMap<Edge, (Edge, Edge)>,
}

impl PercolationScheme {
    /// The minimal scheme: `s` at the root colour of `t`, with a black copy
    /// of all of `t` on top of every leaf of `s`.
    pub fn initial(s: &Tree, t: &Tree) -> PercolationScheme {
        let rt = t.root();
        let mut vertices = Vec::new();
        let mut whites = BTreeSet::new();
        let mut labels = BTreeMap::new();
        for v in s.vertices() {
            let copy = Vertex {
                inputs: v.inputs.iter().map(|a| pair_name(a, rt)).collect(),
                output: pair_name(&v.output, rt),
            };
            whites.insert(copy.output.clone());
            vertices.push(copy);
        }
        for a in s.edges() {
            labels.insert(pair_name(&a, rt), (a.clone(), rt.clone()));
        }
        for l in s.leaves() {
            for w in t.vertices() {
                vertices.push(Vertex {
                    inputs: w.inputs.iter().map(|x| pair_name(&l, x)).collect(),
                    output: pair_name(&l, &w.output),
                });
            }
            for x in t.edges() {
                labels.insert(pair_name(&l, &x), (l.clone(), x.clone()));
            }
        }
        let tree = Tree::new(pair_name(s.root(), rt), vertices)
            .expect("the initial scheme is a tree");
        labels.retain(|e, _| tree.has_edge(e));
        PercolationScheme { s: s.clone(), t: t.clone(), tree, whites, labels }
    }

    /// The maximal scheme: `t` at the root colour of `s`, with a white copy
    /// of all of `s` on top of every leaf of `t`.
    pub fn terminal(s: &Tree, t: &Tree) -> PercolationScheme {
        let rs = s.root();
        let mut vertices = Vec::new();
        let mut whites = BTreeSet::new();
        let mut labels = BTreeMap::new();
        for w in t.vertices() {
            vertices.push(Vertex {
                inputs: w.inputs.iter().map(|x| pair_name(rs, x)).collect(),
                output: pair_name(rs, &w.output),
            });
        }
        for x in t.edges() {
            labels.insert(pair_name(rs, &x), (rs.clone(), x.clone()));
        }
        for l in t.leaves() {
            for v in s.vertices() {
                let copy = Vertex {
                    inputs: v.inputs.iter().map(|a| pair_name(a, &l)).collect(),
                    output: pair_name(&v.output, &l),
                };
                whites.insert(copy.output.clone());
                vertices.push(copy);
            }
            for a in s.edges() {
                labels.insert(pair_name(&a, &l), (a.clone(), l.clone()));
            }
        }
        let tree = Tree::new(pair_name(rs, t.root()), vertices)
            .expect("the terminal scheme is a tree");
        labels.retain(|e, _| tree.has_edge(e));
        PercolationScheme { s: s.clone(), t: t.clone(), tree, whites, labels }
    }

    /// The pair label of an edge of the scheme.
    pub fn label(&self, e: &str) -> &(Edge, Edge) {
        &self.labels[e]
    }

    /// Structural invariants of a full scheme: every edge decodes to a pair
    /// of factor edges, injectively; the root carries both root colours and
    /// the leaves are exactly the pairs of factor leaves; every white vertex
    /// is a copy of an `s`-vertex at a fixed `t`-colour and dually for black
    /// vertices; and contracting the black vertices recovers `s` while
    /// contracting the white ones recovers `t`. The contractions are checked
    /// through a union-find over edges: classes joined through the other
    /// colour must be the fibres of the label projection, one connected
    /// class per factor edge.
    pub fn validate(&self) -> Vec<String> {
        let mut report = Vec::new();
        let edges = self.tree.edge_set();
        for e in &edges {
            match self.labels.get(e) {
                None => report.push(format!("edge {e:?} carries no pair label")),
                Some((a, x)) => {
                    if !self.s.has_edge(a) {
                        report.push(format!("label {a:?} of {e:?} is not an edge of s"));
                    }
                    if !self.t.has_edge(x) {
                        report.push(format!("label {x:?} of {e:?} is not an edge of t"));
                    }
                }
            }
        }
        for e in self.labels.keys() {
            if !edges.contains(e) {
                report.push(format!("label for absent edge {e:?}"));
            }
        }
        let distinct: BTreeSet<&(Edge, Edge)> = self.labels.values().collect();
        if distinct.len() != self.labels.len() {
            report.push("two edges share a pair label".to_string());
        }
        if self.labels.get(self.tree.root())
            != Some(&(self.s.root().clone(), self.t.root().clone()))
        {
            report.push("root is not labelled by the pair of root colours".to_string());
        }
        let leaf_labels: BTreeSet<(Edge, Edge)> = self
            .tree
            .leaves()
            .iter()
            .filter_map(|e| self.labels.get(e).cloned())
            .collect();
        let expected: BTreeSet<(Edge, Edge)> = self
            .s
            .leaves()
            .iter()
            .flat_map(|a| self.t.leaves().into_iter().map(move |x| (a.clone(), x.clone())))
            .collect();
        if leaf_labels != expected || self.tree.leaves().len() != expected.len() {
            report.push("leaves are not the pairs of factor leaves".to_string());
        }
        for v in self.tree.vertices() {
            let Some((b, x)) = self.labels.get(&v.output) else { continue };
            let ins: Vec<&(Edge, Edge)> =
                v.inputs.iter().filter_map(|e| self.labels.get(e)).collect();
            if ins.len() != v.inputs.len() {
                continue;
            }
            if self.whites.contains(&v.output) {
                if ins.iter().any(|(_, xi)| xi != x) {
                    report.push(format!("white vertex at {:?} mixes t-colours", v.output));
                }
                match self.s.top_vertex(b) {
                    None => report.push(format!("white vertex at {:?} copies no s-vertex", v.output)),
                    Some(ix) => {
                        let u = &self.s.vertices()[ix];
                        let firsts: Vec<&Edge> = ins.iter().map(|(a, _)| a).collect();
                        if firsts != u.inputs.iter().collect::<Vec<_>>() {
                            report.push(format!(
                                "white vertex at {:?} does not match its s-vertex",
                                v.output
                            ));
                        }
                    }
                }
            } else {
                if ins.iter().any(|(ai, _)| ai != b) {
                    report.push(format!("black vertex at {:?} mixes s-colours", v.output));
                }
                match self.t.top_vertex(x) {
                    None => report.push(format!("black vertex at {:?} copies no t-vertex", v.output)),
                    Some(ix) => {
                        let w = &self.t.vertices()[ix];
                        let seconds: Vec<&Edge> = ins.iter().map(|(_, xi)| xi).collect();
                        if seconds != w.inputs.iter().collect::<Vec<_>>() {
                            report.push(format!(
                                "black vertex at {:?} does not match its t-vertex",
                                v.output
                            ));
                        }
                    }
                }
            }
        }
        report.extend(self.projection_report(true));
        report.extend(self.projection_report(false));
        report
    }

    /// Coverage half of the projection invariant. Erasing `t`-colours turns
    /// every white vertex into a literal copy of its `s`-vertex (checked
    /// above), so contracting the black vertices recovers `s` as soon as
    /// every `s`-edge and every `s`-vertex still has a copy. The moves only
    /// erase copies when the other factor has a stump, whose percolation
    /// legitimately swallows the slots above it, so coverage is required
    /// exactly when the other factor is stump-free. Dually for `t`.
    fn projection_report(&self, to_s: bool) -> Vec<String> {
        let mut report = Vec::new();
        let other = if to_s { &self.t } else { &self.s };
        if other.vertices().iter().any(|v| v.inputs.is_empty()) {
            return report;
        }
        let factor = if to_s { &self.s } else { &self.t };
        let side = if to_s { "s" } else { "t" };
        let covered: BTreeSet<&Edge> =
            self.labels.values().map(|(a, x)| if to_s { a } else { x }).collect();
        for e in factor.edges() {
            if !covered.contains(&e) {
                report.push(format!("projection to {side} misses edge {e:?}"));
            }
        }
        let copied: BTreeSet<&Edge> = self
            .tree
            .vertices()
            .iter()
            .filter(|v| self.whites.contains(&v.output) == to_s)
            .filter_map(|v| self.labels.get(&v.output))
            .map(|(a, x)| if to_s { a } else { x })
            .collect();
        for v in factor.vertices() {
            if !copied.contains(&v.output) {
                report.push(format!(
                    "projection to {side} misses the vertex at {:?}",
                    v.output
                ));
            }
        }
        report
    }
}

/// All schemes reachable from `p` by one percolation move, in preorder of
/// the white vertex moved. A white copy of an `s`-vertex percolates when its
/// `t`-colour has a vertex of `t` above it and every input edge carries a
/// black top vertex; this includes the nullary cases, where a white stump
/// percolates through the `t`-vertex over its colour, and where a white
/// vertex topped by black stumps collapses to a single black stump.
pub fn percolation_step(p: &PercolationScheme) -> Vec<PercolationScheme> {
    let mut out = Vec::new();
    for v in p.tree.vertices() {
        if !p.whites.contains(&v.output) {
            continue;
        }
        let (b, y) = p.labels[&v.output].clone();
        let Some(wix) = p.t.top_vertex(&y) else { continue };
        let all_black = v.inputs.iter().all(|e| {
            p.tree
                .top_vertex(e)
                .is_some_and(|ix| !p.whites.contains(&p.tree.vertices()[ix].output))
        });
        if !all_black {
            continue;
        }
        out.push(percolate_at(p, v, &p.t.vertices()[wix].inputs.clone(), &b));
    }
    out
}

/// Replace the white vertex `v` and the black copies on its inputs by a
/// black copy below white copies, one per input `x_j` of the `t`-vertex
/// being percolated. The edges above the removed black copies are reused by
/// name, so the subtrees over them transplant unchanged.
fn percolate_at(
    p: &PercolationScheme,
    v: &Vertex,
    w_inputs: &[Edge],
    b: &str,
) -> PercolationScheme {
    let drop: BTreeSet<&Edge> = v.inputs.iter().chain([&v.output]).collect();
    let mut vertices: Vec<Vertex> = p
        .tree
        .vertices()
        .iter()
        .filter(|u| !drop.contains(&u.output))
        .cloned()
        .collect();
    let mut whites = p.whites.clone();
    let mut labels = p.labels.clone();
    whites.remove(&v.output);
    for e in &v.inputs {
        labels.remove(e);
    }
    let a_list: Vec<Edge> = v.inputs.iter().map(|e| p.labels[e].0.clone()).collect();
    let mut black_inputs = Vec::new();
    for xj in w_inputs {
        let f = pair_name(b, xj);
        debug_assert!(!labels.contains_key(&f), "pair edge {f:?} created twice");
        labels.insert(f.clone(), (b.to_string(), xj.clone()));
        whites.insert(f.clone());
        vertices.push(Vertex {
            inputs: a_list.iter().map(|a| pair_name(a, xj)).collect(),
            output: f.clone(),
        });
        black_inputs.push(f);
    }
    vertices.push(Vertex { inputs: black_inputs, output: v.output.clone() });
    let tree = Tree::new(p.tree.root().clone(), vertices)
        .expect("a percolation move preserves the tree laws");
    PercolationScheme { s: p.s.clone(), t: p.t.clone(), tree, whites, labels }
}

/// Close the initial scheme under percolation moves. Returns the schemes in
/// breadth-first discovery order, the initial scheme first, together with
/// the covering relation as index pairs `(earlier, later)` of all one-step
/// moves. The closure is finite because scheme edges are pairwise distinct
/// pairs of factor edges.
pub fn enumerate_schemes(
    s: &Tree,
    t: &Tree,
) -> (Vec<PercolationScheme>, Vec<(usize, usize)>) {
    let start = PercolationScheme::initial(s, t);
    let mut index = BTreeMap::from([(start.clone(), 0usize)]);
    let mut list = vec![start];
    let mut queue = VecDeque::from([0usize]);
    let mut covering = BTreeSet::new();
    while let Some(i) = queue.pop_front() {
        for q in percolation_step(&list[i]) {
            let j = match index.get(&q) {
                Some(&j) => j,
                None => {
                    let j = list.len();
                    index.insert(q.clone(), j);
                    list.push(q);
                    queue.push_back(j);
                    j
                }
            };
            covering.insert((i, j));
        }
    }
    (list, covering.into_iter().collect())
}

/// Sources and sinks of the covering digraph. A valid percolation poset has
/// exactly one of each: the initial and the terminal scheme.
pub fn extremes(
    schemes: &[PercolationScheme],
    covering: &[(usize, usize)],
) -> (Vec<usize>, Vec<usize>) {
    let mut has_in = vec![false; schemes.len()];
    let mut has_out = vec![false; schemes.len()];
    for &(i, j) in covering {
        has_out[i] = true;
        has_in[j] = true;
    }
    (
        (0..schemes.len()).filter(|&i| !has_in[i]).collect(),
        (0..schemes.len()).filter(|&i| !has_out[i]).collect(),
    )
}

/// A deterministic linear extension of the covering relation: repeatedly
/// emit the scheme least in the derived order among those whose predecessors
/// are all emitted. Fails when the covering digraph has a cycle.
pub fn linearize(
    schemes: &[PercolationScheme],
    covering: &[(usize, usize)],
) -> Result<Vec<usize>, TensorError> {
    let n = schemes.len();
    let mut indegree = vec![0usize; n];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j) in covering {
        indegree[j] += 1;
        succs[i].push(j);
    }
    let mut ready: BTreeSet<(&PercolationScheme, usize)> =
        (0..n).filter(|&i| indegree[i] == 0).map(|i| (&schemes[i], i)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&(p, i)) = ready.iter().next() {
        ready.remove(&(p, i));
        order.push(i);
        for &j in &succs[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.insert((&schemes[j], j));
            }
        }
    }
    if order.len() != n {
        return Err(TensorError::NotAPoset(format!(
            "{} schemes remain on cycles",
            n - order.len()
        )));
    }
    Ok(order)
}

/// The embedding of the representable of a scheme into the tensor: each edge
/// of the scheme tree is sent to its pair colour. Faces of the scheme embed
/// by restriction, so the images of two faces are nested exactly when one is
/// a face of the other.
pub fn scheme_mono(p: &PercolationScheme) -> BTreeMap<Edge, (Edge, Edge)> {
    p.labels.clone()
}

/// The percolation normal form of the labelled cluster over one vertex of a
/// shape mapped into a scheme. Equality of normal forms is exactly the
/// interchange relation on tensor operations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct NormalCluster {
    pub tree: Tree,
    pub whites: BTreeSet<Edge>,
    pub labels: BTreeMap<Edge, (Edge, Edge)>,
}

/// A dendrex of the tensor at some shape: the pair colour of every shape
/// edge and the normal form of the operation over every shape vertex, keyed
/// by the vertex output. Two maps into schemes are the same dendrex of the
/// union exactly when these records agree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TensorDendrex {
    pub colours: BTreeMap<Edge, (Edge, Edge)>,
    pub ops: BTreeMap<Edge, NormalCluster>,
}

type NfMemo = BTreeMap<(Tree, BTreeSet<Edge>), NormalCluster>;

/// Restrict a scheme to the subtree realizing `sig`, keeping the factors so
/// the nullary moves stay available on the fragment.
fn fragment(p: &PercolationScheme, sig: &crate::tree::Signature) -> PercolationScheme {
    let tree = p
        .tree
        .subtree_of_signature(sig)
        .expect("the signature of an arrow vertex is realizable");
    // only vertices of the fragment keep their colour; a fragment leaf may
    // top a white vertex of the ambient scheme without carrying it
    let whites = tree
        .vertices()
        .iter()
        .map(|v| &v.output)
        .filter(|e| p.whites.contains(*e))
        .cloned()
        .collect();
    let labels =
        p.labels.iter().filter(|(e, _)| tree.has_edge(e)).map(|(e, l)| (e.clone(), l.clone())).collect();
    PercolationScheme { s: p.s.clone(), t: p.t.clone(), tree, whites, labels }
}

/// Percolate a fragment to its normal form. The closure is finite, and every
/// scheme in it reaches the same sink, so each explored fragment is memoized
/// to the one normal form; two sinks would mean corrupt data and are
/// reported, never repaired.
fn normal_form(frag: PercolationScheme, memo: &mut NfMemo) -> Result<NormalCluster, TensorError> {
    let key = (frag.tree.clone(), frag.whites.clone());
    if let Some(hit) = memo.get(&key) {
        return Ok(hit.clone());
    }
    let mut index = BTreeSet::from([key.clone()]);
    let mut queue = VecDeque::from([frag.clone()]);
    let mut explored = vec![key];
    let mut sinks: BTreeSet<NormalCluster> = BTreeSet::new();
    while let Some(p) = queue.pop_front() {
        let next = percolation_step(&p);
        if next.is_empty() {
            sinks.insert(NormalCluster {
                tree: p.tree.clone(),
                whites: p.whites.clone(),
                labels: p.labels.clone(),
            });
            continue;
        }
        for q in next {
            let k = (q.tree.clone(), q.whites.clone());
            if let Some(hit) = memo.get(&k) {
                sinks.insert(hit.clone());
                continue;
            }
            if index.insert(k.clone()) {
                explored.push(k);
                queue.push_back(q);
            }
        }
    }
    if sinks.len() != 1 {
        return Err(TensorError::Diverged(format!(
            "cluster with root {:?} has {} normal forms",
            frag.tree.root(),
            sinks.len()
        )));
    }
    let nf = sinks.into_iter().next().expect("one sink");
    for k in explored {
        memo.insert(k, nf.clone());
    }
    Ok(nf)
}

fn arrow_dendrex_memo(
    p: &PercolationScheme,
    f: &OmegaArrow,
    memo: &mut NfMemo,
) -> Result<TensorDendrex, TensorError> {
    debug_assert_eq!(f.target(), &p.tree, "arrow must land in the scheme tree");
    let colours = f
        .source()
        .edges()
        .into_iter()
        .map(|e| {
            let l = p.labels[f.apply(&e)].clone();
            (e, l)
        })
        .collect();
    let mut ops = BTreeMap::new();
    for v in f.source().vertices() {
        let nf = normal_form(fragment(p, &f.vertex_signature(v)), memo)?;
        ops.insert(v.output.clone(), nf);
    }
    Ok(TensorDendrex { colours, ops })
}

/// The dendrex recorded by a map of shapes into a scheme.
pub fn arrow_dendrex(
    p: &PercolationScheme,
    f: &OmegaArrow,
) -> Result<TensorDendrex, TensorError> {
    arrow_dendrex_memo(p, f, &mut NfMemo::new())
}

/// A reusable normal form memo. Dendrex extraction explores the interchange
/// closure of every cluster it meets; sharing one cache across a walk keeps
/// that exploration linear in the number of distinct clusters.
#[derive(Debug, Default)]
pub struct DendrexCache(NfMemo);

impl DendrexCache {
    pub fn new() -> DendrexCache {
        DendrexCache(NfMemo::new())
    }

    /// The dendrex recorded by a map of shapes into a scheme.
    pub fn dendrex(
        &mut self,
        p: &PercolationScheme,
        f: &OmegaArrow,
    ) -> Result<TensorDendrex, TensorError> {
        arrow_dendrex_memo(p, f, &mut self.0)
    }

    /// Normal form of a caller-built white/black fragment against the move
    /// relation of its named factors. The fragment need not be a full
    /// scheme; only its tree, white markers and labels are consulted.
    pub fn normalize(&mut self, frag: PercolationScheme) -> Result<NormalCluster, TensorError> {
        normal_form(frag, &mut self.0)
    }
}

/// All dendrices of the image of one scheme at the given shape.
pub fn scheme_dendrices(
    p: &PercolationScheme,
    shape: &Tree,
) -> Result<BTreeSet<TensorDendrex>, TensorError> {
    let mut memo = NfMemo::new();
    scheme_dendrices_memo(p, shape, &mut memo)
}

fn scheme_dendrices_memo(
    p: &PercolationScheme,
    shape: &Tree,
    memo: &mut NfMemo,
) -> Result<BTreeSet<TensorDendrex>, TensorError> {
    let mut out = BTreeSet::new();
    for f in omega::arrows_between(shape, &p.tree).iter() {
        out.insert(arrow_dendrex_memo(p, f, memo)?);
    }
    Ok(out)
}

/// The dendrices of `Omega[S] (x) Omega[T]` at the given shape: maps into
/// any scheme, identified along interchange.
pub fn tensor_dendrices(
    s: &Tree,
    t: &Tree,
    shape: &Tree,
) -> Result<Vec<TensorDendrex>, TensorError> {
    let (schemes, _) = enumerate_schemes(s, t);
    let mut memo = NfMemo::new();
    let mut out = BTreeSet::new();
    for p in &schemes {
        out.extend(scheme_dendrices_memo(p, shape, &mut memo)?);
    }
    Ok(out.into_iter().collect())
}

/// The tensor of two representables as the ordered union of its schemes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TensorUnion {
    pub s: Tree,
    pub t: Tree,
    pub schemes: Vec<PercolationScheme>,
    pub covering: Vec<(usize, usize)>,
    /// A linear extension of the covering relation, as indices into
    /// `schemes`; the initial scheme comes first and the terminal one last.
    pub order: Vec<usize>,
}

impl TensorUnion {
    pub fn new(s: &Tree, t: &Tree) -> Result<TensorUnion, TensorError> {
        let (schemes, covering) = enumerate_schemes(s, t);
        let order = linearize(&schemes, &covering)?;
        Ok(TensorUnion { s: s.clone(), t: t.clone(), schemes, covering, order })
    }

    /// Dendrices of the whole union at a shape.
    pub fn dendrices(&self, shape: &Tree) -> Result<BTreeSet<TensorDendrex>, TensorError> {
        self.prefix_dendrices(self.schemes.len(), shape)
    }

    /// Dendrices of the union of the first `count` schemes in the linear
    /// order; the filtration these prefixes generate is the one anodyne
    /// certificates walk.
    pub fn prefix_dendrices(
        &self,
        count: usize,
        shape: &Tree,
    ) -> Result<BTreeSet<TensorDendrex>, TensorError> {
        let mut memo = NfMemo::new();
        let mut out = BTreeSet::new();
        for &i in self.order.iter().take(count) {
            out.extend(scheme_dendrices_memo(&self.schemes[i], shape, &mut memo)?);
        }
        Ok(out)
    }

    /// Scheme invariants plus poset shape: the stored data must replay from
    /// the factors, the covering must have the initial scheme as unique
    /// source and the terminal one as unique sink, and the linear order must
    /// respect the covering.
    pub fn validate(&self) -> Vec<String> {
        let mut report: Vec<String> =
            self.schemes.iter().flat_map(|p| p.validate()).collect();
        let (schemes, covering) = enumerate_schemes(&self.s, &self.t);
        if schemes != self.schemes {
            report.push("stored schemes differ from the enumeration".to_string());
        }
        if covering != self.covering {
            report.push("stored covering differs from the one-step relation".to_string());
        }
        let (sources, sinks) = extremes(&self.schemes, &self.covering);
        let initial = PercolationScheme::initial(&self.s, &self.t);
        let terminal = PercolationScheme::terminal(&self.s, &self.t);
        if sources.len() != 1 || self.schemes[sources[0]] != initial {
            report.push("the initial scheme is not the unique source".to_string());
        }
        if sinks.len() != 1 || self.schemes[sinks[0]] != terminal {
            report.push("the terminal scheme is not the unique sink".to_string());
        }
        let mut pos = vec![0usize; self.schemes.len()];
        if self.order.len() != self.schemes.len() {
            report.push("the linear order is not a permutation".to_string());
        } else {
            for (k, &i) in self.order.iter().enumerate() {
                pos[i] = k;
            }
            if self.covering.iter().any(|&(i, j)| pos[i] >= pos[j]) {
                report.push("the linear order violates the covering".to_string());
            }
        }
        report
    }

    /// The Hasse diagram of the percolation poset in DOT format, nodes named
    /// by linear position.
    pub fn hasse_dot(&self) -> String {
        let mut pos = vec![0usize; self.schemes.len()];
        for (k, &i) in self.order.iter().enumerate() {
            pos[i] = k;
        }
        let mut lines = vec!["digraph percolation {".to_string()];
        for k in 0..self.order.len() {
            lines.push(format!("  T{};", k + 1));
        }
        let mut arcs: Vec<(usize, usize)> =
            self.covering.iter().map(|&(i, j)| (pos[i], pos[j])).collect();
        arcs.sort_unstable();
        for (i, j) in arcs {
            lines.push(format!("  T{} -> T{};", i + 1, j + 1));
        }
        lines.push("}".to_string());
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::enumerate_trees;

    /// A binary vertex over a unary one: leaves `p`, `q`, inner edge `e`,
    /// root `r`.
    fn s_pair() -> Tree {
        Tree::new(
            "r".into(),
            vec![
                Vertex { inputs: vec!["e".into()], output: "r".into() },
                Vertex { inputs: vec!["p".into(), "q".into()], output: "e".into() },
            ],
        )
        .unwrap()
    }

    /// Two unary vertices over a binary one: edges `1` (root) to `5`.
    fn t_pair() -> Tree {
        Tree::new(
            "1".into(),
            vec![
                Vertex { inputs: vec!["2".into(), "4".into()], output: "1".into() },
                Vertex { inputs: vec!["3".into()], output: "2".into() },
                Vertex { inputs: vec!["5".into()], output: "4".into() },
            ],
        )
        .unwrap()
    }

    /// The covering digraph of the percolation poset of `s_pair` and
    /// `t_pair`, frozen by hand from the fourteen schemes: node `k` stands
    /// for the scheme at linear position `k` of the published drawing.
    const FROZEN_HASSE: [(usize, usize); 21] = [
        (1, 2),
        (2, 3),
        (2, 6),
        (2, 4),
        (3, 7),
        (3, 5),
        (6, 7),
        (6, 9),
        (4, 5),
        (4, 9),
        (7, 8),
        (7, 10),
        (5, 10),
        (9, 10),
        (9, 12),
        (8, 11),
        (10, 11),
        (10, 13),
        (12, 13),
        (11, 14),
        (13, 14),
    ];

    /// Backtracking digraph isomorphism for small vertex counts, pruned by
    /// degree signatures.
    struct IsoSearch {
        n: usize,
        louts: Vec<usize>,
        lins: Vec<usize>,
        routs: Vec<usize>,
        rins: Vec<usize>,
        lset: BTreeSet<(usize, usize)>,
        rset: BTreeSet<(usize, usize)>,
    }

    impl IsoSearch {
        fn assign(&self, v: usize, image: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
            if v == self.n {
                return true;
            }
            for w in 0..self.n {
                if used[w] || self.louts[v] != self.routs[w] || self.lins[v] != self.rins[w] {
                    continue;
                }
                let consistent = (0..v).all(|u| {
                    self.lset.contains(&(u, v)) == self.rset.contains(&(image[u], w))
                        && self.lset.contains(&(v, u)) == self.rset.contains(&(w, image[u]))
                });
                if !consistent {
                    continue;
                }
                image[v] = w;
                used[w] = true;
                if self.assign(v + 1, image, used) {
                    return true;
                }
                used[w] = false;
            }
            false
        }
    }

    fn digraphs_isomorphic(n: usize, left: &[(usize, usize)], right: &[(usize, usize)]) -> bool {
        if left.len() != right.len() {
            return false;
        }
        let degrees = |arcs: &[(usize, usize)]| {
            let mut outs = vec![0usize; n];
            let mut ins = vec![0usize; n];
            for &(i, j) in arcs {
                outs[i] += 1;
                ins[j] += 1;
            }
            (outs, ins)
        };
        let (louts, lins) = degrees(left);
        let (routs, rins) = degrees(right);
        let search = IsoSearch {
            n,
            louts,
            lins,
            routs,
            rins,
            lset: left.iter().copied().collect(),
            rset: right.iter().copied().collect(),
        };
        search.assign(0, &mut vec![0; n], &mut vec![false; n])
    }

    #[test]
    fn fourteen_schemes_with_the_recorded_hasse_diagram() {
        let s = s_pair();
        let t = t_pair();
        let union = TensorUnion::new(&s, &t).unwrap();
        assert_eq!(union.schemes.len(), 14);
        assert_eq!(union.covering.len(), 21);
        assert_eq!(union.validate(), Vec::<String>::new());
        assert_eq!(union.order[0], 0);
        assert_eq!(union.schemes[union.order[0]], PercolationScheme::initial(&s, &t));
        assert_eq!(
            union.schemes[*union.order.last().unwrap()],
            PercolationScheme::terminal(&s, &t)
        );
        let frozen: Vec<(usize, usize)> =
            FROZEN_HASSE.iter().map(|&(i, j)| (i - 1, j - 1)).collect();
        assert!(digraphs_isomorphic(14, &union.covering, &frozen));
        // pair colours at shape eta: every pair of factor edges occurs
        let points = tensor_dendrices(&s, &t, &Tree::eta("e0")).unwrap();
        assert_eq!(points.len(), s.edges().len() * t.edges().len());
        // breadth-first enumeration is reproducible
        let again = TensorUnion::new(&s, &t).unwrap();
        assert_eq!(union, again);
    }

    #[test]
    fn corolla_pairs_have_exactly_two_schemes() {
        for (m, n) in [(1usize, 1usize), (2, 1), (2, 2), (3, 2)] {
            let (schemes, covering) = enumerate_schemes(&Tree::corolla(m), &Tree::corolla(n));
            assert_eq!(schemes.len(), 2, "C_{m} (x) C_{n}");
            assert_eq!(covering, vec![(0, 1)]);
            for p in &schemes {
                assert_eq!(p.validate(), Vec::<String>::new());
            }
        }
    }

    #[test]
    fn stump_factors_percolate_to_two_schemes() {
        for (s, t) in [
            (Tree::corolla(0), Tree::corolla(1)),
            (Tree::corolla(1), Tree::corolla(0)),
            (Tree::corolla(0), Tree::corolla(0)),
            (Tree::corolla(0), Tree::corolla(2)),
        ] {
            let union = TensorUnion::new(&s, &t).unwrap();
            assert_eq!(union.schemes.len(), 2);
            assert_eq!(union.validate(), Vec::<String>::new());
        }
    }

    #[test]
    fn eta_factor_recovers_the_representable() {
        let t = t_pair();
        let eta = Tree::eta("u");
        let (schemes, covering) = enumerate_schemes(&eta, &t);
        assert_eq!(schemes.len(), 1);
        assert!(covering.is_empty());
        for shape in [Tree::eta("e0"), Tree::corolla(1), Tree::corolla(2), Tree::linear(2)] {
            let dd = tensor_dendrices(&eta, &t, &shape).unwrap();
            assert_eq!(dd.len(), omega::arrows_between(&shape, &t).len());
        }
        let s = s_pair();
        let (schemes, _) = enumerate_schemes(&s, &Tree::eta("u"));
        assert_eq!(schemes.len(), 1);
        assert_eq!(schemes[0], PercolationScheme::terminal(&s, &Tree::eta("u")));
    }

    #[test]
    fn symmetry_audit_on_small_pairs() {
        let mut pool = enumerate_trees(2, 3);
        pool.retain(|a| a.degree() >= 1);
        for a in &pool {
            for b in &pool {
                if a.degree() + b.degree() > 3 {
                    continue;
                }
                let (left, _) = enumerate_schemes(a, b);
                let (right, _) = enumerate_schemes(b, a);
                assert_eq!(left.len(), right.len(), "{a:?} against {b:?}");
                for p in left.iter().chain(right.iter()) {
                    assert_eq!(p.validate(), Vec::<String>::new());
                }
            }
        }
        // the five-vertex pair of the frozen poset, both ways round
        let (left, _) = enumerate_schemes(&s_pair(), &t_pair());
        let (right, _) = enumerate_schemes(&t_pair(), &s_pair());
        assert_eq!(left.len(), 14);
        assert_eq!(right.len(), 14);
    }

    /// The tensor of two free unary operads has colours `(a, x)` for the two
    /// edges of each factor, one generating operation in each coordinate,
    /// and the single interchange relation identifying the two composites
    /// from `(top, top)` to `(root, root)`. Counting its operations directly
    /// gives four colours, nine unary operations, and sixteen composable
    /// pairs of unary operations.
    #[test]
    fn unary_against_unary_matches_the_free_interchange_count() {
        let c1 = Tree::corolla(1);
        assert_eq!(tensor_dendrices(&c1, &c1, &Tree::eta("e0")).unwrap().len(), 4);
        assert_eq!(tensor_dendrices(&c1, &c1, &Tree::corolla(1)).unwrap().len(), 9);
        assert_eq!(tensor_dendrices(&c1, &c1, &Tree::linear(2)).unwrap().len(), 16);
    }

    #[test]
    fn interchange_identifies_the_percolated_composite() {
        let c1 = Tree::corolla(1);
        let (schemes, covering) = enumerate_schemes(&c1, &c1);
        assert_eq!(schemes.len(), 2);
        assert_eq!(covering, vec![(0, 1)]);
        let shape = Tree::corolla(1);
        let left = scheme_dendrices(&schemes[0], &shape).unwrap();
        let right = scheme_dendrices(&schemes[1], &shape).unwrap();
        assert_eq!(left.len(), 6);
        assert_eq!(right.len(), 6);
        // shared: two degenerate dendrices at the common colours and the
        // full composite, whose clusters percolate to the same normal form
        let both: BTreeSet<_> = left.intersection(&right).cloned().collect();
        assert_eq!(both.len(), 3);
        let union: BTreeSet<_> = left.union(&right).cloned().collect();
        assert_eq!(union.len(), 9);
    }

    #[test]
    fn face_images_nest_exactly_when_faces_do() {
        let (schemes, _) = enumerate_schemes(&Tree::corolla(2), &Tree::corolla(1));
        for p in &schemes {
            let mut monos = Vec::new();
            for shape in enumerate_trees(3, 2) {
                for f in omega::arrows_between(&shape, &p.tree).iter() {
                    if f.is_mono() {
                        monos.push(f.clone());
                    }
                }
            }
            for f in &monos {
                let fd = arrow_dendrex(p, f).unwrap();
                for g in &monos {
                    let image: BTreeSet<TensorDendrex> =
                        omega::arrows_between(f.source(), g.source())
                            .iter()
                            .map(|h| arrow_dendrex(p, &h.then(g).unwrap()).unwrap())
                            .collect();
                    assert_eq!(
                        omega::factors_through(f, g).is_some(),
                        image.contains(&fd),
                        "face containment must match image containment"
                    );
                }
            }
        }
    }

    #[test]
    fn hasse_dot_and_json_are_well_formed() {
        let union = TensorUnion::new(&s_pair(), &t_pair()).unwrap();
        let dot = union.hasse_dot();
        assert!(dot.starts_with("digraph percolation {"));
        assert_eq!(dot.matches(" -> ").count(), 21);
        assert!(dot.contains("  T1;") && dot.contains("  T14;"));
        assert!(dot.contains("T1 -> T2;"));
        let json = serde_json::to_string(&union).unwrap();
        assert!(json.contains("\"schemes\"") && json.contains("\"covering\""));
    }
}
