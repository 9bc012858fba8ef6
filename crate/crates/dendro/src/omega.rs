//! Arrows of the tree category.
//!
//! The tree category has finite rooted trees as objects; an arrow from `S`
//! to `T` is a map of the free coloured operads they generate, and such a
//! map is completely determined by where it sends edges. An edge map is an
//! arrow exactly when every vertex of `S`, read as a generating operation,
//! lands on an operation of the free operad on `T`: either a realizable
//! signature (a subtree of `T` with the prescribed root and ordered leaf
//! tuple) or a unit. [`OmegaArrow`] stores the edge map extensionally, so
//! arrow equality is equality of source, target and edge images.
//!
//! Every arrow factors as a composite of degeneracies, followed by an
//! isomorphism, followed by faces. The basic generators are provided here:
//! inner faces contract an inner edge, outer faces chop off a vertex with
//! exactly one inner edge attached, corollas additionally admit their edge
//! inclusions as faces, and degeneracies collapse a unary vertex. The
//! [`factorize`] function recovers the decomposition from a bare edge map
//! and checks it by recomposition.
//!
//! Hom sets in the tree category are finite and [`arrows_between`] lists
//! them in a deterministic order, caching results process-wide; most higher
//! layers of the crate (presheaf actions, sieve membership, horn matching)
//! reduce to scans over these hom sets.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use itertools::Itertools;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{Edge, Signature, Tree, Vertex};

/// Errors for arrow construction and the basic generators.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum OmegaError {
    #[error("not-an-arrow: edge map is not defined exactly on the source edges")]
    BadEdgeMap,
    #[error("not-an-arrow: vertex at {0:?} maps to an unrealizable signature")]
    UnrealizableVertex(Edge),
    #[error("no-such-edge: {0:?}")]
    NoSuchEdge(Edge),
    #[error("no-such-vertex: no vertex has output {0:?}")]
    NoSuchVertex(Edge),
    #[error("not-unary: vertex at {0:?} does not have valence one")]
    NotUnary(Edge),
    #[error("not-inner: {0:?} is not an inner edge")]
    NotInner(Edge),
    #[error("not-outer-admissible: vertex at {0:?} does not have exactly one inner edge attached")]
    NotOuterAdmissible(Edge),
    #[error("not-composable: target of the first arrow differs from source of the second")]
    NotComposable,
    #[error("not-a-corolla-edge-face: tree has degree {0}, edge faces exist only in degree one")]
    NotACorollaEdgeFace(usize),
}

/// An arrow of the tree category, stored extensionally as its edge map.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OmegaArrow {
    source: Tree,
    target: Tree,
    edge_map: BTreeMap<Edge, Edge>,
}

impl OmegaArrow {
    /// Validate an edge map as an arrow: it must be defined exactly on the
    /// edges of `source`, take values in edges of `target`, and send every
    /// vertex to an operation of the free operad on `target`.
    pub fn new(
        source: Tree,
        target: Tree,
        edge_map: BTreeMap<Edge, Edge>,
    ) -> Result<OmegaArrow, OmegaError> {
        let src_edges = source.edge_set();
        if edge_map.len() != src_edges.len()
            || !src_edges.iter().all(|e| edge_map.contains_key(e))
            || !edge_map.values().all(|e| target.has_edge(e))
        {
            return Err(OmegaError::BadEdgeMap);
        }
        let arrow = OmegaArrow { source, target, edge_map };
        for v in arrow.source.vertices() {
            if !arrow.target.is_realizable(&arrow.vertex_signature(v)) {
                return Err(OmegaError::UnrealizableVertex(v.output.clone()));
            }
        }
        Ok(arrow)
    }

    /// Internal constructor for maps that are arrows by construction.
    fn unchecked(source: Tree, target: Tree, edge_map: BTreeMap<Edge, Edge>) -> OmegaArrow {
        let arrow = OmegaArrow { source, target, edge_map };
        debug_assert!(
            arrow
                .source
                .vertices()
                .iter()
                .all(|v| arrow.target.is_realizable(&arrow.vertex_signature(v))),
            "constructed edge map is not an arrow"
        );
        arrow
    }

    pub fn identity(t: &Tree) -> OmegaArrow {
        let map = t.edges().into_iter().map(|e| (e.clone(), e)).collect();
        OmegaArrow { source: t.clone(), target: t.clone(), edge_map: map }
    }

    pub fn source(&self) -> &Tree {
        &self.source
    }

    pub fn target(&self) -> &Tree {
        &self.target
    }

    pub fn edge_map(&self) -> &BTreeMap<Edge, Edge> {
        &self.edge_map
    }

    /// Image of a source edge.
    pub fn apply(&self, e: &str) -> &Edge {
        &self.edge_map[e]
    }

    /// The signature a source vertex induces in the target.
    pub fn vertex_signature(&self, v: &Vertex) -> Signature {
        Signature::new(
            v.inputs.iter().map(|i| self.edge_map[i].clone()).collect(),
            self.edge_map[&v.output].clone(),
        )
    }

    /// Composition `second` after `self`; fails unless the middle objects
    /// agree on the nose.
    pub fn then(&self, second: &OmegaArrow) -> Result<OmegaArrow, OmegaError> {
        if self.target != second.source {
            return Err(OmegaError::NotComposable);
        }
        let map = self
            .edge_map
            .iter()
            .map(|(e, m)| (e.clone(), second.edge_map[m].clone()))
            .collect();
        Ok(OmegaArrow::unchecked(self.source.clone(), second.target.clone(), map))
    }

    pub fn is_identity(&self) -> bool {
        self.source == self.target && self.edge_map.iter().all(|(a, b)| a == b)
    }

    /// Injective on edges. Composites of faces are exactly the monos.
    pub fn is_mono(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.edge_map.values().all(|v| seen.insert(v))
    }

    /// Bijective on edges with equal degrees; such arrows are invertible.
    pub fn is_iso(&self) -> bool {
        self.is_mono()
            && self.source.degree() == self.target.degree()
            && self.edge_map.len() == self.target.edges().len()
    }

    pub fn inverse(&self) -> Option<OmegaArrow> {
        if !self.is_iso() {
            return None;
        }
        let map = self.edge_map.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        Some(OmegaArrow::unchecked(self.target.clone(), self.source.clone(), map))
    }
}

/// Composition `g` after `f`.
pub fn compose(g: &OmegaArrow, f: &OmegaArrow) -> Result<OmegaArrow, OmegaError> {
    f.then(g)
}

/// The degeneracy collapsing the unary vertex with output `v_out`. The
/// arrow goes from the given tree to the tree with that vertex removed; the
/// merged edge keeps the lower (output) name, so the input edge is the one
/// that disappears.
pub fn degeneracy(t: &Tree, v_out: &str) -> Result<OmegaArrow, OmegaError> {
    let ix = t.top_vertex(v_out).ok_or_else(|| OmegaError::NoSuchVertex(v_out.to_string()))?;
    let v = &t.vertices()[ix];
    if v.inputs.len() != 1 {
        return Err(OmegaError::NotUnary(v_out.to_string()));
    }
    let upper = v.inputs[0].clone();
    let lower = v.output.clone();
    let vertices = t
        .vertices()
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != ix)
        .map(|(_, w)| Vertex {
            inputs: w.inputs.clone(),
            output: if w.output == upper { lower.clone() } else { w.output.clone() },
        })
        .collect();
    let target = Tree::new(t.root().clone(), vertices).expect("collapsing a unary vertex");
    let map = t
        .edges()
        .into_iter()
        .map(|e| {
            let img = if e == upper { lower.clone() } else { e.clone() };
            (e, img)
        })
        .collect();
    Ok(OmegaArrow::unchecked(t.clone(), target, map))
}

/// The inner face contracting the inner edge `e`: an arrow from `t/e` into
/// `t`. The merged vertex splices the inputs of the top vertex of `e` into
/// the slot `e` occupied in the bottom vertex, and keeps the bottom output.
pub fn inner_face(t: &Tree, e: &str) -> Result<OmegaArrow, OmegaError> {
    if !t.has_edge(e) {
        return Err(OmegaError::NoSuchEdge(e.to_string()));
    }
    if !t.is_inner(e) {
        return Err(OmegaError::NotInner(e.to_string()));
    }
    let top = t.top_vertex(e).unwrap();
    let (bot, slot) = t.bottom_vertex(e).unwrap();
    let mut merged_inputs = t.vertices()[bot].inputs.clone();
    merged_inputs.splice(slot..=slot, t.vertices()[top].inputs.iter().cloned());
    let mut vertices = vec![Vertex { inputs: merged_inputs, output: t.vertices()[bot].output.clone() }];
    for (j, w) in t.vertices().iter().enumerate() {
        if j != top && j != bot {
            vertices.push(w.clone());
        }
    }
    let source = Tree::new(t.root().clone(), vertices).expect("contracting an inner edge");
    let map = source.edges().into_iter().map(|x| (x.clone(), x)).collect();
    Ok(OmegaArrow::unchecked(source, t.clone(), map))
}

/// The outer face chopping off the vertex with output `v_out`, which must
/// have exactly one inner edge among its adjacent edges (output and inputs)
/// and must not be the only vertex of the tree. When the unique inner edge
/// is the output the vertex is a top cluster and its leaf inputs are
/// removed with it; when it is an input, everything except the subtree
/// above that input is removed.
pub fn outer_face(t: &Tree, v_out: &str) -> Result<OmegaArrow, OmegaError> {
    let ix = t.top_vertex(v_out).ok_or_else(|| OmegaError::NoSuchVertex(v_out.to_string()))?;
    if t.degree() < 2 {
        return Err(OmegaError::NotOuterAdmissible(v_out.to_string()));
    }
    let v = &t.vertices()[ix];
    let mut inner_adjacent: Vec<Edge> = Vec::new();
    for e in std::iter::once(&v.output).chain(v.inputs.iter()) {
        if t.is_inner(e) {
            inner_adjacent.push(e.clone());
        }
    }
    if inner_adjacent.len() != 1 {
        return Err(OmegaError::NotOuterAdmissible(v_out.to_string()));
    }
    let kept = &inner_adjacent[0];
    let source = if *kept == v.output {
        // Top cluster: drop the vertex, its inputs become nothing, the
        // output turns into a leaf.
        let vertices =
            t.vertices().iter().enumerate().filter(|(j, _)| *j != ix).map(|(_, w)| w.clone());
        Tree::new(t.root().clone(), vertices.collect()).expect("removing a top cluster")
    } else {
        // Root cluster: keep only the subtree above the unique inner input.
        let leaves: Vec<Edge> =
            t.leaves().into_iter().filter(|l| t.edge_is_above(l, kept)).collect();
        t.subtree_of_signature(&Signature::new(leaves, kept.clone()))
            .expect("subtree above an inner edge")
    };
    let map = source.edges().into_iter().map(|x| (x.clone(), x)).collect();
    Ok(OmegaArrow::unchecked(source, t.clone(), map))
}

/// The edge inclusion of eta at the edge `e`. For corollas these are the
/// maximal faces; for larger trees they are still arrows, just not of
/// codimension one.
pub fn edge_inclusion(t: &Tree, e: &str) -> Result<OmegaArrow, OmegaError> {
    if !t.has_edge(e) {
        return Err(OmegaError::NoSuchEdge(e.to_string()));
    }
    let source = Tree::eta(e);
    let map = BTreeMap::from([(e.to_string(), e.to_string())]);
    Ok(OmegaArrow::unchecked(source, t.clone(), map))
}

/// Which generator a basic arrow is, recorded alongside the arrow in face
/// listings and factorizations. Vertices are named by their output edge.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaceKind {
    Inner(Edge),
    OuterVertex(Edge),
    CorollaEdge(Edge),
    Degeneracy(Edge),
    Iso,
}

/// The maximal (codimension one) faces of `t` in a fixed order: for a
/// corolla the edge inclusions in preorder; otherwise the inner faces in
/// preorder followed by the admissible outer vertex faces in preorder of
/// their output edges. Eta has none.
pub fn maximal_faces(t: &Tree) -> Vec<(FaceKind, OmegaArrow)> {
    let mut out = Vec::new();
    if t.degree() == 0 {
        return out;
    }
    if t.degree() == 1 {
        for e in t.edges() {
            out.push((FaceKind::CorollaEdge(e.clone()), edge_inclusion(t, &e).unwrap()));
        }
        return out;
    }
    for e in t.inner_edges() {
        out.push((FaceKind::Inner(e.clone()), inner_face(t, &e).unwrap()));
    }
    for e in t.edges() {
        if t.top_vertex(&e).is_some() {
            if let Ok(f) = outer_face(t, &e) {
                out.push((FaceKind::OuterVertex(e.clone()), f));
            }
        }
    }
    out
}

/// All arrows from `source` to `target`, enumerated deterministically and
/// cached process-wide. The backtracking assigns the root image first and
/// then, vertex by vertex in preorder, an operation of the free operad on
/// the target with the required output and arity; the input images are the
/// chosen ordered leaf tuple.
pub fn arrows_between(source: &Tree, target: &Tree) -> Arc<Vec<OmegaArrow>> {
    type HomCache = BTreeMap<(Tree, Tree), Arc<Vec<OmegaArrow>>>;
    static CACHE: Lazy<Mutex<HomCache>> = Lazy::new(|| Mutex::new(BTreeMap::new()));
    let key = (source.clone(), target.clone());
    if let Some(hit) = CACHE.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let computed = Arc::new(enumerate_arrows(source, target));
    CACHE.lock().unwrap().insert(key, computed.clone());
    computed
}

fn enumerate_arrows(source: &Tree, target: &Tree) -> Vec<OmegaArrow> {
    let mut out = Vec::new();
    for r in target.edges() {
        let mut map = BTreeMap::from([(source.root().clone(), r)]);
        assign_vertices(source, target, 0, &mut map, &mut out);
    }
    out
}

fn assign_vertices(
    source: &Tree,
    target: &Tree,
    vix: usize,
    map: &mut BTreeMap<Edge, Edge>,
    out: &mut Vec<OmegaArrow>,
) {
    if vix == source.degree() {
        out.push(OmegaArrow::unchecked(source.clone(), target.clone(), map.clone()));
        return;
    }
    let v = &source.vertices()[vix];
    let r = map[&v.output].clone();
    for cut in target.subtree_cuts(&r) {
        if cut.len() != v.inputs.len() {
            continue;
        }
        for perm in cut.iter().permutations(cut.len()) {
            for (slot, img) in v.inputs.iter().zip(perm.iter()) {
                map.insert(slot.clone(), (*img).clone());
            }
            assign_vertices(source, target, vix + 1, map, out);
            for slot in &v.inputs {
                map.remove(slot);
            }
        }
    }
}

/// The unique factorization of an arrow as degeneracies, then an
/// isomorphism, then faces. Recomposing the parts is asserted to give back
/// the input arrow.
#[derive(Clone, Debug)]
pub struct Factorization {
    /// Basic degeneracies, each tagged with the collapsed vertex; the first
    /// entry has the original source.
    pub degeneracies: Vec<(FaceKind, OmegaArrow)>,
    /// The middle isomorphism.
    pub iso: OmegaArrow,
    /// Basic faces, each tagged; the last entry lands in the original
    /// target. Listed from the iso outward, so the composite face map is
    /// `faces[n-1] o ... o faces[0]`.
    pub faces: Vec<(FaceKind, OmegaArrow)>,
}

impl Factorization {
    /// Recompose the three parts into a single arrow.
    pub fn recompose(&self) -> OmegaArrow {
        let mut acc = self.degeneracies.iter().fold(None::<OmegaArrow>, |acc, (_, d)| {
            Some(match acc {
                None => d.clone(),
                Some(a) => a.then(d).expect("degeneracy chain composes"),
            })
        });
        let mut arrow = match acc.take() {
            None => self.iso.clone(),
            Some(a) => a.then(&self.iso).expect("iso follows degeneracies"),
        };
        for (_, f) in &self.faces {
            arrow = arrow.then(f).expect("face chain composes");
        }
        arrow
    }
}

/// Factor `f` as faces after an isomorphism after degeneracies.
///
/// Degeneracies are found by greedily collapsing unary vertices whose
/// signature maps to a unit; the remaining map is injective on edges. The
/// face part peels the target down to the image: outer faces remove
/// vertices outside the image subtree (top clusters first, then root
/// clusters, with the corolla edge inclusion as the degree one case), and
/// inner faces contract the image subtree edges skipped by the map. What is
/// left is an isomorphism. The result is checked by recomposition.
pub fn factorize(f: &OmegaArrow) -> Factorization {
    // Degeneracy part.
    let mut degeneracies = Vec::new();
    let mut cur_src = f.source().clone();
    let mut map = f.edge_map().clone();
    loop {
        let unit_vertex = cur_src.vertices().iter().find(|v| {
            v.inputs.len() == 1 && map[&v.inputs[0]] == map[&v.output]
        });
        match unit_vertex {
            None => break,
            Some(v) => {
                let upper = v.inputs[0].clone();
                let d = degeneracy(&cur_src, &v.output).expect("unit vertex is unary");
                degeneracies.push((FaceKind::Degeneracy(v.output.clone()), d.clone()));
                map.remove(&upper);
                cur_src = d.target().clone();
            }
        }
    }
    assert!(
        {
            let mut seen = std::collections::BTreeSet::new();
            map.values().all(|v| seen.insert(v.clone()))
        },
        "arrow without unit unary vertices must be injective on edges"
    );

    // Face part: peel the target down to the image subtree, then contract
    // the inner edges the image skips.
    let image_root = map[cur_src.root()].clone();
    let image_leaves: Vec<Edge> = cur_src.leaves().iter().map(|l| map[l].clone()).collect();
    let image_span = f
        .target()
        .subtree_of_signature(&Signature::new(image_leaves, image_root))
        .expect("image of an injective arrow spans a subtree");
    let mut faces: Vec<(FaceKind, OmegaArrow)> = Vec::new();
    let mut cur_tgt = f.target().clone();
    while cur_tgt.degree() > image_span.degree() || cur_tgt.edges().len() > image_span.edges().len()
    {
        if cur_tgt.degree() == 1 && image_span.degree() == 0 {
            let e = image_span.root().clone();
            faces.push((FaceKind::CorollaEdge(e.clone()), edge_inclusion(&cur_tgt, &e).unwrap()));
            cur_tgt = Tree::eta(&e);
            continue;
        }
        let span_edges = image_span.edge_set();
        let span_vertices: std::collections::BTreeSet<Edge> =
            image_span.vertices().iter().map(|v| v.output.clone()).collect();
        let mut removed = false;
        for e in cur_tgt.edges() {
            if cur_tgt.top_vertex(&e).is_none() || span_vertices.contains(&e) {
                continue;
            }
            if let Ok(face) = outer_face(&cur_tgt, &e) {
                let keeps_span = span_edges.iter().all(|x| face.source().has_edge(x));
                if keeps_span {
                    faces.push((FaceKind::OuterVertex(e.clone()), face.clone()));
                    cur_tgt = face.source().clone();
                    removed = true;
                    break;
                }
            }
        }
        if !removed {
            unreachable!("peeling toward the image subtree always finds an outer face");
        }
    }
    let image_edges: std::collections::BTreeSet<Edge> = map.values().cloned().collect();
    loop {
        let skipped =
            cur_tgt.edges().into_iter().find(|e| !image_edges.contains(e) && cur_tgt.is_inner(e));
        match skipped {
            None => break,
            Some(e) => {
                let face = inner_face(&cur_tgt, &e).unwrap();
                cur_tgt = face.source().clone();
                faces.push((FaceKind::Inner(e.clone()), face));
            }
        }
    }
    // Faces were collected from the target inward; the composite wants them
    // from the iso outward.
    faces.reverse();

    let iso = OmegaArrow::new(cur_src.clone(), cur_tgt.clone(), map)
        .expect("residual edge map is an arrow");
    assert!(iso.is_iso(), "residual part of a factorization must be invertible");
    let result = Factorization { degeneracies, iso, faces };
    assert_eq!(result.recompose(), *f, "factorization must recompose to the input");
    result
}

/// Does `w` factor through `beta` (both arrows into the same target)? When
/// it does, the unique filler `v` with `beta o v == w` is returned. Faces
/// are monos, so fillers through them are unique when they exist.
pub fn factors_through(w: &OmegaArrow, beta: &OmegaArrow) -> Option<OmegaArrow> {
    if w.target() != beta.target() {
        return None;
    }
    arrows_between(w.source(), beta.source())
        .iter()
        .find(|v| v.then(beta).expect("same middle object") == *w)
        .cloned()
}

/// The simplicial face `d_j` as an arrow of linear trees `i[n-1] -> i[n]`,
/// with edges named `0..n` from the top leaf down to the root.
pub fn simplicial_face(n: usize, j: usize) -> OmegaArrow {
    assert!(n >= 1 && j <= n);
    let big = Tree::linear(n);
    if j == 0 {
        let face = outer_face(&big, "1");
        let face = match face {
            Ok(f) => f,
            // n == 1: removing the only vertex is the edge inclusion at the
            // root edge.
            Err(_) => edge_inclusion(&big, "1").unwrap(),
        };
        return rename_linear_source(face, |k| k + 1);
    }
    if j == n {
        let face = match outer_face(&big, &n.to_string()) {
            Ok(f) => f,
            Err(_) => edge_inclusion(&big, "0").unwrap(),
        };
        return rename_linear_source(face, |k| k);
    }
    let face = inner_face(&big, &j.to_string()).unwrap();
    rename_linear_source(face, move |k| if k < j { k } else { k + 1 })
}

/// The simplicial degeneracy `s_j` as an arrow `i[n+1] -> i[n]`.
pub fn simplicial_degeneracy(n: usize, j: usize) -> OmegaArrow {
    assert!(j <= n);
    let big = Tree::linear(n + 1);
    let d = degeneracy(&big, &(j + 1).to_string()).unwrap();
    rename_linear_target(d, move |k| if k <= j { k } else { k - 1 })
}

/// Precompose with the canonical renaming `i[m] -> source`, where the
/// source of `f` is a linear tree with gaps in its edge names and `name`
/// says which standard edge each source position corresponds to.
fn rename_linear_source(f: OmegaArrow, name: impl Fn(usize) -> usize) -> OmegaArrow {
    let m = f.source().degree();
    let std_tree = Tree::linear(m);
    let map: BTreeMap<Edge, Edge> =
        (0..=m).map(|k| (k.to_string(), name(k).to_string())).collect();
    let iso = OmegaArrow::unchecked(std_tree, f.source().clone(), map);
    iso.then(&f).expect("renaming composes")
}

/// Postcompose with the canonical renaming `target -> i[m]`.
fn rename_linear_target(f: OmegaArrow, name: impl Fn(usize) -> usize) -> OmegaArrow {
    let m = f.target().degree();
    let std_tree = Tree::linear(m);
    let map: BTreeMap<Edge, Edge> = f
        .target()
        .edges()
        .into_iter()
        .map(|e| {
            let k: usize = e.parse().expect("linear tree edge names are numerals");
            (e, name(k).to_string())
        })
        .collect();
    let iso = OmegaArrow::unchecked(f.target().clone(), std_tree, map);
    f.then(&iso).expect("renaming composes")
}
