//! Degree-bounded dendroidal sets: presheaves on the tree category.
//!
//! A [`DendroidalSet`] stores, for every canonical tree within a degree
//! bound and valence cap, a finite set of dendrices, and for every arrow an
//! action map going the other way. Three lazy backends cover the engine's
//! main objects: representables (dendrices are arrows into a fixed tree),
//! nerves of coloured operads (dendrices are labelings: a colour per edge
//! and an operation per vertex), and skeleton views of another set.
//! Explicit tables serve as the reference semantics, the materialization
//! target, and the home of hand-built counterexamples.
//!
//! Tables are keyed on canonical tree representatives; actions along
//! arbitrary arrows are routed through the canonical renaming
//! isomorphisms. Lazy backends answer any shape directly and memoize.
//!
//! Subobjects of representables are [`Sieve`]s, each given by its list of
//! maximal faces with membership by factorization; boundaries and horns
//! are the named instances. [`hom_into`] enumerates maps out of a sieve
//! into a dendroidal set as compatible families over the maximal faces.
//! The simplicial world embeds along linear trees: [`SimplicialSet`] is a
//! minimal finite simplicial set and [`i_shriek`] its dendroidal image.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::omega::{self, OmegaArrow};
use crate::operad::{ColoredOperad, Colour, OpName};
use crate::tree::{enumerate_trees, Edge, Tree};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DsetError {
    #[error("out-of-bounds: shape has degree {0}, bound is {1}")]
    OutOfBounds(usize, usize),
    #[error("eta-has-no-boundary")]
    EtaHasNoBoundary,
    #[error("bad-horn-spec: {0}")]
    BadHornSpec(String),
    #[error("unknown-dendrex over the shape rooted at {0:?}")]
    UnknownDendrex(Edge),
    #[error("action-undefined for an arrow {0:?} -> {1:?}")]
    ActionUndefined(Edge, Edge),
}

/// Degree bound and valence cap for the canonical shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub degree: usize,
    pub valence: usize,
}

impl Default for Bounds {
    fn default() -> Bounds {
        Bounds { degree: 4, valence: 3 }
    }
}

/// A nerve dendrex: a colour per edge and an operation per vertex (keyed
/// by the vertex's output edge), the labeling form of an operad map out of
/// the free operad on the shape.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Labeling {
    pub colours: BTreeMap<Edge, Colour>,
    pub ops: BTreeMap<Edge, OpName>,
}

/// A dendrex. Different backends use different carriers; a table may hold
/// any of them.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dendrex {
    Ix(u64),
    Arrow(OmegaArrow),
    Label(Labeling),
}

/// Explicit presheaf tables on canonical shapes.
#[derive(Clone, Debug, Default)]
pub struct TableData {
    pub elems: BTreeMap<Tree, Vec<Dendrex>>,
    pub actions: BTreeMap<OmegaArrow, BTreeMap<Dendrex, Dendrex>>,
}

impl TableData {
    /// Materialize a table over all canonical shapes within `bounds`,
    /// with elements given per shape and actions computed by `act` for
    /// every arrow between canonical shapes.
    pub fn build(
        bounds: Bounds,
        elems: impl Fn(&Tree) -> Vec<Dendrex>,
        act: impl Fn(&OmegaArrow, &Dendrex) -> Dendrex,
    ) -> TableData {
        let shapes = enumerate_trees(bounds.degree, bounds.valence);
        let mut data = TableData::default();
        for t in &shapes {
            data.elems.insert(t.clone(), elems(t));
        }
        for s in &shapes {
            for t in &shapes {
                for alpha in omega::arrows_between(s, t).iter() {
                    let map =
                        data.elems[t].iter().map(|x| (x.clone(), act(alpha, x))).collect();
                    data.actions.insert(alpha.clone(), map);
                }
            }
        }
        data
    }
}

enum Backend {
    Table(TableData),
    Representable(Tree),
    Nerve(ColoredOperad),
    Skeleton(Box<DendroidalSet>, usize),
}

/// A degree-bounded dendroidal set.
pub struct DendroidalSet {
    name: String,
    bounds: Bounds,
    backend: Backend,
    cache: Mutex<BTreeMap<Tree, Arc<Vec<Dendrex>>>>,
}

impl Clone for DendroidalSet {
    fn clone(&self) -> DendroidalSet {
        let backend = match &self.backend {
            Backend::Table(d) => Backend::Table(d.clone()),
            Backend::Representable(t) => Backend::Representable(t.clone()),
            Backend::Nerve(p) => Backend::Nerve(p.clone()),
            Backend::Skeleton(x, n) => Backend::Skeleton(x.clone(), *n),
        };
        DendroidalSet {
            name: self.name.clone(),
            bounds: self.bounds,
            backend,
            cache: Mutex::new(self.cache.lock().unwrap().clone()),
        }
    }
}

impl DendroidalSet {
    /// The representable on a tree: dendrices over `s` are the arrows
    /// `s -> t`.
    pub fn representable(t: &Tree, bounds: Bounds) -> DendroidalSet {
        DendroidalSet {
            name: format!("Omega[{}]", t.root()),
            bounds,
            backend: Backend::Representable(t.clone()),
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// The dendroidal nerve of an operad: dendrices over `t` are
    /// labelings, acted on by evaluating image operations. The operad's
    /// arity cap must cover the valence cap; pulling dendrices back along
    /// faces of capped trees evaluates composites of arity up to one less
    /// than twice the valence cap, so free tree operads carry headroom.
    pub fn nerve(p: &ColoredOperad, bounds: Bounds) -> DendroidalSet {
        assert!(
            p.max_arity() >= bounds.valence,
            "nerve needs the operad arity cap to cover the valence cap"
        );
        DendroidalSet {
            name: format!("N_d({})", p.name()),
            bounds,
            backend: Backend::Nerve(p.clone()),
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// An explicit table. Shapes must be canonical representatives.
    pub fn from_table(name: impl Into<String>, bounds: Bounds, data: TableData) -> DendroidalSet {
        DendroidalSet {
            name: name.into(),
            bounds,
            backend: Backend::Table(data),
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// The subpresheaf generated by all dendrices of degree at most `n`,
    /// as a lazy view.
    pub fn skeleton(&self, n: usize) -> DendroidalSet {
        DendroidalSet {
            name: format!("Sk_{n}({})", self.name),
            bounds: self.bounds,
            backend: Backend::Skeleton(Box::new(self.clone()), n),
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Canonical shapes within the bounds, by degree then canonical code.
    pub fn shapes(&self) -> Vec<Tree> {
        enumerate_trees(self.bounds.degree, self.bounds.valence)
    }

    /// The dendrices over a shape, in a fixed order. The shape may be any
    /// tree within the degree bound; tables route through the canonical
    /// renaming.
    pub fn dendrices(&self, t: &Tree) -> Result<Arc<Vec<Dendrex>>, DsetError> {
        if t.degree() > self.bounds.degree {
            return Err(DsetError::OutOfBounds(t.degree(), self.bounds.degree));
        }
        if let Some(hit) = self.cache.lock().unwrap().get(t) {
            return Ok(hit.clone());
        }
        let computed: Vec<Dendrex> = match &self.backend {
            Backend::Representable(target) => omega::arrows_between(t, target)
                .iter()
                .cloned()
                .map(Dendrex::Arrow)
                .collect(),
            Backend::Nerve(p) => labelings(t, p).into_iter().map(Dendrex::Label).collect(),
            Backend::Table(data) => {
                let (canon, _) = t.canonical_form();
                data.elems
                    .get(&canon)
                    .ok_or_else(|| {
                        DsetError::ActionUndefined(t.root().clone(), t.root().clone())
                    })?
                    .clone()
            }
            Backend::Skeleton(parent, n) => {
                let all = parent.dendrices(t)?;
                if t.degree() <= *n {
                    all.as_ref().clone()
                } else {
                    let mut generated: BTreeSet<Dendrex> = BTreeSet::new();
                    for u in enumerate_trees(*n, self.bounds.valence) {
                        for alpha in omega::arrows_between(t, &u).iter() {
                            for y in parent.dendrices(&u)?.iter() {
                                generated.insert(parent.act(alpha, y)?);
                            }
                        }
                    }
                    all.iter().filter(|x| generated.contains(x)).cloned().collect()
                }
            }
        };
        let arc = Arc::new(computed);
        self.cache.lock().unwrap().insert(t.clone(), arc.clone());
        Ok(arc)
    }

    /// The contravariant action: for `alpha: s -> t` and a dendrex over
    /// `t`, its restriction over `s`.
    pub fn act(&self, alpha: &OmegaArrow, x: &Dendrex) -> Result<Dendrex, DsetError> {
        match &self.backend {
            Backend::Representable(_) => {
                let Dendrex::Arrow(w) = x else {
                    return Err(DsetError::UnknownDendrex(alpha.target().root().clone()));
                };
                let composed = alpha
                    .then(w)
                    .map_err(|_| DsetError::UnknownDendrex(alpha.target().root().clone()))?;
                Ok(Dendrex::Arrow(composed))
            }
            Backend::Nerve(p) => {
                let Dendrex::Label(lab) = x else {
                    return Err(DsetError::UnknownDendrex(alpha.target().root().clone()));
                };
                Ok(Dendrex::Label(pull_labeling(alpha, lab, p)))
            }
            Backend::Table(data) => {
                // Arrows between canonical shapes are tabulated as they
                // are; everything else is conjugated into them.
                let map = match data.actions.get(alpha) {
                    Some(hit) => hit,
                    None => {
                        let canonical = canonical_arrow(alpha);
                        data.actions.get(&canonical).ok_or_else(|| {
                            DsetError::ActionUndefined(
                                alpha.source().root().clone(),
                                alpha.target().root().clone(),
                            )
                        })?
                    }
                };
                map.get(x)
                    .cloned()
                    .ok_or_else(|| DsetError::UnknownDendrex(alpha.target().root().clone()))
            }
            Backend::Skeleton(parent, _) => parent.act(alpha, x),
        }
    }

    /// Search for a degeneracy witness: `Some((sigma, y))` with
    /// `x = sigma^*(y)` for a basic degeneracy `sigma` out of the shape,
    /// which suffices because any degeneracy composite starts with one.
    pub fn degeneracy_witness(
        &self,
        t: &Tree,
        x: &Dendrex,
    ) -> Result<Option<(OmegaArrow, Dendrex)>, DsetError> {
        for v in t.vertices() {
            if v.inputs.len() != 1 {
                continue;
            }
            let sigma = omega::degeneracy(t, &v.output).expect("unary vertex");
            for y in self.dendrices(sigma.target())?.iter() {
                if self.act(&sigma, y)? == *x {
                    return Ok(Some((sigma, y.clone())));
                }
            }
        }
        Ok(None)
    }

    pub fn is_degenerate(&self, t: &Tree, x: &Dendrex) -> Result<bool, DsetError> {
        Ok(self.degeneracy_witness(t, x)?.is_some())
    }

    /// Non-degenerate dendrices over a shape, in dendrex order.
    pub fn nondegenerate(&self, t: &Tree) -> Result<Vec<Dendrex>, DsetError> {
        let mut out = Vec::new();
        for x in self.dendrices(t)?.iter() {
            if !self.is_degenerate(t, x)? {
                out.push(x.clone());
            }
        }
        Ok(out)
    }

    /// Normality: no non-identity shape automorphism fixes a
    /// non-degenerate dendrex. Returns the first counterexample found,
    /// scanning shapes in canonical order.
    pub fn normality_counterexample(
        &self,
    ) -> Result<Option<(Tree, Dendrex, OmegaArrow)>, DsetError> {
        for t in self.shapes() {
            let autos = automorphism_arrows(&t);
            if autos.len() == 1 {
                continue;
            }
            for x in self.nondegenerate(&t)? {
                for phi in &autos {
                    if !phi.is_identity() && self.act(phi, &x)? == x {
                        return Ok(Some((t, x, phi.clone())));
                    }
                }
            }
        }
        Ok(None)
    }

    pub fn is_normal(&self) -> Result<bool, DsetError> {
        Ok(self.normality_counterexample()?.is_none())
    }

    /// Element-chase the degree-`n` attaching square of the skeletal
    /// filtration: over every shape, the fresh dendrices of `Sk_n` beyond
    /// `Sk_{n-1}` must correspond bijectively to pairs of an attached
    /// dendrex `y` and an arrow into its shape lying outside the boundary
    /// sieve. The sum runs over isomorphism classes of non-degenerate
    /// degree-`n` dendrices; since shapes are canonical, the classes are
    /// orbits of the automorphism action and the chase takes one
    /// representative per orbit.
    pub fn skeletal_pushout_check(&self, n: usize) -> Result<bool, DsetError> {
        assert!(n >= 1 && n <= self.bounds.degree, "attaching degree within bounds");
        let sk_lo = self.skeleton(n - 1);
        let sk_hi = self.skeleton(n);
        let mut attach: Vec<(Tree, Dendrex, Sieve)> = Vec::new();
        for u in enumerate_trees(n, self.bounds.valence) {
            if u.degree() != n {
                continue;
            }
            let sieve = boundary(&u).expect("degree is positive");
            let autos = automorphism_arrows(&u);
            let mut seen: BTreeSet<Dendrex> = BTreeSet::new();
            for y in self.nondegenerate(&u)? {
                if seen.contains(&y) {
                    continue;
                }
                for phi in &autos {
                    seen.insert(self.act(phi, &y)?);
                }
                attach.push((u.clone(), y, sieve.clone()));
            }
        }
        for t in self.shapes() {
            let lo: BTreeSet<Dendrex> = sk_lo.dendrices(&t)?.iter().cloned().collect();
            let fresh: BTreeSet<Dendrex> =
                sk_hi.dendrices(&t)?.iter().filter(|x| !lo.contains(x)).cloned().collect();
            let mut hit: BTreeMap<Dendrex, usize> = BTreeMap::new();
            for (u, y, sieve) in &attach {
                for w in omega::arrows_between(&t, u).iter() {
                    if sieve.contains(w) {
                        continue;
                    }
                    let image = self.act(w, y)?;
                    if !fresh.contains(&image) {
                        return Ok(false);
                    }
                    *hit.entry(image).or_insert(0) += 1;
                }
            }
            if fresh.iter().any(|x| hit.get(x).copied().unwrap_or(0) != 1) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Exhaustive functoriality audit up to `max_degree`: identities act
    /// as identities and composites act contravariantly. Returns one
    /// violation string per failure.
    pub fn audit_functoriality(&self, max_degree: usize) -> Result<Vec<String>, DsetError> {
        let mut bad = Vec::new();
        let shapes = enumerate_trees(max_degree, self.bounds.valence);
        let cells: Vec<Arc<Vec<Dendrex>>> =
            shapes.iter().map(|t| self.dendrices(t)).collect::<Result<_, _>>()?;
        let index: Vec<BTreeMap<&Dendrex, usize>> = cells
            .iter()
            .map(|cs| cs.iter().enumerate().map(|(i, c)| (c, i)).collect())
            .collect();
        let mut homs: Vec<Vec<Arc<Vec<OmegaArrow>>>> = Vec::new();
        for s in &shapes {
            homs.push(shapes.iter().map(|t| omega::arrows_between(s, t)).collect());
        }
        // Tabulate every arrow's action as an index array on cells, so
        // the composite checks below are pure array walks.
        let mut tables: BTreeMap<OmegaArrow, Vec<usize>> = BTreeMap::new();
        for (si, s) in shapes.iter().enumerate() {
            for (ti, t) in shapes.iter().enumerate() {
                for alpha in homs[si][ti].iter() {
                    let mut arr = Vec::with_capacity(cells[ti].len());
                    for x in cells[ti].iter() {
                        let img = self.act(alpha, x)?;
                        match index[si].get(&img) {
                            Some(&i) => arr.push(i),
                            None => {
                                bad.push(format!(
                                    "action along {:?} -> {:?} leaves the cell set",
                                    s.root(),
                                    t.root()
                                ));
                                arr.push(usize::MAX);
                            }
                        }
                    }
                    tables.insert(alpha.clone(), arr);
                }
            }
        }
        for t in &shapes {
            let id = OmegaArrow::identity(t);
            if tables[&id].iter().enumerate().any(|(i, &j)| i != j) {
                bad.push(format!("identity action moves a dendrex over {:?}", t.root()));
            }
        }
        // The outer arrow of each pair moves degree by at most one. Every
        // arrow of the site factors into such arrows through shapes that
        // stay within the bounds, so the two-variable law follows for
        // arbitrary pairs by induction on factorization length.
        for (si, s) in shapes.iter().enumerate() {
            for (ti, t) in shapes.iter().enumerate() {
                if s.degree().abs_diff(t.degree()) > 1 {
                    continue;
                }
                for alpha in homs[si][ti].iter() {
                    let ta = &tables[alpha];
                    for (ui, u) in shapes.iter().enumerate() {
                        for beta in homs[ti][ui].iter() {
                            let composite = alpha.then(beta).expect("composable");
                            let tb = &tables[beta];
                            let tc = &tables[&composite];
                            let mismatch = (0..tb.len()).any(|i| {
                                tb[i] == usize::MAX
                                    || tc[i] == usize::MAX
                                    || ta[tb[i]] != tc[i]
                            });
                            if mismatch {
                                bad.push(format!(
                                    "composite action mismatch along {:?} -> {:?} -> {:?}",
                                    s.root(),
                                    t.root(),
                                    u.root()
                                ));
                            }
                        }
                    }
                }
            }
        }
        Ok(bad)
    }

    /// Materialize into an explicit table over the canonical shapes.
    pub fn materialize(&self) -> Result<DendroidalSet, DsetError> {
        let shapes = self.shapes();
        let mut data = TableData::default();
        for t in &shapes {
            data.elems.insert(t.clone(), self.dendrices(t)?.as_ref().clone());
        }
        for s in &shapes {
            for t in &shapes {
                for alpha in omega::arrows_between(s, t).iter() {
                    let mut map = BTreeMap::new();
                    for x in &data.elems[t] {
                        map.insert(x.clone(), self.act(alpha, x)?);
                    }
                    data.actions.insert(alpha.clone(), map);
                }
            }
        }
        Ok(DendroidalSet::from_table(self.name.clone(), self.bounds, data))
    }

    /// Dendrex counts per canonical shape.
    pub fn count_summary(&self) -> Result<Vec<(Tree, usize)>, DsetError> {
        self.shapes()
            .into_iter()
            .map(|t| self.dendrices(&t).map(|d| (t, d.len())))
            .collect()
    }

    /// JSON dump: per canonical shape its dendrices, and the actions of
    /// its maximal faces and basic degeneracies.
    pub fn to_json(&self) -> Result<serde_json::Value, DsetError> {
        let mut shapes = Vec::new();
        for t in self.shapes() {
            let elems = self.dendrices(&t)?;
            let mut basics: Vec<(String, OmegaArrow)> = omega::maximal_faces(&t)
                .into_iter()
                .map(|(kind, f)| (format!("{kind:?}"), f))
                .collect();
            for v in t.vertices() {
                if v.inputs.len() == 1 {
                    let sigma = omega::degeneracy(&t, &v.output).expect("unary");
                    basics.push((format!("Degeneracy({:?})", v.output), sigma));
                }
            }
            let mut actions = Vec::new();
            for (label, f) in basics {
                // Arrows act contravariantly, so the inputs live over the
                // arrow's target: the shape itself for its faces, the
                // smaller tree for its degeneracies.
                let inputs = self.dendrices(f.target())?;
                let table: Vec<Dendrex> =
                    inputs.iter().map(|x| self.act(&f, x)).collect::<Result<_, _>>()?;
                actions.push(json!({
                    "arrow": label,
                    "source": f.source().root(),
                    "target": f.target().root(),
                    "images": table,
                }));
            }
            shapes.push(json!({
                "tree": t,
                "dendrices": elems.as_ref(),
                "actions": actions,
            }));
        }
        Ok(json!({
            "name": self.name,
            "bounds": self.bounds,
            "shapes": shapes,
        }))
    }
}

/// The automorphism group of a tree as arrows, identity included.
pub fn automorphism_arrows(t: &Tree) -> Vec<OmegaArrow> {
    t.automorphisms()
        .into_iter()
        .map(|m| OmegaArrow::new(t.clone(), t.clone(), m).expect("automorphism is an arrow"))
        .collect()
}

/// Conjugate an arrow by the canonical renamings of its endpoints, giving
/// the arrow between canonical representatives that tables are keyed on.
fn canonical_arrow(alpha: &OmegaArrow) -> OmegaArrow {
    let (s_canon, s_map) = alpha.source().canonical_form();
    let (t_canon, t_map) = alpha.target().canonical_form();
    let edge_map: BTreeMap<Edge, Edge> = s_map
        .iter()
        .map(|(orig, canon)| (canon.clone(), t_map[alpha.apply(orig)].clone()))
        .collect();
    OmegaArrow::new(s_canon, t_canon, edge_map).expect("conjugated arrow is valid")
}

/// All labelings of a tree in a coloured operad: a colour per edge, an
/// operation per vertex matching the induced signature. These are exactly
/// the operad maps out of the free operad on the tree.
pub fn labelings(t: &Tree, p: &ColoredOperad) -> Vec<Labeling> {
    let mut out = Vec::new();
    for c in p.colours() {
        let mut colours = BTreeMap::from([(t.root().clone(), c.clone())]);
        let mut ops = BTreeMap::new();
        label_vertices(t, p, 0, &mut colours, &mut ops, &mut out);
    }
    out
}

fn label_vertices(
    t: &Tree,
    p: &ColoredOperad,
    vix: usize,
    colours: &mut BTreeMap<Edge, Colour>,
    ops: &mut BTreeMap<Edge, OpName>,
    out: &mut Vec<Labeling>,
) {
    if vix == t.degree() {
        out.push(Labeling { colours: colours.clone(), ops: ops.clone() });
        return;
    }
    // Vertices are stored in preorder, so the output colour is assigned
    // before the vertex is reached; choosing the operation fixes the input
    // colours.
    let v = &t.vertices()[vix];
    let want_out = colours[&v.output].clone();
    for op in p.ops() {
        if op.output != want_out || op.arity() != v.inputs.len() {
            continue;
        }
        for (e, c) in v.inputs.iter().zip(op.inputs.iter()) {
            colours.insert(e.clone(), c.clone());
        }
        ops.insert(v.output.clone(), op.name.clone());
        label_vertices(t, p, vix + 1, colours, ops, out);
        ops.remove(&v.output);
        for e in &v.inputs {
            colours.remove(e);
        }
    }
}

/// Evaluate the operation of the free operad on `t` given by a root edge
/// and an ordered leaf tuple, under a labeling into `p`: compose the
/// vertex labels over the spanned subtree and reorder by the tuple.
pub fn evaluate_op(
    t: &Tree,
    lab: &Labeling,
    p: &ColoredOperad,
    root: &Edge,
    tuple: &[Edge],
) -> OpName {
    let claimed: BTreeSet<Edge> = tuple.iter().cloned().collect();
    let (planar_op, planar_order) = planar_value(t, lab, p, root, &claimed);
    debug_assert_eq!(planar_order.len(), tuple.len());
    let sigma: Vec<usize> = tuple
        .iter()
        .map(|l| planar_order.iter().position(|x| x == l).expect("tuple is the cut"))
        .collect();
    p.act(&planar_op, &sigma).expect("operad action is total")
}

fn planar_value(
    t: &Tree,
    lab: &Labeling,
    p: &ColoredOperad,
    root: &Edge,
    claimed: &BTreeSet<Edge>,
) -> (OpName, Vec<Edge>) {
    if claimed.contains(root) {
        let unit = p.unit(&lab.colours[root]).expect("colour has a unit").clone();
        return (unit, vec![root.clone()]);
    }
    let w = t.top_vertex(root).expect("signature spans a subtree");
    let children = &t.vertices()[w].inputs;
    let parts: Vec<(OpName, Vec<Edge>)> =
        children.iter().map(|e| planar_value(t, lab, p, e, claimed)).collect();
    // Compose children lowest arity first: intermediates then never exceed
    // the larger of the vertex arity and the final arity, which keeps the
    // evaluation inside the operad's arity cap.
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by_key(|&i| (p.op(&parts[i].0).expect("op exists").arity(), i));
    let mut current = lab.ops[root].clone();
    let mut slots: Vec<usize> = (0..parts.len()).collect();
    for &i in &order {
        let s = slots[i];
        let m = p.op(&parts[i].0).expect("op exists").arity();
        current =
            p.compose(&current, s, &parts[i].0).expect("composite within arity cap").clone();
        for (j, slot) in slots.iter_mut().enumerate() {
            if j != i && *slot > s {
                *slot = *slot + m - 1;
            }
        }
    }
    let leaf_order: Vec<Edge> = parts.into_iter().flat_map(|(_, ord)| ord).collect();
    (current, leaf_order)
}

/// Restrict a labeling along an arrow: colours pull back along the edge
/// map, each vertex gets the evaluated image of its induced operation.
fn pull_labeling(alpha: &OmegaArrow, lab: &Labeling, p: &ColoredOperad) -> Labeling {
    let t = alpha.target();
    let colours: BTreeMap<Edge, Colour> = alpha
        .source()
        .edges()
        .into_iter()
        .map(|e| {
            let c = lab.colours[alpha.apply(&e)].clone();
            (e, c)
        })
        .collect();
    let ops: BTreeMap<Edge, OpName> = alpha
        .source()
        .vertices()
        .iter()
        .map(|v| {
            let tuple: Vec<Edge> = v.inputs.iter().map(|e| alpha.apply(e).clone()).collect();
            let op = evaluate_op(t, lab, p, alpha.apply(&v.output), &tuple);
            (v.output.clone(), op)
        })
        .collect();
    Labeling { colours, ops }
}

/// A subobject of a representable, generated by a list of maximal faces
/// into the target tree. Membership is factorization through one of them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sieve {
    target: Tree,
    maximal: Vec<OmegaArrow>,
}

impl Sieve {
    pub fn new(target: Tree, maximal: Vec<OmegaArrow>) -> Sieve {
        assert!(maximal.iter().all(|f| *f.target() == target), "faces land in the target");
        Sieve { target, maximal }
    }

    pub fn target(&self) -> &Tree {
        &self.target
    }

    pub fn maximal_faces(&self) -> &[OmegaArrow] {
        &self.maximal
    }

    /// Does an arrow into the target belong to the sieve?
    pub fn contains(&self, w: &OmegaArrow) -> bool {
        self.maximal.iter().any(|f| omega::factors_through(w, f).is_some())
    }

    /// Extensional equality of the generated subobjects: each generating
    /// face must belong to the other sieve, which decides equality because
    /// membership is closed under precomposition.
    pub fn equals(&self, other: &Sieve) -> bool {
        self.target == other.target
            && self.maximal.iter().all(|f| other.contains(f))
            && other.maximal.iter().all(|f| self.contains(f))
    }
}

/// The boundary sieve: all maximal faces.
pub fn boundary(t: &Tree) -> Result<Sieve, DsetError> {
    if t.degree() == 0 {
        return Err(DsetError::EtaHasNoBoundary);
    }
    let maximal = omega::maximal_faces(t).into_iter().map(|(_, f)| f).collect();
    Ok(Sieve::new(t.clone(), maximal))
}

/// The horn omitting the inner faces at the edges of `a`: all maximal
/// faces except `{inner_face(e) : e in a}`. `a` must be a non-empty set of
/// inner edges.
pub fn horn(t: &Tree, a: &BTreeSet<Edge>) -> Result<Sieve, DsetError> {
    if a.is_empty() {
        return Err(DsetError::BadHornSpec("the omitted set is empty".into()));
    }
    let inner: BTreeSet<Edge> = t.inner_edges().into_iter().collect();
    if let Some(e) = a.iter().find(|e| !inner.contains(*e)) {
        return Err(DsetError::BadHornSpec(format!("{e:?} is not an inner edge")));
    }
    let maximal = omega::maximal_faces(t)
        .into_iter()
        .filter(|(kind, _)| match kind {
            omega::FaceKind::Inner(e) => !a.contains(e),
            _ => true,
        })
        .map(|(_, f)| f)
        .collect();
    Ok(Sieve::new(t.clone(), maximal))
}

/// The inner horn at a single edge.
pub fn inner_horn(t: &Tree, e: &str) -> Result<Sieve, DsetError> {
    horn(t, &BTreeSet::from([e.to_string()]))
}

/// The all-outer-faces horn: omit every inner face.
pub fn outer_horn(t: &Tree) -> Result<Sieve, DsetError> {
    horn(t, &t.inner_edges().into_iter().collect())
}

/// The image under the simplicial embedding of the subcomplex of the
/// standard `n`-simplex generated by the faces `{d_j : j not omitted}`,
/// as a sieve on the linear tree.
pub fn simplicial_face_sieve(n: usize, omitted: &BTreeSet<usize>) -> Sieve {
    let maximal = (0..=n)
        .filter(|j| !omitted.contains(j))
        .map(|j| omega::simplicial_face(n, j))
        .collect();
    Sieve::new(Tree::linear(n), maximal)
}

/// Maps out of a subobject generated by dendrices of a host dendroidal
/// set, into `x`: one `x`-dendrex per generator, compatible on every
/// common restriction. Compatibility is witnessed over the canonical
/// shapes of degree at most the largest generator source degree, within
/// the valence bound: whenever two arrows into two generators restrict
/// the generators equally, they must restrict the assigned dendrices
/// equally. Coincidences over higher shapes follow by factoring through
/// their images, which lie inside generator sources; this needs every
/// mono from such a shape into the host that bounds a coincidence to
/// factor through a generator, which holds for sieves of maximal faces
/// and for full skeleton generator sets. Families are returned in
/// generator order, enumerated with backtracking in dendrex order.
pub fn hom_generated(
    host: &DendroidalSet,
    generators: &[(Tree, Dendrex)],
    x: &DendroidalSet,
) -> Result<Vec<Vec<Dendrex>>, DsetError> {
    let d_max = generators.iter().map(|(t, _)| t.degree()).max().unwrap_or(0);
    let shapes = enumerate_trees(d_max.min(x.bounds().degree), x.bounds().valence);
    // Constraints indexed by the later generator they touch, so the
    // backtracker checks each exactly once, as early as possible.
    let mut by_level: Vec<Vec<(usize, OmegaArrow, usize, OmegaArrow)>> =
        vec![Vec::new(); generators.len()];
    for s in &shapes {
        // Bucket the arrows into generators by their image in the host.
        // Entries arrive in generator order, and equality is transitive,
        // so chaining consecutive entries covers every pair in a bucket.
        let mut buckets: BTreeMap<Dendrex, Vec<(usize, OmegaArrow)>> = BTreeMap::new();
        for (i, (ti, gi)) in generators.iter().enumerate() {
            for u in omega::arrows_between(s, ti).iter() {
                buckets.entry(host.act(u, gi)?).or_default().push((i, u.clone()));
            }
        }
        for group in buckets.into_values() {
            for pair in group.windows(2) {
                let (j, v) = &pair[0];
                let (i, u) = &pair[1];
                by_level[*i.max(j)].push((*i, u.clone(), *j, v.clone()));
            }
        }
    }
    let mut found = Vec::new();
    let mut partial: Vec<Dendrex> = Vec::new();
    assign_family(x, generators, &by_level, &mut partial, &mut found)?;
    Ok(found)
}

fn assign_family(
    x: &DendroidalSet,
    generators: &[(Tree, Dendrex)],
    by_level: &[Vec<(usize, OmegaArrow, usize, OmegaArrow)>],
    partial: &mut Vec<Dendrex>,
    found: &mut Vec<Vec<Dendrex>>,
) -> Result<(), DsetError> {
    if partial.len() == generators.len() {
        found.push(partial.clone());
        return Ok(());
    }
    let k = partial.len();
    for cand in x.dendrices(&generators[k].0)?.iter() {
        partial.push(cand.clone());
        let mut ok = true;
        for (i, u, j, v) in &by_level[k] {
            if x.act(u, &partial[*i])? != x.act(v, &partial[*j])? {
                ok = false;
                break;
            }
        }
        if ok {
            assign_family(x, generators, by_level, partial, found)?;
        }
        partial.pop();
    }
    Ok(())
}

/// Maps from a sieve into a dendroidal set: compatible families over the
/// maximal faces, in face order.
pub fn hom_into(sieve: &Sieve, x: &DendroidalSet) -> Result<Vec<Vec<Dendrex>>, DsetError> {
    let host = DendroidalSet::representable(&sieve.target, x.bounds());
    let generators: Vec<(Tree, Dendrex)> = sieve
        .maximal
        .iter()
        .map(|f| (f.source().clone(), Dendrex::Arrow(f.clone())))
        .collect();
    hom_generated(&host, &generators, x)
}

/// The dendrices over the sieve's target restricting to the family.
pub fn fillers(
    sieve: &Sieve,
    family: &[Dendrex],
    x: &DendroidalSet,
) -> Result<Vec<Dendrex>, DsetError> {
    assert_eq!(family.len(), sieve.maximal.len());
    let mut out = Vec::new();
    for cand in x.dendrices(&sieve.target)?.iter() {
        let mut ok = true;
        for (f, want) in sieve.maximal.iter().zip(family.iter()) {
            if x.act(f, cand)? != *want {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(cand.clone());
        }
    }
    Ok(out)
}

/// The sieve as a dendroidal set of its own: over each shape the member
/// arrows, acted on by precomposition. Boundaries and horns become
/// honest subobjects of the representable this way.
pub fn sieve_as_dset(sieve: &Sieve, bounds: Bounds) -> DendroidalSet {
    let data = TableData::build(
        bounds,
        |t| {
            omega::arrows_between(t, sieve.target())
                .iter()
                .filter(|w| sieve.contains(w))
                .cloned()
                .map(Dendrex::Arrow)
                .collect()
        },
        |alpha, x| {
            let Dendrex::Arrow(w) = x else { unreachable!("sieve cells are arrows") };
            Dendrex::Arrow(alpha.then(w).expect("composable"))
        },
    );
    let name = format!("sieve[{}]", sieve.target().root());
    DendroidalSet::from_table(name, bounds, data)
}

/// Reference semantics for [`hom_into`]: count natural transformations
/// from the sieve, viewed as the subpresheaf of arrows it contains over
/// shapes of degree at most `max_degree`, into `x`. Brute force over all
/// value assignments; only for small fixtures.
pub fn naive_sieve_map_count(
    sieve: &Sieve,
    x: &DendroidalSet,
    max_degree: usize,
) -> Result<usize, DsetError> {
    let mut cells: Vec<(Tree, Vec<OmegaArrow>)> = Vec::new();
    for s in enumerate_trees(max_degree, x.bounds().valence) {
        let ws: Vec<OmegaArrow> = omega::arrows_between(&s, &sieve.target)
            .iter()
            .filter(|w| sieve.contains(w))
            .cloned()
            .collect();
        cells.push((s, ws));
    }
    let mut assignment: BTreeMap<OmegaArrow, Dendrex> = BTreeMap::new();
    naive_extend(&cells, 0, 0, x, &mut assignment)
}

fn naive_extend(
    cells: &[(Tree, Vec<OmegaArrow>)],
    six: usize,
    wix: usize,
    x: &DendroidalSet,
    assignment: &mut BTreeMap<OmegaArrow, Dendrex>,
) -> Result<usize, DsetError> {
    if six == cells.len() {
        return Ok(1);
    }
    let (s, ws) = &cells[six];
    if wix == ws.len() {
        return naive_extend(cells, six + 1, 0, x, assignment);
    }
    let w = &ws[wix];
    let mut count = 0;
    'cand: for cand in x.dendrices(s)?.iter() {
        // Naturality against everything assigned so far, in both
        // directions: precomposing an assigned cell into this one and
        // precomposing this cell into an assigned one.
        for (prev, val) in assignment.iter() {
            for alpha in omega::arrows_between(s, prev.source()).iter() {
                if alpha.then(prev).expect("composable") == *w && x.act(alpha, val)? != *cand {
                    continue 'cand;
                }
            }
            for alpha in omega::arrows_between(prev.source(), s).iter() {
                if alpha.then(w).expect("composable") == *prev && x.act(alpha, cand)? != *val {
                    continue 'cand;
                }
            }
        }
        assignment.insert(w.clone(), cand.clone());
        count += naive_extend(cells, six, wix + 1, x, assignment)?;
        assignment.remove(w);
    }
    Ok(count)
}

/// A finite simplicial set truncated at a dimension: cells with face and
/// degeneracy tables.
#[derive(Clone, Debug)]
pub struct SimplicialSet {
    pub dim: usize,
    pub cells: Vec<Vec<String>>,
    /// `faces[(m, j)][k]` is the index of `d_j` of cell `k` of dimension
    /// `m` in dimension `m - 1`.
    pub faces: BTreeMap<(usize, usize), Vec<usize>>,
    /// `degeneracies[(m, j)][k]` is the index of `s_j` of cell `k` of
    /// dimension `m` in dimension `m + 1`.
    pub degeneracies: BTreeMap<(usize, usize), Vec<usize>>,
}

impl SimplicialSet {
    /// The standard `n`-simplex truncated at `dim`: cells of dimension `m`
    /// are weakly increasing `(m+1)`-tuples in `0..=n`.
    pub fn standard(n: usize, dim: usize) -> SimplicialSet {
        let layers: Vec<Vec<Vec<usize>>> = (0..=dim)
            .map(|m| {
                let mut out: Vec<Vec<usize>> = vec![Vec::new()];
                for _ in 0..=m {
                    out = out
                        .into_iter()
                        .flat_map(|t| {
                            let lo = t.last().copied().unwrap_or(0);
                            (lo..=n).map(move |v| {
                                let mut t = t.clone();
                                t.push(v);
                                t
                            })
                        })
                        .collect();
                }
                out
            })
            .collect();
        Self::from_tuples(dim, &layers)
    }

    /// The boundary of the standard `n`-simplex truncated at `dim`: the
    /// tuples that miss some vertex.
    pub fn boundary_of_standard(n: usize, dim: usize) -> SimplicialSet {
        let all = SimplicialSet::standard(n, dim);
        let layers: Vec<Vec<Vec<usize>>> = (0..=dim)
            .map(|m| {
                all.cells[m]
                    .iter()
                    .map(|c| c.split(',').map(|v| v.parse().unwrap()).collect::<Vec<usize>>())
                    .filter(|t| t.iter().collect::<BTreeSet<_>>().len() < n + 1)
                    .collect()
            })
            .collect();
        Self::from_tuples(dim, &layers)
    }

    fn from_tuples(dim: usize, tuples: &[Vec<Vec<usize>>]) -> SimplicialSet {
        let name = |t: &[usize]| t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        let cells: Vec<Vec<String>> =
            tuples.iter().map(|layer| layer.iter().map(|t| name(t)).collect()).collect();
        let index: Vec<BTreeMap<String, usize>> = cells
            .iter()
            .map(|layer| layer.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect())
            .collect();
        let mut faces = BTreeMap::new();
        let mut degeneracies = BTreeMap::new();
        for m in 1..=dim {
            for j in 0..=m {
                let table: Vec<usize> = tuples[m]
                    .iter()
                    .map(|t| {
                        let mut s = t.clone();
                        s.remove(j);
                        index[m - 1][&name(&s)]
                    })
                    .collect();
                faces.insert((m, j), table);
            }
        }
        for m in 0..dim {
            for j in 0..=m {
                let table: Vec<usize> = tuples[m]
                    .iter()
                    .map(|t| {
                        let mut s = t.clone();
                        s.insert(j, t[j]);
                        index[m + 1][&name(&s)]
                    })
                    .collect();
                degeneracies.insert((m, j), table);
            }
        }
        SimplicialSet { dim, cells, faces, degeneracies }
    }

    /// Apply the operator induced by a weakly monotone `phi: [m] -> [n]`
    /// to a cell index of dimension `n`, landing in dimension `m`: peel a
    /// value missing from the image as a face, then a repeated value as a
    /// degeneracy.
    pub fn operator(&self, m: usize, n: usize, phi: &[usize], cell: usize) -> usize {
        assert_eq!(phi.len(), m + 1);
        if let Some(c) = (0..=n).find(|c| !phi.contains(c)) {
            let reduced: Vec<usize> = phi.iter().map(|&v| if v > c { v - 1 } else { v }).collect();
            let after_face = self.faces[&(n, c)][cell];
            return self.operator(m, n - 1, &reduced, after_face);
        }
        if let Some(j) = (0..m).find(|&j| phi[j] == phi[j + 1]) {
            let mut reduced = phi.to_vec();
            reduced.remove(j + 1);
            let smaller = self.operator(m - 1, n, &reduced, cell);
            return self.degeneracies[&(m - 1, j)][smaller];
        }
        cell
    }
}

/// The dendroidal image of a simplicial set: linear shapes carry the
/// cells, all other shapes are empty, as no tree with a vertex of valence
/// other than one admits an arrow into a linear tree.
pub fn i_shriek(s: &SimplicialSet, bounds: Bounds) -> DendroidalSet {
    assert!(s.dim >= bounds.degree, "simplicial data truncated below the degree bound");
    let linear_dim = |t: &Tree| -> Option<usize> {
        let m = t.degree();
        (*t == Tree::linear(m).canonical_form().0).then_some(m)
    };
    let data = TableData::build(
        bounds,
        |t| match linear_dim(t) {
            Some(m) => (0..s.cells[m].len() as u64).map(Dendrex::Ix).collect(),
            None => Vec::new(),
        },
        |alpha, x| {
            let m = alpha.source().degree();
            let n = alpha.target().degree();
            let Dendrex::Ix(cell) = x else { unreachable!("cells are indices") };
            // Canonical linear trees are named e0 (root) up to e{n} (top
            // leaf), so the simplicial vertex of edge e{j} is n - j.
            let phi: Vec<usize> = (0..=m)
                .map(|k| {
                    let img = alpha.apply(&format!("e{}", m - k));
                    let j: usize = img.trim_start_matches('e').parse().expect("canonical name");
                    n - j
                })
                .collect();
            Dendrex::Ix(s.operator(m, n, &phi, *cell as usize) as u64)
        },
    );
    DendroidalSet::from_table("i_!(simplicial)", bounds, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operad::{omega_operad, Operation};
    use crate::tree::Vertex;

    fn six_edge_tree() -> Tree {
        Tree::new(
            "a".into(),
            vec![
                Vertex { inputs: vec!["b".into(), "c".into(), "d".into()], output: "a".into() },
                Vertex { inputs: vec!["e".into(), "f".into()], output: "b".into() },
                Vertex { inputs: vec![], output: "d".into() },
            ],
        )
        .unwrap()
    }

    fn stacked() -> Tree {
        Tree::new(
            "r".into(),
            vec![
                Vertex { inputs: vec!["x".into(), "y".into()], output: "r".into() },
                Vertex { inputs: vec!["z".into(), "w".into()], output: "x".into() },
            ],
        )
        .unwrap()
    }

    fn small_bounds() -> Bounds {
        Bounds { degree: 3, valence: 3 }
    }

    fn com() -> ColoredOperad {
        let c = || "c".to_string();
        let ops = vec![
            Operation { name: "u".into(), inputs: vec![c()], output: c() },
            Operation { name: "m".into(), inputs: vec![c(), c()], output: c() },
            Operation { name: "w".into(), inputs: vec![c(), c(), c()], output: c() },
        ];
        let units = BTreeMap::from([(c(), "u".to_string())]);
        let composition = BTreeMap::from([
            (("m".to_string(), 0usize, "m".to_string()), "w".to_string()),
            (("m".to_string(), 1usize, "m".to_string()), "w".to_string()),
        ]);
        let mut sym = BTreeMap::from([(("m".to_string(), vec![1, 0]), "m".to_string())]);
        for perm in crate::operad::all_perms(3) {
            sym.insert(("w".to_string(), perm), "w".to_string());
        }
        ColoredOperad::new("Com3", vec![c()], ops, units, composition, Some(sym), 3).unwrap()
    }

    #[test]
    fn representable_counts_and_yoneda() {
        let t = six_edge_tree();
        let x = DendroidalSet::representable(&t, Bounds::default());
        assert_eq!(x.dendrices(&Tree::eta("z")).unwrap().len(), t.edges().len());
        // Yoneda via hom out of the whole representable: one generator,
        // the identity dendrex, and no constraints beyond
        // self-coincidences.
        for shape in [Tree::eta("y"), Tree::corolla(2)] {
            let host = DendroidalSet::representable(&shape, Bounds::default());
            let gens = vec![(shape.clone(), Dendrex::Arrow(OmegaArrow::identity(&shape)))];
            let maps = hom_generated(&host, &gens, &x).unwrap();
            assert_eq!(maps.len(), x.dendrices(&shape).unwrap().len());
        }
    }

    #[test]
    fn nerve_dendrices_are_labelings() {
        let p = com();
        let x = DendroidalSet::nerve(&p, small_bounds());
        assert_eq!(x.dendrices(&Tree::eta("e")).unwrap().len(), 1);
        // One colouring of C_2 and one binary op over it.
        assert_eq!(x.dendrices(&Tree::corolla(2)).unwrap().len(), 1);
        // Unary ops: just the unit.
        assert_eq!(x.dendrices(&Tree::linear(1)).unwrap().len(), 1);
        let t = six_edge_tree();
        let y = DendroidalSet::nerve(&omega_operad(&t), Bounds::default());
        // Over eta: one labeling per colour.
        assert_eq!(y.dendrices(&Tree::eta("e")).unwrap().len(), 6);
        // The tautological labeling sits over the tree itself.
        let over_t = y.dendrices(&t).unwrap();
        assert!(over_t.iter().any(|d| match d {
            Dendrex::Label(l) => l.colours.iter().all(|(e, c)| e == c),
            _ => false,
        }));
    }

    #[test]
    fn nerve_action_composes_operations() {
        let p = com();
        let x = DendroidalSet::nerve(&p, small_bounds());
        let t = stacked();
        let lab = x.dendrices(&t).unwrap()[0].clone();
        match &lab {
            Dendrex::Label(l) => assert_eq!(l.ops[&"r".to_string()], "m"),
            _ => unreachable!(),
        }
        // Contracting the inner edge composes the two binary ops.
        let face = omega::inner_face(&t, "x").unwrap();
        match x.act(&face, &lab).unwrap() {
            Dendrex::Label(l) => assert_eq!(l.ops[&"r".to_string()], "w"),
            _ => unreachable!(),
        }
        // Degeneracies insert units, and are recognized with a witness.
        let i1 = Tree::linear(1);
        let sigma = omega::degeneracy(&i1, "1").unwrap();
        let eta_dendrex = x.dendrices(&Tree::eta("1")).unwrap()[0].clone();
        let degenerate = x.act(&sigma, &eta_dendrex).unwrap();
        match &degenerate {
            Dendrex::Label(l) => assert_eq!(l.ops[&"1".to_string()], "u"),
            _ => unreachable!(),
        }
        assert!(x.is_degenerate(&i1, &degenerate).unwrap());
        let witness = x.degeneracy_witness(&i1, &degenerate).unwrap().unwrap();
        assert_eq!(witness.1, eta_dendrex);
        assert_eq!(x.nondegenerate(&i1).unwrap().len(), 0);
    }

    #[test]
    fn functoriality_audit_passes() {
        let x = DendroidalSet::nerve(&com(), small_bounds());
        assert!(x.audit_functoriality(2).unwrap().is_empty());
        let r = DendroidalSet::representable(&Tree::corolla(2), small_bounds());
        assert!(r.audit_functoriality(2).unwrap().is_empty());
        // Materialized tables agree with the lazy backend on all queries.
        let table = r.materialize().unwrap();
        assert!(table.audit_functoriality(2).unwrap().is_empty());
        for s in r.shapes() {
            assert_eq!(r.dendrices(&s).unwrap().as_ref(), table.dendrices(&s).unwrap().as_ref());
        }
    }

    #[test]
    fn boundary_and_horn_sieves() {
        let t = six_edge_tree();
        let b = boundary(&t).unwrap();
        assert_eq!(b.maximal_faces().len(), 4);
        assert_eq!(boundary(&Tree::eta("e")).unwrap_err(), DsetError::EtaHasNoBoundary);
        let h = horn(&t, &BTreeSet::from(["b".to_string()])).unwrap();
        assert_eq!(h.maximal_faces().len(), 3);
        assert!(matches!(horn(&t, &BTreeSet::new()).unwrap_err(), DsetError::BadHornSpec(_)));
        assert!(matches!(
            horn(&t, &BTreeSet::from(["c".to_string()])).unwrap_err(),
            DsetError::BadHornSpec(_)
        ));
        // The inner face at b is in the boundary but not the horn.
        let db = omega::inner_face(&t, "b").unwrap();
        assert!(b.contains(&db));
        assert!(!h.contains(&db));
        assert!(!h.equals(&b));
        // Boundary of a corolla: the edge inclusions.
        assert_eq!(boundary(&Tree::corolla(2)).unwrap().maximal_faces().len(), 3);
        // The outer horn omits both inner faces.
        assert_eq!(outer_horn(&t).unwrap().maximal_faces().len(), 2);
    }

    #[test]
    fn simplicial_sieves_match_horns() {
        for n in 1..=4usize {
            let b = boundary(&Tree::linear(n)).unwrap();
            let sb = simplicial_face_sieve(n, &BTreeSet::new());
            assert!(b.equals(&sb), "boundary vs simplicial, n={n}");
            for k in 1..n {
                let h = inner_horn(&Tree::linear(n), &k.to_string()).unwrap();
                let sh = simplicial_face_sieve(n, &BTreeSet::from([k]));
                assert!(h.equals(&sh), "horn vs simplicial, n={n}, k={k}");
                assert!(!h.equals(&sb));
            }
        }
    }

    #[test]
    fn horn_families_and_fillers() {
        let x = DendroidalSet::nerve(&com(), small_bounds());
        let t = stacked();
        let h = inner_horn(&t, "x").unwrap();
        let families = hom_into(&h, &x).unwrap();
        assert!(!families.is_empty());
        for family in &families {
            let f = fillers(&h, family, &x).unwrap();
            assert_eq!(f.len(), 1, "nerve horns fill uniquely");
        }
        let b = boundary(&t).unwrap();
        assert!(hom_into(&b, &x).unwrap().len() >= families.len());
    }

    #[test]
    fn hom_into_matches_naive_oracle() {
        let x = DendroidalSet::nerve(&com(), small_bounds());
        let t = stacked();
        for sieve in [inner_horn(&t, "x").unwrap(), boundary(&t).unwrap()] {
            let fast = hom_into(&sieve, &x).unwrap().len();
            let slow = naive_sieve_map_count(&sieve, &x, 3).unwrap();
            assert_eq!(fast, slow, "sieve maps into a nerve");
        }
        let c2 = Tree::corolla(2);
        let r = DendroidalSet::representable(&stacked(), small_bounds());
        let sieve = boundary(&c2).unwrap();
        let fast = hom_into(&sieve, &r).unwrap().len();
        let slow = naive_sieve_map_count(&sieve, &r, 3).unwrap();
        assert_eq!(fast, slow, "sieve maps into a representable");
    }

    #[test]
    fn skeleton_filtration() {
        let t = six_edge_tree();
        let x = DendroidalSet::representable(&t, Bounds::default());
        let sk_full = x.skeleton(3);
        for s in x.shapes() {
            assert_eq!(
                x.dendrices(&s).unwrap().as_ref(),
                sk_full.dendrices(&s).unwrap().as_ref(),
                "the skeleton at the degree of the tree is everything"
            );
        }
        // Over C_1 the zero skeleton keeps exactly the degenerate arrows.
        let sk0 = x.skeleton(0);
        let c1 = Tree::corolla(1);
        for d in sk0.dendrices(&c1).unwrap().iter() {
            assert!(x.is_degenerate(&c1, d).unwrap());
        }
        // The filtration is increasing and exhaustive.
        for s in x.shapes() {
            let mut prev = 0usize;
            for n in 0..=4 {
                let count = x.skeleton(n).dendrices(&s).unwrap().len();
                assert!(count >= prev);
                prev = count;
            }
            assert_eq!(prev, x.dendrices(&s).unwrap().len());
        }
    }

    #[test]
    fn normality_and_pushouts() {
        // Free tree operads are sigma-free and their nerves normal.
        let x = DendroidalSet::nerve(&omega_operad(&six_edge_tree()), small_bounds());
        assert!(x.is_normal().unwrap());
        assert!(x.skeletal_pushout_check(1).unwrap());
        assert!(x.skeletal_pushout_check(2).unwrap());
        // The commutative operad is not normal: the binary labeling is
        // fixed by the transposition of C_2.
        let y = DendroidalSet::nerve(&com(), small_bounds());
        let (shape, _, phi) = y.normality_counterexample().unwrap().unwrap();
        assert_eq!(shape, Tree::corolla(2).canonical_form().0);
        assert!(!phi.is_identity());
        assert!(!y.is_normal().unwrap());
        assert!(!y.skeletal_pushout_check(1).unwrap());
        // A representable with a free automorphism action stays normal.
        let r = DendroidalSet::representable(&Tree::corolla(2), small_bounds());
        assert!(r.is_normal().unwrap());
        assert!(r.skeletal_pushout_check(1).unwrap());
        assert!(r.skeletal_pushout_check(2).unwrap());
    }

    #[test]
    fn fault_injected_table_fails_pushout() {
        // The terminal presheaf: one dendrex over every shape, constant
        // actions. It is functorial, but the C_2 dendrex is nondegenerate
        // and fixed by the transposition, so normality fails and the
        // symmetric shapes double-hit their fresh cells in the attaching
        // squares.
        let bounds = Bounds { degree: 2, valence: 2 };
        let data = TableData::build(bounds, |_| vec![Dendrex::Ix(0)], |_, _| Dendrex::Ix(0));
        let x = DendroidalSet::from_table("terminal", bounds, data);
        assert!(x.audit_functoriality(2).unwrap().is_empty());
        assert!(!x.is_normal().unwrap());
        assert!(!x.skeletal_pushout_check(1).unwrap());
        assert!(!x.skeletal_pushout_check(2).unwrap());
    }

    #[test]
    fn i_shriek_standard_simplices() {
        let bounds = Bounds { degree: 4, valence: 2 };
        // The image of a standard simplex matches the representable of
        // the linear tree, shape by shape.
        for n in 0..=3usize {
            let s = SimplicialSet::standard(n, 4);
            let x = i_shriek(&s, bounds);
            let rep = DendroidalSet::representable(&Tree::linear(n), bounds);
            for t in x.shapes() {
                assert_eq!(
                    x.dendrices(&t).unwrap().len(),
                    rep.dendrices(&t).unwrap().len(),
                    "n={n}, shape degree {}",
                    t.degree()
                );
            }
            assert!(x.audit_functoriality(3).unwrap().is_empty());
            assert!(x.is_normal().unwrap());
        }
        // Skeleta commute with the embedding: the 1-skeleton of the
        // 2-simplex is its boundary.
        let x = i_shriek(&SimplicialSet::standard(2, 4), bounds);
        let sk1 = x.skeleton(1);
        let xb = i_shriek(&SimplicialSet::boundary_of_standard(2, 4), bounds);
        for t in x.shapes() {
            assert_eq!(
                sk1.dendrices(&t).unwrap().len(),
                xb.dendrices(&t).unwrap().len(),
                "degree {}",
                t.degree()
            );
        }
    }

    #[test]
    fn json_dump_shape() {
        let x = DendroidalSet::representable(&Tree::corolla(1), Bounds { degree: 2, valence: 2 });
        let v = x.to_json().unwrap();
        assert_eq!(v["name"], "Omega[0]");
        assert!(v["shapes"].as_array().unwrap().len() >= 4);
        let summary = x.count_summary().unwrap();
        assert_eq!(summary.iter().map(|(t, _)| t.degree()).max(), Some(2));
    }
}
