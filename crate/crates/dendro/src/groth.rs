//! The Grothendieck construction for diagrams of dendroidal sets indexed
//! by a finite Cartesian category.
//!
//! The index category is given operadically: a coloured operad whose
//! operations are maps out of finite products, together with chosen
//! product, projection and tupling data. A diagram assigns a dendroidal
//! set to every colour and a dendroidal map to every unary operation,
//! contravariantly. A dendrex of the integrated set over a shape `T` is a
//! pair `(t, x)` of a nerve dendrex `t` of the index category and a family
//! `x` assigning to every arrow `r: R -> T` a dendrex of the component over
//! the product of the leaf colours of the restricted labeling, compatibly
//! with precomposition. Horn filling in the integrated set follows the
//! component-wise recipe: fill the projected horn in the nerve, pull the
//! family back along the canonical in-maps, and fill in the component over
//! the in-object of the filler, which is unchanged by inner faces.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::dset::{
    inner_horn, labelings, Bounds, Dendrex, DendroidalSet, DsetError, Labeling, TableData,
};
use crate::kan::{check_inner_kan, fill_horn, KanError};
use crate::omega::{arrows_between, OmegaArrow};
use crate::operad::{check_operad_map, ColoredOperad, Colour, OpName, OperadMap};
use crate::tree::{enumerate_trees, Edge, Tree};

#[derive(Debug, Error)]
pub enum GrothError {
    #[error("bounds: {0}")]
    Bounds(String),
    #[error("missing-product: no chosen product for the colour list {0:?}")]
    MissingProduct(Vec<Colour>),
    #[error("missing-projection: no projection {1} out of the product of {0:?}")]
    MissingProjection(Vec<Colour>, usize),
    #[error("missing-tuple: no tupling operation for the colour list {0:?}")]
    MissingTuple(Vec<Colour>),
    #[error("product-axiom: {0}")]
    ProductAxiom(String),
    #[error("bad-diagram: {0}")]
    BadDiagram(String),
    #[error("bad-horn: {0}")]
    BadHorn(String),
    #[error("component-not-kan: the component at {0:?} fails the inner Kan check")]
    ComponentNotKan(Colour),
    #[error("no-filler: {0}")]
    NoFiller(String),
    #[error(transparent)]
    Dset(#[from] DsetError),
    #[error(transparent)]
    Kan(#[from] KanError),
}

/// A finite Cartesian category, presented as a coloured operad whose
/// `n`-ary operations from `(c_1, ..., c_n)` to `c` are the maps
/// `c_1 x ... x c_n -> c`, together with the chosen product structure.
///
/// `products` picks a product colour for each list that will occur as the
/// leaf colours of a labeling, `projections` the unary projections out of
/// it, and `tuples` the operation exhibiting the product as the tupling of
/// the projections, needed only for lists short enough to be operation
/// arities. Singleton data is forced (the product of one colour is that
/// colour, with the unit as projection and tuple) and filled in. Symmetry
/// isomorphisms of products are not stored: a reordering is the pairing of
/// the permuted projections, which [`CartesianData::pair`] finds.
#[derive(Clone, Debug)]
pub struct CartesianData {
    operad: ColoredOperad,
    products: BTreeMap<Vec<Colour>, Colour>,
    projections: BTreeMap<(Vec<Colour>, usize), OpName>,
    tuples: BTreeMap<Vec<Colour>, OpName>,
}

impl CartesianData {
    /// Structural checks only; the product axioms are law checks under
    /// [`CartesianData::validate`].
    pub fn new(
        operad: ColoredOperad,
        products: BTreeMap<Vec<Colour>, Colour>,
        projections: BTreeMap<(Vec<Colour>, usize), OpName>,
        tuples: BTreeMap<Vec<Colour>, OpName>,
    ) -> Result<CartesianData, GrothError> {
        let mut products = products;
        let mut projections = projections;
        let mut tuples = tuples;
        for c in operad.colours() {
            let singleton = vec![c.clone()];
            match products.get(&singleton) {
                Some(p) if p != c => {
                    return Err(GrothError::ProductAxiom(format!(
                        "the singleton product of {c:?} must be {c:?}, not {p:?}"
                    )))
                }
                Some(_) => {}
                None => {
                    products.insert(singleton.clone(), c.clone());
                }
            }
            let unit = operad.unit(c).expect("every colour has a unit").clone();
            projections.entry((singleton.clone(), 0)).or_insert_with(|| unit.clone());
            tuples.entry(singleton).or_insert(unit);
        }
        let known: BTreeSet<&Colour> = operad.colours().iter().collect();
        for (list, p) in &products {
            for c in list.iter().chain(std::iter::once(p)) {
                if !known.contains(c) {
                    return Err(GrothError::BadDiagram(format!(
                        "unknown colour {c:?} in the product data"
                    )));
                }
            }
            for i in 0..list.len() {
                let name = projections
                    .get(&(list.clone(), i))
                    .ok_or_else(|| GrothError::MissingProjection(list.clone(), i))?;
                let op = operad.op(name).ok_or_else(|| {
                    GrothError::BadDiagram(format!("projection {name:?} is not an operation"))
                })?;
                if op.inputs != vec![p.clone()] || op.output != list[i] {
                    return Err(GrothError::ProductAxiom(format!(
                        "projection {i} of {list:?} has the wrong signature"
                    )));
                }
            }
            if list.len() <= operad.max_arity() {
                let name = tuples
                    .get(list)
                    .ok_or_else(|| GrothError::MissingTuple(list.clone()))?;
                let op = operad.op(name).ok_or_else(|| {
                    GrothError::BadDiagram(format!("tuple {name:?} is not an operation"))
                })?;
                if op.inputs != *list || op.output != *p {
                    return Err(GrothError::ProductAxiom(format!(
                        "the tuple of {list:?} has the wrong signature"
                    )));
                }
            }
        }
        for (list, i) in projections.keys() {
            if !products.contains_key(list) || *i >= list.len() {
                return Err(GrothError::BadDiagram(format!(
                    "projection key ({list:?}, {i}) has no chosen product"
                )));
            }
        }
        for list in tuples.keys() {
            if !products.contains_key(list) {
                return Err(GrothError::BadDiagram(format!(
                    "tuple key {list:?} has no chosen product"
                )));
            }
        }
        Ok(CartesianData { operad, products, projections, tuples })
    }

    pub fn operad(&self) -> &ColoredOperad {
        &self.operad
    }

    pub fn product(&self, list: &[Colour]) -> Result<&Colour, GrothError> {
        self.products.get(list).ok_or_else(|| GrothError::MissingProduct(list.to_vec()))
    }

    pub fn projection(&self, list: &[Colour], i: usize) -> Result<&OpName, GrothError> {
        self.projections
            .get(&(list.to_vec(), i))
            .ok_or_else(|| GrothError::MissingProjection(list.to_vec(), i))
    }

    pub fn tuple(&self, list: &[Colour]) -> Result<&OpName, GrothError> {
        self.tuples.get(list).ok_or_else(|| GrothError::MissingTuple(list.to_vec()))
    }

    /// The unique map to the terminal object (the empty product).
    pub fn bang(&self, from: &Colour) -> Result<OpName, GrothError> {
        let top = self.product(&[])?;
        let hits = self.operad.ops_with_signature(&[from.clone()], top);
        match hits.as_slice() {
            [op] => Ok(op.name.clone()),
            _ => Err(GrothError::ProductAxiom(format!(
                "{} arrows from {from:?} to the terminal object",
                hits.len()
            ))),
        }
    }

    /// The unary operation out of the product of the inputs that the
    /// operation factors through: the unique `u` with `u . tuple = op`.
    pub fn avatar(&self, op: &str) -> Result<OpName, GrothError> {
        let o = self
            .operad
            .op(op)
            .ok_or_else(|| GrothError::BadDiagram(format!("{op:?} is not an operation")))?;
        if o.arity() == 1 {
            return Ok(o.name.clone());
        }
        let p = self.product(&o.inputs)?.clone();
        let tup = self.tuple(&o.inputs)?.clone();
        let hits: Vec<&OpName> = self
            .operad
            .ops_with_signature(&[p], &o.output)
            .into_iter()
            .filter(|u| self.operad.compose(&u.name, 0, &tup) == Some(&o.name.clone()))
            .map(|u| &u.name)
            .collect();
        match hits.as_slice() {
            [u] => Ok((*u).clone()),
            _ => Err(GrothError::ProductAxiom(format!(
                "{} unary factorizations of {op:?} through the tuple of its inputs",
                hits.len()
            ))),
        }
    }

    /// The pairing `<f_1, ..., f_n>: a -> product(list)` of unary
    /// components `f_i: a -> list[i]`: the unique unary map composing with
    /// each projection to the matching component.
    pub fn pair(
        &self,
        a: &Colour,
        components: &[OpName],
        list: &[Colour],
    ) -> Result<OpName, GrothError> {
        if components.len() != list.len() {
            return Err(GrothError::BadDiagram(format!(
                "{} components for a pairing into a product of {}",
                components.len(),
                list.len()
            )));
        }
        match list.len() {
            0 => return self.bang(a),
            1 => return Ok(components[0].clone()),
            _ => {}
        }
        let p = self.product(list)?.clone();
        let mut hits = Vec::new();
        'cand: for g in self.operad.ops_with_signature(&[a.clone()], &p) {
            for (i, f) in components.iter().enumerate() {
                let pi = self.projection(list, i)?;
                if self.operad.compose(pi, 0, &g.name) != Some(f) {
                    continue 'cand;
                }
            }
            hits.push(g.name.clone());
        }
        match hits.as_slice() {
            [g] => Ok(g.clone()),
            _ => Err(GrothError::ProductAxiom(format!(
                "{} pairings of {components:?} into the product of {list:?}",
                hits.len()
            ))),
        }
    }

    /// The in-object of a labeling: the product of its leaf colours in
    /// planar order.
    pub fn in_object(&self, shape: &Tree, t: &Labeling) -> Result<Colour, GrothError> {
        let list: Vec<Colour> = shape.leaves().iter().map(|l| t.colours[l].clone()).collect();
        Ok(self.product(&list)?.clone())
    }

    /// The component `m_e: in(t) -> t(e)` of the labeling at an edge:
    /// a projection at a leaf, and otherwise the avatar of the vertex
    /// operation composed with the pairing of the child components.
    pub fn edge_map(&self, shape: &Tree, t: &Labeling, e: &str) -> Result<OpName, GrothError> {
        if shape.is_leaf(e) {
            let leaves = shape.leaves();
            let j = leaves.iter().position(|l| l == e).expect("a leaf is among the leaves");
            let list: Vec<Colour> = leaves.iter().map(|l| t.colours[l].clone()).collect();
            return Ok(self.projection(&list, j)?.clone());
        }
        let vix = shape.top_vertex(e).expect("a non-leaf edge has a vertex above it");
        let v = &shape.vertices()[vix];
        let op = &t.ops[e];
        let components: Vec<OpName> = v
            .inputs
            .iter()
            .map(|c| self.edge_map(shape, t, c))
            .collect::<Result<_, _>>()?;
        let list: Vec<Colour> = v.inputs.iter().map(|c| t.colours[c].clone()).collect();
        let a = self.in_object(shape, t)?;
        let g = self.pair(&a, &components, &list)?;
        let u = self.avatar(op)?;
        self.operad.compose(&u, 0, &g).cloned().ok_or_else(|| {
            GrothError::ProductAxiom(format!(
                "missing unary composition row ({u:?}, 0, {g:?})"
            ))
        })
    }

    /// The canonical arrow `in(alpha): in(t) -> in(alpha* t)` for
    /// `alpha: R -> T` and a labeling `t` of `T`: the pairing of the edge
    /// maps at the images of the leaves of `R`. For an inner face this is
    /// the unit, realizing that inner faces do not change the in-object.
    pub fn in_map(&self, alpha: &OmegaArrow, t: &Labeling) -> Result<OpName, GrothError> {
        let shape = alpha.target();
        let a = self.in_object(shape, t)?;
        let mut components = Vec::new();
        let mut list = Vec::new();
        for l in alpha.source().leaves() {
            let image = alpha.apply(&l);
            components.push(self.edge_map(shape, t, image)?);
            list.push(t.colours[image].clone());
        }
        self.pair(&a, &components, &list)
    }

    /// Law checks: terminal object, unique factorization through tuples,
    /// pairing bijections and unary composition closure. Structural
    /// well-formedness is already enforced by [`CartesianData::new`].
    pub fn validate(&self) -> Vec<String> {
        let mut errs: Vec<String> =
            self.operad.validate().into_iter().map(|e| format!("operad: {e}")).collect();
        if let Some(top) = self.products.get(&Vec::new()) {
            for a in self.operad.colours() {
                let n = self.operad.ops_with_signature(&[a.clone()], top).len();
                if n != 1 {
                    errs.push(format!("terminal: {n} arrows from {a:?} to the empty product"));
                }
            }
        }
        for (list, p) in &self.products {
            if let Some(tup) = self.tuples.get(list) {
                for o in self.operad.ops() {
                    if o.inputs != *list || o.arity() < 2 {
                        continue;
                    }
                    let hits = self
                        .operad
                        .ops_with_signature(&[p.clone()], &o.output)
                        .into_iter()
                        .filter(|u| self.operad.compose(&u.name, 0, tup) == Some(&o.name))
                        .count();
                    if hits != 1 {
                        errs.push(format!(
                            "product {list:?}: {hits} unary factorizations of {:?} through the tuple",
                            o.name
                        ));
                    }
                }
            }
            if list.len() < 2 {
                continue;
            }
            for a in self.operad.colours() {
                let mut expected = 1usize;
                for c in list {
                    expected *= self.operad.ops_with_signature(&[a.clone()], c).len();
                }
                let mut seen = BTreeSet::new();
                for g in self.operad.ops_with_signature(&[a.clone()], p) {
                    let mut key = Vec::new();
                    let mut total = true;
                    for i in 0..list.len() {
                        let pi = &self.projections[&(list.clone(), i)];
                        match self.operad.compose(pi, 0, &g.name) {
                            Some(f) => key.push(f.clone()),
                            None => {
                                errs.push(format!(
                                    "missing unary composition row ({pi:?}, 0, {:?})",
                                    g.name
                                ));
                                total = false;
                                break;
                            }
                        }
                    }
                    if total && !seen.insert(key) {
                        errs.push(format!(
                            "product {list:?}: two pairings from {a:?} share their components"
                        ));
                    }
                }
                if seen.len() != expected {
                    errs.push(format!(
                        "product {list:?}: {} pairings from {a:?}, expected {expected}",
                        seen.len()
                    ));
                }
            }
        }
        let unary: Vec<_> = self.operad.ops().iter().filter(|o| o.arity() == 1).collect();
        for p in &unary {
            for q in &unary {
                if q.output == p.inputs[0] && self.operad.compose(&p.name, 0, &q.name).is_none() {
                    errs.push(format!(
                        "unary composition ({:?}, 0, {:?}) is missing",
                        p.name, q.name
                    ));
                }
            }
        }
        errs
    }

    pub fn to_json(&self) -> Result<Value, GrothError> {
        let products: Vec<Value> =
            self.products.iter().map(|(l, p)| json!([l, p])).collect();
        let projections: Vec<Value> =
            self.projections.iter().map(|((l, i), op)| json!([l, i, op])).collect();
        let tuples: Vec<Value> = self.tuples.iter().map(|(l, op)| json!([l, op])).collect();
        Ok(json!({
            "operad": self.operad.to_json()?,
            "products": products,
            "projections": projections,
            "tuples": tuples,
        }))
    }
}

fn colour_lists(colours: &[Colour], len: usize) -> Vec<Vec<Colour>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v| {
                colours.iter().map(move |c| {
                    let mut w = v.clone();
                    w.push(c.clone());
                    w
                })
            })
            .collect();
    }
    out
}

/// The Cartesian structure of a finite meet-semilattice with a top
/// element, under `leq`: one operation `[c_1,...,c_n]>c` for every source
/// list whose meet lies below `c`, products given by meets, and every
/// structural datum the unique operation of its signature.
pub fn posetal_cartesian(
    name: &str,
    colours: &[&str],
    leq: impl Fn(&str, &str) -> bool,
    max_list: usize,
    max_arity: usize,
) -> Result<CartesianData, GrothError> {
    let colours: Vec<Colour> = colours.iter().map(|c| c.to_string()).collect();
    let meet = |list: &[Colour]| -> Result<Colour, GrothError> {
        let lower: Vec<&Colour> =
            colours.iter().filter(|m| list.iter().all(|c| leq(m, c))).collect();
        lower
            .iter()
            .find(|m| lower.iter().all(|o| leq(o, m)))
            .map(|m| (*m).clone())
            .ok_or_else(|| GrothError::ProductAxiom(format!("the list {list:?} has no meet")))
    };
    let op_name =
        |list: &[Colour], out: &Colour| format!("[{}]>{out}", list.join(","));
    let mut ops = Vec::new();
    let mut lists_by_arity = Vec::new();
    for n in 0..=max_arity {
        let lists = colour_lists(&colours, n);
        for list in &lists {
            let m = meet(list)?;
            for out in &colours {
                if leq(&m, out) {
                    ops.push(crate::operad::Operation {
                        name: op_name(list, out),
                        inputs: list.clone(),
                        output: out.clone(),
                    });
                }
            }
        }
        lists_by_arity.push(lists);
    }
    let units: BTreeMap<Colour, OpName> = colours
        .iter()
        .map(|c| (c.clone(), op_name(std::slice::from_ref(c), c)))
        .collect();
    let mut composition = BTreeMap::new();
    for p in &ops {
        for (i, middle) in p.inputs.iter().enumerate() {
            for q in &ops {
                if q.output != *middle || p.arity() + q.arity() > max_arity + 1 {
                    continue;
                }
                let mut spliced = p.inputs.clone();
                spliced.splice(i..=i, q.inputs.iter().cloned());
                // The meet of the spliced list lies below the old meet,
                // so the composite operation exists.
                composition
                    .insert((p.name.clone(), i, q.name.clone()), op_name(&spliced, &p.output));
            }
        }
    }
    let mut symmetries = BTreeMap::new();
    for p in &ops {
        for perm in crate::operad::all_perms(p.arity()) {
            let permuted: Vec<Colour> = perm.iter().map(|&k| p.inputs[k].clone()).collect();
            symmetries.insert((p.name.clone(), perm), op_name(&permuted, &p.output));
        }
    }
    let operad = ColoredOperad::new(
        name,
        colours.clone(),
        ops,
        units,
        composition,
        Some(symmetries),
        max_arity,
    )
    .map_err(|e| GrothError::BadDiagram(format!("posetal operad: {e}")))?;
    let mut products = BTreeMap::new();
    let mut projections = BTreeMap::new();
    let mut tuples = BTreeMap::new();
    for n in 0..=max_list {
        for list in colour_lists(&colours, n) {
            let m = meet(&list)?;
            for (i, c) in list.iter().enumerate() {
                projections.insert((list.clone(), i), op_name(std::slice::from_ref(&m), c));
            }
            if n <= max_arity {
                tuples.insert(list.clone(), op_name(&list, &m));
            }
            products.insert(list, m);
        }
    }
    CartesianData::new(operad, products, projections, tuples)
}

/// A map of dendroidal sets as a table of cell assignments per canonical
/// shape. Used for the arrow actions of a diagram and for projections out
/// of the integrated set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DsetMap {
    pub table: BTreeMap<Tree, BTreeMap<Dendrex, Dendrex>>,
}

impl DsetMap {
    pub fn identity(x: &DendroidalSet) -> Result<DsetMap, GrothError> {
        let b = x.bounds();
        let mut table = BTreeMap::new();
        for t in enumerate_trees(b.degree, b.valence) {
            let row = x.dendrices(&t)?.iter().map(|d| (d.clone(), d.clone())).collect();
            table.insert(t, row);
        }
        Ok(DsetMap { table })
    }

    /// The map of nerves induced by an operad map.
    pub fn nerve_map(
        m: &OperadMap,
        p: &ColoredOperad,
        q: &ColoredOperad,
        bounds: Bounds,
    ) -> Result<DsetMap, GrothError> {
        let issues = check_operad_map(p, q, m);
        if !issues.is_empty() {
            return Err(GrothError::BadDiagram(format!(
                "not an operad map: {}",
                issues.join("; ")
            )));
        }
        let mut table = BTreeMap::new();
        for t in enumerate_trees(bounds.degree, bounds.valence) {
            let mut row = BTreeMap::new();
            for l in labelings(&t, p) {
                let colours = l
                    .colours
                    .iter()
                    .map(|(e, c)| (e.clone(), m.colour_map[c].clone()))
                    .collect();
                let ops =
                    l.ops.iter().map(|(e, o)| (e.clone(), m.op_map[o].clone())).collect();
                row.insert(Dendrex::Label(l), Dendrex::Label(Labeling { colours, ops }));
            }
            table.insert(t, row);
        }
        Ok(DsetMap { table })
    }

    pub fn apply(&self, shape: &Tree, d: &Dendrex) -> Result<&Dendrex, GrothError> {
        self.table.get(shape).and_then(|m| m.get(d)).ok_or_else(|| {
            GrothError::BadDiagram(format!(
                "the map is undefined on a cell over a shape of degree {}",
                shape.degree()
            ))
        })
    }

    /// Diagrammatic composition: apply `self`, then `other`.
    pub fn then(&self, other: &DsetMap) -> Result<DsetMap, GrothError> {
        let mut table = BTreeMap::new();
        for (t, m) in &self.table {
            let mut row = BTreeMap::new();
            for (d, v) in m {
                row.insert(d.clone(), other.apply(t, v)?.clone());
            }
            table.insert(t.clone(), row);
        }
        Ok(DsetMap { table })
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .table
            .iter()
            .map(|(t, m)| {
                let cells: Vec<Value> = m.iter().map(|(d, v)| json!([d, v])).collect();
                json!([t, cells])
            })
            .collect();
        json!({ "entries": entries })
    }
}

/// Check that `f` is a well-defined natural map `x -> y`: total on the
/// cells of `x`, landing in the cells of `y`, and commuting with every
/// arrow action between canonical shapes within the bounds of `x`.
pub fn validate_map(f: &DsetMap, x: &DendroidalSet, y: &DendroidalSet) -> Vec<String> {
    let mut errs = Vec::new();
    let b = x.bounds();
    let shapes = enumerate_trees(b.degree, b.valence);
    for t in &shapes {
        let (xs, ys) = match (x.dendrices(t), y.dendrices(t)) {
            (Ok(xs), Ok(ys)) => (xs, ys),
            (a, b) => {
                if let Err(e) = a {
                    errs.push(format!("domain cells at degree {}: {e}", t.degree()));
                }
                if let Err(e) = b {
                    errs.push(format!("codomain cells at degree {}: {e}", t.degree()));
                }
                continue;
            }
        };
        for d in xs.iter() {
            match f.table.get(t).and_then(|m| m.get(d)) {
                None => errs.push(format!("undefined on {d:?}")),
                Some(v) => {
                    if !ys.contains(v) {
                        errs.push(format!("{v:?} is not a cell of the codomain"));
                    }
                }
            }
        }
    }
    for s in &shapes {
        for t in &shapes {
            for a in arrows_between(s, t).iter() {
                let Ok(xs) = x.dendrices(t) else { continue };
                for d in xs.iter() {
                    let lhs = x.act(a, d).map(|xd| f.apply(s, &xd).cloned());
                    let rhs = f.apply(t, d).and_then(|fd| Ok(y.act(a, fd)?));
                    match (lhs, rhs) {
                        (Ok(Ok(l)), Ok(r)) => {
                            if l != r {
                                errs.push(format!("naturality fails at {a:?} on {d:?}"));
                            }
                        }
                        _ => errs.push(format!("naturality undefined at {a:?} on {d:?}")),
                    }
                }
            }
        }
    }
    errs
}

/// A contravariant diagram of dendroidal sets on the index category:
/// a component per colour and a map per unary operation, with
/// `arrows[u]: X(b) -> X(a)` for `u: a -> b`.
#[derive(Clone, Debug)]
pub struct DendroidalDiagram {
    pub objects: BTreeMap<Colour, DendroidalSet>,
    pub arrows: BTreeMap<OpName, DsetMap>,
}

impl DendroidalDiagram {
    /// The constant diagram at one dendroidal set, all arrows acting as
    /// the identity.
    pub fn constant(cart: &CartesianData, x: &DendroidalSet) -> Result<DendroidalDiagram, GrothError> {
        let idm = DsetMap::identity(x)?;
        let objects = cart.operad().colours().iter().map(|c| (c.clone(), x.clone())).collect();
        let arrows = cart
            .operad()
            .ops()
            .iter()
            .filter(|o| o.arity() == 1)
            .map(|o| (o.name.clone(), idm.clone()))
            .collect();
        Ok(DendroidalDiagram { objects, arrows })
    }

    pub fn object(&self, c: &str) -> Result<&DendroidalSet, GrothError> {
        self.objects
            .get(c)
            .ok_or_else(|| GrothError::BadDiagram(format!("no component at colour {c:?}")))
    }

    pub fn arrow(&self, op: &str) -> Result<&DsetMap, GrothError> {
        self.arrows
            .get(op)
            .ok_or_else(|| GrothError::BadDiagram(format!("no arrow action for {op:?}")))
    }

    /// Functoriality on the finite arrow set: totality, naturality of
    /// every action, units acting as identities, and contravariant
    /// compatibility with unary composition.
    pub fn validate(&self, cart: &CartesianData) -> Vec<String> {
        let mut errs = Vec::new();
        for c in cart.operad().colours() {
            if !self.objects.contains_key(c) {
                errs.push(format!("no component at colour {c:?}"));
            }
        }
        let unary: Vec<_> =
            cart.operad().ops().iter().filter(|o| o.arity() == 1).collect();
        for op in &unary {
            match self.arrows.get(&op.name) {
                None => errs.push(format!("no arrow action for {:?}", op.name)),
                Some(f) => {
                    if let (Some(x), Some(y)) =
                        (self.objects.get(&op.output), self.objects.get(&op.inputs[0]))
                    {
                        for e in validate_map(f, x, y) {
                            errs.push(format!("{}: {e}", op.name));
                        }
                    }
                }
            }
        }
        for c in cart.operad().colours() {
            let (Some(u), Some(x)) = (cart.operad().unit(c), self.objects.get(c)) else {
                continue;
            };
            let Some(f) = self.arrows.get(u) else { continue };
            match DsetMap::identity(x) {
                Ok(idm) => {
                    if *f != idm {
                        errs.push(format!("the unit {u:?} does not act as the identity"));
                    }
                }
                Err(e) => errs.push(e.to_string()),
            }
        }
        for p in &unary {
            for q in &unary {
                if q.output != p.inputs[0] {
                    continue;
                }
                let Some(r) = cart.operad().compose(&p.name, 0, &q.name) else {
                    errs.push(format!(
                        "missing unary composite ({:?}, 0, {:?})",
                        p.name, q.name
                    ));
                    continue;
                };
                let (Some(fp), Some(fq), Some(fr)) = (
                    self.arrows.get(&p.name),
                    self.arrows.get(&q.name),
                    self.arrows.get(r),
                ) else {
                    continue;
                };
                match fp.then(fq) {
                    Ok(c) => {
                        if c != *fr {
                            errs.push(format!(
                                "functoriality fails on ({:?}, 0, {:?})",
                                p.name, q.name
                            ));
                        }
                    }
                    Err(e) => errs.push(e.to_string()),
                }
            }
        }
        errs
    }
}

/// An integrated dendrex over `T`: a nerve labeling together with a
/// compatible family of component cells indexed by every arrow into `T`
/// from a canonical shape within bounds.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct IntPair {
    pub t: Labeling,
    pub x: BTreeMap<OmegaArrow, Dendrex>,
}

/// The result of [`integrate`]: the integrated dendroidal set together
/// with the pair tables behind its cells.
pub struct Integrated {
    set: DendroidalSet,
    nerve: DendroidalSet,
    pairs: BTreeMap<Tree, Vec<IntPair>>,
    offsets: BTreeMap<Tree, u64>,
    cart: CartesianData,
    diagram: DendroidalDiagram,
    bounds: Bounds,
}

impl Integrated {
    pub fn set(&self) -> &DendroidalSet {
        &self.set
    }

    pub fn nerve(&self) -> &DendroidalSet {
        &self.nerve
    }

    pub fn cart(&self) -> &CartesianData {
        &self.cart
    }

    pub fn diagram(&self) -> &DendroidalDiagram {
        &self.diagram
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn pairs(&self, shape: &Tree) -> Result<&[IntPair], GrothError> {
        self.pairs
            .get(shape)
            .map(|v| v.as_slice())
            .ok_or_else(|| GrothError::BadDiagram("not a canonical shape within bounds".into()))
    }

    /// Resolve a table cell back to its pair.
    pub fn pair_of(&self, shape: &Tree, d: &Dendrex) -> Result<&IntPair, GrothError> {
        let off = self
            .offsets
            .get(shape)
            .ok_or_else(|| GrothError::BadDiagram("not a canonical shape within bounds".into()))?;
        let Dendrex::Ix(g) = d else {
            return Err(GrothError::BadDiagram(format!("{d:?} is not an integrated cell")));
        };
        g.checked_sub(*off)
            .and_then(|k| self.pairs[shape].get(k as usize))
            .ok_or_else(|| {
                GrothError::BadDiagram(format!("cell {g} does not live over the given shape"))
            })
    }

    /// The projection to the nerve of the index category, sending a pair
    /// to its labeling.
    pub fn projection(&self) -> DsetMap {
        let mut table = BTreeMap::new();
        for (t, v) in &self.pairs {
            let off = self.offsets[t];
            let row = v
                .iter()
                .enumerate()
                .map(|(k, p)| (Dendrex::Ix(off + k as u64), Dendrex::Label(p.t.clone())))
                .collect();
            table.insert(t.clone(), row);
        }
        DsetMap { table }
    }

    pub fn to_json(&self) -> Result<Value, GrothError> {
        let mut shapes = Vec::new();
        for (t, v) in &self.pairs {
            let cells: Vec<Value> = v
                .iter()
                .map(|p| {
                    let x: Vec<Value> = p.x.iter().map(|(r, d)| json!([r, d])).collect();
                    json!({ "t": p.t, "x": x })
                })
                .collect();
            shapes.push(json!({ "shape": t, "offset": self.offsets[t], "cells": cells }));
        }
        Ok(json!({
            "name": self.set.name(),
            "bounds": self.bounds,
            "index": self.cart.operad().name(),
            "shapes": shapes,
        }))
    }
}

/// The arrows into a shape from every canonical shape within bounds, the
/// identity first, with the compatibility constraints between them
/// bucketed under the later of the two slots they mention.
struct ArrowIndex {
    arrows: Vec<OmegaArrow>,
    index: BTreeMap<OmegaArrow, usize>,
    // (i, j, alpha) with arrows[j] = arrows[i] . alpha; checked once both
    // slots are assigned.
    buckets: Vec<Vec<(usize, usize, OmegaArrow)>>,
}

fn arrow_index(shapes: &[Tree], t: &Tree) -> ArrowIndex {
    let mut arrows: Vec<OmegaArrow> = Vec::new();
    for r in shapes {
        arrows.extend(arrows_between(r, t).iter().cloned());
    }
    // The identity leads so that every later slot is immediately cut down
    // to a fibre of its in-map.
    arrows.sort_by(|a, b| {
        (!a.is_identity(), a.source().degree())
            .cmp(&(!b.is_identity(), b.source().degree()))
            .then_with(|| a.cmp(b))
    });
    let index: BTreeMap<OmegaArrow, usize> =
        arrows.iter().cloned().enumerate().map(|(i, r)| (r, i)).collect();
    let mut buckets = vec![Vec::new(); arrows.len()];
    for (i, r) in arrows.iter().enumerate() {
        for rp in shapes {
            for alpha in arrows_between(rp, r.source()).iter() {
                if alpha.is_identity() {
                    continue;
                }
                let q = alpha.then(r).expect("arrows into the source compose");
                let j = index[&q];
                buckets[i.max(j)].push((i, j, alpha.clone()));
            }
        }
    }
    ArrowIndex { arrows, index, buckets }
}

/// Memoization across the integration: labeling restrictions, in-maps and
/// component actions recur heavily between labelings and table cells.
#[derive(Default)]
struct InMemo {
    restrict: BTreeMap<(OmegaArrow, Labeling), Labeling>,
    in_maps: BTreeMap<(OmegaArrow, Labeling), OpName>,
    acts: BTreeMap<(String, OmegaArrow, Dendrex), Dendrex>,
}

impl InMemo {
    fn restrict(
        &mut self,
        nerve: &DendroidalSet,
        r: &OmegaArrow,
        lab: &Labeling,
    ) -> Result<Labeling, GrothError> {
        let key = (r.clone(), lab.clone());
        if let Some(hit) = self.restrict.get(&key) {
            return Ok(hit.clone());
        }
        let Dendrex::Label(l) = nerve.act(r, &Dendrex::Label(lab.clone()))? else {
            unreachable!("nerve actions return labelings")
        };
        self.restrict.insert(key, l.clone());
        Ok(l)
    }

    fn in_map(
        &mut self,
        cart: &CartesianData,
        alpha: &OmegaArrow,
        lab: &Labeling,
    ) -> Result<OpName, GrothError> {
        let key = (alpha.clone(), lab.clone());
        if let Some(hit) = self.in_maps.get(&key) {
            return Ok(hit.clone());
        }
        let w = cart.in_map(alpha, lab)?;
        self.in_maps.insert(key, w.clone());
        Ok(w)
    }

    fn act(
        &mut self,
        x: &DendroidalSet,
        alpha: &OmegaArrow,
        d: &Dendrex,
    ) -> Result<Dendrex, GrothError> {
        let key = (x.name().to_string(), alpha.clone(), d.clone());
        if let Some(hit) = self.acts.get(&key) {
            return Ok(hit.clone());
        }
        let v = x.act(alpha, d)?;
        self.acts.insert(key, v.clone());
        Ok(v)
    }
}

struct PairSearch<'a> {
    diagram: &'a DendroidalDiagram,
    comps: Vec<&'a DendroidalSet>,
    cands: Vec<Arc<Vec<Dendrex>>>,
    // per slot: (i, j, alpha, in(alpha)) ready to check once the slot is
    // assigned
    ops: Vec<Vec<(usize, usize, OmegaArrow, OpName)>>,
}

impl PairSearch<'_> {
    fn dfs(
        &self,
        k: usize,
        chosen: &mut Vec<Dendrex>,
        memo: &mut InMemo,
        hits: &mut Vec<Vec<Dendrex>>,
    ) -> Result<(), GrothError> {
        if k == self.cands.len() {
            hits.push(chosen.clone());
            return Ok(());
        }
        let options = self.cands[k].clone();
        for d in options.iter() {
            chosen.push(d.clone());
            if self.satisfied(k, chosen, memo)? {
                self.dfs(k + 1, chosen, memo, hits)?;
            }
            chosen.pop();
        }
        Ok(())
    }

    fn satisfied(
        &self,
        k: usize,
        chosen: &[Dendrex],
        memo: &mut InMemo,
    ) -> Result<bool, GrothError> {
        for (i, j, alpha, w) in &self.ops[k] {
            let lhs = memo.act(self.comps[*i], alpha, &chosen[*i])?;
            let rhs = self.diagram.arrow(w)?.apply(alpha.source(), &chosen[*j])?;
            if lhs != *rhs {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// The Grothendieck construction: the dendroidal set whose dendrices over
/// `T` are the pairs `(t, x)` of a nerve dendrex of the index category and
/// a compatible family of component cells, with actions by precomposition.
pub fn integrate(
    diagram: &DendroidalDiagram,
    cart: &CartesianData,
    bounds: Bounds,
) -> Result<Integrated, GrothError> {
    if cart.operad().max_arity() < bounds.valence {
        return Err(GrothError::Bounds(format!(
            "the index operad caps arity at {} but the valence bound is {}",
            cart.operad().max_arity(),
            bounds.valence
        )));
    }
    for c in cart.operad().colours() {
        let b = diagram.object(c)?.bounds();
        if b.degree < bounds.degree || b.valence < bounds.valence {
            return Err(GrothError::Bounds(format!(
                "the component at {c:?} has bounds {b:?}, below the requested {bounds:?}"
            )));
        }
    }
    for op in cart.operad().ops() {
        if op.arity() == 1 {
            diagram.arrow(&op.name)?;
        }
    }
    let nerve = DendroidalSet::nerve(cart.operad(), bounds);
    let shapes = enumerate_trees(bounds.degree, bounds.valence);
    let mut arrow_data: BTreeMap<Tree, ArrowIndex> = BTreeMap::new();
    for t in &shapes {
        arrow_data.insert(t.clone(), arrow_index(&shapes, t));
    }
    let mut memo = InMemo::default();
    let mut pairs: BTreeMap<Tree, Vec<IntPair>> = BTreeMap::new();
    for t in &shapes {
        let ai = &arrow_data[t];
        let mut found = Vec::new();
        for t_dx in nerve.dendrices(t)?.iter() {
            let Dendrex::Label(lab) = t_dx else {
                unreachable!("nerve cells are labelings")
            };
            let mut restricted = Vec::with_capacity(ai.arrows.len());
            for r in &ai.arrows {
                restricted.push(memo.restrict(&nerve, r, lab)?);
            }
            let mut comps = Vec::with_capacity(ai.arrows.len());
            let mut cands = Vec::with_capacity(ai.arrows.len());
            for (i, r) in ai.arrows.iter().enumerate() {
                let c = cart.in_object(r.source(), &restricted[i])?;
                let x = diagram.object(&c)?;
                cands.push(x.dendrices(r.source())?);
                comps.push(x);
            }
            let mut ops = Vec::with_capacity(ai.buckets.len());
            for bucket in &ai.buckets {
                let mut row = Vec::with_capacity(bucket.len());
                for (i, j, alpha) in bucket {
                    let w = memo.in_map(cart, alpha, &restricted[*i])?;
                    row.push((*i, *j, alpha.clone(), w));
                }
                ops.push(row);
            }
            let search = PairSearch { diagram, comps, cands, ops };
            let mut hits = Vec::new();
            search.dfs(0, &mut Vec::new(), &mut memo, &mut hits)?;
            for h in hits {
                found.push(IntPair {
                    t: lab.clone(),
                    x: ai.arrows.iter().cloned().zip(h).collect(),
                });
            }
        }
        found.sort();
        pairs.insert(t.clone(), found);
    }
    let mut offsets = BTreeMap::new();
    let mut next: u64 = 0;
    for (t, v) in &pairs {
        offsets.insert(t.clone(), next);
        next += v.len() as u64;
    }
    let mut data = TableData::default();
    for (t, v) in &pairs {
        let off = offsets[t];
        data.elems
            .insert(t.clone(), (0..v.len() as u64).map(|k| Dendrex::Ix(off + k)).collect());
    }
    for target in &shapes {
        let tv = &pairs[target];
        let toff = offsets[target];
        for source in &shapes {
            let sv = &pairs[source];
            let soff = offsets[source];
            // Key order of the source arrows matches the iteration order
            // of every pair's family map, so restricted families compare
            // against sorted pairs value by value.
            let ordered: Vec<&OmegaArrow> = arrow_data[source].index.keys().collect();
            for f in arrows_between(source, target).iter() {
                let composed: Vec<OmegaArrow> = ordered
                    .iter()
                    .map(|r| r.then(f).expect("arrows into the source compose"))
                    .collect();
                let mut row = BTreeMap::new();
                for (k, p) in tv.iter().enumerate() {
                    let rt = memo.restrict(&nerve, f, &p.t)?;
                    let vals: Vec<&Dendrex> = composed
                        .iter()
                        .map(|q| p.x.get(q).expect("families are total on arrows"))
                        .collect();
                    let pos = sv
                        .binary_search_by(|probe| match probe.t.cmp(&rt) {
                            Ordering::Equal => {
                                for (pv, want) in probe.x.values().zip(&vals) {
                                    match pv.cmp(want) {
                                        Ordering::Equal => continue,
                                        o => return o,
                                    }
                                }
                                Ordering::Equal
                            }
                            o => o,
                        })
                        .expect("the restriction of an integrated pair is integrated");
                    row.insert(Dendrex::Ix(toff + k as u64), Dendrex::Ix(soff + pos as u64));
                }
                data.actions.insert(f.clone(), row);
            }
        }
    }
    let set = DendroidalSet::from_table(format!("int({})", cart.operad().name()), bounds, data);
    Ok(Integrated {
        set,
        nerve,
        pairs,
        offsets,
        cart: cart.clone(),
        diagram: diagram.clone(),
        bounds,
    })
}

/// Fill an inner horn in the integrated set, component-wise: check every
/// component is inner Kan, fill the projected horn in the nerve, pull the
/// family back along the in-maps of the horn faces, fill in the component
/// over the in-object of the filler, and return the integrated cell that
/// realizes the construction. The family is aligned with
/// `inner_horn(t, e).maximal_faces()`.
pub fn integrate_fill_horn(
    g: &Integrated,
    t: &Tree,
    e: &str,
    family: &[Dendrex],
) -> Result<Dendrex, GrothError> {
    for (c, x) in &g.diagram.objects {
        let report = check_inner_kan(x, g.bounds.degree, false)?;
        if !report.is_inner_kan() {
            return Err(GrothError::ComponentNotKan(c.clone()));
        }
    }
    let (ct, ren) = t.canonical_form();
    let ce = ren
        .get(e)
        .ok_or_else(|| GrothError::BadHorn(format!("{e:?} is not an edge of the tree")))?
        .clone();
    let h = inner_horn(&ct, &ce)?;
    let faces = h.maximal_faces();
    if family.len() != faces.len() {
        return Err(GrothError::BadHorn(format!(
            "family has {} cells, the horn has {} faces",
            family.len(),
            faces.len()
        )));
    }
    // Face data in canonical coordinates: the pair behind each family
    // cell, its canonical shape, and the face arrow renamed to it.
    let mut nerve_family = Vec::with_capacity(faces.len());
    let mut face_data = Vec::with_capacity(faces.len());
    for (kappa, cell) in faces.iter().zip(family) {
        let (cf, fren) = kappa.source().canonical_form();
        let map: BTreeMap<Edge, Edge> = kappa
            .source()
            .edges()
            .into_iter()
            .map(|x| (fren[&x].clone(), kappa.apply(&x).clone()))
            .collect();
        let ck = OmegaArrow::new(cf.clone(), ct.clone(), map).expect("renamed face is an arrow");
        let p = g.pair_of(&cf, cell)?;
        nerve_family.push(Dendrex::Label(p.t.clone()));
        face_data.push((p, cf, ck));
    }
    let t_fill = fill_horn(&g.nerve, &ct, &ce, &nerve_family)?;
    let Dendrex::Label(tl) = &t_fill else {
        unreachable!("nerve fillers are labelings")
    };
    let in_t = g.cart.in_object(&ct, tl)?;
    let xt = g.diagram.object(&in_t)?;
    let mut z_family = Vec::with_capacity(faces.len());
    for (p, cf, ck) in &face_data {
        let w = g.cart.in_map(ck, tl)?;
        let idf = OmegaArrow::identity(cf);
        let y = p.x.get(&idf).expect("pairs carry their identity component");
        z_family.push(g.diagram.arrow(&w)?.apply(cf, y)?.clone());
    }
    let u = fill_horn(xt, &ct, &ce, &z_family)?;
    let id = OmegaArrow::identity(&ct);
    let off = g.offsets[&ct];
    'cand: for (k, p) in g.pairs[&ct].iter().enumerate() {
        if p.t != *tl || p.x.get(&id) != Some(&u) {
            continue;
        }
        let d = Dendrex::Ix(off + k as u64);
        for (kappa, cell) in faces.iter().zip(family) {
            if g.set.act(kappa, &d)? != *cell {
                continue 'cand;
            }
        }
        return Ok(d);
    }
    Err(GrothError::NoFiller(
        "no integrated dendrex realizes the constructed filler data".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operad::Operation;
    use crate::tree::Tree;

    fn c() -> Colour {
        "c".to_string()
    }

    fn com() -> ColoredOperad {
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
        ColoredOperad::new("Com", vec![c()], ops, units, composition, Some(sym), 3).unwrap()
    }

    /// Commutative operations graded by a parity that adds under
    /// composition; every permutation fixes every operation.
    fn comz2() -> ColoredOperad {
        let d = || "d".to_string();
        let name = |n: usize, g: usize| format!("c{n}p{g}");
        let mut ops = Vec::new();
        for n in 1..=3usize {
            for g in 0..2usize {
                ops.push(Operation { name: name(n, g), inputs: vec![d(); n], output: d() });
            }
        }
        let units = BTreeMap::from([(d(), name(1, 0))]);
        let mut composition = BTreeMap::new();
        let mut sym = BTreeMap::new();
        for a in 1..=3usize {
            for g in 0..2usize {
                for perm in crate::operad::all_perms(a) {
                    sym.insert((name(a, g), perm), name(a, g));
                }
                for i in 0..a {
                    for b in 1..=3usize {
                        if a + b - 1 > 3 {
                            continue;
                        }
                        for h in 0..2usize {
                            composition
                                .insert((name(a, g), i, name(b, h)), name(a + b - 1, (g + h) % 2));
                        }
                    }
                }
            }
        }
        ColoredOperad::new("ComZ2", vec![d()], ops, units, composition, Some(sym), 3).unwrap()
    }

    fn phi() -> OperadMap {
        OperadMap {
            colour_map: BTreeMap::from([(c(), "d".to_string())]),
            op_map: BTreeMap::from([
                ("u".to_string(), "c1p0".to_string()),
                ("m".to_string(), "c2p0".to_string()),
                ("w".to_string(), "c3p0".to_string()),
            ]),
        }
    }

    fn s2_leq(a: &str, b: &str) -> bool {
        a == b || (a == "A" && b == "1")
    }

    fn s2(max_list: usize) -> CartesianData {
        posetal_cartesian("S2", &["1", "A"], s2_leq, max_list, 3).unwrap()
    }

    fn point(max_list: usize) -> CartesianData {
        posetal_cartesian("Pt", &["*"], |_, _| true, max_list, 3).unwrap()
    }

    fn max_leaves(bounds: Bounds) -> usize {
        1 + bounds.degree * (bounds.valence - 1)
    }

    /// The two-object fixture: X(1) the nerve of Com, X(A) the nerve of
    /// ComZ2, and the unique map A -> 1 acting by the parity-zero
    /// inclusion.
    fn fixture(bounds: Bounds) -> (CartesianData, DendroidalDiagram) {
        let cart = s2(max_leaves(bounds));
        let x1 = DendroidalSet::nerve(&com(), bounds);
        let xa = DendroidalSet::nerve(&comz2(), bounds);
        let incl = DsetMap::nerve_map(&phi(), &com(), &comz2(), bounds).unwrap();
        let objects = BTreeMap::from([("1".to_string(), x1.clone()), ("A".to_string(), xa.clone())]);
        let arrows = BTreeMap::from([
            ("[1]>1".to_string(), DsetMap::identity(&x1).unwrap()),
            ("[A]>A".to_string(), DsetMap::identity(&xa).unwrap()),
            ("[A]>1".to_string(), incl),
        ]);
        (cart, DendroidalDiagram { objects, arrows })
    }

    fn small() -> Bounds {
        Bounds { degree: 2, valence: 3 }
    }

    fn canonical_linear2() -> Tree {
        enumerate_trees(2, 3)
            .into_iter()
            .find(|t| t.degree() == 2 && t.vertices().iter().all(|v| v.inputs.len() == 1))
            .unwrap()
    }

    #[test]
    fn posetal_cartesian_validates() {
        let cart = s2(5);
        assert_eq!(cart.validate(), Vec::<String>::new());
        let a = "A".to_string();
        let one = "1".to_string();
        assert_eq!(cart.product(&[a.clone(), one.clone()]).unwrap(), &a);
        assert_eq!(cart.product(&[one.clone(), one.clone()]).unwrap(), &one);
        assert_eq!(cart.product(&[]).unwrap(), &one);
        // The avatar of a binary operation is the unique unary map out of
        // the meet; for the posetal case that is the unit of the meet.
        assert_eq!(cart.avatar("[A,1]>A").unwrap(), "[A]>A");
        assert_eq!(cart.avatar("[1,1]>1").unwrap(), "[1]>1");
        // Pairing recovers the unary map with the given projections.
        let g = cart.pair(&a, &["[A]>A".into(), "[A]>1".into()], &[a.clone(), one.clone()]);
        assert_eq!(g.unwrap(), "[A]>A");
        assert!(matches!(
            cart.product(&[a.clone(); 6]),
            Err(GrothError::MissingProduct(_))
        ));
    }

    #[test]
    fn point_cartesian_validates() {
        let cart = point(5);
        assert_eq!(cart.validate(), Vec::<String>::new());
        assert_eq!(cart.operad().ops().len(), 4);
    }

    #[test]
    fn in_map_of_inner_face_is_the_unit() {
        let cart = s2(5);
        let nerve = DendroidalSet::nerve(cart.operad(), small());
        let l2 = canonical_linear2();
        let e = l2.inner_edges()[0].clone();
        let face = crate::omega::inner_face(&l2, &e).unwrap();
        for d in nerve.dendrices(&l2).unwrap().iter() {
            let Dendrex::Label(lab) = d else { unreachable!() };
            let w = cart.in_map(&face, lab).unwrap();
            assert!(cart.operad().is_unit(&w), "in({face:?}) = {w:?} is not a unit");
        }
    }

    #[test]
    fn edge_maps_compose_down_the_tree() {
        let cart = s2(5);
        let nerve = DendroidalSet::nerve(cart.operad(), small());
        let l2 = canonical_linear2();
        for d in nerve.dendrices(&l2).unwrap().iter() {
            let Dendrex::Label(lab) = d else { unreachable!() };
            // The leaf component is a projection out of the leaf colour
            // itself, hence a unit; the root component's signature runs
            // from the in-object to the root colour.
            let leaf = &l2.leaves()[0];
            assert!(cart.operad().is_unit(&cart.edge_map(&l2, lab, leaf).unwrap()));
            let m = cart.edge_map(&l2, lab, l2.root()).unwrap();
            let op = cart.operad().op(&m).unwrap();
            assert_eq!(op.inputs, vec![lab.colours[leaf].clone()]);
            assert_eq!(op.output, lab.colours[l2.root()]);
        }
    }

    #[test]
    fn terminal_index_reproduces_the_component() {
        let bounds = small();
        let cart = point(max_leaves(bounds));
        let x = DendroidalSet::nerve(&comz2(), bounds);
        let diagram = DendroidalDiagram::constant(&cart, &x).unwrap();
        assert_eq!(diagram.validate(&cart), Vec::<String>::new());
        let g = integrate(&diagram, &cart, bounds).unwrap();
        for t in enumerate_trees(bounds.degree, bounds.valence) {
            assert_eq!(
                g.pairs(&t).unwrap().len(),
                x.dendrices(&t).unwrap().len(),
                "pair count differs from the component at {t:?}"
            );
        }
        assert_eq!(g.pairs(&Tree::eta("e").canonical_form().0).unwrap().len(), 1);
        assert_eq!(g.pairs(&canonical_linear2()).unwrap().len(), 4);
        assert_eq!(g.set().audit_functoriality(bounds.degree).unwrap(), Vec::<String>::new());
    }

    #[test]
    fn constant_diagram_counts_factor() {
        let bounds = small();
        let cart = s2(max_leaves(bounds));
        let x = DendroidalSet::nerve(&comz2(), bounds);
        let diagram = DendroidalDiagram::constant(&cart, &x).unwrap();
        let g = integrate(&diagram, &cart, bounds).unwrap();
        let nerve = DendroidalSet::nerve(cart.operad(), bounds);
        for t in enumerate_trees(bounds.degree, bounds.valence) {
            let expected = nerve.dendrices(&t).unwrap().len() * x.dendrices(&t).unwrap().len();
            assert_eq!(
                g.pairs(&t).unwrap().len(),
                expected,
                "count at {t:?} is not nerve * component"
            );
        }
    }

    /// Straight-line enumeration of Def-style pairs: assign the family in
    /// plain sorted arrow order, discovering decompositions by scanning,
    /// with no precomputed constraint buckets.
    fn naive_count(
        diagram: &DendroidalDiagram,
        cart: &CartesianData,
        nerve: &DendroidalSet,
        shapes: &[Tree],
        t: &Tree,
    ) -> usize {
        let mut arrows = BTreeSet::new();
        for r in shapes {
            arrows.extend(arrows_between(r, t).iter().cloned());
        }
        let arrows: Vec<OmegaArrow> = arrows.into_iter().collect();
        struct Naive<'a> {
            diagram: &'a DendroidalDiagram,
            cart: &'a CartesianData,
            shapes: &'a [Tree],
            arrows: &'a [OmegaArrow],
            restricted: Vec<Labeling>,
        }
        impl Naive<'_> {
            fn ok_prefix(&self, chosen: &[Dendrex]) -> bool {
                let k = chosen.len() - 1;
                for i in 0..chosen.len() {
                    for (a, b) in [(i, k), (k, i)] {
                        for rp in self.shapes {
                            for alpha in arrows_between(rp, self.arrows[a].source()).iter() {
                                if alpha.is_identity()
                                    || alpha.then(&self.arrows[a]).unwrap() != self.arrows[b]
                                {
                                    continue;
                                }
                                let ca =
                                    self.cart.in_object(self.arrows[a].source(), &self.restricted[a]);
                                let x = self.diagram.object(&ca.unwrap()).unwrap();
                                let lhs = x.act(alpha, &chosen[a]).unwrap();
                                let w = self.cart.in_map(alpha, &self.restricted[a]).unwrap();
                                let rhs = self
                                    .diagram
                                    .arrow(&w)
                                    .unwrap()
                                    .apply(alpha.source(), &chosen[b])
                                    .unwrap();
                                if lhs != *rhs {
                                    return false;
                                }
                            }
                        }
                    }
                }
                true
            }
            fn go(&self, chosen: &mut Vec<Dendrex>) -> usize {
                if chosen.len() == self.arrows.len() {
                    return 1;
                }
                let k = chosen.len();
                let c = self
                    .cart
                    .in_object(self.arrows[k].source(), &self.restricted[k])
                    .unwrap();
                let x = self.diagram.object(&c).unwrap();
                let mut n = 0;
                for d in x.dendrices(self.arrows[k].source()).unwrap().iter() {
                    chosen.push(d.clone());
                    if self.ok_prefix(chosen) {
                        n += self.go(chosen);
                    }
                    chosen.pop();
                }
                n
            }
        }
        let mut total = 0;
        for td in nerve.dendrices(t).unwrap().iter() {
            let Dendrex::Label(lab) = td else { unreachable!() };
            let restricted = arrows
                .iter()
                .map(|r| {
                    let Dendrex::Label(l) = nerve.act(r, &Dendrex::Label(lab.clone())).unwrap()
                    else {
                        unreachable!()
                    };
                    l
                })
                .collect();
            let naive = Naive { diagram, cart, shapes, arrows: &arrows, restricted };
            total += naive.go(&mut Vec::new());
        }
        total
    }

    #[test]
    fn two_object_counts_match_naive_enumeration() {
        let bounds = small();
        let (cart, diagram) = fixture(bounds);
        assert_eq!(diagram.validate(&cart), Vec::<String>::new());
        let g = integrate(&diagram, &cart, bounds).unwrap();
        let shapes = enumerate_trees(bounds.degree, bounds.valence);
        let probes: Vec<&Tree> = shapes
            .iter()
            .filter(|t| {
                t.degree() < 2
                    || (t.degree() == 2 && t.vertices().iter().all(|v| v.inputs.len() == 1))
            })
            .collect();
        assert!(probes.len() >= 4);
        for t in probes {
            assert_eq!(
                g.pairs(t).unwrap().len(),
                naive_count(&diagram, &cart, g.nerve(), &shapes, t),
                "integrate disagrees with the naive enumeration at {t:?}"
            );
        }
    }

    #[test]
    fn projection_is_a_natural_map() {
        let bounds = small();
        let (cart, diagram) = fixture(bounds);
        let g = integrate(&diagram, &cart, bounds).unwrap();
        assert_eq!(validate_map(&g.projection(), g.set(), g.nerve()), Vec::<String>::new());
    }

    #[test]
    fn integrated_set_is_functorial_and_strict_kan() {
        let bounds = small();
        let (cart, diagram) = fixture(bounds);
        let g = integrate(&diagram, &cart, bounds).unwrap();
        assert_eq!(g.set().audit_functoriality(bounds.degree).unwrap(), Vec::<String>::new());
        let report = check_inner_kan(g.set(), bounds.degree, true).unwrap();
        assert!(report.is_inner_kan(), "failures: {:?}", report.failures);
        assert!(report.is_strict(), "strictness: {:?}", report.strictness_failures);
    }

    #[test]
    fn fill_round_trips_on_the_terminal_index() {
        let bounds = small();
        let cart = point(max_leaves(bounds));
        let x = DendroidalSet::nerve(&comz2(), bounds);
        let diagram = DendroidalDiagram::constant(&cart, &x).unwrap();
        let g = integrate(&diagram, &cart, bounds).unwrap();
        let l2 = canonical_linear2();
        let e = l2.inner_edges()[0].clone();
        let h = inner_horn(&l2, &e).unwrap();
        for d in g.set().dendrices(&l2).unwrap().iter() {
            let family: Vec<Dendrex> = h
                .maximal_faces()
                .iter()
                .map(|f| g.set().act(f, d).unwrap())
                .collect();
            let filled = integrate_fill_horn(&g, &l2, &e, &family).unwrap();
            assert_eq!(filled, *d);
            // Over the point the construction reduces to filling in the
            // component: the filler's identity cell is the component fill
            // of the projected family.
            let p = g.pair_of(&l2, &filled).unwrap();
            let zs: Vec<Dendrex> = h
                .maximal_faces()
                .iter()
                .map(|f| {
                    let (cf, _) = f.source().canonical_form();
                    let q = g.pair_of(&cf, &g.set().act(f, d).unwrap()).unwrap();
                    q.x[&OmegaArrow::identity(&cf)].clone()
                })
                .collect();
            let u = fill_horn(&x, &l2, &e, &zs).unwrap();
            assert_eq!(p.x[&OmegaArrow::identity(&l2)], u);
        }
    }

    #[test]
    fn fill_round_trips_on_the_two_object_fixture() {
        let bounds = small();
        let (cart, diagram) = fixture(bounds);
        let g = integrate(&diagram, &cart, bounds).unwrap();
        for t in enumerate_trees(bounds.degree, bounds.valence) {
            if t.inner_edges().is_empty() {
                continue;
            }
            let e = t.inner_edges()[0].clone();
            let h = inner_horn(&t, &e).unwrap();
            for d in g.set().dendrices(&t).unwrap().iter() {
                let family: Vec<Dendrex> = h
                    .maximal_faces()
                    .iter()
                    .map(|f| g.set().act(f, d).unwrap())
                    .collect();
                let filled = integrate_fill_horn(&g, &t, &e, &family).unwrap();
                assert_eq!(filled, *d, "unique strict filler differs at {t:?}");
            }
        }
    }

    #[test]
    fn fill_rejects_bad_horn_data() {
        let bounds = small();
        let cart = point(max_leaves(bounds));
        let x = DendroidalSet::nerve(&comz2(), bounds);
        let diagram = DendroidalDiagram::constant(&cart, &x).unwrap();
        let g = integrate(&diagram, &cart, bounds).unwrap();
        let l2 = canonical_linear2();
        let e = l2.inner_edges()[0].clone();
        let err = integrate_fill_horn(&g, &l2, &e, &[]).unwrap_err();
        assert!(err.to_string().starts_with("bad-horn"), "{err}");
        // An outer edge does not name an inner horn.
        let root = l2.root().clone();
        assert!(integrate_fill_horn(&g, &l2, &root, &[]).is_err());
    }

    /// The representable on the linear two-tree with its identity cell
    /// removed: still a presheaf, no longer inner Kan.
    fn gutted(bounds: Bounds) -> DendroidalSet {
        let l2 = canonical_linear2();
        let data = TableData::build(
            bounds,
            |t| {
                arrows_between(t, &l2)
                    .iter()
                    .filter(|a| !a.is_identity())
                    .cloned()
                    .map(Dendrex::Arrow)
                    .collect()
            },
            |f, d| {
                let Dendrex::Arrow(g) = d else { unreachable!() };
                // No composite recreates the identity: a factorization
                // through a proper face or collapse loses it.
                Dendrex::Arrow(f.then(g).expect("composable by construction"))
            },
        );
        DendroidalSet::from_table("gutted", bounds, data)
    }

    #[test]
    fn fill_requires_kan_components() {
        let bounds = small();
        let cart = point(max_leaves(bounds));
        let x = gutted(bounds);
        let diagram = DendroidalDiagram::constant(&cart, &x).unwrap();
        assert_eq!(diagram.validate(&cart), Vec::<String>::new());
        let g = integrate(&diagram, &cart, bounds).unwrap();
        let l2 = canonical_linear2();
        let e = l2.inner_edges()[0].clone();
        let h = inner_horn(&l2, &e).unwrap();
        let family = vec![Dendrex::Ix(0); h.maximal_faces().len()];
        let err = integrate_fill_horn(&g, &l2, &e, &family).unwrap_err();
        assert!(matches!(err, GrothError::ComponentNotKan(_)), "{err}");
        assert!(err.to_string().starts_with("component-not-kan"), "{err}");
    }

    #[test]
    fn diagram_validation_flags_a_wrong_arrow() {
        let bounds = small();
        let (cart, mut diagram) = fixture(bounds);
        let x1 = diagram.objects["1"].clone();
        diagram
            .arrows
            .insert("[A]>1".to_string(), DsetMap::identity(&x1).unwrap());
        assert!(!diagram.validate(&cart).is_empty());
    }

    #[test]
    fn integrate_reports_missing_products() {
        let bounds = small();
        // Lists only up to length two: three-leaf shapes have no chosen
        // in-object.
        let cart = s2(2);
        let x = DendroidalSet::nerve(&comz2(), bounds);
        let diagram = DendroidalDiagram::constant(&cart, &x).unwrap();
        let err = integrate(&diagram, &cart, bounds).unwrap_err();
        assert!(matches!(err, GrothError::MissingProduct(_)), "{err}");
    }

    #[test]
    fn json_round_trip_shapes() {
        let bounds = Bounds { degree: 1, valence: 2 };
        let cart = posetal_cartesian("Pt", &["*"], |_, _| true, 3, 2).unwrap();
        let x = DendroidalSet::nerve(
            &ColoredOperad::new(
                "Tiny",
                vec!["z".to_string()],
                vec![
                    Operation { name: "i".into(), inputs: vec!["z".into()], output: "z".into() },
                    Operation {
                        name: "b".into(),
                        inputs: vec!["z".into(), "z".into()],
                        output: "z".into(),
                    },
                ],
                BTreeMap::from([("z".to_string(), "i".to_string())]),
                BTreeMap::new(),
                Some(BTreeMap::from([(("b".to_string(), vec![1, 0]), "b".to_string())])),
                2,
            )
            .unwrap(),
            bounds,
        );
        let diagram = DendroidalDiagram::constant(&cart, &x).unwrap();
        let g = integrate(&diagram, &cart, bounds).unwrap();
        let v = g.to_json().unwrap();
        assert_eq!(v["index"], "Pt");
        assert!(v["shapes"].as_array().unwrap().len() >= 3);
        assert!(cart.to_json().unwrap()["products"].as_array().unwrap().len() >= 4);
        assert!(g.projection().to_json()["entries"].as_array().is_some());
    }
}
