//! Inner horn filling and the homotopy operad.
//!
//! A bounded dendroidal set is inner Kan when every family over an inner
//! horn extends to a dendrex of the whole shape, and strictly so when the
//! extension is unique. [`check_inner_kan`] audits every inner horn within
//! a degree bound and returns a machine-readable [`KanReport`];
//! [`fill_horn`] extends a single family.
//!
//! Operations of an inner-Kan set are its corolla dendrices. Two parallel
//! operations are homotopic when a dendrex over a two-vertex shape
//! connects them rel boundary ([`homotopic`]); composites arise as inner
//! faces of horn fillers over grafted corollas ([`composition_witness`]).
//! Quotienting by homotopy yields a coloured operad, the homotopy operad
//! of the set ([`ho_operad`]), with units the degeneracy classes and the
//! symmetric action pulled back along corolla isomorphisms. For strict
//! sets the nerve of the homotopy operad recovers the set, and
//! [`coskeletal_extend`] rebuilds a strict set from its dendrices of
//! degree at most two.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::dset::{
    fillers, hom_generated, hom_into, inner_horn, DendroidalSet, Dendrex, DsetError, TableData,
};
use crate::omega::{self, OmegaArrow};
use crate::operad::{all_perms, ColoredOperad, Colour, OpName, OperadError, Operation, Perm};
use crate::tree::{enumerate_trees, Edge, Tree, Vertex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KanError {
    #[error("not-parallel")]
    NotParallel,
    #[error("not-composable")]
    NotComposable,
    #[error("not-inner-kan: {0}")]
    NotInnerKan(String),
    #[error("requires-strict")]
    RequiresStrict,
    #[error("homotopy-operad-invalid: {0}")]
    InvalidHo(String),
    #[error(transparent)]
    Dset(#[from] DsetError),
    #[error(transparent)]
    Operad(#[from] OperadError),
}

/// A horn family that does not fill, or fills more than once.
#[derive(Clone, Debug, Serialize)]
pub struct HornFailure {
    pub shape: Tree,
    pub edge: Edge,
    pub family: Vec<Dendrex>,
    pub fillers: usize,
}

/// The outcome of an inner-Kan audit.
#[derive(Clone, Debug, Serialize)]
pub struct KanReport {
    pub max_degree: usize,
    pub strict: bool,
    pub checked_horns: usize,
    pub checked_families: usize,
    pub failures: Vec<HornFailure>,
    pub strictness_failures: Vec<HornFailure>,
    /// Horns at shapes beyond the set's own degree bound, requested but
    /// not decidable.
    pub skipped: usize,
}

impl KanReport {
    pub fn is_inner_kan(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn is_strict(&self) -> bool {
        self.failures.is_empty() && self.strictness_failures.is_empty()
    }
}

/// Audit every inner horn at shapes up to `max_degree` (and within the
/// set's valence cap): enumerate all families over the horn and test that
/// each extends, uniquely so under `strict`. Horns at shapes above the
/// set's degree bound are counted as skipped, since their fillers are out
/// of reach.
pub fn check_inner_kan(
    x: &DendroidalSet,
    max_degree: usize,
    strict: bool,
) -> Result<KanReport, KanError> {
    let mut report = KanReport {
        max_degree,
        strict,
        checked_horns: 0,
        checked_families: 0,
        failures: Vec::new(),
        strictness_failures: Vec::new(),
        skipped: 0,
    };
    for t in enumerate_trees(max_degree, x.bounds().valence) {
        if t.degree() < 2 {
            continue;
        }
        let inner = t.inner_edges();
        if t.degree() > x.bounds().degree {
            report.skipped += inner.len();
            continue;
        }
        for e in inner {
            report.checked_horns += 1;
            let h = inner_horn(&t, &e)?;
            for family in hom_into(&h, x)? {
                report.checked_families += 1;
                let fills = fillers(&h, &family, x)?;
                if fills.is_empty() {
                    report.failures.push(HornFailure {
                        shape: t.clone(),
                        edge: e.clone(),
                        family,
                        fillers: 0,
                    });
                } else if strict && fills.len() > 1 {
                    report.strictness_failures.push(HornFailure {
                        shape: t.clone(),
                        edge: e.clone(),
                        family,
                        fillers: fills.len(),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Extend one family over the inner horn of `t` at `e` to a dendrex of
/// the full shape, returning the least filler. The family is indexed like
/// the horn's maximal faces.
pub fn fill_horn(
    x: &DendroidalSet,
    t: &Tree,
    e: &str,
    family: &[Dendrex],
) -> Result<Dendrex, KanError> {
    let h = inner_horn(t, e)?;
    if family.len() != h.maximal_faces().len() {
        return Err(KanError::NotInnerKan(format!(
            "family has {} cells, the horn has {} faces",
            family.len(),
            h.maximal_faces().len()
        )));
    }
    fillers(&h, family, x)?
        .into_iter()
        .min()
        .ok_or_else(|| KanError::NotInnerKan(format!("no filler over the shape rooted at {e:?}")))
}

/// A renaming arrow between explicitly named trees.
fn iso(source: &Tree, target: &Tree, pairs: &[(&str, &str)]) -> OmegaArrow {
    let map: BTreeMap<Edge, Edge> =
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    OmegaArrow::new(source.clone(), target.clone(), map).expect("renaming is an arrow")
}

/// The colour of a dendrex at an edge of its shape, normalized to a
/// dendrex over the canonical eta so colours at different edges compare.
fn colour_of(
    x: &DendroidalSet,
    shape: &Tree,
    d: &Dendrex,
    edge: &str,
) -> Result<Dendrex, DsetError> {
    let incl = omega::edge_inclusion(shape, edge).expect("edge of the shape");
    let at_edge = x.act(&incl, d)?;
    let std = iso(&Tree::eta("e0"), &Tree::eta(edge), &[("e0", edge)]);
    x.act(&std, &at_edge)
}

/// The two-vertex homotopy shape for `n`-ary operations at position `i`:
/// for `i >= 1` a unary vertex grafted on top of leaf `i` of the corolla,
/// for `i == 0` a unary vertex planted below its root.
fn homotopy_shape(n: usize, i: usize) -> Tree {
    let leaf = |k: usize| k.to_string();
    if i >= 1 {
        Tree::new(
            "0".into(),
            vec![
                Vertex { inputs: (1..=n).map(leaf).collect(), output: "0".into() },
                Vertex { inputs: vec![format!("{i}'")], output: leaf(i) },
            ],
        )
        .expect("homotopy shape")
    } else {
        Tree::new(
            "0'".into(),
            vec![
                Vertex { inputs: vec!["0".into()], output: "0'".into() },
                Vertex { inputs: (1..=n).map(leaf).collect(), output: "0".into() },
            ],
        )
        .expect("homotopy shape")
    }
}

/// Search for a homotopy from `f` to `g`, parallel dendrices over the
/// `n`-corolla, at position `i` (an input for `i >= 1`, the output for
/// `i == 0`): a dendrex over the two-vertex shape whose outer faces are
/// `f` and the degenerate identity at the `i`-th colour, and whose inner
/// face is `g`. Returns the least witness.
pub fn homotopic(
    x: &DendroidalSet,
    n: usize,
    f: &Dendrex,
    g: &Dendrex,
    i: usize,
) -> Result<Option<Dendrex>, KanError> {
    assert!(i <= n, "position within the corolla");
    let c = Tree::corolla(n);
    for e in c.edges() {
        if colour_of(x, &c, f, &e)? != colour_of(x, &c, g, &e)? {
            return Err(KanError::NotParallel);
        }
    }
    let h = homotopy_shape(n, i);
    // The three conditions, each an (arrow, required value) pair.
    let mut wanted: Vec<(OmegaArrow, Dendrex)> = Vec::new();
    if i >= 1 {
        let top = omega::outer_face(&h, &i.to_string()).expect("top cluster");
        wanted.push((top, f.clone()));
        let inner = omega::inner_face(&h, &i.to_string()).expect("inner edge");
        let mut pairs: Vec<(String, String)> =
            inner.source().edges().into_iter().map(|e| (e.clone(), e)).collect();
        for p in &mut pairs {
            if p.0 == format!("{i}'") {
                p.1 = i.to_string();
            }
        }
        let borrowed: Vec<(&str, &str)> =
            pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let to_corolla = iso(inner.source(), &c, &borrowed);
        wanted.push((inner, x.act(&to_corolla, g)?));
        let root = omega::outer_face(&h, "0").expect("root cluster");
        let d_i = x.act(&omega::edge_inclusion(&c, &i.to_string()).expect("leaf"), f)?;
        let sigma = omega::degeneracy(root.source(), &i.to_string()).expect("unary vertex");
        wanted.push((root, x.act(&sigma, &d_i)?));
    } else {
        let root = omega::outer_face(&h, "0'").expect("root cluster");
        wanted.push((root, f.clone()));
        let inner = omega::inner_face(&h, "0").expect("inner edge");
        let mut pairs: Vec<(String, String)> =
            inner.source().edges().into_iter().map(|e| (e.clone(), e)).collect();
        for p in &mut pairs {
            if p.0 == "0'" {
                p.1 = "0".to_string();
            }
        }
        let borrowed: Vec<(&str, &str)> =
            pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let to_corolla = iso(inner.source(), &c, &borrowed);
        wanted.push((inner, x.act(&to_corolla, g)?));
        let top = omega::outer_face(&h, "0").expect("top cluster");
        let d_out = x.act(&omega::edge_inclusion(&c, "0").expect("root edge"), f)?;
        let moved = x.act(&iso(&Tree::eta("0'"), &Tree::eta("0"), &[("0'", "0")]), &d_out)?;
        let sigma = omega::degeneracy(top.source(), "0'").expect("unary vertex");
        wanted.push((top, x.act(&sigma, &moved)?));
    }
    let mut best: Option<Dendrex> = None;
    'cand: for cand in x.dendrices(&h)?.iter() {
        for (arrow, value) in &wanted {
            if x.act(arrow, cand)? != *value {
                continue 'cand;
            }
        }
        if best.as_ref().is_none_or(|b| cand < b) {
            best = Some(cand.clone());
        }
    }
    Ok(best)
}

/// A composite exhibited by an inner horn filler.
#[derive(Clone, Debug, Serialize)]
pub struct Composition {
    /// The grafted two-vertex shape the witness lives over.
    pub shape: Tree,
    pub witness: Dendrex,
    /// The inner face of the witness, renamed onto the standard corolla
    /// of arity `n + m - 1`.
    pub composite: Dendrex,
}

/// Compose `f` (arity `n`) with `g` (arity `m`) in slot `slot` (zero
/// based) by filling the inner horn of the grafted shape whose outer
/// faces are `f` and `g`. The least filler is chosen when the set is not
/// strict.
pub fn composition_witness(
    x: &DendroidalSet,
    n: usize,
    f: &Dendrex,
    slot: usize,
    m: usize,
    g: &Dendrex,
) -> Result<Composition, KanError> {
    assert!(slot < n, "slot within the arity");
    let cn = Tree::corolla(n);
    let cm = Tree::corolla(m);
    let leaf = (slot + 1).to_string();
    if colour_of(x, &cn, f, &leaf)? != colour_of(x, &cm, g, "0")? {
        return Err(KanError::NotComposable);
    }
    let t = cn.graft(&leaf, &cm).expect("grafting on a leaf");
    let grafted: Vec<Edge> = {
        let w = t.top_vertex(&leaf).expect("grafted vertex");
        t.vertices()[w].inputs.clone()
    };
    let top = omega::outer_face(&t, &leaf).expect("top cluster");
    let root = omega::outer_face(&t, "0").expect("root cluster");
    let mut g_pairs: Vec<(String, String)> = vec![(leaf.clone(), "0".to_string())];
    for (j, e) in grafted.iter().enumerate() {
        g_pairs.push((e.clone(), (j + 1).to_string()));
    }
    let borrowed: Vec<(&str, &str)> =
        g_pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let g_t = x.act(&iso(root.source(), &cm, &borrowed), g)?;
    let mut witness: Option<Dendrex> = None;
    'cand: for cand in x.dendrices(&t)?.iter() {
        if x.act(&top, cand)? != *f || x.act(&root, cand)? != g_t {
            continue 'cand;
        }
        if witness.as_ref().is_none_or(|b| cand < b) {
            witness = Some(cand.clone());
        }
    }
    let witness = witness.ok_or_else(|| {
        KanError::NotInnerKan(format!("no composite filler in slot {slot} of arity {n}"))
    })?;
    let inner = omega::inner_face(&t, &leaf).expect("inner edge");
    let contracted = x.act(&inner, &witness)?;
    // Rename the contracted corolla onto the standard one: original
    // leaves keep their position, the grafted leaves take over slot
    // `slot + 1` onwards.
    let standard = Tree::corolla(n + m - 1);
    let mut pairs: Vec<(String, String)> = vec![("0".to_string(), "0".to_string())];
    for k in 1..=(n + m - 1) {
        let img = if k <= slot {
            k.to_string()
        } else if k <= slot + m {
            grafted[k - slot - 1].clone()
        } else {
            (k - m + 1).to_string()
        };
        pairs.push((k.to_string(), img));
    }
    let borrowed: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let composite = x.act(&iso(&standard, inner.source(), &borrowed), &contracted)?;
    Ok(Composition { shape: t, witness, composite })
}

fn uf_find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

fn uf_union(parent: &mut [usize], a: usize, b: usize) {
    let ra = uf_find(parent, a);
    let rb = uf_find(parent, b);
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// The homotopy operad of an inner-Kan set, with dictionaries back into
/// the set: the dendrex standing for each colour and the least
/// representative of each operation class.
pub struct HoOperad {
    pub operad: ColoredOperad,
    /// Colour `c{k}` is the `k`-th dendrex over eta.
    pub colour_reps: Vec<Dendrex>,
    /// Operation name to arity and least class representative over the
    /// standard corolla of that arity.
    pub op_reps: BTreeMap<OpName, (usize, Dendrex)>,
}

/// Build the homotopy operad: colours are the eta dendrices, operations
/// the homotopy classes of corolla dendrices (at the output position),
/// units the degeneracy classes, composition by inner horn filling of
/// grafted corollas, and the symmetric action by pulling representatives
/// back along corolla isomorphisms. The result is validated and must
/// satisfy the operad laws on the nose, which holds for inner-Kan sets.
/// The ambient set must carry a symmetric action on labelings, so nerves
/// of planar operads are out of scope.
pub fn ho_operad(x: &DendroidalSet) -> Result<HoOperad, KanError> {
    let bounds = x.bounds();
    assert!(bounds.degree >= 2, "homotopies live over degree-two shapes");
    let cap = bounds.valence;
    let eta = Tree::eta("e0");
    let colour_reps: Vec<Dendrex> = x.dendrices(&eta)?.as_ref().clone();
    let colour_names: Vec<Colour> = (0..colour_reps.len()).map(|k| format!("c{k}")).collect();
    let colour_name = |d: &Dendrex| -> Colour {
        let k = colour_reps.iter().position(|c| c == d).expect("a colour of the set");
        colour_names[k].clone()
    };

    let mut ops: Vec<Operation> = Vec::new();
    let mut op_reps: BTreeMap<OpName, (usize, Dendrex)> = BTreeMap::new();
    // Per arity, each corolla dendrex's class name.
    let mut class_name: Vec<BTreeMap<Dendrex, OpName>> = Vec::new();
    for n in 0..=cap {
        let c = Tree::corolla(n);
        let dx: Vec<Dendrex> = x.dendrices(&c)?.as_ref().clone();
        let mut parent: Vec<usize> = (0..dx.len()).collect();
        for a in 0..dx.len() {
            for b in 0..a {
                let related = match homotopic(x, n, &dx[a], &dx[b], 0) {
                    Ok(Some(_)) => true,
                    Ok(None) => homotopic(x, n, &dx[b], &dx[a], 0)?.is_some(),
                    Err(KanError::NotParallel) => false,
                    Err(e) => return Err(e),
                };
                if related {
                    uf_union(&mut parent, a, b);
                }
            }
        }
        let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for a in 0..dx.len() {
            let r = uf_find(&mut parent, a);
            classes.entry(r).or_default().push(a);
        }
        let mut reps: Vec<(Dendrex, Vec<usize>)> = classes
            .into_values()
            .map(|members| {
                let rep =
                    members.iter().map(|&i| dx[i].clone()).min().expect("non-empty class");
                (rep, members)
            })
            .collect();
        reps.sort();
        let mut named = BTreeMap::new();
        for (k, (rep, members)) in reps.into_iter().enumerate() {
            let name = format!("h{n}_{k}");
            let inputs = (1..=n)
                .map(|j| Ok(colour_name(&colour_of(x, &c, &rep, &j.to_string())?)))
                .collect::<Result<Vec<_>, KanError>>()?;
            let output = colour_name(&colour_of(x, &c, &rep, "0")?);
            ops.push(Operation { name: name.clone(), inputs, output });
            op_reps.insert(name.clone(), (n, rep));
            for i in members {
                named.insert(dx[i].clone(), name.clone());
            }
        }
        class_name.push(named);
    }

    let mut units: BTreeMap<Colour, OpName> = BTreeMap::new();
    let c1 = Tree::corolla(1);
    let sigma1 = omega::degeneracy(&c1, "0").expect("unary corolla");
    let to_zero = iso(&Tree::eta("0"), &eta, &[("0", "e0")]);
    for (k, cd) in colour_reps.iter().enumerate() {
        let unit_dx = x.act(&sigma1, &x.act(&to_zero, cd)?)?;
        let name = class_name[1].get(&unit_dx).expect("degeneracies are corolla dendrices");
        units.insert(colour_names[k].clone(), name.clone());
    }

    let signature: BTreeMap<OpName, Operation> =
        ops.iter().map(|o| (o.name.clone(), o.clone())).collect();
    let mut composition: BTreeMap<(OpName, usize, OpName), OpName> = BTreeMap::new();
    for (pname, (np, prep)) in &op_reps {
        for slot in 0..*np {
            for (qname, (nq, qrep)) in &op_reps {
                if np + nq - 1 > cap {
                    continue;
                }
                if signature[qname].output != signature[pname].inputs[slot] {
                    continue;
                }
                let comp = composition_witness(x, *np, prep, slot, *nq, qrep)?;
                let cname = class_name[np + nq - 1]
                    .get(&comp.composite)
                    .expect("the composite is a corolla dendrex");
                composition.insert((pname.clone(), slot, qname.clone()), cname.clone());
            }
        }
    }

    let mut sym: BTreeMap<(OpName, Perm), OpName> = BTreeMap::new();
    for (pname, (n, rep)) in &op_reps {
        let c = Tree::corolla(*n);
        for perm in all_perms(*n) {
            let mut map = BTreeMap::from([("0".to_string(), "0".to_string())]);
            for k in 1..=*n {
                map.insert(k.to_string(), (perm[k - 1] + 1).to_string());
            }
            let rho = OmegaArrow::new(c.clone(), c.clone(), map).expect("corolla isomorphism");
            let image = x.act(&rho, rep)?;
            let iname = class_name[*n].get(&image).expect("permuted class");
            sym.insert((pname.clone(), perm), iname.clone());
        }
    }

    let operad = ColoredOperad::new(
        format!("Ho({})", x.name()),
        colour_names,
        ops,
        units,
        composition,
        Some(sym),
        cap,
    )?;
    let issues = operad.validate();
    if !issues.is_empty() {
        return Err(KanError::InvalidHo(issues.join("; ")));
    }
    Ok(HoOperad { operad, colour_reps, op_reps })
}

/// Verify strictness up to degree three (the range the construction
/// consumes), then build the homotopy operad. For strict sets the classes
/// are singletons and the nerve of the result recovers the set.
pub fn strict_kan_to_operad(x: &DendroidalSet) -> Result<HoOperad, KanError> {
    let to = x.bounds().degree.min(3);
    let report = check_inner_kan(x, to, true)?;
    if !report.is_strict() {
        return Err(KanError::RequiresStrict);
    }
    ho_operad(x)
}

/// Rebuild a strict inner-Kan set from its dendrices of degree at most
/// two: over every shape of higher degree the cells are the compatible
/// families over all arrows from degree-two shapes, and the actions
/// reindex those families. For strict sets this is a bijective
/// reconstruction, checked by the caller against the original; the
/// function refuses non-strict input.
pub fn coskeletal_extend(x: &DendroidalSet) -> Result<DendroidalSet, KanError> {
    let bounds = x.bounds();
    assert!(bounds.degree >= 2, "needs the degree-two data");
    let report = check_inner_kan(x, bounds.degree, true)?;
    if !report.is_strict() {
        return Err(KanError::RequiresStrict);
    }
    let shapes = x.shapes();
    let deg2: Vec<Tree> =
        enumerate_trees(2, bounds.valence).into_iter().filter(|u| u.degree() == 2).collect();
    // Per high shape: the generators (all arrows out of degree-two
    // shapes), its families in a fixed order, and both index maps.
    let mut gens: BTreeMap<Tree, Vec<OmegaArrow>> = BTreeMap::new();
    let mut gen_ix: BTreeMap<Tree, BTreeMap<OmegaArrow, usize>> = BTreeMap::new();
    let mut fams: BTreeMap<Tree, Vec<Vec<Dendrex>>> = BTreeMap::new();
    let mut fam_ix: BTreeMap<Tree, BTreeMap<Vec<Dendrex>, usize>> = BTreeMap::new();
    for t in shapes.iter().filter(|t| t.degree() > 2) {
        let arrows: Vec<OmegaArrow> = deg2
            .iter()
            .flat_map(|u| omega::arrows_between(u, t).iter().cloned().collect::<Vec<_>>())
            .collect();
        let host = DendroidalSet::representable(t, bounds);
        let pairs: Vec<(Tree, Dendrex)> =
            arrows.iter().map(|w| (w.source().clone(), Dendrex::Arrow(w.clone()))).collect();
        let mut families = hom_generated(&host, &pairs, x)?;
        families.sort();
        fam_ix.insert(
            t.clone(),
            families.iter().enumerate().map(|(k, f)| (f.clone(), k)).collect(),
        );
        fams.insert(t.clone(), families);
        gen_ix.insert(
            t.clone(),
            arrows.iter().enumerate().map(|(k, w)| (w.clone(), k)).collect(),
        );
        gens.insert(t.clone(), arrows);
    }
    let mut data = TableData::default();
    for t in &shapes {
        let cells: Vec<Dendrex> = if t.degree() <= 2 {
            x.dendrices(t)?.as_ref().clone()
        } else {
            (0..fams[t].len() as u64).map(Dendrex::Ix).collect()
        };
        data.elems.insert(t.clone(), cells);
    }
    for s in &shapes {
        for t in &shapes {
            for alpha in omega::arrows_between(s, t).iter() {
                // Everything depending on the arrow alone is hoisted out
                // of the cell loop.
                let mut map = BTreeMap::new();
                match (s.degree() > 2, t.degree() > 2) {
                    (false, false) => {
                        for cell in &data.elems[t] {
                            map.insert(cell.clone(), x.act(alpha, cell)?);
                        }
                    }
                    (true, false) => {
                        let composed: Vec<OmegaArrow> = gens[s]
                            .iter()
                            .map(|w| w.then(alpha).expect("composable"))
                            .collect();
                        for cell in &data.elems[t] {
                            let fam: Vec<Dendrex> = composed
                                .iter()
                                .map(|wa| x.act(wa, cell))
                                .collect::<Result<_, _>>()?;
                            map.insert(cell.clone(), Dendrex::Ix(fam_ix[s][&fam] as u64));
                        }
                    }
                    (false, true) if s.degree() == 2 => {
                        let gix = gen_ix[t][alpha];
                        for cell in &data.elems[t] {
                            let Dendrex::Ix(k) = cell else { unreachable!("families are indexed") };
                            map.insert(cell.clone(), fams[t][*k as usize][gix].clone());
                        }
                    }
                    (false, true) => {
                        let (gix, beta) = gens[t]
                            .iter()
                            .enumerate()
                            .find_map(|(gix, g)| {
                                omega::factors_through(alpha, g).map(|b| (gix, b))
                            })
                            .expect("low arrows factor through degree-two generators");
                        for cell in &data.elems[t] {
                            let Dendrex::Ix(k) = cell else { unreachable!("families are indexed") };
                            let image = x.act(&beta, &fams[t][*k as usize][gix])?;
                            map.insert(cell.clone(), image);
                        }
                    }
                    (true, true) => {
                        let remap: Vec<usize> = gens[s]
                            .iter()
                            .map(|w| gen_ix[t][&w.then(alpha).expect("composable")])
                            .collect();
                        for cell in &data.elems[t] {
                            let Dendrex::Ix(k) = cell else { unreachable!("families are indexed") };
                            let fam = &fams[t][*k as usize];
                            let moved: Vec<Dendrex> =
                                remap.iter().map(|&g| fam[g].clone()).collect();
                            map.insert(cell.clone(), Dendrex::Ix(fam_ix[s][&moved] as u64));
                        }
                    }
                }
                data.actions.insert(alpha.clone(), map);
            }
        }
    }
    Ok(DendroidalSet::from_table(format!("cosk_2({})", x.name()), bounds, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dset::{boundary, sieve_as_dset, Bounds};
    use crate::operad::omega_operad;
    use std::collections::BTreeSet;

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
        for perm in all_perms(3) {
            sym.insert(("w".to_string(), perm), "w".to_string());
        }
        ColoredOperad::new("Com3", vec![c()], ops, units, composition, Some(sym), 3).unwrap()
    }

    /// One colour, two distinct parallel binary operations. Cap two, so
    /// only unit composites are required.
    fn two_binary() -> ColoredOperad {
        let c = || "c".to_string();
        let ops = vec![
            Operation { name: "u".into(), inputs: vec![c()], output: c() },
            Operation { name: "p".into(), inputs: vec![c(), c()], output: c() },
            Operation { name: "q".into(), inputs: vec![c(), c()], output: c() },
        ];
        let units = BTreeMap::from([(c(), "u".to_string())]);
        let mut composition = BTreeMap::new();
        for b in ["p", "q"] {
            composition.insert(("u".to_string(), 0usize, b.to_string()), b.to_string());
            for i in 0..2usize {
                composition.insert((b.to_string(), i, "u".to_string()), b.to_string());
            }
        }
        composition.insert(("u".to_string(), 0usize, "u".to_string()), "u".to_string());
        let mut sym = BTreeMap::new();
        for b in ["p", "q"] {
            sym.insert((b.to_string(), vec![1, 0]), b.to_string());
        }
        ColoredOperad::new("TwoBinary", vec![c()], ops, units, composition, Some(sym), 2).unwrap()
    }

    fn bounds3() -> Bounds {
        Bounds { degree: 3, valence: 3 }
    }

    #[test]
    fn nerves_and_representables_are_strict_inner_kan() {
        let x = DendroidalSet::nerve(&com(), bounds3());
        let report = check_inner_kan(&x, 3, true).unwrap();
        assert!(report.is_strict(), "failures: {:?}", report.failures.len());
        assert!(report.checked_horns > 0);
        assert_eq!(report.skipped, 0);
        // Representables are nerves of free tree operads.
        let r = DendroidalSet::representable(&six_edge_tree(), bounds3());
        let report = check_inner_kan(&r, 3, true).unwrap();
        assert!(report.is_strict());
        // Requesting horns beyond the degree bound only skips them.
        let narrow = DendroidalSet::nerve(&com(), Bounds { degree: 2, valence: 3 });
        let report = check_inner_kan(&narrow, 3, false).unwrap();
        assert!(report.skipped > 0);
    }

    #[test]
    fn horn_complex_fails_inner_kan() {
        let small = Bounds { degree: 2, valence: 2 };
        let t = stacked();
        let h = sieve_as_dset(&inner_horn(&t, "x").unwrap(), small);
        let report = check_inner_kan(&h, 2, false).unwrap();
        assert!(!report.is_inner_kan());
        assert!(report.failures.iter().any(|f| f.shape.degree() == 2));
        let b = sieve_as_dset(&boundary(&t).unwrap(), small);
        assert!(!check_inner_kan(&b, 2, false).unwrap().is_inner_kan());
    }

    #[test]
    fn homotopy_in_nerves_is_equality() {
        let x = DendroidalSet::nerve(&com(), bounds3());
        let m = x.dendrices(&Tree::corolla(2)).unwrap()[0].clone();
        for i in 0..=2 {
            assert!(homotopic(&x, 2, &m, &m, i).unwrap().is_some(), "reflexive at {i}");
        }
        // Distinct parallel operations of a strict nerve are never
        // homotopic.
        let y = DendroidalSet::nerve(&two_binary(), Bounds { degree: 2, valence: 2 });
        let two = y.dendrices(&Tree::corolla(2)).unwrap();
        assert_eq!(two.len(), 2);
        assert!(homotopic(&y, 2, &two[0], &two[1], 0).unwrap().is_none());
        assert!(homotopic(&y, 2, &two[1], &two[0], 0).unwrap().is_none());
        assert!(homotopic(&y, 2, &two[0], &two[0], 0).unwrap().is_some());
        // Different colours are not even parallel.
        let z = DendroidalSet::nerve(&omega_operad(&six_edge_tree()), Bounds { degree: 2, valence: 2 });
        let units = z.dendrices(&Tree::corolla(1)).unwrap();
        let id_a = units
            .iter()
            .find(|d| matches!(d, Dendrex::Label(l) if l.colours[&"0".to_string()] == "a"))
            .unwrap();
        let id_b = units
            .iter()
            .find(|d| matches!(d, Dendrex::Label(l) if l.colours[&"0".to_string()] == "b"))
            .unwrap();
        assert_eq!(homotopic(&z, 1, id_a, id_b, 0).unwrap_err(), KanError::NotParallel);
    }

    #[test]
    fn composition_witness_reproduces_operad_composition() {
        let x = DendroidalSet::nerve(&com(), bounds3());
        let m = x.dendrices(&Tree::corolla(2)).unwrap()[0].clone();
        let u = x.dendrices(&Tree::corolla(1)).unwrap()[0].clone();
        for slot in 0..2 {
            let comp = composition_witness(&x, 2, &m, slot, 2, &m).unwrap();
            match &comp.composite {
                Dendrex::Label(l) => assert_eq!(l.ops[&"0".to_string()], "w"),
                _ => unreachable!(),
            }
            let with_unit = composition_witness(&x, 2, &m, slot, 1, &u).unwrap();
            match &with_unit.composite {
                Dendrex::Label(l) => assert_eq!(l.ops[&"0".to_string()], "m"),
                _ => unreachable!(),
            }
        }
        // Multi-coloured composition and the composability guard.
        let p = omega_operad(&six_edge_tree());
        let z = DendroidalSet::nerve(&p, Bounds { degree: 2, valence: 3 });
        let find = |cols: &[(&str, &str)]| -> Dendrex {
            let n = cols.len() - 1;
            z.dendrices(&Tree::corolla(n))
                .unwrap()
                .iter()
                .find(|d| match d {
                    Dendrex::Label(l) => {
                        cols.iter().all(|(e, c)| l.colours[&e.to_string()] == *c)
                    }
                    _ => false,
                })
                .unwrap()
                .clone()
        };
        let bc_a = find(&[("0", "a"), ("1", "b"), ("2", "c")]);
        let ef_b = find(&[("0", "b"), ("1", "e"), ("2", "f")]);
        let comp = composition_witness(&z, 2, &bc_a, 0, 2, &ef_b).unwrap();
        let expected = p.ops_with_signature(
            &["e".to_string(), "f".to_string(), "c".to_string()],
            "a",
        );
        assert_eq!(expected.len(), 1);
        match &comp.composite {
            Dendrex::Label(l) => assert_eq!(l.ops[&"0".to_string()], expected[0].name),
            _ => unreachable!(),
        }
        assert_eq!(
            composition_witness(&z, 2, &bc_a, 1, 2, &ef_b).unwrap_err(),
            KanError::NotComposable
        );
    }

    #[test]
    fn ho_operad_round_trips_nerve() {
        let p = com();
        let x = DendroidalSet::nerve(&p, bounds3());
        let ho = strict_kan_to_operad(&x).unwrap();
        assert_eq!(ho.operad.colours().len(), 1);
        // Class representatives name the original operations.
        let dict: BTreeMap<OpName, OpName> = ho
            .op_reps
            .iter()
            .map(|(name, (_, rep))| {
                let Dendrex::Label(l) = rep else { unreachable!() };
                (name.clone(), l.ops[&"0".to_string()].clone())
            })
            .collect();
        assert_eq!(dict.len(), p.ops().len());
        let back: BTreeSet<&OpName> = dict.values().collect();
        assert_eq!(back.len(), p.ops().len(), "classes biject with operations");
        for ((a, i, b), r) in ho.operad.composition_table() {
            assert_eq!(
                p.compose(&dict[a], *i, &dict[b]).map(|s| s.as_str()),
                Some(dict[r].as_str()),
                "composites transport"
            );
        }
        // Unit classes transport to the unit.
        let unit_class = ho.operad.unit("c0").unwrap();
        assert_eq!(dict[unit_class], "u");
    }

    #[test]
    fn ho_operad_of_representable_is_free_operad() {
        let t = six_edge_tree();
        let x = DendroidalSet::representable(&t, bounds3());
        let ho = ho_operad(&x).unwrap();
        let p = omega_operad(&t);
        assert_eq!(ho.operad.colours().len(), 6);
        // Arity census matches the free tree operad truncated at the cap.
        for n in 0..=3usize {
            let mine = ho.operad.ops().iter().filter(|o| o.arity() == n).count();
            let theirs = p.ops().iter().filter(|o| o.arity() == n).count();
            assert_eq!(mine, theirs, "arity {n}");
        }
        // Translate via representatives: an arrow dendrex over the
        // corolla is the operation with its signature.
        let dict: BTreeMap<OpName, OpName> = ho
            .op_reps
            .iter()
            .map(|(name, (n, rep))| {
                let Dendrex::Arrow(w) = rep else { unreachable!() };
                let inputs: Vec<String> =
                    (1..=*n).map(|k| w.apply(&k.to_string()).clone()).collect();
                let hits = p.ops_with_signature(&inputs, w.apply("0"));
                assert_eq!(hits.len(), 1);
                (name.clone(), hits[0].name.clone())
            })
            .collect();
        for ((a, i, b), r) in ho.operad.composition_table() {
            assert_eq!(
                p.compose(&dict[a], *i, &dict[b]).map(|s| s.as_str()),
                Some(dict[r].as_str())
            );
        }
        // The symmetric action transports too.
        for ((a, perm), r) in ho.operad.symmetry_table() {
            assert_eq!(p.act(&dict[&a], &perm).as_deref(), Some(dict[&r].as_str()));
        }
    }

    #[test]
    fn coskeletal_extension_recovers_strict_sets() {
        let x = DendroidalSet::nerve(&com(), bounds3());
        let y = coskeletal_extend(&x).unwrap();
        for t in x.shapes() {
            assert_eq!(
                x.dendrices(&t).unwrap().len(),
                y.dendrices(&t).unwrap().len(),
                "counts over degree {}",
                t.degree()
            );
        }
        assert!(y.audit_functoriality(3).unwrap().is_empty());
        // Actions agree along the correspondence on every maximal face
        // of every degree-three shape, compared over the canonical form
        // of the face source so both backends name cells the same way.
        for t in x.shapes().into_iter().filter(|t| t.degree() == 3) {
            let cells = x.dendrices(&t).unwrap();
            for (kind, face) in omega::maximal_faces(&t) {
                // Stay inside the bounded site: inner faces can merge two
                // vertices into one wider than the valence bound.
                let wide =
                    face.source().vertices().iter().any(|v| v.inputs.len() > 3);
                if face.source().degree() > 2 || wide {
                    continue;
                }
                let (canon, rename) = face.source().canonical_form();
                let inv: BTreeMap<Edge, Edge> =
                    rename.into_iter().map(|(a, b)| (b, a)).collect();
                let a = OmegaArrow::new(canon, face.source().clone(), inv).unwrap();
                let to_canon = a.then(&face).unwrap();
                let through_x: BTreeSet<Dendrex> = cells
                    .iter()
                    .map(|d| x.act(&to_canon, d))
                    .collect::<Result<_, _>>()
                    .unwrap();
                let through_y: BTreeSet<Dendrex> = y
                    .dendrices(&t)
                    .unwrap()
                    .iter()
                    .map(|d| y.act(&to_canon, d))
                    .collect::<Result<_, _>>()
                    .unwrap();
                assert_eq!(through_x, through_y, "face {kind:?}");
            }
        }
        // Non-strict input is refused.
        let small = Bounds { degree: 2, valence: 2 };
        let h = sieve_as_dset(&inner_horn(&stacked(), "x").unwrap(), small);
        assert!(matches!(coskeletal_extend(&h), Err(KanError::RequiresStrict)));
    }

    #[test]
    fn fill_horn_finds_unique_nerve_fillers() {
        let x = DendroidalSet::nerve(&com(), bounds3());
        let t = stacked();
        let h = inner_horn(&t, "x").unwrap();
        let families = hom_into(&h, &x).unwrap();
        assert!(!families.is_empty());
        let filled = fill_horn(&x, &t, "x", &families[0]).unwrap();
        assert_eq!(fillers(&h, &families[0], &x).unwrap(), vec![filled]);
        // The horn complex cannot fill its own tautological family.
        let small = Bounds { degree: 2, valence: 2 };
        let hx = sieve_as_dset(&h, small);
        let taut: Vec<Dendrex> =
            h.maximal_faces().iter().map(|f| Dendrex::Arrow(f.clone())).collect();
        assert!(matches!(fill_horn(&hx, &t, "x", &taut), Err(KanError::NotInnerKan(_))));
        let report = check_inner_kan(&x, 3, true).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("checked_horns"));
    }
}
