//! Machine-checkable anodyne extension certificates.
//!
//! An anodyne extension is a composite of pushouts along inner horn
//! inclusions `Λ^ξ[R] → Ω[R]`. A certificate records a start subobject, an
//! ordered list of pushout steps, and an end subobject. The verifier replays
//! the steps extensionally, as sets of dendrices of the ambient object, so a
//! verified certificate proves the inclusion without trusting the search
//! that found the steps. Three constructions emit certificates: the
//! multi-edge horn refinement, the grafting decomposition, and the tensor
//! filtration through percolation schemes with its characteristic-edge
//! bookkeeping.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::omega::{self, maximal_faces, FaceKind, OmegaArrow, OmegaError};
use crate::tensor::{
    pair_name, DendrexCache, NormalCluster, PercolationScheme, TensorDendrex, TensorError,
    TensorUnion,
};
use crate::tree::{enumerate_trees, Edge, Tree, TreeError, Vertex};

#[derive(Debug, Error)]
pub enum AnodyneError {
    #[error("bad-horn-spec: {0}")]
    BadHornSpec(String),
    #[error("not-inner: {0}")]
    NotInner(String),
    #[error("not-characteristic: {0}")]
    NotCharacteristic(String),
    #[error("contraction-cap: {0}")]
    ContractionCap(String),
    #[error("bad-graft: {0}")]
    BadGraft(String),
    #[error("certificate-invalid: {0}")]
    CertificateInvalid(String),
    #[error(transparent)]
    Omega(#[from] OmegaError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl From<TreeError> for AnodyneError {
    fn from(e: TreeError) -> AnodyneError {
        AnodyneError::BadGraft(e.to_string())
    }
}

/// The object a certificate lives in: one representable, or the tensor of
/// two representables presented as its union of percolation schemes. Steps
/// name their scheme by index; a representable is its own single scheme.
#[derive(Debug, Clone)]
pub enum Ambient {
    Representable(Tree),
    Tensor(Box<TensorUnion>),
}

impl Ambient {
    pub fn representable(t: &Tree) -> Ambient {
        Ambient::Representable(t.clone())
    }

    pub fn tensor(s: &Tree, t: &Tree) -> Result<Ambient, AnodyneError> {
        Ok(Ambient::Tensor(Box::new(TensorUnion::new(s, t)?)))
    }

    fn scheme_count(&self) -> usize {
        match self {
            Ambient::Representable(_) => 1,
            Ambient::Tensor(u) => u.schemes.len(),
        }
    }

    fn scheme_tree(&self, i: usize) -> &Tree {
        match self {
            Ambient::Representable(t) => t,
            Ambient::Tensor(u) => &u.schemes[i].tree,
        }
    }
}

/// A cell of the ambient object, recorded at the canonical representative
/// of its shape. In a representable the arrow itself is the cell; in a
/// tensor union two arrows are the same cell exactly when their dendrex
/// records agree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum CellKey {
    Map(OmegaArrow),
    Op(TensorDendrex),
}

/// A subobject as its set of nondegenerate cells, keyed by canonical shape.
/// Every subobject built here is a union of images of arrows, hence closed
/// under faces and degeneracies, and such a subobject is determined by the
/// nondegenerate cells it contains.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Subobject {
    cells: BTreeMap<Tree, BTreeSet<CellKey>>,
}

impl Subobject {
    fn insert(&mut self, shape: Tree, key: CellKey) -> bool {
        self.cells.entry(shape).or_default().insert(key)
    }

    fn contains(&self, shape: &Tree, key: &CellKey) -> bool {
        self.cells.get(shape).is_some_and(|keys| keys.contains(key))
    }

    fn absorb(&mut self, other: Subobject) {
        for (shape, keys) in other.cells {
            self.cells.entry(shape).or_default().extend(keys);
        }
    }

    fn meet(&self, other: &Subobject) -> Subobject {
        let mut out = Subobject::default();
        for (shape, keys) in &self.cells {
            if let Some(theirs) = other.cells.get(shape) {
                let both: BTreeSet<CellKey> = keys.intersection(theirs).cloned().collect();
                if !both.is_empty() {
                    out.cells.insert(shape.clone(), both);
                }
            }
        }
        out
    }

    fn first_cell_not_in(&self, other: &Subobject) -> Option<(&Tree, &CellKey)> {
        for (shape, keys) in &self.cells {
            for key in keys {
                if !other.contains(shape, key) {
                    return Some((shape, key));
                }
            }
        }
        None
    }
}

/// Which tensor factor a boundary face acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    S,
    T,
}

/// One maximal face of a tensor factor, with the union of schemes of that
/// face tensored against the whole other factor and a normal form cache
/// tied to it. Move relations depend on the factors, so caches are never
/// shared across unions.
#[derive(Debug)]
struct FaceUnit {
    side: Side,
    kind: FaceKind,
    union: TensorUnion,
    cache: DendrexCache,
}

/// The arity bound for operations of the representable on `t`: the widest
/// edge cut, which bounds the arity of any vertex of any shape mapping into
/// `t` by a mono.
fn op_width(t: &Tree) -> usize {
    fn width(t: &Tree, e: &Edge) -> usize {
        match t.top_vertex(e) {
            None => 1,
            Some(vi) => {
                let total: usize = t.vertices()[vi].inputs.iter().map(|i| width(t, i)).sum();
                total.max(1)
            }
        }
    }
    if t.degree() == 0 {
        1
    } else {
        width(t, t.root())
    }
}

/// Cell bookkeeping for one ambient object: the canonical probe shapes that
/// can carry nondegenerate cells, a dendrex cache for the ambient union,
/// and the boundary face units of a tensor.
struct CellEngine<'a> {
    ambient: &'a Ambient,
    shapes: Vec<Tree>,
    cache: DendrexCache,
    faces: Vec<FaceUnit>,
}

impl<'a> CellEngine<'a> {
    fn new(ambient: &'a Ambient) -> Result<CellEngine<'a>, AnodyneError> {
        let mut faces = Vec::new();
        if let Ambient::Tensor(u) = ambient {
            for (kind, phi) in maximal_faces(&u.s) {
                let union = TensorUnion::new(phi.source(), &u.t)?;
                faces.push(FaceUnit { side: Side::S, kind, union, cache: DendrexCache::new() });
            }
            for (kind, psi) in maximal_faces(&u.t) {
                let union = TensorUnion::new(&u.s, psi.source())?;
                faces.push(FaceUnit { side: Side::T, kind, union, cache: DendrexCache::new() });
            }
        }
        let mut tally: Vec<&Tree> = Vec::new();
        match ambient {
            Ambient::Representable(t) => tally.push(t),
            Ambient::Tensor(u) => tally.extend(u.schemes.iter().map(|p| &p.tree)),
        }
        for unit in &faces {
            tally.extend(unit.union.schemes.iter().map(|p| &p.tree));
        }
        let degree = tally.iter().map(|t| t.degree()).max().unwrap_or(0);
        let valence = tally.iter().map(|t| op_width(t)).max().unwrap_or(1);
        Ok(CellEngine {
            ambient,
            shapes: enumerate_trees(degree, valence),
            cache: DendrexCache::new(),
            faces,
        })
    }

    /// The cell of the composite `f`, keyed at the canonical form of its
    /// source.
    fn cell(&mut self, scheme: usize, f: &OmegaArrow) -> Result<(Tree, CellKey), AnodyneError> {
        let (shape, rename) = f.source().canonical_form();
        let map: BTreeMap<Edge, Edge> =
            rename.iter().map(|(orig, canon)| (canon.clone(), f.apply(orig).clone())).collect();
        let g = OmegaArrow::new(shape.clone(), f.target().clone(), map)?;
        let key = match self.ambient {
            Ambient::Representable(_) => CellKey::Map(g),
            Ambient::Tensor(u) => CellKey::Op(self.cache.dendrex(&u.schemes[scheme], &g)?),
        };
        Ok((shape, key))
    }

    /// Add every nondegenerate cell of the image of `f` to `sub`.
    fn insert_image(
        &mut self,
        sub: &mut Subobject,
        scheme: usize,
        f: &OmegaArrow,
    ) -> Result<(), AnodyneError> {
        for si in 0..self.shapes.len() {
            let probe = self.shapes[si].clone();
            if probe.degree() > f.source().degree() {
                continue;
            }
            let arrows = omega::arrows_between(&probe, f.source());
            for a in arrows.iter() {
                let comp = a.then(f)?;
                if !comp.is_mono() {
                    continue;
                }
                let (shape, key) = self.cell(scheme, &comp)?;
                sub.insert(shape, key);
            }
        }
        Ok(())
    }

    fn image(&mut self, scheme: usize, f: &OmegaArrow) -> Result<Subobject, AnodyneError> {
        let mut sub = Subobject::default();
        self.insert_image(&mut sub, scheme, f)?;
        Ok(sub)
    }

    /// The image of `Λ^xi[source of f]`: the union of the images of the
    /// composites of `f` with every maximal face except the inner face at
    /// `xi`.
    fn horn_image(
        &mut self,
        scheme: usize,
        f: &OmegaArrow,
        xi: &Edge,
    ) -> Result<Subobject, AnodyneError> {
        let mut sub = Subobject::default();
        for (kind, delta) in maximal_faces(f.source()) {
            if kind == FaceKind::Inner(xi.clone()) {
                continue;
            }
            self.insert_image(&mut sub, scheme, &delta.then(f)?)?;
        }
        Ok(sub)
    }

    fn materialize(&mut self, spec: &SubobjectSpec) -> Result<Subobject, AnodyneError> {
        let mut sub = Subobject::default();
        match spec {
            SubobjectSpec::Full => {
                for i in 0..self.ambient.scheme_count() {
                    let id = OmegaArrow::identity(self.ambient.scheme_tree(i));
                    self.insert_image(&mut sub, i, &id)?;
                }
            }
            SubobjectSpec::Monos { generators } => {
                for (i, f) in generators {
                    if *i >= self.ambient.scheme_count()
                        || f.target() != self.ambient.scheme_tree(*i)
                    {
                        return Err(AnodyneError::CertificateInvalid(
                            "a start generator does not land in its scheme".to_string(),
                        ));
                    }
                    self.insert_image(&mut sub, *i, f)?;
                }
            }
            SubobjectSpec::MultiHorn { edges } => {
                let Ambient::Representable(t) = self.ambient else {
                    return Err(AnodyneError::CertificateInvalid(
                        "a multi-horn start needs a representable ambient".to_string(),
                    ));
                };
                let t = t.clone();
                for (kind, delta) in maximal_faces(&t) {
                    if let FaceKind::Inner(e) = &kind {
                        if edges.contains(e) {
                            continue;
                        }
                    }
                    self.insert_image(&mut sub, 0, &delta)?;
                }
            }
            SubobjectSpec::TensorHorn { edge } => {
                self.tensor_start(edge, &mut sub)?;
            }
        }
        Ok(sub)
    }

    /// The tensor boundary start: the horn of the marked factor edge of the
    /// first factor against all of the second, united with the first factor
    /// against the boundary of the second. Each face is materialized as the
    /// exact image of the face tensored with the untouched factor.
    fn tensor_start(&mut self, edge: &Edge, sub: &mut Subobject) -> Result<(), AnodyneError> {
        let Ambient::Tensor(u) = self.ambient else {
            return Err(AnodyneError::CertificateInvalid(
                "a tensor-horn start needs a tensor ambient".to_string(),
            ));
        };
        if !u.s.is_inner(edge) {
            return Err(AnodyneError::NotInner(format!(
                "edge {edge} is not inner in the first factor"
            )));
        }
        for fi in 0..self.faces.len() {
            if self.faces[fi].side == Side::S
                && self.faces[fi].kind == FaceKind::Inner(edge.clone())
            {
                continue;
            }
            self.push_face_image(fi, sub)?;
        }
        Ok(())
    }

    /// Insert every nondegenerate cell of the image of one boundary face.
    /// Face arrows keep edge names, so colours transport unchanged; clusters
    /// are expanded at an inner face and renormalized against the ambient
    /// factors, whose move relation can differ from the face union's.
    fn push_face_image(&mut self, fi: usize, sub: &mut Subobject) -> Result<(), AnodyneError> {
        let Ambient::Tensor(u) = self.ambient else {
            return Err(AnodyneError::CertificateInvalid(
                "boundary faces only exist in a tensor ambient".to_string(),
            ));
        };
        let expand = match (self.faces[fi].side, &self.faces[fi].kind) {
            (Side::S, FaceKind::Inner(a)) => Some((Side::S, a.clone())),
            (Side::T, FaceKind::Inner(b)) => Some((Side::T, b.clone())),
            _ => None,
        };
        for qi in 0..self.faces[fi].union.schemes.len() {
            for si in 0..self.shapes.len() {
                let probe = self.shapes[si].clone();
                if probe.degree() > self.faces[fi].union.schemes[qi].tree.degree() {
                    continue;
                }
                let arrows =
                    omega::arrows_between(&probe, &self.faces[fi].union.schemes[qi].tree);
                for g in arrows.iter() {
                    if !g.is_mono() {
                        continue;
                    }
                    let d = {
                        let unit = &mut self.faces[fi];
                        unit.cache.dendrex(&unit.union.schemes[qi], g)?
                    };
                    let pushed = push_dendrex(&mut self.cache, u, &expand, &d)?;
                    sub.insert(probe.clone(), CellKey::Op(pushed));
                }
            }
        }
        Ok(())
    }
}

/// Transport a dendrex of a face union into the ambient union.
fn push_dendrex(
    cache: &mut DendrexCache,
    u: &TensorUnion,
    expand: &Option<(Side, Edge)>,
    d: &TensorDendrex,
) -> Result<TensorDendrex, AnodyneError> {
    let mut ops = BTreeMap::new();
    for (vout, nf) in &d.ops {
        let frag = match expand {
            Some((Side::S, a)) => expand_s_inner(nf, a, u)?,
            Some((Side::T, b)) => expand_t_inner(nf, b, u)?,
            None => PercolationScheme {
                s: u.s.clone(),
                t: u.t.clone(),
                tree: nf.tree.clone(),
                whites: nf.whites.clone(),
                labels: nf.labels.clone(),
            },
        };
        ops.insert(vout.clone(), cache.normalize(frag)?);
    }
    Ok(TensorDendrex { colours: d.colours.clone(), ops })
}

/// Expand every white copy of the composite vertex of `s/a` into the two
/// copies it stands for, giving a fragment over the uncontracted factors.
fn expand_s_inner(
    nf: &NormalCluster,
    a: &Edge,
    u: &TensorUnion,
) -> Result<PercolationScheme, AnodyneError> {
    let (bi, _) = u.s.bottom_vertex(a).expect("a contracted edge is inner");
    let ti = u.s.top_vertex(a).expect("a contracted edge is inner");
    let vbot = u.s.vertices()[bi].clone();
    let vtop = u.s.vertices()[ti].clone();
    let mut whites = nf.whites.clone();
    let mut labels = nf.labels.clone();
    let mut vertices = Vec::new();
    for v in nf.tree.vertices() {
        let lab = &nf.labels[&v.output];
        if !(nf.whites.contains(&v.output) && lab.0 == vbot.output) {
            vertices.push(v.clone());
            continue;
        }
        let y = lab.1.clone();
        let fresh = pair_name(a, &y);
        let lower: Vec<Edge> = vbot
            .inputs
            .iter()
            .map(|i| if i == a { fresh.clone() } else { pair_name(i, &y) })
            .collect();
        let upper: Vec<Edge> = vtop.inputs.iter().map(|i| pair_name(i, &y)).collect();
        vertices.push(Vertex { inputs: lower, output: v.output.clone() });
        vertices.push(Vertex { inputs: upper, output: fresh.clone() });
        whites.insert(fresh.clone());
        labels.insert(fresh, (a.clone(), y));
    }
    let tree = Tree::new(nf.tree.root().clone(), vertices)
        .map_err(|e| AnodyneError::CertificateInvalid(format!("face expansion failed: {e}")))?;
    Ok(PercolationScheme { s: u.s.clone(), t: u.t.clone(), tree, whites, labels })
}

/// Expand every black copy of the composite vertex of `t/b`, dually.
fn expand_t_inner(
    nf: &NormalCluster,
    b: &Edge,
    u: &TensorUnion,
) -> Result<PercolationScheme, AnodyneError> {
    let (bi, _) = u.t.bottom_vertex(b).expect("a contracted edge is inner");
    let ti = u.t.top_vertex(b).expect("a contracted edge is inner");
    let wbot = u.t.vertices()[bi].clone();
    let wtop = u.t.vertices()[ti].clone();
    let whites = nf.whites.clone();
    let mut labels = nf.labels.clone();
    let mut vertices = Vec::new();
    for v in nf.tree.vertices() {
        let lab = &nf.labels[&v.output];
        if nf.whites.contains(&v.output) || lab.1 != wbot.output {
            vertices.push(v.clone());
            continue;
        }
        let c = lab.0.clone();
        let fresh = pair_name(&c, b);
        let lower: Vec<Edge> = wbot
            .inputs
            .iter()
            .map(|j| if j == b { fresh.clone() } else { pair_name(&c, j) })
            .collect();
        let upper: Vec<Edge> = wtop.inputs.iter().map(|j| pair_name(&c, j)).collect();
        vertices.push(Vertex { inputs: lower, output: v.output.clone() });
        vertices.push(Vertex { inputs: upper, output: fresh.clone() });
        labels.insert(fresh, (c, b.clone()));
    }
    let tree = Tree::new(nf.tree.root().clone(), vertices)
        .map_err(|e| AnodyneError::CertificateInvalid(format!("face expansion failed: {e}")))?;
    Ok(PercolationScheme { s: u.s.clone(), t: u.t.clone(), tree, whites, labels })
}

/// How a start or end subobject is presented. The verifier materializes the
/// description itself rather than trusting listed cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SubobjectSpec {
    /// Union of the images of arrows into the named schemes.
    Monos { generators: Vec<(usize, OmegaArrow)> },
    /// All maximal faces of a representable except the inner faces at the
    /// listed edges.
    MultiHorn { edges: BTreeSet<Edge> },
    /// The tensor boundary: the horn of the marked inner edge of the first
    /// factor against all of the second, united with the first factor
    /// against the boundary of the second.
    TensorHorn { edge: Edge },
    /// The whole ambient object.
    Full,
}

/// One inner-horn pushout: the filler arrow into its scheme, the omitted
/// inner edge, and the attaching dendrex family, one cell per maximal face
/// of the shape other than the omitted one, in face listing order.
#[derive(Debug, Clone, Serialize)]
pub struct CertStep {
    pub scheme: usize,
    pub shape: Tree,
    pub xi: Edge,
    pub attaching: Vec<(Tree, CellKey)>,
    pub cell: (Tree, CellKey),
    pub filler: OmegaArrow,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnodyneCertificate {
    pub start: SubobjectSpec,
    pub steps: Vec<CertStep>,
    pub end: SubobjectSpec,
}

impl AnodyneCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates serialize")
    }
}

/// The outcome of replaying a certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub ok: bool,
    pub steps_checked: usize,
    pub failure: Option<String>,
}

/// Incremental certificate construction: tracks the current subobject and
/// appends pushout steps whose horns are checked on entry.
pub struct CertBuilder<'a> {
    cx: CellEngine<'a>,
    start: SubobjectSpec,
    current: Subobject,
    steps: Vec<CertStep>,
}

impl<'a> CertBuilder<'a> {
    pub fn new(ambient: &'a Ambient, start: SubobjectSpec) -> Result<CertBuilder<'a>, AnodyneError> {
        let mut cx = CellEngine::new(ambient)?;
        let current = cx.materialize(&start)?;
        Ok(CertBuilder { cx, start, current, steps: Vec::new() })
    }

    /// Whether the whole image of `f` is already in the current subobject.
    /// Images are closed under the simplex action, so membership of the
    /// single cell of `f` decides it.
    pub fn contains(&mut self, scheme: usize, f: &OmegaArrow) -> Result<bool, AnodyneError> {
        let (shape, key) = self.cx.cell(scheme, f)?;
        Ok(self.current.contains(&shape, &key))
    }

    /// Append the pushout along the `Λ^xi` horn of the filler's source.
    /// Returns false and appends nothing when the filler cell is already
    /// present; errors when an attaching face is missing, which would
    /// falsify the construction being recorded.
    pub fn push(
        &mut self,
        scheme: usize,
        xi: &Edge,
        filler: OmegaArrow,
    ) -> Result<bool, AnodyneError> {
        if !filler.source().is_inner(xi) {
            return Err(AnodyneError::NotInner(format!(
                "edge {xi} is not inner in the step shape"
            )));
        }
        let (fsh, fkey) = self.cx.cell(scheme, &filler)?;
        if self.current.contains(&fsh, &fkey) {
            return Ok(false);
        }
        let mut attaching = Vec::new();
        for (kind, delta) in maximal_faces(filler.source()) {
            if kind == FaceKind::Inner(xi.clone()) {
                continue;
            }
            let (ash, akey) = self.cx.cell(scheme, &delta.then(&filler)?)?;
            if !self.current.contains(&ash, &akey) {
                return Err(AnodyneError::CertificateInvalid(format!(
                    "attaching face {kind:?} of the horn at {xi} is not in the current subobject"
                )));
            }
            attaching.push((ash, akey));
        }
        self.cx.insert_image(&mut self.current, scheme, &filler)?;
        self.steps.push(CertStep {
            scheme,
            shape: filler.source().clone(),
            xi: xi.clone(),
            attaching,
            cell: (fsh, fkey),
            filler,
        });
        Ok(true)
    }

    pub fn steps(&self) -> &[CertStep] {
        &self.steps
    }

    pub fn finish(self, end: SubobjectSpec) -> AnodyneCertificate {
        AnodyneCertificate { start: self.start, steps: self.steps, end }
    }
}

/// Certificate for `Λ^A[T] → Ω[T]`. By induction on `A`: the horn over `A`
/// refines to the horn over `A` minus its least edge through a pushout of
/// the smaller multi-horn of the contraction, and a single edge leaves one
/// inner horn step.
pub fn certify_multi_horn(
    t: &Tree,
    a: &BTreeSet<Edge>,
) -> Result<AnodyneCertificate, AnodyneError> {
    if a.is_empty() {
        return Err(AnodyneError::BadHornSpec("the edge set is empty".to_string()));
    }
    for e in a {
        if !t.is_inner(e) {
            return Err(AnodyneError::BadHornSpec(format!("edge {e} is not inner")));
        }
    }
    let ambient = Ambient::representable(t);
    let mut b = CertBuilder::new(&ambient, SubobjectSpec::MultiHorn { edges: a.clone() })?;
    multi_horn_rec(&mut b, a, &OmegaArrow::identity(t))?;
    Ok(b.finish(SubobjectSpec::Full))
}

fn multi_horn_rec(
    b: &mut CertBuilder,
    a: &BTreeSet<Edge>,
    incl: &OmegaArrow,
) -> Result<(), AnodyneError> {
    let mut rest = a.clone();
    let e = rest.pop_first().expect("the multi-horn recursion needs edges");
    if rest.is_empty() {
        b.push(0, &e, incl.clone())?;
        return Ok(());
    }
    let delta = omega::inner_face(incl.source(), &e)?;
    multi_horn_rec(b, &rest, &delta.then(incl)?)?;
    multi_horn_rec(b, &rest, incl)
}

/// The grafted tree `t ∘_l s` with the inclusions of its two parts. Edges
/// of `t` keep their names; edges of `s` are renamed by the graft, the root
/// of `s` becoming `l`. A unit operand leaves the other tree unchanged.
pub fn graft_inclusions(
    t: &Tree,
    l: &Edge,
    s: &Tree,
) -> Result<(Tree, OmegaArrow, OmegaArrow), AnodyneError> {
    if t.degree() == 0 {
        if l != t.root() {
            return Err(AnodyneError::BadGraft(format!(
                "edge {l} is not the edge of the unit tree"
            )));
        }
        let map = BTreeMap::from([(l.clone(), s.root().clone())]);
        let incl_t = OmegaArrow::new(t.clone(), s.clone(), map)?;
        return Ok((s.clone(), incl_t, OmegaArrow::identity(s)));
    }
    if s.degree() == 0 {
        if !t.is_leaf(l) {
            return Err(AnodyneError::BadGraft(format!("edge {l} is not a leaf")));
        }
        let map = BTreeMap::from([(s.root().clone(), l.clone())]);
        let incl_s = OmegaArrow::new(s.clone(), t.clone(), map)?;
        return Ok((t.clone(), OmegaArrow::identity(t), incl_s));
    }
    let (r, rename) = t.graft_with_map(l, s)?;
    let id_on_t: BTreeMap<Edge, Edge> =
        t.edge_set().into_iter().map(|e| (e.clone(), e)).collect();
    let incl_t = OmegaArrow::new(t.clone(), r.clone(), id_on_t)?;
    let incl_s = OmegaArrow::new(s.clone(), r.clone(), rename)?;
    Ok((r, incl_t, incl_s))
}

/// Certificate for `Ω[T] ∪_l Ω[S] → Ω[T ∘_l S]`. Outer cluster faces away
/// from the graft edge are adjoined recursively; the multi-horn over all
/// inner edges then finishes each subtree. A unit operand makes the
/// inclusion an identity and the certificate empty.
pub fn certify_grafting(
    t: &Tree,
    l: &Edge,
    s: &Tree,
) -> Result<AnodyneCertificate, AnodyneError> {
    let (r, incl_t, incl_s) = graft_inclusions(t, l, s)?;
    let ambient = Ambient::representable(&r);
    let start = SubobjectSpec::Monos { generators: vec![(0, incl_t), (0, incl_s)] };
    let mut b = CertBuilder::new(&ambient, start)?;
    if t.degree() > 0 && s.degree() > 0 {
        graft_rec(&mut b, l, &OmegaArrow::identity(&r))?;
    }
    Ok(b.finish(SubobjectSpec::Full))
}

fn graft_rec(b: &mut CertBuilder, l: &Edge, incl: &OmegaArrow) -> Result<(), AnodyneError> {
    if b.contains(0, incl)? {
        return Ok(());
    }
    for (kind, delta) in maximal_faces(incl.source()) {
        let FaceKind::OuterVertex(e) = &kind else { continue };
        let vi = incl.source().top_vertex(e).expect("outer faces remove a vertex");
        let v = &incl.source().vertices()[vi];
        // faces at the graft edge lie in the two starting images already
        if v.output == *l || v.inputs.contains(l) {
            continue;
        }
        graft_rec(b, l, &delta.then(incl)?)?;
    }
    let inner: BTreeSet<Edge> = incl.source().inner_edges().into_iter().collect();
    multi_horn_rec(b, &inner, incl)
}

/// The identity-named contraction `R/(edges) → R`.
fn contraction_arrow(rt: &Tree, edges: &[&Edge]) -> Result<OmegaArrow, AnodyneError> {
    let mut arrow = OmegaArrow::identity(rt);
    for e in edges {
        let step = omega::inner_face(arrow.source(), e)?;
        arrow = step.then(&arrow)?;
    }
    Ok(arrow)
}

/// Brute-force check that `xi` is a characteristic edge of the segment
/// `incl` with respect to the current subobject: every top face of the
/// segment is already contained, and contracting `xi` never carries a
/// missing contraction family into the contained ones.
pub fn characteristic_edge_check(
    b: &mut CertBuilder,
    scheme: usize,
    incl: &OmegaArrow,
    xi: &Edge,
) -> Result<bool, AnodyneError> {
    let rt = incl.source().clone();
    if !rt.is_inner(xi) {
        return Err(AnodyneError::NotInner(format!("edge {xi} is not inner in the segment")));
    }
    for (kind, delta) in maximal_faces(&rt) {
        let FaceKind::OuterVertex(e) = &kind else { continue };
        if e == rt.root() {
            continue;
        }
        if !b.contains(scheme, &delta.then(incl)?)? {
            return Ok(false);
        }
    }
    let xs: Vec<Edge> = rt.inner_edges().into_iter().filter(|f| f != xi).collect();
    if xs.len() > 12 {
        return Err(AnodyneError::ContractionCap(format!(
            "{} inner edges exceed the subset cap of 12",
            xs.len()
        )));
    }
    for size in 0..=xs.len() {
        for subset in xs.iter().combinations(size) {
            let plain = contraction_arrow(&rt, &subset)?;
            let mut with_xi = subset.clone();
            with_xi.push(xi);
            let contracted = contraction_arrow(&rt, &with_xi)?;
            let plain_in = b.contains(scheme, &plain.then(incl)?)?;
            let contracted_in = b.contains(scheme, &contracted.then(incl)?)?;
            if !plain_in && contracted_in {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The subset walk at a characteristic edge: for every subset of the inner
/// edges whose single contraction is missing, adjoin the matching
/// contraction of the segment by a pushout along its `Λ^xi` horn, most
/// contracted first and the full segment last. Returns the number of
/// pushouts appended.
pub fn characteristic_expand(
    b: &mut CertBuilder,
    scheme: usize,
    incl: &OmegaArrow,
    xi: &Edge,
) -> Result<usize, AnodyneError> {
    let rt = incl.source().clone();
    if !rt.is_inner(xi) {
        return Err(AnodyneError::NotInner(format!("edge {xi} is not inner in the segment")));
    }
    if !characteristic_edge_check(b, scheme, incl, xi)? {
        return Err(AnodyneError::NotCharacteristic(format!(
            "edge {xi} fails the characteristic conditions for this segment"
        )));
    }
    let mut xs: Vec<Edge> = Vec::new();
    for f in rt.inner_edges() {
        if f == *xi {
            continue;
        }
        let single = contraction_arrow(&rt, &[&f])?;
        if !b.contains(scheme, &single.then(incl)?)? {
            xs.push(f);
        }
    }
    if xs.len() > 12 {
        return Err(AnodyneError::ContractionCap(format!(
            "{} qualifying edges exceed the subset cap of 12",
            xs.len()
        )));
    }
    let mut pushed = 0;
    for size in 0..=xs.len() {
        for kept in xs.iter().combinations(size) {
            let kept: BTreeSet<&Edge> = kept.into_iter().collect();
            let contracted: Vec<&Edge> = xs.iter().filter(|f| !kept.contains(*f)).collect();
            let sub_arrow = contraction_arrow(&rt, &contracted)?;
            if b.push(scheme, xi, sub_arrow.then(incl)?)? {
                pushed += 1;
            }
        }
    }
    Ok(pushed)
}

/// The spines of a percolation scheme for a marked inner edge of the first
/// factor: the edges carrying the marked colour whose lower vertex is
/// white, each recorded with the branch of vertices from the root up to and
/// including the vertex above it, so the spine edge is inner in any segment
/// containing its branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpineData {
    pub tops: Vec<Edge>,
    pub branches: Vec<BTreeSet<Edge>>,
}

impl SpineData {
    pub fn of_scheme(p: &PercolationScheme, marked: &Edge) -> SpineData {
        let mut tops = Vec::new();
        let mut branches = Vec::new();
        for f in p.tree.edges() {
            let Some(lab) = p.labels.get(&f) else { continue };
            if lab.0 != *marked {
                continue;
            }
            let Some((bi, _)) = p.tree.bottom_vertex(&f) else { continue };
            if !p.whites.contains(&p.tree.vertices()[bi].output) {
                continue;
            }
            let Some(ti) = p.tree.top_vertex(&f) else { continue };
            let mut branch = BTreeSet::from([p.tree.vertices()[ti].output.clone()]);
            let mut below = bi;
            loop {
                branch.insert(p.tree.vertices()[below].output.clone());
                match p.tree.bottom_vertex(&p.tree.vertices()[below].output) {
                    Some((next, _)) => below = next,
                    None => break,
                }
            }
            tops.push(f);
            branches.push(branch);
        }
        SpineData { tops, branches }
    }

    /// The pair `(l, u)`: contained spines, and segment vertices lying off
    /// every contained spine. Segments are walked in ascending `(l, u)`.
    pub fn measure(&self, verts: &BTreeSet<Edge>) -> (usize, usize) {
        let mut covered: BTreeSet<&Edge> = BTreeSet::new();
        let mut l = 0;
        for branch in &self.branches {
            if branch.is_subset(verts) {
                l += 1;
                covered.extend(branch.iter());
            }
        }
        (l, verts.iter().filter(|v| !covered.contains(*v)).count())
    }
}

/// Downward closed vertex sets of a scheme tree, each named by the output
/// edges of its vertices; the empty segment stands for the unit at the
/// root.
fn initial_segments(t: &Tree) -> Vec<BTreeSet<Edge>> {
    let n = t.degree();
    debug_assert!(n < 32, "scheme trees stay far below the mask width");
    let mut out = Vec::new();
    'masks: for mask in 0u32..(1u32 << n) {
        for (i, v) in t.vertices().iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            if let Some((pi, _)) = t.bottom_vertex(&v.output) {
                if mask & (1 << pi) == 0 {
                    continue 'masks;
                }
            }
        }
        let verts: BTreeSet<Edge> = t
            .vertices()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, v)| v.output.clone())
            .collect();
        out.push(verts);
    }
    out
}

/// The inclusion of the initial segment spanned by `verts` into its scheme
/// tree.
fn segment_arrow(t: &Tree, verts: &BTreeSet<Edge>) -> Result<OmegaArrow, AnodyneError> {
    if verts.is_empty() {
        return Ok(omega::edge_inclusion(t, t.root())?);
    }
    let vertices: Vec<Vertex> =
        t.vertices().iter().filter(|v| verts.contains(&v.output)).cloned().collect();
    let sub = Tree::new(t.root().clone(), vertices)
        .map_err(|e| AnodyneError::CertificateInvalid(format!("segment is not a tree: {e}")))?;
    let map: BTreeMap<Edge, Edge> = sub.edge_set().into_iter().map(|e| (e.clone(), e)).collect();
    Ok(OmegaArrow::new(sub, t.clone(), map)?)
}

/// Certificate for the pushout-product inclusion
/// `Λ^e[S] ⊗ Ω[T] ∪ Ω[S] ⊗ ∂Ω[T] → Ω[S] ⊗ Ω[T]`. Schemes are adjoined in
/// the linear order of the union; within a scheme, initial segments are
/// walked by contained-spine count and then off-spine size, each missing
/// segment entering through the subset walk at its first contained spine
/// top.
pub fn certify_tensor_extension(
    s: &Tree,
    e: &Edge,
    t: &Tree,
) -> Result<AnodyneCertificate, AnodyneError> {
    if !s.is_inner(e) {
        return Err(AnodyneError::NotInner(format!(
            "edge {e} is not inner in the first factor"
        )));
    }
    let ambient = Ambient::tensor(s, t)?;
    let (order, schemes) = match &ambient {
        Ambient::Tensor(u) => (u.order.clone(), u.schemes.clone()),
        Ambient::Representable(_) => unreachable!("just constructed as a tensor"),
    };
    let mut b = CertBuilder::new(&ambient, SubobjectSpec::TensorHorn { edge: e.clone() })?;
    for ix in order {
        adjoin_scheme(&mut b, &schemes[ix], ix, e)?;
    }
    let full = b.cx.materialize(&SubobjectSpec::Full)?;
    if let Some((shape, _)) = full.first_cell_not_in(&b.current) {
        return Err(AnodyneError::CertificateInvalid(format!(
            "the filtration did not exhaust the union: a cell at the shape rooted {} is missing",
            shape.root()
        )));
    }
    Ok(b.finish(SubobjectSpec::Full))
}

fn adjoin_scheme(
    b: &mut CertBuilder,
    p: &PercolationScheme,
    scheme: usize,
    marked: &Edge,
) -> Result<(), AnodyneError> {
    let spine = SpineData::of_scheme(p, marked);
    let mut segments = initial_segments(&p.tree);
    segments.sort_by_cached_key(|verts| {
        let (l, u) = spine.measure(verts);
        (l, u, verts.clone())
    });
    for verts in segments {
        let incl = segment_arrow(&p.tree, &verts)?;
        if b.contains(scheme, &incl)? {
            continue;
        }
        let top = spine
            .tops
            .iter()
            .zip(&spine.branches)
            .find(|(_, branch)| branch.is_subset(&verts))
            .map(|(top, _)| top.clone());
        let Some(xi) = top else {
            return Err(AnodyneError::CertificateInvalid(format!(
                "initial segment {verts:?} of scheme {scheme} has no contained spine \
                 yet is missing from the current subobject"
            )));
        };
        match characteristic_expand(b, scheme, &incl, &xi) {
            Ok(_) => {}
            Err(AnodyneError::NotCharacteristic(msg)) => {
                return Err(AnodyneError::CertificateInvalid(format!(
                    "characteristic check failed while adjoining scheme {scheme}: {msg}"
                )));
            }
            Err(other) => return Err(other),
        }
    }
    Ok(())
}

/// Replay a certificate against an ambient object. Check failures are part
/// of the result, never errors; the verifier reports the first failing step
/// and what broke there.
pub fn verify_certificate(cert: &AnodyneCertificate, ambient: &Ambient) -> Verification {
    match verify_inner(cert, ambient) {
        Ok(()) => Verification { ok: true, steps_checked: cert.steps.len(), failure: None },
        Err((steps_checked, failure)) => {
            Verification { ok: false, steps_checked, failure: Some(failure) }
        }
    }
}

fn verify_inner(cert: &AnodyneCertificate, ambient: &Ambient) -> Result<(), (usize, String)> {
    let mut cx =
        CellEngine::new(ambient).map_err(|e| (0, format!("ambient rejected: {e}")))?;
    let mut current = cx
        .materialize(&cert.start)
        .map_err(|e| (0, format!("start subobject rejected: {e}")))?;
    for (i, step) in cert.steps.iter().enumerate() {
        let err = |m: String| (i, format!("step {i}: {m}"));
        if step.scheme >= ambient.scheme_count() {
            return Err(err("scheme index out of range".to_string()));
        }
        if step.filler.target() != ambient.scheme_tree(step.scheme) {
            return Err(err("the filler does not land in its scheme tree".to_string()));
        }
        if step.filler.source() != &step.shape {
            return Err(err("the filler source differs from the declared shape".to_string()));
        }
        if !step.shape.is_inner(&step.xi) {
            return Err(err(format!(
                "not-an-inner-horn: edge {} is not inner in the shape",
                step.xi
            )));
        }
        if !step.filler.is_mono() {
            return Err(err("the filler is a degenerate dendrex".to_string()));
        }
        let faces: Vec<(FaceKind, OmegaArrow)> = maximal_faces(&step.shape)
            .into_iter()
            .filter(|(kind, _)| *kind != FaceKind::Inner(step.xi.clone()))
            .collect();
        if faces.len() != step.attaching.len() {
            return Err(err(format!(
                "the attaching family has {} cells, the horn has {} faces",
                step.attaching.len(),
                faces.len()
            )));
        }
        for (j, ((kind, delta), stored)) in faces.iter().zip(&step.attaching).enumerate() {
            let comp = delta
                .then(&step.filler)
                .map_err(|e| err(format!("face composite failed: {e}")))?;
            let (shape, key) =
                cx.cell(step.scheme, &comp).map_err(|e| err(format!("face cell failed: {e}")))?;
            if (&shape, &key) != (&stored.0, &stored.1) {
                return Err(err(format!(
                    "attaching face {j} ({kind:?}) disagrees with the replayed cell"
                )));
            }
            if !current.contains(&shape, &key) {
                return Err(err(format!(
                    "attaching face {j} ({kind:?}) is not in the current subobject"
                )));
            }
        }
        let (fsh, fkey) = cx
            .cell(step.scheme, &step.filler)
            .map_err(|e| err(format!("filler cell failed: {e}")))?;
        if (&fsh, &fkey) != (&step.cell.0, &step.cell.1) {
            return Err(err("the recorded dendrex disagrees with the replayed filler".to_string()));
        }
        if current.contains(&fsh, &fkey) {
            return Err(err("the filler is already present, the step adjoins nothing".to_string()));
        }
        let image = cx
            .image(step.scheme, &step.filler)
            .map_err(|e| err(format!("image computation failed: {e}")))?;
        let horn = cx
            .horn_image(step.scheme, &step.filler, &step.xi)
            .map_err(|e| err(format!("horn image computation failed: {e}")))?;
        let overlap = image.meet(&current);
        if let Some((shape, _)) = overlap.first_cell_not_in(&horn) {
            return Err(err(format!(
                "the pushout is not exact: a cell at the shape rooted {} lies in the current \
                 subobject and the image but not in the horn",
                shape.root()
            )));
        }
        current.absorb(image);
    }
    let end = cx
        .materialize(&cert.end)
        .map_err(|e| (cert.steps.len(), format!("end subobject rejected: {e}")))?;
    if current != end {
        let msg = if let Some((shape, _)) = end.first_cell_not_in(&current) {
            format!(
                "the end subobject has a cell at the shape rooted {} the steps never reach",
                shape.root()
            )
        } else if let Some((shape, _)) = current.first_cell_not_in(&end) {
            format!(
                "the steps reach a cell at the shape rooted {} outside the end subobject",
                shape.root()
            )
        } else {
            "the replayed subobject differs from the declared end".to_string()
        };
        return Err((cert.steps.len(), msg));
    }
    Ok(())
}
