//! Finite coloured symmetric operads, the free operads on trees, and
//! operad maps.
//!
//! A [`ColoredOperad`] is a finite table: colours, operations with
//! signatures over the colours, a unit per colour, a partial `o_i`
//! composition table and a symmetric group action. Operation arities are
//! bounded by a per-operad cap, and composition is defined exactly for
//! colour-compatible pairs whose composite stays within the cap; the
//! [`ColoredOperad::validate`] scan checks the unit, associativity and
//! equivariance laws exhaustively on the stored tables.
//!
//! Every tree generates a free operad whose operations are the pairs
//! (subtree root, ordered leaf tuple); see [`omega_operad`]. Its symmetric
//! action reorders tuples and is stored implicitly, while user-supplied
//! operads carry explicit action tables. Planar operads are the ones with
//! no action at all, and [`symmetrize`] freely adds one.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::omega::OmegaArrow;
use crate::tree::{Edge, Tree};

pub type Colour = String;
pub type OpName = String;
/// A permutation of `0..n` stored as its image array: `p . perm` has
/// `inputs[k] = p.inputs[perm[k]]`.
pub type Perm = Vec<usize>;

/// Default bound on operation arities; chosen to keep exhaustive hom
/// enumeration affordable.
pub const DEFAULT_ARITY_CAP: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OperadError {
    #[error("duplicate-colour: {0:?}")]
    DuplicateColour(Colour),
    #[error("unknown-colour: {0:?} in {1}")]
    UnknownColour(Colour, String),
    #[error("duplicate-op: {0:?}")]
    DuplicateOp(OpName),
    #[error("unknown-op: {0:?} in {1}")]
    UnknownOp(OpName, String),
    #[error("arity-exceeds-cap: op {0:?} has arity {1}, cap is {2}")]
    ArityExceedsCap(OpName, usize, usize),
    #[error("bad-unit: {0}")]
    BadUnit(String),
    #[error("bad-composition-entry: {0}")]
    BadComposition(String),
    #[error("bad-symmetry-entry: {0}")]
    BadSymmetry(String),
}

/// A named operation with a signature over the operad's colours.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Operation {
    pub name: OpName,
    pub inputs: Vec<Colour>,
    pub output: Colour,
}

impl Operation {
    pub fn arity(&self) -> usize {
        self.inputs.len()
    }
}

/// How the symmetric groups act: not at all (planar operads), through an
/// explicit table, or by reordering leaf tuples (free operads on trees,
/// where storing the full table per operation is wasteful).
#[derive(Clone, Debug, PartialEq, Eq)]
enum SymAction {
    Planar,
    Table(BTreeMap<(OpName, Perm), OpName>),
    Reorder(BTreeMap<OpName, (Edge, Vec<Edge>)>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColoredOperad {
    name: String,
    colours: Vec<Colour>,
    ops: Vec<Operation>,
    index: BTreeMap<OpName, usize>,
    units: BTreeMap<Colour, OpName>,
    composition: BTreeMap<(OpName, usize, OpName), OpName>,
    symmetries: SymAction,
    max_arity: usize,
}

fn identity_perm(n: usize) -> Perm {
    (0..n).collect()
}

/// All permutations of `0..n` in lexicographic order; `n = 0` gives the
/// single empty permutation.
pub fn all_perms(n: usize) -> Vec<Perm> {
    (0..n).permutations(n).collect()
}

/// Right-action composition: acting by `sigma` then `tau` equals acting by
/// this.
fn perm_compose(sigma: &[usize], tau: &[usize]) -> Perm {
    tau.iter().map(|&k| sigma[k]).collect()
}

fn adjacent_transposition(n: usize, j: usize) -> Perm {
    let mut p = identity_perm(n);
    p.swap(j, j + 1);
    p
}

/// The permutation relating `(p . sigma) o_i q` to `p o_{sigma[i]} q`,
/// where `p` has arity `n = sigma.len()` and `q` has arity `m`.
fn block_perm_left(sigma: &[usize], i: usize, m: usize) -> Perm {
    let n = sigma.len();
    let si = sigma[i];
    let place = |k: usize| if k < si { k } else { k + m - 1 };
    let mut rho = Vec::with_capacity(n + m - 1);
    for &sj in &sigma[..i] {
        rho.push(place(sj));
    }
    for j in 0..m {
        rho.push(si + j);
    }
    for &sj in &sigma[i + 1..] {
        rho.push(place(sj));
    }
    rho
}

/// The permutation relating `p o_i (q . tau)` to `p o_i q`, where `p` has
/// arity `n` and `tau` permutes the `m` inputs of `q`.
fn block_perm_right(n: usize, i: usize, tau: &[usize]) -> Perm {
    let m = tau.len();
    let mut iota = Vec::with_capacity(n + m - 1);
    iota.extend(0..i);
    iota.extend(tau.iter().map(|&k| i + k));
    iota.extend((i + m)..(n + m - 1));
    iota
}

impl ColoredOperad {
    /// Validate and assemble an operad table. `symmetries: None` builds a
    /// planar operad. Unit composition rows and identity permutations are
    /// filled in automatically when absent; everything supplied is checked
    /// for structural sense (names resolve, signatures match), while the
    /// operad laws themselves are the business of [`Self::validate`].
    pub fn new(
        name: impl Into<String>,
        colours: Vec<Colour>,
        ops: Vec<Operation>,
        units: BTreeMap<Colour, OpName>,
        composition: BTreeMap<(OpName, usize, OpName), OpName>,
        symmetries: Option<BTreeMap<(OpName, Perm), OpName>>,
        max_arity: usize,
    ) -> Result<ColoredOperad, OperadError> {
        let mut seen = BTreeSet::new();
        for c in &colours {
            if !seen.insert(c.clone()) {
                return Err(OperadError::DuplicateColour(c.clone()));
            }
        }
        let mut colours = colours;
        colours.sort();
        let mut ops = ops;
        ops.sort_by(|a, b| a.name.cmp(&b.name));
        let mut index = BTreeMap::new();
        for (ix, op) in ops.iter().enumerate() {
            if index.insert(op.name.clone(), ix).is_some() {
                return Err(OperadError::DuplicateOp(op.name.clone()));
            }
            if op.arity() > max_arity {
                return Err(OperadError::ArityExceedsCap(op.name.clone(), op.arity(), max_arity));
            }
            for c in op.inputs.iter().chain(std::iter::once(&op.output)) {
                if !seen.contains(c) {
                    return Err(OperadError::UnknownColour(
                        c.clone(),
                        format!("signature of {:?}", op.name),
                    ));
                }
            }
        }
        for (c, u) in &units {
            if !seen.contains(c) {
                return Err(OperadError::UnknownColour(c.clone(), "units".into()));
            }
            let op = index
                .get(u)
                .map(|&ix| &ops[ix])
                .ok_or_else(|| OperadError::UnknownOp(u.clone(), "units".into()))?;
            if op.inputs != vec![c.clone()] || op.output != *c {
                return Err(OperadError::BadUnit(format!(
                    "unit {u:?} of colour {c:?} does not have signature ({c}; {c})"
                )));
            }
        }
        for c in &colours {
            if !units.contains_key(c) {
                return Err(OperadError::BadUnit(format!("colour {c:?} has no unit")));
            }
        }
        let mut composition = composition;
        for ((p, i, q), r) in composition.clone() {
            let (p_op, q_op, r_op) = match (index.get(&p), index.get(&q), index.get(&r)) {
                (Some(&a), Some(&b), Some(&c)) => (&ops[a], &ops[b], &ops[c]),
                _ => {
                    return Err(OperadError::UnknownOp(
                        format!("{p} / {q} / {r}"),
                        "composition".into(),
                    ))
                }
            };
            if i >= p_op.arity() || p_op.inputs[i] != q_op.output {
                return Err(OperadError::BadComposition(format!(
                    "({p:?}, {i}, {q:?}) is not colour-compatible"
                )));
            }
            let mut want = p_op.inputs.clone();
            want.splice(i..=i, q_op.inputs.iter().cloned());
            if r_op.inputs != want || r_op.output != p_op.output {
                return Err(OperadError::BadComposition(format!(
                    "({p:?}, {i}, {q:?}) -> {r:?} has the wrong signature"
                )));
            }
        }
        // Unit rows are forced by the laws; fill the missing ones.
        for op in &ops {
            let left = (units[&op.output].clone(), 0usize, op.name.clone());
            composition.entry(left).or_insert_with(|| op.name.clone());
            for (i, c) in op.inputs.iter().enumerate() {
                let right = (op.name.clone(), i, units[c].clone());
                composition.entry(right).or_insert_with(|| op.name.clone());
            }
        }
        let symmetries = match symmetries {
            None => SymAction::Planar,
            Some(mut table) => {
                for ((p, perm), r) in table.clone() {
                    let (p_op, r_op) = match (index.get(&p), index.get(&r)) {
                        (Some(&a), Some(&b)) => (&ops[a], &ops[b]),
                        _ => {
                            return Err(OperadError::UnknownOp(
                                format!("{p} / {r}"),
                                "symmetries".into(),
                            ))
                        }
                    };
                    let n = p_op.arity();
                    let mut hit = vec![false; n];
                    if perm.len() != n || !perm.iter().all(|&k| k < n && !std::mem::replace(&mut hit[k], true)) {
                        return Err(OperadError::BadSymmetry(format!(
                            "{perm:?} is not a permutation of the inputs of {p:?}"
                        )));
                    }
                    let want: Vec<Colour> = perm.iter().map(|&k| p_op.inputs[k].clone()).collect();
                    if r_op.inputs != want || r_op.output != p_op.output {
                        return Err(OperadError::BadSymmetry(format!(
                            "({p:?}, {perm:?}) -> {r:?} has the wrong signature"
                        )));
                    }
                }
                for op in &ops {
                    let key = (op.name.clone(), identity_perm(op.arity()));
                    table.entry(key).or_insert_with(|| op.name.clone());
                }
                SymAction::Table(table)
            }
        };
        Ok(ColoredOperad {
            name: name.into(),
            colours,
            ops,
            index,
            units,
            composition,
            symmetries,
            max_arity,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn colours(&self) -> &[Colour] {
        &self.colours
    }

    /// Operations sorted by name.
    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn op(&self, name: &str) -> Option<&Operation> {
        self.index.get(name).map(|&ix| &self.ops[ix])
    }

    pub fn unit(&self, colour: &str) -> Option<&OpName> {
        self.units.get(colour)
    }

    pub fn is_unit(&self, op: &str) -> bool {
        self.op(op).is_some_and(|o| self.units.get(&o.output).map(|u| u.as_str()) == Some(op))
    }

    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    pub fn is_planar(&self) -> bool {
        matches!(self.symmetries, SymAction::Planar)
    }

    /// The composite `p o_i q` when the table defines it.
    pub fn compose(&self, p: &str, i: usize, q: &str) -> Option<&OpName> {
        self.composition.get(&(p.to_string(), i, q.to_string()))
    }

    /// Every recorded composite, keyed by `(p, slot, q)`.
    pub fn composition_table(&self) -> &BTreeMap<(OpName, usize, OpName), OpName> {
        &self.composition
    }

    /// The symmetric action materialized as a table, one entry per
    /// operation and permutation of its arity. Planar operads contribute
    /// only the identity rows.
    pub fn symmetry_table(&self) -> BTreeMap<(OpName, Perm), OpName> {
        let mut table = BTreeMap::new();
        for op in &self.ops {
            for perm in all_perms(op.arity()) {
                if let Some(image) = self.act(&op.name, &perm) {
                    table.insert((op.name.clone(), perm), image);
                }
            }
        }
        table
    }

    /// The action `p . perm`. Planar operads only act by identities; the
    /// reorder backend computes the permuted tuple's operation directly.
    pub fn act(&self, p: &str, perm: &[usize]) -> Option<OpName> {
        let op = self.op(p)?;
        if perm.len() != op.arity() {
            return None;
        }
        match &self.symmetries {
            SymAction::Planar => {
                if perm == identity_perm(perm.len()) {
                    Some(p.to_string())
                } else {
                    None
                }
            }
            SymAction::Table(t) => t.get(&(p.to_string(), perm.to_vec())).cloned(),
            SymAction::Reorder(data) => {
                let (root, tuple) = data.get(p)?;
                let permuted: Vec<Edge> = perm.iter().map(|&k| tuple[k].clone()).collect();
                let name = tuple_op_name(root, &permuted);
                self.index.contains_key(&name).then_some(name)
            }
        }
    }

    /// Operations with the given signature, in name order.
    pub fn ops_with_signature(&self, inputs: &[Colour], output: &str) -> Vec<&Operation> {
        self.ops
            .iter()
            .filter(|o| o.inputs.as_slice() == inputs && o.output == output)
            .collect()
    }

    /// Does every non-identity permutation move every operation?
    pub fn is_sigma_free(&self) -> bool {
        self.ops.iter().all(|op| {
            all_perms(op.arity())
                .into_iter()
                .filter(|s| *s != identity_perm(op.arity()))
                .all(|s| self.act(&op.name, &s).as_deref() != Some(op.name.as_str()))
        })
    }

    /// Exhaustive law scan. Returns one string per violated instance;
    /// lawful tables give an empty list.
    ///
    /// Composition is required to be total within the arity cap and checked
    /// for unit laws plus nested and disjoint associativity where all the
    /// participating composites are defined. The symmetric action (when
    /// present) is checked to be total, to satisfy the identity and
    /// Coxeter relations on every operation, to be consistent along
    /// canonical transposition chains (which pins every table entry to the
    /// generator entries), and to be compatible with composition under the
    /// adjacent-transposition instances of the equivariance laws; the
    /// general instances follow from these.
    pub fn validate(&self) -> Vec<String> {
        let mut bad = Vec::new();
        self.validate_units(&mut bad);
        self.validate_composition(&mut bad);
        if !self.is_planar() {
            self.validate_action(&mut bad);
            self.validate_equivariance(&mut bad);
        }
        bad
    }

    fn validate_units(&self, bad: &mut Vec<String>) {
        for op in &self.ops {
            let u = &self.units[&op.output];
            if self.compose(u, 0, &op.name).map(|r| r.as_str()) != Some(op.name.as_str()) {
                bad.push(format!("left-unit: {u:?} o_0 {:?} != {:?}", op.name, op.name));
            }
            for (i, c) in op.inputs.iter().enumerate() {
                let u = &self.units[c];
                if self.compose(&op.name, i, u).map(|r| r.as_str()) != Some(op.name.as_str()) {
                    bad.push(format!("right-unit: {:?} o_{i} {u:?} != {:?}", op.name, op.name));
                }
            }
        }
    }

    fn validate_composition(&self, bad: &mut Vec<String>) {
        // Totality within the cap.
        for p in &self.ops {
            for (i, c) in p.inputs.iter().enumerate() {
                for q in self.ops.iter().filter(|q| q.output == *c) {
                    if p.arity() + q.arity() - 1 <= self.max_arity
                        && self.compose(&p.name, i, &q.name).is_none()
                    {
                        bad.push(format!(
                            "composition-missing: ({:?}, {i}, {:?})",
                            p.name, q.name
                        ));
                    }
                }
            }
        }
        // Nested associativity: r into slot j of q, q into slot i of p.
        for ((p, i, q), x) in &self.composition {
            let q_op = &self.ops[self.index[q]];
            for j in 0..q_op.arity() {
                for r in self.ops.iter().filter(|r| r.output == q_op.inputs[j]) {
                    let (Some(qr), Some(lhs)) =
                        (self.compose(q, j, &r.name), self.compose(x, i + j, &r.name))
                    else {
                        continue;
                    };
                    match self.compose(p, *i, qr) {
                        Some(rhs) if rhs == lhs => {}
                        Some(rhs) => bad.push(format!(
                            "assoc-nested: (({p:?} o_{i} {q:?}) o_{} {:?}) = {lhs:?} but \
                             {p:?} o_{i} ({q:?} o_{j} {:?}) = {rhs:?}",
                            i + j,
                            r.name,
                            r.name
                        )),
                        None => {}
                    }
                }
            }
        }
        // Disjoint associativity: q into slot i, r into a later slot l.
        for ((p, i, q), x) in &self.composition {
            let p_op = &self.ops[self.index[p]];
            let m = self.ops[self.index[q]].arity();
            for l in (i + 1)..p_op.arity() {
                for r in self.ops.iter().filter(|r| r.output == p_op.inputs[l]) {
                    let (Some(lhs), Some(pr)) =
                        (self.compose(x, l + m - 1, &r.name), self.compose(p, l, &r.name))
                    else {
                        continue;
                    };
                    match self.compose(pr, *i, q) {
                        Some(rhs) if rhs == lhs => {}
                        Some(rhs) => bad.push(format!(
                            "assoc-disjoint: ({p:?} o_{i} {q:?}) o_{} {:?} = {lhs:?} but \
                             ({p:?} o_{l} {:?}) o_{i} {q:?} = {rhs:?}",
                            l + m - 1,
                            r.name,
                            r.name
                        )),
                        None => {}
                    }
                }
            }
        }
    }

    fn validate_action(&self, bad: &mut Vec<String>) {
        for op in &self.ops {
            let n = op.arity();
            let id = identity_perm(n);
            match self.act(&op.name, &id) {
                Some(r) if r == op.name => {}
                _ => bad.push(format!("sym-identity: {:?} . id != {:?}", op.name, op.name)),
            }
            // Totality plus chain consistency: walk each permutation back
            // to the identity along descents.
            for sigma in all_perms(n) {
                let Some(image) = self.act(&op.name, &sigma) else {
                    bad.push(format!("sym-missing: ({:?}, {sigma:?})", op.name));
                    continue;
                };
                if let Some(j) = (0..n.saturating_sub(1)).find(|&j| sigma[j] > sigma[j + 1]) {
                    let t = adjacent_transposition(n, j);
                    let parent = perm_compose(&sigma, &t);
                    let via = self
                        .act(&op.name, &parent)
                        .and_then(|x| self.act(&x, &t));
                    if via.as_ref() != Some(&image) {
                        bad.push(format!(
                            "sym-chain: ({:?}, {sigma:?}) disagrees with acting by {parent:?} \
                             then swapping {j},{}",
                            op.name,
                            j + 1
                        ));
                    }
                }
            }
            // Coxeter relations pointwise make the generator actions an
            // honest group action.
            let act2 = |s: &Perm, t: &Perm| -> Option<OpName> {
                self.act(&op.name, s).and_then(|x| self.act(&x, t))
            };
            for j in 0..n.saturating_sub(1) {
                let s = adjacent_transposition(n, j);
                if act2(&s, &s).as_deref() != Some(op.name.as_str()) {
                    bad.push(format!("sym-coxeter: swap {j},{} is not an involution on {:?}", j + 1, op.name));
                }
                if j + 2 < n {
                    let t = adjacent_transposition(n, j + 1);
                    let lhs = act2(&s, &t).and_then(|x| self.act(&x, &s));
                    let rhs = act2(&t, &s).and_then(|x| self.act(&x, &t));
                    if lhs != rhs || lhs.is_none() {
                        bad.push(format!(
                            "sym-coxeter: braid relation {j},{} fails on {:?}",
                            j + 1,
                            op.name
                        ));
                    }
                }
                for k in (j + 2)..n.saturating_sub(1) {
                    let t = adjacent_transposition(n, k);
                    if act2(&s, &t) != act2(&t, &s) {
                        bad.push(format!(
                            "sym-coxeter: swaps {j} and {k} do not commute on {:?}",
                            op.name
                        ));
                    }
                }
            }
        }
    }

    fn validate_equivariance(&self, bad: &mut Vec<String>) {
        for ((p, i, q), x) in &self.composition {
            let n = self.ops[self.index[p]].arity();
            let m = self.ops[self.index[q]].arity();
            // Left law on adjacent transpositions s of p's inputs, read off
            // this entry: (p.s) o_{s[i]} q = (p o_i q) . rho(s, s[i], m),
            // using that s is an involution so slot i of p sits at s[i] of
            // p.s.
            for j in 0..n.saturating_sub(1) {
                let s = adjacent_transposition(n, j);
                let Some(ps) = self.act(p, &s) else { continue };
                let k = s[*i];
                let lhs = self.compose(&ps, k, q).cloned();
                let rhs = self.act(x, &block_perm_left(&s, k, m));
                if lhs != rhs || lhs.is_none() {
                    bad.push(format!(
                        "equivariance-left: ({p:?} . swap {j},{}) o_{k} {q:?} mismatch",
                        j + 1
                    ));
                }
            }
            // Right law on adjacent transpositions t of q's inputs:
            // p o_i (q.t) = (p o_i q) . iota(n, i, t).
            for j in 0..m.saturating_sub(1) {
                let t = adjacent_transposition(m, j);
                let Some(qt) = self.act(q, &t) else { continue };
                let lhs = self.compose(p, *i, &qt).cloned();
                let rhs = self.act(x, &block_perm_right(n, *i, &t));
                if lhs != rhs || lhs.is_none() {
                    bad.push(format!(
                        "equivariance-right: {p:?} o_{i} ({q:?} . swap {j},{}) mismatch",
                        j + 1
                    ));
                }
            }
        }
        bad.sort();
        bad.dedup();
    }

    /// Explicit-table JSON dump, expanding implicit actions. The
    /// `sigma_free` flag is computed, not asserted.
    pub fn to_json(&self) -> serde_json::Value {
        let comp: Vec<_> = self
            .composition
            .iter()
            .map(|((p, i, q), r)| json!([p, i, q, r]))
            .collect();
        let mut sym = Vec::new();
        if !self.is_planar() {
            for op in &self.ops {
                for perm in all_perms(op.arity()) {
                    if let Some(r) = self.act(&op.name, &perm) {
                        sym.push(json!([op.name, perm, r]));
                    }
                }
            }
        }
        json!({
            "name": self.name,
            "colours": self.colours,
            "max_arity": self.max_arity,
            "planar": self.is_planar(),
            "sigma_free": self.is_sigma_free(),
            "ops": self.ops,
            "units": self.units,
            "composition": comp,
            "symmetries": sym,
        })
    }
}

fn tuple_op_name(root: &str, tuple: &[Edge]) -> OpName {
    format!("{root}[{}]", tuple.join(","))
}

/// The free operad on a tree, arity-capped at [`DEFAULT_ARITY_CAP`].
/// Colours are the edges; operations are the pairs (subtree root, ordered
/// leaf tuple); composition grafts subtrees; the symmetric action reorders
/// tuples.
pub fn omega_operad(t: &Tree) -> ColoredOperad {
    omega_operad_capped(t, DEFAULT_ARITY_CAP)
}

/// [`omega_operad`] with an explicit arity cap.
pub fn omega_operad_capped(t: &Tree, cap: usize) -> ColoredOperad {
    build_tree_operad(t, cap, true)
}

/// The planar free operad on a tree: subtree cuts in planar order only, no
/// symmetric action.
pub fn omega_operad_planar(t: &Tree) -> ColoredOperad {
    build_tree_operad(t, DEFAULT_ARITY_CAP, false)
}

fn build_tree_operad(t: &Tree, cap: usize, symmetric: bool) -> ColoredOperad {
    let colours: Vec<Colour> = t.edges();
    let mut ops = Vec::new();
    let mut data: BTreeMap<OpName, (Edge, Vec<Edge>)> = BTreeMap::new();
    let mut units = BTreeMap::new();
    for r in t.edges() {
        for cut in t.subtree_cuts(&r) {
            if cut.len() > cap {
                continue;
            }
            let orderings: Vec<Vec<Edge>> = if symmetric {
                all_perms(cut.len())
                    .into_iter()
                    .map(|p| p.iter().map(|&k| cut[k].clone()).collect())
                    .collect()
            } else {
                vec![cut.clone()]
            };
            for tuple in orderings {
                let name = tuple_op_name(&r, &tuple);
                if data.contains_key(&name) {
                    continue;
                }
                ops.push(Operation { name: name.clone(), inputs: tuple.clone(), output: r.clone() });
                data.insert(name.clone(), (r.clone(), tuple.clone()));
                if tuple.len() == 1 && tuple[0] == r {
                    units.insert(r.clone(), name);
                }
            }
        }
    }
    // Grafting subtrees composes cuts; the composite is always another cut,
    // so the table is total within the cap.
    let mut composition = BTreeMap::new();
    for (pname, (_, ptuple)) in &data {
        for (i, c) in ptuple.iter().enumerate() {
            for (qname, (qroot, qtuple)) in &data {
                if qroot != c {
                    continue;
                }
                if ptuple.len() + qtuple.len() - 1 > cap {
                    continue;
                }
                let mut spliced = ptuple.clone();
                spliced.splice(i..=i, qtuple.iter().cloned());
                let (root, _) = &data[pname];
                let rname = tuple_op_name(root, &spliced);
                debug_assert!(data.contains_key(&rname), "grafted cut must be a cut");
                composition.insert((pname.clone(), i, qname.clone()), rname);
            }
        }
    }
    let max_arity = ops.iter().map(Operation::arity).max().unwrap_or(0).max(1).min(cap.max(1));
    let mut operad = ColoredOperad::new(
        format!("Omega({})", t.root()),
        colours,
        ops,
        units,
        composition,
        symmetric.then(BTreeMap::new),
        max_arity,
    )
    .expect("free tree operad tables are structurally sound");
    if symmetric {
        operad.symmetries = SymAction::Reorder(data);
    }
    operad
}

/// Freely add a symmetric action to a planar operad: operations become
/// (operation, permutation) pairs, with the identity-permutation copy
/// keeping the original name.
pub fn symmetrize(p: &ColoredOperad) -> ColoredOperad {
    assert!(p.is_planar(), "symmetrize takes a planar operad");
    let decorated = |name: &str, perm: &[usize]| -> OpName {
        if *perm == identity_perm(perm.len()) {
            name.to_string()
        } else {
            format!("{name}@{}", perm.iter().join(""))
        }
    };
    let mut ops = Vec::new();
    let mut sym = BTreeMap::new();
    for op in p.ops() {
        let n = op.arity();
        for sigma in all_perms(n) {
            let name = decorated(&op.name, &sigma);
            let inputs = sigma.iter().map(|&k| op.inputs[k].clone()).collect();
            ops.push(Operation { name: name.clone(), inputs, output: op.output.clone() });
            for tau in all_perms(n) {
                sym.insert((name.clone(), tau.clone()), decorated(&op.name, &perm_compose(&sigma, &tau)));
            }
        }
    }
    let mut composition = BTreeMap::new();
    for op_p in p.ops() {
        let n = op_p.arity();
        for sigma in all_perms(n) {
            for (i, _) in sigma.iter().enumerate() {
                for op_q in p.ops() {
                    let m = op_q.arity();
                    if op_q.output != op_p.inputs[sigma[i]] {
                        continue;
                    }
                    let Some(planar) = p.compose(&op_p.name, sigma[i], &op_q.name) else {
                        continue;
                    };
                    for tau in all_perms(m) {
                        // (p.sigma) o_i (q.tau)
                        //   = (p o_{sigma[i]} q) . (iota(n, sigma[i], tau) o rho(sigma, i, m))
                        let iota = block_perm_right(n, sigma[i], &tau);
                        let rho = block_perm_left(&sigma, i, m);
                        let gamma = perm_compose(&iota, &rho);
                        composition.insert(
                            (decorated(&op_p.name, &sigma), i, decorated(&op_q.name, &tau)),
                            decorated(planar, &gamma),
                        );
                    }
                }
            }
        }
    }
    let units = p.units.clone();
    ColoredOperad::new(
        format!("Symm({})", p.name()),
        p.colours.clone(),
        ops,
        units,
        composition,
        Some(sym),
        p.max_arity(),
    )
    .expect("symmetrization produces sound tables")
}

/// A map of coloured operads, stored as its colour and operation
/// assignments; check it against concrete operads with
/// [`check_operad_map`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OperadMap {
    pub colour_map: BTreeMap<Colour, Colour>,
    pub op_map: BTreeMap<OpName, OpName>,
}

impl OperadMap {
    pub fn identity(p: &ColoredOperad) -> OperadMap {
        OperadMap {
            colour_map: p.colours().iter().map(|c| (c.clone(), c.clone())).collect(),
            op_map: p.ops().iter().map(|o| (o.name.clone(), o.name.clone())).collect(),
        }
    }

    /// `second` after `self`.
    pub fn then(&self, second: &OperadMap) -> OperadMap {
        OperadMap {
            colour_map: self
                .colour_map
                .iter()
                .map(|(a, b)| (a.clone(), second.colour_map[b].clone()))
                .collect(),
            op_map: self
                .op_map
                .iter()
                .map(|(a, b)| (a.clone(), second.op_map[b].clone()))
                .collect(),
        }
    }
}

/// Violations of the operad-map conditions for `m: p -> q`; empty means
/// `m` is a map.
pub fn check_operad_map(p: &ColoredOperad, q: &ColoredOperad, m: &OperadMap) -> Vec<String> {
    let mut bad = Vec::new();
    for c in p.colours() {
        match m.colour_map.get(c) {
            Some(d) if q.colours().contains(d) => {}
            _ => bad.push(format!("colour-map: {c:?} has no valid image")),
        }
    }
    if bad.is_empty() {
        for op in p.ops() {
            let Some(img_name) = m.op_map.get(&op.name) else {
                bad.push(format!("op-map: {:?} has no image", op.name));
                continue;
            };
            let Some(img) = q.op(img_name) else {
                bad.push(format!("op-map: image {img_name:?} of {:?} is not an op", op.name));
                continue;
            };
            let want: Vec<Colour> = op.inputs.iter().map(|c| m.colour_map[c].clone()).collect();
            if img.inputs != want || img.output != m.colour_map[&op.output] {
                bad.push(format!("signature: image of {:?} has the wrong signature", op.name));
            }
        }
    }
    if !bad.is_empty() {
        return bad;
    }
    for (c, u) in &p.units {
        if m.op_map[u] != *q.unit(&m.colour_map[c]).expect("image colour has a unit") {
            bad.push(format!("unit: image of {u:?} is not the unit of {:?}", m.colour_map[c]));
        }
    }
    for ((a, i, b), c) in &p.composition {
        match q.compose(&m.op_map[a], *i, &m.op_map[b]) {
            Some(r) if *r == m.op_map[c] => {}
            _ => bad.push(format!("composition: image of ({a:?}, {i}, {b:?}) mismatch")),
        }
    }
    if !p.is_planar() {
        for op in p.ops() {
            for sigma in all_perms(op.arity()) {
                let Some(moved) = p.act(&op.name, &sigma) else { continue };
                match q.act(&m.op_map[&op.name], &sigma) {
                    Some(r) if r == m.op_map[&moved] => {}
                    _ => bad.push(format!(
                        "symmetry: image of ({:?}, {sigma:?}) mismatch",
                        op.name
                    )),
                }
            }
        }
    }
    bad
}

/// Is `m` an isomorphism `p -> q`: a map, bijective on colours and
/// operations, whose inverse is also a map.
pub fn is_operad_iso(p: &ColoredOperad, q: &ColoredOperad, m: &OperadMap) -> bool {
    if !check_operad_map(p, q, m).is_empty() {
        return false;
    }
    let cm: BTreeSet<&Colour> = m.colour_map.values().collect();
    let om: BTreeSet<&OpName> = m.op_map.values().collect();
    if cm.len() != p.colours().len()
        || cm.len() != q.colours().len()
        || om.len() != p.ops().len()
        || om.len() != q.ops().len()
    {
        return false;
    }
    let inv = OperadMap {
        colour_map: m.colour_map.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
        op_map: m.op_map.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
    };
    check_operad_map(q, p, &inv).is_empty()
}

/// All operad maps `p -> q`, deterministically ordered.
///
/// Backtracks over the operations of `p` (non-units first, then units),
/// growing the colour map from signatures as it goes; units of colours not
/// touched by any other operation are assigned last, ranging over all
/// colours of `q`. Composition rows are checked as soon as all three
/// participants are assigned, the symmetric action at the leaves.
pub fn hom_operads(p: &ColoredOperad, q: &ColoredOperad) -> Vec<OperadMap> {
    let mut order: Vec<&Operation> = p.ops().iter().filter(|o| !p.is_unit(&o.name)).collect();
    order.extend(p.ops().iter().filter(|o| p.is_unit(&o.name)));
    let mut found = Vec::new();
    let mut colour_map = BTreeMap::new();
    let mut op_map = BTreeMap::new();
    hom_search(p, q, &order, 0, &mut colour_map, &mut op_map, &mut found);
    found
}

fn extend_colour_map(
    colour_map: &BTreeMap<Colour, Colour>,
    from: &Operation,
    to: &Operation,
) -> Option<Vec<(Colour, Colour)>> {
    let mut added = Vec::new();
    let mut local: BTreeMap<&Colour, &Colour> = BTreeMap::new();
    let pairs = from
        .inputs
        .iter()
        .zip(to.inputs.iter())
        .chain(std::iter::once((&from.output, &to.output)));
    for (a, b) in pairs {
        match colour_map.get(a).or_else(|| local.get(a).copied()) {
            Some(existing) if existing == b => {}
            Some(_) => return None,
            None => {
                local.insert(a, b);
                added.push((a.clone(), b.clone()));
            }
        }
    }
    added.sort();
    added.dedup();
    Some(added)
}

fn hom_search(
    p: &ColoredOperad,
    q: &ColoredOperad,
    order: &[&Operation],
    k: usize,
    colour_map: &mut BTreeMap<Colour, Colour>,
    op_map: &mut BTreeMap<OpName, OpName>,
    found: &mut Vec<OperadMap>,
) {
    if k == order.len() {
        let cand = OperadMap { colour_map: colour_map.clone(), op_map: op_map.clone() };
        if check_operad_map(p, q, &cand).is_empty() {
            found.push(cand);
        }
        return;
    }
    let op = order[k];
    let want_unit = p.is_unit(&op.name);
    for cand in q.ops() {
        if cand.arity() != op.arity() {
            continue;
        }
        if want_unit && !q.is_unit(&cand.name) {
            continue;
        }
        let Some(added) = extend_colour_map(colour_map, op, cand) else {
            continue;
        };
        for (a, b) in &added {
            colour_map.insert(a.clone(), b.clone());
        }
        op_map.insert(op.name.clone(), cand.name.clone());
        // Composition rows with all participants assigned must already map
        // correctly; pruning here keeps the search from going exponential.
        let consistent = p.composition.iter().all(|((a, i, b), c)| {
            match (op_map.get(a), op_map.get(b), op_map.get(c)) {
                (Some(ma), Some(mb), Some(mc)) => {
                    q.compose(ma, *i, mb).map(|r| r.as_str()) == Some(mc.as_str())
                }
                _ => true,
            }
        });
        if consistent {
            hom_search(p, q, order, k + 1, colour_map, op_map, found);
        }
        op_map.remove(&op.name);
        for (a, _) in &added {
            colour_map.remove(a);
        }
    }
}

/// The operad map `Omega(S) -> Omega(T)` induced by an arrow of trees:
/// colours map along the edge map, and a cut maps to the image cut.
pub fn omega_operad_map(f: &OmegaArrow) -> OperadMap {
    let src = omega_operad(f.source());
    let colour_map: BTreeMap<Colour, Colour> =
        f.edge_map().iter().map(|(a, b)| (a.clone(), b.clone())).collect();
    let op_map = src
        .ops()
        .iter()
        .map(|op| {
            let tuple: Vec<Edge> = op.inputs.iter().map(|e| f.apply(e).clone()).collect();
            (op.name.clone(), tuple_op_name(f.apply(&op.output), &tuple))
        })
        .collect();
    OperadMap { colour_map, op_map }
}
