//! A computational engine for dendroidal sets.
//!
//! Dendroidal sets are presheaves on the category of finite rooted trees,
//! generalizing simplicial sets from linear orders to trees. They model
//! coloured operads up to homotopy the way simplicial sets model categories:
//! the nerve of an operad is a dendroidal set, inner Kan complexes play the
//! role of quasicategories, and the Boardman-Vogt tensor product of operads
//! induces a tensor product of dendroidal sets.
//!
//! The crate implements the finite, exhaustively checkable core of that
//! theory:
//!
//! * [`tree`]: finite rooted trees, grafting, signatures, canonical forms
//!   and bounded enumeration.
//! * [`omega`]: arrows of the tree category as edge maps, face and
//!   degeneracy generators, composition, factorization and exhaustive hom
//!   set enumeration.
//! * [`operad`]: finite coloured operads with tabulated composition, the
//!   free operad on a tree, operad maps and validation.
//! * [`dset`]: dendroidal sets as bounded presheaves with table, nerve and
//!   representable backends, subobjects, boundaries, horns, normality and
//!   skeletal filtrations.
//! * [`kan`]: inner Kan conditions, horn filling, homotopy of dendrices,
//!   the homotopy operad of an inner Kan dendroidal set and coskeletal
//!   extension of maps.
//! * [`tensor`]: the Boardman-Vogt tensor product of representables through
//!   percolation schemes and their poset structure.
//! * [`anodyne`]: machine checkable certificates that specific inclusions
//!   are anodyne extensions, with an independent verifier.
//! * [`groth`]: the Grothendieck construction for diagrams of dendroidal
//!   sets over a Cartesian category.
//! * [`corpus`]: deterministic fixture generation shared by the test suites
//!   and the command line interface.

pub mod anodyne;
pub mod dset;
pub mod kan;
pub mod omega;
pub mod operad;
pub mod tensor;
pub mod tree;
