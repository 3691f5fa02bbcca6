//! Reaction networks on the graph of complexes.
//!
//! A [`ReactionNetwork`] owns species, complexes (distinct composition
//! vectors) and directed reactions between complexes. The matrix view is
//! built once at construction:
//!
//! * `Z` (m×c) complex composition,
//! * `D` (c×r) incidence, −1 at the substrate and +1 at the product,
//! * `K` (r×c) outgoing co-incidence, `K[j, substrate_j] = k_j`,
//! * `L = −DK` (c×c) with zero column sums,
//! * `S = ZD` (m×r) stoichiometric matrix.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CrnError, Result};
use crate::exact::{QMatrix, Rational};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeciesTable {
    names: Vec<String>,
}

impl SpeciesTable {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(CrnError::Invalid("a network needs at least one species".into()));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(CrnError::Invalid(format!("duplicate species `{n}`")));
            }
        }
        Ok(SpeciesTable { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Stoichiometric multiplicities of one complex, indexed by species.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Complex {
    pub composition: Vec<u32>,
}

impl Complex {
    pub fn new(composition: Vec<u32>) -> Self {
        Complex { composition }
    }

    pub fn is_zero(&self) -> bool {
        self.composition.iter().all(|&x| x == 0)
    }

    /// Textual form such as `X2 + 2 X3`; the zero complex prints as `0`.
    pub fn label(&self, species: &SpeciesTable) -> String {
        let terms: Vec<String> = self
            .composition
            .iter()
            .zip(species.names())
            .filter(|(&n, _)| n > 0)
            .map(|(&n, s)| if n == 1 { s.clone() } else { format!("{n} {s}") })
            .collect();
        if terms.is_empty() {
            "0".into()
        } else {
            terms.join(" + ")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub substrate: usize,
    pub product: usize,
    pub rate: f64,
    /// Exact value of the rate when it was written as a decimal or fraction.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "rational_text")]
    pub exact_rate: Option<Rational>,
    /// Index of the opposite reaction when both came from one `<->`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse: Option<usize>,
}

impl Reaction {
    pub fn new(substrate: usize, product: usize, rate: f64) -> Self {
        Reaction {
            substrate,
            product,
            rate,
            exact_rate: None,
            reverse: None,
        }
    }

    pub fn exact(&self) -> Option<Rational> {
        self.exact_rate
            .clone()
            .or_else(|| crate::exact::rational_from_f64(self.rate))
    }
}

mod rational_text {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&r.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let text: Option<String> = Option::deserialize(d)?;
        text.map(|t| {
            crate::exact::parse_rational(&t).ok_or_else(|| serde::de::Error::custom(format!("bad rational `{t}`")))
        })
        .transpose()
    }
}

/// Matrix view of a network. Integer matrices stay integer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMatrices {
    pub z: DMatrix<i64>,
    pub d: DMatrix<i64>,
    pub k: Matrix,
    pub l: Matrix,
    pub s: DMatrix<i64>,
}

impl NetworkMatrices {
    fn build(m: usize, complexes: &[Complex], reactions: &[Reaction]) -> Self {
        let c = complexes.len();
        let r = reactions.len();
        let z = DMatrix::from_fn(m, c, |i, j| complexes[j].composition[i] as i64);
        let mut d = DMatrix::<i64>::zeros(c, r);
        let mut k = Matrix::zeros(r, c);
        for (j, rx) in reactions.iter().enumerate() {
            d[(rx.substrate, j)] = -1;
            d[(rx.product, j)] = 1;
            k[(j, rx.substrate)] = rx.rate;
        }
        let l = -(crate::linalg::to_f64(&d) * &k);
        let s = &z * &d;
        NetworkMatrices { z, d, k, l, s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork", into = "RawNetwork")]
pub struct ReactionNetwork {
    species: SpeciesTable,
    complexes: Vec<Complex>,
    reactions: Vec<Reaction>,
    matrices: NetworkMatrices,
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    species: SpeciesTable,
    complexes: Vec<Complex>,
    reactions: Vec<Reaction>,
}

impl TryFrom<RawNetwork> for ReactionNetwork {
    type Error = CrnError;
    fn try_from(raw: RawNetwork) -> Result<Self> {
        ReactionNetwork::new(raw.species, raw.complexes, raw.reactions)
    }
}

impl From<ReactionNetwork> for RawNetwork {
    fn from(n: ReactionNetwork) -> Self {
        RawNetwork {
            species: n.species,
            complexes: n.complexes,
            reactions: n.reactions,
        }
    }
}

impl ReactionNetwork {
    pub fn new(species: SpeciesTable, complexes: Vec<Complex>, reactions: Vec<Reaction>) -> Result<Self> {
        let m = species.len();
        let c = complexes.len();
        let mut seen = HashSet::new();
        for (i, cx) in complexes.iter().enumerate() {
            if cx.composition.len() != m {
                return Err(CrnError::Invalid(format!(
                    "complex {i} has {} entries, expected {m}",
                    cx.composition.len()
                )));
            }
            if cx.is_zero() {
                return Err(CrnError::Invalid(format!(
                    "complex {i} is the zero complex; inflows and outflows are listed separately"
                )));
            }
            if !seen.insert(cx) {
                return Err(CrnError::Invalid(format!(
                    "complex {i} duplicates an earlier composition"
                )));
            }
        }
        for (j, rx) in reactions.iter().enumerate() {
            if rx.substrate >= c || rx.product >= c {
                return Err(CrnError::Invalid(format!("reaction {j} references a missing complex")));
            }
            if rx.substrate == rx.product {
                return Err(CrnError::Invalid(format!("reaction {j} is a self-loop")));
            }
            if !(rx.rate.is_finite() && rx.rate > 0.0) {
                return Err(CrnError::Invalid(format!(
                    "reaction {j} has non-positive rate {}",
                    rx.rate
                )));
            }
            if let Some(p) = rx.reverse {
                let ok = reactions
                    .get(p)
                    .is_some_and(|o| o.reverse == Some(j) && o.substrate == rx.product && o.product == rx.substrate);
                if !ok {
                    return Err(CrnError::Invalid(format!(
                        "reaction {j} names {p} as its reverse, but the pairing is inconsistent"
                    )));
                }
            }
        }
        let matrices = NetworkMatrices::build(m, &complexes, &reactions);
        Ok(ReactionNetwork {
            species,
            complexes,
            reactions,
            matrices,
        })
    }

    /// Network whose complexes are the single species themselves (`Z = I`),
    /// from `(from, to, rate)` triples over `n` vertices.
    pub fn single_species(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let species = SpeciesTable::new((1..=n).map(|i| format!("C{i}")).collect())?;
        let complexes = (0..n)
            .map(|i| {
                let mut v = vec![0; n];
                v[i] = 1;
                Complex::new(v)
            })
            .collect();
        let reactions = edges.iter().map(|&(a, b, k)| Reaction::new(a, b, k)).collect();
        Self::new(species, complexes, reactions)
    }

    pub fn species(&self) -> &SpeciesTable {
        &self.species
    }

    pub fn complexes(&self) -> &[Complex] {
        &self.complexes
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn num_complexes(&self) -> usize {
        self.complexes.len()
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn matrices(&self) -> &NetworkMatrices {
        &self.matrices
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.matrices.l
    }

    pub fn z(&self) -> Matrix {
        crate::linalg::to_f64(&self.matrices.z)
    }

    pub fn d(&self) -> Matrix {
        crate::linalg::to_f64(&self.matrices.d)
    }

    pub fn s(&self) -> Matrix {
        crate::linalg::to_f64(&self.matrices.s)
    }

    pub fn complex_label(&self, i: usize) -> String {
        self.complexes[i].label(&self.species)
    }

    /// Laplacian over ℚ using each reaction's exact rate.
    pub fn exact_laplacian(&self) -> Result<QMatrix> {
        let c = self.num_complexes();
        let mut l = QMatrix::zeros(c, c);
        for (j, rx) in self.reactions.iter().enumerate() {
            let k = rx
                .exact()
                .ok_or_else(|| CrnError::Invalid(format!("reaction {j} has no exact rate")))?;
            let (s, p) = (rx.substrate, rx.product);
            let diag = l.get(s, s) + &k;
            l.set(s, s, diag);
            let off = l.get(p, s) - &k;
            l.set(p, s, off);
        }
        Ok(l)
    }

    /// `Exp(Zᵀ Ln x)`: the monomial of every complex evaluated at `x`.
    pub fn complex_monomials(&self, x: &Vector) -> Vector {
        complex_monomials(&self.matrices.z, x)
    }

    /// Mass-action reaction rates `K · Exp(Zᵀ Ln x)`.
    pub fn rates(&self, x: &Vector) -> Vector {
        &self.matrices.k * self.complex_monomials(x)
    }

    /// `true` when `Z` is exactly the identity (single-species network).
    pub fn is_single_species(&self) -> bool {
        let z = &self.matrices.z;
        z.nrows() == z.ncols() && *z == DMatrix::<i64>::identity(z.nrows(), z.ncols())
    }
}

/// `Exp(Zᵀ Ln x)` computed as products of integer powers, so zero entries
/// of `x` give exact zeros rather than NaN.
pub fn complex_monomials(z: &DMatrix<i64>, x: &Vector) -> Vector {
    Vector::from_fn(z.ncols(), |j, _| {
        (0..z.nrows()).fold(1.0, |acc, i| {
            let e = z[(i, j)];
            if e == 0 {
                acc
            } else {
                acc * x[i].powi(e as i32)
            }
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub complex: usize,
    pub rate: f64,
}

/// Constant inflows into and mass-action outflows out of existing complexes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpenSpec {
    pub inflows: Vec<Flow>,
    pub outflows: Vec<Flow>,
}

impl OpenSpec {
    pub fn is_empty(&self) -> bool {
        self.inflows.is_empty() && self.outflows.is_empty()
    }

    pub fn validate(&self, num_complexes: usize) -> Result<()> {
        for (kind, list) in [("inflow", &self.inflows), ("outflow", &self.outflows)] {
            let mut seen = HashSet::new();
            for f in list {
                if f.complex >= num_complexes {
                    return Err(CrnError::Invalid(format!(
                        "{kind} references missing complex {}",
                        f.complex
                    )));
                }
                if !(f.rate.is_finite() && f.rate > 0.0) {
                    return Err(CrnError::Invalid(format!(
                        "{kind} into complex {} has non-positive rate {}",
                        f.complex, f.rate
                    )));
                }
                if !seen.insert(f.complex) {
                    return Err(CrnError::Invalid(format!("complex {} has two {kind}s", f.complex)));
                }
            }
        }
        Ok(())
    }
}

/// A parsed network file: the reaction network plus its flows, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct Model {
    pub network: ReactionNetwork,
    pub open: Option<OpenSpec>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    #[serde(flatten)]
    network: ReactionNetwork,
    #[serde(default)]
    open: OpenSpec,
}

impl TryFrom<RawModel> for Model {
    type Error = CrnError;
    fn try_from(raw: RawModel) -> Result<Self> {
        Model::new(raw.network, Some(raw.open))
    }
}

impl From<Model> for RawModel {
    fn from(m: Model) -> Self {
        RawModel {
            network: m.network,
            open: m.open.unwrap_or_default(),
        }
    }
}

impl Model {
    /// A model without inflows or outflows stores `None`.
    pub fn new(network: ReactionNetwork, open: Option<OpenSpec>) -> Result<Self> {
        let open = open.filter(|o| !o.is_empty());
        if let Some(o) = &open {
            o.validate(network.num_complexes())?;
        }
        Ok(Model { network, open })
    }

    pub fn is_open(&self) -> bool {
        self.open.is_some()
    }

    /// JSON document `{species, complexes, reactions, open}`, optionally with
    /// the row-major matrices appended under `matrices`.
    pub fn to_json(&self, with_matrices: bool) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("model serialises");
        if with_matrices {
            let mx = self.network.matrices();
            v["matrices"] = serde_json::json!({
                "Z": rows_i64(&mx.z),
                "D": rows_i64(&mx.d),
                "K": rows_f64(&mx.k),
                "L": rows_f64(&mx.l),
                "S": rows_i64(&mx.s),
            });
        }
        v
    }
}

pub fn rows_f64(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_i64(m: &DMatrix<i64>) -> Vec<Vec<i64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(k: [f64; 6]) -> ReactionNetwork {
        ReactionNetwork::single_species(
            3,
            &[
                (0, 1, k[0]),
                (1, 0, k[1]),
                (1, 2, k[2]),
                (2, 1, k[3]),
                (2, 0, k[4]),
                (0, 2, k[5]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn cycle_laplacian() {
        let n = cycle([1., 2., 3., 4., 5., 6.]);
        let expected = Matrix::from_row_slice(3, 3, &[7., -2., -5., -1., 5., -4., -6., -3., 9.]);
        assert_eq!(n.laplacian(), &expected);
    }

    #[test]
    fn single_reaction_laplacian() {
        let n = ReactionNetwork::single_species(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(n.laplacian(), &Matrix::from_row_slice(2, 2, &[1., 0., -1., 0.]));
    }

    #[test]
    fn structural_identities() {
        let n = cycle([1., 2., 3., 4., 5., 6.]);
        let mx = n.matrices();
        for j in 0..mx.d.ncols() {
            let col = mx.d.column(j);
            assert_eq!(col.iter().sum::<i64>(), 0);
            assert_eq!(col.iter().filter(|&&x| x == 1).count(), 1);
            assert_eq!(col.iter().filter(|&&x| x == -1).count(), 1);
        }
        assert_eq!(mx.s, &mx.z * &mx.d);
        for c in 0..3 {
            assert!(mx.l.column(c).sum().abs() < 1e-15);
        }
        assert!(n.is_single_species());
    }

    #[test]
    fn rejects_bad_networks() {
        let sp = || SpeciesTable::new(vec!["A".into(), "B".into()]).unwrap();
        let a = Complex::new(vec![1, 0]);
        let b = Complex::new(vec![0, 1]);
        assert!(ReactionNetwork::new(sp(), vec![a.clone(), a.clone()], vec![]).is_err());
        assert!(ReactionNetwork::new(sp(), vec![a.clone(), Complex::new(vec![0, 0])], vec![]).is_err());
        assert!(ReactionNetwork::new(sp(), vec![a.clone(), b.clone()], vec![Reaction::new(0, 0, 1.0)]).is_err());
        assert!(ReactionNetwork::new(sp(), vec![a, b], vec![Reaction::new(0, 1, 0.0)]).is_err());
        assert!(SpeciesTable::new(vec!["A".into(), "A".into()]).is_err());
        assert!(SpeciesTable::new(vec![]).is_err());
    }

    #[test]
    fn open_spec_validation() {
        let o = OpenSpec {
            inflows: vec![Flow { complex: 0, rate: 1.0 }, Flow { complex: 0, rate: 2.0 }],
            outflows: vec![],
        };
        assert!(o.validate(2).is_err());
        let o = OpenSpec {
            inflows: vec![Flow { complex: 5, rate: 1.0 }],
            outflows: vec![],
        };
        assert!(o.validate(2).is_err());
    }

    #[test]
    fn monomials_handle_zero() {
        let z = DMatrix::from_row_slice(2, 2, &[1i64, 0, 0, 2]);
        let w = complex_monomials(&z, &Vector::from_vec(vec![0.0, 3.0]));
        assert_eq!(w.as_slice(), &[0.0, 9.0]);
    }
}
