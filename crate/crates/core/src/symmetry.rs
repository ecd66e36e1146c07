//! Symmetry classes, constraint residuals, detection, symmetrization and
//! unit-cell gauge changes.
//!
//! Every symmetry constraint has the form `H(k) = T(H)(k)` with
//!
//! ```text
//! T(H)(k) = ± V_k · H^{(*)}(±k) · V_k†
//! ```
//!
//! where `V_k` is a fixed Pauli matrix or the gauge unitary
//! `G_k = diag(1, e^{ik})`. Each `T` is a real-linear involution, and the
//! two generators of every `∧` class commute, so averaging over the group
//! they generate is a projection onto the constrained subspace.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bloch::{pauli_decompose, BlochSeries, Hoppings, PauliVec, SampledLoop};
use crate::error::{Error, Result};
use crate::matrix::Matrix2;

/// The unitary part `V_k` of a constraint map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conjugator {
    Identity,
    SigmaX,
    SigmaY,
    SigmaZ,
    /// `G_k`.
    Gauge,
}

impl Conjugator {
    pub fn at(&self, k: f64) -> Matrix2 {
        match self {
            Conjugator::Identity => Matrix2::identity(),
            Conjugator::SigmaX => Matrix2::sigma_x(),
            Conjugator::SigmaY => Matrix2::sigma_y(),
            Conjugator::SigmaZ => Matrix2::sigma_z(),
            Conjugator::Gauge => Matrix2::gauge(k),
        }
    }
}

/// One constraint map `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Action {
    pub name: &'static str,
    /// Evaluate at `−k`.
    pub flip: bool,
    /// Complex-conjugate `H`.
    pub conj: bool,
    pub unitary: Conjugator,
    /// Overall minus sign (particle-hole type).
    pub negate: bool,
}

const THETA_PLUS: Action =
    Action { name: "theta_plus", flip: true, conj: true, unitary: Conjugator::Identity, negate: false };
const THETA_MINUS: Action =
    Action { name: "theta_minus", flip: true, conj: true, unitary: Conjugator::SigmaY, negate: false };
const C_PLUS: Action = Action { name: "c_plus", flip: true, conj: true, unitary: Conjugator::SigmaZ, negate: true };
const C_MINUS: Action = Action { name: "c_minus", flip: true, conj: true, unitary: Conjugator::SigmaY, negate: true };
const BOND: Action = Action { name: "bond", flip: true, conj: false, unitary: Conjugator::SigmaX, negate: false };
const SITE: Action = Action { name: "site", flip: true, conj: false, unitary: Conjugator::Gauge, negate: false };
const CHIRAL: Action = Action { name: "chiral", flip: false, conj: false, unitary: Conjugator::SigmaZ, negate: true };
const BOND_THETA: Action =
    Action { name: "bond_theta", flip: false, conj: true, unitary: Conjugator::SigmaX, negate: false };
const SITE_THETA: Action =
    Action { name: "site_theta", flip: false, conj: true, unitary: Conjugator::Gauge, negate: false };

impl Action {
    /// Node whose value feeds `T(H)` at node `m`.
    pub fn source_node(&self, lp: &SampledLoop, m: usize) -> usize {
        if self.flip {
            lp.grid.partner(m)
        } else {
            m
        }
    }

    /// `T(H)(k)` given `src = H(±k)` (already taken at the source node).
    pub fn apply(&self, src: &Matrix2, k: f64) -> Matrix2 {
        let h = if self.conj { src.conj() } else { *src };
        let out = h.conjugate_by(&self.unitary.at(k));
        if self.negate {
            -out
        } else {
            out
        }
    }

    /// Pauli-vector form of [`Action::apply`].
    pub fn image(&self, src: &PauliVec, k: f64) -> PauliVec {
        // T preserves Hermiticity exactly up to rounding
        pauli_decompose(&self.apply(&src.to_matrix(), k)).expect("symmetry maps are Hermiticity preserving")
    }

    /// `T(H)` at node `m` of a sampled loop.
    pub fn on_loop(&self, lp: &SampledLoop, m: usize) -> Matrix2 {
        self.apply(&lp.matrix(self.source_node(lp, m)), lp.grid.k(m))
    }

    /// `T` acting on Fourier coefficients.
    pub fn on_series(&self, s: &BlochSeries) -> BlochSeries {
        let mut out = BlochSeries::default();
        for (&j, m) in &s.coeffs {
            // H(−k): c_j → c_{−j}; H*(k): c_j → conj(c_{−j}); H*(−k): c_j → conj(c_j)
            let (j2, m2) = match (self.flip, self.conj) {
                (false, false) => (j, *m),
                (true, false) => (-j, *m),
                (false, true) => (-j, m.conj()),
                (true, true) => (j, m.conj()),
            };
            match self.unitary {
                Conjugator::Gauge => {
                    for b in 0..2 {
                        for a in 0..2 {
                            let mut e = Matrix2::zero();
                            e[(b, a)] = m2[(b, a)];
                            out.add_at(j2 - (b as i64 - a as i64), e);
                        }
                    }
                }
                u => out.add_at(j2, m2.conjugate_by(&u.at(0.0))),
            }
        }
        if self.negate {
            out.scale(-1.0)
        } else {
            out
        }
    }
}

/// The symmetry classes of two-band Bloch Hamiltonians.
///
/// `∧` classes carry both generator constraints; `∘` classes (and chiral)
/// carry the single product constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    None,
    ThetaPlus,
    ThetaMinus,
    CPlus,
    CMinus,
    Bond,
    Site,
    Chiral,
    BondTheta,
    SiteTheta,
    SiteAndTheta,
    BondAndTheta,
    CplusAndTheta,
    CminusAndTheta,
}

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 14] = [
        SymmetryClass::None,
        SymmetryClass::ThetaPlus,
        SymmetryClass::ThetaMinus,
        SymmetryClass::CPlus,
        SymmetryClass::CMinus,
        SymmetryClass::Bond,
        SymmetryClass::Site,
        SymmetryClass::Chiral,
        SymmetryClass::BondTheta,
        SymmetryClass::SiteTheta,
        SymmetryClass::SiteAndTheta,
        SymmetryClass::BondAndTheta,
        SymmetryClass::CplusAndTheta,
        SymmetryClass::CminusAndTheta,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            SymmetryClass::None => "none",
            SymmetryClass::ThetaPlus => "theta_plus",
            SymmetryClass::ThetaMinus => "theta_minus",
            SymmetryClass::CPlus => "c_plus",
            SymmetryClass::CMinus => "c_minus",
            SymmetryClass::Bond => "bond",
            SymmetryClass::Site => "site",
            SymmetryClass::Chiral => "chiral",
            SymmetryClass::BondTheta => "bond_theta",
            SymmetryClass::SiteTheta => "site_theta",
            SymmetryClass::SiteAndTheta => "site_and_theta",
            SymmetryClass::BondAndTheta => "bond_and_theta",
            SymmetryClass::CplusAndTheta => "cplus_and_theta",
            SymmetryClass::CminusAndTheta => "cminus_and_theta",
        }
    }

    pub fn constraints(&self) -> &'static [Action] {
        match self {
            SymmetryClass::None => &[],
            SymmetryClass::ThetaPlus => &[THETA_PLUS],
            SymmetryClass::ThetaMinus => &[THETA_MINUS],
            SymmetryClass::CPlus => &[C_PLUS],
            SymmetryClass::CMinus => &[C_MINUS],
            SymmetryClass::Bond => &[BOND],
            SymmetryClass::Site => &[SITE],
            SymmetryClass::Chiral => &[CHIRAL],
            SymmetryClass::BondTheta => &[BOND_THETA],
            SymmetryClass::SiteTheta => &[SITE_THETA],
            SymmetryClass::SiteAndTheta => &[SITE, THETA_PLUS],
            SymmetryClass::BondAndTheta => &[BOND, THETA_PLUS],
            SymmetryClass::CplusAndTheta => &[C_PLUS, THETA_PLUS],
            SymmetryClass::CminusAndTheta => &[C_MINUS, THETA_PLUS],
        }
    }

    /// Every class except Θ₋ admits gapped two-band Hamiltonians.
    pub fn is_gapped(&self) -> bool {
        *self != SymmetryClass::ThetaMinus
    }

    pub fn gapped() -> impl Iterator<Item = SymmetryClass> {
        Self::ALL.into_iter().filter(|c| c.is_gapped())
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SymmetryClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SymmetryClass::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown symmetry class '{s}'")))
    }
}

/// Per-constraint maximum residual `max_m ‖H(k_m) − T(H)(k_m)‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub class: SymmetryClass,
    pub entries: Vec<(&'static str, f64)>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }
}

pub fn action_residual(lp: &SampledLoop, action: &Action) -> f64 {
    (0..lp.n())
        .map(|m| (lp.matrix(m) - action.on_loop(lp, m)).op_norm())
        .fold(0.0, f64::max)
}

pub fn residual(lp: &SampledLoop, cls: SymmetryClass) -> ResidualReport {
    let entries = cls.constraints().iter().map(|a| (a.name, action_residual(lp, a))).collect();
    ResidualReport { class: cls, entries }
}

/// All classes whose constraints hold within `tol`, in canonical order.
pub fn detect(lp: &SampledLoop, tol: f64) -> Vec<SymmetryClass> {
    SymmetryClass::ALL.into_iter().filter(|&c| residual(lp, c).max() <= tol).collect()
}

/// Projects the Fourier series onto the constraint subspace of `cls`.
pub fn symmetrize_series(s: &BlochSeries, cls: SymmetryClass) -> BlochSeries {
    cls.constraints().iter().fold(s.clone(), |acc, a| acc.add(&a.on_series(&acc)).scale(0.5))
}

/// Averages `h` over the group generated by the constraint maps of `cls`.
pub fn symmetrize(h: &Hoppings, cls: SymmetryClass) -> Hoppings {
    if cls == SymmetryClass::None {
        return h.clone();
    }
    symmetrize_series(&BlochSeries::from_hoppings(h), cls).to_hoppings(h.name.clone())
}

/// Unit-cell change `H(k) ↦ G_k^l H(k) G_k^{−l}`.
///
/// Entry `(b, a)` of the coefficient at `j` moves to `j − l(b − a)`.
pub fn gauge_transform(h: &Hoppings, l: i64) -> Hoppings {
    if l == 0 {
        return h.clone();
    }
    let s = BlochSeries::from_hoppings(h);
    let mut out = BlochSeries::default();
    for (&j, m) in &s.coeffs {
        for b in 0..2 {
            for a in 0..2 {
                let mut e = Matrix2::zero();
                e[(b, a)] = m[(b, a)];
                out.add_at(j - l * (b as i64 - a as i64), e);
            }
        }
    }
    out.to_hoppings(h.name.clone())
}
