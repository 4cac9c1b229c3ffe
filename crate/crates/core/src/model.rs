//! Reaction networks and the continuous mass-action model: stoichiometry,
//! conservation laws, rates, detailed-balance equilibria and free energy.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::linalg;

/// Relative tolerance used when checking detailed balance.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("reaction {reaction}: {reason}")]
    InvalidReaction { reaction: usize, reason: String },
    #[error("stoichiometric matrix has rank {rank} < {reactions}; dependent reactions: {}", fmt_ids(.dependent))]
    RankDeficient {
        rank: usize,
        reactions: usize,
        /// Reaction ids that are combinations of earlier reactions.
        dependent: Vec<String>,
    },
    #[error("invalid species list: {0}")]
    InvalidSpecies(String),
    #[error("{what}: expected length {expected}, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("not a detailed-balance equilibrium: reaction {reaction} has relative residual {residual:e}")]
    NotEquilibrium { reaction: usize, residual: f64 },
}

fn fmt_ids(ids: &[String]) -> String {
    ids.join(", ")
}

/// One reversible reaction `alpha . X <=> beta . X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reaction {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub k_plus: f64,
    pub k_minus: f64,
}

impl Reaction {
    pub fn new(alpha: Vec<u32>, beta: Vec<u32>, k_plus: f64, k_minus: f64) -> Self {
        Reaction {
            alpha,
            beta,
            k_plus,
            k_minus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
    reaction_ids: Vec<String>,
    /// N x M, `stoich[i][l] = beta^l_i - alpha^l_i`.
    stoich: Vec<Vec<i64>>,
    stoich_f64: DMatrix<f64>,
}

impl ReactionNetwork {
    /// Builds a network with reaction ids `R1..RM`.
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>) -> Result<Self, ModelError> {
        let ids = (1..=reactions.len()).map(|l| format!("R{l}")).collect();
        Self::with_ids(species, reactions, ids)
    }

    pub fn with_ids(
        species: Vec<String>,
        reactions: Vec<Reaction>,
        reaction_ids: Vec<String>,
    ) -> Result<Self, ModelError> {
        let n = species.len();
        let m = reactions.len();
        if n == 0 {
            return Err(ModelError::InvalidSpecies("no species".into()));
        }
        for (i, s) in species.iter().enumerate() {
            if s.is_empty() {
                return Err(ModelError::InvalidSpecies("empty species name".into()));
            }
            if species[..i].contains(s) {
                return Err(ModelError::InvalidSpecies(format!("duplicate species {s}")));
            }
        }
        if m == 0 {
            return Err(ModelError::InvalidReaction {
                reaction: 0,
                reason: "network has no reactions".into(),
            });
        }
        if reaction_ids.len() != m {
            return Err(ModelError::DimensionMismatch {
                what: "reaction ids",
                expected: m,
                found: reaction_ids.len(),
            });
        }
        for (i, id) in reaction_ids.iter().enumerate() {
            if reaction_ids[..i].contains(id) {
                return Err(ModelError::InvalidReaction {
                    reaction: i,
                    reason: format!("duplicate reaction id {id}"),
                });
            }
        }
        for (l, r) in reactions.iter().enumerate() {
            validate_reaction(l, r, n)?;
        }

        let stoich: Vec<Vec<i64>> = (0..n)
            .map(|i| {
                reactions
                    .iter()
                    .map(|r| i64::from(r.beta[i]) - i64::from(r.alpha[i]))
                    .collect()
            })
            .collect();
        let transposed: Vec<Vec<i64>> = (0..m)
            .map(|l| (0..n).map(|i| stoich[i][l]).collect())
            .collect();
        let rank = linalg::rank(&transposed);
        if rank < m {
            let dependent = linalg::dependent_rows(&transposed)
                .into_iter()
                .map(|l| reaction_ids[l].clone())
                .collect();
            return Err(ModelError::RankDeficient {
                rank,
                reactions: m,
                dependent,
            });
        }
        let stoich_f64 = DMatrix::from_fn(n, m, |i, l| stoich[i][l] as f64);
        Ok(ReactionNetwork {
            species,
            reactions,
            reaction_ids,
            stoich,
            stoich_f64,
        })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn reaction_ids(&self) -> &[String] {
        &self.reaction_ids
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    /// Integer stoichiometric matrix, N rows of length M.
    pub fn stoich(&self) -> &[Vec<i64>] {
        &self.stoich
    }

    pub fn stoich_matrix(&self) -> &DMatrix<f64> {
        &self.stoich_f64
    }

    /// Rank of S. Always M for a constructed network.
    pub fn rank(&self) -> usize {
        self.n_reactions()
    }

    pub(crate) fn check_species_len(&self, what: &'static str, v: &[f64]) -> Result<(), ModelError> {
        if v.len() != self.n_species() {
            return Err(ModelError::DimensionMismatch {
                what,
                expected: self.n_species(),
                found: v.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_reaction_len(&self, what: &'static str, v: &[f64]) -> Result<(), ModelError> {
        if v.len() != self.n_reactions() {
            return Err(ModelError::DimensionMismatch {
                what,
                expected: self.n_reactions(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Kinematics `c = c0 + S R`. No positivity check.
    pub fn concentrations(&self, c0: &[f64], extents: &[f64]) -> Vec<f64> {
        debug_assert_eq!(c0.len(), self.n_species());
        debug_assert_eq!(extents.len(), self.n_reactions());
        self.stoich
            .iter()
            .zip(c0)
            .map(|(row, &c)| {
                row.iter()
                    .zip(extents)
                    .fold(c, |acc, (&s, &r)| if s == 0 { acc } else { acc + s as f64 * r })
            })
            .collect()
    }

    /// `S v` for a length-M vector.
    pub fn apply_stoich(&self, v: &[f64]) -> Vec<f64> {
        self.stoich
            .iter()
            .map(|row| row.iter().zip(v).map(|(&s, &x)| s as f64 * x).sum())
            .collect()
    }

    /// `S^T w` for a length-N vector.
    pub fn apply_stoich_transpose(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n_reactions())
            .map(|l| {
                self.stoich
                    .iter()
                    .zip(w)
                    .map(|(row, &x)| row[l] as f64 * x)
                    .sum()
            })
            .collect()
    }

    /// Mass-action rates. Monomials are evaluated by integer powers, so
    /// negative concentrations propagate with their sign.
    pub fn lma_rates(&self, c: &[f64]) -> Rates {
        let forward: Vec<f64> = self
            .reactions
            .iter()
            .map(|r| r.k_plus * monomial(c, &r.alpha))
            .collect();
        let backward: Vec<f64> = self
            .reactions
            .iter()
            .map(|r| r.k_minus * monomial(c, &r.beta))
            .collect();
        let net = forward.iter().zip(&backward).map(|(f, b)| f - b).collect();
        Rates {
            forward,
            backward,
            net,
        }
    }

    /// Right-hand side of the concentration ODE, `S r(c)`.
    pub fn concentration_rhs(&self, c: &[f64]) -> Vec<f64> {
        self.apply_stoich(&self.lma_rates(c).net)
    }

    pub fn conservation_basis(&self) -> ConservationBasis {
        let transposed: Vec<Vec<i64>> = (0..self.n_reactions())
            .map(|l| self.stoich.iter().map(|row| row[l]).collect())
            .collect();
        ConservationBasis {
            vectors: linalg::integer_null_space(&transposed, self.n_species()),
        }
    }

    /// Detailed-balance equilibrium `exp(x)` with `x` the minimum-norm
    /// solution of `S^T x = ln(k+/k-)`.
    pub fn solve_equilibrium(&self) -> Result<EquilibriumState, ModelError> {
        let s = &self.stoich_f64;
        let b = DVector::from_iterator(
            self.n_reactions(),
            self.reactions.iter().map(|r| (r.k_plus / r.k_minus).ln()),
        );
        let gram = s.transpose() * s;
        let chol = gram.cholesky().ok_or_else(|| {
            ModelError::NumericalFailure("S^T S is not positive definite".into())
        })?;
        let mut x = s * chol.solve(&b);
        // one step of iterative refinement
        let resid = &b - s.transpose() * &x;
        x += s * chol.solve(&resid);

        let resid = (&b - s.transpose() * &x).amax();
        let scale = b.amax().max(1.0);
        if !(resid <= 1e-10 * scale) {
            return Err(ModelError::NumericalFailure(format!(
                "equilibrium log-space residual {resid:e} above 1e-10"
            )));
        }
        let c_inf: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        if c_inf.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ModelError::NumericalFailure(
                "equilibrium concentration overflowed or underflowed".into(),
            ));
        }
        EquilibriumState::new(self, c_inf)
    }

    /// Chemical affinity `S^T mu`.
    pub fn affinity(&self, c: &[f64], eq: &EquilibriumState) -> Result<Vec<f64>, ModelError> {
        let mu = chemical_potential(c, eq.c_inf())?;
        Ok(self.apply_stoich_transpose(&mu))
    }

    /// Largest relative detailed-balance residual over all reactions.
    pub fn detailed_balance_residual(&self, c: &[f64]) -> (usize, f64) {
        let rates = self.lma_rates(c);
        rates
            .forward
            .iter()
            .zip(&rates.backward)
            .map(|(f, b)| {
                let scale = f.abs().max(b.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (f - b).abs() / scale
                }
            })
            .enumerate()
            .fold((0, 0.0), |best, (l, r)| if r > best.1 { (l, r) } else { best })
    }
}

fn validate_reaction(l: usize, r: &Reaction, n: usize) -> Result<(), ModelError> {
    let invalid = |reason: String| ModelError::InvalidReaction { reaction: l, reason };
    if r.alpha.len() != n || r.beta.len() != n {
        return Err(invalid(format!(
            "coefficient vectors must have length {n} (got {} and {})",
            r.alpha.len(),
            r.beta.len()
        )));
    }
    if r.alpha == r.beta {
        return Err(invalid("reactant and product sides are identical".into()));
    }
    if r.alpha.iter().all(|&a| a == 0) || r.beta.iter().all(|&b| b == 0) {
        return Err(invalid("each side needs at least one species".into()));
    }
    if !(r.k_plus > 0.0 && r.k_plus.is_finite()) {
        return Err(invalid(format!("forward rate constant {} is not positive", r.k_plus)));
    }
    if !(r.k_minus > 0.0 && r.k_minus.is_finite()) {
        return Err(invalid(format!("backward rate constant {} is not positive", r.k_minus)));
    }
    Ok(())
}

/// `x^n` by binary exponentiation; `0^0 = 1`.
pub fn int_pow(mut x: f64, mut n: u32) -> f64 {
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= x;
        }
        x *= x;
        n >>= 1;
    }
    acc
}

/// `prod_i c_i^{e_i}`.
pub fn monomial(c: &[f64], exponents: &[u32]) -> f64 {
    c.iter()
        .zip(exponents)
        .filter(|(_, &e)| e > 0)
        .map(|(&x, &e)| int_pow(x, e))
        .product()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rates {
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub net: Vec<f64>,
}

/// A strictly positive concentration vector satisfying detailed balance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumState {
    c_inf: Vec<f64>,
}

impl EquilibriumState {
    /// Validates `c_inf` against detailed balance for every reaction.
    pub fn new(network: &ReactionNetwork, c_inf: Vec<f64>) -> Result<Self, ModelError> {
        network.check_species_len("equilibrium", &c_inf)?;
        if let Some(v) = c_inf.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(ModelError::Domain(format!(
                "equilibrium concentrations must be positive and finite, got {v}"
            )));
        }
        let (reaction, residual) = network.detailed_balance_residual(&c_inf);
        if !(residual <= DETAILED_BALANCE_TOL) {
            return Err(ModelError::NotEquilibrium { reaction, residual });
        }
        Ok(EquilibriumState { c_inf })
    }

    pub fn c_inf(&self) -> &[f64] {
        &self.c_inf
    }
}

/// Integer vectors spanning ker S^T.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationBasis {
    pub vectors: Vec<Vec<i64>>,
}

impl ConservationBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `gamma . c` for each basis vector.
    pub fn totals(&self, c: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|g| dot_int(g, c)).collect()
    }

    /// `gamma . c - gamma . c0` for each basis vector.
    pub fn residuals(&self, c0: &[f64], c: &[f64]) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|g| dot_int(g, c) - dot_int(g, c0))
            .collect()
    }

    /// Euclidean norm of each basis vector.
    pub fn norms(&self) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|g| g.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt())
            .collect()
    }
}

fn dot_int(g: &[i64], c: &[f64]) -> f64 {
    g.iter().zip(c).map(|(&a, &b)| a as f64 * b).sum()
}

/// `F = sum_i c_i (ln(c_i / c_inf_i) - 1)`, with `0 ln 0 = 0`.
///
/// Returns NaN if any concentration is negative.
pub fn free_energy(c: &[f64], c_inf: &[f64]) -> f64 {
    c.iter()
        .zip(c_inf)
        .map(|(&x, &a)| {
            if x == 0.0 {
                0.0
            } else if x > 0.0 {
                x * ((x / a).ln() - 1.0)
            } else {
                f64::NAN
            }
        })
        .sum()
}

/// `mu_i = ln(c_i / c_inf_i)`.
pub fn chemical_potential(c: &[f64], c_inf: &[f64]) -> Result<Vec<f64>, ModelError> {
    c.iter()
        .zip(c_inf)
        .enumerate()
        .map(|(i, (&x, &a))| {
            if x > 0.0 {
                Ok((x / a).ln())
            } else {
                Err(ModelError::Domain(format!(
                    "chemical potential needs positive concentrations, c[{i}] = {x}"
                )))
            }
        })
        .collect()
}
