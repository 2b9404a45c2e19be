//! Stochastic operators: a mean field `F(u)` together with a noisy oracle
//! `Φ(u, ξ)` whose expectation is `F(u)`.
//!
//! Three families are built in:
//!
//! * [`make_example1`]: the two-dimensional non-monotone, discontinuous field
//!   `c·(sign(u₁)|u₁|^{p−1} + u₂, sign(u₂)|u₂|^{p−1} − u₁)` with `c = 2` on the
//!   closed unit ball and `c = 1` outside.
//! * [`make_switched_quadratic`]: the affine field `c·(Ju + b)` with
//!   `J = [[A₁, A₂], [−A₂ᵀ, A₃]]`, switching `c` on the sphere of radius
//!   `radius_switch`, plus additive Gaussian noise outside the switch.
//! * [`make_finite_sum_game`]: the average of `n` affine components of a
//!   quadratic min-max game, sampled by a uniform index.
//!
//! User-supplied fields are available through [`OperatorInstance::from_fn`].
//!
//! The switching operators are discontinuous on their switch sphere. Solvers
//! never special-case it.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Builds a vector, rejecting empty input and non-finite components.
pub fn vector(components: Vec<f64>) -> Result<Vector> {
    if components.is_empty() {
        return Err(Error::invalid("vector", "dimension must be at least 1"));
    }
    if let Some(i) = components.iter().position(|x| !x.is_finite()) {
        return Err(Error::invalid(
            "vector",
            format!("component {i} is not finite ({})", components[i]),
        ));
    }
    Ok(Vector::from_vec(components))
}

/// Analytic constants attached to an operator. Absent fields are unknown.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConstants {
    /// Linear growth slope `C` in `‖F(u)‖ ≤ C‖u‖ + D`.
    pub growth_slope: Option<f64>,
    /// Linear growth offset `D`.
    pub growth_offset: Option<f64>,
    pub lipschitz: Option<f64>,
    /// Sharpness modulus `μ` in `⟨F(u), u − u*⟩ ≥ μ dist^p(u, U*)`.
    pub mu: Option<f64>,
    /// Sharpness exponent `p`.
    pub p: Option<f64>,
    /// Bound on `E‖Φ(u, ξ) − F(u)‖²` (total over coordinates).
    pub sigma_sq: Option<f64>,
}

#[derive(Clone, Debug)]
pub enum SolutionSet {
    Point(Vector),
    /// `{u : Ju + b = 0}` with `J` nonsingular; the solution is solved once on
    /// construction.
    Affine {
        jacobian: Matrix,
        bias: Vector,
        solution: Vector,
    },
    Finite(Vec<Vector>),
    Unknown,
}

impl SolutionSet {
    pub fn affine(jacobian: Matrix, bias: Vector) -> Result<Self> {
        if !jacobian.is_square() || jacobian.nrows() != bias.len() {
            return Err(Error::invalid(
                "jacobian",
                format!(
                    "expected a {n}x{n} matrix, got {}x{}",
                    jacobian.nrows(),
                    jacobian.ncols(),
                    n = bias.len()
                ),
            ));
        }
        let solution = jacobian
            .clone()
            .lu()
            .solve(&(-&bias))
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::invalid("jacobian", "matrix is singular"))?;
        Ok(SolutionSet::Affine {
            jacobian,
            bias,
            solution,
        })
    }

    /// All explicitly known solution points (empty for `Unknown`).
    pub fn points(&self) -> Vec<&Vector> {
        match self {
            SolutionSet::Point(v) => vec![v],
            SolutionSet::Affine { solution, .. } => vec![solution],
            SolutionSet::Finite(points) => points.iter().collect(),
            SolutionSet::Unknown => Vec::new(),
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, SolutionSet::Unknown)
    }

    /// Largest norm of a known solution, `M₁`.
    pub fn max_norm(&self) -> Option<f64> {
        let points = self.points();
        if points.is_empty() {
            return None;
        }
        Some(points.iter().map(|p| p.norm()).fold(0.0, f64::max))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    None,
    /// Independent zero-mean Gaussian noise added to every coordinate.
    GaussianIid { sigma_sq_per_coord: f64 },
    /// The oracle returns component `i` of a finite sum, `i` uniform on `0..n`.
    FiniteSumUniform { n: usize },
}

/// An affine map `u ↦ Ju + b`.
#[derive(Clone, Debug)]
pub struct AffineMap {
    pub jacobian: Matrix,
    pub bias: Vector,
}

impl AffineMap {
    fn apply(&self, u: &Vector) -> Vector {
        &self.jacobian * u + &self.bias
    }
}

type FieldFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

#[derive(Clone)]
enum Field {
    Example1 {
        p: f64,
    },
    Switched {
        map: AffineMap,
        radius: f64,
        c_outside: f64,
    },
    FiniteSum {
        components: Vec<AffineMap>,
        mean: AffineMap,
    },
    Custom(FieldFn),
}

/// A stochastic operator. Immutable after construction and safe to share
/// between concurrent runs; each run supplies its own random state.
#[derive(Clone)]
pub struct OperatorInstance {
    dim: usize,
    label: String,
    field: Field,
    noise: NoiseModel,
    declared: DeclaredConstants,
    solution_set: SolutionSet,
}

impl fmt::Debug for OperatorInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorInstance")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("noise", &self.noise)
            .field("declared", &self.declared)
            .finish_non_exhaustive()
    }
}

impl OperatorInstance {
    /// Wraps a user-supplied mean field. Noise defaults to none, the solution
    /// set to unknown and no constants are declared.
    pub fn from_fn(
        dim: usize,
        label: impl Into<String>,
        field: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        Ok(OperatorInstance {
            dim,
            label: label.into(),
            field: Field::Custom(Arc::new(field)),
            noise: NoiseModel::None,
            declared: DeclaredConstants::default(),
            solution_set: SolutionSet::Unknown,
        })
    }

    /// Adds independent Gaussian noise of the given per-coordinate variance and
    /// declares the matching total variance `dim·σ²`. Finite-sum operators keep
    /// their index sampling and reject this.
    pub fn with_gaussian_noise(mut self, sigma_sq_per_coord: f64) -> Result<Self> {
        if matches!(self.field, Field::FiniteSum { .. }) {
            return Err(Error::invalid(
                "noise",
                "finite-sum operators sample components, not additive noise",
            ));
        }
        if !(sigma_sq_per_coord >= 0.0 && sigma_sq_per_coord.is_finite()) {
            return Err(Error::invalid("sigma_sq_per_coord", "must be finite and >= 0"));
        }
        self.noise = if sigma_sq_per_coord == 0.0 {
            NoiseModel::None
        } else {
            NoiseModel::GaussianIid { sigma_sq_per_coord }
        };
        self.declared.sigma_sq = Some(self.dim as f64 * sigma_sq_per_coord);
        Ok(self)
    }

    pub fn with_solution_set(mut self, solution_set: SolutionSet) -> Result<Self> {
        for p in solution_set.points() {
            check_dim(self.dim, p.len())?;
        }
        self.solution_set = solution_set;
        Ok(self)
    }

    pub fn with_declared(mut self, declared: DeclaredConstants) -> Self {
        self.declared = declared;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn declared(&self) -> &DeclaredConstants {
        &self.declared
    }

    pub fn solution_set(&self) -> &SolutionSet {
        &self.solution_set
    }

    /// The exponent `p` when this is the `example1` family.
    pub fn example1_exponent(&self) -> Option<f64> {
        match self.field {
            Field::Example1 { p } => Some(p),
            _ => None,
        }
    }

    /// Number of summands for finite-sum operators.
    pub fn n_components(&self) -> Option<usize> {
        match &self.field {
            Field::FiniteSum { components, .. } => Some(components.len()),
            _ => None,
        }
    }

    /// Mean field `F(u)`. Deterministic.
    pub fn eval_mean(&self, u: &Vector) -> Result<Vector> {
        check_dim(self.dim, u.len())?;
        Ok(self.mean_unchecked(u))
    }

    /// Component `F_i(u)` of a finite-sum operator.
    pub fn eval_component(&self, index: usize, u: &Vector) -> Result<Vector> {
        check_dim(self.dim, u.len())?;
        match &self.field {
            Field::FiniteSum { components, .. } => components
                .get(index)
                .map(|c| c.apply(u))
                .ok_or_else(|| Error::invalid("index", format!("{index} out of range"))),
            _ => Err(Error::invalid("index", "operator is not a finite sum")),
        }
    }

    /// One draw of `Φ(u, ξ)`, consuming one noise draw from `rng`.
    pub fn sample_oracle<R: Rng + ?Sized>(&self, u: &Vector, rng: &mut R) -> Result<Vector> {
        check_dim(self.dim, u.len())?;
        Ok(match (&self.noise, &self.field) {
            (NoiseModel::FiniteSumUniform { n }, Field::FiniteSum { components, .. }) => {
                let i = rng.random_range(0..*n);
                components[i].apply(u)
            }
            (NoiseModel::GaussianIid { sigma_sq_per_coord }, _) => {
                let std = sigma_sq_per_coord.sqrt();
                let mut g = self.mean_unchecked(u);
                for x in g.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *x += std * z;
                }
                g
            }
            _ => self.mean_unchecked(u),
        })
    }

    fn mean_unchecked(&self, u: &Vector) -> Vector {
        match &self.field {
            Field::Example1 { p } => example1_field(*p, u),
            Field::Switched {
                map,
                radius,
                c_outside,
            } => {
                let c = if u.norm() <= *radius { 1.0 } else { *c_outside };
                map.apply(u) * c
            }
            Field::FiniteSum { mean, .. } => mean.apply(u),
            Field::Custom(f) => f(u),
        }
    }
}

/// `sign(x)|x|^e`, with the value at `x = 0` fixed to 0 for every exponent.
fn signed_power(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

fn example1_field(p: f64, u: &Vector) -> Vector {
    let c = if u.norm() <= 1.0 { 2.0 } else { 1.0 };
    let (u1, u2) = (u[0], u[1]);
    Vector::from_vec(vec![
        c * (signed_power(u1, p - 1.0) + u2),
        c * (signed_power(u2, p - 1.0) - u1),
    ])
}

/// The `example1` power operator on `ℝ²` with exponent `p > 0`, no noise attached.
///
/// Declares `μ = 2^{1−p}` for `p ≥ 1` (and `μ = 1` below, where the Jensen step
/// no longer applies), and growth constants `C = 2`, `D = 4√2` only for
/// `1 ≤ p ≤ 2`, the range where the envelope actually holds.
pub fn make_example1(p: f64) -> Result<OperatorInstance> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid("p", format!("must be > 0, got {p}")));
    }
    let has_growth = (1.0..=2.0).contains(&p);
    let declared = DeclaredConstants {
        growth_slope: has_growth.then_some(2.0),
        growth_offset: has_growth.then_some(4.0 * std::f64::consts::SQRT_2),
        lipschitz: None,
        mu: Some(if p >= 1.0 { 2f64.powf(1.0 - p) } else { 1.0 }),
        p: Some(p),
        sigma_sq: Some(0.0),
    };
    Ok(OperatorInstance {
        dim: 2,
        label: format!("example1(p={p})"),
        field: Field::Example1 { p },
        noise: NoiseModel::None,
        declared,
        solution_set: SolutionSet::Point(Vector::zeros(2)),
    })
}

fn symmetric_eigenvalues(a: &Matrix, name: &'static str) -> Result<DVector<f64>> {
    if !a.is_square() {
        return Err(Error::invalid(name, "matrix is not square"));
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > 1e-10 * scale {
        return Err(Error::invalid(name, "matrix is not symmetric"));
    }
    Ok(SymmetricEigen::new(a.clone()).eigenvalues)
}

fn min_eigenvalue(a: &Matrix, name: &'static str) -> Result<f64> {
    Ok(symmetric_eigenvalues(a, name)?.min())
}

/// `√λ_max(JᵀJ)`, the spectral norm of `J`.
pub fn spectral_norm(j: &Matrix) -> f64 {
    let gram = j.transpose() * j;
    SymmetricEigen::new(gram).eigenvalues.max().max(0.0).sqrt()
}

/// Inputs of the switched quadratic operator.
#[derive(Clone, Debug)]
pub struct SwitchedQuadraticParams {
    pub a1: Matrix,
    pub a2: Matrix,
    pub a3: Matrix,
    pub b1: Vector,
    pub b2: Vector,
    pub noise: NoiseModel,
    pub radius_switch: f64,
    pub c_outside: f64,
}

impl SwitchedQuadraticParams {
    pub fn new(a1: Matrix, a2: Matrix, a3: Matrix, b1: Vector, b2: Vector) -> Self {
        SwitchedQuadraticParams {
            a1,
            a2,
            a3,
            b1,
            b2,
            noise: NoiseModel::None,
            radius_switch: 10.0,
            c_outside: 0.5,
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }
}

fn block_jacobian(a: &Matrix, b: &Matrix, c: &Matrix) -> Matrix {
    let (m, s) = (a.nrows(), c.nrows());
    let mut j = Matrix::zeros(m + s, m + s);
    j.view_mut((0, 0), (m, m)).copy_from(a);
    j.view_mut((0, m), (m, s)).copy_from(b);
    j.view_mut((m, 0), (s, m)).copy_from(&(-b.transpose()));
    j.view_mut((m, m), (s, s)).copy_from(c);
    j
}

fn stack(top: &Vector, bottom: &Vector) -> Vector {
    Vector::from_iterator(top.len() + bottom.len(), top.iter().chain(bottom.iter()).copied())
}

/// `F(u) = c·(Ju + b)` with `c = 1` for `‖u‖ ≤ radius_switch`, `c_outside`
/// otherwise. Gaussian noise, when present, is added outside the factor `c`.
///
/// Declared constants: `C = c_max·√λ_max(JᵀJ)`, `D = c_max·‖b‖`,
/// `μ = c_min·min{λ_min(A₁), λ_min(A₃)}`, `p = 2`, and `L = C`, the Lipschitz
/// constant of each affine piece (the switch itself is a jump).
pub fn make_switched_quadratic(params: SwitchedQuadraticParams) -> Result<OperatorInstance> {
    let SwitchedQuadraticParams {
        a1,
        a2,
        a3,
        b1,
        b2,
        noise,
        radius_switch,
        c_outside,
    } = params;
    let (m, s) = (a1.nrows(), a3.nrows());
    if m == 0 || s == 0 {
        return Err(Error::invalid("dims", "blocks must be non-empty"));
    }
    if a2.shape() != (m, s) {
        return Err(Error::invalid(
            "a2",
            format!("expected {m}x{s}, got {}x{}", a2.nrows(), a2.ncols()),
        ));
    }
    check_dim(m, b1.len())?;
    check_dim(s, b2.len())?;
    if !(radius_switch > 0.0 && c_outside > 0.0) {
        return Err(Error::invalid("switch", "radius and outside factor must be > 0"));
    }
    let mu1 = min_eigenvalue(&a1, "a1")?;
    let mu3 = min_eigenvalue(&a3, "a3")?;
    if mu1 <= 0.0 {
        return Err(Error::invalid("a1", format!("not positive definite (λ_min = {mu1:e})")));
    }
    if mu3 <= 0.0 {
        return Err(Error::invalid("a3", format!("not positive definite (λ_min = {mu3:e})")));
    }
    let jacobian = block_jacobian(&a1, &a2, &a3);
    let bias = stack(&b1, &b2);
    let dim = m + s;

    let c_max = c_outside.max(1.0);
    let c_min = c_outside.min(1.0);
    let growth = c_max * spectral_norm(&jacobian);
    let sigma_sq = match noise {
        NoiseModel::None => 0.0,
        NoiseModel::GaussianIid { sigma_sq_per_coord } => dim as f64 * sigma_sq_per_coord,
        NoiseModel::FiniteSumUniform { .. } => {
            return Err(Error::invalid("noise", "switched quadratic takes additive noise"))
        }
    };
    let declared = DeclaredConstants {
        growth_slope: Some(growth),
        growth_offset: Some(c_max * bias.norm()),
        lipschitz: Some(growth),
        mu: Some(c_min * mu1.min(mu3)),
        p: Some(2.0),
        sigma_sq: Some(sigma_sq),
    };
    let solution_set = SolutionSet::affine(jacobian.clone(), bias.clone())?;
    Ok(OperatorInstance {
        dim,
        label: format!("switched_quadratic(m={m}, s={s})"),
        field: Field::Switched {
            map: AffineMap { jacobian, bias },
            radius: radius_switch,
            c_outside,
        },
        noise,
        declared,
        solution_set,
    })
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Matrix {
    // Filled row by row so the draw order does not depend on storage layout.
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let z: f64 = StandardNormal.sample(rng);
            out[(i, j)] = std * z;
        }
    }
    out
}

fn gaussian_vector<R: Rng + ?Sized>(len: usize, std: f64, rng: &mut R) -> Vector {
    Vector::from_iterator(
        len,
        (0..len).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        }),
    )
}

/// Symmetric positive-definite matrix with spectrum in `[lo, hi]`.
///
/// Draw order: `dim − 2` eigenvalues uniform on `[lo, hi]` (the endpoints `lo`
/// and `hi` are always included; a 1×1 matrix gets `lo`), then a `dim × dim`
/// standard Gaussian matrix `S` row by row. The result is `QΛQᵀ` with `Q`
/// the orthogonal factor of `S = QR`.
pub fn spd_with_spectrum<R: Rng + ?Sized>(dim: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Matrix> {
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::invalid(
            "spectrum",
            format!("need 0 < lo <= hi, got [{lo}, {hi}]"),
        ));
    }
    let mut eigenvalues = Vec::with_capacity(dim);
    eigenvalues.push(lo);
    if dim >= 2 {
        eigenvalues.push(hi);
        if dim > 2 {
            let uniform = Uniform::new_inclusive(lo, hi)
                .map_err(|e| Error::invalid("spectrum", e.to_string()))?;
            eigenvalues.extend((2..dim).map(|_| uniform.sample(rng)));
        }
    }
    let s = gaussian_matrix(dim, dim, 1.0, rng);
    let q = s.qr().q();
    let lambda = Matrix::from_diagonal(&Vector::from_vec(eigenvalues));
    let a = &q * lambda * q.transpose();
    Ok((&a + a.transpose()) * 0.5)
}

/// Random instance recipe for the switched quadratic operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchedQuadraticRecipe {
    pub m: usize,
    pub s: usize,
    pub mu_a1: f64,
    pub mu_a3: f64,
    pub l_a1: f64,
    pub l_a3: f64,
    /// Variance of the entries of `A₂`; `1/(m+s)²` when absent.
    pub a2_var: Option<f64>,
    /// Variance of the entries of `b`; `1/(m+s)` when absent.
    pub b_var: Option<f64>,
    /// Per-coordinate noise variance; `1/(m+s)` when absent.
    pub noise_var: Option<f64>,
    pub radius_switch: f64,
    pub c_outside: f64,
}

impl SwitchedQuadraticRecipe {
    pub fn new(m: usize, s: usize, mu_a: f64, l_a: f64) -> Self {
        SwitchedQuadraticRecipe {
            m,
            s,
            mu_a1: mu_a,
            mu_a3: mu_a,
            l_a1: l_a,
            l_a3: l_a,
            a2_var: None,
            b_var: None,
            noise_var: None,
            radius_switch: 10.0,
            c_outside: 0.5,
        }
    }

    /// Draw order: `A₁` (eigenvalues, Gaussian square), `A₃` (same), `A₂` row
    /// by row, `b₁`, `b₂`.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<OperatorInstance> {
        let total = (self.m + self.s) as f64;
        let a2_std = self.a2_var.unwrap_or(1.0 / (total * total)).sqrt();
        let b_std = self.b_var.unwrap_or(1.0 / total).sqrt();
        let noise_var = self.noise_var.unwrap_or(1.0 / total);
        let a1 = spd_with_spectrum(self.m, self.mu_a1, self.l_a1, rng)?;
        let a3 = spd_with_spectrum(self.s, self.mu_a3, self.l_a3, rng)?;
        let a2 = gaussian_matrix(self.m, self.s, a2_std, rng);
        let b1 = gaussian_vector(self.m, b_std, rng);
        let b2 = gaussian_vector(self.s, b_std, rng);
        let noise = if noise_var > 0.0 {
            NoiseModel::GaussianIid {
                sigma_sq_per_coord: noise_var,
            }
        } else {
            NoiseModel::None
        };
        make_switched_quadratic(SwitchedQuadraticParams {
            a1,
            a2,
            a3,
            b1,
            b2,
            noise,
            radius_switch: self.radius_switch,
            c_outside: self.c_outside,
        })
    }
}

/// Builds a finite-sum operator `F = (1/n) Σ F_i` from affine components.
///
/// Declared constants: `C = L = ‖J̄‖₂`, `D = ‖b̄‖`, `μ = λ_min((J̄ + J̄ᵀ)/2)`,
/// `p = 2`. The noise variance is left undeclared: it depends on the region
/// the iterates visit and is estimated empirically.
pub fn finite_sum_from_components(components: Vec<AffineMap>) -> Result<OperatorInstance> {
    let n = components.len();
    if n == 0 {
        return Err(Error::invalid("n", "need at least one component"));
    }
    let dim = components[0].bias.len();
    for c in &components {
        check_dim(dim, c.bias.len())?;
        if c.jacobian.shape() != (dim, dim) {
            return Err(Error::invalid("component", "jacobian shape mismatch"));
        }
    }
    let mut jacobian = Matrix::zeros(dim, dim);
    let mut bias = Vector::zeros(dim);
    for c in &components {
        jacobian += &c.jacobian;
        bias += &c.bias;
    }
    jacobian /= n as f64;
    bias /= n as f64;

    let sym = (&jacobian + jacobian.transpose()) * 0.5;
    let mu = SymmetricEigen::new(sym).eigenvalues.min();
    let growth = spectral_norm(&jacobian);
    let declared = DeclaredConstants {
        growth_slope: Some(growth),
        growth_offset: Some(bias.norm()),
        lipschitz: Some(growth),
        mu: (mu > 0.0).then_some(mu),
        p: Some(2.0),
        sigma_sq: None,
    };
    let solution_set = SolutionSet::affine(jacobian.clone(), bias.clone())?;
    Ok(OperatorInstance {
        dim,
        label: format!("finite_sum(n={n}, dim={dim})"),
        field: Field::FiniteSum {
            components,
            mean: AffineMap { jacobian, bias },
        },
        noise: NoiseModel::FiniteSumUniform { n },
        declared,
        solution_set,
    })
}

/// Recipe for the finite-sum quadratic min-max game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSumRecipe {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub mu_a: f64,
    pub l_a: f64,
    pub mu_c: f64,
    pub l_c: f64,
    /// Variance of the entries of `B_i`; `1/(m+s)²` when absent.
    pub sigma_b_sq: Option<f64>,
    /// Variance of the entries of `a_i`, `c_i`; `1/(m+s)` when absent.
    pub sigma_bias_sq: Option<f64>,
}

impl FiniteSumRecipe {
    pub fn new(n: usize, m: usize, s: usize, mu: f64, l: f64) -> Self {
        FiniteSumRecipe {
            n,
            m,
            s,
            mu_a: mu,
            l_a: l,
            mu_c: mu,
            l_c: l,
            sigma_b_sq: None,
            sigma_bias_sq: None,
        }
    }
}

/// Generates `F_i(u) = [[A_i, B_i], [−B_iᵀ, C_i]]u + [a_i; c_i]` for
/// `i = 1..n`. Per component the draw order is `A_i`, `C_i` (see
/// [`spd_with_spectrum`]), then `B_i` row by row, `a_i`, `c_i`.
pub fn make_finite_sum_game<R: Rng + ?Sized>(recipe: &FiniteSumRecipe, rng: &mut R) -> Result<OperatorInstance> {
    if recipe.n == 0 {
        return Err(Error::invalid("n", "need at least one component"));
    }
    if recipe.m == 0 || recipe.s == 0 {
        return Err(Error::invalid("dims", "m and s must be at least 1"));
    }
    if !(recipe.mu_a > 0.0 && recipe.mu_a <= recipe.l_a) {
        return Err(Error::invalid("mu_a", "need 0 < mu_a <= l_a"));
    }
    if !(recipe.mu_c > 0.0 && recipe.mu_c <= recipe.l_c) {
        return Err(Error::invalid("mu_c", "need 0 < mu_c <= l_c"));
    }
    let total = (recipe.m + recipe.s) as f64;
    let b_std = recipe.sigma_b_sq.unwrap_or(1.0 / (total * total)).sqrt();
    let bias_std = recipe.sigma_bias_sq.unwrap_or(1.0 / total).sqrt();
    let mut components = Vec::with_capacity(recipe.n);
    for _ in 0..recipe.n {
        let a = spd_with_spectrum(recipe.m, recipe.mu_a, recipe.l_a, rng)?;
        let c = spd_with_spectrum(recipe.s, recipe.mu_c, recipe.l_c, rng)?;
        let b = gaussian_matrix(recipe.m, recipe.s, b_std, rng);
        let a_bias = gaussian_vector(recipe.m, bias_std, rng);
        let c_bias = gaussian_vector(recipe.s, bias_std, rng);
        components.push(AffineMap {
            jacobian: block_jacobian(&a, &b, &c),
            bias: stack(&a_bias, &c_bias),
        });
    }
    finite_sum_from_components(components)
}

/// `κ_F = L/μ` when a Lipschitz constant is declared, `C/μ` otherwise.
pub fn condition_number(op: &OperatorInstance) -> Result<f64> {
    let d = op.declared();
    let mu = d.mu.ok_or(Error::UnavailableConstant("mu"))?;
    let top = d
        .lipschitz
        .or(d.growth_slope)
        .ok_or(Error::UnavailableConstant("lipschitz or growth_slope"))?;
    Ok(top / mu)
}
