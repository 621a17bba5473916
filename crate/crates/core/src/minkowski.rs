//! Pseudo-Euclidean linear algebra in the fixed convention
//! `J = diag(+1 (n times), -1 (nu times))`, timelike coordinates last.
//!
//! Besides the bilinear form and causal classification this module holds the
//! Lorentz group `SO0(n, nu)`, its Lie algebra, the affine group
//! `SE0(n, 1) = R^{n,1} x| SO0(n, 1)`, an explicit orbit solver for the
//! `SO0(n, 1)` action on pseudospheres and light cones, and the word builder
//! that turns one translation plus a section of the linear projection into
//! every other translation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Numerical tolerances shared by the group routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Acceptance of constructed Lorentz matrices and orbit solutions.
    pub construction: f64,
    /// Property-level checks (closure words, transport isometry).
    pub property: f64,
    /// Plain group arithmetic.
    pub group: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            construction: 1e-9,
            property: 1e-8,
            group: 1e-12,
        }
    }
}

/// Signature `(n, nu)` of a pseudo-Euclidean space `R^{n,nu}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub n: usize,
    pub nu: usize,
}

impl Signature {
    pub fn new(n: usize, nu: usize) -> Result<Self> {
        if n + nu == 0 {
            return Err(Error::InvalidSignature("total dimension must be at least 1".into()));
        }
        Ok(Self { n, nu })
    }

    /// `R^{n,1}`.
    pub fn lorentzian(n: usize) -> Self {
        Self { n, nu: 1 }
    }

    pub fn dim(&self) -> usize {
        self.n + self.nu
    }

    pub fn is_lorentzian(&self) -> bool {
        self.nu == 1
    }

    /// Dimension of `so(n, nu)`.
    pub fn algebra_dim(&self) -> usize {
        let m = self.dim();
        m * (m - 1) / 2
    }

    /// `+1` for the first `n` coordinates, `-1` for the last `nu`.
    pub fn sign(&self, i: usize) -> f64 {
        if i < self.n {
            1.0
        } else {
            -1.0
        }
    }

    pub fn signs(&self) -> Vector {
        Vector::from_fn(self.dim(), |i, _| self.sign(i))
    }

    /// The form matrix `J`.
    pub fn form(&self) -> Matrix {
        Matrix::from_diagonal(&self.signs())
    }

    pub fn check_dim(&self, v: &Vector) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `<u, v>_J`.
    pub fn inner(&self, u: &Vector, v: &Vector) -> Result<f64> {
        self.check_dim(u)?;
        self.check_dim(v)?;
        Ok(self.dot(u, v))
    }

    /// `<u, v>_J` without dimension checks.
    pub(crate) fn dot(&self, u: &Vector, v: &Vector) -> f64 {
        u.iter()
            .zip(v.iter())
            .enumerate()
            .map(|(i, (a, b))| self.sign(i) * a * b)
            .sum()
    }

    pub(crate) fn quad(&self, v: &Vector) -> f64 {
        self.dot(v, v)
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.n, self.nu)
    }
}

/// `<u, v>_J` for signature `sig`.
pub fn inner(u: &Vector, v: &Vector, sig: Signature) -> Result<f64> {
    sig.inner(u, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeComponent {
    Future,
    Past,
}

impl TimeComponent {
    pub fn flip(self) -> Self {
        match self {
            TimeComponent::Future => TimeComponent::Past,
            TimeComponent::Past => TimeComponent::Future,
        }
    }
}

/// Causal character of a vector. The zero vector is spacelike.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CausalClass {
    Spacelike,
    Timelike(TimeComponent),
    Lightlike(TimeComponent),
}

impl CausalClass {
    pub fn component(&self) -> Option<TimeComponent> {
        match self {
            CausalClass::Spacelike => None,
            CausalClass::Timelike(c) | CausalClass::Lightlike(c) => Some(*c),
        }
    }
}

/// Relative threshold under which `<v, v>` counts as zero.
pub const CAUSAL_TOL: f64 = 1e-12;

/// Classifies `v` by the sign of `<v, v>_J`; the component of a
/// non-spacelike vector is read off the sign of its last coordinate.
pub fn causal_character(v: &Vector, sig: Signature) -> CausalClass {
    causal_character_with_tol(v, sig, CAUSAL_TOL)
}

pub fn causal_character_with_tol(v: &Vector, sig: Signature, tol: f64) -> CausalClass {
    let scale = v.norm_squared();
    if scale == 0.0 {
        return CausalClass::Spacelike;
    }
    let q = sig.quad(v);
    let component = if v[v.len() - 1] < 0.0 {
        TimeComponent::Past
    } else {
        TimeComponent::Future
    };
    if q.abs() <= tol * scale {
        CausalClass::Lightlike(component)
    } else if q > 0.0 {
        CausalClass::Spacelike
    } else {
        CausalClass::Timelike(component)
    }
}

fn op_norm(m: &Matrix) -> f64 {
    m.clone().singular_values().max()
}

/// Fills the empty slots of a pseudo-orthonormal basis.
///
/// `fixed` pins vectors to slots; slot `i` must carry `<b_i, b_i> = sig.sign(i)`
/// under `inner`. Timelike slots are filled first, each slot taking the
/// candidate whose residual has the largest norm of the required sign.
pub fn pseudo_gram_schmidt<F>(
    inner: F,
    sig: Signature,
    fixed: Vec<(usize, Vector)>,
    candidates: &[Vector],
    tol: f64,
) -> Result<Vec<Vector>>
where
    F: Fn(&Vector, &Vector) -> f64,
{
    let m = sig.dim();
    let mut slots: Vec<Option<Vector>> = vec![None; m];
    let mut accepted: Vec<(Vector, f64)> = Vec::with_capacity(m);
    for (i, v) in fixed {
        if i >= m || slots[i].is_some() {
            return Err(Error::Degenerate(format!("invalid fixed slot {i}")));
        }
        accepted.push((v.clone(), sig.sign(i)));
        slots[i] = Some(v);
    }
    let mut pool: Vec<Vector> = candidates.to_vec();
    let order: Vec<usize> = (sig.n..m).chain(0..sig.n).collect();
    for slot in order {
        if slots[slot].is_some() {
            continue;
        }
        let want = sig.sign(slot);
        let mut best: Option<(usize, Vector, f64)> = None;
        for (k, c) in pool.iter().enumerate() {
            let mut r = c.clone();
            for (b, eps) in &accepted {
                let coeff = eps * inner(&r, b);
                r.axpy(-coeff, b, 1.0);
            }
            let q = want * inner(&r, &r);
            if best.as_ref().is_none_or(|(_, _, bq)| q > *bq) {
                best = Some((k, r, q));
            }
        }
        match best {
            Some((k, r, q)) if q > tol => {
                pool.remove(k);
                let b = r / q.sqrt();
                accepted.push((b.clone(), want));
                slots[slot] = Some(b);
            }
            _ => {
                return Err(Error::Degenerate(format!(
                    "no candidate completes slot {slot} of signature {sig}"
                )))
            }
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("filled")).collect())
}

/// Element of `SO0(n, nu)`: `C^T J C = J`, `det C = 1`, time orientation preserved.
#[derive(Clone, Debug, PartialEq)]
pub struct LorentzMatrix {
    sig: Signature,
    mat: Matrix,
}

impl LorentzMatrix {
    pub fn new(sig: Signature, mat: Matrix) -> Result<Self> {
        Self::with_tolerance(sig, mat, Tolerances::default().construction)
    }

    /// Validates with tolerance `tol`, scaled by the largest squared entry for
    /// strongly boosted matrices.
    pub fn with_tolerance(sig: Signature, mat: Matrix, tol: f64) -> Result<Self> {
        let m = sig.dim();
        let fail = |reason: String| Error::NotLorentz {
            n: sig.n,
            nu: sig.nu,
            reason,
        };
        if mat.nrows() != m || mat.ncols() != m {
            return Err(fail(format!("shape {}x{}", mat.nrows(), mat.ncols())));
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(fail("non-finite entry".into()));
        }
        let scale = mat.amax().powi(2).max(1.0);
        let out = Self { sig, mat };
        let res = out.residual();
        if res > tol * scale {
            return Err(fail(format!("|C^T J C - J| = {res:e}")));
        }
        let det = out.mat.determinant();
        if (det - 1.0).abs() > tol * scale {
            return Err(fail(format!("det = {det}")));
        }
        if sig.nu > 0 {
            let tt = out.mat.view((sig.n, sig.n), (sig.nu, sig.nu)).determinant();
            if tt < 1.0 - tol * scale {
                return Err(fail(format!("time orientation reversed (det C_tt = {tt})")));
            }
        }
        Ok(out)
    }

    /// Wraps a matrix already known to be in the group.
    pub(crate) fn from_raw(sig: Signature, mat: Matrix) -> Self {
        Self { sig, mat }
    }

    pub fn identity(sig: Signature) -> Self {
        Self {
            sig,
            mat: Matrix::identity(sig.dim(), sig.dim()),
        }
    }

    /// Rotation by `angle` in the spacelike `(i, j)` plane, `e_i -> cos e_i + sin e_j`.
    pub fn rotation(sig: Signature, i: usize, j: usize, angle: f64) -> Result<Self> {
        if i >= sig.n || j >= sig.n || i == j {
            return Err(Error::Degenerate(format!("({i},{j}) is not a spacelike plane")));
        }
        let mut mat = Matrix::identity(sig.dim(), sig.dim());
        let (s, c) = angle.sin_cos();
        mat[(i, i)] = c;
        mat[(j, j)] = c;
        mat[(j, i)] = s;
        mat[(i, j)] = -s;
        Ok(Self { sig, mat })
    }

    /// Boost with `rapidity` mixing spacelike axis `i` and timelike axis `t`.
    pub fn boost(sig: Signature, i: usize, t: usize, rapidity: f64) -> Result<Self> {
        if i >= sig.n || t < sig.n || t >= sig.dim() {
            return Err(Error::Degenerate(format!("({i},{t}) is not a boost plane")));
        }
        let mut mat = Matrix::identity(sig.dim(), sig.dim());
        let (sh, ch) = (rapidity.sinh(), rapidity.cosh());
        mat[(i, i)] = ch;
        mat[(t, t)] = ch;
        mat[(i, t)] = sh;
        mat[(t, i)] = sh;
        Ok(Self { sig, mat })
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    /// `|C^T J C - J|` in the Frobenius norm.
    pub fn residual(&self) -> f64 {
        let j = self.sig.form();
        (self.mat.transpose() * &j * &self.mat - j).norm()
    }

    /// `C^{-1} = J C^T J`.
    pub fn inverse(&self) -> Self {
        let j = self.sig.form();
        Self {
            sig: self.sig,
            mat: &j * self.mat.transpose() * &j,
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            sig: self.sig,
            mat: &self.mat * &other.mat,
        }
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.mat * v
    }

    /// Frobenius distance `|C - I|`.
    pub fn distance_from_identity(&self) -> f64 {
        (&self.mat - Matrix::identity(self.sig.dim(), self.sig.dim())).norm()
    }

    /// Row-major entries, the JSON layout.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.mat)
    }
}

pub(crate) fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Degenerate("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Element `(y, C)` of `SE0 = R^{n,nu} x| SO0(n, nu)` acting by `v -> C v + y`.
#[derive(Clone, Debug, PartialEq)]
pub struct SEElement {
    y: Vector,
    c: LorentzMatrix,
}

impl SEElement {
    pub fn new(y: Vector, c: LorentzMatrix) -> Result<Self> {
        c.signature().check_dim(&y)?;
        Ok(Self { y, c })
    }

    pub fn identity(sig: Signature) -> Self {
        Self {
            y: Vector::zeros(sig.dim()),
            c: LorentzMatrix::identity(sig),
        }
    }

    /// Pure translation `phi_v = (v, id)`.
    pub fn translation(sig: Signature, v: Vector) -> Result<Self> {
        Self::new(v, LorentzMatrix::identity(sig))
    }

    pub fn linear(c: LorentzMatrix) -> Self {
        let y = Vector::zeros(c.signature().dim());
        Self { y, c }
    }

    pub fn signature(&self) -> Signature {
        self.c.signature()
    }

    pub fn translation_part(&self) -> &Vector {
        &self.y
    }

    pub fn linear_part(&self) -> &LorentzMatrix {
        &self.c
    }

    /// `(y1, C1) o (y2, C2) = (y1 + C1 y2, C1 C2)`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            y: &self.y + self.c.apply(&other.y),
            c: self.c.compose(&other.c),
        }
    }

    /// `(y, C)^{-1} = (-C^{-1} y, C^{-1})`.
    pub fn inverse(&self) -> Self {
        let ci = self.c.inverse();
        Self {
            y: -ci.apply(&self.y),
            c: ci,
        }
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        self.c.apply(v) + &self.y
    }

    /// Max of the translation and linear-part discrepancies.
    pub fn distance(&self, other: &Self) -> f64 {
        let dy = (&self.y - &other.y).norm();
        let dc = (self.c.matrix() - other.c.matrix()).norm();
        dy.max(dc)
    }

    /// `|C - I| <= tol` and `|y| >= 10 tol`.
    pub fn is_pure_translation(&self, tol: f64) -> bool {
        self.c.distance_from_identity() <= tol && self.y.norm() >= 10.0 * tol
    }
}

/// JSON shape of an [`SEElement`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SEElementRecord {
    pub y: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
}

impl From<&SEElement> for SEElementRecord {
    fn from(b: &SEElement) -> Self {
        Self {
            y: b.y.iter().copied().collect(),
            c: b.c.rows(),
        }
    }
}

impl SEElementRecord {
    pub fn to_element(&self, sig: Signature) -> Result<SEElement> {
        let c = LorentzMatrix::new(sig, matrix_from_rows(&self.c)?)?;
        SEElement::new(Vector::from_vec(self.y.clone()), c)
    }
}

/// `xi_A = (x0 - A x0, A)`, the element of `SE0` with linear part `A` fixing `x0`.
pub fn fixed_point_embedding(x0: &Vector, a: &LorentzMatrix) -> Result<SEElement> {
    a.signature().check_dim(x0)?;
    SEElement::new(x0 - a.apply(x0), a.clone())
}

/// Element of `so(n, nu)`: `X^T J + J X = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebraElement {
    sig: Signature,
    mat: Matrix,
}

impl LieAlgebraElement {
    pub fn new(sig: Signature, mat: Matrix) -> Result<Self> {
        if mat.nrows() != sig.dim() || mat.ncols() != sig.dim() {
            return Err(Error::DimensionMismatch {
                expected: sig.dim(),
                found: mat.nrows(),
            });
        }
        let out = Self { sig, mat };
        let residual = out.skew_residual();
        if residual > 1e-9 * out.mat.amax().max(1.0) {
            return Err(Error::NotSkew { residual });
        }
        Ok(out)
    }

    /// Orthogonal projection of an arbitrary matrix onto `so(n, nu)`.
    pub fn project(sig: Signature, mat: &Matrix) -> Self {
        let j = sig.form();
        let mat = (mat - &j * mat.transpose() * &j) * 0.5;
        Self { sig, mat }
    }

    pub fn zero(sig: Signature) -> Self {
        Self {
            sig,
            mat: Matrix::zeros(sig.dim(), sig.dim()),
        }
    }

    /// Infinitesimal rotation in the spacelike `(i, j)` plane.
    pub fn rotation_generator(sig: Signature, i: usize, j: usize) -> Result<Self> {
        if i >= sig.n || j >= sig.n || i == j {
            return Err(Error::Degenerate(format!("({i},{j}) is not a spacelike plane")));
        }
        let mut mat = Matrix::zeros(sig.dim(), sig.dim());
        mat[(j, i)] = 1.0;
        mat[(i, j)] = -1.0;
        Ok(Self { sig, mat })
    }

    /// Infinitesimal boost mixing spacelike `i` and timelike `t`.
    pub fn boost_generator(sig: Signature, i: usize, t: usize) -> Result<Self> {
        if i >= sig.n || t < sig.n || t >= sig.dim() {
            return Err(Error::Degenerate(format!("({i},{t}) is not a boost plane")));
        }
        let mut mat = Matrix::zeros(sig.dim(), sig.dim());
        mat[(i, t)] = 1.0;
        mat[(t, i)] = 1.0;
        Ok(Self { sig, mat })
    }

    /// The generator of the `(i, j)` coordinate plane, `i < j`; a rotation
    /// when both are spacelike, a boost when they differ in type.
    pub fn plane_generator(sig: Signature, i: usize, j: usize) -> Self {
        let mut mat = Matrix::zeros(sig.dim(), sig.dim());
        // X = e_j e_i^T eps_i - e_i e_j^T eps_j, so J X is antisymmetric
        mat[(j, i)] = sig.sign(i) * sig.sign(j);
        mat[(i, j)] = -1.0;
        Self { sig, mat }
    }

    /// Standard basis of `so(n, nu)`, ordered by plane `(i, j)`, `i < j`.
    pub fn basis(sig: Signature) -> Vec<Self> {
        let m = sig.dim();
        let mut out = Vec::with_capacity(sig.algebra_dim());
        for i in 0..m {
            for j in (i + 1)..m {
                out.push(Self::plane_generator(sig, i, j));
            }
        }
        out
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn skew_residual(&self) -> f64 {
        let j = self.sig.form();
        (self.mat.transpose() * &j + &j * &self.mat).norm()
    }

    /// Upper-triangular entries of the antisymmetric matrix `J X`; a linear
    /// isomorphism `so(n, nu) -> R^{m(m-1)/2}`.
    pub fn coordinates(&self) -> Vec<f64> {
        let m = self.sig.dim();
        let mut out = Vec::with_capacity(self.sig.algebra_dim());
        for i in 0..m {
            for j in (i + 1)..m {
                out.push(self.sig.sign(i) * self.mat[(i, j)]);
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            sig: self.sig,
            mat: &self.mat * s,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            sig: self.sig,
            mat: &self.mat + &other.mat,
        }
    }

    pub fn bracket(&self, other: &Self) -> Self {
        Self {
            sig: self.sig,
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
        }
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }
}

/// Matrix exponential restricted to `so(n, nu)`.
pub fn so_exp(x: &LieAlgebraElement) -> LorentzMatrix {
    LorentzMatrix::from_raw(x.sig, expm(&x.mat))
}

fn expm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let norm = a.norm();
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut term = Matrix::identity(n, n);
    let mut sum = Matrix::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Default radius for [`so_log`].
pub const LOG_RADIUS: f64 = 0.5;

/// Logarithm of a near-identity Lorentz matrix; requires `|C - I|_2 < 0.5`.
pub fn so_log(c: &LorentzMatrix) -> Result<LieAlgebraElement> {
    so_log_with_radius(c, LOG_RADIUS)
}

pub fn so_log_with_radius(c: &LorentzMatrix, radius: f64) -> Result<LieAlgebraElement> {
    let m = c.sig.dim();
    let eye = Matrix::identity(m, m);
    let norm = op_norm(&(c.matrix() - &eye));
    if norm >= radius {
        return Err(Error::OutsideLogRadius { norm, radius });
    }
    let log = log_near_identity(c.matrix(), 48)?;
    Ok(LieAlgebraElement::project(c.sig, &log))
}

/// Logarithm by repeated square roots with no radius restriction; fails when
/// the square-root iteration does not converge (eigenvalues on the negative
/// real axis).
pub fn so_log_unbounded(c: &LorentzMatrix) -> Result<LieAlgebraElement> {
    let log = log_near_identity(c.matrix(), 60)?;
    Ok(LieAlgebraElement::project(c.sig, &log))
}

fn log_near_identity(c: &Matrix, max_roots: usize) -> Result<Matrix> {
    let m = c.nrows();
    let eye = Matrix::identity(m, m);
    let mut a = c.clone();
    let mut roots = 0u32;
    while op_norm(&(&a - &eye)) > 0.05 {
        if roots as usize >= max_roots {
            return Err(Error::Degenerate("matrix logarithm did not converge".into()));
        }
        a = sqrtm(&a)?;
        roots += 1;
    }
    let x = &a - &eye;
    let mut power = x.clone();
    let mut sum = x.clone();
    for k in 2..80 {
        power = &power * &x;
        let term = &power / k as f64;
        if k % 2 == 0 {
            sum -= &term;
        } else {
            sum += &term;
        }
        if term.norm() < 1e-18 {
            break;
        }
    }
    Ok(sum * 2f64.powi(roots as i32))
}

/// Principal square root by the Denman-Beavers iteration.
fn sqrtm(a: &Matrix) -> Result<Matrix> {
    let m = a.nrows();
    let mut y = a.clone();
    let mut z = Matrix::identity(m, m);
    for _ in 0..100 {
        let yi = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular iterate in matrix square root".into()))?;
        let zi = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular iterate in matrix square root".into()))?;
        let ny = (&y + zi) * 0.5;
        let nz = (&z + yi) * 0.5;
        let delta = (&ny - &y).norm();
        y = ny;
        z = nz;
        if !y.iter().all(|x| x.is_finite()) {
            break;
        }
        if delta <= 1e-15 * y.norm() {
            return Ok(y);
        }
    }
    Err(Error::Degenerate("matrix square root did not converge".into()))
}

/// Singular values of the stacked coordinate vectors of `elements`, descending.
pub fn algebra_singular_values(elements: &[LieAlgebraElement]) -> Vec<f64> {
    let Some(first) = elements.first() else {
        return Vec::new();
    };
    let d = first.sig.algebra_dim();
    if d == 0 {
        return Vec::new();
    }
    let rows: Vec<Vec<f64>> = elements.iter().map(|e| e.coordinates()).collect();
    let stacked = Matrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let mut sv: Vec<f64> = stacked.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `max(rel_cutoff * s_max, abs_floor)`.
pub fn rank_from_singular_values(sv: &[f64], rel_cutoff: f64, abs_floor: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    let cut = (rel_cutoff * smax).max(abs_floor);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Dimension of the linear span of `elements`.
pub fn algebra_rank(elements: &[LieAlgebraElement], rel_cutoff: f64, abs_floor: f64) -> usize {
    rank_from_singular_values(&algebra_singular_values(elements), rel_cutoff, abs_floor)
}

/// Dimension of the Lie subalgebra generated by `elements` (span closed
/// under brackets).
pub fn lie_closure_rank(elements: &[LieAlgebraElement], rel_cutoff: f64, abs_floor: f64) -> usize {
    let Some(first) = elements.first() else {
        return 0;
    };
    let sig = first.sig;
    // normalize so the brackets stay on a common scale
    let mut span: Vec<LieAlgebraElement> = elements
        .iter()
        .filter(|e| e.norm() > abs_floor)
        .map(|e| e.scale(1.0 / e.norm()))
        .collect();
    let mut rank = algebra_rank(&span, rel_cutoff, abs_floor);
    loop {
        if rank >= sig.algebra_dim() {
            return rank;
        }
        let mut next = span.clone();
        for i in 0..span.len() {
            for j in (i + 1)..span.len() {
                let b = span[i].bracket(&span[j]);
                if b.norm() > abs_floor {
                    next.push(b.scale(1.0 / b.norm()));
                }
            }
        }
        let new_rank = algebra_rank(&next, rel_cutoff, abs_floor);
        if new_rank == rank {
            return rank;
        }
        span = span_basis(&next, rel_cutoff, abs_floor);
        rank = new_rank;
    }
}

/// Orthonormal basis (in coordinates) of the span, as algebra elements.
pub fn span_basis(elements: &[LieAlgebraElement], rel_cutoff: f64, abs_floor: f64) -> Vec<LieAlgebraElement> {
    let sig = elements[0].sig;
    let basis = LieAlgebraElement::basis(sig);
    let d = sig.algebra_dim();
    let rows: Vec<Vec<f64>> = elements.iter().map(|e| e.coordinates()).collect();
    let stacked = Matrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let svd = stacked.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cut = (rel_cutoff * smax).max(abs_floor);
    let mut out = Vec::new();
    for (k, s) in sv.iter().enumerate() {
        if *s > cut {
            // each basis generator has a single nonzero coordinate
            let mut x = LieAlgebraElement::zero(sig);
            for (idx, b) in basis.iter().enumerate() {
                let coeff = vt[(k, idx)] / b.coordinates()[idx];
                x = x.add(&b.scale(coeff));
            }
            out.push(x);
        }
    }
    out
}

/// `C in SO0(n, 1)` with `C u = v`.
///
/// Both vectors are extended to pseudo-orthonormal bases adapted to them
/// (a Witt pair for null vectors), then `C` is the change of basis, with one
/// free basis vector flipped to land in the identity component.
pub fn orbit_transporter(u: &Vector, v: &Vector, sig: Signature) -> Result<LorentzMatrix> {
    if !sig.is_lorentzian() {
        return Err(Error::Unsupported(format!(
            "orbit transporter requires nu = 1, got signature {sig}"
        )));
    }
    sig.check_dim(u)?;
    sig.check_dim(v)?;
    if u.norm() == 0.0 || v.norm() == 0.0 {
        return Err(Error::Degenerate("orbit transporter on the zero vector".into()));
    }
    let (qu, qv) = (sig.quad(u), sig.quad(v));
    let scale = u.norm_squared().max(v.norm_squared()).max(1.0);
    if (qu - qv).abs() > 1e-9 * scale {
        return Err(Error::OrbitMismatch(format!("<u,u> = {qu}, <v,v> = {qv}")));
    }
    let cu = causal_character(u, sig);
    let cv = causal_character(v, sig);
    let same_class = matches!(
        (cu, cv),
        (CausalClass::Spacelike, CausalClass::Spacelike)
            | (CausalClass::Timelike(_), CausalClass::Timelike(_))
            | (CausalClass::Lightlike(_), CausalClass::Lightlike(_))
    );
    if !same_class || cu.component() != cv.component() {
        return Err(Error::OrbitMismatch(format!("{cu:?} vs {cv:?}")));
    }
    let bu = adapted_basis(u, cu, sig)?;
    let bv = adapted_basis(v, cv, sig)?;
    let j = sig.form();
    let mut c = &bv * &j * bu.transpose() * &j;
    // C <- C (3I - J C^T J C) / 2 pulls a nearly J-orthogonal C onto the group
    for _ in 0..2 {
        let s = &j * c.transpose() * &j * &c;
        c = &c * (Matrix::identity(c.nrows(), c.ncols()) * 3.0 - s) * 0.5;
    }
    let out = LorentzMatrix::new(sig, c)?;
    let residual = (out.apply(u) - v).norm();
    if residual > 1e-9 * scale.sqrt() {
        return Err(Error::OrbitMismatch(format!("residual {residual:e}")));
    }
    Ok(out)
}

/// Pseudo-orthonormal basis (as columns) with `u` built into its first
/// spacelike and/or the timelike column, normalized to `det = 1` and a
/// future-pointing time column whenever a free column allows it.
fn adapted_basis(u: &Vector, class: CausalClass, sig: Signature) -> Result<Matrix> {
    let m = sig.dim();
    let t = m - 1;
    let inner = |a: &Vector, b: &Vector| sig.dot(a, b);
    let (fixed, time_free, first_free) = match class {
        CausalClass::Spacelike => {
            let r = sig.quad(u).sqrt();
            (vec![(0, u / r)], true, 1)
        }
        CausalClass::Timelike(_) => {
            let rho = (-sig.quad(u)).sqrt();
            (vec![(t, u / rho)], false, 0)
        }
        CausalClass::Lightlike(_) => {
            // null partner w = a e_t + b u with <w,w> = 0, <u,w> = -1
            let ut = u[t];
            let mut w = u * (-1.0 / (2.0 * ut * ut));
            w[t] += 1.0 / ut;
            let s = std::f64::consts::FRAC_1_SQRT_2;
            (vec![(0, (u - &w) * s), (t, (u + &w) * s)], false, 1)
        }
    };
    let candidates: Vec<Vector> = (0..m)
        .rev()
        .map(|i| Vector::from_fn(m, |k, _| if k == i { 1.0 } else { 0.0 }))
        .collect();
    let cols = pseudo_gram_schmidt(inner, sig, fixed, &candidates, 1e-12)?;
    let mut b = Matrix::from_columns(&cols);
    if time_free && b[(t, t)] < 0.0 {
        b.column_mut(t).neg_mut();
    }
    if b.determinant() < 0.0 {
        let flip = (first_free..sig.n).next().ok_or_else(|| {
            Error::OrbitMismatch(format!(
                "SO0({},1) is not transitive on this orbit (no free spacelike axis)",
                sig.n
            ))
        })?;
        b.column_mut(flip).neg_mut();
    }
    Ok(b)
}

/// Which generator a letter of a [`TranslationWord`] stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LetterKind {
    /// The given translation `phi_v`.
    Seed,
    SeedInverse,
    /// An element `(w_A, A)` produced by the section.
    Section,
    SectionInverse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Letter {
    pub kind: LetterKind,
    pub element: SEElement,
}

impl Letter {
    fn inverse(&self) -> Self {
        let kind = match self.kind {
            LetterKind::Seed => LetterKind::SeedInverse,
            LetterKind::SeedInverse => LetterKind::Seed,
            LetterKind::Section => LetterKind::SectionInverse,
            LetterKind::SectionInverse => LetterKind::Section,
        };
        Self {
            kind,
            element: self.element.inverse(),
        }
    }
}

/// Finite word `l_0 o l_1 o ... o l_k` in `SE0(n, 1)`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TranslationWord {
    pub letters: Vec<Letter>,
}

impl TranslationWord {
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn compose(&self, sig: Signature) -> SEElement {
        self.letters
            .iter()
            .fold(SEElement::identity(sig), |acc, l| acc.compose(&l.element))
    }

    pub fn inverse(&self) -> Self {
        Self {
            letters: self.letters.iter().rev().map(Letter::inverse).collect(),
        }
    }

    fn concat(mut self, other: Self) -> Self {
        self.letters.extend(other.letters);
        self
    }

    fn conjugated(self, psi: &SEElement) -> Self {
        let mut letters = Vec::with_capacity(self.letters.len() + 2);
        letters.push(Letter {
            kind: LetterKind::SectionInverse,
            element: psi.inverse(),
        });
        letters.extend(self.letters);
        letters.push(Letter {
            kind: LetterKind::Section,
            element: psi.clone(),
        });
        Self { letters }
    }

    pub fn kinds(&self) -> Vec<LetterKind> {
        self.letters.iter().map(|l| l.kind).collect()
    }
}

/// Word over `{phi_v^(+-1)} u section(SO0(n,1))^(+-1)` composing to `phi_u`.
///
/// `section(A)` must return some `(w_A, A)`. The word follows the causal case
/// split: a timelike or lightlike seed is first turned into a spacelike
/// translation; spacelike targets are reached by conjugation, the two-point
/// split `u = u' + u''` on the pseudosphere, or `1/k` scaling; timelike and
/// lightlike targets go through the spacelike gadget vectors.
pub fn translation_closure_word<F>(v: &Vector, u: &Vector, section: F) -> Result<TranslationWord>
where
    F: Fn(&LorentzMatrix) -> Result<SEElement>,
{
    let m = v.len();
    if m < 3 {
        return Err(Error::Unsupported(
            "translation closure needs R^{n,1} with n >= 2".into(),
        ));
    }
    let sig = Signature::lorentzian(m - 1);
    sig.check_dim(u)?;
    if v.norm() == 0.0 {
        return Err(Error::Degenerate("seed translation is zero".into()));
    }
    let seed = |inverse: bool| -> Result<TranslationWord> {
        let phi = SEElement::translation(sig, v.clone())?;
        let letter = Letter {
            kind: LetterKind::Seed,
            element: phi,
        };
        Ok(TranslationWord {
            letters: vec![if inverse { letter.inverse() } else { letter }],
        })
    };
    let builder = match causal_character(v, sig) {
        CausalClass::Spacelike => ClosureBuilder {
            sig,
            section: &section,
            base: seed(false)?,
            s: v.clone(),
        },
        CausalClass::Timelike(component) => {
            let (base_t, t) = match component {
                TimeComponent::Future => (seed(false)?, v.clone()),
                TimeComponent::Past => (seed(true)?, -v),
            };
            let r = (-sig.quad(&t)).sqrt();
            let half = 0.5 * r;
            let tall = 0.5 * 5f64.sqrt() * r;
            let mut w1 = Vector::zeros(m);
            w1[m - 2] = half;
            w1[m - 1] = tall;
            let mut w2 = Vector::zeros(m);
            w2[m - 2] = half;
            w2[m - 1] = -tall;
            let word1 = conjugate_onto(&section, &w1, &t, base_t.clone())?;
            let word2 = conjugate_onto(&section, &(-&w2), &t, base_t)?.inverse();
            ClosureBuilder {
                sig,
                section: &section,
                base: word1.concat(word2),
                s: w1 + w2,
            }
        }
        CausalClass::Lightlike(component) => {
            let (base_l, t) = match component {
                TimeComponent::Future => (seed(false)?, v.clone()),
                TimeComponent::Past => (seed(true)?, -v),
            };
            let half = t[m - 1];
            let mut w1 = Vector::zeros(m);
            w1[0] = half;
            w1[m - 1] = half;
            let mut w2 = Vector::zeros(m);
            w2[0] = half;
            w2[m - 1] = -half;
            let word1 = conjugate_onto(&section, &w1, &t, base_l.clone())?;
            let word2 = conjugate_onto(&section, &(-&w2), &t, base_l)?.inverse();
            ClosureBuilder {
                sig,
                section: &section,
                base: word1.concat(word2),
                s: w1 + w2,
            }
        }
    };
    builder.reach(u)
}

/// Given `base` composing to `phi_s`, returns `psi_A^{-1} o base o psi_A`
/// composing to `phi_target`, where `A target = s`.
fn conjugate_onto<F>(section: &F, target: &Vector, s: &Vector, base: TranslationWord) -> Result<TranslationWord>
where
    F: Fn(&LorentzMatrix) -> Result<SEElement>,
{
    let sig = Signature::lorentzian(s.len() - 1);
    let a = orbit_transporter(target, s, sig)?;
    let psi = section(&a)?;
    if (psi.linear_part().matrix() - a.matrix()).norm() > 1e-9 * a.matrix().amax().max(1.0) {
        return Err(Error::Degenerate("section returned the wrong linear part".into()));
    }
    Ok(base.conjugated(&psi))
}

struct ClosureBuilder<'a, F> {
    sig: Signature,
    section: &'a F,
    /// Composes to `phi_s`, `s` spacelike.
    base: TranslationWord,
    s: Vector,
}

impl<F> ClosureBuilder<'_, F>
where
    F: Fn(&LorentzMatrix) -> Result<SEElement>,
{
    fn radius_sq(&self) -> f64 {
        self.sig.quad(&self.s)
    }

    fn reach(&self, u: &Vector) -> Result<TranslationWord> {
        if u.norm() == 0.0 {
            return Ok(TranslationWord::default());
        }
        match causal_character(u, self.sig) {
            CausalClass::Spacelike => self.spacelike(u),
            CausalClass::Timelike(c) => self.timelike(u, c),
            CausalClass::Lightlike(c) => self.lightlike(u, c),
        }
    }

    /// `phi_u` for `<u,u> = r^2`.
    fn on_sphere(&self, u: &Vector) -> Result<TranslationWord> {
        conjugate_onto(self.section, u, &self.s, self.base.clone())
    }

    fn spacelike(&self, u: &Vector) -> Result<TranslationWord> {
        let r2 = self.radius_sq();
        let q = self.sig.quad(u);
        if q <= 0.0 {
            return Err(Error::Degenerate("target is not spacelike".into()));
        }
        if (q - r2).abs() <= 1e-12 * r2.max(u.norm_squared()) {
            return self.on_sphere(u);
        }
        if q < r2 {
            return self.split(u);
        }
        let mut k = (q / r2).sqrt().ceil() as usize;
        while q / (k * k) as f64 >= r2 {
            k += 1;
        }
        let piece = self.split(&(u / k as f64))?;
        let mut out = TranslationWord::default();
        for _ in 0..k {
            out = out.concat(piece.clone());
        }
        Ok(out)
    }

    /// `u = u' + u''` with `u' in S_r(0) n S_r(u)`: `u' = u/2 + p`, `p` a
    /// spatial vector orthogonal to `u`.
    fn split(&self, u: &Vector) -> Result<TranslationWord> {
        let r2 = self.radius_sq();
        let q = self.sig.quad(u);
        let n = self.sig.n;
        let spatial = u.rows(0, n).into_owned();
        let s2 = spatial.norm_squared();
        let mut p = None;
        for k in 0..n {
            let mut cand = Vector::zeros(n);
            cand[k] = 1.0;
            let proj = &cand - &spatial * (spatial[k] / s2);
            if proj.norm() > 1e-6 {
                p = Some(proj);
                break;
            }
        }
        let p = p.ok_or_else(|| Error::Degenerate("no spatial direction orthogonal to target".into()))?;
        let len = ((r2 - q / 4.0) / p.norm_squared()).sqrt();
        let mut u1 = u * 0.5;
        for k in 0..n {
            u1[k] += len * p[k];
        }
        let u2 = u - &u1;
        Ok(self.on_sphere(&u1)?.concat(self.on_sphere(&u2)?))
    }

    fn timelike(&self, u: &Vector, component: TimeComponent) -> Result<TranslationWord> {
        let m = self.sig.dim();
        let rho = (-self.sig.quad(u)).sqrt();
        let mut up = Vector::zeros(m);
        up[0] = 0.5 * 5f64.sqrt() * rho;
        up[m - 1] = 0.5 * rho;
        let mut um = up.clone();
        um[0] = -um[0];
        let sum = &up + &um;
        let gadget = self.spacelike(&up)?.concat(self.spacelike(&um)?);
        match component {
            TimeComponent::Future => {
                let a = orbit_transporter(u, &sum, self.sig)?;
                Ok(gadget.conjugated(&(self.section)(&a)?))
            }
            TimeComponent::Past => {
                let a = orbit_transporter(u, &(-&sum), self.sig)?;
                Ok(gadget.inverse().conjugated(&(self.section)(&a)?))
            }
        }
    }

    fn lightlike(&self, u: &Vector, component: TimeComponent) -> Result<TranslationWord> {
        let m = self.sig.dim();
        let mut u1 = Vector::zeros(m);
        u1[0] = 1.0;
        let mut u2 = Vector::zeros(m);
        u2[m - 1] = 1.0;
        let (target, gadget) = match component {
            TimeComponent::Future => (
                &u1 + &u2,
                self.spacelike(&u1)?.concat(self.timelike(&u2, TimeComponent::Future)?),
            ),
            TimeComponent::Past => (
                &u1 - &u2,
                self.spacelike(&u1)?
                    .concat(self.timelike(&(-&u2), TimeComponent::Past)?),
            ),
        };
        let a = orbit_transporter(u, &target, self.sig)?;
        Ok(gadget.conjugated(&(self.section)(&a)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sig21() -> Signature {
        Signature::lorentzian(2)
    }

    fn vec3(a: f64, b: f64, c: f64) -> Vector {
        Vector::from_vec(vec![a, b, c])
    }

    #[test]
    fn inner_examples() {
        let s = sig21();
        assert_eq!(inner(&vec3(1., 0., 0.), &vec3(1., 0., 0.), s).unwrap(), 1.0);
        let up = vec3(5f64.sqrt() / 2.0, 0.0, 0.5);
        assert_relative_eq!(inner(&up, &up, s).unwrap(), 1.0, epsilon = 1e-15);
        let t = vec3(0., 0., 1.);
        assert_eq!(inner(&t, &t, s).unwrap(), -1.0);
        assert!(matches!(
            inner(&t, &Vector::zeros(2), s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn causal_examples() {
        let s = sig21();
        assert_eq!(causal_character(&Vector::zeros(3), s), CausalClass::Spacelike);
        assert_eq!(
            causal_character(&vec3(1., 0., 1.), s),
            CausalClass::Lightlike(TimeComponent::Future)
        );
        assert_eq!(
            causal_character(&vec3(0., 0., -1.), s),
            CausalClass::Timelike(TimeComponent::Past)
        );
    }

    #[test]
    fn gadget_sums_have_expected_characters() {
        let s = sig21();
        let up = vec3(5f64.sqrt() / 2.0, 0.0, 0.5);
        let um = vec3(-5f64.sqrt() / 2.0, 0.0, 0.5);
        assert_eq!(
            causal_character(&(&up + &um), s),
            CausalClass::Timelike(TimeComponent::Future)
        );
        let w1 = vec3(0.0, 0.5, 5f64.sqrt() / 2.0);
        let w2 = vec3(0.0, 0.5, -5f64.sqrt() / 2.0);
        assert_eq!(causal_character(&(&w1 + &w2), s), CausalClass::Spacelike);
        let u1 = vec3(1., 0., 0.);
        let u2 = vec3(0., 0., 1.);
        assert_eq!(
            causal_character(&(&u1 + &u2), s),
            CausalClass::Lightlike(TimeComponent::Future)
        );
        assert_eq!(
            causal_character(&(&u1 - &u2), s),
            CausalClass::Lightlike(TimeComponent::Past)
        );
    }

    #[test]
    fn lorentz_validation_rejects_bad_matrices() {
        let s = sig21();
        let mut flip = Matrix::identity(3, 3);
        flip[(2, 2)] = -1.0;
        flip[(0, 0)] = -1.0;
        // det = 1 but time reversed
        assert!(LorentzMatrix::new(s, flip).is_err());
        let mut reflect = Matrix::identity(3, 3);
        reflect[(0, 0)] = -1.0;
        assert!(LorentzMatrix::new(s, reflect).is_err());
        assert!(LorentzMatrix::new(s, Matrix::identity(3, 3) * 2.0).is_err());
        let b = LorentzMatrix::boost(s, 0, 2, 0.7).unwrap();
        assert!(LorentzMatrix::new(s, b.matrix().clone()).is_ok());
    }

    #[test]
    fn se_examples() {
        let s = sig21();
        let u = vec3(1., 2., 3.);
        let v = vec3(-0.5, 0.1, 0.2);
        let pu = SEElement::translation(s, u.clone()).unwrap();
        let pv = SEElement::translation(s, v.clone()).unwrap();
        let sum = SEElement::translation(s, &u + &v).unwrap();
        assert!(pu.compose(&pv).distance(&sum) < 1e-15);
        let id = SEElement::identity(s);
        assert_eq!(id.inverse(), id);

        let a = LorentzMatrix::boost(s, 1, 2, 0.4)
            .unwrap()
            .compose(&LorentzMatrix::rotation(s, 0, 1, 1.1).unwrap());
        let psi = SEElement::new(vec3(0.3, -1.0, 2.0), a.clone()).unwrap();
        let conj = psi.inverse().compose(&pv).compose(&psi);
        let expect = SEElement::translation(s, a.inverse().apply(&v)).unwrap();
        assert!(conj.distance(&expect) < 1e-12);
        assert!(conj.is_pure_translation(1e-9));
    }

    #[test]
    fn exp_examples() {
        let s = sig21();
        let zero = LieAlgebraElement::zero(s);
        assert_eq!(so_exp(&zero).matrix(), &Matrix::identity(3, 3));

        let rot = LieAlgebraElement::rotation_generator(s, 0, 1).unwrap().scale(0.1);
        let r = so_exp(&rot);
        let expect = LorentzMatrix::rotation(s, 0, 1, 0.1).unwrap();
        assert!((r.matrix() - expect.matrix()).norm() < 1e-15);

        // scalar series for cosh / sinh as the independent route
        let series = |x: f64, odd: bool| -> f64 {
            let mut term = if odd { x } else { 1.0 };
            let mut sum = term;
            let mut k = if odd { 1 } else { 0 };
            for _ in 0..20 {
                term *= x * x / (((k + 1) * (k + 2)) as f64);
                k += 2;
                sum += term;
            }
            sum
        };
        let boost = LieAlgebraElement::boost_generator(s, 0, 2).unwrap().scale(0.1);
        let b = so_exp(&boost);
        assert_relative_eq!(b.matrix()[(0, 0)], series(0.1, false), epsilon = 1e-15);
        assert_relative_eq!(b.matrix()[(2, 2)], series(0.1, false), epsilon = 1e-15);
        assert_relative_eq!(b.matrix()[(0, 2)], series(0.1, true), epsilon = 1e-15);
        assert_relative_eq!(b.matrix()[(2, 0)], series(0.1, true), epsilon = 1e-15);
        assert!(LorentzMatrix::new(s, b.matrix().clone()).is_ok());
    }

    #[test]
    fn log_inverts_exp_and_respects_radius() {
        let s = Signature::lorentzian(3);
        let basis = LieAlgebraElement::basis(s);
        let x = basis
            .iter()
            .enumerate()
            .fold(LieAlgebraElement::zero(s), |acc, (k, b)| {
                acc.add(&b.scale(0.03 * (k as f64 + 1.0)))
            });
        let c = so_exp(&x);
        let l = so_log(&c).unwrap();
        assert!((l.matrix() - x.matrix()).norm() < 1e-13);
        assert!(l.skew_residual() < 1e-14);

        let far = LorentzMatrix::boost(s, 0, 3, 2.0).unwrap();
        assert!(matches!(so_log(&far), Err(Error::OutsideLogRadius { .. })));
        let l = so_log_unbounded(&far).unwrap();
        assert!((so_exp(&l).matrix() - far.matrix()).norm() < 1e-10);
    }

    #[test]
    fn basis_spans_algebra() {
        for sig in [
            Signature::lorentzian(2),
            Signature::lorentzian(3),
            Signature::new(2, 2).unwrap(),
        ] {
            let basis = LieAlgebraElement::basis(sig);
            assert_eq!(basis.len(), sig.algebra_dim());
            for b in &basis {
                assert!(b.skew_residual() == 0.0);
            }
            assert_eq!(algebra_rank(&basis, 1e-6, 1e-12), sig.algebra_dim());
        }
    }

    #[test]
    fn lie_closure_of_two_rotations_is_full() {
        let s = sig21();
        // so(2,1) is generated by a boost and a rotation
        let r = LieAlgebraElement::rotation_generator(s, 0, 1).unwrap();
        let b = LieAlgebraElement::boost_generator(s, 0, 2).unwrap();
        assert_eq!(lie_closure_rank(std::slice::from_ref(&r), 1e-6, 1e-12), 1);
        assert_eq!(lie_closure_rank(&[r, b], 1e-6, 1e-12), 3);
    }

    #[test]
    fn orbit_transporter_examples() {
        let s = sig21();
        let u = vec3(0.3, 0.2, 1.5);
        let c = orbit_transporter(&u, &u, s).unwrap();
        assert!((c.apply(&u) - &u).norm() < 1e-12);

        let c = orbit_transporter(&vec3(1., 0., 0.), &vec3(0., 1., 0.), s).unwrap();
        assert!((c.apply(&vec3(1., 0., 0.)) - vec3(0., 1., 0.)).norm() < 1e-12);
        assert!(c.residual() < 1e-12);

        let c = orbit_transporter(&vec3(1., 0., 1.), &vec3(2., 0., 2.), s).unwrap();
        assert!((c.apply(&vec3(1., 0., 1.)) - vec3(2., 0., 2.)).norm() <= 1e-9);

        assert!(matches!(
            orbit_transporter(&vec3(0., 0., 1.), &vec3(0., 0., -1.), s),
            Err(Error::OrbitMismatch(_))
        ));
        assert!(matches!(
            orbit_transporter(&vec3(1., 0., 0.), &vec3(2., 0., 0.), s),
            Err(Error::OrbitMismatch(_))
        ));
        assert!(matches!(
            orbit_transporter(&Vector::zeros(3), &Vector::zeros(3), s),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn fixed_point_embedding_examples() {
        let s = sig21();
        let a = LorentzMatrix::rotation(s, 0, 1, 0.3).unwrap();
        let x0 = vec3(1., 0., 0.);
        let id = fixed_point_embedding(&x0, &LorentzMatrix::identity(s)).unwrap();
        assert_eq!(id, SEElement::identity(s));
        let pure = fixed_point_embedding(&Vector::zeros(3), &a).unwrap();
        assert_eq!(pure.translation_part(), &Vector::zeros(3));

        let half_turn = LorentzMatrix::rotation(s, 0, 1, std::f64::consts::PI).unwrap();
        let xi = fixed_point_embedding(&x0, &half_turn).unwrap();
        assert!((xi.translation_part() - vec3(2., 0., 0.)).norm() < 1e-15);
        assert!((xi.apply(&x0) - &x0).norm() < 1e-15);
    }

    fn linear_section(a: &LorentzMatrix) -> Result<SEElement> {
        Ok(SEElement::linear(a.clone()))
    }

    #[test]
    fn closure_word_trivial_and_gadgets() {
        let s = sig21();
        let v = vec3(1., 0., 0.);
        let w = translation_closure_word(&v, &v, linear_section).unwrap();
        assert!(w.compose(s).distance(&SEElement::translation(s, v.clone()).unwrap()) < 1e-12);

        let u = vec3(0., 0., 1.);
        let w = translation_closure_word(&v, &u, linear_section).unwrap();
        assert!(w.compose(s).distance(&SEElement::translation(s, u).unwrap()) < 1e-10);

        let v = vec3(0., 0., 1.);
        let u = vec3(0., 1., 0.);
        let w = translation_closure_word(&v, &u, linear_section).unwrap();
        assert!(w.compose(s).distance(&SEElement::translation(s, u).unwrap()) < 1e-10);
        assert!(w.kinds().contains(&LetterKind::SeedInverse));

        assert!(translation_closure_word(&Vector::zeros(3), &u_of(), linear_section).is_err());
    }

    fn u_of() -> Vector {
        vec3(1., 1., 0.)
    }
}
