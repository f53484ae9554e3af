//! Separable convex problem instances and their reference solutions.
//!
//! An instance is `min f(x) + g(y)  s.t.  A x + B y = b`. The smooth parts may
//! be quadratic forms (in which case every reference quantity is computed by
//! dense linear algebra) or arbitrary user oracles (simulation only).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numfmt::fmt17;
use crate::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Absolute bound on the KKT residual of a returned saddle point.
pub const KKT_TOL: f64 = 1e-10;

/// Feasibility/optimality tolerance for the minimal-norm solution.
pub const MIN_NORM_TOL: f64 = 1e-8;

/// `½ xᵀ P x + qᵀ x + c` with `P` symmetric positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub p: Matrix,
    pub q: Vector,
    pub c: f64,
}

impl QuadraticForm {
    pub fn new(p: Matrix, q: Vector, c: f64) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::input(format!(
                "quadratic form matrix must be square, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        if p.nrows() != q.len() {
            return Err(Error::input(format!(
                "quadratic form: P is {0}x{0} but q has length {1}",
                p.nrows(),
                q.len()
            )));
        }
        if p.iter().chain(q.iter()).any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::input("quadratic form has non-finite entries"));
        }
        let scale = p.norm();
        if (&p - p.transpose()).norm() > 1e-12 * scale.max(1.0) {
            return Err(Error::input("quadratic form matrix is not symmetric"));
        }
        let form = QuadraticForm { p, q, c };
        if form.dim() > 0 {
            let min_eig = form.eigenvalues().min();
            if min_eig < -1e-10 * scale {
                return Err(Error::input(format!(
                    "quadratic form is not convex: smallest eigenvalue {min_eig:e}"
                )));
            }
        }
        Ok(form)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x) + self.c
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.p * x + &self.q
    }

    fn eigenvalues(&self) -> Vector {
        self.p.clone().symmetric_eigen().eigenvalues
    }

    /// Largest Hessian eigenvalue, i.e. the Lipschitz constant of the gradient.
    pub fn max_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.eigenvalues().max().max(0.0)
    }
}

/// A smooth convex function supplied as an oracle.
pub trait SmoothConvex: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
}

#[derive(Clone)]
pub enum Objective {
    Quadratic(QuadraticForm),
    Oracle(Arc<dyn SmoothConvex>),
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Quadratic(q) => f.debug_tuple("Quadratic").field(q).finish(),
            Objective::Oracle(o) => write!(f, "Oracle(dim = {})", o.dim()),
        }
    }
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic(q) => q.dim(),
            Objective::Oracle(o) => o.dim(),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            Objective::Quadratic(q) => q.value(x),
            Objective::Oracle(o) => o.value(x),
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            Objective::Quadratic(q) => q.gradient(x),
            Objective::Oracle(o) => o.gradient(x),
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticForm> {
        match self {
            Objective::Quadratic(q) => Some(q),
            Objective::Oracle(_) => None,
        }
    }
}

/// Operator (spectral) norm of a dense matrix.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `min f(x) + g(y)  s.t.  A x + B y = b`.
#[derive(Clone, Debug)]
pub struct SeparableProblem {
    f: Objective,
    g: Objective,
    l1: f64,
    l2: f64,
    a: Matrix,
    b: Matrix,
    rhs: Vector,
}

impl SeparableProblem {
    /// Builds an instance from quadratic parts; the Lipschitz constants are
    /// the largest Hessian eigenvalues.
    pub fn new(
        f: QuadraticForm,
        g: QuadraticForm,
        a: Matrix,
        b: Matrix,
        rhs: Vector,
    ) -> Result<Self> {
        let l1 = f.max_eigenvalue();
        let l2 = g.max_eigenvalue();
        Self::with_lipschitz(
            Objective::Quadratic(f),
            Objective::Quadratic(g),
            l1,
            l2,
            a,
            b,
            rhs,
        )
    }

    pub fn with_lipschitz(
        f: Objective,
        g: Objective,
        l1: f64,
        l2: f64,
        a: Matrix,
        b: Matrix,
        rhs: Vector,
    ) -> Result<Self> {
        let (n1, n2, m) = (f.dim(), g.dim(), rhs.len());
        if n1 == 0 || n2 == 0 || m == 0 {
            return Err(Error::input("all of n1, n2, m must be positive"));
        }
        if a.shape() != (m, n1) {
            return Err(Error::input(format!(
                "A must be {m}x{n1}, got {:?}",
                a.shape()
            )));
        }
        if b.shape() != (m, n2) {
            return Err(Error::input(format!(
                "B must be {m}x{n2}, got {:?}",
                b.shape()
            )));
        }
        if a.iter()
            .chain(b.iter())
            .chain(rhs.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::input("constraint data has non-finite entries"));
        }
        if !(l1.is_finite() && l2.is_finite()) || l1 < 0.0 || l2 < 0.0 {
            return Err(Error::input(
                "Lipschitz constants must be finite and nonnegative",
            ));
        }
        for (name, obj, l) in [("f", &f, l1), ("g", &g, l2)] {
            if let Some(q) = obj.as_quadratic() {
                let top = q.max_eigenvalue();
                if l < top * (1.0 - 1e-12) {
                    return Err(Error::input(format!(
                        "Lipschitz constant for {name} ({l}) is below the top Hessian eigenvalue ({top})"
                    )));
                }
            }
        }
        Ok(SeparableProblem {
            f,
            g,
            l1,
            l2,
            a,
            b,
            rhs,
        })
    }

    pub fn n1(&self) -> usize {
        self.f.dim()
    }
    pub fn n2(&self) -> usize {
        self.g.dim()
    }
    pub fn m(&self) -> usize {
        self.rhs.len()
    }
    pub fn f(&self) -> &Objective {
        &self.f
    }
    pub fn g(&self) -> &Objective {
        &self.g
    }
    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn l2(&self) -> f64 {
        self.l2
    }
    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn rhs(&self) -> &Vector {
        &self.rhs
    }

    pub fn is_quadratic(&self) -> bool {
        self.f.as_quadratic().is_some() && self.g.as_quadratic().is_some()
    }

    fn check_primal(&self, x: &Vector, y: &Vector) -> Result<()> {
        if x.len() != self.n1() || y.len() != self.n2() {
            return Err(Error::input(format!(
                "expected x in R^{} and y in R^{}, got lengths {} and {}",
                self.n1(),
                self.n2(),
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    fn check_all(&self, x: &Vector, y: &Vector, lam: &Vector) -> Result<()> {
        self.check_primal(x, y)?;
        if lam.len() != self.m() {
            return Err(Error::input(format!(
                "expected lambda in R^{}, got length {}",
                self.m(),
                lam.len()
            )));
        }
        Ok(())
    }

    /// `Φ(x, y) = f(x) + g(y)`.
    pub fn objective(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.check_primal(x, y)?;
        Ok(self.f.value(x) + self.g.value(y))
    }

    /// `A x + B y − b`.
    pub fn constraint_residual(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        self.check_primal(x, y)?;
        Ok(&self.a * x + &self.b * y - &self.rhs)
    }

    pub fn lagrangian(&self, x: &Vector, y: &Vector, lam: &Vector) -> Result<f64> {
        self.check_all(x, y, lam)?;
        let r = &self.a * x + &self.b * y - &self.rhs;
        Ok(self.f.value(x) + self.g.value(y) + lam.dot(&r))
    }

    /// Lagrangian plus `½‖Ax + By − b‖²`.
    pub fn aug_lagrangian(&self, x: &Vector, y: &Vector, lam: &Vector) -> Result<f64> {
        self.check_all(x, y, lam)?;
        let r = &self.a * x + &self.b * y - &self.rhs;
        Ok(self.f.value(x) + self.g.value(y) + lam.dot(&r) + 0.5 * r.norm_squared())
    }

    /// Partial gradients of the augmented Lagrangian in `x` and `y`.
    pub fn grad_aug_lagrangian(
        &self,
        x: &Vector,
        y: &Vector,
        lam: &Vector,
    ) -> Result<(Vector, Vector)> {
        self.check_all(x, y, lam)?;
        let mult = lam + (&self.a * x + &self.b * y - &self.rhs);
        let gx = self.f.gradient(x) + self.a.tr_mul(&mult);
        let gy = self.g.gradient(y) + self.b.tr_mul(&mult);
        Ok((gx, gy))
    }

    /// Euclidean norm of the stacked KKT conditions
    /// `(∇f(x) + Aᵀλ, ∇g(y) + Bᵀλ, Ax + By − b)`.
    pub fn kkt_residual(&self, x: &Vector, y: &Vector, lam: &Vector) -> Result<f64> {
        self.check_all(x, y, lam)?;
        let sx = self.f.gradient(x) + self.a.tr_mul(lam);
        let sy = self.g.gradient(y) + self.b.tr_mul(lam);
        let r = &self.a * x + &self.b * y - &self.rhs;
        Ok((sx.norm_squared() + sy.norm_squared() + r.norm_squared()).sqrt())
    }

    fn quadratic_parts(&self, op: &str) -> Result<(&QuadraticForm, &QuadraticForm)> {
        match (self.f.as_quadratic(), self.g.as_quadratic()) {
            (Some(f), Some(g)) => Ok((f, g)),
            _ => Err(Error::Unsupported(format!(
                "{op} needs quadratic f and g; supply a ReferenceSolution for oracle problems"
            ))),
        }
    }

    /// Stacked constraint operator `[A B]`.
    fn stacked_constraint(&self) -> Matrix {
        let (n1, n2, m) = (self.n1(), self.n2(), self.m());
        let mut mat = Matrix::zeros(m, n1 + n2);
        mat.view_mut((0, 0), (m, n1)).copy_from(&self.a);
        mat.view_mut((0, n1), (m, n2)).copy_from(&self.b);
        mat
    }

    fn kkt_system(&self) -> Result<KktSystem> {
        let (f, g) = self.quadratic_parts("a saddle-point solve")?;
        let (n1, n2, m) = (self.n1(), self.n2(), self.m());
        let n = n1 + n2;
        let dim = n + m;
        let mut k = Matrix::zeros(dim, dim);
        k.view_mut((0, 0), (n1, n1)).copy_from(&f.p);
        k.view_mut((n1, n1), (n2, n2)).copy_from(&g.p);
        let mc = self.stacked_constraint();
        k.view_mut((n, 0), (m, n)).copy_from(&mc);
        k.view_mut((0, n), (n, m)).copy_from(&mc.transpose());
        let mut rhs = Vector::zeros(dim);
        rhs.rows_mut(0, n1).copy_from(&(-&f.q));
        rhs.rows_mut(n1, n2).copy_from(&(-&g.q));
        rhs.rows_mut(n, m).copy_from(&self.rhs);
        KktSystem::new(k, rhs, n)
    }

    /// Solves the KKT system of a quadratic instance. When it is singular the
    /// least-norm solution is returned and the non-uniqueness is flagged.
    pub fn solve_saddle_point(&self) -> Result<ReferenceSolution> {
        let kkt = self.kkt_system()?;
        let n1 = self.n1();
        let n = kkt.primal_dim;
        let w = kkt.least_norm_solution();
        let x_star = w.rows(0, n1).into_owned();
        let y_star = w.rows(n1, n - n1).into_owned();
        let lambda_star = w.rows(n, self.m()).into_owned();
        let kkt_residual = self.kkt_residual(&x_star, &y_star, &lambda_star)?;
        if !(kkt_residual < KKT_TOL) {
            return Err(Error::SolverFailure(format!(
                "saddle point KKT residual {kkt_residual:e} exceeds {KKT_TOL:e} (infeasible or unbounded instance?)"
            )));
        }
        let phi_star = self.objective(&x_star, &y_star)?;
        let (x_bar, y_bar, lambda_bar) = self.min_norm_from(&kkt, &w, phi_star)?;
        let (unique_primal, unique_dual) = kkt.uniqueness();
        Ok(ReferenceSolution {
            x_star,
            y_star,
            lambda_star,
            phi_star,
            x_bar,
            y_bar,
            lambda_bar,
            kkt_residual,
            unique_primal,
            unique_dual,
        })
    }

    /// Minimal-norm element of the primal solution set.
    pub fn min_norm_solution(&self) -> Result<(Vector, Vector)> {
        let kkt = self.kkt_system()?;
        let w = kkt.least_norm_solution();
        let n1 = self.n1();
        let phi = self.objective(
            &w.rows(0, n1).into_owned(),
            &w.rows(n1, kkt.primal_dim - n1).into_owned(),
        )?;
        let (x, y, _) = self.min_norm_from(&kkt, &w, phi)?;
        Ok((x, y))
    }

    /// The solution set is the primal projection of the affine set
    /// `w0 + null(K)`; minimise `‖z0 + N_z c‖` over the null-space coordinates.
    fn min_norm_from(
        &self,
        kkt: &KktSystem,
        w0: &Vector,
        phi_star: f64,
    ) -> Result<(Vector, Vector, Vector)> {
        let n = kkt.primal_dim;
        let n1 = self.n1();
        let m = self.m();
        let null = kkt.null_basis();
        let w = if null.ncols() == 0 {
            w0.clone()
        } else {
            let nz = null.rows(0, n).into_owned();
            let z0 = w0.rows(0, n).into_owned();
            let normal = SymmetricPinv::new(nz.tr_mul(&nz), 1e-12, 1.0);
            let c = normal.apply(&-(nz.tr_mul(&z0)));
            w0 + &null * c
        };
        let x = w.rows(0, n1).into_owned();
        let y = w.rows(n1, n - n1).into_owned();
        let lam = w.rows(n, m).into_owned();

        let feas = self.constraint_residual(&x, &y)?.norm();
        let phi = self.objective(&x, &y)?;
        let kkt_res = self.kkt_residual(&x, &y, &lam)?;
        let scale = 1.0 + self.rhs.norm();
        if feas > MIN_NORM_TOL * scale
            || (phi - phi_star).abs() > MIN_NORM_TOL * (1.0 + phi_star.abs())
            || kkt_res > MIN_NORM_TOL * scale
        {
            return Err(Error::Verification(format!(
                "minimal-norm solution fails checks: feasibility {feas:e}, objective gap {:e}, KKT {kkt_res:e}",
                (phi - phi_star).abs()
            )));
        }
        Ok((x, y, lam))
    }

    /// `L_ε(x, y) = 𝓛(x, y, λ̄) + (ε/2)(‖x‖² + ‖y‖²)`.
    pub fn tikhonov_objective(
        &self,
        lambda_bar: &Vector,
        eps: f64,
        x: &Vector,
        y: &Vector,
    ) -> Result<f64> {
        Ok(self.aug_lagrangian(x, y, lambda_bar)?
            + 0.5 * eps * (x.norm_squared() + y.norm_squared()))
    }

    /// Unique minimiser of `L_ε`, from one symmetric positive-definite solve.
    pub fn tikhonov_minimizer(&self, lambda_bar: &Vector, eps: f64) -> Result<(Vector, Vector)> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::input(format!(
                "Tikhonov parameter must be positive, got {eps}"
            )));
        }
        if lambda_bar.len() != self.m() {
            return Err(Error::input("lambda_bar has the wrong length"));
        }
        let (f, g) = self.quadratic_parts("the Tikhonov minimiser")?;
        let (n1, n2) = (self.n1(), self.n2());
        let n = n1 + n2;
        let mc = self.stacked_constraint();
        let mut h = mc.tr_mul(&mc);
        {
            let mut blk = h.view_mut((0, 0), (n1, n1));
            blk += &f.p;
        }
        {
            let mut blk = h.view_mut((n1, n1), (n2, n2));
            blk += &g.p;
        }
        for i in 0..n {
            h[(i, i)] += eps;
        }
        let mut rhs = mc.tr_mul(&(&self.rhs - lambda_bar));
        {
            let mut top = rhs.rows_mut(0, n1);
            top -= &f.q;
        }
        {
            let mut bot = rhs.rows_mut(n1, n2);
            bot -= &g.q;
        }
        let chol = h.clone().cholesky().ok_or_else(|| {
            Error::SolverFailure("Tikhonov system is not positive definite".into())
        })?;
        let z = chol.solve(&rhs);
        let x = z.rows(0, n1).into_owned();
        let y = z.rows(n1, n2).into_owned();

        let (gx, gy) = self.grad_aug_lagrangian(&x, &y, lambda_bar)?;
        let opt = ((gx + &x * eps).norm_squared() + (gy + &y * eps).norm_squared()).sqrt();
        let scale = 1.0 + h.norm() * z.norm() + rhs.norm();
        if opt > 1e-10 * scale {
            return Err(Error::Verification(format!(
                "Tikhonov minimiser violates first-order optimality: {opt:e}"
            )));
        }
        Ok((x, y))
    }

    /// Serialises a quadratic instance to the problem JSON document.
    pub fn to_json(&self) -> Result<String> {
        let (f, g) = self.quadratic_parts("JSON export")?;
        let vec = |v: &Vector| {
            format!(
                "[{}]",
                v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(", ")
            )
        };
        let mat = |m: &Matrix| {
            let rows: Vec<String> = (0..m.nrows())
                .map(|i| {
                    format!(
                        "[{}]",
                        m.row(i)
                            .iter()
                            .map(|x| fmt17(*x))
                            .collect::<Vec<_>>()
                            .join(", ")
                    )
                })
                .collect();
            format!("[{}]", rows.join(", "))
        };
        let quad = |q: &QuadraticForm| {
            format!(
                "{{\"P\": {}, \"q\": {}, \"c\": {}}}",
                mat(&q.p),
                vec(&q.q),
                fmt17(q.c)
            )
        };
        Ok(format!(
            "{{\n  \"f\": {},\n  \"g\": {},\n  \"A\": {},\n  \"B\": {},\n  \"b\": {},\n  \"l1\": {},\n  \"l2\": {}\n}}\n",
            quad(f),
            quad(g),
            mat(&self.a),
            mat(&self.b),
            vec(&self.rhs),
            fmt17(self.l1),
            fmt17(self.l2)
        ))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProblemDoc = serde_json::from_str(text)?;
        doc.build()
    }
}

/// Pseudoinverse of a symmetric matrix through its eigendecomposition;
/// eigenvalues with `|λ| <= tol` count as zero.
struct SymmetricPinv {
    eig: nalgebra::SymmetricEigen<f64, nalgebra::Dyn>,
    zero: Vec<bool>,
}

impl SymmetricPinv {
    /// `tol = rel_tol * max(max |λ|, floor)`.
    fn new(k: Matrix, rel_tol: f64, floor: f64) -> Self {
        let eig = k.symmetric_eigen();
        let lmax = eig.eigenvalues.amax();
        let tol = rel_tol * lmax.max(floor).max(f64::MIN_POSITIVE);
        let zero = eig.eigenvalues.iter().map(|l| l.abs() <= tol).collect();
        SymmetricPinv { eig, zero }
    }

    /// Keeps small eigenvalues above `hard` whose direction carries a
    /// non-negligible share of `rhs`: those are weak curvature, not null space.
    fn keep_loaded(&mut self, rhs: &Vector, hard: f64) {
        let load = self.eig.eigenvectors.tr_mul(rhs);
        let noise = 1e-12 * (1.0 + rhs.norm());
        for (i, z) in self.zero.iter_mut().enumerate() {
            if *z && self.eig.eigenvalues[i].abs() > hard && load[i].abs() > noise {
                *z = false;
            }
        }
    }

    fn apply(&self, r: &Vector) -> Vector {
        let v = &self.eig.eigenvectors;
        let mut coef = v.tr_mul(r);
        for (i, c) in coef.iter_mut().enumerate() {
            *c = if self.zero[i] {
                0.0
            } else {
                *c / self.eig.eigenvalues[i]
            };
        }
        v * coef
    }

    fn null_indices(&self) -> Vec<usize> {
        (0..self.zero.len()).filter(|&i| self.zero[i]).collect()
    }
}

/// Dense KKT matrix with its pseudoinverse, used for least-norm saddle solves.
struct KktSystem {
    pinv: SymmetricPinv,
    rhs: Vector,
    k: Matrix,
    primal_dim: usize,
}

impl KktSystem {
    fn new(k: Matrix, rhs: Vector, primal_dim: usize) -> Result<Self> {
        if !k.iter().all(|v| v.is_finite()) {
            return Err(Error::SolverFailure(
                "KKT matrix has non-finite entries".into(),
            ));
        }
        let dim = k.nrows() as f64;
        let mut pinv = SymmetricPinv::new(k.clone(), 1e-11 * dim, 0.0);
        pinv.keep_loaded(&rhs, 1e-14 * dim * k.amax());
        Ok(KktSystem {
            pinv,
            rhs,
            k,
            primal_dim,
        })
    }

    fn pinv_apply(&self, r: &Vector) -> Vector {
        self.pinv.apply(r)
    }

    fn least_norm_solution(&self) -> Vector {
        let mut w = self.pinv_apply(&self.rhs);
        // one step of iterative refinement; stays in the row space
        let res = &self.rhs - &self.k * &w;
        w += self.pinv_apply(&res);
        w
    }

    /// Columns spanning the numerical null space of K.
    fn null_basis(&self) -> Matrix {
        let idx = self.pinv.null_indices();
        let v = &self.pinv.eig.eigenvectors;
        let mut basis = Matrix::zeros(self.k.ncols(), idx.len());
        for (j, &i) in idx.iter().enumerate() {
            basis.set_column(j, &v.column(i));
        }
        basis
    }

    fn uniqueness(&self) -> (bool, bool) {
        let null = self.null_basis();
        if null.ncols() == 0 {
            return (true, true);
        }
        let n = self.primal_dim;
        let primal = null.rows(0, n).norm() <= 1e-8;
        let dual = null.rows(n, null.nrows() - n).norm() <= 1e-8;
        (primal, dual)
    }
}

/// Serializes vectors as plain number lists.
mod flat {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// Saddle point, optimal value and minimal-norm solution of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    #[serde(with = "flat")]
    pub x_star: Vector,
    #[serde(with = "flat")]
    pub y_star: Vector,
    #[serde(with = "flat")]
    pub lambda_star: Vector,
    pub phi_star: f64,
    #[serde(with = "flat")]
    pub x_bar: Vector,
    #[serde(with = "flat")]
    pub y_bar: Vector,
    /// Multiplier paired with the minimal-norm solution.
    #[serde(with = "flat")]
    pub lambda_bar: Vector,
    pub kkt_residual: f64,
    pub unique_primal: bool,
    pub unique_dual: bool,
}

impl ReferenceSolution {
    /// Wraps a user-provided saddle point (needed for oracle problems) after
    /// checking its KKT residual and the minimal-norm pair's feasibility.
    pub fn user_supplied(
        prob: &SeparableProblem,
        saddle: (Vector, Vector, Vector),
        min_norm: (Vector, Vector),
        tol: f64,
    ) -> Result<Self> {
        let (x_star, y_star, lambda_star) = saddle;
        let (x_bar, y_bar) = min_norm;
        let kkt_residual = prob.kkt_residual(&x_star, &y_star, &lambda_star)?;
        if !(kkt_residual < tol) {
            return Err(Error::Verification(format!(
                "supplied saddle point has KKT residual {kkt_residual:e}"
            )));
        }
        let bar_res = prob.kkt_residual(&x_bar, &y_bar, &lambda_star)?;
        if !(bar_res < tol) {
            return Err(Error::Verification(format!(
                "supplied minimal-norm pair has KKT residual {bar_res:e}"
            )));
        }
        let phi_star = prob.objective(&x_star, &y_star)?;
        Ok(ReferenceSolution {
            x_star,
            y_star,
            lambda_bar: lambda_star.clone(),
            lambda_star,
            phi_star,
            x_bar,
            y_bar,
            kkt_residual,
            unique_primal: false,
            unique_dual: false,
        })
    }

    pub fn min_norm_sq(&self) -> f64 {
        self.x_bar.norm_squared() + self.y_bar.norm_squared()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticDoc {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

/// The problem JSON document: `{"f": {"P", "q", "c"}, "g": {...}, "A", "B", "b"}`
/// with row-major matrices. `l1`/`l2` are optional and default to the largest
/// Hessian eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub f: QuadraticDoc,
    pub g: QuadraticDoc,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b_op: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols_hint: usize, what: &str) -> Result<Matrix> {
    let ncols = rows.first().map_or(ncols_hint, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::input(format!("{what}: rows have unequal lengths")));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl QuadraticDoc {
    fn build(&self, what: &str) -> Result<QuadraticForm> {
        let p = matrix_from_rows(&self.p, self.q.len(), what)?;
        QuadraticForm::new(p, Vector::from_column_slice(&self.q), self.c)
    }
}

impl ProblemDoc {
    pub fn build(&self) -> Result<SeparableProblem> {
        let f = self.f.build("f.P")?;
        let g = self.g.build("g.P")?;
        let a = matrix_from_rows(&self.a, f.dim(), "A")?;
        let b = matrix_from_rows(&self.b_op, g.dim(), "B")?;
        let rhs = Vector::from_column_slice(&self.b);
        let l1 = self.l1.unwrap_or_else(|| f.max_eigenvalue());
        let l2 = self.l2.unwrap_or_else(|| g.max_eigenvalue());
        SeparableProblem::with_lipschitz(
            Objective::Quadratic(f),
            Objective::Quadratic(g),
            l1,
            l2,
            a,
            b,
            rhs,
        )
    }
}

/// Built-in instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case")]
pub enum Builtin {
    /// `(m x1 + n x2 + e x3)² + d y²` subject to `m x1 − n x2 + e x3 + d y = 0`.
    Example1 { m: f64, n: f64, e: f64, d: f64 },
    /// `‖x − (1,1)‖² + ‖y‖²` subject to `x − y − (x2, 0) = 0`.
    Example2,
    /// Random feasible convex QP, deterministic in `seed`.
    RandomQp {
        seed: u64,
        n1: usize,
        n2: usize,
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rank_f: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rank_g: Option<usize>,
    },
}

pub fn builtin(which: &Builtin) -> Result<SeparableProblem> {
    match *which {
        Builtin::Example1 { m, n, e, d } => {
            if [m, n, e, d].iter().any(|v| *v == 0.0 || !v.is_finite()) {
                return Err(Error::input(
                    "example1 parameters m, n, e, d must be finite and nonzero",
                ));
            }
            let coeff = Vector::from_vec(vec![m, n, e]);
            let f = QuadraticForm::new(&coeff * coeff.transpose() * 2.0, Vector::zeros(3), 0.0)?;
            let g = QuadraticForm::new(Matrix::from_element(1, 1, 2.0 * d), Vector::zeros(1), 0.0)?;
            let a = Matrix::from_row_slice(1, 3, &[m, -n, e]);
            let b = Matrix::from_element(1, 1, d);
            SeparableProblem::new(f, g, a, b, Vector::zeros(1))
        }
        Builtin::Example2 => {
            let f = QuadraticForm::new(
                Matrix::identity(2, 2) * 2.0,
                Vector::from_vec(vec![-2.0, -2.0]),
                2.0,
            )?;
            let g = QuadraticForm::new(Matrix::identity(2, 2) * 2.0, Vector::zeros(2), 0.0)?;
            let a = Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]);
            let b = -Matrix::identity(2, 2);
            SeparableProblem::new(f, g, a, b, Vector::zeros(2))
        }
        Builtin::RandomQp {
            seed,
            n1,
            n2,
            m,
            rank_f,
            rank_g,
        } => {
            if n1 == 0 || n2 == 0 || m == 0 || n1 + n2 > 100 {
                return Err(Error::input(
                    "random_qp needs positive dimensions with n1 + n2 <= 100",
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut psd = |n: usize, rank: usize| {
                let g = Matrix::from_fn(rank, n, |_, _| rng.random_range(-1.0..1.0));
                let p = g.tr_mul(&g);
                let u = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let q = -(&p * u);
                QuadraticForm::new((&p + p.transpose()) * 0.5, q, 0.0)
            };
            let f = psd(n1, rank_f.unwrap_or(n1))?;
            let g = psd(n2, rank_g.unwrap_or(n2))?;
            let a = Matrix::from_fn(m, n1, |_, _| rng.random_range(-1.0..1.0));
            let b = Matrix::from_fn(m, n2, |_, _| rng.random_range(-1.0..1.0));
            let x0 = Vector::from_fn(n1, |_, _| rng.random_range(-1.0..1.0));
            let y0 = Vector::from_fn(n2, |_, _| rng.random_range(-1.0..1.0));
            let rhs = &a * x0 + &b * y0;
            SeparableProblem::new(f, g, a, b, rhs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn ex1() -> SeparableProblem {
        builtin(&Builtin::Example1 {
            m: 5.0,
            n: 1.0,
            e: 1.0,
            d: 5.0,
        })
        .unwrap()
    }

    fn ex2() -> SeparableProblem {
        builtin(&Builtin::Example2).unwrap()
    }

    #[test]
    fn lagrangian_values() {
        let p = ex1();
        let ones = v(&[1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(
            p.lagrangian(&ones, &v(&[1.0]), &v(&[1.0])).unwrap(),
            64.0,
            epsilon = 1e-12
        );
        assert_eq!(
            p.lagrangian(&Vector::zeros(3), &v(&[0.0]), &v(&[-7.5]))
                .unwrap(),
            0.0
        );
        let q = ex2();
        let val = q
            .lagrangian(&v(&[0.8, 0.6]), &v(&[0.2, 0.6]), &v(&[0.4, 1.2]))
            .unwrap();
        assert_abs_diff_eq!(val, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn aug_lagrangian_values() {
        let p = ex1();
        let ones = v(&[1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(
            p.aug_lagrangian(&ones, &v(&[1.0]), &v(&[1.0])).unwrap(),
            114.0,
            epsilon = 1e-12
        );
        assert_eq!(
            p.aug_lagrangian(&Vector::zeros(3), &v(&[0.0]), &v(&[0.0]))
                .unwrap(),
            0.0
        );
        // feasible point: the penalty vanishes
        let x = v(&[1.0, 0.0, -5.0]);
        let lam = v(&[2.0]);
        assert_eq!(
            p.aug_lagrangian(&x, &v(&[0.0]), &lam).unwrap(),
            p.lagrangian(&x, &v(&[0.0]), &lam).unwrap()
        );
    }

    #[test]
    fn gradient_vanishes_at_saddles() {
        let (gx, gy) = ex1()
            .grad_aug_lagrangian(&Vector::zeros(3), &v(&[0.0]), &v(&[0.0]))
            .unwrap();
        assert_eq!(gx.norm() + gy.norm(), 0.0);
        let (gx, gy) = ex2()
            .grad_aug_lagrangian(&v(&[0.8, 0.6]), &v(&[0.2, 0.6]), &v(&[0.4, 1.2]))
            .unwrap();
        assert!(gx.norm() + gy.norm() < 1e-14);
    }

    #[test]
    fn kkt_residual_values() {
        let p = ex1();
        assert_eq!(
            p.kkt_residual(&Vector::zeros(3), &v(&[0.0]), &v(&[0.0]))
                .unwrap(),
            0.0
        );
        let r = p
            .kkt_residual(&v(&[1.0, 1.0, 1.0]), &v(&[1.0]), &v(&[0.0]))
            .unwrap();
        let expected = (70.0f64.powi(2) + 14.0f64.powi(2) * 2.0 + 100.0 + 100.0).sqrt();
        assert_abs_diff_eq!(r, expected, epsilon = 1e-10);
        let r2 = ex2()
            .kkt_residual(&v(&[0.8, 0.6]), &v(&[0.2, 0.6]), &v(&[0.4, 1.2]))
            .unwrap();
        assert!(r2 < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let p = ex1();
        let err = p
            .lagrangian(&v(&[1.0, 1.0]), &v(&[1.0]), &v(&[1.0]))
            .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
        assert!(matches!(
            p.kkt_residual(&Vector::zeros(3), &v(&[0.0]), &v(&[0.0, 1.0])),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn saddle_point_example1() {
        let r = ex1().solve_saddle_point().unwrap();
        assert!(r.lambda_star.norm() < 1e-12);
        assert!(r.phi_star.abs() < 1e-12);
        assert!(r.kkt_residual < KKT_TOL);
        assert!(!r.unique_primal);
        assert!(r.x_bar.norm() + r.y_bar.norm() < 1e-12);
    }

    #[test]
    fn saddle_point_example2() {
        let r = ex2().solve_saddle_point().unwrap();
        assert!((r.x_star.clone() - v(&[0.8, 0.6])).norm() < 1e-12);
        assert!((r.y_star.clone() - v(&[0.2, 0.6])).norm() < 1e-12);
        assert!((r.lambda_star.clone() - v(&[0.4, 1.2])).norm() < 1e-12);
        assert_abs_diff_eq!(r.phi_star, 0.6, epsilon = 1e-12);
        assert!(r.unique_primal && r.unique_dual);
    }

    #[test]
    fn saddle_point_identity_qp() {
        let f = QuadraticForm::new(Matrix::identity(2, 2), Vector::zeros(2), 0.0).unwrap();
        let g = f.clone();
        let p = SeparableProblem::new(
            f,
            g,
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            Vector::zeros(2),
        )
        .unwrap();
        let r = p.solve_saddle_point().unwrap();
        assert!(r.x_star.norm() + r.y_star.norm() + r.lambda_star.norm() < 1e-14);
        let (x, y) = p.min_norm_solution().unwrap();
        assert!(x.norm() + y.norm() < 1e-14);
    }

    #[test]
    fn min_norm_examples() {
        let (x, y) = ex1().min_norm_solution().unwrap();
        assert!(x.norm() + y.norm() < 1e-12);
        let (x, y) = ex2().min_norm_solution().unwrap();
        assert!((x - v(&[0.8, 0.6])).norm() < 1e-12);
        assert!((y - v(&[0.2, 0.6])).norm() < 1e-12);
    }

    #[test]
    fn min_norm_with_offset_solution_set() {
        // f(x) = (x1 + x2 - 2)^2, g(y) = y^2, constraint x1 - x2 + y = 0.
        // S = {x1 = x2 = 1, y = 0}; unique here, check by hand.
        let c = v(&[1.0, 1.0]);
        let f = QuadraticForm::new(&c * c.transpose() * 2.0, v(&[-4.0, -4.0]), 4.0).unwrap();
        let g = QuadraticForm::new(Matrix::from_element(1, 1, 2.0), v(&[0.0]), 0.0).unwrap();
        let p = SeparableProblem::new(
            f,
            g,
            Matrix::from_row_slice(1, 2, &[1.0, -1.0]),
            Matrix::from_element(1, 1, 1.0),
            v(&[0.0]),
        )
        .unwrap();
        let (x, y) = p.min_norm_solution().unwrap();
        assert!((x - v(&[1.0, 1.0])).norm() < 1e-10);
        assert!(y.norm() < 1e-10);
    }

    #[test]
    fn min_norm_on_a_line() {
        // f ≡ 0 on R^2, g(y) = y^2, constraint x1 + x2 + y = 2: S = {x1 + x2 = 2, y = 0},
        // minimal norm element (1, 1, 0).
        let f = QuadraticForm::new(Matrix::zeros(2, 2), Vector::zeros(2), 0.0).unwrap();
        let g = QuadraticForm::new(Matrix::from_element(1, 1, 2.0), v(&[0.0]), 0.0).unwrap();
        let p = SeparableProblem::new(
            f,
            g,
            Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
            Matrix::from_element(1, 1, 1.0),
            v(&[2.0]),
        )
        .unwrap();
        let r = p.solve_saddle_point().unwrap();
        assert!((r.x_bar.clone() - v(&[1.0, 1.0])).norm() < 1e-10);
        assert!(r.y_bar.norm() < 1e-10);
        assert!(!r.unique_primal);
    }

    #[test]
    fn tikhonov_minimizer_examples() {
        let (x, y) = ex1().tikhonov_minimizer(&v(&[0.0]), 0.3).unwrap();
        assert!(x.norm() + y.norm() < 1e-14);
        let p = ex2();
        let lam = v(&[0.4, 1.2]);
        let (x, y) = p.tikhonov_minimizer(&lam, 1e-6).unwrap();
        assert!((x - v(&[0.8, 0.6])).norm() < 1e-4);
        assert!((y - v(&[0.2, 0.6])).norm() < 1e-4);
        let xbar = (0.8f64 * 0.8 + 0.6 * 0.6).sqrt();
        let ybar = (0.2f64 * 0.2 + 0.6 * 0.6).sqrt();
        for eps in [1.0, 0.1, 0.01] {
            let (x, y) = p.tikhonov_minimizer(&lam, eps).unwrap();
            assert!(x.norm() <= xbar + 1e-12, "eps {eps}: {}", x.norm());
            assert!(y.norm() <= ybar + 1e-12, "eps {eps}: {}", y.norm());
        }
    }

    #[test]
    fn tikhonov_rejects_nonpositive_eps() {
        let p = ex2();
        assert!(matches!(
            p.tikhonov_minimizer(&v(&[0.0, 0.0]), 0.0),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            p.tikhonov_minimizer(&v(&[0.0, 0.0]), -1.0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn builtin_example1_structure() {
        let p = ex1();
        assert_eq!(p.a(), &Matrix::from_row_slice(1, 3, &[5.0, -1.0, 1.0]));
        assert_eq!(p.b(), &Matrix::from_element(1, 1, 5.0));
        let hess = &p.f().as_quadratic().unwrap().p;
        let c = v(&[5.0, 1.0, 1.0]);
        assert_eq!(hess, &(&c * c.transpose() * 2.0));
        assert_abs_diff_eq!(p.l1(), 54.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.l2(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn builtin_example2_structure() {
        let p = ex2();
        assert_eq!(p.a(), &Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]));
        assert_eq!(p.b(), &(-Matrix::identity(2, 2)));
        let x = v(&[0.3, -2.0]);
        let expected = (0.3f64 - 1.0).powi(2) + (-2.0f64 - 1.0).powi(2);
        assert_abs_diff_eq!(p.f().value(&x), expected, epsilon = 1e-12);
    }

    #[test]
    fn builtin_rejects_zero_parameter() {
        let err = builtin(&Builtin::Example1 {
            m: 5.0,
            n: 0.0,
            e: 1.0,
            d: 5.0,
        })
        .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn random_qp_is_deterministic() {
        let spec = Builtin::RandomQp {
            seed: 7,
            n1: 4,
            n2: 3,
            m: 2,
            rank_f: Some(2),
            rank_g: None,
        };
        let a = builtin(&spec).unwrap();
        let b = builtin(&spec).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let other = builtin(&Builtin::RandomQp {
            seed: 8,
            n1: 4,
            n2: 3,
            m: 2,
            rank_f: Some(2),
            rank_g: None,
        })
        .unwrap();
        assert_ne!(a.to_json().unwrap(), other.to_json().unwrap());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let p = builtin(&Builtin::RandomQp {
            seed: 3,
            n1: 3,
            n2: 2,
            m: 2,
            rank_f: None,
            rank_g: None,
        })
        .unwrap();
        let text = p.to_json().unwrap();
        let q = SeparableProblem::from_json(&text).unwrap();
        assert_eq!(q.to_json().unwrap(), text);
        assert_eq!(q.a(), p.a());
        assert_eq!(q.l1().to_bits(), p.l1().to_bits());
    }

    #[test]
    fn rejects_nonconvex_and_inconsistent_input() {
        let bad = QuadraticForm::new(Matrix::from_element(1, 1, -1.0), v(&[0.0]), 0.0);
        assert!(matches!(bad, Err(Error::Input(_))));
        let f = QuadraticForm::new(Matrix::identity(2, 2), Vector::zeros(2), 0.0).unwrap();
        let g = QuadraticForm::new(Matrix::identity(1, 1), Vector::zeros(1), 0.0).unwrap();
        let r = SeparableProblem::new(
            f,
            g,
            Matrix::zeros(1, 3),
            Matrix::zeros(1, 1),
            Vector::zeros(1),
        );
        assert!(matches!(r, Err(Error::Input(_))));
    }

    struct Quartic;
    impl SmoothConvex for Quartic {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &Vector) -> f64 {
            x[0].powi(4)
        }
        fn gradient(&self, x: &Vector) -> Vector {
            v(&[4.0 * x[0].powi(3)])
        }
    }

    #[test]
    fn oracle_problems_need_user_references() {
        let p = SeparableProblem::with_lipschitz(
            Objective::Oracle(Arc::new(Quartic)),
            Objective::Oracle(Arc::new(Quartic)),
            12.0,
            12.0,
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, -1.0),
            v(&[0.0]),
        )
        .unwrap();
        assert!(matches!(p.solve_saddle_point(), Err(Error::Unsupported(_))));
        let refs = ReferenceSolution::user_supplied(
            &p,
            (v(&[0.0]), v(&[0.0]), v(&[0.0])),
            (v(&[0.0]), v(&[0.0])),
            1e-12,
        )
        .unwrap();
        assert_eq!(refs.phi_star, 0.0);
    }

    #[test]
    fn reference_solution_serializes_flat_lists() {
        let refs = ex2().solve_saddle_point().unwrap();
        let text = serde_json::to_string(&refs).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["x_star"].as_array().unwrap().len(), 2);
        assert!(doc["x_star"][0].is_f64());
        let back: ReferenceSolution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, refs);
    }

    #[test]
    fn rank_deficient_kkt_system_solves_accurately() {
        let prob = builtin(&Builtin::RandomQp {
            seed: 876,
            n1: 4,
            n2: 2,
            m: 1,
            rank_f: Some(2),
            rank_g: Some(1),
        })
        .unwrap();
        let refs = prob.solve_saddle_point().unwrap();
        assert!(refs.kkt_residual < 1e-12);
        assert!(!refs.unique_primal);
    }

    #[test]
    fn weak_curvature_is_not_treated_as_null_space() {
        let prob = builtin(&Builtin::RandomQp {
            seed: 5586,
            n1: 4,
            n2: 1,
            m: 3,
            rank_f: Some(2),
            rank_g: Some(0),
        })
        .unwrap();
        let refs = prob.solve_saddle_point().unwrap();
        assert!(refs.kkt_residual < 1e-10);
        assert!(refs.unique_primal);
    }
}
