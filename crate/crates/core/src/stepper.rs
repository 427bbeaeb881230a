//! One time step of the augmented SAV scheme.
//!
//! Unknowns are `X = [phi; mu; theta; r; s]` with sizes `N, N, Nb, 1, 1`. With
//! lumped masses `D = diag(m)`, `Db = diag(b)`, stiffness `K`, surface
//! stiffness `Ks` and trace selection `T`, the step solves
//!
//! ```text
//! D phi + tau K mu                                   = D (phi_old + w)
//! Db T phi + tau Db theta                            = Db (T phi_old + w_gamma)
//! (K + T'Ks T) phi + a r + T'c s - D mu - T'Db theta = 0
//! r - a'phi / 2                                      = r_old - a'phi_old / 2
//! s - c'T phi / 2                                    = s_old - c'T phi_old / 2
//! ```
//!
//! where `a` and `c` carry the linearized potential derivatives together with
//! the second-order noise corrections (see [`CouplingVectors`]). The system is
//! solved monolithically with a sparse LU factorization.

use std::cell::OnceCell;
use std::f64::consts::PI;
use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat, Triplet};
use faer::{Col, Par};

use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::mesh::{Point, TriMesh};
use crate::noise::NoiseField;
use crate::potentials::PotentialSpec;

/// Relative residual the linear solve must reach.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

static SEQUENTIAL: Once = Once::new();

/// One time level of the discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SavState {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub theta: Vec<f64>,
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

impl SavState {
    pub fn is_finite(&self) -> bool {
        self.r.is_finite()
            && self.s.is_finite()
            && self.phi.iter().chain(&self.mu).chain(&self.theta).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Constant(f64),
    /// `cos(pi x) cos(pi y)`
    Cosine,
    /// `tanh((radius - |x - center|) / width)`
    Droplet {
        center: Point,
        radius: f64,
        width: f64,
    },
}

impl InitialCondition {
    pub fn eval(&self, p: Point) -> f64 {
        match *self {
            InitialCondition::Constant(c) => c,
            InitialCondition::Cosine => (PI * p[0]).cos() * (PI * p[1]).cos(),
            InitialCondition::Droplet {
                center,
                radius,
                width,
            } => {
                let d = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
                ((radius - d) / width).tanh()
            }
        }
    }
}

/// Nodal interpolant of the initial phase field with `r = sqrt(E_O)`, `s = sqrt(E_G)`.
pub fn initial_state(
    mesh: &TriMesh,
    ops: &FemOperators,
    pot: &PotentialSpec,
    ic: InitialCondition,
) -> Result<SavState> {
    if let InitialCondition::Droplet { width, .. } = ic {
        if !(width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "droplet width must be positive, got {width}"
            )));
        }
    }
    let phi: Vec<f64> = mesh.vertices.iter().map(|&p| ic.eval(p)).collect();
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("initial condition is not finite".into()));
    }
    let r = pot.energy_bulk(ops, &phi).sqrt();
    let s = pot.energy_surf(ops, &phi).sqrt();
    Ok(SavState {
        mu: vec![0.0; phi.len()],
        theta: vec![0.0; ops.num_boundary_nodes()],
        phi,
        r,
        s,
        t: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SavVariant {
    /// First-order Taylor update plus the second-order noise corrections.
    Augmented,
    /// Plain first-order SAV update; diagnostic use only.
    Classical,
}

/// Noise-dependent coefficients of one step, all evaluated at the old state.
///
/// ```text
/// a_i = m_i [ F'_i (E_O^{-1/2} - sigma_F / (4 E_O^{3/2})) + F''_i w_i / (2 sqrt(E_O)) ]
/// c_j = b_j [ G'_j (E_G^{-1/2} - sigma_G / (4 E_G^{3/2})) + G''_j wg_j / (2 sqrt(E_G)) ]
/// sigma_F = sum_i m_i F'_i w_i,   sigma_G = sum_j b_j G'_j wg_j
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingVectors {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub sigma_f: f64,
    pub sigma_g: f64,
    pub e_o: f64,
    pub e_g: f64,
    pub w: Vec<f64>,
    pub w_gamma: Vec<f64>,
    pub df: Vec<f64>,
    pub d2f: Vec<f64>,
    /// `G'` and `G''` at the boundary nodes, boundary-local order.
    pub dg: Vec<f64>,
    pub d2g: Vec<f64>,
    pub variant: SavVariant,
}

impl CouplingVectors {
    pub fn is_augmented(&self) -> bool {
        self.variant == SavVariant::Augmented
    }
}

pub fn build_coupling(
    ops: &FemOperators,
    pot: &PotentialSpec,
    prev: &SavState,
    noise: &NoiseField,
    variant: SavVariant,
) -> Result<CouplingVectors> {
    let phi_b = ops.trace(&prev.phi);
    let e_o = pot.energy_bulk(ops, &prev.phi);
    let e_g = pot.energy_surf(ops, &prev.phi);
    if !(e_o.is_finite() && e_g.is_finite() && e_o > 0.0 && e_g > 0.0) {
        return Err(Error::Numerical(format!(
            "potential energies must be finite and positive (bulk {e_o}, boundary {e_g})"
        )));
    }
    let df: Vec<f64> = prev.phi.iter().map(|&p| pot.df(p)).collect();
    let d2f: Vec<f64> = prev.phi.iter().map(|&p| pot.d2f(p)).collect();
    let dg: Vec<f64> = phi_b.iter().map(|&p| pot.dg(p)).collect();
    let d2g: Vec<f64> = phi_b.iter().map(|&p| pot.d2g(p)).collect();

    let sigma_f: f64 = ops
        .mass
        .iter()
        .zip(&df)
        .zip(&noise.w)
        .map(|((m, d), w)| m * d * w)
        .sum();
    let sigma_g: f64 = ops
        .boundary_mass
        .iter()
        .zip(&dg)
        .zip(&noise.w_gamma)
        .map(|((b, d), w)| b * d * w)
        .sum();

    let augmented = variant == SavVariant::Augmented;
    let coeffs = |e: f64, sigma: f64| {
        let inv_sqrt = 1.0 / e.sqrt();
        if augmented {
            (inv_sqrt - sigma / (4.0 * e * e.sqrt()), 0.5 * inv_sqrt)
        } else {
            (inv_sqrt, 0.0)
        }
    };
    let (lin_o, quad_o) = coeffs(e_o, sigma_f);
    let (lin_g, quad_g) = coeffs(e_g, sigma_g);

    let a = (0..ops.num_nodes())
        .map(|i| ops.mass[i] * (df[i] * lin_o + d2f[i] * noise.w[i] * quad_o))
        .collect();
    let c = (0..ops.num_boundary_nodes())
        .map(|j| ops.boundary_mass[j] * (dg[j] * lin_g + d2g[j] * noise.w_gamma[j] * quad_g))
        .collect();

    Ok(CouplingVectors {
        a,
        c,
        sigma_f,
        sigma_g,
        e_o,
        e_g,
        w: noise.w.clone(),
        w_gamma: noise.w_gamma.clone(),
        df,
        d2f,
        dg,
        d2g,
        variant,
    })
}

/// Nodal correction terms added to the potential equation by the augmented update.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionTerms {
    pub xi_o: Vec<f64>,
    pub xi_g: Vec<f64>,
}

impl CorrectionTerms {
    pub fn norm_bulk(&self, ops: &FemOperators) -> f64 {
        ops.norm_bulk(&self.xi_o)
    }

    pub fn norm_surf(&self, ops: &FemOperators) -> f64 {
        ops.norm_surf(&self.xi_g)
    }
}

/// `Xi_O = r [ -sigma_F F' / (4 E_O^{3/2}) + F'' w / (2 sqrt(E_O)) ]` and the
/// boundary analogue with `s`, `G`, `w_gamma`, `E_G`.
pub fn correction_terms(new: &SavState, coupling: &CouplingVectors) -> CorrectionTerms {
    if !coupling.is_augmented() {
        return CorrectionTerms {
            xi_o: vec![0.0; coupling.a.len()],
            xi_g: vec![0.0; coupling.c.len()],
        };
    }
    let build = |scale: f64, e: f64, sigma: f64, d1: &[f64], d2: &[f64], w: &[f64]| {
        let sq = e.sqrt();
        d1.iter()
            .zip(d2)
            .zip(w)
            .map(|((d1, d2), w)| scale * (-sigma / (4.0 * e * sq) * d1 + d2 * w / (2.0 * sq)))
            .collect::<Vec<f64>>()
    };
    CorrectionTerms {
        xi_o: build(
            new.r,
            coupling.e_o,
            coupling.sigma_f,
            &coupling.df,
            &coupling.d2f,
            &coupling.w,
        ),
        xi_g: build(
            new.s,
            coupling.e_g,
            coupling.sigma_g,
            &coupling.dg,
            &coupling.d2g,
            &coupling.w_gamma,
        ),
    }
}

/// Assembled step system in triplet form.
#[derive(Debug, Clone)]
pub struct BorderedSystem {
    pub dim: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

/// Offsets of the unknown blocks.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n: usize,
    pub nb: usize,
}

impl Layout {
    pub fn phi(&self) -> usize {
        0
    }
    pub fn mu(&self) -> usize {
        self.n
    }
    pub fn theta(&self) -> usize {
        2 * self.n
    }
    pub fn r(&self) -> usize {
        2 * self.n + self.nb
    }
    pub fn s(&self) -> usize {
        2 * self.n + self.nb + 1
    }
    pub fn dim(&self) -> usize {
        2 * self.n + self.nb + 2
    }
}

impl BorderedSystem {
    /// Equations are stacked so that each block row pairs with the unknown
    /// block of the same offset: conservation rows at the `phi` offset,
    /// potential rows at `mu`, boundary rows at `theta`, SAV rows last.
    pub fn assemble(
        ops: &FemOperators,
        tau: f64,
        prev: &SavState,
        coupling: &CouplingVectors,
    ) -> Self {
        let lay = Layout {
            n: ops.num_nodes(),
            nb: ops.num_boundary_nodes(),
        };
        let (n, nb) = (lay.n, lay.nb);
        let tr = &ops.trace_map;
        let mut t = Vec::with_capacity(
            2 * ops.stiffness.nnz() + 2 * ops.surface_stiffness.nnz() + 4 * n + 4 * nb,
        );
        let mut rhs = vec![0.0; lay.dim()];

        // conservation in the bulk
        for i in 0..n {
            t.push((lay.phi() + i, lay.phi() + i, ops.mass[i]));
            for (c, v) in ops.stiffness.row(i) {
                t.push((lay.phi() + i, lay.mu() + c, tau * v));
            }
            rhs[lay.phi() + i] = ops.mass[i] * (prev.phi[i] + coupling.w[i]);
        }

        // potential equation
        for i in 0..n {
            let row = lay.mu() + i;
            for (c, v) in ops.stiffness.row(i) {
                t.push((row, lay.phi() + c, v));
            }
            t.push((row, lay.mu() + i, -ops.mass[i]));
            t.push((row, lay.r(), coupling.a[i]));
        }
        for j in 0..nb {
            let row = lay.mu() + tr[j];
            for (l, v) in ops.surface_stiffness.row(j) {
                t.push((row, lay.phi() + tr[l], v));
            }
            t.push((row, lay.theta() + j, -ops.boundary_mass[j]));
            t.push((row, lay.s(), coupling.c[j]));
        }

        // dynamic boundary condition
        for j in 0..nb {
            let row = lay.theta() + j;
            let b = ops.boundary_mass[j];
            t.push((row, lay.phi() + tr[j], b));
            t.push((row, lay.theta() + j, tau * b));
            rhs[row] = b * (prev.phi[tr[j]] + coupling.w_gamma[j]);
        }

        // SAV updates
        let mut a_phi_old = 0.0;
        t.push((lay.r(), lay.r(), 1.0));
        for i in 0..n {
            t.push((lay.r(), lay.phi() + i, -0.5 * coupling.a[i]));
            a_phi_old += coupling.a[i] * prev.phi[i];
        }
        rhs[lay.r()] = prev.r - 0.5 * a_phi_old;

        let mut c_phi_old = 0.0;
        t.push((lay.s(), lay.s(), 1.0));
        for j in 0..nb {
            t.push((lay.s(), lay.phi() + tr[j], -0.5 * coupling.c[j]));
            c_phi_old += coupling.c[j] * prev.phi[tr[j]];
        }
        rhs[lay.s()] = prev.s - 0.5 * c_phi_old;

        Self {
            dim: lay.dim(),
            triplets: t,
            rhs,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        y
    }

    /// `||A x - b||_2 / ||b||_2` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.apply(x);
        let res: f64 = ax
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let nb = self.rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        if nb > 0.0 {
            res / nb
        } else {
            res
        }
    }

    /// Symmetric permutation: new unknown/equation `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim);
        let mut inv = vec![usize::MAX; self.dim];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        assert!(inv.iter().all(|&k| k != usize::MAX), "not a permutation");
        Self {
            dim: self.dim,
            triplets: self
                .triplets
                .iter()
                .map(|&(r, c, v)| (inv[r], inv[c], v))
                .collect(),
            rhs: perm.iter().map(|&p| self.rhs[p]).collect(),
        }
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<Triplet<usize, usize, f64>> = self
            .triplets
            .iter()
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.dim, self.dim, &t)
            .map_err(|e| Error::Numerical(format!("sparse matrix construction failed: {e:?}")))
    }

    /// Sparse LU solve with one round of iterative refinement if needed.
    /// Returns the solution and its relative residual.
    pub fn solve(&self, cache: Option<&SymbolicCache>) -> Result<(Vec<f64>, f64)> {
        // systems are small; paths are parallelised instead
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
        let mat = self.to_faer()?;
        let symbolic = match cache {
            Some(cache) => cache.get_or_analyze(&mat)?,
            None => analyze(&mat)?,
        };
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| Error::Numerical(format!("LU factorization failed: {e:?}")))?;
        let solve = |b: &[f64]| -> Vec<f64> {
            let mut col = Col::<f64>::from_fn(self.dim, |i| b[i]);
            lu.solve_in_place(col.as_mut());
            (0..self.dim).map(|i| col[i]).collect()
        };
        let mut x = solve(&self.rhs);
        let mut rel = self.relative_residual(&x);
        if !(rel <= SOLVER_TOLERANCE) && rel.is_finite() {
            let ax = self.apply(&x);
            let res: Vec<f64> = ax.iter().zip(&self.rhs).map(|(a, b)| b - a).collect();
            let dx = solve(&res);
            for (x, d) in x.iter_mut().zip(dx) {
                *x += d;
            }
            rel = self.relative_residual(&x);
        }
        Ok((x, rel))
    }
}

fn analyze(mat: &SparseColMat<usize, f64>) -> Result<SymbolicLu<usize>> {
    SymbolicLu::try_new(mat.symbolic())
        .map_err(|e| Error::Numerical(format!("symbolic LU analysis failed: {e:?}")))
}

/// Reuses the symbolic LU analysis while the sparsity pattern is unchanged.
#[derive(Default)]
pub struct SymbolicCache {
    cell: OnceCell<(SymbolicSparseColMat<usize>, SymbolicLu<usize>)>,
}

impl SymbolicCache {
    fn get_or_analyze(&self, mat: &SparseColMat<usize, f64>) -> Result<SymbolicLu<usize>> {
        if let Some((pattern, sym)) = self.cell.get() {
            if pattern.col_ptr() == mat.symbolic().col_ptr()
                && pattern.row_idx() == mat.symbolic().row_idx()
            {
                return Ok(sym.clone());
            }
            return analyze(mat);
        }
        let sym = analyze(mat)?;
        let _ = self.cell.set((mat.symbolic().to_owned().map_err(|e| {
            Error::Numerical(format!("pattern copy failed: {e:?}"))
        })?, sym.clone()));
        Ok(sym)
    }
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SavState,
    pub coupling: CouplingVectors,
    pub corrections: CorrectionTerms,
    pub solver_residual: f64,
}

/// Advances states of one path with a fixed step size.
pub struct Stepper<'a> {
    ops: &'a FemOperators,
    pot: PotentialSpec,
    tau: f64,
    variant: SavVariant,
    cache: SymbolicCache,
}

impl<'a> Stepper<'a> {
    pub fn new(ops: &'a FemOperators, pot: PotentialSpec, tau: f64, variant: SavVariant) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
        }
        Ok(Self {
            ops,
            pot,
            tau,
            variant,
            cache: SymbolicCache::default(),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn ops(&self) -> &FemOperators {
        self.ops
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.pot
    }

    pub fn coupling(&self, prev: &SavState, noise: &NoiseField) -> Result<CouplingVectors> {
        build_coupling(self.ops, &self.pot, prev, noise, self.variant)
    }

    pub fn system(&self, prev: &SavState, coupling: &CouplingVectors) -> BorderedSystem {
        BorderedSystem::assemble(self.ops, self.tau, prev, coupling)
    }

    /// Solves the step system for the new state.
    pub fn step(&self, prev: &SavState, coupling: &CouplingVectors) -> Result<(SavState, f64)> {
        let sys = self.system(prev, coupling);
        let (x, rel) = sys.solve(Some(&self.cache))?;
        self.unpack(prev, x, rel)
    }

    /// Same solve after a symmetric permutation of unknowns and equations.
    pub fn step_permuted(
        &self,
        prev: &SavState,
        coupling: &CouplingVectors,
        perm: &[usize],
    ) -> Result<(SavState, f64)> {
        let sys = self.system(prev, coupling).permuted(perm);
        let (y, rel) = sys.solve(None)?;
        let mut x = vec![0.0; y.len()];
        for (k, &p) in perm.iter().enumerate() {
            x[p] = y[k];
        }
        self.unpack(prev, x, rel)
    }

    fn unpack(&self, prev: &SavState, x: Vec<f64>, rel: f64) -> Result<(SavState, f64)> {
        let step = (prev.t / self.tau).round() as usize + 1;
        if !(rel <= SOLVER_TOLERANCE) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepFailure {
                step,
                residual: rel,
                detail: "linear solve did not reach the residual tolerance".into(),
            });
        }
        let lay = Layout {
            n: self.ops.num_nodes(),
            nb: self.ops.num_boundary_nodes(),
        };
        let state = SavState {
            phi: x[lay.phi()..lay.mu()].to_vec(),
            mu: x[lay.mu()..lay.theta()].to_vec(),
            theta: x[lay.theta()..lay.r()].to_vec(),
            r: x[lay.r()],
            s: x[lay.s()],
            t: prev.t + self.tau,
        };
        Ok((state, rel))
    }

    /// Builds the coupling from `noise`, solves, and evaluates the corrections.
    pub fn advance(&self, prev: &SavState, noise: &NoiseField) -> Result<StepOutcome> {
        let coupling = self.coupling(prev, noise)?;
        let (state, solver_residual) = self.step(prev, &coupling)?;
        let corrections = correction_terms(&state, &coupling);
        Ok(StepOutcome {
            state,
            coupling,
            corrections,
            solver_residual,
        })
    }
}
