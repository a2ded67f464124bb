//! Steady state of the driven polariton-frame model by photon-number sectors.
//!
//! The Hamiltonian conserves the photon number of a₂ except for the weak
//! probe, so ρ splits into blocks ρ_{n,n'} (photon number n on the ket side,
//! n' on the bra side). Inside a block the two polariton modes act through
//! independent single-mode superoperators, and the stationarity condition
//! for the block, rearranged as an N₊² × N₋² matrix Y, is the Sylvester
//! equation
//!
//! ```text
//! S₊·Y + Y·S₋ᵀ + c·Y = −(couplings to neighbouring blocks)
//! c = −iΔ₂′(n − n') − κ(n + n')/2
//! ```
//!
//! In the polaron frame each sector (n, n') is expanded around the
//! displaced vacua D(n·g/ω) on the ket side and D(n'·g/ω) on the bra side.
//! The mechanical Hamiltonian of every sector is then diagonal, and the
//! displacement moves into the couplings between sectors, which carry a
//! factor U = exp[(g/ω)(B† − B)] per photon created or lost. Sectors with
//! large n stay close to their displaced vacuum, so far fewer phonon levels
//! are needed when g/ω is of order one.
//!
//! The blocks are relaxed by block Gauss–Seidel, highest photon numbers
//! first. Each block is solved exactly through the complex Schur form of S₊,
//! computed once per solver, and one sparse LU of S₋ per Schur row, computed
//! once per probe detuning. Sector (0,0) carries the stationary null
//! direction; its zero pivot is solved with the trace held at zero and the
//! trace is restored with the stationary state of that sector after every
//! sweep.

use std::borrow::Cow;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use faer::sparse::linalg::solvers::Lu;

use super::dense::{gemm, matmul};
use super::shifted::{solve_in_place, ShiftedOperator};
use super::DensityMatrix;
use crate::error::{Error, Result};
use crate::hilbert::{displacement, HilbertSpec};
use crate::model::PolaritonBasis;

type C = Complex64;

/// Basis in which each photon-number sector is expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Fock states of B₊ and B₋.
    Bare,
    /// Fock states displaced by n·g_σ/ω_σ in photon sector n.
    Polaron,
}

/// One polariton mode as seen by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeChannel {
    pub omega: f64,
    /// Radiation-pressure coupling; the photon-n Hamiltonian is
    /// ωB†B − n·g·(B + B†).
    pub g: f64,
    pub rate_down: f64,
    pub rate_up: f64,
}

impl ModeChannel {
    /// Displacement g/ω of the photon-one equilibrium.
    pub fn displacement(&self) -> f64 {
        self.g / self.omega
    }

    pub fn plus(basis: &PolaritonBasis) -> Self {
        Self {
            omega: basis.omega_plus,
            g: basis.g_plus,
            rate_down: basis.kappa_plus * (basis.n_plus + 1.0),
            rate_up: basis.kappa_plus * basis.n_plus,
        }
    }

    pub fn minus(basis: &PolaritonBasis) -> Self {
        Self {
            omega: basis.omega_minus,
            g: basis.g_minus,
            rate_down: basis.kappa_minus * (basis.n_minus + 1.0),
            rate_up: basis.kappa_minus * basis.n_minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorOptions {
    /// Sweeps stop once max|ΔY| / max|Y| falls below this and the moments
    /// have settled.
    pub change_tol: f64,
    /// Bound on the relative change of ⟨a₂†a₂⟩ and ⟨a₂†²a₂²⟩ per sweep. Far
    /// from resonance the two-photon blocks are many orders below the vacuum
    /// block, so max|ΔY| alone would stop before g²(0) settles.
    pub moment_tol: f64,
    pub max_sweeps: usize,
    /// Target for ‖L(ρ)‖ / (‖L‖·‖ρ‖), checked after the sweeps.
    pub residual_tol: f64,
}

impl Default for SectorOptions {
    fn default() -> Self {
        Self {
            change_tol: 1e-14,
            moment_tol: 1e-11,
            max_sweeps: 400,
            residual_tol: 1e-10,
        }
    }
}

/// Rows per panel in the blocked back substitution.
const PANEL: usize = 16;

struct Factor {
    op: DMatrix<C>,
    q: DMatrix<C>,
    qh: DMatrix<C>,
    t: DMatrix<C>,
    /// Tᵀ, whose rows are the columns of T as 1×n views.
    tt: DMatrix<C>,
    norm: f64,
}

impl Factor {
    fn new(op: DMatrix<C>) -> Result<Self> {
        let norm = row_sum_norm(&op);
        let schur = Schur::try_new(op.clone(), f64::EPSILON, 100_000)
            .ok_or_else(|| Error::NonConvergence("complex Schur decomposition failed".into()))?;
        let (q, t) = schur.unpack();
        let qh = q.adjoint();
        let tt = t.transpose();
        Ok(Self { op, q, qh, t, tt, norm })
    }

    /// Operator kept for residuals only; the sector is filled by mirroring.
    fn unfactored(op: DMatrix<C>) -> Self {
        let norm = row_sum_norm(&op);
        let empty = DMatrix::zeros(0, 0);
        Self {
            op,
            q: empty.clone(),
            qh: empty.clone(),
            t: empty.clone(),
            tt: empty,
            norm,
        }
    }
}

fn row_sum_norm(m: &DMatrix<C>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn max_abs(m: &DMatrix<C>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// One mode's superoperator in sector (n_ket, n_bra) as a sum of terms
/// coef·(outer ⊗ inner), acting on column-stacked N×N matrices.
type Terms = Vec<(DMatrix<C>, DMatrix<C>, C)>;

fn single_mode_terms(levels: usize, ch: &ModeChannel, n_ket: usize, n_bra: usize, frame: Frame) -> Terms {
    let mut b = DMatrix::<C>::zeros(levels, levels);
    for m in 1..levels {
        b[(m - 1, m)] = C::new((m as f64).sqrt(), 0.0);
    }
    let bd = b.adjoint();
    let id = DMatrix::<C>::identity(levels, levels);
    let number = &bd * &b;
    let ham = |n: usize| {
        let nf = n as f64;
        match frame {
            Frame::Bare => &number * C::new(ch.omega, 0.0) - (&b + &bd) * C::new(nf * ch.g, 0.0),
            Frame::Polaron => {
                &number * C::new(ch.omega, 0.0) - &id * C::new(nf * nf * ch.g * ch.g / ch.omega, 0.0)
            }
        }
    };
    // Jump operators seen from each side of the block.
    let shift = |n: usize| match frame {
        Frame::Bare => C::new(0.0, 0.0),
        Frame::Polaron => C::new(n as f64 * ch.displacement(), 0.0),
    };
    let mut terms = vec![
        (id.clone(), ham(n_ket), C::new(0.0, -1.0)),
        (ham(n_bra).transpose(), id.clone(), C::new(0.0, 1.0)),
    ];
    for (c, rate) in [(&b, ch.rate_down), (&bd, ch.rate_up)] {
        if rate == 0.0 {
            continue;
        }
        let ck = c + &id * shift(n_ket);
        let cb = c + &id * shift(n_bra);
        let kk = ck.adjoint() * &ck;
        let bb = cb.adjoint() * &cb;
        terms.push((cb.conjugate(), ck, C::new(rate, 0.0)));
        terms.push((id.clone(), kk, C::new(-0.5 * rate, 0.0)));
        terms.push((bb.transpose(), id.clone(), C::new(-0.5 * rate, 0.0)));
    }
    terms
}

fn dense_superop(terms: &Terms) -> DMatrix<C> {
    let n = terms[0].0.nrows();
    let mut s = DMatrix::<C>::zeros(n * n, n * n);
    for (outer, inner, coef) in terms {
        s += outer.kronecker(inner) * *coef;
    }
    s
}

fn sparse_superop(terms: &Terms) -> Vec<(usize, usize, C)> {
    let n = terms[0].0.nrows();
    let nonzero = |m: &DMatrix<C>| -> Vec<(usize, usize, C)> {
        let mut v = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)].norm() != 0.0 {
                    v.push((i, j, m[(i, j)]));
                }
            }
        }
        v
    };
    let mut out = Vec::new();
    for (outer, inner, coef) in terms {
        let inner = nonzero(inner);
        for (i, j, a) in nonzero(outer) {
            for &(k, l, b) in &inner {
                out.push((i * n + k, j * n + l, coef * a * b));
            }
        }
    }
    out
}

/// Side of a block a mode operator acts on.
#[derive(Clone, Copy)]
enum Side {
    /// Z → A·Z
    Ket,
    /// Z → Z·A
    Bra,
}

/// Applies a single-mode operator to the B₊ index pair of a block
/// (rows, index p + N₊·p').
fn on_rows(y: &DMatrix<C>, levels: usize, a: &DMatrix<C>, side: Side) -> DMatrix<C> {
    let (rows, cols) = y.shape();
    let (one, zero) = (C::new(1.0, 0.0), C::new(0.0, 0.0));
    let mut out = DMatrix::<C>::zeros(rows, cols);
    match side {
        // Seen as N₊ × (N₊·cols), the block is one matrix for A to act on.
        Side::Ket => gemm(
            one,
            &a.as_view(),
            &DMatrixView::from_slice(y.as_slice(), levels, levels * cols),
            zero,
            &mut DMatrixViewMut::from_slice(out.as_mut_slice(), levels, levels * cols),
        ),
        // Each column is an N₊ × N₊ matrix.
        Side::Bra => {
            for (src, dst) in y.as_slice().chunks(rows).zip(out.as_mut_slice().chunks_mut(rows)) {
                gemm(
                    one,
                    &DMatrixView::from_slice(src, levels, levels),
                    &a.as_view(),
                    zero,
                    &mut DMatrixViewMut::from_slice(dst, levels, levels),
                );
            }
        }
    }
    out
}

/// Applies a single-mode operator to the B₋ index pair of a block
/// (columns, index m + N₋·m'). `a_t` is the transpose of the operator.
fn on_cols(y: &DMatrix<C>, levels: usize, a: &DMatrix<C>, a_t: &DMatrix<C>, side: Side) -> DMatrix<C> {
    let (rows, cols) = y.shape();
    let (one, zero) = (C::new(1.0, 0.0), C::new(0.0, 0.0));
    let mut out = DMatrix::<C>::zeros(rows, cols);
    match side {
        // Columns m' = x form a rows × N₋ panel that is multiplied by Aᵀ.
        Side::Ket => {
            let width = rows * levels;
            for (src, dst) in y.as_slice().chunks(width).zip(out.as_mut_slice().chunks_mut(width)) {
                gemm(
                    one,
                    &DMatrixView::from_slice(src, rows, levels),
                    &a_t.as_view(),
                    zero,
                    &mut DMatrixViewMut::from_slice(dst, rows, levels),
                );
            }
        }
        // Seen as (rows·N₋) × N₋, the block is one matrix multiplied by A.
        Side::Bra => gemm(
            one,
            &DMatrixView::from_slice(y.as_slice(), rows * levels, levels),
            &a.as_view(),
            zero,
            &mut DMatrixViewMut::from_slice(out.as_mut_slice(), rows * levels, levels),
        ),
    }
    out
}

/// Displacements U₊, U₋ and their transposes (= inverses).
struct Displacements {
    plus: DMatrix<C>,
    plus_t: DMatrix<C>,
    minus: DMatrix<C>,
    minus_t: DMatrix<C>,
}

impl Displacements {
    fn new(spec: &HilbertSpec, plus: &ModeChannel, minus: &ModeChannel) -> Self {
        let up = displacement(spec.n_plus, plus.displacement()).map(|v| C::new(v, 0.0));
        let um = displacement(spec.n_minus, minus.displacement()).map(|v| C::new(v, 0.0));
        Self {
            plus_t: up.transpose(),
            plus: up,
            minus_t: um.transpose(),
            minus: um,
        }
    }

    /// Both modes, one side.
    fn apply(&self, y: &DMatrix<C>, spec: &HilbertSpec, side: Side, inverse: bool) -> DMatrix<C> {
        let (p, m, m_t) = if inverse {
            (&self.plus_t, &self.minus_t, &self.minus)
        } else {
            (&self.plus, &self.minus, &self.minus_t)
        };
        on_cols(&on_rows(y, spec.n_plus, p, side), spec.n_minus, m, m_t, side)
    }
}

/// B₋ superoperator of one sector, factored per probe detuning.
struct MinusSector {
    op: ShiftedOperator,
    /// Sector (0,0) only: the same operator bordered by the trace row and
    /// column, which removes its stationary null direction.
    bordered: Option<ShiftedOperator>,
}

/// Per-row solvers of one block at a fixed probe detuning.
enum RowSolver {
    Plain(Lu<usize, C>),
    /// Zero pivot of sector (0,0): solved with the trace fixed to zero.
    Bordered(Lu<usize, C>),
}

/// Stationary-state solver for one set of polariton parameters; reusable
/// across probe detunings and drive strengths.
pub struct SectorSolver {
    spec: HilbertSpec,
    frame: Frame,
    displacements: Option<Displacements>,
    kappa: f64,
    plus: Vec<Factor>,
    minus: Vec<MinusSector>,
    sigma00: DMatrix<C>,
    tiny: f64,
}

impl SectorSolver {
    /// Solver in the bare Fock basis.
    pub fn new(basis: &PolaritonBasis, kappa: f64, spec: HilbertSpec) -> Result<Self> {
        Self::with_frame(basis, kappa, spec, Frame::Bare)
    }

    pub fn with_frame(basis: &PolaritonBasis, kappa: f64, spec: HilbertSpec, frame: Frame) -> Result<Self> {
        Self::from_channels(ModeChannel::plus(basis), ModeChannel::minus(basis), kappa, spec, frame)
    }

    pub fn from_channels(
        plus: ModeChannel,
        minus: ModeChannel,
        kappa: f64,
        spec: HilbertSpec,
        frame: Frame,
    ) -> Result<Self> {
        spec.validate()?;
        if !(kappa > 0.0) {
            return Err(Error::InvalidParam("kappa > 0".into()));
        }
        let nc = spec.n_cav;
        let nm = spec.n_minus;
        let trace: Vec<C> = (0..nm * nm)
            .map(|k| if k % (nm + 1) == 0 { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) })
            .collect();
        let mut pf = Vec::with_capacity(nc * nc);
        let mut mf = Vec::with_capacity(nc * nc);
        for n in 0..nc {
            for np in 0..nc {
                let sp = dense_superop(&single_mode_terms(spec.n_plus, &plus, n, np, frame));
                // Sectors with n > n' are filled by mirroring and never solved.
                pf.push(if n <= np { Factor::new(sp)? } else { Factor::unfactored(sp) });
                let sm = sparse_superop(&single_mode_terms(nm, &minus, n, np, frame));
                let bordered = if n + np == 0 {
                    Some(ShiftedOperator::new(nm * nm, sm.iter().copied(), Some(&trace))?)
                } else {
                    None
                };
                mf.push(MinusSector {
                    op: ShiftedOperator::new(nm * nm, sm, None)?,
                    bordered,
                });
            }
        }
        let scale = pf
            .iter()
            .map(|f| f.norm)
            .chain(mf.iter().map(|m| m.op.col_norm()))
            .fold(1.0, f64::max);
        let tiny = 1e-11 * scale;
        let sigma00 = sector_zero_state(&pf[0], &mf[0], &spec, tiny)?;
        let displacements = match frame {
            Frame::Bare => None,
            Frame::Polaron => Some(Displacements::new(&spec, &plus, &minus)),
        };
        Ok(Self {
            spec,
            frame,
            displacements,
            kappa,
            plus: pf,
            minus: mf,
            sigma00,
            tiny,
        })
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    fn idx(&self, n: usize, np: usize) -> usize {
        n * self.spec.n_cav + np
    }

    fn shift(&self, n: usize, np: usize, delta: f64) -> C {
        C::new(
            -0.5 * self.kappa * (n + np) as f64,
            -delta * (n as f64 - np as f64),
        )
    }

    fn moved<'a>(&self, block: &'a DMatrix<C>, side: Side, inverse: bool) -> Cow<'a, DMatrix<C>> {
        match &self.displacements {
            Some(d) => Cow::Owned(d.apply(block, &self.spec, side, inverse)),
            None => Cow::Borrowed(block),
        }
    }

    /// Σ of the terms that couple block (n, n') to its neighbours.
    fn coupling(&self, y: &[DMatrix<C>], n: usize, np: usize, eps: f64) -> DMatrix<C> {
        let nc = self.spec.n_cav;
        let mut r = DMatrix::<C>::zeros(self.spec.n_plus.pow(2), self.spec.n_minus.pow(2));
        let mut axpy = |coef: f64, block: &DMatrix<C>| {
            if coef != 0.0 {
                r.zip_apply(block, |a, b| *a += b * coef);
            }
        };
        // In the polaron frame a₂ carries U on the ket side and a₂† carries
        // U† = Uᵀ; on the bra side the roles swap.
        let disp = self.displacements.as_ref();
        if n + 1 < nc && np + 1 < nc {
            // a₂ρa₂† → U·ρ·U†
            let src = &y[self.idx(n + 1, np + 1)];
            let both = match disp {
                Some(d) => d.apply(&d.apply(src, &self.spec, Side::Ket, false), &self.spec, Side::Bra, true),
                None => src.clone(),
            };
            axpy(self.kappa * (((n + 1) * (np + 1)) as f64).sqrt(), &both);
        }
        if eps != 0.0 {
            if n > 0 {
                axpy(eps * (n as f64).sqrt(), &self.moved(&y[self.idx(n - 1, np)], Side::Ket, true));
            }
            if n + 1 < nc {
                axpy(-eps * ((n + 1) as f64).sqrt(), &self.moved(&y[self.idx(n + 1, np)], Side::Ket, false));
            }
            if np + 1 < nc {
                axpy(-eps * ((np + 1) as f64).sqrt(), &self.moved(&y[self.idx(n, np + 1)], Side::Bra, true));
            }
            if np > 0 {
                axpy(eps * (np as f64).sqrt(), &self.moved(&y[self.idx(n, np - 1)], Side::Bra, false));
            }
        }
        r
    }

    /// Factors S₋ + (t_ii + c)·I for every Schur row i of every solved block.
    fn row_solvers(&self, delta: f64) -> Result<Vec<Vec<RowSolver>>> {
        let nc = self.spec.n_cav;
        let mut out = Vec::with_capacity(nc * nc);
        for n in 0..nc {
            for np in 0..nc {
                let k = self.idx(n, np);
                if n > np {
                    out.push(Vec::new());
                    continue;
                }
                let t = &self.plus[k].t;
                let s = self.shift(n, np, delta);
                let mut rows = Vec::with_capacity(t.nrows());
                let mut zero_pivots = 0;
                for i in 0..t.nrows() {
                    let c = t[(i, i)] + s;
                    let m = &self.minus[k];
                    let solver = match &m.bordered {
                        Some(b) if c.norm() <= self.tiny => {
                            zero_pivots += 1;
                            RowSolver::Bordered(b.factor(c)?)
                        }
                        _ => RowSolver::Plain(m.op.factor(c)?),
                    };
                    rows.push(solver);
                }
                if zero_pivots > 1 {
                    return Err(Error::Degenerate(format!(
                        "{zero_pivots} vanishing pivots in sector ({n},{np}) at Δ₂′ = {delta}"
                    )));
                }
                out.push(rows);
            }
        }
        Ok(out)
    }

    /// Solves S₊·Y + Y·S₋ᵀ + c·Y = rhs with S₊ in Schur form: row i of
    /// Z = Q₊ᴴ·Y satisfies (S₋ + (t_ii + c)·I)·z_iᵀ = (Q₊ᴴ·rhs − Σ_{j>i} t_ij z_j)ᵢᵀ.
    fn solve_block(&self, k: usize, rows: &[RowSolver], rhs: &DMatrix<C>) -> DMatrix<C> {
        let fp = &self.plus[k];
        // Rows of Z live in the columns of Zᵀ, so each is contiguous.
        let mut zt = matmul(&fp.qh, rhs).transpose();
        let (d, p) = zt.shape();
        let one = C::new(1.0, 0.0);
        // Back substitution in panels of rows: axpys inside a panel, one gemm
        // to remove a finished panel from every row above it.
        let mut hi = p;
        while hi > 0 {
            let lo = hi.saturating_sub(PANEL);
            for i in (lo..hi).rev() {
                match &rows[i] {
                    RowSolver::Plain(lu) => solve_in_place(lu, zt.column_mut(i).as_mut_slice()),
                    RowSolver::Bordered(lu) => {
                        let mut x: Vec<C> = zt.column(i).iter().copied().collect();
                        x.push(C::new(0.0, 0.0));
                        solve_in_place(lu, &mut x);
                        zt.column_mut(i).copy_from_slice(&x[..d]);
                    }
                }
                for k in lo..i {
                    let (mut row, done) = zt.columns_range_pair_mut(k, i);
                    row.axpy(-fp.t[(k, i)], &done, one);
                }
            }
            if lo > 0 {
                let (mut head, done) = zt.columns_range_pair_mut(0..lo, lo..hi);
                gemm(-one, &done.as_view(), &fp.tt.view((lo, 0), (hi - lo, lo)), one, &mut head);
            }
            hi = lo;
        }
        matmul(&fp.q, &zt.transpose())
    }

    /// Block (n', n) from block (n, n') via ρ = ρ†.
    fn mirror(&self, m: &DMatrix<C>) -> DMatrix<C> {
        let (np, nm) = (self.spec.n_plus, self.spec.n_minus);
        DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
            let (p, pp) = (r % np, r / np);
            let (q, qp) = (c % nm, c / nm);
            m[(pp + np * p, qp + nm * q)].conj()
        })
    }

    /// (⟨a₂†a₂⟩, ⟨a₂†²a₂²⟩) of the current iterate.
    fn moments(&self, y: &[DMatrix<C>]) -> (f64, f64) {
        (0..self.spec.n_cav).fold((0.0, 0.0), |(a, b), n| {
            let p = self.block_trace(&y[self.idx(n, n)]).re;
            (a + n as f64 * p, b + (n * n.saturating_sub(1)) as f64 * p)
        })
    }

    fn block_trace(&self, m: &DMatrix<C>) -> C {
        let (np, nm) = (self.spec.n_plus, self.spec.n_minus);
        let mut acc = C::new(0.0, 0.0);
        for i in 0..np {
            for j in 0..nm {
                acc += m[(i + np * i, j + nm * j)];
            }
        }
        acc
    }

    /// Stationary state at probe detuning Δ₂′ = `delta` and drive ε.
    pub fn solve(&self, delta: f64, eps: f64, opts: &SectorOptions) -> Result<SectorState> {
        let nc = self.spec.n_cav;
        let shape = (self.spec.n_plus.pow(2), self.spec.n_minus.pow(2));
        let solvers = self.row_solvers(delta)?;
        let mut y: Vec<DMatrix<C>> = (0..nc * nc)
            .map(|_| DMatrix::zeros(shape.0, shape.1))
            .collect();
        y[0] = self.sigma00.clone();
        let mut change = f64::INFINITY;
        let mut moments = (0.0, 0.0);
        let mut sweeps = 0;
        while sweeps < opts.max_sweeps {
            sweeps += 1;
            change = 0.0;
            let prev0 = y[0].clone();
            for total in (0..=2 * (nc - 1)).rev() {
                for n in 0..nc {
                    if total < n || total - n >= nc {
                        continue;
                    }
                    let np = total - n;
                    // ρ is Hermitian: sector (n', n) mirrors (n, n').
                    if n > np {
                        continue;
                    }
                    let k = self.idx(n, np);
                    let rhs = -self.coupling(&y, n, np, eps);
                    let block = self.solve_block(k, &solvers[k], &rhs);
                    if n + np > 0 {
                        change = change.max(max_abs(&(&block - &y[k])));
                    }
                    if n != np {
                        y[self.idx(np, n)] = self.mirror(&block);
                    }
                    y[k] = block;
                }
            }
            let tr: C = (0..nc).map(|n| self.block_trace(&y[self.idx(n, n)])).sum();
            y[0] += &self.sigma00 * (C::new(1.0, 0.0) - tr);
            change = change.max(max_abs(&(&y[0] - &prev0)));
            let scale = y.iter().map(max_abs).fold(0.0, f64::max);
            change /= scale;
            let now = self.moments(&y);
            let drift = relative_change(now.0, moments.0).max(relative_change(now.1, moments.1));
            moments = now;
            if change < opts.change_tol && drift < opts.moment_tol {
                break;
            }
        }
        let residual = self.residual(&y, delta, eps);
        if !(residual <= opts.residual_tol) {
            return Err(Error::NonConvergence(format!(
                "sector iteration stalled at Δ₂′ = {delta}: residual {residual:.2e} after {sweeps} sweeps (last change {change:.1e})"
            )));
        }
        Ok(SectorState {
            spec: self.spec,
            frame: self.frame,
            blocks: y,
            sweeps,
            residual,
        })
    }

    /// ‖L(ρ)‖_max over an upper bound of ‖L‖_∞ times ‖ρ‖_max.
    fn residual(&self, y: &[DMatrix<C>], delta: f64, eps: f64) -> f64 {
        let nc = self.spec.n_cav;
        let mut worst: f64 = 0.0;
        let mut norm: f64 = 0.0;
        for n in 0..nc {
            for np in 0..nc {
                let k = self.idx(n, np);
                let s = self.shift(n, np, delta);
                let mut e = matmul(&self.plus[k].op, &y[k]);
                e += self.minus[k].op.apply_rows(&y[k]);
                e += &y[k] * s;
                e += self.coupling(y, n, np, eps);
                worst = worst.max(max_abs(&e));
                let links = self.kappa * (((n + 1) * (np + 1)) as f64).sqrt()
                    + eps
                        * ((n as f64).sqrt()
                            + ((n + 1) as f64).sqrt()
                            + (np as f64).sqrt()
                            + ((np + 1) as f64).sqrt());
                norm = norm.max(self.plus[k].norm + self.minus[k].op.row_norm() + s.norm() + links);
            }
        }
        let scale = y.iter().map(max_abs).fold(0.0, f64::max);
        worst / (norm * scale)
    }
}

fn relative_change(new: f64, old: f64) -> f64 {
    if new == old {
        0.0
    } else {
        (new - old).abs() / new.abs().max(old.abs())
    }
}

/// Unit-trace stationary state of sector (0,0), a product of the two
/// single-mode null vectors.
fn sector_zero_state(plus: &Factor, minus: &MinusSector, spec: &HilbertSpec, tiny: f64) -> Result<DMatrix<C>> {
    let zp: Vec<usize> = (0..plus.t.nrows()).filter(|&i| plus.t[(i, i)].norm() <= tiny).collect();
    if zp.len() != 1 {
        return Err(Error::Degenerate(format!(
            "the B₊ mode has {} stationary states; it must have exactly one",
            zp.len()
        )));
    }
    // Null vector of an upper-triangular T: back substitution above i0.
    let t = &plus.t;
    let i0 = zp[0];
    let mut z = nalgebra::DVector::<C>::zeros(t.nrows());
    z[i0] = C::new(1.0, 0.0);
    for k in (0..i0).rev() {
        let acc: C = (k + 1..=i0).map(|l| t[(k, l)] * z[l]).sum();
        z[k] = -acc / t[(k, k)];
    }
    let y_plus = &plus.q * z;
    // [S₋, w; wᵀ, 0]·[v; λ] = [0; 1] gives S₋v = 0 with tr v = 1.
    let bordered = minus.bordered.as_ref().expect("sector (0,0) is bordered");
    let nm2 = spec.n_minus * spec.n_minus;
    let mut v = vec![C::new(0.0, 0.0); nm2 + 1];
    v[nm2] = C::new(1.0, 0.0);
    solve_in_place(&bordered.factor(C::new(0.0, 0.0))?, &mut v);
    v.pop();
    let y_minus = nalgebra::DVector::from_vec(v);
    let stationary = max_abs(&DMatrix::from_row_slice(1, nm2, minus.op.apply_rows(&DMatrix::from_row_slice(1, nm2, y_minus.as_slice())).as_slice()));
    if !y_minus.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || stationary > 1e-9 * minus.op.row_norm().max(1.0) {
        return Err(Error::Degenerate(
            "the B₋ mode has no unique stationary state".into(),
        ));
    }
    let tr_plus: C = (0..spec.n_plus).map(|i| y_plus[i + spec.n_plus * i]).sum();
    Ok(&y_plus * y_minus.transpose() / tr_plus)
}

/// Block representation of a stationary state.
#[derive(Debug, Clone)]
pub struct SectorState {
    spec: HilbertSpec,
    pub frame: Frame,
    blocks: Vec<DMatrix<C>>,
    pub sweeps: usize,
    pub residual: f64,
}

impl SectorState {
    fn block(&self, n: usize, np: usize) -> &DMatrix<C> {
        &self.blocks[n * self.spec.n_cav + np]
    }

    /// Population of each photon number.
    pub fn photon_distribution(&self) -> Vec<f64> {
        let (np, nm) = (self.spec.n_plus, self.spec.n_minus);
        (0..self.spec.n_cav)
            .map(|n| {
                let b = self.block(n, n);
                let mut acc = 0.0;
                for i in 0..np {
                    for j in 0..nm {
                        acc += b[(i + np * i, j + nm * j)].re;
                    }
                }
                acc
            })
            .collect()
    }

    /// (⟨a₂†a₂⟩, ⟨a₂†a₂†a₂a₂⟩)
    pub fn photon_moments(&self) -> (f64, f64) {
        let p = self.photon_distribution();
        let first = p.iter().enumerate().map(|(n, v)| n as f64 * v).sum();
        let second = p
            .iter()
            .enumerate()
            .map(|(n, v)| (n * n.saturating_sub(1)) as f64 * v)
            .sum();
        (first, second)
    }

    /// The full density matrix, expressed in the solver's frame.
    pub fn to_density(&self) -> Result<DensityMatrix> {
        let s = &self.spec;
        let d = s.dim();
        let mut rho = DMatrix::<C>::zeros(d, d);
        for n in 0..s.n_cav {
            for np in 0..s.n_cav {
                let b = self.block(n, np);
                for (p, pp, m, mp) in quad(s.n_plus, s.n_minus) {
                    rho[(s.index(n, p, m), s.index(np, pp, mp))] =
                        b[(p + s.n_plus * pp, m + s.n_minus * mp)];
                }
            }
        }
        DensityMatrix::from_matrix(rho)
    }
}

fn quad(np: usize, nm: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..np).flat_map(move |p| {
        (0..np).flat_map(move |pp| (0..nm).flat_map(move |m| (0..nm).map(move |mp| (p, pp, m, mp))))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{build_liouvillian, oms_dissipators, steady_state};

    fn basis() -> PolaritonBasis {
        let p = crate::model::SystemParams::default();
        crate::model::derive(&p, crate::model::ThetaBranch::Consistent)
            .unwrap()
            .basis
    }

    #[test]
    fn matches_generic_direct_solver() {
        let b = basis();
        let spec = HilbertSpec::new(3, 4, 4).unwrap();
        let solver = SectorSolver::new(&b, 0.05, spec).unwrap();
        for &delta in &[-0.3, 0.0, 0.25] {
            let eps = 0.0125;
            let st = solver.solve(delta, eps, &SectorOptions::default()).unwrap();
            let h = crate::hilbert::build_h_probe(&b, delta, eps, &spec);
            let l = build_liouvillian(&h, &oms_dissipators(&b, 0.05, &spec)).unwrap();
            let direct = steady_state(&l).unwrap();
            let mine = st.to_density().unwrap();
            let diff = (mine.matrix() - direct.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "Δ={delta}: {diff}");
            assert!(l.residual_ratio(mine.matrix()) < 1e-12);
        }
    }

    #[test]
    fn polaron_frame_matches_direct_solver_in_that_frame() {
        let b = basis();
        let spec = HilbertSpec::new(3, 3, 5).unwrap();
        let solver = SectorSolver::with_frame(&b, 0.05, spec, Frame::Polaron).unwrap();
        for &delta in &[-0.4, 0.1] {
            let eps = 0.0125;
            let st = solver.solve(delta, eps, &SectorOptions::default()).unwrap();
            let h = crate::hilbert::build_h_polaron(&b, delta, eps, &spec);
            let l = build_liouvillian(&h, &crate::lindblad::polaron_dissipators(&b, 0.05, &spec)).unwrap();
            let direct = steady_state(&l).unwrap();
            let mine = st.to_density().unwrap();
            let diff = (mine.matrix() - direct.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "Δ={delta}: {diff}");
        }
    }

    #[test]
    fn frames_agree_once_converged() {
        // The bare basis needs many more B₋ levels for the same accuracy.
        let b = basis();
        let bare = SectorSolver::new(&b, 0.05, HilbertSpec::new(3, 5, 20).unwrap()).unwrap();
        let pol = SectorSolver::with_frame(&b, 0.05, HilbertSpec::new(3, 5, 14).unwrap(), Frame::Polaron).unwrap();
        for &delta in &[-0.5, -0.1, 0.3] {
            let x = bare.solve(delta, 0.0025, &SectorOptions::default()).unwrap().photon_moments();
            let y = pol.solve(delta, 0.0025, &SectorOptions::default()).unwrap().photon_moments();
            assert!(((x.0 - y.0) / x.0).abs() < 1e-6, "{x:?} {y:?}");
            assert!(((x.1 - y.1) / x.1).abs() < 5e-3, "{x:?} {y:?}");
        }
    }

    #[test]
    fn vacuum_sector_is_thermal_product() {
        let b = basis();
        let spec = HilbertSpec::new(2, 5, 6).unwrap();
        let solver = SectorSolver::new(&b, 0.05, spec).unwrap();
        let st = solver.solve(0.0, 0.0, &SectorOptions::default()).unwrap();
        let rho = st.to_density().unwrap();
        let thermal = |nbar: f64, levels: usize| -> Vec<f64> {
            let q = nbar / (nbar + 1.0);
            let z: f64 = (0..levels).map(|m| q.powi(m as i32)).sum();
            (0..levels).map(|m| q.powi(m as i32) / z).collect()
        };
        let tp = thermal(b.n_plus, 5);
        let tm = thermal(b.n_minus, 6);
        for p in 0..5 {
            for m in 0..6 {
                let v = rho.matrix()[(spec.index(0, p, m), spec.index(0, p, m))];
                assert!((v.re - tp[p] * tm[m]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn undamped_mode_is_degenerate() {
        let plus = ModeChannel {
            omega: 1.6,
            g: 0.1,
            rate_down: 0.0,
            rate_up: 0.0,
        };
        let minus = ModeChannel {
            omega: 0.5,
            g: -0.3,
            rate_down: 0.02,
            rate_up: 0.0,
        };
        let spec = HilbertSpec::new(3, 3, 3).unwrap();
        assert!(matches!(
            SectorSolver::from_channels(plus, minus, 0.05, spec, Frame::Bare),
            Err(Error::Degenerate(_))
        ));
    }
}
