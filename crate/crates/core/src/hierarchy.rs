//! Generator kernels and the fixed-step RK4 stepper shared by the
//! unconditional, counting-resolved and conditional hierarchies.
//!
//! A hierarchy level `(m,n;p,q)` with every index in `{0,1}` is stored at
//! position `8m + 4n + 2p + q`.

use crate::hilbert::{mode_lowering, CMatrix, Mode, ModeDims, C64, I, ONE, ZERO};
use crate::semiclassical::PulseShape;
use crate::sparse::SparseOp;

pub(crate) const LEVELS: usize = 16;

const UP: [usize; 2] = [8, 2];
const DOWN: [usize; 2] = [4, 1];

pub(crate) fn idx(m: usize, n: usize, p: usize, q: usize) -> usize {
    8 * m + 4 * n + 2 * p + q
}

pub(crate) fn unpack(i: usize) -> (usize, usize, usize, usize) {
    ((i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1)
}

/// Position of `(n,m;q,p)`, the level whose adjoint equals level `i`.
pub(crate) fn adjoint_partner(i: usize) -> usize {
    let (m, n, p, q) = unpack(i);
    idx(n, m, q, p)
}

/// Levels `i` with `i <= adjoint_partner(i)`; the rest follow by adjoint.
pub(crate) const PRIMARY: [usize; 10] = [0, 1, 3, 4, 5, 6, 7, 12, 13, 15];

/// Overwrites every non-primary level with the adjoint of its partner.
pub(crate) fn mirror(ops: &mut [CMatrix]) {
    for &i in &PRIMARY {
        let j = adjoint_partner(i);
        if j != i {
            let (lo, hi) = ops.split_at_mut(j);
            lo[i].adjoint_to(&mut hi[0]);
        }
    }
}

/// True for the levels `(m,m;p,p)`, whose traces are one rather than zero.
pub(crate) fn is_diagonal(i: usize) -> bool {
    let (m, n, p, q) = unpack(i);
    m == n && p == q
}

/// Which parts of the generator to apply.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel {
    pub no_jump: bool,
    pub jump: [bool; 2],
}

impl Kernel {
    pub const UNCONDITIONAL: Kernel = Kernel {
        no_jump: true,
        jump: [true, true],
    };
    pub const NO_JUMP: Kernel = Kernel {
        no_jump: true,
        jump: [false, false],
    };

    pub fn jump(d: usize) -> Kernel {
        let mut jump = [false, false];
        jump[d] = true;
        Kernel { no_jump: false, jump }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Generator {
    heff: SparseOp,
    heff_dag: SparseOp,
    l: [SparseOp; 2],
    ldag: [SparseOp; 2],
    ldagl: [SparseOp; 2],
}

impl Generator {
    /// `H_eff = H - (i/2) Σ L†L` with `L_d = √κ_d a_d`.
    pub fn new(h: &CMatrix, dims: ModeDims, kappa: [f64; 2]) -> Self {
        let l: Vec<CMatrix> = [Mode::Cavity1, Mode::Cavity2]
            .iter()
            .zip(kappa)
            .map(|(&mode, k)| mode_lowering(mode, dims) * C64::from(k.sqrt()))
            .collect();
        let ldagl: Vec<CMatrix> = l.iter().map(|l| l.adjoint() * l).collect();
        let heff = h - (&ldagl[0] + &ldagl[1]) * C64::new(0.0, 0.5);
        let sl = [SparseOp::from_dense(&l[0]), SparseOp::from_dense(&l[1])];
        Self {
            heff_dag: SparseOp::from_dense(&heff.adjoint()),
            heff: SparseOp::from_dense(&heff),
            ldag: [sl[0].adjoint(), sl[1].adjoint()],
            l: sl,
            ldagl: [SparseOp::from_dense(&ldagl[0]), SparseOp::from_dense(&ldagl[1])],
        }
    }

    /// Adds the selected generator terms for level `i`, reading the levels of `src`.
    pub fn apply(
        &self,
        src: &[CMatrix],
        i: usize,
        amps: [f64; 2],
        kernel: Kernel,
        out: &mut CMatrix,
        tmp: &mut CMatrix,
    ) {
        if kernel.no_jump {
            self.heff.left_acc(-I, &src[i], out);
            self.heff_dag.right_acc(I, &src[i], out);
        }
        for d in 0..2 {
            let (nj, j) = (kernel.no_jump, kernel.jump[d]);
            if !nj && !j {
                continue;
            }
            let a = C64::from(amps[d]);
            let up = i & UP[d] != 0;
            let down = i & DOWN[d] != 0;
            if a.re != 0.0 {
                if up {
                    let s = &src[i - UP[d]];
                    if nj {
                        self.ldag[d].left_acc(-a, s, out);
                    }
                    if j {
                        self.ldag[d].right_acc(a, s, out);
                    }
                }
                if down {
                    let s = &src[i - DOWN[d]];
                    if nj {
                        self.l[d].right_acc(-a, s, out);
                    }
                    if j {
                        self.l[d].left_acc(a, s, out);
                    }
                }
                // the |ξ|² terms of the no-jump and jump parts cancel
                if up && down && nj != j {
                    let w = if nj { -a * a } else { a * a };
                    axpy(out, w, &src[i - UP[d] - DOWN[d]]);
                }
            }
            if j {
                tmp.fill(C64::from(0.0));
                self.l[d].left_acc(ONE, &src[i], tmp);
                self.ldag[d].right_acc(ONE, tmp, out);
            }
        }
    }

    /// `Tr[J_d(ρ)_i]`, the photon flux at output `d` carried by level `i`.
    pub fn jump_trace(&self, src: &[CMatrix], i: usize, amps: [f64; 2], d: usize) -> C64 {
        let mut s = self.ldagl[d].trace_with(&src[i]);
        let a = amps[d];
        if a != 0.0 {
            let up = i & UP[d] != 0;
            let down = i & DOWN[d] != 0;
            if up {
                s += self.ldag[d].trace_with(&src[i - UP[d]]) * a;
            }
            if down {
                s += self.l[d].trace_with(&src[i - DOWN[d]]) * a;
            }
            if up && down {
                s += src[i - UP[d] - DOWN[d]].trace() * (a * a);
            }
        }
        s
    }
}

/// `y += a x`.
pub(crate) fn axpy(y: &mut CMatrix, a: C64, x: &CMatrix) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += a * xi;
    }
}

/// Pulse amplitudes inside a step that starts at `seg_start`. A pulse whose
/// onset lies at or before the step start uses its smooth exponential branch,
/// so every RK4 stage sees a smooth input.
pub(crate) fn step_amplitudes(pulses: &[PulseShape; 2], seg_start: f64, t: f64) -> [f64; 2] {
    let on = |p: &PulseShape| {
        if seg_start >= p.offset - 1e-12 * (1.0 + p.offset.abs()) {
            p.tail(t)
        } else {
            0.0
        }
    };
    [on(&pulses[0]), on(&pulses[1])]
}

/// Right-continuous amplitudes at an instant.
pub(crate) fn instant_amplitudes(pulses: &[PulseShape; 2], t: f64) -> [f64; 2] {
    step_amplitudes(pulses, t, t)
}

/// Scratch buffers for [`rk4_step`].
#[derive(Debug, Clone)]
pub(crate) struct Rk4Work {
    k: Vec<CMatrix>,
    sum: Vec<CMatrix>,
    stage: Vec<CMatrix>,
    kacc: Vec<C64>,
    sacc: Vec<C64>,
    pub tmp: CMatrix,
}

impl Rk4Work {
    pub fn new(len: usize, dim: usize, nacc: usize) -> Self {
        let z = CMatrix::zeros(dim, dim);
        Self {
            k: vec![z.clone(); len],
            sum: vec![z.clone(); len],
            stage: vec![z.clone(); len],
            kacc: vec![C64::from(0.0); nacc],
            sacc: vec![C64::from(0.0); nacc],
            tmp: z,
        }
    }
}

/// Derivative callback: `(t, state, d_state, d_accumulators, scratch)`.
/// `d_state` and `d_accumulators` arrive zeroed.
pub(crate) trait Derivative {
    fn eval(&mut self, t: f64, y: &[CMatrix], dy: &mut [CMatrix], dacc: &mut [C64], tmp: &mut CMatrix);
}

impl<F> Derivative for F
where
    F: FnMut(f64, &[CMatrix], &mut [CMatrix], &mut [C64], &mut CMatrix),
{
    fn eval(&mut self, t: f64, y: &[CMatrix], dy: &mut [CMatrix], dacc: &mut [C64], tmp: &mut CMatrix) {
        self(t, y, dy, dacc, tmp)
    }
}

/// One classical RK4 step of size `h` from `t` for the operators `y` and
/// the scalar accumulators `acc` (which do not feed back into `y`).
pub(crate) fn rk4_step<D: Derivative>(y: &mut [CMatrix], acc: &mut [C64], t: f64, h: f64, w: &mut Rk4Work, f: &mut D) {
    let zero = ZERO;
    let stages = [(0.0, 0.5, 1.0), (0.5, 0.5, 2.0), (0.5, 1.0, 2.0), (1.0, 0.0, 1.0)];
    for x in w.sum.iter_mut() {
        x.as_mut_slice().fill(zero);
    }
    w.sacc.fill(zero);
    for (s, &(at, next, weight)) in stages.iter().enumerate() {
        for x in w.k.iter_mut() {
            x.as_mut_slice().fill(zero);
        }
        w.kacc.fill(zero);
        let src: &[CMatrix] = if s == 0 { y } else { &w.stage };
        f.eval(t + at * h, src, &mut w.k, &mut w.kacc, &mut w.tmp);
        for i in 0..y.len() {
            axpy(&mut w.sum[i], C64::from(weight), &w.k[i]);
        }
        for (sa, ka) in w.sacc.iter_mut().zip(&w.kacc) {
            *sa += ka * weight;
        }
        if s < 3 {
            for i in 0..y.len() {
                w.stage[i].as_mut_slice().copy_from_slice(y[i].as_slice());
                axpy(&mut w.stage[i], C64::from(next * h), &w.k[i]);
            }
        }
    }
    for i in 0..y.len() {
        axpy(&mut y[i], C64::from(h / 6.0), &w.sum[i]);
    }
    for (a, sa) in acc.iter_mut().zip(&w.sacc) {
        *a += sa * (h / 6.0);
    }
}

/// Splits `[t0, t1]` at the breakpoints into steps no longer than `dt`.
pub(crate) fn step_grid(t0: f64, t1: f64, dt: f64, breakpoints: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > t0 && b < t1).collect();
    cuts.push(t1);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut steps = Vec::new();
    let mut a = t0;
    for &b in &cuts {
        let len = b - a;
        if len <= 1e-13 * (1.0 + b.abs()) {
            continue;
        }
        let n = ((len / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = len / n as f64;
        for k in 0..n {
            let s = a + k as f64 * h;
            let e = if k + 1 == n { b } else { a + (k + 1) as f64 * h };
            steps.push((s, e));
        }
        a = b;
    }
    steps
}
