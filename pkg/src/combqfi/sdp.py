"""Self-contained interior-point solver for semidefinite programs.

One primal-dual Mehrotra predictor-corrector method with Nesterov-Todd
scaling handles everything in the package.  The internal standard form is

    min  sum_j <C_j, X_j> + f'w
    s.t. sum_j <A_ij, X_j> + (F w)_i = b_i,    X_j >= 0 (complex hermitian),

with w free.  Constraint matrices are stored per block as A_ij = B_ij (x) 1_s
with a common trailing identity dimension s (s = 1 is the generic case); the
Schur-complement kernel for such blocks reduces to a single
(k^2 x s^2) @ (s^2 x k^2) matmul per block per iteration, which is what keeps
the see-saw subproblems cheap.

The public :class:`SdpProblem` is the linear-matrix-inequality form

    min c'x   s.t.  M0 + sum_i x_i M_i >= 0,   a_eq x = b_eq,

solved through its standard-form dual so that x is recovered as the vector of
equality multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve, qr, solve_triangular

from .tensors import as_complex, dagger, kron

__all__ = [
    "ConeBlock",
    "ConicSolution",
    "SdpProblem",
    "SdpSolution",
    "dump_problem",
    "herm_basis",
    "load_problem",
    "solve_conic",
    "solve_sdp",
]

FEAS_TOL = 1e-8
GAP_TOL = 1e-8
MAX_ITERS = 200
STEP_DAMP = 0.99
RANK_TOL = 1e-10
BIG_ITERATE = 1e5
CERT_TOL = 1e-7


def herm_basis(n):
    """Orthonormal hermitian basis: identity/sqrt(n), traceless diagonals,
    then real and imaginary off-diagonal pairs."""
    basis = [np.eye(n, dtype=complex) / np.sqrt(n)]
    for a in range(1, n):
        d = np.zeros(n)
        d[:a] = 1.0
        d[a] = -a
        m = np.diag(d).astype(complex)
        basis.append(m / np.linalg.norm(d))
    for a in range(n):
        for b in range(a + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[a, b] = m[b, a] = 1 / np.sqrt(2)
            basis.append(m.copy())
            m[a, b] = -1j / np.sqrt(2)
            m[b, a] = 1j / np.sqrt(2)
            basis.append(m)
    return basis


@dataclass
class ConeBlock:
    """One PSD block: objective C (n x n) and constraint stack B (m x k x k)
    entering as B_i (x) 1_s, with n = k * s."""

    c: np.ndarray
    b_ops: np.ndarray
    s: int = 1

    def __post_init__(self):
        self.c = as_complex(self.c)
        self.b_ops = as_complex(self.b_ops)
        if self.b_ops.ndim != 3:
            raise ValueError("b_ops must be a stack of matrices")
        k = self.b_ops.shape[1]
        if self.b_ops.shape[2] != k:
            raise ValueError("constraint matrices must be square")
        if self.c.shape != (k * self.s, k * self.s):
            raise ValueError("objective shape %r does not match k*s = %d"
                             % (self.c.shape, k * self.s))

    @property
    def k(self):
        return self.b_ops.shape[1]

    @property
    def n(self):
        return self.k * self.s


@dataclass
class ConicSolution:
    status: str
    x_blocks: list
    y: np.ndarray
    w: np.ndarray
    s_blocks: list
    obj_primal: float
    obj_dual: float
    iterations: int
    primal_res: float
    dual_res: float
    rel_gap: float
    message: str = ""


def _suffix_trace(x, k, s):
    if s == 1:
        return x
    return np.trace(x.reshape(k, s, k, s), axis1=1, axis2=3)


def _expand(m, s):
    if s == 1:
        return m
    return np.kron(m, np.eye(s))


def _hermitize(m):
    return (m + dagger(m)) / 2


def _psd_chol(x):
    """Cholesky with escalating jitter; returns lower factor or None."""
    n = x.shape[0]
    scale = max(1.0, float(np.trace(x).real) / n)
    jitter = 0.0
    for _ in range(6):
        try:
            return np.linalg.cholesky(x + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100, 1e-14 * scale)
    return None


class _BlockState:
    """Per-block NT scaling state for one iteration."""

    def __init__(self, r, rinv, lam):
        self.r = r
        self.rinv = rinv
        self.lam = lam
        self.w = r @ dagger(r)


def _nt_scale(x, s):
    lx = _psd_chol(x)
    ls = _psd_chol(s)
    if lx is None or ls is None:
        return None
    u, sv, vh = np.linalg.svd(dagger(ls) @ lx)
    sv = np.maximum(sv, 1e-100)
    r = lx @ dagger(vh) / np.sqrt(sv)
    rinv = (vh * np.sqrt(sv)[:, None]) @ solve_triangular(
        lx, np.eye(lx.shape[0]), lower=True)
    return _BlockState(r, rinv, sv)


def _schur_block(block, w):
    """H_ii' = <B_i (x) 1_s, W (B_i' (x) 1_s) W> via the kernel matmul."""
    k, s = block.k, block.s
    m = block.b_ops.shape[0]
    if s == 1:
        # full-size rows: batch W B_i W directly, avoiding the k^2 x k^2
        # kernel whose memory grows as k^4
        wbw = np.matmul(np.matmul(w[None], block.b_ops), w[None])
        vb = block.b_ops.reshape(m, k * k)
        return (vb.conj() @ wbw.reshape(m, k * k).T).real
    wr = w.reshape(k, s, k, s)
    x2 = wr.transpose(0, 2, 1, 3).reshape(k * k, s * s)
    y2 = wr.transpose(3, 1, 0, 2).reshape(s * s, k * k)
    t = (x2 @ y2).reshape(k, k, k, k)           # axes (a, c, d, b)
    t2 = t.transpose(0, 3, 1, 2).reshape(k * k, k * k)
    vb = block.b_ops.reshape(m, k * k)
    g = vb @ t2.T
    return (vb.conj() @ g.T).real


def _gamma(m, lam):
    return 2.0 * m / (lam[:, None] + lam[None, :])


def _max_step(lam, dhat):
    """Largest alpha with diag(lam) + alpha*dhat >= 0."""
    scaled = dhat / np.sqrt(lam)[:, None] / np.sqrt(lam)[None, :]
    wmin = float(np.linalg.eigvalsh(_hermitize(scaled)).min())
    if wmin >= -1e-14:
        return 1.0
    return min(1.0, -1.0 / wmin)


def _presolve(blocks, b, f_mat):
    """Drop dependent equality rows (pivoted QR), check consistency,
    equilibrate the kept rows.  Returns (kept, scales) or an infeasibility
    marker (None, None)."""
    m = len(b)
    reps = []
    for blk in blocks:
        flat = blk.b_ops.reshape(m, -1)
        reps.append(np.hstack([flat.real, flat.imag]))
    if f_mat is not None:
        reps.append(f_mat)
    rep = np.hstack(reps)
    _, rmat, piv = qr(rep.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(rmat))
    rank = int(np.sum(diag > RANK_TOL * max(diag[0], 1e-300))) if diag.size else 0
    kept = np.sort(piv[:rank])
    dropped = np.setdiff1d(np.arange(m), kept)
    if dropped.size:
        coef, *_ = np.linalg.lstsq(rep[kept].T, rep[dropped].T, rcond=None)
        pred = coef.T @ b[kept]
        if np.max(np.abs(b[dropped] - pred)) > 1e-8 * (1 + np.max(np.abs(b))):
            return None, None
    norms = np.linalg.norm(rep[kept], axis=1)
    scales = 1.0 / np.maximum(norms, 1e-300)
    return kept, scales


def _initial_trace_scale(blocks, b):
    """Scan rows for one proportional to a block identity to size X0."""
    taus = [1.0] * len(blocks)
    m = len(b)
    for i in range(m):
        touched = []
        beta = 0.0
        for j, blk in enumerate(blocks):
            bi = blk.b_ops[i]
            if np.linalg.norm(bi) < 1e-14:
                continue
            coef = np.trace(bi).real / blk.k
            if np.linalg.norm(bi - coef * np.eye(blk.k)) > 1e-12 * np.linalg.norm(bi):
                touched = None
                break
            touched.append(j)
            beta = coef
        if touched is not None and len(touched) == 1 and abs(beta) > 1e-14:
            j = touched[0]
            tau = b[i] / (beta * blocks[j].n)
            if tau > 1e-12:
                taus[j] = tau
    return taus


def solve_conic(blocks, b, f_mat=None, f_obj=None, feas_tol=FEAS_TOL,
                gap_tol=GAP_TOL, max_iters=MAX_ITERS, verbose=False):
    """Solve the internal standard-form cone program.

    ``blocks`` is a list of :class:`ConeBlock`; ``b`` the equality right-hand
    side; ``f_mat`` (m x p) and ``f_obj`` (p) describe optional free
    variables.  Returns a :class:`ConicSolution` with statuses ``optimal``,
    ``infeasible``, ``unbounded``, ``max_iters`` or ``numerical_failure``.
    """
    b = np.asarray(b, dtype=float)
    m_orig = len(b)
    p = 0 if f_obj is None else len(f_obj)
    f_mat_orig = None if f_mat is None else np.asarray(f_mat, dtype=float)
    f_obj = np.zeros(0) if f_obj is None else np.asarray(f_obj, dtype=float)

    kept, scales = _presolve(blocks, b, f_mat_orig)
    if kept is None:
        return ConicSolution("infeasible", [np.zeros_like(bl.c) for bl in blocks],
                             np.zeros(m_orig), np.zeros(p), [], 0.0, 0.0, 0,
                             np.inf, np.inf, np.inf,
                             "inconsistent equality rows")
    work = [ConeBlock(bl.c, bl.b_ops[kept] * scales[:, None, None], bl.s)
            for bl in blocks]
    bw = b[kept] * scales
    fw = None if f_mat_orig is None else f_mat_orig[kept] * scales[:, None]
    m = len(bw)
    vbcs = [blk.b_ops.conj().reshape(m, blk.k * blk.k) for blk in work]
    vbs = [blk.b_ops.reshape(m, blk.k * blk.k) for blk in work]

    def aop(xs, w):
        out = np.zeros(m)
        for blk, vbc, x in zip(work, vbcs, xs):
            xk = _suffix_trace(x, blk.k, blk.s)
            out += (vbc @ xk.reshape(-1)).real
        if fw is not None:
            out += fw @ w
        return out

    def astar(y, blk, vb):
        return _expand((y @ vb).reshape(blk.k, blk.k), blk.s)

    ntot = sum(blk.n for blk in work)
    taus = _initial_trace_scale(work, bw)
    xs = [tau * np.eye(blk.n, dtype=complex) for tau, blk in zip(taus, work)]
    ss = [max(1.0, np.linalg.norm(blk.c) / np.sqrt(blk.n))
          * np.eye(blk.n, dtype=complex) for blk in work]
    y = np.zeros(m)
    w = np.zeros(p)

    bnorm = 1 + np.linalg.norm(bw)
    cnorm = 1 + np.sqrt(sum(np.linalg.norm(blk.c) ** 2 for blk in work)
                        + np.linalg.norm(f_obj) ** 2)

    status, msg = "max_iters", ""
    pres = dres = relgap = np.inf
    it = 0
    small_steps = 0

    for it in range(1, max_iters + 1):
        rp = bw - aop(xs, w)
        rds = [blk.c - astar(y, blk, vb) - s
               for blk, vb, s in zip(work, vbs, ss)]
        rf = f_obj - (fw.T @ y if fw is not None else np.zeros(0))
        gap = sum(np.trace(x @ s).real for x, s in zip(xs, ss))
        pobj = sum(np.trace(blk.c.conj().T @ x).real
                   for blk, x in zip(work, xs)) + f_obj @ w
        dobj = bw @ y
        pres = np.linalg.norm(rp) / bnorm
        dres = np.sqrt(sum(np.linalg.norm(r) ** 2 for r in rds)
                       + np.linalg.norm(rf) ** 2) / cnorm
        relgap = gap / (1 + abs(pobj) + abs(dobj))
        if verbose:
            print("iter %3d  pres %.2e  dres %.2e  gap %.2e" %
                  (it, pres, dres, relgap))
        if pres <= feas_tol and dres <= feas_tol and relgap <= gap_tol:
            status = "optimal"
            break

        # heuristic infeasibility certificates on diverging iterates
        ynorm = np.linalg.norm(y)
        if ynorm > 10:
            yn = y / ynorm
            ray = all(np.linalg.eigvalsh(astar(yn, blk, vb)).max() < CERT_TOL
                      for blk, vb in zip(work, vbs))
            if ray and bw @ yn > CERT_TOL and \
                    (fw is None or np.linalg.norm(fw.T @ yn) < CERT_TOL):
                status, msg = "infeasible", "dual improving ray found"
                break
        xnorm = np.sqrt(sum(np.linalg.norm(x) ** 2 for x in xs)
                        + np.linalg.norm(w) ** 2)
        if xnorm > BIG_ITERATE:
            xn = [x / xnorm for x in xs]
            wn = w / xnorm
            drift = np.linalg.norm(aop(xn, wn))
            val = sum(np.trace(blk.c.conj().T @ x).real
                      for blk, x in zip(work, xn)) + f_obj @ wn
            if drift < CERT_TOL and val < -CERT_TOL:
                status, msg = "unbounded", "primal improving ray found"
                break

        states = []
        for x, s in zip(xs, ss):
            st = _nt_scale(x, s)
            if st is None:
                status, msg = "numerical_failure", "scaling factorization failed"
                break
            states.append(st)
        if len(states) < len(work):
            break
        mu = sum(float(np.sum(st.lam ** 2)) for st in states) / ntot

        h = np.zeros((m, m))
        for blk, st in zip(work, states):
            h += _schur_block(blk, st.w)
        h = (h + h.T) / 2
        if p:
            kkt = np.block([[h, fw], [fw.T, np.zeros((p, p))]])
        else:
            kkt = h
        try:
            fac = lu_factor(kkt + 1e-13 * np.eye(m + p) * max(1.0, np.trace(h) / max(m, 1)))
        except Exception:
            status, msg = "numerical_failure", "KKT factorization failed"
            break

        def newton(rcs):
            us = [st.r @ _gamma(rc, st.lam) @ dagger(st.r)
                  for st, rc in zip(states, rcs)]
            vs = [st.w @ rd @ st.w for st, rd in zip(states, rds)]
            rhs1 = rp - aop([u - v for u, v in zip(us, vs)], np.zeros(p))
            rhs = np.concatenate([rhs1, rf]) if p else rhs1
            sol = lu_solve(fac, rhs)
            dy, dw = sol[:m], sol[m:]
            dss, dxs, dxh, dsh = [], [], [], []
            for blk, vb, st, rd, u, v in zip(work, vbs, states, rds, us, vs):
                ady = astar(dy, blk, vb)
                ds = _hermitize(rd - ady)
                dx = _hermitize(u - v + st.w @ ady @ st.w)
                dss.append(ds)
                dxs.append(dx)
                dxh.append(_hermitize(st.rinv @ dx @ dagger(st.rinv)))
                dsh.append(_hermitize(dagger(st.r) @ ds @ st.r))
            return dy, dw, dxs, dss, dxh, dsh

        # predictor
        rcs_aff = [-np.diag(st.lam ** 2).astype(complex) for st in states]
        try:
            dy_a, dw_a, dx_a, ds_a, dxh_a, dsh_a = newton(rcs_aff)
        except Exception:
            status, msg = "numerical_failure", "Newton solve failed"
            break
        ap = min(_max_step(st.lam, dh) for st, dh in zip(states, dxh_a))
        ad = min(_max_step(st.lam, dh) for st, dh in zip(states, dsh_a))
        gap_aff = sum(
            np.trace((np.diag(st.lam) + ap * xh)
                     @ (np.diag(st.lam) + ad * sh)).real
            for st, xh, sh in zip(states, dxh_a, dsh_a))
        sigma = min(1.0, max(0.0, gap_aff / max(gap, 1e-300))) ** 3

        # corrector
        rcs = [sigma * mu * np.eye(len(st.lam)) - np.diag(st.lam ** 2)
               - (xh @ sh + sh @ xh) / 2
               for st, xh, sh in zip(states, dxh_a, dsh_a)]
        try:
            dy, dw, dxs, dss, dxh, dsh = newton(rcs)
        except Exception:
            status, msg = "numerical_failure", "Newton solve failed"
            break
        ap = STEP_DAMP * min(_max_step(st.lam, dh) for st, dh in zip(states, dxh))
        ad = STEP_DAMP * min(_max_step(st.lam, dh) for st, dh in zip(states, dsh))
        xs = [_hermitize(x + ap * dx) for x, dx in zip(xs, dxs)]
        ss = [_hermitize(s + ad * ds) for s, ds in zip(ss, dss)]
        y = y + ad * dy
        w = w + ad * dw
        small_steps = small_steps + 1 if max(ap, ad) < 1e-4 else 0
        if small_steps >= 4:
            status, msg = "numerical_failure", "step sizes collapsed"
            break

    y_full = np.zeros(m_orig)
    y_full[kept] = y * scales
    pobj = sum(np.trace(blk.c.conj().T @ x).real
               for blk, x in zip(work, xs)) + f_obj @ w
    dobj = bw @ y
    return ConicSolution(status, xs, y_full, w, ss, float(pobj), float(dobj),
                         it, float(pres), float(dres), float(relgap), msg)


# ---------------------------------------------------------------------------
# public LMI-form interface


@dataclass
class SdpProblem:
    """min c'x  s.t.  M0 + sum_i x_i M_i >= 0 (blockwise),  a_eq x = b_eq.

    ``m0`` is a list of hermitian blocks; ``mats[i]`` lists the blocks of
    M_i aligned with ``m0`` (entries may be None for zero).
    """

    c: np.ndarray
    m0: list
    mats: list
    a_eq: np.ndarray = None
    b_eq: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.m0 = [as_complex(m) for m in self.m0]
        if len(self.mats) != len(self.c):
            raise ValueError("need one matrix list per variable")
        fixed = []
        for row in self.mats:
            if len(row) != len(self.m0):
                raise ValueError("matrix list does not match block structure")
            fixed.append([None if m is None else as_complex(m) for m in row])
        self.mats = fixed
        for m in self.m0:
            if np.linalg.norm(m - dagger(m)) > 1e-10 * max(1, np.linalg.norm(m)):
                raise ValueError("M0 block is not hermitian")
        if (self.a_eq is None) != (self.b_eq is None):
            raise ValueError("a_eq and b_eq must be given together")
        if self.a_eq is not None:
            self.a_eq = np.asarray(self.a_eq, dtype=float)
            self.b_eq = np.asarray(self.b_eq, dtype=float)

    @property
    def n_vars(self):
        return len(self.c)


@dataclass
class SdpSolution:
    status: str
    x: np.ndarray
    value: float
    slack_blocks: list = None
    dual_blocks: list = None
    eq_multipliers: np.ndarray = None
    iterations: int = 0
    primal_res: float = np.nan
    dual_res: float = np.nan
    rel_gap: float = np.nan
    message: str = ""


def solve_sdp(problem, feas_tol=FEAS_TOL, gap_tol=GAP_TOL, max_iters=MAX_ITERS,
              verbose=False):
    """Solve an LMI-form problem through its standard-form dual.

    The LMI variables come back as the equality multipliers of the internal
    problem; slack blocks M0 + sum x_i M_i and the dual PSD certificate are
    returned alongside.
    """
    nx = problem.n_vars
    blocks = []
    for j, m0j in enumerate(problem.m0):
        nj = m0j.shape[0]
        stack = np.zeros((nx, nj, nj), dtype=complex)
        for i in range(nx):
            mij = problem.mats[i][j]
            if mij is not None:
                stack[i] = -mij
        blocks.append(ConeBlock(c=m0j, b_ops=stack, s=1))
    if problem.a_eq is not None and problem.a_eq.size:
        f_mat = problem.a_eq.T.copy()
        f_obj = problem.b_eq.copy()
    else:
        f_mat, f_obj = None, None
    sol = solve_conic(blocks, b=-problem.c, f_mat=f_mat, f_obj=f_obj,
                      feas_tol=feas_tol, gap_tol=gap_tol, max_iters=max_iters,
                      verbose=verbose)
    status = {"infeasible": "unbounded", "unbounded": "infeasible"}.get(
        sol.status, sol.status)
    x = sol.y
    value = np.nan
    slack = None
    if status == "optimal":
        value = -(sol.obj_primal + sol.obj_dual) / 2
        slack = [m0j + sum(x[i] * problem.mats[i][j]
                           for i in range(nx) if problem.mats[i][j] is not None)
                 for j, m0j in enumerate(problem.m0)]
    return SdpSolution(status, x, float(value), slack, sol.x_blocks, sol.w,
                       sol.iterations, sol.primal_res, sol.dual_res,
                       sol.rel_gap, sol.message)


# ---------------------------------------------------------------------------
# problem dump format
#
# Line-oriented text, complex entries as "re,im" pairs, row-major:
#   sdpdump 1
#   nvars <nx>   nblocks <nb>   neq <me>
#   c <nx floats>
#   block <j> <n>
#   m0 <j>            followed by n lines of n "re,im" entries
#   mat <i> <j>       same layout (absent matrices are omitted)
#   eq <row of nx floats> = <float>


def _write_matrix(fh, m):
    for row in m:
        fh.write(" ".join("%s,%s" % (repr(float(z.real)), repr(float(z.imag)))
                          for z in row) + "\n")


def _read_matrix(lines, idx, n):
    m = np.zeros((n, n), dtype=complex)
    for r in range(n):
        parts = lines[idx + r].split()
        for ccol, tok in enumerate(parts):
            re_s, im_s = tok.split(",")
            m[r, ccol] = float(re_s) + 1j * float(im_s)
    return m, idx + n


def dump_problem(problem, path):
    """Write an :class:`SdpProblem` to the documented text format."""
    me = 0 if problem.a_eq is None else len(problem.b_eq)
    with open(path, "w") as fh:
        fh.write("sdpdump 1\n")
        fh.write("nvars %d nblocks %d neq %d\n"
                 % (problem.n_vars, len(problem.m0), me))
        fh.write("c " + " ".join(repr(float(v)) for v in problem.c) + "\n")
        for j, m in enumerate(problem.m0):
            fh.write("block %d %d\n" % (j, m.shape[0]))
        for j, m in enumerate(problem.m0):
            fh.write("m0 %d\n" % j)
            _write_matrix(fh, m)
        for i, row in enumerate(problem.mats):
            for j, m in enumerate(row):
                if m is not None:
                    fh.write("mat %d %d\n" % (i, j))
                    _write_matrix(fh, m)
        for r in range(me):
            fh.write("eq " + " ".join(repr(float(v)) for v in problem.a_eq[r])
                     + " = %s\n" % repr(float(problem.b_eq[r])))


def load_problem(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].split() != ["sdpdump", "1"]:
        raise ValueError("not an sdpdump file")
    head = lines[1].split()
    nx, nb, me = int(head[1]), int(head[3]), int(head[5])
    c = np.array([float(v) for v in lines[2].split()[1:]])
    sizes = {}
    idx = 3
    for _ in range(nb):
        parts = lines[idx].split()
        sizes[int(parts[1])] = int(parts[2])
        idx += 1
    m0 = [None] * nb
    mats = [[None] * nb for _ in range(nx)]
    a_eq, b_eq = [], []
    while idx < len(lines):
        parts = lines[idx].split()
        if not parts:
            idx += 1
            continue
        if parts[0] == "m0":
            j = int(parts[1])
            m0[j], idx = _read_matrix(lines, idx + 1, sizes[j])
        elif parts[0] == "mat":
            i, j = int(parts[1]), int(parts[2])
            mats[i][j], idx = _read_matrix(lines, idx + 1, sizes[j])
        elif parts[0] == "eq":
            vals = [float(v) for v in parts[1:] if v != "="]
            a_eq.append(vals[:-1])
            b_eq.append(vals[-1])
            idx += 1
        else:
            raise ValueError("unrecognized line: %r" % lines[idx])
    kw = {}
    if me:
        kw = dict(a_eq=np.array(a_eq), b_eq=np.array(b_eq))
    return SdpProblem(c, m0, mats, **kw)
