"""Sparse extended linearization and the Picard correction series.

The operator L~ is assembled as a scipy sparse matrix acting on the flattened
value array of a ConfigField (index (c*3 + alg)*N + node), which makes the
adjoint, factorizations and least-squares solves available.  Boundary nodes
of the grid carry homogeneous Dirichlet data: unknowns and equations live on
interior nodes only.

Because every Picard step reuses the same operator, the driver factorizes
the square interior block once; ``solve_linear`` also offers LSQR (conjugate
gradients on the weighted normal equations) for singular or masked operators.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import CYCLIC, ConfigField, bogomolny_residual, quadratic
from .su2 import ad_matrix


class SolveError(RuntimeError):
    def __init__(self, msg, best=None, residual=None):
        super().__init__(msg)
        self.best = best
        self.residual = residual


class ContractionError(RuntimeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


# ------------------------------------------------------------ assembly

def _deriv_matrix_1d(grid, k):
    """Dense matrix of grid.deriv along axis k, probed on unit vectors."""
    n = grid.shape[k]
    shape = [1, 1, 1]
    shape[k] = n
    probe = np.zeros((n,) + tuple(grid.shape))
    idx = np.arange(n)
    sl = [idx] + [slice(None)] * 3
    sl[1 + k] = idx
    probe[tuple(sl)] = 1.0
    out = grid.deriv(probe, k)
    take = [slice(None)] + [0, 0, 0]
    take[1 + k] = slice(None)
    return out[tuple(take)].T  # column j = derivative of e_j


def _kron_axis(mat, k, shape):
    eye = [sp.identity(n, format="csr") for n in shape]
    eye[k] = sp.csr_matrix(np.where(np.abs(mat) < 1e-300, 0.0, mat))
    return sp.kron(sp.kron(eye[0], eye[1]), eye[2], format="csr")


def _diag(v):
    return sp.diags(np.ravel(v))


def _ad_block(X):
    """3N x 3N sparse matrix of y -> [X, y] for X of shape (3, *grid)."""
    m = ad_matrix(np.moveaxis(X, 0, -1).reshape(-1, 3))  # (N, 3, 3)
    return sp.bmat([[_diag(m[:, a, b]) for b in range(3)] for a in range(3)], format="csr")


def _scalar3(v, N):
    """Pointwise scalar weight replicated over the three algebra slots."""
    return sp.kron(sp.identity(3), _diag(np.broadcast_to(v, (N,)) if np.ndim(v) == 0 else v), format="csr")


def build_matrix(Psi: ConfigField, dagger: bool = False):
    """Sparse L~ (or its formal adjoint) matching ``apply_extended``."""
    grid = Psi.grid
    shape = tuple(grid.shape)
    N = int(np.prod(shape))
    D = [sp.kron(sp.identity(3), _kron_axis(_deriv_matrix_1d(grid, k), k, shape), format="csr") for k in range(3)]
    adA = [_ad_block(Psi.a[k]) for k in range(3)]
    adP = _ad_block(Psi.phi)
    sgn = -1.0 if dagger else 1.0
    scale2 = [np.broadcast_to(np.asarray(grid.scale(k), float) ** 2, shape).ravel() for k in range(3)]
    sg = np.broadcast_to(np.asarray(grid.sqrt_g, float), shape).ravel()
    Z = sp.csr_matrix((3 * N, 3 * N))
    blocks = [[Z] * 4 for _ in range(4)]
    for k, (i, j, _) in enumerate(CYCLIC):
        st = _scalar3(scale2[k] / sg, N)
        blocks[k][j] = blocks[k][j] + st @ (D[i] + adA[i])
        blocks[k][i] = blocks[k][i] - st @ (D[j] + adA[j])
        blocks[k][3] = blocks[k][3] - (D[k] + adA[k])
        blocks[k][k] = blocks[k][k] + sgn * adP
    for k in range(3):
        blocks[3][k] = (_scalar3(1 / sg, N) @ D[k] @ _scalar3(sg / scale2[k], N)
                        + _scalar3(1 / scale2[k], N) @ adA[k])
    blocks[3][3] = sgn * adP
    return sp.bmat(blocks, format="csr")


def interior_mask(grid):
    """Nodes off the box boundary (Cartesian) or all nodes but the outer/inner radial shells (tube)."""
    m = np.ones(grid.shape, bool)
    if grid.kind == "cartesian":
        for k in range(3):
            sl = [slice(None)] * 3
            sl[k] = 0
            m[tuple(sl)] = False
            sl[k] = -1
            m[tuple(sl)] = False
    else:
        m[0] = False
        m[-1] = False
    return m


@dataclass
class LinearOperatorHandle:
    """L~_Psi on a fixed grid, with weights for the L^2_eps and H_eps norms."""

    Psi: ConfigField
    matrix: sp.csr_matrix
    adjoint: sp.csr_matrix
    interior: np.ndarray  # flat indices of the unknowns (12 per interior node)
    weight: np.ndarray  # per-unknown volume * rho_eps weight
    eps: float
    _lu: object = field(default=None, repr=False)

    @property
    def grid(self):
        return self.Psi.grid

    @property
    def block(self):
        return self.matrix[self.interior][:, self.interior]

    def apply(self, psi: ConfigField, dagger: bool = False) -> ConfigField:
        m = self.adjoint if dagger else self.matrix
        vals = m @ psi.values.reshape(-1)
        return ConfigField(self.grid, vals.reshape(psi.values.shape))

    def restrict(self, f: ConfigField) -> np.ndarray:
        return f.values.reshape(-1)[self.interior]

    def extend(self, x: np.ndarray) -> ConfigField:
        vals = np.zeros(12 * int(np.prod(self.grid.shape)), dtype=np.result_type(x, float))
        vals[self.interior] = x
        return ConfigField(self.grid, vals.reshape((4, 3) + tuple(self.grid.shape)))

    def l2(self, x: np.ndarray) -> float:
        """L^2_eps norm of an interior vector."""
        return float(np.sqrt(np.sum(self.weight * np.abs(x) ** 2)))

    def h_norm(self, psi: ConfigField) -> float:
        """H_{Psi,eps} norm: rho_eps-weighted |nabla_A psi|^2 + |[Phi, psi]|^2 (+ the L^2_eps part)."""
        grid = self.grid
        vals = psi.values
        w = self._node_weight()
        dens = np.sum(np.abs(vals) ** 2, axis=(0, 1))
        for k in range(3):
            d = grid.deriv(vals, k) + 2 * np.cross(np.broadcast_to(self.Psi.a[k], vals.shape), vals, axis=1)
            dens = dens + np.sum(np.abs(d) ** 2, axis=(0, 1)) / np.asarray(grid.scale(k)) ** 2
        dens = dens + np.sum(np.abs(2 * np.cross(np.broadcast_to(self.Psi.phi, vals.shape), vals, axis=1)) ** 2,
                             axis=(0, 1))
        return float(np.sqrt(np.sum(w * dens)))

    def _node_weight(self):
        grid = self.grid
        rho = grid.rho if grid.rho is not None else np.full(grid.shape, np.inf)
        return grid.volume_weights() * np.minimum(rho, self.eps)

    def factorize(self):
        if self._lu is None:
            self._lu = spla.splu(self.block.tocsc())
        return self._lu


def assemble_operator(Psi: ConfigField, fparams=None, eps: float = 1.0) -> LinearOperatorHandle:
    """Sparse handle for L~_Psi; ``eps`` is the weight cutoff rho_eps = min(rho, eps)."""
    mat = build_matrix(Psi)
    adj = build_matrix(Psi, dagger=True)
    grid = Psi.grid
    mask = interior_mask(grid)
    node = np.flatnonzero(mask.ravel())
    N = mask.size
    interior = (np.arange(12)[:, None] * N + node[None, :]).ravel()
    rho = grid.rho if grid.rho is not None else np.full(grid.shape, np.inf)
    w_node = (grid.volume_weights() * np.minimum(rho, eps)).ravel()
    weight = np.tile(w_node, 12)[interior]
    return LinearOperatorHandle(Psi, mat, adj, interior, weight, float(eps))


# ------------------------------------------------------------ linear solves

@dataclass
class SolveInfo:
    residual: float
    rhs_norm: float
    iterations: int
    c_emp: float
    method: str


def solve_linear(op: LinearOperatorHandle, rhs, tol: float = 1e-10, max_iter: int = 20000,
                 method: str = "lsqr", matrix=None):
    """Solve L~ psi = rhs on interior nodes.

    ``lsqr``: conjugate gradients on the weighted normal equations (minimal
    norm least-squares solution); ``direct``: sparse LU of the square block.
    ``rhs`` may be a ConfigField or an interior vector.  Returns (psi, info).
    """
    b = op.restrict(rhs) if isinstance(rhs, ConfigField) else np.asarray(rhs)
    A = op.block if matrix is None else matrix
    bn = op.l2(b)
    if bn == 0:
        return op.extend(np.zeros_like(b)), SolveInfo(0.0, 0.0, 0, 0.0, method)
    if method == "direct":
        if matrix is not None:
            x = spla.spsolve(A.tocsc(), b)
        else:
            x = op.factorize().solve(b)
        its = 1
    elif method == "lsqr":
        sw = np.sqrt(op.weight)
        Aw = sp.diags(sw) @ A
        out = spla.lsqr(Aw, sw * b, atol=tol, btol=tol, iter_lim=max_iter)
        x, its = out[0], int(out[2])
    else:
        raise ValueError(f"unknown method {method}")
    res = op.l2(A @ x - b)
    psi = op.extend(x)
    info = SolveInfo(res, bn, its, op.h_norm(psi) / bn, method)
    if method == "lsqr" and res > max(1e3 * tol, 1e-8) * bn and its >= max_iter:
        raise SolveError("linear solve did not converge", best=psi, residual=res)
    return psi, info


def approximate_kernel(op: LinearOperatorHandle, k: int = 6, rel: float = 1e-3):
    """Right singular vectors with sigma <= rel * median(sigma) (dense SVD; small grids)."""
    A = op.block.toarray()
    s_w = np.sqrt(op.weight)
    u, s, vt = np.linalg.svd(s_w[:, None] * A / s_w[None, :])
    cut = rel * np.median(s)
    keep = s <= cut
    return vt[keep].T / s_w[:, None], u[:, keep] / s_w[:, None], s


# ------------------------------------------------------------ Picard series

@dataclass
class IterationTrace:
    rows: list = field(default_factory=list)

    def add(self, **kw):
        self.rows.append(kw)

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def ratios(self):
        p = self.column("psi_norm")
        return p[1:] / np.where(p[:-1] == 0, 1, p[:-1]) if len(p) > 1 else np.zeros(0)

    def to_csv(self, path):
        if not self.rows:
            return
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.rows[0]))
            w.writeheader()
            w.writerows(self.rows)


def extended_residual(op: LinearOperatorHandle, V_bg: np.ndarray, S: ConfigField) -> np.ndarray:
    """Interior vector of (V(Psi + S), gauge functional) with V_bg the background residual.

    V(Psi + S) = V_bg + L S + Q(S, S) exactly at the discrete level, the
    gauge functional is the 0-form row of L~ S.
    """
    bg = np.zeros((4, 3) + tuple(op.grid.shape))
    bg[:3] = V_bg
    full = bg + op.apply(S).values + quadratic(S, S).values
    return full.reshape(-1)[op.interior]


def _split_norms(op, r):
    N = int(np.prod(op.grid.shape))
    zero_part = op.interior >= 9 * N
    return op.l2(np.where(zero_part, 0, r)), op.l2(np.where(zero_part, r, 0))


def picard_iterate(Psi: ConfigField, fparams=None, psi0: ConfigField | None = None, n_max: int = 30,
                   tol: float = 1e-6, op: LinearOperatorHandle | None = None, V_bg=None,
                   relative: bool = True, method: str = "direct", eps: float = 1.0,
                   projector=None):
    """Correction series L~ psi_1 = -V(Psi + psi_0), L~ psi_n = -2Q(S_{n-2}, psi_{n-1}) - Q(psi_{n-1}, psi_{n-1}).

    ``V_bg`` is the background residual (defaults to the finite-difference
    one); ``tol`` is relative to the initial residual when ``relative``.
    ``projector`` (optional) maps interior right-hand sides onto the
    complement of a cokernel.  Returns (psi0 + sum psi_n, trace).
    """
    if op is None:
        op = assemble_operator(Psi, fparams, eps)
    if V_bg is None:
        V_bg = bogomolny_residual(Psi)
    grid = Psi.grid
    S_prev = psi0.copy() if psi0 is not None else ConfigField.zeros(grid)
    trace = IterationTrace()
    r = extended_residual(op, V_bg, S_prev)
    v0, g0 = _split_norms(op, r)
    target = tol * v0 if relative else tol
    trace.add(n=0, psi_norm=op.h_norm(S_prev), V_norm=v0, gauge_norm=g0, lin_res=0.0)
    if v0 <= target or v0 == 0:
        return S_prev, trace
    psi_last = None
    bad = 0
    rhs = -r
    for n in range(1, n_max + 1):
        if projector is not None:
            rhs = projector(rhs)
        psi, info = solve_linear(op, rhs, method=method)
        S = S_prev + psi
        r = extended_residual(op, V_bg, S)
        if projector is not None:
            r = projector(r)
        vn, gn = _split_norms(op, r)
        pn = op.h_norm(psi)
        trace.add(n=n, psi_norm=pn, V_norm=vn, gauge_norm=gn, lin_res=info.residual)
        if psi_last is not None and pn > 0.9 * psi_last:
            bad += 1
            if bad >= 3:
                raise ContractionError("Picard series is not contracting", trace)
        else:
            bad = 0
        if vn <= target and gn <= target:
            return S, trace
        # next right-hand side: -2Q(S_prev, psi) - Q(psi, psi)
        rhs = -op.restrict(quadratic(S_prev, psi) * 2.0 + quadratic(psi, psi))
        S_prev, psi_last = S, pn
    raise ContractionError("Picard series did not reach the tolerance", trace)


def cokernel_projector(op: LinearOperatorHandle, basis: np.ndarray):
    """Weighted-orthogonal projection onto the complement of span(basis) (interior vectors)."""
    B = np.atleast_2d(np.asarray(basis).T).T
    w = op.weight
    G = B.T @ (w[:, None] * B)
    Ginv = np.linalg.inv(G)

    def coeffs(x):
        return Ginv @ (B.T @ (w * x))

    def perp(x):
        return x - B @ coeffs(x)

    perp.coeffs = coeffs
    perp.basis = B
    return perp


def picard_project(Psi: ConfigField, fparams=None, psi0: ConfigField | None = None, n_max: int = 30,
                   tol: float = 1e-6, cokernel=None, op=None, V_bg=None, matrix=None, eps: float = 1.0):
    """Picard series with right-hand sides projected off the cokernel.

    Returns (psi0 + w, trace, obstruction) where the obstruction is the
    cokernel component of Q(psi0 + w, psi0 + w), as an interior vector.
    ``matrix`` overrides the interior block (e.g. a masked operator).
    """
    if op is None:
        op = assemble_operator(Psi, fparams, eps)
    if V_bg is None:
        V_bg = bogomolny_residual(Psi)
    if cokernel is None or np.size(cokernel) == 0:
        S, trace = picard_iterate(Psi, fparams, psi0, n_max, tol, op, V_bg, eps=eps)
        return S, trace, np.zeros(len(op.interior))
    proj = cokernel_projector(op, cokernel)
    method = "lsqr"
    if matrix is not None:
        # solve against the supplied block by temporarily swapping it in
        saved = op.matrix
        full = op.matrix.tolil(copy=True)
        idx = op.interior
        full[np.ix_(idx, idx)] = matrix
        op.matrix = full.tocsr()
    try:
        S, trace = picard_iterate(Psi, fparams, psi0, n_max, tol, op, V_bg, method=method, projector=proj, eps=eps)
    finally:
        if matrix is not None:
            op.matrix = saved
    q = op.restrict(quadratic(S, S))
    obstruction = q - proj(q)
    return S, trace, obstruction


# ------------------------------------------------------------ scalar analogue

def toy_recursion(ell: float, q: float, v: float, n_max: int = 40):
    """Scalar model ell x + q x^2 + v = 0 solved by the same recursion.

    Returns the iterates x_n and partial sums; with 16 |q v| <= ell^2 each
    step shrinks by at least one half.
    """
    xs = [-v / ell]
    sums = [xs[0]]
    prev_sum = 0.0
    for _ in range(1, n_max):
        x_last = xs[-1]
        x = -(2 * q * prev_sum * x_last + q * x_last ** 2) / ell
        prev_sum = sums[-1]
        xs.append(x)
        sums.append(prev_sum + x)
    return np.array(xs), np.array(sums)


def toy_root(ell: float, q: float, v: float) -> float:
    """Root of ell x + q x^2 + v = 0 continuing x = -v/ell at q = 0."""
    # rationalized form, no cancellation as q -> 0
    return -2 * v / (ell + np.sign(ell) * np.sqrt(ell * ell - 4 * q * v))
