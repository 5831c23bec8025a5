"""Conic program data model, solver contract, KKT verification and rank-one recovery.

A :class:`ConicProgram` is written in the standard form::

    maximize    c^T x + c0
    subject to  A x = b,   x_i in K_i  for every variable block i

where each block is free, non-negative, a second-order cone, a complex
Hermitian PSD matrix, or an exponential-cone triple
``{(x, y, z) : y * exp(x / y) <= z, y > 0}``.

Hermitian blocks are stored through the isometric real vectorisation
:func:`hvec` (diagonal entries, then ``sqrt(2) * Re`` and ``sqrt(2) * Im`` of the
strict upper triangle), so ``hvec(C) @ hvec(X) == Tr(C X)`` for Hermitian
``C`` and ``X``.  The numerical engine is Clarabel; PSD blocks are handed to it
as real symmetric blocks of doubled side.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import clarabel
import numpy as np
import scipy.sparse as sp

FREE = "free"
NONNEG = "nonneg"
SOC = "soc"
PSD = "psd"
EXP = "exp"
KINDS = (FREE, NONNEG, SOC, PSD, EXP)

RANK_ONE_TOL = 1e-6
PSD_TOL = 1e-8


# ---------------------------------------------------------------------------
# Hermitian vectorisation
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _triu(n):
    return np.triu_indices(n, 1)


def hvec(X):
    """Isometric real vectorisation of a Hermitian ``n x n`` matrix (length ``n**2``)."""
    X = np.asarray(X)
    n = X.shape[0]
    iu = _triu(n)
    off = X[iu]
    out = np.empty(n * n)
    out[:n] = np.real(np.diag(X))
    out[n::2] = np.sqrt(2.0) * off.real
    out[n + 1::2] = np.sqrt(2.0) * off.imag
    return out


def hmat(v, n):
    """Inverse of :func:`hvec`."""
    v = np.asarray(v, dtype=float)
    iu = _triu(n)
    X = np.zeros((n, n), dtype=complex)
    X[iu] = (v[n::2] + 1j * v[n + 1::2]) / np.sqrt(2.0)
    X = X + X.conj().T
    X[np.diag_indices(n)] = v[:n]
    return X


@lru_cache(maxsize=None)
def _hbasis(n):
    """Hermitian matrices whose hvec are the unit vectors, shape (n*n, n, n)."""
    return np.stack([hmat(e, n) for e in np.eye(n * n)])


def congruence_map(L):
    """Matrix ``M`` with ``hvec(L X L^H) == M @ hvec(X)`` for Hermitian ``X``."""
    L = np.asarray(L, dtype=complex)
    basis = _hbasis(L.shape[1])
    images = L[None, :, :] @ basis @ L.conj().T[None, :, :]
    return np.stack([hvec(Y) for Y in images], axis=1)


@lru_cache(maxsize=None)
def _embedding(n):
    """Map hvec(X) -> Clarabel svec of [[Re X, -Im X], [Im X, Re X]] (side 2n)."""
    m = 2 * n
    rows_i, rows_j = [], []
    for j in range(m):
        for i in range(j + 1):
            rows_i.append(i)
            rows_j.append(j)
    rows_i = np.array(rows_i)
    rows_j = np.array(rows_j)
    scale = np.where(rows_i == rows_j, 1.0, np.sqrt(2.0))
    T = np.zeros((len(rows_i), n * n))
    for k, B in enumerate(_hbasis(n)):
        Y = np.block([[B.real, -B.imag], [B.imag, B.real]])
        T[:, k] = scale * Y[rows_i, rows_j]
    return sp.csc_matrix(T)


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    name: str
    kind: str
    size: int
    offset: int

    @property
    def dim(self):
        return self.size * self.size if self.kind == PSD else self.size

    @property
    def cols(self):
        return slice(self.offset, self.offset + self.dim)


def _term_entries(term):
    """Yield (column, value) pairs for one term of an affine expression.

    Terms are ``(block, index, value)`` for a single entry of a vector block, or
    ``(block, coeff)`` where ``coeff`` is a Hermitian matrix (PSD blocks, meaning
    ``Tr(coeff X)``) or a dense real vector of the block's length.
    """
    if len(term) == 3:
        block, idx, value = term
        if block.kind == PSD:
            raise ValueError(f"use a matrix coefficient for PSD block {block.name!r}")
        if not 0 <= idx < block.dim:
            raise IndexError(f"index {idx} outside block {block.name!r}")
        return np.array([block.offset + idx]), np.array([float(value)])
    block, coeff = term
    coeff = np.asarray(coeff)
    if block.kind == PSD and coeff.ndim == 2:
        if coeff.shape != (block.size, block.size):
            raise ValueError(f"coefficient shape {coeff.shape} does not match block {block.name!r}")
        vec = hvec(coeff)
    else:
        vec = np.asarray(coeff, dtype=float).ravel()
        if vec.size != block.dim:
            raise ValueError(f"coefficient length {vec.size} does not match block {block.name!r}")
    nz = np.flatnonzero(vec)
    return block.offset + nz, vec[nz]


@dataclass
class Constraint:
    name: str
    cols: np.ndarray
    vals: np.ndarray
    rhs: float


class ConicProgram:
    """Linear objective over cone-constrained variable blocks with affine equalities."""

    def __init__(self, name=""):
        self.name = name
        self.blocks: list[Block] = []
        self.constraints: list[Constraint] = []
        self._block_index: dict[str, Block] = {}
        self._con_index: dict[str, int] = {}
        self._obj_cols: list[np.ndarray] = []
        self._obj_vals: list[np.ndarray] = []
        self.objective_constant = 0.0
        self._n = 0
        self.meta: dict = {}

    # -- construction ------------------------------------------------------
    def add_block(self, name, kind, size=1):
        if kind not in KINDS:
            raise ValueError(f"unknown cone kind {kind!r}")
        if name in self._block_index:
            raise ValueError(f"duplicate block name {name!r}")
        if kind == EXP:
            size = 3
        if size < 1:
            raise ValueError("block size must be positive")
        block = Block(name, kind, int(size), self._n)
        self._n += block.dim
        self.blocks.append(block)
        self._block_index[name] = block
        return block

    def block(self, name):
        return self._block_index[name]

    def _check(self, block):
        if self._block_index.get(block.name) is not block:
            raise ValueError(f"block {block.name!r} is not declared in this program")

    def _collect(self, terms):
        cols, vals = [], []
        for term in terms:
            self._check(term[0])
            c, v = _term_entries(term)
            cols.append(c)
            vals.append(v)
        if not cols:
            return np.zeros(0, dtype=int), np.zeros(0)
        return np.concatenate(cols), np.concatenate(vals)

    def add_constraint(self, terms, rhs=0.0, name=None):
        """Add ``sum(terms) == rhs``; returns the constraint index."""
        cols, vals = self._collect(terms)
        idx = len(self.constraints)
        name = name or f"c{idx}"
        self.constraints.append(Constraint(name, cols, vals, float(rhs)))
        self._con_index.setdefault(name, idx)
        return idx

    def add_objective(self, terms, constant=0.0):
        cols, vals = self._collect(terms)
        self._obj_cols.append(cols)
        self._obj_vals.append(vals)
        self.objective_constant += float(constant)

    def add_lmi(self, name, side, constant=None, scalar_terms=(), matrix_terms=()):
        """Introduce a PSD block ``S`` of the given side tied to an affine expression.

        ``S == constant + sum(E * x[block, idx]) + sum(sign * L X L^H)`` where
        ``scalar_terms`` holds ``(block, idx, E)`` and ``matrix_terms`` holds
        ``(psd_block, L, sign)``.  Returns the new block.
        """
        S = self.add_block(name, PSD, side)
        const = np.zeros(side * side) if constant is None else hvec(constant)
        dim = side * side
        parts = []
        for blk, idx, E in scalar_terms:
            self._check(blk)
            parts.append((np.full(dim, blk.offset + idx), -hvec(E)))
        for blk, L, sign in matrix_terms:
            self._check(blk)
            M = congruence_map(L)
            parts.append((blk.offset + np.arange(blk.dim), -sign * M))
        for r in range(dim):
            cols = [np.array([S.offset + r])]
            vals = [np.array([1.0])]
            for c, coeff in parts:
                if coeff.ndim == 1:
                    if coeff[r] != 0.0:
                        cols.append(c[:1])
                        vals.append(coeff[r:r + 1])
                else:
                    row = coeff[r]
                    nz = np.flatnonzero(np.abs(row) > 1e-300)
                    cols.append(c[nz])
                    vals.append(row[nz])
            self._con_index.setdefault(f"{name}[{r}]", len(self.constraints))
            self.constraints.append(Constraint(f"{name}[{r}]", np.concatenate(cols),
                                               np.concatenate(vals), const[r]))
        return S

    # -- views -------------------------------------------------------------
    @property
    def n_vars(self):
        return self._n

    def matrices(self):
        """Return ``(A, b, c)`` of the standard form (A as CSR)."""
        rows = [np.full(len(con.cols), i) for i, con in enumerate(self.constraints)]
        if rows:
            r = np.concatenate(rows)
            cidx = np.concatenate([con.cols for con in self.constraints])
            v = np.concatenate([con.vals for con in self.constraints])
        else:
            r = cidx = np.zeros(0, dtype=int)
            v = np.zeros(0)
        A = sp.csr_matrix((v, (r, cidx)), shape=(len(self.constraints), self._n))
        b = np.array([con.rhs for con in self.constraints])
        c = np.zeros(self._n)
        for cols, vals in zip(self._obj_cols, self._obj_vals):
            np.add.at(c, cols, vals)
        return A, b, c

    def count(self, kind, size=None):
        return sum(1 for b in self.blocks if b.kind == kind and (size is None or b.size == size))

    def constraint_index(self, name):
        return self._con_index[name]

    def has_constraint(self, name):
        return name in self._con_index

    def dump(self):
        """Plain-text listing of blocks, cones and constraint triplets."""
        A, b, c = self.matrices()
        lines = [f"# program {self.name}", f"blocks {len(self.blocks)} vars {self._n}"]
        for blk in self.blocks:
            lines.append(f"block {blk.name} {blk.kind} {blk.size} offset {blk.offset}")
        lines.append(f"objective_constant {self.objective_constant:.17g}")
        for j in np.flatnonzero(c):
            lines.append(f"obj {j} {c[j]:.17g}")
        coo = A.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            lines.append(f"A {coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}")
        for i, con in enumerate(self.constraints):
            lines.append(f"b {i} {con.name} {b[i]:.17g}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solutions and KKT residuals
# ---------------------------------------------------------------------------

@dataclass
class KKTResiduals:
    primal: float
    dual: float
    gap: float

    def max(self):
        return max(self.primal, self.dual, self.gap)


@dataclass
class ConicSolution:
    status: str
    objective: float
    x: np.ndarray
    y: np.ndarray | None
    primal: dict = field(default_factory=dict)
    kkt: KKTResiduals | None = None
    iterations: int = 0
    solver_status: str = ""

    @property
    def optimal(self):
        return self.status == "optimal"

    def value(self, name):
        return self.primal[name]

    def dual(self, prog, name):
        """Equality multiplier of the named constraint."""
        if self.y is None:
            raise ValueError("solution carries no dual values")
        return float(self.y[prog.constraint_index(name)])

    def dual_slack(self, prog, name):
        """Cone multiplier ``A^T y - c`` restricted to the named block."""
        if self.y is None:
            raise ValueError("solution carries no dual values")
        A, _, c = prog.matrices()
        s = A.T @ self.y - c
        blk = prog.block(name)
        vec = s[blk.cols]
        return hmat(vec, blk.size) if blk.kind == PSD else vec


def _split_primal(prog, x):
    out = {}
    for blk in prog.blocks:
        vec = x[blk.cols]
        out[blk.name] = hmat(vec, blk.size) if blk.kind == PSD else vec.copy()
    return out


def _exp_violation(x, y, z):
    viol = max(0.0, -y, -z)
    if y > 0 and z > 0:
        viol = max(viol, x - y * np.log(z / y))
    else:
        viol = max(viol, x)
    return viol


def _exp_dual_violation(u, v, w):
    viol = max(0.0, u, -w)
    if u < 0 and w > 0:
        viol = max(viol, u * (1.0 + np.log(w / -u)) - v)
    else:
        viol = max(viol, -v)
    return viol


def cone_violation(blk, vec, dual=False):
    """Distance-like violation of ``vec`` for the block's cone (or its dual cone)."""
    if blk.kind == FREE:
        return float(np.max(np.abs(vec))) if dual else 0.0
    if blk.kind == NONNEG:
        return max(0.0, -float(np.min(vec)))
    if blk.kind == SOC:
        return max(0.0, float(np.linalg.norm(vec[1:]) - vec[0]))
    if blk.kind == PSD:
        return max(0.0, -float(np.linalg.eigvalsh(hmat(vec, blk.size))[0]))
    if dual:
        return _exp_dual_violation(*vec)
    return _exp_violation(*vec)


def kkt_residuals(prog, sol):
    """Relative primal, dual and gap residuals recomputed from the program data."""
    if sol.y is None:
        raise ValueError("kkt_residuals needs dual values")
    A, b, c = prog.matrices()
    x = np.asarray(sol.x, dtype=float)
    y = np.asarray(sol.y, dtype=float)
    s = A.T @ y - c
    eq = float(np.max(np.abs(A @ x - b))) if len(b) else 0.0
    cone_p = max((cone_violation(blk, x[blk.cols]) for blk in prog.blocks), default=0.0)
    cone_d = max((cone_violation(blk, s[blk.cols], dual=True) for blk in prog.blocks), default=0.0)
    bnorm = float(np.max(np.abs(b))) if len(b) else 0.0
    xnorm = float(np.max(np.abs(x))) if len(x) else 0.0
    cnorm = float(np.max(np.abs(c))) if len(c) else 0.0
    pobj = float(c @ x)
    dobj = float(b @ y)
    return KKTResiduals(
        primal=max(eq / (1.0 + bnorm), cone_p / (1.0 + xnorm)),
        dual=cone_d / (1.0 + cnorm),
        gap=abs(pobj - dobj) / (1.0 + abs(pobj)),
    )


_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "inaccurate",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "max_iter",
    "MaxTime": "max_iter",
}


def solve(prog, tol=1e-8, max_iter=200):
    """Solve ``prog`` with a primal-dual interior-point method.

    Non-optimal outcomes are reported through ``status``; the best iterate is
    returned alongside.
    """
    A, b, c = prog.matrices()
    n = prog.n_vars
    blocks_a = [A.tocsc()]
    rhs = [b]
    cones = []
    if A.shape[0]:
        cones.append(clarabel.ZeroConeT(A.shape[0]))
    for blk in prog.blocks:
        if blk.kind == FREE:
            continue
        if blk.kind == PSD:
            T = _embedding(blk.size)
            sel = sp.csc_matrix((np.ones(blk.dim), (np.arange(blk.dim), blk.offset + np.arange(blk.dim))),
                                shape=(blk.dim, n))
            blocks_a.append(-(T @ sel))
            rhs.append(np.zeros(T.shape[0]))
            cones.append(clarabel.PSDTriangleConeT(2 * blk.size))
            continue
        sel = sp.csc_matrix((np.ones(blk.dim), (np.arange(blk.dim), blk.offset + np.arange(blk.dim))),
                            shape=(blk.dim, n))
        blocks_a.append(-sel)
        rhs.append(np.zeros(blk.dim))
        if blk.kind == NONNEG:
            cones.append(clarabel.NonnegativeConeT(blk.dim))
        elif blk.kind == SOC:
            cones.append(clarabel.SecondOrderConeT(blk.dim))
        else:
            cones.append(clarabel.ExponentialConeT())
    Afull = sp.vstack(blocks_a, format="csc")
    bfull = np.concatenate(rhs)
    P = sp.csc_matrix((n, n))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_ktratio = 1e-7
    settings.max_iter = max_iter
    solver = clarabel.DefaultSolver(P, -c, Afull, bfull, cones, settings)
    out = solver.solve()

    raw = str(out.status)
    status = _STATUS.get(raw, "inaccurate")
    x = np.asarray(out.x, dtype=float)
    y = np.asarray(out.z, dtype=float)[:A.shape[0]]
    sol = ConicSolution(status=status, objective=float(c @ x) + prog.objective_constant,
                        x=x, y=y, primal=_split_primal(prog, x), iterations=int(out.iterations),
                        solver_status=raw)
    if status in ("optimal", "inaccurate", "max_iter"):
        sol.kkt = kkt_residuals(prog, sol)
        # Accept a near-solved point when the independent residual check agrees.
        if status == "inaccurate" and sol.kkt.max() <= 100 * tol:
            sol.status = "optimal"
    return sol


# ---------------------------------------------------------------------------
# Rank-one recovery
# ---------------------------------------------------------------------------

def _fix_phase(v):
    if not np.any(v):
        return v
    i = int(np.argmax(np.abs(v)))
    return v * np.exp(-1j * np.angle(v[i]))


def rank_one_ratio(X):
    """``lambda_2 / lambda_1`` of a Hermitian PSD matrix (0 for side 1 or X == 0)."""
    w = np.linalg.eigvalsh(X)
    if X.shape[0] < 2 or w[-1] <= 0:
        return 0.0
    return max(w[-2], 0.0) / w[-1]


def extract_rank_one(X, score=None, feasible=None, n_draws=200, rng=None, tol=RANK_ONE_TOL):
    """Best rank-one factor ``v`` with ``v v^H`` approximating ``X``.

    When ``X`` is rank one within ``tol`` the scaled principal eigenvector is
    returned.  Otherwise candidates drawn from ``CN(0, X)`` are filtered by
    ``feasible`` and ranked by ``score`` (larger is better); the principal
    eigenvector always competes, so a vector is always returned.
    """
    X = np.asarray(X, dtype=complex)
    X = 0.5 * (X + X.conj().T)
    w, U = np.linalg.eigh(X)
    lmax = w[-1]
    if w[0] < -PSD_TOL * max(abs(lmax), 1e-300) and w[0] < -1e-14:
        raise ValueError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    if lmax <= 0:
        return np.zeros(X.shape[0], dtype=complex)
    principal = _fix_phase(np.sqrt(lmax) * U[:, -1])
    if X.shape[0] == 1 or max(w[-2], 0.0) / lmax <= tol or score is None:
        return principal
    rng = np.random.default_rng(0) if rng is None else rng
    root = U * np.sqrt(np.clip(w, 0.0, None))
    z = (rng.standard_normal((X.shape[0], n_draws)) + 1j * rng.standard_normal((X.shape[0], n_draws))) / np.sqrt(2)
    draws = (root @ z).T
    best, best_score = principal, score(principal)
    for cand in draws:
        if feasible is not None and not feasible(cand):
            continue
        val = score(cand)
        if val > best_score:
            best, best_score = cand, val
    return best
