"""Small dense second-order cone solver.

Solves

    minimize    c'x
    subject to  G x + s = h,   s in K

where ``K`` is a nonnegative orthant of dimension ``nonneg`` followed by
second-order cones ``{(u0, u1): u0 >= ||u1||}`` of the sizes in ``soc``.
The method is a primal-dual interior-point iteration on the homogeneous
self-dual embedding with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step. Everything is dense; problems here have at most a
few hundred rows.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError

log = logging.getLogger(__name__)

KKT_REFINEMENT_STEPS = 2


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"

    def __str__(self):
        return self.value


@dataclass
class ConeProgram:
    """Standard-form cone program ``min c'x  s.t.  Gx + s = h, s in K``.

    ``x0`` optionally supplies a strictly feasible primal point used as the
    starting iterate. ``meta`` carries problem-specific bookkeeping.
    """

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    nonneg: int
    soc: tuple[int, ...]
    x0: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.G = np.asarray(self.G, dtype=float)
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        self.soc = tuple(int(q) for q in self.soc)
        m = self.nonneg + sum(self.soc)
        if self.G.shape != (m, self.c.size) or self.h.size != m:
            raise InvalidArgumentError(
                f"G is {self.G.shape}, expected ({m}, {self.c.size}); h has {self.h.size} rows")
        if any(q < 1 for q in self.soc):
            raise InvalidArgumentError("second-order cones need dimension >= 1")

    @property
    def num_variables(self) -> int:
        return self.c.size

    @property
    def num_rows(self) -> int:
        return self.h.size

    @property
    def degree(self) -> int:
        return self.nonneg + len(self.soc)

    def cone_slices(self) -> list[slice]:
        out, k = [], self.nonneg
        for q in self.soc:
            out.append(slice(k, k + q))
            k += q
        return out


@dataclass
class ConeSolution:
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    status: Status
    primal_objective: float
    dual_objective: float
    duality_gap: float  # s'z relative to max(1, |c'x|)
    constraint_residual: float  # max of relative primal/dual residuals and cone violation
    iterations: int

    @property
    def objective_value(self) -> float:
        return self.primal_objective


# ---------------------------------------------------------------- cone algebra

class _Cone:
    """Orthant + SOC block structure with NT scaling helpers.

    Cones of equal size are grouped so their algebra runs as array operations
    on ``(count, size)`` index blocks.
    """

    def __init__(self, nonneg: int, soc: tuple[int, ...]):
        self.l = nonneg
        self.slices = []
        k = nonneg
        for q in soc:
            self.slices.append(slice(k, k + q))
            k += q
        self.m = k
        self.degree = nonneg + len(soc)
        by_size: dict[int, list[int]] = {}
        for sl in self.slices:
            by_size.setdefault(sl.stop - sl.start, []).append(sl.start)
        self.groups = [np.array(starts)[:, None] + np.arange(q)[None, :]
                       for q, starts in sorted(by_size.items())]

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[: self.l] = 1.0
        for sl in self.slices:
            e[sl.start] = 1.0
        return e

    def min_eig(self, u: np.ndarray) -> float:
        vals = [float(np.min(u[: self.l]))] if self.l else []
        for idx in self.groups:
            U = u[idx]
            vals.append(float(np.min(U[:, 0] - np.linalg.norm(U[:, 1:], axis=1))))
        return min(vals) if vals else math.inf

    def prod(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        out[: self.l] = u[: self.l] * v[: self.l]
        for idx in self.groups:
            A, B = u[idx], v[idx]
            blk = A[:, :1] * B + B[:, :1] * A
            blk[:, 0] = np.einsum("ij,ij->i", A, B)
            out[idx] = blk
        return out

    def div(self, lam: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Solve ``lam o x = r`` for x."""
        out = np.empty(self.m)
        out[: self.l] = r[: self.l] / lam[: self.l]
        for idx in self.groups:
            A, B = lam[idx], r[idx]
            det = _soc_norm_rows(A) ** 2
            x0 = (A[:, 0] * B[:, 0] - np.einsum("ij,ij->i", A[:, 1:], B[:, 1:])) / det
            blk = np.empty_like(A)
            blk[:, 0] = x0
            blk[:, 1:] = (B[:, 1:] - x0[:, None] * A[:, 1:]) / A[:, :1]
            out[idx] = blk
        return out

    def max_step(self, u: np.ndarray, du: np.ndarray) -> float:
        """Largest ``alpha`` keeping ``u + alpha du`` in the cone (inf if unbounded)."""
        alpha = math.inf
        if self.l:
            d = du[: self.l]
            neg = d < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-u[: self.l][neg] / d[neg])))
        for idx in self.groups:
            alpha = min(alpha, float(np.min(_soc_step_rows(u[idx], du[idx]))))
        return alpha


def _soc_norm_rows(U: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(U[:, 1:], axis=1)
    return np.sqrt(np.maximum((U[:, 0] - r) * (U[:, 0] + r), 1e-300))


def _soc_norm(u: np.ndarray) -> float:
    """``sqrt(u0^2 - ||u1||^2)`` in factored form; tiny positive floor near the boundary."""
    r = float(np.linalg.norm(u[1:]))
    return math.sqrt(max((u[0] - r) * (u[0] + r), 1e-300))


def _soc_step_rows(U: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Per-row largest step keeping ``U + alpha D`` inside the cone."""
    # normalize each u to the unit hyperboloid so the quadratic is well scaled
    nu = _soc_norm_rows(U)[:, None]
    U = U / nu
    D = D / nu
    a = D[:, 0] ** 2 - np.einsum("ij,ij->i", D[:, 1:], D[:, 1:])
    b = U[:, 0] * D[:, 0] - np.einsum("ij,ij->i", U[:, 1:], D[:, 1:])
    # f(alpha) = a alpha^2 + 2 b alpha + 1 ; first positive root where f hits 0
    alpha = np.full(a.shape, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        linear = np.abs(a) < 1e-14 * np.maximum(1.0, np.abs(b))
        lin_root = linear & (b < 0)
        alpha[lin_root] = -0.5 / b[lin_root]
        disc = b * b - a
        quad = ~linear & (disc >= 0)
        sq = np.sqrt(np.where(quad, disc, 0.0))
        q = -(b + np.where(b >= 0, sq, -sq))
        for r in (q / a, 1.0 / q):
            ok = quad & (q != 0) & (r > 0)
            alpha[ok] = np.minimum(alpha[ok], r[ok])
        # leaving through the apex onto the negative nappe
        apex = D[:, 0] < 0
        alpha[apex] = np.minimum(alpha[apex], -U[apex, 0] / D[apex, 0])
    return alpha


class _NTScaling:
    """Block-diagonal symmetric NT scaling ``W`` with ``W z = W^{-1} s = lambda``.

    Each cone block is ``beta (2 v v' - J)`` where ``v`` is the half-way point
    between the normalized scaling point and the cone identity.
    """

    def __init__(self, cone: _Cone, s: np.ndarray, z: np.ndarray):
        self.cone = cone
        l = cone.l
        self.d = np.sqrt(s[:l] / z[:l])
        lam = np.empty(cone.m)
        lam[:l] = np.sqrt(s[:l] * z[:l])
        self.blocks = []
        for idx in cone.groups:
            S, Z = s[idx], z[idx]
            sn = _soc_norm_rows(S)
            zn = _soc_norm_rows(Z)
            Sb = S / sn[:, None]
            Zb = Z / zn[:, None]
            gamma = np.sqrt(0.5 * (1.0 + np.einsum("ij,ij->i", Sb, Zb)))
            Wb = (Sb - Zb) / (2.0 * gamma[:, None])
            Wb[:, 0] = (Sb[:, 0] + Zb[:, 0]) / (2.0 * gamma)
            beta = np.sqrt(sn / zn)
            V = Wb.copy()
            V[:, 0] += 1.0
            V /= np.sqrt(2.0 * (Wb[:, :1] + 1.0))
            self.blocks.append((idx, beta, V))
            # beta (2 (v'z) v - J z)
            L = 2.0 * np.einsum("ij,ij->i", V, Z)[:, None] * V
            L[:, 0] -= Z[:, 0]
            L[:, 1:] += Z[:, 1:]
            lam[idx] = beta[:, None] * L
        self.lam = lam
        self._W = None
        self._Winv = None

    def _dense(self, inverse: bool) -> np.ndarray:
        m, l = self.cone.m, self.cone.l
        out = np.zeros((m, m))
        diag = np.arange(l)
        out[diag, diag] = 1.0 / self.d if inverse else self.d
        for idx, beta, V in self.blocks:
            if inverse:
                V = V.copy()
                V[:, 1:] = -V[:, 1:]
            blk = 2.0 * V[:, :, None] * V[:, None, :]
            q = V.shape[1]
            jdiag = np.full(q, 1.0)
            jdiag[0] = -1.0
            blk[:, np.arange(q), np.arange(q)] += jdiag
            scale = (1.0 / beta) if inverse else beta
            out[idx[:, :, None], idx[:, None, :]] = scale[:, None, None] * blk
        return out

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self._W is None:
            self._W = self._dense(False)
        return self._W @ v

    def apply_inv(self, v: np.ndarray) -> np.ndarray:
        if self._Winv is None:
            self._Winv = self._dense(True)
        return self._Winv @ v


# ---------------------------------------------------------------- solver

def _shift_into_cone(cone: _Cone, u: np.ndarray) -> np.ndarray:
    lo = cone.min_eig(u)
    if lo > 1e-8 * max(1.0, np.linalg.norm(u)):
        return u
    return u + (1.0 - lo) * cone.identity()


def solve(program: ConeProgram, tol: float = 1e-8, max_iter: int = 200,
          feastol: float | None = None) -> ConeSolution:
    """Solve a cone program to relative duality gap ``tol``.

    Deterministic: the iteration uses no randomness and a fixed step rule.
    Returns status ``Optimal`` once the relative gap and the scaled primal and
    dual residuals are all below their tolerances, ``Infeasible`` when a
    certificate of primal or dual infeasibility is found, else ``MaxIter``.
    """
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")
    feastol = tol if feastol is None else feastol
    c, G, h = program.c, program.G, program.h
    n, m = c.size, h.size
    cone = _Cone(program.nonneg, program.soc)
    e = cone.identity()
    hnorm = max(1.0, float(np.linalg.norm(h)))
    cnorm = max(1.0, float(np.linalg.norm(c)))

    # initial point
    if program.x0 is not None:
        x = np.asarray(program.x0, dtype=float).copy()
        s = h - G @ x
        if cone.min_eig(s) <= 0:
            raise InvalidArgumentError("supplied x0 is not strictly feasible")
    else:
        x = np.linalg.lstsq(G, h, rcond=None)[0]
        s = _shift_into_cone(cone, h - G @ x)
    # least-norm z with G'z + c = 0
    z = -G @ np.linalg.lstsq(G.T @ G, c, rcond=None)[0]
    z = _shift_into_cone(cone, z)
    tau, kappa = 1.0, 1.0

    status = Status.MAX_ITER
    it = 0
    step = 0.99
    for it in range(max_iter + 1):
        rx = G.T @ z + c * tau
        rz = G @ x + s - h * tau
        rt = kappa + c @ x + h @ z
        gap = s @ z
        mu = (gap + tau * kappa) / (cone.degree + 1)

        pcost = c @ x / tau
        dcost = -h @ z / tau
        pres = np.linalg.norm(rz) / tau / hnorm
        dres = np.linalg.norm(rx) / tau / cnorm
        relgap = gap / tau ** 2 / max(1.0, abs(pcost))
        log.debug("it %3d pcost % .10e dcost % .10e pres %.2e dres %.2e gap %.2e tau %.2e kappa %.2e",
                  it, pcost, dcost, pres, dres, relgap, tau, kappa)
        if pres <= feastol and dres <= feastol and relgap <= tol:
            status = Status.OPTIMAL
            break
        # infeasibility certificates
        hz = h @ z
        cx = c @ x
        if hz < 0 and np.linalg.norm(G.T @ z) / -hz <= feastol and tau < 1e-6 * kappa:
            status = Status.INFEASIBLE
            break
        if cx < 0 and np.linalg.norm(G @ x + s) / -cx <= feastol and tau < 1e-6 * kappa:
            status = Status.INFEASIBLE
            break
        if it == max_iter:
            break

        W = _NTScaling(cone, s, z)
        lam = W.lam
        Gs = W.apply_inv(G)
        # QR of the scaled constraint matrix: M = Gs'Gs = R'R without squaring the condition number
        R = np.linalg.qr(Gs, mode="r")
        R[np.abs(R) < 1e-300] = 0.0
        diag = np.abs(np.diag(R))
        if np.any(diag <= 1e-14 * max(1.0, float(diag.max()))):
            R[np.diag_indices_from(R)] += 1e-12 * max(1.0, float(diag.max()))

        def msolve(r):
            y = scipy.linalg.solve_triangular(R, r, trans="T", check_finite=False)
            return scipy.linalg.solve_triangular(R, y, check_finite=False)

        def kkt_once(r1, r2):
            w2 = W.apply_inv(r2)
            dx = msolve(r1 + Gs.T @ w2)
            dz = W.apply_inv(Gs @ dx - w2)
            return dx, dz

        def kkt(r1, r2):
            # [0 G'; G -W^2] [dx; dz] = [r1; r2], with iterative refinement
            dx, dz = kkt_once(r1, r2)
            for _ in range(KKT_REFINEMENT_STEPS):
                e1 = r1 - G.T @ dz
                e2 = r2 - (G @ dx - W.apply(W.apply(dz)))
                ex, ez = kkt_once(e1, e2)
                dx += ex
                dz += ez
            return dx, dz

        x1, z1 = kkt(-c, h)
        denom = c @ x1 + h @ z1 - kappa / tau

        def direction(sigma, ds_rhs, dk_rhs):
            u = cone.div(lam, ds_rhs)
            x2, z2 = kkt(-(1.0 - sigma) * rx, -(1.0 - sigma) * rz - W.apply(u))
            dtau = (-(1.0 - sigma) * rt - c @ x2 - h @ z2 - dk_rhs / tau) / denom
            dx = x2 + dtau * x1
            dz = z2 + dtau * z1
            ds = W.apply(u - W.apply(dz))
            dkappa = (dk_rhs - kappa * dtau) / tau
            return dx, dz, ds, dtau, dkappa

        def max_alpha(dz, ds, dtau, dkappa):
            a = min(cone.max_step(s, ds), cone.max_step(z, dz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        lamlam = cone.prod(lam, lam)
        # predictor
        dx_a, dz_a, ds_a, dt_a, dk_a = direction(0.0, -lamlam, -tau * kappa)
        alpha_a = min(1.0, max_alpha(dz_a, ds_a, dt_a, dk_a))
        sigma = (1.0 - alpha_a) ** 3
        # corrector
        corr = cone.prod(W.apply_inv(ds_a), W.apply(dz_a))
        dx, dz, ds, dt, dk = direction(
            sigma, -lamlam - corr + sigma * mu * e, -tau * kappa - dt_a * dk_a + sigma * mu)
        alpha = min(1.0, step * max_alpha(dz, ds, dt, dk))

        nxt = (x + alpha * dx, s + alpha * ds, z + alpha * dz, tau + alpha * dt, kappa + alpha * dk)
        if not (np.isfinite(alpha) and alpha > 1e-12 and all(np.all(np.isfinite(u)) for u in nxt)):
            # numerical breakdown: keep the last finite iterate
            log.debug("stopping at it %d: step %.2e", it, alpha)
            break
        x, s, z, tau, kappa = nxt

    xs, ss, zs = x / tau, s / tau, z / tau
    pcost = float(c @ xs)
    dcost = float(-h @ zs)
    resid_p = float(np.linalg.norm(G @ xs + ss - h)) / hnorm
    resid_d = float(np.linalg.norm(G.T @ zs + c)) / cnorm
    cone_viol = max(0.0, -cone.min_eig(h - G @ xs))
    return ConeSolution(
        x=xs, s=ss, z=zs, status=status,
        primal_objective=pcost, dual_objective=dcost,
        duality_gap=float(ss @ zs) / max(1.0, abs(pcost)),
        constraint_residual=max(resid_p, resid_d, cone_viol),
        iterations=it,
    )


def write_problem_file(program: ConeProgram, path) -> None:
    """Dump a program as plain text for offline cross-checking.

    Layout::

        # comment lines
        dims <n_variables> <n_rows>
        nonneg <l>
        soc <q_1> <q_2> ...
        c <n values>
        h <m values>
        G
        <m lines of n values>
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# min c'x  s.t.  G x + s = h,  s in R+^l x SOC(q_1) x ... \n")
        for key, val in sorted(program.meta.items()):
            fh.write(f"# {key} = {val}\n")
        fh.write(f"dims {program.num_variables} {program.num_rows}\n")
        fh.write(f"nonneg {program.nonneg}\n")
        fh.write("soc " + " ".join(str(q) for q in program.soc) + "\n")
        fh.write("c " + " ".join(repr(float(v)) for v in program.c) + "\n")
        fh.write("h " + " ".join(repr(float(v)) for v in program.h) + "\n")
        fh.write("G\n")
        for row in program.G:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_problem_file(path) -> ConeProgram:
    c = h = None
    rows: list[list[float]] = []
    nonneg, soc = 0, ()
    reading_G = False
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if reading_G:
                rows.append([float(v) for v in line.split()])
                continue
            key, *vals = line.split()
            if key == "nonneg":
                nonneg = int(vals[0])
            elif key == "soc":
                soc = tuple(int(v) for v in vals)
            elif key == "c":
                c = np.array(vals, dtype=float)
            elif key == "h":
                h = np.array(vals, dtype=float)
            elif key == "G":
                reading_G = True
    return ConeProgram(c, np.array(rows, dtype=float).reshape(len(rows), -1), h, nonneg, soc)
