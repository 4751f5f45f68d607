"""Centralized CB-ITC optimum for any number of serving BSs.

The reduced amplitude problem is made convex by introducing the noise-plus-
residual slack ``b``, dividing every amplitude by it and maximizing the
(now linear) square root of the SINR. Before building the program the
instance is made dimensionless: amplitudes become ``x = v / sqrt(P)`` and
channel gains ``g = |f| sqrt(P) / sigma``, so the per-BS budget is 1 and the
noise is 1.

Variable order: ``[x_u (N), x_1 (N), ..., x_K (N), t]`` where ``t`` is the
inverse slack. Cones, in order: the nonnegative orthant over all variables,
one unit-radius cone on the noise-plus-residual vector, and one cone per
serving BS bounding its amplitudes by ``t``.
"""
from __future__ import annotations

import math

import numpy as np

from .beamforming import PowerAllocation, closed_form_n1_k_many, sinr_conventional_cb
from .conic import ConeProgram, ConeSolution, Status, solve
from .errors import DegenerateSolutionError, InvalidArgumentError, NoServerError

DEFAULT_TOL = 1e-8
MAX_ITER = 200


def build_p2_program(available_amps, occupied_amps, P: float, noise: float) -> ConeProgram:
    """Second-order cone program whose optimum ``t`` satisfies ``t**2 = max SINR``."""
    h = np.abs(np.asarray(available_amps, dtype=float).reshape(-1))
    f = np.abs(np.asarray(occupied_amps, dtype=float).reshape(-1))
    N, K = h.size, f.size
    if N == 0:
        raise NoServerError("no available BS can serve the UAV")
    if not noise > 0 or not P > 0:
        raise InvalidArgumentError("need P > 0 and noise > 0")
    scale = math.sqrt(P / noise)
    g = h * scale
    gj = f * scale

    n = N * (K + 1) + 1
    tcol = n - 1

    def xcol(block, i):  # block 0 = UAV, block k+1 = k-th occupied BS
        return block * N + i

    c = np.zeros(n)
    c[:N] = -g

    rows_G, rows_h = [], []
    # orthant: -x <= 0
    rows_G.append(-np.eye(n))
    rows_h.append(np.zeros(n))
    # unit cone: (1, [gj_k t - g'x_k]_k, t)
    Gu = np.zeros((K + 2, n))
    hu = np.zeros(K + 2)
    hu[0] = 1.0
    for k in range(K):
        Gu[1 + k, xcol(k + 1, 0): xcol(k + 1, 0) + N] = g
        Gu[1 + k, tcol] = -gj[k]
    Gu[K + 1, tcol] = -1.0
    rows_G.append(Gu)
    rows_h.append(hu)
    # per-BS cones: (t, [x_k[i]]_k, x_u[i])
    for i in range(N):
        Gi = np.zeros((K + 2, n))
        Gi[0, tcol] = -1.0
        for k in range(K):
            Gi[1 + k, xcol(k + 1, i)] = -1.0
        Gi[K + 1, xcol(0, i)] = -1.0
        rows_G.append(Gi)
        rows_h.append(np.zeros(K + 2))

    G = np.vstack(rows_G)
    hv = np.concatenate(rows_h)

    # strictly feasible start: small equal amplitudes, t inside the unit cone
    gmax = np.maximum(gj, 1.0)
    t0 = 0.5 / math.sqrt(1.0 + float(gmax @ gmax))
    eps = t0 * min(1.0 / (4.0 * math.sqrt(K + 1)), 1.0 / max(float(g.sum()), 1e-300))
    x0 = np.full(n, eps)
    x0[tcol] = t0
    program = ConeProgram(c, G, hv, nonneg=n, soc=(K + 2,) * (N + 1), x0=x0,
                          meta={"N": N, "K": K, "P": float(P), "noise": float(noise),
                                "available_amps": h.tolist(), "occupied_amps": f.tolist()})
    slack = hv - G @ x0
    lo = min(np.min(slack[:n]), *(slack[sl][0] - np.linalg.norm(slack[sl][1:])
                                   for sl in program.cone_slices()))
    assert lo > 0, "constructed starting point is not strictly feasible"
    return program


def solve_p2(program: ConeProgram, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> ConeSolution:
    """Solve a program from :func:`build_p2_program`; the objective is reported as ``+t``."""
    sol = solve(program, tol=tol, max_iter=max_iter)
    sol.primal_objective = -sol.primal_objective
    sol.dual_objective = -sol.dual_objective
    return sol


def recover_allocation(solution: ConeSolution, program: ConeProgram,
                       tol: float = 1e-12) -> PowerAllocation:
    """Undo the slack transform and normalization: ``v = sqrt(P) * x / t``."""
    if solution.status != Status.OPTIMAL:
        raise DegenerateSolutionError(f"solution status is {solution.status}")
    N, K, P = program.meta["N"], program.meta["K"], program.meta["P"]
    x = solution.x
    t = x[-1]
    if t <= tol:
        raise DegenerateSolutionError(f"inverse slack {t} is not positive")
    amps = np.clip(x[:-1], 0.0, None).reshape(K + 1, N) / t
    # interior iterates can sit a hair outside the budget; pull them back in
    power = np.sum(amps ** 2, axis=0)
    over = power > 1.0
    if np.any(over):
        amps[:, over] /= np.sqrt(power[over])
    v = math.sqrt(P) * amps
    return PowerAllocation(v[0], v[1:], P)


def centralized_optimum(available_amps, occupied_amps, P: float, noise: float,
                        tol: float = DEFAULT_TOL) -> tuple[PowerAllocation, float, ConeSolution | None]:
    """Optimal amplitudes and SINR, using closed forms where they exist.

    One serving BS uses the single-server closed form; no occupied BSs reduce
    to conventional CB at full power. Everything else goes through the cone
    program. Returns ``(allocation, sinr, cone_solution_or_None)``.
    """
    h = np.abs(np.asarray(available_amps, dtype=float).reshape(-1))
    f = np.abs(np.asarray(occupied_amps, dtype=float).reshape(-1))
    if h.size == 0:
        raise NoServerError("no available BS can serve the UAV")
    if f.size == 0:
        alloc = PowerAllocation(np.full(h.size, math.sqrt(P)), np.zeros((0, h.size)), P)
        return alloc, sinr_conventional_cb(h, f ** 2, P, noise), None
    if h.size == 1 and h[0] > 0:
        sol = closed_form_n1_k_many(h[0], f, P, noise)
        alloc = PowerAllocation([sol.v_u], sol.v_j.reshape(-1, 1), P)
        return alloc, sol.eta, None
    program = build_p2_program(h, f, P, noise)
    sol = solve_p2(program, tol=tol)
    if sol.status != Status.OPTIMAL:
        raise DegenerateSolutionError(f"cone solver finished with status {sol.status}")
    alloc = recover_allocation(sol, program)
    return alloc, sol.objective_value ** 2, sol
