"""Junction management policies: periodic lights, local and global feedback.

Every policy answers one question per junction per step: which of the two
incoming approaches is green.  The priority-to-the-right rule is the absence
of a policy (gate None).  The global feedback solves a discrete-time LQR
around a nominal operating point: roads are car inventories, the control is
the per-road outflow during green, and the interconnection matrix routes
half of each road's outflow to each of its junction's exits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analytic import flow_approx
from .topology import NetworkTopology, ratio_r

FLOW_CAP = 0.25  # a capacity-1 junction approach cannot exceed this


@dataclass(frozen=True)
class OpenLoopPlan:
    """Fixed-cycle light plan; priority-labelled approach is green first."""

    cycle: int = 4
    green_first: int = 2
    offset: int = 0  # common phase shift, or per-junction via offsets
    offsets: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.cycle < 2:
            raise ValueError("cycle must be >= 2")
        if not 1 <= self.green_first <= self.cycle - 1:
            raise ValueError("green_first must lie in [1, cycle-1]")


def open_loop_green(plan: OpenLoopPlan, junction: int, k: int) -> bool:
    """True when the priority-labelled approach is green at step k."""
    if k < 0:
        raise ValueError("k must be >= 0")
    offset = plan.offsets[junction] if plan.offsets else plan.offset
    return (k + offset) % plan.cycle < plan.green_first


@dataclass(frozen=True)
class LocalFeedbackInputs:
    n1: int
    n2: int
    z1: int
    z2: int
    b1: int
    b2: int

    def __post_init__(self):
        if not (0 <= self.z1 <= self.n1 and 0 <= self.z2 <= self.n2):
            raise ValueError("vehicle counts exceed road sizes")
        if self.b1 not in (0, 1) or self.b2 not in (0, 1):
            raise ValueError("poised flags must be 0 or 1")


def local_feedback_green(inputs: LocalFeedbackInputs) -> bool:
    """True when road 1 gets green: n2*b1 + z1 >= n1*b2 + z2.

    Grants green to the single approach with a vehicle poised to enter, and
    otherwise to the relatively more crowded road; ties go to road 1.
    """
    return (inputs.n2 * inputs.b1 + inputs.z1
            >= inputs.n1 * inputs.b2 + inputs.z2)


@dataclass
class LQModel:
    """Road-inventory model x+ = x + B(u - ubar) linearized at (xbar, ubar)."""

    topology: NetworkTopology
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    xbar: np.ndarray
    ubar: np.ndarray
    cycle: int = 4
    gain: np.ndarray | None = None


def build_lq_model(t: NetworkTopology, d: float, q_scale: float = 1.0,
                   r_scale: float = 10.0, cycle: int = 4) -> LQModel:
    """Interconnection, weights and nominal point for a network at density d.

    Column i of B sends road i's outflow half-and-half to the two exits of
    its destination junction and removes it from road i, so columns sum to
    zero (cars are conserved).  Nominal inventories put density d on every
    road; the nominal flow is the analytic approximation at d.
    """
    n = len(t.roads)
    B = np.zeros((n, n))
    for road in t.roads:
        j = t.junctions[road.to_junction]
        B[road.id, road.id] -= 1.0
        B[j.out_ceil, road.id] += 0.5
        B[j.out_floor, road.id] += 0.5
    lengths = np.array([r.length_cells for r in t.roads], dtype=float)
    capacity = t.junctions[0].capacity
    ubar_value = flow_approx(d, ratio_r(t), capacity)
    return LQModel(
        topology=t,
        B=B,
        Q=q_scale * np.eye(n),
        R=r_scale * np.eye(n),
        xbar=d * lengths,
        ubar=np.full(n, ubar_value),
        cycle=cycle,
    )


class RiccatiError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} "
                         f"after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class LQRSolution:
    gain: np.ndarray        # full-space feedback: u = ubar - gain @ (x - xbar)
    P: np.ndarray           # Riccati fixed point on the solved subspace
    residual: float
    iterations: int
    spectral_radius: float  # closed loop on the solved subspace


def _mass_projection(B: np.ndarray) -> np.ndarray | None:
    """Orthonormal basis of the complement of an uncontrollable 1 direction."""
    n = B.shape[0]
    ones = np.ones(n)
    if n > 1 and np.allclose(ones @ B, 0.0, atol=1e-12):
        q, _ = np.linalg.qr(np.column_stack([ones, np.eye(n)]))
        return q[:, 1:n]
    return None


def solve_lqr(model: LQModel, tol: float = 1e-10,
              max_iter: int = 20000) -> LQRSolution:
    """Fixed-point iteration for the discrete Riccati equation with A = I.

    When the columns of B sum to zero the total-inventory direction cannot
    be moved by any control, so it is projected out before iterating; the
    returned gain acts on full-space deviations.  Raises RiccatiError if the
    residual does not reach tol within max_iter sweeps.
    """
    eigs = np.linalg.eigvalsh(model.R)
    if eigs.min() <= 0:
        raise ValueError("R must be positive definite")
    V = _mass_projection(model.B)
    if V is not None:
        B = V.T @ model.B
        Q = V.T @ model.Q @ V
    else:
        B = model.B
        Q = model.Q
    R = model.R
    P = Q.copy()

    def riccati_map(P):
        inner = np.linalg.solve(R + B.T @ P @ B, B.T @ P)
        return Q + P - P @ B @ inner

    residual = np.inf
    for iteration in range(1, max_iter + 1):
        P_next = riccati_map(P)
        P_next = 0.5 * (P_next + P_next.T)
        residual = float(np.max(np.abs(P_next - P)))
        P = P_next
        if residual <= tol:
            break
    else:
        raise RiccatiError("Riccati iteration did not converge",
                           residual, max_iter)
    gain_sub = np.linalg.solve(R + B.T @ P @ B, B.T @ P)
    closed = np.eye(P.shape[0]) - B @ gain_sub
    radius = float(np.max(np.abs(np.linalg.eigvals(closed))))
    gain = gain_sub @ V.T if V is not None else gain_sub
    model.gain = gain
    return LQRSolution(gain=gain, P=P, residual=residual,
                       iterations=iteration, spectral_radius=radius)


def global_feedback_timing(model: LQModel, inventories: np.ndarray,
                           k: int = 0) -> np.ndarray:
    """Green slots per cycle for each junction's priority approach.

    The LQ control u = ubar - gain (x - xbar) is clipped to [0, 1/4] per
    road and turned into per-cycle green slots proportionally, with at
    least one slot per approach.
    """
    if model.gain is None:
        raise ValueError("solve_lqr first")
    u = model.ubar - model.gain @ (np.asarray(inventories, float) - model.xbar)
    u = np.clip(u, 0.0, FLOW_CAP)
    slots = np.empty(len(model.topology.junctions), dtype=np.int64)
    for j in model.topology.junctions:
        u_pr, u_np = u[j.in_priority], u[j.in_nonpriority]
        total = u_pr + u_np
        if total <= 0:
            share = model.cycle / 2
        else:
            share = model.cycle * u_pr / total
        slots[j.id] = min(max(int(round(share)), 1), model.cycle - 1)
    return slots


class OpenLoopPolicy:
    """Gate adapter for a periodic plan (same plan at every junction)."""

    def __init__(self, plan: OpenLoopPlan | None = None):
        self.plan = plan or OpenLoopPlan()
        self.policy_id = "open_loop"
        self._greens_by_phase: np.ndarray | None = None

    def reset(self, sim):
        t = sim.topology
        self._greens_by_phase = np.array(
            [[open_loop_green(self.plan, j.id, k) for j in t.junctions]
             for k in range(self.plan.cycle)])

    def greens(self, k: int, sim) -> np.ndarray:
        return self._greens_by_phase[k % self.plan.cycle]

    def phase_key(self, k: int):
        return k % self.plan.cycle


class LocalFeedbackPolicy:
    """Per-junction comparison of crowding and poised vehicles, every step."""

    policy_id = "local_feedback"

    def reset(self, sim):
        t = sim.topology
        self._npr = np.array([t.roads[j.in_priority].length_cells
                              for j in t.junctions])
        self._nnp = np.array([t.roads[j.in_nonpriority].length_cells
                              for j in t.junctions])
        self._pr = np.array([j.in_priority for j in t.junctions])
        self._np = np.array([j.in_nonpriority for j in t.junctions])

    def greens(self, k: int, sim) -> np.ndarray:
        z = sim.road_counts()
        b = sim.poised()
        lhs = self._nnp * b[self._pr] + z[self._pr]
        rhs = self._npr * b[self._np] + z[self._np]
        return lhs >= rhs

    def phase_key(self, k: int):
        return ()


class GlobalFeedbackPolicy:
    """LQ feedback quantized into green slots, refreshed each cycle."""

    def __init__(self, model: LQModel):
        if model.gain is None:
            raise ValueError("solve_lqr first")
        self.model = model
        self.policy_id = "global_feedback"
        self._slots: np.ndarray | None = None

    def reset(self, sim):
        self._slots = global_feedback_timing(self.model, sim.road_counts())

    def greens(self, k: int, sim) -> np.ndarray:
        phase = k % self.model.cycle
        if phase == 0:
            self._slots = global_feedback_timing(self.model,
                                                 sim.road_counts(), k)
        return phase < self._slots

    def phase_key(self, k: int):
        return (k % self.model.cycle, tuple(int(s) for s in self._slots))
