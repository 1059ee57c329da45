"""Switched-system performance contracts.

A control loop closed over an unreliable link alternates between two
linear modes: ``x_{k+1} = A_c x_k + w_k`` when the scheduled packet gets
through and ``x_{k+1} = A_o x_k + w_k`` when it does not. Given a
quadratic function ``V(x) = x' P x`` and a decay target ``rho``, the loop
satisfies the expected one-step contract

    E[V(x_{k+1}) | x_k] <= rho V(x_k) + tr(P W)   for all x_k

exactly when the per-slot delivery probability is at least a threshold
``c`` that depends only on (A_c, A_o, P, rho). This module computes that
threshold and the quantities around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "InfeasibleContractError",
    "SwitchedSystem",
    "PlantControllerPair",
    "assemble_example_loop",
    "max_symmetric_eigenvalue",
    "lmi_slack",
    "compute_success_requirement",
    "expected_lyapunov_next",
    "steady_state_cost_bound",
]


class InfeasibleContractError(ValueError):
    """Raised when no delivery probability can certify the contract."""


def _as_square(value, name):
    """Coerce a scalar or nested sequence to a float square matrix."""
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def _require_symmetric(arr, name, tol=1e-8):
    scale = max(1.0, float(np.max(np.abs(arr))))
    if np.max(np.abs(arr - arr.T)) > tol * scale:
        raise ValueError(f"{name} must be symmetric")


def max_symmetric_eigenvalue(m, tol=1e-12, sym_tol=1e-8):
    """Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    m : array_like
        Symmetric matrix. Symmetry is checked against ``sym_tol`` (scaled
        by the largest entry) and the working copy is symmetrized before
        sweeping.
    tol : float
        Convergence threshold on the Frobenius mass of the off-diagonal
        part, relative to the matrix Frobenius norm.
    sym_tol : float
        Maximum allowed relative asymmetry of the input.

    Returns
    -------
    float
        The largest eigenvalue.
    """
    a = np.atleast_2d(np.asarray(m, dtype=float)).copy()
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    _require_symmetric(a, "matrix", tol=sym_tol)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])

    norm = np.linalg.norm(a)
    if norm == 0.0:
        return 0.0
    stop = tol * norm

    off_part = np.ones_like(a) - np.eye(n)
    for _ in range(60):
        off = float(np.linalg.norm(a * off_part))
        if off <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[p, q])
                if apq == 0.0:
                    continue
                # Classic two-sided rotation zeroing the (p, q) entry;
                # hypot keeps huge diagonal gaps from overflowing.
                theta = (float(a[q, q]) - float(a[p, p])) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.hypot(theta, 1.0)
                )
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = 0.0
                a[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi sweep did not converge in 60 passes")
    return float(np.max(np.diag(a)))


@dataclass(frozen=True)
class SwitchedSystem:
    """One loop's two closed/open dynamics plus its performance contract.

    Parameters
    ----------
    a_closed, a_open : array_like
        Square state matrices for the delivered and dropped modes.
    noise_cov : array_like
        Covariance W of the additive process noise (symmetric PSD).
    lyap_matrix : array_like
        Symmetric positive definite P defining V(x) = x' P x.
    decay_rate : float
        Contract decay rho, strictly inside (0, 1).
    """

    a_closed: np.ndarray
    a_open: np.ndarray
    noise_cov: np.ndarray
    lyap_matrix: np.ndarray
    decay_rate: float

    def __post_init__(self):
        ac = _as_square(self.a_closed, "a_closed")
        ao = _as_square(self.a_open, "a_open")
        w = _as_square(self.noise_cov, "noise_cov")
        p = _as_square(self.lyap_matrix, "lyap_matrix")
        n = ac.shape[0]
        for name, arr in (("a_open", ao), ("noise_cov", w), ("lyap_matrix", p)):
            if arr.shape != (n, n):
                raise ValueError(
                    f"{name} has shape {arr.shape}, expected {(n, n)}"
                )
        _require_symmetric(w, "noise_cov")
        _require_symmetric(p, "lyap_matrix")
        # PD / PSD checks via eigenvalues; scaled floor for the PSD case.
        p_eigs = np.linalg.eigvalsh(p)
        if p_eigs[0] <= 0.0:
            raise ValueError(f"lyap_matrix must be positive definite, min eig {p_eigs[0]:g}")
        w_eigs = np.linalg.eigvalsh(w)
        if w_eigs[0] < -1e-10 * max(1.0, abs(w_eigs[-1])):
            raise ValueError(f"noise_cov must be PSD, min eig {w_eigs[0]:g}")
        rho = float(self.decay_rate)
        if not 0.0 < rho < 1.0:
            raise ValueError(f"decay_rate must lie in (0, 1), got {rho:g}")
        object.__setattr__(self, "a_closed", ac)
        object.__setattr__(self, "a_open", ao)
        object.__setattr__(self, "noise_cov", w)
        object.__setattr__(self, "lyap_matrix", p)
        object.__setattr__(self, "decay_rate", rho)

    @property
    def dim(self):
        return self.a_closed.shape[0]

    def gram_closed(self):
        """A_c' P A_c."""
        return self.a_closed.T @ self.lyap_matrix @ self.a_closed

    def gram_open(self):
        """A_o' P A_o."""
        return self.a_open.T @ self.lyap_matrix @ self.a_open


def lmi_slack(theta, sys):
    """Largest eigenvalue of ``theta Gc + (1-theta) Go - rho P``.

    The mixed one-step contract holds at mixing weight ``theta`` exactly
    when this slack is <= 0. The slack is convex in ``theta``, so its
    nonpositive set on [0, 1] is an interval; admissible closed-loop
    design puts theta = 1 inside it.

    Parameters
    ----------
    theta : float
        Mixing weight in [0, 1].
    sys : SwitchedSystem

    Returns
    -------
    float
    """
    th = float(theta)
    if not 0.0 <= th <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {th:g}")
    pencil = (
        th * sys.gram_closed()
        + (1.0 - th) * sys.gram_open()
        - sys.decay_rate * sys.lyap_matrix
    )
    return max_symmetric_eigenvalue(pencil)


def compute_success_requirement(sys, tol=1e-9):
    """Minimum delivery probability certifying the expected decay contract.

    Bisects the convex slack ``theta -> lmi_slack(theta, sys)`` on [0, 1]
    for its left zero crossing. Feasibility at theta = 1 (the closed loop
    alone satisfies the contract) is required; a system failing it cannot
    be certified at any delivery probability.

    Parameters
    ----------
    sys : SwitchedSystem
    tol : float
        Bisection width at which to stop; the returned value sits on the
        feasible side of the crossing.

    Returns
    -------
    float
        Requirement c in [0, 1]; 0.0 when even the never-delivered mix is
        already contractive.

    Raises
    ------
    InfeasibleContractError
        If the closed-loop admissibility assumption A_c' P A_c <= rho P
        fails, i.e. lmi_slack(1, sys) > 0.
    """
    if lmi_slack(0.0, sys) <= 0.0:
        return 0.0
    slack_closed = lmi_slack(1.0, sys)
    if slack_closed > 0.0:
        raise InfeasibleContractError(
            "closed-loop admissibility fails: A_c' P A_c <= rho P does not "
            f"hold (slack {slack_closed:g}); no delivery probability can "
            "certify the contract"
        )
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if lmi_slack(mid, sys) <= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def expected_lyapunov_next(sys, x, success_prob):
    """E[V(x_{k+1}) | x_k = x] under i.i.d. delivery with the given probability.

    Parameters
    ----------
    sys : SwitchedSystem
    x : array_like
        Current state.
    success_prob : float
        Per-slot delivery probability in [0, 1].

    Returns
    -------
    float
        ``p x'Gc x + (1-p) x'Go x + tr(P W)``.
    """
    p = float(success_prob)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"success_prob must lie in [0, 1], got {p:g}")
    xv = np.asarray(x, dtype=float).reshape(-1)
    if xv.shape[0] != sys.dim:
        raise ValueError(f"state has length {xv.shape[0]}, expected {sys.dim}")
    quad_closed = float(xv @ sys.gram_closed() @ xv)
    quad_open = float(xv @ sys.gram_open() @ xv)
    drift = float(np.trace(sys.lyap_matrix @ sys.noise_cov))
    return p * quad_closed + (1.0 - p) * quad_open + drift


def steady_state_cost_bound(sys):
    """Long-run bound tr(P W) / (1 - rho) implied by the decay contract."""
    return float(np.trace(sys.lyap_matrix @ sys.noise_cov)) / (
        1.0 - sys.decay_rate
    )


@dataclass(frozen=True)
class PlantControllerPair:
    """Plant and output-feedback controller blocks for one loop.

    The plant is ``x+ = A x + B u + w``, ``y = C x + v``; the controller
    state is z with ``z+ = F z + gamma (F_c z + G y)`` and control
    ``u = K z + gamma (K_c z + L y)``, where gamma indicates packet
    delivery from sensor to controller.
    """

    plant_a: np.ndarray
    plant_b: np.ndarray
    plant_c: np.ndarray
    ctrl_f: np.ndarray
    ctrl_fc: np.ndarray
    ctrl_g: np.ndarray
    ctrl_k: np.ndarray
    ctrl_kc: np.ndarray
    ctrl_l: np.ndarray
    process_noise_cov: np.ndarray
    meas_noise_cov: np.ndarray

    def __post_init__(self):
        def as2d(value, name):
            arr = np.atleast_2d(np.asarray(value, dtype=float)).copy()
            if arr.ndim != 2:
                raise ValueError(f"{name} must be 2-D, got {arr.ndim}-D")
            arr.setflags(write=False)
            return arr

        a = as2d(self.plant_a, "plant_a")
        b = as2d(self.plant_b, "plant_b")
        c = as2d(self.plant_c, "plant_c")
        f = as2d(self.ctrl_f, "ctrl_f")
        fc = as2d(self.ctrl_fc, "ctrl_fc")
        g = as2d(self.ctrl_g, "ctrl_g")
        k = as2d(self.ctrl_k, "ctrl_k")
        kc = as2d(self.ctrl_kc, "ctrl_kc")
        ll = as2d(self.ctrl_l, "ctrl_l")
        w = as2d(self.process_noise_cov, "process_noise_cov")
        v = as2d(self.meas_noise_cov, "meas_noise_cov")

        n = a.shape[0]
        nu = b.shape[1]
        p = c.shape[0]
        nz = f.shape[0]
        checks = [
            ("plant_a", a, (n, n)),
            ("plant_b", b, (n, nu)),
            ("plant_c", c, (p, n)),
            ("ctrl_f", f, (nz, nz)),
            ("ctrl_fc", fc, (nz, nz)),
            ("ctrl_g", g, (nz, p)),
            ("ctrl_k", k, (nu, nz)),
            ("ctrl_kc", kc, (nu, nz)),
            ("ctrl_l", ll, (nu, p)),
            ("process_noise_cov", w, (n, n)),
            ("meas_noise_cov", v, (p, p)),
        ]
        for name, arr, shape in checks:
            if arr.shape != shape:
                raise ValueError(
                    f"{name} has shape {arr.shape}, expected {shape}"
                )
        _require_symmetric(w, "process_noise_cov")
        _require_symmetric(v, "meas_noise_cov")
        for name, arr in (("plant_a", a), ("plant_b", b), ("plant_c", c),
                          ("ctrl_f", f), ("ctrl_fc", fc), ("ctrl_g", g),
                          ("ctrl_k", k), ("ctrl_kc", kc), ("ctrl_l", ll),
                          ("process_noise_cov", w), ("meas_noise_cov", v)):
            object.__setattr__(self, name, arr)

    @property
    def state_dim(self):
        return self.plant_a.shape[0]

    @property
    def ctrl_dim(self):
        return self.ctrl_f.shape[0]

    @property
    def output_dim(self):
        return self.plant_c.shape[0]


def assemble_example_loop(pc, lyap_matrix, decay_rate, noise_mode="closed"):
    """Stack a plant/controller pair into one switched aggregate loop.

    The aggregate state is (x, z). Packet delivery activates the
    controller's receive path, so delivered slots evolve by

        [[A + B L C, B K + B Kc], [G C, F + Fc]]

    and dropped slots by ``[[A, B K], [0, F]]``. The noise entering the
    aggregate is M_mode (w, v) with ``M_closed = [[I, B L], [0, G]]`` and
    ``M_open = [[I, 0], [0, 0]]``.

    Parameters
    ----------
    pc : PlantControllerPair
    lyap_matrix : array_like
        P for the aggregate state, symmetric positive definite.
    decay_rate : float
        Contract decay in (0, 1).
    noise_mode : {"closed", "worst"}
        Which mode's effective noise covariance the SwitchedSystem stores.
        "closed" keeps the delivered-mode covariance (the only mode that
        injects measurement noise); "worst" keeps whichever mode maximizes
        tr(P W_eff), the term entering the steady-state bound.

    Returns
    -------
    (SwitchedSystem, ndarray, ndarray)
        The aggregate system plus the closed- and open-mode noise-input
        matrices, each (n+nz) by (n+p).
    """
    if noise_mode not in ("closed", "worst"):
        raise ValueError(f"noise_mode must be 'closed' or 'worst', got {noise_mode!r}")
    a, b, c = pc.plant_a, pc.plant_b, pc.plant_c
    f, fc, g = pc.ctrl_f, pc.ctrl_fc, pc.ctrl_g
    k, kc, ll = pc.ctrl_k, pc.ctrl_kc, pc.ctrl_l
    n, nz, p = pc.state_dim, pc.ctrl_dim, pc.output_dim

    a_closed = np.block([[a + b @ ll @ c, b @ (k + kc)], [g @ c, f + fc]])
    a_open = np.block([[a, b @ k], [np.zeros((nz, n)), f]])

    m_closed = np.block(
        [[np.eye(n), b @ ll], [np.zeros((nz, n)), g]]
    )
    m_open = np.block(
        [[np.eye(n), np.zeros((n, p))], [np.zeros((nz, n + p))]]
    )

    noise_joint = np.block(
        [
            [pc.process_noise_cov, np.zeros((n, p))],
            [np.zeros((p, n)), pc.meas_noise_cov],
        ]
    )
    w_closed = m_closed @ noise_joint @ m_closed.T
    w_open = m_open @ noise_joint @ m_open.T

    p_mat = _as_square(lyap_matrix, "lyap_matrix")
    if p_mat.shape != a_closed.shape:
        raise ValueError(
            f"lyap_matrix has shape {p_mat.shape}, expected {a_closed.shape}"
        )
    if noise_mode == "closed":
        w_eff = w_closed
    else:
        tr_closed = float(np.trace(p_mat @ w_closed))
        tr_open = float(np.trace(p_mat @ w_open))
        w_eff = w_closed if tr_closed >= tr_open else w_open
    # Symmetrize against accumulation error before validation.
    w_eff = 0.5 * (w_eff + w_eff.T)

    system = SwitchedSystem(
        a_closed=a_closed,
        a_open=a_open,
        noise_cov=w_eff,
        lyap_matrix=p_mat,
        decay_rate=decay_rate,
    )
    return system, m_closed, m_open
