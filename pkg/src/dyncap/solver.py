r"""Fourier/Duhamel solver for ``∂t u + div f_ε(x,u) = εΔu + δ∂tΔu``.

Per Fourier mode the equation is the linear ODE

    (1 + δ|ξ|²) ∂t û = -ε|ξ|² û - iξ·f̂(u),

so with ``a = ε|ξ|²/(1+δ|ξ|²)`` and ``g = iξ·f̂/(1+δ|ξ|²)`` the variation of
constants formula reads

    û(t) = e^{-a(t-t_a)} û(t_a) - ∫_{t_a}^t e^{-a(t-s)} g(s) ds.

The nonlinearity enters only through ``g``.  On a time slab we collocate at
Gauss–Legendre nodes, interpolate ``g`` by the Lagrange polynomial through the
nodes and integrate the exponential exactly (:func:`exponential_weights`).  The
resulting fixed-point map is iterated Picard-style from the constant-in-time
extension of the slab's initial state.  Slabs are subdivided until a
contraction estimate is comfortably below one, and bisected further when an
iteration fails to contract.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import binom, gammainc

from .errors import NoConvergence, UnstableMode, WindowEscape
from .flux import MollifiedFlux
from .grid import Grid, RealField, l2_norm, l2_norm_gradient

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "SlabRecord",
    "Trajectory",
    "exponential_weights",
    "duhamel_linear_solve",
    "picard_solve_slab",
    "solve",
    "stability_diagnostic",
    "StabilityReport",
]

MAX_BISECTIONS = 6
CONTRACTION_TARGET = 0.25


@dataclass(frozen=True)
class SolverConfig:
    eps: float
    delta: float = 0.0
    slab_dt: float = 1e-2
    picard_tol: float = 1e-10
    picard_max_iter: int = 60
    quadrature_substeps: int = 4

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if not self.slab_dt > 0:
            raise ValueError(f"slab_dt must be positive, got {self.slab_dt}")
        if not self.picard_tol > 0:
            raise ValueError(f"picard_tol must be positive, got {self.picard_tol}")
        if self.quadrature_substeps < 1 or self.picard_max_iter < 1:
            raise ValueError("quadrature_substeps and picard_max_iter must be at least 1")


# exponential quadrature --------------------------------------------------------


def _I(q: int, w: np.ndarray) -> np.ndarray:
    """``∫_0^1 e^{-w r} r^q dr`` for ``w >= 0``."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    small = w < 1.0
    ws = w[small]
    acc = np.zeros_like(ws)
    term = np.ones_like(ws)
    for k in range(25):
        acc += term / (q + k + 1)
        term = term * (-ws) / (k + 1)
    out[small] = acc
    wl = w[~small]
    out[~small] = math.factorial(q) * gammainc(q + 1, wl) / wl ** (q + 1)
    return out


def _lagrange_monomials(nodes: np.ndarray) -> np.ndarray:
    """``C[m, p]`` with ``ℓ_m(σ) = Σ_p C[m,p] σ^p``."""
    V = np.vander(nodes, increasing=True)  # V[i, p] = σ_i^p
    return np.linalg.inv(V).T


def exponential_weights(z, taus, nodes):
    """Exact integrals of the exponential against interpolating polynomials.

    For each mode value ``z = aΔt`` and evaluation point ``τ`` returns

    * ``E[j] = e^{-z τ_j}``
    * ``W[j, m] = ∫_0^{τ_j} e^{-z(τ_j - σ)} ℓ_m(σ) dσ``

    where ``ℓ_m`` are the Lagrange basis polynomials on ``nodes``.  Shapes are
    ``z.shape + (J,)`` and ``z.shape + (J, Q)``.
    """
    z = np.asarray(z, dtype=float)
    taus = np.asarray(taus, dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    Q = nodes.size
    C = _lagrange_monomials(nodes)
    E = np.exp(-z[..., None] * taus)
    W = np.zeros(z.shape + (taus.size, Q))
    for j, tau in enumerate(taus):
        w = z * tau
        I = [_I(q, w) for q in range(Q)]
        # J_p = ∫_0^τ e^{-z(τ-σ)} σ^p dσ = τ^{p+1} Σ_q C(p,q)(-1)^q I_q(zτ)
        Jp = []
        for p in range(Q):
            s = sum(binom(p, q) * (-1) ** q * I[q] for q in range(p + 1))
            Jp.append(tau ** (p + 1) * s)
        Jp = np.stack(Jp, axis=-1)  # (..., Q) over p
        W[..., j, :] = Jp @ C.T
    return E, W


# spectral plumbing ------------------------------------------------------------


class _Operator:
    """Mode-wise data for one grid, one config and one flux."""

    def __init__(self, grid: Grid, cfg: SolverConfig, flux: MollifiedFlux):
        self.grid = grid
        self.cfg = cfg
        self.flux = flux
        self.gflux = flux.on_grid(grid)
        self.xi = grid.rwavenumbers()
        xi2 = sum(x**2 for x in self.xi)
        self.xi2 = xi2
        self.denom = 1.0 + cfg.delta * xi2
        self.a = cfg.eps * xi2 / self.denom
        self.mask = grid.rdealias_mask()
        self.sym = [np.where(self.mask, 1j * x / self.denom, 0.0) for x in self.xi]
        nodes, wts = np.polynomial.legendre.leggauss(cfg.quadrature_substeps)
        self.sigma = 0.5 * (nodes + 1.0)
        self.gw = 0.5 * wts
        self.taus = np.append(self.sigma, 1.0)
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        # Plancherel weights for the half spectrum
        w = np.full(self.a.shape, 2.0)
        w[..., 0] = 1.0
        if grid.N % 2 == 0:
            w[..., -1] = 1.0
        self.pw = w * grid.cell_volume / grid.N**grid.dim
        self.lam_lo, self.lam_hi = flux.lambda_window

    def weights(self, dt: float):
        key = float(dt)
        if key not in self._cache:
            if len(self._cache) > 32:
                self._cache.clear()
            E, W = exponential_weights(self.a * dt, self.taus, self.sigma)
            self._cache[key] = (np.moveaxis(E, -1, 0), np.moveaxis(W, (-2, -1), (0, 1)) * dt)
        return self._cache[key]

    def to_phys(self, U):
        return np.fft.irfftn(U, s=self.grid.shape, axes=tuple(range(self.grid.dim)))

    def to_spec(self, u):
        return np.fft.rfftn(u)

    def g(self, u):
        """``iξ·f̂(u)/(1+δ|ξ|²)`` with the 2/3 rule applied."""
        F = self.gflux.values(u)
        out = 0.0
        for i, s in enumerate(self.sym):
            out = out + s * np.fft.rfftn(F[i])
        return out

    def dt_spec(self, U, G):
        return -self.a * U - G

    def norm(self, U):
        return float(np.sqrt(np.sum(self.pw * np.abs(U) ** 2)))

    def contraction_estimate(self, dt: float) -> float:
        a = self.a[self.mask]
        xi = np.sqrt(self.xi2[self.mask]) / self.denom[self.mask]
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(a * dt > 1e-12, -np.expm1(-a * dt) / np.where(a > 0, a, 1.0), dt)
        return float(self.flux.dlambda_sup * np.max(xi * factor))


# slabs --------------------------------------------------------------------------


@dataclass(frozen=True)
class SlabRecord:
    t_start: float
    dt: float
    iterations: int
    residual: float
    bisections: int
    contraction_estimate: float
    ratios: tuple[float, ...] = ()


@dataclass
class _SlabResult:
    end: np.ndarray
    node_u: list
    node_ut: list
    node_t: list
    node_w: list
    records: list


def duhamel_linear_solve(v, u0: RealField, cfg: SolverConfig, slab, flux: MollifiedFlux):
    """Apply the Duhamel map once: the fixed-point operator ``𝒯``.

    ``v`` holds the frozen iterate at the Gauss nodes of ``slab`` (a sequence of
    ``quadrature_substeps`` fields or arrays; a trailing endpoint value is
    ignored).  Returns the new iterate at the same nodes followed by the slab
    end state, as :class:`RealField` objects.
    """
    op = _Operator(u0.grid, cfg, flux)
    ta, tb = slab
    E, W = op.weights(tb - ta)
    vals = [np.asarray(getattr(x, "values", x), dtype=float) for x in v][: cfg.quadrature_substeps]
    G = [op.g(x) for x in vals]
    Ua = op.to_spec(u0.values)
    out = []
    for j in range(len(op.taus)):
        Uj = E[j] * Ua - sum(W[j, m] * G[m] for m in range(len(G)))
        out.append(RealField(u0.grid, op.to_phys(Uj)))
    return out


def _picard(op: _Operator, Ua: np.ndarray, dt: float, scale: float):
    """Picard iteration on one slab; returns None when it fails to contract."""
    cfg = op.cfg
    E, W = op.weights(dt)
    Q = cfg.quadrature_substeps
    V = [Ua] * Q
    v_phys = [op.to_phys(Ua)] * Q
    prev = math.inf
    ratios = []
    residual = math.inf
    for it in range(1, cfg.picard_max_iter + 1):
        G = [op.g(x) for x in v_phys]
        U = [E[j] * Ua - sum(W[j, m] * G[m] for m in range(Q)) for j in range(Q + 1)]
        peak = max(float(np.max(np.abs(x))) for x in U)
        if not np.isfinite(peak) or peak > 1e8 * scale:
            raise UnstableMode(f"mode amplitude {peak:.3e} exceeds 1e8 x initial scale {scale:.3e}")
        residual = max(op.norm(U[j] - V[j]) for j in range(Q))
        if it > 1 and prev > 0:
            ratios.append(residual / prev)
        if residual <= cfg.picard_tol:
            V = U
            break
        if it >= 2 and residual > prev:
            return None
        prev = residual
        V = U[:Q] + [U[Q]]
        v_phys = [op.to_phys(x) for x in U[:Q]]
    else:
        return None
    v_phys = [op.to_phys(x) for x in V[:Q]]
    G = [op.g(x) for x in v_phys]
    ut = [op.to_phys(op.dt_spec(V[m], G[m])) for m in range(Q)]
    return V[Q], v_phys, ut, it, residual, tuple(ratios)


def _advance(op: _Operator, Ua, ta: float, dt: float, scale: float, depth: int = 0) -> _SlabResult:
    est = op.contraction_estimate(dt)
    res = _picard(op, Ua, dt, scale)
    if res is None:
        if depth >= MAX_BISECTIONS:
            raise NoConvergence(
                f"Picard iteration failed on slab [{ta:.6g}, {ta + dt:.6g}] after {MAX_BISECTIONS} bisections"
            )
        log.debug("bisecting slab at t=%g, dt=%g", ta, dt)
        first = _advance(op, Ua, ta, dt / 2, scale, depth + 1)
        second = _advance(op, first.end, ta + dt / 2, dt / 2, scale, depth + 1)
        return _SlabResult(
            second.end,
            first.node_u + second.node_u,
            first.node_ut + second.node_ut,
            first.node_t + second.node_t,
            first.node_w + second.node_w,
            first.records + second.records,
        )
    end, v_phys, ut, it, residual, ratios = res
    rec = SlabRecord(ta, dt, it, residual, depth, est, ratios)
    return _SlabResult(
        end,
        v_phys,
        ut,
        [ta + s * dt for s in op.sigma],
        [w * dt for w in op.gw],
        [rec],
    )


def _substeps(op: _Operator, dt: float) -> int:
    m = 1
    while op.contraction_estimate(dt / m) > CONTRACTION_TARGET:
        m *= 2
        if m > 2**20:
            raise NoConvergence("contraction estimate cannot be met; flux derivative too large")
    return m


def picard_solve_slab(u_a: RealField, cfg: SolverConfig, flux: MollifiedFlux, slab):
    """Advance ``u_a`` across ``slab = (t_a, t_b)``.

    Returns the end state and the list of :class:`SlabRecord` diagnostics (one
    per accepted sub-slab).
    """
    op = _Operator(u_a.grid, cfg, flux)
    ta, tb = slab
    Ua = op.to_spec(u_a.values)
    scale = max(float(np.max(np.abs(Ua))), float(u_a.grid.N**u_a.grid.dim))
    m = _substeps(op, tb - ta)
    dt = (tb - ta) / m
    records = []
    for k in range(m):
        r = _advance(op, Ua, ta + k * dt, dt, scale)
        Ua = r.end
        records.extend(r.records)
    return RealField(u_a.grid, op.to_phys(Ua)), records


# trajectories -------------------------------------------------------------------


@dataclass
class Trajectory:
    """States at slab boundaries plus Gauss-node data for time integrals.

    ``node_t``/``node_w`` are the interior quadrature nodes and weights of every
    accepted sub-slab; ``node_u`` and ``node_ut`` hold ``u`` and ``∂t u`` there,
    so ``Σ_k node_w[k] φ(node_u[k])`` approximates ``∫_0^T φ(u) dt`` to the
    order of the collocation scheme.
    """

    grid: Grid
    times: np.ndarray
    states: list
    dt_states: list | None
    flux: MollifiedFlux
    config: SolverConfig
    diagnostics: list = field(default_factory=list)
    node_t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    node_w: np.ndarray = field(default_factory=lambda: np.zeros(0))
    node_u: np.ndarray | None = None
    node_ut: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def u0(self) -> RealField:
        return self.states[0]

    @property
    def final(self) -> RealField:
        return self.states[-1]

    def has_time_derivative(self) -> bool:
        return self.dt_states is not None and self.node_ut is not None

    def nodes_until(self, t: float) -> int:
        """Number of quadrature nodes lying in ``[0, t]``."""
        return int(np.searchsorted(self.node_t, t, side="right"))

    def picard_stats(self) -> dict:
        its = [r.iterations for r in self.diagnostics]
        return {
            "subslabs": len(its),
            "iterations_total": int(sum(its)),
            "iterations_max": int(max(its, default=0)),
            "residual_max": float(max((r.residual for r in self.diagnostics), default=0.0)),
            "bisections_max": int(max((r.bisections for r in self.diagnostics), default=0)),
        }


def _time_derivative(op: _Operator, u: np.ndarray) -> np.ndarray:
    U = op.to_spec(u)
    return op.to_phys(op.dt_spec(U, op.g(u)))


def solve(u0: RealField, T_final: float, cfg: SolverConfig, flux: MollifiedFlux) -> Trajectory:
    """March from ``u0`` to ``T_final`` and record the trajectory.

    States are recorded at every multiple of ``cfg.slab_dt`` and at ``T_final``.
    """
    if T_final < 0:
        raise ValueError("T_final must be nonnegative")
    grid = u0.grid
    op = _Operator(grid, cfg, flux)
    lo, hi = op.lam_lo, op.lam_hi

    def check_window(u, t):
        umin, umax = float(np.min(u)), float(np.max(u))
        if umin < lo or umax > hi:
            raise WindowEscape(f"solution range [{umin:.4g}, {umax:.4g}] left the window [{lo}, {hi}] at t={t:.4g}")

    check_window(u0.values, 0.0)
    Ua = op.to_spec(u0.values)
    scale = max(float(np.max(np.abs(Ua))), float(grid.N**grid.dim))
    times = [0.0]
    states = [u0]
    dts = [RealField(grid, _time_derivative(op, u0.values))]
    node_t, node_w, node_u, node_ut, diags = [], [], [], [], []
    nslabs = int(math.floor(T_final / cfg.slab_dt + 1e-9))
    edges = [k * cfg.slab_dt for k in range(nslabs + 1)]
    if T_final - edges[-1] > 1e-12 * max(1.0, T_final):
        edges.append(T_final)
    m_full = _substeps(op, cfg.slab_dt) if len(edges) > 1 else 1
    for ta, tb in zip(edges[:-1], edges[1:]):
        width = tb - ta
        m = m_full if abs(width - cfg.slab_dt) < 1e-12 else _substeps(op, width)
        dt = width / m
        for k in range(m):
            r = _advance(op, Ua, ta + k * dt, dt, scale)
            Ua = r.end
            node_t += r.node_t
            node_w += r.node_w
            node_u += r.node_u
            node_ut += r.node_ut
            diags += r.records
        u = op.to_phys(Ua)
        check_window(u, tb)
        times.append(tb)
        states.append(RealField(grid, u))
        dts.append(RealField(grid, _time_derivative(op, u)))
    shape = (0,) + grid.shape
    return Trajectory(
        grid=grid,
        times=np.array(times),
        states=states,
        dt_states=dts,
        flux=flux,
        config=cfg,
        diagnostics=diags,
        node_t=np.array(node_t),
        node_w=np.array(node_w),
        node_u=np.array(node_u) if node_u else np.zeros(shape),
        node_ut=np.array(node_ut) if node_ut else np.zeros(shape),
    )


# diagnostics --------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    grad_sup: float
    grad_l2_time: float
    dt_l2_time: float
    grad_bound: float
    bound_holds: bool
    grad_nonincreasing: bool
    dt_fd_mismatch: float


def stability_diagnostic(traj: Trajectory) -> StabilityReport:
    """H¹-level diagnostics of a trajectory.

    ``grad_bound`` is ``‖∇u₀‖ + T e^T sup_t ‖f_ε(·,u(t))‖`` and is compared
    with the space-time norm ``‖∇u‖_{L²([0,T]×box)}``.  ``dt_fd_mismatch`` is
    the relative L² gap between the recorded ``∂t u`` and centred differences
    of consecutive states.
    """
    grid = traj.grid
    grads = np.array([l2_norm_gradient(s) for s in traj.states])
    grad_sup = float(grads.max())
    if traj.node_u is not None and len(traj.node_t):
        gn = np.array([l2_norm_gradient(RealField(grid, u)) for u in traj.node_u])
        grad_l2 = float(np.sqrt(np.sum(traj.node_w * gn**2)))
        dtn = np.array([l2_norm(RealField(grid, ut)) for ut in traj.node_ut])
        dt_l2 = float(np.sqrt(np.sum(traj.node_w * dtn**2)))
    else:
        grad_l2 = dt_l2 = 0.0
    gf = traj.flux.on_grid(grid)
    fsup = 0.0
    for s in traj.states:
        F = gf.values(s.values)
        fsup = max(fsup, float(np.sqrt(np.sum(F**2) * grid.cell_volume)))
    T = traj.T
    bound = grads[0] + T * math.exp(T) * fsup
    nonincr = bool(np.all(np.diff(grads) <= 1e-12 * max(1.0, grads[0])))
    mismatch = 0.0
    if traj.dt_states is not None and len(traj.times) >= 3:
        num = den = 0.0
        for k in range(1, len(traj.times) - 1):
            fd = (traj.states[k + 1].values - traj.states[k - 1].values) / (traj.times[k + 1] - traj.times[k - 1])
            num += np.sum((fd - traj.dt_states[k].values) ** 2)
            den += np.sum(traj.dt_states[k].values ** 2)
        mismatch = float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))
    return StabilityReport(grad_sup, grad_l2, dt_l2, float(bound), bool(grad_l2 <= bound), nonincr, mismatch)
