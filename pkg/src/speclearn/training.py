"""Sequential segment training: one network per time segment, trained by
L-BFGS on the weak-residual loss, warm-started from the previous segment,
with the inherited snapshot frozen as the anchor of the next one.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .network import (
    LayerSpec,
    NetworkParams,
    default_arch,
    forward,
    init_params,
    loss_and_grad,
)
from .sampling import InputSample
from .schemes import (
    AdvectionScheme,
    BurgersScheme,
    ConvectionDiffusionScheme,
    DiffusionReactionScheme,
    KuramotoSivashinskyScheme,
    NavierStokesScheme,
)
from .solvers import (
    PdeProblem,
    advection_initial_condition,
    cached_basis,
    kolmogorov_forcing,
)
from .spectral import FourierGrid, dft_1d, dft_2d

__all__ = [
    "DivergenceError",
    "LbfgsResult",
    "plateau_check",
    "two_loop_direction",
    "lbfgs_minimize",
    "adam_minimize",
    "SegmentSchedule",
    "TrainSettings",
    "TrainState",
    "OperatorTask",
    "build_task",
    "train_segment",
    "train_operator",
    "predict_coefficients",
]


class DivergenceError(RuntimeError):
    """Loss rose an order of magnitude above its running minimum."""

    def __init__(self, iteration: int, loss: float, best: float):
        super().__init__(
            f"divergence at iteration {iteration}: loss {loss:g} vs best {best:g}"
        )
        self.iteration = iteration
        self.loss = loss
        self.best = best


def plateau_check(history, window: int = 50, eps: float = 1e-8) -> bool:
    """Stop when the relative improvement over the trailing window drops
    below eps."""
    if len(history) < window:
        return False
    ref = history[-window]
    if ref <= 0.0:
        return history[-1] <= 0.0 or (ref - history[-1]) <= 0.0
    return (ref - history[-1]) / ref < eps


def two_loop_direction(grad, s_list, y_list, rho_list):
    """L-BFGS search direction from the stored curvature pairs."""
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


def _cubic_step(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolant through two (point, value, slope)
    samples; None when degenerate."""
    if a == b:
        return None
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0:
        return None
    d2 = np.sqrt(disc) * np.sign(b - a)
    denom = db - da + 2.0 * d2
    if denom == 0.0:
        return None
    x = b - (b - a) * (db + d2 - d1) / denom
    return x if np.isfinite(x) else None


def _strong_wolfe(fun, x, d, f0, g0, *, c1, c2, alpha0, max_evals):
    """Strong-Wolfe line search (bracket then zoom with cubic steps).

    Returns (alpha, f, g, x_new) or None if the budget runs out.
    """
    dphi0 = float(g0 @ d)
    if dphi0 >= 0.0:
        return None
    evals = 0

    def probe(alpha):
        nonlocal evals
        evals += 1
        xn = x + alpha * d
        f, g = fun(xn)
        if not np.isfinite(f):
            # treat an overshoot into non-finite territory as a failed
            # sufficient-decrease test so the bracket shrinks back
            return np.inf, np.inf, g, xn
        return f, float(g @ d), g, xn

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi):
        result = None
        while evals < max_evals:
            alpha = _cubic_step(lo, f_lo, d_lo, hi, f_hi, d_hi)
            span = abs(hi - lo)
            lo_b, hi_b = (lo, hi) if lo < hi else (hi, lo)
            if (
                alpha is None
                or not (lo_b + 0.1 * span <= alpha <= hi_b - 0.1 * span)
            ):
                alpha = 0.5 * (lo + hi)
            f, dphi, g, xn = probe(alpha)
            if f > f0 + c1 * alpha * dphi0 or f >= f_lo:
                hi, f_hi, d_hi = alpha, f, dphi
            else:
                if abs(dphi) <= -c2 * dphi0:
                    return alpha, f, g, xn
                if dphi * (hi - lo) >= 0.0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = alpha, f, dphi
                result = (alpha, f, g, xn)
        return result  # best Armijo point found, if any

    alpha_prev, f_prev, d_prev = 0.0, f0, dphi0
    alpha = alpha0
    first = True
    while evals < max_evals:
        f, dphi, g, xn = probe(alpha)
        if f > f0 + c1 * alpha * dphi0 or (not first and f >= f_prev):
            return zoom(alpha_prev, f_prev, d_prev, alpha, f, dphi)
        if abs(dphi) <= -c2 * dphi0:
            return alpha, f, g, xn
        if dphi >= 0.0:
            return zoom(alpha, f, dphi, alpha_prev, f_prev, d_prev)
        alpha_prev, f_prev, d_prev = alpha, f, dphi
        alpha *= 2.0
        first = False
    return None


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    history: list[float]
    status: str


def lbfgs_minimize(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    *,
    m: int = 10,
    max_iters: int = 2000,
    plateau_window: int = 50,
    plateau_eps: float = 1e-8,
    c1: float = 1e-4,
    c2: float = 0.9,
    ls_max_evals: int = 25,
    divergence_factor: float = 10.0,
    callback: Callable[[int, float], None] | None = None,
) -> LbfgsResult:
    """Limited-memory BFGS with a strong-Wolfe line search.

    Curvature pairs that violate positive curvature are discarded; a failed
    line search falls back to steepest descent once before giving up.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun(x)
    history = [f]
    s_list: deque = deque(maxlen=m)
    y_list: deque = deque(maxlen=m)
    rho_list: deque = deque(maxlen=m)
    best = f
    status = "max_iters"
    for it in range(max_iters):
        if not np.any(g):
            status = "optimal"
            break
        if plateau_check(history, plateau_window, plateau_eps):
            status = "plateau"
            break
        if best > 0.0 and f > divergence_factor * best:
            raise DivergenceError(it, f, best)
        d = two_loop_direction(g, s_list, y_list, rho_list)
        if float(d @ g) >= 0.0:
            d = -g
        # without curvature information the natural step is gradient-scaled,
        # not unit: protects the first iteration of badly scaled problems
        alpha0 = 1.0 if s_list else min(1.0, 1.0 / max(1e-12, float(np.linalg.norm(d))))
        res = _strong_wolfe(
            fun, x, d, f, g, c1=c1, c2=c2, alpha0=alpha0, max_evals=ls_max_evals
        )
        if res is None and s_list:
            # restart from steepest descent for this iteration
            s_list.clear()
            y_list.clear()
            rho_list.clear()
            alpha0 = min(1.0, 1.0 / max(1e-12, float(np.linalg.norm(g))))
            res = _strong_wolfe(
                fun, x, -g, f, g, c1=c1, c2=c2, alpha0=alpha0, max_evals=ls_max_evals
            )
        if res is None:
            status = "line_search_failure"
            break
        _, fn, gn, xn = res
        s = xn - x
        y = gn - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
        x, f, g = xn, fn, gn
        history.append(f)
        best = min(best, f)
        if callback is not None:
            callback(it, f)
    return LbfgsResult(x=x, fun=f, grad=g, history=history, status=status)


def adam_minimize(
    fun,
    x0,
    *,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    max_iters: int = 2000,
    plateau_window: int = 50,
    plateau_eps: float = 1e-8,
    divergence_factor: float = 10.0,
    callback=None,
) -> LbfgsResult:
    """Adam fallback for robustness experiments."""
    x = np.asarray(x0, dtype=float).copy()
    mom = np.zeros_like(x)
    vel = np.zeros_like(x)
    f, g = fun(x)
    history = [f]
    best = f
    status = "max_iters"
    for it in range(1, max_iters + 1):
        if not np.any(g):
            status = "optimal"
            break
        if plateau_check(history, plateau_window, plateau_eps):
            status = "plateau"
            break
        if best > 0.0 and f > divergence_factor * best:
            raise DivergenceError(it, f, best)
        mom = beta1 * mom + (1 - beta1) * g
        vel = beta2 * vel + (1 - beta2) * g * g
        mhat = mom / (1 - beta1**it)
        vhat = vel / (1 - beta2**it)
        x = x - lr * mhat / (np.sqrt(vhat) + eps)
        f, g = fun(x)
        history.append(f)
        best = min(best, f)
        if callback is not None:
            callback(it, f)
    return LbfgsResult(x=x, fun=f, grad=g, history=history, status=status)


# ---------------------------------------------------------------------------
# segment schedule and per-family task glue


@dataclass(frozen=True)
class SegmentSchedule:
    Q: int
    R: int
    dt: float

    @property
    def boundaries(self) -> np.ndarray:
        return self.dt * self.R * np.arange(self.Q + 1)

    @classmethod
    def from_problem(cls, problem: PdeProblem) -> "SegmentSchedule":
        return cls(Q=problem.Q, R=problem.R, dt=problem.dt)


@dataclass
class TrainSettings:
    method: str = "lbfgs"
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    max_iters: int = 2000
    plateau_window: int = 50
    plateau_eps: float = 1e-8
    ls_max_evals: int = 25
    adam_lr: float = 1e-3
    divergence_factor: float = 10.0


@dataclass
class TrainState:
    """Where sequential training currently stands: segment index q (the
    next segment to train), its warm-start parameters, and the frozen
    anchors feeding its first defect term."""

    q: int
    params: NetworkParams
    anchors: np.ndarray
    histories: list[list[float]] = field(default_factory=list)
    seed: int = 0
    wall_time: float = 0.0


@dataclass
class OperatorTask:
    """Everything needed to train one family: the scheme, the network
    input batch, the per-sample defect closure, and initial anchors."""

    problem: PdeProblem
    scheme: Any
    net_inputs: np.ndarray
    defect: Callable
    arch: tuple[LayerSpec, ...]
    in_shape: tuple[int, ...]
    out_shape: tuple[int, int]
    out_map: str
    anchors0: np.ndarray
    representation: str

    @property
    def n_samples(self) -> int:
        return self.net_inputs.shape[0]


def _stack(samples: list[InputSample]) -> np.ndarray:
    return np.stack([s.grid_values for s in samples])


def build_task(
    problem: PdeProblem,
    samples: list[InputSample],
    *,
    arch: tuple[LayerSpec, ...] | None = None,
    corrector: bool = True,
) -> OperatorTask:
    """Assemble the training task for a family at the problem's sizes."""
    fam = problem.family
    R = problem.R
    grids = _stack(samples)
    d_arch, in_shape, out_shape, out_map = default_arch(fam, problem.N, R)
    if fam == "convection_diffusion_bl" and not corrector:
        out_shape = (R, problem.N)
    if arch is not None:
        d_arch = tuple(arch)

    if fam == "diffusion_reaction":
        basis = cached_basis(problem.N)
        scheme = DiffusionReactionScheme(basis, problem.nu, problem.mu, problem.dt)
        f_proj = (grids @ scheme.proj)[:, None, :]  # (P, 1, N)
        defect = lambda prev, nxt: scheme.defect(prev, nxt, f_proj)
        anchors0 = np.zeros((len(samples), problem.N))
        representation = "legendre"
    elif fam == "burgers":
        grid = FourierGrid(problem.N)
        scheme = BurgersScheme(grid, problem.nu, problem.mu, problem.dt)
        defect = scheme.defect
        anchors0 = dft_1d(grids).values
        representation = "fourier1d"
    elif fam == "advection":
        grid = FourierGrid(problem.N)
        scheme = AdvectionScheme(grid, problem.dt)
        a_b = grids[:, None, :]
        defect = lambda prev, nxt: scheme.defect(prev, nxt, a_b)
        alpha0 = dft_1d(advection_initial_condition(grid)).values
        anchors0 = np.broadcast_to(alpha0, (len(samples), problem.N)).copy()
        representation = "fourier1d"
    elif fam == "convection_diffusion_bl":
        basis = cached_basis(
            problem.N, corrector_nu=problem.nu if corrector else None
        )
        scheme = ConvectionDiffusionScheme(basis, problem.nu, problem.dt)
        defect = scheme.defect
        anchors0 = np.stack(
            [scheme.initial_coefficients(g) for g in grids]
        )
        representation = "legendre_enriched" if corrector else "legendre"
    elif fam == "kse_2d":
        grid = FourierGrid(problem.N, dims=2)
        scheme = KuramotoSivashinskyScheme(grid, problem.dt)
        defect = scheme.defect
        anchors0 = dft_2d(grids).values
        representation = "fourier2d"
    elif fam == "nse_2d":
        grid = FourierGrid(problem.N, dims=2)
        forcing = (
            problem.forcing
            if problem.forcing is not None
            else kolmogorov_forcing(grid)
        )
        scheme = NavierStokesScheme(
            grid, problem.reynolds, problem.dt, dft_2d(forcing).values
        )
        defect = scheme.defect
        anchors0 = dft_2d(grids).values
        representation = "fourier2d"
    else:
        raise ValueError(f"unknown family {fam!r}")

    return OperatorTask(
        problem=problem,
        scheme=scheme,
        net_inputs=grids,
        defect=defect,
        arch=d_arch,
        in_shape=in_shape,
        out_shape=out_shape,
        out_map=out_map,
        anchors0=anchors0,
        representation=representation,
    )


def initial_state(task: OperatorTask, seed: int = 0) -> TrainState:
    params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, seed)
    return TrainState(q=1, params=params, anchors=task.anchors0, seed=seed)


def train_segment(
    task: OperatorTask,
    state: TrainState,
    settings: TrainSettings | None = None,
    *,
    callback=None,
) -> tuple[TrainState, NetworkParams]:
    """Train the network for segment q; returns the advanced state (warm
    start, chained anchors, appended history) and the trained parameters."""
    settings = settings or TrainSettings()
    if state.q > task.problem.Q:
        raise ValueError("all segments already trained")
    params = state.params
    anchors = state.anchors

    def objective(theta):
        try:
            return loss_and_grad(
                replace(params, flat=theta), task.net_inputs, anchors, task.defect
            )
        except FloatingPointError:
            # off-the-map line-search probe; report +inf so the search backs off
            return np.inf, np.zeros_like(theta)

    started = time.perf_counter()
    minimize = lbfgs_minimize if settings.method == "lbfgs" else None
    if minimize is not None:
        result = minimize(
            objective,
            params.flat,
            m=settings.memory,
            max_iters=settings.max_iters,
            plateau_window=settings.plateau_window,
            plateau_eps=settings.plateau_eps,
            c1=settings.c1,
            c2=settings.c2,
            ls_max_evals=settings.ls_max_evals,
            divergence_factor=settings.divergence_factor,
            callback=callback,
        )
    else:
        result = adam_minimize(
            objective,
            params.flat,
            lr=settings.adam_lr,
            max_iters=settings.max_iters,
            plateau_window=settings.plateau_window,
            plateau_eps=settings.plateau_eps,
            divergence_factor=settings.divergence_factor,
            callback=callback,
        )
    trained = replace(params, flat=result.x.copy())
    out = forward(trained, task.net_inputs)
    new_anchors = np.ascontiguousarray(out[:, -1])
    new_state = TrainState(
        q=state.q + 1,
        params=trained.copy(),
        anchors=new_anchors,
        histories=state.histories + [result.history],
        seed=state.seed,
        wall_time=state.wall_time + time.perf_counter() - started,
    )
    return new_state, trained


def train_operator(
    task: OperatorTask,
    settings: TrainSettings | None = None,
    *,
    seed: int = 0,
    callback=None,
) -> tuple[list[NetworkParams], TrainState]:
    """Run all Q segments sequentially; returns one trained parameter set
    per segment plus the final state."""
    state = initial_state(task, seed)
    trained: list[NetworkParams] = []
    for _ in range(task.problem.Q):
        cb = (lambda it, f, q=state.q: callback(q, it, f)) if callback else None
        state, params = train_segment(task, state, settings, callback=cb)
        trained.append(params)
    return trained, state


def predict_coefficients(task: OperatorTask, trained: list[NetworkParams]) -> np.ndarray:
    """Concatenate per-segment predictions into (P, QR, D...) coefficients
    for steps 1..QR."""
    outs = [forward(p, task.net_inputs) for p in trained]
    return np.concatenate(outs, axis=1)
