"""Self-supervised calibration of the score prior.

The sampled k-space locations are split into a reconstruction set and a
held-out set (a Gaussian-weighted pointwise draw, so both children are
2-D subsampling patterns).  The calibration objective reconstructs one
denoise + data-fidelity step from the reconstruction set only and scores
the residual on the held-out set; a quadratic pull toward the all-ones
vector keeps the calibrated network anchored to the pretrained one.

The calibration vector is tiny (two scalars per skip layer), so it is
optimized derivative-free: central differences per coordinate or a
two-evaluation simultaneous-perturbation estimate, followed by either a
plain gradient step or an adaptive-moment step, always clamped to [0, 2].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cg import CGConfig, solve_p3
from .errors import InvalidArgumentError, NumericError
from .forward import ForwardOperator, SamplingMask, apply_forward
from .priors import ScorePrior, clamp_delta
from .sampler import tweedie_denoise


@dataclass
class MaskPartition:
    lambda_mask: SamplingMask  # reconstruction set
    gamma_mask: SamplingMask  # held-out set
    split_seed: int


def partition_mask(mask: SamplingMask, holdout_fraction: float, seed: int = 0) -> MaskPartition:
    """Split sampled entries into complementary reconstruction/held-out masks.

    Each sampled entry goes to the held-out set independently with
    probability proportional to a centered 2-D Gaussian density, scaled
    so the expected held-out count is holdout_fraction * sampled count.
    Retries with a fresh substream if either side comes up empty.
    """
    if not 0 < holdout_fraction < 1:
        raise InvalidArgumentError("holdout_fraction must lie in (0, 1)")
    bits = mask.bits
    rows, cols = np.nonzero(bits)
    if rows.size < 2:
        raise InvalidArgumentError("mask must contain at least two sampled entries")

    H, W = bits.shape
    dr = (rows - H // 2) / (H / 6.0)
    dc = (cols - W // 2) / (W / 6.0)
    dens = np.exp(-0.5 * (dr**2 + dc**2))
    prob = np.minimum(holdout_fraction * dens / dens.mean(), 1.0)

    for attempt in range(8):
        rng = np.random.default_rng((seed, attempt))
        to_gamma = rng.random(rows.size) < prob
        if to_gamma.any() and not to_gamma.all():
            break
    else:
        raise NumericError("mask partition produced an empty side 8 times in a row")

    gamma_bits = np.zeros_like(bits)
    gamma_bits[rows[to_gamma], cols[to_gamma]] = 1
    lambda_bits = (bits & ~gamma_bits).astype(np.uint8)

    def _sub(sub_bits: np.ndarray) -> SamplingMask:
        count = max(int(sub_bits.sum()), 1)
        return SamplingMask(
            kind="Gaussian2D",
            accel=sub_bits.size / count,
            acs_fraction=mask.acs_fraction,
            seed=seed,
            bits=sub_bits,
        )

    return MaskPartition(_sub(lambda_bits), _sub(gamma_bits), split_seed=seed)


def one_step_recon(
    x: np.ndarray,
    sigma: float,
    prior: ScorePrior,
    delta: np.ndarray | None,
    y: np.ndarray,
    op: ForwardOperator,
    fidelity_weight: float,
    cg_cfg: CGConfig,
) -> np.ndarray:
    """One denoise step followed by one data-fidelity solve against (y, op)."""
    x_dot = tweedie_denoise(x, sigma, prior, delta)
    return solve_p3(x_dot, y, op, fidelity_weight, cg_cfg).x


def ssl_loss(
    delta: np.ndarray,
    x_lambda: np.ndarray,
    sigma: float,
    tau: float,
    prior: ScorePrior,
    y_lambda: np.ndarray,
    op_lambda: ForwardOperator,
    y_gamma: np.ndarray,
    op_gamma: ForwardOperator,
    fidelity_weight: float,
    cg_cfg: CGConfig,
) -> float:
    """Held-out k-space residual of the one-step reconstruction.

    Returns tau/2 * || y_held - A_held f(delta; x) ||^2 where f uses only
    the reconstruction-set measurements, so the held-out residual probes
    how well the calibrated prior generalizes.
    """
    if tau <= 0:
        raise InvalidArgumentError("tau must be > 0")
    x_hat = one_step_recon(x_lambda, sigma, prior, delta, y_lambda, op_lambda,
                           fidelity_weight, cg_cfg)
    resid = y_gamma - apply_forward(x_hat, op_gamma)
    val = 0.5 * tau * float(np.real(np.vdot(resid, resid)))
    if not np.isfinite(val):
        raise NumericError("self-supervised loss evaluated to a non-finite value")
    return val


def delta_penalty(delta: np.ndarray) -> float:
    """Quadratic anchor 0.5 * ||delta - 1||^2 (unit-Gaussian prior, constant dropped)."""
    d = np.asarray(delta, dtype=np.float64) - 1.0
    return 0.5 * float(d @ d)


@dataclass
class DeltaOptState:
    delta: np.ndarray
    step_size: float = 0.05
    fd_step: float = 1e-2
    method: str = "cd"  # "cd" | "spsa"
    rule: str = "adam"  # "adam" | "sgd"
    iteration: int = 0
    seed: int = 0
    loss_history: list[float] = field(default_factory=list)
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def __post_init__(self):
        self.delta = clamp_delta(self.delta)
        if self.method not in ("cd", "spsa"):
            raise InvalidArgumentError(f"unknown gradient method {self.method!r}")
        if self.rule not in ("adam", "sgd"):
            raise InvalidArgumentError(f"unknown update rule {self.rule!r}")
        if self.m is None:
            self.m = np.zeros_like(self.delta)
        if self.v is None:
            self.v = np.zeros_like(self.delta)


def _fd_gradient(state: DeltaOptState, objective: Callable[[np.ndarray], float]) -> np.ndarray:
    """Derivative-free gradient estimate; perturbations stay inside [0, 2]."""
    delta = state.delta
    n = delta.size
    grad = np.zeros(n)
    evals: list[float] = []
    if state.method == "cd":
        for j in range(n):
            dp, dm = delta.copy(), delta.copy()
            dp[j] = min(delta[j] + state.fd_step, 2.0)
            dm[j] = max(delta[j] - state.fd_step, 0.0)
            fp, fm = objective(dp), objective(dm)
            evals += [fp, fm]
            grad[j] = (fp - fm) / (dp[j] - dm[j])
    else:  # spsa
        rng = np.random.default_rng((state.seed, state.iteration))
        direction = rng.integers(0, 2, size=n) * 2.0 - 1.0
        dp = np.clip(delta + state.fd_step * direction, 0.0, 2.0)
        dm = np.clip(delta - state.fd_step * direction, 0.0, 2.0)
        fp, fm = objective(dp), objective(dm)
        evals += [fp, fm]
        span = dp - dm
        span[span == 0] = state.fd_step  # pinned coordinate: no information, keep finite
        grad = (fp - fm) / span
    if not np.all(np.isfinite(evals)):
        raise NumericError("objective returned non-finite values during perturbation")
    state.loss_history.append(float(np.mean(evals)))
    return grad


def update_delta(state: DeltaOptState, objective: Callable[[np.ndarray], float]) -> DeltaOptState:
    """One derivative-free optimization step; mutates and returns the state."""
    if state.delta.size == 0:
        state.iteration += 1
        return state
    grad = _fd_gradient(state, objective)
    if state.rule == "sgd":
        step = state.step_size * grad
    else:
        b1, b2, eps = 0.9, 0.999, 1e-8
        state.m = b1 * state.m + (1 - b1) * grad
        state.v = b2 * state.v + (1 - b2) * grad**2
        k = state.iteration + 1
        m_hat = state.m / (1 - b1**k)
        v_hat = state.v / (1 - b2**k)
        step = state.step_size * m_hat / (np.sqrt(v_hat) + eps)
    state.delta = clamp_delta(state.delta - step)
    state.iteration += 1
    return state
