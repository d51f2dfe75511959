"""Alternating reconstruction loop, ablation harness, and report output.

Each reverse step runs, in order: the calibration update (when enabled),
the denoise step, the data-fidelity solve at the current weight gamma,
the regularization-weight update with its sliding-window stop (when
enabled), then the transition to the next noise level.  For a
circulant-Gaussian prior the per-level fixed point of denoise + solve
obeys  (gamma AᴴA + sigma^2 (Sigma + sigma^2 I)^(-1)) x = gamma Aᴴy,
so at a terminal level of 1 the loop lands on the closed-form MAP
solution  (gamma AᴴA + (Sigma + sigma_min^2 I)^(-1))^(-1) gamma Aᴴy,
which the oracle tests pin down.

All randomness is seeded, so a full run is bit-reproducible.
"""

from __future__ import annotations

import dataclasses
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .calibration import (
    DeltaOptState,
    delta_penalty,
    one_step_recon,
    partition_mask,
    ssl_loss,
    update_delta,
)
from .cg import CGConfig, solve_p3
from .errors import InvalidArgumentError
from .forward import ForwardOperator, apply_forward, zero_filled
from .metrics import psnr, ssim
from .priors import ScorePrior, validate_delta
from .sampler import build_schedule, renoise, tweedie_denoise
from .regularization import (
    RegAdaptState,
    convergence_criterion,
    sure_loss,
    update_gamma,
)


@dataclass
class ReconConfig:
    steps: int = 100
    sigma_max: float = 1.0
    sigma_min: float = 0.01
    gamma_init: float = 1.0
    delta_init: float = 1.0
    tau_reg: float = 0.001
    window: int = 5
    cg: CGConfig = field(default_factory=CGConfig)
    holdout_fraction: float = 0.2
    tau_ssl: float = 1.0
    band_cutoff: float = 0.25
    enable_fpc: bool = True
    enable_rpa: bool = True
    seed_init: int = 0
    seed_partition: int = 0
    seed_mc: int = 0
    seed_noise: int = 0
    renoise_mode: str = "deterministic"
    redraw_partition: bool = False
    sure_form: str = "product"
    sure_eps_scale: float = 1e-3
    delta_step: float = 0.05
    delta_fd_step: float = 0.01
    delta_method: str = "cd"
    gamma_step: float = 0.1
    gamma_fd_step: float = 0.05

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidArgumentError("steps must be >= 1")
        if self.gamma_init < 0:
            raise InvalidArgumentError("gamma_init must be >= 0")
        if self.gamma_init == 0 and self.enable_rpa:
            raise InvalidArgumentError("gamma_init = 0 (fidelity off) requires enable_rpa = False")
        if not 0 <= self.delta_init <= 2:
            raise InvalidArgumentError("delta_init must lie in [0, 2]")


@dataclass
class StepRecord:
    t: int
    sigma: float
    delta: np.ndarray
    gamma: float
    loss_ssl: float | None
    loss_reg: float | None
    conv_metric: float | None
    cg_residual: float
    cg_iters: int


@dataclass
class ReconReport:
    records: list[StepRecord]
    final_image: np.ndarray
    stopped_at: int | None  # 1-based step index at which gamma froze
    zero_fill: np.ndarray | None = None
    reference: np.ndarray | None = None
    psnr: float | None = None
    ssim: float | None = None
    wall_clock: float = 0.0


def reconstruct(
    y: np.ndarray,
    op: ForwardOperator,
    prior: ScorePrior,
    cfg: ReconConfig,
    reference: np.ndarray | None = None,
) -> tuple[np.ndarray, ReconReport]:
    """Run the full alternating reconstruction; returns (image, report).

    The report always carries exactly `steps` records; an early stop only
    freezes the regularization weight, it never truncates the loop.
    """
    started = time.perf_counter()
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (op.coils, *op.shape):
        raise InvalidArgumentError(f"k-space shape {y.shape} does not match operator")

    schedule = build_schedule(cfg.steps, cfg.sigma_max, cfg.sigma_min)
    sigmas = schedule.sigmas
    layer_count = prior.layer_count
    delta = validate_delta(np.full(2 * layer_count, cfg.delta_init), layer_count)

    run_fpc = cfg.enable_fpc and layer_count > 0
    delta_state = DeltaOptState(
        delta=delta,
        step_size=cfg.delta_step,
        fd_step=cfg.delta_fd_step,
        method=cfg.delta_method,
        seed=cfg.seed_partition,
    )
    reg_state = None
    gamma = cfg.gamma_init
    if cfg.enable_rpa:
        reg_state = RegAdaptState(
            gamma=cfg.gamma_init,
            step_size=cfg.gamma_step,
            fd_step=cfg.gamma_fd_step,
            window=cfg.window,
            threshold=cfg.tau_reg,
            eps_scale=cfg.sure_eps_scale,
            mc_seed=cfg.seed_mc,
        )

    part = None
    if run_fpc:
        part = partition_mask(op.mask, cfg.holdout_fraction, cfg.seed_partition)
    x_zf = zero_filled(y, op)

    rng = np.random.default_rng(cfg.seed_init)
    x = sigmas[-1] * (rng.standard_normal(op.shape) + 1j * rng.standard_normal(op.shape))

    records: list[StepRecord] = []
    stopped_at: int | None = None

    for t in range(cfg.steps, 0, -1):
        sigma = float(sigmas[t - 1])

        loss_ssl = None
        if run_fpc:
            if cfg.redraw_partition:
                part = partition_mask(op.mask, cfg.holdout_fraction, (cfg.seed_partition, t))
            op_l = op.with_mask(part.lambda_mask.bits, seed=part.split_seed)
            op_g = op.with_mask(part.gamma_mask.bits, seed=part.split_seed)
            y_l = y * part.lambda_mask.bits[None]
            y_g = y * part.gamma_mask.bits[None]

            def objective(d, _sigma=sigma, _w=gamma, _ol=op_l, _og=op_g, _yl=y_l, _yg=y_g):
                return (
                    ssl_loss(d, x, _sigma, cfg.tau_ssl, prior, _yl, _ol, _yg, _og, _w, cfg.cg)
                    + delta_penalty(d)
                )

            delta_state = update_delta(delta_state, objective)
            loss_ssl = delta_state.loss_history[-1]

        x_dot = tweedie_denoise(x, sigma, prior, delta_state.delta if layer_count else None)
        p3 = solve_p3(x_dot, y, op, gamma, cfg.cg)
        x_hat = p3.x

        loss_reg = None
        conv = None
        if cfg.enable_rpa and not reg_state.stopped:
            eps = max(cfg.sure_eps_scale * float(np.max(np.abs(x))), 1e-12)

            def composite(g, v, _sigma=sigma):
                return one_step_recon(
                    v, _sigma, prior,
                    delta_state.delta if layer_count else None,
                    y, op, g, cfg.cg,
                )

            def loss_fn(g, _sigma=sigma, _eps=eps, _t=t):
                return sure_loss(
                    g, x, x_zf, composite, _eps, (cfg.seed_mc, _t),
                    form=cfg.sure_form, noise_var=_sigma**2,
                )

            reg_state = update_gamma(reg_state, loss_fn)
            gamma = reg_state.gamma
            loss_reg = reg_state.loss_history[-1]
            conv = convergence_criterion(reg_state.loss_history, reg_state.window)
            if conv is not None and conv < reg_state.threshold:
                reg_state.stopped = True
                stopped_at = t

        sigma_next = float(sigmas[t - 2]) if t >= 2 else 0.0
        x = renoise(x_hat, x, sigma_next, sigma, cfg.renoise_mode, seed=(cfg.seed_noise, t))

        records.append(
            StepRecord(
                t=t,
                sigma=sigma,
                delta=delta_state.delta.copy(),
                gamma=gamma,
                loss_ssl=loss_ssl,
                loss_reg=loss_reg,
                conv_metric=conv,
                cg_residual=p3.residual,
                cg_iters=p3.iters,
            )
        )

    report = ReconReport(
        records=records,
        final_image=x,
        stopped_at=stopped_at,
        zero_fill=x_zf,
        reference=None if reference is None else np.asarray(reference, dtype=np.complex128),
        wall_clock=time.perf_counter() - started,
    )
    if reference is not None:
        report.psnr = psnr(x, reference)
        report.ssim = ssim(x, reference)
    return x, report


# ---------------------------------------------------------------------------
# ablation harness
# ---------------------------------------------------------------------------

ABLATION_ROWS = (
    ("Baseline", False, False),
    ("w/o RPA", True, False),  # calibration only
    ("w/o FPC", False, True),  # weight adaptation only
    ("Ours", True, True),
)


def run_ablation(
    cases: list[dict],
    prior: ScorePrior,
    cfg: ReconConfig,
) -> list[dict]:
    """Run the four toggle combinations over (y, op, reference) cases.

    Returns one row per combination with mean/std PSNR and SSIM;
    deterministic for fixed seeds.
    """
    if not cases:
        raise InvalidArgumentError("need at least one case")
    table = []
    for label, fpc, rpa in ABLATION_ROWS:
        row_cfg = dataclasses.replace(cfg, enable_fpc=fpc, enable_rpa=rpa)
        psnrs, ssims = [], []
        for case in cases:
            _, report = reconstruct(case["y"], case["op"], prior, row_cfg,
                                    reference=case["reference"])
            psnrs.append(report.psnr)
            ssims.append(report.ssim)
        table.append(
            {
                "label": label,
                "enable_fpc": fpc,
                "enable_rpa": rpa,
                "psnr_mean": float(np.mean(psnrs)),
                "psnr_std": float(np.std(psnrs)),
                "ssim_mean": float(np.mean(ssims)),
                "ssim_std": float(np.std(ssims)),
            }
        )
    return table


def format_ablation_table(table: list[dict]) -> str:
    lines = [f"{'Method':<10} {'PSNR (dB)':>18} {'SSIM':>18}"]
    for row in table:
        lines.append(
            f"{row['label']:<10} "
            f"{row['psnr_mean']:>9.3f}±{row['psnr_std']:<8.3f} "
            f"{row['ssim_mean']:>9.4f}±{row['ssim_std']:<8.4f}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# report output
# ---------------------------------------------------------------------------


def _write_pgm(path: str, image: np.ndarray, peak: float | None = None) -> None:
    """8-bit binary portable graymap scaled by the image (or given) peak."""
    mag = np.abs(np.asarray(image))
    peak = float(mag.max()) if peak is None else float(peak)
    scale = 255.0 / peak if peak > 0 else 0.0
    data = np.clip(np.round(mag * scale), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


def trace_columns(report: ReconReport) -> str:
    """Plain-text per-step traces (one row per reverse step, t descending)."""
    n_delta = report.records[0].delta.size if report.records else 0
    header = ["t", "sigma", "gamma", "loss_ssl", "loss_reg", "conv_metric", "cg_residual"]
    header += [f"delta_{i}" for i in range(n_delta)]
    lines = ["# " + " ".join(header)]
    for rec in report.records:
        vals = [
            f"{rec.t}",
            f"{rec.sigma:.8g}",
            f"{rec.gamma:.8g}",
            "nan" if rec.loss_ssl is None else f"{rec.loss_ssl:.8g}",
            "nan" if rec.loss_reg is None else f"{rec.loss_reg:.8g}",
            "nan" if rec.conv_metric is None else f"{rec.conv_metric:.8g}",
            f"{rec.cg_residual:.8g}",
        ]
        vals += [f"{d:.8g}" for d in rec.delta]
        lines.append(" ".join(vals))
    return "\n".join(lines) + "\n"


def emit_images(report: ReconReport, out_dir: str | os.PathLike) -> None:
    """Write graymaps (reconstruction, reference, error) and trace columns."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    _write_pgm(os.path.join(out_dir, "recon.pgm"), report.final_image)
    if report.reference is not None:
        peak = float(np.abs(report.reference).max())
        _write_pgm(os.path.join(out_dir, "reference.pgm"), report.reference)
        error = np.abs(np.abs(report.final_image) - np.abs(report.reference))
        _write_pgm(os.path.join(out_dir, "error.pgm"), error, peak=peak)
    with open(os.path.join(out_dir, "traces.txt"), "w") as fh:
        fh.write(trace_columns(report))
