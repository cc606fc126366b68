"""optbench: desk-scale optimizer benchmark laboratory (C++ core)."""

from optbench._core import (  # noqa: F401
    RngStream,
    clip_gradient,
    derive_stream,
    eval_form,
    fit_nlls,
    frobenius_norm,
    householder_qr,
    known_optimizers,
    lr_at,
    matmul,
    newton_schulz5,
    run_trial,
    solve_equivalent_data,
    speedup_ratio,
    svd_small,
)

__all__ = [
    "RngStream",
    "clip_gradient",
    "derive_stream",
    "eval_form",
    "fit_nlls",
    "frobenius_norm",
    "householder_qr",
    "known_optimizers",
    "lr_at",
    "matmul",
    "newton_schulz5",
    "run_trial",
    "solve_equivalent_data",
    "speedup_ratio",
    "svd_small",
]
