"""Finite-difference verification of analytic gradients.

The central-difference quotient is the independent oracle used throughout the
test suite: it never touches the reverse-mode machinery beyond reading the
gradient it checks.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .autodiff import Tensor, backward
from .errors import OracleError


def finite_difference_check(
    f: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, Tensor],
    h: float = 1e-5,
    samples_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Return the max relative error between analytic and numeric gradients.

    ``f(params)`` must return a scalar Tensor and be deterministic: it is
    evaluated twice up front and any disagreement raises ``OracleError``.
    When ``samples_per_param`` is set, only that many coordinates per
    parameter are probed (rng-chosen); otherwise every coordinate is.
    The error metric is |analytic - central| / max(1, |analytic|), with the
    step scaled per coordinate as h * max(1, |value|).
    """
    probe_a = float(f(params).data.reshape(()))
    probe_b = float(f(params).data.reshape(()))
    if probe_a != probe_b:
        raise OracleError(
            f"finite_difference_check: f is not deterministic ({probe_a!r} != {probe_b!r})"
        )

    for p in params.values():
        p.zero_grad()
    loss = f(params)
    backward(loss)
    analytic = {name: p.grad.copy() for name, p in params.items()}

    if rng is None:
        rng = np.random.default_rng(0)

    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        if samples_per_param is None or samples_per_param >= n:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=samples_per_param, replace=False)
        ref = analytic[name].reshape(-1)
        for i in coords:
            old = flat[i]
            step = h * max(1.0, abs(old))
            flat[i] = old + step
            plus = float(f(params).data.reshape(()))
            flat[i] = old - step
            minus = float(f(params).data.reshape(()))
            flat[i] = old
            numeric = (plus - minus) / (2.0 * step)
            err = abs(ref[i] - numeric) / max(1.0, abs(ref[i]))
            if err > worst:
                worst = err
    return worst
