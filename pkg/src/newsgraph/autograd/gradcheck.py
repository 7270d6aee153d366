"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import NumericError
from .tensor import Tensor, backward


def _relative_error(analytic: np.ndarray, numeric: np.ndarray, keep: np.ndarray) -> float:
    if not keep.any():
        return 0.0
    a = analytic[keep]
    n = numeric[keep]
    return float(np.max(np.abs(a - n) / np.maximum(1.0, np.abs(a))))


def _scalar(t: Tensor) -> float:
    v = float(np.asarray(t.data).reshape(-1)[0]) if t.data.size == 1 else None
    if v is None:
        raise NumericError(f"function must return a scalar, got shape {t.shape}")
    if not np.isfinite(v):
        raise NumericError(f"non-finite function value {v}")
    return v


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    h: float = 1e-5,
    exclude=None,
) -> float:
    """Max over coordinates of |analytic - central difference| / max(1, |analytic|).

    ``exclude`` is an optional boolean mask (same shape as ``x``) of coordinates
    to skip, e.g. inputs sitting exactly on a relu kink where the two-sided
    difference is not a derivative. ``x.data`` is left untouched.
    """
    base = x.data.copy()
    probe = Tensor(base, requires_grad=True)
    out = f(probe)
    _scalar(out)
    backward(out)
    analytic = probe.grad if probe.grad is not None else np.zeros_like(base)
    if not np.all(np.isfinite(analytic)):
        raise NumericError("non-finite analytic gradient")
    numeric = np.zeros_like(base)
    flat = numeric.reshape(-1)
    for k in range(base.size):
        plus = base.copy().reshape(-1)
        minus = base.copy().reshape(-1)
        plus[k] += h
        minus[k] -= h
        fp = _scalar(f(Tensor(plus.reshape(base.shape))))
        fm = _scalar(f(Tensor(minus.reshape(base.shape))))
        flat[k] = (fp - fm) / (2.0 * h)
    keep = np.ones(base.shape, dtype=bool) if exclude is None else ~np.asarray(exclude, dtype=bool)
    return _relative_error(analytic, numeric, keep)


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
) -> float:
    """Gradient check of a closure over several parameter tensors.

    Each parameter is perturbed in place and restored; the returned error
    uses the same metric as :func:`grad_check`, maximized over all
    parameters.
    """
    for p in params:
        p.zero_grad()
    out = loss_fn()
    _scalar(out)
    backward(out)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    worst = 0.0
    for p, a in zip(params, analytic):
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite analytic gradient")
        numeric = np.zeros_like(p.data)
        flat_p = p.data.reshape(-1)
        flat_n = numeric.reshape(-1)
        for k in range(flat_p.size):
            orig = flat_p[k]
            flat_p[k] = orig + h
            fp = _scalar(loss_fn())
            flat_p[k] = orig - h
            fm = _scalar(loss_fn())
            flat_p[k] = orig
            flat_n[k] = (fp - fm) / (2.0 * h)
        worst = max(worst, _relative_error(a, numeric, np.ones(a.shape, dtype=bool)))
    return worst
