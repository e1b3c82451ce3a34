"""Central finite-difference gradient checker.

The contract for every differentiable op in this package: its analytic
gradient agrees with central differences at binary64 to the tolerances the
test suite pins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    """Outcome of one finite-difference comparison."""

    max_rel_err: float
    per_input: dict[str, float]
    h: float
    tol: float | None = None

    @property
    def passed(self) -> bool | None:
        return None if self.tol is None else self.max_rel_err < self.tol

    def __str__(self):
        status = "" if self.tol is None else (" PASS" if self.passed else " FAIL")
        return f"gradcheck max_rel_err={self.max_rel_err:.3e} (h={self.h:g}){status}"


def _rel_err(a: np.ndarray, n: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
    return float((np.abs(a - n) / denom).max()) if a.size else 0.0


def finite_difference_check(
    f,
    point,
    h: float = 1e-5,
    tol: float | None = None,
    names=None,
) -> GradCheckReport:
    """Compare analytic gradients of scalar ``f`` with central differences.

    ``point`` is a sequence of arrays; ``f`` receives one Tensor per array
    and must return a scalar Tensor through differentiable ops. The error
    metric per coordinate is |a - n| / max(1, |a|, |n|).
    """
    arrays = [np.array(x, dtype=np.float64) for x in point]
    names = list(names) if names is not None else [f"arg{i}" for i in range(len(arrays))]

    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = f(*tensors)
    loss.backward()
    analytic = [
        t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors
    ]

    def eval_at(arrs) -> float:
        return float(f(*[Tensor(a) for a in arrs]).data)

    per_input: dict[str, float] = {}
    for i, (arr, ana) in enumerate(zip(arrays, analytic)):
        numeric = np.empty_like(arr)
        flat = arr.ravel()
        nflat = numeric.ravel()
        for j in range(arr.size):
            orig = flat[j]
            flat[j] = orig + h
            up = eval_at(arrays)
            flat[j] = orig - h
            down = eval_at(arrays)
            flat[j] = orig
            nflat[j] = (up - down) / (2.0 * h)
        per_input[names[i]] = _rel_err(np.asarray(ana), numeric)

    max_err = max(per_input.values(), default=0.0)
    return GradCheckReport(max_rel_err=max_err, per_input=per_input, h=h, tol=tol)
