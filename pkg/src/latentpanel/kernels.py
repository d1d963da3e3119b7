"""Smoothing kernels on the nonnegative half-line.

All built-ins are weakly positive, strictly positive at zero, and vanish
beyond ``support_radius``. The uniform kernel is kept for sensitivity
analysis only: it is discontinuous at its support edge, so the Lipschitz
bound satisfied by the other kernels does not apply to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KernelSpec", "weight", "KERNELS"]

KERNELS = ("epanechnikov", "uniform", "triangular")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "epanechnikov"
    support_radius: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; choose from {KERNELS}")
        if not self.support_radius > 0:
            raise ValueError("support_radius must be positive")

    def __call__(self, x):
        """Unchecked vectorized evaluation; x must be nonnegative finite."""
        x = np.asarray(x, dtype=np.float64)
        u = x / self.support_radius
        inside = u <= 1.0
        if self.kind == "epanechnikov":
            vals = 0.75 * (1.0 - u * u)
        elif self.kind == "uniform":
            vals = np.full_like(u, 0.5)
        else:  # triangular
            vals = 1.0 - u
        return np.where(inside, vals, 0.0)


def weight(spec: KernelSpec, x) -> np.ndarray | float:
    """Kernel value at nonnegative x; exactly zero beyond the support radius."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("kernel argument must be nonnegative and finite")
    out = spec(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out
