"""Central-difference gradient checking for scalar functions of parameters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradcheckReport:
    ok: bool
    max_rel_err: float
    checked: int
    # worst offender: (parameter index, flat coordinate, analytic, numeric)
    worst: tuple[int, int, float, float] | None = None
    failures: list[tuple[int, int, float, float]] = field(default_factory=list)

    def __str__(self) -> str:
        status = "ok" if self.ok else "FAILED"
        msg = f"gradcheck {status}: {self.checked} coords, max rel err {self.max_rel_err:.3e}"
        if self.worst is not None:
            p, i, a, n = self.worst
            msg += f"; worst param {p} coord {i}: analytic {a:.8g} numeric {n:.8g}"
        return msg


def _rel_err(a: float, n: float) -> float:
    # absolute floor keeps near-zero gradients from blowing up the ratio
    return abs(a - n) / max(abs(a), abs(n), 1e-6)


def gradcheck(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-4,
    tol: float = 1e-4,
    max_coords: int | None = 40,
    seed: int = 0,
) -> GradcheckReport:
    """Compare autodiff gradients of ``f()`` against central differences.

    ``f`` must rebuild its graph from ``params`` on every call and be
    deterministic. Parameters should be float64. At most ``max_coords``
    coordinates per parameter are sampled (all of them when ``None``).
    """
    for p in params:
        if p.dtype != np.float64:
            raise TypeError(f"gradcheck requires float64 parameters, got {p.dtype}")
        p.grad = None
    loss = f()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    rng = np.random.default_rng(seed)
    report = GradcheckReport(ok=True, max_rel_err=0.0, checked=0)
    for pi, p in enumerate(params):
        flat = p.data.reshape(-1)
        n = flat.size
        coords = np.arange(n) if max_coords is None or n <= max_coords else rng.choice(n, max_coords, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            fp = f().item()
            flat[c] = orig - h
            fm = f().item()
            flat[c] = orig
            num = (fp - fm) / (2 * h)
            ana = float(analytic[pi].reshape(-1)[c])
            err = _rel_err(ana, num)
            report.checked += 1
            if report.worst is None or err > report.max_rel_err:
                report.max_rel_err = err
                report.worst = (pi, int(c), ana, num)
            if err > tol:
                report.ok = False
                report.failures.append((pi, int(c), ana, num))
    for p in params:
        p.grad = None
    return report
