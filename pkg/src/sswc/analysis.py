"""Paired comparison of weed area between treatments."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormatError, InsufficientDataError, InvalidInputError

__all__ = [
    "PlotObservation",
    "TTestResult",
    "paired_t_test",
    "t_sf_two_sided",
    "regularized_incomplete_beta",
    "group_ratio",
    "pair_observations",
    "read_observations_csv",
]

SSWC = "SSWC"
NO_SSWC = "no-SSWC"


def _betacf(a, b, x, max_iter=500, eps=1e-16):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a, b, x):
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if not (a > 0 and b > 0):
        raise InvalidInputError("a and b must be > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t, df):
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    t2 = t * t
    x = df / (df + t2)
    if x > 0.5:
        # near t = 0, x rounds toward 1; use the complement in 1 - x computed exactly
        p = 1.0 - regularized_incomplete_beta(0.5, 0.5 * df, t2 / (df + t2))
    else:
        p = regularized_incomplete_beta(0.5 * df, 0.5, x)
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    significant: bool
    mean_difference: float
    degenerate: bool = False  # zero variance among the differences

    def to_report(self):
        return "".join(f"{k}={v!r}\n" for k, v in self.__dict__.items())


def paired_t_test(pairs, alpha=0.05):
    """Two-sided paired t-test on ``d = a - b``.

    With zero spread in ``d`` the statistic is 0 (all differences zero, p = 1)
    or infinite (p = 0); both cases set ``degenerate``.
    """
    arr = np.asarray(list(pairs), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] != 2:
        raise InsufficientDataError(f"paired t-test needs >= 2 (a, b) pairs, got {len(arr)}")
    d = arr[:, 0] - arr[:, 1]
    n = d.size
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0 or not np.any(d - d[0]):
        if mean == 0.0:
            return TTestResult(0.0, df, 1.0, False, 0.0, True)
        t = math.copysign(math.inf, mean)
        return TTestResult(t, df, 0.0, True, mean, True)
    t = mean / (sd / math.sqrt(n))
    p = t_sf_two_sided(t, df)
    return TTestResult(t, df, p, p < alpha, mean)


@dataclass(frozen=True)
class PlotObservation:
    plot_id: str
    treatment: str
    weed_area_m2: float

    def __post_init__(self):
        if not self.weed_area_m2 >= 0:
            raise InvalidInputError(f"weed area must be >= 0, got {self.weed_area_m2}")


def group_ratio(observations, numerator=SSWC, denominator=NO_SSWC) -> Optional[float]:
    """Mean weed area of ``numerator`` over that of ``denominator``; None if the latter is 0."""
    num = [o.weed_area_m2 for o in observations if o.treatment == numerator]
    den = [o.weed_area_m2 for o in observations if o.treatment == denominator]
    if not num or not den:
        raise InsufficientDataError(f"both '{numerator}' and '{denominator}' groups need observations")
    mden = sum(den) / len(den)
    if mden == 0:
        return None
    return (sum(num) / len(num)) / mden


def pair_observations(observations, first=SSWC, second=NO_SSWC):
    """Pair the k-th plot of one treatment with the k-th of the other (file order)."""
    a = [o.weed_area_m2 for o in observations if o.treatment == first]
    b = [o.weed_area_m2 for o in observations if o.treatment == second]
    if len(a) != len(b):
        raise InvalidInputError(f"unbalanced groups: {len(a)} '{first}' vs {len(b)} '{second}'")
    return list(zip(a, b))


def read_observations_csv(path):
    path = Path(path)
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"plot_id", "treatment", "weed_area_m2"}
        if not need <= set(reader.fieldnames or []):
            raise FormatError(f"header must contain {sorted(need)}", f"{path}:1")
        for lineno, rec in enumerate(reader, start=2):
            try:
                out.append(PlotObservation(rec["plot_id"], rec["treatment"].strip(),
                                           float(rec["weed_area_m2"])))
            except (ValueError, InvalidInputError) as exc:
                raise FormatError(str(exc), f"{path}:{lineno}") from None
    return out
