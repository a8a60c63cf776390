"""Pinsker-type tapered weight family over a smoothness/scale grid.

Each weight vector keeps the first coefficients untouched (plateau up to
j* = 1 + floor(ln n)), tapers polynomially as 1 - (j/omega)^beta up to
its cutoff omega, and is zero beyond.  The family ranges over
beta in {1..k*} and scale l in {eps, 2 eps, ..., m eps} with the
schedules k* = ceil(k0 + sqrt(ln n)), eps = 1/ln n, m = floor(1/eps^2).
"""

import csv
import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np


@dataclass(frozen=True)
class WeightGridParams:
    """Schedule parameters for the (beta, scale) grid."""

    k_star0: float
    n: int
    d: int

    def __post_init__(self):
        if self.k_star0 < 0:
            raise ValueError("k_star0 must be >= 0")
        if self.n < 3:
            raise ValueError("need n >= 3 so the scale step 1/ln n is < 1")
        if self.d < 1:
            raise ValueError("need d >= 1")

    @property
    def k_star(self) -> int:
        return max(1, math.ceil(self.k_star0 + math.sqrt(math.log(self.n))))

    @property
    def eps(self) -> float:
        return 1.0 / math.log(self.n)

    @property
    def m(self) -> int:
        return int(1.0 / self.eps ** 2)

    @property
    def j_star(self) -> int:
        return 1 + int(math.log(self.n))


@dataclass(frozen=True)
class WeightVector:
    """One tapered weight vector indexed by alpha = (beta, l)."""

    alpha: tuple[int, float]
    omega: float
    values: np.ndarray


def taper_coefficient(beta: int) -> float:
    """Normalizing constant (beta+1)(2 beta+1) / (pi^(2 beta) beta)."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    return (beta + 1) * (2 * beta + 1) / (math.pi ** (2 * beta) * beta)


def weight_values(beta: int, omega: float, j_star: int, d: int) -> np.ndarray:
    j = np.arange(1, d + 1, dtype=np.float64)
    vals = np.zeros(d)
    vals[j < j_star] = 1.0
    mid = (j >= j_star) & (j <= omega)
    vals[mid] = 1.0 - (j[mid] / omega) ** beta
    return vals


def build_weight_family(params: WeightGridParams) -> list[WeightVector]:
    """Construct the family ordered lexicographically in (beta, l)."""
    family = []
    n, d, j_star = params.n, params.d, params.j_star
    for beta in range(1, params.k_star + 1):
        coeff = taper_coefficient(beta)
        for i in range(1, params.m + 1):
            scale = i * params.eps
            omega = (coeff * scale * n) ** (1.0 / (2 * beta + 1))
            family.append(WeightVector(alpha=(beta, scale), omega=omega,
                                       values=weight_values(beta, omega, j_star, d)))
    return family


def family_metadata(family: Sequence[WeightVector]) -> dict:
    """Cardinalities and the squared/unioned companion families.

    nu_star is the largest support size; Lambda1 holds the squared
    vectors; Lambda2 is the union of the family with Lambda1 (duplicates
    removed, first occurrence kept).
    """
    arrays = [np.asarray(getattr(w, "values", w), dtype=np.float64) for w in family]
    nu = len(arrays)
    nu_star = max(int(np.count_nonzero(v > 0)) for v in arrays) if arrays else 0
    lambda1 = [v ** 2 for v in arrays]
    seen = set()
    lambda2 = []
    for v in list(arrays) + lambda1:
        key = v.tobytes()
        if key not in seen:
            seen.add(key)
            lambda2.append(v)
    return {"nu": nu, "nu_star": nu_star, "Lambda1": lambda1, "Lambda2": lambda2}


def family_to_csv(family: Sequence[WeightVector], out: IO[str]) -> None:
    """Dump (beta, l, omega, support length, first five weights) rows."""
    w = csv.writer(out)
    w.writerow(["beta", "l", "omega", "support", "w1", "w2", "w3", "w4", "w5"])
    for wv in family:
        support = int(np.count_nonzero(wv.values > 0))
        head = [repr(float(v)) for v in wv.values[:5]]
        head += [""] * (5 - len(head))
        w.writerow([wv.alpha[0], repr(float(wv.alpha[1])), repr(float(wv.omega)),
                    support, *head])
