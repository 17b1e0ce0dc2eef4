"""Seeded synthetic dataset generators and bit-stable dataset file formats.

Every sample draws from its own Philox substream (key = seed * 2**64 + i),
so generation order and any future parallel split cannot change the output.
The reserved substream index 2**63 seeds the default truth parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import DataSet, ParamSet

GENERATIVE_MLR = "generative_mlr"
GENERATIVE_LOGISTIC = "generative_logistic"
AGNOSTIC_PIECEWISE = "agnostic_piecewise"
HEAVY_TAIL_MLR = "heavy_tail_mlr"
KINDS = (GENERATIVE_MLR, GENERATIVE_LOGISTIC, AGNOSTIC_PIECEWISE, HEAVY_TAIL_MLR)

COVARIATES = ("gaussian", "student_t", "uniform_ball")

_TRUTH_STREAM = 2 ** 63


@dataclass(frozen=True)
class GenSpec:
    """Recipe for one synthetic dataset.

    ``margin`` > 0 rejection-samples covariates until the squared linear
    predictor gap min_{l != z} <x, theta_z - theta_l>^2 is at least
    ``margin``, which lower-bounds the empirical separation delta.
    ``perturb_amplitude`` scales the deterministic label perturbation of the
    agnostic kind (drives epsilon, epsilon1).
    """

    kind: str
    k: int
    d: int
    n: int
    noise_sigma: float = 0.0
    mix_weights: Optional[tuple] = None
    covariate: str = "gaussian"
    cov_scale: float = 1.0
    t_dof: int = 5
    seed: int = 0
    truth: Optional[ParamSet] = None
    truth_scale: float = 1.0
    perturb_amplitude: float = 0.0
    margin: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.covariate not in COVARIATES:
            raise ValueError(f"unknown covariate family {self.covariate!r}")
        if self.k < 1 or self.n < self.k or self.d < 1:
            raise ValueError("need k >= 1, d >= 1 and n >= k")
        if self.noise_sigma < 0 or self.margin < 0 or self.perturb_amplitude < 0:
            raise ValueError("noise_sigma, margin and perturb_amplitude must be >= 0")
        if self.t_dof < 3:
            raise ValueError("Student-t dof must be >= 3 for finite variance")
        if self.mix_weights is not None:
            w = np.asarray(self.mix_weights, dtype=np.float64)
            if w.shape != (self.k,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("mix_weights must be a k-simplex vector")
        if self.truth is not None and (
            self.truth.k != self.k or self.truth.d != self.d
        ):
            raise ValueError("truth ParamSet shape does not match (k, d)")


def _substream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed * 2 ** 64 + index))


def _default_truth(spec: GenSpec) -> ParamSet:
    rng = _substream(spec.seed, _TRUTH_STREAM)
    thetas = rng.standard_normal((spec.k, spec.d))
    thetas /= np.linalg.norm(thetas, axis=1, keepdims=True)
    return ParamSet(spec.truth_scale * thetas)


def _draw_covariate(rng: np.random.Generator, spec: GenSpec) -> np.ndarray:
    cov = "student_t" if spec.kind == HEAVY_TAIL_MLR else spec.covariate
    if cov == "gaussian":
        return spec.cov_scale * rng.standard_normal(spec.d)
    if cov == "student_t":
        return spec.cov_scale * rng.standard_t(spec.t_dof, spec.d)
    # uniform over the ball of radius cov_scale
    direction = rng.standard_normal(spec.d)
    direction /= np.linalg.norm(direction)
    radius = spec.cov_scale * rng.random() ** (1.0 / spec.d)
    return radius * direction


def _accept(x: np.ndarray, z: int, truth: np.ndarray, margin: float) -> bool:
    if margin == 0.0 or truth.shape[0] == 1:
        return True
    gaps = (truth - truth[z]) @ x
    gaps = np.delete(gaps, z)
    return bool(np.min(gaps * gaps) >= margin)


def generate(spec: GenSpec) -> tuple[DataSet, ParamSet]:
    """Materialize the dataset and the truth ParamSet for a GenSpec."""
    truth = spec.truth if spec.truth is not None else _default_truth(spec)
    thetas = truth.thetas
    weights = (
        np.full(spec.k, 1.0 / spec.k)
        if spec.mix_weights is None
        else np.asarray(spec.mix_weights, dtype=np.float64)
    )
    cumw = np.cumsum(weights)
    X = np.empty((spec.n, spec.d))
    y = np.empty(spec.n)
    for i in range(spec.n):
        rng = _substream(spec.seed, i)
        z = int(np.searchsorted(cumw, rng.random(), side="right"))
        z = min(z, spec.k - 1)
        while True:
            x = _draw_covariate(rng, spec)
            if _accept(x, z, thetas, spec.margin):
                break
        pred = float(x @ thetas[z])
        if spec.kind in (GENERATIVE_MLR, HEAVY_TAIL_MLR):
            label = pred + spec.noise_sigma * rng.standard_normal()
        elif spec.kind == GENERATIVE_LOGISTIC:
            p_pos = 1.0 / (1.0 + math.exp(-pred)) if pred > -700 else 0.0
            label = 1.0 if rng.random() < p_pos else -1.0
        else:  # AGNOSTIC_PIECEWISE: deterministic, asymmetric, bounded
            norm_z = float(np.linalg.norm(thetas[z]))
            unit_pred = pred / norm_z if norm_z > 0 else 0.0
            label = pred + spec.perturb_amplitude * (0.6 + 0.4 * math.tanh(unit_pred))
        X[i] = x
        y[i] = label
    return DataSet(X, y), truth


# ---------------------------------------------------------------------------
# file formats


def save_csv(dataset: DataSet, path) -> None:
    """CSV with header x_0..x_{d-1},y; 17 significant digits round-trips
    float64 exactly."""
    header = ",".join([f"x_{i}" for i in range(dataset.d)] + ["y"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(dataset.n):
            row = list(dataset.X[i]) + [dataset.y[i]]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_csv(path) -> DataSet:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[-1] != "y" or not header[0].startswith("x_"):
            raise ValueError(f"{path}: not a softmix dataset CSV (bad header)")
        d = len(header) - 1
        rows = [[float(tok) for tok in line.split(",")] for line in fh if line.strip()]
    arr = np.asarray(rows, dtype=np.float64)
    if arr.shape[1] != d + 1:
        raise ValueError(f"{path}: inconsistent column count")
    return DataSet(arr[:, :d], arr[:, d])


def save_records(dataset: DataSet, path, kind: str = "unknown", seed: int = 0) -> None:
    """Line-delimited hex-float records with a one-line header."""
    with open(path, "w") as fh:
        fh.write(f"# softmix-dataset d={dataset.d} n={dataset.n} kind={kind} seed={seed}\n")
        for i in range(dataset.n):
            toks = [float(v).hex() for v in dataset.X[i]] + [float(dataset.y[i]).hex()]
            fh.write(" ".join(toks) + "\n")


def load_records(path) -> tuple[DataSet, dict]:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# softmix-dataset "):
            raise ValueError(f"{path}: missing softmix-dataset header")
        meta = {}
        for tok in header.split()[2:]:
            key, val = tok.split("=", 1)
            meta[key] = val
        d, n = int(meta["d"]), int(meta["n"])
        rows = [
            [float.fromhex(tok) for tok in line.split()] for line in fh if line.strip()
        ]
    arr = np.asarray(rows, dtype=np.float64)
    if arr.shape != (n, d + 1):
        raise ValueError(f"{path}: body does not match header dimensions")
    return DataSet(arr[:, :d], arr[:, d]), meta
