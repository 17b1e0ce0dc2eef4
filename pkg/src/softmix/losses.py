"""Base loss families: value, gradient and certified convexity/smoothness constants.

Four certifiable families are provided:

* ``ridge``          -- (y - <x, theta>)^2 + lam * ||theta||^2
* ``logistic``       -- log(1 + exp(-y <x, theta>)) + lam * ||theta||^2
* ``squared_hinge``  -- max(0, 1 - y <x, theta>)^2 + (lam / 2) * ||theta||^2
* ``glm``            -- (y - g(<x, theta>))^2 + lam * ||theta||^2

``plain_hinge`` (non-squared hinge plus (lam/2)||theta||^2) is also evaluable
but cannot be certified: its gradient is discontinuous, so no smoothness
constant exists.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .data import DataSet, LabeledSample

RIDGE = "ridge"
LOGISTIC = "logistic"
SQUARED_HINGE = "squared_hinge"
GLM = "glm"
PLAIN_HINGE = "plain_hinge"

FAMILIES = (RIDGE, LOGISTIC, SQUARED_HINGE, GLM, PLAIN_HINGE)
CLASSIFICATION_FAMILIES = (LOGISTIC, SQUARED_HINGE, PLAIN_HINGE)


class CertificationError(ValueError):
    """Raised when (m, M) constants cannot be certified for a model."""


@dataclass(frozen=True)
class LinkFunction:
    """Scalar link g with derivatives and the bounds used for certification.

    ``value_bound`` bounds |g|, ``d1_bound`` bounds |g'| and ``d2_bound``
    bounds |g''| over the whole real line.  ``value_bound`` may be infinite
    only when ``d2_bound`` is zero (identity-like links).
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    d2f: Callable[[np.ndarray], np.ndarray]
    value_bound: float
    d1_bound: float
    d2_bound: float


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


IDENTITY_LINK = LinkFunction(
    name="identity",
    f=lambda z: z,
    df=lambda z: np.ones_like(z),
    d2f=lambda z: np.zeros_like(z),
    value_bound=math.inf,
    d1_bound=1.0,
    d2_bound=0.0,
)

TANH_LINK = LinkFunction(
    name="tanh",
    f=np.tanh,
    df=lambda z: 1.0 / np.cosh(z) ** 2,
    d2f=lambda z: -2.0 * np.tanh(z) / np.cosh(z) ** 2,
    value_bound=1.0,
    d1_bound=1.0,
    # max |d^2 tanh / dz^2| = 4 / (3 sqrt(3))
    d2_bound=4.0 / (3.0 * math.sqrt(3.0)),
)

SIGMOID_LINK = LinkFunction(
    name="sigmoid",
    f=lambda z: _sigmoid(np.asarray(z, dtype=np.float64)),
    df=lambda z: (lambda s: s * (1.0 - s))(_sigmoid(np.asarray(z, dtype=np.float64))),
    d2f=lambda z: (lambda s: s * (1.0 - s) * (1.0 - 2.0 * s))(
        _sigmoid(np.asarray(z, dtype=np.float64))
    ),
    value_bound=1.0,
    d1_bound=0.25,
    d2_bound=1.0 / (6.0 * math.sqrt(3.0)),
)

LINKS = {lk.name: lk for lk in (IDENTITY_LINK, TANH_LINK, SIGMOID_LINK)}


@dataclass(frozen=True)
class LossModel:
    """A base loss family with regularization weight and certified constants.

    ``m`` and ``M`` are ``None`` until :func:`certify` has been run against a
    dataset; ``domain_radius`` records the covariate-norm bound those
    constants were certified for.
    """

    family: str
    lam: float = 0.0
    link: Optional[LinkFunction] = None
    domain_radius: Optional[float] = None
    m: Optional[float] = None
    M: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown loss family {self.family!r}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.family == GLM and self.link is None:
            object.__setattr__(self, "link", IDENTITY_LINK)
        if self.m is not None and self.M is not None and self.m > self.M:
            raise ValueError("m must not exceed M")

    @property
    def is_certified(self) -> bool:
        return self.m is not None and self.M is not None


def _check_inputs(model: LossModel, X: np.ndarray, y: np.ndarray, theta: np.ndarray):
    if X.shape[1] != theta.shape[0]:
        raise ValueError(
            f"dimension mismatch: covariates have d={X.shape[1]}, theta has d={theta.shape[0]}"
        )
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta contains non-finite entries")
    if model.family in CLASSIFICATION_FAMILIES:
        if not np.all(np.abs(y) == 1.0):
            raise ValueError(f"{model.family} labels must lie in {{-1, +1}}")


def batch_loss(model: LossModel, X: np.ndarray, y: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Per-sample loss values F(x_i, y_i; theta), shape (n,)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    _check_inputs(model, X, y, theta)
    z = X @ theta
    sq = float(theta @ theta)
    lam = model.lam
    if model.family == RIDGE:
        return (y - z) ** 2 + lam * sq
    if model.family == LOGISTIC:
        margin = y * z
        return np.logaddexp(0.0, -margin) + lam * sq
    if model.family == SQUARED_HINGE:
        gap = np.maximum(0.0, 1.0 - y * z)
        return gap * gap + 0.5 * lam * sq
    if model.family == PLAIN_HINGE:
        return np.maximum(0.0, 1.0 - y * z) + 0.5 * lam * sq
    # GLM
    return (y - model.link.f(z)) ** 2 + lam * sq


def batch_gradient(model: LossModel, X: np.ndarray, y: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Per-sample gradients of F with respect to theta, shape (n, d)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    _check_inputs(model, X, y, theta)
    z = X @ theta
    lam = model.lam
    if model.family == RIDGE:
        return (-2.0 * (y - z))[:, None] * X + 2.0 * lam * theta
    if model.family == LOGISTIC:
        coef = -y * _sigmoid(-y * z)
        return coef[:, None] * X + 2.0 * lam * theta
    if model.family == SQUARED_HINGE:
        gap = np.maximum(0.0, 1.0 - y * z)
        return (-2.0 * gap * y)[:, None] * X + lam * theta
    if model.family == PLAIN_HINGE:
        active = (1.0 - y * z) > 0.0
        return (-(y * active))[:, None] * X + lam * theta
    # GLM
    g = model.link.f(z)
    dg = model.link.df(z)
    return (-2.0 * (y - g) * dg)[:, None] * X + 2.0 * lam * theta


def loss_value(model: LossModel, sample: LabeledSample, theta) -> float:
    """Single-sample base loss F(x, y; theta)."""
    theta = np.asarray(theta, dtype=np.float64)
    out = batch_loss(model, sample.x[None, :], np.array([sample.y]), theta)
    return float(out[0])


def loss_gradient(model: LossModel, sample: LabeledSample, theta) -> np.ndarray:
    """Single-sample analytic gradient of F with respect to theta."""
    theta = np.asarray(theta, dtype=np.float64)
    out = batch_gradient(model, sample.x[None, :], np.array([sample.y]), theta)
    return out[0]


def _glm_constants(model: LossModel, r_sq: float, max_abs_y: float):
    link = model.link
    if not math.isfinite(link.d1_bound) or not math.isfinite(link.d2_bound):
        raise CertificationError(
            f"link {link.name!r} has unbounded derivatives; GLM constants not certifiable"
        )
    if link.d2_bound == 0.0:
        resid_term = 0.0
    else:
        if not math.isfinite(link.value_bound):
            raise CertificationError(
                f"link {link.name!r}: unbounded value with curved link is not certifiable"
            )
        resid_term = (max_abs_y + link.value_bound) * link.d2_bound
    m = 2.0 * model.lam - 2.0 * resid_term * r_sq
    M = 2.0 * (link.d1_bound ** 2 + resid_term) * r_sq + 2.0 * model.lam
    if m <= 0.0:
        raise CertificationError(
            "GLM loss not strongly convex on this dataset: need "
            f"lam > {resid_term * r_sq:.6g} (residual curvature bound)"
        )
    return m, M


def certify(model: LossModel, dataset: DataSet) -> LossModel:
    """Return a copy of ``model`` carrying (m, M) valid over ``dataset``.

    Raises :class:`CertificationError` when strong convexity fails (for
    instance lam = 0) or when the family admits no smoothness constant.
    """
    if len(dataset) == 0:
        raise ValueError("cannot certify constants against an empty dataset")
    r_sq = dataset.max_sq_norm()
    if model.domain_radius is not None:
        if r_sq > model.domain_radius ** 2 * (1.0 + 1e-12):
            raise CertificationError(
                "dataset contains covariates outside the declared domain radius"
            )
        r_sq = model.domain_radius ** 2
    lam = model.lam
    if model.family == RIDGE:
        if lam <= 0:
            raise CertificationError("ridge loss with lam = 0 is not strongly convex")
        m, M = 2.0 * lam, 2.0 * r_sq + 2.0 * lam
    elif model.family == LOGISTIC:
        if lam <= 0:
            raise CertificationError("logistic loss needs lam > 0 for strong convexity")
        m, M = 2.0 * lam, r_sq / 4.0 + 2.0 * lam
    elif model.family == SQUARED_HINGE:
        if lam <= 0:
            raise CertificationError("squared hinge loss needs lam > 0 for strong convexity")
        m, M = lam, 2.0 * r_sq + lam
    elif model.family == GLM:
        m, M = _glm_constants(model, r_sq, float(np.max(np.abs(dataset.y))))
    else:
        raise CertificationError(
            "plain hinge loss is not smooth; no (m, M) certificate exists"
        )
    return dataclasses.replace(model, m=m, M=M, domain_radius=math.sqrt(r_sq))


def certify_constants(model: LossModel, dataset: DataSet) -> tuple[float, float]:
    """Analytic (m, M) valid over ``dataset`` (see :func:`certify`)."""
    certified = certify(model, dataset)
    return certified.m, certified.M


def mean_smoothness(model: LossModel, dataset: DataSet) -> float:
    """Smoothness constant of the dataset-averaged base loss.

    Same family formulas as :func:`certify`, with max_i ||x_i||^2 replaced by
    the top eigenvalue of the empirical second-moment matrix (1/n) X^T X.
    This is the constant the default step size is derived from; the
    per-sample worst case in :func:`certify` can be orders of magnitude
    larger on heavy-tailed data and yields uselessly small steps.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    second_moment = dataset.X.T @ dataset.X / len(dataset)
    top = float(np.linalg.eigvalsh(second_moment)[-1])
    lam = model.lam
    if model.family == RIDGE:
        return 2.0 * top + 2.0 * lam
    if model.family == LOGISTIC:
        return top / 4.0 + 2.0 * lam
    if model.family == SQUARED_HINGE:
        return 2.0 * top + lam
    if model.family == GLM:
        link = model.link
        resid = (
            0.0
            if link.d2_bound == 0.0
            else (float(np.max(np.abs(dataset.y))) + link.value_bound) * link.d2_bound
        )
        return 2.0 * (link.d1_bound ** 2 + resid) * top + 2.0 * lam
    raise CertificationError("plain hinge loss has no smoothness constant")


def default_step_size(model: LossModel, dataset: DataSet) -> float:
    """Default gradient EM step size, 1 / (2 * mean-loss smoothness)."""
    return 1.0 / (2.0 * mean_smoothness(model, dataset))
