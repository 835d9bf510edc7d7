"""Observer-based release laws.

Two feedback laws computed from the framer pair (never from the true state):

* adult release: u_A is a clamped linear form in the framer components that
  forces the infected-adult population to dominate k_U times the uninfected
  one at exponential rate k; u_L = 0.
* larvae release: u_L is the product of the two upper larval estimates,
  which dominates the competition term L_U * L_W whenever the enclosure
  holds; u_A = 0.

Both laws are minimal admissible controls (equality in the theoretical
lower bound) and switch on at an activation time T (zero before T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError
from .model import ControlInput, ModelParams
from .observer import ObserverPair
from . import kernels

__all__ = [
    "AdultLawParams",
    "LawChoice",
    "adult_release",
    "larvae_release",
    "control_at",
]

_LAW_CODES = {"none": kernels.LAW_NONE, "adult": kernels.LAW_ADULT, "larvae": kernels.LAW_LARVAE}


@dataclass(frozen=True)
class AdultLawParams:
    """Constants of the adult-release law.

    k is the contraction rate of the dominance gap (per normalized time);
    k_U is the population-ratio threshold and must exceed R0_U - 1 for the
    model the law is used with (checked by validate_against, which the
    evaluation and scenario paths call).

    positive_lower_terms selects a published variant of the gain row whose
    entries multiplying the lower adult estimates enter with positive sign;
    the default (False) uses the signs required by the underlying
    contraction argument.  The two variants coincide when k equals gamma_W
    and gamma_U < k.
    """

    k: float
    k_U: float
    positive_lower_terms: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k > 0.0):
            raise ValidationError(f"k must be a finite positive rate, got {self.k!r}")
        if not math.isfinite(self.k_U):
            raise ValidationError(f"k_U must be finite, got {self.k_U!r}")

    def validate_against(self, p: ModelParams) -> None:
        """Raise unless k_U > R0_U - 1 for this model."""
        if not self.k_U > p.R0_U - 1.0:
            raise ValidationError(
                f"k_U must exceed R0_U - 1 = {p.R0_U - 1.0}, got k_U = {self.k_U}"
            )

    @classmethod
    def for_model(cls, p: ModelParams, margin: float = 1.1) -> "AdultLawParams":
        """Reference tuning: k = gamma_W, k_U = margin * (R0_U - 1)."""
        if not margin > 1.0:
            raise ValidationError(f"margin must be > 1, got {margin!r}")
        return cls(k=p.gamma_W, k_U=margin * (p.R0_U - 1.0))


@dataclass(frozen=True)
class LawChoice:
    """Which release law runs, with its activation time.

    tag is one of "adult", "larvae", "none"; adult_params is required
    exactly when tag == "adult"; the control is identically zero for
    t < activation_time.
    """

    tag: str
    adult_params: Optional[AdultLawParams] = None
    activation_time: float = 0.0

    def __post_init__(self):
        if self.tag not in _LAW_CODES:
            raise ValidationError(
                f'tag must be one of "adult", "larvae", "none", got {self.tag!r}'
            )
        if self.tag == "adult" and self.adult_params is None:
            raise ValidationError('tag "adult" requires adult_params')
        if self.tag != "adult" and self.adult_params is not None:
            raise ValidationError(f'adult_params given but tag is {self.tag!r}')
        if not (math.isfinite(self.activation_time) and self.activation_time >= 0.0):
            raise ValidationError(
                f"activation_time must be >= 0, got {self.activation_time!r}"
            )

    @property
    def law_code(self) -> int:
        return _LAW_CODES[self.tag]


def _eval(law_code, gamma_U, gamma_W, obs, k, k_U, t, t_activate, positive_lower) -> ControlInput:
    u_L, u_A = kernels.control_eval(
        law_code,
        gamma_U,
        gamma_W,
        k,
        k_U,
        t_activate,
        positive_lower,
        t,
        np.asarray(obs.x_minus, dtype=np.float64),
        np.asarray(obs.x_plus, dtype=np.float64),
    )
    return ControlInput(u_L=float(u_L), u_A=float(u_A))


def adult_release(lp: AdultLawParams, p: ModelParams, obs: ObserverPair) -> ControlInput:
    """Adult-release law evaluated on the current framer pair.

    u_L = 0 and
    u_A = max(0, k_U L_U^+ + k_U |k-gamma_U|_+ A_U^+ - k_U |k-gamma_U|_- A_U^-
                 - L_W^- + |gamma_W-k|_+ A_W^+ - |gamma_W-k|_- A_W^-),
    where |r|_+ = max(r, 0) and |r|_- = max(-r, 0).  With
    positive_lower_terms the two subtracted estimate terms enter with
    positive sign instead.
    """
    lp.validate_against(p)
    return _eval(
        kernels.LAW_ADULT,
        p.gamma_U,
        p.gamma_W,
        obs,
        lp.k,
        lp.k_U,
        0.0,
        0.0,
        lp.positive_lower_terms,
    )


def larvae_release(obs: ObserverPair) -> ControlInput:
    """Larvae-release law: u_L = L_U^+ * L_W^+, u_A = 0."""
    return _eval(kernels.LAW_LARVAE, 0.0, 0.0, obs, 0.0, 0.0, 0.0, 0.0, False)


def control_at(
    choice: LawChoice, p: ModelParams, obs: ObserverPair, t: float
) -> ControlInput:
    """Dispatch the selected law at time t (zero before the activation time)."""
    if not (math.isfinite(t) and t >= 0.0):
        raise ValidationError(f"t must be >= 0, got {t!r}")
    if choice.tag == "none":
        return ControlInput(0.0, 0.0)
    if choice.tag == "adult":
        lp = choice.adult_params
        lp.validate_against(p)
        return _eval(
            kernels.LAW_ADULT,
            p.gamma_U,
            p.gamma_W,
            obs,
            lp.k,
            lp.k_U,
            t,
            choice.activation_time,
            lp.positive_lower_terms,
        )
    return _eval(
        kernels.LAW_LARVAE, 0.0, 0.0, obs, 0.0, 0.0, t, choice.activation_time, False
    )
