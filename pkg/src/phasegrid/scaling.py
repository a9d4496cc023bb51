"""Hyperparameter algebra for power-law initialization scalings.

Everything here is exact symbolic bookkeeping: a scale is a power law
``coeff * m**exponent`` with the exponent kept as a `Fraction`, so the
phase coordinates (gamma2, gamma3) come out of exponent arithmetic rather
than numerical limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .errors import ConfigError


def as_fraction(x) -> Fraction:
    """Coerce an exponent-like value to an exact Fraction.

    Floats go through their shortest decimal repr, so 1.1 means 11/10
    rather than its binary expansion.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


@dataclass(frozen=True)
class PowerLaw:
    """A scale of the form coeff * m**exponent, coeff > 0."""

    coeff: float
    exponent: Fraction

    def __post_init__(self):
        if not (self.coeff > 0 and math.isfinite(self.coeff)):
            raise ConfigError(f"power-law coefficient must be positive, got {self.coeff}")
        object.__setattr__(self, "exponent", as_fraction(self.exponent))

    def value(self, m: int) -> float:
        return self.coeff * float(m) ** float(self.exponent)

    def __mul__(self, other: "PowerLaw") -> "PowerLaw":
        return PowerLaw(self.coeff * other.coeff, self.exponent + other.exponent)

    def __truediv__(self, other: "PowerLaw") -> "PowerLaw":
        return PowerLaw(self.coeff / other.coeff, self.exponent - other.exponent)

    def scaled(self, factor: float) -> "PowerLaw":
        return PowerLaw(self.coeff * factor, self.exponent)


UNIT_LAW = PowerLaw(1.0, Fraction(0))


@dataclass(frozen=True)
class HyperConfig:
    """Full initialization/scale specification at a concrete width.

    alpha_law scales the output factor, beta1/beta2/beta3 the Gaussian
    standard deviations of W1, W2 and the output layer A.
    """

    alpha_law: PowerLaw
    beta1_law: PowerLaw
    beta2_law: PowerLaw
    beta3_law: PowerLaw
    m: int
    d: int
    d_out: int = 1
    B: float | None = None  # declared beta2 = B * beta3 proportionality

    def __post_init__(self):
        if self.m < 1 or self.d < 1 or self.d_out < 1:
            raise ConfigError(f"dimensions must be positive: m={self.m} d={self.d} d_out={self.d_out}")
        if self.B is not None:
            if self.B <= 0:
                raise ConfigError(f"B must be positive, got {self.B}")
            same_exp = self.beta2_law.exponent == self.beta3_law.exponent
            same_coeff = math.isclose(self.beta2_law.coeff, self.B * self.beta3_law.coeff,
                                      rel_tol=1e-12)
            if not (same_exp and same_coeff):
                raise ConfigError(
                    f"beta2 law {self.beta2_law} is not B*beta3 with B={self.B} "
                    f"(beta3 law {self.beta3_law})")

    # concrete values at this width
    @property
    def alpha(self) -> float:
        return self.alpha_law.value(self.m)

    @property
    def beta1(self) -> float:
        return self.beta1_law.value(self.m)

    @property
    def beta2(self) -> float:
        return self.beta2_law.value(self.m)

    @property
    def beta3(self) -> float:
        return self.beta3_law.value(self.m)

    def with_width(self, m: int) -> "HyperConfig":
        """Same laws evaluated at a different width."""
        return replace(self, m=m)

    def to_dict(self) -> dict:
        return {
            "alpha": [self.alpha_law.coeff, str(self.alpha_law.exponent)],
            "beta1": [self.beta1_law.coeff, str(self.beta1_law.exponent)],
            "beta2": [self.beta2_law.coeff, str(self.beta2_law.exponent)],
            "beta3": [self.beta3_law.coeff, str(self.beta3_law.exponent)],
            "m": self.m, "d": self.d, "d_out": self.d_out, "B": self.B,
        }

    @staticmethod
    def from_dict(doc: dict) -> "HyperConfig":
        def law(key):
            c, e = doc[key]
            return PowerLaw(float(c), Fraction(e))
        return HyperConfig(law("alpha"), law("beta1"), law("beta2"), law("beta3"),
                           m=int(doc["m"]), d=int(doc["d"]),
                           d_out=int(doc.get("d_out", 1)), B=doc.get("B"))


@dataclass(frozen=True)
class ScalingSummary:
    """Scale ratios of the normalized dynamics, evaluated at one width."""

    kappa1: float
    kappa2: float
    kappa3: float
    gamma2: Fraction
    gamma3: Fraction
    time_factor: float


def kappa_laws(config: HyperConfig) -> tuple[PowerLaw, PowerLaw, PowerLaw]:
    """Symbolic laws kappa1 = b3/b2, kappa2 = b3/b1, kappa3 = b1*b2*b3/alpha."""
    k1 = config.beta3_law / config.beta2_law
    k2 = config.beta3_law / config.beta1_law
    k3 = config.beta1_law * config.beta2_law * config.beta3_law / config.alpha_law
    return k1, k2, k3


def kappas(config: HyperConfig) -> ScalingSummary:
    """Evaluate the scale ratios and phase coordinates of a configuration.

    gamma2 and gamma3 are the negative width exponents of kappa2 and
    kappa3, taken exactly from the law exponents.
    """
    k1, k2, k3 = kappa_laws(config)
    m = config.m
    k1v, k2v, k3v = k1.value(m), k2.value(m), k3.value(m)
    time_factor = (config.alpha * k1v * k2v * k3v) ** (-2.0 / 3.0)
    return ScalingSummary(
        kappa1=k1v, kappa2=k2v, kappa3=k3v,
        gamma2=-k2.exponent, gamma3=-k3.exponent,
        time_factor=time_factor,
    )


_HALF = Fraction(1, 2)


def preset(name: str, m: int, d: int, d_out: int = 1) -> HyperConfig:
    """One of the named initialization schemes (NTK, LeCun, He, Xavier).

    Xavier's fan-sum variances are not pure power laws in m; their
    coefficients here absorb the (m+1)- and (d+m)-type factors at the
    requested width, so the concrete scales are exact at this m and the
    exponents carry the large-width behavior.
    """
    key = name.strip().lower()
    if key == "ntk":
        laws = (PowerLaw(1.0, Fraction(1)), UNIT_LAW, UNIT_LAW, UNIT_LAW)
    elif key == "lecun":
        laws = (UNIT_LAW,
                PowerLaw(math.sqrt(1.0 / d), Fraction(0)),
                PowerLaw(1.0, -_HALF),
                PowerLaw(1.0, -_HALF))
    elif key == "he":
        laws = (UNIT_LAW,
                PowerLaw(math.sqrt(2.0 / d), Fraction(0)),
                PowerLaw(math.sqrt(2.0), -_HALF),
                PowerLaw(math.sqrt(2.0), -_HALF))
    elif key == "xavier":
        laws = (UNIT_LAW,
                PowerLaw(math.sqrt(2.0 * m / (d + m)), -_HALF),
                PowerLaw(1.0, -_HALF),  # sqrt(2/(m+m))
                PowerLaw(math.sqrt(2.0 * m / (m + 1)), -_HALF))
    else:
        raise ConfigError(f"unknown preset {name!r}; expected NTK, LeCun, He or Xavier")
    alpha_law, b1, b2, b3 = laws
    return HyperConfig(alpha_law, b1, b2, b3, m=m, d=d, d_out=d_out)


PRESET_NAMES = ("NTK", "LeCun", "He", "Xavier")


def config_from_gammas(gamma2, gamma3, alpha_exponent=0, *,
                       m: int, d: int = 1, d_out: int = 1, B: float = 1.0) -> HyperConfig:
    """Invert the phase coordinates to concrete power laws.

    Under beta2 = B*beta3 with a free alpha exponent e_a, the unique
    exponents are

        e_beta1       = (e_a + 2*gamma2 - gamma3) / 3
        e_beta2,beta3 = (e_a - gamma2 - gamma3) / 3

    so that kappas() round-trips to (gamma2, gamma3) exactly.
    """
    g2, g3, ea = as_fraction(gamma2), as_fraction(gamma3), as_fraction(alpha_exponent)
    e1 = (ea + 2 * g2 - g3) / 3
    e23 = (ea - g2 - g3) / 3
    return HyperConfig(
        alpha_law=PowerLaw(1.0, ea),
        beta1_law=PowerLaw(1.0, e1),
        beta2_law=PowerLaw(float(B), e23),
        beta3_law=PowerLaw(1.0, e23),
        m=m, d=d, d_out=d_out, B=float(B),
    )


def time_factor(config: HyperConfig) -> float:
    return kappas(config).time_factor


def effective_lr(config: HyperConfig, normalized_lr: float) -> float:
    """Step size in raw time that advances normalized time by normalized_lr.

    Normalized time runs at (alpha*k1*k2*k3)^(-2/3) times raw time, so
    configs sharing the kappa ratios make identical normalized progress
    per step when trained with this learning rate.
    """
    if not normalized_lr > 0:
        raise ConfigError(f"normalized_lr must be positive, got {normalized_lr}")
    return normalized_lr / time_factor(config)


def normalize(net, config: HyperConfig):
    """Rescale a network to unit-variance parameters.

    Returns (normalized network, time factor). The normalized network
    carries output scale 1/kappa3, which makes its predictions identical
    to the original's.
    """
    from .model import Network

    summary = kappas(config)
    normalized = Network(
        W1=net.W1 / config.beta1,
        W2=net.W2 / config.beta2,
        A=net.A / config.beta3,
        alpha=1.0 / summary.kappa3,
        h_const=1.0,
    )
    return normalized, summary.time_factor
