"""
Error-propagation bounds and sample-complexity calculators.

Every logarithm is natural. Sample sizes are returned as integers, rounded up and floored at 1;
the large powers inside the logarithms are expanded into sums of logarithms so nothing overflows.
The outputs are conditional on the user-supplied constants C_ρ,μ, C, C_K and κ.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Annotated

from pydantic import Field

from evl_lab.errors import ComplexityError
from evl_lab.model import Model


class Norm(str, Enum):
    L1 = "l1"
    L2 = "l2"


class Variant(str, Enum):
    Display = "theorem-display"
    Appendix = "appendix-derivation"


class ComplexityInputs(Model):
    epsilon: Annotated[float, Field(gt=0, description="The target accuracy ε.")]
    delta: Annotated[float, Field(gt=0, lt=1, description="The failure probability δ.")]
    v_max: Annotated[float, Field(gt=0, description="The bound v_max on the value functions.")]
    gamma: Annotated[float, Field(gt=0, lt=1, description="The discount factor γ.")]
    c_rho_mu: Annotated[float, Field(ge=1, description="The concentrability coefficient C_ρ,μ.")] = 1.0
    c_const: Annotated[float, Field(gt=0, description="The weight bound C of the RPBF function class.")] = 1.0
    n_actions: Annotated[int, Field(ge=1, description="The number of actions |A|.")] = 2
    c_k: Annotated[float, Field(gt=0, description="The kernel-dependent constant C_K.")] = 1.0
    kappa: Annotated[float, Field(gt=0, description="κ = sup_s √K(s, s).")] = 1.0

    @property
    def v_bar(self) -> float:
        return self.v_max / self.epsilon


class RpbfComplexity(Model):
    norm: Norm
    variant: Variant
    k_star: int
    delta_prime: float
    j: int
    n: int
    m: int
    k_min: int


class RkhsComplexity(Model):
    k_star: int
    delta_prime: float
    n: int
    m: int
    k_min: int


class OneStep(Model):
    j: int | None = None
    n: int
    m: int


def _ceil(x: float) -> int:
    return max(1, math.ceil(x))


def error_bound_lp(p: float, eps: float, k: int, gamma: float, c_rho_mu: float, v_max: float) -> float:
    """
    The p-norm bound 2·((1 - γ^{K+1})/(1 - γ))^{(p-1)/p}·[C_ρ,μ^{1/p}·ε + γ^{K/p}·2v_max]
    on ‖v_K - v*‖ when every iteration's error is at most ε.

    Passing K* for k gives the bound that holds with high probability once the dominating chain has mixed.
    """
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")

    factor = ((1 - gamma ** (k + 1)) / (1 - gamma)) ** ((p - 1) / p)
    return 2 * factor * (c_rho_mu ** (1 / p) * eps + gamma ** (k / p) * 2 * v_max)


def error_bound_sup(eps: float, k: int, gamma: float, v_max: float) -> float:
    """ε/(1 - γ) + γ^K·2v_max; like `error_bound_lp`, k may be K*."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    return eps / (1 - gamma) + gamma**k * 2 * v_max


def delta_prime(delta: float, k_star: int) -> float:
    """δ' = 1 - (1 - δ/2)^{1/(K* - 1)}, the per-iteration failure probability."""
    if k_star < 2:
        raise ComplexityError(
            f"K* = {k_star} leaves δ' undefined; use a smaller ε or a larger v_max so that K* is at least 2"
        )
    return -math.expm1(math.log1p(-delta / 2) / (k_star - 1))


def k_min(delta: float, k_star: int) -> int:
    """⌈log(4/(δ·μ*(δ; K*)))⌉ with μ*(p; K*) = (1 - p)·p^{K* - 1}."""
    log_mu_star = math.log1p(-delta) + (k_star - 1) * math.log(delta)
    return _ceil(math.log(4) - math.log(delta) - log_mu_star)


def k_star_rpbf(inputs: ComplexityInputs, norm: Norm) -> int:
    log_gamma = math.log(inputs.gamma)
    match Norm(norm):
        case Norm.L1:
            return math.ceil((math.log(inputs.c_rho_mu * inputs.epsilon) - math.log(2 * inputs.v_max)) / log_gamma)
        case Norm.L2:
            return 2 * math.ceil(
                (math.log(math.sqrt(inputs.c_rho_mu) * inputs.epsilon) - math.log(2 * inputs.v_max)) / log_gamma
            )


def k_star_rkhs(inputs: ComplexityInputs) -> int:
    return math.ceil((math.log(inputs.epsilon) - math.log(4 * inputs.v_max)) / math.log(inputs.gamma))


def _j_rpbf(epsilon: float, delta: float, c_const: float) -> float:
    return (5 * c_const / epsilon * (1 + math.sqrt(2 * math.log(5 / delta)))) ** 2


def _n_rpbf(v_bar: float, j: int, prefactor_power: int, delta: float, power_inside: int) -> float:
    # 2^7 5^2 v̄^a log[(40e(J+1)/δ)(10e v̄^b)^J]
    log_term = math.log(40 * math.e * (j + 1) / delta) + j * (math.log(10 * math.e) + power_inside * math.log(v_bar))
    return 2**7 * 5**2 * v_bar**prefactor_power * log_term


def _m_rpbf(v_bar: float, n: int, n_actions: int, delta: float) -> float:
    # v̄² = v_max²/ε²
    return v_bar**2 / 2 * math.log(10 * n * n_actions / delta)


def one_step_rpbf(epsilon: float, delta: float, v_max: float, c_const: float, n_actions: int, norm: Norm) -> OneStep:
    """
    The J, N and M that bound the error of a single RPBF iteration by ε
    (plus the inherent Bellman error) in the given norm with probability at least 1 - δ.
    """
    v_bar = v_max / epsilon
    j = _ceil(_j_rpbf(epsilon, delta, c_const))
    power = 2 if Norm(norm) is Norm.L1 else 4
    n = _ceil(_n_rpbf(v_bar, j, prefactor_power=power, delta=delta, power_inside=1))
    m = _ceil(_m_rpbf(v_bar, n, n_actions, delta))
    return OneStep(j=j, n=n, m=m)


def one_step_rkhs(
    epsilon: float,
    delta: float,
    v_max: float,
    gamma: float,
    c_k: float,
    kappa: float,
    n_actions: int,
) -> OneStep:
    """The N and M that bound the sup-norm error of a single RKHS iteration by ε with probability at least 1 - δ."""
    n = _ceil((2 * c_k * kappa / epsilon) ** 6 * math.log(4 / delta) ** 2)
    argument = 4 * n_actions * gamma * (v_max - epsilon / 4) / ((4 - 2 * gamma) * epsilon)
    m = _ceil(v_max**2 / (2 * (epsilon / 4) ** 2) * math.log(argument)) if argument > 1 else 1
    return OneStep(n=n, m=m)


def complexity_rpbf(
    inputs: ComplexityInputs,
    norm: Norm,
    variant: Variant = Variant.Display,
) -> RpbfComplexity:
    """
    Sample sizes for EVL with random parametric basis functions.

    J is computed first, then N(J), then M(N). The display variant evaluates the theorem statements
    as printed: N carries δ and (10e v̄)^J for l1 but v̄⁴ and (10e v̄²)^J for l2. The appendix variant
    evaluates the one-step derivation at δ', where N carries (10e v̄)^J for both norms.
    """
    norm, variant = Norm(norm), Variant(variant)

    k_star = k_star_rpbf(inputs, norm)
    dp = delta_prime(inputs.delta, k_star)

    match variant:
        case Variant.Display:
            v_bar = inputs.v_bar
            j = _ceil(_j_rpbf(inputs.epsilon, dp, inputs.c_const))
            if norm is Norm.L1:
                n = _ceil(_n_rpbf(v_bar, j, prefactor_power=2, delta=inputs.delta, power_inside=1))
            else:
                n = _ceil(_n_rpbf(v_bar, j, prefactor_power=4, delta=inputs.delta, power_inside=2))
            m = _ceil(_m_rpbf(v_bar, n, inputs.n_actions, dp))
        case Variant.Appendix:
            step = one_step_rpbf(inputs.epsilon, dp, inputs.v_max, inputs.c_const, inputs.n_actions, norm)
            assert step.j is not None
            j, n, m = step.j, step.n, step.m

    return RpbfComplexity(
        norm=norm,
        variant=variant,
        k_star=k_star,
        delta_prime=dp,
        j=j,
        n=n,
        m=m,
        k_min=k_min(inputs.delta, k_star),
    )


def complexity_rkhs(inputs: ComplexityInputs) -> RkhsComplexity:
    """
    Sample sizes for EVL in a reproducing-kernel Hilbert space, guaranteeing ‖v_K - v*‖∞ ≤ ε:

        N∞ = (4 C_K κ / (ε(1 - γ)))⁶ · log(4/δ')²
        M∞ = 160 v_max² / (ε(1 - γ))² · log(2|A|γ(8v_max - ε(1 - γ)) / (ε(1 - γ)(2 - γ)))
        K∞* = ⌈(ln ε - ln 4v_max) / ln γ⌉
    """
    eps, gamma, v_max = inputs.epsilon, inputs.gamma, inputs.v_max

    k_star = k_star_rkhs(inputs)
    dp = delta_prime(inputs.delta, k_star)

    scaled = eps * (1 - gamma)
    n = _ceil((4 * inputs.c_k * inputs.kappa / scaled) ** 6 * math.log(4 / dp) ** 2)
    argument = 2 * inputs.n_actions * gamma * (8 * v_max - scaled) / (scaled * (2 - gamma))
    m = _ceil(160 * v_max**2 / scaled**2 * math.log(argument)) if argument > 1 else 1

    return RkhsComplexity(
        k_star=k_star,
        delta_prime=dp,
        n=n,
        m=m,
        k_min=k_min(inputs.delta, k_star),
    )
