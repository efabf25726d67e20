"""Step size, truncation and block-length formulas, with provenance for every resolved value."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def default_eta(H: int, m: int, S: int, A: int) -> float:
    return 1.0 / (96.0 * H ** 2 * m * math.sqrt(S * A))


def full_info_gamma(m: int, H: int, S: int, A: int, T: int) -> float:
    if T <= 0:
        return math.inf  # no episodes: fall back to the cap
    return m * H * math.sqrt(S) * A * T ** -0.25


def gamma_cap(A: int) -> float:
    return 1.0 / (2 * A)


def block_length(H, m, S, A, T, delta, gamma, beta, epsilon) -> int:
    return math.ceil(2 * H ** 2 * math.log(m * S * A * T / delta) / (gamma * beta * epsilon ** 2))


def visit_lower_bound(gamma, beta, B, m, S, A, T, delta) -> float:
    """Per-cell visit count guaranteed with probability 1 - delta in every block."""
    return gamma * beta * B / 2 - math.log(m * S * A * T / delta)


def bandit_epsilon(H, m, S, A, T, delta, gamma, beta) -> float:
    log_term = math.log(m * S * A * T / delta) * math.log(1.0 / gamma)
    return 6 * H ** 2 * math.sqrt(m) * S ** 0.25 * A ** 0.75 * log_term ** 0.25 * (beta * gamma * T) ** -0.25


def bandit_gamma(H, m, S, A, T, delta, beta) -> float:
    log_term = math.log(m * S * A * T / delta) * math.log(T)
    return (H ** (4 / 9) * S ** (1 / 3) * A ** (5 / 9) * m ** (2 / 3) * beta ** (-1 / 9)
            * log_term ** (1 / 9) * T ** (-1 / 9))


@dataclass
class Resolved:
    """Resolved run parameters; ``provenance`` says where each one came from."""

    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def set(self, name, value, source):
        self.values[name] = value
        self.provenance[name] = source

    def __getitem__(self, name):
        return self.values[name]

    def get(self, name, default=None):
        return self.values.get(name, default)


def _gamma_or_cap(formula_value: float, A: int, formula_name: str, res: Resolved):
    cap = gamma_cap(A)
    if formula_value <= cap:
        res.set("gamma", formula_value, formula_name)
    else:
        res.set("gamma", cap, f"{formula_name} gave {formula_value:.6g} > 1/(2A); capped at 1/(2A)")


def check_gamma(gamma: float, A: int):
    if not 0 < gamma <= gamma_cap(A):
        raise ValueError(f"gamma={gamma} violates 0 < gamma <= 1/(2A) = {gamma_cap(A)}")


def resolve_full_info(H, m, S, A, T, eta=None, gamma=None) -> Resolved:
    res = Resolved()
    if eta is None:
        res.set("eta", default_eta(H, m, S, A), "default 1/(96 H^2 m sqrt(S A))")
    else:
        res.set("eta", float(eta), "override")
    if gamma is None:
        _gamma_or_cap(full_info_gamma(m, H, S, A, T), A, "default m H sqrt(S) A T^(-1/4)", res)
    else:
        check_gamma(gamma, A)
        res.set("gamma", float(gamma), "override")
    res.set("epsilon", 0.0, "full information")
    return res


def resolve_independent(H, m, S, A, T, eta=None, gamma=None) -> Resolved:
    res = Resolved()
    if eta is None:
        res.set("eta", default_eta(H, m, S, A), "default 1/(96 H^2 m sqrt(S A))")
    else:
        res.set("eta", float(eta), "override")
    if gamma is None:
        _gamma_or_cap(1.0 / T if T > 0 else math.inf, A, "default 1/T", res)
    else:
        check_gamma(gamma, A)
        res.set("gamma", float(gamma), "override")
    res.set("epsilon", 0.0, "full information")
    return res


def resolve_bandit(H, m, S, A, T, beta, delta=0.1, eta=None, gamma=None, epsilon=None,
                   block=None) -> Resolved:
    res = Resolved()
    res.set("delta", float(delta), "override" if delta != 0.1 else "default 0.1")
    res.set("beta", float(beta), "min_reachability")
    if eta is None:
        res.set("eta", default_eta(H, m, S, A), "default 1/(96 H^2 m sqrt(S A))")
    else:
        res.set("eta", float(eta), "override")
    if gamma is None:
        _gamma_or_cap(bandit_gamma(H, m, S, A, T, delta, beta), A, "default bandit gamma formula", res)
    else:
        check_gamma(gamma, A)
        res.set("gamma", float(gamma), "override")
    g = res["gamma"]
    if epsilon is None:
        res.set("epsilon", bandit_epsilon(H, m, S, A, T, delta, g, beta), "default bandit epsilon formula")
    else:
        res.set("epsilon", float(epsilon), "override")
    if block is None:
        res.set("block", block_length(H, m, S, A, T, delta, g, beta, res["epsilon"]),
                "default 2 H^2 ln(mSAT/delta) / (gamma beta epsilon^2)")
    else:
        res.set("block", int(block), "override")
    return res
