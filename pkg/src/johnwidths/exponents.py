"""Exact width exponents of Sobolev classes on the cube.

All exponents are handled through their reciprocals, so ``p = inf`` is simply
``1/p = 0`` and every case boundary is decided in rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

HALF = Fraction(1, 2)

CASE_P_GE_Q = "p >= q"
CASE_LARGE = "2 <= p < q, r/d >= eta"
CASE_LOW = "1 <= p < q <= 2"
CASE_MIXED = "1 < p < 2 < q, r/d >= 1/p"
CASE_SMALL = "small smoothness"
CASE_GAP = "p = 1 < 2 < q, r/d >= 1"

BRANCH = {CASE_P_GE_Q: 1, CASE_LARGE: 1, CASE_LOW: 2, CASE_MIXED: 3, CASE_SMALL: 4, CASE_GAP: None}


def inverse(p) -> Fraction:
    """``1/p`` as a fraction; accepts ints, fractions, decimal strings, floats and ``inf``."""
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "+inf"):
            return Fraction(0)
        p = Fraction(p.strip())
    elif isinstance(p, float):
        if math.isinf(p):
            return Fraction(0)
        p = Fraction(str(p))
    else:
        p = Fraction(p)
    if p < 1:
        raise ValueError("exponents must lie in [1, inf]")
    return 1 / p


def _fmt(x):
    return None if x is None else str(x)


def _exp_str(ip: Fraction) -> str:
    return "inf" if ip == 0 else str(1 / ip)


def eta(ip: Fraction, iq: Fraction) -> Fraction | None:
    if iq == HALF:
        return None
    return HALF * (ip - iq) / (HALF - iq)


def matching_cases(ip: Fraction, iq: Fraction, s: Fraction) -> list:
    """Every row of the case table whose condition holds (``s = r/d``)."""
    out = []
    p_ge_q = ip <= iq
    if p_ge_q:
        out.append(CASE_P_GE_Q)
    if not p_ge_q:
        e = eta(ip, iq)
        if ip <= HALF and s >= e:
            out.append(CASE_LARGE)
        if iq >= HALF:
            out.append(CASE_LOW)
        if HALF < ip < 1 and iq < HALF and s >= ip:
            out.append(CASE_MIXED)
        if (ip > HALF and iq < HALF and s < ip) or (ip <= HALF and s < e):
            out.append(CASE_SMALL)
    return out


def _case(ip, iq, s):
    cases = matching_cases(ip, iq, s)
    if len(cases) > 1:
        raise AssertionError(f"overlapping cases {cases}")
    if cases:
        return cases[0]
    return CASE_GAP


def _theta_value(case, ip, iq, s):
    if case in (CASE_P_GE_Q, CASE_LARGE):
        return s
    if case == CASE_LOW:
        return s + iq - ip
    if case == CASE_MIXED:
        return s + HALF - ip
    if case == CASE_SMALL:
        if iq == 0:
            return None
        return (s + iq - ip) / (2 * iq)
    return None


@dataclass
class ExponentReport:
    p: str
    q: str
    r: int
    d: int
    eta: Fraction | None
    kappa: Fraction | None
    theta: Fraction | None
    theta_tilde: Fraction | None
    case: str
    case_tilde: str
    branch: int | None
    branch_tilde: int | None
    dual: bool
    flags: dict = field(default_factory=dict)

    @property
    def in_table(self) -> bool:
        return self.branch is not None

    @property
    def valid(self) -> bool:
        return all(self.flags.values())

    def to_json(self) -> dict:
        return {
            "p": self.p, "q": self.q, "r": self.r, "d": self.d,
            "eta": _fmt(self.eta), "kappa": _fmt(self.kappa),
            "theta": _fmt(self.theta), "theta_tilde": _fmt(self.theta_tilde),
            "case": self.case, "case_tilde": self.case_tilde,
            "branch": self.branch, "branch_tilde": self.branch_tilde,
            "dual_swap": self.dual, "in_table": self.in_table, "flags": dict(self.flags),
        }


def report(p, q, r: int, d: int) -> ExponentReport:
    if r < 1 or d < 1:
        raise ValueError("r and d must be positive integers")
    ip, iq = inverse(p), inverse(q)
    s = Fraction(r, d)
    smooth = s + iq - ip
    case = _case(ip, iq, s)
    th = _theta_value(case, ip, iq, s)
    dual = ip + iq < 1
    if dual:
        jp, jq = 1 - iq, 1 - ip
    else:
        jp, jq = ip, iq
    case_t = _case(jp, jq, s)
    th_t = _theta_value(case_t, jp, jq, s)
    e = eta(ip, iq) if ip > iq else None
    mixed = ip > HALF and iq < HALF  # 1 <= p < 2 < q
    flags = {
        "smoothness_positive": smooth > 0,
        "kolmogorov_not_critical": not (mixed and s == ip) and not (
            ip <= HALF and ip > iq and s == e),
        "linear_not_critical": not (mixed and s == max(ip, 1 - iq)),
    }
    return ExponentReport(
        _exp_str(ip), _exp_str(iq), r, d, e,
        1 / smooth if smooth > 0 else None, th, th_t, case, case_t,
        BRANCH[case], BRANCH[case_t], dual, flags)


def theta(p, q, r: int, d: int) -> ExponentReport:
    """Report whose ``theta`` is the Kolmogorov-width exponent."""
    return report(p, q, r, d)


def theta_tilde(p, q, r: int, d: int) -> ExponentReport:
    """Report whose ``theta_tilde`` is the linear-width exponent."""
    return report(p, q, r, d)
