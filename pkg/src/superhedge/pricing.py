"""Super-hedge fair prices, closed forms and non-arbitrage intervals.

The fair price of a super-hedge is the supremum of the claim's expectation
over the martingale-measure family, which reduces to a supremum over spot
measures.  On a finite shock space the supremum over model atoms is exact
(``discrete_exhaustive``); the family's analytic supremum treats the shock
values as free and is approached by ``grid`` / ``coordinate_ascent``
searches and attained by the closed forms:

    call(K):        (s0 - K)^+            if s0 * prod(1 - a_i) >= K
                    s0 * (1 - prod(1-a))  otherwise
    put(K):         (K - s0 * prod(1 - a_i))^+
    asian put(K):   (K - mean_min)^+
    asian call(K):  (s0 - K)^+ if mean_min >= K, else (s0 - K) + (K - mean_min)

with ``mean_min = s0 * sum_{i=0..N} prod_{s<=i}(1 - a_s) / (N + 1)``, the
arithmetic path mean of the all-down limit.  Grid-mode results carry a
crude one-sided gap bound ``s0 * N * (exp(-sigma_lo*hi) + exp(sigma_lo*lo))``
so search values are never silently conflated with the analytic limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _tree_py
from .backend import kernels
from .errors import CapExceededError, ValidationError
from .measures import (SELECTION_CAP, AtomPairSelection, _spot_walk,
                       all_selections, selection_count, spot_expectation,
                       spot_tree_value)
from .model import PATH_CAP, EvolutionModel, require_valid

_PAYOFF_KINDS = ("const", "call", "put", "asian_call", "asian_put", "pwl",
                 "table")
_KERNEL_CODES = {"const": 0, "call": 1, "put": 2, "asian_call": 3,
                 "asian_put": 4, "pwl": 5}


@dataclass(frozen=True)
class Payoff:
    """A nonnegative claim on the price path."""

    kind: str
    strike: float = 0.0
    const_value: float = 0.0
    knots: tuple[tuple[float, float], ...] = ()
    right_slope: float = 0.0
    table: Mapping[tuple[int, ...], float] | None = None

    def __post_init__(self):
        if self.kind not in _PAYOFF_KINDS:
            raise ValidationError(f"unknown payoff kind {self.kind!r}")
        if self.kind in ("call", "put", "asian_call", "asian_put"):
            if not self.strike > 0:
                raise ValidationError("strike must be positive")
        if self.kind == "const" and self.const_value < 0:
            raise ValidationError("constant payoff must be nonnegative")
        if self.kind == "pwl":
            xs = [x for x, _ in self.knots]
            ys = [y for _, y in self.knots]
            if not xs or xs[0] != 0.0:
                raise ValidationError("piecewise payoff needs a knot at x = 0")
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValidationError("knot x values must strictly increase")
            if any(y < 0 for y in ys):
                raise ValidationError("knot values must be nonnegative")
            if self.right_slope < 0:
                raise ValidationError("right slope must be nonnegative")
        if self.kind == "table" and self.table is None:
            raise ValidationError("table payoff needs a path table")

    # constructors -------------------------------------------------------
    @staticmethod
    def call(strike: float) -> "Payoff":
        return Payoff("call", strike=float(strike))

    @staticmethod
    def put(strike: float) -> "Payoff":
        return Payoff("put", strike=float(strike))

    @staticmethod
    def asian_call(strike: float) -> "Payoff":
        return Payoff("asian_call", strike=float(strike))

    @staticmethod
    def asian_put(strike: float) -> "Payoff":
        return Payoff("asian_put", strike=float(strike))

    @staticmethod
    def constant(c: float) -> "Payoff":
        return Payoff("const", const_value=float(c))

    @staticmethod
    def piecewise_linear(knots: Sequence[tuple[float, float]],
                         right_slope: float) -> "Payoff":
        return Payoff("pwl", knots=tuple((float(x), float(y))
                                         for x, y in knots),
                      right_slope=float(right_slope))

    @staticmethod
    def path_table(table: Mapping[tuple[int, ...], float]) -> "Payoff":
        return Payoff("table", table=dict(table))

    # evaluation ---------------------------------------------------------
    def kernel_encoding(self, n_steps: int):
        if self.kind == "table":
            return None
        code = _KERNEL_CODES[self.kind]
        if self.kind == "const":
            return (code, self.const_value, [], [])
        if self.kind == "pwl":
            return (code, self.right_slope, [x for x, _ in self.knots],
                    [y for _, y in self.knots])
        return (code, self.strike, [], [])

    def value(self, prices: Sequence[float], atoms=None) -> float:
        if self.kind == "table":
            if atoms is None:
                raise ValidationError("path-table payoff needs atom indices")
            try:
                return float(self.table[tuple(atoms)])
            except KeyError:
                raise ValidationError(f"path {tuple(atoms)} missing from table")
        code, pa, pxs, pys = self.kernel_encoding(len(prices) - 1)
        path_sum = 0.0
        if code in (3, 4):
            for p in prices:
                path_sum += p
        return _tree_py.payoff_value(code, pa, pxs, pys, prices[-1], path_sum,
                                     float(len(prices)))

    def terminal_value(self, x: float) -> float:
        """Evaluate payoffs that depend only on the terminal price."""
        if self.kind not in ("const", "call", "put", "pwl"):
            raise ValidationError(
                f"{self.kind} payoff is not a function of the terminal price")
        code, pa, pxs, pys = self.kernel_encoding(1)
        return _tree_py.payoff_value(code, pa, pxs, pys, x, 0.0, 1.0)

    @property
    def is_convex(self) -> bool:
        if self.kind in ("const", "call", "put", "asian_call", "asian_put"):
            return True
        if self.kind == "pwl":
            xs = [x for x, _ in self.knots]
            ys = [y for _, y in self.knots]
            slopes = [(y1 - y0) / (x1 - x0) for (x0, y0), (x1, y1)
                      in zip(self.knots, self.knots[1:])]
            slopes.append(self.right_slope)
            return all(s1 >= s0 - 1e-15 for s0, s1 in zip(slopes, slopes[1:]))
        return False


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "discrete_exhaustive"
    eps_range: tuple[float, float] = (-12.0, 12.0)
    grid_points: int = 49
    tol: float = 1e-12
    max_rounds: int = 50

    def __post_init__(self):
        if self.mode not in ("discrete_exhaustive", "grid", "coordinate_ascent"):
            raise ValidationError(f"unknown search mode {self.mode!r}")
        lo, hi = self.eps_range
        if not lo < 0 < hi:
            raise ValidationError("eps_range must straddle zero")
        if self.grid_points < 3:
            raise ValidationError("grid_points must be at least 3")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")


@dataclass(frozen=True)
class PriceInterval:
    lower: float
    upper: float
    attained_lower: bool
    attained_upper: bool
    provenance: str

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValidationError("interval lower endpoint exceeds upper")


@dataclass(frozen=True)
class SupResult:
    value: float
    selection: AtomPairSelection | None
    eps_pairs: tuple[tuple[float, float], ...]
    mode: str
    provenance: str
    gap_bound: float | None = None


@dataclass(frozen=True)
class InfResult:
    value: float
    exact: bool
    provenance: str


# -- searches --------------------------------------------------------------

def _scan_python(model: EvolutionModel, payoff: Payoff, dn_cands, up_cands,
                 atoms_dn=None, atoms_up=None):
    """Generic exhaustive scan, iteration order matching the kernels."""
    import itertools

    n = model.n_steps
    per_step = [[(i, j) for i in range(len(dn_cands[st]))
                 for j in range(len(up_cands[st]))] for st in range(n)]
    best = -math.inf
    best_pairs = None
    for combo in itertools.product(*per_step):
        eps_dn = [dn_cands[st][combo[st][0]] for st in range(n)]
        eps_up = [up_cands[st][combo[st][1]] for st in range(n)]
        if atoms_dn is not None:
            sel_dn = [atoms_dn[st][combo[st][0]] for st in range(n)]
            sel_up = [atoms_up[st][combo[st][1]] for st in range(n)]
            fn = payoff.value
            value = _spot_walk(model, eps_dn, eps_up,
                               lambda p, ats: fn(p, ats), sel_dn, sel_up)
        else:
            value = spot_tree_value(model, eps_dn, eps_up, payoff)
        if value > best:
            best = value
            best_pairs = combo
    return best, [tuple(p) for p in best_pairs]


def _run_scan(model: EvolutionModel, payoff: Payoff, dn_cands, up_cands,
              atoms_dn=None, atoms_up=None):
    enc = payoff.kernel_encoding(model.n_steps)
    if enc is not None:
        vk, vp = model.kernel_vol_arrays()
        pkind, pa, pxs, pys = enc
        return kernels.scan_selections(model.s0, [s.a for s in model.steps],
                                       vk, vp, dn_cands, up_cands,
                                       pkind, pa, pxs, pys)
    return _scan_python(model, payoff, dn_cands, up_cands, atoms_dn, atoms_up)


def _grid_candidates(model: EvolutionModel, config: SearchConfig):
    lo, hi = config.eps_range
    pts = [float(x) for x in np.linspace(lo, hi, config.grid_points)]
    downs = [x for x in pts if x < 0.0]          # ascending: extreme first
    ups = sorted((x for x in pts if x > 0.0), reverse=True)
    if not downs or not ups:
        raise ValidationError("grid contains no sign-separated eps values")
    return [downs] * model.n_steps, [ups] * model.n_steps


def _sigma_lower_bound(model: EvolutionModel) -> float:
    out = math.inf
    for step in model.steps:
        out = min(out, step.vol.sigma if step.vol.kind == "constant"
                  else step.vol.floor)
    return out


def _grid_gap_bound(model: EvolutionModel, config: SearchConfig) -> float:
    lo, hi = config.eps_range
    s_lo = _sigma_lower_bound(model)
    return model.s0 * model.n_steps * (math.exp(-s_lo * hi)
                                       + math.exp(s_lo * lo))


def _ascent(model: EvolutionModel, payoff: Payoff, dn_cands, up_cands,
            config: SearchConfig):
    """Coordinate ascent over per-step pairs, extreme pair as the start.

    Sweeps update one step at a time; ties inside a sweep keep the incumbent,
    and candidate order (down ascending, up descending) starts each scan at
    the largest |eps|, so ties resolve toward larger shocks.
    """
    n = model.n_steps
    state = [(0, 0)] * n

    def eval_state(st_pairs):
        eps_dn = [dn_cands[st][st_pairs[st][0]] for st in range(n)]
        eps_up = [up_cands[st][st_pairs[st][1]] for st in range(n)]
        return spot_tree_value(model, eps_dn, eps_up, payoff)

    best = eval_state(state)
    for _ in range(config.max_rounds):
        round_start = best
        for st in range(n):
            for i in range(len(dn_cands[st])):
                for j in range(len(up_cands[st])):
                    trial = list(state)
                    trial[st] = (i, j)
                    v = eval_state(trial)
                    if v > best:
                        best = v
                        state = trial
        if best - round_start <= config.tol:
            break
    return best, state


def superhedge_sup(model: EvolutionModel, payoff: Payoff,
                   config: SearchConfig) -> SupResult:
    """Supremum of the spot-measure expectation per the configured search."""
    require_valid(model)
    n = model.n_steps
    if 2 ** n > PATH_CAP:
        raise CapExceededError(f"2^{n} tree branches exceed the path cap")

    if config.mode == "discrete_exhaustive":
        if model.pricing_only:
            raise ValidationError("pricing-only model has no shock atoms")
        count = selection_count(model)
        if count == 0:
            raise ValidationError("no strictly negative or no positive atom")
        if count > SELECTION_CAP:
            raise CapExceededError(f"{count} selections exceed cap")
        atoms_dn = [list(model.strict_down_indices(k)) for k in range(1, n + 1)]
        atoms_up = [list(model.up_indices(k)) for k in range(1, n + 1)]
        dn_cands = [[model.steps[k].shocks[i].eps for i in atoms_dn[k]]
                    for k in range(n)]
        up_cands = [[model.steps[k].shocks[i].eps for i in atoms_up[k]]
                    for k in range(n)]
        value, pairs = _run_scan(model, payoff, dn_cands, up_cands,
                                 atoms_dn, atoms_up)
        selection = AtomPairSelection(tuple(
            (atoms_dn[st][pairs[st][0]], atoms_up[st][pairs[st][1]])
            for st in range(n)))
        eps_pairs = tuple((dn_cands[st][pairs[st][0]],
                           up_cands[st][pairs[st][1]]) for st in range(n))
        return SupResult(value, selection, eps_pairs, config.mode,
                         "exact maximum over model-atom selections")

    if payoff.kind == "table":
        raise ValidationError("path-table payoffs require model atoms")

    dn_cands, up_cands = _grid_candidates(model, config)
    pair_count = len(dn_cands[0]) * len(up_cands[0])
    combos = pair_count ** n
    gap = _grid_gap_bound(model, config)

    if config.mode == "grid" and combos <= SELECTION_CAP:
        value, pairs = _run_scan(model, payoff, dn_cands, up_cands)
        how = "exhaustive grid scan"
    else:
        value, pairs = _ascent(model, payoff, dn_cands, up_cands, config)
        how = ("coordinate ascent on the grid (combination count "
               f"{combos} above cap)" if config.mode == "grid"
               else "coordinate ascent on the grid")
    eps_pairs = tuple((dn_cands[st][pairs[st][0]], up_cands[st][pairs[st][1]])
                      for st in range(n))
    provenance = (f"{how}; search value underestimates the analytic "
                  f"supremum by at most {gap:.3e}")
    return SupResult(value, None, eps_pairs, config.mode, provenance,
                     gap_bound=gap)


def superhedge_inf(model: EvolutionModel, payoff: Payoff,
                   config: SearchConfig) -> InfResult:
    """Infimum over the family; exact for convex payoffs (Jensen endpoint)."""
    require_valid(model)
    if 2 ** model.n_steps > PATH_CAP:
        raise CapExceededError(f"2^{model.n_steps} tree branches exceed the path cap")
    if payoff.is_convex:
        value = payoff.value([model.s0] * (model.n_steps + 1))
        return InfResult(value, True,
                         "Jensen endpoint f(s0), reached in the eps->0 limit")
    if config.mode == "discrete_exhaustive":
        if selection_count(model) > SELECTION_CAP:
            raise CapExceededError("selection count exceeds cap")
        worst = math.inf
        for sel in all_selections(model):
            worst = min(worst, spot_expectation(model, sel, payoff))
    else:
        if payoff.kind == "table":
            raise ValidationError("path-table payoffs require model atoms")
        dn_cands, up_cands = _grid_candidates(model, config)
        if (len(dn_cands[0]) * len(up_cands[0])) ** model.n_steps \
                > SELECTION_CAP:
            raise CapExceededError("grid combination count exceeds cap")
        import itertools
        worst = math.inf
        per_step = [[(d, u) for d in dn_cands[st] for u in up_cands[st]]
                    for st in range(model.n_steps)]
        for combo in itertools.product(*per_step):
            eps_dn = [p[0] for p in combo]
            eps_up = [p[1] for p in combo]
            worst = min(worst, spot_tree_value(model, eps_dn, eps_up, payoff))
    return InfResult(worst, False,
                     "upper estimate of inf (non-convex payoff; minimum over "
                     "the searched spot measures)")


# -- closed forms -----------------------------------------------------------

def _check_params(s0: float, a_list: Sequence[float], strike: float) -> None:
    # closed forms admit a = 0 (estimated exposures can vanish)
    if not s0 > 0:
        raise ValidationError("s0 must be positive")
    if not strike > 0:
        raise ValidationError("strike must be positive")
    if not a_list:
        raise ValidationError("need at least one exposure coefficient")
    for a in a_list:
        if not 0.0 <= a <= 1.0:
            raise ValidationError(f"exposure {a} out of [0,1]")


def _survival_product(a_list: Sequence[float]) -> float:
    prod = 1.0
    for a in a_list:
        prod *= (1.0 - a)
    return prod


def _mean_min(s0: float, a_list: Sequence[float]) -> float:
    """Arithmetic path mean of the all-down limit path."""
    total = 1.0
    prod = 1.0
    for a in a_list:
        prod *= (1.0 - a)
        total += prod
    return s0 * total / float(len(a_list) + 1)


def closed_form_call(s0: float, a_list: Sequence[float], strike: float) -> float:
    _check_params(s0, a_list, strike)
    prod = _survival_product(a_list)
    if s0 * prod >= strike:
        return max(s0 - strike, 0.0)
    return s0 * (1.0 - prod)


def closed_form_put(s0: float, a_list: Sequence[float], strike: float) -> float:
    _check_params(s0, a_list, strike)
    return max(strike - s0 * _survival_product(a_list), 0.0)


def closed_form_asian_put(s0: float, a_list: Sequence[float],
                          strike: float) -> float:
    _check_params(s0, a_list, strike)
    return max(strike - _mean_min(s0, a_list), 0.0)


def closed_form_asian_call(s0: float, a_list: Sequence[float],
                           strike: float) -> float:
    # In the out-of-the-money branch the value is s0 - mean_min, written via
    # the put parity (call = put + s0 - K) so the identity is exact in floats.
    _check_params(s0, a_list, strike)
    mean = _mean_min(s0, a_list)
    if mean >= strike:
        return max(s0 - strike, 0.0)
    return (s0 - strike) + closed_form_asian_put(s0, a_list, strike)


def closed_form_price(payoff: Payoff, s0: float,
                      a_list: Sequence[float]) -> float:
    forms = {"call": closed_form_call, "put": closed_form_put,
             "asian_call": closed_form_asian_call,
             "asian_put": closed_form_asian_put}
    if payoff.kind not in forms:
        raise ValidationError(f"no closed form for payoff {payoff.kind!r}")
    return forms[payoff.kind](s0, a_list, payoff.strike)


# -- bounds and intervals ----------------------------------------------------

_PREMISE_TOL = 1e-12


def payoff_bounds_sublinear(s0: float, a_list: Sequence[float], slope: float,
                            payoff: Payoff) -> PriceInterval:
    """Sup bounds for payoffs with f(0) = 0, f <= slope * x, slope at infinity."""
    if not slope > 0:
        raise ValidationError("slope must be positive")
    if not s0 > 0:
        raise ValidationError("s0 must be positive")
    for a in a_list:
        if not 0.0 <= a <= 1.0:
            raise ValidationError(f"exposure {a} out of [0,1]")
    if payoff.kind == "call":
        if abs(slope - 1.0) > _PREMISE_TOL:
            raise ValidationError("call payoff has asymptotic slope 1")
    elif payoff.kind == "pwl":
        if payoff.terminal_value(0.0) != 0.0:
            raise ValidationError("payoff must vanish at 0")
        for x, y in payoff.knots:
            if y > slope * x + _PREMISE_TOL * max(1.0, slope * x):
                raise ValidationError(f"payoff exceeds slope*x at knot x={x}")
        if abs(payoff.right_slope - slope) > _PREMISE_TOL:
            raise ValidationError("payoff tail slope must equal the bound slope")
    else:
        raise ValidationError(
            f"{payoff.kind} payoff does not satisfy the sublinear premises")
    prod = _survival_product(a_list)
    upper = slope * s0
    # the premise makes lower <= upper; min() only absorbs half-ulp rounding
    lower = min(payoff.terminal_value(s0 * prod)
                + slope * s0 * (1.0 - prod), upper)
    return PriceInterval(lower, upper, False, False,
                         "bounds for the supremum: f(s0*prod(1-a)) + "
                         "slope*s0*(1-prod) <= sup <= slope*s0")


def payoff_bounds_bounded(s0: float, a_list: Sequence[float], cap: float,
                          payoff: Payoff) -> PriceInterval:
    """Sup bounds for payoffs with f(0) = cap and f <= cap."""
    if not cap > 0:
        raise ValidationError("cap must be positive")
    if payoff.kind not in ("put", "pwl", "const"):
        raise ValidationError(
            f"{payoff.kind} payoff does not satisfy the bounded premises")
    if abs(payoff.terminal_value(0.0) - cap) > _PREMISE_TOL * max(1.0, cap):
        raise ValidationError("payoff at 0 must equal the cap")
    if payoff.kind == "pwl":
        if any(y > cap + _PREMISE_TOL * max(1.0, cap) for _, y in payoff.knots):
            raise ValidationError("payoff exceeds the cap at a knot")
        if payoff.right_slope != 0.0:
            raise ValidationError("bounded payoff needs a flat tail")
    for a in a_list:
        if not 0.0 <= a <= 1.0:
            raise ValidationError(f"exposure {a} out of [0,1]")
    if not s0 > 0:
        raise ValidationError("s0 must be positive")
    prod = _survival_product(a_list)
    lower = min(payoff.terminal_value(s0 * prod), cap)
    return PriceInterval(lower, cap, False, False,
                         "bounds for the supremum: f(s0*prod(1-a)) <= sup "
                         "<= cap; exposures reaching 1 collapse both to cap")


def non_arbitrage_interval(s0: float, a_list: Sequence[float],
                           payoff: Payoff) -> PriceInterval:
    """Closed interval of prices consistent with no arbitrage."""
    if payoff.kind not in ("call", "put", "asian_call", "asian_put"):
        raise ValidationError(f"no interval form for payoff {payoff.kind!r}")
    strike = payoff.strike
    _check_params(s0, a_list, strike)
    prod = _survival_product(a_list)
    if payoff.kind == "call":
        lower = max(s0 - strike, 0.0)
        if s0 * prod >= strike:
            return PriceInterval(lower, lower, True, True,
                                 "call, branch s0*prod(1-a) >= K: single point")
        return PriceInterval(min(lower, s0 * (1.0 - prod)), s0 * (1.0 - prod),
                             True, True, "call, branch s0*prod(1-a) < K")
    if payoff.kind == "put":
        upper = max(strike - s0 * prod, 0.0)
        lower = min(max(strike - s0, 0.0), upper)
        return PriceInterval(lower, upper, True, True,
                             "put: [(K-s0)^+, (K-s0*prod(1-a))^+]")
    mean = _mean_min(s0, a_list)
    if payoff.kind == "asian_put":
        if strike <= mean:
            return PriceInterval(0.0, 0.0, True, True,
                                 "asian put, K <= all-down path mean: point 0")
        return PriceInterval(max(strike - s0, 0.0), strike - mean, True, True,
                             "asian put, K > all-down path mean")
    lower = max(s0 - strike, 0.0)
    if mean >= strike:
        return PriceInterval(lower, lower, True, True,
                             "asian call, mean >= K: single point")
    upper = (s0 - strike) + (strike - mean)
    return PriceInterval(min(lower, upper), upper, True, True,
                         "asian call, mean < K")
