"""Optional decomposition of positive supermartingale surfaces.

A surface assigns a value f_n > 0 to every history prefix.  If for every
step and history the one-step ratios satisfy

    f_n / f_{n-1}  <=  1 + gamma_{n-1} * dS_n          (all atoms)

with

    gamma_{n-1} = inf over atoms with dS- > 0 of (1 - f_n/f_{n-1}) / dS_n^-

then the surface decomposes as f_n = M_n - sum_{i<=n} g_i where

    xi^0_n = 1 + gamma_{n-1} * dS_n
    g_n    = -f_n + f_{n-1} * xi^0_n          (nonnegative consumption)
    M_n    = f_0 + sum_{i<=n} f_{i-1} * (xi^0_i - 1)

and M is a martingale under every measure of the constructed family (its
increments are predictable multiples of dS).  A ratio-bound failure
certifies that the surface is not a supermartingale for the whole family.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .measures import MeasureDensity, _price_grids, _sigma_grids, _unflatten, \
    verify_martingale
from .model import EvolutionModel, require_valid

RATIO_TOL_DEFAULT = 1e-10
_SHIFT_PAD = 1e-3


@dataclass(frozen=True)
class SupermartingaleSurface:
    """Values per history prefix (row-major per level), all >= floor > 0."""

    model: EvolutionModel
    values: tuple[np.ndarray, ...]  # values[n] has one entry per length-n prefix
    floor: float
    shift: float = 0.0  # amount added to the raw inputs to restore positivity

    @staticmethod
    def from_values(model: EvolutionModel, values: Sequence[np.ndarray],
                    floor: float | None = None) -> "SupermartingaleSurface":
        values = tuple(np.asarray(v, dtype=float).ravel() for v in values)
        counts = model.atom_counts()
        expected = 1
        if len(values) != model.n_steps + 1:
            raise ValidationError("surface needs one level per step plus root")
        for n, level in enumerate(values):
            if level.size != expected:
                raise ValidationError(
                    f"surface level {n} has {level.size} nodes, "
                    f"expected {expected}")
            if n < model.n_steps:
                expected *= counts[n]
        vmin = min(float(v.min()) for v in values)
        if floor is not None:
            if not floor > 0 or vmin < floor:
                raise ValidationError(
                    f"surface values fall below the declared floor {floor}")
            return SupermartingaleSurface(model, values, float(floor), 0.0)
        if vmin > 0.0:
            return SupermartingaleSurface(model, values, vmin, 0.0)
        # restore positivity by a recorded shift; the decomposition below is
        # of the shifted surface
        pad = max(1.0, abs(vmin)) * _SHIFT_PAD
        shift = -vmin + pad
        shifted = tuple(v + shift for v in values)
        return SupermartingaleSurface(model, shifted, pad, shift)

    @staticmethod
    def from_price_function(model: EvolutionModel,
                            fn: Callable[[tuple[float, ...]], float]
                            ) -> "SupermartingaleSurface":
        """Build a surface by evaluating fn on every price prefix."""
        sigmas = _sigma_grids(model)
        prices = _price_grids(model, sigmas)
        counts = model.atom_counts()
        levels = []
        for n in range(model.n_steps + 1):
            vals = np.empty(prices[n].size)
            for h in range(prices[n].size):
                prefix = _price_prefix(prices, counts, n, h)
                vals[h] = fn(prefix)
            levels.append(vals)
        return SupermartingaleSurface.from_values(model, levels)

    def value(self, history_atoms: Sequence[int]) -> float:
        counts = self.model.atom_counts()
        flat = 0
        for i, j in enumerate(history_atoms):
            flat = flat * counts[i] + j
        return float(self.values[len(history_atoms)][flat])


def _price_prefix(prices, counts, n, flat):
    """Price path S_0..S_n leading to flat node index at level n."""
    out = [0.0] * (n + 1)
    h = flat
    for lvl in range(n, 0, -1):
        out[lvl] = float(prices[lvl][h])
        h //= counts[lvl - 1]
    out[0] = float(prices[0][0])
    return tuple(out)


@dataclass(frozen=True)
class Decomposition:
    model: EvolutionModel
    gamma: tuple[np.ndarray, ...]  # gamma[n]: per length-n prefix, n = 0..N-1
    xi0: tuple[np.ndarray, ...]    # xi0[n]: (prefixes, atoms of step n+1)
    g: tuple[np.ndarray, ...]
    M: tuple[np.ndarray, ...]      # M[n]: per length-n prefix, n = 0..N


@dataclass
class RatioBoundReport:
    tol: float
    max_scaled_excess: float
    failures: list[tuple[int, tuple[int, ...], int, float]]

    @property
    def passed(self) -> bool:
        return self.max_scaled_excess <= self.tol


@dataclass
class DecompositionReport:
    tol: float
    max_g_violation: float
    max_reconstruction_residual: float
    max_martingale_residual: float
    densities_checked: int
    failures: list[str]
    scope_note: str = ("martingale property verified against the supplied "
                       "densities only; the family itself is infinite")

    @property
    def passed(self) -> bool:
        return not self.failures


def _delta_grids(model: EvolutionModel) -> list[np.ndarray]:
    """Signed one-step price increments dS_{n+1} per (prefix, atom)."""
    sigmas = _sigma_grids(model)
    prices = _price_grids(model, sigmas)
    out = []
    for n, step in enumerate(model.steps):
        eps = np.array([at.eps for at in step.shocks])
        out.append(prices[n][:, None] * step.a
                   * (np.exp(np.outer(sigmas[n], eps)) - 1.0))
    return out


def gamma_step(model: EvolutionModel, surface: SupermartingaleSurface,
               n: int, history_atoms: Sequence[int]) -> float:
    """inf over strictly-down atoms of (1 - f_n/f_{n-1}) / dS_n^-."""
    if not 1 <= n <= model.n_steps:
        raise ValidationError(f"step index {n} out of range")
    if len(history_atoms) != n - 1:
        raise ValidationError("history length does not match step index")
    downs = model.strict_down_indices(n)
    if not downs:
        raise ValidationError(f"step {n} has no strictly-down atom")
    counts = model.atom_counts()
    flat = 0
    for i, j in enumerate(history_atoms):
        flat = flat * counts[i] + j
    deltas = _delta_grids(model)[n - 1]
    f_prev = surface.values[n - 1][flat]
    best = np.inf
    for j in downs:
        ratio = surface.values[n][flat * counts[n - 1] + j] / f_prev
        best = min(best, (1.0 - ratio) / (-deltas[flat, j]))
    return float(best)


def _gamma_grids(model: EvolutionModel, surface: SupermartingaleSurface,
                 deltas: list[np.ndarray]) -> list[np.ndarray]:
    grids = []
    counts = model.atom_counts()
    for n in range(model.n_steps):
        downs = list(model.strict_down_indices(n + 1))
        if not downs:
            raise ValidationError(f"step {n + 1} has no strictly-down atom")
        f_prev = surface.values[n]
        f_next = surface.values[n + 1].reshape(-1, counts[n])
        ratios = f_next[:, downs] / f_prev[:, None]
        candidates = (1.0 - ratios) / (-deltas[n][:, downs])
        grids.append(candidates.min(axis=1))
    return grids


def check_ratio_bound(model: EvolutionModel, surface: SupermartingaleSurface,
                      tol: float = RATIO_TOL_DEFAULT) -> RatioBoundReport:
    """Verify f_n/f_{n-1} <= 1 + gamma_{n-1} dS_n (+ tol) at every node.

    The per-node allowance is tol * max(1, f_{n-1}); a failure means the
    surface is not a supermartingale for the whole measure family.
    """
    require_valid(model)
    counts = model.atom_counts()
    deltas = _delta_grids(model)
    gammas = _gamma_grids(model, surface, deltas)
    worst = 0.0
    failures = []
    for n in range(model.n_steps):
        f_prev = surface.values[n]
        f_next = surface.values[n + 1].reshape(-1, counts[n])
        ratios = f_next / f_prev[:, None]
        rhs = 1.0 + gammas[n][:, None] * deltas[n]
        scale = np.maximum(1.0, f_prev)[:, None]
        excess = (ratios - rhs) / scale
        worst = max(worst, float(excess.max()))
        for h, j in zip(*np.nonzero(excess > tol)):
            failures.append((n + 1, _unflatten(int(h), counts, n), int(j),
                             float(excess[h, j])))
    return RatioBoundReport(tol, worst, failures)


def optional_decompose(model: EvolutionModel,
                       surface: SupermartingaleSurface) -> Decomposition:
    """Split the surface into a family-wide martingale minus consumption."""
    report = check_ratio_bound(model, surface)
    if not report.passed:
        first = report.failures[0]
        exc = ValidationError(
            f"surface violates the ratio bound at step {first[0]}, history "
            f"{first[1]}, atom {first[2]} (excess {first[3]:.3e}); it is not "
            "a supermartingale for the whole family")
        exc.report = report
        raise exc
    counts = model.atom_counts()
    deltas = _delta_grids(model)
    gammas = _gamma_grids(model, surface, deltas)
    xi0, g, M = [], [], [np.array([float(surface.values[0][0])])]
    for n in range(model.n_steps):
        xi = 1.0 + gammas[n][:, None] * deltas[n]
        f_prev = surface.values[n]
        f_next = surface.values[n + 1].reshape(-1, counts[n])
        g_n = -f_next + f_prev[:, None] * xi
        m_next = M[n][:, None] + f_prev[:, None] * (xi - 1.0)
        xi0.append(xi)
        g.append(g_n)
        M.append(m_next.ravel())
    return Decomposition(model, tuple(gammas), tuple(xi0), tuple(g), tuple(M))


def verify_decomposition(model: EvolutionModel,
                         surface: SupermartingaleSurface,
                         decomposition: Decomposition,
                         densities: Sequence[MeasureDensity],
                         tol: float = 1e-10) -> DecompositionReport:
    """Check consumption sign, reconstruction, and the martingale property
    of M under each supplied density."""
    for i, q in enumerate(densities):
        if not verify_martingale(model, q, tol).passed:
            raise ValidationError(f"density {i} fails the martingale checks")
    counts = model.atom_counts()
    failures = []
    max_g = 0.0
    for n, g_n in enumerate(decomposition.g):
        worst = float((-g_n).max())
        max_g = max(max_g, worst)
        if worst > tol:
            failures.append(f"consumption negativity at step {n + 1} "
                            f"({worst:.3e})")
    max_rec = 0.0
    cum_g = np.array([0.0])
    for n in range(model.n_steps + 1):
        resid = float(np.abs(surface.values[n]
                             - (decomposition.M[n] - cum_g)).max())
        max_rec = max(max_rec, resid)
        if resid > tol:
            failures.append(f"reconstruction residual {resid:.3e} at level {n}")
        if n < model.n_steps:
            cum_g = (cum_g[:, None] + decomposition.g[n]).ravel()
    max_mart = 0.0
    for qi, q in enumerate(densities):
        for n in range(model.n_steps):
            probs = np.array([at.prob for at in model.steps[n].shocks])
            m_next = decomposition.M[n + 1].reshape(-1, counts[n])
            cond = np.einsum("ha,a->h", m_next * q.psi[n], probs)
            resid = np.abs(cond - decomposition.M[n]) \
                / np.maximum(1.0, np.abs(decomposition.M[n]))
            worst = float(resid.max())
            max_mart = max(max_mart, worst)
            if worst > tol:
                h = int(resid.argmax())
                failures.append(
                    f"martingale residual {worst:.3e} under density {qi} at "
                    f"step {n + 1}, history {_unflatten(h, counts, n)}")
    return DecompositionReport(tol, max_g, max_rec, max_mart, len(densities),
                               failures)


def surface_from_nodes(model: EvolutionModel, floor: float,
                       nodes: Sequence[Mapping]) -> SupermartingaleSurface:
    """Assemble a surface from {"history": [...], "value": v} records.

    Every prefix must be present exactly once; nothing is interpolated.
    """
    counts = model.atom_counts()
    levels = [np.full(int(np.prod(counts[:n], initial=1)), np.nan)
              for n in range(model.n_steps + 1)]
    for node in nodes:
        extra = set(node) - {"history", "value"}
        if extra:
            raise ValidationError(f"unknown surface node fields {sorted(extra)}")
        hist = tuple(int(j) for j in node.get("history", ()))
        if len(hist) > model.n_steps:
            raise ValidationError(f"history {hist} longer than the horizon")
        flat = 0
        for i, j in enumerate(hist):
            if not 0 <= j < counts[i]:
                raise ValidationError(f"history {hist} has invalid atom index")
            flat = flat * counts[i] + j
        if not np.isnan(levels[len(hist)][flat]):
            raise ValidationError(f"duplicate surface node for history {hist}")
        levels[len(hist)][flat] = float(node["value"])
    for n, level in enumerate(levels):
        missing = np.nonzero(np.isnan(level))[0]
        if missing.size:
            hist = _unflatten(int(missing[0]), counts, n)
            raise ValidationError(f"surface is missing history {list(hist)}")
    return SupermartingaleSurface.from_values(model, levels, floor=floor)


def export_decomposition(dec: Decomposition) -> list[dict]:
    """Node records for the decomposition report."""
    counts = dec.model.atom_counts()
    out = []
    for n in range(dec.model.n_steps + 1):
        for h in range(dec.M[n].size):
            rec: dict = {"history": list(_unflatten(h, counts, n))}
            if n < dec.model.n_steps:
                rec["gamma"] = float(dec.gamma[n][h])
                rec["atoms"] = [{"xi0": float(dec.xi0[n][h, j]),
                                 "g": float(dec.g[n][h, j])}
                                for j in range(counts[n])]
            rec["M"] = float(dec.M[n][h])
            out.append(rec)
    return out
