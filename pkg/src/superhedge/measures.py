"""Families of equivalent martingale measures on the finite sample space.

Three layers:

* ``psi_weights`` / ``SpotMeasure``: the extreme measures.  A spot measure
  fixes one strictly-down and one up shock atom per step and induces a
  weighted binary tree whose branch weights make every one-step conditional
  price drift vanish.

* ``AlphaDensity`` / ``mixture_density``: the parameterized family.  A
  per-step strictly positive weight matrix on (down, up) atom pairs,
  normalized so the probability-weighted pair sum is 1, induces a density
  ``psi`` with respect to the base measure:

      psi(down atom d)  = sum_u p_u * alpha[d][u] * dS+(u) / V(d, u)
      psi(up atom u)    = sum_d p_d * alpha[d][u] * dS-(d) / V(d, u)

  with ``V(d, u) = dS-(d) + dS+(u)``.  Every such density integrates to 1
  conditionally and has zero conditional drift, and it is strictly positive,
  so the measure is equivalent to the base measure.

* ``integral_representation_check``: every mixture measure equals the
  alpha-weighted combination of spot trees; the check computes both sides
  by full enumeration and returns their absolute deviation.

Down sets use the convention eps <= 0 (an eps = 0 atom is "down" but is
excluded from spot selections, where it would degenerate the tree).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from . import _tree_py
from .backend import kernels
from .errors import CapExceededError, ValidationError
from .model import (PATH_CAP, EvolutionModel, StepSpec, enumerate_paths,
                    require_valid, sigma_at)

SELECTION_CAP = 2_000_000


# -- payoff duck-typing ---------------------------------------------------

def _payoff_encoding(payoff, n_steps: int):
    enc = getattr(payoff, "kernel_encoding", None)
    if enc is None:
        return None
    return enc(n_steps)


def _payoff_fn(payoff) -> Callable:
    """Normalize a payoff to a callable (prices, atoms) -> float."""
    value = getattr(payoff, "value", None)
    if value is not None:
        return value
    if callable(payoff):
        return lambda prices, atoms: float(payoff(prices))
    raise ValidationError("payoff is neither a Payoff nor a callable")


# -- spot measures --------------------------------------------------------

@dataclass(frozen=True)
class AtomPairSelection:
    """Per-step (down atom index, up atom index) choices."""

    pairs: tuple[tuple[int, int], ...]


def validate_selection(model: EvolutionModel,
                       selection: AtomPairSelection) -> None:
    if len(selection.pairs) != model.n_steps:
        raise ValidationError("selection length does not match model horizon")
    for n, (d, u) in enumerate(selection.pairs, start=1):
        shocks = model.steps[n - 1].shocks
        if not (0 <= d < len(shocks) and 0 <= u < len(shocks)):
            raise ValidationError(f"selection indices out of range at step {n}")
        if not shocks[d].eps < 0:
            raise ValidationError(
                f"down atom at step {n} must have eps < 0, got {shocks[d].eps}")
        if not shocks[u].eps > 0:
            raise ValidationError(
                f"up atom at step {n} must have eps > 0, got {shocks[u].eps}")


def selection_count(model: EvolutionModel) -> int:
    return math.prod(
        len(model.strict_down_indices(n)) * len(model.up_indices(n))
        for n in range(1, model.n_steps + 1))


def all_selections(model: EvolutionModel) -> Iterator[AtomPairSelection]:
    """Every valid selection, lexicographic in (down, up) atom indices."""
    per_step = []
    for n in range(1, model.n_steps + 1):
        downs = model.strict_down_indices(n)
        ups = model.up_indices(n)
        if not downs or not ups:
            raise ValidationError(f"no sign-separated atom pair at step {n}")
        per_step.append([(d, u) for d in downs for u in ups])
    for combo in itertools.product(*per_step):
        yield AtomPairSelection(tuple(combo))


def psi_weights(model: EvolutionModel, history: Sequence[float],
                eps_down: float, eps_up: float) -> tuple[float, float]:
    """Risk-neutral branch weights for one sign-separated shock pair."""
    if not (eps_down < 0.0 < eps_up):
        raise ValidationError(
            f"need eps_down < 0 < eps_up, got ({eps_down}, {eps_up})")
    sigma = sigma_at(model, len(history) + 1, history)
    ed = math.exp(sigma * eps_down)
    eu = math.exp(sigma * eps_up)
    denom = eu - ed
    return (eu - 1.0) / denom, (1.0 - ed) / denom


def _selection_eps(model: EvolutionModel,
                   selection: AtomPairSelection) -> tuple[list, list]:
    eps_dn, eps_up = [], []
    for n, (d, u) in enumerate(selection.pairs):
        shocks = model.steps[n].shocks
        eps_dn.append(shocks[d].eps)
        eps_up.append(shocks[u].eps)
    return eps_dn, eps_up


def _spot_walk(model: EvolutionModel, eps_dn: Sequence[float],
               eps_up: Sequence[float], payoff_fn: Callable,
               atoms_dn=None, atoms_up=None) -> float:
    """Generic spot-tree expectation; traversal order matches the kernels."""
    n = model.n_steps
    a = [s.a for s in model.steps]
    vk, vp = model.kernel_vol_arrays()
    acc = [0.0]
    prices = [model.s0]
    atoms: list[int] = []

    def rec(level, prob, sigma_prev, eps_prev):
        if level == n:
            acc[0] += prob * payoff_fn(tuple(prices),
                                       tuple(atoms) if atoms_dn else None)
            return
        if level == 0:
            sigma = _tree_py.sigma_initial(vk[0], vp[0])
        else:
            sigma = _tree_py.sigma_next(vk[level], vp[level], sigma_prev,
                                        eps_prev)
        ed = _tree_py.exp(sigma * eps_dn[level])
        eu = _tree_py.exp(sigma * eps_up[level])
        psi_d, psi_u = _tree_py.branch_weights(ed, eu)
        if psi_d != 0.0:
            prices.append(prices[-1] * (1.0 + a[level] * (ed - 1.0)))
            if atoms_dn:
                atoms.append(atoms_dn[level])
            rec(level + 1, prob * psi_d, sigma, eps_dn[level])
            prices.pop()
            if atoms_dn:
                atoms.pop()
        if psi_u != 0.0:
            prices.append(prices[-1] * (1.0 + a[level] * (eu - 1.0)))
            if atoms_dn:
                atoms.append(atoms_up[level])
            rec(level + 1, prob * psi_u, sigma, eps_up[level])
            prices.pop()
            if atoms_dn:
                atoms.pop()

    rec(0, 1.0, 0.0, 0.0)
    return acc[0]


def spot_tree_value(model: EvolutionModel, eps_dn: Sequence[float],
                    eps_up: Sequence[float], payoff) -> float:
    """Spot-tree expectation for explicit eps pairs (used by grid search)."""
    if 2 ** model.n_steps > PATH_CAP:
        raise CapExceededError(f"2^{model.n_steps} branches exceed cap")
    enc = _payoff_encoding(payoff, model.n_steps)
    if enc is not None:
        vk, vp = model.kernel_vol_arrays()
        pkind, pa, pxs, pys = enc
        return kernels.tree_expectation(model.s0, [s.a for s in model.steps],
                                        vk, vp, list(eps_dn), list(eps_up),
                                        pkind, pa, pxs, pys)
    return _spot_walk(model, eps_dn, eps_up, _payoff_fn(payoff))


def spot_expectation(model: EvolutionModel, selection: AtomPairSelection,
                     payoff) -> float:
    """Expectation of a path payoff under one spot measure."""
    validate_selection(model, selection)
    if 2 ** model.n_steps > PATH_CAP:
        raise CapExceededError(f"2^{model.n_steps} branches exceed cap")
    eps_dn, eps_up = _selection_eps(model, selection)
    enc = _payoff_encoding(payoff, model.n_steps)
    if enc is not None:
        vk, vp = model.kernel_vol_arrays()
        pkind, pa, pxs, pys = enc
        return kernels.tree_expectation(model.s0, [s.a for s in model.steps],
                                        vk, vp, eps_dn, eps_up,
                                        pkind, pa, pxs, pys)
    atoms_dn = [d for d, _ in selection.pairs]
    atoms_up = [u for _, u in selection.pairs]
    return _spot_walk(model, eps_dn, eps_up, _payoff_fn(payoff),
                      atoms_dn, atoms_up)


@dataclass(frozen=True)
class SpotMeasure:
    model: EvolutionModel
    selection: AtomPairSelection

    def __post_init__(self):
        validate_selection(self.model, self.selection)

    def expectation(self, payoff) -> float:
        return spot_expectation(self.model, self.selection, payoff)

    def max_node_drift(self) -> float:
        """Largest |conditional one-step drift| / node price over the tree."""
        model = self.model
        eps_dn, eps_up = _selection_eps(model, self.selection)
        worst = 0.0
        n = model.n_steps

        def rec(level, price, sigma_prev, eps_prev):
            nonlocal worst
            if level == n:
                return
            if level == 0:
                vol = model.steps[0].vol
                sigma = _tree_py.sigma_initial(vol.kind_code, vol.params4)
            else:
                vol = model.steps[level].vol
                sigma = _tree_py.sigma_next(vol.kind_code, vol.params4,
                                            sigma_prev, eps_prev)
            ed = math.exp(sigma * eps_dn[level])
            eu = math.exp(sigma * eps_up[level])
            denom = eu - ed
            psi_d = (eu - 1.0) / denom
            psi_u = (1.0 - ed) / denom
            a = model.steps[level].a
            drift = psi_d * (price * a * (ed - 1.0)) \
                + psi_u * (price * a * (eu - 1.0))
            worst = max(worst, abs(drift) / price)
            rec(level + 1, price * (1.0 + a * (ed - 1.0)), sigma, eps_dn[level])
            rec(level + 1, price * (1.0 + a * (eu - 1.0)), sigma, eps_up[level])

        rec(0, model.s0, 0.0, 0.0)
        return worst

    def as_density(self) -> "MeasureDensity":
        """Express the spot measure as a density on the full space.

        The density is zero off the selected atoms, so it fails the
        equivalence check while passing normalization and drift.
        """
        model = self.model
        sigmas = _sigma_grids(model)
        psi = []
        for n, step in enumerate(model.steps):
            d, u = self.selection.pairs[n]
            h_count = sigmas[n].shape[0]
            out = np.zeros((h_count, len(step.shocks)))
            sig = sigmas[n]
            ed = np.exp(sig * step.shocks[d].eps)
            eu = np.exp(sig * step.shocks[u].eps)
            denom = eu - ed
            out[:, d] = (eu - 1.0) / denom / step.shocks[d].prob
            out[:, u] = (1.0 - ed) / denom / step.shocks[u].prob
            psi.append(out)
        return MeasureDensity(model, tuple(psi))


# -- alpha densities ------------------------------------------------------

ALPHA_NORM_TOL = 1e-12


@dataclass(frozen=True)
class StepAlpha:
    """Weights on (down, up) atom pairs for one step."""

    down_atoms: tuple[int, ...]
    up_atoms: tuple[int, ...]
    weights: np.ndarray  # shape (len(down_atoms), len(up_atoms))


@dataclass(frozen=True)
class AlphaDensity:
    steps: tuple[StepAlpha, ...]


def validate_alpha(model: EvolutionModel, alphas: AlphaDensity) -> None:
    if len(alphas.steps) != model.n_steps:
        raise ValidationError("alpha density length does not match horizon")
    for n, sa in enumerate(alphas.steps, start=1):
        downs = model.down_indices(n)
        ups = model.up_indices(n)
        if tuple(sa.down_atoms) != downs or tuple(sa.up_atoms) != ups:
            raise ValidationError(
                f"alpha at step {n} does not cover the (down, up) atom grid")
        w = np.asarray(sa.weights, dtype=float)
        if w.shape != (len(downs), len(ups)):
            raise ValidationError(f"alpha shape mismatch at step {n}")
        if not np.all(w > 0.0):
            raise ValidationError(f"alpha not strictly positive at step {n}")
        probs = [at.prob for at in model.steps[n - 1].shocks]
        pd = np.array([probs[d] for d in downs])
        pu = np.array([probs[u] for u in ups])
        total = float(pd @ w @ pu)
        if abs(total - 1.0) > ALPHA_NORM_TOL:
            raise ValidationError(
                f"alpha normalization off by {total - 1.0:.3e} at step {n}")


def alpha_from_partition(step: StepSpec, down_blocks: Sequence[Sequence[int]],
                         up_blocks: Sequence[Sequence[int]],
                         deltas: Sequence[float], mus: Sequence[float],
                         gammas: Sequence[float]) -> StepAlpha:
    """Build one step's alpha weights from block decompositions.

    Each down block with weight ``delta`` yields the density that puts mass
    ``1 - delta`` uniformly on the block and ``delta`` on its complement
    within the down set (likewise up blocks with ``mus``); ``gammas`` mixes
    the block-pair products convexly.  With no blocks a side contributes the
    single uniform density over its atoms.
    """
    downs = tuple(i for i, at in enumerate(step.shocks) if at.eps <= 0.0)
    ups = tuple(i for i, at in enumerate(step.shocks) if at.eps > 0.0)
    if not downs or not ups:
        raise ValidationError("step has no sign-separated atoms")
    probs = [at.prob for at in step.shocks]

    def side_factors(atoms, blocks, weights, label):
        p_all = sum(probs[i] for i in atoms)
        if not blocks:
            return [np.array([1.0 / p_all] * len(atoms))]
        if len(blocks) != len(weights):
            raise ValidationError(f"{label}: one weight per block required")
        factors = []
        for block, w in zip(blocks, weights):
            if not 0.0 < w < 1.0:
                raise ValidationError(f"{label}: block weight {w} not in (0,1)")
            block = set(block)
            if not block <= set(atoms):
                raise ValidationError(f"{label}: block outside the atom set")
            p_block = sum(probs[i] for i in block)
            p_rest = p_all - p_block
            if p_block <= 0.0 or p_rest <= 0.0:
                raise ValidationError(
                    f"{label}: block or complement has zero probability")
            factors.append(np.array(
                [(1.0 - w) / p_block if i in block else w / p_rest
                 for i in atoms]))
        return factors

    down_f = side_factors(downs, down_blocks, deltas, "down blocks")
    up_f = side_factors(ups, up_blocks, mus, "up blocks")
    gam = np.asarray(list(gammas), dtype=float)
    if gam.size != len(down_f) * len(up_f):
        raise ValidationError("gammas length must be n_down_factors * n_up_factors")
    if np.any(gam < 0.0) or abs(float(gam.sum()) - 1.0) > ALPHA_NORM_TOL:
        raise ValidationError("gammas must be nonnegative and sum to 1")
    w = np.zeros((len(downs), len(ups)))
    for k, (fd, fu) in enumerate(itertools.product(down_f, up_f)):
        w += gam[k] * np.outer(fd, fu)
    if not np.all(w > 0.0):
        raise ValidationError("resulting alpha is not strictly positive")
    return StepAlpha(downs, ups, w)


# -- mixture densities ----------------------------------------------------

def _sigma_grids(model: EvolutionModel) -> list[np.ndarray]:
    """Realized volatility per step over all history prefixes (row-major)."""
    vol = model.steps[0].vol
    grids = [np.array([_tree_py.sigma_initial(vol.kind_code, vol.params4)])]
    for n in range(1, model.n_steps):
        eps_prev = np.array([at.eps for at in model.steps[n - 1].shocks])
        prev = np.repeat(grids[-1], eps_prev.size)
        eps = np.tile(eps_prev, grids[-1].size)
        vol = model.steps[n].vol
        if vol.kind == "constant":
            cur = np.full(prev.size, vol.sigma)
        else:
            s2 = vol.omega0 + vol.alpha1 * (prev * eps) ** 2
            if vol.kind == "garch11":
                s2 = s2 + vol.beta1 * prev ** 2
            cur = np.maximum(vol.floor, np.sqrt(s2))
        grids.append(cur)
    return grids


def _price_grids(model: EvolutionModel,
                 sigmas: list[np.ndarray]) -> list[np.ndarray]:
    """Prices S_n over history prefixes of length n, n = 0..N (row-major)."""
    prices = [np.array([model.s0])]
    for n, step in enumerate(model.steps):
        eps = np.array([at.eps for at in step.shocks])
        factors = 1.0 + step.a * (np.exp(np.outer(sigmas[n], eps)) - 1.0)
        prices.append((prices[-1][:, None] * factors).ravel())
    return prices


def _density_cells(model: EvolutionModel) -> int:
    counts = model.atom_counts()
    h = 1
    cells = 0
    for c in counts:
        cells += h * c
        h *= c
    return cells


@dataclass(frozen=True)
class MeasureDensity:
    """Density psi per (step, history prefix, atom), history row-major."""

    model: EvolutionModel
    psi: tuple[np.ndarray, ...]

    def value(self, n: int, history_atoms: Sequence[int], atom: int) -> float:
        """psi at step n (1-based) for a history given by atom indices."""
        counts = self.model.atom_counts()
        flat = 0
        for i, j in enumerate(history_atoms):
            flat = flat * counts[i] + j
        return float(self.psi[n - 1][flat, atom])

    @property
    def strictly_positive(self) -> bool:
        return all(np.all(p > 0.0) for p in self.psi)

    def min_value(self) -> float:
        return min(float(p.min()) for p in self.psi)


def mixture_density(model: EvolutionModel,
                    alphas: AlphaDensity) -> MeasureDensity:
    """Density of the martingale measure induced by per-step alpha weights."""
    require_valid(model)
    validate_alpha(model, alphas)
    if _density_cells(model) > PATH_CAP:
        raise CapExceededError("density storage exceeds the path cap")
    sigmas = _sigma_grids(model)
    psi: list[np.ndarray] = []
    for n, step in enumerate(model.steps):
        sa = alphas.steps[n]
        eps = np.array([at.eps for at in step.shocks])
        probs = np.array([at.prob for at in step.shocks])
        sig = sigmas[n][:, None]
        e_dn = np.exp(sig * eps[list(sa.down_atoms)])  # (H, D)
        e_up = np.exp(sig * eps[list(sa.up_atoms)])    # (H, U)
        denom = e_up[:, None, :] - e_dn[:, :, None]    # (H, D, U)
        if np.any(denom <= 0.0):
            raise ValidationError(
                f"degenerate (down, up) pair with V = 0 at step {n + 1}")
        r_plus = (e_up[:, None, :] - 1.0) / denom
        r_minus = (1.0 - e_dn[:, :, None]) / denom
        w = np.asarray(sa.weights, dtype=float)
        pd = probs[list(sa.down_atoms)]
        pu = probs[list(sa.up_atoms)]
        out = np.zeros((sig.shape[0], eps.size))
        out[:, list(sa.down_atoms)] = np.einsum("u,du,hdu->hd", pu, w, r_plus)
        out[:, list(sa.up_atoms)] = np.einsum("d,du,hdu->hu", pd, w, r_minus)
        psi.append(out)
    return MeasureDensity(model, tuple(psi))


def measure_expectation(model: EvolutionModel, density: MeasureDensity,
                        payoff) -> float:
    """Expectation of a path payoff: sum over full paths of base_prob *
    prod(psi) * payoff."""
    if model.path_count() > PATH_CAP:
        raise CapExceededError("path count exceeds cap")
    enc = _payoff_encoding(payoff, model.n_steps)
    sigmas = _sigma_grids(model)
    prices = _price_grids(model, sigmas)
    weights = np.array([1.0])
    for n, step in enumerate(model.steps):
        probs = np.array([at.prob for at in step.shocks])
        weights = (weights[:, None] * (probs[None, :] * density.psi[n])).ravel()
    if enc is not None:
        pkind, pa, pxs, pys = enc
        terminal = prices[-1]
        if pkind in (3, 4):
            path_sum = np.array([model.s0])
            for n in range(model.n_steps):
                path_sum = np.repeat(path_sum, len(model.steps[n].shocks))
                path_sum = path_sum + prices[n + 1]
            mean = path_sum / float(model.n_steps + 1)
            if pkind == 3:
                values = np.maximum(mean - pa, 0.0)
            else:
                values = np.maximum(pa - mean, 0.0)
        elif pkind == 0:
            values = np.full(terminal.size, pa)
        elif pkind == 1:
            values = np.maximum(terminal - pa, 0.0)
        elif pkind == 2:
            values = np.maximum(pa - terminal, 0.0)
        else:
            values = np.array([_tree_py.payoff_value(pkind, pa, pxs, pys,
                                                     float(x), 0.0, 1.0)
                               for x in terminal])
        return float(weights @ values)
    fn = _payoff_fn(payoff)
    total = 0.0
    flat = 0
    for idx, path in enumerate_paths(model):
        total += weights[flat] * fn(path.price_seq, idx.atoms)
        flat += 1
    return total


@dataclass
class MartingaleReport:
    tol: float
    max_norm_residual: float
    max_drift_residual: float  # relative to the node price
    min_psi: float
    equivalent: bool
    failures: list[tuple[int, tuple[int, ...], str, float]]

    @property
    def passed(self) -> bool:
        return (self.max_norm_residual <= self.tol
                and self.max_drift_residual <= self.tol)


def verify_martingale(model: EvolutionModel, density: MeasureDensity,
                      tol: float = 1e-9) -> MartingaleReport:
    """Check conditional normalization and drift at every (step, history).

    Equivalence (strict positivity of psi) is reported separately and does
    not gate `passed`; spot measures expressed as densities pass the
    martingale checks while failing equivalence.
    """
    sigmas = _sigma_grids(model)
    prices = _price_grids(model, sigmas)
    counts = model.atom_counts()
    max_norm = 0.0
    max_drift = 0.0
    failures = []
    for n, step in enumerate(model.steps):
        probs = np.array([at.prob for at in step.shocks])
        eps = np.array([at.eps for at in step.shocks])
        psi = density.psi[n]
        norm_res = np.abs(psi @ probs - 1.0)
        deltas = prices[n][:, None] * step.a \
            * (np.exp(np.outer(sigmas[n], eps)) - 1.0)
        drift_res = np.abs(np.einsum("ha,a,ha->h", psi, probs, deltas)) \
            / prices[n]
        max_norm = max(max_norm, float(norm_res.max()))
        max_drift = max(max_drift, float(drift_res.max()))
        for h in np.nonzero(norm_res > tol)[0]:
            failures.append((n + 1, _unflatten(h, counts, n), "normalization",
                             float(norm_res[h])))
        for h in np.nonzero(drift_res > tol)[0]:
            failures.append((n + 1, _unflatten(h, counts, n), "drift",
                             float(drift_res[h])))
    min_psi = density.min_value()
    return MartingaleReport(tol, max_norm, max_drift, min_psi,
                            equivalent=min_psi > 0.0, failures=failures)


def _unflatten(flat: int, counts: tuple[int, ...], n: int) -> tuple[int, ...]:
    out = []
    for c in reversed(counts[:n]):
        out.append(flat % c)
        flat //= c
    return tuple(reversed(out))


def integral_representation_check(model: EvolutionModel, alphas: AlphaDensity,
                                  payoff) -> float:
    """|mixture expectation - alpha-weighted sum of spot-tree expectations|.

    The pair enumeration runs over the full alpha grid (eps <= 0 down
    atoms included); a selected eps = 0 atom just contributes a tree whose
    up branches carry zero weight, matching the mixture side exactly.
    """
    validate_alpha(model, alphas)
    combos = math.prod(len(sa.down_atoms) * len(sa.up_atoms)
                       for sa in alphas.steps)
    if combos > SELECTION_CAP:
        raise CapExceededError(f"{combos} pair combinations exceed cap")
    lhs = measure_expectation(model, mixture_density(model, alphas), payoff)
    fn = _payoff_fn(payoff)
    per_step = []
    for n, sa in enumerate(alphas.steps):
        probs = [at.prob for at in model.steps[n].shocks]
        entries = []
        for i, d in enumerate(sa.down_atoms):
            for j, u in enumerate(sa.up_atoms):
                entries.append((d, u,
                                probs[d] * probs[u] * float(sa.weights[i, j])))
        per_step.append(entries)
    rhs = 0.0
    for combo in itertools.product(*per_step):
        weight = 1.0
        for _, _, w in combo:
            weight *= w
        eps_dn = [model.steps[n].shocks[combo[n][0]].eps
                  for n in range(model.n_steps)]
        eps_up = [model.steps[n].shocks[combo[n][1]].eps
                  for n in range(model.n_steps)]
        atoms_dn = [combo[n][0] for n in range(model.n_steps)]
        atoms_up = [combo[n][1] for n in range(model.n_steps)]
        rhs += weight * _spot_walk(model, eps_dn, eps_up, fn,
                                   atoms_dn, atoms_up)
    return abs(lhs - rhs)


def export_density(density: MeasureDensity) -> list[dict]:
    """Flatten a density to records for the debug report."""
    counts = density.model.atom_counts()
    out = []
    for n, psi in enumerate(density.psi):
        for h in range(psi.shape[0]):
            hist = list(_unflatten(h, counts, n))
            for a in range(psi.shape[1]):
                out.append({"step": n + 1, "history": hist, "atom": a,
                            "psi": float(psi[h, a])})
    return out
