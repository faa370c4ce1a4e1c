"""Finite-sample-space discrete-time asset evolutions.

A model is an initial price ``s0`` plus per-step data: an exposure
coefficient ``a`` in (0, 1], a volatility law (constant, ARCH(1) or
GARCH(1,1), floor-clamped so the realized volatility stays positive) and a
finite set of shock atoms ``eps`` with probabilities.  Prices evolve by

    S_n = S_{n-1} * (1 + a_n * (exp(sigma_n * eps_n) - 1))

where ``sigma_n`` depends on the realized shock prefix.  Models with all
``a_n < 1`` are classified "stable" (the price has a positive lower bound
over the horizon); models with some ``a_n = 1`` are "unstable".

Volatility recursions (an artifact choice, clamped below by ``floor``):

    arch1:   sigma_n^2 = omega0 + alpha1 * (sigma_{n-1} * eps_{n-1})^2
    garch11: sigma_n^2 = omega0 + alpha1 * (sigma_{n-1} * eps_{n-1})^2
                                + beta1 * sigma_{n-1}^2

with ``sigma_1 = max(floor, sqrt(omega0))`` at the empty history.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from . import _tree_py
from ._rng import SplitMix64
from .errors import CapExceededError, ValidationError

PATH_CAP = 10_000_000
PROB_SUM_TOL = 1e-12
PROB_RENORM_TOL = 1e-9

_VOL_KINDS = {"constant": 0, "arch1": 1, "garch11": 2}


@dataclass(frozen=True)
class ShockAtom:
    """One shock value with its base-measure probability."""

    eps: float
    prob: float


@dataclass(frozen=True)
class VolatilitySpec:
    kind: str
    sigma: float = 0.0
    omega0: float = 0.0
    alpha1: float = 0.0
    beta1: float = 0.0
    floor: float = 0.0

    @staticmethod
    def constant(sigma: float) -> "VolatilitySpec":
        return VolatilitySpec(kind="constant", sigma=sigma)

    @staticmethod
    def arch1(omega0: float, alpha1: float, floor: float) -> "VolatilitySpec":
        return VolatilitySpec(kind="arch1", omega0=omega0, alpha1=alpha1,
                              floor=floor)

    @staticmethod
    def garch11(omega0: float, alpha1: float, beta1: float,
                floor: float) -> "VolatilitySpec":
        return VolatilitySpec(kind="garch11", omega0=omega0, alpha1=alpha1,
                              beta1=beta1, floor=floor)

    @property
    def kind_code(self) -> int:
        return _VOL_KINDS[self.kind]

    @property
    def params4(self) -> tuple[float, float, float, float]:
        """Parameter row in the layout the tree kernels expect."""
        if self.kind == "constant":
            return (self.sigma, 0.0, 0.0, 0.0)
        if self.kind == "arch1":
            return (self.omega0, self.alpha1, self.floor, 0.0)
        return (self.omega0, self.alpha1, self.beta1, self.floor)

    def violations(self, step: int) -> list[str]:
        out = []
        if self.kind == "constant":
            if not self.sigma > 0:
                out.append(f"constant sigma not positive at step {step}")
        elif self.kind in ("arch1", "garch11"):
            if not self.omega0 > 0:
                out.append(f"omega0 not positive at step {step}")
            if self.alpha1 < 0:
                out.append(f"alpha1 negative at step {step}")
            if self.kind == "garch11" and self.beta1 < 0:
                out.append(f"beta1 negative at step {step}")
            if not self.floor > 0:
                out.append(f"vol floor not positive at step {step}")
        else:
            out.append(f"unknown volatility kind {self.kind!r} at step {step}")
        return out


@dataclass(frozen=True)
class StepSpec:
    a: float
    shocks: tuple[ShockAtom, ...]
    vol: VolatilitySpec


@dataclass(frozen=True)
class EvolutionModel:
    s0: float
    steps: tuple[StepSpec, ...]
    # Estimated models carry exposures but no shock space; closed-form and
    # grid pricing work, atom-based enumeration does not.
    pricing_only: bool = False

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def a_list(self) -> tuple[float, ...]:
        return tuple(s.a for s in self.steps)

    @property
    def classification(self) -> str:
        return "unstable" if any(s.a == 1.0 for s in self.steps) else "stable"

    def atom_counts(self) -> tuple[int, ...]:
        return tuple(len(s.shocks) for s in self.steps)

    def path_count(self) -> int:
        return math.prod(self.atom_counts()) if self.steps else 0

    def down_indices(self, n: int) -> tuple[int, ...]:
        """Atoms of step n (1-based) in the down set (eps <= 0)."""
        return tuple(i for i, at in enumerate(self.steps[n - 1].shocks)
                     if at.eps <= 0.0)

    def strict_down_indices(self, n: int) -> tuple[int, ...]:
        return tuple(i for i, at in enumerate(self.steps[n - 1].shocks)
                     if at.eps < 0.0)

    def up_indices(self, n: int) -> tuple[int, ...]:
        return tuple(i for i, at in enumerate(self.steps[n - 1].shocks)
                     if at.eps > 0.0)

    def kernel_vol_arrays(self) -> tuple[list[int], list[tuple]]:
        kinds = [s.vol.kind_code for s in self.steps]
        params = [s.vol.params4 for s in self.steps]
        return kinds, params


@dataclass(frozen=True)
class PathIndex:
    """Per-step atom indices addressing one point of the sample space."""

    atoms: tuple[int, ...]


@dataclass(frozen=True)
class Path:
    eps_seq: tuple[float, ...]
    sigma_seq: tuple[float, ...]
    price_seq: tuple[float, ...]
    base_prob: float


def validate_model(model: EvolutionModel) -> list[str]:
    """Check every structural condition; empty report means valid."""
    report: list[str] = []
    if not model.s0 > 0:
        report.append("s0 not positive")
    if model.n_steps < 1:
        report.append("model has no steps")
    for k, step in enumerate(model.steps, start=1):
        # estimated (pricing-only) exposures may vanish
        a_ok = (0.0 <= step.a <= 1.0) if model.pricing_only \
            else (0.0 < step.a <= 1.0)
        if not a_ok:
            report.append(f"a out of (0,1] at step {k}")
        report.extend(step.vol.violations(k))
        if model.pricing_only:
            if step.shocks:
                report.append(f"pricing-only model has shocks at step {k}")
            continue
        if not step.shocks:
            report.append(f"no shocks at step {k}")
            continue
        for at in step.shocks:
            if not at.prob > 0:
                report.append(f"atom probability not positive at step {k}")
            if not math.isfinite(at.eps):
                report.append(f"non-finite shock value at step {k}")
        eps_values = [at.eps for at in step.shocks]
        if len(set(eps_values)) != len(eps_values):
            report.append(f"duplicate shock values at step {k}")
        total = sum(at.prob for at in step.shocks)
        if abs(total - 1.0) > PROB_SUM_TOL:
            report.append(f"shock probabilities sum to {total!r} at step {k}")
        if not any(at.eps < 0 for at in step.shocks):
            report.append(f"no negative shock at step {k}")
        if not any(at.eps > 0 for at in step.shocks):
            report.append(f"no positive shock at step {k}")
    return report


def require_valid(model: EvolutionModel) -> None:
    report = validate_model(model)
    if report:
        raise ValidationError("; ".join(report))


def sigma_at(model: EvolutionModel, n: int, history: Sequence[float]) -> float:
    """Realized volatility of step n (1-based) given the shock prefix."""
    if not 1 <= n <= model.n_steps:
        raise ValidationError(f"step index {n} out of range 1..{model.n_steps}")
    if len(history) != n - 1:
        raise ValidationError(
            f"history length {len(history)} does not match step {n}")
    vol = model.steps[0].vol
    sigma = _tree_py.sigma_initial(vol.kind_code, vol.params4)
    for i in range(1, n):
        vol = model.steps[i].vol
        sigma = _tree_py.sigma_next(vol.kind_code, vol.params4, sigma,
                                    history[i - 1])
    return sigma


def _step_factor(a: float, sigma: float, eps: float) -> float:
    return 1.0 + a * (math.exp(sigma * eps) - 1.0)


def price_path(model: EvolutionModel, idx: PathIndex) -> Path:
    """Realize shocks, volatilities and prices along one full path."""
    if len(idx.atoms) != model.n_steps:
        raise ValidationError("path index length does not match model horizon")
    eps_seq: list[float] = []
    sigma_seq: list[float] = []
    prices = [model.s0]
    prob = 1.0
    sigma = 0.0
    for n, step in enumerate(model.steps):
        j = idx.atoms[n]
        if not 0 <= j < len(step.shocks):
            raise ValidationError(f"atom index {j} invalid at step {n + 1}")
        atom = step.shocks[j]
        if n == 0:
            sigma = _tree_py.sigma_initial(step.vol.kind_code, step.vol.params4)
        else:
            sigma = _tree_py.sigma_next(step.vol.kind_code, step.vol.params4,
                                        sigma, eps_seq[-1])
        prices.append(prices[-1] * _step_factor(step.a, sigma, atom.eps))
        eps_seq.append(atom.eps)
        sigma_seq.append(sigma)
        prob *= atom.prob
    return Path(tuple(eps_seq), tuple(sigma_seq), tuple(prices), prob)


def delta_split(model: EvolutionModel, history: Sequence[float],
                atom: ShockAtom) -> tuple[float, float, float]:
    """Signed price increment and its (down, up) parts for one atom.

    Atoms with eps <= 0 belong to the down set, so the down part is
    max(-delta, 0) and an eps = 0 atom splits as (0, 0, 0).
    """
    n = len(history) + 1
    sigma = sigma_at(model, n, history)
    price = model.s0
    sig = 0.0
    for i, eps in enumerate(history):
        step = model.steps[i]
        if i == 0:
            sig = _tree_py.sigma_initial(step.vol.kind_code, step.vol.params4)
        else:
            sig = _tree_py.sigma_next(step.vol.kind_code, step.vol.params4,
                                      sig, history[i - 1])
        price *= _step_factor(step.a, sig, eps)
    delta = price * model.steps[n - 1].a * (math.exp(sigma * atom.eps) - 1.0)
    return delta, max(-delta, 0.0), max(delta, 0.0)


def enumerate_paths(model: EvolutionModel,
                    cap: int = PATH_CAP) -> Iterator[tuple[PathIndex, Path]]:
    """Yield every full path exactly once, in lexicographic index order."""
    total = model.path_count()
    if total > cap:
        raise CapExceededError(f"{total} paths exceed cap {cap}")
    ranges = [range(len(step.shocks)) for step in model.steps]
    for combo in itertools.product(*ranges):
        idx = PathIndex(combo)
        yield idx, price_path(model, idx)


def simulate(model: EvolutionModel, count: int, seed: int) -> list[Path]:
    """Draw independent paths from the base measure, deterministic per seed."""
    rng = SplitMix64(seed)
    out = []
    for _ in range(count):
        atoms = []
        for step in model.steps:
            u = rng.uniform()
            acc = 0.0
            j = len(step.shocks) - 1
            for i, at in enumerate(step.shocks):
                acc += at.prob
                if u < acc:
                    j = i
                    break
            atoms.append(j)
        out.append(price_path(model, PathIndex(tuple(atoms))))
    return out


# -- model file format --------------------------------------------------

_VOL_FIELDS = {
    "constant": {"kind", "sigma"},
    "arch1": {"kind", "omega0", "alpha1", "floor"},
    "garch11": {"kind", "omega0", "alpha1", "beta1", "floor"},
}


def _vol_from_dict(d: dict, step: int) -> VolatilitySpec:
    kind = d.get("kind")
    if kind not in _VOL_FIELDS:
        raise ValidationError(f"unknown volatility kind {kind!r} at step {step}")
    extra = set(d) - _VOL_FIELDS[kind]
    if extra:
        raise ValidationError(
            f"unknown vol fields {sorted(extra)} at step {step}")
    missing = _VOL_FIELDS[kind] - set(d)
    if missing:
        raise ValidationError(
            f"missing vol fields {sorted(missing)} at step {step}")
    if kind == "constant":
        return VolatilitySpec.constant(float(d["sigma"]))
    if kind == "arch1":
        return VolatilitySpec.arch1(float(d["omega0"]), float(d["alpha1"]),
                                    float(d["floor"]))
    return VolatilitySpec.garch11(float(d["omega0"]), float(d["alpha1"]),
                                  float(d["beta1"]), float(d["floor"]))


def model_from_dict(doc: dict) -> EvolutionModel:
    allowed = {"s0", "steps", "pricing_only"}
    extra = set(doc) - allowed
    if extra:
        raise ValidationError(f"unknown model fields {sorted(extra)}")
    if "s0" not in doc or "steps" not in doc:
        raise ValidationError("model file needs 's0' and 'steps'")
    pricing_only = bool(doc.get("pricing_only", False))
    steps = []
    for k, sd in enumerate(doc["steps"], start=1):
        extra = set(sd) - {"a", "vol", "shocks"}
        if extra:
            raise ValidationError(f"unknown step fields {sorted(extra)} at step {k}")
        if "a" not in sd or "vol" not in sd or "shocks" not in sd:
            raise ValidationError(f"step {k} needs 'a', 'vol' and 'shocks'")
        shocks = []
        for ad in sd["shocks"]:
            extra = set(ad) - {"eps", "prob"}
            if extra:
                raise ValidationError(
                    f"unknown shock fields {sorted(extra)} at step {k}")
            shocks.append(ShockAtom(float(ad["eps"]), float(ad["prob"])))
        if shocks:
            total = sum(at.prob for at in shocks)
            if abs(total - 1.0) > PROB_RENORM_TOL:
                raise ValidationError(
                    f"shock probabilities sum to {total!r} at step {k}")
            if abs(total - 1.0) > PROB_SUM_TOL:
                shocks = [ShockAtom(at.eps, at.prob / total) for at in shocks]
        steps.append(StepSpec(float(sd["a"]), tuple(shocks),
                              _vol_from_dict(sd["vol"], k)))
    model = EvolutionModel(float(doc["s0"]), tuple(steps),
                           pricing_only=pricing_only)
    require_valid(model)
    return model


def model_to_dict(model: EvolutionModel) -> dict:
    steps = []
    for s in model.steps:
        vol: dict = {"kind": s.vol.kind}
        if s.vol.kind == "constant":
            vol["sigma"] = s.vol.sigma
        else:
            vol["omega0"] = s.vol.omega0
            vol["alpha1"] = s.vol.alpha1
            if s.vol.kind == "garch11":
                vol["beta1"] = s.vol.beta1
            vol["floor"] = s.vol.floor
        steps.append({
            "a": s.a,
            "vol": vol,
            "shocks": [{"eps": at.eps, "prob": at.prob} for at in s.shocks],
        })
    doc = {"s0": model.s0, "steps": steps}
    if model.pricing_only:
        doc["pricing_only"] = True
    return doc


def load_model(path: str) -> EvolutionModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return model_from_dict(doc)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
