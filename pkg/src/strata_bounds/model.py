"""Supports, response types, restriction sets and target parameters.

A response type ``r`` bundles the potential outcomes ``(y(d) : d in D)`` and
the potential treatments ``(d(z) : z in Z)`` of one subject.  A model is the
set of admissible response types together with optional epsilon relaxations,
and a parameter is ``E[g(R) | R in conditioning]``.

All labels are mapped to contiguous integer codes in declared order; response
types and every downstream matrix work with the codes only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_TYPE_CAP = 10**7


class ModelError(ValueError):
    """Invalid support, restriction set or parameter."""


def _lookup(values: tuple, label) -> int:
    try:
        return values.index(label)
    except ValueError:
        pass
    key = str(label)
    for i, v in enumerate(values):
        if str(v) == key:
            return i
    raise ModelError(f"label {label!r} is not in support {values!r}")


@dataclass(frozen=True)
class Support:
    """Finite supports of the outcome, treatment and instrument."""

    y_values: tuple
    d_values: tuple
    z_values: tuple

    def __post_init__(self):
        for name in ("y_values", "d_values", "z_values"):
            vals = tuple(getattr(self, name))
            object.__setattr__(self, name, vals)
            if len(vals) < 2:
                raise ModelError(f"{name} needs at least two labels, got {vals!r}")
            if len(set(map(str, vals))) != len(vals):
                raise ModelError(f"{name} has duplicate labels: {vals!r}")

    @property
    def n_y(self) -> int:
        return len(self.y_values)

    @property
    def n_d(self) -> int:
        return len(self.d_values)

    @property
    def n_z(self) -> int:
        return len(self.z_values)

    @property
    def n_cells(self) -> int:
        return self.n_y * self.n_d * self.n_z

    @property
    def n_types(self) -> int:
        return self.n_y**self.n_d * self.n_d**self.n_z

    def y_code(self, label) -> int:
        return _lookup(self.y_values, label)

    def d_code(self, label) -> int:
        return _lookup(self.d_values, label)

    def z_code(self, label) -> int:
        return _lookup(self.z_values, label)

    def cells(self) -> list[tuple[int, int, int]]:
        """Cell codes ``(y, d, z)`` in canonical row order: z, then d, then y."""
        return [
            (y, d, z)
            for z in range(self.n_z)
            for d in range(self.n_d)
            for y in range(self.n_y)
        ]

    def cell_index(self, y: int, d: int, z: int) -> int:
        return (z * self.n_d + d) * self.n_y + y

    def cell_name(self, y: int, d: int, z: int) -> str:
        return f"p[{self.y_values[y]},{self.d_values[d]}|{self.z_values[z]}]"

    def cell_names(self) -> list[str]:
        return [self.cell_name(*c) for c in self.cells()]

    @property
    def y_numeric(self) -> np.ndarray:
        """Outcome labels as numbers; falls back to the integer codes."""
        try:
            return np.array([float(v) for v in self.y_values])
        except (TypeError, ValueError):
            return np.arange(self.n_y, dtype=float)

    @classmethod
    def from_sizes(cls, n_y: int, n_d: int, n_z: int) -> "Support":
        return cls(tuple(range(n_y)), tuple(range(n_d)), tuple(range(n_z)))

    def to_dict(self) -> dict:
        return {"y": list(self.y_values), "d": list(self.d_values), "z": list(self.z_values)}


@dataclass(frozen=True, order=True)
class ResponseType:
    """Codes of ``(y(d) : d in D)`` and ``(d(z) : z in Z)``."""

    outcomes: tuple[int, ...]
    treatments: tuple[int, ...]

    def y(self, d: int) -> int:
        return self.outcomes[d]

    def d(self, z: int) -> int:
        return self.treatments[z]

    def label(self) -> str:
        return "".join(map(str, self.outcomes)) + "," + "".join(map(str, self.treatments))

    def check(self, support: Support) -> None:
        if len(self.outcomes) != support.n_d or len(self.treatments) != support.n_z:
            raise ModelError(f"response type {self.label()} does not match the support shape")
        if any(not 0 <= v < support.n_y for v in self.outcomes):
            raise ModelError(f"outcome code out of range in {self.label()}")
        if any(not 0 <= v < support.n_d for v in self.treatments):
            raise ModelError(f"treatment code out of range in {self.label()}")


def _check_cap(support: Support, cap: int) -> None:
    if support.n_types > cap:
        raise ModelError(
            f"support has {support.n_types} response types, above the cap of {cap}"
        )


def enumerate_response_types(support: Support, cap: int = DEFAULT_TYPE_CAP) -> list[ResponseType]:
    """All response types in lexicographic order of (outcomes, treatments)."""
    _check_cap(support, cap)
    outs = list(itertools.product(range(support.n_y), repeat=support.n_d))
    treats = list(itertools.product(range(support.n_d), repeat=support.n_z))
    return [ResponseType(o, t) for o in outs for t in treats]


def response_type_index(r: ResponseType, support: Support) -> int:
    """Position of ``r`` in :func:`enumerate_response_types`."""
    o = 0
    for v in r.outcomes:
        o = o * support.n_y + v
    t = 0
    for v in r.treatments:
        t = t * support.n_d + v
    return o * support.n_d**support.n_z + t


def response_type_from_index(index: int, support: Support) -> ResponseType:
    n_t = support.n_d**support.n_z
    if not 0 <= index < support.n_types:
        raise ModelError(f"index {index} out of range")
    o, t = divmod(index, n_t)
    outcomes = []
    for _ in range(support.n_d):
        o, v = divmod(o, support.n_y)
        outcomes.append(v)
    treatments = []
    for _ in range(support.n_z):
        t, v = divmod(t, support.n_d)
        treatments.append(v)
    return ResponseType(tuple(reversed(outcomes)), tuple(reversed(treatments)))


@dataclass(frozen=True)
class Relaxation:
    """Mass on ``types`` is at most (or at least) ``eps``."""

    types: frozenset
    direction: str
    eps: float

    def __post_init__(self):
        if self.direction not in ("at_most", "at_least"):
            raise ModelError(f"unknown relaxation direction {self.direction!r}")
        if not 0.0 <= self.eps <= 1.0:
            raise ModelError(f"relaxation eps must lie in [0, 1], got {self.eps}")
        object.__setattr__(self, "types", frozenset(self.types))


@dataclass(frozen=True)
class StrataModel:
    support: Support
    admissible: tuple[ResponseType, ...]
    relaxations: tuple[Relaxation, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        adm = tuple(sorted(set(self.admissible), key=lambda r: response_type_index(r, self.support)))
        if not adm:
            raise ModelError("admissible set is empty")
        for r in adm:
            r.check(self.support)
        object.__setattr__(self, "admissible", adm)
        object.__setattr__(self, "relaxations", tuple(self.relaxations))
        for rel in self.relaxations:
            for r in rel.types:
                r.check(self.support)

    @property
    def admissible_set(self) -> frozenset:
        return frozenset(self.admissible)

    def treatment_types(self) -> list[tuple[int, ...]]:
        return sorted({r.treatments for r in self.admissible})

    def intersect(self, other: "StrataModel") -> "StrataModel":
        if other.support != self.support:
            raise ModelError("cannot intersect models on different supports")
        common = self.admissible_set & other.admissible_set
        return StrataModel(
            self.support,
            tuple(common),
            self.relaxations + other.relaxations,
            name=f"{self.name}&{other.name}",
        )

    def stratum(self, *treatment_types) -> frozenset:
        """Admissible response types whose treatment map is one of ``treatment_types``.

        Each treatment type is a sequence of treatment labels in instrument order,
        or a string of single-character labels such as ``"012"``.
        """
        wanted = {_treatment_codes(self.support, t) for t in treatment_types}
        return frozenset(r for r in self.admissible if r.treatments in wanted)


def _treatment_codes(support: Support, t) -> tuple[int, ...]:
    items = list(t) if not isinstance(t, str) else list(t)
    if len(items) != support.n_z:
        raise ModelError(f"treatment type {t!r} needs {support.n_z} entries")
    return tuple(support.d_code(v) for v in items)


def relax(model: StrataModel, violating: Iterable[ResponseType], eps: float,
          direction: str = "at_most") -> StrataModel:
    """Admit ``violating`` types but bound their total mass by ``eps``."""
    violating = frozenset(violating)
    return StrataModel(
        model.support,
        tuple(model.admissible_set | violating),
        model.relaxations + (Relaxation(violating, direction, eps),),
        name=f"{model.name}~{eps:g}",
    )


# Catalog of restriction sets.  Each entry maps a support to a predicate on
# response types; treatment-only restrictions accept every outcome map.

def _require(support: Support, name: str, n_d=None, n_z=None, square=False):
    if square and support.n_d != support.n_z:
        raise ModelError(f"{name} needs |D| = |Z|, got {support.n_d} and {support.n_z}")
    if n_d is not None and support.n_d != n_d:
        raise ModelError(f"{name} needs |D| = {n_d}, got {support.n_d}")
    if n_z is not None and support.n_z != n_z:
        raise ModelError(f"{name} needs |Z| = {n_z}, got {support.n_z}")


def _listed(types):
    allowed = {tuple(t) for t in types}
    return lambda r: r.treatments in allowed


MONO12_TYPES = [(0, 0, 0), (0, 1, 0), (0, 1, 2)]
KLINE_WALTERS_TYPES = [(0, 0), (0, 2), (1, 1), (1, 2), (2, 2)]
KLM_TYPES = [(0, 0, 0), (0, 0, 2), (0, 1, 0), (0, 1, 2), (1, 1, 1), (1, 1, 2), (2, 1, 2), (2, 2, 2)]
WARP_TYPES = {
    "warp_i": [(0, 0, 0), (0, 0, 1), (0, 0, 2), (1, 0, 1), (1, 1, 1), (2, 0, 2), (2, 2, 2)],
    "warp_ii": [(0, 0, 0), (0, 0, 2), (0, 1, 1), (0, 1, 2), (1, 1, 1), (2, 2, 2), (2, 1, 2)],
    "warp_iii": [(0, 0, 0), (0, 1, 1), (1, 1, 1), (2, 0, 2), (2, 1, 1), (2, 1, 2), (2, 2, 2)],
}


def _one_sided(support, **_):
    _require(support, "one_sided", square=True)
    return lambda r: all(dz in (0, z) for z, dz in enumerate(r.treatments))


def _cheng_small_mono1(support, **_):
    _require(support, "cheng_small_mono1", n_d=3, n_z=3)
    return _one_sided(support)


def _cheng_small_mono12(support, **_):
    _require(support, "cheng_small_mono12", n_d=3, n_z=3)
    return _listed(MONO12_TYPES)


def _no_defier(support, **_):
    _require(support, "no_defier_generalized", square=True)

    def ok(r):
        t = r.treatments
        return all(t[j] == j or j not in t for j in range(len(t)))

    return ok


def _kline_walters(support, **_):
    _require(support, "kline_walters", n_d=3, n_z=2)
    return _listed(KLINE_WALTERS_TYPES)


def _klm_fields(support, **_):
    _require(support, "klm_fields", n_d=3, n_z=3)
    return _listed(KLM_TYPES)


def _warp(name):
    def build(support, **_):
        _require(support, name, n_d=3, n_z=3)
        return _listed(WARP_TYPES[name])

    return build


def _ordered_monotone(support, **_):
    return lambda r: all(a <= b for a, b in zip(r.treatments, r.treatments[1:]))


def _mtr(support, **_):
    return lambda r: all(a <= b for a, b in zip(r.outcomes, r.outcomes[1:]))


def _harmless(support, control=0, **_):
    c = support.d_code(control)
    return lambda r: all(y >= r.outcomes[c] for y in r.outcomes)


def _unrestricted(support, **_):
    return lambda r: True


CATALOG: dict[str, Callable] = {
    "unrestricted": _unrestricted,
    "one_sided": _one_sided,
    "cheng_small_mono1": _cheng_small_mono1,
    "cheng_small_mono12": _cheng_small_mono12,
    "no_defier_generalized": _no_defier,
    "kline_walters": _kline_walters,
    "klm_fields": _klm_fields,
    "warp_i": _warp("warp_i"),
    "warp_ii": _warp("warp_ii"),
    "warp_iii": _warp("warp_iii"),
    "ordered_monotone": _ordered_monotone,
    "mtr": _mtr,
    "harmless": _harmless,
}


def catalog(name: str, support: Support, relax_eps: float | None = None,
            cap: int = DEFAULT_TYPE_CAP, **options) -> StrataModel:
    """Build one of the named restriction sets on ``support``.

    With ``relax_eps`` set, every response type is admitted and the types that
    violate the restriction are jointly capped at ``relax_eps`` of the mass.
    """
    try:
        builder = CATALOG[name]
    except KeyError:
        raise ModelError(f"unknown catalog entry {name!r}; choose from {sorted(CATALOG)}") from None
    keep = builder(support, **options)
    all_types = enumerate_response_types(support, cap)
    admissible = [r for r in all_types if keep(r)]
    model = StrataModel(support, tuple(admissible), name=name)
    if relax_eps is not None:
        violators = [r for r in all_types if not keep(r)]
        model = relax(model, violators, relax_eps)
    return model


def explicit_model(support: Support, types: Iterable, name: str = "explicit") -> StrataModel:
    """Model from explicit ``(outcome_map, treatment_map)`` label pairs."""
    admissible = []
    for item in types:
        if isinstance(item, ResponseType):
            admissible.append(item)
            continue
        outcomes, treatments = item
        admissible.append(ResponseType(
            tuple(support.y_code(v) for v in outcomes),
            tuple(support.d_code(v) for v in treatments),
        ))
    return StrataModel(support, tuple(admissible), name=name)


def treatment_model(support: Support, treatment_types: Iterable, name: str = "treatment_types",
                    cap: int = DEFAULT_TYPE_CAP) -> StrataModel:
    """All outcome maps crossed with the listed treatment types."""
    wanted = {_treatment_codes(support, t) for t in treatment_types}
    admissible = [r for r in enumerate_response_types(support, cap) if r.treatments in wanted]
    return StrataModel(support, tuple(admissible), name=name)


@dataclass(frozen=True)
class ParameterSpec:
    """``theta(Q) = E_Q[g(R) | R in conditioning]``."""

    model: StrataModel
    g: Callable[[ResponseType], float]
    conditioning: frozenset
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        cond = frozenset(self.conditioning)
        object.__setattr__(self, "conditioning", cond)
        if not cond:
            raise ModelError("conditioning set is empty")
        extra = cond - self.model.admissible_set
        if extra:
            raise ModelError(
                f"conditioning set has {len(extra)} types outside the admissible set, "
                f"e.g. {next(iter(extra)).label()}"
            )
        for r in self.model.admissible:
            if not math.isfinite(float(self.g(r))):
                raise ModelError(f"g is not finite at {r.label()}")

    def g_values(self, columns: Sequence[ResponseType]) -> np.ndarray:
        return np.array([float(self.g(r)) for r in columns])

    def in_conditioning(self, columns: Sequence[ResponseType]) -> np.ndarray:
        return np.array([r in self.conditioning for r in columns], dtype=bool)

    def value(self, q: "LatentDistribution") -> float:
        """theta(Q) for a latent distribution with positive stratum mass."""
        num = den = 0.0
        for r, m in zip(q.types, q.mass):
            if r in self.conditioning:
                num += m * float(self.g(r))
                den += m
        if den <= 0:
            raise ModelError("stratum has zero mass under q")
        return num / den


def _resolve_conditioning(model: StrataModel, conditioning) -> frozenset:
    if conditioning is None:
        return model.admissible_set
    if callable(conditioning):
        return frozenset(r for r in model.admissible if conditioning(r))
    items = list(conditioning)
    if all(isinstance(r, ResponseType) for r in items):
        return frozenset(items)
    return model.stratum(*items)


STANDARD_PARAMETERS = ("ate_contrast", "prob_benefit", "prob_no_harm", "relative_effect", "stratum_mass")


def standard_parameters(name: str, model: StrataModel, d1=None, d2=None, conditioning=None) -> ParameterSpec:
    """Common parameters comparing treatments ``d1`` and ``d2`` (labels).

    ``conditioning`` may be ``None`` (the whole admissible set), a predicate on
    response types, an iterable of response types, or an iterable of treatment
    types (see :meth:`StrataModel.stratum`).  For ``stratum_mass`` the
    conditioning argument names the target stratum whose probability is wanted.
    """
    support = model.support
    cond = _resolve_conditioning(model, conditioning)
    if name == "stratum_mass":
        target = cond
        return ParameterSpec(model, lambda r: 1.0 if r in target else 0.0, model.admissible_set,
                             name=name, meta={"target_size": len(target)})
    if name not in STANDARD_PARAMETERS:
        raise ModelError(f"unknown parameter {name!r}; choose from {STANDARD_PARAMETERS}")
    if d1 is None or d2 is None:
        raise ModelError(f"{name} needs two treatment labels")
    j, k = support.d_code(d1), support.d_code(d2)
    yv = support.y_numeric
    if name == "ate_contrast":
        g = lambda r: float(yv[r.outcomes[j]] - yv[r.outcomes[k]])
    elif name == "prob_benefit":
        g = lambda r: float(r.outcomes[j] > r.outcomes[k])
    elif name == "prob_no_harm":
        g = lambda r: float(r.outcomes[j] >= r.outcomes[k])
    else:
        g = lambda r: float(r.outcomes[j] > r.outcomes[k]) - float(r.outcomes[k] > r.outcomes[j])
    return ParameterSpec(model, g, cond, name=name, meta={"d1": d1, "d2": d2})


def custom_parameter(model: StrataModel, table: dict, conditioning=None, default: float | None = None,
                     name: str = "custom") -> ParameterSpec:
    """Parameter with ``g`` given as a table keyed by response type or its label."""
    lookup = {}
    for key, val in table.items():
        lookup[key.label() if isinstance(key, ResponseType) else str(key)] = float(val)

    def g(r):
        try:
            return lookup[r.label()]
        except KeyError:
            if default is None:
                raise ModelError(f"custom g has no value for {r.label()}") from None
            return default

    return ParameterSpec(model, g, _resolve_conditioning(model, conditioning), name=name)


@dataclass(frozen=True)
class LatentDistribution:
    """Point masses ``q(r) = Q{R = r}``."""

    types: tuple[ResponseType, ...]
    mass: np.ndarray
    atol: float = 1e-10

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float).copy()
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "types", tuple(self.types))
        if len(self.types) != m.size:
            raise ModelError("types and masses differ in length")
        if np.any(m < 0):
            raise ModelError("latent masses must be nonnegative")
        if abs(m.sum() - 1.0) > self.atol:
            raise ModelError(f"latent masses sum to {m.sum():.12g}, not 1")

    @classmethod
    def from_dict(cls, masses: dict, atol: float = 1e-10) -> "LatentDistribution":
        items = sorted(masses.items())
        return cls(tuple(r for r, _ in items), np.array([m for _, m in items]), atol=atol)

    def vector(self, columns: Sequence[ResponseType]) -> np.ndarray:
        """Masses aligned to ``columns``; mass off ``columns`` is an error."""
        pos = {r: i for i, r in enumerate(columns)}
        out = np.zeros(len(columns))
        for r, m in zip(self.types, self.mass):
            if r not in pos:
                if m > 0:
                    raise ModelError(f"q puts mass on {r.label()}, which is not a column")
                continue
            out[pos[r]] += m
        return out
