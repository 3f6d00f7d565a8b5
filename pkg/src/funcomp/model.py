"""Problem instances: alphabets, joint pmfs, function tables, and pmf algebra.

Probabilities and function values are kept as exact rationals as parsed from
the document and converted to 64-bit floats at solver boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ParseError, ValidationError

ALPHABET_CAP = 24
PMF_SUM_TOL = 1e-12

SETTINGS = (
    "p2p",
    "side_info",
    "distributed",
    "mdc",
    "successive_refinement",
    "cascade",
    "markov",
)

# pmf axis count, function count, and per-function domain axes for each setting
_SETTING_SHAPE = {
    "p2p": (1, [(0,)]),
    "side_info": (2, [(0, 1)]),
    "distributed": (2, [(0, 1)]),
    "mdc": (1, [(0,), (0,), (0,)]),
    "successive_refinement": (1, [(0,), (0,)]),
    "cascade": (2, [(0,), (1,)]),
    "markov": (1, [(0,)]),
}


def _as_fraction(value, where: str) -> Fraction:
    """Parse an int, float, or 'a/b' / decimal string into an exact Fraction."""
    if isinstance(value, bool):
        raise ValidationError(f"{where}: boolean is not a number")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not np.isfinite(value):
            raise ValidationError(f"{where}: non-finite number {value!r}")
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"{where}: cannot parse number {value!r}: {exc}") from None
    raise ParseError(f"{where}: expected a number, got {type(value).__name__}")


def _fraction_doc(f: Fraction):
    return int(f) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


@dataclass(frozen=True)
class Alphabet:
    """Ordered finite symbol set for one source axis."""

    symbols: tuple

    def __post_init__(self):
        if not 1 <= len(self.symbols) <= ALPHABET_CAP:
            raise ValidationError(
                f"alphabet size {len(self.symbols)} outside [1, {ALPHABET_CAP}]"
            )
        if len(set(self.symbols)) != len(self.symbols):
            raise ValidationError("alphabet labels are not unique")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, label) -> int:
        try:
            return self.symbols.index(label)
        except ValueError:
            raise ValidationError(f"unknown symbol {label!r}") from None

    def embedding(self) -> np.ndarray | None:
        """Real-line embedding of the labels, or None if they are not numeric."""
        try:
            return np.array([float(s) for s in self.symbols])
        except (TypeError, ValueError):
            return None


class JointPmf:
    """Dense joint pmf over 1-3 alphabets with exact rational entries."""

    def __init__(self, axes, table, *, allow_zero_marginals: bool = False):
        axes = tuple(axes)
        if not 1 <= len(axes) <= 3:
            raise ValidationError(f"pmf must have 1-3 axes, got {len(axes)}")
        arr = np.empty([a.size for a in axes], dtype=object)
        flat = arr.reshape(-1)
        src = np.asarray(table, dtype=object).reshape(-1)
        if src.size != flat.size:
            raise ValidationError(
                f"pmf shape mismatch: {src.size} entries for axes of sizes "
                f"{[a.size for a in axes]}"
            )
        for i, v in enumerate(src):
            fv = v if isinstance(v, Fraction) else _as_fraction(v, f"pmf[{i}]")
            if fv < 0:
                raise ValidationError(f"pmf[{i}] is negative")
            flat[i] = fv
        total = sum(flat)
        if abs(float(total) - 1.0) > PMF_SUM_TOL:
            raise ValidationError(f"pmf sums to {float(total)!r}, not 1")
        self.axes = axes
        self.table = arr
        self.allow_zero_marginals = bool(allow_zero_marginals)
        if not allow_zero_marginals:
            for ax in range(len(axes)):
                marg = self._axis_sum(ax)
                if any(p == 0 for p in marg):
                    raise ValidationError(
                        f"marginal along axis {ax} has a zero entry "
                        "(set allow_zero_marginals to permit)"
                    )

    def _axis_sum(self, axis: int) -> np.ndarray:
        other = tuple(i for i in range(self.table.ndim) if i != axis)
        return self.table.sum(axis=other) if other else self.table

    def dense(self) -> np.ndarray:
        out = np.array([float(v) for v in self.table.reshape(-1)])
        return out.reshape(self.table.shape)

    @property
    def support(self) -> np.ndarray:
        return np.array([v > 0 for v in self.table.reshape(-1)]).reshape(self.table.shape)

    def marginal(self, axes) -> "JointPmf":
        """Marginal pmf keeping the given axis indices (in their current order)."""
        axes = tuple(axes)
        if not axes:
            raise ValidationError("marginal requires a nonempty axis subset")
        if any(a not in range(self.table.ndim) for a in axes) or len(set(axes)) != len(axes):
            raise ValidationError(f"bad axis subset {axes}")
        drop = tuple(i for i in range(self.table.ndim) if i not in axes)
        tab = self.table.sum(axis=drop) if drop else self.table.copy()
        keep_sorted = tuple(sorted(axes))
        perm = tuple(keep_sorted.index(a) for a in axes)
        tab = np.transpose(tab, perm) if tab.ndim > 1 else tab
        return JointPmf([self.axes[a] for a in axes], tab, allow_zero_marginals=True)

    def conditional(self, axis: int, value) -> "JointPmf":
        """Conditional pmf over the remaining axes given axes[axis] == value."""
        if self.table.ndim < 2:
            raise ValidationError("conditional requires at least two axes")
        idx = self.axes[axis].index(value)
        sl = [slice(None)] * self.table.ndim
        sl[axis] = idx
        sub = self.table[tuple(sl)]
        norm = sub.sum()
        if norm == 0:
            raise ValidationError(
                f"conditioning on zero-probability value {value!r} of axis {axis}"
            )
        rest = [a for i, a in enumerate(self.axes) if i != axis]
        return JointPmf(rest, sub / norm, allow_zero_marginals=True)

    def __eq__(self, other):
        return (
            isinstance(other, JointPmf)
            and self.axes == other.axes
            and self.table.shape == other.table.shape
            and bool((self.table == other.table).all())
        )

    def __repr__(self):
        return f"JointPmf(axes={[a.size for a in self.axes]})"


def marginal(pmf: JointPmf, axes) -> JointPmf:
    return pmf.marginal(axes)


def conditional(pmf: JointPmf, axis: int, value) -> JointPmf:
    return pmf.conditional(axis, value)


class FunctionTable:
    """Target function on a product of alphabets with values in R^d."""

    def __init__(self, name, axes, alphabets, values, metric="euclidean"):
        self.name = str(name)
        self.axes = tuple(axes)
        self.alphabets = tuple(alphabets)
        shape = tuple(a.size for a in self.alphabets)
        nested = np.asarray(values, dtype=object)
        if nested.shape[: len(shape)] != shape:
            raise ValidationError(
                f"function {self.name!r}: values shape {nested.shape} does not "
                f"match domain sizes {shape}"
            )
        if nested.ndim == len(shape):
            nested = nested.reshape(shape + (1,))
        elif nested.ndim != len(shape) + 1:
            raise ValidationError(
                f"function {self.name!r}: ragged or over-nested value array"
            )
        self.dim = nested.shape[-1]
        exact = np.empty(nested.shape, dtype=object)
        it = np.nditer(nested, flags=["multi_index", "refs_ok"])
        for v in it:
            exact[it.multi_index] = _as_fraction(
                v.item(), f"function {self.name!r} value {it.multi_index}"
            )
        self.values_exact = exact
        self.values = np.array(
            [float(v) for v in exact.reshape(-1)], dtype=float
        ).reshape(exact.shape)
        if metric not in ("euclidean", "abs"):
            raise ValidationError(f"function {self.name!r}: unknown metric {metric!r}")
        if metric == "abs" and self.dim != 1:
            raise ValidationError(
                f"function {self.name!r}: metric 'abs' requires d = 1, got d = {self.dim}"
            )
        self.metric = metric

    def __eq__(self, other):
        return (
            isinstance(other, FunctionTable)
            and self.name == other.name
            and self.axes == other.axes
            and self.alphabets == other.alphabets
            and self.metric == other.metric
            and self.values_exact.shape == other.values_exact.shape
            and bool((self.values_exact == other.values_exact).all())
        )

    def __repr__(self):
        return f"FunctionTable({self.name!r}, axes={self.axes}, d={self.dim})"


@dataclass
class MarkovSpec:
    """First-order chain block of a markov instance."""

    transition: np.ndarray  # object array of Fractions, rows sum to 1
    k: int

    def dense(self) -> np.ndarray:
        out = np.array([float(v) for v in self.transition.reshape(-1)])
        return out.reshape(self.transition.shape)

    def __eq__(self, other):
        return (
            isinstance(other, MarkovSpec)
            and self.k == other.k
            and self.transition.shape == other.transition.shape
            and bool((self.transition == other.transition).all())
        )


@dataclass
class ProblemInstance:
    setting: str
    pmf: JointPmf
    functions: tuple
    tolerances: tuple
    allow_zero_marginals: bool = False
    markov: MarkovSpec | None = None

    @property
    def alphabets(self):
        return self.pmf.axes

    def function(self, index: int = 0) -> FunctionTable:
        return self.functions[index]

    def __eq__(self, other):
        return (
            isinstance(other, ProblemInstance)
            and self.setting == other.setting
            and self.pmf == other.pmf
            and self.functions == other.functions
            and self.tolerances == other.tolerances
            and self.allow_zero_marginals == other.allow_zero_marginals
            and self.markov == other.markov
        )


def _validate_shape(instance: ProblemInstance):
    n_axes, func_axes = _SETTING_SHAPE[instance.setting]
    if len(instance.pmf.axes) != n_axes:
        raise ValidationError(
            f"setting {instance.setting!r} needs {n_axes} pmf axes, "
            f"got {len(instance.pmf.axes)}"
        )
    if len(instance.functions) != len(func_axes):
        raise ValidationError(
            f"setting {instance.setting!r} needs {len(func_axes)} function(s), "
            f"got {len(instance.functions)}"
        )
    if len(instance.tolerances) != len(instance.functions):
        raise ValidationError(
            f"{len(instance.tolerances)} tolerance(s) for "
            f"{len(instance.functions)} function(s)"
        )
    for f, expect in zip(instance.functions, func_axes):
        if f.axes != expect:
            raise ValidationError(
                f"function {f.name!r}: domain axes {f.axes} do not match the "
                f"{instance.setting!r} setting (expected {expect})"
            )
        for ax, alpha in zip(f.axes, f.alphabets):
            if alpha != instance.pmf.axes[ax]:
                raise ValidationError(
                    f"function {f.name!r}: alphabet on axis {ax} differs from pmf"
                )
    for i, t in enumerate(instance.tolerances):
        if not np.isfinite(t) or t < 0:
            raise ValidationError(f"tolerance[{i}] = {t!r} is not finite and >= 0")
    if instance.setting == "markov":
        if instance.markov is None:
            raise ValidationError("markov setting requires a 'markov' block")
        n = instance.pmf.axes[0].size
        if instance.markov.transition.shape != (n, n):
            raise ValidationError("markov transition must be |X| x |X|")
        for i in range(n):
            row = instance.markov.transition[i].sum()
            if abs(float(row) - 1.0) > PMF_SUM_TOL:
                raise ValidationError(f"markov transition row {i} sums to {float(row)!r}")
        if instance.markov.k < 1:
            raise ValidationError("markov block parameter k must be >= 1")


def _parse_functions(doc, axes_all, setting):
    raw = doc.get("functions")
    if not isinstance(raw, list) or not raw:
        raise ParseError("field 'functions' must be a nonempty list")
    _, func_axes = _SETTING_SHAPE[setting]
    out = []
    for i, fd in enumerate(raw):
        if not isinstance(fd, dict) or "values" not in fd:
            raise ParseError(f"functions[{i}] must be an object with 'values'")
        axes = tuple(fd.get("axes", func_axes[i] if i < len(func_axes) else (0,)))
        out.append(
            FunctionTable(
                fd.get("name", f"f{i}"),
                axes,
                [axes_all[a] for a in axes],
                fd["values"],
                fd.get("metric", "euclidean"),
            )
        )
    return tuple(out)


def load_instance(text: str) -> ProblemInstance:
    """Parse and validate an instance document (JSON)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("document root must be an object")
    for key in ("setting", "alphabets", "functions", "tolerances"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
    setting = doc["setting"]
    if setting not in SETTINGS:
        raise ValidationError(f"unknown setting {setting!r}")
    raw_alpha = doc["alphabets"]
    if not isinstance(raw_alpha, list) or not raw_alpha:
        raise ParseError("field 'alphabets' must be a nonempty list")
    axes = []
    for i, a in enumerate(raw_alpha):
        symbols = a["symbols"] if isinstance(a, dict) else a
        axes.append(Alphabet(tuple(symbols)))
    allow_zero = bool(doc.get("allow_zero_marginals", False))

    markov = None
    if "markov" in doc and doc["markov"] is not None:
        mb = doc["markov"]
        if not isinstance(mb, dict) or "transition" not in mb:
            raise ParseError("field 'markov' must be an object with 'transition'")
        n = axes[0].size
        rows = mb["transition"]
        trans = np.empty((n, n), dtype=object)
        arr = np.asarray(rows, dtype=object)
        if arr.shape != (n, n):
            raise ValidationError("markov transition must be |X| x |X|")
        for i in range(n):
            for j in range(n):
                trans[i, j] = _as_fraction(arr[i, j], f"markov.transition[{i}][{j}]")
                if trans[i, j] < 0:
                    raise ValidationError(f"markov.transition[{i}][{j}] is negative")
        markov = MarkovSpec(trans, int(mb.get("k", 1)))

    if doc.get("pmf") is None:
        if setting != "markov":
            raise ParseError("missing field 'pmf'")
        # stationary distribution of the chain, computed at load time
        from .markov import stationary_distribution

        pi = stationary_distribution(markov.dense())
        table = np.array([Fraction(x) for x in pi], dtype=object)
        table = table / table.sum()
        pmf = JointPmf(axes, table, allow_zero_marginals=allow_zero)
    else:
        pmf = JointPmf(axes, doc["pmf"], allow_zero_marginals=allow_zero)

    functions = _parse_functions(doc, axes, setting)
    tolerances = tuple(
        float(_as_fraction(t, f"tolerances[{i}]"))
        for i, t in enumerate(doc["tolerances"])
    )
    inst = ProblemInstance(setting, pmf, functions, tolerances, allow_zero, markov)
    _validate_shape(inst)
    return inst


def load_instance_path(path) -> ProblemInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return load_instance(fh.read())


def _nested_fractions(arr):
    if isinstance(arr, np.ndarray) and arr.ndim > 0:
        return [_nested_fractions(sub) for sub in arr]
    if isinstance(arr, np.ndarray):
        arr = arr.item()
    return _fraction_doc(arr)


def serialize(instance: ProblemInstance) -> str:
    """Canonical document for an instance; load_instance inverts it exactly."""
    doc = {
        "setting": instance.setting,
        "alphabets": [list(a.symbols) for a in instance.pmf.axes],
        "pmf": _nested_fractions(instance.pmf.table),
        "functions": [
            {
                "name": f.name,
                "axes": list(f.axes),
                "values": _nested_fractions(f.values_exact),
                "metric": f.metric,
            }
            for f in instance.functions
        ],
        "tolerances": list(instance.tolerances),
    }
    if instance.allow_zero_marginals:
        doc["allow_zero_marginals"] = True
    if instance.markov is not None:
        doc["markov"] = {
            "transition": _nested_fractions(instance.markov.transition),
            "k": instance.markov.k,
        }
    return json.dumps(doc, sort_keys=True, separators=(",", ": "), indent=1)
