"""JSON scenario configs.

A config is either a built-in scenario id or a path to a JSON object::

    {
      "name": "my-walk",
      "law": {"kind": "iid_finite",
              "support": [[[2, 1], [1, 1]], [[1, 1], [1, 2]]],
              "weights": [0.5, 0.5]},
      "n_max": 10000, "trials": 100, "master_seed": 7
    }

Complex numbers are written as ``[re, im]``; bare reals are accepted.  A
file may also say ``"builtin": "<id>"`` and override top-level fields.
"""
from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .estimators import SubspaceSpec
from .experiments import ScenarioConfig
from .linalg import DomainError, as_cmatrix
from .scenarios import BUILTINS, builtin
from .walk import IncrementLaw


class ConfigError(ValueError):
    """Malformed or invalid config; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _complex(x, path: str) -> complex:
    if isinstance(x, bool):
        raise ConfigError(path, "expected a number or [re, im]")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in x):
        return complex(x[0], x[1])
    raise ConfigError(path, "expected a number or [re, im]")


def _vector(x, path: str) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ConfigError(path, "expected a non-empty list")
    return np.array([_complex(t, f"{path}[{i}]") for i, t in enumerate(x)])


def _matrix(x, path: str) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ConfigError(path, "expected a non-empty list of rows")
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(x)]
    if any(r.shape != rows[0].shape for r in rows):
        raise ConfigError(path, "rows have different lengths")
    try:
        return as_cmatrix(np.stack(rows))
    except DomainError as exc:
        raise ConfigError(path, str(exc)) from None


def _reals(x, path: str) -> np.ndarray:
    if not isinstance(x, list) or not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in x):
        raise ConfigError(path, "expected a list of real numbers")
    return np.asarray(x, dtype=float)


def _probability(p: np.ndarray, path: str) -> np.ndarray:
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ConfigError(path, "entries must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-12:
        raise ConfigError(path, f"entries sum to {p.sum():.15g}, not 1")
    return p


def parse_law(obj, path: str = "law") -> IncrementLaw:
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    kind = obj.get("kind")
    if kind not in ("iid_finite", "markov_finite"):
        raise ConfigError(f"{path}.kind", "must be 'iid_finite' or 'markov_finite'")
    sup = obj.get("support")
    if not isinstance(sup, list) or not sup:
        raise ConfigError(f"{path}.support", "expected a non-empty list of matrices")
    support = [_matrix(g, f"{path}.support[{i}]") for i, g in enumerate(sup)]
    m = len(support)
    labels = tuple(str(s) for s in obj.get("labels", ()))
    if labels and len(labels) != m:
        raise ConfigError(f"{path}.labels", f"expected {m} labels")
    kw = {}
    if kind == "iid_finite":
        w = _reals(obj.get("weights", [1.0 / m] * m), f"{path}.weights")
        if w.shape != (m,):
            raise ConfigError(f"{path}.weights", f"expected {m} entries")
        kw["weights"] = _probability(w, f"{path}.weights")
    else:
        k = obj.get("kernel")
        if not isinstance(k, list) or len(k) != m:
            raise ConfigError(f"{path}.kernel", f"expected {m} rows")
        rows = []
        for i, row in enumerate(k):
            r = _reals(row, f"{path}.kernel[{i}]")
            if r.shape != (m,):
                raise ConfigError(f"{path}.kernel[{i}]", f"expected {m} entries")
            rows.append(_probability(r, f"{path}.kernel[{i}]"))
        kw["kernel"] = np.stack(rows)
        if "initial" not in obj:
            raise ConfigError(f"{path}.initial", "markov laws need an initial distribution")
        init = _reals(obj["initial"], f"{path}.initial")
        if init.shape != (m,):
            raise ConfigError(f"{path}.initial", f"expected {m} entries")
        kw["initial"] = _probability(init, f"{path}.initial")
    try:
        return IncrementLaw(kind=kind, support=tuple(support), labels=labels, **kw)
    except DomainError as exc:
        raise ConfigError(path, str(exc)) from None


def _subspace(x, d: int, path: str) -> SubspaceSpec:
    if not isinstance(x, list):
        raise ConfigError(path, "expected a list of basis vectors")
    vecs = [_vector(v, f"{path}[{i}]") for i, v in enumerate(x)]
    if any(v.shape != (d,) for v in vecs):
        raise ConfigError(path, f"basis vectors must have {d} entries")
    try:
        return SubspaceSpec(np.array(vecs).reshape(-1, d), d)
    except DomainError as exc:
        raise ConfigError(path, str(exc)) from None


_INT_FIELDS = ("n_max", "trials", "master_seed", "checkpoint_stride", "dim")


def config_from_dict(obj: dict, base: ScenarioConfig | None = None) -> ScenarioConfig:
    if not isinstance(obj, dict):
        raise ConfigError("<root>", "expected a JSON object")
    known = {"builtin", "name", "law", "epsilons", "l_mu", "l_mu_check", "probe_vector",
             "walk_side", "extra_checkpoints", "hyperplane_normal", "checkpoint_growth", *_INT_FIELDS}
    for key in obj:
        if key not in known:
            raise ConfigError(key, "unknown field")
    kw = {}
    if "law" in obj:
        kw["law"] = parse_law(obj["law"])
    elif base is None:
        raise ConfigError("law", "missing")
    law = kw.get("law", base.law if base else None)
    d = law.dim
    if "name" in obj:
        kw["name"] = str(obj["name"])
    elif base is None:
        kw["name"] = "custom"
    for key in _INT_FIELDS:
        if key in obj:
            v = obj[key]
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(key, "expected an integer")
            kw[key] = v
    if base is None and "n_max" not in kw:
        raise ConfigError("n_max", "missing")
    if "checkpoint_growth" in obj:
        kw["checkpoint_growth"] = float(_reals([obj["checkpoint_growth"]], "checkpoint_growth")[0])
    if "epsilons" in obj:
        eps = _reals(obj["epsilons"], "epsilons")
        if np.any(eps <= 0):
            raise ConfigError("epsilons", "must be positive")
        kw["epsilons"] = tuple(eps.tolist())
    if "extra_checkpoints" in obj:
        kw["extra_checkpoints"] = tuple(int(t) for t in _reals(obj["extra_checkpoints"], "extra_checkpoints"))
    for key in ("l_mu", "l_mu_check"):
        if key in obj:
            kw[key] = None if obj[key] is None else _subspace(obj[key], d, key)
    for key in ("probe_vector", "hyperplane_normal"):
        if key in obj:
            kw[key] = None if obj[key] is None else _vector(obj[key], key)
    if "walk_side" in obj:
        kw["walk_side"] = obj["walk_side"]
    if "law" in kw and base is not None and "dim" not in kw:
        kw["dim"] = None
    try:
        if base is None:
            return ScenarioConfig(**kw)
        return replace(base, **kw)
    except DomainError as exc:
        raise ConfigError(_guess_field(str(exc)), str(exc)) from None
    except TypeError as exc:
        raise ConfigError("<root>", str(exc)) from None


def _guess_field(message: str) -> str:
    for key in ("n_max", "trials", "epsilons", "walk_side", "probe_vector", "hyperplane_normal",
                "l_mu_check", "l_mu", "dim"):
        if key in message:
            return key
    return "<root>"


def parse_config(source: str | Path, seed: int | None = None) -> ScenarioConfig:
    """Load a built-in scenario id or a JSON file."""
    src = str(source)
    if src in BUILTINS:
        cfg = builtin(src)
    else:
        path = Path(src)
        if not path.exists():
            raise ConfigError("<file>", f"{src} is neither a file nor a built-in scenario "
                                        f"({', '.join(BUILTINS)})")
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"{src}: invalid JSON ({exc})") from None
        base = None
        if isinstance(obj, dict) and "builtin" in obj:
            if obj["builtin"] not in BUILTINS:
                raise ConfigError("builtin", f"unknown scenario {obj['builtin']!r}")
            base = builtin(obj["builtin"])
        cfg = config_from_dict(obj, base)
    if seed is not None:
        cfg = replace(cfg, master_seed=int(seed))
    return cfg


def _enc_c(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Inverse of :func:`config_from_dict` (used to echo scenarios in results)."""
    law = cfg.law
    lobj = {
        "kind": law.kind,
        "support": [[[_enc_c(z) for z in row] for row in g] for g in law.support],
        "labels": list(law.labels),
    }
    if law.kind == "iid_finite":
        lobj["weights"] = law.weights.tolist()
    else:
        lobj["kernel"] = law.kernel.tolist()
        lobj["initial"] = law.initial.tolist()
    out = {
        "name": cfg.name, "law": lobj, "n_max": cfg.n_max, "trials": cfg.trials,
        "master_seed": cfg.master_seed, "checkpoint_stride": cfg.checkpoint_stride,
        "checkpoint_growth": cfg.checkpoint_growth, "epsilons": list(cfg.epsilons),
        "walk_side": cfg.walk_side, "extra_checkpoints": list(cfg.extra_checkpoints), "dim": cfg.dim,
    }
    for key in ("l_mu", "l_mu_check"):
        s = getattr(cfg, key)
        if s is not None:
            out[key] = [[_enc_c(z) for z in v] for v in s.basis]
    for key in ("probe_vector", "hyperplane_normal"):
        v = getattr(cfg, key)
        if v is not None:
            out[key] = [_enc_c(z) for z in v]
    return out
