"""Parametric maps from input space to the representation space."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from graphrep.errors import DimensionError, InvalidConfigError, SchemaError, ValidationError


class Kind(str, Enum):
    LINEAR = "linear"
    MLP1 = "mlp1"


@dataclass
class EmbeddingParams:
    """Weights of a linear map (``w_out``: d'×d) or a one-hidden-layer tanh
    network (``w_hidden``: h×d, ``b_hidden``: h, ``w_out``: d'×h)."""

    kind: Kind
    w_out: np.ndarray
    w_hidden: np.ndarray | None = None
    b_hidden: np.ndarray | None = None

    def __post_init__(self):
        self.kind = Kind(self.kind)
        self.w_out = np.array(self.w_out, dtype=np.float64, ndmin=2)
        if self.kind is Kind.LINEAR:
            if self.w_hidden is not None or self.b_hidden is not None:
                raise InvalidConfigError("linear embedding has no hidden layer")
        else:
            if self.w_hidden is None or self.b_hidden is None:
                raise InvalidConfigError("mlp1 embedding needs w_hidden and b_hidden")
            self.w_hidden = np.array(self.w_hidden, dtype=np.float64, ndmin=2)
            self.b_hidden = np.array(self.b_hidden, dtype=np.float64).reshape(-1)
            h = self.w_hidden.shape[0]
            if self.b_hidden.shape != (h,) or self.w_out.shape[1] != h:
                raise DimensionError(
                    f"inconsistent mlp1 shapes: w_hidden {self.w_hidden.shape}, "
                    f"b_hidden {self.b_hidden.shape}, w_out {self.w_out.shape}"
                )
        for name, block in self.blocks().items():
            if not np.all(np.isfinite(block)):
                raise ValidationError(f"non-finite entries in {name}")

    @property
    def d(self) -> int:
        return self.w_out.shape[1] if self.kind is Kind.LINEAR else self.w_hidden.shape[1]

    @property
    def d_prime(self) -> int:
        return self.w_out.shape[0]

    @property
    def h(self) -> int | None:
        return None if self.kind is Kind.LINEAR else self.w_hidden.shape[0]

    def blocks(self) -> dict[str, np.ndarray]:
        out = {"w_out": self.w_out}
        if self.kind is Kind.MLP1:
            out["w_hidden"] = self.w_hidden
            out["b_hidden"] = self.b_hidden
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks().values()])

    def with_flat(self, theta) -> EmbeddingParams:
        theta = np.asarray(theta, dtype=np.float64)
        new, pos = {}, 0
        for name, block in self.blocks().items():
            new[name] = theta[pos : pos + block.size].reshape(block.shape).copy()
            pos += block.size
        if pos != theta.size:
            raise DimensionError(f"expected {pos} parameters, got {theta.size}")
        return EmbeddingParams(self.kind, **new)

    def copy(self) -> EmbeddingParams:
        return self.with_flat(self.flat())

    def equals(self, other: EmbeddingParams) -> bool:
        if self.kind is not other.kind:
            return False
        a, b = self.blocks(), other.blocks()
        return all(np.array_equal(a[k], b[k]) for k in a)


def embed(params: EmbeddingParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.d:
        raise DimensionError(f"X has shape {X.shape}, model expects {params.d} columns")
    if not np.all(np.isfinite(X)):
        raise ValidationError("X contains non-finite values")
    if params.kind is Kind.LINEAR:
        return X @ params.w_out.T
    return hidden_activations(params, X) @ params.w_out.T


def hidden_activations(params: EmbeddingParams, X) -> np.ndarray:
    return np.tanh(X @ params.w_hidden.T + params.b_hidden)


def init_params(kind, d, d_prime, h=None, scheme="identity", scale=0.1, seed=0):
    """Create starting weights.

    ``scheme="identity"`` takes the first ``d_prime`` rows of the identity
    (linear only), so training starts from the euclidean metric.
    ``scheme="gaussian"`` draws every weight from N(0, scale²) with a seeded
    generator; hidden biases start at zero.
    """
    kind = Kind(kind)
    if d < 1 or d_prime < 1:
        raise InvalidConfigError("dimensions must be positive")
    if kind is Kind.MLP1 and (h is None or h < 1):
        raise InvalidConfigError("mlp1 requires h >= 1")
    if scheme == "identity":
        if kind is not Kind.LINEAR:
            raise InvalidConfigError("identity init is only defined for linear embeddings")
        if d_prime > d:
            raise InvalidConfigError(f"identity init needs d' <= d, got d'={d_prime}, d={d}")
        return EmbeddingParams(kind, np.eye(d)[:d_prime].copy())
    if scheme != "gaussian":
        raise InvalidConfigError(f"unknown init scheme {scheme!r}")
    if not scale > 0:
        raise InvalidConfigError("gaussian init scale must be positive")
    rng = np.random.default_rng(seed)
    if kind is Kind.LINEAR:
        return EmbeddingParams(kind, rng.normal(0.0, scale, size=(d_prime, d)))
    w_hidden = rng.normal(0.0, scale, size=(h, d))
    w_out = rng.normal(0.0, scale, size=(d_prime, h))
    return EmbeddingParams(kind, w_out, w_hidden, np.zeros(h))


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _matrix_text(a: np.ndarray) -> str:
    if a.ndim == 1:
        return "[" + ", ".join(_num(v) for v in a) + "]"
    return "[" + ", ".join(_matrix_text(row) for row in a) + "]"


def params_to_json(params: EmbeddingParams) -> str:
    # numbers written by hand: json.dumps uses shortest repr, not 17 digits
    fields = [
        ("kind", json.dumps(params.kind.value)),
        ("d", str(params.d)),
        ("d_prime", str(params.d_prime)),
        ("h", "null" if params.h is None else str(params.h)),
        ("w_out", _matrix_text(params.w_out)),
        ("w_hidden", "null" if params.w_hidden is None else _matrix_text(params.w_hidden)),
        ("b_hidden", "null" if params.b_hidden is None else _matrix_text(params.b_hidden)),
    ]
    return "{\n" + ",\n".join(f'  "{k}": {v}' for k, v in fields) + "\n}\n"


def params_from_json(text: str) -> EmbeddingParams:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<document>", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("<document>", "model file must be a JSON object")
    for field in ("kind", "d", "d_prime", "h", "w_out", "w_hidden", "b_hidden"):
        if field not in doc:
            raise SchemaError(field)
    try:
        kind = Kind(doc["kind"])
    except ValueError as exc:
        raise SchemaError("kind", f"unknown kind {doc['kind']!r}") from exc

    def matrix(field, ndim):
        try:
            a = np.array(doc[field], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise SchemaError(field, f"field {field!r} is not numeric") from exc
        if a.ndim != ndim:
            raise SchemaError(field, f"field {field!r} must have {ndim} dimensions")
        return a

    w_out = matrix("w_out", 2)
    if kind is Kind.LINEAR:
        params = EmbeddingParams(kind, w_out)
    else:
        params = EmbeddingParams(kind, w_out, matrix("w_hidden", 2), matrix("b_hidden", 1))
    for field, value in (("d", params.d), ("d_prime", params.d_prime), ("h", params.h)):
        if doc[field] != value:
            raise SchemaError(field, f"field {field!r}={doc[field]!r} disagrees with weights")
    return params


def save_params(params: EmbeddingParams, path) -> None:
    Path(path).write_text(params_to_json(params), encoding="utf-8")


def load_params(path) -> EmbeddingParams:
    return params_from_json(Path(path).read_text(encoding="utf-8"))
