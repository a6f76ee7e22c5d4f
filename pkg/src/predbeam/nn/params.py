"""Trainable parameter collections, Adam, plain-text checkpoints and a finite-difference oracle."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterator, Mapping, Union

import numpy as np

from .engine import Node, var

__all__ = [
    "ParamEntry", "ParameterSet", "AdamConfig", "adam_step",
    "save_params", "load_params", "dumps_params", "loads_params",
    "finite_diff_gradient",
]

CHECKPOINT_MAGIC = "# predbeam-params v1"


@dataclass
class ParamEntry:
    name: str
    values: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray

    @property
    def shape(self):
        return self.values.shape


class ParameterSet:
    """Ordered, uniquely named float64 arrays plus Adam moment state."""

    def __init__(self):
        self._entries: Dict[str, ParamEntry] = {}
        self.step_count = 0

    def add(self, name: str, values) -> None:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        if any(c.isspace() for c in name):
            raise ValueError(f"parameter name {name!r} contains whitespace")
        v = np.array(values, dtype=np.float64, copy=True)
        self._entries[name] = ParamEntry(name, v, np.zeros_like(v), np.zeros_like(v))

    def __getitem__(self, name: str) -> np.ndarray:
        return self._entries[name].values

    def __contains__(self, name) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self):
        return list(self._entries.values())

    def entry(self, name: str) -> ParamEntry:
        return self._entries[name]

    def names(self):
        return list(self._entries)

    def shapes(self) -> Dict[str, tuple]:
        return {n: e.shape for n, e in self._entries.items()}

    def count(self) -> int:
        return int(sum(e.values.size for e in self._entries.values()))

    def set_values(self, name: str, values) -> None:
        e = self._entries[name]
        v = np.asarray(values, dtype=np.float64)
        if v.shape != e.shape:
            raise ValueError(f"{name}: shape {v.shape} does not match {e.shape}")
        e.values[...] = v

    def leaves(self) -> Dict[str, Node]:
        """Fresh differentiable graph leaves holding copies of every parameter."""
        return {n: var(e.values.copy()) for n, e in self._entries.items()}

    def copy(self) -> "ParameterSet":
        out = ParameterSet()
        for n, e in self._entries.items():
            out.add(n, e.values)
            out._entries[n].adam_m[...] = e.adam_m
            out._entries[n].adam_v[...] = e.adam_v
        out.step_count = self.step_count
        return out

    def equals(self, other: "ParameterSet") -> bool:
        return (self.names() == other.names()
                and all(np.array_equal(self[n], other[n]) for n in self))


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: ParameterSet, grads: Mapping[str, np.ndarray], lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> ParameterSet:
    """Bias-corrected Adam update, in place; returns ``params`` for chaining."""
    for name, g in grads.items():
        if name not in params:
            raise ValueError(f"gradient for unknown parameter {name!r}")
        if np.shape(g) != params.entry(name).shape:
            raise ValueError(f"{name}: gradient shape {np.shape(g)} != {params.entry(name).shape}")
    params.step_count += 1
    t = params.step_count
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, g in grads.items():
        e = params.entry(name)
        e.adam_m[...] = beta1 * e.adam_m + (1.0 - beta1) * g
        e.adam_v[...] = beta2 * e.adam_v + (1.0 - beta2) * g * g
        e.values -= lr * (e.adam_m / c1) / (np.sqrt(e.adam_v / c2) + eps)
    return params


def dumps_params(params: ParameterSet) -> str:
    lines = [f"{CHECKPOINT_MAGIC} step={params.step_count}"]
    for e in params.entries():
        lines.append(" ".join([e.name] + [str(s) for s in e.shape]))
        lines.append(" ".join(repr(float(x)) for x in e.values.ravel()))
    return "\n".join(lines) + "\n"


def loads_params(text: str) -> ParameterSet:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(CHECKPOINT_MAGIC):
        raise ValueError("not a predbeam parameter checkpoint")
    params = ParameterSet()
    for tok in lines[0].split()[3:]:
        if tok.startswith("step="):
            params.step_count = int(tok[5:])
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) % 2:
        raise ValueError("truncated checkpoint")
    for header, values in zip(body[::2], body[1::2]):
        name, *dims = header.split()
        shape = tuple(int(d) for d in dims)
        flat = np.array([float(v) for v in values.split()], dtype=np.float64)
        if flat.size != int(np.prod(shape)):
            raise ValueError(f"{name}: {flat.size} values for shape {shape}")
        params.add(name, flat.reshape(shape))
    return params


def save_params(params: ParameterSet, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_params(params))


def load_params(path: Union[str, Path]) -> ParameterSet:
    return loads_params(Path(path).read_text())


def finite_diff_gradient(f: Callable[[ParameterSet], float], params: ParameterSet,
                         step: float = 1e-6) -> Dict[str, np.ndarray]:
    """Central-difference gradient of a scalar function, coordinate by coordinate."""
    work = params.copy()
    out = {}
    for name in work:
        vals = work[name]
        g = np.zeros_like(vals)
        for idx in np.ndindex(vals.shape):
            orig = vals[idx]
            vals[idx] = orig + step
            fp = f(work)
            vals[idx] = orig - step
            fm = f(work)
            vals[idx] = orig
            g[idx] = (fp - fm) / (2.0 * step)
        out[name] = g
    return out
