"""Plain gradient descent and Adam over a model's parameter mapping."""

from __future__ import annotations

import math
from typing import Any, Dict, Mapping, Optional

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.errors import ConfigError

ParamMap = Dict[str, NDArray[Any]]


class Optimizer:
    """Updates are staged: ``update`` leaves optimizer state as is until ``commit``."""

    kind = ""

    def __init__(self) -> None:
        self.step_count = 0
        self._staged: Optional[Dict[str, NDArray[np.float32]]] = None

    def update(
        self, params: Mapping[str, NDArray[Any]], grads: Mapping[str, NDArray[Any]], lr: float
    ) -> ParamMap:
        """Return a fresh parameter mapping; ``params`` is left untouched."""

        raise NotImplementedError

    def commit(self) -> None:
        """Adopt the state of the last ``update``."""

        if self._staged is None:
            raise ConfigError("no staged optimizer update to commit")
        self._apply(self._staged)
        self._staged = None
        self.step_count += 1

    def discard(self) -> None:
        self._staged = None

    def _apply(self, staged: Mapping[str, NDArray[np.float32]]) -> None:
        pass

    def state_arrays(self) -> Dict[str, NDArray[np.float32]]:
        return {}

    def load_state(self, step_count: int, arrays: Mapping[str, NDArray[np.float32]]) -> None:
        self.step_count = int(step_count)


class SGD(Optimizer):
    kind = "sgd"

    def update(
        self, params: Mapping[str, NDArray[Any]], grads: Mapping[str, NDArray[Any]], lr: float
    ) -> ParamMap:
        self._staged = {}
        return {
            key: (value.astype(np.float64) - lr * grads[key]).astype(value.dtype)
            for key, value in params.items()
        }


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        super().__init__()
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.first: Dict[str, NDArray[np.float32]] = {}
        self.second: Dict[str, NDArray[np.float32]] = {}

    def update(
        self, params: Mapping[str, NDArray[Any]], grads: Mapping[str, NDArray[Any]], lr: float
    ) -> ParamMap:
        count = self.step_count + 1
        correction1 = 1.0 - self.beta1**count
        correction2 = 1.0 - self.beta2**count
        staged: Dict[str, NDArray[np.float32]] = {}
        updated: ParamMap = {}
        for key, value in params.items():
            grad = np.asarray(grads[key], dtype=np.float64)
            m_prev = self.first.get(key, np.zeros(value.shape, dtype=np.float32))
            v_prev = self.second.get(key, np.zeros(value.shape, dtype=np.float32))
            m = (self.beta1 * m_prev + (1.0 - self.beta1) * grad).astype(np.float32)
            v = (self.beta2 * v_prev + (1.0 - self.beta2) * grad * grad).astype(np.float32)
            staged[f"m:{key}"] = m
            staged[f"v:{key}"] = v
            m_hat = m.astype(np.float64) / correction1
            v_hat = v.astype(np.float64) / correction2
            step = lr * m_hat / (np.sqrt(v_hat) + self.eps)
            updated[key] = (value.astype(np.float64) - step).astype(value.dtype)
        self._staged = staged
        return updated

    def _apply(self, staged: Mapping[str, NDArray[np.float32]]) -> None:
        for name, array in staged.items():
            target = self.first if name[:2] == "m:" else self.second
            target[name[2:]] = array

    def state_arrays(self) -> Dict[str, NDArray[np.float32]]:
        arrays: Dict[str, NDArray[np.float32]] = {}
        for key in self.first:
            arrays[f"m:{key}"] = self.first[key]
            arrays[f"v:{key}"] = self.second[key]
        return arrays

    def load_state(self, step_count: int, arrays: Mapping[str, NDArray[np.float32]]) -> None:
        super().load_state(step_count, arrays)
        self.first = {k[2:]: np.asarray(v, np.float32) for k, v in arrays.items() if k[:2] == "m:"}
        self.second = {k[2:]: np.asarray(v, np.float32) for k, v in arrays.items() if k[:2] == "v:"}


OPTIMIZERS = {"sgd": SGD, "adam": Adam}


def build_optimizer(name: str) -> Optimizer:
    try:
        return OPTIMIZERS[name]()
    except KeyError as exc:
        raise ConfigError(
            f"unknown optimizer {name!r}; choose from {', '.join(sorted(OPTIMIZERS))}"
        ) from exc


def is_finite_mapping(params: Mapping[str, NDArray[Any]]) -> bool:
    return all(bool(np.all(np.isfinite(value))) for value in params.values())


def gradient_norm(grads: Mapping[str, NDArray[Any]]) -> float:
    return math.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values()))
