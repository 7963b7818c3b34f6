"""
Named parameter storage with deterministic initialization and checkpoint IO.

Checkpoint layout: an ASCII header (magic line, parameter count, one
"name d1,d2,..." line per parameter, END) followed by the values as
little-endian float64 in declaration order.
"""

from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import structlog

from app.errors import DataError, SpecError
from app.nn.layers import counter_rng
from app.nn.tensor import Tensor

logger = structlog.get_logger()

CHECKPOINT_MAGIC = "IVPARAMS 1"


def _fans(shape: Tuple[int, ...]) -> Tuple[int, int]:
    if len(shape) == 1:
        return shape[0], shape[0]
    if len(shape) == 2:
        return shape[0], shape[1]
    if len(shape) == 3:
        # depthwise kernel (kh, kw, C)
        receptive = shape[0] * shape[1]
        return receptive, receptive
    receptive = int(np.prod(shape[:-2]))
    return receptive * shape[-2], receptive * shape[-1]


class ParamStore:
    """Ordered map from parameter path to trainable Tensor"""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._params: Dict[str, Tensor] = {}

    # ------------------------------------------------------------------
    # Registration
    # ------------------------------------------------------------------

    def add(self, name: str, shape: Tuple[int, ...], init: str = "glorot") -> Tensor:
        """
        Register a parameter.

        init: glorot (dense/attention), he (conv), zeros (biases), ones (norm gains).
        The draw depends only on (seed, name), so declaration order never
        changes initial values.
        """
        if name in self._params:
            raise SpecError(f"Duplicate parameter name '{name}'")
        shape = tuple(int(d) for d in shape)
        if init == "zeros":
            values = np.zeros(shape)
        elif init == "ones":
            values = np.ones(shape)
        else:
            fan_in, fan_out = _fans(shape)
            if init == "glorot":
                limit = np.sqrt(6.0 / (fan_in + fan_out))
            elif init == "he":
                limit = np.sqrt(6.0 / fan_in)
            else:
                raise SpecError(f"Unknown initializer '{init}'")
            values = counter_rng(self.seed, name).uniform(-limit, limit, size=shape)
        param = Tensor(values, requires_grad=True)
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> List[Tuple[str, Tensor]]:
        return list(self._params.items())

    def names(self) -> List[str]:
        return list(self._params)

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self._params.values()))

    def zero_grad(self):
        for param in self._params.values():
            param.grad = None

    # ------------------------------------------------------------------
    # Snapshots
    # ------------------------------------------------------------------

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def restore(self, snapshot: Dict[str, np.ndarray]):
        for name, values in snapshot.items():
            self._params[name].data = values.copy()

    def set_all(self, value: float, prefix: Optional[str] = None):
        """Fill parameters (optionally those under `prefix`) with a constant"""
        for name, param in self._params.items():
            if prefix is None or name.startswith(prefix):
                param.data = np.full(param.shape, float(value))

    # ------------------------------------------------------------------
    # Checkpoints
    # ------------------------------------------------------------------

    def save(self, path: str):
        header = [CHECKPOINT_MAGIC, str(len(self._params))]
        for name, param in self._params.items():
            header.append(f"{name} {','.join(str(d) for d in param.shape)}")
        header.append("END")
        body = b"".join(
            np.ascontiguousarray(p.data, dtype="<f8").tobytes() for p in self._params.values()
        )
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as handle:
            handle.write(("\n".join(header) + "\n").encode("ascii"))
            handle.write(body)
        logger.debug("checkpoint_saved", path=str(path), parameters=len(self._params))

    def load(self, path: str):
        """Overwrite registered parameters from a checkpoint; names and shapes must match"""
        with open(path, "rb") as handle:
            raw = handle.read()
        lines: List[str] = []
        cursor = 0
        while True:
            end = raw.index(b"\n", cursor)
            line = raw[cursor:end].decode("ascii")
            cursor = end + 1
            if line == "END":
                break
            lines.append(line)
        if not lines or lines[0] != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: not a parameter checkpoint")
        count = int(lines[1])
        entries = lines[2:]
        if count != len(entries):
            raise DataError(f"{path}: header lists {len(entries)} parameters, expected {count}")

        offset = cursor
        for entry in entries:
            name, dims = entry.rsplit(" ", 1)
            shape = tuple(int(d) for d in dims.split(",")) if dims else ()
            size = int(np.prod(shape)) if shape else 1
            values = np.frombuffer(raw, dtype="<f8", count=size, offset=offset).reshape(shape)
            offset += size * 8
            if name not in self._params:
                raise DataError(f"{path}: unknown parameter '{name}'")
            if self._params[name].shape != shape:
                raise DataError(
                    f"{path}: shape of '{name}' is {shape}, model expects {self._params[name].shape}"
                )
            self._params[name].data = values.astype(np.float64)
        logger.debug("checkpoint_loaded", path=str(path), parameters=len(entries))
