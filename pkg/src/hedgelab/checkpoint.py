"""Binary agent checkpoints.

Layout, all integers little-endian::

    8 bytes   magic  b"HLAGENT\\0"
    uint32    format version
    uint32    header length in bytes (n)
    n bytes   UTF-8 JSON header
    ...       parameter arrays as little-endian float64, C order, in the
              order listed by ``header["arrays"]``

The header records the format version, observation/action dimensions,
action bounds, layer sizes, hyperparameters, seed, and the experiment
config as flat ``key -> value`` strings.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .sac.agent import SacAgent, SacHyper

MAGIC = b"HLAGENT\0"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")


def save_checkpoint(path: str | Path, agent: SacAgent, config: dict[str, str] | None = None) -> None:
    arrays = agent.named_arrays()
    header = {
        "format_version": FORMAT_VERSION,
        "obs_dim": agent.obs_dim,
        "act_dim": agent.act_dim,
        "action_low": agent.box.low.tolist(),
        "action_high": agent.box.high.tolist(),
        "layers": {"policy": list(agent.policy.sizes), "q": list(agent.q1.sizes)},
        "hyper": agent.hyper.to_dict(),
        "seed": agent.seed,
        "config": dict(config or {}),
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Header and arrays by name."""
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise DataError(f"{path}: truncated checkpoint")
    magic, version, n = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    offset = _PREFIX.size
    try:
        header = json.loads(data[offset:offset + n])
    except ValueError as err:
        raise DataError(f"{path}: corrupt header ({err})") from err
    offset += n
    arrays = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(data):
            raise DataError(f"{path}: truncated array {spec['name']}")
        arrays[spec["name"]] = np.frombuffer(data[offset:end], dtype="<f8").reshape(shape).astype(float)
        offset = end
    if offset != len(data):
        raise DataError(f"{path}: {len(data) - offset} trailing bytes")
    return header, arrays


def load_checkpoint(path: str | Path) -> tuple[SacAgent, dict]:
    header, arrays = read_checkpoint(path)
    hyper = dict(header["hyper"])
    hyper["hidden"] = tuple(hyper["hidden"])
    agent = SacAgent(header["obs_dim"], header["action_low"], header["action_high"],
                     SacHyper(**hyper), header["seed"])
    for name, target in agent.named_arrays():
        if name not in arrays or arrays[name].shape != target.shape:
            raise DataError(f"{path}: array {name} missing or mis-shaped")
        target[...] = arrays[name]
    return agent, header
