"""Named parameter store and its binary checkpoint format.

Parameters are float64 in memory and float32 on disk. The file layout is:
magic ``TAPC``, u32 version (1), u32 tensor count, then per tensor a u16
name length, the UTF-8 name, a u8 rank, rank u32 extents and the row-major
little-endian f32 payload. Saving a just-loaded store reproduces the file
byte for byte.
"""

import struct
from collections import OrderedDict

import numpy as np

from .autograd import Tensor
from .errors import CheckpointError, ContractError

MAGIC = b"TAPC"
VERSION = 1


class ParamStore:
    """Ordered name -> Tensor registry for the trainable parameters.

    Names are dotted, with the leading segment as the namespace: the frame
    encoder lives under ``theta``, the sequence context encoder under
    ``alpha`` and the alignment head under ``beta``.
    """

    def __init__(self):
        self._tensors = OrderedDict()
        self._frozen = set()

    def register(self, name, data, frozen=False):
        if name in self._tensors:
            raise ContractError(f"parameter {name!r} registered twice")
        t = Tensor(np.array(data, dtype=np.float64), requires_grad=not frozen,
                   name=name)
        self._tensors[name] = t
        if frozen:
            self._frozen.add(name)
        return t

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __len__(self):
        return len(self._tensors)

    def names(self):
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def tensors(self):
        return list(self._tensors.values())

    def is_frozen(self, name):
        return name in self._frozen

    def trainable_items(self):
        return [(n, t) for n, t in self._tensors.items() if n not in self._frozen]

    def namespace_items(self, *prefixes):
        out = []
        for n, t in self._tensors.items():
            if any(n == p or n.startswith(p + ".") for p in prefixes):
                out.append((n, t))
        return out

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def clone_data(self):
        """Snapshot of raw values, detached from any graph."""
        return OrderedDict((n, t.data.copy()) for n, t in self._tensors.items())

    def load_data(self, state):
        """Overwrite values from a name -> array mapping; shapes must match."""
        for name, t in self._tensors.items():
            if name not in state:
                raise CheckpointError(f"checkpoint missing tensor {name!r}")
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise CheckpointError(
                    f"tensor {name!r}: checkpoint shape {arr.shape} != model shape {t.data.shape}")
            t.data = arr.copy()
        extra = set(state) - set(self._tensors)
        if extra:
            raise CheckpointError(f"checkpoint has unknown tensor {sorted(extra)[0]!r}")


def serialize(state):
    """Encode a name -> array mapping into checkpoint bytes (f32 payload)."""
    chunks = [MAGIC, struct.pack("<II", VERSION, len(state))]
    for name, arr in state.items():
        raw = name.encode("utf-8")
        a = np.asarray(arr)
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", a.ndim))
        chunks.append(struct.pack(f"<{a.ndim}I", *a.shape))
        chunks.append(np.ascontiguousarray(a, dtype="<f4").tobytes())
    return b"".join(chunks)


def deserialize(blob):
    """Decode checkpoint bytes into an ordered name -> float64 array map."""
    if blob[:4] != MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 12
    state = OrderedDict()
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        shape = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        n = int(np.prod(shape)) if rank else 1
        flat = np.frombuffer(blob, dtype="<f4", count=n, offset=pos)
        pos += 4 * n
        state[name] = flat.astype(np.float64).reshape(shape)
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after last tensor")
    return state


def save_checkpoint(path, state):
    with open(path, "wb") as fh:
        fh.write(serialize(state))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())
