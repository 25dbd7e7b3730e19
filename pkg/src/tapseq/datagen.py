"""Synthetic motif-sequence datasets with disjoint meta splits.

Every class is an ordered list of motif indices. An instance is built by
dilating each motif in the class order by a random integer factor (frame
repetition), concatenating, and adding i.i.d. Gaussian noise. Two regimes:

* default: each class gets its own motif order drawn with repetition from
  the bank; orders are unique across all classes.
* order-discriminable: every class uses the identical all-distinct motif
  multiset and classes differ only in its permutation. Temporal means of
  noiseless unwarped instances are then equal across classes, so an
  order-blind (average-pooling) similarity carries no class signal.

On disk each class is one ``class_<id>.seq`` file: magic ``SEQD``, u32
version (1), u32 dim, u32 sequence count, then per sequence a u32 length and
the little-endian f32 frames, frame by frame. A ``manifest.txt`` records the
generating configuration.
"""

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CapacityError, CheckpointError, ContractError
from .sampling import RawSequence

SEQ_MAGIC = b"SEQD"
SEQ_VERSION = 1
SPLITS = ("meta_train", "meta_val", "meta_test")

# rng stream tags so per-class generation is independent and parallelizable
_MOTIF_STREAM = 0x4D4F5449
_ORDER_STREAM = 0x4F524452
_CLASS_STREAM = 0x434C5321


@dataclass
class GenConfig:
    d_raw: int = 16
    motif_count: int = 4          # size of the shared motif bank
    motif_len: int = 4
    motifs_per_class: int = 4     # r: motifs concatenated per instance
    noise_sigma: float = 0.1
    warp_min: int = 1
    warp_max: int = 3
    train_classes: int = 64
    val_classes: int = 12
    test_classes: int = 24
    instances_per_class: int = 30
    order_discriminable: bool = False
    seed: int = 0

    def validate(self):
        if self.noise_sigma < 0:
            raise ContractError("noise_sigma must be >= 0")
        if self.warp_min < 1 or self.warp_max < self.warp_min:
            raise ContractError("need 1 <= warp_min <= warp_max")
        if self.motifs_per_class > self.motif_count:
            raise ContractError(
                "motifs_per_class cannot exceed the motif bank size")
        for f in ("d_raw", "motif_count", "motif_len", "motifs_per_class",
                  "instances_per_class"):
            if getattr(self, f) < 1:
                raise ContractError(f"{f} must be >= 1")


@dataclass
class MotifBank:
    motifs: list  # (d_raw, motif_len) arrays, pairwise distinct


def build_motif_bank(config, rng):
    motifs = [rng.standard_normal((config.d_raw, config.motif_len))
              for _ in range(config.motif_count)]
    for i in range(len(motifs)):
        for j in range(i + 1, len(motifs)):
            if np.array_equal(motifs[i], motifs[j]):
                raise ContractError("motif bank drew two identical motifs")
    return MotifBank(motifs=motifs)


def _draw_unique_orders(config, rng):
    """One motif order per class, unique across every split."""
    n_total = config.train_classes + config.val_classes + config.test_classes
    r = config.motifs_per_class
    if config.order_discriminable:
        space = math.factorial(r)
        if n_total > space:
            raise CapacityError(
                f"order-discriminable regime has {space} permutations of "
                f"{r} motifs, {n_total} classes requested")
        draw = lambda: tuple(rng.permutation(r))
    else:
        space = config.motif_count ** r
        if n_total > space:
            raise CapacityError(
                f"{space} distinct motif orders available, {n_total} classes requested")
        draw = lambda: tuple(int(v) for v in rng.integers(0, config.motif_count, size=r))
    orders = []
    seen = set()
    while len(orders) < n_total:
        cand = draw()
        if cand not in seen:
            seen.add(cand)
            orders.append(list(cand))
    return orders


def synthesize_instance(bank, order, config, rng):
    """One raw sequence: per-motif integer dilation, concatenation, noise."""
    parts = []
    for m in order:
        w = int(rng.integers(config.warp_min, config.warp_max + 1))
        parts.append(np.repeat(bank.motifs[m], w, axis=1))
    frames = np.concatenate(parts, axis=1)
    if config.noise_sigma > 0:
        frames = frames + config.noise_sigma * rng.standard_normal(frames.shape)
    return frames


def generate_metaset(config):
    """Build the three class-indexed stores {class_id: [RawSequence]}.

    Class ids are global (0..total-1) across splits. Each class draws from
    its own seeded stream, so generation is order-independent per class.
    """
    config.validate()
    bank = build_motif_bank(config, np.random.default_rng([config.seed, _MOTIF_STREAM]))
    orders = _draw_unique_orders(config, np.random.default_rng([config.seed, _ORDER_STREAM]))
    counts = (config.train_classes, config.val_classes, config.test_classes)
    stores = {}
    cid = 0
    for split, count in zip(SPLITS, counts):
        store = {}
        for _ in range(count):
            rng = np.random.default_rng([config.seed, _CLASS_STREAM, cid])
            seqs = []
            for k in range(config.instances_per_class):
                frames = synthesize_instance(bank, orders[cid], config, rng)
                seqs.append(RawSequence(frames=frames, class_id=cid,
                                        instance_id=f"c{cid}_i{k}"))
            store[cid] = seqs
            cid += 1
        stores[split] = store
    return stores


# ---------------------------------------------------------------------------
# disk format
# ---------------------------------------------------------------------------

def write_class_file(path, sequences):
    d = sequences[0].frames.shape[0]
    chunks = [SEQ_MAGIC, struct.pack("<III", SEQ_VERSION, d, len(sequences))]
    for seq in sequences:
        if seq.frames.shape[0] != d:
            raise ContractError("sequences in one class file must share dim")
        length = seq.frames.shape[1]
        chunks.append(struct.pack("<I", length))
        # frame-by-frame: all dim values of frame 0, then frame 1, ...
        chunks.append(np.ascontiguousarray(seq.frames.T, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_class_file(path, class_id):
    blob = Path(path).read_bytes()
    if blob[:4] != SEQ_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a sequence file")
    version, d, count = struct.unpack_from("<III", blob, 4)
    if version != SEQ_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    pos = 16
    seqs = []
    for k in range(count):
        (length,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        n = d * length
        flat = np.frombuffer(blob, dtype="<f4", count=n, offset=pos)
        pos += 4 * n
        frames = flat.astype(np.float64).reshape(length, d).T.copy()
        seqs.append(RawSequence(frames=frames, class_id=class_id,
                                instance_id=f"c{class_id}_i{k}"))
    if pos != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - pos} trailing bytes")
    return seqs


def write_metaset(root, stores, manifest_lines):
    root = Path(root)
    for split in SPLITS:
        d = root / split
        d.mkdir(parents=True, exist_ok=True)
        for cid in sorted(stores[split]):
            write_class_file(d / f"class_{cid}.seq", stores[split][cid])
    (root / "manifest.txt").write_text("".join(line + "\n" for line in manifest_lines))


def load_metaset(root):
    """Read the three splits back; classes must be disjoint across splits."""
    root = Path(root)
    stores = {}
    seen = {}
    for split in SPLITS:
        d = root / split
        if not d.is_dir():
            raise FileNotFoundError(f"missing split directory {d}")
        store = {}
        for path in sorted(d.glob("class_*.seq")):
            cid = int(path.stem.split("_", 1)[1])
            if cid in seen:
                raise ContractError(
                    f"class {cid} appears in both {seen[cid]} and {split}")
            seen[cid] = split
            store[cid] = read_class_file(path, cid)
        if not store:
            raise FileNotFoundError(f"no class files under {d}")
        stores[split] = store
    return stores
