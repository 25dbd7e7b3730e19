"""Flat ``key = value`` run configuration.

One namespace covers model shapes, optimizer protocol, episode layout,
dataset generation and the seed. Unknown keys are rejected and every value
is validated at parse time; ``#`` starts a comment. The effective
configuration (defaults plus file plus flag overrides) is echoed into the
free-form output artifacts so runs are reconstructible.
"""

from dataclasses import dataclass, fields

from .errors import ConfigError


def _int_list(text):
    return tuple(int(p) for p in str(text).replace(",", " ").split())


def _bool(text):
    s = str(text).strip().lower()
    if s in ("true", "1", "yes"):
        return True
    if s in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    # model shapes
    frames: int = 6                 # T, frames sampled per sequence
    d_raw: int = 16
    enc_widths: tuple = (64,)
    d_f: int = 32
    lstm_hidden: int = 32
    head_widths: tuple = (64, 32, 8, 1)
    similarity: str = "tap"         # tap | avgpool
    freeze_encoder: bool = False
    # optimizer protocol
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0001
    clip_norm: float = 40.0
    episodes_per_epoch: int = 200
    decay_every: int = 10           # epochs between lr x decay_factor
    decay_factor: float = 0.1
    # episode layout
    n_way: int = 5
    k_shot: int = 1
    q_per_class: int = 1
    train_episodes: int = 3000
    val_every: int = 200
    val_episodes: int = 200
    eval_episodes: int = 10000
    # dataset generation
    motif_count: int = 4
    motif_len: int = 4
    motifs_per_class: int = 4
    noise_sigma: float = 0.1
    warp_min: int = 1
    warp_max: int = 3
    train_classes: int = 64
    val_classes: int = 12
    test_classes: int = 24
    instances_per_class: int = 30
    order_discriminable: bool = False
    # run
    seed: int = 0
    threads: int = 1

    def validate(self):
        positive = ("frames", "d_raw", "d_f", "lstm_hidden", "n_way", "k_shot",
                    "q_per_class", "episodes_per_epoch", "decay_every",
                    "motif_count", "motif_len", "motifs_per_class", "warp_min",
                    "train_classes", "val_classes", "test_classes",
                    "instances_per_class", "threads")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        nonneg = ("weight_decay", "noise_sigma", "train_episodes", "val_every",
                  "val_episodes", "seed")
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("lr", "clip_norm", "decay_factor"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.similarity not in ("tap", "avgpool"):
            raise ConfigError(f"similarity must be 'tap' or 'avgpool', got {self.similarity!r}")
        if self.warp_max < self.warp_min:
            raise ConfigError(
                f"warp_max ({self.warp_max}) must be >= warp_min ({self.warp_min})")
        if self.motifs_per_class > self.motif_count:
            raise ConfigError("motifs_per_class cannot exceed motif_count")
        if not self.head_widths or self.head_widths[-1] != 1:
            raise ConfigError(f"head_widths must end in 1, got {self.head_widths}")
        if not self.enc_widths:
            raise ConfigError("enc_widths must name at least one hidden width")
        return self


_PARSERS = {}
for f in fields(RunConfig):
    if f.type == "tuple" or isinstance(f.default, tuple):
        _PARSERS[f.name] = _int_list
    elif isinstance(f.default, bool):
        _PARSERS[f.name] = _bool
    elif isinstance(f.default, int):
        _PARSERS[f.name] = int
    elif isinstance(f.default, float):
        _PARSERS[f.name] = float
    else:
        _PARSERS[f.name] = str


def parse_config_text(text, base=None):
    cfg = base if base is not None else RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, _PARSERS[key](value))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return cfg


def load_config(path, base=None):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)


def config_lines(cfg):
    """The effective configuration as 'key = value' lines."""
    out = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        out.append(f"{f.name} = {v}")
    return out


def model_config(cfg):
    from .model import ModelConfig

    return ModelConfig(d_raw=cfg.d_raw, enc_widths=cfg.enc_widths, d_f=cfg.d_f,
                       lstm_hidden=cfg.lstm_hidden, head_widths=cfg.head_widths,
                       frames=cfg.frames, similarity=cfg.similarity,
                       freeze_encoder=cfg.freeze_encoder)


def gen_config(cfg):
    from .datagen import GenConfig

    return GenConfig(d_raw=cfg.d_raw, motif_count=cfg.motif_count,
                     motif_len=cfg.motif_len, motifs_per_class=cfg.motifs_per_class,
                     noise_sigma=cfg.noise_sigma, warp_min=cfg.warp_min,
                     warp_max=cfg.warp_max, train_classes=cfg.train_classes,
                     val_classes=cfg.val_classes, test_classes=cfg.test_classes,
                     instances_per_class=cfg.instances_per_class,
                     order_discriminable=cfg.order_discriminable, seed=cfg.seed)


def train_config(cfg):
    from .episodes import TrainConfig

    return TrainConfig(episodes=cfg.train_episodes, n_way=cfg.n_way,
                       k_shot=cfg.k_shot, q_per_class=cfg.q_per_class,
                       learning_rate=cfg.lr, momentum=cfg.momentum,
                       weight_decay=cfg.weight_decay, clip_norm=cfg.clip_norm,
                       episodes_per_epoch=cfg.episodes_per_epoch,
                       decay_every=cfg.decay_every, decay_factor=cfg.decay_factor,
                       val_every=cfg.val_every, val_episodes=cfg.val_episodes,
                       seed=cfg.seed)
