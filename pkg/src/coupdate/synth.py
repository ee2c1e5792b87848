"""Seeded multi-modal dataset generator with subject structure.

Per channel, each class gets a Gaussian prototype; every subject adds a
personal style offset per class (how that subject performs that activity,
fixed across their repetitions) and every sequence adds fresh noise.  The
style offsets are what make unseen subjects hard: a model fitted on few
subjects inherits their styles, and widening the subject pool genuinely
improves generalization.  Class pairs listed as confusable in a channel
have their prototypes pulled together in that channel only, so channels
can be made complementary: what one channel muddles, another separates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .types import MultiModalSequence


@dataclass(frozen=True)
class ChannelSpec:
    dim: int = 16
    confusable_pairs: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class StreamConfig:
    n_classes: int = 14
    n_subjects: int = 20
    repetitions: int = 2
    channels: dict[str, ChannelSpec] = field(
        default_factory=lambda: {"rgb": ChannelSpec(), "skeleton": ChannelSpec()}
    )
    class_separation: float = 3.0
    subject_offset_scale: float = 1.0
    noise_scale: float = 0.5
    confusable_scale: float = 0.15
    prototype_layout: str = "gaussian"  # or "orthogonal": equal pair distances
    style_in_fraction: float = 1.0  # orthogonal layout: style share inside the class span
    seed: int = 0

    def validate(self) -> None:
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.n_subjects < 1 or self.repetitions < 1:
            raise ValueError("need at least 1 subject and 1 repetition")
        if not self.channels:
            raise ValueError("need at least one channel")
        for scale in (self.class_separation, self.noise_scale):
            if scale <= 0.0:
                raise ValueError("class_separation and noise_scale must be positive")
        if self.subject_offset_scale < 0.0 or not 0.0 <= self.confusable_scale <= 1.0:
            raise ValueError("bad subject_offset_scale or confusable_scale")
        if self.prototype_layout not in ("gaussian", "orthogonal"):
            raise ValueError("prototype_layout must be 'gaussian' or 'orthogonal'")
        if not 0.0 <= self.style_in_fraction <= 1.0:
            raise ValueError("style_in_fraction must lie in [0, 1]")
        for name, spec in self.channels.items():
            if spec.dim < 1:
                raise ValueError(f"channel {name!r} needs dim >= 1")
            if self.prototype_layout == "orthogonal" and spec.dim < self.n_classes:
                raise ValueError(
                    f"orthogonal layout needs dim >= n_classes in channel {name!r}"
                )
            for i, j in spec.confusable_pairs:
                if not (0 <= i < self.n_classes and 0 <= j < self.n_classes) or i == j:
                    raise ValueError(f"bad confusable pair ({i}, {j}) in channel {name!r}")


def generate(config: StreamConfig) -> list[MultiModalSequence]:
    """Deterministic dataset of n_subjects * n_classes * repetitions clips.

    Draw order is fixed (prototypes per channel, then subject offsets,
    then per-sequence noise), so equal seeds give equal datasets.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    names = sorted(config.channels)

    prototypes: dict[str, np.ndarray] = {}
    bases: dict[str, np.ndarray | None] = {}
    for name in names:
        spec = config.channels[name]
        if config.prototype_layout == "orthogonal":
            # random rotation of scaled axes: every pair equally far apart
            base = np.zeros((config.n_classes, spec.dim))
            base[np.arange(config.n_classes), np.arange(config.n_classes)] = config.class_separation
            q, _ = np.linalg.qr(rng.normal(size=(spec.dim, spec.dim)))
            base = base @ q.T
            bases[name] = q
        else:
            base = rng.normal(size=(config.n_classes, spec.dim))
            base *= config.class_separation / np.sqrt(spec.dim)
            bases[name] = None
        for i, j in spec.confusable_pairs:
            base[j] = base[i] + config.confusable_scale * (base[j] - base[i])
        prototypes[name] = base

    def draw_style(name: str) -> np.ndarray:
        spec = config.channels[name]
        style = rng.normal(size=(config.n_classes, spec.dim)) * config.subject_offset_scale
        q = bases[name]
        if q is not None and config.style_in_fraction < 1.0:
            # damp the style share that lives inside the class span, so
            # personal variation mostly drifts into class-neutral directions
            style[:, : config.n_classes] *= config.style_in_fraction
            style = style @ q.T
        return style

    styles = [{name: draw_style(name) for name in names} for _ in range(config.n_subjects)]

    sequences = []
    for subject in range(config.n_subjects):
        subject_id = f"subj{subject:02d}"
        for cls in range(config.n_classes):
            for rep in range(config.repetitions):
                channels = {
                    name: prototypes[name][cls]
                    + styles[subject][name][cls]
                    + rng.normal(size=config.channels[name].dim) * config.noise_scale
                    for name in names
                }
                sequences.append(
                    MultiModalSequence(
                        sequence_id=f"{subject_id}-c{cls:02d}-r{rep}",
                        subject_id=subject_id,
                        channels=channels,
                        true_label=cls,
                    )
                )
    return sequences
