"""Joint-angle posture features from 3D skeletons.

A skeleton is d joints, each with a 3D position and (for a subset) a 3D
unit orientation vector.  Three angle families describe a posture:

* orientation vs orientation of two joints,
* orientation of a joint vs the bone segment leaving it,
* bone segment vs bone segment meeting at a shared joint.

A frame vector is the ordered concatenation of the configured angles
(8 + 16 + 4 = 28 under the default selection).  Angles depend only on
relative geometry, so frame vectors are invariant to rigid rotation and
translation of the whole skeleton and to uniform scaling of positions.
Whole sequences of frame vectors are summarized as posture-codebook
histograms via :mod:`coupdate.bow`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import bow

ORIENTATION_NORM_ATOL = 1e-6


@dataclass(frozen=True, eq=False)
class Joint:
    """3D position (meters) plus an optional unit orientation vector."""

    position: np.ndarray
    orientation: np.ndarray | None = None


class Skeleton:
    """Fixed-order joint list backed by (d, 3) arrays.

    ``orientations`` rows are NaN for joints that carry no orientation
    (e.g. 19 of 25 joints have one in common capture setups).
    """

    def __init__(self, positions, orientations=None):
        self.positions = np.asarray(positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must be a (d, 3) array")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        d = self.positions.shape[0]
        if orientations is None:
            self.orientations = np.full((d, 3), np.nan)
        else:
            self.orientations = np.asarray(orientations, dtype=np.float64)
            if self.orientations.shape != (d, 3):
                raise ValueError("orientations must be a (d, 3) array (NaN rows allowed)")
            present = ~np.isnan(self.orientations).any(axis=1)
            norms = np.linalg.norm(self.orientations[present], axis=1)
            if not np.all(np.abs(norms - 1.0) <= ORIENTATION_NORM_ATOL):
                raise ValueError("orientations must be unit vectors")

    @classmethod
    def from_joints(cls, joints) -> "Skeleton":
        positions = [j.position for j in joints]
        orientations = [
            j.orientation if j.orientation is not None else np.full(3, np.nan) for j in joints
        ]
        return cls(positions, orientations)

    @property
    def n_joints(self) -> int:
        return self.positions.shape[0]

    def has_orientation(self, i: int) -> bool:
        return not np.isnan(self.orientations[i]).any()

    def orientation(self, i: int) -> np.ndarray:
        if not self.has_orientation(i):
            raise ValueError(f"joint {i} has no orientation")
        return self.orientations[i]

    def joint(self, i: int) -> Joint:
        orientation = self.orientations[i] if self.has_orientation(i) else None
        return Joint(position=self.positions[i], orientation=orientation)


@dataclass(frozen=True)
class AngleConfig:
    """Which joint pairs/triplets feed each angle family, in output order."""

    theta_pairs: tuple[tuple[int, int], ...]
    phi_pairs: tuple[tuple[int, int], ...]
    alpha_triplets: tuple[tuple[int, int, int], ...]

    @property
    def size(self) -> int:
        return len(self.theta_pairs) + len(self.phi_pairs) + len(self.alpha_triplets)

    def validate(self, n_joints: int) -> None:
        for group in (self.theta_pairs, self.phi_pairs, self.alpha_triplets):
            for indices in group:
                for i in indices:
                    if not 0 <= i < n_joints:
                        raise ValueError(f"joint index {i} outside [0, {n_joints})")

    @classmethod
    def from_dict(cls, payload: dict) -> "AngleConfig":
        return cls(
            theta_pairs=tuple((int(a), int(b)) for a, b in payload["theta_pairs"]),
            phi_pairs=tuple((int(a), int(b)) for a, b in payload["phi_pairs"]),
            alpha_triplets=tuple((int(b), int(a), int(c)) for b, a, c in payload["alpha_triplets"]),
        )

    @classmethod
    def load(cls, path) -> "AngleConfig":
        with Path(path).open("r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        payload = {
            "theta_pairs": [list(p) for p in self.theta_pairs],
            "phi_pairs": [list(p) for p in self.phi_pairs],
            "alpha_triplets": [list(t) for t in self.alpha_triplets],
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")


def default_angle_config() -> AngleConfig:
    """The packaged upper-body selection (8 theta, 16 phi, 4 alpha)."""
    payload = json.loads(
        resources.files("coupdate").joinpath("data/default_angles.json").read_text("utf-8")
    )
    return AngleConfig.from_dict(payload)


def angle_between(u, v) -> float:
    """Angle in [0, pi] between two non-zero 3D vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cannot take the angle of a zero-length vector")
    cosine = float(np.dot(u, v)) / (nu * nv)
    return float(np.arccos(np.clip(cosine, -1.0, 1.0)))


def theta_angle(skeleton: Skeleton, pair) -> float:
    """Angle between the orientation vectors of two joints."""
    a, b = pair
    return angle_between(skeleton.orientation(a), skeleton.orientation(b))


def phi_angle(skeleton: Skeleton, pair) -> float:
    """Angle between joint a's orientation and the bone from a to b."""
    a, b = pair
    bone = skeleton.positions[b] - skeleton.positions[a]
    if not bone.any():
        raise ValueError(f"joints {a} and {b} coincide")
    return angle_between(skeleton.orientation(a), bone)


def alpha_angle(skeleton: Skeleton, triplet) -> float:
    """Angle at joint a between the bones toward joints b and c."""
    b, a, c = triplet
    bone_ab = skeleton.positions[b] - skeleton.positions[a]
    bone_ac = skeleton.positions[c] - skeleton.positions[a]
    if not bone_ab.any() or not bone_ac.any():
        raise ValueError(f"triplet ({b}, {a}, {c}) has coincident joints")
    return angle_between(bone_ab, bone_ac)


def frame_vector(skeleton: Skeleton, config: AngleConfig | None = None) -> np.ndarray:
    """Ordered concatenation of all configured theta, phi and alpha angles."""
    if config is None:
        config = default_angle_config()
    config.validate(skeleton.n_joints)
    values = [theta_angle(skeleton, p) for p in config.theta_pairs]
    values += [phi_angle(skeleton, p) for p in config.phi_pairs]
    values += [alpha_angle(skeleton, t) for t in config.alpha_triplets]
    return np.asarray(values, dtype=np.float64)


def frame_vectors(skeletons, config: AngleConfig | None = None) -> np.ndarray:
    if config is None:
        config = default_angle_config()
    return np.stack([frame_vector(sk, config) for sk in skeletons])


def encode_skeleton_sequence(frames, codebook: bow.Codebook) -> np.ndarray:
    """Posture-histogram encoding of a sequence of frame vectors."""
    return bow.encode(frames, codebook)


def quaternion_to_direction(quaternion, reference=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Rotate a reference axis by a (w, x, y, z) quaternion.

    Converts quaternion joint orientations to the unit direction vectors
    the angle features expect.  The quaternion is normalized first.
    """
    q = np.asarray(quaternion, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError("quaternion must be (w, x, y, z)")
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise ValueError("zero quaternion")
    w, qv = q[0] / norm, q[1:] / norm
    v = np.asarray(reference, dtype=np.float64)
    rotated = v + 2.0 * np.cross(qv, np.cross(qv, v) + w * v)
    return rotated / np.linalg.norm(rotated)


def save_skeleton_frames(skeletons, path) -> None:
    """One JSON record per frame: joint positions plus nullable orientations."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for sk in skeletons:
            record = {
                "positions": sk.positions.tolist(),
                "orientations": [
                    sk.orientations[i].tolist() if sk.has_orientation(i) else None
                    for i in range(sk.n_joints)
                ],
            }
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")


def load_skeleton_frames(path) -> list[Skeleton]:
    skeletons = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            orientations = [
                row if row is not None else [float("nan")] * 3
                for row in record["orientations"]
            ]
            skeletons.append(Skeleton(record["positions"], orientations))
    return skeletons
