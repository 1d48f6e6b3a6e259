"""Channel layout of a full-body frame and of each body-part slice.

A frame holds, in order: Rot6D for every joint (upper, hands, lower joint
blocks), 100 face coefficients, 4 foot contacts, 3 root translations. With
the default 13/30/12 joint split that is 55 * 6 + 100 + 4 + 3 = 437 channels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

PART_NAMES = ("face", "upper", "hands", "lower")
BODY_PARTS = ("upper", "hands", "lower")


@dataclass(frozen=True)
class PartLayout:
    """Channel order inside one part slice: rot6d, face, contact, translation."""

    name: str
    n_rot_joints: int = 0
    n_face: int = 0
    n_contact: int = 0
    n_trans: int = 0

    @property
    def kind(self) -> str:
        return "face" if self.name == "face" else "body"

    @property
    def width(self) -> int:
        return 6 * self.n_rot_joints + self.n_face + self.n_contact + self.n_trans

    @property
    def rot(self) -> slice:
        return slice(0, 6 * self.n_rot_joints)

    @property
    def face(self) -> slice:
        start = 6 * self.n_rot_joints
        return slice(start, start + self.n_face)

    @property
    def contact(self) -> slice:
        start = self.face.stop
        return slice(start, start + self.n_contact)

    @property
    def trans(self) -> slice:
        start = self.contact.stop
        return slice(start, start + self.n_trans)

    def rest_pose(self) -> np.ndarray:
        """Identity rotations, planted feet (contacts 1), zeros elsewhere."""
        rest = np.zeros(self.width)
        rest[self.rot] = np.tile([1.0, 0.0, 0.0, 0.0, 1.0, 0.0], self.n_rot_joints)
        rest[self.contact] = 1.0
        return rest


@dataclass(frozen=True)
class BodyLayout:
    upper_joints: int = 13
    hand_joints: int = 30
    lower_joints: int = 12
    n_face: int = 100
    n_contact: int = 4
    n_trans: int = 3

    @property
    def n_joints(self) -> int:
        return self.upper_joints + self.hand_joints + self.lower_joints

    @property
    def width(self) -> int:
        return 6 * self.n_joints + self.n_face + self.n_contact + self.n_trans

    @property
    def face_start(self) -> int:
        return 6 * self.n_joints

    @property
    def contact_start(self) -> int:
        return self.face_start + self.n_face

    @property
    def trans_start(self) -> int:
        return self.contact_start + self.n_contact

    def joint_range(self, part: str) -> range:
        starts = {"upper": 0, "hands": self.upper_joints,
                  "lower": self.upper_joints + self.hand_joints}
        counts = {"upper": self.upper_joints, "hands": self.hand_joints,
                  "lower": self.lower_joints}
        return range(starts[part], starts[part] + counts[part])

    def part(self, name: str) -> PartLayout:
        if name == "face":
            return PartLayout("face", n_face=self.n_face)
        if name == "lower":
            return PartLayout("lower", self.lower_joints, n_contact=self.n_contact,
                              n_trans=self.n_trans)
        if name in ("upper", "hands"):
            return PartLayout(name, len(self.joint_range(name)))
        raise KeyError(f"unknown body part {name!r}; expected one of {PART_NAMES}")

    @cached_property
    def _channels(self) -> dict[str, np.ndarray]:
        out = {"face": np.arange(self.face_start, self.contact_start)}
        for name in BODY_PARTS:
            joints = self.joint_range(name)
            out[name] = np.arange(6 * joints.start, 6 * joints.stop)
        out["lower"] = np.concatenate([out["lower"],
                                       np.arange(self.contact_start, self.trans_start),
                                       np.arange(self.trans_start, self.width)])
        return out

    def channels(self, name: str) -> np.ndarray:
        """Indices into the full frame for a part, in part-slice order."""
        self.part(name)
        return self._channels[name]

    def extract(self, frames: np.ndarray, name: str) -> np.ndarray:
        return frames[..., self.channels(name)]

    def assemble(self, parts: dict[str, np.ndarray]) -> np.ndarray:
        missing = set(PART_NAMES) - set(parts)
        if missing:
            raise KeyError(f"missing parts {sorted(missing)}")
        lead = parts["face"].shape[:-1]
        out = np.zeros(lead + (self.width,))
        for name in PART_NAMES:
            out[..., self.channels(name)] = parts[name]
        return out

    def rot_channels(self) -> np.ndarray:
        return np.arange(0, self.face_start)

    def translation_channels(self) -> np.ndarray:
        return np.arange(self.trans_start, self.width)


DEFAULT_LAYOUT = BodyLayout()
