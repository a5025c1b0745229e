"""Deterministic input encodings for the speaker.

Three per-viewpoint encodings: a trigonometric action code, a structural
code (category embedding, image-frame centre, size, distance from
inverse-pinhole back-projection) and a semantic code of embedded
(object, relation, object) and (object, "in", room) triples.  Relations come
from a geometric oracle over placed-object boxes; embeddings from a frozen
seeded table (optionally loaded from a text file).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .envsim import (
    ELEVATION_SLOTS, HEADING_SLOTS, House, ObjectObservation, Panorama,
    PlacedObject, bearing_deg, elevation_deg, render_panorama, wrap_deg,
)
from .errors import NoDepth, SelfRelation

NONE_TOKEN = "<none>"
IN_TOKEN = "in"
RELATION_VOCAB = ("on top of", "under", "above", "below", "next to", "near", "far from")
MIN_BOX_VOLUME = 1e-6


# ---------------------------------------------------------------------------
# action encoding


def encode_action(theta: float, phi: float) -> np.ndarray:
    """[cos(theta), sin(theta), cos(phi), sin(phi)] with angles in radians.

    theta is the relative elevation, phi the relative heading; both are
    wrapped to (-pi, pi] first.
    """
    theta = math.radians(wrap_deg(math.degrees(theta)))
    phi = math.radians(wrap_deg(math.degrees(phi)))
    return np.array([math.cos(theta), math.sin(theta), math.cos(phi), math.sin(phi)])


# ---------------------------------------------------------------------------
# structural encoding


def back_project(obs: ObjectObservation) -> tuple[float, float]:
    """(size m^3, distance m) from an observation's camera-frame points.

    Distance is the norm of the point centroid; size the volume of the
    points' axis-aligned bounding box, floored at 1e-6 m^3 for degenerate
    clouds.
    """
    pts = np.asarray(obs.depth_points, dtype=np.float64)
    if pts.size == 0:
        raise NoDepth("back_project needs at least one depth point")
    pts = pts.reshape(-1, 3)
    d_o = float(np.linalg.norm(pts.mean(axis=0)))
    extent = pts.max(axis=0) - pts.min(axis=0)
    s_o = max(float(np.prod(extent)), MIN_BOX_VOLUME)
    return s_o, d_o


# ---------------------------------------------------------------------------
# relation oracle


def _xy_overlap(a: PlacedObject, b: PlacedObject) -> bool:
    for ax in (0, 1):
        a_lo, a_hi = a.center[ax] - a.extents[ax] / 2, a.center[ax] + a.extents[ax] / 2
        b_lo, b_hi = b.center[ax] - b.extents[ax] / 2, b.center[ax] + b.extents[ax] / 2
        if a_hi < b_lo or b_hi < a_lo:
            return False
    return True


def infer_relation(a: PlacedObject, b: PlacedObject) -> str:
    """First matching geometric rule, evaluated in a fixed priority order."""
    if a.object_id == b.object_id:
        raise SelfRelation(f"relation of {a.object_id} with itself")
    a_bottom = a.center[2] - a.extents[2] / 2
    a_top = a.center[2] + a.extents[2] / 2
    b_bottom = b.center[2] - b.extents[2] / 2
    b_top = b.center[2] + b.extents[2] / 2
    if _xy_overlap(a, b):
        if abs(a_bottom - b_top) <= 0.1:
            return "on top of"
        if abs(b_bottom - a_top) <= 0.1:
            return "under"
        if a_bottom - b_top > 0.1:
            return "above"
        if b_bottom - a_top > 0.1:
            return "below"
    gap = float(np.linalg.norm(a.center - b.center))
    if gap <= 1.0:
        return "next to"
    if gap <= 2.5:
        return "near"
    return "far from"


# ---------------------------------------------------------------------------
# embedding table


class EmbeddingTable:
    """Frozen token -> vector map; rows are seeded Gaussian / sqrt(dim)."""

    def __init__(self, dim: int = 300, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._rows: dict[str, np.ndarray] = {}

    def _fresh(self, token: str) -> np.ndarray:
        digest = hashlib.blake2b(f"emb:{self.seed}:{token}".encode(), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        return (rng.standard_normal(self.dim) / math.sqrt(self.dim)).astype(np.float64)

    def vec(self, token: str) -> np.ndarray:
        token = token.lower()
        if token not in self._rows:
            self._rows[token] = self._fresh(token)
        return self._rows[token]

    def phrase_vec(self, phrase: str) -> np.ndarray:
        """Multi-word tokens (relations) embed as the mean of word vectors."""
        words = phrase.split()
        if len(words) == 1:
            return self.vec(words[0])
        return np.mean([self.vec(w) for w in words], axis=0)

    def matrix(self, tokens: list[str]) -> np.ndarray:
        return np.stack([self.vec(t) for t in tokens], axis=0)

    @classmethod
    def from_text_file(cls, path, seed: int = 0) -> "EmbeddingTable":
        """`word v1 .. vG` whitespace lines; dim taken from the first row."""
        table = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) < 2:
                    continue
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
                if table is None:
                    table = cls(dim=len(vec), seed=seed)
                table._rows[parts[0].lower()] = vec
        if table is None:
            raise ValueError(f"{path}: no embedding rows")
        return table


# ---------------------------------------------------------------------------
# semantic encoding


@dataclass
class SemanticEncoding:
    e_obj: np.ndarray  # (36, 3G)
    e_room: np.ndarray  # (36, 3G)


def _triple(table: EmbeddingTable, a: str, rel: str, b: str) -> np.ndarray:
    return np.concatenate([table.phrase_vec(a), table.phrase_vec(rel), table.phrase_vec(b)])


def build_semantic(panorama: Panorama, house: House, table: EmbeddingTable,
                   k: int = 6) -> SemanticEncoding:
    """Per-slot object and room triples from the top-confidence detections.

    The object triple pairs each slot's best detection with its nearest
    co-visible object among the slot's top-k detections; the room triple
    links the best detection to the viewpoint's room via "in".
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    g = table.dim
    objects_by_id = {o.object_id: o for o in house.objects}
    room_label = house.room_of(house.position(panorama.node_id)).label
    none_triple = _triple(table, NONE_TOKEN, NONE_TOKEN, NONE_TOKEN)

    e_obj = np.zeros((len(panorama.slots), 3 * g))
    e_room = np.zeros((len(panorama.slots), 3 * g))
    for idx, slot in enumerate(panorama.slots):
        if not slot.detections:
            e_obj[idx] = none_triple
            e_room[idx] = none_triple
            continue
        top = slot.detections[0]  # detections sorted by falling confidence
        rest = slot.detections[1:k]
        top_obj = objects_by_id[top.object_id]
        partner = None
        best_d = None
        for det in rest:
            other = objects_by_id[det.object_id]
            d = float(np.linalg.norm(other.center - top_obj.center))
            if best_d is None or d < best_d:
                best_d, partner = d, other
        if partner is None:
            e_obj[idx] = _triple(table, top.category, NONE_TOKEN, NONE_TOKEN)
        else:
            rel = infer_relation(top_obj, partner)
            e_obj[idx] = _triple(table, top.category, rel, partner.category)
        e_room[idx] = _triple(table, top.category, IN_TOKEN, room_label)
    return SemanticEncoding(e_obj=e_obj, e_room=e_room)


def build_structural(panorama: Panorama, table: EmbeddingTable) -> np.ndarray:
    """(36, G+4) rows [f_o, c_x, c_y, s_o, d_o] from each slot's top detection."""
    g = table.dim
    out = np.zeros((len(panorama.slots), g + 4))
    none_vec = table.vec(NONE_TOKEN)
    for idx, slot in enumerate(panorama.slots):
        if not slot.detections:
            out[idx, :g] = none_vec
            continue
        top = slot.detections[0]
        s_o, d_o = back_project(top)
        cx, cy, _, _ = top.bbox
        out[idx, :g] = table.vec(top.category)
        out[idx, g : g + 4] = (cx, cy, s_o, d_o)
    return out


# ---------------------------------------------------------------------------
# trajectory feature assembly


@dataclass
class StepFeatures:
    slot_matrix: np.ndarray  # (36, V + 6G + G + 4): [f_c, e_obj, e_room, E_so]
    action: np.ndarray  # (4,) action encoding


@dataclass
class TrajectoryFeatures:
    house_id: str
    path: list[str]
    steps: list[StepFeatures]


class FeatureExtractor:
    """Caches per-viewpoint panoramas and slot matrices for one house set."""

    def __init__(self, table: EmbeddingTable, v_dim: int = 64, k: int = 6,
                 feature_seed: int = 0, dtype=np.float32):
        self.table = table
        self.v_dim = v_dim
        self.k = k
        self.feature_seed = feature_seed
        self.dtype = dtype
        self._slot_cache: dict[tuple[str, str], np.ndarray] = {}

    @property
    def slot_feature_dim(self) -> int:
        return self.v_dim + 7 * self.table.dim + 4

    def slot_matrix(self, house: House, node_id: str) -> np.ndarray:
        key = (house.house_id, node_id)
        if key not in self._slot_cache:
            pano = render_panorama(house, node_id, v_dim=self.v_dim, feature_seed=self.feature_seed)
            f_c = np.stack([s.feature for s in pano.slots], axis=0)
            sem = build_semantic(pano, house, self.table, k=self.k)
            e_so = build_structural(pano, self.table)
            mat = np.concatenate([f_c, sem.e_obj, sem.e_room, e_so], axis=1)
            self._slot_cache[key] = mat.astype(self.dtype)
        return self._slot_cache[key]

    def trajectory(self, house: House, path: list[str],
                   headings: list[float] | None = None) -> TrajectoryFeatures:
        """Slot matrices plus relative-action codes for each step of a path.

        The action at step t turns the agent from its arrival heading toward
        the next viewpoint; the final step is the stop action (zero angles).
        """
        steps: list[StepFeatures] = []
        n = len(path)
        for t, node in enumerate(path):
            mat = self.slot_matrix(house, node)
            if t < n - 1:
                here = house.positions[node]
                there = house.positions[path[t + 1]]
                out_bearing = bearing_deg(here, there)
                if headings is not None:
                    arrive = headings[t]
                elif t == 0:
                    arrive = out_bearing
                else:
                    arrive = bearing_deg(house.positions[path[t - 1]], here)
                phi = math.radians(wrap_deg(out_bearing - arrive))
                theta = math.radians(elevation_deg(here, there))
            else:
                phi = theta = 0.0
            steps.append(StepFeatures(mat, encode_action(theta, phi).astype(self.dtype)))
        return TrajectoryFeatures(house.house_id, list(path), steps)
