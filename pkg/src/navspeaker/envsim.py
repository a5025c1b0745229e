"""Synthetic houses, panoramic observations and templated silver instructions.

A house is a strip of axis-aligned rooms (3 m ceiling) holding a connected
viewpoint graph whose edge lengths all fall in [1.0, 4.0] m, plus placed
objects.  Panoramas discretise each viewpoint into 12 headings x 3
elevations; heading 0 faces +y and grows clockwise, sector h covering
bearings [30h, 30h+30) degrees.  Object detection is a ground-truth oracle:
every object whose centre falls inside a slot frustum within range yields a
projected bounding box, its box corners in camera frame and a
distance-linear confidence.

Everything is a pure function of (seed, inputs); repeated calls serialize
byte-identically.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPath, NodeNotFound, PathNotFound

HEADING_SLOTS = 12
ELEVATION_SLOTS = 3
SECTOR_DEG = 360.0 / HEADING_SLOTS
ELEVATION_CENTERS = (-30.0, 0.0, 30.0)
ELEVATION_HALF_BAND = 15.0
MAX_RANGE_M = 8.0
EYE_HEIGHT_M = 1.5
ROOM_SIZE_M = 3.8
CEILING_M = 3.0
EDGE_MIN_M = 1.0
EDGE_MAX_M = 4.0

CATEGORY_VOCAB = (
    "bed", "table", "chair", "sofa", "lamp", "desk", "cupboard", "sink",
    "oven", "television", "plant", "shelf", "mirror", "rug", "cabinet", "stool",
)
ROOM_LABELS = (
    "kitchen", "bedroom", "bathroom", "hallway", "office",
    "lounge", "garage", "study", "pantry", "closet",
)
EMPTY_VIEW_TOKEN = "<empty-view>"


# ---------------------------------------------------------------------------
# domain types


@dataclass
class PlacedObject:
    object_id: str
    category: str
    center: np.ndarray  # (3,) meters
    extents: np.ndarray  # (3,) meters, axis-aligned box

    def corners(self) -> np.ndarray:
        half = self.extents / 2.0
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=np.float64,
        )
        return self.center[None, :] + signs * half[None, :]


@dataclass
class Room:
    room_id: str
    label: str
    lo: np.ndarray  # (3,)
    hi: np.ndarray  # (3,)

    def contains(self, p: np.ndarray) -> bool:
        # half-open on x/y so strip rooms partition the floor plan
        return bool(np.all(p[:2] >= self.lo[:2]) and np.all(p[:2] < self.hi[:2])
                    and self.lo[2] <= p[2] < self.hi[2])


@dataclass
class House:
    house_id: str
    node_ids: list[str]
    positions: dict[str, np.ndarray]
    edges: dict[tuple[str, str], float]  # key is the sorted id pair
    rooms: list[Room]
    objects: list[PlacedObject]

    def position(self, node_id: str) -> np.ndarray:
        if node_id not in self.positions:
            raise NodeNotFound(f"{self.house_id}: no node {node_id}")
        return self.positions[node_id]

    def neighbors(self, node_id: str) -> list[str]:
        self.position(node_id)
        out = []
        for a, b in self.edges:
            if a == node_id:
                out.append(b)
            elif b == node_id:
                out.append(a)
        return sorted(out)

    def has_edge(self, a: str, b: str) -> bool:
        return tuple(sorted((a, b))) in self.edges

    def edge_length(self, a: str, b: str) -> float:
        return self.edges[tuple(sorted((a, b)))]

    def room_of(self, p: np.ndarray) -> Room:
        for room in self.rooms:
            if room.contains(p):
                return room
        raise ValueError(f"point {p} outside every room")

    def path_length(self, path: list[str]) -> float:
        return sum(self.edge_length(a, b) for a, b in zip(path, path[1:]))

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "house_id": self.house_id,
            "nodes": [
                {"node_id": n, "position": [float(v) for v in self.positions[n]]}
                for n in self.node_ids
            ],
            "edges": [
                {"nodes": [a, b], "length": self.edges[(a, b)]}
                for a, b in sorted(self.edges)
            ],
            "rooms": [
                {
                    "room_id": r.room_id,
                    "label": r.label,
                    "lo": [float(v) for v in r.lo],
                    "hi": [float(v) for v in r.hi],
                }
                for r in self.rooms
            ],
            "objects": [
                {
                    "object_id": o.object_id,
                    "category": o.category,
                    "center": [float(v) for v in o.center],
                    "extents": [float(v) for v in o.extents],
                }
                for o in self.objects
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "House":
        node_ids = [n["node_id"] for n in d["nodes"]]
        positions = {n["node_id"]: np.array(n["position"], dtype=np.float64) for n in d["nodes"]}
        edges = {tuple(sorted(e["nodes"])): float(e["length"]) for e in d["edges"]}
        rooms = [
            Room(r["room_id"], r["label"], np.array(r["lo"]), np.array(r["hi"]))
            for r in d["rooms"]
        ]
        objects = [
            PlacedObject(
                o["object_id"], o["category"],
                np.array(o["center"], dtype=np.float64),
                np.array(o["extents"], dtype=np.float64),
            )
            for o in d["objects"]
        ]
        return cls(d["house_id"], node_ids, positions, edges, rooms, objects)


@dataclass
class ObjectObservation:
    category: str
    bbox: tuple[float, float, float, float]  # (c_x, c_y, w, h) in [0,1]
    depth_points: np.ndarray  # (8, 3) camera-frame meters
    confidence: float
    object_id: str  # ground-truth provenance (oracle detector)


@dataclass
class ViewSlot:
    heading: int
    elevation: int
    feature: np.ndarray
    candidate: bool = False
    neighbor_id: str | None = None
    detections: list[ObjectObservation] = field(default_factory=list)


@dataclass
class Panorama:
    node_id: str
    slots: list[ViewSlot]  # index = heading * 3 + elevation

    def slot(self, heading: int, elevation: int) -> ViewSlot:
        return self.slots[heading * ELEVATION_SLOTS + elevation]

    def candidate_slots(self) -> list[ViewSlot]:
        return [s for s in self.slots if s.candidate]


@dataclass
class SilverSample:
    house_id: str
    path: list[str]
    micro_instructions: list[tuple[int, str]]
    instruction: str

    def to_dict(self) -> dict:
        return {
            "house_id": self.house_id,
            "path": list(self.path),
            "micro_instructions": [[i, t] for i, t in self.micro_instructions],
            "instruction": self.instruction,
        }


@dataclass
class HouseSpec:
    rooms: int = 4
    nodes_per_room: int = 3
    objects_per_room: int = 2

    def __post_init__(self):
        if min(self.rooms, self.nodes_per_room, self.objects_per_room) < 1:
            raise ValueError("HouseSpec fields must all be >= 1")


# ---------------------------------------------------------------------------
# geometry helpers


def wrap_deg(a: float) -> float:
    """Wrap to (-180, 180]."""
    a = math.fmod(a, 360.0)
    if a > 180.0:
        a -= 360.0
    elif a <= -180.0:
        a += 360.0
    return a


def bearing_deg(src: np.ndarray, dst: np.ndarray) -> float:
    """Compass bearing in [0, 360): 0 along +y, clockwise toward +x."""
    d = dst - src
    return math.degrees(math.atan2(d[0], d[1])) % 360.0


def elevation_deg(src: np.ndarray, dst: np.ndarray) -> float:
    d = dst - src
    return math.degrees(math.atan2(d[2], math.hypot(d[0], d[1])))


_BIN_EPS = 1e-9  # absorbs atan2 round-trip fuzz at sector boundaries


def heading_index(bearing: float) -> int:
    return int((bearing % 360.0 + _BIN_EPS) // SECTOR_DEG) % HEADING_SLOTS


def elevation_index(elev: float) -> int | None:
    e = elev + _BIN_EPS
    for k, center in enumerate(ELEVATION_CENTERS):
        lo = center - ELEVATION_HALF_BAND
        hi = center + ELEVATION_HALF_BAND
        if (lo <= e < hi) or (k == ELEVATION_SLOTS - 1 and lo <= e <= hi + 2 * _BIN_EPS):
            return k
    return None


def _camera_axes(bearing: float, elev: float):
    b = math.radians(bearing)
    e = math.radians(elev)
    forward = np.array([math.sin(b) * math.cos(e), math.cos(b) * math.cos(e), math.sin(e)])
    right = np.array([math.cos(b), -math.sin(b), 0.0])
    down = np.array([math.sin(b) * math.sin(e), math.cos(b) * math.sin(e), -math.cos(e)])
    return right, down, forward


def to_camera_frame(points: np.ndarray, cam_pos: np.ndarray, bearing: float, elev: float) -> np.ndarray:
    right, down, forward = _camera_axes(bearing, elev)
    v = points - cam_pos[None, :]
    return np.stack([v @ right, v @ down, v @ forward], axis=1)


def project_box(corners_cam: np.ndarray, focal: float = 1.0,
                principal: tuple[float, float] = (0.5, 0.5)):
    """Image box for a camera-frame corner set.

    The box centre is the projection of the corner centroid and the width /
    height come from the camera-frame axis-aligned extents scaled by the
    centroid depth, so an on-axis object is centred at the principal point
    exactly.  The box is clipped to the unit square.
    """
    center = corners_cam.mean(axis=0)
    half_x = (corners_cam[:, 0].max() - corners_cam[:, 0].min()) / 2.0
    half_y = (corners_cam[:, 1].max() - corners_cam[:, 1].min()) / 2.0
    z = center[2]
    cx = focal * center[0] / z + principal[0]
    cy = focal * center[1] / z + principal[1]
    w = 2.0 * half_x * focal / z
    h = 2.0 * half_y * focal / z
    x0 = min(max(cx - w / 2.0, 0.0), 1.0)
    x1 = min(max(cx + w / 2.0, 0.0), 1.0)
    y0 = min(max(cy - h / 2.0, 0.0), 1.0)
    y1 = min(max(cy + h / 2.0, 0.0), 1.0)
    return ((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)


# ---------------------------------------------------------------------------
# hashed category features

_hash_cache: dict[tuple[int, str, int], np.ndarray] = {}


def hashed_feature(token: str, dim: int, seed: int = 0) -> np.ndarray:
    """Stable unit-norm pseudo-embedding for a category token."""
    key = (seed, token, dim)
    if key not in _hash_cache:
        digest = hashlib.blake2b(f"{seed}:{token}".encode(), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        v = rng.standard_normal(dim)
        _hash_cache[key] = (v / np.linalg.norm(v)).astype(np.float64)
    return _hash_cache[key]


# ---------------------------------------------------------------------------
# house generation


def generate_house(seed: int, spec: HouseSpec, house_id: str | None = None) -> House:
    """Deterministic strip-of-rooms house with a connected viewpoint graph."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    house_id = house_id or f"house-{seed}"
    w = ROOM_SIZE_M
    margin = 0.5

    labels = list(ROOM_LABELS)
    rng.shuffle(labels)
    rooms = []
    for i in range(spec.rooms):
        label = labels[i % len(labels)]
        rooms.append(Room(
            f"r{i}", label,
            np.array([i * w, 0.0, 0.0]),
            np.array([(i + 1) * w, w, CEILING_M]),
        ))

    node_ids: list[str] = []
    positions: dict[str, np.ndarray] = {}
    edges: dict[tuple[str, str], float] = {}
    room_nodes: list[list[str]] = [[] for _ in rooms]

    def add_edge(a: str, b: str):
        d = float(np.linalg.norm(positions[a] - positions[b]))
        edges[tuple(sorted((a, b)))] = d

    def place(room_idx: int, band: str, parent: str | None, cross_room: bool) -> np.ndarray:
        """Rejection-sample a position in the room band, reachable from parent."""
        x0 = room_idx * w
        lo_x, hi_x = x0 + margin, x0 + w - margin
        if band == "left":
            hi_x = x0 + 1.4
        elif band == "right":
            lo_x = x0 + w - 1.4
        elif band == "center":
            lo_x, hi_x = x0 + 1.4, x0 + w - 1.4
        existing = [positions[n] for n in room_nodes[room_idx]]
        best = None
        best_sep = -1.0
        for _ in range(300):
            x = rng.uniform(lo_x, hi_x)
            if cross_room and parent is not None:
                # keep doorway links short: stay close to the parent's y
                py = positions[parent][1]
                y = min(max(py + rng.uniform(-0.4, 0.4), margin), w - margin)
            else:
                y = rng.uniform(margin, w - margin)
            p = np.array([x, y, EYE_HEIGHT_M])
            if parent is not None:
                d = float(np.linalg.norm(p - positions[parent]))
                if not (EDGE_MIN_M <= d <= EDGE_MAX_M - 0.1):
                    continue
            sep = min((float(np.linalg.norm(p - q)) for q in existing), default=10.0)
            if sep >= 0.9:
                return p
            if sep > best_sep:
                best_sep, best = sep, p
        if best is None:
            raise RuntimeError(f"node placement failed in room {room_idx}")
        return best  # crowded room: relax separation, keep edge-length contract

    last_exit: str | None = None
    idx = 0
    for ri in range(spec.rooms):
        k = spec.nodes_per_room
        single = k == 1
        has_next = ri < spec.rooms - 1
        for j in range(k):
            if single:
                band = "center" if (ri > 0 and has_next) else ("right" if has_next else "left")
                if ri == 0 and not has_next:
                    band = "any"
            elif j == 0:
                band = "left" if ri > 0 else "any"
            elif j == k - 1 and has_next:
                band = "right"
            else:
                band = "any"
            cross = j == 0 and ri > 0
            parent = last_exit if cross else (room_nodes[ri][-1] if j > 0 else None)
            p = place(ri, band, parent, cross)
            nid = f"n{idx:02d}"
            idx += 1
            node_ids.append(nid)
            positions[nid] = p
            room_nodes[ri].append(nid)
            if parent is not None:
                add_edge(parent, nid)
        last_exit = room_nodes[ri][-1]

    # extra edges for loops; keeps lengths in range and degrees modest
    degree = {n: 0 for n in node_ids}
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    for i, a in enumerate(node_ids):
        for b in node_ids[i + 1 :]:
            if (a, b) in edges:
                continue
            d = float(np.linalg.norm(positions[a] - positions[b]))
            if EDGE_MIN_M <= d <= EDGE_MAX_M and degree[a] < 5 and degree[b] < 5:
                if rng.random() < 0.3:
                    add_edge(a, b)
                    degree[a] += 1
                    degree[b] += 1

    objects: list[PlacedObject] = []
    oidx = 0
    for ri, room in enumerate(rooms):
        prev: PlacedObject | None = None
        for _ in range(spec.objects_per_room):
            category = str(rng.choice(list(CATEGORY_VOCAB)))
            extents = rng.uniform(0.3, 1.2, size=3)
            if prev is not None and rng.random() < 0.25 and prev.center[2] + prev.extents[2] / 2 + extents[2] <= CEILING_M - 0.1:
                center = np.array([
                    prev.center[0] + rng.uniform(-0.1, 0.1),
                    prev.center[1] + rng.uniform(-0.1, 0.1),
                    prev.center[2] + prev.extents[2] / 2 + extents[2] / 2,
                ])
            else:
                center = np.array([
                    rng.uniform(room.lo[0] + 0.3, room.hi[0] - 0.3),
                    rng.uniform(room.lo[1] + 0.3, room.hi[1] - 0.3),
                    extents[2] / 2,
                ])
            obj = PlacedObject(f"o{oidx:02d}", category, center, extents)
            oidx += 1
            objects.append(obj)
            prev = obj

    return House(house_id, node_ids, positions, edges, rooms, objects)


# ---------------------------------------------------------------------------
# observation oracle


def detect_objects(house: House, node_id: str, slot: tuple[int, int],
                   max_range: float = MAX_RANGE_M, focal: float = 1.0,
                   noise: float = 0.0, seed: int = 0) -> list[ObjectObservation]:
    """Ground-truth detections (sorted by falling confidence) for one slot."""
    h, e = slot
    if not (0 <= h < HEADING_SLOTS and 0 <= e < ELEVATION_SLOTS):
        raise ValueError(f"bad slot {slot}")
    cam = house.position(node_id)
    bearing_c = h * SECTOR_DEG + SECTOR_DEG / 2.0
    elev_c = ELEVATION_CENTERS[e]
    rng = np.random.default_rng(np.random.PCG64(seed)) if noise > 0 else None

    out: list[ObjectObservation] = []
    for obj in house.objects:
        dist = float(np.linalg.norm(obj.center - cam))
        if dist > max_range or dist < 1e-9:
            continue
        if heading_index(bearing_deg(cam, obj.center)) != h:
            continue
        if elevation_index(elevation_deg(cam, obj.center)) != e:
            continue
        corners_cam = to_camera_frame(obj.corners(), cam, bearing_c, elev_c)
        bbox = project_box(corners_cam, focal=focal)
        conf = 1.0 - dist / max_range
        if rng is not None:
            conf += noise * rng.standard_normal()
        conf = min(max(conf, 0.05), 1.0)
        out.append(ObjectObservation(obj.category, bbox, corners_cam, conf, obj.object_id))
    out.sort(key=lambda o: (-o.confidence, o.object_id))
    return out


def render_panorama(house: House, node_id: str, v_dim: int = 64,
                    feature_seed: int = 0) -> Panorama:
    """36-slot panorama with hashed-category features and candidate slots."""
    cam = house.position(node_id)
    slots: list[ViewSlot] = []
    for h in range(HEADING_SLOTS):
        for e in range(ELEVATION_SLOTS):
            dets = detect_objects(house, node_id, (h, e))
            if dets:
                feat = np.sum([hashed_feature(d.category, v_dim, feature_seed) for d in dets], axis=0)
                feat = feat / np.linalg.norm(feat)
            else:
                feat = hashed_feature(EMPTY_VIEW_TOKEN, v_dim, feature_seed).copy()
            slots.append(ViewSlot(h, e, feat, detections=dets))

    pano = Panorama(node_id, slots)
    neighbors = sorted(house.neighbors(node_id), key=lambda n: (bearing_deg(cam, house.positions[n]), n))
    taken: set[int] = set()
    for nb in neighbors:
        want = heading_index(bearing_deg(cam, house.positions[nb]))
        slot_h = None
        for off in range(HEADING_SLOTS):
            for cand in ((want + off) % HEADING_SLOTS, (want - off) % HEADING_SLOTS):
                if cand not in taken:
                    slot_h = cand
                    break
            if slot_h is not None:
                break
        if slot_h is None:
            raise ValueError(f"node {node_id} has more neighbors than heading slots")
        taken.add(slot_h)
        s = pano.slot(slot_h, 1)
        s.candidate = True
        s.neighbor_id = nb
    return pano


def top_detection(house: House, node_id: str) -> ObjectObservation | None:
    """Highest-confidence detection over all 36 slots of a viewpoint."""
    best: ObjectObservation | None = None
    for h in range(HEADING_SLOTS):
        for e in range(ELEVATION_SLOTS):
            for det in detect_objects(house, node_id, (h, e)):
                if best is None or (det.confidence, det.object_id) > (best.confidence, best.object_id):
                    best = det
    return best


# ---------------------------------------------------------------------------
# path sampling and silver instructions


def sample_path(house: House, seed: int, min_len_m: float, max_len_m: float,
                retries: int = 1000) -> list[str]:
    if not (0.0 < min_len_m <= max_len_m):
        raise ValueError("need 0 < min_len_m <= max_len_m")
    rng = np.random.default_rng(np.random.PCG64(seed))
    for _ in range(retries):
        start = house.node_ids[int(rng.integers(len(house.node_ids)))]
        path = [start]
        length = 0.0
        while True:
            if min_len_m <= length <= max_len_m and len(path) >= 2 and rng.random() < 0.4:
                return path
            options = [
                n for n in house.neighbors(path[-1])
                if n not in path and length + house.edge_length(path[-1], n) <= max_len_m
            ]
            if not options:
                if min_len_m <= length <= max_len_m and len(path) >= 2:
                    return path
                break
            nxt = options[int(rng.integers(len(options)))]
            length += house.edge_length(path[-1], nxt)
            path.append(nxt)
    raise PathNotFound(
        f"no simple path with length in [{min_len_m}, {max_len_m}] m after {retries} tries"
    )


MOVE_TEMPLATES = (
    "walk past the {obj} and {dirp}.",
    "{dirp} and head toward the {obj}.",
    "leave the {sroom} and {dirp}.",
    "{dirp} at the {obj}.",
    "enter the {troom}.",
    "walk through the {sroom} and {dirp}.",
)
ROOM_ONLY_MOVE = (2, 4, 5)  # usable when no object is visible
STOP_TEMPLATES = (
    "stop near the {obj}.",
    "wait by the {obj}.",
    "stop at the {troom}.",
)


def _direction_phrase(delta_deg: float) -> str:
    if delta_deg > 30.0:
        return "turn right"
    if delta_deg < -30.0:
        return "turn left"
    return "go straight"


def template_instruction(house: House, path: list[str], seed: int) -> SilverSample:
    """One templated micro-instruction per edge; the last edge appends a stop."""
    if len(path) < 2:
        raise InvalidPath("template_instruction needs a path of >= 2 nodes")
    for a, b in zip(path, path[1:]):
        if not house.has_edge(a, b):
            raise InvalidPath(f"{a}-{b} is not an edge of {house.house_id}")
    rng = np.random.default_rng(np.random.PCG64(seed))
    micros: list[tuple[int, str]] = []
    prev_bearing: float | None = None
    for i, (a, b) in enumerate(zip(path, path[1:])):
        bearing = bearing_deg(house.positions[a], house.positions[b])
        delta = 0.0 if prev_bearing is None else wrap_deg(bearing - prev_bearing)
        prev_bearing = bearing
        dirp = _direction_phrase(delta)
        det = top_detection(house, a)
        fields = {
            "obj": det.category if det else "",
            "dirp": dirp,
            "sroom": house.room_of(house.positions[a]).label,
            "troom": house.room_of(house.positions[b]).label,
        }
        if det is None:
            t_idx = int(rng.choice(ROOM_ONLY_MOVE))
        else:
            t_idx = int(rng.integers(len(MOVE_TEMPLATES)))
        text = MOVE_TEMPLATES[t_idx].format(**fields)
        if i == len(path) - 2:
            s_idx = 2 if det is None else int(rng.integers(len(STOP_TEMPLATES)))
            text = text + " " + STOP_TEMPLATES[s_idx].format(**fields)
        micros.append((i, text))
    instruction = " ".join(t for _, t in micros)
    return SilverSample(house.house_id, list(path), micros, instruction)
