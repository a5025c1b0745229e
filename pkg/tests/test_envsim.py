from collections import deque

import numpy as np
import pytest

from navspeaker import envsim
from navspeaker.envsim import (
    House, HouseSpec, PlacedObject, Room, bearing_deg, detect_objects,
    elevation_index, generate_house, heading_index, project_box,
    render_panorama, sample_path, template_instruction,
)
from navspeaker.errors import InvalidPath, NodeNotFound, PathNotFound

from conftest import line_house


def bfs_connected(house: House) -> bool:
    if len(house.node_ids) <= 1:
        return True
    seen = {house.node_ids[0]}
    queue = deque([house.node_ids[0]])
    while queue:
        n = queue.popleft()
        for m in house.neighbors(n):
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return len(seen) == len(house.node_ids)


def test_minimal_spec_house():
    h = generate_house(7, HouseSpec(1, 1, 1))
    assert len(h.node_ids) == 1
    assert len(h.edges) == 0
    assert len(h.objects) == 1


def test_generation_is_deterministic():
    spec = HouseSpec(4, 3, 2)
    assert generate_house(7, spec).to_json() == generate_house(7, spec).to_json()


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("spec", [HouseSpec(1, 1, 1), HouseSpec(2, 1, 2),
                                  HouseSpec(4, 3, 2), HouseSpec(6, 4, 3)])
def test_house_invariants(seed, spec):
    h = generate_house(seed, spec)
    assert bfs_connected(h)
    assert len(h.node_ids) == spec.rooms * spec.nodes_per_room
    assert len(h.objects) == spec.rooms * spec.objects_per_room
    for (a, b), length in h.edges.items():
        d = float(np.linalg.norm(h.positions[a] - h.positions[b]))
        assert abs(length - d) < 1e-9
        assert 1.0 <= length <= 4.0
    for n in h.node_ids:
        assert sum(r.contains(h.positions[n]) for r in h.rooms) == 1
    for o in h.objects:
        assert np.all(o.extents > 0)
        assert o.category in envsim.CATEGORY_VOCAB


def test_counted_example_house():
    h = generate_house(7, HouseSpec(4, 3, 2))
    assert len(h.node_ids) == 12
    assert len(h.objects) == 8
    assert bfs_connected(h)


def test_serialization_roundtrip(house):
    again = House.from_dict(house.to_dict())
    assert again.to_json() == house.to_json()


def test_heading_sector_sweep():
    # enumerate integer bearings; position-derived bearing maps to sector b//30
    cam = np.array([0.0, 0.0, 1.5])
    for b in range(360):
        tgt = cam + np.array([np.sin(np.radians(b)), np.cos(np.radians(b)), 0.0])
        assert heading_index(bearing_deg(cam, tgt)) == b // 30
    assert heading_index(15.0) == 0


def test_elevation_bands():
    assert elevation_index(-45.0) == 0
    assert elevation_index(0.0) == 1
    assert elevation_index(45.0) == 2
    assert elevation_index(50.0) is None
    assert elevation_index(-50.0) is None


def _single_object_house(offset, extents=(1.0, 1.0, 1.0)):
    cam = np.array([0.0, 0.0, 1.5])
    rooms = [Room("r0", "kitchen", np.array([-20.0, -20.0, 0.0]), np.array([20.0, 20.0, 3.0]))]
    obj = PlacedObject("o00", "table", cam + np.asarray(offset, dtype=float),
                       np.asarray(extents, dtype=float))
    return House("t", ["n00"], {"n00": cam}, {}, rooms, [obj]), cam


def _slot0_axis(dist):
    b = np.radians(15.0)
    return dist * np.array([np.sin(b), np.cos(b), 0.0])


def test_on_axis_bbox_centered_exactly():
    h, _ = _single_object_house(_slot0_axis(2.0))
    (det,) = detect_objects(h, "n00", (0, 1))
    cx, cy, w, hh = det.bbox
    assert cx == 0.5 and cy == 0.5
    assert det.confidence == 0.75  # 1 - 2/8
    assert det.depth_points.shape == (8, 3)


def test_beyond_range_excluded():
    h, _ = _single_object_house(_slot0_axis(9.0))
    assert detect_objects(h, "n00", (0, 1)) == []


def test_aligned_cube_projection_oracle():
    # unit cube 4m ahead of an axis-aligned camera: width extents/depth = 1/4,
    # cross-checked by recomputing the camera-frame corner AABB
    corners = np.array([
        [sx * 0.5, sy * 0.5, 4.0 + sz * 0.5]
        for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)
    ])
    cx, cy, w, h = project_box(corners)
    assert abs(cx - 0.5) < 1e-12 and abs(cy - 0.5) < 1e-12
    assert abs(w - 0.25) < 1e-12 and abs(h - 0.25) < 1e-12
    half_x = (corners[:, 0].max() - corners[:, 0].min()) / 2
    depth = corners.mean(axis=0)[2]
    assert abs(w - 2 * half_x / depth) < 1e-12


def test_detection_unknown_node():
    h, _ = _single_object_house(_slot0_axis(2.0))
    with pytest.raises(NodeNotFound):
        detect_objects(h, "nope", (0, 1))


def test_panorama_slot_count_and_unit_features(house):
    p = render_panorama(house, house.node_ids[0])
    assert len(p.slots) == 36
    for s in p.slots:
        assert abs(np.linalg.norm(s.feature) - 1.0) < 1e-9
        assert np.all(np.isfinite(s.feature))


def test_empty_slot_uses_empty_view_vector():
    cam = np.array([0.0, 0.0, 1.5])
    rooms = [Room("r0", "kitchen", np.array([-20.0, -20.0, 0.0]), np.array([20.0, 20.0, 3.0]))]
    h = House("t", ["n00"], {"n00": cam}, {}, rooms, [])
    p = render_panorama(h, "n00", v_dim=16)
    expect = envsim.hashed_feature(envsim.EMPTY_VIEW_TOKEN, 16)
    for s in p.slots:
        assert np.allclose(s.feature, expect)


def test_candidate_bijection(house):
    for n in house.node_ids:
        p = render_panorama(house, n)
        cands = p.candidate_slots()
        assert len(cands) == len(house.neighbors(n))
        assert sorted(s.neighbor_id for s in cands) == house.neighbors(n)


def test_two_neighbor_node_has_two_candidates():
    h = line_house(3)
    p = render_panorama(h, "b")
    assert len(p.candidate_slots()) == 2


def test_sample_path_respects_bounds(house):
    for seed in range(100):
        path = sample_path(house, seed, 5.0, 20.0)
        assert len(path) == len(set(path))
        assert 5.0 <= house.path_length(path) <= 20.0


def test_sample_path_exact_edge():
    h = line_house(2, gap=2.0)
    path = sample_path(h, 0, 2.0, 2.0)
    assert sorted(path) == ["a", "b"]


def test_sample_path_not_found_matches_enumeration():
    h = line_house(3, gap=2.0)  # simple paths have lengths {2, 4}
    lengths = set()
    names = h.node_ids
    for i in range(3):
        for j in range(3):
            if i != j:
                # enumerate simple paths on the 3-node line by brute force
                pass
    all_paths = [["a", "b"], ["b", "c"], ["a", "b", "c"]]
    lengths = {h.path_length(p) for p in all_paths}
    assert all(not (5.0 <= L <= 6.0) for L in lengths)
    with pytest.raises(PathNotFound):
        sample_path(h, 0, 5.0, 6.0, retries=60)


def test_template_instruction_segmentation(house):
    for seed in range(6):
        path = sample_path(house, seed, 5.0, 20.0)
        silver = template_instruction(house, path, seed=seed)
        assert len(silver.micro_instructions) == len(path) - 1
        assert " ".join(t for _, t in silver.micro_instructions) == silver.instruction
        assert silver.instruction == silver.instruction.lower()


def test_template_single_edge_walk_past():
    # seed chosen so the first move template and first stop template are drawn
    h = line_house(2, gap=2.0)
    h.objects.append(PlacedObject("o00", "table", np.array([0.3, 1.5, 1.0]),
                                  np.array([0.8, 0.8, 0.8])))
    for seed in range(200):
        s = template_instruction(h, ["a", "b"], seed=seed)
        if s.instruction == "walk past the table and go straight. stop near the table.":
            break
    else:
        pytest.fail("expected template composition never drawn")
    assert len(s.micro_instructions) == 1


def test_template_right_turn_sign_convention():
    # +90 degree heading change -> "turn right" (positive = clockwise)
    pos = {
        "a": np.array([0.0, 0.0, 1.5]),
        "b": np.array([0.0, 2.0, 1.5]),
        "c": np.array([2.0, 2.0, 1.5]),
    }
    edges = {("a", "b"): 2.0, ("b", "c"): 2.0}
    rooms = [Room("r0", "kitchen", np.array([-10.0, -10.0, 0.0]), np.array([10.0, 10.0, 3.0]))]
    h = House("turn", ["a", "b", "c"], pos, edges, rooms,
              [PlacedObject("o00", "desk", np.array([1.0, 1.0, 0.4]), np.array([0.5, 0.5, 0.8]))])
    found_right = False
    for seed in range(100):
        s = template_instruction(h, ["a", "b", "c"], seed=seed)
        second = s.micro_instructions[1][1]
        assert "turn left" not in second
        if "turn right" in second:
            found_right = True
    assert found_right


def test_template_too_short_path(house):
    with pytest.raises(InvalidPath):
        template_instruction(house, [house.node_ids[0]], seed=0)
