"""Client acceptance: the five-step classification flow end to end against
a live server, plus byte-exact wire parity (test_protocol pins the frame).

The flow: extract a feature vector from an image region, insert it with a
label and a link to the image, then classify a fresh vector and get the
inserted label back.
"""

from __future__ import annotations

import math
import random

import visor_client

from .conftest import make_png
from .test_protocol import CANONICAL_FRAME_HEX, CANONICAL_COMMANDS, CANONICAL_BLOBS


def fake_feature_vector(seed: int, dim: int = 64) -> list[float]:
    rng = random.Random(seed)
    vec = [rng.gauss(0, 1) for _ in range(dim)]
    norm = math.sqrt(sum(x * x for x in vec))
    return [x / norm for x in vec]


def test_five_step_flow_returns_inserted_label(live_server, tmp_dir):
    host, port = live_server
    png = make_png(96, 96, lambda x, y: (x * x + y * 3) % 256)
    path = tmp_dir / "brain.png"
    path.write_bytes(png)

    with visor_client.connect(host, port) as conn:
        # steps 1-2: a labeled vector goes in with its metadata and a link
        # back to the original image
        add_cmd, image_blobs = visor_client.add_image(
            path, {"id": "flow-brain"}, ref=1
        )
        desc_cmd, vec_blobs = visor_client.add_descriptor(
            "flow-tumors",
            fake_feature_vector(1),
            label="glioma",
            link={"ref": 1, "class": "describes", "direction": "in"},
        )
        responses, _ = conn.query(
            [add_cmd, visor_client.add_descriptor_set("flow-tumors", 64), desc_cmd],
            image_blobs + vec_blobs,
        )
        assert [r["status"] for r in responses] == [0, 0, 0]
        assert responses[2]["descriptor_id"] == 1

        # a second, differently labeled region for contrast
        far_cmd, far_blobs = visor_client.add_descriptor(
            "flow-tumors",
            [-x for x in fake_feature_vector(2)],
            label="meningioma",
        )
        responses, _ = conn.query([far_cmd], far_blobs)
        assert responses[0]["status"] == 0

        # steps 3-5: a new vector close to the first is classified and the
        # server answers with the label that went in
        probe = [x + random.Random(3).gauss(0, 0.01) for x in fake_feature_vector(1)]
        classify_cmd, probe_blobs = visor_client.classify("flow-tumors", probe, k=1)
        responses, _ = conn.query([classify_cmd], probe_blobs)
        assert responses[0]["status"] == 0
        assert responses[0]["label"] == "glioma"

        # and the stored link lets the classified vector lead back to the image
        responses, _ = conn.query(
            [
                {"FindDescriptor": {"set": "flow-tumors", "k_neighbors": 1,
                                    "vector": probe, "_ref": 1}},
                {"FindEntity": {"class": "Image",
                                "link": {"ref": 1, "class": "describes"},
                                "results": {"list": ["id"]}}},
            ]
        )
        assert responses[0]["entities"][0]["_label"] == "glioma"
        assert responses[1]["entities"][0]["id"] == "flow-brain"
    print("\nclient five-step flow: inserted label returned  PASS")


def test_wire_parity_is_part_of_acceptance():
    frame = visor_client.protocol.encode_frame(CANONICAL_COMMANDS, CANONICAL_BLOBS)
    assert frame.hex() == CANONICAL_FRAME_HEX
    print("client wire parity: canonical frame byte-exact  PASS")
