"""Command builders: thin wrappers producing (command, blobs) pairs.

Nothing here talks to the network; compose the results into an envelope
and hand it to Connection.query.  The only work done client-side is
encoding, so what you send is exactly what the server sees.
"""

from __future__ import annotations

import struct
from pathlib import Path


def add_image(path, properties=None, fmt: str = "tiled", link=None, ref=None):
    """AddImage command for an image file; returns (command, [blob])."""
    body = {"format": fmt}
    if properties:
        body["properties"] = dict(properties)
    if link:
        body["link"] = dict(link)
    if ref is not None:
        body["_ref"] = ref
    return {"AddImage": body}, [Path(path).read_bytes()]


def find_images(constraints=None, operations=(), results=None, link=None, fmt=None):
    """FindImage command; returns the command object (no blobs)."""
    body = {"operations": list(operations)}
    if constraints:
        body["constraints"] = dict(constraints)
    if results:
        body["results"] = dict(results)
    if link:
        body["link"] = dict(link)
    if fmt:
        body["format"] = fmt
    return {"FindImage": body}


def add_descriptor_set(name: str, dimensions: int):
    return {"AddDescriptorSet": {"name": name, "dimensions": dimensions}}


def add_descriptor(set_name: str, vector, label=None, link=None, ref=None):
    """AddDescriptor command; the vector travels as a little-endian f32 blob."""
    body = {"set": set_name}
    if label is not None:
        body["label"] = label
    if link:
        body["link"] = dict(link)
    if ref is not None:
        body["_ref"] = ref
    return {"AddDescriptor": body}, [encode_vector(vector)]


def classify(set_name: str, vector, k: int):
    """ClassifyDescriptor command; returns (command, [vector blob])."""
    return (
        {"ClassifyDescriptor": {"set": set_name, "k_neighbors": k}},
        [encode_vector(vector)],
    )


def encode_vector(vector) -> bytes:
    values = list(vector)
    return struct.pack(f"<{len(values)}f", *values)
