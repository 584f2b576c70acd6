"""visor-client: talk to a visor server.

    import visor_client

    conn = visor_client.connect("127.0.0.1", 55555)
    responses, blobs = conn.query([
        {"FindEntity": {"class": "Patient",
                        "constraints": {"Age": [">=", 85]},
                        "results": {"list": ["PatientID", "Age"]}}}
    ])
"""

from .connection import Connection, connect
from .errors import (
    ClientClosedError,
    ClientError,
    FrameError,
    ProtocolVersionError,
)
from .helpers import (
    add_descriptor,
    add_descriptor_set,
    add_image,
    classify,
    encode_vector,
    find_images,
)

__version__ = "0.1.0"

__all__ = [
    "ClientClosedError",
    "ClientError",
    "Connection",
    "FrameError",
    "ProtocolVersionError",
    "add_descriptor",
    "add_descriptor_set",
    "add_image",
    "classify",
    "connect",
    "encode_vector",
    "find_images",
]
