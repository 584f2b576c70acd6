"""visor: visual data service.

Metadata lives in an embedded transactional property graph, pixel data in a
blob store supporting a tiled lossless format, and feature vectors in exact
nearest-neighbor sets.  A JSON command engine ties the three together behind
a length-prefixed TCP protocol.
"""

__version__ = "0.1.0"

PROTOCOL_VERSION = 1
