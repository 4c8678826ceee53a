"""fastmr: in-memory message-passing MapReduce engine.

Thin Python wrapper around the _fastmr extension module. Jobs run on an
in-process cluster of worker threads; results are gathered to the caller.
"""

try:
    # Installed wheel layout: the extension lives inside this package.
    from ._fastmr import (  # noqa: F401
        decode_kv,
        encode_kv,
        fnv1a64,
        gaussian_blobs,
        kmeans,
        partition,
        pi_estimate,
        tokenize,
        wordcount,
        zipf_corpus,
    )
except ImportError:
    # Development layout: the extension sits on sys.path (CMake build dir).
    from _fastmr import (  # noqa: F401
        decode_kv,
        encode_kv,
        fnv1a64,
        gaussian_blobs,
        kmeans,
        partition,
        pi_estimate,
        tokenize,
        wordcount,
        zipf_corpus,
    )

__all__ = [
    "decode_kv",
    "encode_kv",
    "fnv1a64",
    "gaussian_blobs",
    "kmeans",
    "partition",
    "pi_estimate",
    "tokenize",
    "wordcount",
    "zipf_corpus",
]
