"""
Named random sub-streams.

Every random draw in a simulation comes from a Philox counter-based generator
keyed by ``SeedSequence(master_seed, spawn_key=(stream, *indices))``. A trial
therefore owns its streams outright and the result of a sweep does not depend
on the order or the number of threads the trials run on.
"""

import numpy as np

STREAM_CODEBOOK = 0
STREAM_PACKET = 1
STREAM_CHANNEL = 2
STREAM_NOISE = 3
STREAM_CHECK = 4

_MAX_SEED = 2**64 - 1


def derive_stream(master_seed: int, stream: int, *indices: int) -> np.random.Generator:
    """
    Build the generator for one named sub-stream.

    :param master_seed: 64-bit unsigned master seed
    :param stream: one of the STREAM_* identifiers
    :param indices: further non-negative keys, e.g. (point, trial)
    :return: an independent numpy Generator backed by Philox
    """
    if not 0 <= int(master_seed) <= _MAX_SEED:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master_seed}")
    seq = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=(int(stream),) + tuple(int(i) for i in indices)
    )
    return np.random.Generator(np.random.Philox(seq))
