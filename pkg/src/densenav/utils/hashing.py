from collections.abc import Iterable
from pathlib import Path
from typing import Any

import orjson
import xxhash

CHUNK_SIZE = 65536


def get_file_hash(filepath: Path) -> str:
    if not filepath.exists():
        raise FileNotFoundError(f"File not found: {filepath}")

    h = xxhash.xxh3_64()
    with filepath.open("rb") as f:
        for chunk in iter(lambda: f.read(CHUNK_SIZE), b""):
            h.update(chunk)

    return h.hexdigest()


def get_tree_hash(paths: Iterable[Path], root: Path) -> str:
    """Digest of file names and contents, independent of iteration order."""
    h = xxhash.xxh3_64()
    for path in sorted(paths):
        h.update(path.relative_to(root).as_posix().encode())
        h.update(get_file_hash(path).encode())
    return h.hexdigest()


def get_json_hash(data: Any) -> str:
    """Digest of a JSON-compatible value with sorted keys."""
    return xxhash.xxh3_64_hexdigest(orjson.dumps(data, option=orjson.OPT_SORT_KEYS))


def pair_seed(a: int, b: int) -> int:
    """Order-independent 64-bit seed for an unordered pair of ids."""
    low, high = sorted((a, b))
    return xxhash.xxh3_64_intdigest(f"{low}:{high}".encode())
