from pathlib import Path

import pytest

from densenav.utils.hashing import get_file_hash, get_json_hash, get_tree_hash, pair_seed


class TestFileHash:
    def test_hash_is_deterministic(self, tmp_path: Path) -> None:
        path = tmp_path / "model.json"
        path.write_bytes(b"weights" * 20_000)

        assert get_file_hash(path) == get_file_hash(path)

    def test_different_content_produces_different_hash(self, tmp_path: Path) -> None:
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        first.write_bytes(b"Content A" * 1000)
        second.write_bytes(b"Content B" * 1000)

        assert get_file_hash(first) != get_file_hash(second)

    def test_nonexistent_file_raises_error(self, tmp_path: Path) -> None:
        with pytest.raises(FileNotFoundError):
            get_file_hash(tmp_path / "does_not_exist.json")


class TestTreeHash:
    def test_order_independent(self, tmp_path: Path) -> None:
        paths = []
        for name in ("a.py", "b.py", "c.py"):
            path = tmp_path / name
            path.write_text(name)
            paths.append(path)

        assert get_tree_hash(paths, tmp_path) == get_tree_hash(reversed(paths), tmp_path)

    def test_renaming_changes_digest(self, tmp_path: Path) -> None:
        path = tmp_path / "a.py"
        path.write_text("x = 1\n")
        before = get_tree_hash([path], tmp_path)

        renamed = path.rename(tmp_path / "b.py")

        assert get_tree_hash([renamed], tmp_path) != before


class TestJsonHash:
    def test_key_order_ignored(self) -> None:
        assert get_json_hash({"a": 1, "b": [1, 2]}) == get_json_hash({"b": [1, 2], "a": 1})

    def test_values_matter(self) -> None:
        assert get_json_hash({"seed": 1}) != get_json_hash({"seed": 2})


class TestPairSeed:
    def test_symmetric(self) -> None:
        assert pair_seed(3, 8) == pair_seed(8, 3)

    def test_distinct_pairs(self) -> None:
        assert len({pair_seed(a, b) for a in range(10) for b in range(a + 1, 10)}) == 45
