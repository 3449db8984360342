import math
import subprocess
from fractions import Fraction

import numpy as np
import pytest

from toric_szego.reporting import csv_text, dumps, fmt_float, git_blob_hash


def test_floats_have_seventeen_digits():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert fmt_float(1.0) == "1"
    assert fmt_float(float("inf")) == "Infinity"
    assert fmt_float(float("nan")) == "NaN"


@pytest.mark.parametrize("x", [0.1, 1 / 3, math.pi, 1e-300, -2.5e17])
def test_float_round_trip(x):
    assert float(fmt_float(x)) == x


def test_dumps_handles_numpy_fraction_and_complex():
    text = dumps({"a": np.float64(0.5), "b": Fraction(1, 3), "c": 1 + 2j, "d": np.arange(2), "e": [], "f": {}})
    assert '"b": "1/3"' in text
    assert '"re": 1' in text and '"im": 2' in text
    assert '"d": [0, 1]' in text
    assert text.endswith("\n")


def test_dumps_rejects_unknown_objects():
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_csv_text():
    assert csv_text(["a", "b"], [[1, 0.1], ["x", ""]]) == "a,b\n1,0.10000000000000001\nx,\n"


def test_git_blob_hash_matches_git(tmp_path):
    data = b'{"vertices": [[0], [1]]}\n'
    path = tmp_path / "p.json"
    path.write_bytes(data)
    try:
        out = subprocess.run(["git", "hash-object", str(path)], capture_output=True, text=True, check=True)
    except (OSError, subprocess.CalledProcessError):
        pytest.skip("git unavailable")
    assert git_blob_hash(data) == out.stdout.strip()
