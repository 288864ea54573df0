import json
import os
import subprocess
import sys

import pytest

from mscr import _accel

PROBE = """
import json
from mscr import _accel, classifiers
from mscr.classifiers import ModelSpec
from mscr.dataset import synth_2d
from mscr.separation import min_class_separation
ds = synth_2d("two_moons", 300, 0.1, seed=3)
sep = min_class_separation(ds, "l2")
model = classifiers.train(ModelSpec("random_forest", rf_trees=6, seed=2), ds)
pred = classifiers.predict(model, ds.features[::7]).tolist()
print(json.dumps({"backend": _accel.backend_name(), "two_r": sep.two_r,
                  "witness": list(sep.witness), "pred": pred}))
"""


def probe(flag):
    env = dict(os.environ)
    env.pop("MSCR_DISABLE_NUMBA", None)
    if flag is not None:
        env["MSCR_DISABLE_NUMBA"] = flag
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


@pytest.fixture(scope="module")
def compiled():
    return probe(None)


@pytest.mark.parametrize("flag", ["1", "true", "YES"])
def test_flag_selects_numpy_backend_with_identical_results(compiled, flag):
    fallback = probe(flag)
    assert compiled["backend"] == "numba"
    assert fallback["backend"] == "numpy"
    assert {k: v for k, v in fallback.items() if k != "backend"} == \
        {k: v for k, v in compiled.items() if k != "backend"}


def test_falsy_flag_keeps_numba():
    assert probe("0")["backend"] == "numba"


def test_njit_fallback_decorator_is_transparent(monkeypatch):
    monkeypatch.setattr(_accel, "numba", None)

    @_accel.njit(cache=False)
    def f(x):
        return x + 1

    assert f(1) == 2
    assert _accel.njit(len) is len
