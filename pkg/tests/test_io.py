import json

import numpy as np

from pointdos.io import ResultCache, dumps, format_csv, read_csv, to_jsonable, tool_version, write_csv


def test_jsonable_handles_numpy_and_complex():
    out = to_jsonable({"a": np.float64(1.5), "b": 1 + 2j, "c": np.arange(2), "d": np.inf})
    assert out == {"a": 1.5, "b": {"re": 1.0, "im": 2.0}, "c": [0, 1], "d": "inf"}
    json.loads(dumps(out))


def test_csv_roundtrip_is_exact(tmp_path):
    rows = [{"E": -1.0 / 3.0, "ok": True}, {"E": 1e-300, "ok": False}]
    path = write_csv(tmp_path / "t.csv", rows, ("E", "ok"), {"config": {"d": 1}})
    meta, back = read_csv(path)
    assert meta == {"config": {"d": 1}}
    assert float(back[0]["E"]) == -1.0 / 3.0
    assert back[1]["ok"] == "false"
    assert path.read_text() == format_csv(rows, ("E", "ok"), {"config": {"d": 1}})


def test_cache_roundtrip_and_corruption(tmp_path):
    cache = ResultCache(tmp_path)
    key = ResultCache.key({"d": 1}, "sweep")
    assert key != ResultCache.key({"d": 2}, "sweep")
    assert cache.get(key) is None
    cache.put(key, {"a.csv": "x,y\n"})
    assert cache.get(key) == {"a.csv": "x,y\n"}
    entry = json.loads((tmp_path / f"{key}.json").read_text())
    entry["payload"] = entry["payload"].replace("x", "z")
    (tmp_path / f"{key}.json").write_text(json.dumps(entry))
    assert cache.get(key) is None


def test_tool_version_is_stable():
    assert tool_version() == tool_version()
    assert len(tool_version()) == 12
