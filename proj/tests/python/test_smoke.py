"""Smoke tests for the python bindings (run via ctest)."""

import json
import sys

import _xbofsim as xb


def test_bom_cost():
    assert abs(xb.bom_cost(2.0, "conv") - 147.60) < 1e-9
    assert abs(xb.bom_cost(2.0, "xbof") - 119.52) < 1e-9


def test_redirect_ratio():
    ratio, p = xb.redirect_ratio(5000, 5000, 2.0, 2.0, 1.0, 3.0)
    assert abs(ratio - 3.0) < 1e-12
    assert abs(p - 0.25) < 1e-12


def test_descriptor_roundtrip():
    raw = xb.encode_descriptor(True, 1, 0xFF, 512, 0xDEADBEEF12345678)
    back = xb.decode_descriptor(raw)
    assert back["valid"] is True
    assert back["type"] == 1
    assert back["borrower_id"] == 0xFF
    assert back["amount"] == 512
    assert back["info"] == 0xDEADBEEF12345678
    assert len(raw) == 16


def test_shards():
    est = xb.ShardsEstimator(1.0)
    for i in range(5000):
        est.access(i % 8)
    mrc = est.miss_ratio_curve(10)
    assert mrc[0] == 1.0
    assert mrc[8] < 0.01
    assert all(a >= b for a, b in zip(mrc, mrc[1:]))


def test_run_scenario_deterministic():
    cfg = json.loads(xb.preset_json("micro-read-64k"))
    cfg["duration_us"] = 15000
    cfg["warmup_us"] = 5000
    a = xb.run_scenario(json.dumps(cfg), seed=7, variant="conv")
    b = xb.run_scenario(json.dumps(cfg), seed=7, variant="conv")
    assert a == b
    report = json.loads(a)
    assert report["devices"][0]["reads"] > 0


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"ok {test.__name__}")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    sys.exit(main())
