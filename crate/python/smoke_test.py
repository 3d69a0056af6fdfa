"""Smoke test for the encrl_py extension module.

Build and install it first, for example with
    pip install --no-build-isolation ./crates/py
then run this file with python.
"""

import math
import sys
import tempfile

import encrl_py as er


def check(cond, what):
    if not cond:
        sys.exit(f"smoke test failed: {what}")
    print(f"ok  {what}")


def main():
    names = [p["name"] for p in er.list_presets()]
    check({"desk", "paper-td0", "paper-z"} <= set(names), "presets listed")

    enc = er.Encryptor("desk", depth=2, seed=1)
    a = enc.encrypt([1.5, -2.0, 3.25])
    b = enc.encrypt([0.5, 4.0, -1.0])
    prod = enc.mul(a, b)
    got = enc.decrypt(prod)[:3]
    want = [0.75, -8.0, -3.25]
    err = max(abs(x - y) for x, y in zip(got, want))
    check(err <= prod.noise_epsilon, f"encrypted product within its bound ({err:.1e})")
    again = enc.load(prod.to_bytes())
    check(enc.decrypt(again)[:3] == got, "ciphertext bytes round trip")

    td = enc.td_update(0.5, -0.25, 0.125, 0.9, 1.0)
    check(abs(td - 0.534375) < 1e-6, "encrypted TD update")
    z = er.Encryptor("desk", depth=4, seed=2).z_update(0.75, 0.5, 0.25, 0.5)
    check(abs(z - (0.75 + 0.25 * (er.taylor_exp(-0.5, 5) * 0.5 - 0.75))) < 1e-6,
          "encrypted Z update")
    check(abs(er.taylor_exp(-0.5, 12) - math.exp(-0.5)) < 1e-12, "taylor_exp")

    vi = er.value_iteration(er.Config("vi-sync-noisy", eps=0.01, seed=4))
    check(vi["passed"] and abs(vi["bound"] - 0.1) < 1e-12, "noisy value iteration bound")

    cfg = er.Config("td0", preset="desk", max_updates=200, seed=5)
    out = er.learn(cfg)
    check(out["updates"] == 200 and out["max_error"] < 1e-3, "encrypted TD(0) shadow run")
    plain = er.learn(er.Config("td0", backend="exact", max_updates=200, seed=5))
    check(plain["fingerprint"] == out["fingerprint"], "same samples with and without encryption")

    with tempfile.TemporaryDirectory() as tmp:
        summary = er.run(er.Config("sarsa", max_updates=500), tmp)
        check(len(summary["files"]) >= 3, "experiment artifacts written")

    try:
        er.Config("z", preset="paper-td0").validate()
    except ValueError as e:
        check("depth" in str(e), "oversized circuit rejected")
    else:
        sys.exit("smoke test failed: oversized circuit accepted")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
