#!/usr/bin/env python3
"""Regenerate tests/golden/*.json.

Goldens are written only after the network passes grad_check, so a stored
output is never produced by a broken forward/backward pair.
"""

from pathlib import Path

import numpy as np

from shapbench import numkit
from shapbench.blackbox import Model, save_model
from shapbench.rng import make_rng
from shapbench.serialize import write_json

OUT = Path(__file__).resolve().parent.parent / "tests" / "golden"


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    rng = make_rng(1234, "golden")
    net = numkit.dense_net([2, 64, 64, 2], "relu", "softmax", 0.0, rng=rng)
    x = make_rng(1234, "golden-input").standard_normal((5, 2))
    report = numkit.grad_check(net, x, rng=np.random.default_rng(0))
    if not report.passed(1e-4):
        raise SystemExit(f"grad check failed ({report.max_error:.3g}); not writing goldens")
    write_json(OUT / "forward_2x64x64x2.json", {
        "net": net.to_dict(),
        "input": x,
        "output": numkit.predict(net, x),
    })
    model = Model.from_net(net, ["a", "b"])
    save_model(model, OUT / "model_2x64x64x2.json")
    write_json(OUT / "model_probe.json", {"input": x, "proba": model.predict_proba(x)})
    print(f"wrote goldens to {OUT} (grad check max error {report.max_error:.2e})")


if __name__ == "__main__":
    main()
