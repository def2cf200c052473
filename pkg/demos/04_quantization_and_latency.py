"""Int8 weight quantization: footprint and streaming latency.

Quantizes a bone-conduction model to 8-bit weights with per-tensor scales,
compares serialized sizes, verifies the worst-case round-trip error bound,
and measures per-frame streaming inference time for both precisions.

Run:  python demos/04_quantization_and_latency.py
"""

import tempfile
import time
from pathlib import Path

import numpy as np

from bcvad import (
    RecurrentState,
    build_model,
    count_params,
    forward_step,
    quantize_weights,
    save_model,
)

model = build_model("bc", seed=5)
quantized = quantize_weights(model)

with tempfile.TemporaryDirectory() as tmp:
    float_path = Path(tmp) / "bc.weights"
    int8_path = Path(tmp) / "bc.int8.weights"
    save_model(float_path, model)
    save_model(int8_path, quantized)
    print(f"parameters: {count_params(model)}")
    print(f"float32 weight file: {float_path.stat().st_size:6d} bytes")
    print(f"int8 weight file:    {int8_path.stat().st_size:6d} bytes")

worst = 0.0
for name, w in model.params.items():
    err = np.max(np.abs(quantized.params[name] - w))
    worst = max(worst, err / quantized.scales[name] if quantized.scales[name] else 0.0)
print(f"worst round-trip error: {worst:.3f} x scale (bound is 0.5)")

rng = np.random.default_rng(0)
frames = rng.standard_normal((2000, 32)).astype(np.float32)
for tag, m in (("float32", model), ("int8", quantized)):
    state = RecurrentState.zero(m)
    times = np.empty(len(frames))
    for i, frame in enumerate(frames):
        t0 = time.perf_counter()
        prob, state = forward_step(m, frame, state)
        times[i] = (time.perf_counter() - t0) * 1e3
    print(f"{tag:8s}: per-frame inference mean={times.mean():.3f} ms "
          f"p95={np.percentile(times, 95):.3f} ms (budget: one 10 ms hop)")
