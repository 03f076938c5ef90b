"""
Spectral network against a fully connected baseline
===================================================

One seed of the synthetic benchmark: class information lives in smooth
patterns on a 256-node graph. We train a fully connected net, a spectral net
on the generating graph, one on a graph estimated by a proxy network, and one
on a randomly relabelled copy of that estimate. Takes about half a minute.
"""
import sys

from specnet.benchmark import BenchmarkSettings, run_seed

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
s = BenchmarkSettings()
r = run_seed(seed, s)

print(f"{s.baseline:12s} params {r.baseline_params:6d}  accuracy {r.baseline:.3f}")
print(f"{s.spectral:12s} params {r.spectral_params:6d}  accuracy {r.spectral:.3f}  (true graph)")
print(f"{'':12s} {'':13s} accuracy {r.supervised:.3f}  (estimated graph)")
print(f"{'':12s} {'':13s} accuracy {r.permuted:.3f}  (permuted graph)")
print(f"{r.seconds:.1f}s")
