"""Recover the even process from a sample and compare it with the true machine.

Run with ``python demos/even_recovery.py``.
"""

import warnings

import numpy as np

from cssr import CssrConfig, even_process, run_cssr

source = even_process()
print("true machine:")
print(source.to_text())

for n in (100, 1_000, 10_000, 100_000):
    x = source.simulate(n, seed=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_cssr(x, CssrConfig(lmax=6), source.alphabet)
    m = res.machine
    d = np.abs(m.word_probabilities(10) - source.word_probabilities(10)).sum()
    print(f"N={n:>7}: {m.n_states} states, entropy rate {m.entropy_rate():.4f} bits "
          f"(true {source.entropy_rate():.4f}), TV over length-10 words {d:.4f}")

print("\nlearned machine at N=100000:")
print(m.to_text())

# the learned machine synchronizes on any history containing an A
for history in ("BBA", "ABBB", "BBBB"):
    s = m.epsilon_map(history)
    print(f"history {history}: state {m.names[s] if s is not None else 'unknown (parity not yet seen)'}")
