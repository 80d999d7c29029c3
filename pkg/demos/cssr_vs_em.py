"""Compare CSSR with hidden Markov models chosen by cross-validated EM.

Both learn from the same 10^4 symbols of the even process; EM picks its
number of hidden states on an independent test sequence.
"""

import warnings

import numpy as np

from cssr import CssrConfig, even_process, run_cssr
from cssr.baselines import cross_validate, hmm_word_probabilities

warnings.simplefilter("ignore")
source = even_process()
truth = source.word_probabilities(10)

for trial in range(3):
    train = source.simulate(10_000, seed=10 + trial)
    test = source.simulate(10_000, seed=100 + trial)
    m = run_cssr(train, CssrConfig(5), source.alphabet).machine
    cv = cross_validate(train, test, range(1, 7), restarts=3, seed=trial)
    d_cssr = np.abs(m.word_probabilities(10) - truth).sum()
    d_em = np.abs(hmm_word_probabilities(cv.model, 10) - truth).sum()
    print(f"trial {trial}: CSSR {m.n_states} states d={d_cssr:.4f} | "
          f"CV-EM {cv.n_states} states d={d_em:.4f}")
    for M, ll in sorted(cv.test_log_likelihood.items()):
        print(f"    M={M}: held-out log-likelihood {ll / len(test):.4f} nats/symbol")
