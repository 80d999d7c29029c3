"""Context trees need ever more contexts on the even process; CSSR does not.

The even process is not Markov of any finite order, so a context tree keeps
splitting as the history bound grows.  On a process whose states are each
defined by one suffix, the two methods agree.
"""

import warnings

from cssr import CssrConfig, build_parse_tree, even_process, run_cssr, seven_state_process
from cssr.baselines import vlmm_learn

warnings.simplefilter("ignore")

for name, source in (("even", even_process()), ("seven-state", seven_state_process())):
    x = source.simulate(100_000, seed=2)
    print(f"{name} process, N=100000")
    for L in (2, 4, 6, 8, 10):
        contexts = len(vlmm_learn(build_parse_tree(x, L, k=source.k), L))
        states = run_cssr(x, CssrConfig(L), source.alphabet).machine.n_states
        print(f"  L_max={L:>2}: VLMM {contexts:>3} contexts, CSSR {states} states")
