"""
Replaying three Bernoulli sample paths through the stepdown procedure
=====================================================================

Three streams, Ber(.4) null vs Ber(.6) alternative, one shared critical-value
ladder. Each step adds +-log(1.5) to a stream's log-likelihood ratio.
"""

import numpy as np

from seqmt import ArraySource, CriticalLadder, ProcedureConfig, StandardizedLadder, run_stepdown
from seqmt.procedures import decisions_to_csv
from seqmt.statistics import SimpleLLR, SimpleLLRStatistic

A = [-2.34, -1.94, -1.27]
B = [1.93, 1.53, 0.86]

# every stream shares the ladder, so standardization is the identity
ladder = StandardizedLadder.common(CriticalLadder(A, B))
stat = SimpleLLRStatistic(SimpleLLR(h={0: 0.6, 1: 0.4}, g={0: 0.4, 1: 0.6}))

paths = {
    1: [[0, 1, 1, 1, 1, 1, 1], [1, 0, 1, 1, 1, 1, 1], [0, 1, 0, 0, 1, 0, 0, 0, 0, 0]],
    2: [[0, 1, 1, 1, 1, 1, 1], [1, 0, 0, 1, 1, 1, 1, 1], [0, 1, 0, 0, 0, 0, 0, 0]],
    3: [[1, 0, 1, 1, 1, 1, 1], [1, 1, 1, 0, 1, 1, 1], [0, 1, 0, 1, 1, 1, 1]],
}

# %%
# Stage-by-stage trace: which boundary pair was live and what it decided.
states = []
for k, data in paths.items():
    state = run_stepdown(ArraySource(data), ProcedureConfig("stepdown", ladder, tie_seed=0, trace=True), stat)
    states.append((k, state))
    print(f"path {k}")
    for t in state.trace:
        vals = ", ".join(f"{v:+.2f}" for v in t["values"])
        print(f"  stage {t['stage']}: n={t['n']:2d}  (a, b)=({t['a']:+.2f}, {t['b']:+.2f})  "
              f"sorted values [{vals}]  reject {t['m']}, accept {t['m_prime']}")

# %%
# The decision log in the CSV layout the command-line tool writes.
print()
print(decisions_to_csv(states))

# Path 1, stream 3 walks down in steps of log 1.5 until it passes A_1.
print(np.round(np.cumsum(np.where(np.array(paths[1][2]) == 1, 1, -1)) * np.log(1.5), 2))
