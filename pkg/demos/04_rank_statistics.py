"""
How often is the relaxation tight?

With one user per group the relaxed optimum is essentially always rank
one.  As groups grow, the probability drops and Gaussian randomization is
needed; the average rank of the loose solutions stays close to one.
"""

import numpy as np

from mcbeam import SystemConfig, generate_channels
from mcbeam.centralized import check_rank, solve_relaxation

B, G, A = 2, 4, 24
seeds = range(20)
print("U/G  gamma  rank-one %  avg rank (loose)")
for upg in (1, 3, 6):
    for gamma_db in (0.0, 10.0):
        cfg = SystemConfig.symmetric(B, G, G * upg, A, gamma_db=gamma_db)
        ranks = []
        for seed in seeds:
            W, _ = solve_relaxation(generate_channels(cfg, seed), cfg)
            ranks.append([check_rank(w) for w in W])
        ranks = np.array(ranks)
        one = np.all(ranks == 1, axis=1)
        avg = f"{np.mean(ranks[~one].sum(axis=1) / G):.3f}" if (~one).any() else "-"
        print(f"{upg:3d}  {gamma_db:5.1f}  {100 * one.mean():10.1f}  {avg:>8s}")
