#!/usr/bin/env python3
"""Random-game campaign: solver vs enumerative oracle, strategy check, operator check."""
import argparse

import numpy as np

from stochsynth.game import MODES, combined_apre, explicit_combined_apre, explicit_game
from stochsynth.oracle import enumerative_oracle, random_product
from stochsynth.solver import solve_parity


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--games", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-states", type=int, default=8)
    ap.add_argument("--max-inputs", type=int, default=2)
    ap.add_argument("--max-priority", type=int, default=4)
    ap.add_argument("--max-over", type=int, default=3)
    a = ap.parse_args()
    rng = np.random.default_rng(a.seed)
    win_bad = strat_bad = op_bad = 0
    first = None
    for i in range(a.games):
        p = random_product(rng, a.max_states, a.max_inputs, a.max_priority, a.max_over)
        g = explicit_game(p)
        r = solve_parity(p)
        ref = enumerative_oracle(g)
        if not np.array_equal(r.winning, ref):
            win_bad += 1
            first = first if first is not None else i
        fixed = enumerative_oracle(g, strategy=np.where(r.winning, r.strategy, -1))
        strat_bad += int(np.any(r.winning & ~fixed))
        y = rng.random(p.n_states) < 0.6
        z = y & (rng.random(p.n_states) < 0.5)
        for m in MODES:
            op_bad += not np.array_equal(combined_apre(p, y, z, m), explicit_combined_apre(g, y, z, m))
    print(f"{a.games} games: {win_bad} winning-set mismatches, {strat_bad} strategies not winning, "
          f"{op_bad} operator mismatches")
    if first is not None:
        print(f"first mismatch at game {first}")
    return 0 if win_bad == strat_bad == op_bad == 0 else 4


if __name__ == "__main__":
    raise SystemExit(main())
