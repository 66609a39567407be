"""Generate the packaged (400, 200) column-weight-3 parity-check matrix.

Runs PEG under successive seeds until the result has no length-4 cycles and
full GF(2) rank, then writes src/scmasim/data/ldpc_400_200.alist.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from scmasim import ldpc

N_COLS, N_ROWS, COL_W = 400, 200, 3
OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "scmasim" / "data" / "ldpc_400_200.alist"


def main():
    for seed in range(64):
        rng = np.random.default_rng(20240 + seed)
        H = ldpc.peg_construct(N_COLS, N_ROWS, COL_W, rng)
        rank = ldpc.gf2_rank(H)
        four = ldpc.has_four_cycle(H)
        print(f"seed {seed}: rank {rank}/{N_ROWS}, 4-cycles {four}, "
              f"row weights {np.bincount(H.row_weights).tolist()}")
        if rank == N_ROWS and not four:
            OUT.parent.mkdir(parents=True, exist_ok=True)
            ldpc.save_alist(H, OUT)
            print(f"wrote {OUT}")
            return 0
    print("no acceptable matrix found", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
