"""Regenerate the bundled rate-3/4 parity-check code asset.

n = 1992 is divisible by 4, 6, 8, and 12 coded bits per symbol, so whole
codewords map onto whole symbols for every supported constellation except
M = 1024. Variable degree 3 with 498 checks gives a regular (3, 12) graph.
The seed is scanned until the parity-check matrix has full rank, so the
systematic encoder exists.

Run from the repository root:  python tools/generate_bundled_code.py
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from qcilink.coding import BUNDLED_CODE_NAME, gf2_rank, save_alist  # noqa: E402
from qcilink.peg import build_peg_code  # noqa: E402

N, CHECKS, DV = 1992, 498, 3
DEST = Path(__file__).resolve().parents[1] / "src" / "qcilink" / "codes" / BUNDLED_CODE_NAME


def main() -> None:
    for seed in range(16):
        t0 = time.time()
        code = build_peg_code(N, CHECKS, DV, seed=seed)
        rank = gf2_rank(code.dense_matrix())
        print(f"seed {seed}: rank {rank}/{CHECKS} ({time.time() - t0:.1f}s)")
        if rank == CHECKS:
            save_alist(code, DEST)
            print(f"wrote {DEST} (n={code.n}, k={code.k}, rate={code.rate:.3f})")
            return
    raise SystemExit("no full-rank construction found in 16 seeds")


if __name__ == "__main__":
    main()
