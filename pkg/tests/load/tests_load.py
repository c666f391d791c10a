import sys
import tempfile
import time

from pathlib import Path

from exit_wave.config import load_config
from exit_wave.golden import check_golden
from exit_wave.pipeline import LOG_NAME, reconstruct, simulate

ROOT = Path(__file__).resolve().parents[2]
CONFIG = ROOT / "configs" / "desk.ini"
GOLDEN = ROOT / "goldens" / "desk"

DATA_DROP = 1e-3
TRANSLATION_LIMIT_PX = 0.05
WAVE_LIMIT = 1e-2
REGULARIZER_SPREAD = 10.0


def check(records):
    """Pass/fail per acceptance item of the desk self-consistency run."""
    energies = [r.energy.total for r in records]
    data = [r.energy.data_term for r in records]
    first_low = next((i for i, d in enumerate(data) if d <= DATA_DROP * data[0]), None)
    regularizers = [r.energy.regularizer for r in records[:first_low + 1]] if first_low is not None else []
    final = records[-1]
    return {
        "monotone energy": all(b <= a for a, b in zip(energies, energies[1:])),
        "data term drop": first_low is not None,
        "translation error": final.trans_err_sup_px is not None and final.trans_err_sup_px <= TRANSLATION_LIMIT_PX,
        "wave error": final.wave_err_euc is not None and final.wave_err_euc <= WAVE_LIMIT,
        "steady regularizer": bool(regularizers) and min(regularizers) > 0
        and max(regularizers) / min(regularizers) < REGULARIZER_SPREAD,
    }


def main():
    config = load_config(CONFIG)
    logs = []
    start_total = time.time()
    with tempfile.TemporaryDirectory(prefix="exit-wave-load-") as tmp:
        for attempt in ("a", "b"):
            root = Path(tmp) / attempt
            start = time.time()
            simulate(config, root)
            result = reconstruct(config, root / "series", directory=root / "reconstruction")
            logs.append((root / "reconstruction" / LOG_NAME).read_bytes())
            print(f"run {attempt}: {result.stop_reason.value} after {result.records[-1].iteration} iterations "
                  f"in {time.time() - start:.1f} s")  # noqa: E231
    outcome = check(result.records)
    outcome["identical logs"] = logs[0] == logs[1]
    if GOLDEN.is_dir():
        mismatches = check_golden(GOLDEN)
        print(f"golden: {len(mismatches)} mismatches against {GOLDEN}")
        outcome["matches golden"] = not mismatches
    else:
        print(f"golden: {GOLDEN} is missing, run scripts/regen_goldens.sh")
        outcome["matches golden"] = False

    final = result.records[-1]
    print(f"data term: {result.records[0].energy.data_term:.3e} -> {final.energy.data_term:.3e}")  # noqa: E231
    print(f"translation error: {final.trans_err_sup_px:.4f} px, wave error: {final.wave_err_euc:.3e}")  # noqa: E231
    for name, passed in outcome.items():
        print(f"{name}: {'PASS' if passed else 'FAIL'}")  # noqa: E231
    print(f"Total time: {time.time() - start_total:.1f} s")  # noqa: E231
    return 0 if all(outcome.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
