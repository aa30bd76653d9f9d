"""Regenerate the committed case files from the deterministic builders.

Run from the repo root: python3 tools/build_cases.py
"""

from pathlib import Path

from gridops.casegen import education_case, make_case
from gridops.model import case_to_json

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    cases = ROOT / "cases"
    cases.mkdir(exist_ok=True)
    (cases / "coastal13.json").write_text(case_to_json(education_case(), indent=2) + "\n")
    (cases / "synthetic200.json").write_text(case_to_json(make_case(200, seed=11), indent=2) + "\n")
    print("wrote", *[p.name for p in sorted(cases.glob("*.json"))])


if __name__ == "__main__":
    main()
