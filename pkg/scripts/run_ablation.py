"""Single-stage ablations on the snapshot-restore scenario.

Disables each of restructuring, filtering, hypothesis, investigation and
observer in turn and reports where the planted method lands.

    python scripts/run_ablation.py [--config fixtures/ablation_config.json] [--json]
"""

import argparse
import json
from pathlib import Path

from cogniloc.code_graph import build_graph, read_fixture
from cogniloc.front import load_bug_reports
from cogniloc.pipeline import STAGES, RunConfig, localize, make_backend

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
PLANTED = "admin.restoreSnapshot"


def planted_rank(state) -> int | None:
    ids = [sid for sid, _ in state.result.methods]
    return ids.index(PLANTED) + 1 if PLANTED in ids else None


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=str(FIXTURES / "ablation_config.json"))
    parser.add_argument("--json", action="store_true", help="print rows as JSON")
    args = parser.parse_args()

    graph = build_graph(read_fixture(FIXTURES / "hbase_graph.json"))
    bug = load_bug_reports(FIXTURES / "hbase_bugs.json")[0]
    cfg = RunConfig.load(args.config)
    backend = make_backend(cfg)

    rows = []
    for label, run_cfg in [("full", cfg)] + [(f"-{s}", cfg.with_disabled(s)) for s in STAGES]:
        state = localize(bug, graph, backend, run_cfg)
        rows.append({
            "variant": label,
            "rank": planted_rank(state),
            "top3": [sid for sid, _ in state.result.methods[:3]],
            "calls": sum(state.call_counter.values()),
        })
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'variant':<16}{'rank':>6}{'calls':>7}  top-3")
    for row in rows:
        rank = "-" if row["rank"] is None else row["rank"]
        print(f"{row['variant']:<16}{rank:>6}{row['calls']:>7}  {', '.join(row['top3'])}")


if __name__ == "__main__":
    main()
