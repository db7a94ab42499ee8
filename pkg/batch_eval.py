#!/usr/bin/env python3
import csv
import sys
from pathlib import Path

from imcflab.errors import LabError
from imcflab.scenario import load_scenario, run

# Tolerance scales each scenario is re-run under
SCALES = [0.5, 1.0, 2.0]


def run_batch(input_csv: str, output_csv: str) -> int:
    in_path = Path(input_csv)
    if not in_path.exists():
        print(f"Input CSV not found: {input_csv}")
        return 1

    rows = []
    with in_path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for row in reader:
            config = (row.get("config") or "").strip()
            if not config:
                print(f"Skipping row with missing config: {row}")
                continue
            rows.append({"config": config, "out": (row.get("out") or "").strip()})

    if not rows:
        print("No valid rows found in input CSV.")
        return 0

    fieldnames = ["config", "experiment"]
    for scale in SCALES:
        fieldnames += [f"exit_{scale}", f"hard_failures_{scale}", f"worst_margin_{scale}"]

    out_path = Path(output_csv)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", newline="", encoding="utf-8") as f_out:
        writer = csv.DictWriter(f_out, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()

        for idx, row in enumerate(rows, start=1):
            out_row = {"config": row["config"], "experiment": ""}
            print(f"\n===== Row {idx}: {row['config']} =====")
            for scale in SCALES:
                print(f"\n--- Tolerance scale {scale} ---")
                try:
                    sc = load_scenario(row["config"])
                    out_row["experiment"] = sc.experiment
                    out_dir = Path(row["out"] or out_path.parent / f"batch_{idx}") / f"scale_{scale}"
                    code, summary = run(sc, out_dir, tolerance_scale=scale)
                    out_row[f"exit_{scale}"] = code
                    out_row[f"hard_failures_{scale}"] = ";".join(summary.get("hard_failures", []))
                    wm = summary.get("worst_margin")
                    out_row[f"worst_margin_{scale}"] = "" if wm is None else f"{wm:.17g}"
                    if summary.get("error"):
                        out_row[f"hard_failures_{scale}"] = f"[ERROR: {summary['error']}]"
                except (LabError, OSError) as e:
                    print(f"[ERROR] Failed for scale {scale}: {e}")
                    out_row[f"exit_{scale}"] = ""
                    out_row[f"hard_failures_{scale}"] = f"[ERROR: {e}]"
                    out_row[f"worst_margin_{scale}"] = ""
            writer.writerow(out_row)

    print(f"\nDone. Results written to: {output_csv}")
    return 0


def main():
    if len(sys.argv) < 3:
        print("Usage: python batch_eval.py <input_csv> <output_csv>")
        print("Example: python batch_eval.py scenarios.csv scenarios_results.csv")
        sys.exit(1)
    sys.exit(run_batch(sys.argv[1], sys.argv[2]))


if __name__ == "__main__":
    main()
