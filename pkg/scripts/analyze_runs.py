import glob
import json
import os
import statistics
from collections import defaultdict


def analyze_manifests(manifest_dir):
    files = glob.glob(os.path.join(manifest_dir, "*.manifest.json"))

    # Sort files by modification time (newest first)
    files.sort(key=os.path.getmtime, reverse=True)

    stats = defaultdict(lambda: {"total": 0, "exit_codes": defaultdict(int), "durations": [], "gaps": [], "errors": defaultdict(int)})

    print(f"Analyzing {len(files)} run manifests...\n")

    for file_path in files:
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                manifest = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            print(f"Skipping {os.path.basename(file_path)}: {e}")
            continue

        data = stats[manifest.get("command", "unknown")]
        data["total"] += 1
        data["exit_codes"][manifest.get("exit_code", -1)] += 1
        data["durations"].append(manifest.get("wall_time", 0.0))
        report = manifest.get("report") or {}
        gap = report.get("gap")
        if isinstance(gap, (int, float)) and gap != float("inf"):
            data["gaps"].append(gap)
        for failure in (manifest.get("metrics") or {}).get("failures", []):
            data["errors"][failure.get("type", "unknown")] += 1

    for command, data in sorted(stats.items()):
        print(f"\n--- {command.upper()} ---")
        print(f"Total Runs: {data['total']}")
        ok = data["exit_codes"].get(0, 0)
        print(f"Exit 0: {ok}/{data['total']} ({ok / data['total'] * 100:.1f}%)")
        for code, count in sorted(data["exit_codes"].items()):
            if code != 0:
                print(f"  exit {code}: {count}")

        if data["durations"]:
            print(f"Avg Duration: {statistics.mean(data['durations']):.2f}s")
            print(f"Max Duration: {max(data['durations']):.2f}s")
        if data["gaps"]:
            print(f"Worst Final Gap: {max(data['gaps']):.3e}")

        if data["errors"]:
            print("\nError Types:")
            for err, count in sorted(data["errors"].items(), key=lambda x: x[1], reverse=True):
                print(f"  - {err}: {count}")


if __name__ == "__main__":
    analyze_manifests("logs/manifests")
