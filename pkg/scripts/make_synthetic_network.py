"""Write a seeded random ReLU network and a matching problem file"""

import argparse
import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.encoding.problem import InverseProblem, save_problem
from src.network.io import save_network
from src.network.model import evaluate
from src.network.synthetic import random_network


def main():
    parser = argparse.ArgumentParser(description="Generate a synthetic network and problem")
    parser.add_argument("--inputs", type=int, default=2)
    parser.add_argument("--hidden", type=int, nargs="*", default=[4, 4], help="Hidden layer widths")
    parser.add_argument("--outputs", type=int, default=2)
    parser.add_argument("--targets", type=int, default=1, help="Number of simultaneous targets")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="examples_data/net.json")
    parser.add_argument("--problem-out", help="Problem file (default: <out>_problem.json)")
    args = parser.parse_args()

    net = random_network(args.inputs, args.hidden, args.outputs, seed=args.seed)
    out = Path(args.out)
    save_network(net, out)

    # targets are outputs of random designs, so the optimum is 0
    rng = np.random.default_rng(args.seed)
    targets = [evaluate(net, rng.uniform(0.0, 1.0, size=args.inputs)).tolist() for _ in range(args.targets)]
    problem = InverseProblem(targets=targets, lower=[0.0] * args.inputs, upper=[1.0] * args.inputs)
    problem_out = Path(args.problem_out or out.with_name(f"{out.stem}_problem.json"))
    save_problem(problem, problem_out)

    print(f"Network {net.widths} written to {out}")
    print(f"Problem with {len(targets)} target(s) written to {problem_out}")


if __name__ == "__main__":
    main()
