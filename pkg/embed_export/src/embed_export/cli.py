"""``embed-export --raw DIR --recipe recipe.json --out DIR``"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ExportError
from .export import ExportRecipe, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="embed-export")
    parser.add_argument("--raw", required=True, help="raw dataset root")
    parser.add_argument("--recipe", required=True, help="ExportRecipe JSON")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)
    try:
        recipe = ExportRecipe.load(args.recipe)
        summary = export(args.raw, recipe, args.out)
    except (ExportError, OSError, json.JSONDecodeError) as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
