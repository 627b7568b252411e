"""Serve a saved built-in model over the stdin/stdout wire protocol.

    python -m shapkit.serve model.json
"""
import argparse

from .blackbox import load_model, serve


def main(argv=None):
    parser = argparse.ArgumentParser(prog="python -m shapkit.serve")
    parser.add_argument("model", help="JSON model dump written by save_model")
    args = parser.parse_args(argv)
    serve(load_model(args.model))


if __name__ == "__main__":
    main()
