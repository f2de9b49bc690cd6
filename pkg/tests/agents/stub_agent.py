"""A deterministic external-protocol agent for tests.

Reads ``EVAL <base64>`` lines and answers per --mode:

    constant      fixed QVALUES regardless of state
    planted       frame agent: q of action "up" tracks the intensity of the
                  pixel at (--px, --py); other actions fixed (needs --width
                  and --height to decode the raw payload)
    echo-error    reply "ERR boom" to every request
    malformed     reply garbage
    empty         reply "QVALUES" with no actions
    duplicate     reply with a repeated action id
    quit          exit immediately (broken pipe tests)
"""

import argparse
import base64
import sys

from qsaliency.gateway import format_qvalues_reply
from qsaliency.image import Frame


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--mode", default="constant")
    parser.add_argument("--width", type=int, default=0)
    parser.add_argument("--height", type=int, default=0)
    parser.add_argument("--px", type=int, default=0)
    parser.add_argument("--py", type=int, default=0)
    args = parser.parse_args()

    if args.mode == "quit":
        return 3

    for raw in sys.stdin:
        line = raw.strip()
        if not line.startswith("EVAL "):
            print("ERR bad request", flush=True)
            continue
        blob = base64.b64decode(line[len("EVAL "):])
        if args.mode == "constant":
            print(format_qvalues_reply([("up", 1.0), ("down", 0.5), ("left", 0.25)]), flush=True)
        elif args.mode == "planted":
            frame = Frame.from_bytes(blob, args.width, args.height)
            q_up = 4.0 * float(frame.pixels[args.py, args.px])
            print(
                format_qvalues_reply([("up", q_up), ("down", 0.5), ("left", 0.25)]),
                flush=True,
            )
        elif args.mode == "echo-error":
            print("ERR boom", flush=True)
        elif args.mode == "malformed":
            print("WHAT even is this", flush=True)
        elif args.mode == "empty":
            print("QVALUES", flush=True)
        elif args.mode == "duplicate":
            print("QVALUES up:1.0 up:2.0", flush=True)
        else:
            print("ERR unknown mode", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
