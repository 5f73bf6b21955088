"""Run manifests: enough context beside each artifact to reproduce it.

Line-oriented key=value: the subcommand, every flag, a sha256 digest per
input file, and the package version. Re-running the recorded command on the
same inputs must reproduce byte-identical outputs.
"""

from __future__ import annotations

import hashlib

from . import __version__


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command, flags, inputs):
    lines = [f"command={command}", f"version={__version__}"]
    for key in sorted(flags):
        lines.append(f"flag.{key}={flags[key]}")
    for name, in_path in sorted(inputs.items()):
        lines.append(f"input.{name}={sha256_file(in_path)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
