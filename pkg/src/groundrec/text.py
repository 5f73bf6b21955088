"""Shared tokenizer: lowercase, split on non-alphanumerics, drop empties."""

import re

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text):
    return _TOKEN_RE.findall(text.lower())
