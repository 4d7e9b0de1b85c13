import json
from pathlib import Path
from typing import Iterable

def write_file(fname, content: str):
    path = Path(fname)
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps artifacts byte-identical across platforms
    with open(path, "w", newline="") as f:
        f.write(content)

def write_lines(fname, lines: Iterable[str]):
    write_file(fname, "".join(f"{line}\n" for line in lines))

def write_json_file(fname, data):
    """Writes a JSON document with sorted keys so reruns produce identical bytes"""

    write_file(fname, json.dumps(data, indent=4, sort_keys=True) + "\n")

def read_lines(fname) -> list[str]:
    with open(fname, "r") as f:
        return [line for line in f.read().splitlines() if line.strip()]
