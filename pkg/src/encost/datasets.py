"""Reading and writing encoding records and descriptor files."""

import csv
import hashlib
import json
from pathlib import Path
from typing import Dict, Iterable, List

from .descriptors import DescriptorSet
from .errors import FormatError
from .models import EncodingRecord

RECORD_COLUMNS = ("sequence_id", "class_id", "width", "height", "n_frames", "fps_num", "fps_den",
                  "preset", "crf", "n_intra", "time_s", "energy_j")


def _opt(value, cast):
    value = (value or "").strip()
    return cast(value) if value else None


def read_records(path) -> List[EncodingRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"{path}: records CSV lacks columns {', '.join(sorted(missing))}")
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(EncodingRecord(
                    sequence_id=row["sequence_id"].strip(),
                    class_id=row["class_id"].strip(),
                    width=int(row["width"]),
                    height=int(row["height"]),
                    n_frames=int(row["n_frames"]),
                    fps_num=int(row["fps_num"]),
                    fps_den=int(row["fps_den"]),
                    preset=int(row["preset"]),
                    crf=int(row["crf"]),
                    n_intra=_opt(row["n_intra"], int),
                    time_s=float(row["time_s"]),
                    energy_j=_opt(row["energy_j"], float),
                ))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return records


def write_records(path, records: Iterable[EncodingRecord]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow([r.sequence_id, r.class_id, r.width, r.height, r.n_frames,
                             r.fps_num, r.fps_den, r.preset, r.crf,
                             "" if r.n_intra is None else r.n_intra, repr(r.time_s),
                             "" if r.energy_j is None else repr(r.energy_j)])


def save_descriptors(path, ds: DescriptorSet, extra: dict = None):
    data = ds.to_dict()
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_descriptors(path) -> Dict[str, DescriptorSet]:
    """Load one descriptor JSON file or every ``*.json`` in a directory."""
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    out = {}
    for f in files:
        try:
            ds = DescriptorSet.from_dict(json.loads(f.read_text()))
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"{f}: not a descriptor file ({exc})") from None
        out[ds.sequence_id] = ds
    return out


def file_digest(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        p = Path(p)
        files = sorted(p.glob("*.json")) if p.is_dir() else [p]
        for f in files:
            h.update(f.name.encode())
            h.update(f.read_bytes())
    return h.hexdigest()
