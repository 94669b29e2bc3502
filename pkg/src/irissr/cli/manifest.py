"""CSV manifests: ``path,subject,eye,sample`` with paths relative to the file."""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass

MANIFEST_HEADER = ("path", "subject", "eye", "sample")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # absolute
    subject: str
    eye: str
    sample: int

    @property
    def label(self) -> str:
        """Identity used for genuine/impostor decisions: each eye is its own class."""
        return f"{self.subject}/{self.eye}"

    @property
    def name(self) -> str:
        return os.path.basename(self.path)


def load_manifest(path, check_files: bool = True) -> list[ManifestEntry]:
    """Entries sorted by (subject, eye, sample); duplicates and missing files are errors."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != MANIFEST_HEADER:
            raise ManifestError(f"{path}: header must be {','.join(MANIFEST_HEADER)}")
        entries = []
        for line, row in enumerate(reader, start=2):
            try:
                sample = int(row["sample"])
            except (TypeError, ValueError):
                raise ManifestError(f"{path}:{line}: sample must be an integer") from None
            p = row["path"]
            full = p if os.path.isabs(p) else os.path.join(base, p)
            entries.append(ManifestEntry(os.path.normpath(full), row["subject"], row["eye"], sample))
    seen = set()
    for e in entries:
        key = (e.subject, e.eye, e.sample)
        if key in seen:
            raise ManifestError(f"{path}: duplicate entry {key}")
        seen.add(key)
        if check_files and not os.path.exists(e.path):
            raise ManifestError(f"{path}: missing image {e.path}")
    return sorted(entries, key=lambda e: (e.subject, e.eye, e.sample))


def write_manifest(path, entries) -> None:
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for e in entries:
            w.writerow([os.path.relpath(e.path, base), e.subject, e.eye, e.sample])


def manifest_digest(entries) -> str:
    """Content digest over identities and image bytes (independent of location)."""
    h = hashlib.sha256()
    for e in entries:
        h.update(f"{e.subject}\0{e.eye}\0{e.sample}\0".encode())
        with open(e.path, "rb") as fh:
            h.update(hashlib.sha256(fh.read()).digest())
    return h.hexdigest()[:16]
