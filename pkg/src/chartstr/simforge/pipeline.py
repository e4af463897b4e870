"""Seed CSV labels -> simulated labels -> drawing scripts -> verified images.

Output layout under the root::

    labels/<id>.csv      simulated LCT label
    scripts/<id>.txt     last drawing script tried
    images/<id>.<ext>    rendered chart (verified entries only)
    manifest.jsonl       one entry per seed, in seed order

Rerunning with the same root leaves ``verified`` entries alone and reuses a
saved label for entries that got as far as ``label_done``.
"""

from __future__ import annotations

import json
import logging
import os
import re
import shutil
import tempfile
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence, Union

from ..lct import LctError, parse_lct
from .llm import LlmClient, LlmTransport, strip_code_fences
from .prompts import DATA_TEMPLATE, IMAGE_TEMPLATE, PromptTemplate
from .sandbox import SandboxConfig, VerificationError, verify_script

__all__ = [
    "ValidationFailed",
    "ConfigInvalid",
    "PipelineConfig",
    "ManifestEntry",
    "SimManifest",
    "generate_label",
    "generate_script",
    "validate_label",
    "run_pipeline",
    "STATUSES",
]

log = logging.getLogger(__name__)

STATUSES = ("pending", "label_done", "verified", "skipped")
_ORDER = {s: i for i, s in enumerate(STATUSES)}
_PLOT_CALL_RE = re.compile(
    r"\.(plot|bar|barh|scatter|pie|hist|stackplot|step|fill_between|boxplot|violinplot|errorbar|imshow)\s*\("
)
_ID_RE = re.compile(r"[A-Za-z0-9._-]+")


class ValidationFailed(RuntimeError):
    pass


class ConfigInvalid(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    output_root: Path
    max_retries: int = 3
    concurrency: int = 4
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)
    require_plot_call: bool = False
    data_template: PromptTemplate = DATA_TEMPLATE
    image_template: PromptTemplate = IMAGE_TEMPLATE

    def validate(self) -> None:
        if self.max_retries < 1:
            raise ConfigInvalid("max_retries must be at least 1")
        if self.concurrency < 1:
            raise ConfigInvalid("concurrency must be at least 1")
        root = Path(self.output_root)
        if root.exists() and not root.is_dir():
            raise ConfigInvalid(f"output root {root} exists and is not a directory")
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigInvalid(f"cannot create output root {root}: {exc}") from exc
        if not os.access(root, os.W_OK):
            raise ConfigInvalid(f"output root {root} is not writable")


@dataclass
class ManifestEntry:
    id: str
    sim_label_path: Optional[str] = None
    script_path: Optional[str] = None
    image_path: Optional[str] = None
    status: str = "pending"
    attempts: int = 0
    model_id: str = ""
    created_at: str = ""
    error: Optional[str] = None
    stderr: Optional[str] = None

    def advance(self, status: str) -> None:
        if _ORDER[status] < _ORDER[self.status] or self.status in ("verified", "skipped"):
            if status != self.status:
                raise ValueError(f"entry {self.id}: cannot move from {self.status} to {status}")
        self.status = status


@dataclass
class SimManifest:
    entries: list[ManifestEntry]

    @property
    def counts(self) -> dict[str, int]:
        c = Counter(e.status for e in self.entries)
        return {s: c.get(s, 0) for s in STATUSES}

    def get(self, entry_id: str) -> Optional[ManifestEntry]:
        for e in self.entries:
            if e.id == entry_id:
                return e
        return None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(e), ensure_ascii=False) + "\n" for e in self.entries)

    def write(self, path: Path) -> None:
        path = Path(path)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest-", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())
        os.replace(tmp, path)

    @classmethod
    def read(cls, path: Path) -> "SimManifest":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entries.append(ManifestEntry(**json.loads(line)))
        return cls(entries)

    def check(self, root: Path) -> list[str]:
        """Problems with verified entries whose files are missing."""
        problems = []
        for e in self.entries:
            if e.status != "verified":
                continue
            for attr in ("sim_label_path", "script_path", "image_path"):
                rel = getattr(e, attr)
                if not rel or not (Path(root) / rel).is_file():
                    problems.append(f"{e.id}: {attr} missing")
        return problems


# -- stages -----------------------------------------------------------------


def validate_label(text: str) -> None:
    """Raise ValidationFailed unless ``text`` is a usable LCT table."""
    try:
        table = parse_lct(text)
    except LctError as exc:
        raise ValidationFailed(f"not valid CSV/LCT: {exc}") from exc
    blank = [e for e in (*table.col_entities, *table.row_entities) if not e.strip()]
    if blank:
        raise ValidationFailed("label has blank entities")


def generate_label(
    seed: str,
    client: LlmClient,
    template: PromptTemplate = DATA_TEMPLATE,
    max_retries: int = 3,
) -> str:
    """Ask the model to imitate ``seed`` and return a validated LCT label.

    The simulated table may have a different number of rows than the seed.

    Raises:
        ValidationFailed: the seed does not parse, or ``max_retries`` replies
            in a row were not usable tables.
        LlmTransport: the client failed.
    """
    try:
        parse_lct(seed)
    except LctError as exc:
        raise ValidationFailed(f"seed label does not parse: {exc}") from exc
    user = template.render_user(seed.strip())
    reason = ""
    for _ in range(max_retries):
        reply = strip_code_fences(client.complete(template.system_text, user, stage="data"))
        try:
            validate_label(reply)
        except ValidationFailed as exc:
            reason = str(exc)
            continue
        return reply + "\n"
    raise ValidationFailed(f"no valid label after {max_retries} attempts: {reason}")


def generate_script(
    label: str,
    client: LlmClient,
    template: PromptTemplate = IMAGE_TEMPLATE,
) -> str:
    """Ask the model for drawing code for ``label``; fences are stripped.

    Raises:
        ValidationFailed: the label does not parse or the reply is empty.
        LlmTransport: the client failed.
    """
    try:
        parse_lct(label)
    except LctError as exc:
        raise ValidationFailed(f"label does not parse: {exc}") from exc
    reply = strip_code_fences(
        client.complete(template.system_text, template.render_user(label.strip()), stage="image")
    )
    if not reply.strip():
        raise ValidationFailed("empty script")
    return reply


# -- pipeline ---------------------------------------------------------------


SeedInput = Union[str, tuple[str, str]]


def _normalize_seeds(seeds: Sequence[SeedInput]) -> list[tuple[str, str]]:
    out = []
    for i, s in enumerate(seeds):
        sid, text = (s if isinstance(s, tuple) else (f"seed-{i:05d}", s))
        if not _ID_RE.fullmatch(sid):
            raise ConfigInvalid(f"seed id {sid!r} is not a safe file stem")
        out.append((sid, text))
    ids = [sid for sid, _ in out]
    if len(set(ids)) != len(ids):
        raise ConfigInvalid("duplicate seed ids")
    return out


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _Writer:
    """Serializes manifest updates; the file is rewritten atomically."""

    def __init__(self, manifest: SimManifest, path: Path):
        self.manifest = manifest
        self.path = path
        self._lock = threading.Lock()

    def flush(self) -> None:
        with self._lock:
            self.manifest.write(self.path)


def _run_job(
    entry: ManifestEntry,
    seed: str,
    client: LlmClient,
    cfg: PipelineConfig,
    writer: _Writer,
) -> None:
    root = Path(cfg.output_root)
    label_rel = f"labels/{entry.id}.csv"
    script_rel = f"scripts/{entry.id}.txt"
    entry.model_id = client.model_id
    entry.created_at = _now()

    label_file = root / label_rel
    label: Optional[str] = None
    if entry.status == "label_done" and label_file.is_file():
        label = label_file.read_text(encoding="utf-8")
    else:
        entry.status = "pending"
        entry.attempts = 0
        try:
            label = generate_label(seed, client, cfg.data_template, cfg.max_retries)
        except (ValidationFailed, LlmTransport) as exc:
            entry.advance("skipped")
            kind = "transport" if isinstance(exc, LlmTransport) else "label"
            entry.error = f"{kind}: {exc}"
            writer.flush()
            return
        label_file.write_text(label, encoding="utf-8")
        entry.sim_label_path = label_rel
        entry.advance("label_done")
        writer.flush()

    entry.attempts = 0
    scratch_root = root / ".scratch"
    last_error = ""
    for attempt in range(1, cfg.max_retries + 1):
        entry.attempts = attempt
        try:
            script = generate_script(label, client, cfg.image_template)
        except ValidationFailed as exc:
            last_error = f"script: {exc}"
            continue
        except LlmTransport as exc:
            last_error = f"transport: {exc}"
            break
        (root / script_rel).write_text(script, encoding="utf-8")
        entry.script_path = script_rel
        if cfg.require_plot_call and not _PLOT_CALL_RE.search(script):
            last_error = "script: no plotting call found"
            continue
        scratch = scratch_root / entry.id
        shutil.rmtree(scratch, ignore_errors=True)
        try:
            result = verify_script(script, scratch, cfg.sandbox)
        except VerificationError as exc:
            last_error = f"verify: {exc}"
            entry.stderr = exc.result.stderr or None
            shutil.rmtree(scratch, ignore_errors=True)
            continue
        image = result.images[0]
        image_rel = f"images/{entry.id}{image.suffix.lower()}"
        shutil.copyfile(image, root / image_rel)
        shutil.rmtree(scratch, ignore_errors=True)
        entry.image_path = image_rel
        entry.error = None
        entry.stderr = result.stderr or None
        entry.advance("verified")
        writer.flush()
        return
    entry.error = last_error
    entry.advance("skipped")
    writer.flush()


def run_pipeline(
    seeds: Sequence[SeedInput],
    config: PipelineConfig,
    client: LlmClient,
) -> SimManifest:
    """Produce simulated charts for every seed and return the manifest.

    Per-seed failures end up as ``skipped`` entries with an ``error`` note;
    the batch itself never aborts on them.

    Raises:
        ConfigInvalid: no seeds, unusable output root or bad seed ids.
    """
    if not seeds:
        raise ConfigInvalid("no seeds given")
    config.validate()
    root = Path(config.output_root)
    for sub in ("labels", "scripts", "images"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    items = _normalize_seeds(seeds)

    manifest_path = root / "manifest.jsonl"
    previous: dict[str, ManifestEntry] = {}
    if manifest_path.is_file():
        previous = {e.id: e for e in SimManifest.read(manifest_path).entries}

    entries = []
    todo = []
    for sid, text in items:
        old = previous.get(sid)
        if old is not None and old.status == "verified" and not SimManifest([old]).check(root):
            entries.append(old)
            continue
        if old is not None and old.status == "label_done":
            entry = old
        else:
            entry = ManifestEntry(id=sid)
        entries.append(entry)
        todo.append((entry, text))

    manifest = SimManifest(entries)
    writer = _Writer(manifest, manifest_path)
    writer.flush()
    log.info("simulating %d of %d seeds", len(todo), len(items))

    if config.concurrency == 1 or len(todo) <= 1:
        for entry, text in todo:
            _run_job(entry, text, client, config, writer)
    else:
        with ThreadPoolExecutor(max_workers=config.concurrency) as ex:
            futures = [ex.submit(_run_job, e, t, client, config, writer) for e, t in todo]
            for f in futures:
                f.result()
    shutil.rmtree(root / ".scratch", ignore_errors=True)
    writer.flush()
    return manifest
