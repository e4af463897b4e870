"""Run generated drawing code in a throwaway directory with a time limit.

This is process-level containment only: a fresh scratch directory as cwd,
HOME and TMPDIR, a scrubbed environment, a socket guard, and a wall-clock
timeout that kills the whole process group.  Generated code is untrusted;
run the pipeline inside a container when the model may be hostile.
"""

from __future__ import annotations

import os
import signal
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

__all__ = [
    "SandboxConfig",
    "VerifyResult",
    "VerificationError",
    "Timeout",
    "NonzeroExit",
    "NoImageProduced",
    "verify_script",
]

SCRIPT_NAME = "plot_script.py"
_GUARD_DIR = ".guard"

# imported at interpreter start through PYTHONPATH; blocks outbound sockets
_SOCKET_GUARD = '''\
import socket as _s

def _blocked(*a, **k):
    raise OSError("network access is disabled in the sandbox")

_s.socket.connect = _blocked
_s.socket.connect_ex = _blocked
_s.create_connection = _blocked
_s.getaddrinfo = _blocked
'''


@dataclass(frozen=True)
class SandboxConfig:
    interpreter: tuple[str, ...] = (sys.executable,)
    timeout: float = 30.0
    image_extensions: tuple[str, ...] = ("png", "jpg", "svg", "pdf")
    block_network: bool = True
    output_limit: int = 4000  # chars of stdout/stderr kept

    def __post_init__(self) -> None:
        object.__setattr__(self, "interpreter", tuple(self.interpreter))
        object.__setattr__(
            self, "image_extensions", tuple(e.lower().lstrip(".") for e in self.image_extensions)
        )
        if not self.interpreter:
            raise ValueError("sandbox interpreter command is empty")
        if self.timeout <= 0:
            raise ValueError("sandbox timeout must be positive")
        if not self.image_extensions:
            raise ValueError("no image extensions configured")


@dataclass
class VerifyResult:
    returncode: Optional[int]
    stdout: str
    stderr: str
    images: list[Path] = field(default_factory=list)
    timed_out: bool = False

    @property
    def ok(self) -> bool:
        return self.returncode == 0 and bool(self.images) and not self.timed_out


class VerificationError(RuntimeError):
    def __init__(self, message: str, result: VerifyResult):
        self.result = result
        super().__init__(message)


class Timeout(VerificationError):
    pass


class NonzeroExit(VerificationError):
    def __init__(self, code: int, stderr: str, result: VerifyResult):
        self.code = code
        self.stderr = stderr
        super().__init__(f"script exited with code {code}", result)


class NoImageProduced(VerificationError):
    pass


def _env(scratch: Path, cfg: SandboxConfig) -> dict[str, str]:
    env = {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "HOME": str(scratch),
        "TMPDIR": str(scratch),
        "MPLCONFIGDIR": str(scratch / ".mplconfig"),
        "MPLBACKEND": "Agg",
        "PYTHONDONTWRITEBYTECODE": "1",
        "PYTHONNOUSERSITE": "1",
        "LANG": os.environ.get("LANG", "C.UTF-8"),
    }
    if cfg.block_network:
        env["PYTHONPATH"] = str(scratch / _GUARD_DIR)
    return env


def _clip(text: str, scratch: Path, limit: int) -> str:
    text = text.replace(str(scratch), "<scratch>")
    return text if len(text) <= limit else "..." + text[-limit:]


def _images(scratch: Path, exts: tuple[str, ...]) -> list[Path]:
    found = []
    for p in sorted(scratch.rglob("*")):
        if _GUARD_DIR in p.relative_to(scratch).parts:
            continue
        if p.is_file() and p.suffix.lower().lstrip(".") in exts and p.stat().st_size > 0:
            found.append(p)
    return found


def verify_script(script: str, scratch_dir: Path, config: SandboxConfig = SandboxConfig()) -> VerifyResult:
    """Execute ``script`` inside ``scratch_dir`` and check that it drew something.

    Success means exit code 0 and at least one non-empty image file with a
    configured extension somewhere under ``scratch_dir``.

    Raises:
        Timeout: the wall-clock limit was hit; the process group is killed.
        NonzeroExit: the script failed.
        NoImageProduced: the script succeeded but left no image behind.
    """
    scratch = Path(scratch_dir).resolve()
    scratch.mkdir(parents=True, exist_ok=True)
    (scratch / SCRIPT_NAME).write_text(script, encoding="utf-8")
    if config.block_network:
        guard = scratch / _GUARD_DIR
        guard.mkdir(exist_ok=True)
        (guard / "sitecustomize.py").write_text(_SOCKET_GUARD, encoding="utf-8")

    proc = subprocess.Popen(
        [*config.interpreter, SCRIPT_NAME],
        cwd=scratch,
        env=_env(scratch, config),
        stdin=subprocess.DEVNULL,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        start_new_session=True,
    )
    try:
        out, err = proc.communicate(timeout=config.timeout)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        out, err = proc.communicate()
        result = VerifyResult(
            None,
            _clip(out.decode("utf-8", "replace"), scratch, config.output_limit),
            _clip(err.decode("utf-8", "replace"), scratch, config.output_limit),
            timed_out=True,
        )
        raise Timeout(f"script exceeded {config.timeout:g} s", result) from None

    result = VerifyResult(
        proc.returncode,
        _clip(out.decode("utf-8", "replace"), scratch, config.output_limit),
        _clip(err.decode("utf-8", "replace"), scratch, config.output_limit),
    )
    if proc.returncode != 0:
        raise NonzeroExit(proc.returncode, result.stderr, result)
    result.images = _images(scratch, config.image_extensions)
    if not result.images:
        raise NoImageProduced("script exited 0 but wrote no image", result)
    return result
