import hashlib
import json

import pytest

from chartstr.simforge import (
    DATA_TEMPLATE,
    IMAGE_TEMPLATE,
    ConfigInvalid,
    ManifestEntry,
    MockLlmClient,
    PipelineConfig,
    SimManifest,
    ValidationFailed,
    generate_label,
    generate_script,
    run_pipeline,
)
from chartstr.simforge.llm import OFFLINE_SCRIPT, LlmTransport, strip_code_fences
from chartstr.simforge.sandbox import SandboxConfig

SEEDS = [
    "none,Q1,Q2\nSales,10,20\n",
    "none,2019,2020\nNorth,4,5\nSouth,6,7\n",
    "none,share\nA,40\nB,60\n",
]
LABEL = "none,Jan,Feb\nApples,3,4\n"
BROKEN = "raise RuntimeError('bad plot')"
SANDBOX = SandboxConfig(timeout=20)


def cfg(root, **kw):
    return PipelineConfig(output_root=root, sandbox=SANDBOX, **kw)


def test_three_seeds_verified(tmp_path):
    client = MockLlmClient(LABEL, OFFLINE_SCRIPT)
    m = run_pipeline(SEEDS, cfg(tmp_path), client)
    assert m.counts == {"pending": 0, "label_done": 0, "verified": 3, "skipped": 0}
    assert [e.id for e in m.entries] == ["seed-00000", "seed-00001", "seed-00002"]
    assert m.check(tmp_path) == []
    e = m.entries[0]
    assert (e.sim_label_path, e.script_path, e.image_path) == (
        "labels/seed-00000.csv", "scripts/seed-00000.txt", "images/seed-00000.png")
    assert (tmp_path / "labels/seed-00000.csv").read_text() == LABEL
    assert not (tmp_path / ".scratch").exists()
    assert client.call_count == 6


def test_broken_then_good(tmp_path):
    client = MockLlmClient(LABEL, [BROKEN, OFFLINE_SCRIPT])
    m = run_pipeline(SEEDS[:1], cfg(tmp_path), client)
    e = m.entries[0]
    assert (e.status, e.attempts, e.error) == ("verified", 2, None)


def test_retry_exhaustion_skips(tmp_path):
    client = MockLlmClient(LABEL, BROKEN)
    m = run_pipeline(SEEDS[:1], cfg(tmp_path), client)
    e = m.entries[0]
    assert (e.status, e.attempts) == ("skipped", 3)
    assert e.error.startswith("verify:") and "bad plot" in e.stderr
    assert [s for s, _ in client.calls] == ["data", "image", "image", "image"]


def test_fenced_reply_is_stripped(tmp_path):
    client = MockLlmClient("```csv\n" + LABEL + "```", "Here:\n```python\n" + OFFLINE_SCRIPT + "```\nDone.")
    m = run_pipeline(SEEDS[:1], cfg(tmp_path), client)
    assert m.entries[0].status == "verified"
    assert (tmp_path / "scripts/seed-00000.txt").read_text() == OFFLINE_SCRIPT.strip("\n")


def test_strip_code_fences():
    assert strip_code_fences("```\nx = 1\n```") == "x = 1"
    assert strip_code_fences("  plain  ") == "plain"


def test_bad_labels_raise():
    client = MockLlmClient(["not,a\ntable,with,ragged", "", "none\n"], OFFLINE_SCRIPT)
    with pytest.raises(ValidationFailed):
        generate_label(SEEDS[0], client)
    assert client.call_count == 3


def test_bad_label_skips_entry(tmp_path):
    m = run_pipeline(SEEDS[:1], cfg(tmp_path), MockLlmClient("garbage", OFFLINE_SCRIPT))
    e = m.entries[0]
    assert e.status == "skipped" and e.error.startswith("label:")
    assert e.sim_label_path is None


def test_bad_seed():
    with pytest.raises(ValidationFailed):
        generate_label("", MockLlmClient(LABEL, OFFLINE_SCRIPT))


def test_empty_script():
    with pytest.raises(ValidationFailed):
        generate_script(LABEL, MockLlmClient(LABEL, "```python\n```"))


def test_transport_error(tmp_path):
    def fail(user, n):
        raise LlmTransport(503, "unavailable")

    m = run_pipeline(SEEDS[:2], cfg(tmp_path), MockLlmClient(fail, OFFLINE_SCRIPT))
    assert all(e.status == "skipped" and e.error.startswith("transport:") for e in m.entries)


def _strip_time(text):
    rows = [json.loads(line) for line in text.splitlines()]
    for r in rows:
        r.pop("created_at")
    return rows


def test_deterministic_manifest(tmp_path):
    script = [BROKEN, OFFLINE_SCRIPT]
    a = run_pipeline(SEEDS, cfg(tmp_path / "a", concurrency=3), MockLlmClient(LABEL, script))
    b = run_pipeline(SEEDS, cfg(tmp_path / "b", concurrency=1), MockLlmClient(LABEL, script))
    assert _strip_time(a.to_jsonl()) == _strip_time(b.to_jsonl())
    on_disk = (tmp_path / "a" / "manifest.jsonl").read_text()
    assert _strip_time(on_disk) == _strip_time(a.to_jsonl())


def test_resume_makes_no_calls(tmp_path):
    run_pipeline(SEEDS, cfg(tmp_path), MockLlmClient(LABEL, OFFLINE_SCRIPT))
    again = MockLlmClient(LABEL, OFFLINE_SCRIPT)
    m = run_pipeline(SEEDS, cfg(tmp_path), again)
    assert again.call_count == 0
    assert m.counts["verified"] == 3


def test_resume_redoes_missing_files(tmp_path):
    run_pipeline(SEEDS, cfg(tmp_path), MockLlmClient(LABEL, OFFLINE_SCRIPT))
    (tmp_path / "images/seed-00001.png").unlink()
    again = MockLlmClient(LABEL, OFFLINE_SCRIPT)
    run_pipeline(SEEDS, cfg(tmp_path), again)
    assert again.call_count == 2


def test_resume_reuses_label(tmp_path):
    entry = ManifestEntry(id="seed-00000", sim_label_path="labels/seed-00000.csv", status="label_done")
    (tmp_path / "labels").mkdir()
    (tmp_path / "labels/seed-00000.csv").write_text(LABEL)
    SimManifest([entry]).write(tmp_path / "manifest.jsonl")
    client = MockLlmClient(LABEL, OFFLINE_SCRIPT)
    m = run_pipeline(SEEDS[:1], cfg(tmp_path), client)
    assert [s for s, _ in client.calls] == ["image"]
    assert m.entries[0].status == "verified"


def test_status_only_moves_forward():
    e = ManifestEntry(id="x")
    e.advance("label_done")
    e.advance("verified")
    with pytest.raises(ValueError):
        e.advance("pending")


def test_manifest_round_trip(tmp_path):
    m = SimManifest([ManifestEntry(id="a", status="skipped", error="label: x"), ManifestEntry(id="b")])
    m.write(tmp_path / "m.jsonl")
    assert SimManifest.read(tmp_path / "m.jsonl") == m
    assert m.counts == {"pending": 1, "label_done": 0, "verified": 0, "skipped": 1}


def test_check_flags_missing(tmp_path):
    m = SimManifest([ManifestEntry(id="a", status="verified", sim_label_path="labels/a.csv")])
    assert len(m.check(tmp_path)) == 3


def test_config_errors(tmp_path):
    with pytest.raises(ConfigInvalid):
        run_pipeline([], cfg(tmp_path), MockLlmClient(LABEL, OFFLINE_SCRIPT))
    with pytest.raises(ConfigInvalid):
        run_pipeline(SEEDS, cfg(tmp_path, max_retries=0), MockLlmClient(LABEL, OFFLINE_SCRIPT))
    with pytest.raises(ConfigInvalid):
        run_pipeline([("../evil", SEEDS[0])], cfg(tmp_path), MockLlmClient(LABEL, OFFLINE_SCRIPT))
    (tmp_path / "file").write_text("")
    with pytest.raises(ConfigInvalid):
        run_pipeline(SEEDS, cfg(tmp_path / "file"), MockLlmClient(LABEL, OFFLINE_SCRIPT))


def test_require_plot_call(tmp_path):
    m = run_pipeline(SEEDS[:1], cfg(tmp_path, require_plot_call=True), MockLlmClient(LABEL, OFFLINE_SCRIPT))
    assert m.entries[0].status == "skipped"
    assert m.entries[0].error == "script: no plotting call found"


FROZEN_IMAGE_SYSTEM = """\
Consider you are a professional Python grapher.
Please draw and save a chart based on the following data using Python, and images must be
clear and intuitive.
Choose a plot type that best suits the value, for example, line, column, scatter, and pie charts.
Drawing techniques such as background grids can be used.
Draw as much variety as possible.
Clear the current image state at the end of the code.
If the text length of the label is too long, use the method of adding the parameter rotation
or display label on separate lines seting wrap=true.
The figsize parameter is set to a larger setting to prevent content from being displayed.
Automatically resize the image by tight_layout().
You must use xticks to prevent interpolation.
Do not set special fonts such as sans-serif and Arial etc. to avoid the problem of missing fonts.
If the string in the picture is too long, find a way for all characters to show and not be
overwritten and stacked on top of each other.
Do not have extra leading words at the beginning and end of the generated code, such as
python code, python, ```, etc.
Check the generated code without errors, do not include undefined functions."""

FROZEN_DATA_SYSTEM = """\
Copying the following table information can be expanded and adapted as
appropriate, The imitation is as irrelevant as possible to the original text."""


def test_templates_byte_identical():
    assert IMAGE_TEMPLATE.system_text == FROZEN_IMAGE_SYSTEM
    assert DATA_TEMPLATE.system_text == FROZEN_DATA_SYSTEM
    sha = lambda s: hashlib.sha256(s.encode("utf-8")).hexdigest()  # noqa: E731
    assert sha(DATA_TEMPLATE.system_text) == "7f9bc723d8a01ac2e1561c0f6e9feef6c7190d6d4c239203013593b11da5a568"
    assert sha(IMAGE_TEMPLATE.system_text) == "e703cdcfdfdbe717cae732400bfcb268ccd0c38cbf23a4f7236a63df66a85aac"
    assert DATA_TEMPLATE.render_user("none,A\nx,1") == "The data is <data> none,A\nx,1 </data>"
