import json

import pytest

from curricula.ingest import DatasetSpec
from curricula.schedule import MixSchedule, TaskKind, TaskSchedule

# the six-task default endpoints (alpha column, beta column)
TABLE_ALPHA = (0.60, 0.05, 0.25, 0.05, 0.00, 0.05)
TABLE_BETA = (0.15, 0.50, 0.00, 0.10, 0.20, 0.05)


def make_default_schedule(t_grow=5_000_000) -> MixSchedule:
    kinds = list(TaskKind)
    return MixSchedule(
        tasks=tuple(TaskSchedule(k, a, b)
                    for k, a, b in zip(kinds, TABLE_ALPHA, TABLE_BETA)),
        t_grow=t_grow)


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        for rec in records:
            fp.write(json.dumps(rec, ensure_ascii=False) + "\n")


@pytest.fixture
def corpus_file(tmp_path):
    def make(name, texts, task=TaskKind.CORPUS_EN, size_weight=None):
        path = tmp_path / name
        write_jsonl(path, [{"text": t} for t in texts])
        return DatasetSpec(name=name, path=str(path), task=task,
                           size_weight=size_weight)
    return make


# one pass/fail line per acceptance criterion, printed uncaptured at the end
ACCEPTANCE_CRITERIA = {
    "test_criterion_1_schedule_exactness": (1, "schedule exactness"),
    "test_criterion_2_sampler_statistics": (2, "sampler statistics"),
    "test_criterion_3_determinism": (3, "end-to-end determinism"),
    "test_criterion_4_prompt_golden": (4, "prompt-format golden file"),
    "test_criterion_5_packer_oracle": (5, "packer oracle"),
    "test_criterion_6_mean_init_oracle": (6, "mean-init oracle"),
    "test_criterion_7_gradient_check": (7, "gradient finite-difference check"),
    "test_criterion_8_trainer_sanity": (8, "trainer sanity"),
    "test_criterion_9_ablation": (9, "ablation reproduction"),
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status, verdict in (("passed", "PASS"), ("failed", "FAIL"),
                            ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, ()):
            name = rep.location[2].split("[")[0]
            if name in ACCEPTANCE_CRITERIA:
                num, title = ACCEPTANCE_CRITERIA[name]
                lines.append((num, f"criterion {num} ({title}): {verdict}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
