"""Small configurations shared by the CLI tests and the acceptance suite."""
from __future__ import annotations

from pathlib import Path

SMALL = {
    "plan.cfg": """\
target = "isotropic_gaussian"
seed = 1
delta = 0.1

[target]
dim = 4

[assumption]
regime = "strongly_log_concave"
beta = 1
kl_init = 4
""",
    # 1100 chains span two chain blocks, so --jobs actually fans out.
    "sample.cfg": """\
target = "isotropic_gaussian"
seed = 2
delta = 0.45

[target]
dim = 1

[assumption]
regime = "strongly_log_concave"
beta = 1
kl_init = 0.5

[sample]
chains = 1100
x0 = [2]
""",
    "rgo.cfg": """\
target = "huber"
seed = 3

[target]
dim = 2
width = 0.5

[rgo]
y = [0.5, -1]
zeta = 0.05
n_draws = 30000
""",
    "conc.cfg": """\
target = "isotropic_gaussian"
seed = 5

[target]
dim = 8

[conc]
eta = 0.01
n_samples = 300000
""",
    "conc_control.cfg": """\
target = "isotropic_gaussian"
seed = 5

[target]
dim = 8

[conc]
eta = 0.01
n_samples = 300000
rate_scale = 10
expect = "violated"
""",
    "bench.cfg": """\
target = "aniso_quadratic"
seed = 9
delta = 0.45

[target]
diag = [1, 4]

[assumption]
regime = "strongly_log_concave"
beta = 1
kl_init = 1

[benchmark]
chains = 64
x0 = [1, 1]
n_ref = 64
""",
}

COMMAND_FOR = {
    "plan.cfg": ("plan", "plan.csv"),
    "sample.cfg": ("sample", "trace.csv"),
    "rgo.cfg": ("verify-rgo", "rgo_report.csv"),
    "conc.cfg": ("verify-conc", "tail_report.csv"),
    "bench.cfg": ("benchmark", "baselines.csv"),
}


def write_configs(root: Path) -> dict[str, Path]:
    paths = {}
    for name, text in SMALL.items():
        path = root / name
        path.write_text(text, encoding="utf-8")
        paths[name] = path
    return paths
