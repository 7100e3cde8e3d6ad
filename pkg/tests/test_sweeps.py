"""Experiment drivers, grid parsing and CSV output."""
from __future__ import annotations

import csv
import io
import math

import pytest

from focalrd import sweeps
from focalrd.errors import BoundOrderError, InstanceTooLargeError, ValidationError
from focalrd.fx_opt import FxSearchConfig
from focalrd.prob import binomial_pmf, shannon_entropy
from focalrd.sweeps import (
    SweepConfig,
    asymptotic_table,
    audit_fig4,
    code_dump_table,
    fetch_eval_history,
    format_value,
    hgamma_table,
    oracle_table,
    parse_gamma_grid,
    parse_int_grid,
    resolve_alt_p,
    row_seeds,
    run_point,
    run_sweep,
    sweep_table,
    write_csv,
)

FAST = FxSearchConfig(starts=2, iterations=30)


def _read(path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# ── grids ────────────────────────────────────────────────────────────────────

def test_gamma_grid_linspace():
    grid = parse_gamma_grid("0:10:40")
    assert len(grid) == 40
    assert grid[0] == 0.0 and grid[-1] == 10.0


def test_gamma_grid_list_and_scalar():
    assert parse_gamma_grid("0.5, 1,20") == (0.5, 1.0, 20.0)
    assert parse_gamma_grid("3") == (3.0,)


@pytest.mark.parametrize("text", ["", "a,b", "0:1:0", "-1,2", "inf", "1:2"])
def test_gamma_grid_rejects(text):
    with pytest.raises(ValidationError):
        parse_gamma_grid(text)


def test_int_grid():
    assert parse_int_grid("2:5") == (2, 3, 4, 5)
    assert parse_int_grid("2,4,8") == (2, 4, 8)


@pytest.mark.parametrize("text", ["", "0,1", "x", "5:2", "1:2:3"])
def test_int_grid_rejects(text):
    with pytest.raises(ValidationError):
        parse_int_grid(text)


def test_row_seeds_stable_and_distinct():
    seeds = row_seeds(7, 5)
    assert seeds == row_seeds(7, 5)
    assert len(set(seeds)) == 5
    assert seeds != row_seeds(8, 5)


# ── CSV ──────────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("value, text", [
    (None, ""),
    (True, "true"),
    (3, "3"),
    (math.inf, "inf"),
    (0.1, "0.1"),
    (2.95587160589104, "2.95587160589104"),
    (1 / 3, "0.333333333333333"),
    ("0|12", "0|12"),
])
def test_format_value(value, text):
    assert format_value(value) == text


def test_format_value_digits():
    assert format_value(1 / 3, digits=4) == "0.3333"


def test_write_csv_to_file(tmp_path):
    out = tmp_path / "nested" / "t.csv"
    write_csv(out, ("a", "b"), [(1, 0.5), (2, math.inf)])
    assert out.read_bytes() == b"a,b\n1,0.5\n2,inf\n"


def test_write_csv_to_stdout(capsys):
    write_csv("-", ("a",), [(1,)])
    assert capsys.readouterr().out == "a\n1\n"


# ── run_point ────────────────────────────────────────────────────────────────

def test_run_point_binomial():
    rep = run_point("binomial:100:0.1", 8, 0.0)
    assert rep.converse == pytest.approx(max(0.0, shannon_entropy(binomial_pmf(100, 0.1)) - 3.0), abs=1e-12)
    assert rep.violations() == []
    assert rep.fx_optimized is None


def test_run_point_trivial():
    rep = run_point("uniform:4", 4, 2.0)
    assert (rep.converse, rep.exact_code, rep.ach_log, rep.ach_linear) == (0.0, 0.0, 0.0, 0.0)


def test_run_point_optimize_is_no_worse():
    rep = run_point("pmf:0.4,0.3,0.2,0.1", 2, 1.0, "optimize", seed=3, fx_search=FAST)
    assert rep.fx_optimized is not None
    assert rep.converse - 1e-12 <= rep.fx_optimized <= rep.exact_code


def test_run_point_uniform_f():
    rep = run_point("pmf:0.4,0.3,0.2,0.1", 2, 1.0, "uniform")
    assert rep.converse <= rep.exact_code


# ── SweepConfig ──────────────────────────────────────────────────────────────

def test_sweep_config_defaults_per_figure():
    cfg = SweepConfig(figure="fig4").resolved()
    assert cfg.source_spec == "binomial:100:0.1"
    assert cfg.m_grid == (8,)
    assert len(cfg.gammas()) == 40


@pytest.mark.parametrize("kwargs", [
    {"figure": "fig9"},
    {"figure": "fig3", "seed": -1},
    {"figure": "fig3", "workers": 0},
    {"figure": "fig3", "fx_mode": "best"},
    {"figure": "fig3", "gamma_grid": "-1"},
    {"figure": "custom", "source_spec": "uniform:3"},
])
def test_sweep_config_rejects(kwargs):
    with pytest.raises(ValidationError):
        SweepConfig(**kwargs)


def test_fig1_row_for_large_gamma():
    cfg = SweepConfig(figure="fig1", gamma_grid="20", workers=2)
    header, rows = sweep_table(cfg)
    assert header == ("alphabet_size", "gamma", "h_gamma")
    assert [r[0] for r in rows] == list(range(2, 51))
    assert rows[-1][2] == pytest.approx(2.95587160589104, abs=1e-6)


def test_fig2_values():
    cfg = SweepConfig(figure="fig2", gamma_grid="0", oracle_settings={"starts": 6})
    header, rows = sweep_table(cfg)
    assert header == ("gamma", "dstar_source1", "dstar_source2")
    assert rows[0][1] == pytest.approx(2 / 3, abs=1e-9)
    assert rows[0][2] == pytest.approx(0.270426041486378, abs=1e-9)


def test_fig3_chain_and_order():
    cfg = SweepConfig(figure="fig3", m_grid=(2, 8), gamma_grid="0.1,4", workers=3)
    header, rows = sweep_table(cfg)
    assert header == ("gamma", "m", "converse", "ach_eq17", "ach_eq16", "ach_exact")
    assert [(r[0], r[1]) for r in rows] == [(0.1, 2), (0.1, 8), (4.0, 2), (4.0, 8)]
    for _, _, conv, lin_b, log_b, exact in rows:
        assert conv <= exact + 1e-12
        assert exact <= log_b + 1e-12
        assert log_b <= lin_b + 1e-12


def test_fig4_without_optimisation_leaves_column_empty():
    cfg = SweepConfig(figure="fig4", gamma_grid="0:10:5")
    header, rows = sweep_table(cfg)
    assert header[-1] == "ach_exact_optfx"
    assert len(rows) == 5
    assert all(row[-1] is None for row in rows)
    values = [row[1] for row in rows]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_fig4_with_optimisation():
    cfg = SweepConfig(figure="fig4", gamma_grid="0,5", fx_mode="optimize", fx_search=FAST)
    _, rows = sweep_table(cfg)
    for _, conv, _, _, exact, optfx in rows:
        assert conv - 1e-12 <= optfx <= exact


def test_custom_sweep_byte_identical(tmp_path):
    cfg = SweepConfig(
        figure="custom",
        source_spec="pmf:0.35,0.25,0.2,0.1,0.06,0.04",
        m_grid=(2, 3),
        gamma_grid="0:4:3",
        fx_mode="optimize",
        seed=11,
        fx_search=FAST,
    )
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    run_sweep(SweepConfig(**{**cfg.__dict__, "output_path": str(first)}))
    run_sweep(SweepConfig(**{**cfg.__dict__, "output_path": str(second), "workers": 1}))
    assert first.read_bytes() == second.read_bytes()
    assert len(_read(first)) == 7


def test_sweep_with_inconsistent_chain_raises(monkeypatch):
    real = sweeps.bound_report

    def broken(*args, **kwargs):
        rep = real(*args, **kwargs)
        return sweeps.BoundReport(**{**rep.__dict__, "ach_log": rep.ach_linear + 1.0})

    monkeypatch.setattr(sweeps, "bound_report", broken)
    with pytest.raises(BoundOrderError):
        sweep_table(SweepConfig(figure="fig3", m_grid=(2,), gamma_grid="1", workers=1))


def test_alt_p_needs_output_file():
    with pytest.raises(ValidationError, match="--out"):
        run_sweep(SweepConfig(figure="fig4", gamma_grid="1", alt_p="0.15"))


def test_alt_p_writes_second_table(tmp_path):
    out = tmp_path / "fig4.csv"
    run_sweep(SweepConfig(figure="fig4", gamma_grid="0,1", alt_p="0.15", output_path=str(out)))
    alt = _read(f"{out}.alt.csv")
    main = _read(out)
    assert alt[0] == main[0]
    assert len(alt) == 3
    assert alt[1] != main[1]


@pytest.mark.parametrize("text", ["x", "1.5", "-0.1"])
def test_resolve_alt_p_rejects(text):
    with pytest.raises(ValidationError):
        resolve_alt_p(text)


def test_resolve_alt_p_auto_uses_audit():
    assert resolve_alt_p("auto") == audit_fig4().p_closest


# ── other drivers ────────────────────────────────────────────────────────────

def test_oracle_table_rows():
    header, rows = oracle_table("pmf:2/3,1/4,1/12", 2, (0.0, 2.0), oracle_settings={"starts": 6})
    assert header == ("gamma", "m", "dstar", "certified", "converse", "ach_exact", "partition")
    first = rows[0]
    assert first[2] == pytest.approx(0.270426041486378, abs=1e-9)
    assert first[3] is True
    assert first[6] == "0|12"
    for _, _, dstar, _, conv, exact, _ in rows:
        assert conv - 1e-9 <= dstar <= exact + 1e-9


def test_oracle_table_guard_rail():
    with pytest.raises(InstanceTooLargeError):
        oracle_table("uniform:12", 2, (1.0,))


def test_code_dump_table():
    header, rows = code_dump_table("pmf:2/3,1/4,1/12", 2)
    assert header == ("symbol", "message", "f_mass", "reconstruction_prob")
    assert [r[1] for r in rows] == [0, 1, 1]


def test_code_dump_rejects_optimize():
    with pytest.raises(ValidationError):
        code_dump_table("uniform:3", 2, "optimize")


def test_hgamma_table():
    header, rows = hgamma_table((2, 3), (1.0,))
    assert header[:3] == ("alphabet_size", "gamma", "h_gamma")
    assert rows[0][2] == pytest.approx(0.5, abs=1e-10)
    assert rows[1][2] == pytest.approx(math.log2(3) / 3, abs=1e-9)


def test_asymptotic_table():
    header, rows = asymptotic_table("bernoulli:0.2", 0.5, (25, 100), (2.0,), workers=2)
    assert header == ("gamma", "n", "rate", "converse_n_letter", "ach_n_letter", "limit")
    assert [r[1] for r in rows] == [25, 100]
    for _, _, _, conv, ach, limit in rows:
        assert limit == pytest.approx(0.221928, abs=1e-6)
        assert conv <= limit + 1e-12
        assert conv <= ach


# ── audit ────────────────────────────────────────────────────────────────────

def test_audit_flags_stated_parameter():
    result = audit_fig4()
    assert result.flagged
    assert result.entropy_stated == pytest.approx(shannon_entropy(binomial_pmf(100, 0.1)), abs=1e-12)
    assert 0.1 < result.p_closest < 0.2
    assert abs(result.entropy_closest - result.entropy_implied) < result.gap


def test_audit_closest_parameter_is_not_flagged():
    closest = audit_fig4().p_closest
    assert not audit_fig4(p_stated=closest).flagged


def test_audit_row_matches_header():
    assert len(audit_fig4().row()) == len(sweeps.AUDIT_HEADER)


# ── telemetry ────────────────────────────────────────────────────────────────

def test_eval_history_records_success_and_failure(monkeypatch):
    monkeypatch.setattr(sweeps, "_EVAL_HISTORY", sweeps.deque(maxlen=300))
    sweeps._timed("ok", lambda: 1)
    with pytest.raises(ValueError):
        sweeps._timed("bad", lambda: (_ for _ in ()).throw(ValueError("boom")))
    history = fetch_eval_history()
    assert [(s.label, s.ok) for s in history] == [("ok", True), ("bad", False)]
    assert history[1].error == "boom"
    assert fetch_eval_history(limit=0) == []
    assert len(fetch_eval_history(limit=1)) == 1


def test_eval_history_is_bounded(monkeypatch):
    monkeypatch.setattr(sweeps, "_EVAL_HISTORY", sweeps.deque(maxlen=300))
    for i in range(310):
        sweeps._record_eval(f"e{i}", True, 0)
    history = fetch_eval_history(limit=1000)
    assert len(history) == 300
    assert history[0].label == "e10"


def test_report_row_leaves_missing_optimum_blank():
    rep = run_point("uniform:4", 2, 1.0)
    buf = io.StringIO()
    sweeps._write_rows(buf, sweeps.REPORT_HEADER, [sweeps.report_row(rep)], 15)
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",") == list(sweeps.REPORT_HEADER)
    assert lines[1].endswith(",")


def test_fig4_optimised_column_over_full_grid(tmp_path):
    budget = FxSearchConfig(starts=1, iterations=15)
    outputs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        cfg = SweepConfig(figure="fig4", fx_mode="optimize", fx_search=budget, seed=5, output_path=str(out))
        _, rows = run_sweep(cfg)
        assert len(rows) == 40
        for row in rows:
            assert row[-1] <= row[-2]
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_renormalized_pmf_file_source(tmp_path):
    path = tmp_path / "counts.txt"
    path.write_text("2\n1\n1\n")
    with pytest.raises(ValidationError):
        run_point(f"pmf-file:{path}", 2, 1.0)
    rep = run_point(f"pmf-file:{path}", 2, 1.0, renormalize=True)
    assert rep == run_point("pmf:0.5,0.25,0.25", 2, 1.0)


def test_sweep_config_renormalizes_file_source(tmp_path):
    path = tmp_path / "counts.txt"
    path.write_text("3 1\n")
    cfg = SweepConfig(figure="custom", source_spec=f"pmf-file:{path}", m_grid=(1,), gamma_grid="0", renormalize=True)
    _, rows = sweep_table(cfg)
    assert rows[0][2] == pytest.approx(max(0.0, shannon_entropy(binomial_pmf(1, 0.25))), abs=1e-12)


def test_code_dump_renormalized_f_file(tmp_path):
    path = tmp_path / "f.txt"
    path.write_text("1 1 2\n")
    _, rows = code_dump_table("uniform:3", 2, f"file:{path}", renormalize=True)
    assert [r[2] for r in rows] == pytest.approx([0.25, 0.25, 0.5])
