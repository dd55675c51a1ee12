import io

import pytest

from ctxlang.bench import (
    CSV_COLUMNS,
    BenchConfig,
    BenchFamily,
    BenchRow,
    gen_benchmark,
    grid,
    loglog_slope,
    measure,
    run_bench,
    write_csv,
)
from ctxlang.exceptions import CtxValueError


def test_grid_doubles_p():
    """Test the benchmark grid"""
    configs = grid([BenchFamily.SHARED_PREFIX, BenchFamily.UNIQUE_PREFIX], [1, 2], max_p=32, trials=1)
    assert [c.P for c in configs[:3]] == [8, 16, 32]
    assert len(configs) == 2 * 2 * 3
    assert {c.family for c in configs} == set(BenchFamily)


def test_grid_with_small_max_p():
    assert [c.P for c in grid([BenchFamily.SHARED_PREFIX], [1], max_p=4)] == [1, 2, 4]


@pytest.mark.parametrize("field", ["P", "depth", "trials"])
def test_config_rejects_non_positive(field):
    """Test that benchmark parameters must be at least 1"""
    with pytest.raises(CtxValueError):
        BenchConfig(**{field: 0})


def test_generated_program():
    """Test the shape of a generated benchmark"""
    shared = gen_benchmark(BenchConfig(family=BenchFamily.SHARED_PREFIX, P=3, depth=2))
    assert shared.count('static String "begin" _') == 3
    assert shared.count("dsl D") == 3
    assert 'String s = begin begin "hello, world!" end3 end3;' in shared

    unique = gen_benchmark(BenchConfig(family=BenchFamily.UNIQUE_PREFIX, P=3, depth=2))
    assert 'static String "begin2" _ "end2" (D2 |- String f)' in unique
    assert 'String s = begin3 begin3 "hello, world!" end3 end3;' in unique


def test_measure_small_point():
    row = measure(BenchConfig(P=2, depth=1, trials=1), with_time=False)
    assert row.time_ns is None
    assert row.languages_seen > 0
    assert row.memo_entries > 0


def test_write_csv():
    rows = [BenchRow(family=BenchFamily.UNIQUE_PREFIX, P=8, depth=1, languages_seen=5, memo_entries=9, time_ns=100)]
    stream = io.StringIO()
    write_csv(rows, stream)
    assert stream.getvalue() == ",".join(CSV_COLUMNS) + "\nUNIQUE_PREFIX,8,1,5,9,100\n"

    stream = io.StringIO()
    write_csv(rows, stream, with_time=False)
    assert stream.getvalue().splitlines() == ["family,P,depth,L,memo_entries", "UNIQUE_PREFIX,8,1,5,9"]


def test_loglog_slope():
    assert loglog_slope([(2, 8), (4, 64), (8, 512)]) == pytest.approx(3.0)
    assert loglog_slope([(2, 5), (4, 5)]) == pytest.approx(0.0)
    with pytest.raises(CtxValueError):
        loglog_slope([(2, 8)])


@pytest.mark.slow
@pytest.mark.parametrize("depth, sizes", [(1, (16, 32, 64)), (2, (8, 16, 32)), (3, (4, 8, 16))])
def test_shared_prefix_grows_with_depth(depth, sizes):
    """Test that with a shared prefix the languages seen grow like P to the nesting depth"""
    points = []
    for p in sizes:
        shared, unique = run_bench(
            [BenchConfig(family=family, P=p, depth=depth, trials=1) for family in BenchFamily],
            with_time=False,
        )
        # the unique family sees the same statements without the fan-out
        points.append((p, shared.languages_seen - unique.languages_seen))
    assert all(excess > 0 for _, excess in points)
    assert loglog_slope(points) == pytest.approx(depth, abs=0.3)


@pytest.mark.slow
def test_unique_prefix_is_flat():
    """Test that with unique prefixes the languages seen do not depend on P"""
    configs = [BenchConfig(family=BenchFamily.UNIQUE_PREFIX, P=p, depth=3, trials=1) for p in (4, 8, 16)]
    rows = run_bench(configs, with_time=False)
    slope = loglog_slope([(row.P, row.languages_seen) for row in rows])
    assert slope == pytest.approx(0.0, abs=0.1)
