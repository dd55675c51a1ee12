"""Parser scaling benchmarks.

Two generated families of ``begin ... end`` operators, each taking its operand under its own
assumption class:

- ``SHARED_PREFIX``: every operator starts with the same token ``begin``, so at each nesting level
  every operator is tried and each one opens a new language;
- ``UNIQUE_PREFIX``: operator ``X`` starts with ``beginX``, so only one operator matches.

The number of languages the parser meets is the machine-independent measure of its cost.
"""

__all__ = ["BenchFamily", "BenchConfig", "BenchRow", "gen_benchmark", "run_bench", "write_csv"]

import csv
import enum
import math
import statistics
import time
from typing import (
    Iterable,
    List,
    Optional,
    Sequence,
    TextIO,
    Tuple,
)

from pydantic import (
    BaseModel,
    Field,
    field_validator,
)

from .compiler import (
    Compiler,
    CtxlangConfig,
)
from .exceptions import (
    CtxCompileError,
    CtxValueError,
)
from .logger import logger


CSV_COLUMNS = ("family", "P", "depth", "L", "memo_entries", "time_ns")


class BenchFamily(str, enum.Enum):
    SHARED_PREFIX = "SHARED_PREFIX"
    UNIQUE_PREFIX = "UNIQUE_PREFIX"


class BenchConfig(BaseModel):
    """One point of the benchmark grid."""

    family: BenchFamily = Field(default=BenchFamily.SHARED_PREFIX, description="Operator family")
    P: int = Field(default=8, description="Number of generated begin/end operators")
    depth: int = Field(default=1, description="Nesting depth of begin ... end in the main program")
    trials: int = Field(default=5, description="Timed repetitions; the median is reported")

    @field_validator("P", "depth", "trials")
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise CtxValueError(f"benchmark parameters must be at least 1, got {v}")
        return v


class BenchRow(BaseModel):
    family: BenchFamily
    P: int
    depth: int
    languages_seen: int = Field(ge=0, description="Distinct canonical goals met by the parser")
    memo_entries: int = Field(ge=0)
    time_ns: Optional[int] = Field(default=None, ge=0, description="Median parse time over the trials")

    def csv_fields(self, with_time: bool = True) -> List[str]:
        fields = [self.family.value, str(self.P), str(self.depth), str(self.languages_seen), str(self.memo_entries)]
        if with_time:
            fields.append(str(self.time_ns if self.time_ns is not None else ""))
        return fields


def _begin(cfg: BenchConfig, x: int) -> str:
    return "begin" if cfg.family is BenchFamily.SHARED_PREFIX else f"begin{x}"


def gen_benchmark(cfg: BenchConfig) -> str:
    """Source text of the benchmark program for one grid point."""
    lines = ["import dsl Bench;", "", "dsl Bench {"]
    for x in range(1, cfg.P + 1):
        lines.append(f'    static String "{_begin(cfg, x)}" _ "end{x}" (D{x} |- String f) {{ return f.apply(new D{x}()); }}')
    lines.append("}")
    lines.append("")
    for x in range(1, cfg.P + 1):
        lines.append(f'dsl D{x} {{ String "dummy{x}" () {{ return "{x}"; }} }}')
    lines.append("")
    opening = " ".join([_begin(cfg, cfg.P)] * cfg.depth)
    closing = " ".join([f"end{cfg.P}"] * cfg.depth)
    lines.append("main {")
    lines.append(f'    String s = {opening} "hello, world!" {closing};')
    lines.append("    println(s);")
    lines.append("}")
    return "\n".join(lines) + "\n"


def measure(cfg: BenchConfig, with_time: bool = True) -> BenchRow:
    """Compile the generated program ``cfg.trials`` times and report the parser counters.

    Raises:
        CtxCompileError: if the generated program does not compile
    """
    source = gen_benchmark(cfg)
    times = []
    stats = None
    for _ in range(cfg.trials if with_time else 1):
        compiler = Compiler(CtxlangConfig(collect_stats=True))
        began = time.perf_counter_ns()
        compilation = compiler.compile(source=source)
        times.append(time.perf_counter_ns() - began)
        stats = compilation.stats
    assert stats is not None
    return BenchRow(
        family=cfg.family,
        P=cfg.P,
        depth=cfg.depth,
        languages_seen=stats.languages_seen,
        memo_entries=stats.memo_entries,
        time_ns=int(statistics.median(times)) if with_time else None,
    )


def grid(
    families: Sequence[BenchFamily], depths: Sequence[int], max_p: int, min_p: int = 8, trials: int = 5
) -> List[BenchConfig]:
    """P doubles from ``min_p`` (or 1 when ``max_p`` is smaller) up to ``max_p``."""
    p = 1 if max_p < min_p else min_p
    ps = []
    while p <= max_p:
        ps.append(p)
        p *= 2
    return [BenchConfig(family=f, P=p, depth=d, trials=trials) for f in families for d in depths for p in ps]


def run_bench(configs: Iterable[BenchConfig], with_time: bool = True) -> List[BenchRow]:
    """Measure every grid point in order; a point that fails to compile is logged and skipped."""
    rows = []
    for cfg in configs:
        try:
            row = measure(cfg, with_time)
        except CtxCompileError as err:
            logger.error(f"benchmark {cfg.family.value} P={cfg.P} depth={cfg.depth} failed: {err}")
            continue
        logger.info(f"benchmark {cfg.family.value} P={cfg.P} depth={cfg.depth}: L={row.languages_seen}")
        rows.append(row)
    return rows


def write_csv(rows: Iterable[BenchRow], stream: TextIO, with_time: bool = True) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS if with_time else CSV_COLUMNS[:-1])
    for row in rows:
        writer.writerow(row.csv_fields(with_time))


def loglog_slope(points: Sequence[Tuple[int, int]]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    if len(points) < 2:
        raise CtxValueError("a slope needs at least two points")
    xs = [math.log(x) for x, _ in points]
    ys = [math.log(y) for _, y in points]
    return statistics.linear_regression(xs, ys).slope
