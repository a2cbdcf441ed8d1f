import statistics
import time
from collections.abc import Awaitable, Callable
from dataclasses import dataclass
from functools import cache
from pathlib import Path
from typing import Any

import pytest
from _pytest.config import Config
from _pytest.terminal import TerminalReporter

from core.analysis import AssetModel, ClauseSpec, classify_assets, derive_specs
from core.automaton import Automaton, CycleReport, build_automaton, enumerate_cycles
from core.parser import canonicalize, parse_contract
from core.syntax import ContractAst

FIXTURES = Path(__file__).parent / "fixtures"
CASE_STUDIES = ("license", "deposit", "loan", "betting")


def fixture_path(name: str) -> Path:
    """Path of a fixture file, ``.stipula`` assumed when no suffix is given."""
    path = FIXTURES / name
    return path if path.suffix else path.with_suffix(".stipula")


def load(name: str) -> ContractAst:
    """Parse and canonicalize a fixture contract."""
    return canonicalize(parse_contract(fixture_path(name).read_text(encoding="utf-8")))


@dataclass
class Analysed:
    """A fixture contract with the results of every static pass."""

    ast: ContractAst
    automaton: Automaton
    cycles: CycleReport
    models: list[AssetModel]
    specs: dict[str, ClauseSpec]

    @property
    def model_map(self) -> dict[str, AssetModel]:
        return {m.asset: m for m in self.models}


def analyse(name: str) -> Analysed:
    ast = load(name)
    automaton = build_automaton(ast)
    models = classify_assets(ast)
    return Analysed(ast, automaton, enumerate_cycles(automaton), models, derive_specs(ast, models))


@cache
def shared(name: str) -> Analysed:
    """:func:`analyse` run once per session, for property tests and parametrization."""
    return analyse(name)


@pytest.fixture
def license_ast() -> ContractAst:
    return load("license")


@pytest.fixture
def deposit_ast() -> ContractAst:
    return load("deposit")


@pytest.fixture
def loan_ast() -> ContractAst:
    return load("loan")


@pytest.fixture
def betting_ast() -> ContractAst:
    return load("betting")


@pytest.fixture
def license_contract() -> Analysed:
    return analyse("license")


@pytest.fixture
def deposit_contract() -> Analysed:
    return analyse("deposit")


@pytest.fixture
def loan_contract() -> Analysed:
    return analyse("loan")


@pytest.fixture
def betting_contract() -> Analysed:
    return analyse("betting")


@dataclass(frozen=True)
class BenchmarkResult:
    """Wall-clock timings of one benchmarked pipeline call, in seconds."""

    name: str
    times: tuple[float, ...]

    @property
    def mean_time(self) -> float:
        return statistics.fmean(self.times)

    @property
    def median_time(self) -> float:
        return statistics.median(self.times)

    @property
    def max_time(self) -> float:
        return max(self.times)


_benchmark_results: list[BenchmarkResult] = []


def pytest_terminal_summary(terminalreporter: TerminalReporter, exitstatus: int, config: Config):
    """Print one row per benchmark, slowest first."""
    if not _benchmark_results:
        return

    terminalreporter.section("Compile timings")
    header = f"{'benchmark':<44} {'runs':>5} {'mean (ms)':>10} {'median (ms)':>12} {'max (ms)':>10}"
    terminalreporter.write_line(header)
    terminalreporter.write_line("-" * len(header))
    for result in sorted(_benchmark_results, key=lambda r: r.mean_time, reverse=True):
        row = (
            f"{result.name:<44} {len(result.times):>5} "
            f"{result.mean_time * 1000:>10.2f} "
            f"{result.median_time * 1000:>12.2f} "
            f"{result.max_time * 1000:>10.2f}"
        )
        slow = result.mean_time >= 1.0
        terminalreporter.write_line(row, green=not slow, red=slow)


@pytest.fixture
def async_benchmark(request: pytest.FixtureRequest):
    """Time an async pipeline stage over several runs after a warmup."""

    async def _benchmark(
        func: Callable[..., Awaitable[Any]],
        *args: Any,
        iterations: int = 5,
        warmup: int = 1,
        **kwargs: Any,
    ) -> BenchmarkResult:
        for _ in range(warmup):
            await func(*args, **kwargs)
        times = []
        for _ in range(iterations):
            start = time.perf_counter()
            await func(*args, **kwargs)
            times.append(time.perf_counter() - start)
        result = BenchmarkResult(request.node.name, tuple(times))
        _benchmark_results.append(result)
        return result

    return _benchmark
