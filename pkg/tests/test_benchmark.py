import importlib.util
from pathlib import Path

BENCH = Path(__file__).resolve().parent.parent / "benchmarks" / "bench_kernels.py"


def test_benchmark_smoke(capsys):
    spec = importlib.util.spec_from_file_location("bench_kernels", BENCH)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--frames", "50", "--repeat", "1"])
    out = capsys.readouterr().out
    for kernel in ("crc15", "stuff", "destuff", "encode+decode"):
        assert kernel in out
