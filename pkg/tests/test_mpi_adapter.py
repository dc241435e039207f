"""Optional integration checks for the mpi4py backend.

Runs the CLI under ``mpirun`` in a subprocess; skipped when no launcher or
mpi4py is available. Excluded from the acceptance criteria by design.
"""

import shutil
import subprocess
import sys

import pytest

mpi4py = pytest.importorskip("mpi4py")

MPIRUN = shutil.which("mpirun")


def _run_under_mpi(ranks, argv):
    command = [
        MPIRUN, "--allow-run-as-root", "--oversubscribe", "-n", str(ranks),
        sys.executable, "-m", "mpbench", "--transport", "mpi",
    ] + argv
    return subprocess.run(command, capture_output=True, text=True, timeout=120)


@pytest.mark.skipif(MPIRUN is None, reason="no mpirun launcher on PATH")
class TestMpiBackend:
    def test_latency_over_mpi(self):
        result = _run_under_mpi(
            2,
            ["--benchmark", "latency", "--upper-limit", "4", "--iterations", "20",
             "--warm-up", "5"],
        )
        if result.returncode != 0:
            pytest.skip(f"mpirun unusable in this environment: {result.stderr[:200]}")
        assert "# latency  np=2  buffer=direct" in result.stdout
        assert len([l for l in result.stdout.splitlines() if not l.startswith("#")]) >= 3

    def test_collective_over_mpi(self):
        result = _run_under_mpi(
            3,
            ["--benchmark", "bcast", "--np", "3", "--upper-limit", "4",
             "--iterations", "10", "--warm-up", "2"],
        )
        if result.returncode != 0:
            pytest.skip(f"mpirun unusable in this environment: {result.stderr[:200]}")
        assert "# bcast  np=3  buffer=direct" in result.stdout

    def test_world_size_mismatch_fails(self):
        result = _run_under_mpi(2, ["--benchmark", "latency", "--np", "4"])
        assert result.returncode != 0

    def test_ml_rejected_on_mpi(self):
        result = _run_under_mpi(1, ["--benchmark", "matmul", "--np", "1"])
        assert result.returncode != 0
