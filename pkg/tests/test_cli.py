"""
Command Line Tests

Exit codes, config file handling and report output of the wavepp command.
"""

import csv
from pathlib import Path

import pytest

from src.cli.main import (
    BASE_N,
    EXIT_CONFIG,
    EXIT_OK,
    build_parser,
    load_config,
    main,
    sweep_levels,
)
from src.diagnostics.tables import CSV_COLUMNS
from src.models.plans import SigmaBound
from src.utils.errors import ConfigError


PRESETS = sorted((Path(__file__).resolve().parent.parent / "config").glob("*.yaml"))


class TestArguments:
    """Tests for argument parsing and config merging."""

    def test_show_counts(self, capsys):
        """--show-counts prints the solve-count table and exits cleanly."""
        assert main(["--show-counts"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "q  alpha  beta"
        assert lines[4].split() == ["3", "2", "1"]
        assert len(lines) == 12

    def test_yaml_defaults_and_overrides(self, tmp_path):
        """Flags override values from the config file."""
        path = tmp_path / "run.yaml"
        path.write_text("problem: square2d\np: 2\nq: 1\nlevel: 2\nsafety: 0.5\n")
        args = build_parser().parse_args(["--config", str(path), "--q", "3", "--level", "1"])
        config = load_config(args)
        assert config.p == 2
        assert config.q == 3
        assert config.level == 1
        assert config.safety == 0.5

    def test_bound_and_negative_norm_flags(self):
        """--sigma-bound and --negative-norm reach the run configuration."""
        parser = build_parser()
        config = load_config(parser.parse_args(["--N", "10", "--sigma-bound", "lumped", "--negative-norm", "2"]))
        assert config.sigma_bound is SigmaBound.LUMPED
        assert config.negative_norm == 2
        default = load_config(parser.parse_args(["--N", "10"]))
        assert default.sigma_bound is None and default.negative_norm is None

    @pytest.mark.parametrize("preset", PRESETS, ids=lambda p: p.stem)
    def test_presets_are_valid(self, preset):
        """Shipped run presets load into valid configurations."""
        config = load_config(build_parser().parse_args(["--config", str(preset)]))
        assert config.problem.value.startswith(preset.stem.split("_")[0])
        assert config.out is not None

    def test_invalid_yaml(self, tmp_path):
        """Unreadable or non-mapping config files are configuration errors."""
        broken = tmp_path / "broken.yaml"
        broken.write_text("p: [1\n")
        with pytest.raises(ConfigError):
            load_config(build_parser().parse_args(["--config", str(broken)]))
        listing = tmp_path / "list.yaml"
        listing.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_config(build_parser().parse_args(["--config", str(listing)]))

    def test_default_sweep_levels(self):
        """1D sweeps double N from a degree-dependent base; 2D p = 3 stops at level 2."""
        parser = build_parser()
        args = parser.parse_args([])
        one_d = load_config(parser.parse_args(["--p", "2"]))
        assert sweep_levels(one_d, args) == [BASE_N[2], 2 * BASE_N[2], 4 * BASE_N[2]]
        cubic = load_config(parser.parse_args(["--problem", "circle2d", "--p", "3"]))
        assert sweep_levels(cubic, args) == [1, 2]
        assert sweep_levels(cubic, parser.parse_args(["--full"])) == [1, 2, 3]
        assert sweep_levels(cubic, parser.parse_args(["--levels", "2,3"])) == [2, 3]


class TestExitCodes:
    """Tests for exit codes of whole invocations."""

    def test_wrong_refinement_flag(self):
        """--level on the 1D problem is rejected with exit code 2."""
        assert main(["--problem", "periodic1d", "--level", "2"]) == EXIT_CONFIG

    def test_degree_out_of_range(self):
        """p = 4 is not supported."""
        assert main(["--p", "4", "--N", "5"]) == EXIT_CONFIG

    def test_bad_config_file(self, tmp_path):
        """A malformed YAML file exits with code 2."""
        path = tmp_path / "bad.yaml"
        path.write_text("q: {\n")
        assert main(["--config", str(path)]) == EXIT_CONFIG

    def test_missing_refinement(self):
        """A 2D run without a level fails in the mesh stage as a configuration error."""
        assert main(["--problem", "square2d", "--final-time", "0.1"]) == EXIT_CONFIG

    def test_single_run_writes_csv(self, tmp_path, capsys):
        """A single run prints its table and writes one CSV row."""
        out = tmp_path / "single.csv"
        code = main([
            "--problem", "periodic1d", "--p", "1", "--q", "1", "--N", "5",
            "--final-time", "0.5", "--out", str(out),
        ])
        assert code == EXIT_OK
        assert "order" in capsys.readouterr().out
        with out.open() as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 2
        assert rows[1][CSV_COLUMNS.index("N")] == "5"

    def test_sweep_with_order_assertion(self, tmp_path):
        """A converging 1D sweep passes the order assertion."""
        out = tmp_path / "sweep.json"
        code = main([
            "--problem", "periodic1d", "--p", "1", "--q", "1", "--Ns", "20,40",
            "--assert-orders", "--out", str(out), "--format", "json",
        ])
        assert code == EXIT_OK
        assert out.exists()

    def test_iteration_study(self, capsys):
        """--cg-iters-list prints one line per budget plus the direct run."""
        code = main([
            "--problem", "periodic1d", "--p", "1", "--q", "1", "--N", "5",
            "--final-time", "0.5", "--cg-iters-list", "0,5",
        ])
        assert code == EXIT_OK
        lines = [line for line in capsys.readouterr().out.splitlines() if line.startswith("N_it=")]
        assert len(lines) == 3
        assert "direct" in lines[-1]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
