"""Heatmap pipeline: pixel snapping, conservation, outputs, uniformity."""

import numpy as np
import pytest
from scipy import stats

from gbac.heatmap import (
    TraceError,
    accumulate_heatmap,
    heatmap_from_trace,
    read_trace_locations,
    write_pgm,
    write_sparse_csv,
)


def write_trace(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("episode,t,x,y,action,reward\n")
        for i, (x, y) in enumerate(rows):
            fh.write(f"0,{i},{x},{y},0,0.0\n")


def pixel_probs(dim):
    """Exact pixel-landing probabilities for a uniform location coordinate."""
    p = np.full(dim, 1.0 / (dim - 1))
    p[0] = p[-1] = 0.5 / (dim - 1)
    return p


class TestAccumulate:
    def test_midpoint_on_atari_dims(self):
        counts = accumulate_heatmap(np.array([[0.0, 0.0]]), 210, 160)
        assert counts.sum() == 1
        assert counts[105, 80] == 1

    def test_corners(self):
        counts = accumulate_heatmap(np.array([[-1.0, -1.0], [1.0, 1.0]]), 64, 64)
        assert counts[0, 0] == 1 and counts[63, 63] == 1

    def test_conservation(self):
        rng = np.random.default_rng(0)
        locs = rng.uniform(-1, 1, size=(5000, 2))
        counts = accumulate_heatmap(locs, 96, 96)
        assert counts.sum() == 5000

    def test_x_is_column_y_is_row(self):
        counts = accumulate_heatmap(np.array([[1.0, -1.0]]), 64, 32)
        assert counts[0, 31] == 1


class TestTraceParsing:
    def test_round_trip(self, tmp_path):
        path = str(tmp_path / "t.csv")
        write_trace(path, [(0.25, -0.5), (1.0, 1.0)])
        locs = read_trace_locations(path)
        assert locs.shape == (2, 2)
        assert locs[0].tolist() == [0.25, -0.5]

    def test_out_of_range_names_line(self, tmp_path):
        path = str(tmp_path / "t.csv")
        write_trace(path, [(0.0, 0.0), (1.5, 0.0)])
        with pytest.raises(TraceError, match="line 3"):
            read_trace_locations(path)

    def test_malformed_row_names_line(self, tmp_path):
        path = str(tmp_path / "t.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("episode,t,x,y,action,reward\n0,0,0.0,0.0,0,0.0\n0,1,zebra,0.0,0,0.0\n")
        with pytest.raises(TraceError, match="line 3"):
            read_trace_locations(path)

    def test_missing_columns(self, tmp_path):
        path = str(tmp_path / "t.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("episode,t,action\n")
        with pytest.raises(TraceError, match="header"):
            read_trace_locations(path)

    def test_empty_file(self, tmp_path):
        path = str(tmp_path / "t.csv")
        open(path, "w").close()
        with pytest.raises(TraceError, match="empty"):
            read_trace_locations(path)


class TestOutputs:
    def test_pgm_format(self, tmp_path):
        counts = np.zeros((4, 6), dtype=np.int64)
        counts[1, 2] = 10
        counts[3, 5] = 5
        path = str(tmp_path / "m.pgm")
        write_pgm(counts, path)
        with open(path, "rb") as fh:
            data = fh.read()
        header = b"P5\n6 4\n255\n"
        assert data.startswith(header)
        img = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(4, 6)
        assert img[1, 2] == 255
        assert img[3, 5] == 128  # round(5/10*255) with half-up
        assert img.sum() == 255 + 128

    def test_pgm_all_zero(self, tmp_path):
        path = str(tmp_path / "z.pgm")
        write_pgm(np.zeros((3, 3), dtype=np.int64), path)
        with open(path, "rb") as fh:
            data = fh.read()
        assert data.endswith(b"\x00" * 9)

    def test_sparse_csv(self, tmp_path):
        counts = np.zeros((5, 5), dtype=np.int64)
        counts[0, 3] = 2
        counts[4, 1] = 7
        path = str(tmp_path / "m.csv")
        write_sparse_csv(counts, path)
        lines = open(path, encoding="utf-8").read().splitlines()
        assert lines == ["row,col,count", "0,3,2", "4,1,7"]

    def test_end_to_end(self, tmp_path):
        trace = str(tmp_path / "t.csv")
        rng = np.random.default_rng(1)
        write_trace(trace, [tuple(v) for v in rng.uniform(-1, 1, size=(200, 2))])
        summary = heatmap_from_trace(trace, 64, 64, str(tmp_path / "hm"))
        assert summary["records"] == summary["total"] == 200
        for ext in (".pgm", ".csv", ".png"):
            assert (tmp_path / f"hm{ext}").exists(), ext
        png = (tmp_path / "hm.png").read_bytes()
        assert png[:8] == b"\x89PNG\r\n\x1a\n"


class TestUniformity:
    def test_uniform_trace_passes_chi2(self):
        """10^5 uniform locations over 8x8 bins, exact bin probabilities."""
        n, h, w = 100_000, 64, 64
        rng = np.random.default_rng(2024)
        counts = accumulate_heatmap(rng.uniform(-1, 1, size=(n, 2)), h, w)
        row_bin = np.arange(h) * 8 // h
        col_bin = np.arange(w) * 8 // w
        binned = np.zeros((8, 8))
        np.add.at(binned, (row_bin[:, None].repeat(w, 1), col_bin[None, :].repeat(h, 0)), counts)
        p_row = np.array([pixel_probs(h)[row_bin == b].sum() for b in range(8)])
        p_col = np.array([pixel_probs(w)[col_bin == b].sum() for b in range(8)])
        expected = n * np.outer(p_row, p_col)
        _, p_value = stats.chisquare(binned.reshape(-1), expected.reshape(-1))
        assert p_value > 0.001

    def test_point_mass_fails_chi2(self):
        n, h, w = 10_000, 64, 64
        counts = accumulate_heatmap(np.zeros((n, 2)), h, w)
        row_bin = np.arange(h) * 8 // h
        col_bin = np.arange(w) * 8 // w
        binned = np.zeros((8, 8))
        np.add.at(binned, (row_bin[:, None].repeat(w, 1), col_bin[None, :].repeat(h, 0)), counts)
        p_row = np.array([pixel_probs(h)[row_bin == b].sum() for b in range(8)])
        p_col = np.array([pixel_probs(w)[col_bin == b].sum() for b in range(8)])
        _, p_value = stats.chisquare(binned.reshape(-1), n * np.outer(p_row, p_col).reshape(-1))
        assert p_value < 1e-6
