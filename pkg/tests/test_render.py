"""Clinical-scaling image rendering: geometry, determinism, edge cases."""

import re

import numpy as np
import pytest

from ecgexam.errors import RenderError
from ecgexam.leads import LEADS
from ecgexam.records import EcgRecord
from ecgexam.render import MM_PER_S, PX_PER_MM, render_ecg_image, trace_width_px
from ecgexam.synth import SyntheticSpec, synthesize


def flat_record(n=1000, rate=100):
    return EcgRecord(id="flat", sampling_rate=rate, leads=LEADS,
                     samples=np.zeros((12, n), dtype=np.float32))


class TestScaling:
    def test_ten_second_trace_is_250_mm(self):
        rec = flat_record()
        assert trace_width_px(rec) == round(10 * MM_PER_S * PX_PER_MM)
        assert trace_width_px(rec) / PX_PER_MM == 250.0

    def test_rhythm_row_spans_250_mm(self):
        rec = flat_record()
        svg = render_ecg_image(rec, layout="grid-3x4-plus-rhythm", fmt="svg").decode()
        polylines = re.findall(r'<polyline points="([^"]+)"', svg)
        # last polyline is the rhythm strip
        xs = [float(p.split(",")[0]) for p in polylines[-1].split()]
        assert max(xs) - min(xs) == pytest.approx(250.0 * PX_PER_MM, abs=PX_PER_MM)


class TestDeterminismAndContent:
    def test_flat_record_straight_baselines(self):
        svg = render_ecg_image(flat_record(), layout="stacked-12", fmt="svg").decode()
        for points in re.findall(r'<polyline points="([^"]+)"', svg):
            ys = {p.split(",")[1] for p in points.split()}
            assert len(ys) == 1

    @pytest.mark.parametrize("layout", ["grid-3x4-plus-rhythm", "stacked-12"])
    @pytest.mark.parametrize("fmt", ["svg", "png"])
    def test_same_input_identical_bytes(self, layout, fmt):
        result = synthesize(SyntheticSpec(record_id="render-det"))
        a = render_ecg_image(result.record, layout=layout, fmt=fmt)
        b = render_ecg_image(result.record, layout=layout, fmt=fmt)
        assert a == b

    def test_png_parses_as_image(self):
        from io import BytesIO

        from PIL import Image

        payload = render_ecg_image(flat_record(), fmt="png")
        img = Image.open(BytesIO(payload))
        assert img.size[0] > 1000

    def test_all_leads_labelled(self):
        svg = render_ecg_image(flat_record(), layout="stacked-12", fmt="svg").decode()
        for lead in LEADS:
            assert f">{lead}</text>" in svg


class TestErrors:
    def test_zero_duration_rejected(self):
        rec = EcgRecord(id="empty", sampling_rate=100, leads=LEADS,
                        samples=np.zeros((12, 0), dtype=np.float32))
        with pytest.raises(RenderError):
            render_ecg_image(rec)

    def test_unknown_layout(self):
        with pytest.raises(ValueError):
            render_ecg_image(flat_record(), layout="wall-chart")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            render_ecg_image(flat_record(), fmt="bmp")
